// Copyright 2026 The svcca-toolkit Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "svcca/activation_io.hpp"

namespace svcca::synthetic {

/// Name of the pseudo-random stream used by every generator. Written into
/// generated manifests so fixtures can be compared across builds.
inline constexpr const char* kGeneratorId = "std::mt19937_64+std::normal_distribution<double>";

/// Two views whose population canonical correlations are known exactly.
struct PlantedPairSpec {
    int d_a = 1;
    int d_b = 1;
    int samples = 2;
    std::vector<double> planted_correlations;
    std::uint64_t seed = 0;
    /// Multiply each view by a random invertible matrix; when false the rows
    /// are the latent coordinates themselves.
    bool mix = true;

    void validate() const;
};

/// Draws a jointly Gaussian pair (d_a x N, d_b x N). Latent row j of view A
/// is z_j; row j of view B is rho_j z_j + sqrt(1 - rho_j^2) e_j; every other
/// row is independent noise. Each view is then multiplied by a random
/// well-conditioned invertible matrix. Deterministic in `seed`.
std::pair<ActivationMatrix, ActivationMatrix> gen_correlated_pair(const PlantedPairSpec& spec);

/// Haar-distributed n x n orthogonal matrix, deterministic in `seed`.
Matrix random_orthogonal(std::uint64_t seed, int n);

/// Textbook covariance route: square roots of the eigenvalues of
/// Sxx^-1 Sxy Syy^-1 Syx, with a 1e-10 ridge on both covariances. Inputs
/// must be centered and share N. Returns min(d_x, d_y) values, descending,
/// clamped to [0, 1]. Singular covariances raise NumericalError.
std::vector<double> cca_brute_oracle(const Matrix& x, const Matrix& y);
std::vector<double> cca_brute_oracle(const ActivationMatrix& x, const ActivationMatrix& y);

/// A synthetic training run.
///
/// Every layer has a target matrix it converges to. Shared layers draw their
/// target from `shared_seed`, so two runs with the same shared seed agree on
/// those layers; other layers draw it from `seed`. All runs with the same
/// shared seed also start from the same initial matrix per layer.
///
/// Frozen layers emit the target at every epoch. Other layers at epoch e of
/// E emit (1 - t) * init + t * target + (drift_rate / e) * noise with
/// t = (e - 1) / (E - 1), so the last epoch sits closest to the target.
struct SyntheticRunSpec {
    std::string model_id = "synthetic";
    int layers = 1;
    int epochs = 1;
    int neurons = 1;
    int samples = 2;
    std::set<int> frozen_layers;
    std::set<int> shared_layers;
    double drift_rate = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t shared_seed = 0;
    npy::Dtype dtype = npy::Dtype::Float64;

    void validate() const;
};

nlohmann::ordered_json to_json(const SyntheticRunSpec& spec);
SyntheticRunSpec run_spec_from_json(const nlohmann::json& doc);

/// Writes one NPY per (epoch, layer) in samples-major order plus
/// `manifest.json` under `out_dir`, and returns the loaded manifest.
RunManifest gen_synthetic_run(const SyntheticRunSpec& spec, const std::filesystem::path& out_dir);

}  // namespace svcca::synthetic
