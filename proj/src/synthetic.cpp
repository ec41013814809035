// Copyright 2026 The svcca-toolkit Authors
//
// Licensed under the Apache License, Version 2.0

#include "svcca/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "svcca/errors.hpp"

namespace svcca::synthetic {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr double kOracleRidge = 1e-10;
constexpr double kOracleSingular = 1e-12;

std::mt19937_64 stream(std::uint64_t seed, std::uint32_t purpose, std::uint32_t a = 0,
                       std::uint32_t b = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xFFFFFFFFu),
                      static_cast<std::uint32_t>(seed >> 32), purpose, a, b};
    return std::mt19937_64(seq);
}

Matrix gaussian(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix m(rows, cols);
    // Fill row by row so the draw order matches the (neuron, sample) layout.
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            m(i, j) = normal(rng);
        }
    }
    return m;
}

Matrix random_orthogonal(std::mt19937_64& rng, Eigen::Index n) {
    Eigen::HouseholderQR<Matrix> qr(gaussian(rng, n, n));
    return qr.householderQ() * Matrix::Identity(n, n);
}

// Q1 * diag(s) * Q2 with s in [0.5, 2]: invertible, condition number <= 4.
Matrix random_invertible(std::mt19937_64& rng, Eigen::Index n) {
    std::uniform_real_distribution<double> scale(0.5, 2.0);
    Eigen::VectorXd s(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        s[i] = scale(rng);
    }
    const Matrix q1 = random_orthogonal(rng, n);
    const Matrix q2 = random_orthogonal(rng, n);
    return q1 * s.asDiagonal() * q2;
}

Matrix covariance(const Matrix& x, const Matrix& y) {
    return x * y.transpose() / static_cast<double>(x.cols() - 1);
}

Eigen::LDLT<Matrix> factor_covariance(const Matrix& sigma, const char* side) {
    // Judge conditioning before the ridge; afterwards it always looks fine.
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (eig.info() != Eigen::Success || !(hi > 0.0) || lo < kOracleSingular * hi) {
        throw NumericalError(std::string("oracle: covariance of ") + side + " is singular");
    }
    return Eigen::LDLT<Matrix>(sigma + kOracleRidge * Matrix::Identity(sigma.rows(), sigma.cols()));
}

std::string layer_file(int epoch, int layer) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "epoch%04d_layer%03d.npy", epoch, layer);
    return buf;
}

}  // namespace

Matrix random_orthogonal(std::uint64_t seed, int n) {
    auto rng = stream(seed, 5);
    return random_orthogonal(rng, n);
}

void PlantedPairSpec::validate() const {
    if (d_a < 1 || d_b < 1) {
        throw ConfigError("planted pair: d_a and d_b must be positive");
    }
    if (samples <= d_a + d_b) {
        throw ConfigError("planted pair: need N > d_a + d_b");
    }
    if (planted_correlations.size() > static_cast<std::size_t>(std::min(d_a, d_b))) {
        throw ConfigError("planted pair: more planted correlations than min(d_a, d_b)");
    }
    for (std::size_t i = 0; i < planted_correlations.size(); ++i) {
        const double rho = planted_correlations[i];
        if (!(rho >= 0.0 && rho <= 1.0)) {
            throw ConfigError("planted pair: correlations must lie in [0, 1]");
        }
        if (i > 0 && rho > planted_correlations[i - 1]) {
            throw ConfigError("planted pair: correlations must be non-increasing");
        }
    }
}

std::pair<ActivationMatrix, ActivationMatrix> gen_correlated_pair(const PlantedPairSpec& spec) {
    spec.validate();
    std::mt19937_64 rng = stream(spec.seed, 0);

    Matrix a = gaussian(rng, spec.d_a, spec.samples);
    Matrix b = gaussian(rng, spec.d_b, spec.samples);
    for (std::size_t j = 0; j < spec.planted_correlations.size(); ++j) {
        const double rho = spec.planted_correlations[j];
        const auto row = static_cast<Eigen::Index>(j);
        b.row(row) = rho * a.row(row) + std::sqrt(1.0 - rho * rho) * b.row(row);
    }
    if (spec.mix) {
        a = random_invertible(rng, spec.d_a) * a;
        b = random_invertible(rng, spec.d_b) * b;
    }
    return {ActivationMatrix::make(Source{"planted_a", 0, 1}, std::move(a)),
            ActivationMatrix::make(Source{"planted_b", 0, 1}, std::move(b))};
}

std::vector<double> cca_brute_oracle(const Matrix& x, const Matrix& y) {
    if (x.cols() != y.cols()) {
        throw ShapeError("oracle: sample count mismatch");
    }
    if (x.cols() < 2) {
        throw ShapeError("oracle: need at least two samples");
    }
    const Matrix sxx = covariance(x, x);
    const Matrix syy = covariance(y, y);
    const Matrix sxy = covariance(x, y);

    const auto fx = factor_covariance(sxx, "x");
    const auto fy = factor_covariance(syy, "y");
    // Sxx^-1 Sxy Syy^-1 Syx
    const Matrix m = fx.solve(sxy * fy.solve(sxy.transpose()));
    Eigen::EigenSolver<Matrix> eig(m, false);
    if (eig.info() != Eigen::Success) {
        throw NumericalError("oracle: eigen decomposition did not converge");
    }

    std::vector<double> rho;
    for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i) {
        const double lambda = eig.eigenvalues()[i].real();
        rho.push_back(std::clamp(std::sqrt(std::max(lambda, 0.0)), 0.0, 1.0));
    }
    std::sort(rho.begin(), rho.end(), std::greater<>());
    rho.resize(static_cast<std::size_t>(std::min(x.rows(), y.rows())));
    return rho;
}

std::vector<double> cca_brute_oracle(const ActivationMatrix& x, const ActivationMatrix& y) {
    return cca_brute_oracle(x.data(), y.data());
}

void SyntheticRunSpec::validate() const {
    if (model_id.empty()) {
        throw ConfigError("synthetic run: model_id is empty");
    }
    if (layers < 1 || epochs < 1 || neurons < 1) {
        throw ConfigError("synthetic run: layers, epochs and neurons must be positive");
    }
    if (samples < 2) {
        throw ConfigError("synthetic run: need at least two samples");
    }
    for (const auto* set : {&frozen_layers, &shared_layers}) {
        for (int layer : *set) {
            if (layer < 1 || layer > layers) {
                throw ConfigError("synthetic run: layer id " + std::to_string(layer) +
                                  " outside 1.." + std::to_string(layers));
            }
        }
    }
    if (!(drift_rate >= 0.0) || !std::isfinite(drift_rate)) {
        throw ConfigError("synthetic run: drift_rate must be finite and >= 0");
    }
}

ordered_json to_json(const SyntheticRunSpec& spec) {
    ordered_json doc;
    doc["model_id"] = spec.model_id;
    doc["layers"] = spec.layers;
    doc["epochs"] = spec.epochs;
    doc["neurons"] = spec.neurons;
    doc["samples"] = spec.samples;
    doc["frozen_layers"] = spec.frozen_layers;
    doc["shared_layers"] = spec.shared_layers;
    doc["drift_rate"] = spec.drift_rate;
    doc["seed"] = spec.seed;
    doc["shared_seed"] = spec.shared_seed;
    doc["dtype"] = std::string(npy::descr(spec.dtype));
    return doc;
}

SyntheticRunSpec run_spec_from_json(const json& doc) {
    SyntheticRunSpec spec;
    try {
        spec.model_id = doc.value("model_id", spec.model_id);
        spec.layers = doc.at("layers").get<int>();
        spec.epochs = doc.at("epochs").get<int>();
        spec.neurons = doc.at("neurons").get<int>();
        spec.samples = doc.at("samples").get<int>();
        spec.frozen_layers = doc.value("frozen_layers", std::set<int>{});
        spec.shared_layers = doc.value("shared_layers", std::set<int>{});
        spec.drift_rate = doc.value("drift_rate", 0.0);
        spec.seed = doc.value("seed", std::uint64_t{0});
        spec.shared_seed = doc.value("shared_seed", std::uint64_t{0});
        const std::string dtype = doc.value("dtype", std::string("<f8"));
        if (dtype == "<f4") {
            spec.dtype = npy::Dtype::Float32;
        } else if (dtype != "<f8") {
            throw ConfigError("synthetic run: dtype must be <f4 or <f8");
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("synthetic run spec: ") + e.what());
    }
    spec.validate();
    return spec;
}

RunManifest gen_synthetic_run(const SyntheticRunSpec& spec, const std::filesystem::path& out_dir) {
    spec.validate();
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) {
        throw ConfigError("cannot create " + out_dir.string() + ": " + ec.message());
    }

    const Eigen::Index d = spec.neurons;
    const Eigen::Index n = spec.samples;
    ordered_json entries = ordered_json::array();
    for (int layer = 1; layer <= spec.layers; ++layer) {
        const auto tag = static_cast<std::uint32_t>(layer);
        const bool shared = spec.shared_layers.count(layer) > 0;
        const bool frozen = spec.frozen_layers.count(layer) > 0;

        auto init_rng = stream(spec.shared_seed, 1, tag);
        auto target_rng = shared ? stream(spec.shared_seed, 2, tag) : stream(spec.seed, 3, tag);
        const Matrix init = gaussian(init_rng, d, n);
        const Matrix target = gaussian(target_rng, d, n);

        for (int epoch = 1; epoch <= spec.epochs; ++epoch) {
            Matrix x;
            if (frozen) {
                x = target;
            } else {
                const double t = spec.epochs == 1
                                     ? 1.0
                                     : static_cast<double>(epoch - 1) / (spec.epochs - 1);
                auto noise_rng = stream(spec.seed, 4, tag, static_cast<std::uint32_t>(epoch));
                x = (1.0 - t) * init + t * target +
                    (spec.drift_rate / epoch) * gaussian(noise_rng, d, n);
            }
            const std::string file = layer_file(epoch, layer);
            write_activation_file(out_dir / file, x, spec.dtype, Layout::SamplesMajor);

            ordered_json e;
            e["epoch"] = epoch;
            e["layer"] = layer;
            e["path"] = file;
            e["shape"] = {spec.samples, spec.neurons};
            e["order"] = "samples_major";
            e["dtype"] = std::string(npy::descr(spec.dtype));
            entries.push_back(std::move(e));
        }
    }

    ordered_json manifest;
    manifest["model_id"] = spec.model_id;
    manifest["sample_count"] = spec.samples;
    std::vector<int> layers(static_cast<std::size_t>(spec.layers));
    std::vector<int> epochs(static_cast<std::size_t>(spec.epochs));
    for (int i = 0; i < spec.layers; ++i) layers[static_cast<std::size_t>(i)] = i + 1;
    for (int i = 0; i < spec.epochs; ++i) epochs[static_cast<std::size_t>(i)] = i + 1;
    manifest["layers"] = layers;
    manifest["epochs"] = epochs;
    manifest["entries"] = std::move(entries);
    manifest["generator"] = kGeneratorId;
    manifest["synthetic_spec"] = to_json(spec);

    const auto manifest_path = out_dir / "manifest.json";
    {
        std::ofstream out(manifest_path, std::ios::trunc);
        if (!out) {
            throw ConfigError("cannot write " + manifest_path.string());
        }
        out << manifest.dump(2) << '\n';
    }
    return load_run(manifest_path);
}

}  // namespace svcca::synthetic
