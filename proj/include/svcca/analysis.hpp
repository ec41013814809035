// Copyright 2026 The svcca-toolkit Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "svcca/activation_io.hpp"
#include "svcca/svcca_core.hpp"

namespace svcca {

/// How the two sides of each point are paired.
///
/// CrossModel: layer l of run A against layer l of run B at the same epoch.
/// WithinModel: layer l at epoch e against layer l at the run's final epoch
/// (the convergence construction).
enum class SeriesMode { CrossModel, WithinModel };

std::string to_string(SeriesMode mode);

enum class EpochAlignment {
    Strict,    ///< every requested epoch must exist in both runs
    Truncate,  ///< intersect the epoch sets; dropped epochs are reported
};

struct TrajectoryPoint {
    int epoch = 0;
    double mean_coefficient = 0.0;
    int rank_a = 0;
    int rank_b = 0;
};

struct TrajectorySeries {
    std::string comparison_id;
    SeriesMode mode = SeriesMode::CrossModel;
    int layer = 0;
    std::vector<TrajectoryPoint> points;  ///< strictly increasing epochs
    SvccaConfig config;
};

struct CrossModelResult {
    std::vector<TrajectorySeries> series;  ///< one per layer, ascending
    std::vector<int> epochs;               ///< epochs actually compared
    std::vector<int> dropped_epochs;       ///< removed by Truncate alignment
};

/// Same-layer, same-epoch similarity between two runs.
///
/// Empty `layers` / `epochs` mean "all": the layers of run A, and the union
/// of both runs' epochs (which Strict alignment then requires to match).
CrossModelResult cross_model_series(const RunManifest& a, const RunManifest& b,
                                    std::vector<int> layers, std::vector<int> epochs,
                                    const SvccaConfig& cfg,
                                    EpochAlignment align = EpochAlignment::Strict, int jobs = 1,
                                    std::string comparison_id = {});

/// Layer l at each epoch against layer l at the run's final epoch.
std::vector<TrajectorySeries> convergence_series(const RunManifest& run, std::vector<int> layers,
                                                 std::vector<int> epochs, const SvccaConfig& cfg,
                                                 int jobs = 1);

struct LayerPairMatrix {
    std::string comparison_id;
    int epoch = 0;
    std::vector<int> layers;  ///< manifest order
    Matrix coefficients;      ///< symmetric, unit diagonal
    std::vector<int> ranks;   ///< retained rank of each layer
};

/// Every layer against every other layer of one run at one epoch. Empty
/// `layers` means all layers in manifest order.
LayerPairMatrix within_model_pairs(const RunManifest& run, int epoch, const SvccaConfig& cfg,
                                   int jobs = 1, std::vector<int> layers = {});

struct LayerDeviationSummary {
    std::string comparison_id;
    std::map<int, double> per_layer;      ///< population std over epochs
    std::vector<int> single_point_layers;  ///< layers whose series had one point
};

LayerDeviationSummary layer_deviation(const std::vector<TrajectorySeries>& series_set);

/// Population standard deviation, two-pass.
double population_std(const std::vector<double>& values);

struct RunBundle {
    std::string model_id;
    std::vector<TrajectorySeries> series;  ///< convergence mode
    std::map<int, double> mean_per_layer;
    LayerDeviationSummary deviation;
    /// Layer-pair matrix at the final compared epoch and the mean and
    /// population std of its off-diagonal entries.
    LayerPairMatrix final_pairs;
    double final_pair_mean = 0.0;
    double final_pair_spread = 0.0;
};

struct ConfigurationComparison {
    std::vector<RunBundle> bundles;  ///< input order
    /// Indices into `bundles`, largest final-epoch pair spread first; ties
    /// keep input order.
    std::vector<std::size_t> ranking;
    /// External metrics (e.g. WER per test set) carried through untouched.
    std::optional<nlohmann::ordered_json> metrics;
};

ConfigurationComparison compare_configurations(
    const std::vector<RunManifest>& runs, const std::vector<int>& layers,
    const std::vector<int>& epochs, const SvccaConfig& cfg, int jobs = 1,
    std::optional<nlohmann::ordered_json> metrics = std::nullopt);

}  // namespace svcca
