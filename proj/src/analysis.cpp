// Copyright 2026 The svcca-toolkit Authors
//
// Licensed under the Apache License, Version 2.0

#include "svcca/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "svcca/errors.hpp"
#include "svcca/parallel.hpp"

namespace svcca {

namespace {

std::vector<int> sorted_unique(std::vector<int> ids) {
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
}

std::string join(const std::vector<int>& ids) {
    std::string out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        out += (i ? "," : "") + std::to_string(ids[i]);
    }
    return out;
}

std::vector<int> missing_from(const std::vector<int>& wanted, const std::vector<int>& have) {
    const std::set<int> pool(have.begin(), have.end());
    std::vector<int> out;
    for (int id : wanted) {
        if (!pool.count(id)) {
            out.push_back(id);
        }
    }
    return out;
}

void require_layers(const RunManifest& run, const std::vector<int>& layers) {
    const auto missing = missing_from(layers, run.layers());
    if (!missing.empty()) {
        throw AlignmentError("run '" + run.model_id() + "' has no layer(s) " + join(missing));
    }
}

void require_epochs(const RunManifest& run, const std::vector<int>& epochs) {
    const auto missing = missing_from(epochs, run.epochs());
    if (!missing.empty()) {
        throw AlignmentError("run '" + run.model_id() + "' is missing epoch(s) " + join(missing));
    }
}

double mean_of(const std::vector<double>& values) {
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

}  // namespace

std::string to_string(SeriesMode mode) {
    return mode == SeriesMode::CrossModel ? "cross_model" : "within_model";
}

CrossModelResult cross_model_series(const RunManifest& a, const RunManifest& b,
                                    std::vector<int> layers, std::vector<int> epochs,
                                    const SvccaConfig& cfg, EpochAlignment align, int jobs,
                                    std::string comparison_id) {
    cfg.validate();
    if (a.sample_count() != b.sample_count()) {
        throw ShapeError("runs '" + a.model_id() + "' and '" + b.model_id() +
                         "' use different probe sample counts (" +
                         std::to_string(a.sample_count()) + " vs " +
                         std::to_string(b.sample_count()) + ")");
    }
    if (comparison_id.empty()) {
        comparison_id = a.model_id() + "_vs_" + b.model_id();
    }

    layers = sorted_unique(layers.empty() ? a.layers() : std::move(layers));
    require_layers(a, layers);
    require_layers(b, layers);

    if (epochs.empty()) {
        epochs = a.epochs();
        epochs.insert(epochs.end(), b.epochs().begin(), b.epochs().end());
    }
    epochs = sorted_unique(std::move(epochs));

    CrossModelResult result;
    if (align == EpochAlignment::Strict) {
        require_epochs(a, epochs);
        require_epochs(b, epochs);
        result.epochs = epochs;
    } else {
        for (int e : epochs) {
            (a.has_epoch(e) && b.has_epoch(e) ? result.epochs : result.dropped_epochs).push_back(e);
        }
        if (result.epochs.empty()) {
            throw AlignmentError("runs '" + a.model_id() + "' and '" + b.model_id() +
                                 "' share none of the requested epochs");
        }
    }

    const std::size_t n_epochs = result.epochs.size();
    std::vector<TrajectoryPoint> points(layers.size() * n_epochs);
    parallel_for(points.size(), jobs, [&](std::size_t task) {
        const int layer = layers[task / n_epochs];
        const int epoch = result.epochs[task % n_epochs];
        const CcaSpectrum s = svcca_similarity(a.fetch(epoch, layer), b.fetch(epoch, layer), cfg);
        points[task] = TrajectoryPoint{epoch, s.mean_coefficient, s.rank_a, s.rank_b};
    });

    for (std::size_t li = 0; li < layers.size(); ++li) {
        TrajectorySeries series;
        series.comparison_id = comparison_id;
        series.mode = SeriesMode::CrossModel;
        series.layer = layers[li];
        series.config = cfg;
        series.points.assign(points.begin() + static_cast<std::ptrdiff_t>(li * n_epochs),
                             points.begin() + static_cast<std::ptrdiff_t>((li + 1) * n_epochs));
        result.series.push_back(std::move(series));
    }
    return result;
}

std::vector<TrajectorySeries> convergence_series(const RunManifest& run, std::vector<int> layers,
                                                 std::vector<int> epochs, const SvccaConfig& cfg,
                                                 int jobs) {
    cfg.validate();
    layers = sorted_unique(layers.empty() ? run.layers() : std::move(layers));
    epochs = sorted_unique(epochs.empty() ? run.epochs() : std::move(epochs));
    require_layers(run, layers);
    require_epochs(run, epochs);
    const int final_epoch = run.epochs().back();

    auto subspace = [&](int epoch, int layer) {
        const ActivationMatrix x = run.fetch(epoch, layer);
        return svd_truncate(cfg.center ? center(x) : x, cfg.variance_threshold);
    };

    std::vector<LayerSubspace> reference(layers.size());
    parallel_for(layers.size(), jobs,
                 [&](std::size_t li) { reference[li] = subspace(final_epoch, layers[li]); });

    const std::size_t n_epochs = epochs.size();
    std::vector<TrajectoryPoint> points(layers.size() * n_epochs);
    parallel_for(points.size(), jobs, [&](std::size_t task) {
        const std::size_t li = task / n_epochs;
        const int epoch = epochs[task % n_epochs];
        const CcaSpectrum s =
            cca(subspace(epoch, layers[li]), reference[li], cfg.regularization_epsilon);
        points[task] = TrajectoryPoint{epoch, s.mean_coefficient, s.rank_a, s.rank_b};
    });

    std::vector<TrajectorySeries> out;
    for (std::size_t li = 0; li < layers.size(); ++li) {
        TrajectorySeries series;
        series.comparison_id = run.model_id() + "_convergence";
        series.mode = SeriesMode::WithinModel;
        series.layer = layers[li];
        series.config = cfg;
        series.points.assign(points.begin() + static_cast<std::ptrdiff_t>(li * n_epochs),
                             points.begin() + static_cast<std::ptrdiff_t>((li + 1) * n_epochs));
        out.push_back(std::move(series));
    }
    return out;
}

LayerPairMatrix within_model_pairs(const RunManifest& run, int epoch, const SvccaConfig& cfg,
                                   int jobs, std::vector<int> layers) {
    cfg.validate();
    if (!run.has_epoch(epoch)) {
        throw LookupError("run '" + run.model_id() + "' has no epoch " + std::to_string(epoch));
    }
    if (layers.empty()) {
        layers = run.layers();
    }
    require_layers(run, layers);

    std::vector<LayerSubspace> spaces(layers.size());
    parallel_for(layers.size(), jobs, [&](std::size_t i) {
        const ActivationMatrix x = run.fetch(epoch, layers[i]);
        spaces[i] = svd_truncate(cfg.center ? center(x) : x, cfg.variance_threshold);
    });

    const auto n = static_cast<Eigen::Index>(layers.size());
    std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i; j < n; ++j) {
            pairs.emplace_back(i, j);
        }
    }
    std::vector<double> values(pairs.size());
    parallel_for(pairs.size(), jobs, [&](std::size_t t) {
        const auto [i, j] = pairs[t];
        values[t] = cca(spaces[static_cast<std::size_t>(i)], spaces[static_cast<std::size_t>(j)],
                        cfg.regularization_epsilon)
                        .mean_coefficient;
    });

    LayerPairMatrix out;
    out.comparison_id = run.model_id() + "_epoch" + std::to_string(epoch);
    out.epoch = epoch;
    out.layers = layers;
    out.coefficients = Matrix::Zero(n, n);
    for (std::size_t t = 0; t < pairs.size(); ++t) {
        const auto [i, j] = pairs[t];
        out.coefficients(i, j) = values[t];
        out.coefficients(j, i) = values[t];
    }
    for (const auto& s : spaces) {
        out.ranks.push_back(s.retained_rank);
    }
    return out;
}

double population_std(const std::vector<double>& values) {
    if (values.empty()) {
        return 0.0;
    }
    const double mean = mean_of(values);
    double ss = 0.0;
    for (double v : values) {
        ss += (v - mean) * (v - mean);
    }
    return std::sqrt(ss / static_cast<double>(values.size()));
}

LayerDeviationSummary layer_deviation(const std::vector<TrajectorySeries>& series_set) {
    if (series_set.empty()) {
        throw ConfigError("layer_deviation: no series given");
    }
    LayerDeviationSummary out;
    out.comparison_id = series_set.front().comparison_id;
    for (const TrajectorySeries& s : series_set) {
        if (s.comparison_id != out.comparison_id) {
            throw ConfigError("layer_deviation: series from different comparisons ('" +
                              out.comparison_id + "' and '" + s.comparison_id + "')");
        }
        if (s.points.empty()) {
            throw ConfigError("layer_deviation: empty series for layer " +
                              std::to_string(s.layer));
        }
        if (out.per_layer.count(s.layer)) {
            throw ConfigError("layer_deviation: layer " + std::to_string(s.layer) +
                              " appears twice");
        }
        std::vector<double> values;
        for (const auto& p : s.points) {
            values.push_back(p.mean_coefficient);
        }
        out.per_layer[s.layer] = population_std(values);
        if (values.size() == 1) {
            out.single_point_layers.push_back(s.layer);
        }
    }
    return out;
}

ConfigurationComparison compare_configurations(const std::vector<RunManifest>& runs,
                                               const std::vector<int>& layers,
                                               const std::vector<int>& epochs,
                                               const SvccaConfig& cfg, int jobs,
                                               std::optional<nlohmann::ordered_json> metrics) {
    if (runs.size() < 2) {
        throw ConfigError("compare_configurations needs at least two runs");
    }
    for (const RunManifest& r : runs) {
        if (r.sample_count() != runs.front().sample_count()) {
            throw ShapeError("runs '" + runs.front().model_id() + "' and '" + r.model_id() +
                             "' use different probe sample counts");
        }
    }

    ConfigurationComparison out;
    out.metrics = std::move(metrics);
    for (const RunManifest& run : runs) {
        RunBundle bundle;
        bundle.model_id = run.model_id();
        bundle.series = convergence_series(run, layers, epochs, cfg, jobs);
        for (const auto& s : bundle.series) {
            std::vector<double> values;
            for (const auto& p : s.points) {
                values.push_back(p.mean_coefficient);
            }
            bundle.mean_per_layer[s.layer] = mean_of(values);
        }
        bundle.deviation = layer_deviation(bundle.series);

        const int final_epoch = bundle.series.front().points.back().epoch;
        std::vector<int> pair_layers;
        for (const auto& s : bundle.series) {
            pair_layers.push_back(s.layer);
        }
        bundle.final_pairs = within_model_pairs(run, final_epoch, cfg, jobs, pair_layers);
        std::vector<double> off_diagonal;
        const auto n = bundle.final_pairs.coefficients.rows();
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = i + 1; j < n; ++j) {
                off_diagonal.push_back(bundle.final_pairs.coefficients(i, j));
            }
        }
        if (!off_diagonal.empty()) {
            bundle.final_pair_mean = mean_of(off_diagonal);
            bundle.final_pair_spread = population_std(off_diagonal);
        }
        out.bundles.push_back(std::move(bundle));
    }

    out.ranking.resize(out.bundles.size());
    std::iota(out.ranking.begin(), out.ranking.end(), std::size_t{0});
    std::stable_sort(out.ranking.begin(), out.ranking.end(), [&](std::size_t x, std::size_t y) {
        return out.bundles[x].final_pair_spread > out.bundles[y].final_pair_spread;
    });
    return out;
}

}  // namespace svcca
