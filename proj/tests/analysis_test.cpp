// Copyright 2026 The svcca-toolkit Authors
//
// Licensed under the Apache License, Version 2.0

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "svcca/analysis.hpp"
#include "svcca/errors.hpp"
#include "svcca/synthetic.hpp"
#include "test_util.hpp"

namespace {

using namespace svcca;
using svcca::testing::TempDir;
using svcca::testing::gaussian;
using svcca::testing::write_run;

std::vector<std::vector<Matrix>> random_grid(std::mt19937_64& rng, std::size_t epochs,
                                             std::size_t layers, int d, int n) {
    std::vector<std::vector<Matrix>> grid(epochs);
    for (auto& row : grid) {
        for (std::size_t l = 0; l < layers; ++l) {
            row.push_back(gaussian(rng, d, n));
        }
    }
    return grid;
}

double mean_of(const TrajectorySeries& s) {
    double total = 0.0;
    for (const auto& p : s.points) total += p.mean_coefficient;
    return total / static_cast<double>(s.points.size());
}

synthetic::SyntheticRunSpec twelve_layer_spec(std::uint64_t seed) {
    synthetic::SyntheticRunSpec spec;
    spec.model_id = "run" + std::to_string(seed);
    spec.layers = 12;
    spec.epochs = 6;
    spec.neurons = 8;
    spec.samples = 600;
    spec.shared_layers = {1, 2, 3, 4, 5, 6};
    spec.drift_rate = 0.2;
    spec.seed = seed;
    spec.shared_seed = 1000;
    return spec;
}

TEST(CrossModel, ByteCopyIsAllOnes) {
    TempDir tmp;
    std::mt19937_64 rng(1);
    const auto grid = random_grid(rng, 3, 2, 5, 120);
    const RunManifest a = load_run(write_run(tmp / "a", "a", {1, 2, 3}, {1, 2}, grid));
    const RunManifest b = load_run(write_run(tmp / "b", "b", {1, 2, 3}, {1, 2}, grid));
    const CrossModelResult r = cross_model_series(a, b, {}, {}, SvccaConfig{});
    ASSERT_EQ(r.series.size(), 2u);
    for (const auto& s : r.series) {
        EXPECT_EQ(s.comparison_id, "a_vs_b");
        EXPECT_EQ(s.mode, SeriesMode::CrossModel);
        ASSERT_EQ(s.points.size(), 3u);
        for (const auto& p : s.points) {
            EXPECT_NEAR(p.mean_coefficient, 1.0, 1e-8);
        }
    }
}

TEST(CrossModel, SharedLayersBeatIndependentLayers) {
    TempDir tmp;
    const RunManifest a = synthetic::gen_synthetic_run(twelve_layer_spec(1), tmp / "a");
    const RunManifest b = synthetic::gen_synthetic_run(twelve_layer_spec(2), tmp / "b");
    const CrossModelResult r = cross_model_series(a, b, {}, {}, SvccaConfig{});
    ASSERT_EQ(r.series.size(), 12u);

    std::vector<TrajectorySeries> shared(r.series.begin(), r.series.begin() + 6);
    std::vector<TrajectorySeries> apart(r.series.begin() + 6, r.series.end());
    double shared_mean = 0.0;
    double apart_mean = 0.0;
    for (const auto& s : shared) shared_mean += mean_of(s) / 6.0;
    for (const auto& s : apart) apart_mean += mean_of(s) / 6.0;
    EXPECT_GE(shared_mean - apart_mean, 0.2);

    const auto dev = layer_deviation(r.series);
    double shared_dev = 0.0;
    double apart_dev = 0.0;
    for (int l = 1; l <= 6; ++l) shared_dev += dev.per_layer.at(l) / 6.0;
    for (int l = 7; l <= 12; ++l) apart_dev += dev.per_layer.at(l) / 6.0;
    EXPECT_LT(shared_dev, apart_dev);
}

TEST(CrossModel, EpochAlignment) {
    TempDir tmp;
    std::mt19937_64 rng(2);
    const RunManifest a =
        load_run(write_run(tmp / "a", "a", {1, 2, 3}, {1}, random_grid(rng, 3, 1, 3, 50)));
    const RunManifest b =
        load_run(write_run(tmp / "b", "b", {1, 2}, {1}, random_grid(rng, 2, 1, 3, 50)));
    try {
        cross_model_series(a, b, {}, {}, SvccaConfig{});
        FAIL() << "expected AlignmentError";
    } catch (const AlignmentError& e) {
        EXPECT_NE(std::string(e.what()).find('3'), std::string::npos) << e.what();
    }
    const CrossModelResult r =
        cross_model_series(a, b, {}, {}, SvccaConfig{}, EpochAlignment::Truncate);
    EXPECT_EQ(r.epochs, (std::vector<int>{1, 2}));
    EXPECT_EQ(r.dropped_epochs, (std::vector<int>{3}));
    EXPECT_EQ(r.series.at(0).points.size(), 2u);
}

TEST(CrossModel, SampleCountMismatchAndMissingLayer) {
    TempDir tmp;
    std::mt19937_64 rng(3);
    const RunManifest a =
        load_run(write_run(tmp / "a", "a", {1}, {1}, random_grid(rng, 1, 1, 3, 50)));
    const RunManifest b =
        load_run(write_run(tmp / "b", "b", {1}, {1}, random_grid(rng, 1, 1, 3, 51)));
    EXPECT_THROW(cross_model_series(a, b, {}, {}, SvccaConfig{}), ShapeError);
    EXPECT_THROW(cross_model_series(a, a, {2}, {}, SvccaConfig{}), AlignmentError);
}

TEST(CrossModel, JobCountDoesNotChangeResults) {
    TempDir tmp;
    const RunManifest a = synthetic::gen_synthetic_run(twelve_layer_spec(3), tmp / "a");
    const RunManifest b = synthetic::gen_synthetic_run(twelve_layer_spec(4), tmp / "b");
    const auto one = cross_model_series(a, b, {}, {}, SvccaConfig{}, EpochAlignment::Strict, 1);
    const auto four = cross_model_series(a, b, {}, {}, SvccaConfig{}, EpochAlignment::Strict, 4);
    ASSERT_EQ(one.series.size(), four.series.size());
    for (std::size_t i = 0; i < one.series.size(); ++i) {
        for (std::size_t k = 0; k < one.series[i].points.size(); ++k) {
            EXPECT_EQ(one.series[i].points[k].mean_coefficient,
                      four.series[i].points[k].mean_coefficient);
        }
    }
}

TEST(Convergence, FinalEpochIsOneAndFrozenLayersStayOne) {
    TempDir tmp;
    synthetic::SyntheticRunSpec spec = twelve_layer_spec(5);
    spec.frozen_layers = {1, 2, 3, 4};
    spec.drift_rate = 0.5;
    const RunManifest run = synthetic::gen_synthetic_run(spec, tmp.path());
    const auto series = convergence_series(run, {}, {}, SvccaConfig{});
    ASSERT_EQ(series.size(), 12u);
    for (const auto& s : series) {
        EXPECT_EQ(s.comparison_id, spec.model_id + "_convergence");
        EXPECT_EQ(s.mode, SeriesMode::WithinModel);
        EXPECT_NEAR(s.points.back().mean_coefficient, 1.0, 1e-8);
        if (s.layer <= 4) {
            for (const auto& p : s.points) {
                EXPECT_NEAR(p.mean_coefficient, 1.0, 1e-8);
            }
        } else {
            EXPECT_LT(s.points.front().mean_coefficient, 0.9) << "layer " << s.layer;
            for (std::size_t k = 1; k < s.points.size(); ++k) {
                EXPECT_GE(s.points[k].mean_coefficient, s.points[k - 1].mean_coefficient - 1e-9);
            }
        }
    }
}

TEST(LayerPairs, IdenticalLayersAreOne) {
    TempDir tmp;
    std::mt19937_64 rng(6);
    const Matrix m = gaussian(rng, 4, 200);
    const RunManifest run = load_run(write_run(tmp.path(), "twin", {1}, {1, 2}, {{m, m}}));
    const LayerPairMatrix pairs = within_model_pairs(run, 1, SvccaConfig{});
    EXPECT_EQ(pairs.comparison_id, "twin_epoch1");
    EXPECT_LE((pairs.coefficients - Matrix::Ones(2, 2)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(LayerPairs, IndependentLayersAreLowAndSymmetric) {
    TempDir tmp;
    std::mt19937_64 rng(7);
    const RunManifest run =
        load_run(write_run(tmp.path(), "ind", {1}, {1, 2, 3, 4}, random_grid(rng, 1, 4, 8, 2000)));
    const LayerPairMatrix pairs = within_model_pairs(run, 1, SvccaConfig{}, 2);
    ASSERT_EQ(pairs.coefficients.rows(), 4);
    EXPECT_EQ(pairs.ranks.size(), 4u);
    for (Eigen::Index i = 0; i < 4; ++i) {
        EXPECT_NEAR(pairs.coefficients(i, i), 1.0, 1e-8);
        for (Eigen::Index j = 0; j < 4; ++j) {
            EXPECT_EQ(pairs.coefficients(i, j), pairs.coefficients(j, i));
            if (i != j) {
                EXPECT_LE(pairs.coefficients(i, j), 0.15);
            }
        }
    }
    EXPECT_THROW(within_model_pairs(run, 9, SvccaConfig{}), LookupError);
    const auto subset = within_model_pairs(run, 1, SvccaConfig{}, 1, {2, 4});
    EXPECT_EQ(subset.layers, (std::vector<int>{2, 4}));
    EXPECT_EQ(subset.coefficients(0, 1), pairs.coefficients(1, 3));
}

TrajectorySeries series_of(int layer, std::vector<double> values, const std::string& id = "x") {
    TrajectorySeries s;
    s.comparison_id = id;
    s.layer = layer;
    for (std::size_t k = 0; k < values.size(); ++k) {
        s.points.push_back({static_cast<int>(k) + 1, values[k], 1, 1});
    }
    return s;
}

TEST(LayerDeviation, HandComputedValues) {
    const auto dev = layer_deviation({series_of(1, {0.7, 0.7, 0.7}), series_of(2, {0.8, 0.6}),
                                      series_of(3, {0.4})});
    EXPECT_EQ(dev.comparison_id, "x");
    EXPECT_NEAR(dev.per_layer.at(1), 0.0, 1e-15);
    EXPECT_NEAR(dev.per_layer.at(2), 0.1, 1e-12);
    EXPECT_EQ(dev.per_layer.at(3), 0.0);
    EXPECT_EQ(dev.single_point_layers, (std::vector<int>{3}));
}

TEST(LayerDeviation, RejectsBadInput) {
    EXPECT_THROW(layer_deviation({}), ConfigError);
    EXPECT_THROW(layer_deviation({series_of(1, {0.5}), series_of(2, {0.5}, "y")}), ConfigError);
    EXPECT_THROW(layer_deviation({series_of(1, {})}), ConfigError);
    EXPECT_THROW(layer_deviation({series_of(1, {0.5}), series_of(1, {0.6})}), ConfigError);
}

TEST(LayerDeviation, PopulationStdMatchesDefinition) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> v(1 + trial % 9);
        for (double& x : v) x = u(rng);
        const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        EXPECT_NEAR(population_std(v), std::sqrt(ss / static_cast<double>(v.size())), 1e-12);
    }
}

TEST(CompareConfigurations, DuplicatedRunsGiveIdenticalBundles) {
    TempDir tmp;
    const auto spec = twelve_layer_spec(9);
    synthetic::gen_synthetic_run(spec, tmp / "a");
    const RunManifest a = load_run(tmp / "a" / "manifest.json");
    const RunManifest b = load_run(tmp / "a" / "manifest.json");
    const auto cmp = compare_configurations({a, b}, {}, {}, SvccaConfig{});
    ASSERT_EQ(cmp.bundles.size(), 2u);
    EXPECT_EQ(cmp.bundles[0].mean_per_layer, cmp.bundles[1].mean_per_layer);
    EXPECT_EQ(cmp.bundles[0].deviation.per_layer, cmp.bundles[1].deviation.per_layer);
    EXPECT_EQ(cmp.bundles[0].final_pairs.coefficients, cmp.bundles[1].final_pairs.coefficients);
    EXPECT_EQ(cmp.ranking, (std::vector<std::size_t>{0, 1}));
}

TEST(CompareConfigurations, RankingAndMetricsPassThrough) {
    TempDir tmp;
    auto frozen = twelve_layer_spec(10);
    frozen.layers = 4;
    frozen.shared_layers.clear();
    frozen.frozen_layers = {1, 2, 3, 4};
    frozen.model_id = "frozen";
    auto moving = frozen;
    moving.model_id = "moving";
    moving.seed = 11;
    moving.frozen_layers.clear();
    const RunManifest a = synthetic::gen_synthetic_run(frozen, tmp / "a");
    const RunManifest b = synthetic::gen_synthetic_run(moving, tmp / "b");
    const nlohmann::ordered_json metrics = {{"frozen", {{"wer", 9.5}}}};
    const auto one = compare_configurations({a, b}, {}, {}, SvccaConfig{}, 1, metrics);
    const auto three = compare_configurations({a, b}, {}, {}, SvccaConfig{}, 3, metrics);
    ASSERT_TRUE(one.metrics.has_value());
    EXPECT_EQ(*one.metrics, metrics);
    EXPECT_EQ(one.ranking, three.ranking);
    for (std::size_t i = 0; i < 2; ++i) {
        EXPECT_EQ(one.bundles[i].final_pair_spread, three.bundles[i].final_pair_spread);
        EXPECT_EQ(one.bundles[i].mean_per_layer, three.bundles[i].mean_per_layer);
    }
    const auto& r = one.ranking;
    EXPECT_GE(one.bundles[r[0]].final_pair_spread, one.bundles[r[1]].final_pair_spread);
    EXPECT_THROW(compare_configurations({a}, {}, {}, SvccaConfig{}), ConfigError);
}

}  // namespace
