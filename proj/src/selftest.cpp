// Copyright 2026 The svcca-toolkit Authors
//
// Licensed under the Apache License, Version 2.0

#include "svcca/selftest.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "svcca/errors.hpp"
#include "svcca/svcca_core.hpp"
#include "svcca/synthetic.hpp"

namespace svcca::selftest {

namespace {

using Clock = std::chrono::steady_clock;

struct Fuzz {
    explicit Fuzz(std::uint64_t seed) : rng(seed) {}

    int uniform_int(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

    Matrix gaussian(Eigen::Index rows, Eigen::Index cols) {
        std::normal_distribution<double> normal;
        Matrix m(rows, cols);
        for (Eigen::Index i = 0; i < m.size(); ++i) {
            m.data()[i] = normal(rng);
        }
        return m;
    }

    // Random d x N activations, sometimes rank deficient, at a random scale.
    Matrix activations(int d, int n) {
        const double scale = std::pow(10.0, std::uniform_real_distribution<double>(-3, 3)(rng));
        if (d > 1 && uniform_int(0, 3) == 0) {
            const int r = uniform_int(1, d - 1);
            return scale * gaussian(d, r) * gaussian(r, n);
        }
        return scale * gaussian(d, n);
    }

    std::mt19937_64 rng;
};

ActivationMatrix wrap(Matrix m, int layer = 1) {
    return ActivationMatrix::make(Source{"selftest", 0, layer}, std::move(m));
}

// Runs `check` for `cases` instances; a check returns an empty string on
// success or a description of the failure.
SuiteResult suite(const std::string& name, int cases,
                  const std::function<std::string(int)>& check) {
    SuiteResult r;
    r.name = name;
    r.cases = cases;
    const auto start = Clock::now();
    for (int i = 0; i < cases; ++i) {
        std::string failure;
        try {
            failure = check(i);
        } catch (const std::exception& e) {
            failure = std::string("threw: ") + e.what();
        }
        if (!failure.empty()) {
            if (r.failures++ == 0) {
                r.detail = "case " + std::to_string(i) + ": " + failure;
            }
        }
    }
    r.seconds = std::chrono::duration<double>(Clock::now() - start).count();
    if (r.failures == 0) {
        r.detail = "ok";
    }
    return r;
}

std::string max_gap(const std::vector<double>& a, const std::vector<double>& b, double tol) {
    if (a.size() != b.size()) {
        return "length " + std::to_string(a.size()) + " vs " + std::to_string(b.size());
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!(std::abs(a[i] - b[i]) <= tol)) {
            std::ostringstream msg;
            msg.precision(12);
            msg << "rho[" << i << "] " << a[i] << " vs " << b[i];
            return msg.str();
        }
    }
    return {};
}

SvccaConfig untruncated() {
    SvccaConfig cfg;
    cfg.variance_threshold = 1.0;
    return cfg;
}

}  // namespace

std::vector<SuiteResult> run_all() {
    std::vector<SuiteResult> out;

    out.push_back(suite("oracle agreement (QR/SVD vs covariance)", 200, [](int i) {
        Fuzz fz(0x5eed0000u + static_cast<unsigned>(i));
        synthetic::PlantedPairSpec spec;
        spec.d_a = fz.uniform_int(1, 8);
        spec.d_b = fz.uniform_int(1, 8);
        spec.samples = fz.uniform_int(4 * (spec.d_a + spec.d_b) + 10, 2000);
        const int planted = fz.uniform_int(0, std::min(spec.d_a, spec.d_b));
        for (int j = 0; j < planted; ++j) {
            spec.planted_correlations.push_back(std::uniform_real_distribution<double>(0, 1)(fz.rng));
        }
        std::sort(spec.planted_correlations.begin(), spec.planted_correlations.end(),
                  std::greater<>());
        spec.seed = fz.rng();
        const auto [x, y] = synthetic::gen_correlated_pair(spec);
        const auto core = svcca_similarity(x, y, untruncated()).correlations;
        const auto oracle = synthetic::cca_brute_oracle(center(x.data()), center(y.data()));
        return max_gap(core, oracle, 1e-6);
    }));

    out.push_back(suite("self-similarity", 100, [](int i) {
        Fuzz fz(0xa110u + static_cast<unsigned>(i));
        const int d = fz.uniform_int(1, 8);
        const auto x = wrap(fz.activations(d, fz.uniform_int(d + 2, 300)));
        const double m = svcca_similarity(x, x).mean_coefficient;
        return std::abs(m - 1.0) <= 1e-8 ? "" : "mean " + std::to_string(m);
    }));

    out.push_back(suite("symmetry", 100, [](int i) {
        Fuzz fz(0xb220u + static_cast<unsigned>(i));
        const int n = fz.uniform_int(20, 300);
        const auto x = wrap(fz.activations(fz.uniform_int(1, 8), n));
        const auto y = wrap(fz.activations(fz.uniform_int(1, 8), n), 2);
        const double xy = svcca_similarity(x, y).mean_coefficient;
        const double yx = svcca_similarity(y, x).mean_coefficient;
        return std::abs(xy - yx) <= 1e-8 ? "" : "asymmetric";
    }));

    out.push_back(suite("orthogonal-map invariance", 100, [](int i) {
        Fuzz fz(0xc330u + static_cast<unsigned>(i));
        const int n = fz.uniform_int(20, 300);
        const int da = fz.uniform_int(1, 8);
        const int db = fz.uniform_int(1, 8);
        const Matrix x = fz.activations(da, n);
        const Matrix y = fz.activations(db, n);
        const Matrix qa = synthetic::random_orthogonal(fz.rng(), da);
        const Matrix qb = synthetic::random_orthogonal(fz.rng(), db);
        const auto base = svcca_similarity(wrap(x), wrap(y, 2)).correlations;
        const auto rotated = svcca_similarity(wrap(qa * x), wrap(qb * y, 2)).correlations;
        return max_gap(base, rotated, 1e-6);
    }));

    out.push_back(suite("same-permutation invariance", 100, [](int i) {
        Fuzz fz(0xd440u + static_cast<unsigned>(i));
        const int n = fz.uniform_int(20, 300);
        const Matrix x = fz.activations(fz.uniform_int(1, 8), n);
        const Matrix y = fz.activations(fz.uniform_int(1, 8), n);
        Eigen::PermutationMatrix<Eigen::Dynamic> perm(n);
        perm.setIdentity();
        std::shuffle(perm.indices().data(), perm.indices().data() + n, fz.rng);
        const auto base = svcca_similarity(wrap(x), wrap(y, 2)).correlations;
        const auto shuffled = svcca_similarity(wrap(x * perm), wrap(y * perm, 2)).correlations;
        return max_gap(base, shuffled, 1e-8);
    }));

    out.push_back(suite("correlations in [0, 1], non-increasing", 200, [](int i) {
        Fuzz fz(0xe550u + static_cast<unsigned>(i));
        const int n = fz.uniform_int(10, 300);
        const auto x = wrap(fz.activations(fz.uniform_int(1, 8), n));
        // Every fourth case compares a view with a near copy of itself, the
        // regime where roundoff pushes singular values past one.
        const auto y = i % 4 == 0 ? wrap(x.data() + 1e-9 * fz.gaussian(x.neurons(), n), 2)
                                  : wrap(fz.activations(fz.uniform_int(1, 8), n), 2);
        const auto rho = svcca_similarity(x, y).correlations;
        for (std::size_t k = 0; k < rho.size(); ++k) {
            if (!(rho[k] >= 0.0 && rho[k] <= 1.0)) {
                return "rho out of range: " + std::to_string(rho[k]);
            }
            if (k > 0 && rho[k] > rho[k - 1]) {
                return std::string("not sorted");
            }
        }
        return std::string();
    }));

    out.push_back(suite("truncation: sigma {10, 1} keeps k = 1", 1, [](int) {
        const int n = 50;
        const Matrix u = synthetic::random_orthogonal(7, 2);
        const Matrix v = synthetic::random_orthogonal(11, n).leftCols(2);
        const Matrix x = u * Eigen::Vector2d(10.0, 1.0).asDiagonal() * v.transpose();
        const LayerSubspace s = svd_truncate(wrap(x), 0.99);
        if (s.retained_rank != 1) {
            return "k = " + std::to_string(s.retained_rank);
        }
        return std::abs(s.retained_variance_fraction - 100.0 / 101.0) <= 1e-12
                   ? std::string()
                   : "fraction " + std::to_string(s.retained_variance_fraction);
    }));

    out.push_back(suite("planted recovery {0.9, 0.5, 0.1} at N=50000", 1, [](int) {
        synthetic::PlantedPairSpec spec{3, 3, 50000, {0.9, 0.5, 0.1}, 20260101u};
        const auto [x, y] = synthetic::gen_correlated_pair(spec);
        return max_gap(svcca_similarity(x, y, untruncated()).correlations, spec.planted_correlations,
                       0.02);
    }));

    out.push_back(suite("planted recovery rho=0.8 at N=100000", 1, [](int) {
        synthetic::PlantedPairSpec spec{1, 1, 100000, {0.8}, 20260102u};
        const auto [x, y] = synthetic::gen_correlated_pair(spec);
        return max_gap(svcca_similarity(x, y, untruncated()).correlations, {0.8}, 0.01);
    }));

    return out;
}

bool print_table(std::ostream& out, const std::vector<SuiteResult>& results) {
    bool all = true;
    char line[256];
    std::snprintf(line, sizeof line, "%-44s %6s %6s %8s  %s\n", "suite", "cases", "fail", "seconds",
                  "status");
    out << line;
    for (const auto& r : results) {
        all = all && r.passed();
        std::snprintf(line, sizeof line, "%-44s %6d %6d %8.3f  %s", r.name.c_str(), r.cases,
                      r.failures, r.seconds, r.passed() ? "PASS" : "FAIL");
        out << line;
        if (!r.passed()) {
            out << "  (" << r.detail << ")";
        }
        out << '\n';
    }
    out << (all ? "selftest: all suites passed\n" : "selftest: FAILED\n");
    return all;
}

}  // namespace svcca::selftest
