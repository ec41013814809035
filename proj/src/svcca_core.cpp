// Copyright 2026 The svcca-toolkit Authors
//
// Licensed under the Apache License, Version 2.0

#include "svcca/svcca_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>

#include <Eigen/QR>
#include <Eigen/SVD>

#include "svcca/errors.hpp"

namespace svcca {

namespace {

constexpr double kClampSpill = 1e-10;

std::string describe(const Source& s) {
    std::ostringstream out;
    out << (s.model_id.empty() ? "<anonymous>" : s.model_id) << " epoch " << s.epoch << " layer "
        << s.layer;
    return out.str();
}

}  // namespace

void SvccaConfig::validate() const {
    if (!(variance_threshold > 0.0 && variance_threshold <= 1.0)) {
        throw ConfigError("variance_threshold must lie in (0, 1], got " +
                          std::to_string(variance_threshold));
    }
    if (!(regularization_epsilon >= 0.0) || !std::isfinite(regularization_epsilon)) {
        throw ConfigError("regularization_epsilon must be a finite value >= 0");
    }
}

Matrix center(const Matrix& x) {
    Matrix out = x.colwise() - x.rowwise().mean();
    // Second pass removes the rounding residue left by the first.
    out.colwise() -= out.rowwise().mean();
    return out;
}

ActivationMatrix center(const ActivationMatrix& x) {
    return x.with_data(center(x.data()));
}

int truncation_rank(const Eigen::VectorXd& singular_values, double threshold) {
    const Eigen::Index n = singular_values.size();
    const double largest = n > 0 ? singular_values.maxCoeff() : 0.0;
    if (!(largest > 0.0)) {
        throw DegenerateInputError("zero-variance layer: all singular values are zero");
    }
    // Numerical rank: directions at roundoff level are noise, not variance.
    const double tol = largest * static_cast<double>(std::max<Eigen::Index>(n, 1)) *
                       std::numeric_limits<double>::epsilon();
    Eigen::Index rank = 0;
    while (rank < n && singular_values[rank] > tol) {
        ++rank;
    }

    double total = 0.0;
    for (Eigen::Index j = 0; j < rank; ++j) {
        total += singular_values[j] * singular_values[j];
    }
    double cumulative = 0.0;
    for (Eigen::Index j = 0; j < rank; ++j) {
        cumulative += singular_values[j] * singular_values[j];
        if (cumulative / total >= threshold) {
            return static_cast<int>(j + 1);
        }
    }
    // Same summation order as `total`, so the full rank always qualifies.
    return static_cast<int>(rank);
}

LayerSubspace svd_truncate(const ActivationMatrix& x, double threshold) {
    if (!(threshold > 0.0 && threshold <= 1.0)) {
        throw ConfigError("truncation threshold must lie in (0, 1]");
    }
    const Matrix& data = x.data();
    Eigen::BDCSVD<Matrix> svd(data, Eigen::ComputeThinU | Eigen::ComputeThinV);

    LayerSubspace out;
    out.source = x.source();
    out.singular_values = svd.singularValues();
    int k = 0;
    try {
        k = truncation_rank(out.singular_values, threshold);
    } catch (const DegenerateInputError&) {
        throw DegenerateInputError("zero-variance layer: " + describe(x.source()));
    }

    double total = 0.0;
    double kept = 0.0;
    for (Eigen::Index j = 0; j < out.singular_values.size(); ++j) {
        const double v = out.singular_values[j] * out.singular_values[j];
        total += v;
        if (j < k) {
            kept += v;
        }
    }
    out.retained_rank = k;
    out.retained_variance_fraction = std::min(1.0, kept / total);
    out.basis = svd.matrixV().leftCols(k).transpose();
    out.projected = out.singular_values.head(k).asDiagonal() * out.basis;
    return out;
}

namespace {

// Orthonormal basis (N x k) for the row space of a k x N view.
Matrix orthonormal_factor(const Matrix& view, double eps, const Source& source) {
    Eigen::HouseholderQR<Matrix> qr(view.transpose());
    const Eigen::Index k = view.rows();
    const auto pivots = qr.matrixQR().diagonal().head(k).cwiseAbs();
    const double largest = pivots.maxCoeff();
    const double smallest = pivots.minCoeff();
    if (!(largest > 0.0) || smallest <= eps * largest) {
        std::ostringstream msg;
        msg << "whitening failed for " << describe(source) << ": pivot ratio " << smallest / largest
            << " at or below eps " << eps;
        throw NumericalError(msg.str());
    }
    return qr.householderQ() * Matrix::Identity(view.cols(), k);
}

}  // namespace

CcaSpectrum cca(const LayerSubspace& a, const LayerSubspace& b, double eps) {
    if (a.samples() != b.samples()) {
        throw ShapeError("sample count mismatch: " + describe(a.source) + " has " +
                         std::to_string(a.samples()) + ", " + describe(b.source) + " has " +
                         std::to_string(b.samples()));
    }
    if (a.retained_rank < 1 || b.retained_rank < 1 || a.projected.rows() != a.retained_rank ||
        b.projected.rows() != b.retained_rank) {
        throw DegenerateInputError("empty subspace passed to cca");
    }

    const Matrix qa = orthonormal_factor(a.projected, eps, a.source);
    const Matrix qb = orthonormal_factor(b.projected, eps, b.source);
    const Matrix cross = qa.transpose() * qb;
    Eigen::JacobiSVD<Matrix> svd(cross);

    CcaSpectrum out;
    out.source_a = a.source;
    out.source_b = b.source;
    out.rank_a = a.retained_rank;
    out.rank_b = b.retained_rank;
    const Eigen::VectorXd& s = svd.singularValues();
    out.correlations.reserve(static_cast<std::size_t>(s.size()));
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        double rho = s[i];
        if (rho > 1.0 + kClampSpill) {
            std::ostringstream msg;
            msg.precision(17);
            msg << "canonical correlation " << rho << " exceeds 1 between " << describe(a.source)
                << " and " << describe(b.source);
            throw NumericalError(msg.str());
        }
        out.correlations.push_back(std::clamp(rho, 0.0, 1.0));
    }
    std::sort(out.correlations.begin(), out.correlations.end(), std::greater<>());
    out.mean_coefficient =
        std::accumulate(out.correlations.begin(), out.correlations.end(), 0.0) /
        static_cast<double>(out.correlations.size());
    return out;
}

CcaSpectrum svcca_similarity(const ActivationMatrix& x, const ActivationMatrix& y,
                             const SvccaConfig& cfg) {
    cfg.validate();
    if (x.samples() != y.samples()) {
        throw ShapeError("sample count mismatch: " + describe(x.source()) + " has " +
                         std::to_string(x.samples()) + ", " + describe(y.source()) + " has " +
                         std::to_string(y.samples()));
    }
    const LayerSubspace a = svd_truncate(cfg.center ? center(x) : x, cfg.variance_threshold);
    const LayerSubspace b = svd_truncate(cfg.center ? center(y) : y, cfg.variance_threshold);
    return cca(a, b, cfg.regularization_epsilon);
}

}  // namespace svcca
