// Copyright 2026 The svcca-toolkit Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <vector>

#include "svcca/activation_io.hpp"

namespace svcca {

struct SvccaConfig {
    /// Fraction of total variance (sum of squared singular values) each
    /// layer keeps after truncation.
    double variance_threshold = 0.99;
    /// Relative floor on the pivots when orthonormalizing each view; a view
    /// whose smallest pivot falls at or below eps * largest pivot is
    /// rejected as rank deficient.
    double regularization_epsilon = 1e-12;
    bool center = true;

    /// Throws ConfigError when a field is outside its documented range.
    void validate() const;
};

/// SVD-truncated view of one layer.
struct LayerSubspace {
    /// k x N, orthonormal rows: the top-k right singular vectors.
    Matrix basis;
    /// k x N, the data expressed in the top-k singular directions
    /// (U_k^T X = S_k V_k^T).
    Matrix projected;
    /// All singular values of the input, descending.
    Eigen::VectorXd singular_values;
    int retained_rank = 0;
    double retained_variance_fraction = 0.0;
    Source source;

    Eigen::Index samples() const { return basis.cols(); }
};

struct CcaSpectrum {
    /// Canonical correlations, non-increasing, each in [0, 1].
    std::vector<double> correlations;
    double mean_coefficient = 0.0;
    Source source_a;
    Source source_b;
    int rank_a = 0;
    int rank_b = 0;
};

/// Subtracts each neuron's mean over the samples.
ActivationMatrix center(const ActivationMatrix& x);
Matrix center(const Matrix& x);

/// Smallest k whose leading squared singular values reach `threshold` of
/// the total. Singular values below the numerical-rank tolerance count as
/// zero. Throws DegenerateInputError if nothing is left.
int truncation_rank(const Eigen::VectorXd& singular_values, double threshold);

/// Keeps the top singular directions of `x` (expected centered) covering
/// `threshold` of its variance.
LayerSubspace svd_truncate(const ActivationMatrix& x, double threshold);

/// Canonical correlations between two truncated views over the same samples.
///
/// Each projected view is orthonormalized with a Householder QR; the
/// singular values of Qa^T Qb are the canonical correlations. Values that
/// exceed one by at most 1e-10 are clamped, anything larger raises
/// NumericalError.
CcaSpectrum cca(const LayerSubspace& a, const LayerSubspace& b, double eps = 1e-12);

/// center -> svd_truncate -> cca, with the mean coefficient filled in.
CcaSpectrum svcca_similarity(const ActivationMatrix& x, const ActivationMatrix& y,
                             const SvccaConfig& cfg = {});

}  // namespace svcca
