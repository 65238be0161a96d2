// Copyright (c) 2026, The curato authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "curato/core/error.hpp"
#include "curato/core/matrix.hpp"

namespace curato::reduce {

/// Feature matrices handed between stages: one row per example, f64.
using FeatureMatrix = Matrix<double>;

struct PcaModel {
    std::vector<double> mean;                ///< length d
    Matrix<double> axes;                     ///< d x m, orthonormal columns
    std::vector<double> explained_variance;  ///< length m, non-increasing (sample variance, n-1)
    /// Set when some kept axis has (numerically) zero variance: those columns
    /// are an arbitrary orthonormal completion, not data directions.
    bool degenerate = false;

    [[nodiscard]] std::size_t input_dim() const { return axes.rows(); }
    [[nodiscard]] std::size_t output_dim() const { return axes.cols(); }

    [[nodiscard]] FeatureMatrix transform(const FeatureMatrix& x) const {
        curato::detail::require(x.cols() == input_dim(), "pca transform: expected " + std::to_string(input_dim()) +
                                                             " columns, got " + std::to_string(x.cols()));
        const std::size_t d = input_dim(), m = output_dim();
        FeatureMatrix out(x.rows(), m);
        std::vector<double> c(d);
        for (std::size_t r = 0; r < x.rows(); ++r) {
            for (std::size_t j = 0; j < d; ++j) c[j] = x(r, j) - mean[j];
            for (std::size_t k = 0; k < m; ++k) {
                double s = 0.0;
                for (std::size_t j = 0; j < d; ++j) s += c[j] * axes(j, k);
                out(r, k) = s;
            }
        }
        return out;
    }

    [[nodiscard]] FeatureMatrix inverse_transform(const FeatureMatrix& z) const {
        curato::detail::require(z.cols() == output_dim(), "pca inverse_transform: width mismatch");
        const std::size_t d = input_dim(), m = output_dim();
        FeatureMatrix out(z.rows(), d);
        for (std::size_t r = 0; r < z.rows(); ++r)
            for (std::size_t j = 0; j < d; ++j) {
                double s = mean[j];
                for (std::size_t k = 0; k < m; ++k) s += z(r, k) * axes(j, k);
                out(r, j) = s;
            }
        return out;
    }
};

/// Fits the top-m principal axes of `x` and returns the projected data.
/// Each axis is oriented so its largest-magnitude entry is positive (first
/// such entry on ties).
inline std::pair<PcaModel, FeatureMatrix> pca_fit_transform(const FeatureMatrix& x, std::size_t m) {
    const std::size_t n = x.rows(), d = x.cols();
    curato::detail::require(n >= 1 && d >= 1, "pca: empty input");
    curato::detail::require(m >= 1, "pca: target dimension must be >= 1");
    curato::detail::require(m <= std::min(n, d), "pca: target dimension " + std::to_string(m) + " exceeds min(n, d) = " +
                                                     std::to_string(std::min(n, d)));
    for (double v : x.data()) curato::detail::require(std::isfinite(v), "pca: non-finite input");

    PcaModel model;
    model.mean.assign(d, 0.0);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < d; ++j) model.mean[j] += x(r, j);
    for (double& v : model.mean) v /= static_cast<double>(n);

    Eigen::MatrixXd centered(n, d);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < d; ++j)
            centered(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = x(r, j) - model.mean[j];
    const double denom = n > 1 ? static_cast<double>(n - 1) : 1.0;
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / denom;

    // Ascending eigenvalues; we read them back to front.
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) throw RuntimeError("pca: eigendecomposition failed");
    const auto& values = eig.eigenvalues();
    const auto& vectors = eig.eigenvectors();

    const double top = std::max(values(static_cast<Eigen::Index>(d - 1)), 0.0);
    const double floor = 1e-12 * std::max(top, 1e-300);
    model.axes = Matrix<double>(d, m);
    model.explained_variance.resize(m);
    for (std::size_t k = 0; k < m; ++k) {
        const auto col = static_cast<Eigen::Index>(d - 1 - k);
        const double lambda = std::max(values(col), 0.0);
        model.explained_variance[k] = lambda;
        if (top == 0.0 || lambda <= floor) model.degenerate = true;

        std::size_t arg = 0;
        for (std::size_t j = 1; j < d; ++j)
            if (std::abs(vectors(static_cast<Eigen::Index>(j), col)) >
                std::abs(vectors(static_cast<Eigen::Index>(arg), col)))
                arg = j;
        const double sign = vectors(static_cast<Eigen::Index>(arg), col) < 0.0 ? -1.0 : 1.0;
        for (std::size_t j = 0; j < d; ++j) model.axes(j, k) = sign * vectors(static_cast<Eigen::Index>(j), col);
    }
    // Eigen returns ascending order; ties may leave tiny inversions from rounding.
    for (std::size_t k = 1; k < m; ++k)
        model.explained_variance[k] = std::min(model.explained_variance[k], model.explained_variance[k - 1]);

    auto projected = model.transform(x);
    return {std::move(model), std::move(projected)};
}

/// The pre-reduction rule used before t-SNE: project to `target` dims only
/// when the input is wider than that.
inline FeatureMatrix pca_reduce_if_wide(const FeatureMatrix& x, std::size_t target = 50) {
    if (target == 0 || x.cols() <= target) return x;
    return pca_fit_transform(x, std::min(target, x.rows())).second;
}

} // namespace curato::reduce
