// Copyright (c) 2026, The curato authors
// SPDX-License-Identifier: Apache-2.0

// t-SNE reference checks computed with plain loops.

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "curato/core/matrix.hpp"
#include "curato/core/rng.hpp"

namespace curato::test {

/// Two blobs of `per` points each, unit sd, centres `sep` apart along axis 0.
inline Matrix<double> two_blobs(std::size_t per, std::size_t d, double sep, std::uint64_t seed,
                                std::vector<std::uint16_t>& labels) {
    Rng rng(seed);
    Matrix<double> x(2 * per, d);
    labels.assign(2 * per, 0);
    for (std::size_t i = 0; i < 2 * per; ++i) {
        labels[i] = i < per ? 0 : 1;
        for (std::size_t k = 0; k < d; ++k) x(i, k) = rng.normal() + (k == 0 && i >= per ? sep : 0.0);
    }
    return x;
}

/// Fraction of each point's 5 nearest embedding neighbours sharing its label.
inline double knn_purity(const Matrix<double>& y, const std::vector<std::uint16_t>& labels, std::size_t k = 5) {
    const std::size_t n = y.rows();
    double hits = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::pair<double, std::size_t>> d;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) d.push_back({std::hypot(y(i, 0) - y(j, 0), y(i, 1) - y(j, 1)), j});
        std::sort(d.begin(), d.end());
        for (std::size_t t = 0; t < k; ++t) hits += labels[d[t].second] == labels[i] ? 1.0 : 0.0;
    }
    return hits / static_cast<double>(n * k);
}

/// Perplexity of point i's conditional distribution rebuilt from beta over
/// all other points, with no shift trick.
inline double achieved_perplexity(const Matrix<double>& x, std::size_t i, double beta) {
    std::vector<double> w;
    for (std::size_t j = 0; j < x.rows(); ++j) {
        if (j == i) continue;
        double d = 0.0;
        for (std::size_t k = 0; k < x.cols(); ++k) d += (x(i, k) - x(j, k)) * (x(i, k) - x(j, k));
        w.push_back(std::exp(-beta * d));
    }
    double s = 0.0;
    for (double v : w) s += v;
    double h = 0.0;
    for (double v : w) {
        const double p = v / s;
        if (p > 0.0) h -= p * std::log(p);
    }
    return std::exp(h);
}

} // namespace curato::test
