// Copyright (c) 2026, The curato authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>

#include "curato/core/rng.hpp"
#include "curato/dataset/types.hpp"

namespace curato::dataset {

/// Gaussian class blobs with uniform-box contamination.
struct SyntheticSpec {
    std::uint16_t class_count = 10;
    std::size_t points_per_class = 100;
    std::size_t dim = 2;
    /// Explicit class centers (class_count x dim). When empty, centers are drawn
    /// uniformly from [-center_spread, center_spread]^dim.
    std::vector<std::vector<double>> centers;
    double center_spread = 10.0;
    /// Per-class isotropic standard deviation; falls back to `scale`.
    std::vector<double> scales;
    double scale = 1.0;
    /// Fraction rho of rows replaced by outliers, 0 <= rho < 1.
    double contamination = 0.0;
    /// The outlier box is the inlier bounding box grown by this fraction of its extent per side.
    double box_margin = 0.1;
    std::uint64_t seed = 0;

    void validate() const {
        curato::detail::require(class_count >= 1, "synthetic: class_count must be >= 1");
        curato::detail::require(points_per_class >= 1, "synthetic: points_per_class must be >= 1");
        curato::detail::require(dim >= 1, "synthetic: dim must be >= 1");
        curato::detail::require(contamination >= 0.0 && contamination < 1.0, "synthetic: contamination must be in [0, 1)");
        curato::detail::require(scale > 0.0, "synthetic: scale must be > 0");
        curato::detail::require(box_margin >= 0.0, "synthetic: box_margin must be >= 0");
        if (!centers.empty()) {
            curato::detail::require(centers.size() == class_count, "synthetic: need one center per class");
            for (const auto& c : centers) curato::detail::require(c.size() == dim, "synthetic: center dimension mismatch");
        }
        if (!scales.empty()) {
            curato::detail::require(scales.size() == class_count, "synthetic: need one scale per class");
            for (double s : scales) curato::detail::require(s > 0.0, "synthetic: scales must be > 0");
        }
    }

    [[nodiscard]] std::size_t total() const { return std::size_t{class_count} * points_per_class; }

    /// floor(n * rho), nudged so representation error (0.29 * 100) does not drop a point.
    [[nodiscard]] std::size_t outlier_count() const {
        return static_cast<std::size_t>(std::floor(static_cast<double>(total()) * contamination + 1e-9));
    }
};

struct SyntheticData {
    FeatureDataset dataset;
    std::vector<std::size_t> outliers; ///< sorted ascending
};

/// Rows are class-major. Outliers replace inliers at uniformly chosen rows,
/// are drawn uniformly from the margin-grown inlier box, and carry a uniformly
/// random label. Pure in `spec`.
inline SyntheticData make_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    const std::size_t n = spec.total();
    const std::size_t d = spec.dim;

    std::vector<std::vector<double>> centers = spec.centers;
    if (centers.empty()) {
        centers.assign(spec.class_count, std::vector<double>(d));
        for (auto& c : centers)
            for (auto& v : c) v = rng.uniform(-spec.center_spread, spec.center_spread);
    }

    FeatureDataset ds;
    ds.values = Matrix<float>(n, d);
    ds.labels.emplace(n);
    ds.class_count = spec.class_count;
    std::vector<double> lo(d, std::numeric_limits<double>::infinity());
    std::vector<double> hi(d, -std::numeric_limits<double>::infinity());
    std::size_t r = 0;
    for (std::uint16_t c = 0; c < spec.class_count; ++c) {
        const double s = spec.scales.empty() ? spec.scale : spec.scales[c];
        for (std::size_t j = 0; j < spec.points_per_class; ++j, ++r) {
            (*ds.labels)[r] = c;
            for (std::size_t k = 0; k < d; ++k) {
                const auto v = static_cast<float>(centers[c][k] + s * rng.normal());
                ds.values(r, k) = v;
                lo[k] = std::min(lo[k], static_cast<double>(v));
                hi[k] = std::max(hi[k], static_cast<double>(v));
            }
        }
    }

    SyntheticData out;
    out.outliers = rng.sample_without_replacement(n, spec.outlier_count());
    std::sort(out.outliers.begin(), out.outliers.end());
    for (std::size_t i : out.outliers) {
        for (std::size_t k = 0; k < d; ++k) {
            const double pad = spec.box_margin * (hi[k] - lo[k]);
            ds.values(i, k) = static_cast<float>(rng.uniform(lo[k] - pad, hi[k] + pad));
        }
        (*ds.labels)[i] = static_cast<Label>(rng.below(spec.class_count));
    }
    ds.provenance = "synthetic:seed=" + std::to_string(spec.seed);
    out.dataset = std::move(ds);
    return out;
}

} // namespace curato::dataset
