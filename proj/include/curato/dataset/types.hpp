// Copyright (c) 2026, The curato authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "curato/core/error.hpp"
#include "curato/core/matrix.hpp"

namespace curato::dataset {

using Label = std::uint16_t;

/// Labeled example matrix. Values are stored as f32 so that FVEC files
/// round-trip bit-exactly; numeric stages widen rows to f64 on the fly.
struct FeatureDataset {
    Matrix<float> values;
    std::optional<std::vector<Label>> labels;
    std::uint16_t class_count = 0;
    std::string provenance;

    [[nodiscard]] std::size_t n() const noexcept { return values.rows(); }
    [[nodiscard]] std::size_t d() const noexcept { return values.cols(); }
    [[nodiscard]] bool has_labels() const noexcept { return labels.has_value(); }

    /// Throws ValidationError when an invariant is violated.
    void validate() const {
        detail::require(n() >= 1, "empty dataset");
        detail::require(d() >= 1, "dataset has zero feature dimension");
        for (float v : values.data()) detail::require(std::isfinite(v), "non-finite value in dataset");
        if (labels) {
            detail::require(labels->size() == n(), "label count does not match row count");
            for (Label l : *labels)
                detail::require(l < class_count, "label " + std::to_string(l) + " >= class_count " +
                                                      std::to_string(class_count));
        }
    }

    /// Rows `indices` in the given order; labels follow.
    [[nodiscard]] FeatureDataset subset(const std::vector<std::size_t>& indices) const {
        FeatureDataset out;
        out.values = Matrix<float>(indices.size(), d());
        for (std::size_t r = 0; r < indices.size(); ++r) {
            detail::require(indices[r] < n(), "row index out of range");
            auto src = values.row(indices[r]);
            std::copy(src.begin(), src.end(), out.values.row(r).begin());
        }
        if (labels) {
            out.labels.emplace();
            out.labels->reserve(indices.size());
            for (std::size_t i : indices) out.labels->push_back((*labels)[i]);
        }
        out.class_count = class_count;
        out.provenance = provenance;
        return out;
    }

    [[nodiscard]] Matrix<double> as_f64() const { return values.cast<double>(); }
};

/// Contiguous row slice [start, start + size) of a dataset.
class Batch {
public:
    Batch(const FeatureDataset& parent, std::size_t start, std::size_t size)
        : parent_(&parent), start_(start), size_(size) {
        detail::require(size >= 1, "batch size must be >= 1");
        detail::require(start + size <= parent.n(), "batch extends past end of dataset");
    }

    [[nodiscard]] const FeatureDataset& parent() const noexcept { return *parent_; }
    [[nodiscard]] std::size_t start() const noexcept { return start_; }
    [[nodiscard]] std::size_t size() const noexcept { return size_; }
    [[nodiscard]] std::span<const float> row(std::size_t i) const { return parent_->values.row(start_ + i); }

private:
    const FeatureDataset* parent_;
    std::size_t start_;
    std::size_t size_;
};

} // namespace curato::dataset
