// Copyright (c) 2026, The curato authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "curato/core/error.hpp"

namespace curato::nnet {

/// Per-example shape: {features} or {channels, height, width}.
struct Shape {
    std::vector<std::size_t> dims;

    [[nodiscard]] std::size_t numel() const {
        return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
    }
    [[nodiscard]] bool is_flat() const { return dims.size() == 1; }
    [[nodiscard]] bool is_image() const { return dims.size() == 3; }
    [[nodiscard]] std::size_t channels() const { return dims.at(0); }
    [[nodiscard]] std::size_t height() const { return dims.at(1); }
    [[nodiscard]] std::size_t width() const { return dims.at(2); }

    [[nodiscard]] std::string str() const {
        std::string s = "(";
        for (std::size_t i = 0; i < dims.size(); ++i) s += (i ? "x" : "") + std::to_string(dims[i]);
        return s + ")";
    }

    friend bool operator==(const Shape&, const Shape&) = default;
};

/// A batch of examples, row-major [batch][example...], f64.
struct Tensor {
    std::size_t batch = 0;
    Shape shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::size_t b, Shape s) : batch(b), shape(std::move(s)), data(b * shape.numel(), 0.0) {}
    Tensor(std::size_t b, Shape s, std::vector<double> values) : batch(b), shape(std::move(s)), data(std::move(values)) {
        detail::require(data.size() == batch * shape.numel(), "tensor data size does not match shape");
    }

    [[nodiscard]] std::size_t stride() const { return shape.numel(); }
    std::span<double> example(std::size_t i) { return {data.data() + i * stride(), stride()}; }
    [[nodiscard]] std::span<const double> example(std::size_t i) const { return {data.data() + i * stride(), stride()}; }

    /// Rows [start, start + count).
    [[nodiscard]] Tensor slice(std::size_t start, std::size_t count) const {
        detail::require(start + count <= batch, "tensor slice out of range");
        const auto first = data.begin() + static_cast<std::ptrdiff_t>(start * stride());
        return Tensor(count, shape, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(count * stride())));
    }
};

} // namespace curato::nnet
