// Copyright (c) 2026, The curato authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>

#include "curato/nnet/train.hpp"

namespace curato::pipeline {

struct SweepRow {
    std::size_t batch = 0;
    double learning_rate = 0.0;
    std::uint64_t seed = 0;
    double test_accuracy = 0.0;
    double train_accuracy = 0.0;

    friend bool operator==(const SweepRow&, const SweepRow&) = default;
};

struct SweepTable {
    std::vector<SweepRow> rows;
    std::size_t epochs = 0;

    [[nodiscard]] std::vector<double> learning_rates() const {
        std::vector<double> out;
        for (const auto& r : rows)
            if (std::find(out.begin(), out.end(), r.learning_rate) == out.end()) out.push_back(r.learning_rate);
        return out;
    }

    [[nodiscard]] std::vector<std::size_t> batch_sizes() const {
        std::vector<std::size_t> out;
        for (const auto& r : rows)
            if (std::find(out.begin(), out.end(), r.batch) == out.end()) out.push_back(r.batch);
        std::sort(out.begin(), out.end());
        return out;
    }

    /// Seed-mean test accuracy per batch size for one learning rate.
    [[nodiscard]] std::map<std::size_t, double> mean_curve(double lr) const {
        std::map<std::size_t, std::pair<double, std::size_t>> acc;
        for (const auto& r : rows)
            if (r.learning_rate == lr) {
                acc[r.batch].first += r.test_accuracy;
                ++acc[r.batch].second;
            }
        std::map<std::size_t, double> out;
        for (const auto& [b, s] : acc) out[b] = s.first / static_cast<double>(s.second);
        return out;
    }

    /// Batch size with the highest mean accuracy; ties go to the smaller batch.
    [[nodiscard]] std::size_t argmax_batch(double lr) const {
        const auto curve = mean_curve(lr);
        curato::detail::require(!curve.empty(), "sweep: no rows for that learning rate");
        std::size_t best = curve.begin()->first;
        double best_acc = curve.begin()->second;
        for (const auto& [b, a] : curve)
            if (a > best_acc) {
                best = b;
                best_acc = a;
            }
        return best;
    }

    [[nodiscard]] bool interior_optimum(double lr) const {
        const auto bs = batch_sizes();
        const std::size_t b = argmax_batch(lr);
        return bs.size() >= 3 && b != bs.front() && b != bs.back();
    }
};

/// Trains `model` for a fixed epoch budget at every (batch, lr, seed) and
/// records held-out accuracy. Rows are ordered lr-major, then batch, then seed.
inline SweepTable batch_sweep(const nnet::Model& model, const dataset::FeatureDataset& train,
                              const dataset::FeatureDataset& test, const std::vector<std::size_t>& batch_sizes,
                              const std::vector<double>& lrs, std::size_t epochs, const std::vector<std::uint64_t>& seeds,
                              nnet::TrainConfig base = {}) {
    curato::detail::require(!batch_sizes.empty() && !lrs.empty() && !seeds.empty(),
                            "sweep: batch sizes, learning rates and seeds must be non-empty");
    for (std::size_t b : batch_sizes) {
        curato::detail::require(b >= 1, "sweep: batch size must be >= 1");
        curato::detail::require(b <= train.n(), "sweep: batch size " + std::to_string(b) + " exceeds the " +
                                                    std::to_string(train.n()) + " training rows");
    }
    SweepTable t;
    t.epochs = epochs;
    base.epochs = epochs;
    for (double lr : lrs)
        for (std::size_t b : batch_sizes)
            for (std::uint64_t s : seeds) {
                auto tc = base;
                tc.learning_rate = lr;
                tc.batch_size = b;
                tc.seed = s;
                const auto params = nnet::train(model, train, tc).params;
                t.rows.push_back({b, lr, s, nnet::evaluate(model, params, test).accuracy,
                                  nnet::evaluate(model, params, train).accuracy});
            }
    return t;
}

} // namespace curato::pipeline
