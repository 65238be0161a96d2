// Copyright (c) 2026, The curato authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "curato/dataset/types.hpp"
#include "curato/nnet/model.hpp"

namespace curato::nnet {

struct TrainConfig {
    double learning_rate = 0.05;
    double momentum = 0.9;
    double weight_decay = 0.0;
    std::size_t epochs = 30;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    Mode mode = Mode::train;

    void validate() const {
        detail::require(learning_rate > 0.0, "train config: learning rate must be > 0");
        detail::require(momentum >= 0.0 && momentum < 1.0, "train config: momentum must be in [0, 1)");
        detail::require(weight_decay >= 0.0, "train config: weight decay must be >= 0");
        detail::require(batch_size >= 1, "train config: batch size must be >= 1");
    }

    [[nodiscard]] SgdHyper sgd() const { return {learning_rate, momentum, weight_decay}; }
};

struct EpochStats {
    std::size_t epoch = 0;
    double loss = 0.0;     ///< example-weighted mean training loss over the epoch
    double accuracy = 0.0; ///< train-mode accuracy accumulated over the epoch

    friend bool operator==(const EpochStats&, const EpochStats&) = default;
};

struct TrainResult {
    ParameterSet params;
    std::vector<EpochStats> history;
};

/// Rows `idx` of `ds` as an f64 batch tensor.
inline Tensor gather(const dataset::FeatureDataset& ds, std::span<const std::size_t> idx, const Shape& shape) {
    Tensor t(idx.size(), shape);
    const std::size_t d = ds.d();
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const auto row = ds.values.row(idx[r]);
        std::copy(row.begin(), row.end(), t.data.begin() + static_cast<std::ptrdiff_t>(r * d));
    }
    return t;
}

inline std::vector<std::uint16_t> gather_labels(const dataset::FeatureDataset& ds, std::span<const std::size_t> idx) {
    std::vector<std::uint16_t> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back((*ds.labels)[i]);
    return out;
}

namespace train_detail {

inline void check_dataset(const Model& model, const dataset::FeatureDataset& ds, bool need_labels) {
    detail::require(ds.n() >= 1, "empty dataset");
    detail::require(ds.d() == model.input.numel(), "dataset width " + std::to_string(ds.d()) +
                                                       " does not match model input " + model.input.str());
    if (need_labels) {
        detail::require(ds.has_labels(), "training needs a labeled dataset");
        for (auto l : *ds.labels)
            detail::require(l < model.class_count(), "label " + std::to_string(l) + " exceeds the model's class count");
    }
}

} // namespace train_detail

/// Mini-batch SGD. Each epoch visits a fresh permutation drawn from the
/// seed's per-epoch stream. A trailing partial batch is used unless it holds a
/// single example while batch_size > 1.
inline TrainResult train(const Model& model, const dataset::FeatureDataset& ds, const TrainConfig& cfg,
                         std::optional<ParameterSet> initial = std::nullopt) {
    cfg.validate();
    model.validate();
    train_detail::check_dataset(model, ds, true);

    TrainResult result;
    result.params = initial ? std::move(*initial) : init_params(model, cfg.seed);
    Velocity velocity = Gradients::zeros_like(result.params);
    const Rng root(cfg.seed);
    const std::size_t n = ds.n();
    std::vector<std::size_t> order(n);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        Rng shuffler = root.stream(1000 + epoch);
        shuffler.shuffle(std::span<std::size_t>(order));

        double loss_sum = 0.0;
        std::size_t correct = 0, seen = 0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t b = std::min(cfg.batch_size, n - start);
            if (b == 1 && cfg.batch_size > 1) break;
            const std::span<const std::size_t> idx(order.data() + start, b);
            const Tensor x = gather(ds, idx, model.input);
            const auto y = gather_labels(ds, idx);
            auto fwd = forward(model, result.params, x, y, cfg.mode);
            const auto grads = backward(model, result.params, fwd.caches);
            sgd_step(result.params, grads, cfg.sgd(), velocity);
            loss_sum += fwd.loss * static_cast<double>(b);
            correct += fwd.correct;
            seen += b;
        }
        result.history.push_back({epoch, seen ? loss_sum / static_cast<double>(seen) : 0.0,
                                  seen ? static_cast<double>(correct) / static_cast<double>(seen) : 0.0});
    }
    return result;
}

struct EvalResult {
    double loss = 0.0;
    double accuracy = 0.0;
};

/// Eval-mode loss and accuracy over the whole dataset, in fixed-size chunks.
inline EvalResult evaluate(const Model& model, ParameterSet params, const dataset::FeatureDataset& ds,
                           std::size_t chunk = 512) {
    train_detail::check_dataset(model, ds, true);
    double loss = 0.0;
    std::size_t correct = 0;
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < ds.n(); start += chunk) {
        const std::size_t b = std::min(chunk, ds.n() - start);
        idx.resize(b);
        for (std::size_t i = 0; i < b; ++i) idx[i] = start + i;
        const auto fwd = forward(model, params, gather(ds, idx, model.input), gather_labels(ds, idx), Mode::eval);
        loss += fwd.loss * static_cast<double>(b);
        correct += fwd.correct;
    }
    return {loss / static_cast<double>(ds.n()), static_cast<double>(correct) / static_cast<double>(ds.n())};
}

/// Row i = eval-mode activation entering the classifier layer for example i.
inline Matrix<double> extract_features(const Model& model, ParameterSet params, const dataset::FeatureDataset& ds,
                                       std::size_t chunk = 512) {
    model.validate();
    train_detail::check_dataset(model, ds, false);
    if (!model.has_penultimate())
        detail::fail("model lacks a penultimate layer: no learned layer precedes the classifier");
    const std::size_t stop = model.classifier_layer();
    const std::size_t width = model.penultimate_width();
    Matrix<double> out(ds.n(), width);
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < ds.n(); start += chunk) {
        const std::size_t b = std::min(chunk, ds.n() - start);
        idx.resize(b);
        for (std::size_t i = 0; i < b; ++i) idx[i] = start + i;
        const Tensor act = model_detail::run_layers(model, params, gather(ds, idx, model.input), Mode::eval, stop, nullptr);
        detail::require(act.stride() == width, "penultimate width mismatch");
        std::copy(act.data.begin(), act.data.end(), out.row(start).begin());
    }
    return out;
}

/// One synchronous data-parallel update. The global batch is cut into K
/// contiguous shards of b/K examples; worker k runs forward/backward on shard
/// k with replica-local batchnorm statistics; gradients are summed in
/// ascending worker order, divided by K, and applied with one sgd_step.
/// Batchnorm running statistics are taken from worker 0, as when replicas
/// broadcast buffers from rank 0.
inline double data_parallel_step(const Model& model, ParameterSet& params, const Tensor& global_batch,
                                  std::span<const std::uint16_t> labels, std::size_t workers, const TrainConfig& cfg,
                                  Velocity& velocity) {
    cfg.validate();
    detail::require(workers >= 1, "data_parallel_step: worker count must be >= 1");
    detail::require(global_batch.batch % workers == 0,
                    "data_parallel_step: batch size " + std::to_string(global_batch.batch) + " not divisible by K=" +
                        std::to_string(workers));
    detail::require(labels.size() == global_batch.batch, "data_parallel_step: missing labels");
    const std::size_t shard = global_batch.batch / workers;

    std::optional<Gradients> total;
    std::optional<ParameterSet> rank0;
    double loss = 0.0;
    for (std::size_t k = 0; k < workers; ++k) {
        ParameterSet replica = params;
        const Tensor x = global_batch.slice(k * shard, shard);
        auto fwd = forward(model, replica, x, labels.subspan(k * shard, shard), cfg.mode);
        auto g = backward(model, replica, fwd.caches);
        loss += fwd.loss;
        if (!total)
            total = std::move(g);
        else
            *total += g;
        if (k == 0) rank0 = std::move(replica);
    }
    if (workers > 1) *total *= 1.0 / static_cast<double>(workers);
    // Adopt rank 0's batchnorm buffers, then update.
    for (std::size_t l = 0; l < params.layers.size(); ++l)
        for (std::size_t t = 0; t < params.layers[l].size(); ++t)
            if (!params.layers[l][t].trainable) params.layers[l][t].value = rank0->layers[l][t].value;
    sgd_step(params, *total, cfg.sgd(), velocity);
    return loss / static_cast<double>(workers);
}

} // namespace curato::nnet
