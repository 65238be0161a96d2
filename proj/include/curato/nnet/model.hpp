// Copyright (c) 2026, The curato authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>

#include "curato/core/rng.hpp"
#include "curato/nnet/layers.hpp"

namespace curato::nnet {

/// A plain layer stack ending in exactly one softmax cross-entropy head.
struct Model {
    Shape input;
    std::vector<LayerSpec> layers;

    /// Fills in dense `in` and conv `in_ch` left as 0 from the running shape,
    /// then validates.
    static Model build(Shape input, std::vector<LayerSpec> layers) {
        Model m{std::move(input), std::move(layers)};
        Shape cur = m.input;
        for (auto& l : m.layers) {
            if (l.kind == LayerKind::dense && l.in == 0) l.in = cur.numel();
            if (l.kind == LayerKind::conv2d && l.in_ch == 0 && cur.is_image()) l.in_ch = cur.channels();
            cur = output_shape(l, cur);
        }
        m.validate();
        return m;
    }

    /// Output shape of every layer; throws if consecutive shapes do not compose.
    [[nodiscard]] std::vector<Shape> shapes() const {
        detail::require(!input.dims.empty() && input.numel() >= 1, "model: input shape must be non-empty");
        detail::require(input.is_flat() || input.is_image(), "model: input must be (features) or (channels, height, width)");
        detail::require(!layers.empty(), "model: no layers");
        std::vector<Shape> out;
        Shape cur = input;
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const auto& l = layers[i];
            const std::string where = "model layer " + std::to_string(i) + " (" + to_string(l.kind) + "): ";
            switch (l.kind) {
            case LayerKind::dense:
                detail::require(cur.is_flat(), where + "needs a flat input, got " + cur.str());
                detail::require(l.in == cur.numel(), where + "in=" + std::to_string(l.in) + " but input is " + cur.str());
                detail::require(l.out >= 1, where + "out must be >= 1");
                break;
            case LayerKind::conv2d:
                detail::require(cur.is_image(), where + "needs an image input, got " + cur.str());
                detail::require(l.in_ch == cur.channels(), where + "in_ch mismatch with input " + cur.str());
                detail::require(l.out_ch >= 1 && l.kernel >= 1 && l.stride >= 1, where + "bad shape parameters");
                detail::require(cur.height() + 2 * l.pad >= l.kernel && cur.width() + 2 * l.pad >= l.kernel,
                                where + "kernel larger than padded input");
                break;
            case LayerKind::maxpool2d:
                detail::require(cur.is_image(), where + "needs an image input, got " + cur.str());
                detail::require(l.window >= 1 && l.stride >= 1, where + "bad window/stride");
                detail::require(l.window <= cur.height() && l.window <= cur.width(), where + "window larger than input");
                break;
            case LayerKind::batchnorm:
                detail::require(l.eps > 0.0, where + "eps must be > 0");
                detail::require(l.momentum >= 0.0 && l.momentum < 1.0, where + "momentum must be in [0, 1)");
                break;
            case LayerKind::softmax_xent_head:
                detail::require(i + 1 == layers.size(), where + "the head must be the last layer");
                detail::require(cur.is_flat() && cur.numel() >= 1, where + "needs flat logits, got " + cur.str());
                break;
            case LayerKind::relu:
            case LayerKind::flatten: break;
            }
            cur = output_shape(l, cur);
            out.push_back(cur);
        }
        detail::require(layers.back().kind == LayerKind::softmax_xent_head, "model: last layer must be softmax_xent_head");
        return out;
    }

    void validate() const { (void)shapes(); }

    [[nodiscard]] std::size_t class_count() const {
        const auto s = shapes();
        return s.back().numel();
    }

    /// Index of the layer producing the logits (the last dense layer). Its
    /// input is the penultimate activation.
    [[nodiscard]] std::size_t classifier_layer() const {
        for (std::size_t i = layers.size(); i-- > 0;)
            if (layers[i].kind == LayerKind::dense) return i;
        detail::fail("model has no dense classifier layer");
    }

    /// True when a parametric layer precedes the classifier, i.e. the
    /// penultimate activation is a learned feature and not the raw input.
    [[nodiscard]] bool has_penultimate() const {
        const std::size_t c = classifier_layer();
        for (std::size_t i = 0; i < c; ++i)
            if (layers[i].kind == LayerKind::dense || layers[i].kind == LayerKind::conv2d) return true;
        return false;
    }

    [[nodiscard]] std::size_t penultimate_width() const { return layers[classifier_layer()].in; }

    static Shape output_shape(const LayerSpec& l, const Shape& in) {
        switch (l.kind) {
        case LayerKind::dense: return Shape{{l.out}};
        case LayerKind::conv2d:
            if (!in.is_image() || in.height() + 2 * l.pad < l.kernel || in.width() + 2 * l.pad < l.kernel || l.stride == 0)
                return in;
            return Shape{{l.out_ch, conv_out_dim(in.height(), l.kernel, l.stride, l.pad),
                          conv_out_dim(in.width(), l.kernel, l.stride, l.pad)}};
        case LayerKind::maxpool2d:
            if (!in.is_image() || l.window > in.height() || l.window > in.width() || l.stride == 0) return in;
            return Shape{{in.channels(), (in.height() - l.window) / l.stride + 1, (in.width() - l.window) / l.stride + 1}};
        case LayerKind::flatten: return Shape{{in.numel()}};
        case LayerKind::batchnorm:
        case LayerKind::relu:
        case LayerKind::softmax_xent_head: return in;
        }
        return in;
    }

    friend bool operator==(const Model&, const Model&) = default;
};

struct Param {
    std::vector<std::size_t> dims;
    std::vector<double> value;
    bool trainable = true;
    bool decays = false; ///< L2 weight decay applies (dense W, conv K only)

    friend bool operator==(const Param&, const Param&) = default;
};

/// Learnable tensors per layer, in declaration order:
/// dense {W[out][in], b}; conv2d {K[out][in][k][k], b};
/// batchnorm {gamma, beta, running_mean, running_var}.
struct ParameterSet {
    std::vector<std::vector<Param>> layers;
    /// Bumped by every optimizer step; forward caches record it.
    std::uint64_t version = 0;

    friend bool operator==(const ParameterSet& a, const ParameterSet& b) { return a.layers == b.layers; }
};

/// Same nesting as ParameterSet, one buffer per tensor.
struct Gradients {
    std::vector<std::vector<std::vector<double>>> layers;

    static Gradients zeros_like(const ParameterSet& p) {
        Gradients g;
        for (const auto& layer : p.layers) {
            auto& gl = g.layers.emplace_back();
            for (const auto& t : layer) gl.emplace_back(t.value.size(), 0.0);
        }
        return g;
    }

    Gradients& operator+=(const Gradients& o) {
        for (std::size_t l = 0; l < layers.size(); ++l)
            for (std::size_t t = 0; t < layers[l].size(); ++t)
                for (std::size_t i = 0; i < layers[l][t].size(); ++i) layers[l][t][i] += o.layers[l][t][i];
        return *this;
    }

    Gradients& operator*=(double s) {
        for (auto& l : layers)
            for (auto& t : l)
                for (double& v : t) v *= s;
        return *this;
    }
};

using Velocity = Gradients;

/// He fan-in initialization (N(0, 2/fan_in)) for weights, zero biases,
/// BN gamma = 1, beta = 0, running mean 0 / var 1.
inline ParameterSet init_params(const Model& model, std::uint64_t seed) {
    model.validate();
    Rng rng(seed);
    ParameterSet p;
    for (const auto& l : model.layers) {
        auto& out = p.layers.emplace_back();
        switch (l.kind) {
        case LayerKind::dense: {
            Param w{{l.out, l.in}, std::vector<double>(l.out * l.in), true, true};
            const double sd = std::sqrt(2.0 / static_cast<double>(l.in));
            for (double& v : w.value) v = rng.normal(0.0, sd);
            out.push_back(std::move(w));
            out.push_back(Param{{l.out}, std::vector<double>(l.out, 0.0), true, false});
            break;
        }
        case LayerKind::conv2d: {
            const std::size_t fan_in = l.in_ch * l.kernel * l.kernel;
            Param k{{l.out_ch, l.in_ch, l.kernel, l.kernel}, std::vector<double>(l.out_ch * fan_in), true, true};
            const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
            for (double& v : k.value) v = rng.normal(0.0, sd);
            out.push_back(std::move(k));
            out.push_back(Param{{l.out_ch}, std::vector<double>(l.out_ch, 0.0), true, false});
            break;
        }
        case LayerKind::batchnorm: break; // sized below once the input shape is known
        default: break;
        }
    }
    const auto shapes = model.shapes();
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        if (model.layers[i].kind != LayerKind::batchnorm) continue;
        const std::size_t g = BatchNormLayout::of(shapes[i]).groups;
        p.layers[i] = {Param{{g}, std::vector<double>(g, 1.0), true, false},
                       Param{{g}, std::vector<double>(g, 0.0), true, false},
                       Param{{g}, std::vector<double>(g, 0.0), false, false},
                       Param{{g}, std::vector<double>(g, 1.0), false, false}};
    }
    return p;
}

struct LayerCache {
    Tensor input;
    BatchNormCache bn;
    std::vector<std::size_t> argmax;
};

struct Caches {
    std::vector<LayerCache> layers;
    Tensor probs;
    std::vector<std::uint16_t> labels;
    std::uint64_t version = 0;
    bool valid = false;
};

struct ForwardResult {
    Tensor logits;
    double loss = 0.0;
    std::size_t correct = 0;
    Caches caches;
};

namespace model_detail {

inline void check_input(const Model& model, const Tensor& x) {
    detail::require(x.batch >= 1, "forward: empty batch");
    detail::require(x.shape.numel() == model.input.numel(),
                    "forward: input shape " + x.shape.str() + " does not match model input " + model.input.str());
}

/// Runs layers [0, stop) and returns the activation entering layer `stop`.
inline Tensor run_layers(const Model& model, ParameterSet& params, Tensor x, Mode mode, std::size_t stop,
                         std::vector<LayerCache>* caches) {
    x.shape = model.input;
    for (std::size_t i = 0; i < stop; ++i) {
        const auto& l = model.layers[i];
        auto& pl = params.layers[i];
        LayerCache cache;
        Tensor y;
        switch (l.kind) {
        case LayerKind::dense: y = dense_forward(x, pl[0].value, pl[1].value, l.out); break;
        case LayerKind::conv2d: y = conv2d_forward(x, pl[0].value, pl[1].value, l); break;
        case LayerKind::batchnorm:
            y = batchnorm_forward(x, pl[0].value, pl[1].value, pl[2].value, pl[3].value, l.eps, l.momentum, mode, cache.bn);
            break;
        case LayerKind::relu: y = relu_forward(x); break;
        case LayerKind::maxpool2d: y = maxpool2d_forward(x, l, cache.argmax); break;
        case LayerKind::flatten: y = Tensor(x.batch, Shape{{x.shape.numel()}}, x.data); break;
        case LayerKind::softmax_xent_head: y = x; break;
        }
        if (caches) {
            cache.input = std::move(x);
            caches->push_back(std::move(cache));
        }
        x = std::move(y);
    }
    return x;
}

} // namespace model_detail

/// Full pass through the head: logits, mean softmax cross-entropy, and the
/// caches `backward` needs. Train-mode batchnorm updates running statistics
/// in `params`.
inline ForwardResult forward(const Model& model, ParameterSet& params, const Tensor& batch,
                             std::span<const std::uint16_t> labels, Mode mode) {
    model_detail::check_input(model, batch);
    detail::require(params.layers.size() == model.layers.size(), "forward: parameters do not match model");
    detail::require(labels.size() == batch.batch, "forward: missing labels (need one per example)");
    const std::size_t C = model.class_count();
    for (auto l : labels) detail::require(l < C, "forward: label " + std::to_string(l) + " >= class count");

    ForwardResult r;
    r.caches.layers.reserve(model.layers.size());
    r.logits = model_detail::run_layers(model, params, batch, mode, model.layers.size(), &r.caches.layers);
    r.loss = softmax_xent_loss(r.logits, labels);
    r.caches.probs = softmax(r.logits);
    for (std::size_t n = 0; n < batch.batch; ++n) {
        const auto z = r.logits.example(n);
        const auto pred = static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
        if (pred == labels[n]) ++r.correct;
    }
    r.caches.labels.assign(labels.begin(), labels.end());
    r.caches.version = params.version;
    r.caches.valid = true;
    return r;
}

/// Logits only, no loss and no caches.
inline Tensor predict(const Model& model, ParameterSet& params, const Tensor& batch, Mode mode = Mode::eval) {
    model_detail::check_input(model, batch);
    return model_detail::run_layers(model, params, batch, mode, model.layers.size(), nullptr);
}

/// Gradients of the mean loss with respect to every parameter tensor
/// (running statistics get zero gradients).
inline Gradients backward(const Model& model, const ParameterSet& params, const Caches& caches) {
    detail::require(caches.valid && caches.layers.size() == model.layers.size(), "backward: caches do not come from this model");
    if (caches.version != params.version)
        detail::fail("backward: stale cache (parameters changed since the forward pass)");

    Gradients g = Gradients::zeros_like(params);
    const std::size_t B = caches.probs.batch;
    const std::size_t C = caches.probs.stride();
    Tensor dy(B, caches.probs.shape);
    for (std::size_t n = 0; n < B; ++n)
        for (std::size_t c = 0; c < C; ++c)
            dy.data[n * C + c] = (caches.probs.data[n * C + c] - (caches.labels[n] == c ? 1.0 : 0.0)) / static_cast<double>(B);

    for (std::size_t i = model.layers.size(); i-- > 0;) {
        const auto& l = model.layers[i];
        const auto& cache = caches.layers[i];
        const auto& pl = params.layers[i];
        auto& gl = g.layers[i];
        switch (l.kind) {
        case LayerKind::dense: dy = dense_backward(cache.input, dy, pl[0].value, gl[0], gl[1]); break;
        case LayerKind::conv2d: dy = conv2d_backward(cache.input, dy, pl[0].value, gl[0], gl[1], l); break;
        case LayerKind::batchnorm: dy = batchnorm_backward(dy, pl[0].value, cache.bn, gl[0], gl[1]); break;
        case LayerKind::relu: dy = relu_backward(cache.input, dy); break;
        case LayerKind::maxpool2d: dy = maxpool2d_backward(cache.input, dy, cache.argmax); break;
        case LayerKind::flatten: dy = Tensor(dy.batch, cache.input.shape, std::move(dy.data)); break;
        case LayerKind::softmax_xent_head: break;
        }
    }
    return g;
}

/// Momentum SGD with L2 decay on weights only:
///   v <- mu v - eta (g + lambda w);  w <- w + v
struct SgdHyper {
    double learning_rate = 0.01;
    double momentum = 0.9;
    double weight_decay = 0.0;
};

inline void sgd_step(ParameterSet& params, const Gradients& grads, const SgdHyper& h, Velocity& velocity) {
    if (velocity.layers.empty()) velocity = Gradients::zeros_like(params);
    for (std::size_t l = 0; l < params.layers.size(); ++l)
        for (std::size_t t = 0; t < params.layers[l].size(); ++t) {
            auto& p = params.layers[l][t];
            if (!p.trainable) continue;
            const double decay = p.decays ? h.weight_decay : 0.0;
            auto& v = velocity.layers[l][t];
            const auto& gr = grads.layers[l][t];
            for (std::size_t i = 0; i < p.value.size(); ++i) {
                v[i] = h.momentum * v[i] - h.learning_rate * (gr[i] + decay * p.value[i]);
                p.value[i] += v[i];
            }
        }
    ++params.version;
}

} // namespace curato::nnet
