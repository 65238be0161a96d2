// Copyright (c) 2026, The curato authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "curato/nnet/tensor.hpp"

namespace curato::nnet {

enum class Mode { train, eval };

enum class LayerKind { dense, conv2d, batchnorm, relu, maxpool2d, flatten, softmax_xent_head };

inline std::string to_string(LayerKind k) {
    switch (k) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::batchnorm: return "batchnorm";
    case LayerKind::relu: return "relu";
    case LayerKind::maxpool2d: return "maxpool2d";
    case LayerKind::flatten: return "flatten";
    case LayerKind::softmax_xent_head: return "softmax_xent_head";
    }
    return "?";
}

inline LayerKind layer_kind_from_string(const std::string& s) {
    for (auto k : {LayerKind::dense, LayerKind::conv2d, LayerKind::batchnorm, LayerKind::relu, LayerKind::maxpool2d,
                   LayerKind::flatten, LayerKind::softmax_xent_head})
        if (to_string(k) == s) return k;
    detail::fail("unknown layer kind '" + s + "'");
}

struct LayerSpec {
    LayerKind kind = LayerKind::relu;
    // dense
    std::size_t in = 0;
    std::size_t out = 0;
    // conv2d
    std::size_t in_ch = 0;
    std::size_t out_ch = 0;
    std::size_t kernel = 0;
    std::size_t stride = 1;
    std::size_t pad = 0;
    // maxpool2d (uses `stride` too)
    std::size_t window = 0;
    // batchnorm
    double eps = 1e-5;
    double momentum = 0.9; ///< running = momentum * running + (1 - momentum) * batch

    static LayerSpec dense(std::size_t in, std::size_t out) { return {.kind = LayerKind::dense, .in = in, .out = out}; }
    static LayerSpec conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel, std::size_t stride = 1,
                            std::size_t pad = 0) {
        return {.kind = LayerKind::conv2d, .in_ch = in_ch, .out_ch = out_ch, .kernel = kernel, .stride = stride, .pad = pad};
    }
    static LayerSpec batchnorm(double eps = 1e-5) { return {.kind = LayerKind::batchnorm, .eps = eps}; }
    static LayerSpec relu() { return {.kind = LayerKind::relu}; }
    static LayerSpec maxpool2d(std::size_t window, std::size_t stride) {
        return {.kind = LayerKind::maxpool2d, .stride = stride, .window = window};
    }
    static LayerSpec flatten() { return {.kind = LayerKind::flatten}; }
    static LayerSpec head() { return {.kind = LayerKind::softmax_xent_head}; }

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

// Dense ----------------------------------------------------------------------

/// y = x W^T + b, W is out x in.
inline Tensor dense_forward(const Tensor& x, std::span<const double> w, std::span<const double> b, std::size_t out) {
    const std::size_t in = x.stride();
    Tensor y(x.batch, Shape{{out}});
    for (std::size_t n = 0; n < x.batch; ++n) {
        const double* xr = x.data.data() + n * in;
        double* yr = y.data.data() + n * out;
        for (std::size_t o = 0; o < out; ++o) {
            const double* wr = w.data() + o * in;
            double acc = b[o];
            for (std::size_t i = 0; i < in; ++i) acc += wr[i] * xr[i];
            yr[o] = acc;
        }
    }
    return y;
}

inline Tensor dense_backward(const Tensor& x, const Tensor& dy, std::span<const double> w, std::span<double> dw,
                             std::span<double> db) {
    const std::size_t in = x.stride();
    const std::size_t out = dy.stride();
    Tensor dx(x.batch, x.shape);
    for (std::size_t n = 0; n < x.batch; ++n) {
        const double* xr = x.data.data() + n * in;
        const double* gr = dy.data.data() + n * out;
        double* dxr = dx.data.data() + n * in;
        for (std::size_t o = 0; o < out; ++o) {
            const double g = gr[o];
            db[o] += g;
            double* dwr = dw.data() + o * in;
            const double* wr = w.data() + o * in;
            for (std::size_t i = 0; i < in; ++i) {
                dwr[i] += g * xr[i];
                dxr[i] += g * wr[i];
            }
        }
    }
    return dx;
}

// Conv2d ---------------------------------------------------------------------

inline std::size_t conv_out_dim(std::size_t size, std::size_t kernel, std::size_t stride, std::size_t pad) {
    return (size + 2 * pad - kernel) / stride + 1;
}

/// Direct convolution, kernel layout [out_ch][in_ch][k][k].
inline Tensor conv2d_forward(const Tensor& x, std::span<const double> k, std::span<const double> b, const LayerSpec& s) {
    const std::size_t C = x.shape.channels(), H = x.shape.height(), W = x.shape.width();
    const std::size_t OH = conv_out_dim(H, s.kernel, s.stride, s.pad), OW = conv_out_dim(W, s.kernel, s.stride, s.pad);
    const std::size_t K = s.kernel;
    Tensor y(x.batch, Shape{{s.out_ch, OH, OW}});
    for (std::size_t n = 0; n < x.batch; ++n) {
        const double* xn = x.data.data() + n * x.stride();
        double* yn = y.data.data() + n * y.stride();
        for (std::size_t oc = 0; oc < s.out_ch; ++oc) {
            for (std::size_t oy = 0; oy < OH; ++oy) {
                for (std::size_t ox = 0; ox < OW; ++ox) {
                    double acc = b[oc];
                    for (std::size_t ic = 0; ic < C; ++ic) {
                        const double* kk = k.data() + ((oc * C + ic) * K) * K;
                        const double* xc = xn + ic * H * W;
                        for (std::size_t ky = 0; ky < K; ++ky) {
                            const auto iy = static_cast<std::ptrdiff_t>(oy * s.stride + ky) - static_cast<std::ptrdiff_t>(s.pad);
                            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
                            for (std::size_t kx = 0; kx < K; ++kx) {
                                const auto ix = static_cast<std::ptrdiff_t>(ox * s.stride + kx) - static_cast<std::ptrdiff_t>(s.pad);
                                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
                                acc += kk[ky * K + kx] * xc[static_cast<std::size_t>(iy) * W + static_cast<std::size_t>(ix)];
                            }
                        }
                    }
                    yn[(oc * OH + oy) * OW + ox] = acc;
                }
            }
        }
    }
    return y;
}

inline Tensor conv2d_backward(const Tensor& x, const Tensor& dy, std::span<const double> k, std::span<double> dk,
                              std::span<double> db, const LayerSpec& s) {
    const std::size_t C = x.shape.channels(), H = x.shape.height(), W = x.shape.width();
    const std::size_t OH = dy.shape.height(), OW = dy.shape.width();
    const std::size_t K = s.kernel;
    Tensor dx(x.batch, x.shape);
    for (std::size_t n = 0; n < x.batch; ++n) {
        const double* xn = x.data.data() + n * x.stride();
        const double* gn = dy.data.data() + n * dy.stride();
        double* dxn = dx.data.data() + n * dx.stride();
        for (std::size_t oc = 0; oc < s.out_ch; ++oc) {
            for (std::size_t oy = 0; oy < OH; ++oy) {
                for (std::size_t ox = 0; ox < OW; ++ox) {
                    const double g = gn[(oc * OH + oy) * OW + ox];
                    db[oc] += g;
                    for (std::size_t ic = 0; ic < C; ++ic) {
                        const std::size_t kbase = ((oc * C + ic) * K) * K;
                        for (std::size_t ky = 0; ky < K; ++ky) {
                            const auto iy = static_cast<std::ptrdiff_t>(oy * s.stride + ky) - static_cast<std::ptrdiff_t>(s.pad);
                            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
                            for (std::size_t kx = 0; kx < K; ++kx) {
                                const auto ix = static_cast<std::ptrdiff_t>(ox * s.stride + kx) - static_cast<std::ptrdiff_t>(s.pad);
                                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
                                const std::size_t xi = (ic * H + static_cast<std::size_t>(iy)) * W + static_cast<std::size_t>(ix);
                                dk[kbase + ky * K + kx] += g * xn[xi];
                                dxn[xi] += g * k[kbase + ky * K + kx];
                            }
                        }
                    }
                }
            }
        }
    }
    return dx;
}

// Batch normalization ----------------------------------------------------------

/// Normalization groups: one per feature for flat inputs, one per channel for
/// image inputs. A group's sample is every (example, spatial position) pair, so
/// the sample size is b for dense inputs and b*p*q for a p x q feature map.
struct BatchNormLayout {
    std::size_t groups = 0;
    std::size_t spatial = 1;

    static BatchNormLayout of(const Shape& s) {
        if (s.is_image()) return {s.channels(), s.height() * s.width()};
        return {s.numel(), 1};
    }
};

struct BatchNormCache {
    std::vector<double> xhat;
    std::vector<double> inv_std; ///< per group
    Mode mode = Mode::train;
};

/// Train mode: batch mean/variance (biased, 1/m), normalize, scale by gamma,
/// shift by beta, and fold the batch statistics into the running averages.
/// Eval mode: normalize with the running statistics.
inline Tensor batchnorm_forward(const Tensor& x, std::span<const double> gamma, std::span<const double> beta,
                                std::span<double> running_mean, std::span<double> running_var, double eps,
                                double momentum, Mode mode, BatchNormCache& cache) {
    detail::require(eps > 0.0, "batchnorm: eps must be > 0");
    const auto layout = BatchNormLayout::of(x.shape);
    const std::size_t G = layout.groups, S = layout.spatial, B = x.batch;
    const std::size_t m = B * S;
    // Flat: element (n, g) at n*G + g. Image: (n, g, s) at (n*G + g)*S + s.
    auto at = [&](std::size_t n, std::size_t g, std::size_t s) { return (n * G + g) * S + s; };

    cache.mode = mode;
    cache.xhat.assign(x.data.size(), 0.0);
    cache.inv_std.assign(G, 0.0);
    Tensor y(x.batch, x.shape);

    if (mode == Mode::train) {
        if (m < 2)
            detail::fail("batchnorm: training needs at least 2 samples per statistic (got batch " + std::to_string(B) +
                         "); the batch variance is undefined");
        for (std::size_t g = 0; g < G; ++g) {
            double mean = 0.0;
            for (std::size_t n = 0; n < B; ++n)
                for (std::size_t s = 0; s < S; ++s) mean += x.data[at(n, g, s)];
            mean /= static_cast<double>(m);
            double var = 0.0;
            for (std::size_t n = 0; n < B; ++n)
                for (std::size_t s = 0; s < S; ++s) {
                    const double c = x.data[at(n, g, s)] - mean;
                    var += c * c;
                }
            var /= static_cast<double>(m);
            const double inv = 1.0 / std::sqrt(var + eps);
            cache.inv_std[g] = inv;
            for (std::size_t n = 0; n < B; ++n)
                for (std::size_t s = 0; s < S; ++s) {
                    const std::size_t i = at(n, g, s);
                    const double xh = (x.data[i] - mean) * inv;
                    cache.xhat[i] = xh;
                    y.data[i] = gamma[g] * xh + beta[g];
                }
            running_mean[g] = momentum * running_mean[g] + (1.0 - momentum) * mean;
            running_var[g] = momentum * running_var[g] + (1.0 - momentum) * var;
        }
    } else {
        for (std::size_t g = 0; g < G; ++g) {
            const double inv = 1.0 / std::sqrt(running_var[g] + eps);
            cache.inv_std[g] = inv;
            for (std::size_t n = 0; n < B; ++n)
                for (std::size_t s = 0; s < S; ++s) {
                    const std::size_t i = at(n, g, s);
                    const double xh = (x.data[i] - running_mean[g]) * inv;
                    cache.xhat[i] = xh;
                    y.data[i] = gamma[g] * xh + beta[g];
                }
        }
    }
    return y;
}

inline Tensor batchnorm_backward(const Tensor& dy, std::span<const double> gamma, const BatchNormCache& cache,
                                 std::span<double> dgamma, std::span<double> dbeta) {
    const auto layout = BatchNormLayout::of(dy.shape);
    const std::size_t G = layout.groups, S = layout.spatial, B = dy.batch;
    const auto m = static_cast<double>(B * S);
    auto at = [&](std::size_t n, std::size_t g, std::size_t s) { return (n * G + g) * S + s; };
    Tensor dx(dy.batch, dy.shape);
    for (std::size_t g = 0; g < G; ++g) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (std::size_t n = 0; n < B; ++n)
            for (std::size_t s = 0; s < S; ++s) {
                const std::size_t i = at(n, g, s);
                sum_dy += dy.data[i];
                sum_dy_xhat += dy.data[i] * cache.xhat[i];
            }
        dgamma[g] += sum_dy_xhat;
        dbeta[g] += sum_dy;
        const double scale = gamma[g] * cache.inv_std[g];
        for (std::size_t n = 0; n < B; ++n)
            for (std::size_t s = 0; s < S; ++s) {
                const std::size_t i = at(n, g, s);
                if (cache.mode == Mode::train)
                    dx.data[i] = scale * (dy.data[i] - sum_dy / m - cache.xhat[i] * sum_dy_xhat / m);
                else
                    dx.data[i] = scale * dy.data[i];
            }
    }
    return dx;
}

// Elementwise and pooling -------------------------------------------------------

inline Tensor relu_forward(const Tensor& x) {
    Tensor y = x;
    for (double& v : y.data) v = v > 0.0 ? v : 0.0;
    return y;
}

inline Tensor relu_backward(const Tensor& x, const Tensor& dy) {
    Tensor dx(dy.batch, dy.shape);
    for (std::size_t i = 0; i < dx.data.size(); ++i) dx.data[i] = x.data[i] > 0.0 ? dy.data[i] : 0.0;
    return dx;
}

/// Max over window x window patches, no padding. `argmax` records the flat
/// input offset (within the example) of each output's winner; ties keep the first.
inline Tensor maxpool2d_forward(const Tensor& x, const LayerSpec& s, std::vector<std::size_t>& argmax) {
    const std::size_t C = x.shape.channels(), H = x.shape.height(), W = x.shape.width();
    const std::size_t OH = (H - s.window) / s.stride + 1, OW = (W - s.window) / s.stride + 1;
    Tensor y(x.batch, Shape{{C, OH, OW}});
    argmax.assign(y.data.size(), 0);
    for (std::size_t n = 0; n < x.batch; ++n) {
        const double* xn = x.data.data() + n * x.stride();
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t oy = 0; oy < OH; ++oy)
                for (std::size_t ox = 0; ox < OW; ++ox) {
                    double best = -std::numeric_limits<double>::infinity();
                    std::size_t arg = 0;
                    for (std::size_t ky = 0; ky < s.window; ++ky)
                        for (std::size_t kx = 0; kx < s.window; ++kx) {
                            const std::size_t i = (c * H + oy * s.stride + ky) * W + ox * s.stride + kx;
                            if (xn[i] > best) {
                                best = xn[i];
                                arg = i;
                            }
                        }
                    const std::size_t o = n * y.stride() + (c * OH + oy) * OW + ox;
                    y.data[o] = best;
                    argmax[o] = arg;
                }
    }
    return y;
}

inline Tensor maxpool2d_backward(const Tensor& x, const Tensor& dy, const std::vector<std::size_t>& argmax) {
    Tensor dx(x.batch, x.shape);
    for (std::size_t n = 0; n < dy.batch; ++n)
        for (std::size_t j = 0; j < dy.stride(); ++j) {
            const std::size_t o = n * dy.stride() + j;
            dx.data[n * dx.stride() + argmax[o]] += dy.data[o];
        }
    return dx;
}

// Head ---------------------------------------------------------------------------

/// Row-wise softmax, max-shifted.
inline Tensor softmax(const Tensor& logits) {
    Tensor p(logits.batch, logits.shape);
    const std::size_t C = logits.stride();
    for (std::size_t n = 0; n < logits.batch; ++n) {
        const auto z = logits.example(n);
        const double zmax = *std::max_element(z.begin(), z.end());
        double sum = 0.0;
        for (std::size_t c = 0; c < C; ++c) sum += (p.data[n * C + c] = std::exp(z[c] - zmax));
        for (std::size_t c = 0; c < C; ++c) p.data[n * C + c] /= sum;
    }
    return p;
}

/// Mean cross-entropy, computed with log-sum-exp for stability.
inline double softmax_xent_loss(const Tensor& logits, std::span<const std::uint16_t> labels) {
    const std::size_t C = logits.stride();
    double total = 0.0;
    for (std::size_t n = 0; n < logits.batch; ++n) {
        const auto z = logits.example(n);
        const double zmax = *std::max_element(z.begin(), z.end());
        double sum = 0.0;
        for (std::size_t c = 0; c < C; ++c) sum += std::exp(z[c] - zmax);
        total += std::log(sum) + zmax - z[labels[n]];
    }
    return total / static_cast<double>(logits.batch);
}

} // namespace curato::nnet
