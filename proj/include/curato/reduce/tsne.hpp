// Copyright (c) 2026, The curato authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "curato/core/error.hpp"
#include "curato/core/matrix.hpp"
#include "curato/core/rng.hpp"
#include "curato/reduce/pca.hpp"

namespace curato::reduce {

struct TsneConfig {
    static constexpr std::size_t out_dim = 2;

    double perplexity = 30.0;
    std::size_t iterations = 1000;
    double exaggeration = 12.0;
    std::size_t exaggeration_iters = 250;
    double learning_rate = 200.0;
    double momentum = 0.5;
    double final_momentum = 0.8;
    std::size_t momentum_switch = 250;
    double theta = 0.5; ///< Barnes-Hut opening angle; 0 selects the exact O(n^2) path
    std::uint64_t seed = 0;
    double entropy_tol = 1e-5;
    std::size_t max_bisection = 50;
    double init_sd = 1e-4;
    std::size_t kl_every = 50; ///< KL is recorded at iteration 0, every kl_every, and at the end

    void validate(std::size_t n) const {
        using curato::detail::require;
        require(n >= 4, "tsne: need at least 4 points, got " + std::to_string(n));
        require(perplexity > 1.0 && perplexity < static_cast<double>(n),
                "tsne: perplexity must be in (1, n); got " + std::to_string(perplexity) + " with n=" + std::to_string(n));
        require(theta >= 0.0 && theta <= 1.0, "tsne: theta must be in [0, 1]");
        require(learning_rate > 0.0, "tsne: learning rate must be > 0");
        require(exaggeration >= 1.0, "tsne: exaggeration must be >= 1");
        require(momentum >= 0.0 && momentum < 1.0 && final_momentum >= 0.0 && final_momentum < 1.0,
                "tsne: momentum must be in [0, 1)");
        require(entropy_tol > 0.0 && max_bisection >= 1, "tsne: bad sigma-search settings");
        require(init_sd > 0.0, "tsne: init_sd must be > 0");
        require(kl_every >= 1, "tsne: kl_every must be >= 1");
    }

    friend bool operator==(const TsneConfig&, const TsneConfig&) = default;
};

struct KlSample {
    std::size_t iteration = 0;
    double kl = 0.0;
    friend bool operator==(const KlSample&, const KlSample&) = default;
};

struct Embedding {
    Matrix<double> y;                 ///< n x 2, rows in source order
    std::vector<std::uint16_t> labels; ///< per-point class, empty when the source is unlabeled
    TsneConfig config;
    std::vector<double> beta;          ///< per-point precision 1/(2 sigma^2) found by the bisection
    std::vector<KlSample> kl;

    [[nodiscard]] std::size_t n() const { return y.rows(); }
    [[nodiscard]] double initial_kl() const { return kl.empty() ? 0.0 : kl.front().kl; }
    [[nodiscard]] double final_kl() const { return kl.empty() ? 0.0 : kl.back().kl; }
    [[nodiscard]] double sigma(std::size_t i) const { return std::sqrt(1.0 / (2.0 * beta[i])); }
};

namespace tsne_detail {

/// Finds beta so the conditional distribution over `dist` (squared
/// distances to the candidate neighbours) has entropy log(perplexity).
/// Writes the normalized probabilities into `p` and returns beta.
inline double calibrate_row(std::span<const double> dist, double perplexity, double tol, std::size_t max_steps,
                            std::span<double> p) {
    const double target = std::log(perplexity);
    const double dmin = *std::min_element(dist.begin(), dist.end());
    double mean = 0.0;
    for (double v : dist) mean += v - dmin;
    mean /= static_cast<double>(dist.size());

    double beta = mean > 0.0 ? 1.0 / mean : 1.0;
    double lo = 0.0, hi = std::numeric_limits<double>::infinity();
    auto fill = [&](double b) {
        double sum = 0.0, weighted = 0.0;
        for (std::size_t j = 0; j < dist.size(); ++j) {
            p[j] = std::exp(-b * (dist[j] - dmin));
            sum += p[j];
            weighted += (dist[j] - dmin) * p[j];
        }
        for (double& v : p) v /= sum;
        return std::log(sum) + b * weighted / sum;
    };
    for (std::size_t step = 0; step < max_steps; ++step) {
        const double h = fill(beta);
        if (std::abs(h - target) < tol) return beta;
        if (h > target) {
            lo = beta;
            beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
        } else {
            hi = beta;
            beta = lo == 0.0 ? beta * 0.5 : 0.5 * (beta + lo);
        }
    }
    fill(beta);
    return beta;
}

inline double sqdist(const Matrix<double>& x, std::size_t i, std::size_t j) {
    double s = 0.0;
    const auto a = x.row(i), b = x.row(j);
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = a[k] - b[k];
        s += d * d;
    }
    return s;
}

inline void check_input(const FeatureMatrix& x) {
    for (double v : x.data()) curato::detail::require(std::isfinite(v), "tsne: non-finite input");
    bool all_same = true;
    for (std::size_t i = 1; i < x.rows() && all_same; ++i)
        for (std::size_t k = 0; k < x.cols(); ++k)
            if (x(i, k) != x(0, k)) {
                all_same = false;
                break;
            }
    curato::detail::require(!all_same, "tsne: degenerate input, all points identical (pairwise distances are zero)");
}

/// Symmetric joint probabilities over all pairs, row-major n x n.
struct DenseP {
    std::size_t n = 0;
    std::vector<double> p;
};

/// Symmetric joint probabilities restricted to nearest-neighbour pairs (CSR).
struct SparseP {
    std::vector<std::size_t> row_start;
    std::vector<std::size_t> col;
    std::vector<double> val;
};

inline DenseP dense_affinities(const FeatureMatrix& x, const TsneConfig& cfg, std::vector<double>& beta) {
    const std::size_t n = x.rows();
    std::vector<double> cond(n * n, 0.0);
    std::vector<double> dist(n - 1), p(n - 1);
    beta.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0, k = 0; j < n; ++j)
            if (j != i) dist[k++] = sqdist(x, i, j);
        beta[i] = calibrate_row(dist, cfg.perplexity, cfg.entropy_tol, cfg.max_bisection, p);
        for (std::size_t j = 0, k = 0; j < n; ++j)
            if (j != i) cond[i * n + j] = p[k++];
    }
    // Symmetrize in place.
    const double scale = 1.0 / (2.0 * static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = (cond[i * n + j] + cond[j * n + i]) * scale;
            cond[i * n + j] = v;
            cond[j * n + i] = v;
        }
    return DenseP{n, std::move(cond)};
}

inline SparseP sparse_affinities(const FeatureMatrix& x, const TsneConfig& cfg, std::vector<double>& beta) {
    const std::size_t n = x.rows();
    const std::size_t k = std::min(n - 1, static_cast<std::size_t>(3.0 * cfg.perplexity));
    beta.assign(n, 0.0);
    struct Entry {
        std::size_t i, j;
        double v;
    };
    std::vector<Entry> coo;
    coo.reserve(2 * n * k);
    std::vector<std::pair<double, std::size_t>> cand(n - 1);
    std::vector<double> dist(k), p(k);
    const double scale = 1.0 / (2.0 * static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0, c = 0; j < n; ++j)
            if (j != i) cand[c++] = {sqdist(x, i, j), j};
        std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());
        for (std::size_t t = 0; t < k; ++t) dist[t] = cand[t].first;
        beta[i] = calibrate_row(dist, cfg.perplexity, cfg.entropy_tol, cfg.max_bisection, p);
        for (std::size_t t = 0; t < k; ++t) {
            coo.push_back({i, cand[t].second, p[t] * scale});
            coo.push_back({cand[t].second, i, p[t] * scale});
        }
    }
    std::sort(coo.begin(), coo.end(), [](const Entry& a, const Entry& b) { return a.i != b.i ? a.i < b.i : a.j < b.j; });
    SparseP out;
    out.row_start.assign(n + 1, 0);
    for (std::size_t e = 0; e < coo.size(); ++e) {
        if (!out.col.empty() && e > 0 && coo[e].i == coo[e - 1].i && coo[e].j == coo[e - 1].j) {
            out.val.back() += coo[e].v;
            continue;
        }
        out.col.push_back(coo[e].j);
        out.val.push_back(coo[e].v);
        ++out.row_start[coo[e].i + 1];
    }
    for (std::size_t i = 0; i < n; ++i) out.row_start[i + 1] += out.row_start[i];
    return out;
}

/// Exact gradient in one pass over pairs. Attractive and repulsive sums are
/// kept apart so the normalizer Z can be applied at the end. Returns Z.
inline double exact_gradient(const DenseP& P, const Matrix<double>& y, double exaggeration, Matrix<double>& grad) {
    const std::size_t n = y.rows();
    std::vector<double> attr(2 * n, 0.0), rep(2 * n, 0.0);
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double yi0 = y(i, 0), yi1 = y(i, 1);
        const double* prow = P.p.data() + i * n;
        double ai0 = 0.0, ai1 = 0.0, ri0 = 0.0, ri1 = 0.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d0 = yi0 - y(j, 0), d1 = yi1 - y(j, 1);
            const double w = 1.0 / (1.0 + d0 * d0 + d1 * d1);
            z += 2.0 * w;
            const double a = prow[j] * w, r = w * w;
            ai0 += a * d0;
            ai1 += a * d1;
            ri0 += r * d0;
            ri1 += r * d1;
            attr[2 * j] -= a * d0;
            attr[2 * j + 1] -= a * d1;
            rep[2 * j] -= r * d0;
            rep[2 * j + 1] -= r * d1;
        }
        attr[2 * i] += ai0;
        attr[2 * i + 1] += ai1;
        rep[2 * i] += ri0;
        rep[2 * i + 1] += ri1;
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < 2; ++c)
            grad(i, c) = 4.0 * (exaggeration * attr[2 * i + c] - rep[2 * i + c] / z);
    return z;
}

inline double exact_kl(const DenseP& P, const Matrix<double>& y) {
    const std::size_t n = y.rows();
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d0 = y(i, 0) - y(j, 0), d1 = y(i, 1) - y(j, 1);
            z += 2.0 / (1.0 + d0 * d0 + d1 * d1);
        }
    double kl = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double p = P.p[i * n + j];
            if (i == j || p <= 0.0) continue;
            const double d0 = y(i, 0) - y(j, 0), d1 = y(i, 1) - y(j, 1);
            const double q = 1.0 / (1.0 + d0 * d0 + d1 * d1) / z;
            kl += p * std::log(p / q);
        }
    return kl;
}

/// Point-region quadtree over the embedding with centre-of-mass summaries.
class QuadTree {
public:
    explicit QuadTree(const Matrix<double>& y) : y_(y) {
        const std::size_t n = y.rows();
        double lo0 = y(0, 0), hi0 = lo0, lo1 = y(0, 1), hi1 = lo1;
        for (std::size_t i = 1; i < n; ++i) {
            lo0 = std::min(lo0, y(i, 0));
            hi0 = std::max(hi0, y(i, 0));
            lo1 = std::min(lo1, y(i, 1));
            hi1 = std::max(hi1, y(i, 1));
        }
        const double half = 0.5 * std::max(hi0 - lo0, hi1 - lo1) * (1.0 + 1e-9) + 1e-12;
        std::vector<std::size_t> all(n);
        std::iota(all.begin(), all.end(), std::size_t{0});
        nodes_.reserve(2 * n);
        build(all, 0.5 * (lo0 + hi0), 0.5 * (lo1 + hi1), half, 0);
    }

    /// Accumulates the repulsive sum for point i into (r0, r1) and returns
    /// point i's contribution to Z.
    double repulse(std::size_t i, double theta, double& r0, double& r1) const {
        return visit(0, i, theta * theta, r0, r1);
    }

private:
    struct Node {
        double cx = 0, cy = 0, half = 0; // square cell
        double mx = 0, my = 0;   // centre of mass
        std::size_t count = 0;
        std::array<std::int64_t, 4> child{-1, -1, -1, -1};
        std::vector<std::size_t> points; // leaves only
    };

    static constexpr std::size_t max_depth = 48;

    std::size_t build(const std::vector<std::size_t>& idx, double cx, double cy, double half, std::size_t depth) {
        const std::size_t id = nodes_.size();
        Node fresh;
        fresh.cx = cx;
        fresh.cy = cy;
        fresh.half = half;
        nodes_.push_back(std::move(fresh));
        double sx = 0.0, sy = 0.0;
        for (std::size_t i : idx) {
            sx += y_(i, 0);
            sy += y_(i, 1);
        }
        nodes_[id].count = idx.size();
        nodes_[id].mx = sx / static_cast<double>(idx.size());
        nodes_[id].my = sy / static_cast<double>(idx.size());
        if (idx.size() == 1 || depth >= max_depth) {
            nodes_[id].points = idx;
            return id;
        }
        std::array<std::vector<std::size_t>, 4> parts;
        for (std::size_t i : idx) parts[quadrant(cx, cy, i)].push_back(i);
        const double h = 0.5 * half;
        for (std::size_t q = 0; q < 4; ++q) {
            if (parts[q].empty()) continue;
            const double qx = cx + ((q & 1) ? h : -h), qy = cy + ((q & 2) ? h : -h);
            const auto c = build(parts[q], qx, qy, h, depth + 1);
            nodes_[id].child[q] = static_cast<std::int64_t>(c);
        }
        return id;
    }

    [[nodiscard]] std::size_t quadrant(double cx, double cy, std::size_t i) const {
        return (y_(i, 0) >= cx ? 1u : 0u) | (y_(i, 1) >= cy ? 2u : 0u);
    }

    [[nodiscard]] bool contains(const Node& node, std::size_t i) const {
        return std::abs(y_(i, 0) - node.cx) <= node.half && std::abs(y_(i, 1) - node.cy) <= node.half;
    }

    double visit(std::size_t id, std::size_t i, double theta2, double& r0, double& r1) const {
        const Node& node = nodes_[id];
        const double yi0 = y_(i, 0), yi1 = y_(i, 1);
        if (!node.points.empty()) {
            double z = 0.0;
            for (std::size_t j : node.points) {
                if (j == i) continue;
                const double d0 = yi0 - y_(j, 0), d1 = yi1 - y_(j, 1);
                const double w = 1.0 / (1.0 + d0 * d0 + d1 * d1);
                z += w;
                r0 += w * w * d0;
                r1 += w * w * d1;
            }
            return z;
        }
        const double d0 = yi0 - node.mx, d1 = yi1 - node.my;
        const double dist2 = d0 * d0 + d1 * d1;
        const double width = 2.0 * node.half;
        // A cell holding the query point is always opened so the point never
        // summarizes itself.
        if (!contains(node, i) && width * width < theta2 * dist2) {
            const double w = 1.0 / (1.0 + dist2);
            const double m = static_cast<double>(node.count);
            r0 += m * w * w * d0;
            r1 += m * w * w * d1;
            return m * w;
        }
        double z = 0.0;
        for (auto c : node.child)
            if (c >= 0) z += visit(static_cast<std::size_t>(c), i, theta2, r0, r1);
        return z;
    }

    const Matrix<double>& y_;
    std::vector<Node> nodes_;
};

/// Barnes-Hut repulsion for every point; rep is n x 2 (unnormalized). Returns Z.
inline double bh_repulsion(const Matrix<double>& y, double theta, std::vector<double>& rep) {
    const std::size_t n = y.rows();
    const QuadTree tree(y);
    rep.assign(2 * n, 0.0);
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) z += tree.repulse(i, theta, rep[2 * i], rep[2 * i + 1]);
    return z;
}

inline double bh_gradient(const SparseP& P, const Matrix<double>& y, double exaggeration, double theta,
                          Matrix<double>& grad) {
    const std::size_t n = y.rows();
    std::vector<double> rep;
    const double z = bh_repulsion(y, theta, rep);
    for (std::size_t i = 0; i < n; ++i) {
        double a0 = 0.0, a1 = 0.0;
        for (std::size_t e = P.row_start[i]; e < P.row_start[i + 1]; ++e) {
            const std::size_t j = P.col[e];
            const double d0 = y(i, 0) - y(j, 0), d1 = y(i, 1) - y(j, 1);
            const double w = P.val[e] / (1.0 + d0 * d0 + d1 * d1);
            a0 += w * d0;
            a1 += w * d1;
        }
        grad(i, 0) = 4.0 * (exaggeration * a0 - rep[2 * i] / z);
        grad(i, 1) = 4.0 * (exaggeration * a1 - rep[2 * i + 1] / z);
    }
    return z;
}

/// KL over the sparse support with Z from the tree (theta) traversal.
inline double sparse_kl(const SparseP& P, const Matrix<double>& y, double theta) {
    std::vector<double> rep;
    const double z = bh_repulsion(y, theta, rep);
    double kl = 0.0;
    for (std::size_t i = 0; i + 1 < P.row_start.size(); ++i)
        for (std::size_t e = P.row_start[i]; e < P.row_start[i + 1]; ++e) {
            const std::size_t j = P.col[e];
            const double d0 = y(i, 0) - y(j, 0), d1 = y(i, 1) - y(j, 1);
            const double q = 1.0 / (1.0 + d0 * d0 + d1 * d1) / z;
            if (P.val[e] > 0.0) kl += P.val[e] * std::log(P.val[e] / q);
        }
    return kl;
}

/// Initial low-dimensional positions: each point draws from its own stream
/// keyed by its identity, so row order does not change what a point gets.
inline Matrix<double> initial_y(std::span<const std::uint64_t> ids, const TsneConfig& cfg) {
    const Rng root(cfg.seed);
    Matrix<double> y(ids.size(), 2);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        Rng r = root.stream(ids[i]);
        y(i, 0) = r.normal(0.0, cfg.init_sd);
        y(i, 1) = r.normal(0.0, cfg.init_sd);
    }
    return y;
}

/// Rows sorted by point id, so arithmetic order follows identity rather than
/// input position.
inline std::vector<std::size_t> canonical_order(std::span<const std::uint64_t> ids) {
    std::vector<std::size_t> order(ids.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });
    for (std::size_t k = 1; k < order.size(); ++k)
        curato::detail::require(ids[order[k]] != ids[order[k - 1]], "tsne: duplicate point id");
    return order;
}

} // namespace tsne_detail

/// t-SNE to two dimensions. `labels` is carried through to the result;
/// `point_ids` (default: row index) keys each point's initial draw.
inline Embedding tsne(const FeatureMatrix& x, const TsneConfig& cfg, std::span<const std::uint16_t> labels = {},
                      std::span<const std::uint64_t> point_ids = {}) {
    using namespace tsne_detail;
    const std::size_t n = x.rows();
    cfg.validate(n);
    curato::detail::require(labels.empty() || labels.size() == n, "tsne: label count does not match row count");
    curato::detail::require(point_ids.empty() || point_ids.size() == n, "tsne: point id count does not match row count");
    check_input(x);

    std::vector<std::uint64_t> ids(n);
    if (point_ids.empty())
        std::iota(ids.begin(), ids.end(), std::uint64_t{0});
    else
        std::copy(point_ids.begin(), point_ids.end(), ids.begin());
    const auto order = canonical_order(ids);
    FeatureMatrix xs(n, x.cols());
    std::vector<std::uint64_t> ids_sorted(n);
    for (std::size_t k = 0; k < n; ++k) {
        const auto src = x.row(order[k]);
        std::copy(src.begin(), src.end(), xs.row(k).begin());
        ids_sorted[k] = ids[order[k]];
    }

    const bool exact = cfg.theta == 0.0;
    std::vector<double> beta;
    DenseP dense;
    SparseP sparse;
    if (exact)
        dense = dense_affinities(xs, cfg, beta);
    else
        sparse = sparse_affinities(xs, cfg, beta);

    Matrix<double> y = initial_y(ids_sorted, cfg);
    Matrix<double> grad(n, 2), update(n, 2, 0.0), gains(n, 2, 1.0);
    auto kl_now = [&] { return exact ? exact_kl(dense, y) : sparse_kl(sparse, y, cfg.theta); };

    Embedding emb;
    emb.config = cfg;
    emb.kl.push_back({0, kl_now()});
    for (std::size_t it = 0; it < cfg.iterations; ++it) {
        const double exag = it < cfg.exaggeration_iters ? cfg.exaggeration : 1.0;
        const double mom = it < cfg.momentum_switch ? cfg.momentum : cfg.final_momentum;
        if (exact)
            exact_gradient(dense, y, exag, grad);
        else
            bh_gradient(sparse, y, exag, cfg.theta, grad);

        for (std::size_t i = 0; i < n * 2; ++i) {
            double& g = gains.data()[i];
            double& u = update.data()[i];
            const double gr = grad.data()[i];
            g = (std::signbit(gr) != std::signbit(u)) ? g + 0.2 : g * 0.8;
            g = std::max(g, 0.01);
            u = mom * u - cfg.learning_rate * g * gr;
            y.data()[i] += u;
        }
        double c0 = 0.0, c1 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            c0 += y(i, 0);
            c1 += y(i, 1);
        }
        c0 /= static_cast<double>(n);
        c1 /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            y(i, 0) -= c0;
            y(i, 1) -= c1;
        }
        if ((it + 1) % cfg.kl_every == 0 || it + 1 == cfg.iterations) emb.kl.push_back({it + 1, kl_now()});
    }
    for (double v : y.data())
        if (!std::isfinite(v)) throw RuntimeError("tsne: optimization diverged (non-finite coordinates)");

    emb.y = Matrix<double>(n, 2);
    emb.beta.assign(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        emb.y(order[k], 0) = y(k, 0);
        emb.y(order[k], 1) = y(k, 1);
        emb.beta[order[k]] = beta[k];
    }
    emb.labels.assign(labels.begin(), labels.end());
    return emb;
}

struct BhConsistencyReport {
    double theta = 0.0;
    double rel_error = 0.0;           ///< ||g_bh - g_exact|| / ||g_exact|| on the full gradient
    double repulsive_rel_error = 0.0; ///< same, repulsive term only
    double z_rel_error = 0.0;         ///< normalizer Z from the tree vs exact
    /// Full-gradient error on the same layout scaled to unit spread. At the
    /// 1e-4 initial scale every kernel value is ~1 and the tree is almost
    /// exact, so this is the harder probe.
    double spread_rel_error = 0.0;
};

/// Compares the Barnes-Hut gradient at cfg.theta against the exact gradient
/// on the first iteration (initial positions, exaggeration on), both using
/// the dense joint probabilities. theta = 0 runs the exact path on both sides.
inline BhConsistencyReport tsne_bh_consistency(const FeatureMatrix& x, const TsneConfig& cfg) {
    using namespace tsne_detail;
    const std::size_t n = x.rows();
    cfg.validate(n);
    curato::detail::require(n <= 2000, "tsne_bh_consistency: n must be <= 2000");
    check_input(x);

    std::vector<double> beta;
    const DenseP P = dense_affinities(x, cfg, beta);
    std::vector<std::uint64_t> ids(n);
    std::iota(ids.begin(), ids.end(), std::uint64_t{0});
    const Matrix<double> y = initial_y(ids, cfg);
    const double exag = cfg.exaggeration_iters > 0 ? cfg.exaggeration : 1.0;

    BhConsistencyReport rep;
    rep.theta = cfg.theta;
    if (cfg.theta == 0.0) return rep;

    struct Errors {
        double full, repulsive, z;
    };
    auto compare = [&](const Matrix<double>& pos) {
        Matrix<double> g_exact(n, 2);
        const double z_exact = exact_gradient(P, pos, exag, g_exact);
        // Attractive part from the dense P (identical on both sides); the
        // tree only replaces the repulsion.
        std::vector<double> attr(2 * n, 0.0), rep_bh, rep_exact(2 * n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                if (i == j) continue;
                const double d0 = pos(i, 0) - pos(j, 0), d1 = pos(i, 1) - pos(j, 1);
                const double w = 1.0 / (1.0 + d0 * d0 + d1 * d1);
                attr[2 * i] += P.p[i * n + j] * w * d0;
                attr[2 * i + 1] += P.p[i * n + j] * w * d1;
                rep_exact[2 * i] += w * w * d0;
                rep_exact[2 * i + 1] += w * w * d1;
            }
        const double z_bh = bh_repulsion(pos, cfg.theta, rep_bh);
        double num = 0.0, den = 0.0, rnum = 0.0, rden = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < 2; ++c) {
                const double g_bh = 4.0 * (exag * attr[2 * i + c] - rep_bh[2 * i + c] / z_bh);
                const double e = g_bh - g_exact(i, c);
                num += e * e;
                den += g_exact(i, c) * g_exact(i, c);
                const double re = rep_bh[2 * i + c] / z_bh - rep_exact[2 * i + c] / z_exact;
                rnum += re * re;
                rden += (rep_exact[2 * i + c] / z_exact) * (rep_exact[2 * i + c] / z_exact);
            }
        return Errors{den > 0.0 ? std::sqrt(num / den) : std::sqrt(num),
                      rden > 0.0 ? std::sqrt(rnum / rden) : std::sqrt(rnum), std::abs(z_bh - z_exact) / z_exact};
    };

    const auto first = compare(y);
    rep.rel_error = first.full;
    rep.repulsive_rel_error = first.repulsive;
    rep.z_rel_error = first.z;
    Matrix<double> spread = y;
    for (double& v : spread.data()) v /= cfg.init_sd;
    rep.spread_rel_error = compare(spread).full;
    return rep;
}

} // namespace curato::reduce
