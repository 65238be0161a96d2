// Copyright (c) 2026, The curato authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <string>
#include <unordered_map>
#include <vector>

#include "curato/core/error.hpp"
#include "curato/core/matrix.hpp"

namespace curato::cluster {

struct DbscanConfig {
    double eps = 0.0;
    std::size_t min_pts = 10; ///< neighbourhood size threshold, the point itself included

    void validate() const {
        curato::detail::require(std::isfinite(eps) && eps > 0.0, "dbscan: eps must be finite and > 0");
        curato::detail::require(min_pts >= 1, "dbscan: min_pts must be >= 1");
    }
    friend bool operator==(const DbscanConfig&, const DbscanConfig&) = default;
};

enum class Role : std::uint8_t { core, border, noise };

inline std::string to_string(Role r) {
    switch (r) {
    case Role::core: return "core";
    case Role::border: return "border";
    case Role::noise: return "noise";
    }
    return "?";
}

/// Labels of one DBSCAN run; cluster -1 is noise.
struct DbscanResult {
    std::vector<int> cluster;
    std::vector<Role> role;
    int cluster_count = 0;

    [[nodiscard]] std::size_t noise_count() const {
        return static_cast<std::size_t>(std::count(role.begin(), role.end(), Role::noise));
    }
    friend bool operator==(const DbscanResult&, const DbscanResult&) = default;
};

namespace dbscan_detail {

inline constexpr std::size_t brute_force_limit = 1024;

/// Fixed-radius neighbour queries. Brute force for small inputs; otherwise
/// a uniform grid with cell side eps over 2-D points.
class NeighborIndex {
public:
    NeighborIndex(const Matrix<double>& pts, double eps) : pts_(pts), eps_(eps), eps2_(eps * eps) {
        if (pts.rows() <= brute_force_limit || pts.cols() != 2) return;
        // Cell coordinates must stay well inside int64.
        for (double v : pts.data())
            if (std::abs(v / eps) > 1e15) return;
        use_grid_ = true;
        for (std::size_t i = 0; i < pts.rows(); ++i) grid_[key(cell(pts(i, 0)), cell(pts(i, 1)))].push_back(i);
    }

    [[nodiscard]] bool uses_grid() const { return use_grid_; }

    /// Indices j (ascending, i included) with squared distance <= eps^2.
    void query(std::size_t i, std::vector<std::size_t>& out) const {
        out.clear();
        if (!use_grid_) {
            for (std::size_t j = 0; j < pts_.rows(); ++j)
                if (within(i, j)) out.push_back(j);
            return;
        }
        const std::int64_t cx = cell(pts_(i, 0)), cy = cell(pts_(i, 1));
        for (std::int64_t dx = -1; dx <= 1; ++dx)
            for (std::int64_t dy = -1; dy <= 1; ++dy) {
                const auto it = grid_.find(key(cx + dx, cy + dy));
                if (it == grid_.end()) continue;
                for (std::size_t j : it->second)
                    if (within(i, j)) out.push_back(j);
            }
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
    }

private:
    [[nodiscard]] bool within(std::size_t i, std::size_t j) const {
        double s = 0.0;
        for (std::size_t k = 0; k < pts_.cols(); ++k) {
            const double d = pts_(i, k) - pts_(j, k);
            s += d * d;
        }
        return s <= eps2_;
    }
    [[nodiscard]] std::int64_t cell(double v) const { return static_cast<std::int64_t>(std::floor(v / eps_)); }
    static std::uint64_t key(std::int64_t x, std::int64_t y) {
        // Hash of the cell pair. A collision only merges two buckets; `within`
        // filters exactly and `query` drops repeats.
        return static_cast<std::uint64_t>(x) * 0x9E3779B97F4A7C15ULL ^ static_cast<std::uint64_t>(y);
    }

    const Matrix<double>& pts_;
    double eps_, eps2_;
    bool use_grid_ = false;
    std::unordered_map<std::uint64_t, std::vector<std::size_t>> grid_;
};

} // namespace dbscan_detail

/// DBSCAN with deterministic order: points are visited by ascending index,
/// each new cluster is expanded breadth-first with neighbours in ascending
/// index, and a border point keeps the first cluster that reaches it.
inline DbscanResult dbscan(const Matrix<double>& pts, const DbscanConfig& cfg) {
    cfg.validate();
    const std::size_t n = pts.rows();
    curato::detail::require(n >= 1, "dbscan: no points");
    for (double v : pts.data()) curato::detail::require(std::isfinite(v), "dbscan: non-finite coordinate");

    const dbscan_detail::NeighborIndex index(pts, cfg.eps);
    std::vector<std::size_t> nb;
    std::vector<char> core(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        index.query(i, nb);
        core[i] = nb.size() >= cfg.min_pts;
    }

    DbscanResult r;
    r.cluster.assign(n, -1);
    r.role.assign(n, Role::noise);
    std::deque<std::size_t> queue;
    for (std::size_t i = 0; i < n; ++i) {
        if (!core[i] || r.cluster[i] != -1) continue;
        const int id = r.cluster_count++;
        r.cluster[i] = id;
        queue.push_back(i);
        while (!queue.empty()) {
            const std::size_t p = queue.front();
            queue.pop_front();
            index.query(p, nb);
            for (std::size_t q : nb) {
                if (r.cluster[q] != -1) continue;
                r.cluster[q] = id;
                if (core[q]) queue.push_back(q);
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        r.role[i] = core[i] ? Role::core : (r.cluster[i] >= 0 ? Role::border : Role::noise);
    return r;
}

} // namespace curato::cluster
