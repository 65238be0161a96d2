// Copyright (c) 2026, The curato authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "curato/cluster/dbscan.hpp"
#include "curato/dataset/manifest.hpp"
#include "curato/reduce/tsne.hpp"

namespace curato::cluster {

using dataset::Label;

/// Per-point clustering of a labeled embedding. Cluster ids are local to
/// each class (class c's clusters are numbered 0, 1, ... independently).
struct ClusterAssignment {
    std::vector<Label> labels;
    std::vector<int> cluster;
    std::vector<Role> role;
    std::map<Label, DbscanConfig> params; ///< configuration each class was clustered with

    [[nodiscard]] std::size_t n() const { return labels.size(); }
    [[nodiscard]] int alpha(std::size_t i) const { return role[i] == Role::noise ? 0 : 1; }
    [[nodiscard]] std::vector<std::size_t> noise_indices() const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < n(); ++i)
            if (role[i] == Role::noise) out.push_back(i);
        return out;
    }
    friend bool operator==(const ClusterAssignment&, const ClusterAssignment&) = default;
};

/// Rule used for classes without an explicit configuration.
struct DefaultRule {
    std::size_t min_pts = 10;
    double percentile = 90.0; ///< of the per-point (min_pts-1)-th neighbour distance

    void validate() const {
        curato::detail::require(min_pts >= 1, "default rule: min_pts must be >= 1");
        curato::detail::require(percentile >= 0.0 && percentile <= 100.0, "default rule: percentile must be in [0, 100]");
    }
};

/// Linear-interpolation percentile (the "linear" definition: position
/// q/100 * (m-1) in the sorted sample).
inline double percentile(std::vector<double> v, double q) {
    curato::detail::require(!v.empty(), "percentile of an empty sample");
    std::sort(v.begin(), v.end());
    const double pos = q / 100.0 * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

/// eps = percentile of each point's distance to its (min_pts-1)-th nearest
/// other point. Classes smaller than min_pts use their farthest neighbour;
/// single points and all-duplicate classes fall back to a tiny positive eps.
inline DbscanConfig default_config(const Matrix<double>& pts, const DefaultRule& rule = {}) {
    rule.validate();
    const std::size_t n = pts.rows();
    curato::detail::require(n >= 1, "default_config: no points");
    DbscanConfig cfg;
    cfg.min_pts = rule.min_pts;
    const std::size_t k = std::min(rule.min_pts > 0 ? rule.min_pts - 1 : 0, n - 1);
    if (k == 0) {
        cfg.eps = 1e-9;
        return cfg;
    }
    std::vector<double> kdist(n), d;
    for (std::size_t i = 0; i < n; ++i) {
        d.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            double s = 0.0;
            for (std::size_t c = 0; c < pts.cols(); ++c) s += (pts(i, c) - pts(j, c)) * (pts(i, c) - pts(j, c));
            d.push_back(s);
        }
        std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k - 1), d.end());
        kdist[i] = std::sqrt(d[k - 1]);
    }
    cfg.eps = percentile(std::move(kdist), rule.percentile);
    if (!(cfg.eps > 0.0)) cfg.eps = 1e-9;
    return cfg;
}

/// Indices of each class in ascending order.
inline std::map<Label, std::vector<std::size_t>> class_members(const std::vector<Label>& labels) {
    std::map<Label, std::vector<std::size_t>> out;
    for (std::size_t i = 0; i < labels.size(); ++i) out[labels[i]].push_back(i);
    return out;
}

inline Matrix<double> gather_rows(const Matrix<double>& y, const std::vector<std::size_t>& idx) {
    Matrix<double> out(idx.size(), y.cols());
    for (std::size_t r = 0; r < idx.size(); ++r)
        for (std::size_t c = 0; c < y.cols(); ++c) out(r, c) = y(idx[r], c);
    return out;
}

/// Clusters one class and writes its points' results into `ca`.
inline void cluster_class(const reduce::Embedding& emb, Label c, const DbscanConfig& cfg, ClusterAssignment& ca) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < emb.labels.size(); ++i)
        if (emb.labels[i] == c) idx.push_back(i);
    curato::detail::require(!idx.empty(), "class " + std::to_string(c) + " has no points");
    const auto r = dbscan(gather_rows(emb.y, idx), cfg);
    for (std::size_t k = 0; k < idx.size(); ++k) {
        ca.cluster[idx[k]] = r.cluster[k];
        ca.role[idx[k]] = r.role[k];
    }
    ca.params[c] = cfg;
}

/// DBSCAN per class. Classes absent from `overrides` use `fallback` when
/// given, otherwise the data-driven default rule.
inline ClusterAssignment cluster_per_class(const reduce::Embedding& emb, const std::map<Label, DbscanConfig>& overrides = {},
                                           const std::optional<DbscanConfig>& fallback = std::nullopt,
                                           const DefaultRule& rule = {}) {
    curato::detail::require(emb.n() >= 1, "cluster_per_class: empty embedding");
    curato::detail::require(emb.labels.size() == emb.n(), "cluster_per_class: embedding has no class labels");
    ClusterAssignment ca;
    ca.labels = emb.labels;
    ca.cluster.assign(emb.n(), -1);
    ca.role.assign(emb.n(), Role::noise);
    for (const auto& [c, idx] : class_members(emb.labels)) {
        DbscanConfig cfg;
        if (const auto it = overrides.find(c); it != overrides.end())
            cfg = it->second;
        else if (fallback)
            cfg = *fallback;
        else
            cfg = default_config(gather_rows(emb.y, idx), rule);
        cluster_class(emb, c, cfg, ca);
    }
    return ca;
}

/// Network-filtered manifest: every noise point is removed.
inline dataset::FilterManifest build_manifest(const ClusterAssignment& ca, std::uint64_t source_hash,
                                              std::uint16_t class_count,
                                              const std::optional<dataset::StageParams>& stage = std::nullopt) {
    curato::detail::require(ca.cluster.size() == ca.n() && ca.role.size() == ca.n(),
                            "build_manifest: assignment does not cover every index");
    dataset::FilterManifest m;
    m.source_hash = source_hash;
    m.source_rows = ca.n();
    m.removed = ca.noise_indices();
    if (m.removed.size() == ca.n()) curato::detail::fail("empty filtered dataset: every point was labeled noise");
    m.kept = dataset::complement(ca.n(), m.removed);
    m.method = dataset::FilterMethod::network_filtered;
    for (const auto& [c, p] : ca.params) m.class_params[c] = {p.eps, p.min_pts};
    m.stage = stage;
    std::uint16_t classes = class_count;
    for (Label l : ca.labels) classes = std::max<std::uint16_t>(classes, static_cast<std::uint16_t>(l + 1));
    m.class_counts = dataset::count_by_class(ca.labels, classes, m.removed);
    m.created = dataset::utc_timestamp();
    m.validate();
    return m;
}

struct ReductionRow {
    Label label = 0;
    std::size_t total = 0, removed = 0, kept = 0;
    double kept_percent = 0.0;
};

struct ReductionSummary {
    std::size_t total = 0, removed = 0, kept = 0;
    double kept_percent = 100.0;
    std::vector<ReductionRow> classes;

    /// e.g. "98.76% or 49380 images"
    [[nodiscard]] std::string headline() const {
        char buf[96];
        std::snprintf(buf, sizeof buf, "%.2f%% or %zu images", kept_percent, kept);
        return buf;
    }

    [[nodiscard]] std::string markdown() const {
        std::string s = "| class | total | removed | kept | kept % |\n|---:|---:|---:|---:|---:|\n";
        char buf[160];
        for (const auto& r : classes) {
            std::snprintf(buf, sizeof buf, "| %u | %zu | %zu | %zu | %.2f%% |\n", static_cast<unsigned>(r.label), r.total,
                          r.removed, r.kept, r.kept_percent);
            s += buf;
        }
        std::snprintf(buf, sizeof buf, "| all | %zu | %zu | %zu | %.2f%% |\n", total, removed, kept, kept_percent);
        return s + buf;
    }
};

inline double percent_of(std::size_t part, std::size_t whole) {
    return whole == 0 ? 100.0 : 100.0 * static_cast<double>(part) / static_cast<double>(whole);
}

inline ReductionSummary reduction_report(const dataset::FilterManifest& m) {
    m.validate();
    ReductionSummary s;
    s.total = m.source_rows;
    s.removed = m.removed.size();
    s.kept = m.kept.size();
    s.kept_percent = percent_of(s.kept, s.total);
    for (const auto& c : m.class_counts) {
        if (c.total == 0) continue;
        s.classes.push_back({c.label, c.total, c.removed, c.total - c.removed, percent_of(c.total - c.removed, c.total)});
    }
    return s;
}

/// idx,class,cluster,role
inline void write_assignment_csv(const ClusterAssignment& ca, std::ostream& out) {
    out << "idx,class,cluster,role\n";
    for (std::size_t i = 0; i < ca.n(); ++i)
        out << i << ',' << ca.labels[i] << ',' << ca.cluster[i] << ',' << to_string(ca.role[i]) << '\n';
}

inline void save_assignment_csv(const ClusterAssignment& ca, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw RuntimeError("cannot write " + path.string());
    write_assignment_csv(ca, out);
}

} // namespace curato::cluster
