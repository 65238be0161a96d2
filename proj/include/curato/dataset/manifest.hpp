// Copyright (c) 2026, The curato authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>

#include <json.hpp>

#include "curato/core/hash.hpp"
#include "curato/core/rng.hpp"
#include "curato/dataset/fvec.hpp"

namespace curato::dataset {

enum class FilterMethod { network_filtered, randomly_filtered, full };

inline std::string to_string(FilterMethod m) {
    switch (m) {
    case FilterMethod::network_filtered: return "network_filtered";
    case FilterMethod::randomly_filtered: return "randomly_filtered";
    case FilterMethod::full: return "full";
    }
    return "?";
}

inline FilterMethod method_from_string(const std::string& s) {
    if (s == "network_filtered") return FilterMethod::network_filtered;
    if (s == "randomly_filtered") return FilterMethod::randomly_filtered;
    if (s == "full") return FilterMethod::full;
    curato::detail::fail("unknown filter method '" + s + "'");
}

struct ClusterParams {
    double eps = 0.0;
    std::size_t min_pts = 0;
    friend bool operator==(const ClusterParams&, const ClusterParams&) = default;
};

/// Reducer settings that produced a network-filtered manifest.
struct StageParams {
    std::uint64_t tsne_seed = 0;
    double perplexity = 0.0;
    std::size_t pca_dims = 0; ///< 0 when PCA was skipped
    double theta = 0.0;
    friend bool operator==(const StageParams&, const StageParams&) = default;
};

struct ClassCount {
    Label label = 0;
    std::size_t total = 0;
    std::size_t removed = 0;
    friend bool operator==(const ClassCount&, const ClassCount&) = default;
};

/// Audited kept/removed split of a source dataset.
struct FilterManifest {
    std::uint64_t source_hash = 0;
    std::size_t source_rows = 0;
    std::vector<std::size_t> kept;
    std::vector<std::size_t> removed;
    FilterMethod method = FilterMethod::full;
    std::map<Label, ClusterParams> class_params;
    std::optional<StageParams> stage;
    std::optional<std::uint64_t> random_seed;
    std::vector<ClassCount> class_counts;
    std::string created;

    void validate() const {
        using curato::detail::require;
        require(kept.size() + removed.size() == source_rows, "manifest: |kept| + |removed| != n");
        require(std::is_sorted(kept.begin(), kept.end()) &&
                    std::adjacent_find(kept.begin(), kept.end()) == kept.end(),
                "manifest: kept indices must be sorted and unique");
        require(std::is_sorted(removed.begin(), removed.end()) &&
                    std::adjacent_find(removed.begin(), removed.end()) == removed.end(),
                "manifest: removed indices must be sorted and unique");
        require(kept.empty() || kept.back() < source_rows, "manifest: kept index out of range");
        require(removed.empty() || removed.back() < source_rows, "manifest: removed index out of range");
        std::vector<std::size_t> both;
        std::set_intersection(kept.begin(), kept.end(), removed.begin(), removed.end(), std::back_inserter(both));
        require(both.empty(), "manifest: kept and removed overlap");
        require(method != FilterMethod::full || removed.empty(), "manifest: method=full with removed rows");
    }

    friend bool operator==(const FilterManifest&, const FilterManifest&) = default;
};

inline std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Per-class totals/removed counts from labels; empty when unlabeled.
inline std::vector<ClassCount> count_by_class(const std::optional<std::vector<Label>>& labels,
                                              std::uint16_t class_count,
                                              const std::vector<std::size_t>& removed) {
    if (!labels) return {};
    std::vector<ClassCount> out(class_count);
    for (std::uint16_t c = 0; c < class_count; ++c) out[c].label = c;
    for (Label l : *labels) ++out[l].total;
    for (std::size_t i : removed) ++out[(*labels)[i]].removed;
    return out;
}

/// Complement of `removed` in [0, n).
inline std::vector<std::size_t> complement(std::size_t n, const std::vector<std::size_t>& removed) {
    std::vector<std::size_t> kept;
    kept.reserve(n - removed.size());
    std::size_t j = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (j < removed.size() && removed[j] == i) {
            ++j;
            continue;
        }
        kept.push_back(i);
    }
    return kept;
}

inline FilterManifest full_manifest(const FeatureDataset& ds) {
    FilterManifest m;
    m.source_hash = content_hash(ds);
    m.source_rows = ds.n();
    m.kept = complement(ds.n(), {});
    m.method = FilterMethod::full;
    m.class_counts = count_by_class(ds.labels, ds.class_count, {});
    m.created = utc_timestamp();
    return m;
}

/// Matched-size random baseline: `remove_count` rows chosen uniformly without
/// replacement from a generator seeded with `seed`.
inline FilterManifest random_filter(const FeatureDataset& ds, std::size_t remove_count, std::uint64_t seed) {
    curato::detail::require(remove_count < ds.n(), "random_filter: remove_count must be < n");
    Rng rng(seed);
    FilterManifest m;
    m.source_hash = content_hash(ds);
    m.source_rows = ds.n();
    m.removed = rng.sample_without_replacement(ds.n(), remove_count);
    std::sort(m.removed.begin(), m.removed.end());
    m.kept = complement(ds.n(), m.removed);
    m.method = FilterMethod::randomly_filtered;
    m.random_seed = seed;
    m.class_counts = count_by_class(ds.labels, ds.class_count, m.removed);
    m.created = utc_timestamp();
    return m;
}

/// Rows listed in `m.kept`, ascending.
inline FeatureDataset apply_manifest(const FeatureDataset& ds, const FilterManifest& m) {
    if (content_hash(ds) != m.source_hash)
        curato::detail::fail("manifest source hash " + hash_to_hex(m.source_hash) +
                             " does not match dataset hash " + hash_to_hex(content_hash(ds)));
    curato::detail::require(m.source_rows == ds.n(), "manifest row count does not match dataset");
    for (std::size_t i : m.kept) curato::detail::require(i < ds.n(), "manifest index out of range");
    auto out = ds.subset(m.kept);
    out.provenance = ds.provenance + "|" + to_string(m.method);
    return out;
}

// JSON -----------------------------------------------------------------------

inline nlohmann::json to_json(const FilterManifest& m) {
    using nlohmann::json;
    json j;
    j["source_hash"] = hash_to_hex(m.source_hash);
    j["source_rows"] = m.source_rows;
    j["kept_indices"] = m.kept;
    j["removed_indices"] = m.removed;
    j["method"] = to_string(m.method);
    json params = json::object();
    for (const auto& [c, p] : m.class_params)
        params[std::to_string(c)] = {{"eps", p.eps}, {"min_pts", p.min_pts}};
    j["class_params"] = params;
    if (m.stage)
        j["stage"] = {{"tsne_seed", m.stage->tsne_seed},
                      {"perplexity", m.stage->perplexity},
                      {"pca_dims", m.stage->pca_dims},
                      {"theta", m.stage->theta}};
    else
        j["stage"] = nullptr;
    j["random_seed"] = m.random_seed ? json(*m.random_seed) : json(nullptr);
    json counts = json::array();
    for (const auto& c : m.class_counts)
        counts.push_back({{"class", c.label}, {"total", c.total}, {"removed", c.removed}});
    j["class_counts"] = counts;
    j["created"] = m.created;
    return j;
}

inline FilterManifest manifest_from_json(const nlohmann::json& j) {
    FilterManifest m;
    try {
        m.source_hash = hash_from_hex(j.at("source_hash").get<std::string>());
        m.source_rows = j.at("source_rows").get<std::size_t>();
        m.kept = j.at("kept_indices").get<std::vector<std::size_t>>();
        m.removed = j.at("removed_indices").get<std::vector<std::size_t>>();
        m.method = method_from_string(j.at("method").get<std::string>());
        for (const auto& [k, v] : j.at("class_params").items())
            m.class_params[static_cast<Label>(std::stoul(k))] = {v.at("eps").get<double>(),
                                                                 v.at("min_pts").get<std::size_t>()};
        if (j.contains("stage") && !j["stage"].is_null()) {
            const auto& s = j["stage"];
            m.stage = StageParams{s.at("tsne_seed").get<std::uint64_t>(), s.at("perplexity").get<double>(),
                                  s.at("pca_dims").get<std::size_t>(), s.at("theta").get<double>()};
        }
        if (j.contains("random_seed") && !j["random_seed"].is_null())
            m.random_seed = j["random_seed"].get<std::uint64_t>();
        for (const auto& c : j.at("class_counts"))
            m.class_counts.push_back(
                {c.at("class").get<Label>(), c.at("total").get<std::size_t>(), c.at("removed").get<std::size_t>()});
        m.created = j.value("created", "");
    } catch (const nlohmann::json::exception& e) {
        curato::detail::fail(std::string("malformed manifest: ") + e.what());
    } catch (const std::invalid_argument& e) {
        curato::detail::fail(std::string("malformed manifest: ") + e.what());
    }
    m.validate();
    return m;
}

inline void save_manifest(const FilterManifest& m, const std::filesystem::path& path) {
    m.validate();
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw RuntimeError("cannot open " + path.string() + " for writing");
    out << to_json(m).dump(2) << '\n';
}

inline FilterManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) curato::detail::fail("cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        curato::detail::fail(std::string("malformed manifest: ") + e.what());
    }
    return manifest_from_json(j);
}

} // namespace curato::dataset
