// Copyright (c) 2026, The curato authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>

#include <json.hpp>

#include "curato/cluster/assign.hpp"
#include "curato/core/hash.hpp"
#include "curato/reduce/io.hpp"

namespace curato::server {

using dataset::Label;

/// Unknown class id; maps to HTTP 404.
class NotFound : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Request conflicts with session state; maps to HTTP 409.
class Conflict : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Everything needed to reproduce the pipeline's clustering and manifest.
struct SessionSpec {
    std::uint64_t source_hash = 0;
    std::uint16_t class_count = 0;
    std::optional<dataset::StageParams> stage;
    cluster::DefaultRule rule;
    std::map<Label, cluster::DbscanConfig> overrides;
    std::optional<cluster::DbscanConfig> fallback;
};

/// One published state: per-class configs and the assignment they produce.
/// Never mutated after publication.
struct Snapshot {
    std::map<Label, cluster::DbscanConfig> configs; ///< classes clustered so far
    cluster::ClusterAssignment assignment;
    std::map<Label, int> cluster_counts;
    std::uint64_t version = 0;

    [[nodiscard]] bool clustered(Label c) const { return configs.count(c) != 0; }
};

struct PointView {
    std::size_t idx = 0;
    double x = 0.0, y = 0.0;
    int cluster = -1;
    std::string role;
};

struct ClassUpdate {
    Label label = 0;
    cluster::DbscanConfig config;
    int clusters = 0;
    std::size_t noise_count = 0;
};

struct CommitResult {
    std::filesystem::path path;
    dataset::FilterManifest manifest;
    cluster::ReductionSummary summary;
};

/// Single-curator session over an immutable embedding. Reads take the
/// current snapshot; mutations serialize on a writer lock, build a new
/// snapshot from the old one, and publish it with one pointer swap.
class Session {
public:
    Session(reduce::Embedding emb, SessionSpec spec, bool cluster_all = true)
        : emb_(std::make_shared<const reduce::Embedding>(std::move(emb))), spec_(std::move(spec)) {
        curato::detail::require(emb_->n() >= 1, "session: empty embedding");
        curato::detail::require(emb_->labels.size() == emb_->n(), "session: embedding has no class labels");
        for (Label l : emb_->labels) spec_.class_count = std::max<std::uint16_t>(spec_.class_count, static_cast<std::uint16_t>(l + 1));
        members_ = cluster::class_members(emb_->labels);
        auto s = std::make_shared<Snapshot>();
        s->assignment.labels = emb_->labels;
        s->assignment.cluster.assign(emb_->n(), -1);
        s->assignment.role.assign(emb_->n(), cluster::Role::noise);
        if (cluster_all) {
            // Same call the pipeline makes, so the defaults match it exactly.
            s->assignment = cluster::cluster_per_class(*emb_, spec_.overrides, spec_.fallback, spec_.rule);
            s->configs = s->assignment.params;
            for (const auto& [c, idx] : members_) s->cluster_counts[c] = count_clusters(s->assignment, idx);
        }
        current_ = std::move(s);
    }

    /// Reads `dir/session.json` and the embedding it names.
    static Session load(const std::filesystem::path& dir, bool cluster_all = true) {
        const auto path = dir / "session.json";
        std::ifstream in(path);
        if (!in) curato::detail::fail("cannot open " + path.string());
        nlohmann::json j;
        SessionSpec spec;
        std::string emb_name = "embedding.csv";
        try {
            in >> j;
            spec.source_hash = hash_from_hex(j.at("source_hash").get<std::string>());
            spec.class_count = j.at("class_count").get<std::uint16_t>();
            if (j.contains("stage") && !j["stage"].is_null()) {
                const auto& s = j["stage"];
                spec.stage = dataset::StageParams{s.at("tsne_seed").get<std::uint64_t>(), s.at("perplexity").get<double>(),
                                                  s.at("pca_dims").get<std::size_t>(), s.at("theta").get<double>()};
            }
            if (j.contains("rule")) {
                spec.rule.min_pts = j["rule"].at("min_pts").get<std::size_t>();
                spec.rule.percentile = j["rule"].at("percentile").get<double>();
            }
            if (j.contains("fallback") && !j["fallback"].is_null())
                spec.fallback = cluster::DbscanConfig{j["fallback"].at("eps").get<double>(),
                                                      j["fallback"].at("min_pts").get<std::size_t>()};
            if (j.contains("overrides"))
                for (const auto& [k, v] : j["overrides"].items())
                    spec.overrides[static_cast<Label>(std::stoul(k))] = {v.at("eps").get<double>(),
                                                                         v.at("min_pts").get<std::size_t>()};
            emb_name = j.value("embedding", emb_name);
        } catch (const nlohmann::json::exception& e) {
            curato::detail::fail("malformed session file: " + std::string(e.what()));
        } catch (const std::invalid_argument& e) {
            curato::detail::fail("malformed session file: " + std::string(e.what()));
        }
        return Session(reduce::load_embedding(dir / emb_name), std::move(spec), cluster_all);
    }

    [[nodiscard]] std::shared_ptr<const Snapshot> snapshot() const {
        std::lock_guard lk(publish_);
        return current_;
    }

    [[nodiscard]] const reduce::Embedding& embedding() const { return *emb_; }
    [[nodiscard]] const SessionSpec& spec() const { return spec_; }
    [[nodiscard]] std::vector<Label> classes() const {
        std::vector<Label> out;
        for (const auto& [c, idx] : members_) out.push_back(c);
        return out;
    }

    [[nodiscard]] const std::vector<std::size_t>& members(Label c) const {
        const auto it = members_.find(c);
        if (it == members_.end()) throw NotFound("unknown class " + std::to_string(c));
        return it->second;
    }

    /// Points of class c under the current assignment.
    [[nodiscard]] std::vector<PointView> points(Label c) const {
        const auto& idx = members(c);
        const auto snap = snapshot();
        const bool done = snap->clustered(c);
        std::vector<PointView> out;
        out.reserve(idx.size());
        for (std::size_t i : idx)
            out.push_back({i, emb_->y(i, 0), emb_->y(i, 1), snap->assignment.cluster[i],
                           done ? cluster::to_string(snap->assignment.role[i]) : "unclustered"});
        return out;
    }

    /// Re-clusters one class; other classes keep their results.
    ClassUpdate recluster(Label c, const cluster::DbscanConfig& cfg) {
        cfg.validate();
        const auto& idx = members(c);
        std::lock_guard writer(write_);
        const auto old = snapshot();
        auto next = std::make_shared<Snapshot>(*old);
        cluster::cluster_class(*emb_, c, cfg, next->assignment);
        next->configs[c] = cfg;
        next->cluster_counts[c] = count_clusters(next->assignment, idx);
        next->version = old->version + 1;
        ClassUpdate u{c, cfg, next->cluster_counts[c], noise_in(next->assignment, idx)};
        {
            std::lock_guard lk(publish_);
            current_ = std::move(next);
        }
        return u;
    }

    /// Builds the manifest for the current snapshot.
    [[nodiscard]] dataset::FilterManifest manifest() const {
        const auto snap = snapshot();
        for (const auto& [c, idx] : members_)
            if (!snap->clustered(c)) throw Conflict("class " + std::to_string(c) + " has not been clustered");
        auto ca = snap->assignment;
        ca.params = snap->configs;
        try {
            return cluster::build_manifest(ca, spec_.source_hash, spec_.class_count, spec_.stage);
        } catch (const ValidationError& e) {
            throw Conflict(e.what());
        }
    }

    /// Writes `dir/manifest.json`.
    CommitResult commit(const std::filesystem::path& dir) const {
        auto m = manifest();
        std::filesystem::create_directories(dir);
        const auto path = dir / "manifest.json";
        dataset::save_manifest(m, path);
        return {path, m, cluster::reduction_report(m)};
    }

    /// Per-class accounting of the current snapshot. Unclustered classes
    /// count as fully kept.
    [[nodiscard]] cluster::ReductionSummary summary() const {
        const auto snap = snapshot();
        cluster::ReductionSummary s;
        for (const auto& [c, idx] : members_) {
            const std::size_t removed = snap->clustered(c) ? noise_in(snap->assignment, idx) : 0;
            s.classes.push_back({c, idx.size(), removed, idx.size() - removed,
                                 cluster::percent_of(idx.size() - removed, idx.size())});
            s.total += idx.size();
            s.removed += removed;
        }
        s.kept = s.total - s.removed;
        s.kept_percent = cluster::percent_of(s.kept, s.total);
        return s;
    }

private:
    static std::size_t noise_in(const cluster::ClusterAssignment& a, const std::vector<std::size_t>& idx) {
        std::size_t n = 0;
        for (std::size_t i : idx) n += a.role[i] == cluster::Role::noise;
        return n;
    }
    static int count_clusters(const cluster::ClusterAssignment& a, const std::vector<std::size_t>& idx) {
        int m = -1;
        for (std::size_t i : idx) m = std::max(m, a.cluster[i]);
        return m + 1;
    }

    std::shared_ptr<const reduce::Embedding> emb_;
    SessionSpec spec_;
    std::map<Label, std::vector<std::size_t>> members_;
    mutable std::mutex publish_;
    std::mutex write_;
    std::shared_ptr<const Snapshot> current_;
};

} // namespace curato::server
