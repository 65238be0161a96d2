// Copyright (c) 2026, The curato authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>

#include <json.hpp>

#include "curato/cluster/assign.hpp"
#include "curato/dataset/csv.hpp"
#include "curato/dataset/fvec.hpp"
#include "curato/dataset/manifest.hpp"
#include "curato/dataset/synthetic.hpp"
#include "curato/nnet/checkpoint.hpp"
#include "curato/nnet/train.hpp"
#include "curato/pipeline/config.hpp"
#include "curato/reduce/io.hpp"
#include "curato/reduce/pca.hpp"

namespace curato::pipeline {

using dataset::FeatureDataset;
using dataset::FilterManifest;

/// Loaded rows plus known outliers (synthetic sources only).
struct SourceData {
    FeatureDataset dataset;
    std::optional<std::vector<std::size_t>> outliers;
};

inline FeatureDataset load_dataset_file(const std::filesystem::path& path, bool csv_header,
                                        std::optional<std::size_t> label_column) {
    const auto ext = path.extension().string();
    if (ext == ".csv" || ext == ".CSV") {
        auto ds = dataset::load_csv(path, csv_header, label_column);
        ds.validate();
        return ds;
    }
    return dataset::load_fvec(path);
}

inline SourceData load_source(const SourceConfig& s) {
    SourceData out;
    if (!s.path.empty()) {
        out.dataset = load_dataset_file(s.path, s.csv_header, s.label_column.value_or(dataset::kLastColumn));
        return out;
    }
    auto syn = dataset::make_synthetic(s.synthetic);
    out.dataset = std::move(syn.dataset);
    out.outliers = std::move(syn.outliers);
    return out;
}

/// Held-out split in source row indices, both sides ascending.
struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Deterministic split: a seeded permutation, the first round(n f) rows of
/// which form the test side.
inline Split split_indices(std::size_t n, double test_fraction, std::uint64_t seed) {
    curato::detail::require(test_fraction > 0.0 && test_fraction < 1.0, "split: test_fraction must be in (0, 1)");
    const auto test_n = static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction));
    curato::detail::require(test_n >= 1 && test_n < n, "split: " + std::to_string(n) +
                                                         " rows cannot give non-empty train and test sides");
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng(seed).stream(0x5b1d).shuffle(std::span<std::size_t>(perm));
    Split s;
    s.test.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(test_n));
    s.train.assign(perm.begin() + static_cast<std::ptrdiff_t>(test_n), perm.end());
    std::sort(s.test.begin(), s.test.end());
    std::sort(s.train.begin(), s.train.end());
    return s;
}

// Stages -------------------------------------------------------------------

struct Extractor {
    nnet::Model model;
    nnet::ParameterSet params;
};

inline Extractor train_extractor(const PipelineConfig& cfg, const FeatureDataset& train) {
    curato::detail::require(train.has_labels(), "extractor training needs labels");
    Extractor e{cfg.extractor_arch.build(train.d(), train.class_count), {}};
    curato::detail::require(e.model.has_penultimate(),
                            "extractor architecture needs at least one hidden layer to provide features");
    if (!cfg.extractor_checkpoint.empty()) {
        e.params = nnet::load_checkpoint(cfg.extractor_checkpoint, e.model);
        return e;
    }
    auto tc = cfg.extractor_train;
    tc.seed = cfg.seed;
    e.params = nnet::train(e.model, train, tc).params;
    return e;
}

inline dataset::StageParams stage_params(const PipelineConfig& cfg, std::size_t feature_width) {
    return {cfg.seed, cfg.tsne.perplexity, (cfg.pca_dims > 0 && feature_width > cfg.pca_dims) ? cfg.pca_dims : 0,
            cfg.tsne.theta};
}

/// PCA (when wider than pca_dims) followed by t-SNE; point ids are row indices.
inline reduce::Embedding reduce_features(const Matrix<double>& features, const std::vector<dataset::Label>& labels,
                                         const PipelineConfig& cfg) {
    const auto x = reduce::pca_reduce_if_wide(features, cfg.pca_dims);
    auto tc = cfg.tsne;
    tc.seed = cfg.seed;
    return reduce::tsne(x, tc, labels);
}

inline cluster::ClusterAssignment cluster_embedding(const reduce::Embedding& emb, const PipelineConfig& cfg) {
    return cluster::cluster_per_class(emb, cfg.class_overrides, cfg.fallback, cfg.rule);
}

/// Ground-truth scoring of the network filter against injected outliers.
struct OutlierStats {
    std::size_t outliers = 0, flagged_outliers = 0;
    std::size_t clean = 0, flagged_clean = 0;

    [[nodiscard]] double recall() const {
        return outliers ? static_cast<double>(flagged_outliers) / static_cast<double>(outliers) : 1.0;
    }
    [[nodiscard]] double clean_removal() const {
        return clean ? static_cast<double>(flagged_clean) / static_cast<double>(clean) : 0.0;
    }
};

/// `removed` indexes the train side; `outliers` indexes the source.
inline OutlierStats score_outliers(const Split& split, const std::vector<std::size_t>& outliers,
                                   const std::vector<std::size_t>& removed) {
    OutlierStats s;
    std::vector<char> removed_flag(split.train.size(), 0);
    for (std::size_t i : removed) removed_flag.at(i) = 1;
    for (std::size_t k = 0; k < split.train.size(); ++k) {
        const bool out = std::binary_search(outliers.begin(), outliers.end(), split.train[k]);
        if (out) {
            ++s.outliers;
            s.flagged_outliers += removed_flag[k];
        } else {
            ++s.clean;
            s.flagged_clean += removed_flag[k];
        }
    }
    return s;
}

// Report -------------------------------------------------------------------

struct ArmResult {
    Arm arm = Arm::full;
    std::uint64_t seed = 0;
    std::size_t train_rows = 0;
    std::size_t removed = 0;
    std::size_t epochs = 0;
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
    double test_loss = 0.0;
    double wall_seconds = 0.0;

    [[nodiscard]] double generalization_gap() const { return train_accuracy - test_accuracy; }
};

struct ExperimentReport {
    std::vector<ArmResult> runs;
    std::size_t source_rows = 0;
    std::size_t test_rows = 0;
    std::optional<cluster::ReductionSummary> reduction;
    std::optional<OutlierStats> outliers;
    std::optional<FilterManifest> network_manifest;
    std::string config_snapshot; ///< TOML

    [[nodiscard]] std::vector<const ArmResult*> of(Arm a) const {
        std::vector<const ArmResult*> out;
        for (const auto& r : runs)
            if (r.arm == a) out.push_back(&r);
        return out;
    }
    [[nodiscard]] bool has(Arm a) const { return !of(a).empty(); }

    [[nodiscard]] double mean_test_accuracy(Arm a) const {
        const auto rs = of(a);
        curato::detail::require(!rs.empty(), "report has no runs for arm " + to_string(a));
        double s = 0.0;
        for (const auto* r : rs) s += r->test_accuracy;
        return s / static_cast<double>(rs.size());
    }
};

// Orchestration ------------------------------------------------------------

/// Intermediate products of one run, kept for writing artifacts.
struct PipelineState {
    SourceData source;
    Split split;
    FeatureDataset train, test;
    std::optional<Extractor> extractor;
    std::optional<Matrix<double>> features;
    std::optional<reduce::Embedding> embedding;
    std::optional<cluster::ClusterAssignment> assignment;
    std::optional<FilterManifest> manifest;
};

inline ArmResult retrain_arm(const PipelineConfig& cfg, Arm arm, std::uint64_t seed, const FeatureDataset& train,
                             const FeatureDataset& test, std::size_t removed) {
    const auto start = std::chrono::steady_clock::now();
    const auto model = cfg.retrain_architecture().build(train.d(), train.class_count);
    auto tc = cfg.retrain_train;
    tc.seed = seed;
    const auto trained = nnet::train(model, train, tc);
    ArmResult r;
    r.arm = arm;
    r.seed = seed;
    r.train_rows = train.n();
    r.removed = removed;
    r.epochs = tc.epochs;
    r.train_accuracy = nnet::evaluate(model, trained.params, train).accuracy;
    const auto ev = nnet::evaluate(model, trained.params, test);
    r.test_accuracy = ev.accuracy;
    r.test_loss = ev.loss;
    r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

/// Loads, splits, and (when any filtering arm is requested) runs the
/// extractor, reduction, clustering and manifest stages.
inline PipelineState prepare(const PipelineConfig& cfg) {
    cfg.validate();
    PipelineState st;
    st.source = load_source(cfg.source);
    const auto& ds = st.source.dataset;
    curato::detail::require(ds.has_labels(), "pipeline: the source dataset must be labeled");
    st.split = split_indices(ds.n(), cfg.test_fraction, cfg.seed);
    st.train = ds.subset(st.split.train);
    st.test = ds.subset(st.split.test);
    if (!cfg.needs_filter()) return st;

    st.extractor = train_extractor(cfg, st.train);
    st.features = nnet::extract_features(st.extractor->model, st.extractor->params, st.train);
    st.embedding = reduce_features(*st.features, *st.train.labels, cfg);
    st.assignment = cluster_embedding(*st.embedding, cfg);
    st.manifest = cluster::build_manifest(*st.assignment, dataset::content_hash(st.train), st.train.class_count,
                                          stage_params(cfg, st.features->cols()));
    return st;
}

inline void check_test_isolation(const Split& split, const std::vector<std::size_t>& train_rows_in_source) {
    for (std::size_t i : train_rows_in_source)
        if (std::binary_search(split.test.begin(), split.test.end(), i))
            throw RuntimeError("test-set isolation violated: source row " + std::to_string(i) + " is in a training arm");
}

/// Runs every (arm, seed) pair on a prepared state. The random arm for seed s
/// removes exactly as many rows as the network filter, drawn with seed s.
inline ExperimentReport run_arms(const PipelineConfig& cfg, const PipelineState& st) {
    ExperimentReport rep;
    rep.source_rows = st.source.dataset.n();
    rep.test_rows = st.test.n();
    rep.config_snapshot = to_toml_string(cfg);
    if (st.manifest) {
        rep.reduction = cluster::reduction_report(*st.manifest);
        rep.network_manifest = st.manifest;
        if (st.source.outliers) rep.outliers = score_outliers(st.split, *st.source.outliers, st.manifest->removed);
    }
    const auto to_source = [&](const std::vector<std::size_t>& kept) {
        std::vector<std::size_t> out;
        out.reserve(kept.size());
        for (std::size_t k : kept) out.push_back(st.split.train[k]);
        return out;
    };
    for (std::uint64_t seed : cfg.seeds) {
        for (Arm arm : cfg.arms) {
            FilterManifest m;
            switch (arm) {
            case Arm::full: m = dataset::full_manifest(st.train); break;
            case Arm::network: m = *st.manifest; break;
            case Arm::random: m = dataset::random_filter(st.train, st.manifest->removed.size(), seed); break;
            }
            m.validate();
            if (arm == Arm::random && m.removed.size() != st.manifest->removed.size())
                throw RuntimeError("matched control violated: random arm removed a different count");
            check_test_isolation(st.split, to_source(m.kept));
            const auto arm_train = dataset::apply_manifest(st.train, m);
            rep.runs.push_back(retrain_arm(cfg, arm, seed, arm_train, st.test, m.removed.size()));
        }
    }
    return rep;
}

inline ExperimentReport run_pipeline(const PipelineConfig& cfg) { return run_arms(cfg, prepare(cfg)); }

// Artifacts ----------------------------------------------------------------

/// What the curation server needs to rebuild the pipeline manifest.
inline nlohmann::json session_json(const PipelineConfig& cfg, const PipelineState& st) {
    curato::detail::require(st.manifest.has_value(), "session: no filtering stage was run");
    nlohmann::json overrides = nlohmann::json::object();
    for (const auto& [c, d] : cfg.class_overrides)
        overrides[std::to_string(c)] = {{"eps", d.eps}, {"min_pts", d.min_pts}};
    const auto sp = *st.manifest->stage;
    return {{"source_hash", hash_to_hex(st.manifest->source_hash)},
            {"class_count", st.train.class_count},
            {"embedding", "embedding.csv"},
            {"stage", {{"tsne_seed", sp.tsne_seed}, {"perplexity", sp.perplexity}, {"pca_dims", sp.pca_dims}, {"theta", sp.theta}}},
            {"rule", {{"min_pts", cfg.rule.min_pts}, {"percentile", cfg.rule.percentile}}},
            {"fallback", cfg.fallback ? nlohmann::json{{"eps", cfg.fallback->eps}, {"min_pts", cfg.fallback->min_pts}}
                                      : nlohmann::json(nullptr)},
            {"overrides", overrides}};
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::trunc);
    if (!out) throw RuntimeError("cannot write " + p.string());
    out << text;
    if (!out) throw RuntimeError("write failed: " + p.string());
}

/// Stage artifacts under `dir`: the train split, extractor checkpoint,
/// features, embedding, assignment, manifest and server session.
inline void write_stage_artifacts(const PipelineConfig& cfg, const PipelineState& st, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_text(dir / "config.toml", to_toml_string(cfg));
    dataset::save_fvec(st.train, dir / "train.fvec");
    dataset::save_fvec(st.test, dir / "test.fvec");
    if (!st.manifest) return;
    if (cfg.extractor_checkpoint.empty()) nnet::save_checkpoint(st.extractor->params, dir / "extractor.ckpt");
    reduce::save_embedding(*st.embedding, dir / "embedding.csv");
    cluster::save_assignment_csv(*st.assignment, dir / "assignment.csv");
    dataset::save_manifest(*st.manifest, dir / "manifest.json");
    write_text(dir / "session.json", session_json(cfg, st).dump(2) + "\n");
}

} // namespace curato::pipeline
