// Copyright (c) 2026, The curato authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "curato/cluster/assign.hpp"
#include "curato/core/toml.hpp"
#include "curato/dataset/synthetic.hpp"
#include "curato/nnet/train.hpp"
#include "curato/pipeline/arch.hpp"
#include "curato/reduce/tsne.hpp"

namespace curato::pipeline {

enum class Arm { full, random, network };

inline std::string to_string(Arm a) {
    switch (a) {
    case Arm::full: return "full";
    case Arm::random: return "random";
    case Arm::network: return "network";
    }
    return "?";
}

inline Arm arm_from_string(const std::string& s) {
    if (s == "full") return Arm::full;
    if (s == "random") return Arm::random;
    if (s == "network") return Arm::network;
    curato::detail::fail("unknown arm '" + s + "' (full | random | network)");
}

/// Where the rows come from: a file (FVEC or CSV) or a synthetic spec.
struct SourceConfig {
    std::string path;
    bool csv_header = true;
    std::optional<std::size_t> label_column; ///< CSV only; default is the last column
    dataset::SyntheticSpec synthetic;
};

struct SweepSettings {
    std::vector<std::size_t> batch_sizes{8, 16, 32, 64, 128, 256, 512};
    std::vector<double> learning_rates{0.005, 0.02, 0.05};
    std::size_t epochs = 30;
    std::vector<std::uint64_t> seeds{0, 1, 2};
};

struct PipelineConfig {
    SourceConfig source;
    std::uint64_t seed = 0; ///< drives the split, extractor training and t-SNE
    double test_fraction = 0.2;

    ArchSpec extractor_arch = ArchSpec::parse("dense:64,relu,dense:32,relu");
    nnet::TrainConfig extractor_train = default_train();
    std::string extractor_checkpoint; ///< pretrained parameters; skips extractor training

    std::size_t pca_dims = 50; ///< 0 disables PCA
    reduce::TsneConfig tsne;

    cluster::DefaultRule rule;
    std::map<dataset::Label, cluster::DbscanConfig> class_overrides;
    std::optional<cluster::DbscanConfig> fallback;

    std::optional<ArchSpec> retrain_arch; ///< default: extractor with halved widths
    nnet::TrainConfig retrain_train = default_train();

    std::vector<Arm> arms{Arm::full, Arm::random, Arm::network};
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
    std::string out_dir;

    SweepSettings sweep;

    static nnet::TrainConfig default_train() {
        nnet::TrainConfig t;
        t.learning_rate = 0.05;
        t.momentum = 0.9;
        t.epochs = 20;
        t.batch_size = 32;
        return t;
    }

    [[nodiscard]] ArchSpec retrain_architecture() const { return retrain_arch ? *retrain_arch : extractor_arch.halved(); }

    [[nodiscard]] bool needs_filter() const {
        return std::find(arms.begin(), arms.end(), Arm::network) != arms.end() ||
               std::find(arms.begin(), arms.end(), Arm::random) != arms.end();
    }

    void validate() const {
        using curato::detail::require;
        require(!arms.empty(), "pipeline: at least one arm is required");
        for (std::size_t i = 0; i < arms.size(); ++i)
            for (std::size_t j = 0; j < i; ++j) require(arms[i] != arms[j], "pipeline: duplicate arm " + to_string(arms[i]));
        require(!seeds.empty(), "pipeline: seeds list is empty");
        require(test_fraction > 0.0 && test_fraction < 1.0, "pipeline: test_fraction must be in (0, 1)");
        if (source.path.empty()) source.synthetic.validate();
        extractor_train.validate();
        retrain_train.validate();
        rule.validate();
        for (const auto& [c, d] : class_overrides) d.validate();
        if (fallback) fallback->validate();
        require(!sweep.batch_sizes.empty() && !sweep.learning_rates.empty() && !sweep.seeds.empty(),
                "sweep: batch_sizes, learning_rates and seeds must be non-empty");
        for (std::size_t b : sweep.batch_sizes) require(b >= 1, "sweep: batch sizes must be >= 1");
        for (double lr : sweep.learning_rates) require(lr > 0.0, "sweep: learning rates must be > 0");
    }
};

namespace config_detail {

inline void read_train(const toml::table& t, const std::string& section, nnet::TrainConfig& tc) {
    cfg::only_keys(t, section, {"arch", "checkpoint", "learning_rate", "momentum", "weight_decay", "epochs", "batch_size"});
    cfg::read(t, "learning_rate", tc.learning_rate);
    cfg::read(t, "momentum", tc.momentum);
    cfg::read(t, "weight_decay", tc.weight_decay);
    cfg::read(t, "epochs", tc.epochs);
    cfg::read(t, "batch_size", tc.batch_size);
}

inline ArchSpec read_arch(const toml::table& t) {
    std::string s;
    cfg::read(t, "arch", s);
    auto a = ArchSpec::parse(s);
    cfg::read(t, "input_shape", a.input_shape);
    return a;
}

inline toml::array int_array(const std::vector<std::uint64_t>& v) {
    toml::array a;
    for (auto x : v) a.push_back(static_cast<std::int64_t>(x));
    return a;
}

} // namespace config_detail

/// Reads the pipeline keys of a config document; absent keys keep defaults.
/// The [commsim] table is accepted and ignored here.
inline PipelineConfig pipeline_config_from_toml(const toml::table& root) {
    using namespace config_detail;
    PipelineConfig c;
    cfg::only_keys(root, "root",
                   {"seed", "seeds", "arms", "out", "test_fraction", "source", "extractor", "reduce", "cluster", "retrain",
                    "sweep", "commsim", "server"});
    cfg::read(root, "seed", c.seed);
    cfg::read(root, "seeds", c.seeds);
    cfg::read(root, "out", c.out_dir);
    cfg::read(root, "test_fraction", c.test_fraction);
    if (root.contains("arms")) {
        std::vector<std::string> names;
        cfg::read(root, "arms", names);
        c.arms.clear();
        for (const auto& n : names) c.arms.push_back(arm_from_string(n));
    }
    if (const auto* s = cfg::subtable(root, "source")) {
        cfg::only_keys(*s, "source", {"path", "csv_header", "label_column", "synthetic"});
        cfg::read(*s, "path", c.source.path);
        cfg::read(*s, "csv_header", c.source.csv_header);
        if (s->contains("label_column")) {
            std::int64_t col = -1;
            cfg::read(*s, "label_column", col);
            if (col >= 0) c.source.label_column = static_cast<std::size_t>(col);
        }
        if (const auto* y = cfg::subtable(*s, "synthetic")) {
            auto& sp = c.source.synthetic;
            cfg::only_keys(*y, "source.synthetic",
                           {"classes", "points_per_class", "dim", "center_spread", "scale", "contamination", "box_margin",
                            "seed"});
            cfg::read(*y, "classes", sp.class_count);
            cfg::read(*y, "points_per_class", sp.points_per_class);
            cfg::read(*y, "dim", sp.dim);
            cfg::read(*y, "center_spread", sp.center_spread);
            cfg::read(*y, "scale", sp.scale);
            cfg::read(*y, "contamination", sp.contamination);
            cfg::read(*y, "box_margin", sp.box_margin);
            cfg::read(*y, "seed", sp.seed);
        }
    }
    if (const auto* e = cfg::subtable(root, "extractor")) {
        toml::table rest = *e;
        rest.erase("input_shape");
        read_train(rest, "extractor", c.extractor_train);
        if (e->contains("arch") || e->contains("input_shape")) {
            auto a = e->contains("arch") ? read_arch(*e) : c.extractor_arch;
            cfg::read(*e, "input_shape", a.input_shape);
            c.extractor_arch = a;
        }
        cfg::read(*e, "checkpoint", c.extractor_checkpoint);
    }
    if (const auto* r = cfg::subtable(root, "reduce")) {
        auto& t = c.tsne;
        cfg::only_keys(*r, "reduce",
                       {"pca_dims", "perplexity", "iterations", "exaggeration", "exaggeration_iters", "learning_rate",
                        "momentum", "final_momentum", "momentum_switch", "theta"});
        cfg::read(*r, "pca_dims", c.pca_dims);
        cfg::read(*r, "perplexity", t.perplexity);
        cfg::read(*r, "iterations", t.iterations);
        cfg::read(*r, "exaggeration", t.exaggeration);
        cfg::read(*r, "exaggeration_iters", t.exaggeration_iters);
        cfg::read(*r, "learning_rate", t.learning_rate);
        cfg::read(*r, "momentum", t.momentum);
        cfg::read(*r, "final_momentum", t.final_momentum);
        cfg::read(*r, "momentum_switch", t.momentum_switch);
        cfg::read(*r, "theta", t.theta);
    }
    if (const auto* k = cfg::subtable(root, "cluster")) {
        cfg::only_keys(*k, "cluster", {"min_pts", "percentile", "eps", "class"});
        cfg::read(*k, "min_pts", c.rule.min_pts);
        cfg::read(*k, "percentile", c.rule.percentile);
        if (k->contains("eps")) {
            cluster::DbscanConfig fb;
            fb.min_pts = c.rule.min_pts;
            cfg::read(*k, "eps", fb.eps);
            c.fallback = fb;
        }
        if (const auto* node = k->get("class")) {
            const auto* arr = node->as_array();
            curato::detail::require(arr != nullptr, "config: [[cluster.class]] must be an array of tables");
            for (const auto& el : *arr) {
                const auto* t = el.as_table();
                curato::detail::require(t != nullptr, "config: [[cluster.class]] entries must be tables");
                cfg::only_keys(*t, "cluster.class", {"label", "eps", "min_pts"});
                curato::detail::require(t->contains("label") && t->contains("eps"),
                                        "config: [[cluster.class]] needs label and eps");
                std::size_t label = 0;
                cluster::DbscanConfig d;
                d.min_pts = c.rule.min_pts;
                cfg::read(*t, "label", label);
                cfg::read(*t, "eps", d.eps);
                cfg::read(*t, "min_pts", d.min_pts);
                curato::detail::require(label <= 0xFFFF, "config: class label out of range");
                c.class_overrides[static_cast<dataset::Label>(label)] = d;
            }
        }
    }
    if (const auto* r = cfg::subtable(root, "retrain")) {
        toml::table rest = *r;
        rest.erase("input_shape");
        read_train(rest, "retrain", c.retrain_train);
        if (r->contains("arch")) {
            std::string s;
            cfg::read(*r, "arch", s);
            if (!s.empty()) {
                c.retrain_arch = read_arch(*r);
                if (!r->contains("input_shape")) c.retrain_arch->input_shape = c.extractor_arch.input_shape;
            }
        }
    }
    if (const auto* w = cfg::subtable(root, "sweep")) {
        cfg::only_keys(*w, "sweep", {"batch_sizes", "learning_rates", "epochs", "seeds"});
        cfg::read(*w, "batch_sizes", c.sweep.batch_sizes);
        cfg::read(*w, "learning_rates", c.sweep.learning_rates);
        cfg::read(*w, "epochs", c.sweep.epochs);
        cfg::read(*w, "seeds", c.sweep.seeds);
    }
    c.validate();
    return c;
}

inline PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
    return pipeline_config_from_toml(cfg::load_toml(path));
}

/// Snapshot of the effective configuration as a TOML document.
inline toml::table to_toml(const PipelineConfig& c) {
    using config_detail::int_array;
    toml::table root;
    root.insert("seed", static_cast<std::int64_t>(c.seed));
    root.insert("seeds", int_array(c.seeds));
    toml::array arms;
    for (Arm a : c.arms) arms.push_back(to_string(a));
    root.insert("arms", arms);
    if (!c.out_dir.empty()) root.insert("out", c.out_dir);
    root.insert("test_fraction", c.test_fraction);

    toml::table src;
    if (!c.source.path.empty()) {
        src.insert("path", c.source.path);
        src.insert("csv_header", c.source.csv_header);
        if (c.source.label_column) src.insert("label_column", static_cast<std::int64_t>(*c.source.label_column));
    } else {
        const auto& sp = c.source.synthetic;
        toml::table y;
        y.insert("classes", static_cast<std::int64_t>(sp.class_count));
        y.insert("points_per_class", static_cast<std::int64_t>(sp.points_per_class));
        y.insert("dim", static_cast<std::int64_t>(sp.dim));
        y.insert("center_spread", sp.center_spread);
        y.insert("scale", sp.scale);
        y.insert("contamination", sp.contamination);
        y.insert("box_margin", sp.box_margin);
        y.insert("seed", static_cast<std::int64_t>(sp.seed));
        src.insert("synthetic", y);
    }
    root.insert("source", src);

    const auto train_table = [](const ArchSpec& a, const nnet::TrainConfig& t) {
        toml::table x;
        x.insert("arch", a.str());
        if (!a.input_shape.empty()) {
            toml::array shape;
            for (auto s : a.input_shape) shape.push_back(static_cast<std::int64_t>(s));
            x.insert("input_shape", shape);
        }
        x.insert("learning_rate", t.learning_rate);
        x.insert("momentum", t.momentum);
        x.insert("weight_decay", t.weight_decay);
        x.insert("epochs", static_cast<std::int64_t>(t.epochs));
        x.insert("batch_size", static_cast<std::int64_t>(t.batch_size));
        return x;
    };
    auto ex = train_table(c.extractor_arch, c.extractor_train);
    if (!c.extractor_checkpoint.empty()) ex.insert("checkpoint", c.extractor_checkpoint);
    root.insert("extractor", ex);

    toml::table red;
    red.insert("pca_dims", static_cast<std::int64_t>(c.pca_dims));
    red.insert("perplexity", c.tsne.perplexity);
    red.insert("iterations", static_cast<std::int64_t>(c.tsne.iterations));
    red.insert("exaggeration", c.tsne.exaggeration);
    red.insert("exaggeration_iters", static_cast<std::int64_t>(c.tsne.exaggeration_iters));
    red.insert("learning_rate", c.tsne.learning_rate);
    red.insert("momentum", c.tsne.momentum);
    red.insert("final_momentum", c.tsne.final_momentum);
    red.insert("momentum_switch", static_cast<std::int64_t>(c.tsne.momentum_switch));
    red.insert("theta", c.tsne.theta);
    root.insert("reduce", red);

    toml::table cl;
    cl.insert("min_pts", static_cast<std::int64_t>(c.rule.min_pts));
    cl.insert("percentile", c.rule.percentile);
    if (c.fallback) cl.insert("eps", c.fallback->eps);
    if (!c.class_overrides.empty()) {
        toml::array classes;
        for (const auto& [label, d] : c.class_overrides) {
            toml::table e;
            e.insert("label", static_cast<std::int64_t>(label));
            e.insert("eps", d.eps);
            e.insert("min_pts", static_cast<std::int64_t>(d.min_pts));
            classes.push_back(e);
        }
        cl.insert("class", classes);
    }
    root.insert("cluster", cl);
    root.insert("retrain", train_table(c.retrain_architecture(), c.retrain_train));

    toml::table sw;
    toml::array bs, lrs;
    for (auto b : c.sweep.batch_sizes) bs.push_back(static_cast<std::int64_t>(b));
    for (auto l : c.sweep.learning_rates) lrs.push_back(l);
    sw.insert("batch_sizes", bs);
    sw.insert("learning_rates", lrs);
    sw.insert("epochs", static_cast<std::int64_t>(c.sweep.epochs));
    sw.insert("seeds", int_array(c.sweep.seeds));
    root.insert("sweep", sw);
    return root;
}

inline std::string to_toml_string(const PipelineConfig& c) {
    std::ostringstream os;
    os << to_toml(c) << '\n';
    return os.str();
}

} // namespace curato::pipeline
