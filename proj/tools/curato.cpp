// Copyright (c) 2026, The curato authors
// SPDX-License-Identifier: Apache-2.0

// curato command-line front end. Stage subcommands read and write files in
// the output directory so they can be chained one at a time; `run` does the
// whole pipeline in one process.

#include "curato/commsim.hpp"
#include "curato/pipeline.hpp"
#include "curato/server.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using namespace curato;
using pipeline::PipelineConfig;

namespace {

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
};

/// Files shared between stage subcommands.
struct Layout {
    fs::path dir;
    fs::path data() const { return dir / "data.fvec"; }
    fs::path outliers() const { return dir / "outliers.json"; }
    fs::path train() const { return dir / "train.fvec"; }
    fs::path test() const { return dir / "test.fvec"; }
    fs::path checkpoint() const { return dir / "extractor.ckpt"; }
    fs::path features() const { return dir / "features.fvec"; }
    fs::path embedding() const { return dir / "embedding.csv"; }
    fs::path assignment() const { return dir / "assignment.csv"; }
    fs::path manifest() const { return dir / "manifest.json"; }
    fs::path session() const { return dir / "session.json"; }
};

toml::table config_root(const Globals& g) { return g.config.empty() ? toml::table{} : cfg::load_toml(g.config); }

PipelineConfig load_config(const Globals& g) {
    auto c = pipeline::pipeline_config_from_toml(config_root(g));
    if (g.seed) c.seed = *g.seed;
    if (!g.out.empty()) c.out_dir = g.out;
    if (c.out_dir.empty()) c.out_dir = "curato-out";
    c.validate();
    return c;
}

Layout layout(const PipelineConfig& c) {
    fs::create_directories(c.out_dir);
    return {c.out_dir};
}

void require_file(const fs::path& p, const char* hint) {
    if (!fs::exists(p)) curato::detail::fail("missing " + p.string() + " (run `curato " + hint + "` first)");
}

/// Train/test sides of the configured source, as `run` computes them.
struct Sides {
    pipeline::SourceData source;
    pipeline::Split split;
    dataset::FeatureDataset train, test;
};

Sides load_sides(const PipelineConfig& c) {
    Sides s;
    s.source = pipeline::load_source(c.source);
    curato::detail::require(s.source.dataset.has_labels(), "the source dataset must be labeled");
    s.split = pipeline::split_indices(s.source.dataset.n(), c.test_fraction, c.seed);
    s.train = s.source.dataset.subset(s.split.train);
    s.test = s.source.dataset.subset(s.split.test);
    return s;
}

void print_dataset(const char* what, const dataset::FeatureDataset& ds) {
    std::printf("%s: %zu rows, %zu dims, %u classes, hash %s\n", what, ds.n(), ds.d(),
                static_cast<unsigned>(ds.class_count), hash_to_hex(dataset::content_hash(ds)).c_str());
}

/// Per-class DBSCAN overrides given on the command line.
struct ClusterFlags {
    std::vector<unsigned> classes;
    double eps = 0.0;
    std::size_t min_pts = 0;

    void add(CLI::App* sub) {
        sub->add_option("--class", classes, "Class ids to re-parameterize");
        sub->add_option("--eps", eps, "DBSCAN radius for the selected classes");
        sub->add_option("--min-pts", min_pts, "DBSCAN core threshold for the selected classes");
    }

    void apply(PipelineConfig& c) const {
        if (classes.empty()) return;
        const cluster::DbscanConfig d{eps, min_pts};
        d.validate();
        for (unsigned k : classes) {
            curato::detail::require(k <= 0xFFFF, "class id out of range");
            c.class_overrides[static_cast<dataset::Label>(k)] = d;
        }
    }
};

void print_cluster_table(const cluster::ClusterAssignment& ca) {
    std::printf("class,points,clusters,noise,eps,min_pts\n");
    for (const auto& [c, idx] : cluster::class_members(ca.labels)) {
        int clusters = 0;
        std::size_t noise = 0;
        for (std::size_t i : idx) {
            clusters = std::max(clusters, ca.cluster[i] + 1);
            noise += ca.role[i] == cluster::Role::noise;
        }
        const auto& p = ca.params.at(c);
        std::printf("%u,%zu,%d,%zu,%.17g,%zu\n", static_cast<unsigned>(c), idx.size(), clusters, noise, p.eps, p.min_pts);
    }
}

// Subcommands ----------------------------------------------------------------

void cmd_ingest(const Globals& g, const std::string& input, bool header, long label_column) {
    const auto c = load_config(g);
    auto ds = label_column < 0 ? pipeline::load_dataset_file(input, header, std::nullopt)
                               : pipeline::load_dataset_file(input, header, static_cast<std::size_t>(label_column));
    ds.validate();
    const auto l = layout(c);
    dataset::save_fvec(ds, l.data());
    print_dataset("ingested", ds);
    std::printf("wrote %s\n", l.data().string().c_str());
}

void cmd_synth(const Globals& g) {
    const auto c = load_config(g);
    const auto syn = dataset::make_synthetic(c.source.synthetic);
    const auto l = layout(c);
    dataset::save_fvec(syn.dataset, l.data());
    pipeline::write_text(l.outliers(), nlohmann::json{{"outliers", syn.outliers}}.dump() + "\n");
    print_dataset("synthetic", syn.dataset);
    std::printf("%zu injected outliers\nwrote %s\n", syn.outliers.size(), l.data().string().c_str());
}

void cmd_train_extractor(const Globals& g) {
    const auto c = load_config(g);
    const auto l = layout(c);
    const auto s = load_sides(c);
    const auto ex = pipeline::train_extractor(c, s.train);
    dataset::save_fvec(s.train, l.train());
    dataset::save_fvec(s.test, l.test());
    nnet::save_checkpoint(ex.params, l.checkpoint());
    pipeline::write_text(l.dir / "config.toml", pipeline::to_toml_string(c));
    const auto ev = nnet::evaluate(ex.model, ex.params, s.test);
    std::printf("extractor %s: test accuracy %.4f, loss %.4f\nwrote %s\n", c.extractor_arch.str().c_str(), ev.accuracy,
                ev.loss, l.checkpoint().string().c_str());
}

void cmd_extract(const Globals& g, std::string checkpoint) {
    const auto c = load_config(g);
    const auto l = layout(c);
    require_file(l.train(), "train-extractor");
    if (checkpoint.empty()) checkpoint = l.checkpoint().string();
    require_file(checkpoint, "train-extractor");
    const auto train = dataset::load_fvec(l.train());
    const auto model = c.extractor_arch.build(train.d(), train.class_count);
    const auto params = nnet::load_checkpoint(checkpoint, model);
    const auto f = nnet::extract_features(model, params, train);
    dataset::FeatureDataset out;
    out.values = f.cast<float>();
    out.labels = train.labels;
    out.class_count = train.class_count;
    out.provenance = "features:" + c.extractor_arch.str();
    dataset::save_fvec(out, l.features());
    std::printf("features: %zu x %zu\nwrote %s\n", out.n(), out.d(), l.features().string().c_str());
}

void cmd_reduce(const Globals& g) {
    const auto c = load_config(g);
    const auto l = layout(c);
    require_file(l.features(), "extract");
    const auto f = dataset::load_fvec(l.features());
    curato::detail::require(f.has_labels(), "features file has no labels");
    const auto emb = pipeline::reduce_features(f.as_f64(), *f.labels, c);
    reduce::save_embedding(emb, l.embedding());
    std::printf("t-SNE: %zu points, KL %.6f -> %.6f\nwrote %s\n", emb.n(), emb.initial_kl(), emb.final_kl(),
                l.embedding().string().c_str());
}

void cmd_cluster(const Globals& g, const ClusterFlags& flags) {
    auto c = load_config(g);
    flags.apply(c);
    const auto l = layout(c);
    require_file(l.embedding(), "reduce");
    const auto emb = reduce::load_embedding(l.embedding());
    const auto ca = pipeline::cluster_embedding(emb, c);
    cluster::save_assignment_csv(ca, l.assignment());
    print_cluster_table(ca);
}

void cmd_filter(const Globals& g, const ClusterFlags& flags) {
    auto c = load_config(g);
    flags.apply(c);
    const auto l = layout(c);
    require_file(l.embedding(), "reduce");
    require_file(l.train(), "train-extractor");
    require_file(l.features(), "extract");
    pipeline::PipelineState st;
    st.train = dataset::load_fvec(l.train());
    st.embedding = reduce::load_embedding(l.embedding());
    curato::detail::require(st.embedding->n() == st.train.n(), "embedding and training split differ in size");
    const std::size_t width = dataset::load_fvec(l.features()).d();
    st.assignment = pipeline::cluster_embedding(*st.embedding, c);
    st.manifest = cluster::build_manifest(*st.assignment, dataset::content_hash(st.train), st.train.class_count,
                                          pipeline::stage_params(c, width));
    cluster::save_assignment_csv(*st.assignment, l.assignment());
    dataset::save_manifest(*st.manifest, l.manifest());
    pipeline::write_text(l.session(), pipeline::session_json(c, st).dump(2) + "\n");
    const auto r = cluster::reduction_report(*st.manifest);
    std::printf("%s", r.markdown().c_str());
    std::printf("kept %s\nwrote %s\n", r.headline().c_str(), l.manifest().string().c_str());
}

void cmd_retrain(const Globals& g, std::string manifest) {
    const auto c = load_config(g);
    const auto l = layout(c);
    pipeline::PipelineState st;
    auto s = load_sides(c);
    st.source = std::move(s.source);
    st.split = std::move(s.split);
    st.train = std::move(s.train);
    st.test = std::move(s.test);
    if (c.needs_filter()) {
        if (manifest.empty()) manifest = l.manifest().string();
        require_file(manifest, "filter");
        st.manifest = dataset::load_manifest(manifest);
        if (st.manifest->source_hash != dataset::content_hash(st.train))
            curato::detail::fail("manifest " + manifest + " was built for a different training split");
    }
    const auto rep = pipeline::run_arms(c, st);
    pipeline::write_report(rep, l.dir);
    std::printf("%s", pipeline::render_markdown(rep).c_str());
}

void cmd_run(const Globals& g) {
    const auto c = load_config(g);
    const auto l = layout(c);
    const auto st = pipeline::prepare(c);
    pipeline::write_stage_artifacts(c, st, l.dir);
    const auto rep = pipeline::run_arms(c, st);
    pipeline::write_report(rep, l.dir);
    std::printf("%s", pipeline::render_markdown(rep).c_str());
    std::printf("\nwrote %s\n", (l.dir / "report.md").string().c_str());
}

void cmd_sweep(const Globals& g) {
    const auto c = load_config(g);
    const auto l = layout(c);
    const auto s = load_sides(c);
    const auto model = c.extractor_arch.build(s.train.d(), s.train.class_count);
    const auto t = pipeline::batch_sweep(model, s.train, s.test, c.sweep.batch_sizes, c.sweep.learning_rates,
                                         c.sweep.epochs, c.sweep.seeds, c.extractor_train);
    pipeline::write_sweep(t, l.dir);
    std::printf("%s", pipeline::render_sweep_markdown(t).c_str());
}

void cmd_commsim(const Globals& g, const std::string& scheduler, std::size_t trace_workers) {
    auto sc = commsim::sweep_config_from_toml(config_root(g));
    if (!scheduler.empty()) sc.model.scheduler = commsim::scheduler_from_string(scheduler);
    const fs::path dir = g.out.empty() ? fs::path("curato-out") : fs::path(g.out);
    fs::create_directories(dir);
    const auto rows = commsim::scaling_curve(sc.model, sc.workers, sc.samples_per_step);
    commsim::write_file(dir / "efficiency.csv", [&](std::ostream& o) { commsim::write_efficiency_csv(rows, o); });
    auto one = sc.model;
    one.workers = trace_workers ? trace_workers : sc.workers.back();
    const auto tr = commsim::simulate_step(one);
    commsim::write_file(dir / "trace.csv", [&](std::ostream& o) { commsim::write_trace_csv(tr, o); });
    std::printf("scheduler %s\nK,step_time,throughput,efficiency\n", commsim::to_string(sc.model.scheduler).c_str());
    for (const auto& r : rows) std::printf("%zu,%.6g,%.6g,%.4f\n", r.workers, r.step_time, r.throughput, r.efficiency);
    std::printf("wrote %s and %s\n", (dir / "efficiency.csv").string().c_str(), (dir / "trace.csv").string().c_str());
}

struct ServeFlags {
    std::string session;
    std::optional<int> port;
    std::string static_dir;
    std::string commit_dir;
    bool unclustered = false;
};

void cmd_serve(const Globals& g, const ServeFlags& f) {
    const auto root = config_root(g);
    const fs::path out = g.out.empty() ? fs::path("curato-out") : fs::path(g.out);
    server::ServerOptions opt;
    opt.port = server::port_from_env();
    opt.commit_dir = out / "curated";
    if (const auto* t = cfg::subtable(root, "server")) {
        cfg::only_keys(*t, "server", {"host", "port", "static_dir", "commit_dir"});
        cfg::read(*t, "host", opt.host);
        if (!std::getenv("CURATO_PORT")) cfg::read(*t, "port", opt.port);
        std::string s;
        cfg::read(*t, "static_dir", s);
        if (!s.empty()) opt.static_dir = s;
        s.clear();
        cfg::read(*t, "commit_dir", s);
        if (!s.empty()) opt.commit_dir = s;
    }
    if (f.port) opt.port = *f.port;
    if (!f.static_dir.empty()) opt.static_dir = f.static_dir;
    if (!f.commit_dir.empty()) opt.commit_dir = f.commit_dir;
    curato::detail::require(opt.port >= 0 && opt.port < 65536, "port out of range");

    auto session = server::Session::load(f.session.empty() ? out : fs::path(f.session), !f.unclustered);
    server::CurationServer srv(session, opt);
    std::printf("serving %zu points in %zu classes on http://%s:%d\n", session.embedding().n(), session.classes().size(),
                opt.host.c_str(), opt.port);
    std::fflush(stdout);
    srv.run();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"curato: feature-space data curation and retraining"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config, "TOML configuration file")->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "Master seed (split, extractor, t-SNE)");
    app.add_option("--out", g.out, "Output directory (default curato-out)");

    std::string input;
    bool header = false;
    long label_column = -1;
    auto* ingest = app.add_subcommand("ingest", "Validate a CSV or FVEC file and store it as FVEC");
    ingest->add_option("input", input, "Input .csv or .fvec")->required()->check(CLI::ExistingFile);
    ingest->add_flag("--header", header, "CSV has a header row");
    ingest->add_option("--label-column", label_column, "CSV column holding class ids (-1: unlabeled)");

    auto* synth = app.add_subcommand("synth", "Generate the configured synthetic blobs");
    auto* train = app.add_subcommand("train-extractor", "Split the source and train the feature extractor");

    std::string checkpoint;
    auto* extract = app.add_subcommand("extract", "Penultimate-layer features of the training split");
    extract->add_option("--checkpoint", checkpoint, "Pretrained extractor parameters");

    auto* reduce_cmd = app.add_subcommand("reduce", "PCA and t-SNE of the extracted features");

    ClusterFlags cflags;
    auto* cluster_cmd = app.add_subcommand("cluster", "Per-class DBSCAN of the embedding");
    cflags.add(cluster_cmd);
    auto* filter = app.add_subcommand("filter", "Cluster and write the filter manifest");
    cflags.add(filter);

    std::string manifest;
    auto* retrain = app.add_subcommand("retrain", "Retrain the smaller network on each arm");
    retrain->add_option("--manifest", manifest, "Network-filter manifest (default <out>/manifest.json)");

    auto* run = app.add_subcommand("run", "Full pipeline and experiment report");
    auto* sweep = app.add_subcommand("sweep-batch", "Batch-size sweep at a fixed epoch budget");

    std::string scheduler;
    std::size_t trace_workers = 0;
    auto* comm = app.add_subcommand("commsim", "Gradient-communication scaling simulation");
    comm->add_option("--scheduler", scheduler, "static_bucket or dynamic_queue");
    comm->add_option("--trace-workers", trace_workers, "Worker count for trace.csv (default: largest K)");

    ServeFlags sflags;
    auto* serve = app.add_subcommand("serve", "Curation HTTP server");
    serve->add_option("--session", sflags.session, "Directory with session.json (default <out>)");
    serve->add_option("--port", sflags.port, "Port (default CURATO_PORT or 8787)");
    serve->add_option("--static", sflags.static_dir, "Built UI bundle served at /");
    serve->add_option("--commit-dir", sflags.commit_dir, "Where commits write manifest.json");
    serve->add_flag("--unclustered", sflags.unclustered, "Start with no class clustered");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*ingest) cmd_ingest(g, input, header, label_column);
        else if (*synth) cmd_synth(g);
        else if (*train) cmd_train_extractor(g);
        else if (*extract) cmd_extract(g, checkpoint);
        else if (*reduce_cmd) cmd_reduce(g);
        else if (*cluster_cmd) cmd_cluster(g, cflags);
        else if (*filter) cmd_filter(g, cflags);
        else if (*retrain) cmd_retrain(g, manifest);
        else if (*run) cmd_run(g);
        else if (*sweep) cmd_sweep(g);
        else if (*comm) cmd_commsim(g, scheduler, trace_workers);
        else if (*serve) cmd_serve(g, sflags);
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const RuntimeError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
