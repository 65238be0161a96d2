// Copyright (c) 2026, The curato authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails. Each check is timed against its budget.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <set>
#include <string>

#include "curato/commsim.hpp"
#include "curato/pipeline.hpp"
#include "dbscan_oracle.hpp"
#include "nnet_oracles.hpp"
#include "reduce_oracles.hpp"

using namespace curato;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// 1 -------------------------------------------------------------------------

Outcome batchnorm_arithmetic() {
    using namespace nnet;
    Rng rng(101);
    double worst = 0.0;
    int dense = 0, conv = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const bool is_conv = trial % 2 == 1;
        const std::size_t batch = 2 + rng.below(15);
        const Shape shape = is_conv ? Shape{{1 + rng.below(4), 1 + rng.below(5), 1 + rng.below(5)}}
                                    : Shape{{1 + rng.below(12)}};
        const auto layout = BatchNormLayout::of(shape);
        auto x = test::random_tensor(batch, shape, rng, rng.uniform(0.01, 20.0));
        const double shift = rng.uniform(-50.0, 50.0);
        for (double& v : x.data) v += shift;
        std::vector<double> gamma(layout.groups), beta(layout.groups), mean(layout.groups, 0.0), var(layout.groups, 1.0);
        for (double& g : gamma) g = rng.uniform(-2.0, 2.0);
        for (double& b : beta) b = rng.uniform(-2.0, 2.0);
        BatchNormCache cache;
        const auto y = batchnorm_forward(x, gamma, beta, mean, var, 1e-5, 0.9, Mode::train, cache);
        const auto ref = test::batchnorm_reference(x.data, batch, layout.groups, layout.spatial, gamma, beta, 1e-5);
        for (std::size_t i = 0; i < ref.size(); ++i) worst = std::max(worst, std::abs(y.data[i] - ref[i]));
        (is_conv ? conv : dense)++;
    }
    return {worst <= 1e-6, fmt("max |error| %.3g over %d dense + %d conv batches", worst, dense, conv)};
}

// 2 -------------------------------------------------------------------------

Outcome gradient_check() {
    using nnet::LayerKind;
    const std::vector<nnet::Model> nets{test::fd_dense_bn_net(), test::fd_conv_net(), test::fd_strided_conv_net()};
    std::set<LayerKind> kinds;
    double worst = 0.0;
    std::size_t checks = 0;
    for (std::size_t m = 0; m < nets.size(); ++m) {
        const auto& model = nets[m];
        for (const auto& l : model.layers) kinds.insert(l.kind);
        for (std::uint64_t seed = 0; seed < 50; ++seed) {
            Rng rng(seed * 7919 + m);
            auto p = nnet::init_params(model, seed + 1000 * m);
            test::perturb_batchnorm(model, p, rng);
            test::perturb_biases(model, p, rng);
            const auto x = test::random_tensor(4, model.input, rng);
            const auto y = test::random_labels(4, model.class_count(), rng);
            const auto rep = test::finite_difference_check(model, p, x, y, 1e-5);
            checks += rep.checked;
            worst = std::max(worst, rep.max_rel_error);
        }
    }
    const bool all_kinds = kinds.size() == 7;
    return {worst < 1e-4 && all_kinds,
            fmt("max relative error %.3g over %zu entries, %zu layer kinds, 3 nets x 50 seeds", worst, checks,
                kinds.size())};
}

// 3 -------------------------------------------------------------------------

Outcome data_parallel() {
    using namespace nnet;
    const std::vector<Model> nets{
        Model::build(Shape{{5}}, {LayerSpec::dense(5, 8), LayerSpec::relu(), LayerSpec::dense(8, 6), LayerSpec::relu(),
                                  LayerSpec::dense(6, 4), LayerSpec::head()}),
        Model::build(Shape{{1, 6, 6}}, {LayerSpec::conv2d(1, 3, 3, 1, 1), LayerSpec::relu(), LayerSpec::maxpool2d(2, 2),
                                        LayerSpec::flatten(), LayerSpec::dense(0, 3), LayerSpec::head()})};
    TrainConfig cfg;
    cfg.learning_rate = 0.1;
    cfg.momentum = 0.9;
    cfg.weight_decay = 1e-3;
    double worst = 0.0;
    int cases = 0;
    for (std::size_t m = 0; m < nets.size(); ++m)
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const auto& model = nets[m];
            Rng rng(500 + seed + 100 * m);
            const auto x = test::random_tensor(24, model.input, rng);
            const auto y = test::random_labels(24, model.class_count(), rng);
            const auto p0 = init_params(model, seed);
            // Reference: one plain step on the whole batch, two steps deep so momentum matters.
            auto ref = p0;
            Velocity vr;
            for (int step = 0; step < 2; ++step) {
                auto fwd = forward(model, ref, x, y, Mode::train);
                sgd_step(ref, backward(model, ref, fwd.caches), cfg.sgd(), vr);
            }
            for (std::size_t k : {2u, 4u, 8u}) {
                auto p = p0;
                Velocity v;
                for (int step = 0; step < 2; ++step) data_parallel_step(model, p, x, y, k, cfg, v);
                for (std::size_t l = 0; l < p.layers.size(); ++l)
                    for (std::size_t t = 0; t < p.layers[l].size(); ++t)
                        for (std::size_t i = 0; i < p.layers[l][t].value.size(); ++i) {
                            const double a = p.layers[l][t].value[i], b = ref.layers[l][t].value[i];
                            worst = std::max(worst, std::abs(a - b) / std::max(std::abs(b), 1e-12));
                        }
                ++cases;
            }
        }
    return {worst <= 1e-10, fmt("max relative difference %.3g over %d (model, seed, K) cases", worst, cases)};
}

// 4 -------------------------------------------------------------------------

Outcome dbscan_equivalence() {
    Rng rng(404);
    int exact = 0;
    const int instances = 100;
    for (int t = 0; t < instances; ++t) {
        const std::size_t n = 1 + rng.below(300);
        const std::size_t d = 1 + rng.below(4);
        Matrix<double> p(n, d);
        const std::size_t blobs = 1 + rng.below(5);
        for (std::size_t i = 0; i < n; ++i) {
            const double c = static_cast<double>(rng.below(blobs)) * 4.0;
            for (std::size_t k = 0; k < d; ++k) p(i, k) = c + rng.normal(0.0, rng.uniform(0.2, 1.5));
            // Exact duplicates and grid-aligned values stress ties at distance eps.
            if (i > 0 && rng.uniform() < 0.05)
                for (std::size_t k = 0; k < d; ++k) p(i, k) = p(i - 1, k);
            if (rng.uniform() < 0.05)
                for (std::size_t k = 0; k < d; ++k) p(i, k) = std::round(p(i, k));
        }
        const double eps = t % 10 == 0 ? 1.0 : rng.uniform(0.05, 2.5);
        const std::size_t min_pts = 1 + rng.below(12);
        const auto lib = cluster::dbscan(p, {eps, min_pts});
        const auto ref = test::dbscan_oracle(p, eps, min_pts);
        exact += lib.cluster == ref.cluster && lib.role == ref.role;
    }
    return {exact == instances, fmt("%d of %d random instances identical (n <= 300)", exact, instances)};
}

// 5 -------------------------------------------------------------------------

Outcome tsne_quality() {
    using namespace reduce;
    bool ok = true;

    // Perplexity calibration.
    Rng rng(55);
    Matrix<double> g(300, 6);
    for (double& v : g.data()) v = rng.normal(0.0, rng.uniform(0.5, 2.0));
    TsneConfig c;
    c.theta = 0.0;
    c.iterations = 10;
    c.seed = 1;
    const auto e0 = tsne(g, c);
    double worst_perp = 0.0;
    for (std::size_t i = 0; i < g.rows(); ++i)
        worst_perp = std::max(worst_perp, std::abs(test::achieved_perplexity(g, i, e0.beta[i]) - 30.0) / 30.0);
    ok &= worst_perp < 0.01;

    // KL decrease and separation on 10-sigma blobs, 5 seeds.
    double min_purity = 1.0;
    bool kl_down = true;
    for (std::uint64_t s = 0; s < 5; ++s) {
        std::vector<std::uint16_t> labels;
        const auto x = test::two_blobs(60, 10, 10.0, 900 + s, labels);
        TsneConfig cfg;
        cfg.seed = s;
        cfg.theta = 0.0;
        const auto e = tsne(x, cfg, labels);
        kl_down &= e.final_kl() < e.initial_kl();
        min_purity = std::min(min_purity, test::knn_purity(e.y, labels));
    }
    ok &= kl_down && min_purity >= 0.95;

    // Barnes-Hut first-iteration gradient.
    double worst_bh = 0.0, worst_spread = 0.0;
    for (std::size_t n : {500u, 2000u}) {
        Matrix<double> x(n, 10);
        Rng r(n);
        for (double& v : x.data()) v = r.normal();
        TsneConfig cfg;
        cfg.theta = 0.5;
        cfg.seed = 3;
        const auto bh = tsne_bh_consistency(x, cfg);
        worst_bh = std::max(worst_bh, bh.rel_error);
        worst_spread = std::max(worst_spread, bh.spread_rel_error);
    }
    // The unit-spread layout is the harder probe; hold it to the same bound.
    ok &= worst_bh < 0.01 && worst_spread < 0.01;
    return {ok, fmt("perplexity error %.2g%%, KL decreased %s, min 5-NN purity %.3f, BH gradient error %.2g%% "
                    "(%.2g%% at unit spread)",
                    100 * worst_perp, kl_down ? "yes" : "no", min_purity, 100 * worst_bh, 100 * worst_spread)};
}

// 6 -------------------------------------------------------------------------

std::size_t manifest_checks = 0;
bool manifests_conserve = true;

void note_manifest(const dataset::FilterManifest& m, std::size_t n) {
    ++manifest_checks;
    manifests_conserve &= m.kept.size() + m.removed.size() == n;
}

Outcome contamination_benchmark() {
    const auto cfg = pipeline::load_pipeline_config(std::string(CURATO_CONFIG_DIR) + "/contamination.toml");
    const auto st = pipeline::prepare(cfg);
    const auto rep = pipeline::run_arms(cfg, st);
    note_manifest(*rep.network_manifest, st.train.n());

    bool matched = true;
    for (const auto& r : rep.runs)
        if (r.arm != pipeline::Arm::full) matched &= r.removed == rep.network_manifest->removed.size();
    const double full = rep.mean_test_accuracy(pipeline::Arm::full);
    const double random = rep.mean_test_accuracy(pipeline::Arm::random);
    const double network = rep.mean_test_accuracy(pipeline::Arm::network);
    const auto& o = *rep.outliers;
    const bool ok = o.recall() >= 0.6 && o.clean_removal() <= 0.1 && matched && network >= random &&
                    network >= full - 0.005 && cfg.seeds.size() == 5 && st.source.dataset.n() == 5000;
    return {ok, fmt("n=%zu, recall %.3f, clean removal %.4f, removed %zu; mean test acc full %.4f random %.4f "
                    "network %.4f over %zu seeds",
                    st.source.dataset.n(), o.recall(), o.clean_removal(), rep.network_manifest->removed.size(), full,
                    random, network, cfg.seeds.size())};
}

// 7 -------------------------------------------------------------------------

Outcome batch_sweep() {
    const auto cfg = pipeline::load_pipeline_config(std::string(CURATO_CONFIG_DIR) + "/sweep.toml");
    const auto ds = pipeline::load_source(cfg.source).dataset;
    const auto split = pipeline::split_indices(ds.n(), cfg.test_fraction, cfg.seed);
    const auto train = ds.subset(split.train), test = ds.subset(split.test);
    const auto model = cfg.extractor_arch.build(train.d(), train.class_count);
    const auto t = pipeline::batch_sweep(model, train, test, cfg.sweep.batch_sizes, cfg.sweep.learning_rates,
                                         cfg.sweep.epochs, cfg.sweep.seeds, cfg.extractor_train);
    std::string per_lr;
    bool any = false;
    for (double lr : t.learning_rates()) {
        const bool in = t.interior_optimum(lr);
        any |= in;
        per_lr += fmt(" lr=%g best b=%zu%s;", lr, t.argmax_batch(lr), in ? " (interior)" : "");
    }
    const bool full_range = cfg.sweep.batch_sizes.front() == 8 && cfg.sweep.batch_sizes.back() == 512 &&
                            cfg.sweep.seeds.size() == 3;
    return {any && full_range, fmt("b in {8..512}, %zu epochs, 3-seed means:%s", t.epochs, per_lr.c_str())};
}

// 8 -------------------------------------------------------------------------

Outcome comms_simulation() {
    commsim::CommModelConfig base;
    const std::vector<std::size_t> ks{1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1024};
    auto run = [&](commsim::Scheduler s, double neg, std::size_t k) {
        auto c = base;
        c.scheduler = s;
        c.negotiation_cost = neg;
        c.workers = k;
        return c;
    };
    double worst_zero = 0.0;
    for (std::size_t k : ks) {
        const double d = commsim::simulate_step(run(commsim::Scheduler::dynamic_queue, 0.0, k)).step_time;
        const double s = commsim::simulate_step(run(commsim::Scheduler::static_bucket, 0.0, k)).step_time;
        worst_zero = std::max(worst_zero, std::abs(d - s) / s);
    }
    const std::vector<std::size_t> big{64, 128, 256, 512, 1024};
    auto eff = [&](commsim::Scheduler s) {
        auto c = base;
        c.scheduler = s;
        return commsim::scaling_curve(c, big, 32.0);
    };
    const auto dyn = eff(commsim::Scheduler::dynamic_queue), sta = eff(commsim::Scheduler::static_bucket);
    bool monotone = true;
    double prev = -1.0;
    std::string gaps;
    for (std::size_t i = 0; i < big.size(); ++i) {
        const double gap = sta[i].efficiency - dyn[i].efficiency;
        monotone &= gap >= prev;
        prev = gap;
        gaps += fmt(" %.4f", gap);
    }
    const bool ok = base.negotiation_cost > 0.0 && worst_zero <= 0.01 && dyn.back().efficiency < sta.back().efficiency &&
                    monotone;
    return {ok, fmt("zero-negotiation step-time difference %.3g%%; K=1024 efficiency dynamic %.4f static %.4f; "
                    "gap over K=64..1024:%s",
                    100 * worst_zero, dyn.back().efficiency, sta.back().efficiency, gaps.c_str())};
}

// 9 -------------------------------------------------------------------------

Outcome formats() {
    bool ok = true;
    std::size_t fvec = 0, ckpt = 0;
    Rng rng(909);
    for (int t = 0; t < 20; ++t) {
        dataset::FeatureDataset ds;
        const std::size_t n = 1 + rng.below(200), d = 1 + rng.below(64);
        ds.values = Matrix<float>(n, d);
        for (float& v : ds.values.data()) {
            const std::uint32_t bits = static_cast<std::uint32_t>(rng.below(0xFFFFFFFFull));
            std::memcpy(&v, &bits, sizeof v);
            if (!std::isfinite(v)) v = static_cast<float>(rng.normal());
        }
        if (t % 2 == 0) {
            ds.class_count = static_cast<std::uint16_t>(1 + rng.below(100));
            ds.labels.emplace(n);
            for (auto& l : *ds.labels) l = static_cast<dataset::Label>(rng.below(ds.class_count));
        }
        const auto bytes = dataset::encode_fvec(ds);
        const auto back = dataset::decode_fvec(bytes);
        ok &= back.n() == n && back.d() == d && back.labels == ds.labels &&
              std::memcmp(back.values.data().data(), ds.values.data().data(), n * d * sizeof(float)) == 0 &&
              dataset::encode_fvec(back) == bytes;
        ++fvec;
    }
    for (const auto& model : {test::fd_dense_bn_net(), test::fd_conv_net(), test::fd_strided_conv_net()}) {
        for (std::uint64_t s = 0; s < 5; ++s) {
            auto p = nnet::init_params(model, s);
            test::perturb_batchnorm(model, p, rng);
            const auto bytes = nnet::encode_checkpoint(p);
            const auto back = nnet::decode_checkpoint(bytes, model);
            ok &= back == p && nnet::encode_checkpoint(back) == bytes;
            ++ckpt;
        }
    }
    // Manifest conservation on a few small pipeline runs plus the benchmark run.
    auto small = pipeline::PipelineConfig{};
    small.source.synthetic.class_count = 3;
    small.source.synthetic.points_per_class = 60;
    small.source.synthetic.dim = 5;
    small.source.synthetic.contamination = 0.1;
    small.extractor_arch = pipeline::ArchSpec::parse("dense:12,relu,dense:6,relu");
    small.extractor_train.epochs = 5;
    small.retrain_train.epochs = 2;
    small.tsne.perplexity = 10.0;
    small.tsne.iterations = 250;
    small.seeds = {0};
    for (std::uint64_t s = 0; s < 4; ++s) {
        small.seed = s;
        small.source.synthetic.seed = s;
        const auto st = pipeline::prepare(small);
        note_manifest(*st.manifest, st.train.n());
        const auto rep = pipeline::run_arms(small, st);
        for (const auto& r : rep.runs) manifests_conserve &= r.train_rows + r.removed == st.train.n();
    }
    ok &= manifests_conserve;
    return {ok, fmt("%zu FVEC and %zu checkpoint round trips bit-exact; %zu pipeline manifests conserve n", fvec, ckpt,
                    manifest_checks)};
}

// 10 ------------------------------------------------------------------------

Outcome reduction_accounting() {
    dataset::FilterManifest m;
    m.method = dataset::FilterMethod::network_filtered;
    m.source_rows = 50000;
    for (std::size_t i = 0; i < 50000; ++i) (i % 80 == 7 && m.removed.size() < 620 ? m.removed : m.kept).push_back(i);
    const auto r = cluster::reduction_report(m);
    // 49380 / 50000 = 0.9876 exactly.
    const std::string want = "98.76% or 49380 images";
    const bool ok = m.removed.size() == 620 && r.kept == 49380 && std::abs(r.kept_percent - 98.76) < 1e-9 &&
                    r.headline() == want;
    return {ok, fmt("620 of 50000 removed reports \"%s\"", r.headline().c_str())};
}

} // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        double budget_s;
        std::function<Outcome()> run;
    };
    // Formats runs after the benchmark so the benchmark manifest is counted.
    const std::vector<Criterion> all{
        {1, "batch-norm arithmetic", 1.0, batchnorm_arithmetic},
        {2, "gradient correctness", 30.0, gradient_check},
        {3, "data-parallel equivalence", 10.0, data_parallel},
        {4, "DBSCAN oracle equivalence", 10.0, dbscan_equivalence},
        {5, "t-SNE calibration and quality", 180.0, tsne_quality},
        {6, "contamination benchmark", 600.0, contamination_benchmark},
        {7, "batch-size sweep", 900.0, batch_sweep},
        {8, "communication simulation", 5.0, comms_simulation},
        {9, "formats and conservation", 5.0, formats},
        {10, "reduction accounting", 1.0, reduction_accounting},
    };
    int failed = 0;
    for (const auto& c : all) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = secs <= c.budget_s;
        const bool pass = o.pass && in_time;
        failed += !pass;
        std::printf("[%2d] %s  %s: %s (%.2f s of %.0f s%s)\n", c.id, pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), secs,
                    c.budget_s, in_time ? "" : ", over budget");
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(all.size()) - failed, all.size());
    return failed == 0 ? 0 : 1;
}
