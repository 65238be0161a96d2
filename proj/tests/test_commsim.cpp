// Copyright (c) 2026, The curato authors
// SPDX-License-Identifier: Apache-2.0

#include <catch_amalgamated.hpp>

#include <numeric>
#include <sstream>

#include "curato/commsim.hpp"
#include "curato/core/rng.hpp"

using namespace curato;
using namespace curato::commsim;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

const std::vector<std::size_t> kSweep{1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1024};

LayerProfile random_profile(Rng& rng) {
    LayerProfile p;
    const std::size_t n = 1 + rng.below(40);
    for (std::size_t l = 0; l < n; ++l) {
        // Some zero-byte tensors (e.g. frozen layers) on purpose.
        p.grad_bytes.push_back(rng.uniform() < 0.1 ? 0.0 : rng.uniform(1e3, 2e7));
        p.backward_time.push_back(rng.uniform(0.0, 3e-3));
    }
    return p;
}

CommModelConfig random_config(Rng& rng) {
    CommModelConfig c;
    c.profile = random_profile(rng);
    c.workers = std::size_t{1} << rng.below(11);
    c.bandwidth = rng.uniform(1e9, 5e10);
    c.latency = rng.uniform(0.0, 1e-5);
    c.bucket_bytes = rng.uniform(1e6, 5e7);
    c.fusion_bytes = rng.uniform(1e6, 1e8);
    c.cycle_time = rng.uniform(1e-4, 1e-2);
    c.negotiation_cost = rng.uniform(0.0, 5e-4);
    c.scheduler = rng.below(2) ? Scheduler::static_bucket : Scheduler::dynamic_queue;
    return c;
}

double sum_launched(const StepTrace& tr) {
    double s = 0.0;
    for (const auto& e : tr.events)
        if (e.kind == EventKind::allreduce_start) s += e.bytes;
    return s;
}

bool same_events(const StepTrace& a, const StepTrace& b) {
    if (a.events.size() != b.events.size()) return false;
    for (std::size_t i = 0; i < a.events.size(); ++i)
        if (a.events[i].time != b.events[i].time || a.events[i].kind != b.events[i].kind ||
            a.events[i].bytes != b.events[i].bytes)
            return false;
    return a.step_time == b.step_time;
}

CommModelConfig two_layer(double bytes, double tb) {
    CommModelConfig c;
    c.profile.grad_bytes = {bytes, bytes};
    c.profile.backward_time = {tb, tb};
    c.workers = 4;
    c.bandwidth = 1e9;
    c.latency = 0.0;
    c.bucket_bytes = bytes;
    return c;
}

} // namespace

TEST_CASE("allreduce_time closed form", "[commsim]") {
    CHECK(allreduce_time(123.0, 1, 1e9, 1e-5) == 0.0);
    CHECK_THAT(allreduce_time(0.0, 8, 1e9, 1e-5), WithinRel(14e-5, 1e-14));
    CHECK_THAT(allreduce_time(4e6, 4, 1e9, 1e-5), WithinRel(6.06e-3, 1e-12));
    CHECK_THROWS_AS(allreduce_time(-1.0, 4, 1e9, 0.0), ValidationError);
    CHECK(ceil_log2(1) == 0);
    CHECK(ceil_log2(2) == 1);
    CHECK(ceil_log2(5) == 3);
    CHECK(ceil_log2(1024) == 10);
}

TEST_CASE("zero-byte gradients cost nothing", "[commsim]") {
    for (auto s : {Scheduler::static_bucket, Scheduler::dynamic_queue}) {
        CommModelConfig c;
        c.scheduler = s;
        c.workers = 64;
        c.profile.grad_bytes.assign(10, 0.0);
        c.profile.backward_time.assign(10, 2e-3);
        c.latency = 0.0;
        const auto tr = simulate_step(c);
        CHECK_THAT(tr.step_time, WithinRel(0.02, 1e-12));
        CHECK(tr.messages == 0);
        CHECK(tr.exposed_comm == 0.0);
    }
}

TEST_CASE("single layer cannot overlap", "[commsim]") {
    CommModelConfig c;
    c.profile.grad_bytes = {8e6};
    c.profile.backward_time = {5e-3};
    c.workers = 16;
    const auto tr = simulate_step(c);
    const double t = allreduce_time(8e6, 16, c.bandwidth, c.latency);
    CHECK_THAT(tr.step_time, WithinRel(5e-3 + t, 1e-12));
    CHECK_THAT(tr.exposed_comm, WithinRel(t, 1e-9));
    CHECK(tr.messages == 1);
}

TEST_CASE("two equal layers: first reduction hidden", "[commsim]") {
    auto c = two_layer(1e6, 2e-3);
    const double t = allreduce_time(1e6, 4, 1e9, 0.0); // 1.5 ms < 2 ms
    REQUIRE(t < 2e-3);
    const auto tr = simulate_step(c);
    CHECK(tr.messages == 2);
    CHECK_THAT(tr.exposed_comm, WithinRel(t, 1e-9));
    CHECK_THAT(tr.step_time, WithinRel(4e-3 + t, 1e-12));

    // Hand trace of the same profile: bucket 1 runs [2, 3.5] ms, bucket 2 [4, 5.5] ms.
    std::vector<std::pair<double, double>> runs;
    for (const auto& e : tr.events)
        if (e.kind == EventKind::allreduce_start) runs.emplace_back(e.time, e.bytes);
    REQUIRE(runs.size() == 2);
    CHECK_THAT(runs[0].first, WithinAbs(2e-3, 1e-15));
    CHECK_THAT(runs[1].first, WithinAbs(4e-3, 1e-15));
}

TEST_CASE("backlog queues FIFO on the single transport", "[commsim]") {
    // Reduction (3 ms) slower than backward (1 ms): the second bucket waits.
    auto c = two_layer(2e6, 1e-3);
    const double t = allreduce_time(2e6, 4, 1e9, 0.0);
    REQUIRE_THAT(t, WithinRel(3e-3, 1e-12));
    const auto tr = simulate_step(c);
    CHECK_THAT(tr.step_time, WithinRel(1e-3 + 2.0 * t, 1e-12));
    CHECK_THAT(tr.comm_busy, WithinRel(2.0 * t, 1e-12));
}

TEST_CASE("dynamic queue hand trace", "[commsim]") {
    auto c = two_layer(1e6, 1e-3);
    c.scheduler = Scheduler::dynamic_queue;
    c.cycle_time = 0.4e-3;
    c.negotiation_cost = 1e-4; // two rounds at K = 4
    const double t = allreduce_time(1e6, 4, 1e9, 0.0); // 1.5 ms
    // Layer 1 ready at 1.0 ms, first tick that sees it is 1.2 ms, agreed 1.4 ms, done 2.9 ms.
    // Layer 0 (ready 2.0 ms) is picked up by the loop at 2.9 ms, agreed 3.1 ms, done 4.6 ms.
    const auto tr = simulate_step(c);
    std::vector<double> negotiations, starts;
    for (const auto& e : tr.events) {
        if (e.kind == EventKind::negotiate) negotiations.push_back(e.time);
        if (e.kind == EventKind::allreduce_start) starts.push_back(e.time);
    }
    REQUIRE(negotiations.size() == 2);
    REQUIRE(starts.size() == 2);
    CHECK_THAT(negotiations[0], WithinAbs(1.2e-3, 1e-15));
    CHECK_THAT(starts[0], WithinAbs(1.4e-3, 1e-15));
    CHECK_THAT(negotiations[1], WithinAbs(1.4e-3 + t, 1e-15));
    CHECK_THAT(starts[1], WithinAbs(1.6e-3 + t, 1e-15));
    CHECK_THAT(tr.step_time, WithinAbs(1.6e-3 + 2.0 * t, 1e-15));
}

TEST_CASE("dynamic fusion respects fusion_bytes", "[commsim]") {
    CommModelConfig c;
    c.scheduler = Scheduler::dynamic_queue;
    c.workers = 8;
    c.profile.grad_bytes.assign(20, 3e6);
    c.profile.backward_time.assign(20, 0.0); // everything ready at t = 0
    c.fusion_bytes = 10e6;
    const auto tr = simulate_step(c);
    CHECK(tr.messages == 7); // 6 chunks of 3 tensors, 1 of 2
    for (const auto& e : tr.events)
        if (e.kind == EventKind::allreduce_start) CHECK(e.bytes <= 10e6);
    // One negotiation covers the whole ready set.
    CHECK(std::count_if(tr.events.begin(), tr.events.end(),
                        [](const Event& e) { return e.kind == EventKind::negotiate; }) == 1);
}

TEST_CASE("oversized tensor gets its own bucket", "[commsim]") {
    CommModelConfig c;
    c.workers = 2;
    c.profile.grad_bytes = {1e6, 50e6, 1e6};
    c.profile.backward_time = {1e-3, 1e-3, 1e-3};
    c.bucket_bytes = 10e6;
    const auto tr = simulate_step(c);
    std::vector<double> sizes;
    for (const auto& e : tr.events)
        if (e.kind == EventKind::allreduce_start) sizes.push_back(e.bytes);
    CHECK(sizes == std::vector<double>{1e6, 50e6, 1e6});
}

TEST_CASE("single worker has no communication", "[commsim]") {
    for (auto s : {Scheduler::static_bucket, Scheduler::dynamic_queue}) {
        CommModelConfig c;
        c.scheduler = s;
        const auto tr = simulate_step(c);
        CHECK(tr.messages == 0);
        CHECK(tr.step_time == tr.compute_time);
        for (const auto& e : tr.events) CHECK(e.kind == EventKind::grad_ready);
    }
}

TEST_CASE("trace invariants over random configurations", "[commsim][property]") {
    Rng rng(2026);
    for (int trial = 0; trial < 400; ++trial) {
        const auto c = random_config(rng);
        INFO("trial " << trial);
        const auto tr = simulate_step(c);
        const double total = c.profile.total_bytes();
        // Conservation: every byte reduced once.
        if (c.workers > 1) {
            CHECK_THAT(tr.bytes_reduced, WithinRel(total, 1e-12));
            CHECK_THAT(sum_launched(tr), WithinRel(total, 1e-12));
        }
        CHECK(std::is_sorted(tr.events.begin(), tr.events.end(),
                             [](const Event& a, const Event& b) { return a.time < b.time; }));
        CHECK(tr.exposed_comm >= 0.0);
        CHECK(tr.exposed_comm == tr.step_time - tr.compute_time);
        CHECK(tr.step_time >= tr.compute_time);
        CHECK(tr.step_time >= tr.comm_busy * (1.0 - 1e-12));
        // Transfers never overlap and never start before their data exists.
        double free_at = 0.0;
        std::vector<std::pair<double, EventKind>> xfer;
        for (const auto& e : tr.events)
            if (e.kind == EventKind::allreduce_start || e.kind == EventKind::allreduce_end) xfer.emplace_back(e.time, e.kind);
        std::size_t open = 0;
        for (const auto& [t, k] : xfer) {
            if (k == EventKind::allreduce_start) {
                CHECK(t >= free_at - 1e-15);
                ++open;
            } else {
                free_at = t;
                --open;
            }
            CHECK(open <= 1);
        }
        const double first_ready = c.profile.backward_time.back();
        for (const auto& e : tr.events)
            if (e.kind == EventKind::allreduce_start) CHECK(e.time >= first_ready - 1e-15);
    }
}

TEST_CASE("static trace ignores dynamic knobs and vice versa", "[commsim][property]") {
    Rng rng(77);
    for (int trial = 0; trial < 100; ++trial) {
        auto c = random_config(rng);
        c.workers = std::max<std::size_t>(c.workers, 2);
        c.scheduler = Scheduler::static_bucket;
        auto other = c;
        other.cycle_time *= 3.7;
        other.fusion_bytes *= 0.3;
        other.negotiation_cost += 1e-3;
        CHECK(same_events(simulate_step(c), simulate_step(other)));

        c.scheduler = Scheduler::dynamic_queue;
        other = c;
        other.bucket_bytes *= 0.21;
        CHECK(same_events(simulate_step(c), simulate_step(other)));
    }
}

TEST_CASE("scaling curve: free communication is perfectly efficient", "[commsim]") {
    for (auto s : {Scheduler::static_bucket, Scheduler::dynamic_queue}) {
        CommModelConfig c;
        c.scheduler = s;
        c.latency = 0.0;
        c.negotiation_cost = 0.0;
        c.bandwidth = 1e300;
        for (const auto& row : scaling_curve(c, kSweep, 32)) CHECK_THAT(row.efficiency, WithinAbs(1.0, 1e-12));
    }
}

TEST_CASE("scaling curve arithmetic", "[commsim]") {
    CommModelConfig c;
    const auto rows = scaling_curve(c, {1, 8}, 64);
    c.workers = 1;
    const double t1 = simulate_step(c).step_time;
    c.workers = 8;
    const double t8 = simulate_step(c).step_time;
    CHECK_THAT(rows[0].throughput, WithinRel(64.0 / t1, 1e-14));
    CHECK_THAT(rows[1].throughput, WithinRel(8.0 * 64.0 / t8, 1e-14));
    CHECK_THAT(rows[1].efficiency, WithinRel(t1 / t8, 1e-14));
    CHECK_THROWS_AS(scaling_curve(c, {8, 4}, 64), ValidationError);
    CHECK_THROWS_AS(scaling_curve(c, {1}, 0), ValidationError);
}

TEST_CASE("schedulers agree without negotiation cost", "[commsim]") {
    CommModelConfig s;
    auto d = s;
    d.scheduler = Scheduler::dynamic_queue;
    d.negotiation_cost = 0.0;
    const auto rs = scaling_curve(s, kSweep, 32), rd = scaling_curve(d, kSweep, 32);
    for (std::size_t i = 0; i < kSweep.size(); ++i) {
        INFO("K = " << kSweep[i]);
        CHECK(std::abs(rd[i].step_time / rs[i].step_time - 1.0) < 0.01);
    }
}

TEST_CASE("negotiation cost widens the gap with K", "[commsim]") {
    for (double neg : {1e-4, 2e-4, 5e-4}) {
        INFO("negotiation " << neg);
        CommModelConfig s;
        auto d = s;
        d.scheduler = Scheduler::dynamic_queue;
        d.negotiation_cost = neg;
        const auto rs = scaling_curve(s, kSweep, 32), rd = scaling_curve(d, kSweep, 32);
        double prev = -1.0;
        for (std::size_t i = 0; i < kSweep.size(); ++i) {
            INFO("K = " << kSweep[i]);
            const double gap = rs[i].efficiency - rd[i].efficiency;
            CHECK(gap >= 0.0);
            if (kSweep[i] >= 64) {
                CHECK(gap >= prev);
                prev = gap;
            }
        }
        CHECK(rd.back().efficiency < rs.back().efficiency);
        // Static scaling also degrades toward 1024 workers.
        CHECK(rs.back().efficiency < rs[6].efficiency);
    }
}

TEST_CASE("config validation", "[commsim]") {
    CommModelConfig c;
    c.workers = 0;
    CHECK_THROWS_AS(simulate_step(c), ValidationError);
    c = {};
    c.profile.grad_bytes[3] = -1.0;
    CHECK_THROWS_AS(simulate_step(c), ValidationError);
    c = {};
    c.profile.backward_time.pop_back();
    CHECK_THROWS_AS(simulate_step(c), ValidationError);
    c = {};
    c.scheduler = Scheduler::dynamic_queue;
    c.cycle_time = 0.0;
    CHECK_THROWS_AS(simulate_step(c), ValidationError);
    c.scheduler = Scheduler::static_bucket;
    CHECK_NOTHROW(simulate_step(c));
    CHECK_THROWS_AS(scheduler_from_string("round_robin"), ValidationError);
    CHECK_THROWS_AS(geometric_profile(0, 1e6, 1.1, 0.01), ValidationError);
}

TEST_CASE("geometric profile", "[commsim]") {
    const auto p = geometric_profile(50, 100e6, 1.1, 0.06);
    CHECK_THAT(p.total_bytes(), WithinRel(100e6, 1e-12));
    CHECK_THAT(p.compute_time(), WithinRel(0.06, 1e-12));
    for (std::size_t l = 1; l < 50; ++l) CHECK_THAT(p.grad_bytes[l] / p.grad_bytes[l - 1], WithinRel(1.1, 1e-12));
    const auto flat = geometric_profile(4, 8.0, 1.0, 1.0);
    CHECK(flat.grad_bytes == std::vector<double>{2.0, 2.0, 2.0, 2.0});
}

TEST_CASE("toml config", "[commsim][io]") {
    const auto root = cfg::parse_toml(R"(
[commsim]
scheduler = "dynamic_queue"
workers = [1, 4, 16]
samples_per_step = 64
latency = 0
negotiation_cost = 3e-4
[commsim.profile]
tensors = 10
total_bytes = 1e7
ratio = 1.2
backward_total = 0.01
)");
    const auto sc = sweep_config_from_toml(root);
    CHECK(sc.model.scheduler == Scheduler::dynamic_queue);
    CHECK(sc.workers == std::vector<std::size_t>{1, 4, 16});
    CHECK(sc.samples_per_step == 64.0);
    CHECK(sc.model.latency == 0.0);
    CHECK(sc.model.negotiation_cost == 3e-4);
    CHECK(sc.model.profile.layers() == 10);
    CHECK_THAT(sc.model.profile.total_bytes(), WithinRel(1e7, 1e-12));

    const auto explicit_profile = sweep_config_from_toml(cfg::parse_toml(R"(
[commsim.profile]
grad_bytes = [1, 2, 3]
backward_time = [0.1, 0.1, 0.2]
)"));
    CHECK(explicit_profile.model.profile.grad_bytes == std::vector<double>{1, 2, 3});

    // Empty document: defaults.
    const auto def = sweep_config_from_toml(cfg::parse_toml(""));
    CHECK(def.model.bucket_bytes == CommModelConfig{}.bucket_bytes);

    CHECK_THROWS_AS(sweep_config_from_toml(cfg::parse_toml("[commsim]\nbucket = 3\n")), ValidationError);
    CHECK_THROWS_AS(sweep_config_from_toml(cfg::parse_toml("[commsim]\nscheduler = \"x\"\n")), ValidationError);
    CHECK_THROWS_AS(sweep_config_from_toml(cfg::parse_toml("[commsim]\nlatency = \"fast\"\n")), ValidationError);
    CHECK_THROWS_AS(sweep_config_from_toml(cfg::parse_toml("[commsim]\nworkers = [0, 2]\n")), ValidationError);
    CHECK_THROWS_AS(sweep_config_from_toml(cfg::parse_toml("[commsim]\nworkers = [-2]\n")), ValidationError);
    CHECK_THROWS_AS(sweep_config_from_toml(cfg::parse_toml("[commsim.profile]\ngrad_bytes = [1]\n")), ValidationError);
    CHECK_THROWS_AS(
        sweep_config_from_toml(cfg::parse_toml("[commsim]\nscheduler = \"dynamic\"\ncycle_time = 0\n")),
        ValidationError);
    CHECK_THROWS_AS(cfg::parse_toml("[commsim\n"), ValidationError);
}

TEST_CASE("csv outputs", "[commsim][io]") {
    auto c = two_layer(1e6, 2e-3);
    std::ostringstream trace;
    write_trace_csv(simulate_step(c), trace);
    std::istringstream in(trace.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "time,kind,bytes");
    std::size_t rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 6); // 2 grad_ready + 2 x (start, end)
    CHECK(trace.str().find("0.002,grad_ready,1000000\n") != std::string::npos);

    std::ostringstream eff;
    write_efficiency_csv(scaling_curve(c, {1, 2}, 10), eff);
    CHECK(eff.str().rfind("K,throughput,efficiency\n1,", 0) == 0);
    std::istringstream ein(eff.str());
    std::getline(ein, line);
    std::getline(ein, line);
    const double thr = std::stod(line.substr(line.find(',') + 1));
    CHECK(thr == 10.0 / 4e-3); // %.17g round-trips
}
