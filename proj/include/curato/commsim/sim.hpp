// Copyright (c) 2026, The curato authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "curato/core/error.hpp"

namespace curato::commsim {

enum class Scheduler { static_bucket, dynamic_queue };

inline std::string to_string(Scheduler s) { return s == Scheduler::static_bucket ? "static_bucket" : "dynamic_queue"; }

inline Scheduler scheduler_from_string(const std::string& s) {
    if (s == "static_bucket" || s == "static") return Scheduler::static_bucket;
    if (s == "dynamic_queue" || s == "dynamic") return Scheduler::dynamic_queue;
    curato::detail::fail("unknown scheduler '" + s + "' (static_bucket | dynamic_queue)");
}

/// Per-layer gradient sizes and backward times. Index 0 is the first
/// (input-side) layer; backward visits layers from the last index down.
struct LayerProfile {
    std::vector<double> grad_bytes;
    std::vector<double> backward_time;

    [[nodiscard]] std::size_t layers() const { return grad_bytes.size(); }
    [[nodiscard]] double total_bytes() const {
        double s = 0.0;
        for (double b : grad_bytes) s += b;
        return s;
    }
    [[nodiscard]] double compute_time() const {
        double s = 0.0;
        for (double t : backward_time) s += t;
        return s;
    }
};

/// `count` tensors whose sizes grow geometrically by `ratio` from the input
/// side and sum to `total_bytes`; backward time is split evenly.
inline LayerProfile geometric_profile(std::size_t count, double total_bytes, double ratio, double backward_total) {
    curato::detail::require(count >= 1, "profile: need at least one tensor");
    curato::detail::require(ratio > 0.0 && total_bytes >= 0.0 && backward_total >= 0.0, "profile: bad parameters");
    LayerProfile p;
    double weight = 0.0, w = 1.0;
    for (std::size_t l = 0; l < count; ++l, w *= ratio) {
        p.grad_bytes.push_back(w);
        weight += w;
    }
    for (double& b : p.grad_bytes) b = b / weight * total_bytes;
    p.backward_time.assign(count, backward_total / static_cast<double>(count));
    return p;
}

struct CommModelConfig {
    std::size_t workers = 1;
    LayerProfile profile = geometric_profile(50, 100e6, 1.0, 0.060);
    double bandwidth = 25e9; ///< bytes/s per link
    double latency = 2e-6;   ///< seconds per ring step
    Scheduler scheduler = Scheduler::static_bucket;
    double bucket_bytes = 10e6;
    double fusion_bytes = 64e6;
    double cycle_time = 5e-3;
    double negotiation_cost = 2e-4; ///< seconds per cycle per log2(K) coordination round

    void validate() const {
        using curato::detail::require;
        require(workers >= 1, "commsim: K must be >= 1");
        require(profile.grad_bytes.size() == profile.backward_time.size(),
                "commsim: grad_bytes and backward_time lengths differ");
        require(profile.layers() >= 1, "commsim: empty layer profile");
        for (double b : profile.grad_bytes) require(std::isfinite(b) && b >= 0.0, "commsim: gradient sizes must be >= 0");
        for (double t : profile.backward_time) require(std::isfinite(t) && t >= 0.0, "commsim: backward times must be >= 0");
        require(bandwidth > 0.0, "commsim: bandwidth must be > 0");
        require(latency >= 0.0, "commsim: latency must be >= 0");
        require(bucket_bytes > 0.0, "commsim: bucket_bytes must be > 0");
        require(fusion_bytes > 0.0, "commsim: fusion_bytes must be > 0");
        require(negotiation_cost >= 0.0, "commsim: negotiation cost must be >= 0");
        require(scheduler != Scheduler::dynamic_queue || cycle_time > 0.0, "commsim: cycle_time must be > 0 for dynamic_queue");
    }
};

/// Ring allreduce: 2(K-1) steps, each moving bytes/K over one link.
inline double allreduce_time(double bytes, std::size_t workers, double bandwidth, double latency) {
    curato::detail::require(bytes >= 0.0, "allreduce_time: bytes must be >= 0");
    if (workers <= 1) return 0.0;
    const double k = static_cast<double>(workers);
    return 2.0 * (k - 1.0) * (latency + bytes / (k * bandwidth));
}

inline std::size_t ceil_log2(std::size_t k) {
    std::size_t r = 0;
    while ((std::size_t{1} << r) < k) ++r;
    return r;
}

enum class EventKind { grad_ready, negotiate, allreduce_start, allreduce_end };

inline std::string to_string(EventKind k) {
    switch (k) {
    case EventKind::grad_ready: return "grad_ready";
    case EventKind::negotiate: return "negotiate";
    case EventKind::allreduce_start: return "allreduce_start";
    case EventKind::allreduce_end: return "allreduce_end";
    }
    return "?";
}

struct Event {
    double time = 0.0;
    EventKind kind = EventKind::grad_ready;
    double bytes = 0.0;
};

struct StepTrace {
    std::vector<Event> events;
    double step_time = 0.0;
    double compute_time = 0.0;
    double exposed_comm = 0.0;
    double comm_busy = 0.0;     ///< total time the transport spends in allreduces
    double bytes_reduced = 0.0; ///< sum of launched payloads
    std::size_t messages = 0;
};

namespace sim_detail {

/// Single in-flight transport, FIFO.
struct Transport {
    const CommModelConfig& cfg;
    StepTrace& trace;
    double free_at = 0.0;

    double launch(double earliest, double bytes) {
        const double start = std::max(earliest, free_at);
        const double end = start + allreduce_time(bytes, cfg.workers, cfg.bandwidth, cfg.latency);
        trace.events.push_back({start, EventKind::allreduce_start, bytes});
        trace.events.push_back({end, EventKind::allreduce_end, bytes});
        trace.comm_busy += end - start;
        trace.bytes_reduced += bytes;
        ++trace.messages;
        free_at = end;
        return end;
    }
};

/// Ready time of each layer's gradient under the reverse backward schedule.
inline std::vector<double> ready_times(const LayerProfile& p) {
    std::vector<double> ready(p.layers());
    double t = 0.0;
    for (std::size_t l = p.layers(); l-- > 0;) {
        t += p.backward_time[l];
        ready[l] = t;
    }
    return ready;
}

inline void run_static(const CommModelConfig& cfg, const std::vector<double>& ready, Transport& net) {
    const auto& s = cfg.profile.grad_bytes;
    double bytes = 0.0, last_ready = 0.0;
    bool open = false;
    auto flush = [&] {
        if (open && bytes > 0.0) net.launch(last_ready, bytes);
        bytes = 0.0;
        open = false;
    };
    for (std::size_t l = s.size(); l-- > 0;) {
        if (open && bytes + s[l] > cfg.bucket_bytes) flush();
        bytes += s[l];
        last_ready = ready[l];
        open = true;
    }
    flush();
}

inline void run_dynamic(const CommModelConfig& cfg, const std::vector<double>& ready, Transport& net) {
    const auto& s = cfg.profile.grad_bytes;
    const double negotiation = cfg.negotiation_cost * static_cast<double>(ceil_log2(cfg.workers));
    // Layers become ready in descending index order; `next` is the first not yet negotiated.
    std::size_t next = s.size();
    double tick = cfg.cycle_time;
    while (next > 0) {
        if (ready[next - 1] > tick) {
            // Idle cycles cost nothing; jump to the first tick that sees a ready tensor.
            tick += std::max(1.0, std::ceil((ready[next - 1] - tick) / cfg.cycle_time)) * cfg.cycle_time;
            continue;
        }
        double queued = 0.0;
        std::size_t stop = next;
        while (stop > 0 && ready[stop - 1] <= tick) queued += s[--stop];
        net.trace.events.push_back({tick, EventKind::negotiate, queued});
        const double agreed = tick + negotiation;
        double done = agreed;
        double chunk = 0.0;
        bool open = false;
        for (std::size_t l = next; l-- > stop;) {
            if (open && chunk + s[l] > cfg.fusion_bytes) {
                if (chunk > 0.0) done = net.launch(agreed, chunk);
                chunk = 0.0;
            }
            chunk += s[l];
            open = true;
        }
        if (chunk > 0.0) done = net.launch(agreed, chunk);
        next = stop;
        // The cycle loop performs its collectives before sleeping again.
        tick = std::max(tick + cfg.cycle_time, done);
    }
}

} // namespace sim_detail

/// One backward pass with gradient reduction. A single worker has nothing
/// to reduce, so K = 1 produces no communication events.
inline StepTrace simulate_step(const CommModelConfig& cfg) {
    cfg.validate();
    StepTrace trace;
    const auto ready = sim_detail::ready_times(cfg.profile);
    for (std::size_t l = ready.size(); l-- > 0;)
        trace.events.push_back({ready[l], EventKind::grad_ready, cfg.profile.grad_bytes[l]});
    trace.compute_time = cfg.profile.compute_time();

    sim_detail::Transport net{cfg, trace};
    if (cfg.workers > 1) {
        if (cfg.scheduler == Scheduler::static_bucket)
            sim_detail::run_static(cfg, ready, net);
        else
            sim_detail::run_dynamic(cfg, ready, net);
    }
    std::stable_sort(trace.events.begin(), trace.events.end(),
                     [](const Event& a, const Event& b) { return a.time < b.time; });
    trace.step_time = std::max(trace.compute_time, net.free_at);
    trace.exposed_comm = trace.step_time - trace.compute_time;
    return trace;
}

struct ScalingRow {
    std::size_t workers = 0;
    double step_time = 0.0;
    double throughput = 0.0; ///< samples per second across all workers
    double efficiency = 0.0; ///< throughput(K) / (K * throughput(1))
};

/// Weak scaling: each worker keeps `samples_per_step`, so the global batch
/// grows with K.
inline std::vector<ScalingRow> scaling_curve(CommModelConfig cfg, const std::vector<std::size_t>& worker_counts,
                                             double samples_per_step) {
    curato::detail::require(samples_per_step > 0.0, "scaling_curve: samples_per_step must be > 0");
    curato::detail::require(std::is_sorted(worker_counts.begin(), worker_counts.end()),
                            "scaling_curve: K list must be ascending");
    cfg.workers = 1;
    const double base = samples_per_step / simulate_step(cfg).step_time;
    std::vector<ScalingRow> rows;
    for (std::size_t k : worker_counts) {
        cfg.workers = k;
        const double step = simulate_step(cfg).step_time;
        const double thr = static_cast<double>(k) * samples_per_step / step;
        rows.push_back({k, step, thr, thr / (static_cast<double>(k) * base)});
    }
    return rows;
}

} // namespace curato::commsim
