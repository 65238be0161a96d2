// Copyright (c) 2026, The curato authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "curato/commsim/sim.hpp"
#include "curato/core/toml.hpp"

namespace curato::commsim {

/// A simulation request: the model plus the K sweep.
struct SweepConfig {
    CommModelConfig model;
    std::vector<std::size_t> workers{1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1024};
    double samples_per_step = 32.0;
};

/// Reads a [commsim] table. The layer profile comes either from explicit
/// `grad_bytes` / `backward_time` arrays or from the geometric generator.
///
///   [commsim]
///   scheduler = "dynamic_queue"
///   workers = [1, 2, 4, 8]
///   [commsim.profile]
///   tensors = 50
///   total_bytes = 100e6
inline SweepConfig sweep_config_from_toml(const toml::table& root) {
    SweepConfig sc;
    const toml::table* t = cfg::subtable(root, "commsim");
    if (!t) return sc;
    cfg::only_keys(*t, "commsim",
                   {"scheduler", "workers", "samples_per_step", "bandwidth", "latency", "bucket_bytes", "fusion_bytes",
                    "cycle_time", "negotiation_cost", "profile"});
    auto& m = sc.model;
    std::string sched = to_string(m.scheduler);
    cfg::read(*t, "scheduler", sched);
    m.scheduler = scheduler_from_string(sched);
    cfg::read(*t, "workers", sc.workers);
    cfg::read(*t, "samples_per_step", sc.samples_per_step);
    cfg::read(*t, "bandwidth", m.bandwidth);
    cfg::read(*t, "latency", m.latency);
    cfg::read(*t, "bucket_bytes", m.bucket_bytes);
    cfg::read(*t, "fusion_bytes", m.fusion_bytes);
    cfg::read(*t, "cycle_time", m.cycle_time);
    cfg::read(*t, "negotiation_cost", m.negotiation_cost);
    if (const toml::table* p = cfg::subtable(*t, "profile")) {
        cfg::only_keys(*p, "commsim.profile",
                       {"tensors", "total_bytes", "ratio", "backward_total", "grad_bytes", "backward_time"});
        if (p->contains("grad_bytes") || p->contains("backward_time")) {
            curato::detail::require(p->contains("grad_bytes") && p->contains("backward_time"),
                                    "config: explicit profile needs both grad_bytes and backward_time");
            cfg::read(*p, "grad_bytes", m.profile.grad_bytes);
            cfg::read(*p, "backward_time", m.profile.backward_time);
        } else {
            std::size_t tensors = 50;
            double total = 100e6, ratio = 1.0, backward = 0.060;
            cfg::read(*p, "tensors", tensors);
            cfg::read(*p, "total_bytes", total);
            cfg::read(*p, "ratio", ratio);
            cfg::read(*p, "backward_total", backward);
            m.profile = geometric_profile(tensors, total, ratio, backward);
        }
    }
    curato::detail::require(!sc.workers.empty(), "config: workers list is empty");
    for (std::size_t k : sc.workers) curato::detail::require(k >= 1, "commsim: K must be >= 1");
    curato::detail::require(sc.samples_per_step > 0.0, "config: samples_per_step must be > 0");
    m.validate();
    return sc;
}

inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// time,kind,bytes
inline void write_trace_csv(const StepTrace& tr, std::ostream& out) {
    out << "time,kind,bytes\n";
    for (const auto& e : tr.events) out << fmt17(e.time) << ',' << to_string(e.kind) << ',' << fmt17(e.bytes) << '\n';
}

/// K,throughput,efficiency
inline void write_efficiency_csv(const std::vector<ScalingRow>& rows, std::ostream& out) {
    out << "K,throughput,efficiency\n";
    for (const auto& r : rows) out << r.workers << ',' << fmt17(r.throughput) << ',' << fmt17(r.efficiency) << '\n';
}

template <class Writer>
inline void write_file(const std::filesystem::path& path, Writer&& w) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw RuntimeError("cannot write " + path.string());
    w(out);
    if (!out) throw RuntimeError("write failed: " + path.string());
}

} // namespace curato::commsim
