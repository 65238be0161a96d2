// Copyright (c) 2026, The curato authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <istream>
#include <sstream>
#include <string>

#include "curato/dataset/csv.hpp"
#include "curato/pipeline/run.hpp"
#include "curato/pipeline/sweep.hpp"

namespace curato::pipeline {

namespace report_detail {

inline std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string f(const char* fmt, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, fmt, v);
    return buf;
}

inline std::vector<std::string> fields(const std::string& line, std::size_t want, std::size_t line_no,
                                       const std::string& what) {
    auto out = dataset::csv_detail::split_record(line);
    curato::detail::require(out.size() == want, what + ": line " + std::to_string(line_no) + " needs " +
                                                    std::to_string(want) + " fields");
    for (auto& s : out) s = dataset::csv_detail::trim(s);
    return out;
}

inline std::uint64_t to_u64(const std::string& s, std::size_t line_no) {
    const double v = dataset::csv_detail::parse_number(s, line_no);
    curato::detail::require(v >= 0.0 && v == std::floor(v), "line " + std::to_string(line_no) + ": expected an integer");
    return static_cast<std::uint64_t>(std::stoull(s));
}

} // namespace report_detail

inline constexpr const char* kRunsHeader =
    "arm,seed,train_rows,removed,epochs,train_accuracy,test_accuracy,test_loss,generalization_gap,wall_seconds";

/// Lossless per-run dump.
inline void write_runs_csv(const ExperimentReport& r, std::ostream& out) {
    using report_detail::g17;
    out << kRunsHeader << '\n';
    for (const auto& a : r.runs)
        out << to_string(a.arm) << ',' << a.seed << ',' << a.train_rows << ',' << a.removed << ',' << a.epochs << ','
            << g17(a.train_accuracy) << ',' << g17(a.test_accuracy) << ',' << g17(a.test_loss) << ','
            << g17(a.generalization_gap()) << ',' << g17(a.wall_seconds) << '\n';
}

inline std::vector<ArmResult> parse_runs_csv(std::istream& in) {
    using namespace report_detail;
    std::string line;
    curato::detail::require(static_cast<bool>(std::getline(in, line)) && dataset::csv_detail::trim(line) == kRunsHeader,
                            "runs csv: unexpected header");
    std::vector<ArmResult> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (dataset::csv_detail::trim(line).empty()) continue;
        const auto p = fields(line, 10, line_no, "runs csv");
        ArmResult a;
        a.arm = arm_from_string(p[0]);
        a.seed = to_u64(p[1], line_no);
        a.train_rows = to_u64(p[2], line_no);
        a.removed = to_u64(p[3], line_no);
        a.epochs = to_u64(p[4], line_no);
        a.train_accuracy = dataset::csv_detail::parse_number(p[5], line_no);
        a.test_accuracy = dataset::csv_detail::parse_number(p[6], line_no);
        a.test_loss = dataset::csv_detail::parse_number(p[7], line_no);
        a.wall_seconds = dataset::csv_detail::parse_number(p[9], line_no);
        out.push_back(a);
    }
    return out;
}

inline constexpr const char* kSweepHeader = "batch,learning_rate,seed,test_accuracy,train_accuracy";

inline void write_sweep_csv(const SweepTable& t, std::ostream& out) {
    using report_detail::g17;
    out << kSweepHeader << '\n';
    for (const auto& r : t.rows)
        out << r.batch << ',' << g17(r.learning_rate) << ',' << r.seed << ',' << g17(r.test_accuracy) << ','
            << g17(r.train_accuracy) << '\n';
}

inline SweepTable parse_sweep_csv(std::istream& in) {
    using namespace report_detail;
    std::string line;
    curato::detail::require(static_cast<bool>(std::getline(in, line)) && dataset::csv_detail::trim(line) == kSweepHeader,
                            "sweep csv: unexpected header");
    SweepTable t;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (dataset::csv_detail::trim(line).empty()) continue;
        const auto p = fields(line, 5, line_no, "sweep csv");
        t.rows.push_back({to_u64(p[0], line_no), dataset::csv_detail::parse_number(p[1], line_no), to_u64(p[2], line_no),
                          dataset::csv_detail::parse_number(p[3], line_no),
                          dataset::csv_detail::parse_number(p[4], line_no)});
    }
    return t;
}

/// Mean and sample standard deviation of one arm's test accuracy.
inline std::pair<double, double> arm_stats(const ExperimentReport& r, Arm a, double ArmResult::* field) {
    const auto rs = r.of(a);
    double m = 0.0;
    for (const auto* x : rs) m += x->*field;
    m /= static_cast<double>(rs.size());
    double v = 0.0;
    for (const auto* x : rs) v += (x->*field - m) * (x->*field - m);
    return {m, rs.size() > 1 ? std::sqrt(v / static_cast<double>(rs.size() - 1)) : 0.0};
}

/// Human-readable summary. Accuracies are printed in percent.
inline std::string render_markdown(const ExperimentReport& r) {
    using report_detail::f;
    curato::detail::require(!r.runs.empty(), "report has no runs");
    std::string s = "# curato experiment report\n\n";
    s += "Source rows: " + std::to_string(r.source_rows) + ", held-out test rows: " + std::to_string(r.test_rows) + "\n\n";
    if (r.reduction) {
        s += "## Data reduction\n\nKept " + r.reduction->headline() + " of the training split.\n\n";
        s += r.reduction->markdown() + "\n";
    }
    if (r.outliers) {
        s += "## Injected outliers\n\n";
        s += "Outlier recall: " + f("%.4f", r.outliers->recall()) + " (" + std::to_string(r.outliers->flagged_outliers) +
             " of " + std::to_string(r.outliers->outliers) + ")\n";
        s += "Clean-point removal: " + f("%.4f", r.outliers->clean_removal()) + " (" +
             std::to_string(r.outliers->flagged_clean) + " of " + std::to_string(r.outliers->clean) + ")\n\n";
    }
    s += "## Arms\n\n| arm | runs | train rows | test acc % (mean ± sd) | train acc % | gap % |\n|---|---:|---:|---:|---:|---:|\n";
    for (Arm a : {Arm::full, Arm::random, Arm::network}) {
        const auto rs = r.of(a);
        if (rs.empty()) continue;
        const auto [tm, tsd] = arm_stats(r, a, &ArmResult::test_accuracy);
        const auto [trm, trsd] = arm_stats(r, a, &ArmResult::train_accuracy);
        s += "| " + to_string(a) + " | " + std::to_string(rs.size()) + " | " + std::to_string(rs.front()->train_rows) +
             " | " + f("%.2f", 100.0 * tm) + " ± " + f("%.2f", 100.0 * tsd) + " | " + f("%.2f", 100.0 * trm) + " | " +
             f("%.2f", 100.0 * (trm - tm)) + " |\n";
    }
    s += "\n## Runs\n\n| arm | seed | removed | test acc % | train acc % | seconds |\n|---|---:|---:|---:|---:|---:|\n";
    for (const auto& a : r.runs)
        s += "| " + to_string(a.arm) + " | " + std::to_string(a.seed) + " | " + std::to_string(a.removed) + " | " +
             f("%.2f", 100.0 * a.test_accuracy) + " | " + f("%.2f", 100.0 * a.train_accuracy) + " | " +
             f("%.2f", a.wall_seconds) + " |\n";
    return s;
}

inline std::string render_sweep_markdown(const SweepTable& t) {
    using report_detail::f;
    curato::detail::require(!t.rows.empty(), "sweep table is empty");
    const auto bs = t.batch_sizes();
    std::string s = "# Batch-size sweep (" + std::to_string(t.epochs) + " epochs, seed-mean test accuracy %)\n\n| lr |";
    for (auto b : bs) s += " b=" + std::to_string(b) + " |";
    s += " best |\n|---|";
    for (std::size_t i = 0; i <= bs.size(); ++i) s += "---:|";
    s += "\n";
    for (double lr : t.learning_rates()) {
        const auto curve = t.mean_curve(lr);
        s += "| " + f("%g", lr) + " |";
        for (auto b : bs) s += curve.count(b) ? " " + f("%.2f", 100.0 * curve.at(b)) + " |" : " |";
        s += " " + std::to_string(t.argmax_batch(lr)) + (t.interior_optimum(lr) ? " (interior)" : "") + " |\n";
    }
    return s;
}

/// report.md, runs.csv, and manifest.json when the network filter ran.
inline void write_report(const ExperimentReport& r, const std::filesystem::path& dir) {
    curato::detail::require(!r.runs.empty(), "report has no runs");
    std::filesystem::create_directories(dir);
    write_text(dir / "report.md", render_markdown(r));
    std::ostringstream runs;
    write_runs_csv(r, runs);
    write_text(dir / "runs.csv", runs.str());
    if (r.network_manifest) dataset::save_manifest(*r.network_manifest, dir / "manifest.json");
}

inline void write_sweep(const SweepTable& t, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::ostringstream csv;
    write_sweep_csv(t, csv);
    write_text(dir / "sweep.csv", csv.str());
    write_text(dir / "sweep.md", render_sweep_markdown(t));
}

} // namespace curato::pipeline
