// Copyright (c) 2026, The curato authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "curato/dataset/csv.hpp"
#include "curato/reduce/tsne.hpp"

namespace curato::reduce {

inline nlohmann::json to_json(const TsneConfig& c) {
    return {{"perplexity", c.perplexity},
            {"out_dim", TsneConfig::out_dim},
            {"iterations", c.iterations},
            {"exaggeration", c.exaggeration},
            {"exaggeration_iters", c.exaggeration_iters},
            {"learning_rate", c.learning_rate},
            {"momentum", c.momentum},
            {"final_momentum", c.final_momentum},
            {"momentum_switch", c.momentum_switch},
            {"theta", c.theta},
            {"seed", c.seed},
            {"entropy_tol", c.entropy_tol},
            {"max_bisection", c.max_bisection},
            {"init_sd", c.init_sd},
            {"kl_every", c.kl_every}};
}

/// Missing keys keep their defaults.
inline TsneConfig tsne_config_from_json(const nlohmann::json& j) {
    TsneConfig c;
    try {
        c.perplexity = j.value("perplexity", c.perplexity);
        c.iterations = j.value("iterations", c.iterations);
        c.exaggeration = j.value("exaggeration", c.exaggeration);
        c.exaggeration_iters = j.value("exaggeration_iters", c.exaggeration_iters);
        c.learning_rate = j.value("learning_rate", c.learning_rate);
        c.momentum = j.value("momentum", c.momentum);
        c.final_momentum = j.value("final_momentum", c.final_momentum);
        c.momentum_switch = j.value("momentum_switch", c.momentum_switch);
        c.theta = j.value("theta", c.theta);
        c.seed = j.value("seed", c.seed);
        c.entropy_tol = j.value("entropy_tol", c.entropy_tol);
        c.max_bisection = j.value("max_bisection", c.max_bisection);
        c.init_sd = j.value("init_sd", c.init_sd);
        c.kl_every = j.value("kl_every", c.kl_every);
    } catch (const nlohmann::json::exception& e) {
        curato::detail::fail(std::string("tsne config: ") + e.what());
    }
    return c;
}

/// idx,x,y,label with round-trip precision; label is blank for unlabeled points.
inline void write_embedding_csv(const Embedding& e, std::ostream& out) {
    out << "idx,x,y,label\n";
    char buf[96];
    for (std::size_t i = 0; i < e.n(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,", i, e.y(i, 0), e.y(i, 1));
        out << buf;
        if (!e.labels.empty()) out << e.labels[i];
        out << '\n';
    }
}

inline nlohmann::json embedding_sidecar(const Embedding& e) {
    nlohmann::json kl = nlohmann::json::array();
    for (const auto& s : e.kl) kl.push_back({{"iteration", s.iteration}, {"kl", s.kl}});
    return {{"n", e.n()}, {"seed", e.config.seed}, {"config", to_json(e.config)}, {"kl", kl}};
}

/// Writes `<path>` (CSV) and `<path>.json` (config snapshot and KL trace).
inline void save_embedding(const Embedding& e, const std::filesystem::path& path) {
    std::ofstream csv(path);
    if (!csv) throw RuntimeError("cannot write " + path.string());
    write_embedding_csv(e, csv);
    std::ofstream js(path.string() + ".json");
    if (!js) throw RuntimeError("cannot write " + path.string() + ".json");
    js << embedding_sidecar(e).dump(2) << '\n';
}

inline Embedding parse_embedding_csv(std::istream& in) {
    std::string line;
    curato::detail::require(static_cast<bool>(std::getline(in, line)), "embedding csv: empty input");
    const auto header = dataset::csv_detail::split_record(line);
    curato::detail::require(header.size() == 4 && dataset::csv_detail::trim(header[0]) == "idx" &&
                                dataset::csv_detail::trim(header[1]) == "x" &&
                                dataset::csv_detail::trim(header[2]) == "y" &&
                                dataset::csv_detail::trim(header[3]) == "label",
                            "embedding csv: header must be idx,x,y,label");
    std::vector<double> coords;
    std::vector<std::uint16_t> labels;
    std::size_t line_no = 1, row = 0, unlabeled = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (dataset::csv_detail::trim(line).empty()) continue;
        const auto f = dataset::csv_detail::split_record(line);
        curato::detail::require(f.size() == 4, "embedding csv: line " + std::to_string(line_no) + " needs 4 fields");
        const double idx = dataset::csv_detail::parse_number(f[0], line_no);
        curato::detail::require(idx == static_cast<double>(row),
                                "embedding csv: line " + std::to_string(line_no) + " is out of order");
        coords.push_back(dataset::csv_detail::parse_number(f[1], line_no));
        coords.push_back(dataset::csv_detail::parse_number(f[2], line_no));
        if (dataset::csv_detail::trim(f[3]).empty()) {
            ++unlabeled;
        } else {
            const double l = dataset::csv_detail::parse_number(f[3], line_no);
            curato::detail::require(l >= 0 && l <= 65535 && l == std::floor(l),
                                    "embedding csv: bad label on line " + std::to_string(line_no));
            labels.push_back(static_cast<std::uint16_t>(l));
        }
        ++row;
    }
    curato::detail::require(row > 0, "embedding csv: no rows");
    curato::detail::require(unlabeled == 0 || unlabeled == row, "embedding csv: labels must be all present or all blank");
    Embedding e;
    e.y = Matrix<double>(row, 2, std::move(coords));
    e.labels = std::move(labels);
    return e;
}

/// Reads the CSV and, when present, the JSON sidecar next to it.
inline Embedding load_embedding(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw RuntimeError("cannot open " + path.string());
    Embedding e = parse_embedding_csv(in);
    const std::filesystem::path side = path.string() + ".json";
    if (std::filesystem::exists(side)) {
        std::ifstream js(side);
        nlohmann::json j;
        try {
            js >> j;
        } catch (const nlohmann::json::exception& ex) {
            curato::detail::fail("embedding sidecar: " + std::string(ex.what()));
        }
        if (j.contains("config")) e.config = tsne_config_from_json(j["config"]);
        if (j.contains("kl"))
            for (const auto& s : j["kl"]) e.kl.push_back({s.at("iteration").get<std::size_t>(), s.at("kl").get<double>()});
    }
    return e;
}

} // namespace curato::reduce
