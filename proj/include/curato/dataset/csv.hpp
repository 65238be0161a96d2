// Copyright (c) 2026, The curato authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "curato/dataset/types.hpp"

namespace curato::dataset {

namespace csv_detail {

/// Splits one record. Supports double-quoted fields with "" escapes; no
/// embedded newlines.
inline std::vector<std::string> split_record(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur.push_back('"');
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

inline double parse_number(const std::string& raw, std::size_t line_no) {
    const std::string s = trim(raw);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size())
        curato::detail::fail("non-numeric cell '" + raw + "' on line " + std::to_string(line_no));
    return v;
}

} // namespace csv_detail

/// Label column placeholder resolved to the last field of the first row.
inline constexpr std::size_t kLastColumn = static_cast<std::size_t>(-1);

/// Rectangular numeric CSV, '.' decimal separator. Row order is preserved.
inline FeatureDataset parse_csv(std::istream& in, bool has_header, std::optional<std::size_t> label_column) {
    std::string line;
    std::size_t line_no = 0;
    std::size_t width = 0;
    std::vector<float> values;
    std::vector<Label> labels;
    std::size_t max_label = 0;
    std::size_t rows = 0;

    if (has_header) {
        if (!std::getline(in, line)) curato::detail::fail("empty dataset");
        ++line_no;
    }
    while (std::getline(in, line)) {
        ++line_no;
        if (csv_detail::trim(line).empty() || line == "\r") continue;
        const auto fields = csv_detail::split_record(line);
        if (rows == 0) {
            width = fields.size();
            if (label_column == kLastColumn) label_column = width - 1;
            if (label_column && *label_column >= width)
                curato::detail::fail("label column " + std::to_string(*label_column) + " out of range");
        } else if (fields.size() != width) {
            curato::detail::fail("ragged row on line " + std::to_string(line_no) + ": expected " +
                                 std::to_string(width) + " fields, got " + std::to_string(fields.size()));
        }
        for (std::size_t c = 0; c < fields.size(); ++c) {
            const double v = csv_detail::parse_number(fields[c], line_no);
            if (label_column && c == *label_column) {
                if (v < 0 || v != std::floor(v) || v > std::numeric_limits<Label>::max() - 1)
                    curato::detail::fail("label on line " + std::to_string(line_no) + " is not a class id");
                labels.push_back(static_cast<Label>(v));
                max_label = std::max<std::size_t>(max_label, labels.back());
            } else {
                if (!std::isfinite(v)) curato::detail::fail("non-finite value on line " + std::to_string(line_no));
                values.push_back(static_cast<float>(v));
            }
        }
        ++rows;
    }
    if (rows == 0) curato::detail::fail("empty dataset");
    const std::size_t d = width - (label_column ? 1 : 0);
    FeatureDataset ds;
    ds.values = Matrix<float>(rows, d, std::move(values));
    if (label_column) {
        ds.labels = std::move(labels);
        ds.class_count = static_cast<std::uint16_t>(max_label + 1);
    }
    ds.validate();
    return ds;
}

inline FeatureDataset load_csv(const std::filesystem::path& path, bool has_header,
                               std::optional<std::size_t> label_column) {
    std::ifstream in(path);
    if (!in) curato::detail::fail("cannot open " + path.string());
    auto ds = parse_csv(in, has_header, label_column);
    ds.provenance = "csv:" + path.filename().string();
    return ds;
}

/// Writes features (and a trailing `label` column when present) with a header
/// row. Nine significant digits make f32 values round-trip exactly.
inline void write_csv(const FeatureDataset& ds, std::ostream& out) {
    for (std::size_t c = 0; c < ds.d(); ++c) out << (c ? "," : "") << 'f' << c;
    if (ds.labels) out << ",label";
    out << '\n';
    char buf[32];
    for (std::size_t r = 0; r < ds.n(); ++r) {
        const auto row = ds.values.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) {
            std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(row[c]));
            out << (c ? "," : "") << buf;
        }
        if (ds.labels) out << ',' << (*ds.labels)[r];
        out << '\n';
    }
}

inline void save_csv(const FeatureDataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw RuntimeError("cannot open " + path.string() + " for writing");
    write_csv(ds, out);
}

} // namespace curato::dataset
