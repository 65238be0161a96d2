// Copyright (c) 2026, The curato authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cctype>
#include <sstream>
#include <string>
#include <vector>

#include "curato/nnet/model.hpp"

namespace curato::pipeline {

/// Hidden-layer stack written as comma-separated tokens. The classifier
/// (dense to the class count plus the softmax head) is appended on build.
///
///   dense:64   fully connected, 64 outputs
///   conv:16:3[:stride[:pad]]
///   pool:2[:stride]
///   bn | relu | flatten
struct ArchSpec {
    std::vector<std::string> tokens;
    std::vector<std::size_t> input_shape; ///< empty: flat, width taken from the data

    static ArchSpec parse(const std::string& text) {
        ArchSpec a;
        std::stringstream ss(text);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            tok.erase(std::remove_if(tok.begin(), tok.end(), [](unsigned char c) { return std::isspace(c); }), tok.end());
            if (!tok.empty()) a.tokens.push_back(tok);
        }
        (void)a.layers(); // validate tokens early
        return a;
    }

    [[nodiscard]] std::string str() const {
        std::string s;
        for (std::size_t i = 0; i < tokens.size(); ++i) s += (i ? "," : "") + tokens[i];
        return s;
    }

    /// Same stack with every dense width and conv channel count halved (at least 1).
    [[nodiscard]] ArchSpec halved() const {
        ArchSpec a = *this;
        for (auto& t : a.tokens) {
            auto parts = split(t);
            if (parts[0] == "dense" || parts[0] == "conv") {
                parts[1] = std::to_string(std::max<std::size_t>(1, number(parts[1], t) / 2));
                t = join(parts);
            }
        }
        return a;
    }

    [[nodiscard]] std::vector<nnet::LayerSpec> layers() const {
        std::vector<nnet::LayerSpec> out;
        for (const auto& t : tokens) {
            const auto p = split(t);
            const auto arg = [&](std::size_t i, std::size_t def) { return i < p.size() ? number(p[i], t) : def; };
            if (p[0] == "dense" && p.size() == 2)
                out.push_back(nnet::LayerSpec::dense(0, arg(1, 0)));
            else if (p[0] == "conv" && p.size() >= 3 && p.size() <= 5)
                out.push_back(nnet::LayerSpec::conv2d(0, arg(1, 0), arg(2, 0), arg(3, 1), arg(4, 0)));
            else if (p[0] == "pool" && p.size() >= 2 && p.size() <= 3)
                out.push_back(nnet::LayerSpec::maxpool2d(arg(1, 0), arg(2, arg(1, 0))));
            else if (p[0] == "bn" && p.size() == 1)
                out.push_back(nnet::LayerSpec::batchnorm());
            else if (p[0] == "relu" && p.size() == 1)
                out.push_back(nnet::LayerSpec::relu());
            else if (p[0] == "flatten" && p.size() == 1)
                out.push_back(nnet::LayerSpec::flatten());
            else
                curato::detail::fail("architecture: cannot parse layer '" + t + "'");
        }
        return out;
    }

    /// Builds the model for `width`-dimensional inputs and `classes` outputs.
    [[nodiscard]] nnet::Model build(std::size_t width, std::size_t classes) const {
        curato::detail::require(classes >= 1, "architecture: need at least one class");
        nnet::Shape in{input_shape.empty() ? std::vector<std::size_t>{width} : input_shape};
        curato::detail::require(in.numel() == width, "architecture: input_shape " + in.str() + " does not match data width " +
                                                         std::to_string(width));
        auto ls = layers();
        nnet::Shape cur = in;
        for (const auto& l : ls) cur = nnet::Model::output_shape(l, cur);
        if (!cur.is_flat()) ls.push_back(nnet::LayerSpec::flatten());
        ls.push_back(nnet::LayerSpec::dense(0, classes));
        ls.push_back(nnet::LayerSpec::head());
        return nnet::Model::build(in, std::move(ls));
    }

private:
    static std::vector<std::string> split(const std::string& t) {
        std::vector<std::string> parts;
        std::stringstream ss(t);
        std::string p;
        while (std::getline(ss, p, ':')) parts.push_back(p);
        curato::detail::require(!parts.empty(), "architecture: empty layer token");
        return parts;
    }
    static std::string join(const std::vector<std::string>& parts) {
        std::string s;
        for (std::size_t i = 0; i < parts.size(); ++i) s += (i ? ":" : "") + parts[i];
        return s;
    }
    static std::size_t number(const std::string& s, const std::string& tok) {
        curato::detail::require(!s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); }),
                                "architecture: bad number in '" + tok + "'");
        return std::stoul(s);
    }
};

} // namespace curato::pipeline
