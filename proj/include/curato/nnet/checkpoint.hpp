// Copyright (c) 2026, The curato authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "curato/nnet/model.hpp"

// NNP1 checkpoint, little-endian:
//   "NNP1" | u32 layer_count
//   per layer: u32 tensor_count
//     per tensor: u32 rank | u32 dims[rank] | f64 values[prod(dims)]
// Tensors follow ParameterSet order. Trainable/decay flags are implied by the
// architecture and restored from it on load.

namespace curato::nnet {

namespace ckpt_detail {

template <class T>
void put(std::vector<std::uint8_t>& out, T v) {
    std::uint8_t b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    out.insert(out.end(), b, b + sizeof(T));
}

template <class T>
T get(std::span<const std::uint8_t> bytes, std::size_t& pos) {
    if (pos + sizeof(T) > bytes.size()) detail::fail("checkpoint: truncated");
    T v;
    std::memcpy(&v, bytes.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

} // namespace ckpt_detail

inline std::vector<std::uint8_t> encode_checkpoint(const ParameterSet& p) {
    std::vector<std::uint8_t> out{'N', 'N', 'P', '1'};
    ckpt_detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(p.layers.size()));
    for (const auto& layer : p.layers) {
        ckpt_detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(layer.size()));
        for (const auto& t : layer) {
            ckpt_detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(t.dims.size()));
            for (auto d : t.dims) ckpt_detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
            const auto* raw = reinterpret_cast<const std::uint8_t*>(t.value.data());
            out.insert(out.end(), raw, raw + t.value.size() * sizeof(double));
        }
    }
    return out;
}

/// Decodes and checks every tensor shape against `model`.
inline ParameterSet decode_checkpoint(std::span<const std::uint8_t> bytes, const Model& model) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), "NNP1", 4) != 0) detail::fail("checkpoint: bad magic");
    ParameterSet expected = init_params(model, 0);
    std::size_t pos = 4;
    const auto layers = ckpt_detail::get<std::uint32_t>(bytes, pos);
    if (layers != expected.layers.size()) detail::fail("checkpoint: layer count does not match architecture");
    for (auto& layer : expected.layers) {
        const auto count = ckpt_detail::get<std::uint32_t>(bytes, pos);
        if (count != layer.size()) detail::fail("checkpoint: tensor count does not match architecture");
        for (auto& t : layer) {
            const auto rank = ckpt_detail::get<std::uint32_t>(bytes, pos);
            std::vector<std::size_t> dims(rank);
            for (auto& d : dims) d = ckpt_detail::get<std::uint32_t>(bytes, pos);
            if (dims != t.dims) detail::fail("checkpoint: tensor shape does not match architecture");
            const std::size_t nbytes = t.value.size() * sizeof(double);
            if (pos + nbytes > bytes.size()) detail::fail("checkpoint: truncated");
            std::memcpy(t.value.data(), bytes.data() + pos, nbytes);
            pos += nbytes;
        }
    }
    if (pos != bytes.size()) detail::fail("checkpoint: trailing bytes");
    return expected;
}

inline void save_checkpoint(const ParameterSet& p, const std::filesystem::path& path) {
    const auto bytes = encode_checkpoint(p);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw RuntimeError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw RuntimeError("write failed: " + path.string());
}

inline ParameterSet load_checkpoint(const std::filesystem::path& path, const Model& model) {
    std::ifstream in(path, std::ios::binary);
    if (!in) detail::fail("cannot open checkpoint " + path.string());
    const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return decode_checkpoint(bytes, model);
}

} // namespace curato::nnet
