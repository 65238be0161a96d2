// Copyright (c) 2026, The curato authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "curato/core/hash.hpp"
#include "curato/dataset/types.hpp"

// FVEC layout, all little-endian, no padding:
//   "FVEC" | u32 version=1 | u32 n | u32 d | u8 has_labels | u16 class_count
//   | n*d f32 row-major | (has_labels) n u16 labels

namespace curato::dataset {

static_assert(std::endian::native == std::endian::little, "FVEC codec assumes a little-endian host");

inline constexpr std::uint32_t kFvecVersion = 1;
inline constexpr std::size_t kFvecHeaderBytes = 4 + 4 + 4 + 4 + 1 + 2;

class FormatError : public ValidationError {
public:
    enum class Kind { bad_magic, bad_version, truncated, trailing_bytes, empty_dataset, zero_dimension, non_finite, label_out_of_range, io };

    FormatError(Kind kind, const std::string& what) : ValidationError(what), kind_(kind) {}
    [[nodiscard]] Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

namespace io_detail {

template <class T>
void put(std::vector<std::uint8_t>& out, T v) {
    std::uint8_t buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.insert(out.end(), buf, buf + sizeof(T));
}

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    template <class T>
    T get() {
        if (pos_ + sizeof(T) > bytes_.size())
            throw FormatError(FormatError::Kind::truncated, "truncated FVEC payload");
        T v;
        std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }

    void need(std::size_t count) const {
        if (bytes_.size() - pos_ < count) throw FormatError(FormatError::Kind::truncated, "truncated FVEC payload");
    }

    [[nodiscard]] const std::uint8_t* cursor() const { return bytes_.data() + pos_; }
    void skip(std::size_t count) { pos_ += count; }
    [[nodiscard]] std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(FormatError::Kind::io, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace io_detail

/// Streams the FVEC encoding of `ds` into `sink(std::span<const std::uint8_t>)`.
template <class Sink>
void emit_fvec(const FeatureDataset& ds, Sink&& sink) {
    ds.validate();
    std::vector<std::uint8_t> head;
    head.insert(head.end(), {'F', 'V', 'E', 'C'});
    io_detail::put<std::uint32_t>(head, kFvecVersion);
    io_detail::put<std::uint32_t>(head, static_cast<std::uint32_t>(ds.n()));
    io_detail::put<std::uint32_t>(head, static_cast<std::uint32_t>(ds.d()));
    io_detail::put<std::uint8_t>(head, ds.labels ? 1 : 0);
    io_detail::put<std::uint16_t>(head, ds.class_count);
    sink(std::span<const std::uint8_t>(head));
    const auto* raw = reinterpret_cast<const std::uint8_t*>(ds.values.data().data());
    sink(std::span<const std::uint8_t>(raw, ds.values.size() * sizeof(float)));
    if (ds.labels) {
        const auto* lab = reinterpret_cast<const std::uint8_t*>(ds.labels->data());
        sink(std::span<const std::uint8_t>(lab, ds.labels->size() * sizeof(Label)));
    }
}

inline std::vector<std::uint8_t> encode_fvec(const FeatureDataset& ds) {
    std::vector<std::uint8_t> out;
    emit_fvec(ds, [&](std::span<const std::uint8_t> b) { out.insert(out.end(), b.begin(), b.end()); });
    return out;
}

inline FeatureDataset decode_fvec(std::span<const std::uint8_t> bytes) {
    using Kind = FormatError::Kind;
    if (bytes.size() < 4 || std::memcmp(bytes.data(), "FVEC", 4) != 0)
        throw FormatError(Kind::bad_magic, "bad magic: not an FVEC file");
    io_detail::Reader rd(bytes);
    rd.skip(4);
    const auto version = rd.get<std::uint32_t>();
    if (version != kFvecVersion)
        throw FormatError(Kind::bad_version, "unsupported FVEC version " + std::to_string(version));
    const auto n = rd.get<std::uint32_t>();
    const auto d = rd.get<std::uint32_t>();
    const auto has_labels = rd.get<std::uint8_t>();
    const auto class_count = rd.get<std::uint16_t>();
    if (n == 0) throw FormatError(Kind::empty_dataset, "empty dataset");
    if (d == 0) throw FormatError(Kind::zero_dimension, "dataset has zero feature dimension");

    const std::size_t count = std::size_t{n} * d;
    rd.need(count * sizeof(float));
    FeatureDataset ds;
    ds.values = Matrix<float>(n, d);
    std::memcpy(ds.values.data().data(), rd.cursor(), count * sizeof(float));
    rd.skip(count * sizeof(float));
    for (float v : ds.values.data())
        if (!std::isfinite(v)) throw FormatError(Kind::non_finite, "non-finite value in FVEC payload");

    ds.class_count = class_count;
    if (has_labels) {
        rd.need(std::size_t{n} * sizeof(std::uint16_t));
        ds.labels.emplace(n);
        for (auto& l : *ds.labels) {
            l = rd.get<std::uint16_t>();
            if (l >= class_count)
                throw FormatError(Kind::label_out_of_range, "label " + std::to_string(l) + " >= class_count " +
                                                                std::to_string(class_count));
        }
    }
    if (rd.remaining() != 0) throw FormatError(Kind::trailing_bytes, "trailing bytes after FVEC payload");
    return ds;
}

inline FeatureDataset load_fvec(const std::filesystem::path& path) {
    auto bytes = io_detail::read_file(path);
    auto ds = decode_fvec(bytes);
    ds.provenance = "fvec:" + path.filename().string();
    return ds;
}

inline void save_fvec(const FeatureDataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw RuntimeError("cannot open " + path.string() + " for writing");
    emit_fvec(ds, [&](std::span<const std::uint8_t> b) {
        out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
    });
    if (!out) throw RuntimeError("write failed: " + path.string());
}

/// FNV-1a over the FVEC encoding; provenance is not part of the identity.
inline std::uint64_t content_hash(const FeatureDataset& ds) {
    std::uint64_t h = kFnvOffset;
    emit_fvec(ds, [&](std::span<const std::uint8_t> b) { h = fnv1a64(b, h); });
    return h;
}

} // namespace curato::dataset
