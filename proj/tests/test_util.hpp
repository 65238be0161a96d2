// Copyright (c) 2026, The curato authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>

#include "curato/core/rng.hpp"
#include "curato/dataset/types.hpp"

namespace curato::test {

inline std::filesystem::path tmp_path(const std::string& name) {
    std::filesystem::path dir = CURATO_TEST_TMP;
    std::filesystem::create_directories(dir);
    return dir / name;
}

inline dataset::FeatureDataset random_dataset(std::size_t n, std::size_t d, std::uint16_t classes,
                                              std::uint64_t seed) {
    Rng rng(seed);
    dataset::FeatureDataset ds;
    ds.values = Matrix<float>(n, d);
    for (auto& v : ds.values.data()) v = static_cast<float>(rng.normal(0.0, 3.0));
    if (classes > 0) {
        ds.labels.emplace(n);
        for (auto& l : *ds.labels) l = static_cast<dataset::Label>(rng.below(classes));
        ds.class_count = classes;
    }
    return ds;
}

} // namespace curato::test
