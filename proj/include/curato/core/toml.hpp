// Copyright (c) 2026, The curato authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include <toml.hpp>

#include "curato/core/error.hpp"

namespace curato::cfg {

/// Parses a TOML document; syntax errors become ValidationError with the
/// source position.
inline toml::table parse_toml(const std::string& text, const std::string& origin = "config") {
    try {
        return toml::parse(text, origin);
    } catch (const toml::parse_error& e) {
        const auto& where = e.source().begin;
        throw ValidationError(origin + ":" + std::to_string(where.line) + ":" + std::to_string(where.column) + ": " +
                              std::string(e.description()));
    }
}

inline toml::table load_toml(const std::filesystem::path& path) {
    try {
        return toml::parse_file(path.string());
    } catch (const toml::parse_error& e) {
        const auto& where = e.source().begin;
        if (!std::filesystem::exists(path)) throw ValidationError("config file not found: " + path.string());
        throw ValidationError(path.string() + ":" + std::to_string(where.line) + ":" + std::to_string(where.column) +
                              ": " + std::string(e.description()));
    }
}

inline const toml::table* subtable(const toml::table& t, const std::string& key) {
    const auto* node = t.get(key);
    if (!node) return nullptr;
    const auto* tab = node->as_table();
    detail::require(tab != nullptr, "config: '" + key + "' must be a table");
    return tab;
}

/// Reads a number (integers are accepted where a float is expected).
inline void read(const toml::table& t, const std::string& key, double& out) {
    const auto* node = t.get(key);
    if (!node) return;
    if (const auto v = node->value<double>()) {
        out = *v;
        return;
    }
    detail::fail("config: '" + key + "' must be a number");
}

template <class Int>
    requires std::is_integral_v<Int>
inline void read(const toml::table& t, const std::string& key, Int& out) {
    const auto* node = t.get(key);
    if (!node) return;
    const auto v = node->as_integer();
    detail::require(v != nullptr, "config: '" + key + "' must be an integer");
    const std::int64_t x = v->get();
    if constexpr (std::is_unsigned_v<Int>) detail::require(x >= 0, "config: '" + key + "' must be >= 0");
    out = static_cast<Int>(x);
}

inline void read(const toml::table& t, const std::string& key, bool& out) {
    const auto* node = t.get(key);
    if (!node) return;
    const auto v = node->value<bool>();
    detail::require(v.has_value(), "config: '" + key + "' must be true or false");
    out = *v;
}

inline void read(const toml::table& t, const std::string& key, std::string& out) {
    const auto* node = t.get(key);
    if (!node) return;
    const auto v = node->value<std::string>();
    detail::require(v.has_value(), "config: '" + key + "' must be a string");
    out = *v;
}

template <class T>
inline void read(const toml::table& t, const std::string& key, std::vector<T>& out) {
    const auto* node = t.get(key);
    if (!node) return;
    const auto* arr = node->as_array();
    detail::require(arr != nullptr, "config: '" + key + "' must be an array");
    std::vector<T> v;
    for (const auto& el : *arr) {
        if constexpr (std::is_floating_point_v<T>) {
            const auto x = el.value<double>();
            detail::require(x.has_value(), "config: '" + key + "' must hold numbers");
            v.push_back(static_cast<T>(*x));
        } else if constexpr (std::is_integral_v<T>) {
            const auto* x = el.as_integer();
            detail::require(x != nullptr, "config: '" + key + "' must hold integers");
            if constexpr (std::is_unsigned_v<T>) detail::require(x->get() >= 0, "config: '" + key + "' must be >= 0");
            v.push_back(static_cast<T>(x->get()));
        } else {
            const auto x = el.value<std::string>();
            detail::require(x.has_value(), "config: '" + key + "' must hold strings");
            v.push_back(*x);
        }
    }
    out = std::move(v);
}

/// Rejects keys a section does not know, so typos do not pass silently.
inline void only_keys(const toml::table& t, const std::string& section, std::initializer_list<std::string_view> keys) {
    for (const auto& [k, v] : t) {
        bool known = false;
        for (auto allowed : keys) known = known || k.str() == allowed;
        detail::require(known, "config: unknown key '" + std::string(k.str()) + "' in [" + section + "]");
    }
}

} // namespace curato::cfg
