#pragma once

#include <charconv>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

#include "ogl/greedy.hpp"

namespace ogl {

// Locale-independent decimal rendering with 17 significant digits: enough to
// reproduce any double exactly on read-back, so CSV reports round-trip.
inline std::string fmt17(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    if (ec != std::errc()) throw std::logic_error("fmt17: conversion failed");
    return std::string(buf, ptr);
}

inline double parse_double(std::string_view s) {
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw std::invalid_argument("parse_double: bad number '" + std::string(s) + "'");
    return v;
}

inline nlohmann::json estimator_to_json(const Estimator& e) {
    nlohmann::json j;
    j["atom_indices"] = e.atom_indices;
    std::vector<double> coeffs(e.coefficients.data(), e.coefficients.data() + e.coefficients.size());
    j["coefficients"] = coeffs;
    j["k_final"] = e.k_final;
    if (std::isnan(e.delta_used))
        j["delta"] = nullptr;
    else
        j["delta"] = e.delta_used;
    j["M"] = e.truncation_M;
    j["termination_reason"] = to_string(e.termination_reason);
    j["dictionary_fingerprint"] = e.dictionary_fingerprint;
    return j;
}

inline Estimator estimator_from_json(const nlohmann::json& j) {
    Estimator e;
    e.atom_indices = j.at("atom_indices").get<std::vector<std::size_t>>();
    const auto coeffs = j.at("coefficients").get<std::vector<double>>();
    e.coefficients =
        Eigen::Map<const Eigen::VectorXd>(coeffs.data(), static_cast<Eigen::Index>(coeffs.size()));
    e.k_final = j.at("k_final").get<std::size_t>();
    e.delta_used = j.at("delta").is_null() ? std::numeric_limits<double>::quiet_NaN()
                                           : j.at("delta").get<double>();
    e.truncation_M = j.at("M").get<double>();
    const auto reason = termination_from_string(j.at("termination_reason").get<std::string>());
    if (!reason) throw std::invalid_argument("estimator_from_json: bad termination_reason");
    e.termination_reason = *reason;
    e.dictionary_fingerprint = j.at("dictionary_fingerprint").get<std::uint64_t>();
    if (e.atom_indices.size() != static_cast<std::size_t>(e.coefficients.size()) ||
        e.k_final != e.atom_indices.size())
        throw std::invalid_argument("estimator_from_json: inconsistent sizes");
    return e;
}

} // namespace ogl
