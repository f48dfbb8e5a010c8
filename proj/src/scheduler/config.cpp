// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#include "mepg/scheduler/config.hpp"

#include <cmath>
#include <set>

#include "mepg/core/error.hpp"

namespace mepg::scheduler {

using nlohmann::json;

std::string to_string(AlphaMode mode) { return mode == AlphaMode::LeadRamp ? "lead-ramp" : "fixed"; }

AlphaMode alpha_mode_from_string(std::string_view name) {
    if (name == "lead-ramp") return AlphaMode::LeadRamp;
    if (name == "fixed") return AlphaMode::Fixed;
    raise(ErrorCode::InvalidConfig, "unknown alpha_mode '" + std::string(name) + "'");
}

std::string to_string(OverlapMode mode) {
    switch (mode) {
        case OverlapMode::Mean: return "mean";
        case OverlapMode::Priority: return "priority";
        case OverlapMode::InverseArea: return "inverse-area";
    }
    return "mean";
}

OverlapMode overlap_mode_from_string(std::string_view name) {
    if (name == "mean") return OverlapMode::Mean;
    if (name == "priority") return OverlapMode::Priority;
    if (name == "inverse-area") return OverlapMode::InverseArea;
    raise(ErrorCode::InvalidConfig, "unknown overlap mode '" + std::string(name) + "'");
}

void GenerationConfig::validate() const {
    if (steps < 1 || steps > kMaxSteps) {
        raise(ErrorCode::InvalidConfig, "N must be in [1, " + std::to_string(kMaxSteps) + "], got " +
                                            std::to_string(steps));
    }
    if (!(p1 >= 0.0 && p1 <= 1.0)) raise(ErrorCode::InvalidConfig, "p1 must be in [0, 1]");
    if (k < 1) raise(ErrorCode::InvalidConfig, "k must be at least 1");
    if (!(alpha_global_start >= 0.0 && alpha_global_start <= 1.0)) {
        raise(ErrorCode::InvalidConfig, "alpha_global_start must be in [0, 1]");
    }
    if (height < 4 || width < 4 || height > 512 || width > 512) {
        raise(ErrorCode::InvalidConfig, "image size must be within [4, 512]");
    }
}

json config_to_json(const GenerationConfig& c) {
    return {{"N", c.steps},
            {"p1", c.p1},
            {"k", c.k},
            {"interleave_g", c.interleave_g},
            {"alpha_mode", to_string(c.alpha_mode)},
            {"alpha_global_start", c.alpha_global_start},
            {"seed", c.seed},
            {"global_expert", c.global_expert},
            {"gate_activation", moe::to_string(c.gate_activation)},
            {"overlap", to_string(c.overlap)},
            {"schedule", diffusion::to_string(c.schedule)},
            {"height", c.height},
            {"width", c.width}};
}

GenerationConfig config_from_json(const json& doc) {
    if (!doc.is_object()) raise(ErrorCode::InvalidConfig, "config must be a JSON object");
    static const std::set<std::string> known{"N", "p1", "k", "interleave_g", "alpha_mode", "alpha_global_start",
                                             "seed", "global_expert", "gate_activation", "overlap", "schedule",
                                             "height", "width"};
    for (const auto& [key, value] : doc.items()) {
        if (!known.count(key)) raise(ErrorCode::InvalidConfig, "unknown config field '" + key + "'");
    }
    GenerationConfig c;
    try {
        auto count = [&](const char* key, std::size_t& out) {
            if (!doc.contains(key)) return;
            const auto& v = doc.at(key);
            if (!v.is_number_integer() || v.get<long long>() < 0) {
                raise(ErrorCode::InvalidConfig, std::string(key) + " must be a non-negative integer");
            }
            out = v.get<std::size_t>();
        };
        count("N", c.steps);
        count("k", c.k);
        count("interleave_g", c.interleave_g);
        count("height", c.height);
        count("width", c.width);
        if (doc.contains("seed")) {
            const auto& v = doc.at("seed");
            if (!v.is_number_integer()) raise(ErrorCode::InvalidConfig, "seed must be an integer");
            c.seed = v.is_number_unsigned() ? v.get<std::uint64_t>() : static_cast<std::uint64_t>(v.get<long long>());
        }
        if (doc.contains("p1")) c.p1 = doc.at("p1").get<double>();
        if (doc.contains("alpha_global_start")) c.alpha_global_start = doc.at("alpha_global_start").get<double>();
        if (doc.contains("alpha_mode")) c.alpha_mode = alpha_mode_from_string(doc.at("alpha_mode").get<std::string>());
        if (doc.contains("global_expert")) c.global_expert = doc.at("global_expert").get<std::string>();
        if (doc.contains("gate_activation")) {
            c.gate_activation = moe::gate_activation_from_string(doc.at("gate_activation").get<std::string>());
        }
        if (doc.contains("overlap")) c.overlap = overlap_mode_from_string(doc.at("overlap").get<std::string>());
        if (doc.contains("schedule")) {
            c.schedule = diffusion::beta_schedule_from_string(doc.at("schedule").get<std::string>());
        }
    } catch (const json::exception& e) {
        raise(ErrorCode::InvalidConfig, std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

}  // namespace mepg::scheduler
