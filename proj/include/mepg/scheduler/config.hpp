// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <json.hpp>
#include <string>
#include <string_view>

#include "mepg/diffusion/schedule.hpp"
#include "mepg/moe/routing.hpp"

namespace mepg::scheduler {

/// lead-ramp: the global share grows from alpha_global_start to 1 over the
/// global phase. fixed: the global share is alpha_global_start at every
/// fused step.
enum class AlphaMode { LeadRamp, Fixed };

/// How overlapping regions combine during a local step. mean is the
/// default; priority lets the later region win; inverse-area weights each
/// covering region by 1/area so small regions keep their detail.
enum class OverlapMode { Mean, Priority, InverseArea };

std::string to_string(AlphaMode mode);
AlphaMode alpha_mode_from_string(std::string_view name);
std::string to_string(OverlapMode mode);
OverlapMode overlap_mode_from_string(std::string_view name);

inline constexpr std::size_t kMaxSteps = 1000;

struct GenerationConfig {
    std::size_t steps = 50;
    double p1 = 0.7;
    std::size_t k = 2;
    /// Every g-th step of the local phase runs as a global fusion; 0 disables.
    std::size_t interleave_g = 5;
    AlphaMode alpha_mode = AlphaMode::LeadRamp;
    double alpha_global_start = 0.5;
    std::uint64_t seed = 42;
    /// Global expert id; empty selects the registry's first global-capable expert.
    std::string global_expert;
    moe::GateActivation gate_activation = moe::GateActivation::Sigmoid;
    OverlapMode overlap = OverlapMode::Mean;
    diffusion::BetaSchedule schedule = diffusion::BetaSchedule::ScaledLinear;
    /// Image size when the layout carries no grid.
    std::size_t height = 32;
    std::size_t width = 32;

    /// Throws InvalidConfig naming the first offending field.
    void validate() const;
};

nlohmann::json config_to_json(const GenerationConfig& config);
/// Missing fields keep their defaults; unknown fields are rejected.
GenerationConfig config_from_json(const nlohmann::json& doc);

}  // namespace mepg::scheduler
