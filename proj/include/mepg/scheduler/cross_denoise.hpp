// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <json.hpp>
#include <span>
#include <string>
#include <vector>

#include "mepg/core/tensor.hpp"
#include "mepg/geometry/geometry.hpp"
#include "mepg/moe/med.hpp"
#include "mepg/scheduler/config.hpp"

namespace mepg::scheduler {

enum class Stage { Local, Global };
std::string to_string(Stage stage);

/// Number of local-dominant steps, floor(p1 * N).
std::size_t local_steps(std::size_t steps, double p1);

/// Local iff t <= floor(p1 * N). Throws StepOutOfRange outside [1, N].
Stage stage_of(std::size_t t, std::size_t steps, double p1);

/// The kind a step actually runs as: local-phase steps divisible by g run
/// as global fusions when g > 0.
Stage executed_kind(std::size_t t, std::size_t steps, double p1, std::size_t interleave_g);

/// Fusion weights for a global-executed step. Index 0 is the global expert,
/// 1..M follow `region_areas` (mask cell counts). The left-to-right sum is
/// exactly 1.
std::vector<double> alpha_schedule(std::size_t t, const GenerationConfig& config,
                                   std::span<const std::size_t> region_areas);

/// sum_i alpha_i * proposal_i, clamped cellwise to the hull of the proposals
/// with non-zero weight. Throws AlphaNotNormalized when |sum - 1| > 1e-9 or
/// any weight is negative.
Tensor fuse_global(std::span<const Tensor> proposals, std::span<const double> alphas);

/// Mask composition of one local step. Cells covered by no region take
/// `global_proposal`. Throws MaskShapeMismatch.
Tensor compose_local(const Tensor& global_proposal, std::span<const Tensor> region_proposals,
                     std::span<const geometry::RegionMask> masks, OverlapMode mode = OverlapMode::Mean);

/// Registry index per region: expert_id, else style_tag, else the global
/// expert. Throws UnknownExpert for an expert_id not in the registry.
std::vector<std::size_t> resolve_region_experts(const geometry::Layout& layout, const moe::ExpertRegistry& registry,
                                                std::size_t global_expert);

std::size_t resolve_global_expert(const moe::ExpertRegistry& registry, const GenerationConfig& config);

struct StepRecord {
    std::size_t t = 0;
    Stage stage = Stage::Local;
    Stage executed = Stage::Local;
    std::vector<std::string> expert_ids;  // one per computed proposal
    std::vector<double> alphas;           // global-executed steps only
    nlohmann::json routing = nlohmann::json::array();
};

nlohmann::json step_record_to_json(const StepRecord& record);

struct CrossDenoiseResult {
    Tensor image;  // clamped to [-1, 1]
    std::vector<StepRecord> trace;
};

struct CrossDenoiseHooks {
    std::function<void(const StepRecord&, const Tensor& state)> on_step;
    /// Polled between steps; returning true aborts with Cancelled.
    std::function<bool()> cancelled;
};

/// Runs the full N-step reverse process over a validated layout.
CrossDenoiseResult cross_denoise(const geometry::Layout& layout, const moe::ExpertSet& experts,
                                 const GenerationConfig& config, const CrossDenoiseHooks& hooks = {});

/// Writes one JSON object per line.
std::string trace_to_jsonl(std::span<const StepRecord> trace);

}  // namespace mepg::scheduler
