// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <json.hpp>
#include <string>
#include <vector>

#include "mepg/geometry/geometry.hpp"
#include "mepg/moe/med.hpp"
#include "mepg/neural/gate.hpp"
#include "mepg/neural/train.hpp"
#include "mepg/scheduler/config.hpp"

// Two-style toy world: a mixed base model, blob and stripe experts
// fine-tuned from it, and a gate trained with all three frozen.
namespace mepg::experiment {

using Log = std::function<void(const std::string&)>;

struct ToyConfig {
    neural::DenoiserConfig model;
    diffusion::BetaSchedule schedule = diffusion::BetaSchedule::ScaledLinear;
    std::size_t base_samples = 512;
    std::size_t base_epochs = 4;
    std::size_t style_samples = 256;
    std::size_t finetune_epochs = 3;
    double lr = 3e-3;
    std::size_t gate_per_style = 64;
    /// Gate samples are noised at t in [1, gate_t_max]; 0 selects steps / 5.
    std::size_t gate_t_max = 0;
    neural::GateTrainConfig gate;
    std::uint64_t seed = 1;
};

inline const std::array<std::string, 2> kToyStyles{"blobs", "stripes"};

struct ToyModels {
    neural::DenoiserParams base, blobs, stripes;
    neural::GateParams gate;
    neural::TrainReport base_report, blobs_report, stripes_report;
    neural::GateTrainReport gate_report;
};

ToyModels train_toy_models(const ToyConfig& config, const Log& log = {});

/// Writes base/blobs/stripes/gate checkpoints and experts.yaml under `dir`.
moe::ExpertRegistry save_toy_models(const ToyModels& models, const std::filesystem::path& dir);

moe::ExpertSet toy_expert_set(const ToyModels& models);

/// Left half: blob expert. Right half: stripe expert.
geometry::Layout toy_layout();

struct Calibration {
    double blobs_mean = 0.0;
    double stripes_mean = 0.0;
    double threshold = 0.0;
};

/// Midpoint between the mean frequency statistic of plain samples from the
/// blob and stripe experts.
Calibration calibrate(const moe::ExpertSet& experts, std::size_t samples_per_style, std::uint64_t seed,
                      diffusion::BetaSchedule schedule = diffusion::BetaSchedule::ScaledLinear);

struct RegionScore {
    std::uint64_t seed = 0;
    std::string expected;
    std::string predicted;
    double statistic = 0.0;
};

struct AttributionReport {
    Calibration calibration;
    std::vector<RegionScore> regions;
    /// confusion[expected][predicted], indices follow kToyStyles.
    std::array<std::array<std::size_t, 2>, 2> confusion{};
    double accuracy = 0.0;
};

/// Generates `images` seeded toy layouts with cross_denoise and classifies
/// each region's style by thresholding the frequency statistic.
AttributionReport run_attribution(const moe::ExpertSet& experts, const scheduler::GenerationConfig& config,
                                  std::size_t images, const Calibration& calibration, const Log& log = {});

nlohmann::json to_json(const AttributionReport& report);

}  // namespace mepg::experiment
