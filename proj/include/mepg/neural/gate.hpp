// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mepg/core/tensor.hpp"
#include "mepg/diffusion/schedule.hpp"
#include "mepg/neural/checkpoint.hpp"
#include "mepg/neural/denoiser.hpp"

namespace mepg::neural {

/// logits = weight * pooled + bias, weight [E, C], bias [E].
struct GateLinear {
    Tensor weight;
    Tensor bias;

    friend bool operator==(const GateLinear&, const GateLinear&) = default;
};

/// One linear gate per MoE site.
struct GateParams {
    std::array<GateLinear, kNumSites> sites;

    static GateParams zeros(std::size_t experts, std::size_t channels);
    static GateParams init(std::size_t experts, std::size_t channels, std::uint64_t seed);

    std::size_t experts() const noexcept { return sites[0].bias.size(); }
    std::size_t channels() const noexcept { return sites[0].weight.rank() == 2 ? sites[0].weight.dim(1) : 0; }
    const GateLinear& site(Site s) const noexcept { return sites[static_cast<std::size_t>(s)]; }
    GateLinear& site(Site s) noexcept { return sites[static_cast<std::size_t>(s)]; }

    /// Appends an expert with zero weights and bias.
    void add_expert();
    /// Drops expert `index`; IndexOutOfRange if absent.
    void remove_expert(std::size_t index);

    std::vector<DenoiserParams::Named> tensors();
    std::vector<DenoiserParams::ConstNamed> tensors() const;

    friend bool operator==(const GateParams&, const GateParams&) = default;
};

/// Channel means of a [C,H,W] map, restricted to cells where `mask` is
/// non-zero. An empty or all-zero mask pools the full frame.
std::vector<double> average_pool(const Tensor& in, std::span<const std::uint8_t> mask = {});

std::vector<double> gate_logits(const GateLinear& gate, std::span<const double> pooled);

void save_gate(const std::filesystem::path& path, const GateParams& gate, const CheckpointMeta& meta);
GateParams load_gate(const std::filesystem::path& path);

/// A noised toy image whose style is known.
struct LabeledSample {
    Tensor x_t;
    int t = 1;
    std::vector<int> cond;
    std::string label;
};

/// `per_style` samples of each style, noised at t drawn uniformly from
/// [1, t_max] and conditioned on a style-neutral prompt.
std::vector<LabeledSample> make_gate_dataset(std::span<const std::string> styles, std::size_t per_style,
                                             std::uint64_t seed, const diffusion::NoiseSchedule& schedule,
                                             std::size_t t_max);

/// Pooled site input seen by one host expert, with its routing target.
struct GateExample {
    Site site = Site::Attn;
    std::vector<double> pooled;
    std::vector<double> target;  // 1 for experts whose style matches, else 0
};

/// Runs every expert as host over each sample and records the pooled input
/// at both sites. Throws LabelUnknown when no expert carries a sample's label.
std::vector<GateExample> gate_features(std::span<const DenoiserParams> experts,
                                       std::span<const std::string> style_tags,
                                       std::span<const LabeledSample> samples);

/// Mean over examples of the summed per-expert binary cross-entropy between
/// sigmoid(logit) and target. Gradients accumulate into `grads` if non-null.
double gate_loss(const GateParams& gate, std::span<const GateExample> examples, GateParams* grads = nullptr);

/// Share of examples whose highest-weight expert is a target expert.
double routing_accuracy(const GateParams& gate, std::span<const GateExample> examples);

struct GateTrainConfig {
    std::size_t epochs = 400;
    double lr = 0.05;
    std::uint64_t seed = 7;
    double holdout_fraction = 0.25;
};

struct GateTrainReport {
    GateParams gate;
    double initial_loss = 0.0;
    double final_loss = 0.0;
    double heldout_accuracy = 0.0;
    std::size_t heldout_examples = 0;
    std::vector<std::string> expert_hashes_before;
    std::vector<std::string> expert_hashes_after;
};

/// Trains only the gate; the experts are read, hashed before and after, and
/// never written. Throws LabelUnknown, EmptyDataset or Diverged.
GateTrainReport train_gate(std::span<const DenoiserParams> experts, std::span<const std::string> style_tags,
                           std::span<const LabeledSample> samples, const GateTrainConfig& config);

}  // namespace mepg::neural
