// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "mepg/diffusion/schedule.hpp"
#include "mepg/neural/datasets.hpp"
#include "mepg/neural/denoiser.hpp"

namespace mepg::neural {

struct TrainConfig {
    DenoiserConfig model;
    diffusion::BetaSchedule schedule = diffusion::BetaSchedule::ScaledLinear;
    std::size_t epochs = 30;
    std::size_t batch_size = 16;
    double lr = 3e-3;
    std::uint64_t seed = 1;
    /// Fraction of the dataset held out for the loss target.
    double holdout_fraction = 0.2;
    /// Noise draws per held-out image when measuring held-out loss.
    std::size_t holdout_draws = 4;
    /// Held-out loss must fall below this multiple of the initial loss.
    double target_ratio = 0.5;
    /// Probability of training a sample with an empty condition.
    double cond_dropout = 0.1;
    double grad_clip = 1.0;
};

struct TrainReport {
    DenoiserParams params;
    double initial_heldout_loss = 0.0;
    double final_heldout_loss = 0.0;
    std::vector<double> epoch_heldout_losses;
    std::size_t updates = 0;
    bool met_target = false;
};

/// Called after every epoch with (epoch, held-out loss).
using EpochCallback = std::function<void(std::size_t, double)>;

/// Trains a noise-prediction denoiser on `dataset`. Starts from `init` when
/// given (fine-tuning), otherwise from DenoiserParams::init(config.model, seed).
/// Throws EmptyDataset, InvalidConfig, or Diverged when a batch loss is not
/// finite or exceeds 10x the initial held-out loss.
TrainReport train_expert(const StyleDataset& dataset, const TrainConfig& config,
                         const std::optional<DenoiserParams>& init = std::nullopt,
                         const EpochCallback& on_epoch = {});

/// Deterministic (x_t, t, noise) draws over `samples` for loss evaluation.
std::vector<DenoiseExample> make_eval_examples(const std::vector<Sample>& samples,
                                               const diffusion::NoiseSchedule& schedule, std::size_t draws,
                                               std::uint64_t seed);

}  // namespace mepg::neural
