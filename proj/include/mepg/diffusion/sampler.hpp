// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <span>

#include "mepg/core/tensor.hpp"
#include "mepg/diffusion/schedule.hpp"
#include "mepg/neural/denoiser.hpp"

namespace mepg::diffusion {

inline const Shape kDefaultImageShape{1, 32, 32};

/// x_N: the draw of stream (seed, 0).
Tensor initial_noise(std::uint64_t seed, const Shape& shape);
/// z for forward-counting step s of N: stream (seed, s), or zeros at s = N.
Tensor step_noise(std::uint64_t seed, std::size_t step, std::size_t steps, const Shape& shape);

/// Clamps every element to [-1, 1].
Tensor clamp_image(Tensor image);

/// Called after each step with (step, x).
using StepCallback = std::function<void(std::size_t, const Tensor&)>;

/// Plain reverse process with a single expert: starts from initial_noise and
/// applies N p_steps. Only the final image is clamped.
Tensor sample(const neural::DenoiserParams& expert, const NoiseSchedule& schedule, std::span<const int> cond,
              std::uint64_t seed, const Shape& shape = kDefaultImageShape, const StepCallback& on_step = {});

}  // namespace mepg::diffusion
