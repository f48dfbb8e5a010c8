// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#include "mepg/diffusion/sampler.hpp"

#include <algorithm>

#include "mepg/core/rng.hpp"

namespace mepg::diffusion {

Tensor initial_noise(std::uint64_t seed, const Shape& shape) { return NoiseStream(seed, 0).tensor(shape); }

Tensor step_noise(std::uint64_t seed, std::size_t step, std::size_t steps, const Shape& shape) {
    if (step >= steps) return Tensor(shape);
    return NoiseStream(seed, static_cast<std::uint32_t>(step)).tensor(shape);
}

Tensor clamp_image(Tensor image) {
    for (double& v : image.data()) v = std::clamp(v, -1.0, 1.0);
    return image;
}

Tensor sample(const neural::DenoiserParams& expert, const NoiseSchedule& schedule, std::span<const int> cond,
              std::uint64_t seed, const Shape& shape, const StepCallback& on_step) {
    const std::size_t n = schedule.steps();
    Tensor x = initial_noise(seed, shape);
    for (std::size_t s = 1; s <= n; ++s) {
        const std::size_t tau = diffusion_time(s, n);
        const Tensor eps = neural::denoiser_forward(expert, x, embedding_index(tau, n, expert.config.steps), cond);
        x = p_step(schedule, eps, x, tau, step_noise(seed, s, n, shape));
        x.check_finite("sample step");
        if (on_step) on_step(s, x);
    }
    return clamp_image(std::move(x));
}

}  // namespace mepg::diffusion
