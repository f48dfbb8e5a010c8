// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "mepg/core/tensor.hpp"

namespace mepg::diffusion {

/// `Linear` uses betas from 1e-4 to 0.02 regardless of N. `ScaledLinear`
/// multiplies those endpoints by 1000/N so short schedules still end near
/// pure noise.
enum class BetaSchedule { Linear, ScaledLinear };

std::string to_string(BetaSchedule kind);
BetaSchedule beta_schedule_from_string(std::string_view name);

/// Betas, alphas and cumulative alpha products indexed by diffusion time
/// t in [1, N]; alpha_bar(0) is 1.
class NoiseSchedule {
public:
    NoiseSchedule(std::size_t steps, BetaSchedule kind = BetaSchedule::ScaledLinear);

    std::size_t steps() const noexcept { return m_steps; }
    BetaSchedule kind() const noexcept { return m_kind; }
    double beta(std::size_t t) const;
    double alpha(std::size_t t) const;
    double alpha_bar(std::size_t t) const;

private:
    void check(std::size_t t, std::size_t lo) const;

    std::size_t m_steps;
    BetaSchedule m_kind;
    std::vector<double> m_betas;       // [0] unused
    std::vector<double> m_alpha_bars;  // [0] = 1
};

/// x_t = sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) noise; t = 0 returns x0.
Tensor q_sample(const NoiseSchedule& schedule, const Tensor& x0, std::size_t t, const Tensor& noise);

/// One reverse step from diffusion time t to t-1.
Tensor p_step(const NoiseSchedule& schedule, const Tensor& eps_hat, const Tensor& x_t, std::size_t t,
              const Tensor& z);

/// Row of a `table_steps`-entry timestep embedding used at diffusion time t
/// of an N-step schedule. Identity when N equals the table size.
int embedding_index(std::size_t t, std::size_t steps, std::size_t table_steps);

/// Diffusion time for forward-counting scheduler step s in [1, N].
inline std::size_t diffusion_time(std::size_t step, std::size_t steps) noexcept { return steps - step + 1; }

}  // namespace mepg::diffusion
