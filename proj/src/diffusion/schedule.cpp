// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#include "mepg/diffusion/schedule.hpp"

#include <algorithm>
#include <cmath>

#include "mepg/core/error.hpp"

namespace mepg::diffusion {

std::string to_string(BetaSchedule kind) { return kind == BetaSchedule::Linear ? "linear" : "scaled_linear"; }

BetaSchedule beta_schedule_from_string(std::string_view name) {
    if (name == "linear") return BetaSchedule::Linear;
    if (name == "scaled_linear") return BetaSchedule::ScaledLinear;
    raise(ErrorCode::InvalidConfig, "unknown beta schedule '" + std::string(name) + "'");
}

NoiseSchedule::NoiseSchedule(std::size_t steps, BetaSchedule kind)
    : m_steps(steps), m_kind(kind), m_betas(steps + 1, 0.0), m_alpha_bars(steps + 1, 1.0) {
    if (steps == 0) raise(ErrorCode::InvalidConfig, "noise schedule needs at least one step");
    const double scale = kind == BetaSchedule::ScaledLinear ? 1000.0 / static_cast<double>(steps) : 1.0;
    const double lo = 1e-4 * scale;
    const double hi = 0.02 * scale;
    for (std::size_t t = 1; t <= steps; ++t) {
        const double frac = steps == 1 ? 1.0 : static_cast<double>(t - 1) / static_cast<double>(steps - 1);
        m_betas[t] = std::min(lo + (hi - lo) * frac, 0.999);
        m_alpha_bars[t] = m_alpha_bars[t - 1] * (1.0 - m_betas[t]);
    }
}

void NoiseSchedule::check(std::size_t t, std::size_t lo) const {
    if (t < lo || t > m_steps) {
        raise(ErrorCode::StepOutOfRange,
              "diffusion time " + std::to_string(t) + " outside [" + std::to_string(lo) + "," +
                  std::to_string(m_steps) + "]");
    }
}

double NoiseSchedule::beta(std::size_t t) const {
    check(t, 1);
    return m_betas[t];
}

double NoiseSchedule::alpha(std::size_t t) const { return 1.0 - beta(t); }

double NoiseSchedule::alpha_bar(std::size_t t) const {
    check(t, 0);
    return m_alpha_bars[t];
}

Tensor q_sample(const NoiseSchedule& schedule, const Tensor& x0, std::size_t t, const Tensor& noise) {
    noise.require_shape(x0.shape(), "q_sample noise");
    if (t == 0) return x0;
    const double a = std::sqrt(schedule.alpha_bar(t));
    const double s = std::sqrt(1.0 - schedule.alpha_bar(t));
    Tensor out(x0.shape());
    for (std::size_t i = 0; i < x0.size(); ++i) out[i] = a * x0[i] + s * noise[i];
    return out;
}

Tensor p_step(const NoiseSchedule& schedule, const Tensor& eps_hat, const Tensor& x_t, std::size_t t,
              const Tensor& z) {
    eps_hat.require_shape(x_t.shape(), "p_step eps_hat");
    z.require_shape(x_t.shape(), "p_step z");
    const double beta = schedule.beta(t);
    const double coef = beta / std::sqrt(1.0 - schedule.alpha_bar(t));
    const double inv_sqrt_alpha = 1.0 / std::sqrt(1.0 - beta);
    const double sigma = std::sqrt(beta);
    Tensor out(x_t.shape());
    for (std::size_t i = 0; i < x_t.size(); ++i) {
        out[i] = (x_t[i] - coef * eps_hat[i]) * inv_sqrt_alpha + sigma * z[i];
    }
    return out;
}

int embedding_index(std::size_t t, std::size_t steps, std::size_t table_steps) {
    if (t < 1 || t > steps) {
        raise(ErrorCode::StepOutOfRange, "diffusion time " + std::to_string(t) + " outside schedule");
    }
    if (steps == table_steps) return static_cast<int>(t);
    const double scaled = std::round(static_cast<double>(t) * static_cast<double>(table_steps) /
                                     static_cast<double>(steps));
    return static_cast<int>(std::clamp(scaled, 1.0, static_cast<double>(table_steps)));
}

}  // namespace mepg::diffusion
