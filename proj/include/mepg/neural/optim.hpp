// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "mepg/core/tensor.hpp"

namespace mepg::neural {

class Adam {
public:
    explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : m_lr(lr), m_beta1(beta1), m_beta2(beta2), m_eps(eps) {}

    /// params[i] -= update(grads[i]). Moment buffers are created on first use.
    void step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads);

    double lr() const noexcept { return m_lr; }
    void set_lr(double lr) noexcept { m_lr = lr; }

private:
    double m_lr, m_beta1, m_beta2, m_eps;
    std::size_t m_t = 0;
    std::vector<Tensor> m_m, m_v;
};

double global_norm(const std::vector<const Tensor*>& grads);
/// Rescales grads so their global norm is at most `max_norm`; returns the
/// norm before clipping.
double clip_global_norm(const std::vector<Tensor*>& grads, double max_norm);

}  // namespace mepg::neural
