// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#include "mepg/neural/optim.hpp"

#include <cmath>

#include "mepg/core/error.hpp"

namespace mepg::neural {

void Adam::step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads) {
    if (params.size() != grads.size()) raise(ErrorCode::ShapeMismatch, "Adam: params/grads count differ");
    if (m_m.empty()) {
        for (const Tensor* p : params) {
            m_m.emplace_back(p->shape());
            m_v.emplace_back(p->shape());
        }
    }
    if (m_m.size() != params.size()) raise(ErrorCode::ShapeMismatch, "Adam: parameter list changed");
    ++m_t;
    const double c1 = 1.0 - std::pow(m_beta1, static_cast<double>(m_t));
    const double c2 = 1.0 - std::pow(m_beta2, static_cast<double>(m_t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i];
        const Tensor& g = *grads[i];
        g.require_shape(p.shape(), "Adam gradient");
        for (std::size_t j = 0; j < p.size(); ++j) {
            m_m[i][j] = m_beta1 * m_m[i][j] + (1.0 - m_beta1) * g[j];
            m_v[i][j] = m_beta2 * m_v[i][j] + (1.0 - m_beta2) * g[j] * g[j];
            p[j] -= m_lr * (m_m[i][j] / c1) / (std::sqrt(m_v[i][j] / c2) + m_eps);
        }
    }
}

double global_norm(const std::vector<const Tensor*>& grads) {
    double sq = 0.0;
    for (const Tensor* g : grads) {
        for (double v : g->data()) sq += v * v;
    }
    return std::sqrt(sq);
}

double clip_global_norm(const std::vector<Tensor*>& grads, double max_norm) {
    const double norm = global_norm(std::vector<const Tensor*>(grads.begin(), grads.end()));
    if (max_norm > 0.0 && norm > max_norm) {
        const double scale = max_norm / norm;
        for (Tensor* g : grads) {
            for (double& v : g->data()) v *= scale;
        }
    }
    return norm;
}

}  // namespace mepg::neural
