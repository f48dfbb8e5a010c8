// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mepg/core/tensor.hpp"
#include "mepg/neural/denoiser.hpp"
#include "mepg/neural/gate.hpp"

namespace mepg::moe {

enum class GateActivation { Sigmoid, Softmax };

std::string to_string(GateActivation activation);
GateActivation gate_activation_from_string(std::string_view name);

struct RoutingDecision {
    std::vector<double> raw_logits;
    /// sigmoid(logit) per expert (softmax over all experts in the ablation).
    std::vector<double> weights;
    /// Indices of the k largest weights, ascending.
    std::vector<std::size_t> active_set;
    /// weights[active_set[j]] / sum over the active set, aligned with active_set.
    std::vector<double> normalized_weights;
    GateActivation activation = GateActivation::Sigmoid;

    /// Normalized weight of expert `index`, 0 if inactive.
    double normalized_weight(std::size_t index) const noexcept;
};

/// Top-k selection over given logits; ties go to the lower index. Throws
/// KOutOfRange unless 1 <= k <= logits.size().
RoutingDecision route_logits(std::span<const double> logits, std::size_t k,
                             GateActivation activation = GateActivation::Sigmoid);

/// Routes on the gate applied to X average-pooled over `mask` (full frame
/// when empty).
RoutingDecision route(const neural::GateLinear& gate, const Tensor& x, std::size_t k,
                      std::span<const std::uint8_t> mask = {}, GateActivation activation = GateActivation::Sigmoid);

/// y = sum over the active set of normalized_w_i * Expert_i(X), summed in
/// index order and clamped per component to the active outputs' range so
/// rounding cannot leave the convex hull. A single active expert's output
/// is returned unchanged. Only active experts are evaluated; `evaluations`
/// is incremented once per evaluation when non-null.
Tensor moe_forward(std::span<const neural::SiteParams* const> experts, const Tensor& x,
                   const RoutingDecision& decision, std::size_t* evaluations = nullptr);

/// Counts its own expert evaluations across calls.
class SparseMoeBlock {
public:
    explicit SparseMoeBlock(std::vector<const neural::SiteParams*> experts) : m_experts(std::move(experts)) {}

    std::size_t size() const noexcept { return m_experts.size(); }
    Tensor forward(const Tensor& x, const RoutingDecision& decision) {
        return moe_forward(m_experts, x, decision, &m_evaluations);
    }
    std::size_t evaluations() const noexcept { return m_evaluations; }

private:
    std::vector<const neural::SiteParams*> m_experts;
    std::size_t m_evaluations = 0;
};

}  // namespace mepg::moe
