// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#include "mepg/moe/routing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mepg/core/error.hpp"
#include "mepg/neural/layers.hpp"

namespace mepg::moe {

std::string to_string(GateActivation activation) {
    return activation == GateActivation::Sigmoid ? "sigmoid" : "softmax";
}

GateActivation gate_activation_from_string(std::string_view name) {
    if (name == "sigmoid") return GateActivation::Sigmoid;
    if (name == "softmax") return GateActivation::Softmax;
    raise(ErrorCode::InvalidConfig, "unknown gate activation '" + std::string(name) + "'");
}

double RoutingDecision::normalized_weight(std::size_t index) const noexcept {
    for (std::size_t j = 0; j < active_set.size(); ++j) {
        if (active_set[j] == index) return normalized_weights[j];
    }
    return 0.0;
}

RoutingDecision route_logits(std::span<const double> logits, std::size_t k, GateActivation activation) {
    const std::size_t e = logits.size();
    if (k < 1 || k > e) {
        raise(ErrorCode::KOutOfRange, "k=" + std::to_string(k) + " with " + std::to_string(e) + " experts");
    }
    RoutingDecision d;
    d.activation = activation;
    d.raw_logits.assign(logits.begin(), logits.end());
    d.weights.resize(e);
    if (activation == GateActivation::Sigmoid) {
        for (std::size_t i = 0; i < e; ++i) d.weights[i] = neural::sigmoid(logits[i]);
    } else {
        const double peak = *std::max_element(logits.begin(), logits.end());
        double sum = 0.0;
        for (std::size_t i = 0; i < e; ++i) sum += d.weights[i] = std::exp(logits[i] - peak);
        for (double& w : d.weights) w /= sum;
    }
    std::vector<std::size_t> order(e);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return d.weights[a] > d.weights[b]; });
    d.active_set.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(d.active_set.begin(), d.active_set.end());
    double total = 0.0;
    for (std::size_t i : d.active_set) total += d.weights[i];
    for (std::size_t i : d.active_set) d.normalized_weights.push_back(d.weights[i] / total);
    return d;
}

RoutingDecision route(const neural::GateLinear& gate, const Tensor& x, std::size_t k,
                      std::span<const std::uint8_t> mask, GateActivation activation) {
    const std::vector<double> pooled = neural::average_pool(x, mask);
    return route_logits(neural::gate_logits(gate, pooled), k, activation);
}

Tensor moe_forward(std::span<const neural::SiteParams* const> experts, const Tensor& x,
                   const RoutingDecision& decision, std::size_t* evaluations) {
    if (decision.active_set.empty()) raise(ErrorCode::KOutOfRange, "routing decision has no active experts");
    for (std::size_t i : decision.active_set) {
        if (i >= experts.size()) {
            raise(ErrorCode::IndexOutOfRange, "routing selects expert " + std::to_string(i) + " of " +
                                                  std::to_string(experts.size()));
        }
    }
    auto eval = [&](std::size_t i) {
        if (evaluations != nullptr) ++*evaluations;
        return neural::pointwise(x, experts[i]->weight, experts[i]->bias);
    };
    if (decision.active_set.size() == 1) return eval(decision.active_set.front());

    Tensor y;
    Tensor lo, hi;
    for (std::size_t j = 0; j < decision.active_set.size(); ++j) {
        const Tensor out = eval(decision.active_set[j]);
        const double w = decision.normalized_weights[j];
        if (j == 0) {
            y = Tensor(out.shape());
            lo = out;
            hi = out;
        } else if (out.shape() != y.shape()) {
            raise(ErrorCode::ShapeMismatch, "expert outputs " + shape_to_string(out.shape()) + " vs " +
                                                shape_to_string(y.shape()));
        }
        for (std::size_t c = 0; c < out.size(); ++c) {
            y[c] += w * out[c];
            lo[c] = std::min(lo[c], out[c]);
            hi[c] = std::max(hi[c], out[c]);
        }
    }
    for (std::size_t c = 0; c < y.size(); ++c) y[c] = std::clamp(y[c], lo[c], hi[c]);
    return y;
}

}  // namespace mepg::moe
