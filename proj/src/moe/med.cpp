// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#include "mepg/moe/med.hpp"

#include <algorithm>

#include "mepg/core/error.hpp"
#include "mepg/neural/checkpoint.hpp"
#include "mepg/neural/layers.hpp"

namespace mepg::moe {

using neural::DenoiserParams;
using neural::GateParams;
using neural::Site;

ExpertSet::ExpertSet(ExpertRegistry registry, std::vector<std::shared_ptr<const DenoiserParams>> params,
                     std::optional<GateParams> gate)
    : m_registry(std::move(registry)), m_params(std::move(params)), m_gate(std::move(gate)) {
    check();
}

ExpertSet ExpertSet::load(const ExpertRegistry& registry) {
    std::vector<std::shared_ptr<const DenoiserParams>> params;
    for (const auto& e : registry.entries()) {
        if (!std::filesystem::exists(e.checkpoint)) {
            raise(ErrorCode::MissingCheckpoint, "expert '" + e.expert_id + "': " + e.checkpoint.string());
        }
        params.push_back(std::make_shared<const DenoiserParams>(neural::load_denoiser(e.checkpoint)));
    }
    std::optional<GateParams> gate;
    if (registry.gate_path()) gate = neural::load_gate(*registry.gate_path());
    return ExpertSet(registry, std::move(params), std::move(gate));
}

void ExpertSet::check() const {
    if (m_params.size() != m_registry.size()) {
        raise(ErrorCode::InvalidConfig, std::to_string(m_params.size()) + " parameter sets for " +
                                            std::to_string(m_registry.size()) + " registry entries");
    }
    for (const auto& p : m_params) {
        if (!p) raise(ErrorCode::InvalidConfig, "expert parameters missing");
        const auto& first = m_params.front()->config;
        if (p->config.channels != first.channels || p->config.image_channels != first.image_channels) {
            raise(ErrorCode::ShapeMismatch, "experts disagree on channel counts");
        }
    }
    if (m_gate) {
        if (m_gate->experts() != m_params.size()) {
            raise(ErrorCode::InvalidConfig, "gate has " + std::to_string(m_gate->experts()) + " outputs for " +
                                                std::to_string(m_params.size()) + " experts");
        }
        if (!m_params.empty() && m_gate->channels() != m_params.front()->config.channels) {
            raise(ErrorCode::ShapeMismatch, "gate input width differs from expert channels");
        }
    }
}

std::vector<const DenoiserParams*> ExpertSet::all_params() const {
    std::vector<const DenoiserParams*> out;
    for (const auto& p : m_params) out.push_back(p.get());
    return out;
}

void ExpertSet::set_gate(std::optional<GateParams> gate) {
    m_gate = std::move(gate);
    check();
}

void ExpertSet::add(ExpertEntry entry, std::shared_ptr<const DenoiserParams> params) {
    ExpertRegistry next = m_registry;
    next.add(std::move(entry));
    auto next_params = m_params;
    next_params.push_back(std::move(params));
    std::optional<GateParams> next_gate = m_gate;
    if (next_gate) next_gate->add_expert();
    ExpertSet candidate(std::move(next), std::move(next_params), std::move(next_gate));
    *this = std::move(candidate);
}

void ExpertSet::remove(std::string_view expert_id) {
    ExpertRegistry next = m_registry;
    const std::size_t index = next.remove(expert_id);
    auto next_params = m_params;
    next_params.erase(next_params.begin() + static_cast<std::ptrdiff_t>(index));
    std::optional<GateParams> next_gate = m_gate;
    if (next_gate) next_gate->remove_expert(index);
    ExpertSet candidate(std::move(next), std::move(next_params), std::move(next_gate));
    *this = std::move(candidate);
}

MoeSites::MoeSites(std::span<const DenoiserParams* const> experts, const GateParams& gate,
                   const MedOptions& options, std::span<const std::uint8_t> mask, MoeGrads grads)
    : m_experts(experts.begin(), experts.end()),
      m_gate(gate),
      m_options(options),
      m_mask(mask.begin(), mask.end()),
      m_grads(grads) {
    if (gate.experts() != m_experts.size()) raise(ErrorCode::InvalidConfig, "gate size differs from expert count");
    if (grads.experts != nullptr && grads.experts->size() != m_experts.size()) {
        raise(ErrorCode::InvalidConfig, "one gradient buffer per expert required");
    }
}

Tensor MoeSites::forward(Site site, const Tensor& in) {
    Cache& cache = m_cache[static_cast<std::size_t>(site)];
    cache.pooled = neural::average_pool(in, m_mask);
    cache.decision = route_logits(neural::gate_logits(m_gate.site(site), cache.pooled), m_options.k,
                                  m_options.activation);
    cache.outputs.clear();
    m_routes.push_back({site, cache.decision});
    cache.valid = true;
    const RoutingDecision& d = cache.decision;
    if (d.active_set.size() == 1) {
        ++m_evaluations;
        const auto& sp = m_experts[d.active_set.front()]->site(site);
        cache.outputs.push_back(neural::pointwise(in, sp.weight, sp.bias));
        return cache.outputs.front();
    }
    // Same arithmetic as moe_forward, keeping the expert outputs for backward.
    Tensor y, lo, hi;
    for (std::size_t j = 0; j < d.active_set.size(); ++j) {
        ++m_evaluations;
        const auto& sp = m_experts[d.active_set[j]]->site(site);
        cache.outputs.push_back(neural::pointwise(in, sp.weight, sp.bias));
        const Tensor& out = cache.outputs.back();
        if (j == 0) {
            y = Tensor(out.shape());
            lo = out;
            hi = out;
        }
        const double w = d.normalized_weights[j];
        for (std::size_t c = 0; c < out.size(); ++c) {
            y[c] += w * out[c];
            lo[c] = std::min(lo[c], out[c]);
            hi[c] = std::max(hi[c], out[c]);
        }
    }
    for (std::size_t c = 0; c < y.size(); ++c) y[c] = std::clamp(y[c], lo[c], hi[c]);
    return y;
}

Tensor MoeSites::backward(Site site, const Tensor& in, const Tensor& d_out) {
    Cache& cache = m_cache[static_cast<std::size_t>(site)];
    if (!cache.valid) raise(ErrorCode::InvalidConfig, "MoE backward before forward at site " + to_string(site));
    const RoutingDecision& d = cache.decision;
    const std::size_t active = d.active_set.size();
    const std::size_t e_count = m_experts.size();

    Tensor d_in(in.shape());
    // Expert branches: y = sum_j n_j O_j.
    std::vector<double> dn(active, 0.0);
    for (std::size_t j = 0; j < active; ++j) {
        const std::size_t i = d.active_set[j];
        const auto& sp = m_experts[i]->site(site);
        const Tensor& out = cache.outputs[j];
        double dot = 0.0;
        for (std::size_t c = 0; c < out.size(); ++c) dot += d_out[c] * out[c];
        dn[j] = dot;
        Tensor scaled(d_out.shape());
        const double n = d.normalized_weights[j];
        for (std::size_t c = 0; c < scaled.size(); ++c) scaled[c] = n * d_out[c];
        Tensor dw_scratch(sp.weight.shape()), db_scratch(sp.bias.shape());
        Tensor& gw = m_grads.experts ? (*m_grads.experts)[i].site(site).weight : dw_scratch;
        Tensor& gb = m_grads.experts ? (*m_grads.experts)[i].site(site).bias : db_scratch;
        const Tensor di = neural::pointwise_backward(in, sp.weight, scaled, gw, gb);
        for (std::size_t c = 0; c < d_in.size(); ++c) d_in[c] += di[c];
    }

    // Normalization n_j = w_j / S over the active set.
    double total = 0.0, mean_dn = 0.0;
    for (std::size_t j = 0; j < active; ++j) {
        total += d.weights[d.active_set[j]];
        mean_dn += d.normalized_weights[j] * dn[j];
    }
    std::vector<double> dw(e_count, 0.0);
    for (std::size_t j = 0; j < active; ++j) dw[d.active_set[j]] = (dn[j] - mean_dn) / total;

    // Activation.
    std::vector<double> dl(e_count, 0.0);
    if (d.activation == GateActivation::Sigmoid) {
        for (std::size_t i = 0; i < e_count; ++i) dl[i] = dw[i] * d.weights[i] * (1.0 - d.weights[i]);
    } else {
        double dot = 0.0;
        for (std::size_t i = 0; i < e_count; ++i) dot += d.weights[i] * dw[i];
        for (std::size_t i = 0; i < e_count; ++i) dl[i] = d.weights[i] * (dw[i] - dot);
    }

    // Gate linear map and the pooled-input path back into X.
    const auto& gate = m_gate.site(site);
    const std::size_t channels = cache.pooled.size();
    std::vector<double> d_pooled(channels, 0.0);
    for (std::size_t i = 0; i < e_count; ++i) {
        if (dl[i] == 0.0) continue;
        for (std::size_t c = 0; c < channels; ++c) d_pooled[c] += dl[i] * gate.weight[i * channels + c];
        if (m_grads.gate != nullptr) {
            auto& gg = m_grads.gate->site(site);
            gg.bias[i] += dl[i];
            for (std::size_t c = 0; c < channels; ++c) gg.weight[i * channels + c] += dl[i] * cache.pooled[c];
        }
    }
    const std::size_t plane = in.dim(1) * in.dim(2);
    std::size_t selected = 0;
    for (std::uint8_t v : m_mask) selected += v != 0;
    const bool full = selected == 0;
    const double inv = 1.0 / static_cast<double>(full ? plane : selected);
    for (std::size_t c = 0; c < channels; ++c) {
        const double g = d_pooled[c] * inv;
        if (g == 0.0) continue;
        double* row = d_in.data().data() + c * plane;
        for (std::size_t p = 0; p < plane; ++p) {
            if (full || m_mask[p] != 0) row[p] += g;
        }
    }
    return d_in;
}

MedOutput med_forward(const ExpertSet& experts, std::size_t host, const Tensor& x_t, int t,
                      std::span<const int> cond, const MedOptions& options, std::span<const std::uint8_t> mask) {
    const DenoiserParams& host_params = experts.params(host);
    MedOutput out;
    if (!experts.gate() || experts.size() == 1) {
        neural::OwnSites own(host_params);
        out.eps = neural::backbone_forward(host_params, x_t, t, cond, own);
        return out;
    }
    MedOptions effective = options;
    effective.k = std::min(options.k, experts.size());
    const auto params = experts.all_params();
    MoeSites sites(params, *experts.gate(), effective, mask);
    out.eps = neural::backbone_forward(host_params, x_t, t, cond, sites);
    out.routes = sites.routes();
    return out;
}

}  // namespace mepg::moe
