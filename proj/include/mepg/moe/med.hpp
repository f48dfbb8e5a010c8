// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mepg/moe/registry.hpp"
#include "mepg/moe/routing.hpp"
#include "mepg/neural/denoiser.hpp"
#include "mepg/neural/gate.hpp"

namespace mepg::moe {

/// Registry plus the loaded parameters of every expert and, optionally, the
/// trained gate. Parameters are shared immutably between copies.
class ExpertSet {
public:
    ExpertSet() = default;
    /// Throws InvalidConfig when counts or shapes disagree.
    ExpertSet(ExpertRegistry registry, std::vector<std::shared_ptr<const neural::DenoiserParams>> params,
              std::optional<neural::GateParams> gate = std::nullopt);

    /// Loads every checkpoint (and the gate, if the registry names one).
    /// Throws MissingCheckpoint.
    static ExpertSet load(const ExpertRegistry& registry);

    const ExpertRegistry& registry() const noexcept { return m_registry; }
    std::size_t size() const noexcept { return m_params.size(); }
    const neural::DenoiserParams& params(std::size_t i) const { return *m_params.at(i); }
    std::vector<const neural::DenoiserParams*> all_params() const;
    const std::optional<neural::GateParams>& gate() const noexcept { return m_gate; }
    void set_gate(std::optional<neural::GateParams> gate);

    /// Registers a new expert; the gate gains a zero row for it.
    void add(ExpertEntry entry, std::shared_ptr<const neural::DenoiserParams> params);
    /// Drops an expert and its gate row.
    void remove(std::string_view expert_id);

private:
    void check() const;

    ExpertRegistry m_registry;
    std::vector<std::shared_ptr<const neural::DenoiserParams>> m_params;
    std::optional<neural::GateParams> m_gate;
};

struct MedOptions {
    std::size_t k = 2;
    GateActivation activation = GateActivation::Sigmoid;
};

struct SiteRoute {
    neural::Site site = neural::Site::Attn;
    RoutingDecision decision;
};

/// Gradient sinks for MoeSites; null members are skipped.
struct MoeGrads {
    std::vector<neural::DenoiserParams>* experts = nullptr;  // site grads per expert
    neural::GateParams* gate = nullptr;
};

/// Site hooks that route each MoE site through the gate and combine the
/// active experts' site weights. Gradients for every expert's site weights,
/// the gate, and the pooled-input path are produced on the way back.
class MoeSites final : public neural::SiteHooks {
public:
    MoeSites(std::span<const neural::DenoiserParams* const> experts, const neural::GateParams& gate,
             const MedOptions& options, std::span<const std::uint8_t> mask = {}, MoeGrads grads = {});

    Tensor forward(neural::Site site, const Tensor& in) override;
    Tensor backward(neural::Site site, const Tensor& in, const Tensor& d_out) override;

    const std::vector<SiteRoute>& routes() const noexcept { return m_routes; }
    std::size_t evaluations() const noexcept { return m_evaluations; }

private:
    struct Cache {
        bool valid = false;
        std::vector<double> pooled;
        RoutingDecision decision;
        std::vector<Tensor> outputs;  // aligned with decision.active_set
    };

    std::vector<const neural::DenoiserParams*> m_experts;
    const neural::GateParams& m_gate;
    MedOptions m_options;
    std::vector<std::uint8_t> m_mask;
    MoeGrads m_grads;
    std::array<Cache, neural::kNumSites> m_cache;
    std::vector<SiteRoute> m_routes;
    std::size_t m_evaluations = 0;
};

/// Result of one MED forward: the noise estimate and the routing made at
/// each site.
struct MedOutput {
    Tensor eps;
    std::vector<SiteRoute> routes;
};

/// Noise estimate with `host`'s backbone. Without a gate, or with a single
/// expert, the host's own site weights are used. The effective k is
/// min(options.k, number of experts). `mask` selects the pooling cells.
MedOutput med_forward(const ExpertSet& experts, std::size_t host, const Tensor& x_t, int t,
                      std::span<const int> cond, const MedOptions& options, std::span<const std::uint8_t> mask = {});

}  // namespace mepg::moe
