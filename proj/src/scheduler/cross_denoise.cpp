// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#include "mepg/scheduler/cross_denoise.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <tuple>

#include "mepg/core/error.hpp"
#include "mepg/core/lexicon.hpp"
#include "mepg/diffusion/sampler.hpp"
#include "mepg/diffusion/schedule.hpp"

namespace mepg::scheduler {

using nlohmann::json;

std::string to_string(Stage stage) { return stage == Stage::Local ? "local" : "global"; }

std::size_t local_steps(std::size_t steps, double p1) {
    return static_cast<std::size_t>(std::floor(p1 * static_cast<double>(steps)));
}

Stage stage_of(std::size_t t, std::size_t steps, double p1) {
    if (t < 1 || t > steps) {
        raise(ErrorCode::StepOutOfRange, "step " + std::to_string(t) + " outside [1, " + std::to_string(steps) + "]");
    }
    return t <= local_steps(steps, p1) ? Stage::Local : Stage::Global;
}

Stage executed_kind(std::size_t t, std::size_t steps, double p1, std::size_t interleave_g) {
    const Stage stage = stage_of(t, steps, p1);
    if (stage == Stage::Local && interleave_g > 0 && t % interleave_g == 0) return Stage::Global;
    return stage;
}

std::vector<double> alpha_schedule(std::size_t t, const GenerationConfig& config,
                                   std::span<const std::size_t> region_areas) {
    const std::size_t n = config.steps;
    const double start = config.alpha_global_start;
    double global = start;
    if (config.alpha_mode == AlphaMode::LeadRamp) {
        const std::size_t first = local_steps(n, config.p1) + 1;
        if (t >= n) {
            global = 1.0;
        } else if (t >= first) {
            global = start + (1.0 - start) * static_cast<double>(t - first) / static_cast<double>(n - first);
        }
    }
    const std::size_t m = region_areas.size();
    std::vector<double> alphas(m + 1, 0.0);
    if (m == 0) {
        alphas[0] = 1.0;
        return alphas;
    }
    alphas[0] = global;
    const double rest = 1.0 - global;
    double total = 0.0;
    for (std::size_t a : region_areas) total += static_cast<double>(a);
    for (std::size_t i = 0; i + 1 < m; ++i) {
        const double share = total > 0.0 ? static_cast<double>(region_areas[i]) / total : 1.0 / static_cast<double>(m);
        alphas[i + 1] = rest * share;
    }
    // Weights live on a 2^-52 grid, so every partial sum is exact and the
    // last component can take up the remainder with no rounding at all.
    constexpr double kGrid = 0x1p52;
    double head = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        alphas[i] = std::floor(alphas[i] * kGrid) / kGrid;
        head += alphas[i];
    }
    while (head > 1.0) {
        auto big = std::max_element(alphas.begin(), alphas.end() - 1);
        *big -= 1.0 / kGrid;
        head -= 1.0 / kGrid;
    }
    alphas[m] = 1.0 - head;
    return alphas;
}

Tensor fuse_global(std::span<const Tensor> proposals, std::span<const double> alphas) {
    if (proposals.empty() || proposals.size() != alphas.size()) {
        raise(ErrorCode::ShapeMismatch, "fuse_global needs one weight per proposal");
    }
    double sum = 0.0;
    for (double a : alphas) {
        if (!(a >= 0.0)) raise(ErrorCode::AlphaNotNormalized, "negative fusion weight");
        sum += a;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        raise(ErrorCode::AlphaNotNormalized, "fusion weights sum to " + std::to_string(sum));
    }
    const Shape& shape = proposals.front().shape();
    for (const Tensor& p : proposals) p.require_shape(shape, "fuse_global proposal");

    Tensor out(shape);
    Tensor lo(shape), hi(shape);
    bool first = true;
    for (std::size_t i = 0; i < proposals.size(); ++i) {
        if (alphas[i] == 0.0) continue;
        const Tensor& p = proposals[i];
        for (std::size_t c = 0; c < out.size(); ++c) {
            out[c] += alphas[i] * p[c];
            lo[c] = first ? p[c] : std::min(lo[c], p[c]);
            hi[c] = first ? p[c] : std::max(hi[c], p[c]);
        }
        first = false;
    }
    for (std::size_t c = 0; c < out.size(); ++c) out[c] = std::clamp(out[c], lo[c], hi[c]);
    return out;
}

Tensor compose_local(const Tensor& global_proposal, std::span<const Tensor> region_proposals,
                     std::span<const geometry::RegionMask> masks, OverlapMode mode) {
    if (region_proposals.size() != masks.size()) {
        raise(ErrorCode::MaskShapeMismatch, "one mask per region proposal required");
    }
    const Shape& shape = global_proposal.shape();
    if (shape.size() != 3) raise(ErrorCode::ShapeMismatch, "proposals must be [C,H,W]");
    const std::size_t channels = shape[0], h = shape[1], w = shape[2], plane = h * w;
    std::vector<double> inv_area(masks.size(), 0.0);
    for (std::size_t r = 0; r < masks.size(); ++r) {
        region_proposals[r].require_shape(shape, "compose_local proposal");
        if (static_cast<std::size_t>(masks[r].grid_h()) != h || static_cast<std::size_t>(masks[r].grid_w()) != w) {
            raise(ErrorCode::MaskShapeMismatch, "mask " + std::to_string(masks[r].grid_h()) + "x" +
                                                    std::to_string(masks[r].grid_w()) + " does not match state " +
                                                    std::to_string(h) + "x" + std::to_string(w));
        }
        const std::size_t count = masks[r].count();
        if (count > 0) inv_area[r] = 1.0 / static_cast<double>(count);
    }

    Tensor out = global_proposal;
    std::vector<std::pair<double, double>> hits;  // (value, weight)
    for (std::size_t p = 0; p < plane; ++p) {
        for (std::size_t c = 0; c < channels; ++c) {
            hits.clear();
            for (std::size_t r = 0; r < masks.size(); ++r) {
                if (masks[r].cells()[p]) hits.emplace_back(region_proposals[r][c * plane + p], inv_area[r]);
            }
            if (hits.empty()) continue;
            double& cell = out[c * plane + p];
            if (mode == OverlapMode::Priority) {
                cell = hits.back().first;
                continue;
            }
            // Sorting makes the reduction independent of region order.
            std::sort(hits.begin(), hits.end());
            if (mode == OverlapMode::Mean) {
                double sum = 0.0;
                for (const auto& hv : hits) sum += hv.first;
                cell = sum / static_cast<double>(hits.size());
            } else {
                double num = 0.0, den = 0.0;
                for (const auto& [v, wt] : hits) {
                    num += wt * v;
                    den += wt;
                }
                cell = std::clamp(num / den, hits.front().first, hits.back().first);
            }
        }
    }
    return out;
}

std::size_t resolve_global_expert(const moe::ExpertRegistry& registry, const GenerationConfig& config) {
    if (!config.global_expert.empty()) return registry.require(config.global_expert);
    return registry.first_global();
}

std::vector<std::size_t> resolve_region_experts(const geometry::Layout& layout, const moe::ExpertRegistry& registry,
                                                std::size_t global_expert) {
    std::vector<std::size_t> out;
    out.reserve(layout.regions.size());
    for (const auto& region : layout.regions) {
        if (!region.expert_id.empty()) {
            out.push_back(registry.require(region.expert_id));
        } else if (auto styled = registry.find_style(region.style_tag); !region.style_tag.empty() && styled) {
            out.push_back(*styled);
        } else {
            out.push_back(global_expert);
        }
    }
    return out;
}

json step_record_to_json(const StepRecord& r) {
    return {{"t", r.t},
            {"stage", to_string(r.stage)},
            {"executed_kind", to_string(r.executed)},
            {"expert_ids", r.expert_ids},
            {"alphas", r.alphas},
            {"routing", r.routing}};
}

std::string trace_to_jsonl(std::span<const StepRecord> trace) {
    std::ostringstream os;
    for (const auto& r : trace) os << step_record_to_json(r).dump() << '\n';
    return os.str();
}

namespace {

/// One expert forward + reverse step. Proposals sharing (expert, tokens,
/// routing mask) are computed once per step.
struct ProposalKey {
    std::size_t expert;
    std::vector<int> cond;
    int mask;  // -1 = full frame

    friend bool operator<(const ProposalKey& a, const ProposalKey& b) {
        return std::tie(a.expert, a.cond, a.mask) < std::tie(b.expert, b.cond, b.mask);
    }
};

class StepContext {
public:
    StepContext(const moe::ExpertSet& experts, const diffusion::NoiseSchedule& schedule, const moe::MedOptions& med,
                const std::vector<std::vector<std::uint8_t>>& masks)
        : m_experts(experts), m_schedule(schedule), m_med(med), m_masks(masks) {}

    void begin(const Tensor* x, std::size_t tau, const Tensor* z, StepRecord* record) {
        m_x = x;
        m_tau = tau;
        m_z = z;
        m_record = record;
        m_cache.clear();
    }

    const Tensor& proposal(const ProposalKey& key) {
        auto it = m_cache.find(key);
        if (it != m_cache.end()) return it->second;
        const auto& host = m_experts.params(key.expert);
        const int emb = diffusion::embedding_index(m_tau, m_schedule.steps(), host.config.steps);
        std::span<const std::uint8_t> mask;
        if (key.mask >= 0) mask = m_masks[static_cast<std::size_t>(key.mask)];
        moe::MedOutput med = moe::med_forward(m_experts, key.expert, *m_x, emb, key.cond, m_med, mask);
        Tensor next = diffusion::p_step(m_schedule, med.eps, *m_x, m_tau, *m_z);
        next.check_finite("cross_denoise proposal");

        const std::string& id = m_experts.registry()[key.expert].expert_id;
        json summary = {{"expert", id}, {"sites", json::array()}};
        for (const auto& route : med.routes) {
            json active = json::array();
            for (std::size_t i : route.decision.active_set) {
                active.push_back(m_experts.registry()[i].expert_id);
            }
            summary["sites"].push_back({{"site", neural::to_string(route.site)},
                                        {"active", active},
                                        {"weights", route.decision.normalized_weights}});
        }
        m_record->expert_ids.push_back(id);
        m_record->routing.push_back(std::move(summary));
        return m_cache.emplace(key, std::move(next)).first->second;
    }

private:
    const moe::ExpertSet& m_experts;
    const diffusion::NoiseSchedule& m_schedule;
    moe::MedOptions m_med;
    const std::vector<std::vector<std::uint8_t>>& m_masks;
    const Tensor* m_x = nullptr;
    std::size_t m_tau = 0;
    const Tensor* m_z = nullptr;
    StepRecord* m_record = nullptr;
    std::map<ProposalKey, Tensor> m_cache;
};

}  // namespace

CrossDenoiseResult cross_denoise(const geometry::Layout& layout, const moe::ExpertSet& experts,
                                 const GenerationConfig& config, const CrossDenoiseHooks& hooks) {
    config.validate();
    if (experts.size() == 0) raise(ErrorCode::InvalidConfig, "no experts loaded");
    const auto& registry = experts.registry();
    const std::size_t global = resolve_global_expert(registry, config);
    const std::vector<std::size_t> region_experts = resolve_region_experts(layout, registry, global);

    const std::size_t channels = experts.params(global).config.image_channels;
    const int gh = layout.grid && layout.grid->h > 0 ? layout.grid->h : static_cast<int>(config.height);
    const int gw = layout.grid && layout.grid->w > 0 ? layout.grid->w : static_cast<int>(config.width);
    const Shape shape{channels, static_cast<std::size_t>(gh), static_cast<std::size_t>(gw)};

    const std::size_t m = layout.regions.size();
    std::vector<geometry::RegionMask> masks;
    std::vector<std::vector<std::uint8_t>> routing_masks;
    std::vector<int> mask_index(m, -1);
    std::vector<std::size_t> areas(m, 0);
    std::vector<std::vector<int>> region_cond(m);
    masks.reserve(m);
    for (std::size_t r = 0; r < m; ++r) {
        masks.push_back(geometry::rasterize(layout.regions[r].box, gh, gw));
        areas[r] = masks.back().count();
        region_cond[r] = lexicon::tokenize(layout.regions[r].prompt);
        // A full-frame mask pools exactly like no mask; share the cache key.
        if (areas[r] != static_cast<std::size_t>(gh) * static_cast<std::size_t>(gw)) {
            mask_index[r] = static_cast<int>(routing_masks.size());
            routing_masks.push_back(masks.back().cells());
        }
    }
    const std::vector<int> global_cond = lexicon::tokenize(layout.global_prompt);
    const ProposalKey global_key{global, global_cond, -1};
    auto region_key = [&](std::size_t r) { return ProposalKey{region_experts[r], region_cond[r], mask_index[r]}; };

    const std::size_t n = config.steps;
    const diffusion::NoiseSchedule schedule(n, config.schedule);
    const moe::MedOptions med{config.k, config.gate_activation};
    StepContext ctx(experts, schedule, med, routing_masks);

    CrossDenoiseResult result;
    result.trace.reserve(n);
    Tensor x = diffusion::initial_noise(config.seed, shape);
    for (std::size_t s = 1; s <= n; ++s) {
        if (hooks.cancelled && hooks.cancelled()) raise(ErrorCode::Cancelled, "generation cancelled");
        const std::size_t tau = diffusion::diffusion_time(s, n);
        const Tensor z = diffusion::step_noise(config.seed, s, n, shape);
        StepRecord record;
        record.t = s;
        record.stage = stage_of(s, n, config.p1);
        record.executed = executed_kind(s, n, config.p1, config.interleave_g);
        ctx.begin(&x, tau, &z, &record);

        Tensor next;
        if (record.executed == Stage::Local) {
            std::vector<Tensor> proposals;
            std::vector<geometry::RegionMask> used;
            std::vector<std::uint8_t> covered(static_cast<std::size_t>(gh) * static_cast<std::size_t>(gw), 0);
            for (std::size_t r = 0; r < m; ++r) {
                if (areas[r] == 0) continue;
                proposals.push_back(ctx.proposal(region_key(r)));
                used.push_back(masks[r]);
                for (std::size_t p = 0; p < covered.size(); ++p) covered[p] |= masks[r].cells()[p];
            }
            const bool full = std::all_of(covered.begin(), covered.end(), [](std::uint8_t v) { return v != 0; });
            if (proposals.empty()) {
                next = ctx.proposal(global_key);
            } else {
                // Fully covered frames never read the global proposal.
                const Tensor base = full ? proposals.front() : ctx.proposal(global_key);
                next = compose_local(base, proposals, used, config.overlap);
            }
        } else {
            const std::vector<double> alphas = alpha_schedule(s, config, areas);
            record.alphas = alphas;
            std::vector<Tensor> proposals;
            std::vector<double> weights;
            // Merge weights of proposals that resolve to the same computation.
            std::map<ProposalKey, std::size_t> slot;
            auto add = [&](const ProposalKey& key, double alpha) {
                if (alpha == 0.0) return;
                auto [it, inserted] = slot.emplace(key, proposals.size());
                if (inserted) {
                    proposals.push_back(ctx.proposal(key));
                    weights.push_back(alpha);
                } else {
                    weights[it->second] += alpha;
                }
            };
            add(global_key, alphas[0]);
            for (std::size_t r = 0; r < m; ++r) add(region_key(r), alphas[r + 1]);
            if (proposals.size() == 1) {
                next = proposals.front();
            } else {
                next = fuse_global(proposals, weights);
            }
        }
        x = std::move(next);
        x.check_finite("cross_denoise step");
        if (hooks.on_step) hooks.on_step(record, x);
        result.trace.push_back(std::move(record));
    }
    result.image = diffusion::clamp_image(std::move(x));
    return result;
}

}  // namespace mepg::scheduler
