// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#include "mepg/neural/gate.hpp"

#include <algorithm>
#include <cmath>

#include "mepg/core/error.hpp"
#include "mepg/core/lexicon.hpp"
#include "mepg/core/rng.hpp"
#include "mepg/neural/datasets.hpp"
#include "mepg/neural/layers.hpp"
#include "mepg/neural/optim.hpp"

namespace mepg::neural {

GateParams GateParams::zeros(std::size_t experts, std::size_t channels) {
    if (experts == 0 || channels == 0) raise(ErrorCode::InvalidConfig, "gate needs experts and channels");
    GateParams g;
    for (auto& s : g.sites) s = {Tensor({experts, channels}), Tensor({experts})};
    return g;
}

GateParams GateParams::init(std::size_t experts, std::size_t channels, std::uint64_t seed) {
    GateParams g = zeros(experts, channels);
    Rng rng(seed, 0x6A7E);
    const double scale = 0.1 / std::sqrt(static_cast<double>(channels));
    for (auto& s : g.sites) {
        for (double& v : s.weight.data()) v = rng.normal() * scale;
    }
    return g;
}

void GateParams::add_expert() {
    const std::size_t e = experts(), c = channels();
    for (auto& s : sites) {
        std::vector<double> w(s.weight.values());
        w.resize((e + 1) * c, 0.0);
        std::vector<double> b(s.bias.values());
        b.push_back(0.0);
        s = {Tensor({e + 1, c}, std::move(w)), Tensor({e + 1}, std::move(b))};
    }
}

void GateParams::remove_expert(std::size_t index) {
    const std::size_t e = experts(), c = channels();
    if (index >= e) raise(ErrorCode::IndexOutOfRange, "gate has no expert " + std::to_string(index));
    if (e == 1) raise(ErrorCode::InvalidConfig, "gate must keep at least one expert");
    for (auto& s : sites) {
        std::vector<double> w(s.weight.values());
        w.erase(w.begin() + static_cast<std::ptrdiff_t>(index * c),
                w.begin() + static_cast<std::ptrdiff_t>((index + 1) * c));
        std::vector<double> b(s.bias.values());
        b.erase(b.begin() + static_cast<std::ptrdiff_t>(index));
        s = {Tensor({e - 1, c}, std::move(w)), Tensor({e - 1}, std::move(b))};
    }
}

std::vector<DenoiserParams::Named> GateParams::tensors() {
    return {{"gate.attn.w", &sites[0].weight},
            {"gate.attn.b", &sites[0].bias},
            {"gate.ff.w", &sites[1].weight},
            {"gate.ff.b", &sites[1].bias}};
}

std::vector<DenoiserParams::ConstNamed> GateParams::tensors() const {
    std::vector<DenoiserParams::ConstNamed> out;
    for (auto& n : const_cast<GateParams*>(this)->tensors()) out.push_back({n.name, n.tensor});
    return out;
}

std::vector<double> average_pool(const Tensor& in, std::span<const std::uint8_t> mask) {
    if (in.rank() != 3) raise(ErrorCode::ShapeMismatch, "average_pool expects [C,H,W]");
    const std::size_t channels = in.dim(0), plane = in.dim(1) * in.dim(2);
    if (!mask.empty() && mask.size() != plane) {
        raise(ErrorCode::MaskShapeMismatch, "pool mask has " + std::to_string(mask.size()) + " cells, map has " +
                                                std::to_string(plane));
    }
    const std::size_t selected = mask.empty() ? 0 : static_cast<std::size_t>(std::count_if(
                                                        mask.begin(), mask.end(), [](auto v) { return v != 0; }));
    const bool full = selected == 0;
    const double inv = 1.0 / static_cast<double>(full ? plane : selected);
    std::vector<double> out(channels, 0.0);
    for (std::size_t c = 0; c < channels; ++c) {
        const double* row = in.data().data() + c * plane;
        double sum = 0.0;
        for (std::size_t p = 0; p < plane; ++p) {
            if (full || mask[p] != 0) sum += row[p];
        }
        out[c] = sum * inv;
    }
    return out;
}

std::vector<double> gate_logits(const GateLinear& gate, std::span<const double> pooled) {
    const std::size_t e = gate.bias.size();
    const std::size_t c = pooled.size();
    if (gate.weight.rank() != 2 || gate.weight.dim(0) != e || gate.weight.dim(1) != c) {
        raise(ErrorCode::ShapeMismatch, "gate weight " + shape_to_string(gate.weight.shape()) + " vs input of " +
                                            std::to_string(c) + " channels");
    }
    std::vector<double> logits(e);
    for (std::size_t i = 0; i < e; ++i) {
        double acc = gate.bias[i];
        for (std::size_t j = 0; j < c; ++j) acc += gate.weight[i * c + j] * pooled[j];
        logits[i] = acc;
    }
    return logits;
}

void save_gate(const std::filesystem::path& path, const GateParams& gate, const CheckpointMeta& meta) {
    NamedTensors named;
    for (const auto& n : gate.tensors()) named.emplace_back(n.name, *n.tensor);
    write_tensors(path, named);
    CheckpointMeta m = meta;
    m.kind = "gate";
    write_meta(path, m);
}

GateParams load_gate(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) raise(ErrorCode::MissingCheckpoint, path.string());
    const NamedTensors named = read_tensors(path);
    GateParams g;
    for (auto& n : g.tensors()) {
        const auto it = std::find_if(named.begin(), named.end(), [&](const auto& e) { return e.first == n.name; });
        if (it == named.end()) raise(ErrorCode::Format, "gate checkpoint lacks " + n.name);
        *n.tensor = it->second;
    }
    const std::size_t e = g.sites[0].bias.size();
    for (const auto& s : g.sites) {
        if (s.weight.rank() != 2 || s.weight.dim(0) != e || s.bias.size() != e ||
            s.weight.dim(1) != g.sites[0].weight.dim(1)) {
            raise(ErrorCode::Format, "gate checkpoint shapes disagree");
        }
    }
    return g;
}

std::vector<LabeledSample> make_gate_dataset(std::span<const std::string> styles, std::size_t per_style,
                                             std::uint64_t seed, const diffusion::NoiseSchedule& schedule,
                                             std::size_t t_max) {
    t_max = std::clamp<std::size_t>(t_max, 1, schedule.steps());
    Rng rng(seed, 0x6A7D);
    const std::vector<int> neutral = lexicon::tokenize(style_prompt("mixed"));
    std::vector<LabeledSample> out;
    for (std::size_t i = 0; i < per_style; ++i) {
        for (const std::string& style : styles) {
            Tensor x0;
            if (style == "blobs") {
                x0 = make_blobs(rng);
            } else if (style == "stripes") {
                x0 = make_stripes(rng);
            } else {
                raise(ErrorCode::LabelUnknown, "no generator for style '" + style + "'");
            }
            LabeledSample s;
            s.t = static_cast<int>(1 + rng.below(t_max));
            Tensor noise(x0.shape());
            for (double& v : noise.data()) v = rng.normal();
            s.x_t = diffusion::q_sample(schedule, x0, static_cast<std::size_t>(s.t), noise);
            s.cond = neutral;
            s.label = style;
            out.push_back(std::move(s));
        }
    }
    return out;
}

std::vector<GateExample> gate_features(std::span<const DenoiserParams> experts,
                                       std::span<const std::string> style_tags,
                                       std::span<const LabeledSample> samples) {
    if (experts.size() != style_tags.size()) raise(ErrorCode::InvalidConfig, "one style tag per expert required");
    std::vector<GateExample> out;
    for (const LabeledSample& s : samples) {
        std::vector<double> target(experts.size(), 0.0);
        bool known = false;
        for (std::size_t e = 0; e < experts.size(); ++e) {
            if (style_tags[e] == s.label) {
                target[e] = 1.0;
                known = true;
            }
        }
        if (!known) raise(ErrorCode::LabelUnknown, "label '" + s.label + "' matches no registered expert");
        for (const DenoiserParams& host : experts) {
            const int t = diffusion::embedding_index(static_cast<std::size_t>(s.t), host.config.steps, host.config.steps);
            OwnSites sites(host);
            DenoiserTape tape;
            (void)backbone_forward(host, s.x_t, t, s.cond, sites, &tape);
            out.push_back({Site::Attn, average_pool(tape.h1), target});
            out.push_back({Site::FeedForward, average_pool(tape.h3), target});
        }
    }
    return out;
}

double gate_loss(const GateParams& gate, std::span<const GateExample> examples, GateParams* grads) {
    if (examples.empty()) return 0.0;
    const double inv = 1.0 / static_cast<double>(examples.size());
    double loss = 0.0;
    for (const GateExample& ex : examples) {
        const GateLinear& g = gate.site(ex.site);
        const std::vector<double> logits = gate_logits(g, ex.pooled);
        const std::size_t c = ex.pooled.size();
        for (std::size_t i = 0; i < logits.size(); ++i) {
            const double l = logits[i];
            // softplus(l) - y*l, written to stay finite for large |l|.
            const double softplus = l > 0.0 ? l + std::log1p(std::exp(-l)) : std::log1p(std::exp(l));
            loss += softplus - ex.target[i] * l;
            if (grads != nullptr) {
                const double d = (sigmoid(l) - ex.target[i]) * inv;
                GateLinear& gg = grads->site(ex.site);
                gg.bias[i] += d;
                for (std::size_t j = 0; j < c; ++j) gg.weight[i * c + j] += d * ex.pooled[j];
            }
        }
    }
    return loss * inv;
}

double routing_accuracy(const GateParams& gate, std::span<const GateExample> examples) {
    if (examples.empty()) return 0.0;
    std::size_t hits = 0;
    for (const GateExample& ex : examples) {
        const auto logits = gate_logits(gate.site(ex.site), ex.pooled);
        // sigmoid is monotone, so the top weight is the top logit; ties go to the lower index.
        const auto best = static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
        if (ex.target[best] > 0.5) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(examples.size());
}

GateTrainReport train_gate(std::span<const DenoiserParams> experts, std::span<const std::string> style_tags,
                           std::span<const LabeledSample> samples, const GateTrainConfig& config) {
    if (samples.empty()) raise(ErrorCode::EmptyDataset, "no labeled samples for gate training");
    if (experts.empty()) raise(ErrorCode::InvalidConfig, "gate training needs at least one expert");
    if (config.epochs == 0 || !(config.lr >= 0.0)) raise(ErrorCode::InvalidConfig, "bad gate training config");
    GateTrainReport report;
    for (const auto& e : experts) report.expert_hashes_before.push_back(params_hash(e));

    std::size_t held = static_cast<std::size_t>(std::floor(config.holdout_fraction * static_cast<double>(samples.size())));
    if (held >= samples.size()) held = samples.size() - 1;
    Rng rng(config.seed, 0x6A7F);
    std::vector<std::size_t> order(samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    std::vector<LabeledSample> train_set, held_set;
    for (std::size_t i = 0; i < order.size(); ++i) {
        (i < order.size() - held ? train_set : held_set).push_back(samples[order[i]]);
    }
    const auto train_ex = gate_features(experts, style_tags, train_set);
    const auto held_ex = gate_features(experts, style_tags, held_set);

    const std::size_t channels = experts.front().config.channels;
    report.gate = GateParams::init(experts.size(), channels, config.seed);
    GateParams grads = GateParams::zeros(experts.size(), channels);
    std::vector<Tensor*> plist, glist;
    for (auto& n : report.gate.tensors()) plist.push_back(n.tensor);
    for (auto& n : grads.tensors()) glist.push_back(n.tensor);
    const std::vector<const Tensor*> gconst(glist.begin(), glist.end());

    report.initial_loss = gate_loss(report.gate, train_ex);
    Adam adam(config.lr);
    double loss = report.initial_loss;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        for (Tensor* g : glist) g->fill(0.0);
        loss = gate_loss(report.gate, train_ex, &grads);
        if (!std::isfinite(loss) || loss > 10.0 * report.initial_loss) {
            raise(ErrorCode::Diverged, "gate loss " + std::to_string(loss) + " at epoch " + std::to_string(epoch));
        }
        if (config.lr > 0.0) adam.step(plist, gconst);
    }
    report.final_loss = gate_loss(report.gate, train_ex);
    const auto& eval = held_ex.empty() ? train_ex : held_ex;
    report.heldout_accuracy = routing_accuracy(report.gate, eval);
    report.heldout_examples = eval.size();

    for (const auto& e : experts) report.expert_hashes_after.push_back(params_hash(e));
    if (report.expert_hashes_after != report.expert_hashes_before) {
        raise(ErrorCode::InvalidConfig, "expert parameters changed during gate training");
    }
    return report;
}

}  // namespace mepg::neural
