// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#include "mepg/neural/denoiser.hpp"

#include <cmath>

#include "mepg/core/error.hpp"
#include "mepg/core/lexicon.hpp"
#include "mepg/core/rng.hpp"
#include "mepg/neural/layers.hpp"

namespace mepg::neural {

std::string to_string(Site site) { return site == Site::Attn ? "attn" : "ff"; }

namespace {

DenoiserConfig resolved(DenoiserConfig config) {
    if (config.vocab == 0) config.vocab = lexicon::vocabulary_size();
    if (config.channels == 0 || config.image_channels == 0 || config.steps == 0) {
        raise(ErrorCode::InvalidConfig, "denoiser dimensions must be positive");
    }
    return config;
}

void fill_normal(Tensor& t, Rng& rng, double stddev) {
    for (double& v : t.data()) v = rng.normal() * stddev;
}

}  // namespace

DenoiserParams DenoiserParams::zeros(const DenoiserConfig& cfg) {
    const DenoiserConfig c = resolved(cfg);
    DenoiserParams p;
    p.config = c;
    p.conv1_w = Tensor({c.channels, c.image_channels, 3, 3});
    p.conv1_b = Tensor({c.channels});
    p.time_emb = Tensor({c.steps, c.channels});
    p.cond_emb = Tensor({c.vocab, c.channels});
    p.attn = {Tensor({c.channels, c.channels}), Tensor({c.channels})};
    p.conv2_w = Tensor({c.channels, c.channels, 3, 3});
    p.conv2_b = Tensor({c.channels});
    p.ff = {Tensor({c.image_channels, c.channels}), Tensor({c.image_channels})};
    return p;
}

DenoiserParams DenoiserParams::init(const DenoiserConfig& cfg, std::uint64_t seed) {
    DenoiserParams p = zeros(cfg);
    Rng rng(seed, 0x1417);
    const double c = static_cast<double>(p.config.channels);
    fill_normal(p.conv1_w, rng, std::sqrt(2.0 / (9.0 * static_cast<double>(p.config.image_channels))));
    fill_normal(p.time_emb, rng, 0.5);
    fill_normal(p.attn.weight, rng, 1.0 / std::sqrt(c));
    fill_normal(p.conv2_w, rng, std::sqrt(2.0 / (9.0 * c)));
    fill_normal(p.ff.weight, rng, 0.5 / std::sqrt(c));
    // cond_emb starts at zero so tokens never seen in training stay neutral.
    return p;
}

std::vector<DenoiserParams::Named> DenoiserParams::tensors() {
    return {{"conv1.w", &conv1_w}, {"conv1.b", &conv1_b},   {"time_emb", &time_emb},
            {"cond_emb", &cond_emb}, {"attn.w", &attn.weight}, {"attn.b", &attn.bias},
            {"conv2.w", &conv2_w}, {"conv2.b", &conv2_b},   {"ff.w", &ff.weight},
            {"ff.b", &ff.bias}};
}

std::vector<DenoiserParams::ConstNamed> DenoiserParams::tensors() const {
    std::vector<ConstNamed> out;
    for (auto& n : const_cast<DenoiserParams*>(this)->tensors()) out.push_back({n.name, n.tensor});
    return out;
}

std::size_t DenoiserParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors()) n += t.tensor->size();
    return n;
}

bool operator==(const DenoiserParams& a, const DenoiserParams& b) {
    if (!(a.config == b.config)) return false;
    const auto ta = a.tensors();
    const auto tb = b.tensors();
    for (std::size_t i = 0; i < ta.size(); ++i) {
        if (!bit_equal(*ta[i].tensor, *tb[i].tensor)) return false;
    }
    return true;
}

Tensor OwnSites::forward(Site site, const Tensor& in) {
    const SiteParams& sp = m_params.site(site);
    return pointwise(in, sp.weight, sp.bias);
}

Tensor OwnSites::backward(Site site, const Tensor& in, const Tensor& d_out) {
    const SiteParams& sp = m_params.site(site);
    if (m_grads == nullptr) {
        Tensor dw(sp.weight.shape()), db(sp.bias.shape());
        return pointwise_backward(in, sp.weight, d_out, dw, db);
    }
    SiteParams& g = m_grads->site(site);
    return pointwise_backward(in, sp.weight, d_out, g.weight, g.bias);
}

void check_inputs(const DenoiserParams& p, const Tensor& x_t, int t, std::span<const int> cond) {
    if (x_t.rank() != 3 || x_t.dim(0) != p.config.image_channels) {
        raise(ErrorCode::ShapeMismatch, "denoiser input " + shape_to_string(x_t.shape()));
    }
    if (t < 1 || static_cast<std::size_t>(t) > p.config.steps) {
        raise(ErrorCode::StepOutOfRange, "timestep " + std::to_string(t) + " outside [1," +
                                             std::to_string(p.config.steps) + "]");
    }
    for (int id : cond) {
        if (id < 0 || static_cast<std::size_t>(id) >= p.config.vocab) {
            raise(ErrorCode::InvalidConfig, "condition id " + std::to_string(id) + " outside vocabulary");
        }
    }
}

Tensor backbone_forward(const DenoiserParams& host, const Tensor& x_t, int t, std::span<const int> cond,
                        SiteHooks& sites, DenoiserTape* tape) {
    check_inputs(host, x_t, t, cond);
    const std::size_t channels = host.config.channels;
    const std::size_t plane = x_t.dim(1) * x_t.dim(2);

    Tensor a1 = conv3x3(x_t, host.conv1_w, host.conv1_b);
    for (std::size_t c = 0; c < channels; ++c) {
        double shift = host.time_emb[static_cast<std::size_t>(t - 1) * channels + c];
        for (int id : cond) shift += host.cond_emb[static_cast<std::size_t>(id) * channels + c];
        double* row = a1.data().data() + c * plane;
        for (std::size_t p = 0; p < plane; ++p) row[p] += shift;
    }
    Tensor h1 = silu(a1);
    Tensor s1 = sites.forward(Site::Attn, h1);
    Tensor h2 = silu(s1);
    for (std::size_t i = 0; i < h2.size(); ++i) h2[i] += h1[i];
    Tensor a3 = conv3x3(h2, host.conv2_w, host.conv2_b);
    Tensor h3 = silu(a3);
    Tensor out = sites.forward(Site::FeedForward, h3);
    out.check_finite("denoiser output");

    if (tape != nullptr) {
        tape->x = x_t;
        tape->t = t;
        tape->cond.assign(cond.begin(), cond.end());
        tape->a1 = std::move(a1);
        tape->h1 = std::move(h1);
        tape->s1 = std::move(s1);
        tape->h2 = std::move(h2);
        tape->a3 = std::move(a3);
        tape->h3 = std::move(h3);
    }
    return out;
}

void backbone_backward(const DenoiserParams& host, const DenoiserTape& tape, const Tensor& d_out,
                       SiteHooks& sites, DenoiserParams& g) {
    const std::size_t channels = host.config.channels;
    const std::size_t plane = tape.x.dim(1) * tape.x.dim(2);

    const Tensor d_h3 = sites.backward(Site::FeedForward, tape.h3, d_out);
    const Tensor d_a3 = silu_backward(tape.a3, d_h3);
    Tensor d_h2 = conv3x3_backward(tape.h2, host.conv2_w, d_a3, g.conv2_w, g.conv2_b);
    const Tensor d_s1 = silu_backward(tape.s1, d_h2);
    Tensor d_h1 = sites.backward(Site::Attn, tape.h1, d_s1);
    for (std::size_t i = 0; i < d_h1.size(); ++i) d_h1[i] += d_h2[i];
    const Tensor d_a1 = silu_backward(tape.a1, d_h1);
    conv3x3_backward(tape.x, host.conv1_w, d_a1, g.conv1_w, g.conv1_b, /*want_input_grad=*/false);
    for (std::size_t c = 0; c < channels; ++c) {
        const double* row = d_a1.data().data() + c * plane;
        double sum = 0.0;
        for (std::size_t p = 0; p < plane; ++p) sum += row[p];
        g.time_emb[static_cast<std::size_t>(tape.t - 1) * channels + c] += sum;
        for (int id : tape.cond) g.cond_emb[static_cast<std::size_t>(id) * channels + c] += sum;
    }
}

Tensor denoiser_forward(const DenoiserParams& params, const Tensor& x_t, int t, std::span<const int> cond) {
    OwnSites sites(params);
    return backbone_forward(params, x_t, t, cond, sites);
}

double denoiser_loss(const DenoiserParams& params, std::span<const DenoiseExample> batch, DenoiserParams* grads) {
    if (batch.empty()) return 0.0;
    const double count = static_cast<double>(batch.size() * batch.front().noise.size());
    double loss = 0.0;
    for (const DenoiseExample& ex : batch) {
        OwnSites sites(params, grads);
        DenoiserTape tape;
        const Tensor eps_hat = backbone_forward(params, ex.x_t, ex.t, ex.cond, sites, grads ? &tape : nullptr);
        ex.noise.require_shape(eps_hat.shape(), "denoiser_loss noise");
        Tensor d_out(eps_hat.shape());
        for (std::size_t i = 0; i < eps_hat.size(); ++i) {
            const double diff = eps_hat[i] - ex.noise[i];
            loss += diff * diff;
            d_out[i] = 2.0 * diff / count;
        }
        if (grads != nullptr) backbone_backward(params, tape, d_out, sites, *grads);
    }
    return loss / count;
}

}  // namespace mepg::neural
