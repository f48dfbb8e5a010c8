// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mepg/core/tensor.hpp"

namespace mepg::neural {

/// The two places where an expert contributes weights to a mixture:
/// the attention-style projection after the first conv and the
/// feed-forward output projection that produces the noise estimate.
enum class Site : std::size_t { Attn = 0, FeedForward = 1 };
inline constexpr std::size_t kNumSites = 2;
inline constexpr std::array<Site, kNumSites> kSites{Site::Attn, Site::FeedForward};

std::string to_string(Site site);

struct DenoiserConfig {
    std::size_t channels = 24;
    std::size_t image_channels = 1;
    /// Rows of the timestep embedding table (the training schedule's N).
    std::size_t steps = 50;
    std::size_t vocab = 0;  // 0 selects the lexicon vocabulary size

    friend bool operator==(const DenoiserConfig&, const DenoiserConfig&) = default;
};

struct SiteParams {
    Tensor weight;  // [out, in]
    Tensor bias;    // [out]
};

/// Noise-prediction network:
///   h1  = silu(conv1(x) + time_emb[t] + sum(cond_emb[ids]))
///   h2  = h1 + silu(attn(h1))            <- Site::Attn
///   h3  = silu(conv2(h2))
///   eps = ff(h3)                         <- Site::FeedForward
struct DenoiserParams {
    DenoiserConfig config;
    Tensor conv1_w, conv1_b;
    Tensor time_emb;  // [steps, C]
    Tensor cond_emb;  // [vocab, C]
    SiteParams attn;  // [C, C]
    Tensor conv2_w, conv2_b;
    SiteParams ff;  // [image_channels, C]

    static DenoiserParams zeros(const DenoiserConfig& config);
    static DenoiserParams init(const DenoiserConfig& config, std::uint64_t seed);

    const SiteParams& site(Site s) const noexcept { return s == Site::Attn ? attn : ff; }
    SiteParams& site(Site s) noexcept { return s == Site::Attn ? attn : ff; }

    struct Named {
        std::string name;
        Tensor* tensor;
    };
    struct ConstNamed {
        std::string name;
        const Tensor* tensor;
    };
    /// Stable order used for checkpoints, optimizers and flattening.
    std::vector<Named> tensors();
    std::vector<ConstNamed> tensors() const;

    std::size_t parameter_count() const;

    friend bool operator==(const DenoiserParams&, const DenoiserParams&);
};

/// Activations kept for the backward pass.
struct DenoiserTape {
    Tensor x;
    int t = 0;
    std::vector<int> cond;
    Tensor a1, h1, s1, h2, a3, h3;
};

/// Computes a site's output and, on the way back, its input gradient.
/// The plain network uses its own site weights; the mixture-of-experts
/// denoiser substitutes a routed combination of several experts.
class SiteHooks {
public:
    virtual ~SiteHooks() = default;
    virtual Tensor forward(Site site, const Tensor& in) = 0;
    virtual Tensor backward(Site site, const Tensor& in, const Tensor& d_out) = 0;
};

/// Uses `params`' own site weights; accumulates site gradients into `grads`
/// when it is non-null.
class OwnSites final : public SiteHooks {
public:
    explicit OwnSites(const DenoiserParams& params, DenoiserParams* grads = nullptr) noexcept
        : m_params(params), m_grads(grads) {}
    Tensor forward(Site site, const Tensor& in) override;
    Tensor backward(Site site, const Tensor& in, const Tensor& d_out) override;

private:
    const DenoiserParams& m_params;
    DenoiserParams* m_grads;
};

/// Validates t in [1, steps] and cond ids within the vocabulary.
void check_inputs(const DenoiserParams& params, const Tensor& x_t, int t, std::span<const int> cond);

Tensor backbone_forward(const DenoiserParams& host, const Tensor& x_t, int t, std::span<const int> cond,
                        SiteHooks& sites, DenoiserTape* tape = nullptr);

/// Gradients of the host's non-site parameters go to `host_grads`; site
/// gradients are the hooks' responsibility.
void backbone_backward(const DenoiserParams& host, const DenoiserTape& tape, const Tensor& d_out,
                       SiteHooks& sites, DenoiserParams& host_grads);

/// eps_hat for x_t [C,H,W] at embedding step t in [1, steps].
Tensor denoiser_forward(const DenoiserParams& params, const Tensor& x_t, int t, std::span<const int> cond);

/// Mean squared noise-prediction loss over a batch and its gradient
/// (accumulated into `grads` when non-null).
struct DenoiseExample {
    Tensor x_t;
    int t = 1;
    std::vector<int> cond;
    Tensor noise;
};
double denoiser_loss(const DenoiserParams& params, std::span<const DenoiseExample> batch,
                     DenoiserParams* grads = nullptr);

}  // namespace mepg::neural
