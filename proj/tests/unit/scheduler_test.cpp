// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "mepg/core/error.hpp"
#include "mepg/core/lexicon.hpp"
#include "mepg/core/rng.hpp"
#include "mepg/diffusion/sampler.hpp"
#include "mepg/scheduler/config.hpp"
#include "mepg/scheduler/cross_denoise.hpp"

namespace {

using namespace mepg;
using namespace mepg::scheduler;
using geometry::BoundingBox;
using geometry::Layout;
using geometry::RegionMask;

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error raised";
    return ErrorCode::Io;
}

TEST(Stage, DefaultSplitIs35Local15Global) {
    std::size_t local = 0, global = 0;
    for (std::size_t t = 1; t <= 50; ++t) (stage_of(t, 50, 0.7) == Stage::Local ? local : global)++;
    EXPECT_EQ(local, 35u);
    EXPECT_EQ(global, 15u);
    EXPECT_EQ(stage_of(35, 50, 0.7), Stage::Local);
    EXPECT_EQ(stage_of(36, 50, 0.7), Stage::Global);
}

TEST(Stage, LocalCountIsFloorOverRandomConfigs) {
    Rng rng(11);
    for (int i = 0; i < 1000; ++i) {
        const std::size_t n = 1 + rng.below(kMaxSteps);
        const double p1 = rng.uniform();
        std::size_t local = 0;
        for (std::size_t t = 1; t <= n; ++t) local += stage_of(t, n, p1) == Stage::Local;
        EXPECT_EQ(local, static_cast<std::size_t>(std::floor(p1 * static_cast<double>(n)))) << n << " " << p1;
    }
}

TEST(Stage, EdgesAndErrors) {
    for (std::size_t t = 1; t <= 20; ++t) {
        EXPECT_EQ(stage_of(t, 20, 0.0), Stage::Global);
        EXPECT_EQ(stage_of(t, 20, 1.0), Stage::Local);
    }
    EXPECT_EQ(code_of([] { stage_of(0, 50, 0.7); }), ErrorCode::StepOutOfRange);
    EXPECT_EQ(code_of([] { stage_of(51, 50, 0.7); }), ErrorCode::StepOutOfRange);
}

TEST(Stage, InterleaveEnumeration) {
    std::vector<std::size_t> global_in_local;
    for (std::size_t t = 1; t <= 50; ++t) {
        const Stage kind = executed_kind(t, 50, 0.7, 5);
        if (t > 35) {
            EXPECT_EQ(kind, Stage::Global);
        } else if (kind == Stage::Global) {
            global_in_local.push_back(t);
        }
    }
    EXPECT_EQ(global_in_local, (std::vector<std::size_t>{5, 10, 15, 20, 25, 30, 35}));
    for (std::size_t t = 1; t <= 50; ++t) EXPECT_EQ(executed_kind(t, 50, 0.7, 0), stage_of(t, 50, 0.7));
}

TEST(Stage, LocalExecutedCountProperty) {
    Rng rng(12);
    for (int i = 0; i < 500; ++i) {
        const std::size_t n = 1 + rng.below(300);
        const double p1 = rng.uniform();
        const std::size_t g = rng.below(12);
        const std::size_t f = local_steps(n, p1);
        std::size_t executed_local = 0, divisible = 0;
        for (std::size_t t = 1; t <= n; ++t) executed_local += executed_kind(t, n, p1, g) == Stage::Local;
        for (std::size_t t = 1; g > 0 && t <= f; ++t) divisible += t % g == 0;
        EXPECT_EQ(executed_local, f - divisible);
    }
}

TEST(Alpha, RampEndpointsAndEqualSplit) {
    GenerationConfig c;
    const std::vector<std::size_t> areas{100, 100};
    EXPECT_EQ(alpha_schedule(50, c, areas), (std::vector<double>{1.0, 0.0, 0.0}));
    EXPECT_EQ(alpha_schedule(36, c, areas), (std::vector<double>{0.5, 0.25, 0.25}));
    // Interleaved steps in the local phase use the starting share.
    EXPECT_EQ(alpha_schedule(10, c, areas), (std::vector<double>{0.5, 0.25, 0.25}));
    const auto mid = alpha_schedule(43, c, areas);
    EXPECT_GT(mid[0], 0.5);
    EXPECT_LT(mid[0], 1.0);
    EXPECT_EQ(alpha_schedule(20, c, {}), (std::vector<double>{1.0}));
}

TEST(Alpha, AreaProportionalAndFixed) {
    GenerationConfig c;
    c.alpha_mode = AlphaMode::Fixed;
    c.alpha_global_start = 0.4;
    const std::vector<std::size_t> areas{300, 100};
    for (std::size_t t : {1u, 36u, 50u}) {
        const auto a = alpha_schedule(t, c, areas);
        EXPECT_DOUBLE_EQ(a[0], 0.4);
        EXPECT_NEAR(a[1], 0.45, 1e-15);
        EXPECT_NEAR(a[2], 0.15, 1e-15);
    }
    const std::vector<std::size_t> empty{0, 0, 0};
    const auto eq = alpha_schedule(36, c, empty);
    EXPECT_NEAR(eq[1], 0.2, 1e-15);
    EXPECT_NEAR(eq[3], 0.2, 1e-15);
}

TEST(Alpha, SumsToExactlyOneEverywhere) {
    Rng rng(13);
    for (int i = 0; i < 300; ++i) {
        GenerationConfig c;
        c.steps = 1 + rng.below(200);
        c.p1 = rng.uniform();
        c.alpha_global_start = rng.uniform();
        c.alpha_mode = rng.below(2) ? AlphaMode::Fixed : AlphaMode::LeadRamp;
        std::vector<std::size_t> areas(rng.below(8));
        for (auto& a : areas) a = rng.below(1025);
        for (std::size_t t = 1; t <= c.steps; ++t) {
            const auto alphas = alpha_schedule(t, c, areas);
            ASSERT_EQ(alphas.size(), areas.size() + 1);
            double sum = 0.0;
            for (double a : alphas) {
                EXPECT_GE(a, 0.0);
                sum += a;
            }
            ASSERT_EQ(sum, 1.0) << "t=" << t;
        }
    }
}

Tensor random_tensor(Rng& rng, const Shape& shape) {
    Tensor t(shape);
    for (double& v : t.data()) v = rng.normal();
    return t;
}

std::vector<double> random_simplex(Rng& rng, std::size_t n) {
    std::vector<double> w(n);
    double s = 0.0;
    for (double& v : w) s += (v = -std::log(1.0 - rng.uniform()));
    for (double& v : w) v /= s;
    return w;
}

TEST(Fuse, ArithmeticExamples) {
    const std::vector<Tensor> p{Tensor({1, 1, 1}, std::vector<double>{2.0}), Tensor({1, 1, 1}, std::vector<double>{4.0})};
    EXPECT_EQ(fuse_global(p, std::vector<double>{0.5, 0.5})[0], 3.0);
    Rng rng(3);
    const std::vector<Tensor> q{random_tensor(rng, {1, 4, 4}), random_tensor(rng, {1, 4, 4})};
    EXPECT_TRUE(bit_equal(fuse_global(q, std::vector<double>{1.0, 0.0}), q[0]));
}

TEST(Fuse, MatchesBruteForceAndStaysConvex) {
    Rng rng(14);
    for (int i = 0; i < 1000; ++i) {
        const std::size_t m = 1 + rng.below(6);
        std::vector<Tensor> props;
        for (std::size_t j = 0; j < m; ++j) props.push_back(random_tensor(rng, {1, 3, 5}));
        const auto alphas = random_simplex(rng, m);
        const Tensor fused = fuse_global(props, alphas);
        for (std::size_t c = 0; c < fused.size(); ++c) {
            double expect = 0.0, lo = INFINITY, hi = -INFINITY;
            for (std::size_t j = 0; j < m; ++j) {
                expect += alphas[j] * props[j][c];
                lo = std::min(lo, props[j][c]);
                hi = std::max(hi, props[j][c]);
            }
            EXPECT_NEAR(fused[c], expect, 1e-12);
            EXPECT_GE(fused[c], lo);
            EXPECT_LE(fused[c], hi);
        }
    }
}

TEST(Fuse, RejectsUnnormalizedWeights) {
    const std::vector<Tensor> p{Tensor({1, 1, 1}), Tensor({1, 1, 1})};
    EXPECT_EQ(code_of([&] { fuse_global(p, std::vector<double>{0.5, 0.6}); }), ErrorCode::AlphaNotNormalized);
    EXPECT_EQ(code_of([&] { fuse_global(p, std::vector<double>{1.5, -0.5}); }), ErrorCode::AlphaNotNormalized);
}

RegionMask mask_for(const BoundingBox& box, int h = 8, int w = 8) { return geometry::rasterize(box, h, w); }

TEST(Compose, UncoveredCellsTakeGlobalAndOverlapsAverage) {
    Rng rng(15);
    const Tensor global = random_tensor(rng, {1, 8, 8});
    const Tensor a = random_tensor(rng, {1, 8, 8});
    const std::vector<Tensor> props{a, a};
    const std::vector<RegionMask> masks{mask_for({0, 0, 600, 1000}), mask_for({400, 0, 800, 1000})};
    const Tensor out = compose_local(global, props, masks);
    for (int r = 0; r < 8; ++r) {
        for (int c = 0; c < 8; ++c) {
            const std::size_t i = static_cast<std::size_t>(r * 8 + c);
            if (masks[0].at(r, c) || masks[1].at(r, c)) {
                EXPECT_EQ(out[i], a[i]);  // mean of equal values is exact
            } else {
                EXPECT_EQ(out[i], global[i]);
            }
        }
    }
    EXPECT_TRUE(bit_equal(compose_local(global, {}, {}), global));
}

TEST(Compose, RegionOrderDoesNotMatter) {
    Rng rng(16);
    for (int i = 0; i < 200; ++i) {
        const std::size_t m = 1 + rng.below(5);
        const Tensor global = random_tensor(rng, {2, 8, 8});
        std::vector<Tensor> props;
        std::vector<RegionMask> masks;
        for (std::size_t j = 0; j < m; ++j) {
            props.push_back(random_tensor(rng, {2, 8, 8}));
            const int x1 = static_cast<int>(rng.below(500)), y1 = static_cast<int>(rng.below(500));
            masks.push_back(mask_for({x1, y1, x1 + 200 + static_cast<int>(rng.below(300)),
                                      y1 + 200 + static_cast<int>(rng.below(300))}));
        }
        std::vector<std::size_t> perm(m);
        std::iota(perm.begin(), perm.end(), 0);
        std::reverse(perm.begin(), perm.end());
        std::vector<Tensor> pp;
        std::vector<RegionMask> pm;
        for (std::size_t j : perm) {
            pp.push_back(props[j]);
            pm.push_back(masks[j]);
        }
        for (OverlapMode mode : {OverlapMode::Mean, OverlapMode::InverseArea}) {
            EXPECT_TRUE(bit_equal(compose_local(global, props, masks, mode), compose_local(global, pp, pm, mode)));
        }
    }
}

TEST(Compose, PriorityAndInverseArea) {
    const Tensor global({1, 8, 8});
    Tensor a({1, 8, 8}), b({1, 8, 8});
    for (std::size_t i = 0; i < 64; ++i) {
        a[i] = 1.0;
        b[i] = 3.0;
    }
    const std::vector<RegionMask> masks{mask_for({0, 0, 1000, 1000}), mask_for({0, 0, 500, 500})};
    const std::vector<Tensor> props{a, b};
    EXPECT_EQ(compose_local(global, props, masks, OverlapMode::Priority)[0], 3.0);
    EXPECT_EQ(compose_local(global, props, masks, OverlapMode::Priority)[63], 1.0);
    // Areas 64 and 16: the small region carries 4x the weight.
    EXPECT_NEAR(compose_local(global, props, masks, OverlapMode::InverseArea)[0], (1.0 + 4.0 * 3.0) / 5.0, 1e-15);
}

TEST(Compose, MaskShapeMismatch) {
    const Tensor global({1, 8, 8});
    const std::vector<Tensor> props{Tensor({1, 8, 8})};
    const std::vector<RegionMask> masks{mask_for({0, 0, 1000, 1000}, 4, 4)};
    EXPECT_EQ(code_of([&] { compose_local(global, props, masks); }), ErrorCode::MaskShapeMismatch);
}

TEST(Config, JsonRoundTripAndValidation) {
    GenerationConfig c;
    c.steps = 20;
    c.p1 = 0.5;
    c.overlap = OverlapMode::InverseArea;
    c.alpha_mode = AlphaMode::Fixed;
    c.gate_activation = moe::GateActivation::Softmax;
    const auto back = config_from_json(config_to_json(c));
    EXPECT_EQ(config_to_json(back), config_to_json(c));
    EXPECT_EQ(code_of([] { config_from_json({{"N", 0}}); }), ErrorCode::InvalidConfig);
    EXPECT_EQ(code_of([] { config_from_json({{"N", 1001}}); }), ErrorCode::InvalidConfig);
    EXPECT_EQ(code_of([] { config_from_json({{"p1", 1.5}}); }), ErrorCode::InvalidConfig);
    EXPECT_EQ(code_of([] { config_from_json({{"k", 0}}); }), ErrorCode::InvalidConfig);
    EXPECT_EQ(code_of([] { config_from_json({{"bogus", 1}}); }), ErrorCode::InvalidConfig);
    EXPECT_EQ(code_of([] { config_from_json({{"alpha_mode", "ramp"}}); }), ErrorCode::InvalidConfig);
    EXPECT_EQ(config_from_json(nlohmann::json::object()).steps, 50u);
}

// Tiny models keep the end-to-end checks fast; the arithmetic is identical
// to the default size.
constexpr std::size_t kTinySteps = 12;

std::shared_ptr<const neural::DenoiserParams> tiny_expert(std::uint64_t seed) {
    neural::DenoiserConfig cfg;
    cfg.channels = 4;
    cfg.steps = kTinySteps;
    auto p = neural::DenoiserParams::init(cfg, seed);
    Rng rng(seed, 9);
    for (double& v : p.cond_emb.data()) v = 0.3 * rng.normal();
    return std::make_shared<const neural::DenoiserParams>(std::move(p));
}

GenerationConfig tiny_config(std::uint64_t seed) {
    GenerationConfig c;
    c.steps = kTinySteps;
    c.seed = seed;
    c.height = 8;
    c.width = 8;
    // Untrained weights blow up under the short scaled schedule's large betas.
    c.schedule = diffusion::BetaSchedule::Linear;
    return c;
}

TEST(CrossDenoise, SingleFullRegionMatchesPlainSampler) {
    const auto expert = tiny_expert(1);
    moe::ExpertSet set(moe::ExpertRegistry({{"base", "base.ckpt", "mixed", moe::ExpertRole::Global, ""}}), {expert});
    Layout layout;
    layout.global_prompt = "a red cat";
    layout.regions.push_back({BoundingBox::full_canvas(), "a red cat", "base", ""});
    const diffusion::NoiseSchedule schedule(kTinySteps, diffusion::BetaSchedule::Linear);
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        GenerationConfig c = tiny_config(seed);
        c.interleave_g = 0;
        const auto out = cross_denoise(layout, set, c);
        const Tensor plain = diffusion::sample(*expert, schedule, lexicon::tokenize("a red cat"), seed, {1, 8, 8});
        EXPECT_TRUE(bit_equal(out.image, plain)) << "seed " << seed;
    }
}

TEST(CrossDenoise, NoRegionsMatchesGlobalSampler) {
    const auto expert = tiny_expert(2);
    moe::ExpertSet set(moe::ExpertRegistry({{"g", "g.ckpt", "", moe::ExpertRole::Global, ""}}), {expert});
    Layout layout;
    layout.global_prompt = "a dog";
    GenerationConfig c = tiny_config(5);
    c.p1 = 1.0;
    c.interleave_g = 0;
    const auto out = cross_denoise(layout, set, c);
    const diffusion::NoiseSchedule schedule(kTinySteps, diffusion::BetaSchedule::Linear);
    EXPECT_TRUE(bit_equal(out.image, diffusion::sample(*expert, schedule, lexicon::tokenize("a dog"), 5, {1, 8, 8})));
}

moe::ExpertSet two_expert_set() {
    moe::ExpertRegistry reg({{"g", "g.ckpt", "", moe::ExpertRole::Global, ""},
                             {"l", "l.ckpt", "stripes", moe::ExpertRole::Local, ""}});
    return moe::ExpertSet(reg, {tiny_expert(3), tiny_expert(4)}, neural::GateParams::init(2, 4, 5));
}

Layout two_region_layout() {
    Layout layout;
    layout.global_prompt = "a dog and a cat";
    layout.regions.push_back({{0, 0, 500, 1000}, "a dog", "g", ""});
    layout.regions.push_back({{500, 0, 1000, 1000}, "a cat", "", "stripes"});
    return layout;
}

TEST(CrossDenoise, TraceFollowsScheduleAndIsDeterministic) {
    const auto set = two_expert_set();
    GenerationConfig c = tiny_config(7);
    c.p1 = 0.5;
    c.interleave_g = 3;
    const auto a = cross_denoise(two_region_layout(), set, c);
    const auto b = cross_denoise(two_region_layout(), set, c);
    EXPECT_TRUE(bit_equal(a.image, b.image));
    EXPECT_EQ(trace_to_jsonl(a.trace), trace_to_jsonl(b.trace));
    ASSERT_EQ(a.trace.size(), kTinySteps);
    for (const auto& r : a.trace) {
        EXPECT_EQ(r.executed, executed_kind(r.t, kTinySteps, 0.5, 3));
        if (r.executed == Stage::Global) {
            EXPECT_EQ(r.alphas.size(), 3u);
        } else {
            EXPECT_TRUE(r.alphas.empty());
            EXPECT_EQ(r.expert_ids, (std::vector<std::string>{"g", "l"}));
        }
        // Every proposal routes at both sites with k = 2 of 2 experts.
        for (const auto& p : r.routing) {
            ASSERT_EQ(p["sites"].size(), 2u);
            EXPECT_EQ(p["sites"][0]["active"].size(), 2u);
        }
    }
    EXPECT_EQ(a.trace.back().alphas, (std::vector<double>{1.0, 0.0, 0.0}));
    EXPECT_EQ(a.trace.back().expert_ids, (std::vector<std::string>{"g"}));
    for (double v : a.image.data()) {
        EXPECT_GE(v, -1.0);
        EXPECT_LE(v, 1.0);
    }
}

TEST(CrossDenoise, StepHookAndCancellation) {
    const auto set = two_expert_set();
    std::size_t seen = 0;
    CrossDenoiseHooks hooks;
    hooks.on_step = [&](const StepRecord& r, const Tensor& state) {
        EXPECT_EQ(r.t, ++seen);
        EXPECT_EQ(state.shape(), (Shape{1, 8, 8}));
    };
    cross_denoise(two_region_layout(), set, tiny_config(1), hooks);
    EXPECT_EQ(seen, kTinySteps);
    seen = 0;
    hooks.cancelled = [&] { return seen >= 2; };
    EXPECT_EQ(code_of([&] { cross_denoise(two_region_layout(), set, tiny_config(1), hooks); }), ErrorCode::Cancelled);
}

TEST(CrossDenoise, ResolvesExpertsAndRejectsUnknownIds) {
    const auto set = two_expert_set();
    Layout layout = two_region_layout();
    layout.regions.push_back({{0, 0, 200, 200}, "a bird", "", "unknown-style"});
    EXPECT_EQ(resolve_region_experts(layout, set.registry(), 0), (std::vector<std::size_t>{0, 1, 0}));
    layout.regions[0].expert_id = "missing";
    EXPECT_EQ(code_of([&] { cross_denoise(layout, set, tiny_config(1)); }), ErrorCode::UnknownExpert);
    GenerationConfig c = tiny_config(1);
    c.global_expert = "nope";
    EXPECT_EQ(code_of([&] { cross_denoise(two_region_layout(), set, c); }), ErrorCode::UnknownExpert);
}

}  // namespace
