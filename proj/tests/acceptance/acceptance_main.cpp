// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include "mepg/core/error.hpp"
#include "mepg/core/hash.hpp"
#include "mepg/core/lexicon.hpp"
#include "mepg/core/rng.hpp"
#include "mepg/diffusion/image_io.hpp"
#include "mepg/diffusion/sampler.hpp"
#include "mepg/experiment/toy.hpp"
#include "mepg/geometry/geometry.hpp"
#include "mepg/moe/med.hpp"
#include "mepg/moe/routing.hpp"
#include "mepg/neural/checkpoint.hpp"
#include "mepg/neural/gate.hpp"
#include "mepg/neural/grad_check.hpp"
#include "mepg/planner/backend.hpp"
#include "mepg/planner/chain.hpp"
#include "mepg/scheduler/cross_denoise.hpp"
#include "oracles.hpp"

namespace {

using namespace mepg;
using nlohmann::json;
namespace fs = std::filesystem;

struct Outcome {
    bool pass = false;
    std::string detail;
};

Outcome fail(std::string detail) { return {false, std::move(detail)}; }

std::string fmt(double v, int precision = 4) {
    std::ostringstream ss;
    ss.precision(precision);
    ss << v;
    return ss.str();
}

void progress(const std::string& line) { std::cerr << "  .. " << line << '\n'; }

// ---------------------------------------------------------------------------

Outcome stage_schedule() {
    std::size_t local = 0, global = 0;
    for (std::size_t t = 1; t <= 50; ++t) {
        (scheduler::stage_of(t, 50, 0.7) == scheduler::Stage::Local ? local : global)++;
    }
    if (local != 35 || global != 15) {
        return fail("N=50 p1=0.7 gave " + std::to_string(local) + " local / " + std::to_string(global) + " global");
    }
    Rng rng(20261015);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + rng.below(scheduler::kMaxSteps);
        const double p1 = trial < 2 ? static_cast<double>(trial) : rng.uniform();
        std::size_t count = 0;
        for (std::size_t t = 1; t <= n; ++t) count += scheduler::stage_of(t, n, p1) == scheduler::Stage::Local;
        const auto expected = static_cast<std::size_t>(std::floor(p1 * static_cast<double>(n)));
        if (count != expected || count != oracle::local_step_count(n, p1)) {
            return fail("N=" + std::to_string(n) + " p1=" + fmt(p1, 17) + ": " + std::to_string(count) +
                        " local, expected " + std::to_string(expected));
        }
    }
    return {true, "35 local / 15 global at N=50, p1=0.7; floor(p1*N) on 1000 random (N, p1)"};
}

// Toy models are trained once and shared by the criteria that need them.
struct ToyState {
    experiment::ToyModels models;
    double train_seconds = 0.0;
};

ToyState& toy_state() {
    static std::optional<ToyState> state;
    if (!state) {
        const auto start = std::chrono::steady_clock::now();
        state.emplace();
        state->models = experiment::train_toy_models(experiment::ToyConfig{}, progress);
        state->train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    return *state;
}

Outcome base_equivalence() {
    const ToyState& toy = toy_state();
    auto base = std::make_shared<const neural::DenoiserParams>(toy.models.base);
    const moe::ExpertSet set(moe::ExpertRegistry({{"base", "base.ckpt", "mixed", moe::ExpertRole::Global, ""}}), {base});
    geometry::Layout layout;
    layout.global_prompt = "a pattern";
    layout.regions.push_back({geometry::BoundingBox::full_canvas(), "a pattern", "base", ""});
    scheduler::GenerationConfig config;
    config.interleave_g = 0;
    const diffusion::NoiseSchedule schedule(config.steps, config.schedule);
    const std::vector<int> cond = lexicon::tokenize("a pattern");
    for (std::uint64_t seed = 1; seed <= 12; ++seed) {
        config.seed = seed;
        const Tensor fused = scheduler::cross_denoise(layout, set, config).image;
        const Tensor plain = diffusion::sample(*base, schedule, cond, seed, {1, config.height, config.width});
        if (!bit_equal(fused, plain)) return fail("seed " + std::to_string(seed) + ": images differ");
        if (diffusion::encode_png(fused) != diffusion::encode_png(plain)) {
            return fail("seed " + std::to_string(seed) + ": PNG bytes differ");
        }
    }
    return {true, "12 seeds bit-identical (tensor and PNG) at N=50, p1=0.7, interleave off"};
}

Outcome routing_suite() {
    Rng rng(4242);
    for (int trial = 0; trial < 10000; ++trial) {
        const std::size_t e = 1 + rng.below(10);
        const std::size_t k = 1 + rng.below(e);
        std::vector<double> logits(e);
        for (double& l : logits) l = rng.normal() * (1.0 + 3.0 * rng.uniform());
        const moe::RoutingDecision d = moe::route_logits(logits, k);
        const oracle::Route o = oracle::route(logits, k);
        const std::string where = "case " + std::to_string(trial);
        if (d.active_set.size() != k) return fail(where + ": " + std::to_string(d.active_set.size()) + " active, k=" + std::to_string(k));
        if (d.active_set != o.active) return fail(where + ": active set differs from brute force");
        double sum = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            if (std::abs(d.normalized_weights[j] - o.normalized[j]) > 1e-12) return fail(where + ": weight mismatch");
            sum += d.normalized_weights[j];
        }
        if (std::abs(sum - 1.0) > 1e-9) return fail(where + ": weights sum to " + fmt(sum, 17));
        // Every active logit is at least every inactive one.
        double min_active = INFINITY, max_inactive = -INFINITY;
        for (std::size_t i = 0; i < e; ++i) {
            const bool active = std::find(d.active_set.begin(), d.active_set.end(), i) != d.active_set.end();
            (active ? min_active : max_inactive) = active ? std::min(min_active, logits[i]) : std::max(max_inactive, logits[i]);
        }
        if (min_active < max_inactive) return fail(where + ": an inactive expert outranks an active one");
        // Raising one logit never lowers that expert's weight.
        const std::size_t i = rng.below(e);
        std::vector<double> raised = logits;
        raised[i] += rng.uniform(0.0, 3.0);
        if (moe::route_logits(raised, k).normalized_weight(i) < d.normalized_weight(i)) {
            return fail(where + ": raising logit " + std::to_string(i) + " lowered its weight");
        }
    }
    return {true, "10^4 cases: exactly k active, sum within 1e-9, brute-force agreement, logit monotonicity"};
}

Outcome fusion_suite() {
    Rng rng(777);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t m = 1 + rng.below(6);
        const Shape shape{1, 1 + rng.below(12), 1 + rng.below(12)};
        std::vector<Tensor> proposals;
        for (std::size_t i = 0; i < m; ++i) {
            Tensor p(shape);
            for (double& v : p.data()) v = rng.normal() * (rng.below(4) == 0 ? 100.0 : 1.0);
            proposals.push_back(std::move(p));
        }
        std::vector<double> alphas(m);
        if (rng.below(5) == 0) {
            alphas[rng.below(m)] = 1.0;
        } else {
            scheduler::GenerationConfig c;
            c.steps = 1 + rng.below(100);
            c.p1 = rng.uniform();
            c.alpha_global_start = rng.uniform();
            std::vector<std::size_t> areas(m - 1);
            for (auto& a : areas) a = rng.below(200);
            alphas = scheduler::alpha_schedule(1 + rng.below(c.steps), c, areas);
        }
        const Tensor fused = scheduler::fuse_global(proposals, alphas);
        const Tensor expected = oracle::weighted_sum(proposals, alphas);
        double scale = 1.0;
        for (const Tensor& p : proposals) {
            for (double v : p.data()) scale = std::max(scale, std::abs(v));
        }
        for (std::size_t e = 0; e < fused.size(); ++e) worst = std::max(worst, std::abs(fused[e] - expected[e]) / scale);
        if (worst > 1e-12) return fail("case " + std::to_string(trial) + ": deviation " + fmt(worst) + " from recomputation");
        if (!oracle::within_hull(fused, proposals, alphas)) return fail("case " + std::to_string(trial) + ": outside convex hull");
    }
    // alpha schedules sum to exactly 1 at every step.
    std::size_t steps_checked = 0;
    for (int trial = 0; trial < 300; ++trial) {
        scheduler::GenerationConfig c;
        c.steps = 1 + rng.below(200);
        c.p1 = rng.uniform();
        c.interleave_g = rng.below(8);
        c.alpha_global_start = rng.uniform();
        c.alpha_mode = rng.below(2) ? scheduler::AlphaMode::LeadRamp : scheduler::AlphaMode::Fixed;
        std::vector<std::size_t> areas(rng.below(scheduler::kMaxSteps > 0 ? 9 : 1));
        for (auto& a : areas) a = rng.below(3) == 0 ? 0 : rng.below(1024);
        for (std::size_t t = 1; t <= c.steps; ++t, ++steps_checked) {
            const auto alphas = scheduler::alpha_schedule(t, c, areas);
            double sum = 0.0;
            for (double a : alphas) {
                if (a < 0.0) return fail("negative alpha at t=" + std::to_string(t));
                sum += a;
            }
            if (sum != 1.0) return fail("alphas sum to " + fmt(sum, 17) + " at t=" + std::to_string(t));
        }
    }
    return {true, "10^3 fusions within " + fmt(worst, 2) + " (<= 1e-12) and convex; alpha sums exactly 1 on " +
                      std::to_string(steps_checked) + " steps"};
}

Outcome rasterization_oracle() {
    Rng rng(99);
    for (int trial = 0; trial < 1000; ++trial) {
        const int h = 1 + static_cast<int>(rng.below(64));
        const int w = 1 + static_cast<int>(rng.below(64));
        geometry::BoundingBox b;
        do {
            const int xa = static_cast<int>(rng.below(1001)), xb = static_cast<int>(rng.below(1001));
            const int ya = static_cast<int>(rng.below(1001)), yb = static_cast<int>(rng.below(1001));
            b = {std::min(xa, xb), std::min(ya, yb), std::max(xa, xb), std::max(ya, yb)};
        } while (!geometry::validate_box(b).ok());
        const geometry::RegionMask mask = geometry::rasterize(b, h, w);
        if (mask.cells() != oracle::rasterize(b, h, w)) {
            return fail("box (" + std::to_string(b.x1) + "," + std::to_string(b.y1) + "," + std::to_string(b.x2) + "," +
                        std::to_string(b.y2) + ") on " + std::to_string(h) + "x" + std::to_string(w));
        }
    }
    return {true, "1000 random (box, grid) pairs equal cell-centre enumeration"};
}

Outcome gradient_checks() {
    neural::DenoiserConfig cfg;  // default width
    auto params = neural::DenoiserParams::init(cfg, 31);
    Rng rng(5);
    for (double& v : params.cond_emb.data()) v = 0.3 * rng.normal();
    auto random_image = [&](std::size_t n) {
        Tensor t({1, n, n});
        for (double& v : t.data()) v = rng.normal();
        return t;
    };
    std::vector<neural::DenoiseExample> batch;
    for (int i = 0; i < 2; ++i) {
        batch.push_back({random_image(8), 7 + 13 * i, lexicon::tokenize("a striped cat"), random_image(8)});
    }
    auto grads = neural::DenoiserParams::zeros(params.config);
    neural::denoiser_loss(params, batch, &grads);
    std::vector<Tensor*> p;
    std::vector<const Tensor*> g;
    for (auto& n : params.tensors()) p.push_back(n.tensor);
    for (auto& n : grads.tensors()) g.push_back(n.tensor);
    const auto denoiser = neural::grad_check(p, g, [&] { return neural::denoiser_loss(params, batch); }, 100, 11);

    neural::DenoiserConfig small;
    small.channels = 8;
    small.steps = 20;
    const std::vector<neural::DenoiserParams> experts{neural::DenoiserParams::init(small, 1),
                                                      neural::DenoiserParams::init(small, 2)};
    const std::vector<std::string> tags{"blobs", "stripes"};
    const auto samples = neural::make_gate_dataset(tags, 4, 6, diffusion::NoiseSchedule(small.steps), 10);
    const auto examples = neural::gate_features(experts, tags, samples);
    auto gate = neural::GateParams::init(2, small.channels, 8);
    for (double& v : gate.sites[1].bias.data()) v = 0.3;
    auto gate_grads = neural::GateParams::zeros(2, small.channels);
    neural::gate_loss(gate, examples, &gate_grads);
    p.clear();
    g.clear();
    for (auto& n : gate.tensors()) p.push_back(n.tensor);
    for (auto& n : gate_grads.tensors()) g.push_back(n.tensor);
    const auto gate_check = neural::grad_check(p, g, [&] { return neural::gate_loss(gate, examples); }, 60, 12);

    const std::string detail = "denoiser max rel err " + fmt(denoiser.max_rel_error, 3) + " (100 probes), gate " +
                               fmt(gate_check.max_rel_error, 3) + " (60 probes)";
    return {denoiser.max_rel_error < 1e-4 && gate_check.max_rel_error < 1e-4 && denoiser.probes.size() >= 50 &&
                gate_check.probes.size() >= 50,
            detail};
}

Outcome gate_training() {
    ToyState& toy = toy_state();
    const neural::GateTrainReport& report = toy.models.gate_report;
    if (report.expert_hashes_before != report.expert_hashes_after) return fail("expert parameters changed during gate training");

    // Retrain the gate from checkpoints on disk and confirm the files stay untouched.
    const fs::path dir = fs::temp_directory_path() / ("mepg-acceptance-" + std::to_string(::getpid()));
    fs::remove_all(dir);
    const moe::ExpertRegistry registry = experiment::save_toy_models(toy.models, dir);
    std::vector<std::string> before;
    std::vector<neural::DenoiserParams> experts;
    std::vector<std::string> tags;
    for (const auto& e : registry.entries()) {
        before.push_back(sha256_file(e.checkpoint));
        experts.push_back(neural::load_denoiser(e.checkpoint));
        tags.push_back(e.style_tag);
    }
    const experiment::ToyConfig defaults;
    const diffusion::NoiseSchedule schedule(defaults.model.steps, defaults.schedule);
    const std::vector<std::string> styles(experiment::kToyStyles.begin(), experiment::kToyStyles.end());
    const auto samples = neural::make_gate_dataset(styles, defaults.gate_per_style, defaults.seed + 909, schedule,
                                                   defaults.model.steps / 5);
    const neural::GateTrainReport retrained = neural::train_gate(experts, tags, samples, defaults.gate);
    std::vector<std::string> after;
    for (const auto& e : registry.entries()) after.push_back(sha256_file(e.checkpoint));
    fs::remove_all(dir);
    if (before != after) return fail("checkpoint files changed during gate training");
    if (retrained.expert_hashes_before != retrained.expert_hashes_after) return fail("loaded experts changed");

    const std::string detail = "held-out routing accuracy " + fmt(report.heldout_accuracy) + " (" +
                               std::to_string(report.heldout_examples) + " decisions), retrained from checkpoints " +
                               fmt(retrained.heldout_accuracy) + "; expert hashes unchanged";
    return {report.heldout_accuracy >= 0.90 && retrained.heldout_accuracy >= 0.90, detail};
}

Outcome end_to_end() {
    ToyState& toy = toy_state();
    const moe::ExpertSet set = experiment::toy_expert_set(toy.models);
    const experiment::Calibration calibration = experiment::calibrate(set, 8, 1000);
    const scheduler::GenerationConfig config;  // N=50, p1=0.7, interleave 5, k=2
    const experiment::AttributionReport report = experiment::run_attribution(set, config, 50, calibration);
    const auto& c = report.confusion;
    const std::string detail = "attribution accuracy " + fmt(report.accuracy, 3) + " over " +
                               std::to_string(report.regions.size()) + " regions (blobs " + std::to_string(c[0][0]) +
                               "/" + std::to_string(c[0][0] + c[0][1]) + ", stripes " + std::to_string(c[1][1]) + "/" +
                               std::to_string(c[1][0] + c[1][1]) + "); toy training " + fmt(toy.train_seconds, 3) + "s";
    return {report.regions.size() == 100 && report.accuracy >= 0.8, detail};
}

json load_fixture(const std::string& name) {
    std::ifstream in(std::string(MEPG_FIXTURE_DIR) + "/" + name);
    if (!in) raise(ErrorCode::Io, "missing fixture " + name);
    return json::parse(in);
}

Outcome planner_determinism() {
    const json suite = load_fixture("canonical_prompts.json");
    planner::RuleBackend rule;
    std::size_t prompts = 0;
    for (const auto& c : suite.at("cases")) {
        const std::string prompt = c.at("prompt");
        const planner::PlanResult first = planner::run_enhanced_chain(prompt, rule);
        const planner::PlanResult second = planner::run_enhanced_chain(prompt, rule);
        if (!(first.layout == second.layout) || planner::to_json(first.trace) != planner::to_json(second.trace)) {
            return fail("'" + prompt + "' is not deterministic");
        }
        if (!(planner::parse_spatial_prompt(prompt).layout == first.layout)) {
            return fail("'" + prompt + "': chain and direct grammar disagree");
        }
        const auto& want = c.at("regions");
        if (first.layout.regions.size() != want.size()) return fail("'" + prompt + "': wrong region count");
        for (std::size_t i = 0; i < want.size(); ++i) {
            const auto& b = want[i].at("box");
            const geometry::BoundingBox box{b[0], b[1], b[2], b[3]};
            if (!(first.layout.regions[i].box == box)) return fail("'" + prompt + "': region " + std::to_string(i) + " box");
        }
        ++prompts;
    }
    if (prompts != 20) return fail("suite has " + std::to_string(prompts) + " prompts");

    std::size_t fallbacks = 0;
    for (const char* name : {"transcript_corrupt_step3.json", "transcript_corrupt_step2.json"}) {
        planner::ReplayBackend replay(load_fixture(name));
        try {
            const planner::PlanResult plan = planner::run_enhanced_chain(replay.prompt(), replay);
            if (!plan.trace.fallback_engaged) return fail(std::string(name) + ": fallback not engaged");
            if (!geometry::validate_layout(plan.layout).ok()) return fail(std::string(name) + ": invalid fallback layout");
            ++fallbacks;
        } catch (const std::exception& e) {
            return fail(std::string(name) + " raised: " + e.what());
        }
    }
    planner::ReplayBackend golden(load_fixture("transcript_ok.json"));
    if (planner::run_enhanced_chain(golden.prompt(), golden).trace.fallback_engaged) {
        return fail("golden transcript engaged the fallback");
    }
    return {true, "20 canonical prompts exact and repeatable; " + std::to_string(fallbacks) +
                      " corrupt transcripts fell back without error"};
}

struct Criterion {
    const char* name;
    double budget_seconds;
    std::function<Outcome()> run;
    bool needs_toy = false;
};

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {"stage-schedule", 1, stage_schedule},
        {"base-model-equivalence", 60, base_equivalence, true},
        {"routing-suite", 10, routing_suite},
        {"fusion-suite", 10, fusion_suite},
        {"rasterization-oracle", 10, rasterization_oracle},
        {"gradient-checks", 60, gradient_checks},
        {"gate-training", 300, gate_training, true},
        {"end-to-end-toy", 600, end_to_end, true},
        {"planner-determinism", 10, planner_determinism},
    };
    std::size_t failures = 0;
    for (const Criterion& c : criteria) {
        progress("running " + std::string(c.name));
        std::optional<std::string> setup_error;
        if (c.needs_toy) {
            // Toy training runs once, outside the per-criterion timer; its
            // time is charged to the end-to-end criterion.
            try {
                toy_state();
            } catch (const std::exception& e) {
                setup_error = std::string("toy training failed: ") + e.what();
            }
        }
        const auto start = std::chrono::steady_clock::now();
        Outcome outcome;
        try {
            outcome = setup_error ? fail(*setup_error) : c.run();
        } catch (const std::exception& e) {
            outcome = fail(std::string("exception: ") + e.what());
        }
        double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (std::string(c.name) == "end-to-end-toy" && !setup_error) seconds += toy_state().train_seconds;
        const bool over_budget = seconds > c.budget_seconds;
        if (over_budget) outcome.detail += "; over the " + fmt(c.budget_seconds) + "s budget";
        const bool pass = outcome.pass && !over_budget;
        failures += !pass;
        std::printf("%s  %-24s %s [%.2fs]\n", pass ? "PASS" : "FAIL", c.name, outcome.detail.c_str(), seconds);
        std::fflush(stdout);
    }
    std::printf("%zu/%zu criteria passed\n", criteria.size() - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
