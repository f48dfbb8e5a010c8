// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#include "mepg/experiment/toy.hpp"

#include <algorithm>
#include <cstdio>
#include <memory>

#include "mepg/core/error.hpp"
#include "mepg/core/lexicon.hpp"
#include "mepg/diffusion/sampler.hpp"
#include "mepg/neural/checkpoint.hpp"
#include "mepg/neural/datasets.hpp"
#include "mepg/scheduler/cross_denoise.hpp"

namespace mepg::experiment {

using nlohmann::json;

namespace {

void emit(const Log& log, const std::string& line) {
    if (log) log(line);
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

neural::TrainReport train_logged(const neural::StyleDataset& data, const neural::TrainConfig& cfg,
                                 const std::optional<neural::DenoiserParams>& init, const Log& log) {
    auto on_epoch = [&](std::size_t epoch, double loss) {
        emit(log, data.name + " epoch " + std::to_string(epoch) + " held-out loss " + fmt(loss));
    };
    auto report = neural::train_expert(data, cfg, init, on_epoch);
    emit(log, data.name + " held-out loss " + fmt(report.initial_heldout_loss) + " -> " +
                  fmt(report.final_heldout_loss));
    return report;
}

}  // namespace

ToyModels train_toy_models(const ToyConfig& config, const Log& log) {
    neural::TrainConfig cfg;
    cfg.model = config.model;
    cfg.schedule = config.schedule;
    cfg.lr = config.lr;
    cfg.seed = config.seed;

    ToyModels m;
    cfg.epochs = config.base_epochs;
    m.base_report = train_logged(neural::make_dataset("mixed", config.base_samples, config.seed), cfg, std::nullopt,
                                 log);
    m.base = m.base_report.params;

    // Fine-tuning from the base keeps the experts' features compatible, so
    // the gate and the MoE sites can mix them.
    cfg.epochs = config.finetune_epochs;
    cfg.seed = config.seed + 1;
    m.blobs_report = train_logged(neural::make_dataset("blobs", config.style_samples, config.seed + 101), cfg, m.base,
                                  log);
    m.blobs = m.blobs_report.params;
    cfg.seed = config.seed + 2;
    m.stripes_report = train_logged(neural::make_dataset("stripes", config.style_samples, config.seed + 202), cfg,
                                    m.base, log);
    m.stripes = m.stripes_report.params;

    const diffusion::NoiseSchedule schedule(config.model.steps, config.schedule);
    const std::vector<std::string> styles(kToyStyles.begin(), kToyStyles.end());
    const std::size_t t_max =
        config.gate_t_max > 0 ? config.gate_t_max : std::max<std::size_t>(1, config.model.steps / 5);
    const auto samples = neural::make_gate_dataset(styles, config.gate_per_style, config.seed + 303, schedule, t_max);
    const std::vector<neural::DenoiserParams> experts{m.base, m.blobs, m.stripes};
    const std::vector<std::string> tags{"mixed", "blobs", "stripes"};
    m.gate_report = neural::train_gate(experts, tags, samples, config.gate);
    m.gate = m.gate_report.gate;
    emit(log, "gate held-out routing accuracy " + fmt(m.gate_report.heldout_accuracy) + " over " +
                  std::to_string(m.gate_report.heldout_examples) + " examples");
    return m;
}

moe::ExpertRegistry save_toy_models(const ToyModels& models, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const std::array<std::pair<const neural::DenoiserParams*, const char*>, 3> items{
        {{&models.base, "base"}, {&models.blobs, "blobs"}, {&models.stripes, "stripes"}}};
    std::vector<moe::ExpertEntry> entries;
    for (const auto& [params, id] : items) {
        const std::string style = std::string(id) == "base" ? "mixed" : id;
        neural::CheckpointMeta meta;
        meta.expert_id = id;
        meta.style_tag = style;
        save_denoiser(dir / (std::string(id) + ".ckpt"), *params, meta);
        entries.push_back({id, std::string(id) + ".ckpt", style,
                           std::string(id) == "base" ? moe::ExpertRole::Global : moe::ExpertRole::Local, ""});
    }
    neural::CheckpointMeta gate_meta;
    gate_meta.kind = "gate";
    neural::save_gate(dir / "gate.ckpt", models.gate, gate_meta);
    moe::ExpertRegistry registry(entries);
    registry.set_gate_path("gate.ckpt");
    registry.save(dir / "experts.yaml");
    return moe::ExpertRegistry::load(dir / "experts.yaml");
}

moe::ExpertSet toy_expert_set(const ToyModels& models) {
    moe::ExpertRegistry registry({{"base", "base.ckpt", "mixed", moe::ExpertRole::Global, ""},
                                  {"blobs", "blobs.ckpt", "blobs", moe::ExpertRole::Local, ""},
                                  {"stripes", "stripes.ckpt", "stripes", moe::ExpertRole::Local, ""}});
    return moe::ExpertSet(registry,
                          {std::make_shared<const neural::DenoiserParams>(models.base),
                           std::make_shared<const neural::DenoiserParams>(models.blobs),
                           std::make_shared<const neural::DenoiserParams>(models.stripes)},
                          models.gate);
}

geometry::Layout toy_layout() {
    geometry::Layout layout;
    layout.global_prompt = neural::style_prompt("mixed");
    layout.regions.push_back({{0, 0, 500, 1000}, neural::style_prompt("blobs"), "blobs", "blobs"});
    layout.regions.push_back({{500, 0, 1000, 1000}, neural::style_prompt("stripes"), "stripes", "stripes"});
    return layout;
}

Calibration calibrate(const moe::ExpertSet& experts, std::size_t samples_per_style, std::uint64_t seed,
                      diffusion::BetaSchedule schedule) {
    if (samples_per_style == 0) raise(ErrorCode::InvalidConfig, "calibration needs at least one sample");
    Calibration c;
    std::array<double*, 2> means{&c.blobs_mean, &c.stripes_mean};
    for (std::size_t s = 0; s < kToyStyles.size(); ++s) {
        const auto& params = experts.params(experts.registry().require(kToyStyles[s]));
        const diffusion::NoiseSchedule sched(params.config.steps, schedule);
        const auto cond = lexicon::tokenize(neural::style_prompt(kToyStyles[s]));
        double sum = 0.0;
        for (std::size_t i = 0; i < samples_per_style; ++i) {
            sum += neural::frequency_statistic(diffusion::sample(params, sched, cond, seed + i));
        }
        *means[s] = sum / static_cast<double>(samples_per_style);
    }
    c.threshold = 0.5 * (c.blobs_mean + c.stripes_mean);
    return c;
}

AttributionReport run_attribution(const moe::ExpertSet& experts, const scheduler::GenerationConfig& config,
                                  std::size_t images, const Calibration& calibration, const Log& log) {
    AttributionReport report;
    report.calibration = calibration;
    const geometry::Layout layout = toy_layout();
    const std::size_t h = config.height, w = config.width;
    // Column ranges match the rasterized halves.
    const std::array<std::pair<std::size_t, std::size_t>, 2> cols{{{0, w / 2}, {w / 2, w}}};
    std::size_t correct = 0;
    for (std::size_t i = 0; i < images; ++i) {
        scheduler::GenerationConfig c = config;
        c.seed = config.seed + i;
        const Tensor image = scheduler::cross_denoise(layout, experts, c).image;
        for (std::size_t r = 0; r < 2; ++r) {
            RegionScore score;
            score.seed = c.seed;
            score.expected = kToyStyles[r];
            score.statistic = neural::frequency_statistic(image, cols[r].first, 0, cols[r].second, h);
            const std::size_t predicted = score.statistic > calibration.threshold ? 1 : 0;
            score.predicted = kToyStyles[predicted];
            ++report.confusion[r][predicted];
            correct += predicted == r;
            report.regions.push_back(score);
        }
        emit(log, "image " + std::to_string(i + 1) + "/" + std::to_string(images) + " left " +
                      fmt(report.regions[report.regions.size() - 2].statistic) + " right " +
                      fmt(report.regions.back().statistic));
    }
    report.accuracy = report.regions.empty() ? 0.0
                                             : static_cast<double>(correct) / static_cast<double>(report.regions.size());
    return report;
}

json to_json(const AttributionReport& report) {
    json regions = json::array();
    for (const auto& r : report.regions) {
        regions.push_back(
            {{"seed", r.seed}, {"expected", r.expected}, {"predicted", r.predicted}, {"statistic", r.statistic}});
    }
    json confusion = json::object();
    for (std::size_t e = 0; e < 2; ++e) {
        for (std::size_t p = 0; p < 2; ++p) confusion[kToyStyles[e]][kToyStyles[p]] = report.confusion[e][p];
    }
    return {{"attribution_accuracy", report.accuracy},
            {"threshold", report.calibration.threshold},
            {"blobs_mean", report.calibration.blobs_mean},
            {"stripes_mean", report.calibration.stripes_mean},
            {"confusion", confusion},
            {"regions", regions}};
}

}  // namespace mepg::experiment
