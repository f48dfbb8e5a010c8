// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>

#include "mepg/experiment/toy.hpp"
#include "mepg/neural/checkpoint.hpp"

namespace {

using namespace mepg;

experiment::ToyConfig tiny() {
    experiment::ToyConfig c;
    c.model.channels = 6;
    c.model.steps = 10;
    c.schedule = diffusion::BetaSchedule::Linear;
    c.base_samples = 16;
    c.style_samples = 8;
    c.base_epochs = 1;
    c.finetune_epochs = 1;
    c.gate_per_style = 6;
    c.gate.epochs = 20;
    return c;
}

TEST(Toy, TrainSaveLoadAndAttribute) {
    std::vector<std::string> lines;
    const auto models = experiment::train_toy_models(tiny(), [&](const std::string& l) { lines.push_back(l); });
    EXPECT_FALSE(lines.empty());
    EXPECT_EQ(models.gate_report.expert_hashes_before, models.gate_report.expert_hashes_after);

    const auto dir = std::filesystem::temp_directory_path() / "mepg_toy_test";
    std::filesystem::remove_all(dir);
    const auto registry = experiment::save_toy_models(models, dir);
    const auto loaded = moe::ExpertSet::load(registry);
    ASSERT_EQ(loaded.size(), 3u);
    EXPECT_EQ(loaded.registry()[registry.first_global()].expert_id, "base");
    EXPECT_TRUE(loaded.params(registry.require("stripes")) == models.stripes);
    ASSERT_TRUE(loaded.gate().has_value());
    EXPECT_TRUE(*loaded.gate() == models.gate);

    const auto cal = experiment::calibrate(loaded, 1, 3, diffusion::BetaSchedule::Linear);
    EXPECT_DOUBLE_EQ(cal.threshold, 0.5 * (cal.blobs_mean + cal.stripes_mean));
    scheduler::GenerationConfig g;
    g.steps = 10;
    g.schedule = diffusion::BetaSchedule::Linear;
    const auto report = experiment::run_attribution(loaded, g, 2, cal);
    ASSERT_EQ(report.regions.size(), 4u);
    std::size_t total = 0;
    for (const auto& row : report.confusion) total += row[0] + row[1];
    EXPECT_EQ(total, 4u);
    const auto doc = experiment::to_json(report);
    EXPECT_EQ(doc["regions"].size(), 4u);
    EXPECT_TRUE(doc["confusion"].contains("blobs"));
    std::filesystem::remove_all(dir);
}

TEST(Toy, LayoutSplitsCanvasInHalves) {
    const auto layout = experiment::toy_layout();
    ASSERT_EQ(layout.regions.size(), 2u);
    EXPECT_EQ(layout.regions[0].expert_id, "blobs");
    EXPECT_EQ(layout.regions[1].box, (geometry::BoundingBox{500, 0, 1000, 1000}));
    EXPECT_TRUE(geometry::validate_layout(layout).ok());
}

}  // namespace
