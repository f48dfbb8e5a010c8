// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "mepg/core/error.hpp"
#include "mepg/core/rng.hpp"
#include "mepg/geometry/geometry.hpp"
#include "mepg/geometry/layout_io.hpp"

namespace {

using namespace mepg;
using namespace mepg::geometry;

// Brute-force oracle: test every cell centre in floating point.
RegionMask rasterize_oracle(const BoundingBox& b, int h, int w) {
    RegionMask mask(h, w);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            const double cx = (c + 0.5) * 1000.0 / w;
            const double cy = (r + 0.5) * 1000.0 / h;
            mask.set(r, c, b.x1 <= cx && cx < b.x2 && b.y1 <= cy && cy < b.y2);
        }
    }
    return mask;
}

BoundingBox random_valid_box(Rng& rng) {
    const int x1 = static_cast<int>(rng.below(991));
    const int y1 = static_cast<int>(rng.below(991));
    const int x2 = x1 + 10 + static_cast<int>(rng.below(static_cast<std::size_t>(1000 - x1 - 10) + 1));
    const int y2 = y1 + 10 + static_cast<int>(rng.below(static_cast<std::size_t>(1000 - y1 - 10) + 1));
    return {x1, y1, x2, y2};
}

bool has_kind(const ValidationResult& r, ViolationKind kind) {
    for (const auto& v : r.violations) {
        if (v.kind == kind) return true;
    }
    return false;
}

Layout two_halves() {
    Layout l;
    l.global_prompt = "room";
    l.regions = {{{0, 0, 500, 1000}, "window", "expert1", "realism"},
                 {{500, 0, 1000, 1000}, "bookshelf", "expert2", "anime"}};
    return l;
}

TEST(ValidateBox, FullCanvasIsValid) { EXPECT_TRUE(validate_box({0, 0, 1000, 1000}).ok()); }

TEST(ValidateBox, ZeroAreaIsDegenerate) {
    EXPECT_TRUE(has_kind(validate_box({0, 0, 0, 0}), ViolationKind::Degenerate));
}

TEST(ValidateBox, InvertedX) {
    const auto r = validate_box({100, 100, 90, 200});
    EXPECT_TRUE(has_kind(r, ViolationKind::InvertedX));
    EXPECT_FALSE(has_kind(r, ViolationKind::InvertedY));
}

TEST(ValidateBox, OutOfRangeAndThin) {
    EXPECT_TRUE(has_kind(validate_box({-1, 0, 500, 500}), ViolationKind::OutOfRange));
    EXPECT_TRUE(has_kind(validate_box({0, 0, 1001, 500}), ViolationKind::OutOfRange));
    EXPECT_TRUE(has_kind(validate_box({100, 100, 105, 500}), ViolationKind::BelowMinBox));
}

TEST(ValidateLayout, RegionCapAndEmptyPrompt) {
    Layout l;
    for (int i = 0; i < 9; ++i) l.regions.push_back({{0, 0, 1000, 1000}, "x" + std::to_string(i), "", ""});
    l.regions[3].prompt = "  ";
    const auto r = validate_layout(l);
    EXPECT_TRUE(has_kind(r, ViolationKind::TooManyRegions));
    EXPECT_TRUE(has_kind(r, ViolationKind::EmptyPrompt));
}

TEST(RepairLayout, ClampsNegativeCoordinate) {
    Layout l;
    l.regions = {{{-50, 0, 500, 500}, "cat", "", ""}};
    EXPECT_EQ(repair_layout(l).regions[0].box, (BoundingBox{0, 0, 500, 500}));
}

TEST(RepairLayout, ExpandsThinBoxSymmetrically) {
    Layout l;
    l.regions = {{{100, 100, 104, 500}, "pole", "", ""}};
    EXPECT_EQ(repair_layout(l).regions[0].box, (BoundingBox{97, 100, 107, 500}));
}

TEST(RepairLayout, ExpansionShiftsAwayFromCanvasEdge) {
    EXPECT_EQ(repair_box({0, 0, 2, 1000}), (BoundingBox{0, 0, 10, 1000}));
    EXPECT_EQ(repair_box({998, 0, 1000, 1000}), (BoundingBox{990, 0, 1000, 1000}));
    EXPECT_EQ(repair_box({400, 250, 0, 750}), (BoundingBox{0, 250, 400, 750}));
}

TEST(RepairLayout, DeduplicatesIdenticalRegions) {
    Layout l;
    l.regions = {{{0, 0, 500, 500}, "cat", "a", ""}, {{0, 0, 500, 500}, "cat", "a", ""}};
    EXPECT_EQ(repair_layout(l).regions.size(), 1u);
}

TEST(RepairLayout, EmptyPromptIsImpossible) {
    Layout l;
    l.regions = {{{0, 0, 500, 500}, "", "", ""}};
    try {
        repair_layout(l);
        FAIL() << "expected RepairImpossible";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::RepairImpossible);
    }
}

TEST(RepairLayout, IdempotentAndAlwaysValid) {
    Rng rng(11);
    for (int trial = 0; trial < 500; ++trial) {
        Layout l;
        const std::size_t n = rng.below(12);
        for (std::size_t i = 0; i < n; ++i) {
            auto coord = [&] { return static_cast<int>(rng.below(1400)) - 200; };
            l.regions.push_back({{coord(), coord(), coord(), coord()}, "p" + std::to_string(rng.below(3)), "", ""});
        }
        const Layout once = repair_layout(l);
        EXPECT_EQ(repair_layout(once), once);
        EXPECT_TRUE(validate_layout(once).ok());
    }
}

TEST(Rasterize, FullCanvasOn8x8) { EXPECT_EQ(rasterize({0, 0, 1000, 1000}, 8, 8).count(), 64u); }

TEST(Rasterize, QuarterCanvasOn8x8) {
    const RegionMask m = rasterize({0, 0, 500, 500}, 8, 8);
    EXPECT_EQ(m.count(), 16u);
    for (int r = 0; r < 8; ++r) {
        for (int c = 0; c < 8; ++c) EXPECT_EQ(m.at(r, c), r < 4 && c < 4);
    }
}

TEST(Rasterize, SingleCellGrid) { EXPECT_EQ(rasterize({0, 0, 1000, 1000}, 1, 1).count(), 1u); }

TEST(Rasterize, InvalidBoxThrows) {
    EXPECT_THROW(rasterize({100, 100, 90, 200}, 8, 8), Error);
}

TEST(Rasterize, MatchesCellCentreOracle) {
    Rng rng(7);
    for (int trial = 0; trial < 1000; ++trial) {
        const BoundingBox b = random_valid_box(rng);
        const int h = 1 + static_cast<int>(rng.below(64));
        const int w = 1 + static_cast<int>(rng.below(64));
        ASSERT_EQ(rasterize(b, h, w), rasterize_oracle(b, h, w)) << trial;
    }
}

TEST(Rasterize, ContainmentIsMonotone) {
    Rng rng(8);
    for (int trial = 0; trial < 500; ++trial) {
        const BoundingBox inner = random_valid_box(rng);
        BoundingBox outer = inner;
        outer.x1 -= static_cast<int>(rng.below(static_cast<std::size_t>(outer.x1) + 1));
        outer.y1 -= static_cast<int>(rng.below(static_cast<std::size_t>(outer.y1) + 1));
        outer.x2 += static_cast<int>(rng.below(static_cast<std::size_t>(1000 - outer.x2) + 1));
        outer.y2 += static_cast<int>(rng.below(static_cast<std::size_t>(1000 - outer.y2) + 1));
        const int g = 1 + static_cast<int>(rng.below(48));
        EXPECT_TRUE(rasterize(inner, g, g).subset_of(rasterize(outer, g, g)));
    }
}

TEST(Coverage, EmptyLayout) {
    const auto rep = coverage(Layout{}, 8, 8);
    EXPECT_EQ(rep.covered_fraction, 0.0);
    EXPECT_TRUE(rep.overlaps.empty());
}

TEST(Coverage, SingleFullCanvas) {
    Layout l;
    l.regions = {{BoundingBox::full_canvas(), "all", "", ""}};
    const auto rep = coverage(l, 8, 8);
    EXPECT_EQ(rep.covered_fraction, 1.0);
    EXPECT_TRUE(rep.overlaps.empty());
}

TEST(Coverage, DisjointHalves) {
    const auto rep = coverage(two_halves(), 8, 8);
    EXPECT_EQ(rep.covered_fraction, 1.0);
    ASSERT_EQ(rep.overlaps.size(), 1u);
    EXPECT_EQ(rep.overlaps[0].cells, 0u);
    EXPECT_EQ(rep.region_cells[0] + rep.region_cells[1], 64u);
}

TEST(Coverage, OverlapCount) {
    Layout l;
    l.regions = {{{0, 0, 750, 1000}, "a", "", ""}, {{250, 0, 1000, 1000}, "b", "", ""}};
    const auto rep = coverage(l, 4, 4);
    EXPECT_EQ(rep.overlaps[0].cells, 8u);  // columns 1 and 2
}

TEST(SwapRegions, SelfSwapIsIdentity) {
    const Layout l = two_halves();
    EXPECT_EQ(swap_regions(l, 1, 1), l);
}

TEST(SwapRegions, ExchangesBoxesOnly) {
    const Layout swapped = swap_regions(two_halves(), 0, 1);
    EXPECT_EQ(swapped.regions[0].prompt, "window");
    EXPECT_EQ(swapped.regions[0].box, (BoundingBox{500, 0, 1000, 1000}));
    EXPECT_EQ(swapped.regions[1].box, (BoundingBox{0, 0, 500, 1000}));
    EXPECT_EQ(swapped.regions[1].expert_id, "expert2");
}

TEST(SwapRegions, Involution) {
    const Layout l = two_halves();
    EXPECT_EQ(swap_regions(swap_regions(l, 0, 1), 0, 1), l);
    EXPECT_EQ(layout_to_json(swap_regions(swap_regions(l, 1, 0), 0, 1)).dump(), layout_to_json(l).dump());
}

TEST(SwapRegions, OutOfRange) {
    try {
        swap_regions(two_halves(), 0, 2);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::IndexOutOfRange);
    }
}

TEST(LayoutJson, RoundTripPreservesLayout) {
    Layout l = two_halves();
    l.grid = GridSize{32, 32};
    const auto doc = layout_to_json(l);
    EXPECT_EQ(doc["schema"], "mepg_layout_v1");
    EXPECT_EQ(layout_from_json(doc), l);
}

TEST(LayoutJson, RejectsForeignSchemaAndBadBox) {
    EXPECT_THROW(layout_from_json({{"schema", "other"}}), Error);
    nlohmann::json doc = {{"regions", {{{"box", {1, 2, 3}}, {"prompt", "x"}}}}};
    EXPECT_THROW(layout_from_json(doc), Error);
}

}  // namespace
