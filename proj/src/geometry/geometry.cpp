// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#include "mepg/geometry/geometry.hpp"

#include <algorithm>
#include <cctype>
#include <utility>

#include "mepg/core/error.hpp"

namespace mepg::geometry {

namespace {

std::string box_string(const BoundingBox& b) {
    return "(" + std::to_string(b.x1) + "," + std::to_string(b.y1) + "," + std::to_string(b.x2) + "," +
           std::to_string(b.y2) + ")";
}

bool blank(const std::string& s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

// Grow [lo, hi) to at least min_len, centred, then shift back inside the canvas.
void expand_span(int& lo, int& hi, int min_len) {
    const int len = hi - lo;
    if (len >= min_len) return;
    const int deficit = min_len - len;
    const int left = deficit / 2;
    lo -= left;
    hi += deficit - left;
    if (lo < 0) {
        hi -= lo;
        lo = 0;
    }
    if (hi > kCanvas) {
        lo -= hi - kCanvas;
        hi = kCanvas;
    }
}

// First cell index whose centre (2i+1)*500/n is >= v, computed in integers.
int first_cell_at_or_after(int v, int n) {
    // (2i+1)*500 >= v*n  <=>  i >= (v*n - 500) / 1000
    const long long num = static_cast<long long>(v) * n - 500;
    if (num <= 0) return 0;
    return static_cast<int>((num + 999) / 1000);
}

}  // namespace

std::string to_string(ViolationKind kind) {
    switch (kind) {
        case ViolationKind::OutOfRange: return "out_of_range";
        case ViolationKind::Degenerate: return "degenerate";
        case ViolationKind::InvertedX: return "inverted_x";
        case ViolationKind::InvertedY: return "inverted_y";
        case ViolationKind::BelowMinBox: return "below_min_box";
        case ViolationKind::EmptyPrompt: return "empty_prompt";
        case ViolationKind::TooManyRegions: return "too_many_regions";
    }
    return "unknown";
}

ValidationResult validate_box(const BoundingBox& b, int min_box) {
    ValidationResult result;
    auto add = [&](ViolationKind kind, std::string msg) {
        result.violations.push_back({kind, std::nullopt, box_string(b) + ": " + std::move(msg)});
    };
    auto in_range = [](int v) { return v >= 0 && v <= kCanvas; };
    if (!in_range(b.x1) || !in_range(b.y1) || !in_range(b.x2) || !in_range(b.y2)) {
        add(ViolationKind::OutOfRange, "coordinates must lie in [0,1000]");
    }
    if (b.x1 == b.x2 || b.y1 == b.y2) add(ViolationKind::Degenerate, "zero-area box");
    if (b.x1 > b.x2) add(ViolationKind::InvertedX, "x1 > x2");
    if (b.y1 > b.y2) add(ViolationKind::InvertedY, "y1 > y2");
    const bool thin_x = b.x2 > b.x1 && b.width() < min_box;
    const bool thin_y = b.y2 > b.y1 && b.height() < min_box;
    if (thin_x || thin_y) add(ViolationKind::BelowMinBox, "side shorter than " + std::to_string(min_box));
    return result;
}

ValidationResult validate_layout(const Layout& layout, int min_box, std::size_t max_regions) {
    ValidationResult result;
    if (layout.regions.size() > max_regions) {
        result.violations.push_back({ViolationKind::TooManyRegions, std::nullopt,
                                     std::to_string(layout.regions.size()) + " regions exceed the cap of " +
                                         std::to_string(max_regions)});
    }
    for (std::size_t i = 0; i < layout.regions.size(); ++i) {
        const RegionSpec& region = layout.regions[i];
        for (Violation v : validate_box(region.box, min_box).violations) {
            v.region = i;
            result.violations.push_back(std::move(v));
        }
        if (blank(region.prompt)) {
            result.violations.push_back({ViolationKind::EmptyPrompt, i, "region prompt is empty"});
        }
    }
    return result;
}

BoundingBox repair_box(BoundingBox b, int min_box) {
    if (b.x1 > b.x2) std::swap(b.x1, b.x2);
    if (b.y1 > b.y2) std::swap(b.y1, b.y2);
    b.x1 = std::clamp(b.x1, 0, kCanvas);
    b.x2 = std::clamp(b.x2, 0, kCanvas);
    b.y1 = std::clamp(b.y1, 0, kCanvas);
    b.y2 = std::clamp(b.y2, 0, kCanvas);
    const int min_len = std::clamp(min_box, 1, kCanvas);
    expand_span(b.x1, b.x2, min_len);
    expand_span(b.y1, b.y2, min_len);
    return b;
}

Layout repair_layout(const Layout& layout, const RepairPolicy& policy) {
    Layout out;
    out.global_prompt = layout.global_prompt;
    out.grid = layout.grid;
    for (std::size_t i = 0; i < layout.regions.size(); ++i) {
        RegionSpec region = layout.regions[i];
        if (blank(region.prompt)) {
            raise(ErrorCode::RepairImpossible, "region " + std::to_string(i) + " has an empty prompt");
        }
        region.box = repair_box(region.box, policy.min_box);
        const bool duplicate = std::any_of(out.regions.begin(), out.regions.end(), [&](const RegionSpec& r) {
            return r.box == region.box && r.prompt == region.prompt;
        });
        if (!duplicate) out.regions.push_back(std::move(region));
    }
    if (policy.truncate && out.regions.size() > policy.max_regions) out.regions.resize(policy.max_regions);
    return out;
}

RegionMask::RegionMask(int grid_h, int grid_w, bool value)
    : m_h(grid_h), m_w(grid_w), m_cells(static_cast<std::size_t>(grid_h) * grid_w, value ? 1 : 0) {}

std::size_t RegionMask::count() const noexcept {
    return static_cast<std::size_t>(std::count(m_cells.begin(), m_cells.end(), std::uint8_t{1}));
}

bool RegionMask::subset_of(const RegionMask& other) const noexcept {
    if (m_h != other.m_h || m_w != other.m_w) return false;
    for (std::size_t i = 0; i < m_cells.size(); ++i) {
        if (m_cells[i] && !other.m_cells[i]) return false;
    }
    return true;
}

RegionMask rasterize(const BoundingBox& box, int grid_h, int grid_w, int min_box) {
    if (grid_h < 1 || grid_w < 1) {
        raise(ErrorCode::InvalidConfig, "grid dimensions must be positive");
    }
    if (const auto check = validate_box(box, min_box); !check.ok()) {
        raise(ErrorCode::InvalidBox, check.violations.front().message);
    }
    RegionMask mask(grid_h, grid_w);
    // Half-open [first(lo), first(hi)) selects centres with lo <= centre < hi.
    const int c0 = first_cell_at_or_after(box.x1, grid_w);
    const int c1 = std::min(first_cell_at_or_after(box.x2, grid_w), grid_w);
    const int r0 = first_cell_at_or_after(box.y1, grid_h);
    const int r1 = std::min(first_cell_at_or_after(box.y2, grid_h), grid_h);
    for (int r = r0; r < r1; ++r) {
        for (int c = c0; c < c1; ++c) mask.set(r, c, true);
    }
    return mask;
}

CoverageReport coverage(const Layout& layout, int grid_h, int grid_w) {
    CoverageReport report;
    report.grid_h = grid_h;
    report.grid_w = grid_w;
    report.counts.assign(static_cast<std::size_t>(grid_h) * grid_w, 0);
    std::vector<RegionMask> masks;
    masks.reserve(layout.regions.size());
    for (const RegionSpec& region : layout.regions) {
        masks.push_back(rasterize(region.box, grid_h, grid_w, 1));
        report.region_cells.push_back(masks.back().count());
        const auto& cells = masks.back().cells();
        for (std::size_t i = 0; i < cells.size(); ++i) report.counts[i] += cells[i];
    }
    const auto covered = std::count_if(report.counts.begin(), report.counts.end(), [](int c) { return c > 0; });
    report.covered_fraction =
        report.counts.empty() ? 0.0 : static_cast<double>(covered) / static_cast<double>(report.counts.size());
    for (std::size_t a = 0; a < masks.size(); ++a) {
        for (std::size_t b = a + 1; b < masks.size(); ++b) {
            std::size_t shared = 0;
            const auto& ca = masks[a].cells();
            const auto& cb = masks[b].cells();
            for (std::size_t i = 0; i < ca.size(); ++i) shared += (ca[i] & cb[i]);
            report.overlaps.push_back({a, b, shared});
        }
    }
    return report;
}

Layout swap_regions(const Layout& layout, std::size_t i, std::size_t j) {
    if (i >= layout.regions.size() || j >= layout.regions.size()) {
        raise(ErrorCode::IndexOutOfRange, "swap_regions(" + std::to_string(i) + ", " + std::to_string(j) +
                                              ") with " + std::to_string(layout.regions.size()) + " regions");
    }
    Layout out = layout;
    std::swap(out.regions[i].box, out.regions[j].box);
    return out;
}

}  // namespace mepg::geometry
