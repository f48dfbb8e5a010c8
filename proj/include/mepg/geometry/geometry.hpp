// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mepg::geometry {

/// Side length of the abstract planning canvas, in grid units.
inline constexpr int kCanvas = 1000;
inline constexpr int kDefaultMinBox = 10;
inline constexpr std::size_t kDefaultMaxRegions = 8;

/// Axis-aligned box on the 1000x1000 canvas. x grows rightwards, y downwards.
/// The upper bound is inclusive so (0,0,1000,1000) covers the full canvas.
struct BoundingBox {
    int x1 = 0;
    int y1 = 0;
    int x2 = kCanvas;
    int y2 = kCanvas;

    int width() const noexcept { return x2 - x1; }
    int height() const noexcept { return y2 - y1; }
    std::int64_t area() const noexcept { return static_cast<std::int64_t>(width()) * height(); }
    bool contains(const BoundingBox& other) const noexcept {
        return x1 <= other.x1 && y1 <= other.y1 && other.x2 <= x2 && other.y2 <= y2;
    }

    static constexpr BoundingBox full_canvas() noexcept { return {0, 0, kCanvas, kCanvas}; }

    friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct RegionSpec {
    BoundingBox box;
    std::string prompt;
    std::string expert_id;
    std::string style_tag;

    friend bool operator==(const RegionSpec&, const RegionSpec&) = default;
};

/// Latent grid the planner targeted; informational for downstream rasterization.
struct GridSize {
    int h = 0;
    int w = 0;
    friend bool operator==(const GridSize&, const GridSize&) = default;
};

struct Layout {
    std::string global_prompt;
    std::vector<RegionSpec> regions;
    std::optional<GridSize> grid;

    friend bool operator==(const Layout&, const Layout&) = default;
};

enum class ViolationKind {
    OutOfRange,
    Degenerate,
    InvertedX,
    InvertedY,
    BelowMinBox,
    EmptyPrompt,
    TooManyRegions,
};

struct Violation {
    ViolationKind kind;
    /// Region index the violation belongs to; nullopt for layout-level issues.
    std::optional<std::size_t> region;
    std::string message;
};

struct ValidationResult {
    std::vector<Violation> violations;
    bool ok() const noexcept { return violations.empty(); }
};

std::string to_string(ViolationKind kind);

ValidationResult validate_box(const BoundingBox& box, int min_box = kDefaultMinBox);
ValidationResult validate_layout(const Layout& layout, int min_box = kDefaultMinBox,
                                 std::size_t max_regions = kDefaultMaxRegions);

struct RepairPolicy {
    int min_box = kDefaultMinBox;
    std::size_t max_regions = kDefaultMaxRegions;
    /// Drop regions beyond max_regions (keeping the first ones).
    bool truncate = true;
};

/// Clamp, un-invert, expand thin boxes symmetrically, drop duplicate
/// (box, prompt) regions. Region order is preserved. Throws RepairImpossible
/// on an empty region prompt.
Layout repair_layout(const Layout& layout, const RepairPolicy& policy = {});
BoundingBox repair_box(BoundingBox box, int min_box = kDefaultMinBox);

/// Binary footprint of a box on a latent grid, row-major.
class RegionMask {
public:
    RegionMask() = default;
    RegionMask(int grid_h, int grid_w, bool value = false);

    int grid_h() const noexcept { return m_h; }
    int grid_w() const noexcept { return m_w; }
    bool at(int r, int c) const noexcept { return m_cells[static_cast<std::size_t>(r) * m_w + c] != 0; }
    void set(int r, int c, bool v) noexcept { m_cells[static_cast<std::size_t>(r) * m_w + c] = v ? 1 : 0; }
    const std::vector<std::uint8_t>& cells() const noexcept { return m_cells; }
    std::size_t count() const noexcept;

    bool subset_of(const RegionMask& other) const noexcept;

    friend bool operator==(const RegionMask&, const RegionMask&) = default;

private:
    int m_h = 0;
    int m_w = 0;
    std::vector<std::uint8_t> m_cells;
};

/// Sets cell (r,c) iff its center ((c+0.5)*1000/w, (r+0.5)*1000/h) lies in
/// [x1,x2) x [y1,y2). Throws InvalidBox if the box does not validate.
RegionMask rasterize(const BoundingBox& box, int grid_h, int grid_w, int min_box = kDefaultMinBox);

struct OverlapEntry {
    std::size_t a;
    std::size_t b;
    std::size_t cells;
};

struct CoverageReport {
    int grid_h = 0;
    int grid_w = 0;
    std::vector<int> counts;  // regions covering each cell, row-major
    double covered_fraction = 0.0;
    std::vector<OverlapEntry> overlaps;  // every pair i<j, in order
    std::vector<std::size_t> region_cells;
};

CoverageReport coverage(const Layout& layout, int grid_h, int grid_w);

/// Exchanges the boxes of regions i and j; everything else is untouched.
Layout swap_regions(const Layout& layout, std::size_t i, std::size_t j);

}  // namespace mepg::geometry
