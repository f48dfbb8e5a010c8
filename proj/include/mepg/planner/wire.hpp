// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mepg/geometry/geometry.hpp"

// Line-oriented text conventions exchanged with planner backends.
namespace mepg::planner {

/// Comma-separated names: trimmed, stripped of list bullets and a trailing
/// period, deduplicated case-insensitively (first spelling wins), capped at
/// `max_elements`.
std::vector<std::string> parse_element_list(std::string_view text, std::size_t max_elements);

struct PlacedElement {
    std::string element;
    geometry::BoundingBox box;  // repaired: clamped, un-inverted, min size
};

/// Lines of the form `element: (x1,y1),(x2,y2)`. Lines that do not match are
/// dropped; a repeated element keeps its first box.
std::vector<PlacedElement> parse_box_lines(std::string_view text);

std::string format_box_line(const std::string& element, const geometry::BoundingBox& box);

struct DetailRecord {
    std::string element;
    geometry::BoundingBox box;
    std::string description;
    std::string style_tag;  // from a trailing `[style: name]`, else inferred
};

/// Lines of the form `element: (x1,y1),(x2,y2): description [style: name]`.
/// Blank lines are skipped; any other line lacking a box or a description
/// throws TransformError.
std::vector<DetailRecord> parse_detail_lines(std::string_view text);

std::string format_detail_line(const DetailRecord& record);

}  // namespace mepg::planner
