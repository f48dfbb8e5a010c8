// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mepg/geometry/geometry.hpp"

namespace mepg::planner {

enum class Placement { Left, Right, Top, Bottom, Center, TopLeft, TopRight, BottomLeft, BottomRight };

std::string to_string(Placement placement);
/// Keyword phrase as written in prompts, e.g. "on the left".
std::string_view placement_phrase(Placement placement);
geometry::BoundingBox canonical_box(Placement placement);

/// One parsed clause of a spatial prompt.
struct Clause {
    std::string text;      // the clause without its placement phrase, e.g. "a red circle"
    std::string element;   // unique element name, e.g. "red circle" or "cat 2"
    std::optional<Placement> placement;
    std::string style_tag;  // empty when no style adjective appears
    geometry::BoundingBox box;
    std::size_t offset = 0;  // byte offset of the clause in the prompt
};

/// Grammar:
///   prompt := clause ((","|"and"|", and") clause)* "."?
///   clause := article? word+ placement?
/// Clauses without a placement tile the canvas in equal vertical strips in
/// clause order. At most `max_regions` clauses are kept. Throws GrammarError
/// with the byte offset of the first token that does not fit.
std::vector<Clause> parse_clauses(std::string_view prompt,
                                  std::size_t max_regions = geometry::kDefaultMaxRegions);

/// Layout for the clauses; global prompt is the trimmed input.
geometry::Layout clauses_to_layout(std::string_view prompt, const std::vector<Clause>& clauses);

/// First style tag implied by any word of `text`, or "".
std::string infer_style(std::string_view text);

}  // namespace mepg::planner
