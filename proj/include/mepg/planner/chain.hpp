// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <json.hpp>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mepg/geometry/geometry.hpp"
#include "mepg/planner/backend.hpp"
#include "mepg/planner/templates.hpp"
#include "mepg/planner/wire.hpp"

namespace mepg::planner {

/// Audit record of one planning run.
struct PlanTrace {
    std::string thought;                  // step-0 analysis (element list and draft boxes)
    std::vector<std::string> elements;    // step 1
    std::string positions_hint;           // step 1, raw text handed to step 2
    std::vector<PlacedElement> positions; // step 2
    std::vector<DetailRecord> details;    // step 3
    std::string backend_used;
    bool fallback_engaged = false;
    std::string fallback_reason;
    /// Raw backend output per step name, in execution order.
    std::vector<std::pair<std::string, std::string>> steps;
};

nlohmann::json to_json(const PlanTrace& trace);

struct PlannerOptions {
    int grid_h = 32;
    int grid_w = 32;
    std::size_t max_elements = geometry::kDefaultMaxRegions;
    int min_box = geometry::kDefaultMinBox;
    /// Used when the primary backend raises BackendUnavailable; null means the
    /// error propagates.
    PlannerBackend* fallback_backend = nullptr;
    const TemplateSet* templates = nullptr;  // null selects the compiled-in set
};

struct PlanResult {
    geometry::Layout layout;
    PlanTrace trace;
};

/// Step-0 output parsed into its structured form.
struct Step0Result {
    std::vector<std::string> elements;
    std::vector<PlacedElement> boxes;
};

/// Layout derived from step-0 data alone: elements that received a draft box
/// keep it; when none did, all elements tile the canvas in vertical strips.
/// Throws PlanEmpty when there is nothing to place.
geometry::Layout step0_layout(std::string_view prompt, const Step0Result& step0, int grid_h, int grid_w,
                              std::size_t max_elements = geometry::kDefaultMaxRegions,
                              int min_box = geometry::kDefaultMinBox);

/// Detail records to a layout on the given latent grid. Records without a
/// description raise TransformError; an empty list gives a pure-global layout.
geometry::Layout transform_data_structure(std::string_view prompt, const std::vector<DetailRecord>& details,
                                          int grid_h, int grid_w);

/// Step 0 (analysis), step 1 (elements and positions), step 2 (boxes),
/// step 3 (details), then transformation into a repaired, validated layout.
/// If steps 1-3 yield nothing usable the step-0 layout is returned with
/// fallback_engaged set.
PlanResult run_enhanced_chain(std::string_view prompt, PlannerBackend& backend, const PlannerOptions& options = {});

/// The rule grammar applied directly, without the chain. Equal to
/// run_enhanced_chain with a RuleBackend.
PlanResult parse_spatial_prompt(std::string_view prompt, const PlannerOptions& options = {});

}  // namespace mepg::planner
