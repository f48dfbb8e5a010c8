// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#include "mepg/planner/chain.hpp"

#include <algorithm>

#include "mepg/core/error.hpp"
#include "mepg/geometry/layout_io.hpp"
#include "mepg/planner/grammar.hpp"

namespace mepg::planner {

using nlohmann::json;
namespace geo = mepg::geometry;

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

json box_json(const geo::BoundingBox& b) { return json::array({b.x1, b.y1, b.x2, b.y2}); }

std::string join(const std::vector<std::string>& items, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += sep;
        out += items[i];
    }
    return out;
}

std::string box_lines(const std::vector<PlacedElement>& placed) {
    std::string out;
    for (const auto& p : placed) out += format_box_line(p.element, p.box) + '\n';
    return out;
}

// Repairs then validates; a layout that still violates the rules is a
// planner bug surfaced as RepairImpossible.
geo::Layout finalize(geo::Layout layout, int min_box, std::size_t max_regions) {
    geo::RepairPolicy policy;
    policy.min_box = min_box;
    policy.max_regions = max_regions;
    layout = geo::repair_layout(layout, policy);
    const geo::ValidationResult check = geo::validate_layout(layout, min_box, max_regions);
    if (!check.ok()) raise(ErrorCode::RepairImpossible, "layout still invalid after repair: " + check.violations.front().message);
    return layout;
}

class Chain {
public:
    Chain(std::string_view prompt, PlannerBackend& backend, const PlannerOptions& options)
        : m_prompt(trim(prompt)), m_backend(backend), m_options(options),
          m_templates(options.templates ? *options.templates : default_templates()) {}

    PlanResult run() {
        PlanResult result;
        PlanTrace& trace = result.trace;
        trace.backend_used = m_backend.identifier();

        const std::string max_elements = std::to_string(m_options.max_elements);
        const std::string lora_elements = call(trace, step::kLoraElements, {{"raw_image", m_prompt}, {"max_elements", max_elements}});
        Step0Result step0;
        step0.elements = parse_element_list(lora_elements, m_options.max_elements);
        const std::string draft =
            call(trace, step::kLoraLayout, {{"raw_image", m_prompt}, {"elements", join(step0.elements, ", ")}});
        step0.boxes = parse_box_lines(draft);
        trace.thought = "elements: " + join(step0.elements, ", ") + "\n" + box_lines(step0.boxes);

        try {
            const std::string listed = call(
                trace, step::kElements,
                {{"prompt", m_prompt}, {"thought", trace.thought}, {"max_elements", max_elements}});
            trace.elements = parse_element_list(listed, m_options.max_elements);
            if (trace.elements.empty()) raise(ErrorCode::PlanEmpty, "no elements in step-1 output");
            const std::string elements = join(trace.elements, ", ");

            trace.positions_hint = call(trace, step::kPositions, {{"prompt", m_prompt}, {"elements", elements}});

            const std::string arranged = call(trace, step::kArrange,
                                              {{"thought", trace.thought},
                                               {"elements", elements},
                                               {"draft", box_lines(step0.boxes)},
                                               {"positions", trace.positions_hint}});
            trace.positions = parse_box_lines(arranged);
            if (trace.positions.empty()) raise(ErrorCode::NoParsableCoordinates, "no coordinates in step-2 output");

            const std::string detailed =
                call(trace, step::kDetails, {{"prompt", m_prompt}, {"coordinates", box_lines(trace.positions)}});
            trace.details = parse_detail_lines(detailed);
            if (trace.details.empty()) raise(ErrorCode::TransformError, "no detail records in step-3 output");

            result.layout = finalize(transform_data_structure(m_prompt, trace.details, m_options.grid_h, m_options.grid_w),
                                     m_options.min_box, m_options.max_elements);
            return result;
        } catch (const Error& e) {
            switch (e.code()) {
                case ErrorCode::PlanEmpty:
                case ErrorCode::NoParsableCoordinates:
                case ErrorCode::TransformError:
                case ErrorCode::RepairImpossible:
                    break;
                default:
                    throw;
            }
            trace.fallback_engaged = true;
            trace.fallback_reason = e.what();
        }
        result.layout = step0_layout(m_prompt, step0, m_options.grid_h, m_options.grid_w, m_options.max_elements,
                                     m_options.min_box);
        return result;
    }

private:
    static const TemplateSet& default_templates() {
        static const TemplateSet set;
        return set;
    }

    std::string call(PlanTrace& trace, std::string_view name, const TemplateVars& vars) {
        std::string text = m_backend.complete(name, m_templates.render(name, vars), m_prompt);
        trace.steps.emplace_back(std::string(name), text);
        return text;
    }

    std::string m_prompt;
    PlannerBackend& m_backend;
    const PlannerOptions& m_options;
    const TemplateSet& m_templates;
};

}  // namespace

json to_json(const PlanTrace& t) {
    json positions = json::array();
    for (const auto& p : t.positions) positions.push_back({{"element", p.element}, {"box", box_json(p.box)}});
    json details = json::array();
    for (const auto& d : t.details) {
        details.push_back({{"element", d.element},
                           {"box", box_json(d.box)},
                           {"description", d.description},
                           {"style_tag", d.style_tag}});
    }
    json steps = json::array();
    for (const auto& [name, text] : t.steps) steps.push_back({{"step", name}, {"output", text}});
    return {{"thought", t.thought},
            {"elements", t.elements},
            {"positions_hint", t.positions_hint},
            {"positions", positions},
            {"details", details},
            {"backend_used", t.backend_used},
            {"fallback_engaged", t.fallback_engaged},
            {"fallback_reason", t.fallback_reason},
            {"steps", steps}};
}

geo::Layout step0_layout(std::string_view prompt, const Step0Result& step0, int grid_h, int grid_w,
                         std::size_t max_elements, int min_box) {
    geo::Layout layout;
    layout.global_prompt = trim(prompt);
    layout.grid = geo::GridSize{grid_h, grid_w};

    std::vector<std::string> names = step0.elements;
    if (names.empty()) {
        for (const auto& b : step0.boxes) names.push_back(b.element);
    }
    if (names.size() > max_elements) names.resize(max_elements);
    if (names.empty()) raise(ErrorCode::PlanEmpty, "no elements extractable from the step-0 analysis");

    auto box_of = [&](const std::string& name) -> const PlacedElement* {
        auto it = std::find_if(step0.boxes.begin(), step0.boxes.end(),
                               [&](const PlacedElement& p) { return p.element == name; });
        return it == step0.boxes.end() ? nullptr : &*it;
    };
    const bool any_box = std::any_of(names.begin(), names.end(), [&](const auto& n) { return box_of(n) != nullptr; });
    const int n = static_cast<int>(names.size());
    for (int i = 0; i < n; ++i) {
        const std::string& name = names[static_cast<std::size_t>(i)];
        geo::BoundingBox box;
        if (any_box) {
            const PlacedElement* placed = box_of(name);
            if (placed == nullptr) continue;
            box = placed->box;
        } else {
            box = {i * geo::kCanvas / n, 0, (i + 1) * geo::kCanvas / n, geo::kCanvas};
        }
        layout.regions.push_back({box, name, "", infer_style(name)});
    }
    return finalize(std::move(layout), min_box, max_elements);
}

geo::Layout transform_data_structure(std::string_view prompt, const std::vector<DetailRecord>& details, int grid_h,
                                     int grid_w) {
    if (grid_h <= 0 || grid_w <= 0) raise(ErrorCode::TransformError, "latent grid must be positive");
    geo::Layout layout;
    layout.global_prompt = trim(prompt);
    layout.grid = geo::GridSize{grid_h, grid_w};
    for (const DetailRecord& d : details) {
        const std::string text = trim(d.description);
        if (text.empty()) raise(ErrorCode::TransformError, "detail record for '" + d.element + "' has no description");
        layout.regions.push_back({d.box, text, "", d.style_tag});
    }
    return layout;
}

PlanResult run_enhanced_chain(std::string_view prompt, PlannerBackend& backend, const PlannerOptions& options) {
    if (trim(prompt).empty()) raise(ErrorCode::PlanEmpty, "prompt is empty");
    try {
        return Chain(prompt, backend, options).run();
    } catch (const Error& e) {
        if (e.code() != ErrorCode::BackendUnavailable || options.fallback_backend == nullptr) throw;
        PlanResult result = Chain(prompt, *options.fallback_backend, options).run();
        result.trace.fallback_reason = std::string("backend ") + backend.identifier() + " unavailable: " + e.what() +
                                       (result.trace.fallback_reason.empty() ? "" : "; " + result.trace.fallback_reason);
        return result;
    }
}

PlanResult parse_spatial_prompt(std::string_view prompt, const PlannerOptions& options) {
    if (trim(prompt).empty()) raise(ErrorCode::PlanEmpty, "prompt is empty");
    const std::vector<Clause> clauses = parse_clauses(prompt, options.max_elements);
    PlanResult result;
    PlanTrace& trace = result.trace;
    trace.backend_used = "rule";
    std::vector<std::string> names;
    for (const Clause& c : clauses) {
        names.push_back(c.element);
        trace.positions.push_back({c.element, c.box});
        trace.details.push_back({c.element, c.box, c.text, c.style_tag});
    }
    trace.elements = names;
    trace.thought = "elements: " + join(names, ", ") + "\n" + box_lines(trace.positions);
    geo::Layout layout = clauses_to_layout(prompt, clauses);
    layout.grid = geo::GridSize{options.grid_h, options.grid_w};
    result.layout = finalize(std::move(layout), options.min_box, options.max_elements);
    return result;
}

}  // namespace mepg::planner
