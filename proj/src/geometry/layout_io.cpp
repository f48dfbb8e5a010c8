// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#include "mepg/geometry/layout_io.hpp"

#include <fstream>

#include "mepg/core/error.hpp"

namespace mepg::geometry {

using nlohmann::json;

namespace {

template <typename T>
T field(const json& obj, const char* key, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) raise(ErrorCode::Format, where + ": missing field '" + key + "'");
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        raise(ErrorCode::Format, where + ": field '" + key + "': " + e.what());
    }
}

}  // namespace

json layout_to_json(const Layout& layout) {
    json regions = json::array();
    for (const RegionSpec& r : layout.regions) {
        regions.push_back({
            {"box", {r.box.x1, r.box.y1, r.box.x2, r.box.y2}},
            {"prompt", r.prompt},
            {"expert_id", r.expert_id},
            {"style_tag", r.style_tag},
        });
    }
    json doc = {{"schema", kLayoutSchema}, {"global_prompt", layout.global_prompt}, {"regions", regions}};
    if (layout.grid) doc["grid"] = {{"h", layout.grid->h}, {"w", layout.grid->w}};
    return doc;
}

Layout layout_from_json(const json& doc) {
    if (!doc.is_object()) raise(ErrorCode::Format, "layout document must be an object");
    if (doc.contains("schema") && doc["schema"] != kLayoutSchema) {
        raise(ErrorCode::Format, "unsupported layout schema " + doc["schema"].dump());
    }
    Layout layout;
    layout.global_prompt = doc.value("global_prompt", std::string());
    if (doc.contains("regions")) {
        const json& regions = doc["regions"];
        if (!regions.is_array()) raise(ErrorCode::Format, "'regions' must be an array");
        for (std::size_t i = 0; i < regions.size(); ++i) {
            const std::string where = "regions[" + std::to_string(i) + "]";
            const auto box = field<std::vector<int>>(regions[i], "box", where);
            if (box.size() != 4) raise(ErrorCode::Format, where + ": box must have 4 coordinates");
            RegionSpec r;
            r.box = {box[0], box[1], box[2], box[3]};
            r.prompt = field<std::string>(regions[i], "prompt", where);
            r.expert_id = regions[i].value("expert_id", std::string());
            r.style_tag = regions[i].value("style_tag", std::string());
            layout.regions.push_back(std::move(r));
        }
    }
    if (doc.contains("grid") && !doc["grid"].is_null()) {
        layout.grid = GridSize{field<int>(doc["grid"], "h", "grid"), field<int>(doc["grid"], "w", "grid")};
    }
    return layout;
}

json validation_to_json(const ValidationResult& result) {
    json violations = json::array();
    for (const Violation& v : result.violations) {
        json entry = {{"kind", to_string(v.kind)}, {"message", v.message}};
        entry["region"] = v.region ? json(*v.region) : json(nullptr);
        violations.push_back(std::move(entry));
    }
    return {{"ok", result.ok()}, {"violations", violations}};
}

json coverage_to_json(const CoverageReport& report) {
    json overlaps = json::array();
    for (const OverlapEntry& o : report.overlaps) overlaps.push_back({{"a", o.a}, {"b", o.b}, {"cells", o.cells}});
    return {{"grid_h", report.grid_h},         {"grid_w", report.grid_w},
            {"counts", report.counts},         {"covered_fraction", report.covered_fraction},
            {"overlaps", overlaps},            {"region_cells", report.region_cells}};
}

Layout read_layout(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) raise(ErrorCode::Io, "cannot open layout " + path.string());
    try {
        return layout_from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        raise(ErrorCode::Format, path.string() + ": " + e.what());
    }
}

void write_layout(const std::filesystem::path& path, const Layout& layout) {
    std::ofstream out(path);
    if (!out) raise(ErrorCode::Io, "cannot write layout " + path.string());
    out << layout_to_json(layout).dump(2) << '\n';
}

}  // namespace mepg::geometry
