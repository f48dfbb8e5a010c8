// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#include "mepg/planner/wire.hpp"

#include <cctype>
#include <regex>
#include <set>

#include "mepg/core/error.hpp"
#include "mepg/core/lexicon.hpp"
#include "mepg/planner/grammar.hpp"

namespace mepg::planner {

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

// Drops "- ", "* ", "1. " and "1) " list markers.
std::string strip_bullet(std::string s) {
    static const std::regex bullet(R"(^\s*(?:[-*•]|\d+[.)])\s+)");
    return trim(std::regex_replace(s, bullet, "", std::regex_constants::format_first_only));
}

std::vector<std::string> lines_of(std::string_view text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        out.push_back(std::string(text.substr(start, end - start)));
        start = end + 1;
    }
    return out;
}

const std::regex& box_line() {
    static const std::regex re(
        R"(^\s*(.*?)\s*:\s*\(\s*(-?\d+)\s*,\s*(-?\d+)\s*\)\s*,?\s*\(\s*(-?\d+)\s*,\s*(-?\d+)\s*\)\s*(?::\s*(.*?))?\s*$)");
    return re;
}

int to_coord(const std::string& digits) {
    // Oversized numbers clamp rather than overflow; repair brings them in range.
    if (digits.size() > 6) return digits.front() == '-' ? -100000 : 100000;
    return std::stoi(digits);
}

}  // namespace

std::vector<std::string> parse_element_list(std::string_view text, std::size_t max_elements) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    std::string flat(text);
    for (char& c : flat) {
        if (c == '\n' || c == ';') c = ',';
    }
    std::size_t start = 0;
    while (start <= flat.size() && out.size() < max_elements) {
        std::size_t end = flat.find(',', start);
        if (end == std::string::npos) end = flat.size();
        std::string name = strip_bullet(flat.substr(start, end - start));
        while (!name.empty() && name.back() == '.') name.pop_back();
        name = trim(name);
        start = end + 1;
        if (name.empty()) continue;
        if (seen.insert(lexicon::to_lower(name)).second) out.push_back(name);
    }
    return out;
}

std::vector<PlacedElement> parse_box_lines(std::string_view text) {
    std::vector<PlacedElement> out;
    std::set<std::string> seen;
    for (const std::string& raw : lines_of(text)) {
        std::smatch m;
        const std::string line = strip_bullet(raw);
        if (!std::regex_match(line, m, box_line())) continue;
        std::string name = trim(m[1].str());
        if (name.empty()) continue;
        if (!seen.insert(lexicon::to_lower(name)).second) continue;
        const geometry::BoundingBox box{to_coord(m[2]), to_coord(m[3]), to_coord(m[4]), to_coord(m[5])};
        out.push_back({std::move(name), geometry::repair_box(box)});
    }
    return out;
}

std::string format_box_line(const std::string& element, const geometry::BoundingBox& b) {
    return element + ": (" + std::to_string(b.x1) + "," + std::to_string(b.y1) + "),(" + std::to_string(b.x2) + "," +
           std::to_string(b.y2) + ")";
}

std::vector<DetailRecord> parse_detail_lines(std::string_view text) {
    static const std::regex style_suffix(R"(^(.*?)\s*\[\s*style\s*:\s*([A-Za-z-]+)\s*\]\s*$)", std::regex::icase);
    std::vector<DetailRecord> out;
    std::size_t number = 0;
    for (const std::string& raw : lines_of(text)) {
        ++number;
        const std::string line = strip_bullet(raw);
        if (line.empty()) continue;
        std::smatch m;
        if (!std::regex_match(line, m, box_line())) {
            raise(ErrorCode::TransformError, "detail line " + std::to_string(number) + " has no box");
        }
        DetailRecord r;
        r.element = trim(m[1].str());
        r.box = geometry::repair_box({to_coord(m[2]), to_coord(m[3]), to_coord(m[4]), to_coord(m[5])});
        std::string description = m[6].matched ? trim(m[6].str()) : std::string();
        std::smatch sm;
        if (std::regex_match(description, sm, style_suffix)) {
            r.style_tag = lexicon::to_lower(sm[2].str());
            description = trim(sm[1].str());
        }
        if (description.empty()) {
            raise(ErrorCode::TransformError, "detail line " + std::to_string(number) + " has no description");
        }
        if (r.element.empty()) r.element = description;
        if (r.style_tag.empty()) r.style_tag = infer_style(description);
        r.description = std::move(description);
        out.push_back(std::move(r));
    }
    return out;
}

std::string format_detail_line(const DetailRecord& r) {
    std::string line = format_box_line(r.element, r.box) + ": " + r.description;
    if (!r.style_tag.empty()) line += " [style: " + r.style_tag + "]";
    return line;
}

}  // namespace mepg::planner
