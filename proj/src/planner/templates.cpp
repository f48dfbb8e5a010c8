// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#include "mepg/planner/templates.hpp"

#include <fstream>
#include <sstream>
#include <utility>

#include "mepg/core/error.hpp"

namespace mepg::planner {

namespace {

const std::pair<const char*, const char*> kEmbedded[] = {
#include "prompt_templates.inc"
};

}  // namespace

TemplateSet::TemplateSet() {
    for (const auto& [name, text] : kEmbedded) m_templates.emplace(name, text);
}

TemplateSet TemplateSet::from_directory(const std::filesystem::path& dir) {
    std::error_code ec;
    if (!std::filesystem::is_directory(dir, ec)) raise(ErrorCode::Io, "template directory " + dir.string() + " not found");
    TemplateSet set;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.path().extension() != ".txt") continue;
        std::ifstream in(entry.path(), std::ios::binary);
        if (!in) raise(ErrorCode::Io, "cannot read " + entry.path().string());
        std::ostringstream text;
        text << in.rdbuf();
        set.m_templates[entry.path().stem().string()] = text.str();
    }
    return set;
}

const std::string& TemplateSet::get(std::string_view name) const {
    auto it = m_templates.find(name);
    if (it == m_templates.end()) raise(ErrorCode::InvalidConfig, "unknown prompt template '" + std::string(name) + "'");
    return it->second;
}

std::vector<std::string> TemplateSet::names() const {
    std::vector<std::string> out;
    for (const auto& [name, text] : m_templates) out.push_back(name);
    return out;
}

std::string TemplateSet::render(std::string_view name, const TemplateVars& vars) const {
    return render_template(get(name), vars);
}

std::string render_template(std::string_view text, const TemplateVars& vars) {
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if ((c == '{' || c == '}') && i + 1 < text.size() && text[i + 1] == c) {
            out += c;
            ++i;
            continue;
        }
        if (c != '{') {
            out += c;
            continue;
        }
        const std::size_t close = text.find('}', i + 1);
        if (close == std::string_view::npos) raise(ErrorCode::InvalidConfig, "unclosed placeholder in template");
        const std::string_view key = text.substr(i + 1, close - i - 1);
        auto it = vars.find(key);
        if (it == vars.end()) raise(ErrorCode::InvalidConfig, "template placeholder {" + std::string(key) + "} has no value");
        out += it->second;
        i = close;
    }
    return out;
}

}  // namespace mepg::planner
