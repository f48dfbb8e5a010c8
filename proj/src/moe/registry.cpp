// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#include "mepg/moe/registry.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <set>

#include "mepg/core/error.hpp"
#include "mepg/neural/checkpoint.hpp"

namespace mepg::moe {

namespace fs = std::filesystem;

std::string to_string(ExpertRole role) { return role == ExpertRole::Global ? "global" : "local"; }

ExpertRole expert_role_from_string(std::string_view name) {
    if (name == "global" || name == "global-capable") return ExpertRole::Global;
    if (name == "local") return ExpertRole::Local;
    raise(ErrorCode::InvalidConfig, "unknown expert role '" + std::string(name) + "'");
}

namespace {

void check_entries(const std::vector<ExpertEntry>& entries) {
    std::set<std::string> seen;
    for (const auto& e : entries) {
        if (e.expert_id.empty()) raise(ErrorCode::InvalidConfig, "expert_id must not be empty");
        if (!seen.insert(e.expert_id).second) raise(ErrorCode::DuplicateId, "expert_id '" + e.expert_id + "'");
    }
    if (entries.empty()) raise(ErrorCode::InvalidConfig, "registry lists no experts");
    if (std::none_of(entries.begin(), entries.end(), [](const auto& e) { return e.role == ExpertRole::Global; })) {
        raise(ErrorCode::InvalidConfig, "registry needs at least one global-capable expert");
    }
}

fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_relative() && !base.empty() ? base / path : path;
}

std::string scalar(const YAML::Node& node, const char* key, bool required) {
    const YAML::Node v = node[key];
    if (!v || v.IsNull()) {
        if (required) raise(ErrorCode::Format, std::string("expert entry lacks '") + key + "'");
        return {};
    }
    if (!v.IsScalar()) raise(ErrorCode::Format, std::string("'") + key + "' must be a scalar");
    return v.as<std::string>();
}

}  // namespace

ExpertRegistry::ExpertRegistry(std::vector<ExpertEntry> entries, std::optional<fs::path> gate)
    : m_gate(std::move(gate)) {
    check_entries(entries);
    m_entries = std::make_shared<const std::vector<ExpertEntry>>(std::move(entries));
}

ExpertRegistry ExpertRegistry::parse(std::string_view text, const fs::path& base_dir) {
    YAML::Node root;
    try {
        root = YAML::Load(std::string(text));
    } catch (const YAML::Exception& e) {
        raise(ErrorCode::Format, std::string("registry config: ") + e.what());
    }
    if (!root.IsMap() || !root["experts"] || !root["experts"].IsSequence()) {
        raise(ErrorCode::Format, "registry config needs a top-level 'experts:' list");
    }
    std::vector<ExpertEntry> entries;
    try {
        for (const YAML::Node& item : root["experts"]) {
            if (!item.IsMap()) raise(ErrorCode::Format, "each expert must be a mapping");
            ExpertEntry e;
            if (item["expert_id"]) {
                e.expert_id = scalar(item, "expert_id", true);
                e.checkpoint = resolve(base_dir, scalar(item, "checkpoint", true));
                e.style_tag = scalar(item, "style_tag", false);
                const std::string role = scalar(item, "role", false);
                e.role = role.empty() ? ExpertRole::Global : expert_role_from_string(role);
                e.notes = scalar(item, "notes", false);
            } else if (item.size() == 1) {
                const auto it = item.begin();
                if (!it->second.IsScalar()) raise(ErrorCode::Format, "shorthand expert needs a checkpoint path");
                e.expert_id = it->first.as<std::string>();
                e.checkpoint = resolve(base_dir, it->second.as<std::string>());
            } else {
                raise(ErrorCode::Format, "expert entry lacks 'expert_id'");
            }
            entries.push_back(std::move(e));
        }
    } catch (const YAML::Exception& e) {
        raise(ErrorCode::Format, std::string("registry config: ") + e.what());
    }
    std::optional<fs::path> gate;
    if (root["gate"] && !root["gate"].IsNull()) gate = resolve(base_dir, root["gate"].as<std::string>());
    return ExpertRegistry(std::move(entries), std::move(gate));
}

ExpertRegistry ExpertRegistry::load(const fs::path& path) {
    return parse(neural::read_file(path), path.parent_path());
}

std::string ExpertRegistry::to_yaml() const {
    YAML::Emitter out;
    out << YAML::BeginMap << YAML::Key << "experts" << YAML::Value << YAML::BeginSeq;
    for (const auto& e : *m_entries) {
        out << YAML::BeginMap;
        out << YAML::Key << "expert_id" << YAML::Value << e.expert_id;
        out << YAML::Key << "checkpoint" << YAML::Value << e.checkpoint.string();
        out << YAML::Key << "style_tag" << YAML::Value << e.style_tag;
        out << YAML::Key << "role" << YAML::Value << to_string(e.role);
        out << YAML::Key << "notes" << YAML::Value << e.notes;
        out << YAML::EndMap;
    }
    out << YAML::EndSeq;
    if (m_gate) out << YAML::Key << "gate" << YAML::Value << m_gate->string();
    out << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

void ExpertRegistry::save(const fs::path& path) const { neural::write_file_atomic(path, to_yaml()); }

std::optional<std::size_t> ExpertRegistry::index_of(std::string_view expert_id) const noexcept {
    for (std::size_t i = 0; i < m_entries->size(); ++i) {
        if ((*m_entries)[i].expert_id == expert_id) return i;
    }
    return std::nullopt;
}

std::size_t ExpertRegistry::require(std::string_view expert_id) const {
    if (auto i = index_of(expert_id)) return *i;
    raise(ErrorCode::UnknownExpert, "no expert '" + std::string(expert_id) + "' in registry");
}

std::size_t ExpertRegistry::first_global() const {
    for (std::size_t i = 0; i < m_entries->size(); ++i) {
        if ((*m_entries)[i].role == ExpertRole::Global) return i;
    }
    raise(ErrorCode::InvalidConfig, "registry has no global-capable expert");
}

std::optional<std::size_t> ExpertRegistry::find_style(std::string_view style_tag) const noexcept {
    for (std::size_t i = 0; i < m_entries->size(); ++i) {
        if ((*m_entries)[i].style_tag == style_tag) return i;
    }
    return std::nullopt;
}

void ExpertRegistry::add(ExpertEntry entry) {
    if (index_of(entry.expert_id)) raise(ErrorCode::DuplicateId, "expert_id '" + entry.expert_id + "'");
    auto next = std::make_shared<std::vector<ExpertEntry>>(*m_entries);
    next->push_back(std::move(entry));
    check_entries(*next);
    m_entries = std::move(next);
}

std::size_t ExpertRegistry::remove(std::string_view expert_id) {
    const std::size_t index = require(expert_id);
    auto next = std::make_shared<std::vector<ExpertEntry>>(*m_entries);
    next->erase(next->begin() + static_cast<std::ptrdiff_t>(index));
    if (std::none_of(next->begin(), next->end(), [](const auto& e) { return e.role == ExpertRole::Global; })) {
        raise(ErrorCode::LastGlobalExpertRemoved, "removing '" + std::string(expert_id) + "'");
    }
    m_entries = std::move(next);
    return index;
}

}  // namespace mepg::moe
