// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mepg::moe {

/// `Global` experts may lead the global phase; `Local` ones only serve regions.
enum class ExpertRole { Local, Global };

std::string to_string(ExpertRole role);
ExpertRole expert_role_from_string(std::string_view name);

struct ExpertEntry {
    std::string expert_id;
    std::filesystem::path checkpoint;
    std::string style_tag;
    ExpertRole role = ExpertRole::Global;
    std::string notes;

    friend bool operator==(const ExpertEntry&, const ExpertEntry&) = default;
};

/// Ordered expert list with value semantics. Copies share one immutable
/// snapshot until either side is modified.
class ExpertRegistry {
public:
    using Snapshot = std::shared_ptr<const std::vector<ExpertEntry>>;

    ExpertRegistry() : m_entries(std::make_shared<const std::vector<ExpertEntry>>()) {}
    /// Validates ids and roles; throws DuplicateId or InvalidConfig.
    explicit ExpertRegistry(std::vector<ExpertEntry> entries, std::optional<std::filesystem::path> gate = {});

    /// Accepts YAML or JSON with a top-level `experts:` list whose items are
    /// either full entries or `- <id>: <checkpoint>` shorthand (role global,
    /// no style). Relative paths resolve against `base_dir`.
    static ExpertRegistry parse(std::string_view text, const std::filesystem::path& base_dir = {});
    static ExpertRegistry load(const std::filesystem::path& path);

    /// YAML document that `parse` reads back to an equal registry.
    std::string to_yaml() const;
    void save(const std::filesystem::path& path) const;

    std::size_t size() const noexcept { return m_entries->size(); }
    const std::vector<ExpertEntry>& entries() const noexcept { return *m_entries; }
    Snapshot snapshot() const noexcept { return m_entries; }
    const ExpertEntry& operator[](std::size_t i) const { return m_entries->at(i); }

    std::optional<std::size_t> index_of(std::string_view expert_id) const noexcept;
    /// Throws UnknownExpert.
    std::size_t require(std::string_view expert_id) const;
    /// Index of the first global-capable expert.
    std::size_t first_global() const;
    /// First expert carrying `style_tag`, if any.
    std::optional<std::size_t> find_style(std::string_view style_tag) const noexcept;

    const std::optional<std::filesystem::path>& gate_path() const noexcept { return m_gate; }
    void set_gate_path(std::optional<std::filesystem::path> gate) { m_gate = std::move(gate); }

    /// Throws DuplicateId.
    void add(ExpertEntry entry);
    /// Throws UnknownExpert, or LastGlobalExpertRemoved if no global-capable
    /// expert would remain. Returns the removed index.
    std::size_t remove(std::string_view expert_id);

private:
    Snapshot m_entries;
    std::optional<std::filesystem::path> m_gate;
};

}  // namespace mepg::moe
