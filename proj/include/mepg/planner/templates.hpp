// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace mepg::planner {

using TemplateVars = std::map<std::string, std::string, std::less<>>;

/// Prompt templates keyed by file stem. Defaults are compiled in from
/// prompts/*.txt; a directory of .txt files may override any of them.
class TemplateSet {
public:
    TemplateSet();
    /// Throws Io when `dir` is not a readable directory.
    static TemplateSet from_directory(const std::filesystem::path& dir);

    /// Throws InvalidConfig for an unknown template name.
    const std::string& get(std::string_view name) const;
    std::vector<std::string> names() const;

    /// Renders `name` with `{var}` placeholders substituted.
    std::string render(std::string_view name, const TemplateVars& vars) const;

private:
    std::map<std::string, std::string, std::less<>> m_templates;
};

/// `{name}` is replaced by vars[name]; `{{` and `}}` produce literal braces.
/// Throws InvalidConfig for a placeholder with no value or an unclosed brace.
std::string render_template(std::string_view text, const TemplateVars& vars);

}  // namespace mepg::planner
