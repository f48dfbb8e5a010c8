// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "mepg/geometry/geometry.hpp"

namespace mepg::geometry {

/// Value of the "schema" field in every serialized layout document.
inline constexpr const char* kLayoutSchema = "mepg_layout_v1";

nlohmann::json layout_to_json(const Layout& layout);
/// Throws Format on a missing/mistyped field or a foreign schema tag.
Layout layout_from_json(const nlohmann::json& doc);

nlohmann::json validation_to_json(const ValidationResult& result);
nlohmann::json coverage_to_json(const CoverageReport& report);

Layout read_layout(const std::filesystem::path& path);
void write_layout(const std::filesystem::path& path, const Layout& layout);

}  // namespace mepg::geometry
