// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mepg::lexicon {

/// Style tag implied by an adjective ("photo" -> "realism", "anime" -> "anime"),
/// or nullopt when the word carries no style.
std::optional<std::string> style_for_word(std::string_view word);

/// Every style tag the lexicon can produce.
std::span<const std::string_view> style_tags();

/// Closed condition vocabulary: id 0 is out-of-vocabulary, followed by the
/// style tags and then the nouns.
std::span<const std::string_view> vocabulary();
std::size_t vocabulary_size();
inline constexpr int kOovId = 0;

int token_id(std::string_view word);

/// Condition ids for a prompt. Articles and prepositions are skipped; style
/// adjectives map to their tag; unknown words map to kOovId.
std::vector<int> tokenize(std::string_view text);

std::string to_lower(std::string_view text);

}  // namespace mepg::lexicon
