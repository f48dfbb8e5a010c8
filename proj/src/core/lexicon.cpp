// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#include "mepg/core/lexicon.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <utility>

namespace mepg::lexicon {

namespace {

constexpr std::array<std::pair<std::string_view, std::string_view>, 20> kStyleWords{{
    {"photo", "realism"},
    {"photographic", "realism"},
    {"photorealistic", "realism"},
    {"realistic", "realism"},
    {"real", "realism"},
    {"anime", "anime"},
    {"cartoon", "anime"},
    {"manga", "anime"},
    {"blob", "blobs"},
    {"blobs", "blobs"},
    {"blobby", "blobs"},
    {"cloudy", "blobs"},
    {"smooth", "blobs"},
    {"stripe", "stripes"},
    {"stripes", "stripes"},
    {"striped", "stripes"},
    {"stripy", "stripes"},
    {"lined", "stripes"},
    {"painted", "anime"},
    {"illustrated", "anime"},
}};

constexpr std::array<std::string_view, 4> kStyleTags{"realism", "anime", "blobs", "stripes"};

constexpr std::array<std::string_view, 41> kVocabulary{
    "<oov>",    "realism", "anime",   "blobs",     "stripes", "cat",    "dog",   "tree",   "house",
    "circle",   "square",  "girl",    "boy",       "man",     "woman",  "window", "bookshelf", "car",
    "sky",      "mountain", "flower", "bird",      "table",   "chair",  "person", "river",  "sun",
    "moon",     "lake",    "cloud",   "road",      "lamp",    "book",   "cup",    "apple",  "ball",
    "pattern",  "texture", "background", "field",  "boat",
};

constexpr std::array<std::string_view, 9> kSkipWords{"a", "an", "the", "on", "in", "at", "and", "of", "with"};

}  // namespace

std::string to_lower(std::string_view text) {
    std::string out(text);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::optional<std::string> style_for_word(std::string_view word) {
    const std::string lower = to_lower(word);
    for (const auto& [w, tag] : kStyleWords) {
        if (w == lower) return std::string(tag);
    }
    return std::nullopt;
}

std::span<const std::string_view> style_tags() { return kStyleTags; }

std::span<const std::string_view> vocabulary() { return kVocabulary; }

std::size_t vocabulary_size() { return kVocabulary.size(); }

int token_id(std::string_view word) {
    std::string lower = to_lower(word);
    if (auto style = style_for_word(lower)) lower = *style;
    auto find = [](std::string_view w) -> int {
        const auto it = std::find(kVocabulary.begin() + 1, kVocabulary.end(), w);
        return it == kVocabulary.end() ? -1 : static_cast<int>(it - kVocabulary.begin());
    };
    if (int id = find(lower); id >= 0) return id;
    if (lower.size() > 1 && lower.back() == 's') {
        if (int id = find(std::string_view(lower).substr(0, lower.size() - 1)); id >= 0) return id;
    }
    return kOovId;
}

std::vector<int> tokenize(std::string_view text) {
    std::vector<int> ids;
    std::string word;
    auto flush = [&] {
        if (word.empty()) return;
        const std::string lower = to_lower(word);
        if (std::find(kSkipWords.begin(), kSkipWords.end(), lower) == kSkipWords.end()) {
            ids.push_back(token_id(lower));
        }
        word.clear();
    };
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            word.push_back(c);
        } else {
            flush();
        }
    }
    flush();
    return ids;
}

}  // namespace mepg::lexicon
