// Copyright (C) 2026 The MEPG Authors
// SPDX-License-Identifier: Apache-2.0

#include "mepg/planner/grammar.hpp"

#include <array>
#include <cctype>
#include <map>

#include "mepg/core/error.hpp"
#include "mepg/core/lexicon.hpp"

namespace mepg::planner {

namespace {

struct PlacementInfo {
    Placement placement;
    const char* name;
    std::array<const char*, 3> words;  // the phrase, tokenized
    geometry::BoundingBox box;
};

constexpr std::array<PlacementInfo, 9> kPlacements{{
    {Placement::Left, "left", {"on", "the", "left"}, {0, 250, 400, 750}},
    {Placement::Right, "right", {"on", "the", "right"}, {600, 250, 1000, 750}},
    {Placement::Top, "top", {"at", "the", "top"}, {250, 0, 750, 400}},
    {Placement::Bottom, "bottom", {"at", "the", "bottom"}, {250, 600, 750, 1000}},
    {Placement::Center, "center", {"in", "the", "center"}, {300, 300, 700, 700}},
    {Placement::TopLeft, "top-left", {"in", "the", "top-left"}, {0, 0, 450, 450}},
    {Placement::TopRight, "top-right", {"in", "the", "top-right"}, {550, 0, 1000, 450}},
    {Placement::BottomLeft, "bottom-left", {"in", "the", "bottom-left"}, {0, 550, 450, 1000}},
    {Placement::BottomRight, "bottom-right", {"in", "the", "bottom-right"}, {550, 550, 1000, 1000}},
}};

const PlacementInfo& info(Placement p) { return kPlacements[static_cast<std::size_t>(p)]; }

struct Token {
    enum Kind { Word, Comma, Period } kind;
    std::string text;  // lower-cased for words
    std::size_t offset;
    std::size_t end;
};

bool word_char(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '-' || c == '\''; }

std::vector<Token> lex(std::string_view s) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < s.size()) {
        const char c = s[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
        } else if (c == ',') {
            out.push_back({Token::Comma, ",", i, i + 1});
            ++i;
        } else if (c == '.') {
            out.push_back({Token::Period, ".", i, i + 1});
            ++i;
        } else if (std::isalpha(static_cast<unsigned char>(c))) {
            std::size_t j = i;
            while (j < s.size() && word_char(s[j])) ++j;
            out.push_back({Token::Word, lexicon::to_lower(s.substr(i, j - i)), i, j});
            i = j;
        } else {
            throw GrammarError(i, std::string("unexpected character '") + c + "'");
        }
    }
    return out;
}

bool is_article(const std::string& w) { return w == "a" || w == "an" || w == "the"; }

// Placement phrase starting at token k, if any.
std::optional<Placement> placement_at(const std::vector<Token>& words, std::size_t k) {
    if (k + 3 > words.size()) return std::nullopt;
    for (const auto& p : kPlacements) {
        if (words[k].text == p.words[0] && words[k + 1].text == p.words[1] && words[k + 2].text == p.words[2]) {
            return p.placement;
        }
    }
    return std::nullopt;
}

Clause build_clause(std::string_view prompt, const std::vector<Token>& words, std::size_t sep_offset) {
    if (words.empty()) throw GrammarError(sep_offset, "empty clause");
    Clause clause;
    clause.offset = words.front().offset;
    std::size_t body_end = words.size();
    for (std::size_t k = 0; k < words.size(); ++k) {
        if (auto p = placement_at(words, k)) {
            if (k + 3 != words.size()) throw GrammarError(words[k + 3].offset, "placement must end its clause");
            clause.placement = p;
            body_end = k;
            break;
        }
    }
    std::size_t first = 0;
    if (first < body_end && is_article(words[first].text)) ++first;
    if (first >= body_end) {
        const std::size_t at = body_end < words.size() ? words[body_end].offset : words.back().end;
        throw GrammarError(at, "clause has no noun");
    }
    clause.text = std::string(prompt.substr(words.front().offset, words[body_end - 1].end - words.front().offset));
    for (std::size_t k = first; k < body_end; ++k) {
        if (!clause.element.empty()) clause.element += ' ';
        clause.element += words[k].text;
        if (clause.style_tag.empty()) {
            if (auto style = lexicon::style_for_word(words[k].text)) clause.style_tag = *style;
        }
    }
    return clause;
}

}  // namespace

std::string to_string(Placement placement) { return info(placement).name; }

std::string_view placement_phrase(Placement placement) {
    static const std::array<std::string, 9> phrases = [] {
        std::array<std::string, 9> out;
        for (std::size_t i = 0; i < kPlacements.size(); ++i) {
            const auto& w = kPlacements[i].words;
            out[i] = std::string(w[0]) + " " + w[1] + " " + w[2];
        }
        return out;
    }();
    return phrases[static_cast<std::size_t>(placement)];
}

geometry::BoundingBox canonical_box(Placement placement) { return info(placement).box; }

std::string infer_style(std::string_view text) {
    std::string word;
    auto flush = [&]() -> std::string {
        std::string tag;
        if (!word.empty()) {
            if (auto style = lexicon::style_for_word(word)) tag = *style;
        }
        word.clear();
        return tag;
    };
    for (char c : text) {
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '-') {
            word += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        } else if (auto tag = flush(); !tag.empty()) {
            return tag;
        }
    }
    return flush();
}

std::vector<Clause> parse_clauses(std::string_view prompt, std::size_t max_regions) {
    const std::vector<Token> tokens = lex(prompt);
    if (tokens.empty()) throw GrammarError(0, "empty prompt");

    std::vector<Clause> clauses;
    std::vector<Token> words;
    std::size_t sep_offset = 0;
    bool ended = false;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const Token& t = tokens[i];
        if (ended) throw GrammarError(t.offset, "text after the final period");
        if (t.kind == Token::Period) {
            if (i + 1 != tokens.size()) throw GrammarError(tokens[i + 1].offset, "text after the final period");
            ended = true;
            continue;
        }
        const bool separator = t.kind == Token::Comma || t.text == "and";
        if (!separator) {
            words.push_back(t);
            continue;
        }
        // ", and" is a single separator.
        if (t.kind == Token::Comma && i + 1 < tokens.size() && tokens[i + 1].text == "and") ++i;
        clauses.push_back(build_clause(prompt, words, t.offset));
        words.clear();
        sep_offset = tokens[i].end;
    }
    clauses.push_back(build_clause(prompt, words, words.empty() ? sep_offset : 0));
    if (clauses.size() > max_regions) clauses.resize(max_regions);

    std::size_t strips = 0;
    for (const Clause& c : clauses) strips += !c.placement.has_value();
    std::size_t strip = 0;
    std::map<std::string, std::size_t> seen;
    for (Clause& c : clauses) {
        if (c.placement) {
            c.box = canonical_box(*c.placement);
        } else {
            const auto n = static_cast<long long>(strips);
            const auto i = static_cast<long long>(strip++);
            c.box = {static_cast<int>(i * geometry::kCanvas / n), 0,
                     static_cast<int>((i + 1) * geometry::kCanvas / n), geometry::kCanvas};
        }
        const std::size_t count = ++seen[c.element];
        if (count > 1) c.element += " " + std::to_string(count);
    }
    return clauses;
}

geometry::Layout clauses_to_layout(std::string_view prompt, const std::vector<Clause>& clauses) {
    geometry::Layout layout;
    std::size_t b = 0, e = prompt.size();
    while (b < e && std::isspace(static_cast<unsigned char>(prompt[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(prompt[e - 1]))) --e;
    layout.global_prompt = std::string(prompt.substr(b, e - b));
    for (const Clause& c : clauses) layout.regions.push_back({c.box, c.text, "", c.style_tag});
    return layout;
}

}  // namespace mepg::planner
