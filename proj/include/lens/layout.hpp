// Copyright (C) 2026 lens contributors
// SPDX-License-Identifier: Apache-2.0

#ifndef LENS_LAYOUT_HPP
#define LENS_LAYOUT_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "lens/error.hpp"

namespace lens {

enum class Token : std::uint8_t { text, visual };

/// Per-position modality tags. Positions tagged visual are the ones
/// reductions may touch; text positions are protected.
struct TokenLayout {
    std::vector<Token> tags;

    TokenLayout() = default;
    explicit TokenLayout(std::vector<Token> t) : tags(std::move(t)) {}

    /// Compact builder from a string of 'T' and 'V' characters.
    static TokenLayout from_string(const std::string& s) {
        TokenLayout l;
        l.tags.reserve(s.size());
        for (char c : s) {
            if (c == 'T') l.tags.push_back(Token::text);
            else if (c == 'V') l.tags.push_back(Token::visual);
            else fail(std::string("TokenLayout: unknown tag character '") + c + "'");
        }
        return l;
    }

    /// [text prefix][visual block][text suffix], the usual prompt-image-
    /// question order.
    static TokenLayout blocks(std::size_t prefix, std::size_t visual, std::size_t suffix) {
        TokenLayout l;
        l.tags.assign(prefix, Token::text);
        l.tags.insert(l.tags.end(), visual, Token::visual);
        l.tags.insert(l.tags.end(), suffix, Token::text);
        return l;
    }

    std::size_t size() const { return tags.size(); }
    bool is_visual(std::size_t p) const { return tags[p] == Token::visual; }

    std::size_t n_visual() const {
        std::size_t c = 0;
        for (Token t : tags) c += (t == Token::visual);
        return c;
    }
    std::size_t n_text() const { return size() - n_visual(); }

    std::vector<std::size_t> visual_positions() const {
        std::vector<std::size_t> out;
        for (std::size_t p = 0; p < tags.size(); ++p)
            if (is_visual(p)) out.push_back(p);
        return out;
    }

    std::vector<std::size_t> text_positions() const {
        std::vector<std::size_t> out;
        for (std::size_t p = 0; p < tags.size(); ++p)
            if (!is_visual(p)) out.push_back(p);
        return out;
    }

    /// visual ordinal per position (position of a visual token within the
    /// visual subsequence); SIZE_MAX for text positions.
    std::vector<std::size_t> visual_ordinals() const {
        std::vector<std::size_t> out(tags.size(), static_cast<std::size_t>(-1));
        std::size_t j = 0;
        for (std::size_t p = 0; p < tags.size(); ++p)
            if (is_visual(p)) out[p] = j++;
        return out;
    }

    std::string to_string() const {
        std::string s;
        s.reserve(tags.size());
        for (Token t : tags) s.push_back(t == Token::visual ? 'V' : 'T');
        return s;
    }

    bool operator==(const TokenLayout& o) const { return tags == o.tags; }
};

}  // namespace lens

#endif  // LENS_LAYOUT_HPP
