#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace qarank {

struct TokenizerConfig {
    bool stem = false;       // Porter stemming of ASCII alphabetic tokens
    bool stopwords = false;  // drop the English stop set used by Lucene's StandardAnalyzer

    friend bool operator==(const TokenizerConfig&, const TokenizerConfig&) = default;
};

/// Lowercases and splits UTF-8 text on every codepoint that is not a letter, digit or
/// combining mark. Empty tokens are dropped. Invalid UTF-8 bytes act as separators.
std::vector<std::string> tokenize(std::string_view text, const TokenizerConfig& config = {});

/// Whitespace tokens (ASCII space, tab, CR, LF, FF, VT), used for word counts and
/// length caps.
std::vector<std::string_view> whitespace_tokens(std::string_view text);

bool is_stopword(std::string_view token);

/// Porter (1980) suffix stripping. Input must be lowercase ASCII letters; anything
/// else is returned unchanged.
std::string porter_stem(std::string_view word);

}  // namespace qarank
