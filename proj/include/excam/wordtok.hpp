#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

// Word tokenization used for error spans and diffs. One coordinate system
// everywhere: tokens are whitespace-separated runs with leading/trailing
// punctuation stripped, indexed from 0. UTF-8 aware; CJK runs without
// spaces stay single tokens (documented approximation of a reference
// word tokenizer, agreement measured in tests).

namespace excam::text {

struct WordToken {
    std::string text;
    size_t byte_start = 0;  // offset of the token core after punctuation strip
    size_t byte_end = 0;    // half-open

    bool operator==(const WordToken&) const = default;
};

std::vector<WordToken> tokenize_words(std::string_view text);

// Convenience: just the token strings.
std::vector<std::string> word_list(std::string_view text);

// Token index range [first, last) of tokens overlapping the byte range.
// Returns a zero-width anchor at the insertion position when no token
// overlaps.
std::pair<int, int> token_span_for_byte_range(const std::vector<WordToken>& tokens,
                                              size_t byte_start, size_t byte_end);

}  // namespace excam::text
