#include "excam/wordtok.hpp"

namespace excam::text {

namespace {

// Decodes one UTF-8 code point at byte offset i; advances i. Invalid bytes
// are consumed one at a time and returned as their raw value.
uint32_t decode_utf8(std::string_view s, size_t& i) {
    unsigned char c0 = static_cast<unsigned char>(s[i]);
    if (c0 < 0x80) {
        ++i;
        return c0;
    }
    int len = 0;
    uint32_t cp = 0;
    if ((c0 & 0xE0) == 0xC0) {
        len = 2;
        cp = c0 & 0x1F;
    } else if ((c0 & 0xF0) == 0xE0) {
        len = 3;
        cp = c0 & 0x0F;
    } else if ((c0 & 0xF8) == 0xF0) {
        len = 4;
        cp = c0 & 0x07;
    } else {
        ++i;
        return c0;
    }
    if (i + static_cast<size_t>(len) > s.size()) {
        ++i;
        return c0;
    }
    for (int k = 1; k < len; ++k) {
        unsigned char ck = static_cast<unsigned char>(s[i + static_cast<size_t>(k)]);
        if ((ck & 0xC0) != 0x80) {
            ++i;
            return c0;
        }
        cp = (cp << 6) | (ck & 0x3F);
    }
    i += static_cast<size_t>(len);
    return cp;
}

bool is_space_cp(uint32_t cp) {
    switch (cp) {
        case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
        case 0x85: case 0xA0: case 0x1680:
        case 0x2028: case 0x2029: case 0x202F: case 0x205F: case 0x3000:
            return true;
        default:
            return cp >= 0x2000 && cp <= 0x200A;
    }
}

bool is_punct_cp(uint32_t cp) {
    if (cp < 0x80) {
        char c = static_cast<char>(cp);
        return (c >= '!' && c <= '/') || (c >= ':' && c <= '@') ||
               (c >= '[' && c <= '`') || (c >= '{' && c <= '~');
    }
    switch (cp) {
        case 0xA1: case 0xAB: case 0xB7: case 0xBB: case 0xBF:
        case 0x2010: case 0x2011: case 0x2012: case 0x2013: case 0x2014: case 0x2015:
        case 0x2018: case 0x2019: case 0x201A: case 0x201B:
        case 0x201C: case 0x201D: case 0x201E: case 0x201F:
        case 0x2026: case 0x2032: case 0x2033: case 0x203C: case 0x2047: case 0x2048: case 0x2049:
        case 0x060C: case 0x061B: case 0x061F: case 0x0964: case 0x0965:
        case 0x3001: case 0x3002: case 0x3008: case 0x3009: case 0x300A: case 0x300B:
        case 0x300C: case 0x300D: case 0x300E: case 0x300F:
        case 0x3010: case 0x3011: case 0x3014: case 0x3015:
        case 0xFF01: case 0xFF08: case 0xFF09: case 0xFF0C: case 0xFF0E:
        case 0xFF1A: case 0xFF1B: case 0xFF1F: case 0xFF3B: case 0xFF3D:
            return true;
        default:
            return false;
    }
}

struct CodePoint {
    uint32_t cp;
    size_t byte_start;
    size_t byte_end;
};

}  // namespace

std::vector<WordToken> tokenize_words(std::string_view text) {
    std::vector<WordToken> tokens;
    size_t i = 0;
    while (i < text.size()) {
        // skip whitespace
        while (i < text.size()) {
            size_t j = i;
            uint32_t cp = decode_utf8(text, j);
            if (!is_space_cp(cp)) break;
            i = j;
        }
        if (i >= text.size()) break;

        // collect one whitespace-delimited chunk
        std::vector<CodePoint> chunk;
        while (i < text.size()) {
            size_t j = i;
            uint32_t cp = decode_utf8(text, j);
            if (is_space_cp(cp)) break;
            chunk.push_back({cp, i, j});
            i = j;
        }

        // strip leading/trailing punctuation
        size_t b = 0;
        size_t e = chunk.size();
        while (b < e && is_punct_cp(chunk[b].cp)) ++b;
        while (e > b && is_punct_cp(chunk[e - 1].cp)) --e;
        if (b >= e) continue;  // punctuation-only chunk

        WordToken tok;
        tok.byte_start = chunk[b].byte_start;
        tok.byte_end = chunk[e - 1].byte_end;
        tok.text.assign(text.substr(tok.byte_start, tok.byte_end - tok.byte_start));
        tokens.push_back(std::move(tok));
    }
    return tokens;
}

std::vector<std::string> word_list(std::string_view text) {
    std::vector<std::string> words;
    for (auto& t : tokenize_words(text)) {
        words.push_back(std::move(t.text));
    }
    return words;
}

std::pair<int, int> token_span_for_byte_range(const std::vector<WordToken>& tokens,
                                              size_t byte_start, size_t byte_end) {
    int first = -1;
    int last = -1;
    for (size_t k = 0; k < tokens.size(); ++k) {
        const auto& t = tokens[k];
        bool overlaps = t.byte_start < byte_end && byte_start < t.byte_end;
        if (overlaps) {
            if (first < 0) first = static_cast<int>(k);
            last = static_cast<int>(k) + 1;
        }
    }
    if (first >= 0) return {first, last};
    // zero-width anchor: first token starting at or after the range
    int anchor = static_cast<int>(tokens.size());
    for (size_t k = 0; k < tokens.size(); ++k) {
        if (tokens[k].byte_start >= byte_start) {
            anchor = static_cast<int>(k);
            break;
        }
    }
    return {anchor, anchor};
}

}  // namespace excam::text
