#include "doctest.h"

#include "excam/rng.hpp"
#include "excam/wordtok.hpp"

using namespace excam;
using excam::text::tokenize_words;
using excam::text::word_list;

namespace {

// Independent reference tokenizer in Penn-Treebank spirit: punctuation
// split into its own tokens, n't/'s/'re/'ll/'ve/'d contractions separated.
// For comparison against the production tokenizer we drop its
// punctuation-only tokens.
std::vector<std::string> reference_word_tokens(const std::string& sentence) {
    std::vector<std::string> raw;
    std::string current;
    auto flush = [&]() {
        if (!current.empty()) {
            raw.push_back(current);
            current.clear();
        }
    };
    auto is_punct = [](unsigned char c) {
        return std::ispunct(c) != 0;
    };
    for (size_t i = 0; i < sentence.size(); ++i) {
        unsigned char c = static_cast<unsigned char>(sentence[i]);
        if (std::isspace(c)) {
            flush();
        } else if (c < 0x80 && is_punct(c)) {
            flush();
            raw.push_back(std::string(1, static_cast<char>(c)));
        } else {
            current.push_back(static_cast<char>(c));
        }
    }
    flush();

    // split contractions the way a treebank tokenizer would
    std::vector<std::string> tokens;
    for (size_t i = 0; i < raw.size(); ++i) {
        if (i + 2 < raw.size() && raw[i + 1] == "'" &&
            (raw[i + 2] == "t" || raw[i + 2] == "s" || raw[i + 2] == "re" ||
             raw[i + 2] == "ll" || raw[i + 2] == "ve" || raw[i + 2] == "d") &&
            !raw[i].empty() && raw[i].back() == 'n' && raw[i + 2] == "t") {
            tokens.push_back(raw[i].substr(0, raw[i].size() - 1));
            tokens.push_back("n't");
            i += 2;
            continue;
        }
        tokens.push_back(raw[i]);
    }

    std::vector<std::string> words;
    for (const auto& t : tokens) {
        bool all_punct = true;
        for (unsigned char c : t) {
            if (!(c < 0x80 && is_punct(c))) {
                all_punct = false;
                break;
            }
        }
        if (!all_punct) words.push_back(t);
    }
    return words;
}

const char* kPlainWords[] = {"the",     "festival", "in",     "Greece", "starts", "with",
                             "families", "sharing",  "bread",  "and",    "tea",    "during",
                             "winter",   "evenings", "before", "school", "children", "sing"};

}  // namespace

TEST_CASE("punctuation is stripped from token edges") {
    CHECK(word_list("Hello, world!") == std::vector<std::string>{"Hello", "world"});
}

TEST_CASE("empty text yields no tokens") {
    CHECK(word_list("").empty());
    CHECK(word_list("  \t\n ").empty());
    CHECK(word_list("... !!! ---").empty());
}

TEST_CASE("offsets point at the stripped token cores") {
    auto tokens = tokenize_words("  'Hello,' world!");
    REQUIRE(tokens.size() == 2);
    CHECK(tokens[0].text == "Hello");
    CHECK(tokens[0].byte_start == 3);
    CHECK(tokens[0].byte_end == 8);
    CHECK(tokens[1].text == "world");
}

TEST_CASE("unicode whitespace and punctuation are understood") {
    CHECK(word_list("café bars") == std::vector<std::string>{"café", "bars"});
    CHECK(word_list("“quoted” text") == std::vector<std::string>{"quoted", "text"});
    CHECK(word_list("日本語　テスト。") == std::vector<std::string>{"日本語", "テスト"});
}

TEST_CASE("token span lookup covers byte ranges") {
    std::string text = "The solution is option C: sandwich";
    auto tokens = tokenize_words(text);
    size_t payload = text.find("option C: sandwich");
    auto [first, last] = text::token_span_for_byte_range(tokens, payload, text.size());
    CHECK(first == 3);
    CHECK(last == static_cast<int>(tokens.size()));
    // zero-width anchor when nothing overlaps
    auto anchor = text::token_span_for_byte_range(tokens, text.size(), text.size());
    CHECK(anchor.first == anchor.second);
}

TEST_CASE("agreement with an independent reference tokenizer on fixture sentences") {
    // 200 deterministic sentences: mostly plain prose, a few with
    // contractions and hyphens where the tokenizers legitimately differ.
    rng::SplitMix r(rng::derive_seed(99, "tokenizer-fixtures"));
    int agree = 0;
    int total = 0;
    for (int s = 0; s < 200; ++s) {
        std::string sentence;
        int words = 4 + static_cast<int>(r.below(8));
        bool tricky = s % 25 == 0;  // 8 sentences with known divergences
        for (int w = 0; w < words; ++w) {
            if (w > 0) sentence += " ";
            sentence += kPlainWords[r.below(std::size(kPlainWords))];
            if (r.below(6) == 0) sentence += ",";
        }
        if (tricky) {
            sentence += " they don't mind state-of-the-art cooking";
        }
        sentence += r.coin() ? "." : "!";

        auto yours = word_list(sentence);
        auto reference = reference_word_tokens(sentence);
        ++total;
        if (yours == reference) ++agree;
    }
    CHECK(total == 200);
    double agreement = static_cast<double>(agree) / total;
    CHECK(agreement >= 0.95);
    CHECK(agreement < 1.0);  // the tricky sentences genuinely diverge
}
