#include "excam/worddiff.hpp"

#include <algorithm>
#include <stdexcept>

namespace excam::text {

namespace {

constexpr size_t kMaxDpCells = 16u * 1024u * 1024u;

}  // namespace

std::vector<DiffElement> word_diff(const std::vector<std::string>& original_tokens,
                                   const std::vector<std::string>& modified_tokens,
                                   ErrorLocation location) {
    const auto& a = original_tokens;
    const auto& b = modified_tokens;

    // trim common prefix and suffix; runs never cross matches
    size_t prefix = 0;
    while (prefix < a.size() && prefix < b.size() && a[prefix] == b[prefix]) ++prefix;
    size_t suffix = 0;
    while (suffix < a.size() - prefix && suffix < b.size() - prefix &&
           a[a.size() - 1 - suffix] == b[b.size() - 1 - suffix]) {
        ++suffix;
    }
    const size_t n = a.size() - prefix - suffix;
    const size_t m = b.size() - prefix - suffix;
    if (n == 0 && m == 0) return {};

    if (n != 0 && m != 0 && n * m > kMaxDpCells) {
        throw std::length_error("word_diff: token sequences too large");
    }

    // lcs[i][j] = LCS length of a[prefix+i..), b[prefix+j..) within the middle
    std::vector<int> lcs((n + 1) * (m + 1), 0);
    auto at = [&](size_t i, size_t j) -> int& { return lcs[i * (m + 1) + j]; };
    for (size_t i = n; i-- > 0;) {
        for (size_t j = m; j-- > 0;) {
            if (a[prefix + i] == b[prefix + j]) {
                at(i, j) = at(i + 1, j + 1) + 1;
            } else {
                at(i, j) = std::max(at(i + 1, j), at(i, j + 1));
            }
        }
    }

    std::vector<DiffElement> elements;
    size_t i = 0;
    size_t j = 0;
    bool in_run = false;
    size_t run_j_start = 0;
    bool run_took_original = false;
    bool run_took_modified = false;

    auto flush = [&]() {
        if (!in_run) return;
        DiffElement e;
        e.location = location;
        if (run_took_original && run_took_modified) {
            e.kind = DiffKind::kReplace;
        } else if (run_took_modified) {
            e.kind = DiffKind::kInsert;
        } else {
            e.kind = DiffKind::kDelete;
        }
        e.span_modified.start = static_cast<int>(prefix + run_j_start);
        e.span_modified.end = static_cast<int>(prefix + j);
        elements.push_back(e);
        in_run = false;
        run_took_original = false;
        run_took_modified = false;
    };

    auto open_run = [&]() {
        if (!in_run) {
            in_run = true;
            run_j_start = j;
        }
    };

    while (i < n || j < m) {
        if (i < n && j < m && a[prefix + i] == b[prefix + j]) {
            flush();
            ++i;
            ++j;
            continue;
        }
        open_run();
        if (j >= m || (i < n && at(i + 1, j) >= at(i, j + 1))) {
            run_took_original = true;
            ++i;
        } else {
            run_took_modified = true;
            ++j;
        }
    }
    flush();
    return elements;
}

}  // namespace excam::text
