#pragma once

#include <string>
#include <vector>

#include "excam/core.hpp"

// Word-level LCS opcode diff. Each maximal contiguous non-equal run is one
// element; the number of elements is the error count of a synthesized
// report and each element's modified-text span is the error span.

namespace excam::text {

enum class DiffKind { kReplace, kInsert, kDelete };

struct DiffElement {
    DiffKind kind = DiffKind::kReplace;
    ErrorLocation location = ErrorLocation::kOutput;
    TokenSpan span_modified;  // zero-width anchor for deletions

    bool operator==(const DiffElement&) const = default;
};

// Tokens in, elements out, ordered by position in the modified sequence.
// Ties in the LCS backtrack prefer consuming the original first, so the
// output is deterministic.
std::vector<DiffElement> word_diff(const std::vector<std::string>& original_tokens,
                                   const std::vector<std::string>& modified_tokens,
                                   ErrorLocation location = ErrorLocation::kOutput);

}  // namespace excam::text
