#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "excam/core.hpp"
#include "excam/gateway.hpp"
#include "excam/templates.hpp"

// Negative-sample construction: hard negatives from distractor options,
// freeform QA expansion, label inversion for binary sources, and soft
// negatives via LLM generation with diff-based report synthesis.

namespace excam::forge {

class ForgeError : public std::runtime_error {
public:
    enum class Kind {
        kNoDistractor,
        kNotBinary,
        kNoJsonFound,
        kMissingKey,
        kBadSeverity,
        kDegenerateModification,
        kFilteredNonCultural,
    };

    ForgeError(Kind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

// The generator model's JSON answer (Error Type ... Modified Generated Text).
struct SoftModification {
    std::string error_type;
    bool cultural_content = false;
    std::string rule_adherence;
    std::string explanation;
    Severity severity = Severity::kMajor;
    std::string modified_instruction;
    std::string modified_output;
};

// Output renders a seeded-uniform wrong option; the report holds exactly one
// major entry spanning the wrong answer payload, with a template explanation
// naming the correct option verbatim.
Sample make_hard_negative(const GenericRecord& record, uint64_t ordinal, uint64_t seed,
                          const tpl::TemplateLibrary& library);

// Extra freeform-QA pair for an option-bearing record: a positive with the
// correct answer text and a hard negative with a wrong option's text.
std::pair<Sample, Sample> expand_freeform_pair(const GenericRecord& record, uint64_t ordinal,
                                               uint64_t seed,
                                               const tpl::TemplateLibrary& library);

// Flips a binary label (e.g. ironic/non-ironic); one major entry spanning
// the flipped label tokens.
Sample invert_label(const GenericRecord& record, uint64_t ordinal, uint64_t seed,
                    const tpl::TemplateLibrary& library,
                    const std::vector<std::string>& binary_labels);

// The error-generation prompt with {src}/{gt} substituted and the rule-6
// line selected by mode (kSoftMinor or kSoftMajor).
std::string build_soft_prompt(const Sample& positive, ErrorMode mode);

// Last balanced JSON object at/after the final "OUTPUT:" marker; all seven
// keys required; severity and cultural-content casing normalized.
SoftModification parse_soft_response(std::string_view raw);

// Tokenize + diff both text pairs; each diff element becomes one entry with
// the modification's severity/type and shared explanation. The sample's
// error mode follows the returned severity.
Sample derive_report(const Sample& original, const SoftModification& mod);

struct ForgeSoftOptions {
    bool minor = true;
    bool major = true;
    int max_in_flight = 4;
    std::string model_name = "generator";
    double temperature = 0.6;
    int max_tokens = 2048;
};

struct ForgeSoftOutcome {
    std::vector<Sample> negatives;
    int skipped_gateway = 0;
    int skipped_parse = 0;
    int skipped_filtered = 0;
    int skipped_degenerate = 0;
};

// At most one negative per (sample, mode); failures are skipped without
// retry. Request order is deterministic; throws GatewayError{kExhausted}
// only when every request failed.
ForgeSoftOutcome forge_soft(const std::vector<Sample>& positives, gateway::ChatGateway& gw,
                            const ForgeSoftOptions& options, uint64_t seed);

}  // namespace excam::forge
