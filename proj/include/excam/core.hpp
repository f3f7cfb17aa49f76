#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

// Canonical domain types and their JSONL serialization. Every pipeline
// stage reads and writes these; the line format is the contract with the
// external fine-tuning job, so key order is fixed and serialization is
// byte-deterministic.

namespace excam {

enum class TaskType { kQa, kFreeformQa, kTextGeneration, kImpersonation };

enum class Severity { kMinor, kMajor };

// Severity weights of the score heuristic: minor -1, major -5.
int severity_weight(Severity s);

enum class ErrorLocation { kInstruction, kOutput };

enum class Split { kTrain, kDev, kTest };

enum class ErrorMode { kNone, kHard, kSoftMinor, kSoftMajor, kInverted };

// Half-open word-token interval [start, end) into the located text.
// start == end is valid only as a zero-width deletion anchor.
struct TokenSpan {
    int start = 0;
    int end = 0;

    bool operator==(const TokenSpan&) const = default;
};

struct ErrorEntry {
    std::string error_type;
    Severity severity = Severity::kMajor;
    ErrorLocation location = ErrorLocation::kOutput;
    TokenSpan span;
    std::string explanation;

    bool operator==(const ErrorEntry&) const = default;
};

struct ErrorReport {
    std::vector<ErrorEntry> errors;
    bool culture_related = true;
    std::optional<std::string> summary_explanation;

    bool operator==(const ErrorReport&) const = default;
};

struct RoleField {
    std::string key;
    std::string value;

    bool operator==(const RoleField&) const = default;
};

// One normalized upstream datum before template wrapping.
struct GenericRecord {
    std::string id;
    std::string source_dataset;
    TaskType task_type = TaskType::kQa;
    std::string language = "en";
    std::optional<std::string> region;
    std::string question_or_topic;
    std::optional<std::vector<std::string>> options;
    std::optional<int> correct_index;
    std::optional<std::string> answer_text;
    std::vector<RoleField> role_context;  // ordered; labeled block for impersonation

    bool operator==(const GenericRecord&) const = default;
};

struct SampleMeta {
    std::string source_dataset;
    std::string language = "en";
    std::optional<std::string> region;
    TaskType task_type = TaskType::kQa;

    bool operator==(const SampleMeta&) const = default;
};

struct Provenance {
    int instr_template_id = 0;
    int output_template_id = 0;
    ErrorMode error_mode = ErrorMode::kNone;

    bool operator==(const Provenance&) const = default;
};

// One instruction-output pair with its ground-truth error report.
struct Sample {
    std::string id;
    std::string record_id;
    std::string instruction;
    std::string output;
    ErrorReport report;
    Split split = Split::kTrain;
    Provenance provenance;
    SampleMeta metadata;

    bool operator==(const Sample&) const = default;
};

// --- enum <-> string (closed sets; unknown strings are rejected) ---

std::string_view to_string(TaskType t);
std::string_view to_string(Severity s);
std::string_view to_string(ErrorLocation l);
std::string_view to_string(Split s);
std::string_view to_string(ErrorMode m);

TaskType task_type_from_string(std::string_view s);
Severity severity_from_string(std::string_view s);
ErrorLocation location_from_string(std::string_view s);
Split split_from_string(std::string_view s);
ErrorMode error_mode_from_string(std::string_view s);

// --- errors ---

enum class ParseErrorKind { kMalformedLine, kInvariantViolation };

class ParseError : public std::runtime_error {
public:
    ParseError(ParseErrorKind kind, std::string field, const std::string& message)
        : std::runtime_error(message), kind_(kind), field_(std::move(field)) {}

    ParseErrorKind kind() const { return kind_; }
    const std::string& field() const { return field_; }

private:
    ParseErrorKind kind_;
    std::string field_;
};

// --- validation (throws ParseError{kInvariantViolation} naming the field) ---

void validate(const GenericRecord& record);
void validate(const Sample& sample);

// --- serialization ---

// Single line, fixed key order, no trailing newline. Lossless:
// parse_sample(serialize_sample(s)) is structurally equal to s.
std::string serialize_sample(const Sample& sample);

// Accepts exactly the schema serialize_sample emits; rejects anything
// violating type invariants with a diagnostic naming the field.
Sample parse_sample(std::string_view line);

nlohmann::ordered_json report_to_json(const ErrorReport& report);
ErrorReport report_from_json(const nlohmann::json& j);

// Canonical single-line report text (the SFT training target).
std::string serialize_report(const ErrorReport& report);

nlohmann::ordered_json record_to_json(const GenericRecord& record);

// Takes ordered_json so role_context keeps the upstream key order.
GenericRecord record_from_json(const nlohmann::ordered_json& j);

}  // namespace excam
