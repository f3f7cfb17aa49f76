#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "excam/core.hpp"
#include "excam/gateway.hpp"

// Turns model outputs into scores: parses error reports, applies the
// severity-sum heuristic with the sequence-certainty fallback, and extracts
// the counting/binary/severity baseline verdicts.

namespace excam::scoring {

class ScoringError : public std::runtime_error {
public:
    enum class Kind {
        kNoJsonFound,
        kSchemaViolation,
        kEmptySequence,
        kMarkerMissing,
        kNonNumeric,
        kUnknownVerdict,
        kUnknownSeverity,
    };

    ScoringError(Kind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

struct ScoredResult {
    std::string sample_id;
    std::optional<ErrorReport> predicted_report;
    double score = 0.0;
    bool presence = false;  // always equals score < 0
    double gold_score = 0.0;
    bool gold_presence = false;
    bool parse_ok = true;
    // carried for grouping/selection in meta-evaluation
    std::string source_dataset;
    ErrorMode error_mode = ErrorMode::kNone;
};

// Last balanced JSON object in raw, validated against the report schema.
ErrorReport parse_report(std::string_view raw);

// Length-normalized sequence probability: exp(mean(logprobs)), the
// geometric mean of token probabilities, in (0, 1].
double sequence_certainty(std::span<const double> token_logprobs);

// s* = sum of severity weights; s* if s* < 0, else the sequence certainty;
// exactly +0.0 when no logprobs are available for a clean report.
double score_report(const ErrorReport& report,
                    const std::optional<std::vector<double>>& token_logprobs);

// Last 'COUNT: n' marker, tolerant of markdown decoration and trailing
// punctuation.
int extract_count(std::string_view raw);

// Last 'Problem:' marker; false for "no problem", true for "very
// problematic"; anything else is UnknownVerdict.
bool extract_binary(std::string_view raw);

enum class SeverityVerdict { kNone, kMinor, kMajor, kCritical };

// Last 'Severity:' marker mapping to none/minor/major/critical.
SeverityVerdict extract_severity(std::string_view raw);

// 0 / -1 / -5 / -10.
double severity_verdict_score(SeverityVerdict verdict);

// base if base < 0; with plus_p a base of 0 is replaced by the sequence
// certainty when logprobs exist.
double baseline_score(double base, const std::optional<std::vector<double>>& token_logprobs,
                      bool plus_p);

enum class JudgeMode { kReport, kCount, kBinary, kSeverity };

JudgeMode judge_mode_from_string(std::string_view s);
std::string_view to_string(JudgeMode mode);

struct JudgeOptions {
    JudgeMode mode = JudgeMode::kReport;
    bool plus_p = false;
    int max_in_flight = 4;
    std::string model_name = "judge";
    double temperature = 0.0;
    int max_tokens = 1024;
};

// Renders the mode's evaluation prompt per sample, completes, extracts and
// scores. Parse failures count as presence with score -5 and parse_ok
// false. Output is ordered by sample_id.
std::vector<ScoredResult> judge_samples(const std::vector<Sample>& samples,
                                        gateway::ChatGateway& gw, const JudgeOptions& options);

// Builds the request judge_samples would send for one sample (also used by
// the SFT exporter and the resume path).
gateway::CompletionRequest judge_request(const Sample& sample, const JudgeOptions& options);

// Scores one completion against one sample (the per-item core of
// judge_samples).
ScoredResult score_completion(const Sample& sample, const gateway::Completion& completion,
                              const JudgeOptions& options);

std::string serialize_result(const ScoredResult& result);
ScoredResult parse_result(std::string_view line);

}  // namespace excam::scoring
