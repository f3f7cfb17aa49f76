#include "excam/scoring.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "json.hpp"

#include "excam/prompts.hpp"
#include "excam/util.hpp"

namespace excam::scoring {

namespace {

using nlohmann::json;

bool is_decoration(char c) {
    return c == '*' || c == '_' || c == '`' || c == '\'' || c == '"' || c == ' ' || c == '\t';
}

// Finds the last occurrence of `word` (case-insensitive, word-boundary on
// the left) followed by optional decoration and a colon; returns the offset
// just past the colon, or npos.
size_t find_last_marker(std::string_view raw, std::string_view word) {
    std::string hay = util::to_lower_ascii(raw);
    std::string needle = util::to_lower_ascii(word);
    size_t best = std::string_view::npos;
    size_t pos = 0;
    while (true) {
        size_t at = hay.find(needle, pos);
        if (at == std::string::npos) break;
        pos = at + 1;
        if (at > 0 && std::isalpha(static_cast<unsigned char>(hay[at - 1]))) continue;
        size_t i = at + needle.size();
        while (i < hay.size() && is_decoration(hay[i])) ++i;
        if (i < hay.size() && hay[i] == ':') {
            best = i + 1;
        }
    }
    return best;
}

// Strips markdown decoration and collapses whitespace in a short window
// after a marker.
std::string marker_window(std::string_view raw, size_t offset, size_t length = 64) {
    std::string window(raw.substr(offset, length));
    for (char& c : window) {
        if (c == '*' || c == '_' || c == '`') c = ' ';
    }
    return util::normalize_spaces(util::to_lower_ascii(window));
}

bool word_at(const std::string& text, std::string_view word, size_t at) {
    if (text.compare(at, word.size(), word) != 0) return false;
    if (at > 0 && std::isalpha(static_cast<unsigned char>(text[at - 1]))) return false;
    size_t end = at + word.size();
    if (end < text.size() && std::isalpha(static_cast<unsigned char>(text[end]))) return false;
    return true;
}

size_t find_word(const std::string& text, std::string_view word) {
    size_t pos = 0;
    while (true) {
        size_t at = text.find(word, pos);
        if (at == std::string::npos) return std::string::npos;
        if (word_at(text, word, at)) return at;
        pos = at + 1;
    }
}

}  // namespace

ErrorReport parse_report(std::string_view raw) {
    auto json_text = prompts::extract_last_json(raw);
    if (!json_text) {
        throw ScoringError(ScoringError::Kind::kNoJsonFound,
                           "no balanced JSON object in response");
    }
    try {
        return report_from_json(json::parse(*json_text));
    } catch (const ParseError& e) {
        throw ScoringError(ScoringError::Kind::kSchemaViolation, e.what());
    }
}

double sequence_certainty(std::span<const double> token_logprobs) {
    if (token_logprobs.empty()) {
        throw ScoringError(ScoringError::Kind::kEmptySequence, "no token log-probabilities");
    }
    double sum = 0.0;
    for (double v : token_logprobs) {
        if (v > 0.0) {
            throw ScoringError(ScoringError::Kind::kEmptySequence,
                               "log-probabilities must be <= 0");
        }
        sum += v;
    }
    return std::exp(sum / static_cast<double>(token_logprobs.size()));
}

double score_report(const ErrorReport& report,
                    const std::optional<std::vector<double>>& token_logprobs) {
    int weighted = 0;
    for (const auto& entry : report.errors) {
        weighted += severity_weight(entry.severity);
    }
    if (weighted < 0) {
        return static_cast<double>(weighted);
    }
    if (token_logprobs && !token_logprobs->empty()) {
        return sequence_certainty(*token_logprobs);
    }
    return +0.0;
}

int extract_count(std::string_view raw) {
    size_t offset = find_last_marker(raw, "count");
    if (offset == std::string_view::npos) {
        throw ScoringError(ScoringError::Kind::kMarkerMissing, "no 'COUNT:' marker found");
    }
    std::string_view rest = raw.substr(offset);
    size_t i = 0;
    while (i < rest.size() && is_decoration(rest[i])) ++i;
    size_t digits_start = i;
    while (i < rest.size() && std::isdigit(static_cast<unsigned char>(rest[i]))) ++i;
    if (i == digits_start) {
        throw ScoringError(ScoringError::Kind::kNonNumeric,
                           "no number after the 'COUNT:' marker");
    }
    return std::stoi(std::string(rest.substr(digits_start, i - digits_start)));
}

bool extract_binary(std::string_view raw) {
    size_t offset = find_last_marker(raw, "problem");
    if (offset == std::string_view::npos) {
        throw ScoringError(ScoringError::Kind::kMarkerMissing, "no 'Problem:' marker found");
    }
    std::string window = marker_window(raw, offset);
    size_t no_at = find_word(window, "no problem");
    size_t very_at = find_word(window, "very problematic");
    if (no_at == std::string::npos && very_at == std::string::npos) {
        throw ScoringError(ScoringError::Kind::kUnknownVerdict,
                           "verdict after 'Problem:' is neither phrase: '" + window + "'");
    }
    if (no_at == std::string::npos) return true;
    if (very_at == std::string::npos) return false;
    return very_at < no_at;
}

SeverityVerdict extract_severity(std::string_view raw) {
    size_t offset = find_last_marker(raw, "severity");
    if (offset == std::string_view::npos) {
        throw ScoringError(ScoringError::Kind::kMarkerMissing, "no 'Severity:' marker found");
    }
    std::string window = marker_window(raw, offset);
    struct Option {
        std::string_view word;
        SeverityVerdict verdict;
    };
    // "minor" before "none" so "minor errors, none severe" resolves by
    // position, not list order
    const Option options[] = {
        {"none", SeverityVerdict::kNone},
        {"minor", SeverityVerdict::kMinor},
        {"major", SeverityVerdict::kMajor},
        {"critical", SeverityVerdict::kCritical},
    };
    size_t best_pos = std::string::npos;
    SeverityVerdict best = SeverityVerdict::kNone;
    for (const auto& option : options) {
        size_t at = find_word(window, option.word);
        if (at != std::string::npos && at < best_pos) {
            best_pos = at;
            best = option.verdict;
        }
    }
    if (best_pos == std::string::npos) {
        throw ScoringError(ScoringError::Kind::kUnknownSeverity,
                           "no severity word after 'Severity:': '" + window + "'");
    }
    return best;
}

double severity_verdict_score(SeverityVerdict verdict) {
    switch (verdict) {
        case SeverityVerdict::kNone: return 0.0;
        case SeverityVerdict::kMinor: return -1.0;
        case SeverityVerdict::kMajor: return -5.0;
        case SeverityVerdict::kCritical: return -10.0;
    }
    return 0.0;
}

double baseline_score(double base, const std::optional<std::vector<double>>& token_logprobs,
                      bool plus_p) {
    if (base < 0.0) return base;
    if (plus_p && token_logprobs && !token_logprobs->empty()) {
        return sequence_certainty(*token_logprobs);
    }
    return +0.0;
}

JudgeMode judge_mode_from_string(std::string_view s) {
    if (s == "report") return JudgeMode::kReport;
    if (s == "count") return JudgeMode::kCount;
    if (s == "binary") return JudgeMode::kBinary;
    if (s == "severity") return JudgeMode::kSeverity;
    throw std::invalid_argument("unknown judge mode '" + std::string(s) + "'");
}

std::string_view to_string(JudgeMode mode) {
    switch (mode) {
        case JudgeMode::kReport: return "report";
        case JudgeMode::kCount: return "count";
        case JudgeMode::kBinary: return "binary";
        case JudgeMode::kSeverity: return "severity";
    }
    return "report";
}

gateway::CompletionRequest judge_request(const Sample& sample, const JudgeOptions& options) {
    gateway::CompletionRequest request;
    request.model_name = options.model_name;
    request.temperature = options.temperature;
    request.max_tokens = options.max_tokens;
    switch (options.mode) {
        case JudgeMode::kReport:
            request.system_prompt = std::string(prompts::report_system());
            request.user_prompt = prompts::render_eval_prompt(prompts::report_user(),
                                                              sample.instruction, sample.output);
            request.want_logprobs = true;  // certainty fallback needs them
            break;
        case JudgeMode::kCount:
            request.user_prompt = prompts::render_eval_prompt(prompts::baseline_counting(),
                                                              sample.instruction, sample.output);
            request.want_logprobs = options.plus_p;
            break;
        case JudgeMode::kBinary:
            request.user_prompt = prompts::render_eval_prompt(prompts::baseline_binary(),
                                                              sample.instruction, sample.output);
            request.want_logprobs = options.plus_p;
            break;
        case JudgeMode::kSeverity:
            request.user_prompt = prompts::render_eval_prompt(prompts::baseline_severity(),
                                                              sample.instruction, sample.output);
            request.want_logprobs = options.plus_p;
            break;
    }
    return request;
}

ScoredResult score_completion(const Sample& sample, const gateway::Completion& completion,
                              const JudgeOptions& options) {
    ScoredResult result;
    result.sample_id = sample.id;
    result.source_dataset = sample.metadata.source_dataset;
    result.error_mode = sample.provenance.error_mode;
    result.gold_score = score_report(sample.report, std::nullopt);
    result.gold_presence = !sample.report.errors.empty();

    auto fail = [&]() {
        // a judge that cannot produce a readable verdict has failed the
        // task: counted as a predicted error at major weight
        result.parse_ok = false;
        result.predicted_report.reset();
        result.score = -5.0;
        result.presence = true;
    };

    if (completion.finish_reason == gateway::FinishReason::kError) {
        fail();
        return result;
    }

    try {
        switch (options.mode) {
            case JudgeMode::kReport: {
                ErrorReport report = parse_report(completion.text);
                result.predicted_report = report;
                result.score = score_report(report, completion.token_logprobs);
                break;
            }
            case JudgeMode::kCount: {
                double base = -static_cast<double>(extract_count(completion.text));
                result.score = baseline_score(base, completion.token_logprobs, options.plus_p);
                break;
            }
            case JudgeMode::kBinary: {
                double base = extract_binary(completion.text) ? -5.0 : 0.0;
                result.score = baseline_score(base, completion.token_logprobs, options.plus_p);
                break;
            }
            case JudgeMode::kSeverity: {
                double base = severity_verdict_score(extract_severity(completion.text));
                result.score = baseline_score(base, completion.token_logprobs, options.plus_p);
                break;
            }
        }
        result.parse_ok = true;
        result.presence = result.score < 0.0;
    } catch (const ScoringError&) {
        fail();
    }
    return result;
}

std::vector<ScoredResult> judge_samples(const std::vector<Sample>& samples,
                                        gateway::ChatGateway& gw, const JudgeOptions& options) {
    std::vector<gateway::CompletionRequest> requests;
    requests.reserve(samples.size());
    for (const auto& sample : samples) {
        requests.push_back(judge_request(sample, options));
    }
    auto completions = gateway::complete_batch(gw, requests, options.max_in_flight);

    std::vector<ScoredResult> results;
    results.reserve(samples.size());
    for (size_t i = 0; i < samples.size(); ++i) {
        results.push_back(score_completion(samples[i], completions[i], options));
    }
    std::sort(results.begin(), results.end(),
              [](const ScoredResult& a, const ScoredResult& b) {
                  return a.sample_id < b.sample_id;
              });
    return results;
}

std::string serialize_result(const ScoredResult& result) {
    nlohmann::ordered_json j;
    j["sample_id"] = result.sample_id;
    if (result.predicted_report) {
        j["predicted_report"] = report_to_json(*result.predicted_report);
    } else {
        j["predicted_report"] = nullptr;
    }
    j["score"] = result.score;
    j["presence"] = result.presence;
    j["gold_score"] = result.gold_score;
    j["gold_presence"] = result.gold_presence;
    j["parse_ok"] = result.parse_ok;
    j["source_dataset"] = result.source_dataset;
    j["error_mode"] = to_string(result.error_mode);
    return j.dump();
}

ScoredResult parse_result(std::string_view line) {
    json j = json::parse(line);
    ScoredResult result;
    result.sample_id = j.at("sample_id").get<std::string>();
    if (j.contains("predicted_report") && !j["predicted_report"].is_null()) {
        result.predicted_report = report_from_json(j["predicted_report"]);
    }
    result.score = j.at("score").get<double>();
    result.presence = j.at("presence").get<bool>();
    result.gold_score = j.at("gold_score").get<double>();
    result.gold_presence = j.at("gold_presence").get<bool>();
    result.parse_ok = j.at("parse_ok").get<bool>();
    result.source_dataset = j.value("source_dataset", std::string());
    result.error_mode = error_mode_from_string(j.value("error_mode", "none"));
    return result;
}

}  // namespace excam::scoring
