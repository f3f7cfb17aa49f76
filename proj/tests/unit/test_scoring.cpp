#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <map>

#include "excam/prompts.hpp"
#include "excam/scoring.hpp"
#include "excam/util.hpp"

using namespace excam;
using namespace excam::scoring;

namespace {

ErrorReport report_with(std::initializer_list<Severity> severities) {
    ErrorReport report;
    for (Severity s : severities) {
        ErrorEntry e;
        e.error_type = "incorrect information";
        e.severity = s;
        e.location = ErrorLocation::kOutput;
        e.span = {0, 1};
        e.explanation = "x";
        report.errors.push_back(e);
    }
    return report;
}

Sample judged_sample(ErrorMode mode) {
    Sample s;
    s.record_id = "fix/r1";
    s.id = s.record_id + (mode == ErrorMode::kNone ? "#pos" : "#hard");
    s.instruction = "Pick the correct answer for 'q?'";
    s.output = "The solution is option C: sandwich";
    s.provenance.error_mode = mode;
    if (mode != ErrorMode::kNone) {
        s.report = report_with({Severity::kMajor});
        s.report.errors[0].explanation = "The correct answer is option B: pizza.";
    }
    s.metadata.source_dataset = "fix";
    return s;
}

}  // namespace

TEST_CASE("empty and populated reports parse from noisy text") {
    auto empty = parse_report(R"({"errors":[],"culture_related":true})");
    CHECK(empty.errors.empty());
    CHECK(empty.culture_related);

    auto two = parse_report(
        R"(Sure! Here is my verdict {after much deliberation}: )"
        R"({"errors":[{"error_type":"a","severity":"minor","location":"output","span":[0,1],)"
        R"("explanation":"x"},{"error_type":"b","severity":"major","location":"instruction",)"
        R"("span":[1,3],"explanation":"y"}],"culture_related":true})");
    CHECK(two.errors.size() == 2);
}

TEST_CASE("decoy braces in prose do not confuse the extractor") {
    // the balanced-brace oracle: the last parseable object wins
    std::string raw =
        "I think {in general} the pair is fine {really}.\n"
        "```json\n{\"errors\":[],\"culture_related\":true}\n```\nDone {yes}.";
    auto report = parse_report(raw);
    CHECK(report.errors.empty());
}

TEST_CASE("parse_report failures are typed") {
    CHECK_THROWS_AS(parse_report("no json at all"), ScoringError);
    CHECK_THROWS_AS(parse_report(R"({"errors":"not an array","culture_related":true})"),
                    ScoringError);
    CHECK_THROWS_AS(
        parse_report(
            R"({"errors":[{"error_type":"a","severity":"catastrophic","location":"output",)"
            R"("span":[0,1],"explanation":"x"}],"culture_related":true})"),
        ScoringError);
}

TEST_CASE("sequence certainty is the geometric mean of token probabilities") {
    std::vector<double> single = {std::log(0.5)};
    CHECK(sequence_certainty(single) == doctest::Approx(0.5).epsilon(1e-12));

    std::vector<double> three = {std::log(0.9), std::log(0.8), std::log(0.95)};
    double expected = std::exp((std::log(0.9) + std::log(0.8) + std::log(0.95)) / 3.0);
    CHECK(sequence_certainty(three) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(std::abs(sequence_certainty(three) - 0.881) < 1e-3);

    std::vector<double> certain = {0.0, 0.0, 0.0};
    CHECK(sequence_certainty(certain) == 1.0);

    CHECK_THROWS_AS(sequence_certainty(std::vector<double>{}), ScoringError);
    CHECK_THROWS_AS(sequence_certainty(std::vector<double>{0.5}), ScoringError);
}

TEST_CASE("score_report follows the severity-sum heuristic with fallback") {
    CHECK(score_report(report_with({Severity::kMajor}), std::nullopt) == -5.0);
    CHECK(score_report(report_with({Severity::kMinor, Severity::kMinor, Severity::kMajor}),
                       std::nullopt) == -7.0);

    std::vector<double> lp = {std::log(0.9), std::log(0.8), std::log(0.95)};
    double p = score_report(report_with({}), lp);
    CHECK(std::abs(p - 0.881) < 1e-3);

    double zero = score_report(report_with({}), std::nullopt);
    CHECK(zero == 0.0);
    CHECK(!std::signbit(zero));  // exactly +0.0

    // monotonicity: adding any entry strictly decreases the score
    auto base = report_with({Severity::kMinor});
    auto more = report_with({Severity::kMinor, Severity::kMinor});
    CHECK(score_report(more, std::nullopt) < score_report(base, std::nullopt));
    CHECK(score_report(base, std::nullopt) < score_report(report_with({}), lp));
}

TEST_CASE("count extraction survives decoration") {
    CHECK(extract_count("step by step reasoning... COUNT: 2") == 2);
    CHECK(extract_count("COUNT: 0") == 0);
    CHECK(extract_count("final **COUNT: 3**.") == 3);
    CHECK(extract_count("count: 1 then I reconsider, COUNT: 4") == 4);
    CHECK(extract_count("The final Count:   12 errors") == 12);
    CHECK(extract_count("`COUNT`: 7") == 7);

    CHECK_THROWS_AS(extract_count("no marker here"), ScoringError);
    CHECK_THROWS_AS(extract_count("COUNT: many"), ScoringError);
    // 'counting' must not satisfy the marker
    CHECK_THROWS_AS(extract_count("still counting: 3"), ScoringError);
}

TEST_CASE("binary extraction accepts exactly the two phrases") {
    CHECK(extract_binary("Problem: no problem") == false);
    CHECK(extract_binary("Problem: very problematic") == true);
    CHECK(extract_binary("**Problem: no problem**") == false);
    CHECK(extract_binary("I waver... Problem: no problem. Wait! Problem: very problematic") ==
          true);
    CHECK_THROWS_AS(extract_binary("Problem: maybe"), ScoringError);
    CHECK_THROWS_AS(extract_binary("nothing to see"), ScoringError);
}

TEST_CASE("severity extraction maps the four levels") {
    CHECK(extract_severity("Severity: none") == SeverityVerdict::kNone);
    CHECK(extract_severity("Severity: minor") == SeverityVerdict::kMinor);
    CHECK(extract_severity("Severity: major") == SeverityVerdict::kMajor);
    CHECK(extract_severity("**Severity: critical**") == SeverityVerdict::kCritical);
    CHECK_THROWS_AS(extract_severity("Severity: massive"), ScoringError);

    CHECK(severity_verdict_score(SeverityVerdict::kNone) == 0.0);
    CHECK(severity_verdict_score(SeverityVerdict::kMinor) == -1.0);
    CHECK(severity_verdict_score(SeverityVerdict::kMajor) == -5.0);
    CHECK(severity_verdict_score(SeverityVerdict::kCritical) == -10.0);
    // the critical extension only needs to stay below major
    CHECK(severity_verdict_score(SeverityVerdict::kCritical) <
          severity_verdict_score(SeverityVerdict::kMajor));
}

TEST_CASE("prepending prose never changes an extraction") {
    std::string noise =
        "Let me think. COUNT: 9 was my first guess. Problem: very problematic I thought. ";
    CHECK(extract_count(noise + "COUNT: 2") == 2);
    CHECK(extract_binary(noise + "Problem: no problem") == false);
    CHECK(extract_severity(noise + "Severity: minor") == SeverityVerdict::kMinor);
}

TEST_CASE("baseline scores substitute certainty only at zero") {
    std::vector<double> lp = {std::log(0.5)};
    CHECK(baseline_score(-3.0, lp, false) == -3.0);
    CHECK(baseline_score(-3.0, lp, true) == -3.0);
    CHECK(baseline_score(0.0, lp, true) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(baseline_score(0.0, lp, false) == 0.0);
    CHECK(baseline_score(0.0, std::nullopt, true) == 0.0);
}

TEST_CASE("score_completion covers modes and the parse-failure fallback") {
    JudgeOptions options;
    options.mode = JudgeMode::kReport;

    gateway::Completion clean;
    clean.text = R"(Verdict: {"errors":[],"culture_related":true})";
    clean.token_logprobs = std::vector<double>{std::log(0.9), std::log(0.8), std::log(0.95)};
    auto clean_result = score_completion(judged_sample(ErrorMode::kNone), clean, options);
    CHECK(clean_result.parse_ok);
    CHECK(!clean_result.presence);
    CHECK(std::abs(clean_result.score - 0.881) < 1e-3);
    CHECK(clean_result.gold_score == 0.0);
    CHECK(!clean_result.gold_presence);

    gateway::Completion broken;
    broken.text = "I refuse to answer in JSON.";
    auto failed = score_completion(judged_sample(ErrorMode::kHard), broken, options);
    CHECK(!failed.parse_ok);
    CHECK(failed.presence);
    CHECK(failed.score == -5.0);
    CHECK(failed.gold_score == -5.0);
    CHECK(failed.gold_presence);

    options.mode = JudgeMode::kCount;
    gateway::Completion counted;
    counted.text = "COUNT: 2";
    auto count_result = score_completion(judged_sample(ErrorMode::kHard), counted, options);
    CHECK(count_result.score == -2.0);
    CHECK(count_result.presence);

    gateway::Completion errored;
    errored.finish_reason = gateway::FinishReason::kError;
    auto error_result = score_completion(judged_sample(ErrorMode::kNone), errored, options);
    CHECK(!error_result.parse_ok);
    CHECK(error_result.presence);
}

TEST_CASE("judge requests render the documented prompts") {
    JudgeOptions options;
    options.mode = JudgeMode::kReport;
    auto sample = judged_sample(ErrorMode::kNone);
    auto request = judge_request(sample, options);
    CHECK(request.system_prompt ==
          "You compute a metric that judges the cultural correctness of a generation task.");
    CHECK(request.user_prompt.find("Instruction: " + sample.instruction) != std::string::npos);
    CHECK(request.user_prompt.find("Text: " + sample.output) != std::string::npos);
    CHECK(request.user_prompt.find("Return an error report in JSON format.") !=
          std::string::npos);
    CHECK(request.want_logprobs);

    options.mode = JudgeMode::kCount;
    auto count_request = judge_request(sample, options);
    CHECK(count_request.system_prompt.empty());
    CHECK(count_request.user_prompt.find("'COUNT: count'") != std::string::npos);
    CHECK(!count_request.want_logprobs);
    options.plus_p = true;
    CHECK(judge_request(sample, options).want_logprobs);
}

TEST_CASE("scored results round-trip through JSONL") {
    ScoredResult r;
    r.sample_id = "fix/r1#hard";
    r.predicted_report = report_with({Severity::kMajor});
    r.score = -5.0;
    r.presence = true;
    r.gold_score = -5.0;
    r.gold_presence = true;
    r.parse_ok = true;
    r.source_dataset = "fix";
    r.error_mode = ErrorMode::kHard;
    auto line = serialize_result(r);
    auto back = parse_result(line);
    CHECK(back.sample_id == r.sample_id);
    CHECK(back.predicted_report.has_value());
    CHECK(back.score == r.score);
    CHECK(back.error_mode == ErrorMode::kHard);
    CHECK(serialize_result(back) == line);
}

namespace {

// Keyed canned judge for the hand-scored fixture below.
class SheetGateway : public gateway::ChatGateway {
public:
    explicit SheetGateway(std::map<std::string, gateway::Completion> responses)
        : responses_(std::move(responses)) {}

    gateway::Completion complete(const gateway::CompletionRequest& request) override {
        for (const auto& [needle, completion] : responses_) {
            if (request.user_prompt.find(needle) != std::string::npos) return completion;
        }
        throw gateway::GatewayError(gateway::GatewayErrorKind::kProtocol, "no canned response");
    }

private:
    std::map<std::string, gateway::Completion> responses_;
};

gateway::Completion canned(std::string text, std::vector<double> logprobs = {}) {
    gateway::Completion c;
    c.text = std::move(text);
    if (!logprobs.empty()) c.token_logprobs = std::move(logprobs);
    return c;
}

}  // namespace

TEST_CASE("judge_samples matches a hand-scored sheet of mixed responses") {
    const std::string empty_report = R"({"errors":[],"culture_related":true})";
    const std::string one_major =
        R"({"errors":[{"error_type":"incorrect information","severity":"major",)"
        R"("location":"output","span":[0,1],"explanation":"wrong answer"}],)"
        R"("culture_related":true})";
    const std::string two_minor =
        R"({"errors":[{"error_type":"stereotyping","severity":"minor","location":"output",)"
        R"("span":[0,1],"explanation":"x"},{"error_type":"stereotyping","severity":"minor",)"
        R"("location":"output","span":[2,3],"explanation":"x"}],"culture_related":true})";
    const std::string bad_severity =
        R"({"errors":[{"error_type":"a","severity":"critical","location":"output",)"
        R"("span":[0,1],"explanation":"x"}],"culture_related":true})";

    std::vector<Sample> samples;
    std::map<std::string, gateway::Completion> responses;
    auto add = [&](const std::string& key, ErrorMode gold_mode, int gold_entries,
                   Severity gold_severity, gateway::Completion response) {
        Sample s;
        s.record_id = "sheet/" + key;
        s.id = s.record_id + (gold_mode == ErrorMode::kNone ? "#pos" : "#neg");
        s.instruction = "judge case " + key + " please";
        s.output = "some output tokens here";
        s.provenance.error_mode = gold_mode;
        for (int k = 0; k < gold_entries; ++k) {
            ErrorEntry e;
            e.error_type = "incorrect information";
            e.severity = gold_severity;
            e.location = ErrorLocation::kOutput;
            e.span = {k, k + 1};
            e.explanation = "gold";
            s.report.errors.push_back(e);
        }
        s.metadata.source_dataset = "sheet";
        responses["case " + key + " "] = std::move(response);
        samples.push_back(std::move(s));
    };

    // clean samples answered with empty reports stay presence=false
    add("a", ErrorMode::kNone, 0, Severity::kMajor,
        canned("verdict: " + empty_report, {std::log(0.9), std::log(0.8), std::log(0.95)}));
    add("b", ErrorMode::kNone, 0, Severity::kMajor, canned(one_major));  // false alarm
    add("c", ErrorMode::kHard, 1, Severity::kMajor, canned(one_major));
    add("d", ErrorMode::kHard, 1, Severity::kMajor,
        canned("I refuse to answer in any structured way."));
    add("e", ErrorMode::kSoftMinor, 2, Severity::kMinor, canned(two_minor));
    add("f", ErrorMode::kNone, 0, Severity::kMajor, canned(empty_report));  // no logprobs
    add("g", ErrorMode::kNone, 0, Severity::kMajor,
        canned(empty_report, {std::log(0.5)}));
    add("h", ErrorMode::kHard, 1, Severity::kMajor, canned(bad_severity));

    SheetGateway gw(std::move(responses));
    JudgeOptions options;
    options.mode = JudgeMode::kReport;
    options.max_in_flight = 3;
    auto results = judge_samples(samples, gw, options);
    REQUIRE(results.size() == 8);

    struct Expected {
        const char* id;
        double score;
        bool presence;
        double gold_score;
        bool gold_presence;
        bool parse_ok;
    };
    const double p3 = std::exp((std::log(0.9) + std::log(0.8) + std::log(0.95)) / 3.0);
    const Expected sheet[] = {
        {"sheet/a#pos", p3, false, 0.0, false, true},
        {"sheet/b#pos", -5.0, true, 0.0, false, true},
        {"sheet/c#neg", -5.0, true, -5.0, true, true},
        {"sheet/d#neg", -5.0, true, -5.0, true, false},
        {"sheet/e#neg", -2.0, true, -2.0, true, true},
        {"sheet/f#pos", 0.0, false, 0.0, false, true},
        {"sheet/g#pos", 0.5, false, 0.0, false, true},
        {"sheet/h#neg", -5.0, true, -5.0, true, false},
    };
    for (size_t i = 0; i < results.size(); ++i) {
        CAPTURE(sheet[i].id);
        CHECK(results[i].sample_id == sheet[i].id);
        CHECK(results[i].score == doctest::Approx(sheet[i].score).epsilon(1e-12));
        CHECK(results[i].presence == sheet[i].presence);
        CHECK(results[i].gold_score == sheet[i].gold_score);
        CHECK(results[i].gold_presence == sheet[i].gold_presence);
        CHECK(results[i].parse_ok == sheet[i].parse_ok);
    }
    // clean samples with empty reports: all presence=false
    // negatives answered with major reports: all correct, raw accuracy 1.0
    size_t correct = 0;
    for (const auto& r : results) {
        if (r.error_mode != ErrorMode::kNone && r.presence == r.gold_presence) ++correct;
    }
    CHECK(correct == 4);
}

TEST_CASE("the shipped prompt resources match the embedded texts") {
    namespace fs = std::filesystem;
    auto dir = fs::path(EXCAM_SOURCE_DIR) / "resources" / "prompts";
    auto check = [&](const char* file, std::string_view expected) {
        auto path = dir / file;
        REQUIRE(fs::exists(path));
        CHECK(util::read_file(path) == std::string(expected));
    };
    check("report_system.txt", prompts::report_system());
    check("report_user.txt", prompts::report_user());
    check("baseline_counting.txt", prompts::baseline_counting());
    check("baseline_severity.txt", prompts::baseline_severity());
    check("baseline_binary.txt", prompts::baseline_binary());
    check("softgen_main.txt", prompts::softgen_main());
    check("softgen_rule_minor.txt", prompts::softgen_rule_minor());
    check("softgen_rule_major.txt", prompts::softgen_rule_major());
}
