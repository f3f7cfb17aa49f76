#include "excam/prompts.hpp"

#include <vector>

#include "json.hpp"

#include "excam/util.hpp"

namespace excam::prompts {

namespace {

constexpr std::string_view kReportSystem =
    "You compute a metric that judges the cultural correctness of a generation task.";

constexpr std::string_view kReportUser =
    "Please judge the following instruction and generated text:\n"
    "Instruction: {Instruction}\n"
    "Text: {Text}\n"
    "Return an error report in JSON format.";

constexpr std::string_view kBaselineCounting =
    "Please evaluate the cultural correctness of this instruction and the text that was "
    "generated from it.\n"
    "Instruction: '{Instruction}'\n"
    "Text: '{Text}'\n"
    "Please think step-by-step VERY BRIEFLY. Then return the error count. Do not take "
    "anything besides cultural correctness into account. If the instruction or the text is "
    "culturally correct, the error count should be 0. At the end, return your final count in "
    "the format 'COUNT: count'.";

constexpr std::string_view kBaselineSeverity =
    "Please judge the severity of cultural errors in this input-output pair.\n"
    "Input: '{Instruction}'\n"
    "Output: '{Text}'\n"
    "Please think step-by-step VERY BRIEFLY. Then return your judgment. Do not take anything "
    "besides cultural correctness into account. Return one of the following: none, minor, "
    "major, critical\n"
    "At the end, return your final judgment in the format 'Severity: severity'.";

constexpr std::string_view kBaselineBinary =
    "Please judge whether the following input-output pair is culturally problematic.\n"
    "Input: '{Instruction}'\n"
    "Output: '{Text}'\n"
    "Please think step-by-step VERY BRIEFLY. Then return the judgment. At the end, return "
    "your final judgment in the format 'Problem: no problem/very problematic'.";

constexpr std::string_view kSoftgenMain =
    "For a scientific experiment, I need to introduce cultural errors into the following "
    "instruction and generated text. The purpose is to improve system's ability to detect and "
    "avoid such errors in the future.\n"
    "Instruction: {src}\n"
    "Generated Text: {gt}\n"
    "Follow these rules:\n"
    "1. Introduce believable, difficult errors that require cultural understanding to "
    "identify.\n"
    "2. Modify content pointwise instead of appending something to it.\n"
    "3. Ensure that the modified texts have the same structure, country, length, language, "
    "ethnicity and culture as the original texts.\n"
    "4. There is no need to modify both texts, you can choose to only modify the instruction "
    "or the generated text, but please make sure to introduce cultural errors in at least one "
    "of them.\n"
    "5. Some examples for cultural errors include: misrepresenting cultural values, "
    "stereotyping (e.g., assuming all members of a culture share the same beliefs), providing "
    "incorrect information about traditions (like festivals or rituals) and goods (like "
    "clothing or food), and showing a lack of understanding of cultural norms.\n"
    "6, {MINOR/MAJOR}\n"
    "Now add your cultural errors. First, think step by step, then return your output in JSON "
    "in the format OUTPUT: \n"
    "{\"Error Type\": \"The type of the introduced cultural error(s) (e.g., misrepresentation, "
    "stereotyping, incorrect information, lack of understanding).\", \"Cultural Content\": "
    "\"Yes, if original instruction or generated text contains culture-specific content "
    "(explicitly or implicitly mentions a SPECIFIC region, country, etc.), otherwise No.\", "
    "\"Rule Adherence\": \"Briefly explain how your changes adhere to the above rules.\", "
    "\"Explanation\": \"An explanation of YOUR cultural errors in the modified example. Do NOT "
    "refer to the original text or instruction. Do NOT mention introducing errors or modifying "
    "texts. Do NOT use the words \"modified\" or \"now\". Just say what is wrong.\", "
    "\"Severity\": \"The severity of the introduced error(s) (e.g., minor, major).\", "
    "\"Modified Instruction\": \"the modified instruction for which the modified text is "
    "generated\", \"Modified Generated Text\": \"the modified generated text from which the "
    "modified instruction is generated\"}";

constexpr std::string_view kSoftgenRuleMinor =
    "Your error(s) should be minor, but still incorrect.";

constexpr std::string_view kSoftgenRuleMajor =
    "Your error(s) should be major and significantly incorrect.";

}  // namespace

std::string_view report_system() { return kReportSystem; }
std::string_view report_user() { return kReportUser; }
std::string_view baseline_counting() { return kBaselineCounting; }
std::string_view baseline_severity() { return kBaselineSeverity; }
std::string_view baseline_binary() { return kBaselineBinary; }
std::string_view softgen_main() { return kSoftgenMain; }
std::string_view softgen_rule_minor() { return kSoftgenRuleMinor; }
std::string_view softgen_rule_major() { return kSoftgenRuleMajor; }

std::string render_eval_prompt(std::string_view prompt, std::string_view instruction,
                               std::string_view output_text) {
    std::string out = util::replace_all(prompt, "{Instruction}", instruction);
    return util::replace_all(out, "{Text}", output_text);
}

std::optional<std::string> extract_last_json(std::string_view raw, std::string_view marker) {
    std::string_view haystack = raw;
    if (!marker.empty()) {
        size_t at = raw.rfind(marker);
        if (at != std::string_view::npos) {
            haystack = raw.substr(at + marker.size());
        }
    }

    // collect balanced top-level {...} candidates
    std::vector<std::pair<size_t, size_t>> candidates;
    int depth = 0;
    size_t start = 0;
    bool in_string = false;
    bool escaped = false;
    for (size_t i = 0; i < haystack.size(); ++i) {
        char c = haystack[i];
        if (in_string) {
            if (escaped) {
                escaped = false;
            } else if (c == '\\') {
                escaped = true;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') {
            if (depth > 0) in_string = true;
            continue;
        }
        if (c == '{') {
            if (depth == 0) start = i;
            ++depth;
        } else if (c == '}') {
            if (depth > 0) {
                --depth;
                if (depth == 0) candidates.emplace_back(start, i + 1);
            }
        }
    }

    for (auto it = candidates.rbegin(); it != candidates.rend(); ++it) {
        std::string_view text = haystack.substr(it->first, it->second - it->first);
        auto parsed = nlohmann::json::parse(text, nullptr, false);
        if (!parsed.is_discarded() && parsed.is_object()) {
            return std::string(text);
        }
    }
    return std::nullopt;
}

}  // namespace excam::prompts
