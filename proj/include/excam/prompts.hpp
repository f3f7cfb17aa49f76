#pragma once

#include <optional>
#include <string>
#include <string_view>

// Canonical prompt texts. The same bytes ship as resource files under
// resources/prompts/ (a test pins the equality); placeholders are
// {Instruction}/{Text} for evaluation prompts and {src}/{gt} plus the
// rule-6 severity slot for the error-generation prompt.

namespace excam::prompts {

std::string_view report_system();
std::string_view report_user();

std::string_view baseline_counting();
std::string_view baseline_severity();
std::string_view baseline_binary();

std::string_view softgen_main();
std::string_view softgen_rule_minor();
std::string_view softgen_rule_major();

std::string render_eval_prompt(std::string_view prompt, std::string_view instruction,
                               std::string_view output_text);

// Extracts the last balanced JSON object in raw (string- and escape-aware),
// skipping candidates that do not parse; returns the JSON text. Looks only
// at/after marker when one is given and present.
std::optional<std::string> extract_last_json(std::string_view raw,
                                             std::string_view marker = {});

}  // namespace excam::prompts
