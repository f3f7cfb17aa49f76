#include "excam/forge.hpp"

#include <algorithm>

#include "json.hpp"

#include "excam/prompts.hpp"
#include "excam/rng.hpp"
#include "excam/util.hpp"
#include "excam/worddiff.hpp"
#include "excam/wordtok.hpp"

namespace excam::forge {

namespace {

using nlohmann::json;

int pick_distractor(const GenericRecord& record, uint64_t seed, std::string_view tag) {
    if (!record.options || !record.correct_index) {
        throw ForgeError(ForgeError::Kind::kNoDistractor,
                         "record " + record.id + " has no options/correct_index");
    }
    const int n = static_cast<int>(record.options->size());
    if (n < 2) {
        throw ForgeError(ForgeError::Kind::kNoDistractor,
                         "record " + record.id + " has no distractor option");
    }
    rng::SplitMix r(rng::derive_seed(seed, std::string(tag) + ":" + record.id));
    int wrong = static_cast<int>(r.below(static_cast<uint64_t>(n - 1)));
    if (wrong >= *record.correct_index) ++wrong;
    return wrong;
}

TokenSpan span_of_payload(const std::string& text, const tpl::RenderResult& rendered) {
    auto tokens = text::tokenize_words(text);
    auto [first, last] = text::token_span_for_byte_range(
        tokens, rendered.answer_byte_start.value_or(0),
        rendered.answer_byte_end.value_or(text.size()));
    return {first, last};
}

ErrorEntry major_output_entry(std::string error_type, TokenSpan span, std::string explanation) {
    ErrorEntry entry;
    entry.error_type = std::move(error_type);
    entry.severity = Severity::kMajor;
    entry.location = ErrorLocation::kOutput;
    entry.span = span;
    entry.explanation = std::move(explanation);
    return entry;
}

Sample base_sample_for(const GenericRecord& record, uint64_t ordinal, uint64_t seed,
                       const tpl::TemplateLibrary& library) {
    Sample sample;
    sample.record_id =
        record.source_dataset.empty() ? record.id : record.source_dataset + "/" + record.id;
    const auto& instr_pool = library.pool(record.task_type, tpl::Slot::kInstruction);
    const auto& output_pool = library.pool(record.task_type, tpl::Slot::kOutput);
    sample.provenance.instr_template_id =
        tpl::pick_template(ordinal, rng::derive_seed(seed, "slot-instruction"), instr_pool);
    sample.provenance.output_template_id =
        tpl::pick_template(ordinal, rng::derive_seed(seed, "slot-output"), output_pool);
    sample.metadata.source_dataset = record.source_dataset;
    sample.metadata.language = record.language;
    sample.metadata.region = record.region;
    sample.metadata.task_type = record.task_type;
    return sample;
}

}  // namespace

Sample make_hard_negative(const GenericRecord& record, uint64_t ordinal, uint64_t seed,
                          const tpl::TemplateLibrary& library) {
    validate(record);
    int wrong = pick_distractor(record, seed, "hard");

    Sample sample = base_sample_for(record, ordinal, seed, library);
    sample.id = sample.record_id + "#hard";
    sample.provenance.error_mode = ErrorMode::kHard;
    sample.instruction = tpl::render(record, tpl::Slot::kInstruction,
                                     sample.provenance.instr_template_id, library);
    auto rendered = tpl::render_ex(record, tpl::Slot::kOutput,
                                   sample.provenance.output_template_id, library, wrong);
    sample.output = rendered.text;

    std::string correct = tpl::answer_payload(record, *record.correct_index);
    sample.report.culture_related = true;
    sample.report.errors.push_back(major_output_entry(
        "incorrect information", span_of_payload(sample.output, rendered),
        "The correct answer is " + correct + "."));
    validate(sample);
    return sample;
}

std::pair<Sample, Sample> expand_freeform_pair(const GenericRecord& record, uint64_t ordinal,
                                               uint64_t seed,
                                               const tpl::TemplateLibrary& library) {
    validate(record);
    int wrong = pick_distractor(record, seed, "freeform");
    const std::string correct_text = (*record.options)[*record.correct_index];
    const std::string wrong_text = (*record.options)[wrong];

    GenericRecord freeform = record;
    freeform.task_type = TaskType::kFreeformQa;
    freeform.options.reset();
    freeform.correct_index.reset();

    Sample positive = base_sample_for(freeform, ordinal, seed, library);
    positive.record_id = record.source_dataset.empty()
                             ? record.id
                             : record.source_dataset + "/" + record.id;
    positive.id = positive.record_id + "#ffpos";
    positive.provenance.error_mode = ErrorMode::kNone;
    positive.instruction = tpl::render(freeform, tpl::Slot::kInstruction,
                                       positive.provenance.instr_template_id, library);
    positive.output = tpl::render_ex(freeform, tpl::Slot::kOutput,
                                     positive.provenance.output_template_id, library,
                                     std::nullopt, correct_text)
                          .text;
    positive.report.culture_related = true;

    Sample negative = positive;
    negative.id = negative.record_id + "#ffneg";
    negative.provenance.error_mode = ErrorMode::kHard;
    auto rendered = tpl::render_ex(freeform, tpl::Slot::kOutput,
                                   negative.provenance.output_template_id, library,
                                   std::nullopt, wrong_text);
    negative.output = rendered.text;
    negative.report.errors.push_back(major_output_entry(
        "incorrect information", span_of_payload(negative.output, rendered),
        "The correct answer is " + correct_text + "."));
    validate(positive);
    validate(negative);
    return {std::move(positive), std::move(negative)};
}

Sample invert_label(const GenericRecord& record, uint64_t ordinal, uint64_t seed,
                    const tpl::TemplateLibrary& library,
                    const std::vector<std::string>& binary_labels) {
    validate(record);
    if (binary_labels.size() != 2) {
        throw ForgeError(ForgeError::Kind::kNotBinary,
                         "label set must contain exactly two labels, got " +
                             std::to_string(binary_labels.size()));
    }
    if (!record.answer_text) {
        throw ForgeError(ForgeError::Kind::kNotBinary,
                         "record " + record.id + " has no answer label");
    }
    std::string original_label = *record.answer_text;
    std::string opposite;
    if (original_label == binary_labels[0]) {
        opposite = binary_labels[1];
    } else if (original_label == binary_labels[1]) {
        opposite = binary_labels[0];
    } else {
        throw ForgeError(ForgeError::Kind::kNotBinary,
                         "answer '" + original_label + "' is not in the binary label set");
    }

    Sample sample = base_sample_for(record, ordinal, seed, library);
    sample.id = sample.record_id + "#inv";
    sample.provenance.error_mode = ErrorMode::kInverted;
    sample.instruction = tpl::render(record, tpl::Slot::kInstruction,
                                     sample.provenance.instr_template_id, library);
    auto rendered = tpl::render_ex(record, tpl::Slot::kOutput,
                                   sample.provenance.output_template_id, library, std::nullopt,
                                   opposite);
    sample.output = rendered.text;
    sample.report.culture_related = true;
    sample.report.errors.push_back(major_output_entry(
        "incorrect information", span_of_payload(sample.output, rendered),
        "The correct answer is " + original_label + "."));
    validate(sample);
    return sample;
}

std::string build_soft_prompt(const Sample& positive, ErrorMode mode) {
    if (!positive.report.errors.empty()) {
        throw std::invalid_argument("soft prompts are built from error-free samples only");
    }
    std::string_view rule;
    if (mode == ErrorMode::kSoftMinor) {
        rule = prompts::softgen_rule_minor();
    } else if (mode == ErrorMode::kSoftMajor) {
        rule = prompts::softgen_rule_major();
    } else {
        throw std::invalid_argument("soft prompt mode must be soft_minor or soft_major");
    }
    std::string out = util::replace_all(prompts::softgen_main(), "{src}", positive.instruction);
    out = util::replace_all(out, "{gt}", positive.output);
    return util::replace_all(out, "{MINOR/MAJOR}", rule);
}

SoftModification parse_soft_response(std::string_view raw) {
    auto json_text = prompts::extract_last_json(raw, "OUTPUT:");
    if (!json_text) {
        throw ForgeError(ForgeError::Kind::kNoJsonFound,
                         "no balanced JSON object found in generator response");
    }
    json j = json::parse(*json_text);

    auto require = [&](const char* key) -> std::string {
        auto it = j.find(key);
        if (it == j.end() || !it->is_string()) {
            throw ForgeError(ForgeError::Kind::kMissingKey,
                             std::string("missing key '") + key + "'");
        }
        return it->get<std::string>();
    };

    SoftModification mod;
    mod.error_type = require("Error Type");
    std::string cultural = util::to_lower_ascii(util::trim(require("Cultural Content")));
    mod.cultural_content = util::starts_with(cultural, "yes");
    mod.rule_adherence = require("Rule Adherence");
    mod.explanation = require("Explanation");
    std::string severity = util::to_lower_ascii(require("Severity"));
    if (severity.find("minor") != std::string::npos) {
        mod.severity = Severity::kMinor;
    } else if (severity.find("major") != std::string::npos) {
        mod.severity = Severity::kMajor;
    } else {
        throw ForgeError(ForgeError::Kind::kBadSeverity,
                         "severity '" + severity + "' is neither minor nor major");
    }
    mod.modified_instruction = require("Modified Instruction");
    mod.modified_output = require("Modified Generated Text");
    return mod;
}

Sample derive_report(const Sample& original, const SoftModification& mod) {
    if (!mod.cultural_content) {
        throw ForgeError(ForgeError::Kind::kFilteredNonCultural,
                         "generator judged the sample not culture-related");
    }
    auto instr_diff = text::word_diff(text::word_list(original.instruction),
                                      text::word_list(mod.modified_instruction),
                                      ErrorLocation::kInstruction);
    auto output_diff =
        text::word_diff(text::word_list(original.output), text::word_list(mod.modified_output),
                        ErrorLocation::kOutput);
    if (instr_diff.empty() && output_diff.empty()) {
        throw ForgeError(ForgeError::Kind::kDegenerateModification,
                         "modified texts equal the originals");
    }

    Sample sample = original;
    sample.instruction = mod.modified_instruction;
    sample.output = mod.modified_output;
    sample.provenance.error_mode =
        mod.severity == Severity::kMinor ? ErrorMode::kSoftMinor : ErrorMode::kSoftMajor;
    sample.id = sample.record_id + (mod.severity == Severity::kMinor ? "#soft_minor"
                                                                     : "#soft_major");
    sample.report.errors.clear();
    sample.report.culture_related = true;
    sample.report.summary_explanation.reset();

    auto add_entries = [&](const std::vector<text::DiffElement>& elements) {
        for (const auto& e : elements) {
            ErrorEntry entry;
            entry.error_type = mod.error_type;
            entry.severity = mod.severity;
            entry.location = e.location;
            entry.span = e.span_modified;
            entry.explanation = mod.explanation;
            sample.report.errors.push_back(std::move(entry));
        }
    };
    add_entries(instr_diff);
    add_entries(output_diff);
    validate(sample);
    return sample;
}

ForgeSoftOutcome forge_soft(const std::vector<Sample>& positives, gateway::ChatGateway& gw,
                            const ForgeSoftOptions& options, uint64_t seed) {
    (void)seed;  // generation is endpoint-driven; determinism comes from replay files
    std::vector<ErrorMode> modes;
    if (options.minor) modes.push_back(ErrorMode::kSoftMinor);
    if (options.major) modes.push_back(ErrorMode::kSoftMajor);

    struct Job {
        const Sample* positive;
        ErrorMode mode;
    };
    std::vector<Job> jobs;
    std::vector<gateway::CompletionRequest> requests;
    for (const auto& positive : positives) {
        if (!positive.report.errors.empty()) continue;  // only error-free inputs
        for (ErrorMode mode : modes) {
            gateway::CompletionRequest request;
            request.user_prompt = build_soft_prompt(positive, mode);
            request.temperature = options.temperature;
            request.max_tokens = options.max_tokens;
            request.model_name = options.model_name;
            jobs.push_back({&positive, mode});
            requests.push_back(std::move(request));
        }
    }

    ForgeSoftOutcome outcome;
    if (requests.empty()) return outcome;

    auto completions = gateway::complete_batch(gw, requests, options.max_in_flight);
    for (size_t i = 0; i < completions.size(); ++i) {
        const auto& completion = completions[i];
        const auto& job = jobs[i];
        if (completion.finish_reason == gateway::FinishReason::kError) {
            ++outcome.skipped_gateway;
            continue;
        }
        try {
            SoftModification mod = parse_soft_response(completion.text);
            Sample negative = derive_report(*job.positive, mod);
            // id keyed by the requested mode so both requests stay distinct
            negative.id = negative.record_id +
                          (job.mode == ErrorMode::kSoftMinor ? "#soft_minor" : "#soft_major");
            outcome.negatives.push_back(std::move(negative));
        } catch (const ForgeError& e) {
            switch (e.kind()) {
                case ForgeError::Kind::kFilteredNonCultural:
                    ++outcome.skipped_filtered;
                    break;
                case ForgeError::Kind::kDegenerateModification:
                    ++outcome.skipped_degenerate;
                    break;
                default:
                    ++outcome.skipped_parse;
                    break;
            }
        }
    }
    return outcome;
}

}  // namespace excam::forge
