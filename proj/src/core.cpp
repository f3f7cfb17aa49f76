#include "excam/core.hpp"

#include "excam/wordtok.hpp"

namespace excam {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

[[noreturn]] void invariant_fail(const std::string& field, const std::string& message) {
    throw ParseError(ParseErrorKind::kInvariantViolation, field, field + ": " + message);
}

[[noreturn]] void malformed(const std::string& field, const std::string& message) {
    throw ParseError(ParseErrorKind::kMalformedLine, field, field + ": " + message);
}

template <typename Json>
const Json* find(const Json& j, const char* key) {
    auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
}

template <typename Json>
std::string require_string(const Json& j, const std::string& field, const char* key) {
    const Json* v = find(j, key);
    if (v == nullptr || !v->is_string()) malformed(field + "." + key, "expected string");
    return v->template get<std::string>();
}

void check_entry_span(const ErrorEntry& entry, const std::string& text, const std::string& field) {
    if (entry.span.start < 0) invariant_fail(field + ".span", "negative start");
    if (entry.span.start > entry.span.end) invariant_fail(field + ".span", "start > end");
    int token_count = static_cast<int>(text::tokenize_words(text).size());
    if (entry.span.end > token_count) {
        invariant_fail(field + ".span", "end " + std::to_string(entry.span.end) +
                                            " exceeds token count " + std::to_string(token_count));
    }
}

}  // namespace

int severity_weight(Severity s) {
    return s == Severity::kMinor ? -1 : -5;
}

std::string_view to_string(TaskType t) {
    switch (t) {
        case TaskType::kQa: return "qa";
        case TaskType::kFreeformQa: return "freeform_qa";
        case TaskType::kTextGeneration: return "text_generation";
        case TaskType::kImpersonation: return "impersonation";
    }
    return "qa";
}

std::string_view to_string(Severity s) {
    return s == Severity::kMinor ? "minor" : "major";
}

std::string_view to_string(ErrorLocation l) {
    return l == ErrorLocation::kInstruction ? "instruction" : "output";
}

std::string_view to_string(Split s) {
    switch (s) {
        case Split::kTrain: return "train";
        case Split::kDev: return "dev";
        case Split::kTest: return "test";
    }
    return "train";
}

std::string_view to_string(ErrorMode m) {
    switch (m) {
        case ErrorMode::kNone: return "none";
        case ErrorMode::kHard: return "hard";
        case ErrorMode::kSoftMinor: return "soft_minor";
        case ErrorMode::kSoftMajor: return "soft_major";
        case ErrorMode::kInverted: return "inverted";
    }
    return "none";
}

TaskType task_type_from_string(std::string_view s) {
    if (s == "qa") return TaskType::kQa;
    if (s == "freeform_qa") return TaskType::kFreeformQa;
    if (s == "text_generation") return TaskType::kTextGeneration;
    if (s == "impersonation") return TaskType::kImpersonation;
    invariant_fail("task_type", "unknown value '" + std::string(s) + "'");
}

Severity severity_from_string(std::string_view s) {
    if (s == "minor") return Severity::kMinor;
    if (s == "major") return Severity::kMajor;
    invariant_fail("severity", "unknown value '" + std::string(s) + "'");
}

ErrorLocation location_from_string(std::string_view s) {
    if (s == "instruction") return ErrorLocation::kInstruction;
    if (s == "output") return ErrorLocation::kOutput;
    invariant_fail("location", "unknown value '" + std::string(s) + "'");
}

Split split_from_string(std::string_view s) {
    if (s == "train") return Split::kTrain;
    if (s == "dev") return Split::kDev;
    if (s == "test") return Split::kTest;
    invariant_fail("split", "unknown value '" + std::string(s) + "'");
}

ErrorMode error_mode_from_string(std::string_view s) {
    if (s == "none") return ErrorMode::kNone;
    if (s == "hard") return ErrorMode::kHard;
    if (s == "soft_minor") return ErrorMode::kSoftMinor;
    if (s == "soft_major") return ErrorMode::kSoftMajor;
    if (s == "inverted") return ErrorMode::kInverted;
    invariant_fail("provenance.error_mode", "unknown value '" + std::string(s) + "'");
}

void validate(const GenericRecord& record) {
    if (record.id.empty()) invariant_fail("id", "empty");
    if (record.options) {
        if (record.options->size() < 2) invariant_fail("options", "fewer than 2 options");
    }
    if (record.correct_index) {
        if (!record.options) invariant_fail("correct_index", "present without options");
        int n = static_cast<int>(record.options->size());
        if (*record.correct_index < 0 || *record.correct_index >= n) {
            invariant_fail("correct_index", "index " + std::to_string(*record.correct_index) +
                                                " out of range for " + std::to_string(n) + " options");
        }
    }
    if (record.task_type == TaskType::kQa && !record.options) {
        invariant_fail("options", "required for task_type qa");
    }
    if (record.task_type == TaskType::kImpersonation && record.role_context.empty()) {
        invariant_fail("role_context", "required for task_type impersonation");
    }
}

void validate(const Sample& sample) {
    if (sample.id.empty()) invariant_fail("id", "empty");
    if (sample.record_id.empty()) invariant_fail("record_id", "empty");

    const auto& errors = sample.report.errors;
    ErrorMode mode = sample.provenance.error_mode;
    if (mode == ErrorMode::kNone && !errors.empty()) {
        invariant_fail("report.errors", "error_mode none requires an empty report");
    }
    if (mode != ErrorMode::kNone && errors.empty()) {
        invariant_fail("report.errors", "error samples require at least one entry");
    }
    for (size_t i = 0; i < errors.size(); ++i) {
        const auto& entry = errors[i];
        std::string field = "report.errors[" + std::to_string(i) + "]";
        if (mode == ErrorMode::kSoftMinor && entry.severity != Severity::kMinor) {
            invariant_fail(field + ".severity", "soft_minor samples carry only minor entries");
        }
        if ((mode == ErrorMode::kHard || mode == ErrorMode::kSoftMajor ||
             mode == ErrorMode::kInverted) &&
            entry.severity != Severity::kMajor) {
            invariant_fail(field + ".severity", "mode " + std::string(to_string(mode)) +
                                                    " samples carry only major entries");
        }
        const std::string& located = entry.location == ErrorLocation::kInstruction
                                         ? sample.instruction
                                         : sample.output;
        check_entry_span(entry, located, field);
    }
}

nlohmann::ordered_json report_to_json(const ErrorReport& report) {
    ordered_json j;
    j["errors"] = ordered_json::array();
    for (const auto& entry : report.errors) {
        ordered_json e;
        e["error_type"] = entry.error_type;
        e["severity"] = to_string(entry.severity);
        e["location"] = to_string(entry.location);
        e["span"] = ordered_json::array({entry.span.start, entry.span.end});
        e["explanation"] = entry.explanation;
        j["errors"].push_back(std::move(e));
    }
    j["culture_related"] = report.culture_related;
    if (report.summary_explanation) {
        j["summary_explanation"] = *report.summary_explanation;
    }
    return j;
}

ErrorReport report_from_json(const json& j) {
    if (!j.is_object()) malformed("report", "expected object");
    ErrorReport report;
    const json* errors = find(j, "errors");
    if (errors == nullptr || !errors->is_array()) malformed("report.errors", "expected array");
    for (size_t i = 0; i < errors->size(); ++i) {
        const json& e = (*errors)[i];
        std::string field = "report.errors[" + std::to_string(i) + "]";
        if (!e.is_object()) malformed(field, "expected object");
        ErrorEntry entry;
        entry.error_type = require_string(e, field, "error_type");
        entry.severity = severity_from_string(require_string(e, field, "severity"));
        entry.location = location_from_string(require_string(e, field, "location"));
        const json* span = find(e, "span");
        if (span == nullptr || !span->is_array() || span->size() != 2 ||
            !(*span)[0].is_number_integer() || !(*span)[1].is_number_integer()) {
            malformed(field + ".span", "expected two-integer array");
        }
        entry.span.start = (*span)[0].get<int>();
        entry.span.end = (*span)[1].get<int>();
        if (entry.span.start < 0 || entry.span.start > entry.span.end) {
            invariant_fail(field + ".span", "start must satisfy 0 <= start <= end");
        }
        entry.explanation = require_string(e, field, "explanation");
        report.errors.push_back(std::move(entry));
    }
    const json* cr = find(j, "culture_related");
    if (cr == nullptr || !cr->is_boolean()) malformed("report.culture_related", "expected boolean");
    report.culture_related = cr->get<bool>();
    if (const json* se = find(j, "summary_explanation"); se != nullptr && !se->is_null()) {
        if (!se->is_string()) malformed("report.summary_explanation", "expected string");
        report.summary_explanation = se->get<std::string>();
    }
    return report;
}

std::string serialize_report(const ErrorReport& report) {
    return report_to_json(report).dump();
}

std::string serialize_sample(const Sample& sample) {
    validate(sample);
    ordered_json j;
    j["id"] = sample.id;
    j["record_id"] = sample.record_id;
    j["instruction"] = sample.instruction;
    j["output"] = sample.output;
    j["report"] = report_to_json(sample.report);
    j["split"] = to_string(sample.split);
    ordered_json prov;
    prov["instr_template_id"] = sample.provenance.instr_template_id;
    prov["output_template_id"] = sample.provenance.output_template_id;
    prov["error_mode"] = to_string(sample.provenance.error_mode);
    j["provenance"] = std::move(prov);
    ordered_json meta;
    meta["source_dataset"] = sample.metadata.source_dataset;
    meta["language"] = sample.metadata.language;
    if (sample.metadata.region) meta["region"] = *sample.metadata.region;
    meta["task_type"] = to_string(sample.metadata.task_type);
    j["metadata"] = std::move(meta);
    return j.dump();
}

Sample parse_sample(std::string_view line) {
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        malformed("line", "not a JSON object");
    }
    Sample sample;
    sample.id = require_string(j, "sample", "id");
    sample.record_id = require_string(j, "sample", "record_id");
    sample.instruction = require_string(j, "sample", "instruction");
    sample.output = require_string(j, "sample", "output");

    const json* report = find(j, "report");
    if (report == nullptr) malformed("report", "missing");
    sample.report = report_from_json(*report);

    sample.split = split_from_string(require_string(j, "sample", "split"));

    const json* prov = find(j, "provenance");
    if (prov == nullptr || !prov->is_object()) malformed("provenance", "expected object");
    const json* itid = find(*prov, "instr_template_id");
    const json* otid = find(*prov, "output_template_id");
    if (itid == nullptr || !itid->is_number_integer() || otid == nullptr ||
        !otid->is_number_integer()) {
        malformed("provenance", "template ids must be integers");
    }
    sample.provenance.instr_template_id = itid->get<int>();
    sample.provenance.output_template_id = otid->get<int>();
    sample.provenance.error_mode =
        error_mode_from_string(require_string(*prov, "provenance", "error_mode"));

    const json* meta = find(j, "metadata");
    if (meta == nullptr || !meta->is_object()) malformed("metadata", "expected object");
    sample.metadata.source_dataset = require_string(*meta, "metadata", "source_dataset");
    sample.metadata.language = require_string(*meta, "metadata", "language");
    if (const json* region = find(*meta, "region"); region != nullptr && !region->is_null()) {
        if (!region->is_string()) malformed("metadata.region", "expected string");
        sample.metadata.region = region->get<std::string>();
    }
    sample.metadata.task_type =
        task_type_from_string(require_string(*meta, "metadata", "task_type"));

    validate(sample);
    return sample;
}

nlohmann::ordered_json record_to_json(const GenericRecord& record) {
    ordered_json j;
    j["id"] = record.id;
    j["source_dataset"] = record.source_dataset;
    j["task_type"] = to_string(record.task_type);
    j["language"] = record.language;
    if (record.region) j["region"] = *record.region;
    j["question"] = record.question_or_topic;
    if (record.options) j["options"] = *record.options;
    if (record.correct_index) j["correct_index"] = *record.correct_index;
    if (record.answer_text) j["answer"] = *record.answer_text;
    if (!record.role_context.empty()) {
        ordered_json role;
        for (const auto& f : record.role_context) role[f.key] = f.value;
        j["role"] = std::move(role);
    }
    return j;
}

GenericRecord record_from_json(const ordered_json& j) {
    if (!j.is_object()) malformed("record", "expected object");
    GenericRecord record;
    record.id = require_string(j, "record", "id");
    if (const ordered_json* sd = find(j, "source_dataset")) {
        if (!sd->is_string()) malformed("record.source_dataset", "expected string");
        record.source_dataset = sd->get<std::string>();
    }
    if (const ordered_json* tt = find(j, "task_type")) {
        if (!tt->is_string()) malformed("record.task_type", "expected string");
        record.task_type = task_type_from_string(tt->get<std::string>());
    }
    if (const ordered_json* lang = find(j, "language"); lang != nullptr && !lang->is_null()) {
        if (!lang->is_string()) malformed("record.language", "expected string");
        record.language = lang->get<std::string>();
    }
    if (const ordered_json* region = find(j, "region"); region != nullptr && !region->is_null()) {
        if (!region->is_string()) malformed("record.region", "expected string");
        record.region = region->get<std::string>();
    }
    const ordered_json* question = find(j, "question");
    if (question == nullptr) question = find(j, "topic");
    if (question == nullptr || !question->is_string()) {
        malformed("record.question", "expected string under 'question' or 'topic'");
    }
    record.question_or_topic = question->get<std::string>();
    if (const ordered_json* options = find(j, "options");
        options != nullptr && !options->is_null()) {
        if (!options->is_array()) malformed("record.options", "expected array");
        std::vector<std::string> opts;
        for (const auto& o : *options) {
            if (!o.is_string()) malformed("record.options", "expected array of strings");
            opts.push_back(o.get<std::string>());
        }
        record.options = std::move(opts);
    }
    if (const ordered_json* ci = find(j, "correct_index"); ci != nullptr && !ci->is_null()) {
        if (!ci->is_number_integer()) malformed("record.correct_index", "expected integer");
        record.correct_index = ci->get<int>();
    }
    if (const ordered_json* ans = find(j, "answer"); ans != nullptr && !ans->is_null()) {
        if (!ans->is_string()) malformed("record.answer", "expected string");
        record.answer_text = ans->get<std::string>();
    }
    if (const ordered_json* role = find(j, "role"); role != nullptr && !role->is_null()) {
        if (!role->is_object()) malformed("record.role", "expected object");
        for (auto it = role->begin(); it != role->end(); ++it) {
            if (!it.value().is_string()) malformed("record.role", "expected string values");
            record.role_context.push_back({it.key(), it.value().get<std::string>()});
        }
    }
    validate(record);
    return record;
}

}  // namespace excam
