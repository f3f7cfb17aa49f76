#include "excam/templates.hpp"

#include <array>
#include <sstream>

#include "excam/rng.hpp"
#include "excam/util.hpp"

namespace excam::tpl {

namespace {

std::vector<std::string> cross(const std::vector<std::string>& heads,
                               const std::vector<std::string>& tails) {
    std::vector<std::string> out;
    out.reserve(heads.size() * tails.size());
    for (const auto& h : heads) {
        for (const auto& t : tails) {
            out.push_back(h + t);
        }
    }
    return out;
}

std::vector<std::string> qa_instruction_templates() {
    return cross(
        {
            "Choose the correct answer for the prompt: '{question}'.",
            "Select the right answer for '{question}'.",
            "Pick the correct answer for this prompt: '{question}'.",
            "Answer the following question: '{question}'.",
            "Solve this question: '{question}'.",
            "Determine the correct answer for: '{question}'.",
            "Find the right answer to: '{question}'.",
            "Identify the correct answer for '{question}'.",
            "Work out the right answer for: '{question}'.",
            "Decide on the correct answer for '{question}'.",
        },
        {
            " Pick from the options provided:\n{options}",
            " Pick one option from the list below:\n{options}",
            " Choose from the provided options:\n{options}",
            " Select one of the following options:\n{options}",
            " Your choices are:\n{options}",
        });
}

std::vector<std::string> qa_output_templates() {
    return cross(
        {
            "The solution",
            "The key",
            "The correct choice",
            "The right answer",
            "The final answer",
            "The best option",
            "The proper choice",
            "My selection",
            "The valid answer",
            "The intended answer",
        },
        {
            " is {answer}",
            " here is {answer}",
            ": {answer}",
            " would be {answer}",
            " turns out to be {answer}",
        });
}

std::vector<std::string> freeform_instruction_templates() {
    return cross(
        {
            "Give your response to",
            "Respond to this question with your answer",
            "Answer this question",
            "Provide your answer to",
            "Reply to the following question",
            "Share your answer for",
            "Give an answer to",
            "Offer your response to",
            "Respond with your answer to",
            "Write your answer for",
        },
        {
            ": '{question}'.",
            " now: '{question}'.",
            ", please: '{question}'.",
            " in your own words: '{question}'.",
            " clearly: '{question}'.",
        });
}

std::vector<std::string> freeform_output_templates() {
    std::vector<std::string> leads = {"The", "My", "Here is the", "This is the", "Returning the"};
    std::vector<std::string> adjectives = {"appropriate", "correct", "fitting", "suitable",
                                           "proper"};
    std::vector<std::string> nouns = {"answer", "response"};
    std::vector<std::string> out;
    for (const auto& lead : leads) {
        for (const auto& adj : adjectives) {
            for (const auto& noun : nouns) {
                out.push_back(lead + " " + adj + " " + noun + ": {answer}");
            }
        }
    }
    return out;
}

std::vector<std::string> textgen_instruction_templates() {
    return cross(
        {
            "Write", "Compose", "Draft", "Produce", "Create",
            "Author", "Generate", "Prepare", "Develop", "Craft",
        },
        {
            " an article-style text on: '{topic}'.",
            " a short text about: '{topic}'.",
            " an informative text on: '{topic}'.",
            " a descriptive passage about: '{topic}'.",
            " a brief article regarding: '{topic}'.",
        });
}

std::vector<std::string> textgen_output_templates() {
    return cross(
        {
            "Here is", "This is", "Below is", "Presenting", "The following is",
            "See", "Find here", "Providing", "Returning", "Delivering",
        },
        {
            " the text: {answer}",
            " the article: {answer}",
            " the passage: {answer}",
            " the write-up: {answer}",
            " the content: {answer}",
        });
}

std::vector<std::string> impersonation_instruction_templates() {
    return cross(
        {
            "Adopt", "Please configure to", "Assume", "Take on", "Act according to",
            "Embody", "Step into", "Proceed under", "Operate within", "Follow",
        },
        {
            " this working role/setting:\n{role_block}",
            " this role/setting:\n{role_block}",
            " the following role/setting:\n{role_block}",
            " this persona/setting:\n{role_block}",
            " this role and setting:\n{role_block}",
        });
}

std::vector<std::string> impersonation_output_templates() {
    return cross(
        {
            "The answer to use",
            "The answer returned",
            "Answer (final)",
            "The final answer",
            "The role's answer",
            "The chosen answer",
            "The response given",
            "The answer provided",
            "The in-role answer",
            "The resulting answer",
        },
        {
            ": {answer}",
            " is: {answer}",
            " follows: {answer}",
            " here: {answer}",
            " stated: {answer}",
        });
}

std::vector<std::string> mandatory_placeholders(TaskType task, Slot slot) {
    if (slot == Slot::kOutput) return {"{answer}"};
    switch (task) {
        case TaskType::kQa: return {"{question}", "{options}"};
        case TaskType::kFreeformQa: return {"{question}"};
        case TaskType::kTextGeneration: return {"{topic}"};
        case TaskType::kImpersonation: return {"{role_block}"};
    }
    return {};
}

std::string_view slot_name(Slot slot) {
    return slot == Slot::kInstruction ? "instruction" : "output";
}

Slot slot_from_string(std::string_view s) {
    if (s == "instruction") return Slot::kInstruction;
    if (s == "output") return Slot::kOutput;
    throw std::runtime_error("unknown template slot '" + std::string(s) + "'");
}

std::string escape_template(std::string_view t) {
    std::string out;
    out.reserve(t.size());
    for (char c : t) {
        if (c == '\\') {
            out += "\\\\";
        } else if (c == '\n') {
            out += "\\n";
        } else {
            out.push_back(c);
        }
    }
    return out;
}

std::string unescape_template(std::string_view t) {
    std::string out;
    out.reserve(t.size());
    for (size_t i = 0; i < t.size(); ++i) {
        if (t[i] == '\\' && i + 1 < t.size()) {
            char next = t[i + 1];
            if (next == 'n') {
                out.push_back('\n');
                ++i;
                continue;
            }
            if (next == '\\') {
                out.push_back('\\');
                ++i;
                continue;
            }
        }
        out.push_back(t[i]);
    }
    return out;
}

struct Substitution {
    std::string placeholder;
    std::string value;
    bool is_answer = false;
};

}  // namespace

std::string option_letter(int k) {
    if (k < 0) throw std::invalid_argument("option index must be non-negative");
    std::string letters;
    int v = k;
    while (true) {
        letters.insert(letters.begin(), static_cast<char>('A' + v % 26));
        v = v / 26 - 1;
        if (v < 0) break;
    }
    return letters;
}

std::string answer_payload(const GenericRecord& record, int option_index) {
    if (!record.options || option_index < 0 ||
        option_index >= static_cast<int>(record.options->size())) {
        throw MissingFieldError("options", "answer payload needs a valid option index");
    }
    if (record.task_type == TaskType::kQa) {
        return "option " + option_letter(option_index) + ": " + (*record.options)[option_index];
    }
    return (*record.options)[option_index];
}

void TemplateLibrary::add_pool(TemplatePool pool) {
    if (pool.templates.size() != static_cast<size_t>(kPoolSize)) {
        throw std::runtime_error("template pool " + std::string(to_string(pool.task_type)) + "/" +
                                 std::string(slot_name(pool.slot)) + " has " +
                                 std::to_string(pool.templates.size()) + " templates, expected " +
                                 std::to_string(kPoolSize));
    }
    auto required = mandatory_placeholders(pool.task_type, pool.slot);
    for (size_t i = 0; i < pool.templates.size(); ++i) {
        for (const auto& ph : required) {
            if (pool.templates[i].find(ph) == std::string::npos) {
                throw std::runtime_error("template " + std::to_string(i) + " of pool " +
                                         std::string(to_string(pool.task_type)) + "/" +
                                         std::string(slot_name(pool.slot)) + " lacks " + ph);
            }
        }
    }
    auto key = std::make_pair(pool.task_type, pool.slot);
    pools_[key] = std::move(pool);
}

void TemplateLibrary::validate_complete() const {
    for (TaskType task : {TaskType::kQa, TaskType::kFreeformQa, TaskType::kTextGeneration,
                          TaskType::kImpersonation}) {
        for (Slot slot : {Slot::kInstruction, Slot::kOutput}) {
            if (pools_.find({task, slot}) == pools_.end()) {
                throw std::runtime_error("missing template pool " +
                                         std::string(to_string(task)) + "/" +
                                         std::string(slot_name(slot)));
            }
        }
    }
}

TemplateLibrary TemplateLibrary::builtin() {
    TemplateLibrary lib;
    lib.add_pool({TaskType::kQa, Slot::kInstruction, qa_instruction_templates()});
    lib.add_pool({TaskType::kQa, Slot::kOutput, qa_output_templates()});
    lib.add_pool({TaskType::kFreeformQa, Slot::kInstruction, freeform_instruction_templates()});
    lib.add_pool({TaskType::kFreeformQa, Slot::kOutput, freeform_output_templates()});
    lib.add_pool({TaskType::kTextGeneration, Slot::kInstruction, textgen_instruction_templates()});
    lib.add_pool({TaskType::kTextGeneration, Slot::kOutput, textgen_output_templates()});
    lib.add_pool(
        {TaskType::kImpersonation, Slot::kInstruction, impersonation_instruction_templates()});
    lib.add_pool({TaskType::kImpersonation, Slot::kOutput, impersonation_output_templates()});
    lib.validate_complete();
    return lib;
}

TemplateLibrary TemplateLibrary::load_file(const std::filesystem::path& path) {
    TemplateLibrary lib;
    std::optional<TemplatePool> current;
    auto flush = [&]() {
        if (current) {
            lib.add_pool(std::move(*current));
            current.reset();
        }
    };
    for (const auto& raw : util::read_lines(path)) {
        std::string line = raw;
        if (line.empty() || line[0] == '#') continue;
        if (line.front() == '[' && line.back() == ']') {
            flush();
            std::string section = line.substr(1, line.size() - 2);
            auto sep = section.find('/');
            if (sep == std::string::npos) {
                throw std::runtime_error("bad template section header: " + line);
            }
            TemplatePool pool;
            pool.task_type = task_type_from_string(section.substr(0, sep));
            pool.slot = slot_from_string(section.substr(sep + 1));
            current = std::move(pool);
            continue;
        }
        if (!current) {
            throw std::runtime_error("template line outside a [task/slot] section");
        }
        current->templates.push_back(unescape_template(line));
    }
    flush();
    lib.validate_complete();
    return lib;
}

const TemplatePool& TemplateLibrary::pool(TaskType task, Slot slot) const {
    auto it = pools_.find({task, slot});
    if (it == pools_.end()) {
        throw std::runtime_error("no template pool for " + std::string(to_string(task)) + "/" +
                                 std::string(slot_name(slot)));
    }
    return it->second;
}

std::string TemplateLibrary::dump() const {
    std::ostringstream out;
    out << "# ExCAM template pools: one [task/slot] section per pool, one template per\n"
        << "# line, newlines escaped as \\n. Every pool holds exactly 50 paraphrases.\n";
    for (const auto& [key, pool] : pools_) {
        out << "\n[" << to_string(key.first) << "/" << slot_name(key.second) << "]\n";
        for (const auto& t : pool.templates) {
            out << escape_template(t) << "\n";
        }
    }
    return out.str();
}

int pick_template(uint64_t sample_ordinal, uint64_t seed, const TemplatePool& pool) {
    (void)pool;  // pools are fixed-size; the pick depends only on ordinal and seed
    uint64_t block = sample_ordinal / kPoolSize;
    uint64_t index = sample_ordinal % kPoolSize;
    rng::SplitMix r(rng::derive_seed(seed, "template-block-" + std::to_string(block)));
    auto perm = rng::permutation(kPoolSize, r);
    return static_cast<int>(perm[index]);
}

RenderResult render_ex(const GenericRecord& record, Slot slot, int template_id,
                       const TemplateLibrary& library, std::optional<int> answer_index,
                       const std::optional<std::string>& answer_override) {
    if (template_id < 0 || template_id >= kPoolSize) {
        throw std::out_of_range("template id " + std::to_string(template_id) +
                                " outside [0, " + std::to_string(kPoolSize) + ")");
    }
    const auto& pool = library.pool(record.task_type, slot);
    const std::string& tmpl = pool.templates[static_cast<size_t>(template_id)];

    auto require_question = [&]() -> const std::string& {
        if (record.question_or_topic.empty()) {
            throw MissingFieldError("question", "record lacks a question/topic");
        }
        return record.question_or_topic;
    };

    std::vector<Substitution> subs;
    if (tmpl.find("{question}") != std::string::npos) {
        subs.push_back({"{question}", require_question(), false});
    }
    if (tmpl.find("{topic}") != std::string::npos) {
        subs.push_back({"{topic}", require_question(), false});
    }
    if (tmpl.find("{options}") != std::string::npos) {
        if (!record.options) {
            throw MissingFieldError("options", "record lacks options");
        }
        std::string list;
        for (size_t k = 0; k < record.options->size(); ++k) {
            if (k > 0) list += "\n";
            list += "Option " + option_letter(static_cast<int>(k)) + ": " + (*record.options)[k];
        }
        subs.push_back({"{options}", std::move(list), false});
    }
    if (tmpl.find("{role_block}") != std::string::npos) {
        if (record.role_context.empty()) {
            throw MissingFieldError("role_context", "record lacks role context");
        }
        std::string block;
        for (const auto& field : record.role_context) {
            if (util::to_lower_ascii(field.key) == "context") {
                block += "Context: '" + field.value + "'\n";
            } else {
                block += field.key + ": " + field.value + "\n";
            }
        }
        block += "Task content: '" + require_question() + "'.";
        subs.push_back({"{role_block}", std::move(block), false});
    }
    if (tmpl.find("{answer}") != std::string::npos) {
        std::string payload;
        if (answer_override) {
            payload = *answer_override;
        } else if (answer_index.has_value()) {
            payload = answer_payload(record, *answer_index);
        } else if (record.task_type == TaskType::kQa) {
            if (!record.correct_index) {
                throw MissingFieldError("correct_index", "record lacks a correct option");
            }
            payload = answer_payload(record, *record.correct_index);
        } else if (record.answer_text) {
            payload = *record.answer_text;
        } else if (record.options && record.correct_index) {
            payload = answer_payload(record, *record.correct_index);
        } else {
            throw MissingFieldError("answer", "record lacks an answer text");
        }
        subs.push_back({"{answer}", std::move(payload), true});
    }

    RenderResult result;
    result.text.reserve(tmpl.size());
    size_t pos = 0;
    while (pos < tmpl.size()) {
        size_t best = std::string::npos;
        const Substitution* hit = nullptr;
        for (const auto& sub : subs) {
            size_t at = tmpl.find(sub.placeholder, pos);
            if (at != std::string::npos && at < best) {
                best = at;
                hit = &sub;
            }
        }
        if (hit == nullptr) {
            result.text.append(tmpl.substr(pos));
            break;
        }
        result.text.append(tmpl.substr(pos, best - pos));
        if (hit->is_answer) {
            result.answer_byte_start = result.text.size();
            result.answer_byte_end = result.text.size() + hit->value.size();
        }
        result.text.append(hit->value);
        pos = best + hit->placeholder.size();
    }
    return result;
}

std::string render(const GenericRecord& record, Slot slot, int template_id,
                   const TemplateLibrary& library) {
    return render_ex(record, slot, template_id, library).text;
}

}  // namespace excam::tpl
