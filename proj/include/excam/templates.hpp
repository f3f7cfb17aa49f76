#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "excam/core.hpp"

// Instruction/output paraphrase pools and deterministic stratified template
// selection. Each (task_type, slot) pool holds exactly 50 paraphrases built
// hierarchically from shared fragments; selection cycles a seeded
// permutation in blocks of 50 so every block of 50 ordinals uses every
// template exactly once.

namespace excam::tpl {

enum class Slot { kInstruction, kOutput };

inline constexpr int kPoolSize = 50;

struct TemplatePool {
    TaskType task_type = TaskType::kQa;
    Slot slot = Slot::kInstruction;
    std::vector<std::string> templates;  // exactly kPoolSize entries
};

class MissingFieldError : public std::runtime_error {
public:
    MissingFieldError(std::string field, const std::string& message)
        : std::runtime_error(message), field_(std::move(field)) {}

    const std::string& field() const { return field_; }

private:
    std::string field_;
};

class TemplateLibrary {
public:
    // The pools shipped with the toolkit.
    static TemplateLibrary builtin();

    // Plain text file: one pool per [task/slot] section, one template per
    // line, newlines escaped as \n.
    static TemplateLibrary load_file(const std::filesystem::path& path);

    const TemplatePool& pool(TaskType task, Slot slot) const;

    // Canonical file representation (round-trips through load_file).
    std::string dump() const;

private:
    std::map<std::pair<TaskType, Slot>, TemplatePool> pools_;

    void add_pool(TemplatePool pool);
    void validate_complete() const;
};

// Deterministic stratified pick: a seeded permutation of [0, 50) per block
// of 50 consecutive ordinals.
int pick_template(uint64_t sample_ordinal, uint64_t seed, const TemplatePool& pool);

struct RenderResult {
    std::string text;
    // Byte range of the substituted {answer} payload, when the template
    // has one; lets negative forging span the answer tokens.
    std::optional<size_t> answer_byte_start;
    std::optional<size_t> answer_byte_end;
};

// Renders a record into a template. answer_index overrides the option used
// for the QA answer payload (wrong-option rendering); answer_override
// replaces the answer text wholesale (label inversion).
RenderResult render_ex(const GenericRecord& record, Slot slot, int template_id,
                       const TemplateLibrary& library,
                       std::optional<int> answer_index = std::nullopt,
                       const std::optional<std::string>& answer_override = std::nullopt);

std::string render(const GenericRecord& record, Slot slot, int template_id,
                   const TemplateLibrary& library);

// Option k renders as A..Z for k < 26, then AA, AB, ...
std::string option_letter(int k);

// Answer payload for option k: lettered ("option C: sandwich") for QA
// records whose instruction lists the options, the bare option text for
// every other task type.
std::string answer_payload(const GenericRecord& record, int option_index);

}  // namespace excam::tpl
