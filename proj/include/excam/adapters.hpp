#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "excam/core.hpp"
#include "excam/templates.hpp"

// Ingests locally provided upstream corpora (one generic JSONL schema per
// task type), normalizes to GenericRecords, caps with stratification, wraps
// records into positive samples and assigns record-level splits.

namespace excam::adapters {

struct SourceSpec {
    std::string name;
    std::filesystem::path path;
    TaskType task_type = TaskType::kQa;
    std::string stratify_key = "none";  // "region", "language" or "none"
    int cap = 5000;
    std::vector<std::string> binary_labels;  // size 2 enables label inversion
    bool soft_errors = false;                // source participates in soft forging
};

class AdapterError : public std::runtime_error {
public:
    enum class Kind { kFileUnreadable, kEmptySource, kUnknownKey };

    AdapterError(Kind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

struct IngestResult {
    std::vector<GenericRecord> records;  // input order, validated

    struct SkippedLine {
        int line_number = 0;  // 1-based
        std::string reason;
    };
    std::vector<SkippedLine> skipped;
};

IngestResult ingest(const SourceSpec& spec);

// Keeps at most cap records; when over cap, draws round-robin over strata in
// seeded order with seeded-random order inside each stratum, so per-stratum
// counts differ by at most 1 where supply allows. Output preserves the input
// order of the selected records.
std::vector<GenericRecord> stratify_and_cap(const std::vector<GenericRecord>& records,
                                            const std::string& key, int cap, uint64_t seed);

// Error-free sample: rendered instruction/output, empty report,
// error_mode none. Instruction and output template ids are drawn
// independently per slot.
Sample wrap_positive(const GenericRecord& record, uint64_t ordinal, uint64_t seed,
                     const tpl::TemplateLibrary& library);

struct SplitRatios {
    double train = 0.7;
    double dev = 0.1;
    double test = 0.2;
};

// Assigns splits at the record level: every sample sharing a record_id gets
// the same split. Per-source proportions land within one sample of the
// ratios (largest-remainder allocation over a seeded record order).
void assign_splits(std::vector<Sample>& samples, const SplitRatios& ratios, uint64_t seed);

}  // namespace excam::adapters
