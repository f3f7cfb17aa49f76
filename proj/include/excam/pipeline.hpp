#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "excam/config.hpp"
#include "excam/metaeval.hpp"
#include "excam/scoring.hpp"

// End-to-end pipeline stages behind the CLI subcommands. Every stage is
// deterministic given (config, inputs, seed, replay file); judge and forge
// keep a completed-id ledger so interrupted runs resume without duplicating
// work or output lines.

namespace excam::pipeline {

// Gateway construction from config plus CLI overrides.
struct GatewayOverrides {
    std::optional<std::filesystem::path> replay_file;  // serve canned responses
    std::optional<std::filesystem::path> record_file;  // record live responses
    std::optional<std::string> kind;                   // force "http"/"mock"
};

std::shared_ptr<gateway::ChatGateway> make_gateway(const Config& config,
                                                   const GatewayOverrides& overrides);

struct SourceCounts {
    std::string source;
    size_t train = 0;
    size_t dev = 0;
    size_t test = 0;
    size_t skipped_lines = 0;
};

struct BuildStats {
    std::vector<SourceCounts> per_source;
    std::filesystem::path dataset_path;  // positive samples
    std::filesystem::path records_path;  // normalized records sidecar
};

BuildStats cmd_build(const Config& config);

struct ForgeStats {
    std::map<std::string, size_t> positives_per_source;
    std::map<std::string, size_t> negatives_per_source;
    size_t hard = 0;
    size_t freeform_pairs = 0;
    size_t inverted = 0;
    size_t soft = 0;
    size_t soft_skipped_gateway = 0;
    size_t soft_skipped_parse = 0;
    size_t soft_skipped_filtered = 0;
    size_t soft_skipped_degenerate = 0;
    std::filesystem::path dataset_path;
    std::filesystem::path gold_answers_path;
};

ForgeStats cmd_forge(const Config& config, const std::filesystem::path& dataset_path,
                     const GatewayOverrides& overrides, bool resume);

struct SftStats {
    size_t exported = 0;
    std::filesystem::path sft_path;
};

SftStats cmd_export_sft(const Config& config, const std::filesystem::path& dataset_path);

struct JudgeStats {
    size_t judged = 0;
    size_t resumed = 0;
    size_t parse_failures = 0;
    std::filesystem::path results_path;
};

JudgeStats cmd_judge(const Config& config, const std::filesystem::path& dataset_path,
                     const scoring::JudgeOptions& options, const std::string& system_name,
                     std::optional<Split> split_filter, const GatewayOverrides& overrides,
                     bool resume);

struct MetaEvalPaths {
    std::filesystem::path main_results_csv;
    std::filesystem::path ood_matrix_csv;
    std::optional<std::filesystem::path> match_rates_csv;
    std::filesystem::path report_md;
};

struct MetaEvalOptions {
    double alpha = 0.05;
    size_t pair_cap = 1'000'000;
    int resamples = 1000;
    uint64_t seed = 0;
    std::optional<std::filesystem::path> holdouts_path;      // {system: dataset}
    std::optional<std::filesystem::path> gold_answers_path;  // from cmd_forge
};

MetaEvalPaths cmd_meta_eval(const std::filesystem::path& runs_dir,
                            const std::filesystem::path& out_dir,
                            const MetaEvalOptions& options);

// JSONL helpers shared by stages and tests.
std::vector<Sample> read_dataset(const std::filesystem::path& path);
void write_dataset(const std::filesystem::path& path, const std::vector<Sample>& samples);

}  // namespace excam::pipeline
