// excam: config-driven front end for the dataset build / error forging /
// judging / meta-evaluation pipeline.

#include <cstdio>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "excam/config.hpp"
#include "excam/pipeline.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::optional<uint64_t> seed_override;
    std::optional<std::string> out_override;
    std::string replay_file;
    std::string record_file;
    std::string gateway_kind;
};

excam::Config load_config(const CommonArgs& args) {
    auto config = excam::Config::load(args.config_path);
    if (args.seed_override) config.seed = *args.seed_override;
    if (args.out_override) config.output_dir = *args.out_override;
    return config;
}

excam::pipeline::GatewayOverrides gateway_overrides(const CommonArgs& args) {
    excam::pipeline::GatewayOverrides overrides;
    if (!args.replay_file.empty()) overrides.replay_file = args.replay_file;
    if (!args.record_file.empty()) overrides.record_file = args.record_file;
    if (!args.gateway_kind.empty()) overrides.kind = args.gateway_kind;
    return overrides;
}

void add_common(CLI::App* cmd, CommonArgs& args, bool with_gateway) {
    cmd->add_option("--config", args.config_path, "Path to the pipeline config JSON")
        ->required();
    cmd->add_option("--seed", args.seed_override, "Override the config seed");
    cmd->add_option("--out", args.out_override, "Override the config output directory");
    if (with_gateway) {
        cmd->add_option("--replay", args.replay_file,
                        "Serve gateway responses from a replay file (offline runs)");
        cmd->add_option("--record", args.record_file,
                        "Record gateway responses into a replay file");
        cmd->add_option("--gateway", args.gateway_kind, "Force gateway kind: http or mock");
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ExCAM pipeline toolkit"};
    app.require_subcommand(1);

    CommonArgs build_args;
    auto* build = app.add_subcommand("build", "Ingest sources and emit positive samples");
    add_common(build, build_args, false);

    CommonArgs forge_args;
    std::string forge_dataset;
    bool forge_resume = false;
    auto* forge = app.add_subcommand("forge", "Add hard/soft negative samples");
    add_common(forge, forge_args, true);
    forge->add_option("--dataset", forge_dataset,
                      "Positive dataset JSONL (default <out>/positives.jsonl)");
    forge->add_flag("--resume", forge_resume, "Resume from the soft-generation ledger");

    CommonArgs sft_args;
    std::string sft_dataset;
    auto* sft = app.add_subcommand("export-sft", "Export train-split SFT prompt/target pairs");
    add_common(sft, sft_args, false);
    sft->add_option("--dataset", sft_dataset, "Dataset JSONL (default <out>/dataset.jsonl)");

    CommonArgs judge_args;
    std::string judge_dataset;
    std::string judge_mode = "report";
    bool judge_plus_p = false;
    std::string judge_split = "test";
    std::string judge_system;
    bool judge_resume = false;
    auto* judge = app.add_subcommand("judge", "Score samples with a judge endpoint");
    add_common(judge, judge_args, true);
    judge->add_option("--dataset", judge_dataset, "Dataset JSONL (default <out>/dataset.jsonl)");
    judge->add_option("--mode", judge_mode, "report|count|binary|severity")
        ->check(CLI::IsMember({"report", "count", "binary", "severity"}));
    judge->add_flag("--plus-p", judge_plus_p,
                    "Substitute sequence certainty when the base score is 0");
    judge->add_option("--split", judge_split, "train|dev|test|all (default test)")
        ->check(CLI::IsMember({"train", "dev", "test", "all"}));
    judge->add_option("--system-name", judge_system,
                      "Run name (default <model>_<mode>[+p])");
    judge->add_flag("--resume", judge_resume, "Resume from the completed-id ledger");

    std::string meta_runs;
    std::string meta_out;
    double meta_alpha = 0.05;
    size_t meta_pair_cap = 1'000'000;
    int meta_resamples = 1000;
    uint64_t meta_seed = 0;
    std::string meta_holdouts;
    std::string meta_gold;
    auto* metaeval = app.add_subcommand("meta-eval", "Meta-evaluate scored runs");
    metaeval->add_option("--runs", meta_runs, "Directory of per-system ScoredResult JSONL files")
        ->required();
    metaeval->add_option("--out", meta_out, "Output directory for CSV/Markdown reports")
        ->required();
    metaeval->add_option("--alpha", meta_alpha, "Significance level (default 0.05)");
    metaeval->add_option("--pair-cap", meta_pair_cap,
                         "Evaluated-pair cap for tie-calibrated accuracy (default 1000000)");
    metaeval->add_option("--resamples", meta_resamples,
                         "Permutation resamples (default 1000)");
    metaeval->add_option("--seed", meta_seed, "Seed for pair sampling and permutations")
        ->required();
    metaeval->add_option("--holdouts", meta_holdouts,
                         "JSON map of system name to held-out dataset");
    metaeval->add_option("--gold-answers", meta_gold,
                         "gold_answers.jsonl from forge, enables match-rate reporting");

    CLI11_PARSE(app, argc, argv);

    try {
        if (build->parsed()) {
            auto config = load_config(build_args);
            auto stats = excam::pipeline::cmd_build(config);
            std::printf("wrote %s\n", stats.dataset_path.string().c_str());
            return 0;
        }
        if (forge->parsed()) {
            auto config = load_config(forge_args);
            std::filesystem::path dataset = forge_dataset.empty()
                                                ? config.output_dir / "positives.jsonl"
                                                : std::filesystem::path(forge_dataset);
            auto stats = excam::pipeline::cmd_forge(config, dataset,
                                                    gateway_overrides(forge_args), forge_resume);
            std::printf("wrote %s\n", stats.dataset_path.string().c_str());
            return 0;
        }
        if (sft->parsed()) {
            auto config = load_config(sft_args);
            std::filesystem::path dataset = sft_dataset.empty()
                                                ? config.output_dir / "dataset.jsonl"
                                                : std::filesystem::path(sft_dataset);
            auto stats = excam::pipeline::cmd_export_sft(config, dataset);
            std::printf("wrote %s (%zu lines)\n", stats.sft_path.string().c_str(),
                        stats.exported);
            return 0;
        }
        if (judge->parsed()) {
            auto config = load_config(judge_args);
            std::filesystem::path dataset = judge_dataset.empty()
                                                ? config.output_dir / "dataset.jsonl"
                                                : std::filesystem::path(judge_dataset);
            excam::scoring::JudgeOptions options;
            options.mode = excam::scoring::judge_mode_from_string(judge_mode);
            options.plus_p = judge_plus_p;
            std::optional<excam::Split> split;
            if (judge_split != "all") split = excam::split_from_string(judge_split);
            std::string system_name = judge_system;
            if (system_name.empty()) {
                system_name = config.gateway.judge.model + "_" + judge_mode +
                              (judge_plus_p ? "+p" : "");
            }
            auto stats = excam::pipeline::cmd_judge(config, dataset, options, system_name, split,
                                                    gateway_overrides(judge_args), judge_resume);
            std::printf("wrote %s\n", stats.results_path.string().c_str());
            return 0;
        }
        if (metaeval->parsed()) {
            excam::pipeline::MetaEvalOptions options;
            options.alpha = meta_alpha;
            options.pair_cap = meta_pair_cap;
            options.resamples = meta_resamples;
            options.seed = meta_seed;
            if (!meta_holdouts.empty()) options.holdouts_path = meta_holdouts;
            if (!meta_gold.empty()) options.gold_answers_path = meta_gold;
            auto paths = excam::pipeline::cmd_meta_eval(meta_runs, meta_out, options);
            std::printf("wrote %s\n", paths.report_md.string().c_str());
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
