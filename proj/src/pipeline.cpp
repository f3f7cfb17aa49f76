#include "excam/pipeline.hpp"

#include <algorithm>
#include <cstdarg>
#include <cstdio>
#include <set>
#include <sstream>

#include "excam/forge.hpp"
#include "excam/prompts.hpp"
#include "excam/rng.hpp"
#include "excam/templates.hpp"
#include "excam/util.hpp"

namespace excam::pipeline {

namespace {

void log_info(const char* fmt, ...) {
    va_list args;
    va_start(args, fmt);
    std::fprintf(stderr, "[excam] ");
    std::vfprintf(stderr, fmt, args);
    std::fprintf(stderr, "\n");
    va_end(args);
}

std::string fmt3(double v) {
    if (v == 0.0) v = 0.0;  // normalize -0.0
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

int mode_rank(ErrorMode mode) {
    return static_cast<int>(mode);
}

void sort_canonical(std::vector<Sample>& samples) {
    std::sort(samples.begin(), samples.end(), [](const Sample& a, const Sample& b) {
        if (a.record_id != b.record_id) return a.record_id < b.record_id;
        int ra = mode_rank(a.provenance.error_mode);
        int rb = mode_rank(b.provenance.error_mode);
        if (ra != rb) return ra < rb;
        return a.id < b.id;
    });
}

std::set<std::string> read_ledger(const std::filesystem::path& path) {
    std::set<std::string> entries;
    if (!std::filesystem::exists(path)) return entries;
    for (const auto& line : util::read_lines(path)) {
        if (!line.empty()) entries.insert(line);
    }
    return entries;
}

const adapters::SourceSpec& spec_for(const Config& config, const std::string& name) {
    for (const auto& spec : config.sources) {
        if (spec.name == name) return spec;
    }
    throw std::runtime_error("dataset references unknown source '" + name + "'");
}

}  // namespace

std::shared_ptr<gateway::ChatGateway> make_gateway(const Config& config,
                                                   const GatewayOverrides& overrides) {
    std::shared_ptr<gateway::ChatGateway> gw;
    if (overrides.replay_file) {
        gw = std::make_shared<gateway::ReplayGateway>(*overrides.replay_file);
    } else {
        std::string kind = overrides.kind.value_or(config.gateway.kind);
        if (kind == "mock") {
            gw = std::make_shared<gateway::MockGateway>(config.gateway.mock_seed);
        } else if (kind == "http") {
            if (config.gateway.base_url.empty()) {
                throw std::runtime_error(
                    "no gateway base URL configured (set gateway.base_url or EXCAM_API_BASE)");
            }
            gw = std::make_shared<gateway::HttpGateway>(config.gateway.base_url,
                                                        config.gateway.api_key,
                                                        config.gateway.retry);
        } else {
            throw std::runtime_error("unknown gateway kind '" + kind + "'");
        }
    }
    if (overrides.record_file) {
        gw = std::make_shared<gateway::RecordingGateway>(gw, *overrides.record_file);
    }
    return gw;
}

std::vector<Sample> read_dataset(const std::filesystem::path& path) {
    std::vector<Sample> samples;
    for (const auto& line : util::read_lines(path)) {
        if (util::trim(line).empty()) continue;
        samples.push_back(parse_sample(line));
    }
    return samples;
}

void write_dataset(const std::filesystem::path& path, const std::vector<Sample>& samples) {
    std::string content;
    for (const auto& sample : samples) {
        content += serialize_sample(sample);
        content += '\n';
    }
    util::write_file_atomic(path, content);
}

BuildStats cmd_build(const Config& config) {
    std::filesystem::create_directories(config.output_dir);
    auto library = tpl::TemplateLibrary::load_file(config.template_pool_path);

    BuildStats stats;
    std::vector<Sample> samples;
    std::vector<GenericRecord> all_records;
    for (const auto& spec : config.sources) {
        auto ingested = adapters::ingest(spec);
        for (const auto& skip : ingested.skipped) {
            log_info("source=%s line=%d skipped: %s", spec.name.c_str(), skip.line_number,
                     skip.reason.c_str());
        }
        auto capped = adapters::stratify_and_cap(
            ingested.records, spec.stratify_key, spec.cap,
            rng::derive_seed(config.seed, "stratify:" + spec.name));
        uint64_t template_seed = rng::derive_seed(config.seed, "templates:" + spec.name);
        for (size_t i = 0; i < capped.size(); ++i) {
            samples.push_back(adapters::wrap_positive(capped[i], i, template_seed, library));
        }
        all_records.insert(all_records.end(), capped.begin(), capped.end());

        SourceCounts counts;
        counts.source = spec.name;
        counts.skipped_lines = ingested.skipped.size();
        stats.per_source.push_back(counts);
    }

    adapters::assign_splits(samples, config.ratios, config.seed);

    for (auto& counts : stats.per_source) {
        for (const auto& s : samples) {
            if (s.metadata.source_dataset != counts.source) continue;
            switch (s.split) {
                case Split::kTrain: ++counts.train; break;
                case Split::kDev: ++counts.dev; break;
                case Split::kTest: ++counts.test; break;
            }
        }
        log_info("source=%s train=%zu dev=%zu test=%zu skipped=%zu", counts.source.c_str(),
                 counts.train, counts.dev, counts.test, counts.skipped_lines);
    }

    stats.dataset_path = config.output_dir / "positives.jsonl";
    write_dataset(stats.dataset_path, samples);

    stats.records_path = config.output_dir / "records.jsonl";
    std::string record_lines;
    for (const auto& record : all_records) {
        record_lines += record_to_json(record).dump();
        record_lines += '\n';
    }
    util::write_file_atomic(stats.records_path, record_lines);
    return stats;
}

ForgeStats cmd_forge(const Config& config, const std::filesystem::path& dataset_path,
                     const GatewayOverrides& overrides, bool resume) {
    auto library = tpl::TemplateLibrary::load_file(config.template_pool_path);
    auto samples = read_dataset(dataset_path);
    if (samples.empty()) {
        throw adapters::AdapterError(adapters::AdapterError::Kind::kEmptySource,
                                     "dataset is empty: " + dataset_path.string());
    }

    const auto records_path = dataset_path.parent_path() / "records.jsonl";
    std::map<std::string, GenericRecord> records;
    for (const auto& line : util::read_lines(records_path)) {
        if (util::trim(line).empty()) continue;
        GenericRecord record = record_from_json(nlohmann::ordered_json::parse(line));
        records[record.source_dataset + "/" + record.id] = record;
    }

    ForgeStats stats;
    stats.dataset_path = config.output_dir / "dataset.jsonl";
    stats.gold_answers_path = config.output_dir / "gold_answers.jsonl";
    const auto soft_ledger_path = stats.dataset_path.string() + ".soft.done";
    const auto soft_partial_path = stats.dataset_path.string() + ".soft.partial";
    if (!resume) {
        std::filesystem::remove(soft_ledger_path);
        std::filesystem::remove(soft_partial_path);
    }
    auto soft_done = read_ledger(soft_ledger_path);

    std::vector<Sample> corpus = samples;
    std::map<std::string, std::string> gold_answers;
    std::map<std::string, size_t> source_ordinal;
    std::vector<const Sample*> soft_minor_pending;
    std::vector<const Sample*> soft_major_pending;

    for (const auto& sample : samples) {
        if (sample.provenance.error_mode != ErrorMode::kNone) continue;
        if (!util::starts_with(sample.id.substr(sample.record_id.size()), "#pos")) continue;
        const auto& spec = spec_for(config, sample.metadata.source_dataset);
        uint64_t ordinal = source_ordinal[spec.name]++;
        uint64_t template_seed = rng::derive_seed(config.seed, "templates:" + spec.name);

        auto record_it = records.find(sample.record_id);
        if (record_it == records.end()) {
            throw std::runtime_error("no record for sample " + sample.id +
                                     " (records.jsonl out of date?)");
        }
        const GenericRecord& record = record_it->second;

        if (record.options && record.correct_index && record.options->size() >= 2) {
            Sample hard = forge::make_hard_negative(record, ordinal, template_seed, library);
            hard.split = sample.split;
            gold_answers[hard.id] = (*record.options)[*record.correct_index];
            corpus.push_back(std::move(hard));
            ++stats.hard;

            if (record.task_type == TaskType::kQa) {
                auto [ffpos, ffneg] =
                    forge::expand_freeform_pair(record, ordinal, template_seed, library);
                ffpos.split = sample.split;
                ffneg.split = sample.split;
                gold_answers[ffneg.id] = (*record.options)[*record.correct_index];
                corpus.push_back(std::move(ffpos));
                corpus.push_back(std::move(ffneg));
                ++stats.freeform_pairs;
            }
        }

        if (spec.binary_labels.size() == 2 && record.answer_text) {
            Sample inverted =
                forge::invert_label(record, ordinal, template_seed, library, spec.binary_labels);
            inverted.split = sample.split;
            gold_answers[inverted.id] = *record.answer_text;
            corpus.push_back(std::move(inverted));
            ++stats.inverted;
        }

        if (spec.soft_errors) {
            if (soft_done.find(sample.id + "|minor") == soft_done.end()) {
                soft_minor_pending.push_back(&sample);
            }
            if (soft_done.find(sample.id + "|major") == soft_done.end()) {
                soft_major_pending.push_back(&sample);
            }
        }
    }

    const bool wants_soft = !soft_minor_pending.empty() || !soft_major_pending.empty();
    if (wants_soft) {
        auto gw = make_gateway(config, overrides);
        forge::ForgeSoftOptions options;
        options.max_in_flight = config.gateway.max_in_flight;
        options.model_name = config.gateway.generator.model;
        options.temperature = config.gateway.generator.temperature;
        options.max_tokens = config.gateway.generator.max_tokens;

        auto run_mode = [&](const std::vector<const Sample*>& pending, bool minor) {
            if (pending.empty()) return;
            std::vector<Sample> inputs;
            inputs.reserve(pending.size());
            for (const auto* s : pending) inputs.push_back(*s);
            forge::ForgeSoftOptions mode_options = options;
            mode_options.minor = minor;
            mode_options.major = !minor;
            auto outcome = forge::forge_soft(inputs, *gw,
                                             mode_options,
                                             rng::derive_seed(config.seed, "forge-soft"));
            for (const auto& negative : outcome.negatives) {
                util::append_line(soft_partial_path, serialize_sample(negative));
            }
            // no-retry policy: every attempted pair is done, success or not
            for (const auto* s : pending) {
                util::append_line(soft_ledger_path, s->id + (minor ? "|minor" : "|major"));
            }
            stats.soft += outcome.negatives.size();
            stats.soft_skipped_gateway += outcome.skipped_gateway;
            stats.soft_skipped_parse += outcome.skipped_parse;
            stats.soft_skipped_filtered += outcome.skipped_filtered;
            stats.soft_skipped_degenerate += outcome.skipped_degenerate;
        };
        run_mode(soft_minor_pending, true);
        run_mode(soft_major_pending, false);
    }

    if (std::filesystem::exists(soft_partial_path)) {
        for (const auto& line : util::read_lines(soft_partial_path)) {
            if (util::trim(line).empty()) continue;
            corpus.push_back(parse_sample(line));
        }
    }

    // concurrency never changes the artifact: canonical order before writing
    sort_canonical(corpus);
    // forging an already-forged dataset recomputes identical negatives;
    // keep one line per sample id
    corpus.erase(std::unique(corpus.begin(), corpus.end(),
                             [](const Sample& a, const Sample& b) { return a.id == b.id; }),
                 corpus.end());

    std::set<std::string> records_with_positive;
    for (const auto& s : corpus) {
        auto& bucket = s.provenance.error_mode == ErrorMode::kNone
                           ? stats.positives_per_source
                           : stats.negatives_per_source;
        ++bucket[s.metadata.source_dataset];
        if (s.provenance.error_mode == ErrorMode::kNone) {
            records_with_positive.insert(s.record_id);
        }
    }
    size_t unpaired = 0;
    for (const auto& s : corpus) {
        if (s.provenance.error_mode != ErrorMode::kNone &&
            records_with_positive.find(s.record_id) == records_with_positive.end()) {
            ++unpaired;
        }
    }
    if (unpaired > 0) {
        log_info("warning: %zu negatives lack a paired positive", unpaired);
    }
    for (const auto& [source, positives] : stats.positives_per_source) {
        log_info("source=%s positives=%zu negatives=%zu", source.c_str(), positives,
                 stats.negatives_per_source[source]);
    }
    log_info("forged hard=%zu freeform_pairs=%zu inverted=%zu soft=%zu "
             "skips(gateway=%zu parse=%zu filtered=%zu degenerate=%zu)",
             stats.hard, stats.freeform_pairs, stats.inverted, stats.soft,
             stats.soft_skipped_gateway, stats.soft_skipped_parse, stats.soft_skipped_filtered,
             stats.soft_skipped_degenerate);

    write_dataset(stats.dataset_path, corpus);

    std::string gold_lines;
    for (const auto& [id, answer] : gold_answers) {
        nlohmann::ordered_json j;
        j["sample_id"] = id;
        j["answer"] = answer;
        gold_lines += j.dump();
        gold_lines += '\n';
    }
    util::write_file_atomic(stats.gold_answers_path, gold_lines);
    return stats;
}

SftStats cmd_export_sft(const Config& config, const std::filesystem::path& dataset_path) {
    auto samples = read_dataset(dataset_path);
    SftStats stats;
    stats.sft_path = config.output_dir / "sft.jsonl";
    std::string content;
    for (const auto& sample : samples) {
        if (sample.split != Split::kTrain) continue;
        nlohmann::ordered_json j;
        j["system"] = std::string(prompts::report_system());
        j["prompt"] = prompts::render_eval_prompt(prompts::report_user(), sample.instruction,
                                                  sample.output);
        j["target"] = serialize_report(sample.report);
        content += j.dump();
        content += '\n';
        ++stats.exported;
    }
    util::write_file_atomic(stats.sft_path, content);
    return stats;
}

JudgeStats cmd_judge(const Config& config, const std::filesystem::path& dataset_path,
                     const scoring::JudgeOptions& options_in, const std::string& system_name,
                     std::optional<Split> split_filter, const GatewayOverrides& overrides,
                     bool resume) {
    auto samples = read_dataset(dataset_path);
    scoring::JudgeOptions options = options_in;
    options.max_in_flight = config.gateway.max_in_flight;
    options.model_name = config.gateway.judge.model;
    options.temperature = config.gateway.judge.temperature;
    options.max_tokens = config.gateway.judge.max_tokens;

    std::vector<Sample> selected;
    for (auto& sample : samples) {
        if (!split_filter || sample.split == *split_filter) {
            selected.push_back(std::move(sample));
        }
    }

    JudgeStats stats;
    auto runs_dir = config.output_dir / "runs";
    std::filesystem::create_directories(runs_dir);
    stats.results_path = runs_dir / (system_name + ".jsonl");
    const auto ledger_path = stats.results_path.string() + ".done";
    const auto partial_path = stats.results_path.string() + ".partial";
    if (!resume) {
        std::filesystem::remove(ledger_path);
        std::filesystem::remove(partial_path);
        std::filesystem::remove(stats.results_path);
    }
    auto done = read_ledger(ledger_path);
    stats.resumed = done.size();

    std::vector<const Sample*> pending;
    for (const auto& sample : selected) {
        if (done.find(sample.id) == done.end()) pending.push_back(&sample);
    }

    if (!pending.empty()) {
        auto gw = make_gateway(config, overrides);
        const size_t chunk = static_cast<size_t>(std::max(1, options.max_in_flight)) * 32;
        for (size_t begin = 0; begin < pending.size(); begin += chunk) {
            size_t end = std::min(begin + chunk, pending.size());
            std::vector<gateway::CompletionRequest> requests;
            requests.reserve(end - begin);
            for (size_t i = begin; i < end; ++i) {
                requests.push_back(scoring::judge_request(*pending[i], options));
            }
            auto completions = gateway::complete_batch(*gw, requests, options.max_in_flight);
            for (size_t i = begin; i < end; ++i) {
                auto result =
                    scoring::score_completion(*pending[i], completions[i - begin], options);
                util::append_line(partial_path, scoring::serialize_result(result));
                util::append_line(ledger_path, pending[i]->id);
            }
            log_info("judged %zu/%zu", end, pending.size());
        }
    }

    std::vector<scoring::ScoredResult> results;
    if (std::filesystem::exists(partial_path)) {
        for (const auto& line : util::read_lines(partial_path)) {
            if (util::trim(line).empty()) continue;
            results.push_back(scoring::parse_result(line));
        }
    }
    std::sort(results.begin(), results.end(),
              [](const scoring::ScoredResult& a, const scoring::ScoredResult& b) {
                  return a.sample_id < b.sample_id;
              });
    std::string content;
    for (const auto& r : results) {
        content += scoring::serialize_result(r);
        content += '\n';
        if (!r.parse_ok) ++stats.parse_failures;
    }
    util::write_file_atomic(stats.results_path, content);
    stats.judged = results.size();
    log_info("system=%s judged=%zu parse_failures=%zu", system_name.c_str(), stats.judged,
             stats.parse_failures);
    return stats;
}

namespace {

struct SystemMetrics {
    std::string system;
    double s_acc = 0.0;
    bool s_acc_mark = false;
    std::optional<double> kd;
    bool kd_mark = false;
    std::optional<double> t_acc;
    double t_eps = 0.0;
    bool t_acc_mark = false;
};

std::vector<double> gold_vector(const std::vector<scoring::ScoredResult>& rs) {
    std::vector<double> v;
    v.reserve(rs.size());
    for (const auto& r : rs) v.push_back(r.gold_score);
    return v;
}

std::vector<double> score_vector(const std::vector<scoring::ScoredResult>& rs) {
    std::vector<double> v;
    v.reserve(rs.size());
    for (const auto& r : rs) v.push_back(r.score);
    return v;
}

// Aligned (gold, score_a, score_b) triples over the shared sample ids.
struct AlignedScores {
    std::vector<double> gold;
    std::vector<double> a;
    std::vector<double> b;
    std::vector<double> correct_a;
    std::vector<double> correct_b;
};

AlignedScores align(const meta::EvalRun& ra, const meta::EvalRun& rb) {
    std::map<std::string, const scoring::ScoredResult*> by_id;
    for (const auto& r : rb.results) by_id[r.sample_id] = &r;
    AlignedScores out;
    for (const auto& r : ra.results) {
        auto it = by_id.find(r.sample_id);
        if (it == by_id.end()) continue;
        out.gold.push_back(r.gold_score);
        out.a.push_back(r.score);
        out.b.push_back(it->second->score);
        out.correct_a.push_back(r.presence == r.gold_presence ? 1.0 : 0.0);
        out.correct_b.push_back(
            it->second->presence == it->second->gold_presence ? 1.0 : 0.0);
    }
    return out;
}

// Permutation over per-item system-label swaps for correlation statistics.
template <typename StatFn>
double label_swap_significance(const AlignedScores& aligned, StatFn stat, int resamples,
                               uint64_t seed) {
    auto safe_stat = [&](const std::vector<double>& scores) {
        try {
            return stat(aligned.gold, scores);
        } catch (const meta::MetaEvalError&) {
            return 0.0;
        }
    };
    const double observed = std::abs(safe_stat(aligned.a) - safe_stat(aligned.b));
    rng::SplitMix r(seed);
    std::vector<double> a = aligned.a;
    std::vector<double> b = aligned.b;
    int hits = 0;
    for (int k = 0; k < resamples; ++k) {
        for (size_t i = 0; i < a.size(); ++i) {
            if (r.coin()) {
                a[i] = aligned.b[i];
                b[i] = aligned.a[i];
            } else {
                a[i] = aligned.a[i];
                b[i] = aligned.b[i];
            }
        }
        if (std::abs(safe_stat(a) - safe_stat(b)) >= observed) ++hits;
    }
    return static_cast<double>(1 + hits) / static_cast<double>(1 + resamples);
}

std::string md_row(const std::vector<std::string>& cells) {
    std::string row = "|";
    for (const auto& c : cells) {
        row += " " + c + " |";
    }
    return row + "\n";
}

}  // namespace

MetaEvalPaths cmd_meta_eval(const std::filesystem::path& runs_dir,
                            const std::filesystem::path& out_dir,
                            const MetaEvalOptions& options) {
    std::vector<std::filesystem::path> run_files;
    for (const auto& entry : std::filesystem::directory_iterator(runs_dir)) {
        if (entry.path().extension() == ".jsonl") run_files.push_back(entry.path());
    }
    std::sort(run_files.begin(), run_files.end());
    if (run_files.empty()) {
        throw std::runtime_error("no .jsonl run files in " + runs_dir.string());
    }

    std::vector<meta::EvalRun> runs;
    for (const auto& file : run_files) {
        meta::EvalRun run;
        run.system_name = file.stem().string();
        run.seed = options.seed;
        for (const auto& line : util::read_lines(file)) {
            if (util::trim(line).empty()) continue;
            run.results.push_back(scoring::parse_result(line));
        }
        std::sort(run.results.begin(), run.results.end(),
                  [](const scoring::ScoredResult& a, const scoring::ScoredResult& b) {
                      return a.sample_id < b.sample_id;
                  });
        runs.push_back(std::move(run));
    }

    std::filesystem::create_directories(out_dir);
    MetaEvalPaths paths;
    paths.main_results_csv = out_dir / "main_results.csv";
    paths.ood_matrix_csv = out_dir / "ood_matrix.csv";
    paths.report_md = out_dir / "report.md";

    // --- Table-3-style main metrics ---
    std::vector<SystemMetrics> metrics;
    for (const auto& run : runs) {
        SystemMetrics m;
        m.system = run.system_name;
        m.s_acc = meta::scaled_accuracy(run.results);
        auto gold = gold_vector(run.results);
        auto scores = score_vector(run.results);
        try {
            m.kd = meta::kendall(gold, scores);
        } catch (const meta::MetaEvalError&) {
            m.kd.reset();
        }
        try {
            auto tc = meta::tie_calibrated_accuracy(gold, scores, options.pair_cap, options.seed);
            m.t_acc = tc.accuracy;
            m.t_eps = tc.epsilon;
        } catch (const meta::MetaEvalError&) {
            m.t_acc.reset();
        }
        metrics.push_back(std::move(m));
    }

    if (runs.size() >= 2) {
        const size_t sig_pair_cap = std::min<size_t>(options.pair_cap, 50'000);
        auto kd_stat = [](const std::vector<double>& gold, const std::vector<double>& scores) {
            return meta::kendall(gold, scores);
        };
        auto tc_stat = [&](const std::vector<double>& gold, const std::vector<double>& scores) {
            return meta::tie_calibrated_accuracy(gold, scores, sig_pair_cap, 7).accuracy;
        };
        for (int column = 0; column < 3; ++column) {
            auto value_of = [&](const SystemMetrics& m) -> std::optional<double> {
                if (column == 0) return m.s_acc;
                if (column == 1) return m.kd;
                return m.t_acc;
            };
            size_t best = runs.size();
            for (size_t s = 0; s < metrics.size(); ++s) {
                auto v = value_of(metrics[s]);
                if (!v) continue;
                if (best == runs.size() || *v > *value_of(metrics[best])) best = s;
            }
            if (best == runs.size()) continue;
            bool significant = true;
            for (size_t t = 0; t < metrics.size() && significant; ++t) {
                if (t == best) continue;
                auto other = value_of(metrics[t]);
                if (other && *other >= *value_of(metrics[best])) {
                    significant = false;
                    break;
                }
                auto aligned = align(runs[best], runs[t]);
                if (aligned.gold.empty()) {
                    significant = false;
                    break;
                }
                uint64_t seed = rng::derive_seed(
                    options.seed, "main-sig:" + std::to_string(column) + ":" +
                                      runs[best].system_name + "|" + runs[t].system_name);
                double p;
                if (column == 0) {
                    p = meta::paired_permutation_test(aligned.correct_a, aligned.correct_b,
                                                      options.resamples, seed);
                } else if (column == 1) {
                    p = label_swap_significance(aligned, kd_stat, options.resamples, seed);
                } else {
                    p = label_swap_significance(aligned, tc_stat, options.resamples, seed);
                }
                if (p > options.alpha) significant = false;
            }
            if (significant) {
                if (column == 0) metrics[best].s_acc_mark = true;
                if (column == 1) metrics[best].kd_mark = true;
                if (column == 2) metrics[best].t_acc_mark = true;
            }
        }
    }

    auto cell = [](std::optional<double> v, bool mark) {
        if (!v) return std::string("na");
        return fmt3(*v) + (mark ? "*" : "");
    };

    std::string main_csv = "system,s_acc,kendall,t_acc\n";
    for (const auto& m : metrics) {
        main_csv += m.system + "," + cell(m.s_acc, m.s_acc_mark) + "," + cell(m.kd, m.kd_mark) +
                    "," + cell(m.t_acc, m.t_acc_mark) + "\n";
    }
    util::write_file_atomic(paths.main_results_csv, main_csv);

    // --- OOD matrix ---
    std::map<std::string, std::string> holdouts;
    if (options.holdouts_path) {
        auto j = nlohmann::json::parse(util::read_file(*options.holdouts_path));
        for (auto it = j.begin(); it != j.end(); ++it) {
            holdouts[it.key()] = it.value().get<std::string>();
        }
    }
    auto matrix = meta::ood_matrix(runs, holdouts, options.alpha, options.resamples,
                                   options.seed);
    std::string ood_csv = "system";
    for (const auto& ds : matrix.datasets) ood_csv += "," + ds;
    ood_csv += ",all_id,avg_ood\n";
    for (size_t s = 0; s < matrix.systems.size(); ++s) {
        ood_csv += matrix.systems[s];
        for (size_t d = 0; d < matrix.datasets.size(); ++d) {
            const auto& c = matrix.cells[s][d];
            ood_csv += "," + fmt3(c.value) + (c.significant ? "*" : "");
        }
        ood_csv += "," + fmt3(matrix.all_id[s]);
        ood_csv += "," + (matrix.avg_ood[s] ? fmt3(*matrix.avg_ood[s]) : std::string("na"));
        ood_csv += "\n";
    }
    util::write_file_atomic(paths.ood_matrix_csv, ood_csv);

    // --- explanation match rates (hard negatives) ---
    std::string match_csv;
    if (options.gold_answers_path) {
        std::map<std::string, std::string> gold;
        for (const auto& line : util::read_lines(*options.gold_answers_path)) {
            if (util::trim(line).empty()) continue;
            auto j = nlohmann::json::parse(line);
            gold[j.at("sample_id").get<std::string>()] = j.at("answer").get<std::string>();
        }
        match_csv = "system,presence_rate,match_rate,match_rate_defined\n";
        for (const auto& run : runs) {
            std::vector<scoring::ScoredResult> hard;
            for (const auto& r : run.results) {
                if (r.error_mode == ErrorMode::kHard) hard.push_back(r);
            }
            if (hard.empty()) {
                match_csv += run.system_name + ",na,na,false\n";
                continue;
            }
            auto rate = meta::explanation_match_rate(hard, gold);
            match_csv += run.system_name + "," + fmt3(rate.presence_rate) + "," +
                         fmt3(rate.match_rate) + "," +
                         (rate.match_rate_defined ? "true" : "false") + "\n";
        }
        paths.match_rates_csv = out_dir / "match_rates.csv";
        util::write_file_atomic(*paths.match_rates_csv, match_csv);
    }

    // --- Markdown report ---
    std::ostringstream md;
    md << "# Meta-evaluation report\n\n";
    md << "## Main results\n\n";
    md << md_row({"System", "S.Acc.", "Kd", "T.Acc."});
    md << md_row({"---", "---", "---", "---"});
    for (const auto& m : metrics) {
        md << md_row({m.system, cell(m.s_acc, m.s_acc_mark), cell(m.kd, m.kd_mark),
                      cell(m.t_acc, m.t_acc_mark)});
    }
    md << "\nValues marked `*` are significantly higher than every other system in the "
          "column (paired permutation test, alpha="
       << fmt3(options.alpha) << ").\n";
    md << "\n## Per-dataset matrix\n\n";
    {
        std::vector<std::string> header = {"System"};
        header.insert(header.end(), matrix.datasets.begin(), matrix.datasets.end());
        header.push_back("ALL (ID)");
        header.push_back("AVG (OOD)");
        md << md_row(header);
        md << md_row(std::vector<std::string>(header.size(), "---"));
        for (size_t s = 0; s < matrix.systems.size(); ++s) {
            std::vector<std::string> row = {matrix.systems[s]};
            for (size_t d = 0; d < matrix.datasets.size(); ++d) {
                const auto& c = matrix.cells[s][d];
                row.push_back(fmt3(c.value) + (c.significant ? "*" : ""));
            }
            row.push_back(fmt3(matrix.all_id[s]));
            row.push_back(matrix.avg_ood[s] ? fmt3(*matrix.avg_ood[s]) : "na");
            md << md_row(row);
        }
    }
    if (!match_csv.empty()) {
        md << "\n## Hard-negative explanation match rates\n\n";
        md << md_row({"System", "presence rate", "match rate"});
        md << md_row({"---", "---", "---"});
        std::istringstream lines(match_csv);
        std::string line;
        std::getline(lines, line);  // header
        while (std::getline(lines, line)) {
            auto c1 = line.find(',');
            auto c2 = line.find(',', c1 + 1);
            auto c3 = line.find(',', c2 + 1);
            md << md_row({line.substr(0, c1), line.substr(c1 + 1, c2 - c1 - 1),
                          line.substr(c2 + 1, c3 - c2 - 1)});
        }
    }
    util::write_file_atomic(paths.report_md, md.str());
    return paths;
}

}  // namespace excam::pipeline
