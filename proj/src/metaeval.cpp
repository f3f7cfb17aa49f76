#include "excam/metaeval.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "excam/rng.hpp"
#include "excam/util.hpp"

namespace excam::meta {

namespace {

// Merge-sort count of strict inversions (y_i > y_j for i < j).
uint64_t count_inversions(std::vector<double>& values) {
    const size_t n = values.size();
    std::vector<double> buffer(n);
    uint64_t inversions = 0;
    for (size_t width = 1; width < n; width *= 2) {
        for (size_t lo = 0; lo + width < n; lo += 2 * width) {
            size_t mid = lo + width;
            size_t hi = std::min(lo + 2 * width, n);
            size_t i = lo;
            size_t j = mid;
            size_t k = lo;
            while (i < mid && j < hi) {
                if (values[j] < values[i]) {
                    inversions += mid - i;
                    buffer[k++] = values[j++];
                } else {
                    buffer[k++] = values[i++];
                }
            }
            while (i < mid) buffer[k++] = values[i++];
            while (j < hi) buffer[k++] = values[j++];
            std::copy(buffer.begin() + static_cast<long>(lo), buffer.begin() + static_cast<long>(hi),
                      values.begin() + static_cast<long>(lo));
        }
    }
    return inversions;
}

uint64_t tie_pair_count(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    uint64_t ties = 0;
    size_t i = 0;
    while (i < values.size()) {
        size_t j = i;
        while (j < values.size() && values[j] == values[i]) ++j;
        uint64_t run = j - i;
        ties += run * (run - 1) / 2;
        i = j;
    }
    return ties;
}

struct PairSample {
    double abs_metric_diff;
    bool gold_tied;
    bool nontie_correct;  // gold untied, metric untied in the same direction
};

size_t pair_index_row(uint64_t t, size_t n) {
    // find i with offset(i) <= t < offset(i+1), offset(i) = i*n - i*(i+1)/2
    size_t lo = 0;
    size_t hi = n - 1;
    auto offset = [&](size_t i) -> uint64_t {
        return static_cast<uint64_t>(i) * n - static_cast<uint64_t>(i) * (i + 1) / 2;
    };
    while (lo < hi) {
        size_t mid = (lo + hi + 1) / 2;
        if (offset(mid) <= t) {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    return lo;
}

double mean(const std::vector<double>& v) {
    double sum = 0.0;
    for (double x : v) sum += x;
    return sum / static_cast<double>(v.size());
}

}  // namespace

double scale_accuracy(double raw) {
    return 2.0 * raw - 1.0;
}

double scaled_accuracy(const std::vector<scoring::ScoredResult>& results) {
    if (results.empty()) {
        throw MetaEvalError(MetaEvalError::Kind::kEmpty, "no results to score");
    }
    size_t agree = 0;
    for (const auto& r : results) {
        if (r.presence == r.gold_presence) ++agree;
    }
    double raw = static_cast<double>(agree) / static_cast<double>(results.size());
    return scale_accuracy(raw);
}

double kendall(const std::vector<double>& gold_scores,
               const std::vector<double>& metric_scores) {
    const size_t n = gold_scores.size();
    if (n != metric_scores.size()) {
        throw std::invalid_argument("kendall: length mismatch");
    }
    if (n < 2) {
        throw MetaEvalError(MetaEvalError::Kind::kEmpty, "kendall needs at least 2 items");
    }

    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (gold_scores[a] != gold_scores[b]) return gold_scores[a] < gold_scores[b];
        return metric_scores[a] < metric_scores[b];
    });

    uint64_t xtie = 0;
    uint64_t xytie = 0;
    {
        size_t i = 0;
        while (i < n) {
            size_t j = i;
            while (j < n && gold_scores[order[j]] == gold_scores[order[i]]) ++j;
            uint64_t run = j - i;
            xtie += run * (run - 1) / 2;
            size_t k = i;
            while (k < j) {
                size_t k2 = k;
                while (k2 < j && metric_scores[order[k2]] == metric_scores[order[k]]) ++k2;
                uint64_t sub = k2 - k;
                xytie += sub * (sub - 1) / 2;
                k = k2;
            }
            i = j;
        }
    }

    std::vector<double> y_sorted_by_x(n);
    for (size_t i = 0; i < n; ++i) y_sorted_by_x[i] = metric_scores[order[i]];
    uint64_t discordant = count_inversions(y_sorted_by_x);
    uint64_t ytie = tie_pair_count(metric_scores);

    const uint64_t total = static_cast<uint64_t>(n) * (n - 1) / 2;
    if (total == xtie || total == ytie) {
        throw MetaEvalError(MetaEvalError::Kind::kDegenerate,
                            "kendall undefined for an all-tied side");
    }
    double con_minus_dis = static_cast<double>(total) - static_cast<double>(xtie) -
                           static_cast<double>(ytie) + static_cast<double>(xytie) -
                           2.0 * static_cast<double>(discordant);
    // one sqrt of the product keeps the tie-free extremes exactly +/-1
    double denom = std::sqrt(static_cast<double>(total - xtie) *
                             static_cast<double>(total - ytie));
    return con_minus_dis / denom;
}

TieCalibrated tie_calibrated_accuracy(const std::vector<double>& gold_scores,
                                      const std::vector<double>& metric_scores, size_t pair_cap,
                                      uint64_t seed) {
    const size_t n = gold_scores.size();
    if (n != metric_scores.size()) {
        throw std::invalid_argument("tie_calibrated_accuracy: length mismatch");
    }
    if (n < 2) {
        throw MetaEvalError(MetaEvalError::Kind::kEmpty,
                            "tie-calibrated accuracy needs at least 2 items");
    }
    const uint64_t total_pairs = static_cast<uint64_t>(n) * (n - 1) / 2;

    std::vector<PairSample> pairs;
    auto add_pair = [&](size_t i, size_t j) {
        double dm = metric_scores[i] - metric_scores[j];
        double dg = gold_scores[i] - gold_scores[j];
        PairSample p;
        p.abs_metric_diff = std::abs(dm);
        p.gold_tied = dg == 0.0;
        p.nontie_correct = !p.gold_tied && dm != 0.0 && ((dm > 0.0) == (dg > 0.0));
        pairs.push_back(p);
    };

    if (total_pairs <= pair_cap) {
        pairs.reserve(total_pairs);
        for (size_t i = 0; i < n; ++i) {
            for (size_t j = i + 1; j < n; ++j) add_pair(i, j);
        }
    } else {
        pairs.reserve(pair_cap);
        rng::SplitMix r(rng::derive_seed(seed, "tie-pair-sample"));
        auto emit = [&](uint64_t t) {
            size_t i = pair_index_row(t, n);
            uint64_t offset = static_cast<uint64_t>(i) * n -
                              static_cast<uint64_t>(i) * (i + 1) / 2;
            size_t j = i + 1 + static_cast<size_t>(t - offset);
            add_pair(i, j);
        };
        constexpr uint64_t kMaterializeLimit = 16u * 1024u * 1024u;
        if (total_pairs <= kMaterializeLimit) {
            std::vector<uint64_t> indices(total_pairs);
            for (uint64_t t = 0; t < total_pairs; ++t) indices[t] = t;
            for (size_t k = 0; k < pair_cap; ++k) {
                size_t j = k + static_cast<size_t>(r.below(total_pairs - k));
                std::swap(indices[k], indices[j]);
                emit(indices[k]);
            }
        } else {
            std::set<uint64_t> chosen;
            while (chosen.size() < pair_cap) {
                chosen.insert(r.below(total_pairs));
            }
            for (uint64_t t : chosen) emit(t);
        }
    }

    std::sort(pairs.begin(), pairs.end(), [](const PairSample& a, const PairSample& b) {
        return a.abs_metric_diff < b.abs_metric_diff;
    });

    const size_t m = pairs.size();
    // prefix: gold-tied pairs among the first k; suffix: correctly ordered
    // untied pairs from k on
    std::vector<size_t> prefix_tie(m + 1, 0);
    std::vector<size_t> suffix_nontie(m + 1, 0);
    for (size_t k = 0; k < m; ++k) {
        prefix_tie[k + 1] = prefix_tie[k] + (pairs[k].gold_tied ? 1 : 0);
    }
    for (size_t k = m; k-- > 0;) {
        suffix_nontie[k] = suffix_nontie[k + 1] + (pairs[k].nontie_correct ? 1 : 0);
    }

    // pairs with zero metric difference are predicted ties at any epsilon
    size_t zero_count = 0;
    while (zero_count < m && pairs[zero_count].abs_metric_diff == 0.0) ++zero_count;

    TieCalibrated best;
    best.pairs_evaluated = m;
    size_t boundary = zero_count;
    while (true) {
        size_t correct = prefix_tie[boundary] + suffix_nontie[boundary];
        double accuracy = static_cast<double>(correct) / static_cast<double>(m);
        double epsilon = boundary == 0 ? 0.0 : pairs[boundary - 1].abs_metric_diff;
        if (accuracy > best.accuracy) {
            best.accuracy = accuracy;
            best.epsilon = epsilon;
        }
        if (boundary >= m) break;
        // advance past the next group of equal |diff|
        double value = pairs[boundary].abs_metric_diff;
        while (boundary < m && pairs[boundary].abs_metric_diff == value) ++boundary;
    }
    return best;
}

double paired_permutation_test(const std::vector<double>& per_item_a,
                               const std::vector<double>& per_item_b, int resamples,
                               uint64_t seed) {
    if (per_item_a.size() != per_item_b.size()) {
        throw std::invalid_argument("paired_permutation_test: length mismatch");
    }
    const size_t n = per_item_a.size();
    if (n == 0) {
        throw MetaEvalError(MetaEvalError::Kind::kEmpty, "no paired items");
    }
    std::vector<double> diffs(n);
    for (size_t i = 0; i < n; ++i) diffs[i] = per_item_a[i] - per_item_b[i];
    const double observed = std::abs(mean(diffs));

    const bool exact = n < 63 && (uint64_t{1} << n) <= static_cast<uint64_t>(resamples);
    if (exact) {
        const uint64_t combos = uint64_t{1} << n;
        uint64_t hits = 0;
        for (uint64_t mask = 0; mask < combos; ++mask) {
            double sum = 0.0;
            for (size_t i = 0; i < n; ++i) {
                sum += (mask >> i) & 1u ? -diffs[i] : diffs[i];
            }
            if (std::abs(sum / static_cast<double>(n)) >= observed) ++hits;
        }
        return static_cast<double>(hits) / static_cast<double>(combos);
    }

    rng::SplitMix r(rng::derive_seed(seed, "perm-test"));
    int hits = 0;
    for (int k = 0; k < resamples; ++k) {
        double sum = 0.0;
        for (size_t i = 0; i < n; ++i) {
            sum += r.coin() ? -diffs[i] : diffs[i];
        }
        if (std::abs(sum / static_cast<double>(n)) >= observed) ++hits;
    }
    return static_cast<double>(1 + hits) / static_cast<double>(1 + resamples);
}

OodMatrix ood_matrix(const std::vector<EvalRun>& runs,
                     const std::map<std::string, std::string>& holdout_map, double alpha,
                     int resamples, uint64_t seed) {
    if (runs.empty()) {
        throw MetaEvalError(MetaEvalError::Kind::kEmpty, "no runs");
    }

    std::set<std::string> dataset_set;
    for (const auto& run : runs) {
        for (const auto& r : run.results) dataset_set.insert(r.source_dataset);
    }

    OodMatrix matrix;
    matrix.datasets.assign(dataset_set.begin(), dataset_set.end());

    // per run: dataset -> results sorted by sample id
    std::vector<std::map<std::string, std::vector<const scoring::ScoredResult*>>> grouped;
    for (const auto& run : runs) {
        matrix.systems.push_back(run.system_name);
        std::map<std::string, std::vector<const scoring::ScoredResult*>> groups;
        for (const auto& r : run.results) groups[r.source_dataset].push_back(&r);
        for (auto& [_, rs] : groups) {
            std::sort(rs.begin(), rs.end(),
                      [](const scoring::ScoredResult* a, const scoring::ScoredResult* b) {
                          return a->sample_id < b->sample_id;
                      });
        }
        for (const auto& ds : matrix.datasets) {
            if (groups.find(ds) == groups.end()) {
                throw MetaEvalError(MetaEvalError::Kind::kMissingGroup,
                                    "run '" + run.system_name + "' has no results for dataset '" +
                                        ds + "'");
            }
        }
        grouped.push_back(std::move(groups));
    }

    auto group_scaled = [](const std::vector<const scoring::ScoredResult*>& rs) {
        size_t agree = 0;
        for (const auto* r : rs) {
            if (r->presence == r->gold_presence) ++agree;
        }
        return scale_accuracy(static_cast<double>(agree) / static_cast<double>(rs.size()));
    };

    matrix.cells.assign(runs.size(), std::vector<OodCell>(matrix.datasets.size()));
    for (size_t s = 0; s < runs.size(); ++s) {
        for (size_t d = 0; d < matrix.datasets.size(); ++d) {
            matrix.cells[s][d].value = group_scaled(grouped[s][matrix.datasets[d]]);
        }
        matrix.all_id.push_back(scaled_accuracy(runs[s].results));

        std::vector<size_t> ood_columns;
        auto it = holdout_map.find(runs[s].system_name);
        if (it != holdout_map.end()) {
            auto at = std::find(matrix.datasets.begin(), matrix.datasets.end(), it->second);
            if (at == matrix.datasets.end()) {
                throw MetaEvalError(MetaEvalError::Kind::kMissingGroup,
                                    "holdout dataset '" + it->second + "' missing from runs");
            }
            ood_columns.push_back(static_cast<size_t>(at - matrix.datasets.begin()));
        } else {
            for (size_t d = 0; d < matrix.datasets.size(); ++d) ood_columns.push_back(d);
        }
        double sum = 0.0;
        for (size_t d : ood_columns) sum += matrix.cells[s][d].value;
        matrix.avg_ood.push_back(sum / static_cast<double>(ood_columns.size()));
    }

    if (runs.size() >= 2) {
        // per-item 0/1 correctness, aligned by sample id, sign-flip tested
        auto correctness_by_id = [](const std::vector<const scoring::ScoredResult*>& rs) {
            std::map<std::string, double> out;
            for (const auto* r : rs) {
                out[r->sample_id] = r->presence == r->gold_presence ? 1.0 : 0.0;
            }
            return out;
        };
        for (size_t d = 0; d < matrix.datasets.size(); ++d) {
            const std::string& ds = matrix.datasets[d];
            size_t best = 0;
            for (size_t s = 1; s < runs.size(); ++s) {
                if (matrix.cells[s][d].value > matrix.cells[best][d].value) best = s;
            }
            bool significant = true;
            auto best_map = correctness_by_id(grouped[best][ds]);
            for (size_t t = 0; t < runs.size() && significant; ++t) {
                if (t == best) continue;
                if (matrix.cells[best][d].value <= matrix.cells[t][d].value) {
                    significant = false;
                    break;
                }
                auto other_map = correctness_by_id(grouped[t][ds]);
                std::vector<double> a;
                std::vector<double> b;
                for (const auto& [id, correct] : best_map) {
                    auto hit = other_map.find(id);
                    if (hit != other_map.end()) {
                        a.push_back(correct);
                        b.push_back(hit->second);
                    }
                }
                if (a.empty()) {
                    significant = false;
                    break;
                }
                double p = paired_permutation_test(
                    a, b, resamples,
                    rng::derive_seed(seed, "ood:" + ds + ":" + runs[best].system_name + "|" +
                                               runs[t].system_name));
                if (p > alpha) significant = false;
            }
            if (significant) matrix.cells[best][d].significant = true;
        }
    }
    return matrix;
}

std::string normalize_for_match(std::string_view text) {
    return util::normalize_spaces(util::to_lower_ascii(text));
}

MatchRate explanation_match_rate(const std::vector<scoring::ScoredResult>& results,
                                 const std::map<std::string, std::string>& gold_answers) {
    if (results.empty()) {
        throw MetaEvalError(MetaEvalError::Kind::kEmpty, "no hard-negative results");
    }
    size_t presence = 0;
    size_t matches = 0;
    for (const auto& r : results) {
        if (r.error_mode != ErrorMode::kHard) {
            throw std::invalid_argument("explanation match rate expects hard negatives, got '" +
                                        std::string(to_string(r.error_mode)) + "' for " +
                                        r.sample_id);
        }
        auto answer = gold_answers.find(r.sample_id);
        if (answer == gold_answers.end()) {
            throw MetaEvalError(MetaEvalError::Kind::kMissingGroup,
                                "no gold answer for sample " + r.sample_id);
        }
        if (!r.presence) continue;
        ++presence;
        if (!r.predicted_report) continue;
        std::string text;
        for (const auto& entry : r.predicted_report->errors) {
            text += entry.explanation;
            text += " ";
        }
        if (r.predicted_report->summary_explanation) {
            text += *r.predicted_report->summary_explanation;
        }
        if (normalize_for_match(text).find(normalize_for_match(answer->second)) !=
            std::string::npos) {
            ++matches;
        }
    }
    MatchRate rate;
    rate.presence_rate = static_cast<double>(presence) / static_cast<double>(results.size());
    if (presence == 0) {
        rate.match_rate = 0.0;
        rate.match_rate_defined = false;
    } else {
        rate.match_rate = static_cast<double>(matches) / static_cast<double>(presence);
        rate.match_rate_defined = true;
    }
    return rate;
}

}  // namespace excam::meta
