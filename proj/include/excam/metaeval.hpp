#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "excam/scoring.hpp"

// Meta-evaluation statistics over scored results: scaled accuracy, Kendall
// tau-b, tie-calibrated pairwise accuracy with a pair cap, paired
// permutation significance, OOD matrices and explanation match rates.

namespace excam::meta {

class MetaEvalError : public std::runtime_error {
public:
    enum class Kind { kEmpty, kDegenerate, kMissingGroup };

    MetaEvalError(Kind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

struct EvalRun {
    std::string system_name;
    std::vector<scoring::ScoredResult> results;
    uint64_t seed = 0;
};

// 2 * raw - 1, so chance (raw 0.5) on a balanced set maps to 0.
double scaled_accuracy(const std::vector<scoring::ScoredResult>& results);
double scale_accuracy(double raw);

// Tie-corrected Kendall tau-b via merge-sort discordance counting;
// agrees with the O(n^2) pair-counting definition.
double kendall(const std::vector<double>& gold_scores,
               const std::vector<double>& metric_scores);

struct TieCalibrated {
    double accuracy = 0.0;
    double epsilon = 0.0;          // tie threshold reaching the maximum
    size_t pairs_evaluated = 0;    // never exceeds the pair cap
};

// Pairwise ranking accuracy with the tie threshold searched over the sorted
// unique absolute metric differences; at most pair_cap pairs are evaluated
// (seeded sampling without replacement beyond the cap).
TieCalibrated tie_calibrated_accuracy(const std::vector<double>& gold_scores,
                                      const std::vector<double>& metric_scores,
                                      size_t pair_cap = 1'000'000, uint64_t seed = 0);

// Two-sided sign-flip test on paired differences; exhaustive enumeration
// when 2^n <= resamples, otherwise resamples random flips with
// p = (1 + #{|T*| >= |T|}) / (1 + resamples).
double paired_permutation_test(const std::vector<double>& per_item_a,
                               const std::vector<double>& per_item_b, int resamples = 1000,
                               uint64_t seed = 0);

struct OodCell {
    double value = 0.0;
    bool significant = false;  // best in column with p <= alpha vs all others
};

struct OodMatrix {
    std::vector<std::string> systems;
    std::vector<std::string> datasets;
    std::vector<std::vector<OodCell>> cells;  // [system][dataset]
    std::vector<double> all_id;               // per system
    std::vector<std::optional<double>> avg_ood;
};

// Rows = systems, columns = datasets plus ALL (ID) and AVG (OOD) summaries.
// holdout_map marks each system's held-out dataset; systems without an
// entry average over every column (untrained baselines). Significance uses
// the paired permutation test on per-item presence correctness.
OodMatrix ood_matrix(const std::vector<EvalRun>& runs,
                     const std::map<std::string, std::string>& holdout_map, double alpha = 0.05,
                     int resamples = 1000, uint64_t seed = 0);

struct MatchRate {
    double presence_rate = 0.0;
    double match_rate = 0.0;
    bool match_rate_defined = false;  // false when nothing predicted an error
};

// Hard-negative explanation quality: the fraction predicting an error and,
// among those, the fraction whose predicted explanation contains the
// correct answer after case/whitespace normalization.
MatchRate explanation_match_rate(const std::vector<scoring::ScoredResult>& results,
                                 const std::map<std::string, std::string>& gold_answers);

// case/whitespace normalization used by the match rate
std::string normalize_for_match(std::string_view text);

}  // namespace excam::meta
