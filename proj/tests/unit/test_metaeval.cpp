#include "doctest.h"

#include <cmath>

#include "excam/metaeval.hpp"
#include "excam/rng.hpp"

using namespace excam;
using namespace excam::meta;

namespace {

scoring::ScoredResult result_of(const std::string& id, bool presence, bool gold_presence,
                                double score = 0.0, double gold_score = 0.0,
                                const std::string& dataset = "fix") {
    scoring::ScoredResult r;
    r.sample_id = id;
    r.presence = presence;
    r.gold_presence = gold_presence;
    r.score = score;
    r.gold_score = gold_score;
    r.source_dataset = dataset;
    return r;
}

// O(n^2) definitional tau-b.
double kendall_oracle(const std::vector<double>& x, const std::vector<double>& y) {
    const size_t n = x.size();
    long long concordant = 0;
    long long discordant = 0;
    long long tx = 0;
    long long ty = 0;
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = i + 1; j < n; ++j) {
            double dx = x[i] - x[j];
            double dy = y[i] - y[j];
            if (dx == 0.0 && dy == 0.0) {
                // tied in both: excluded from every term
            } else if (dx == 0.0) {
                ++tx;
            } else if (dy == 0.0) {
                ++ty;
            } else if ((dx > 0.0) == (dy > 0.0)) {
                ++concordant;
            } else {
                ++discordant;
            }
        }
    }
    double denom = std::sqrt(static_cast<double>(concordant + discordant + tx) *
                             static_cast<double>(concordant + discordant + ty));
    return static_cast<double>(concordant - discordant) / denom;
}

// Exhaustive epsilon-grid brute force over all pairs.
double tie_calibrated_oracle(const std::vector<double>& gold, const std::vector<double>& metric) {
    const size_t n = gold.size();
    std::vector<double> grid = {0.0};
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = i + 1; j < n; ++j) {
            grid.push_back(std::abs(metric[i] - metric[j]));
        }
    }
    double best = 0.0;
    for (double eps : grid) {
        size_t correct = 0;
        size_t total = 0;
        for (size_t i = 0; i < n; ++i) {
            for (size_t j = i + 1; j < n; ++j) {
                ++total;
                double dm = metric[i] - metric[j];
                double dg = gold[i] - gold[j];
                bool predicted_tie = std::abs(dm) <= eps;
                if (dg == 0.0) {
                    if (predicted_tie) ++correct;
                } else if (!predicted_tie && ((dm > 0.0) == (dg > 0.0))) {
                    ++correct;
                }
            }
        }
        best = std::max(best, static_cast<double>(correct) / static_cast<double>(total));
    }
    return best;
}

}  // namespace

TEST_CASE("scaled accuracy is the affine map 2*raw - 1") {
    std::vector<scoring::ScoredResult> half = {
        result_of("a", true, true), result_of("b", false, true),
        result_of("c", true, false), result_of("d", false, false)};
    CHECK(scaled_accuracy(half) == 0.0);

    std::vector<scoring::ScoredResult> perfect = {result_of("a", true, true),
                                                  result_of("b", false, false)};
    CHECK(scaled_accuracy(perfect) == 1.0);

    CHECK(scale_accuracy(0.798) == doctest::Approx(0.596).epsilon(1e-12));
    CHECK_THROWS_AS(scaled_accuracy({}), MetaEvalError);
}

TEST_CASE("scaled accuracy round-trips exactly for rationals") {
    rng::SplitMix r(rng::derive_seed(5, "affine"));
    for (int trial = 0; trial < 1000; ++trial) {
        uint64_t n = 1 + r.below(1000);
        uint64_t k = r.below(n + 1);
        // the affine bijection on rationals k/n: scaled = (2k-n)/n and back
        int64_t scaled_num = 2 * static_cast<int64_t>(k) - static_cast<int64_t>(n);
        int64_t recovered_num = scaled_num + static_cast<int64_t>(n);  // over 2n
        CHECK(recovered_num == 2 * static_cast<int64_t>(k));

        // in binary64 the round trip is exact on [0.25, 1] and at 0
        double raw = static_cast<double>(k) / static_cast<double>(n);
        if (raw == 0.0 || raw >= 0.25) {
            double scaled = scale_accuracy(raw);
            CHECK((scaled + 1.0) / 2.0 == raw);
        }
    }
}

TEST_CASE("kendall hand case and symmetry") {
    CHECK(kendall({1, 2, 3, 4}, {1, 2, 3, 4}) == 1.0);
    CHECK(kendall({1, 2, 3, 4}, {4, 3, 2, 1}) == -1.0);
    CHECK(kendall({1, 2, 3, 4}, {1, 3, 2, 4}) == doctest::Approx(4.0 / 6.0).epsilon(1e-12));
    CHECK_THROWS_AS(kendall({1, 1, 1}, {1, 2, 3}), MetaEvalError);
}

TEST_CASE("kendall agrees with the definitional oracle on random tied vectors") {
    rng::SplitMix r(rng::derive_seed(5, "kendall"));
    for (int trial = 0; trial < 200; ++trial) {
        size_t n = 2 + r.below(499);
        std::vector<double> x(n);
        std::vector<double> y(n);
        // >=30% ties: draw from a small integer support
        uint64_t support = 2 + r.below(6);
        for (size_t i = 0; i < n; ++i) {
            x[i] = static_cast<double>(r.below(support));
            y[i] = r.coin() ? static_cast<double>(r.below(support)) : r.normal();
        }
        double expected;
        try {
            expected = kendall_oracle(x, y);
        } catch (...) {
            continue;
        }
        if (!std::isfinite(expected)) continue;  // degenerate draws
        CHECK(kendall(x, y) == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("kendall flips sign when one ranking reverses") {
    rng::SplitMix r(rng::derive_seed(6, "kendall-reverse"));
    std::vector<double> x(60);
    std::vector<double> y(60);
    for (size_t i = 0; i < x.size(); ++i) {
        x[i] = r.normal();
        y[i] = r.normal();
    }
    std::vector<double> y_neg(y.size());
    for (size_t i = 0; i < y.size(); ++i) y_neg[i] = -y[i];
    CHECK(kendall(x, y_neg) == doctest::Approx(-kendall(x, y)).epsilon(1e-12));
}

TEST_CASE("tie calibration matches exhaustive brute force on n=30 instances") {
    rng::SplitMix r(rng::derive_seed(5, "tiecal"));
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> gold(30);
        std::vector<double> metric(30);
        for (size_t i = 0; i < 30; ++i) {
            // gold from the discrete score range, metric noisy with ties
            gold[i] = -static_cast<double>(r.below(4));
            metric[i] = r.coin() ? -static_cast<double>(r.below(4))
                                 : -2.0 * r.unit();
        }
        auto fast = tie_calibrated_accuracy(gold, metric, 1'000'000, 1);
        CHECK(fast.pairs_evaluated == 435);
        CHECK(fast.accuracy == doctest::Approx(tie_calibrated_oracle(gold, metric))
                                   .epsilon(1e-12));
    }
}

TEST_CASE("tie-free inputs reduce to plain pairwise concordance") {
    std::vector<double> gold = {1, 2, 3, 4, 5, 6};
    std::vector<double> metric = {1.5, 2.5, 3.5, 3.0, 5.5, 6.5};
    // no gold ties; the best epsilon stays below the smallest metric gap
    auto result = tie_calibrated_accuracy(gold, metric, 1'000'000, 1);
    size_t concordant = 0;
    for (size_t i = 0; i < gold.size(); ++i) {
        for (size_t j = i + 1; j < gold.size(); ++j) {
            double dm = metric[i] - metric[j];
            double dg = gold[i] - gold[j];
            if (dm != 0.0 && (dm > 0.0) == (dg > 0.0)) ++concordant;
        }
    }
    CHECK(result.accuracy == doctest::Approx(static_cast<double>(concordant) / 15.0));
    CHECK(result.epsilon == 0.0);
}

TEST_CASE("all-tied gold with a constant metric is perfect") {
    std::vector<double> gold(10, 0.0);
    std::vector<double> metric(10, 0.25);
    auto result = tie_calibrated_accuracy(gold, metric, 1'000'000, 1);
    CHECK(result.accuracy == 1.0);
}

TEST_CASE("the pair cap bounds evaluated pairs on large inputs") {
    const size_t n = 2000;  // 1,999,000 pairs total
    std::vector<double> gold(n);
    std::vector<double> metric(n);
    rng::SplitMix r(rng::derive_seed(5, "cap"));
    for (size_t i = 0; i < n; ++i) {
        gold[i] = -static_cast<double>(r.below(3));
        metric[i] = r.normal();
    }
    auto result = tie_calibrated_accuracy(gold, metric, 1'000'000, 9);
    CHECK(result.pairs_evaluated == 1'000'000);
    // deterministic under the same seed
    auto again = tie_calibrated_accuracy(gold, metric, 1'000'000, 9);
    CHECK(again.accuracy == result.accuracy);
}

TEST_CASE("invariance under positive affine metric transforms") {
    // Non-affine monotone maps can reorder pairwise |differences| and so
    // genuinely change the best reachable agreement; the invariance that
    // holds (epsilon re-searched on the transformed grid) is affine.
    rng::SplitMix r(rng::derive_seed(5, "monotone"));
    std::vector<double> gold(40);
    std::vector<double> metric(40);
    for (size_t i = 0; i < 40; ++i) {
        gold[i] = -static_cast<double>(r.below(3));
        metric[i] = 2.0 * r.unit() - 1.0;
    }
    std::vector<double> transformed(metric.size());
    for (size_t i = 0; i < metric.size(); ++i) {
        transformed[i] = 3.5 * metric[i] + 11.0;
    }
    auto a = tie_calibrated_accuracy(gold, metric, 1'000'000, 1);
    auto b = tie_calibrated_accuracy(gold, transformed, 1'000'000, 1);
    CHECK(a.accuracy == doctest::Approx(b.accuracy).epsilon(1e-12));
}

TEST_CASE("permutation test: identical inputs give p = 1") {
    std::vector<double> a = {0.3, 0.4, 0.5, 0.6};
    CHECK(paired_permutation_test(a, a, 1000, 5) == 1.0);
}

TEST_CASE("permutation test matches exact enumeration on the separable case") {
    std::vector<double> a(12, 1.0);
    std::vector<double> b(12, 0.0);
    double p = paired_permutation_test(a, b, 4096, 5);  // exhaustive: 2^12 flips
    CHECK(p == doctest::Approx(2.0 / 4096.0).epsilon(1e-15));
    CHECK(std::abs(p - 0.00049) < 5e-5);
}

TEST_CASE("permutation test is calibrated under the null") {
    rng::SplitMix r(rng::derive_seed(2024, "null-calibration"));
    int low = 0;
    const int trials = 200;
    for (int t = 0; t < trials; ++t) {
        std::vector<double> a(40);
        std::vector<double> b(40);
        for (size_t i = 0; i < a.size(); ++i) {
            a[i] = r.normal();
            b[i] = r.normal();
        }
        double p = paired_permutation_test(a, b, 1000, rng::derive_seed(7, std::to_string(t)));
        CHECK(p > 0.0);
        CHECK(p <= 1.0);
        if (p < 0.05) ++low;
    }
    double fraction = static_cast<double>(low) / trials;
    CHECK(fraction >= 0.02);
    CHECK(fraction <= 0.09);
}

TEST_CASE("permutation p-values are deterministic given the seed") {
    std::vector<double> a = {1, 0, 1, 1, 0, 1, 0, 1, 1, 1, 0, 1, 1, 0, 1, 1,
                             0, 1, 1, 1, 0, 1, 0, 1, 1, 0, 1, 1, 1, 0, 1, 1,
                             0, 1, 1, 1, 0, 1, 0, 1, 1, 0, 1, 1, 1, 0, 1, 1,
                             0, 1, 1, 1, 0, 1, 0, 1, 1, 0, 1, 1, 1, 0, 1, 1};
    std::vector<double> b(a.size(), 0.5);
    double p1 = paired_permutation_test(a, b, 1000, 77);
    double p2 = paired_permutation_test(a, b, 1000, 77);
    CHECK(p1 == p2);
    // the statistic's sign does not matter
    double p3 = paired_permutation_test(b, a, 1000, 77);
    CHECK(p1 == p3);
}

TEST_CASE("ood matrix shape, summaries and holdouts") {
    std::vector<EvalRun> runs(1);
    runs[0].system_name = "solo";
    for (int i = 0; i < 20; ++i) {
        bool gold = i % 2 == 0;
        runs[0].results.push_back(result_of("a" + std::to_string(i), gold, gold, 0, 0, "ds1"));
        runs[0].results.push_back(
            result_of("b" + std::to_string(i), i % 3 == 0, gold, 0, 0, "ds2"));
    }
    auto matrix = ood_matrix(runs, {{"solo", "ds2"}});
    CHECK(matrix.systems == std::vector<std::string>{"solo"});
    CHECK(matrix.datasets == std::vector<std::string>{"ds1", "ds2"});
    CHECK(matrix.cells.size() == 1);
    CHECK(matrix.cells[0].size() == 2);
    CHECK(matrix.cells[0][0].value == 1.0);
    CHECK(matrix.all_id.size() == 1);
    REQUIRE(matrix.avg_ood[0].has_value());
    // the held-out column is ds2, so AVG(OOD) equals that cell
    CHECK(*matrix.avg_ood[0] == matrix.cells[0][1].value);

    CHECK_THROWS_AS(ood_matrix(runs, {{"solo", "missing_ds"}}), MetaEvalError);
}

TEST_CASE("identical runs earn no significance marks") {
    std::vector<EvalRun> runs(2);
    runs[0].system_name = "twin_a";
    runs[1].system_name = "twin_b";
    for (int i = 0; i < 30; ++i) {
        bool gold = i % 2 == 0;
        bool predicted = i % 5 != 0;
        for (auto& run : runs) {
            run.results.push_back(
                result_of("s" + std::to_string(i), predicted, gold, 0, 0, "ds1"));
        }
    }
    auto matrix = ood_matrix(runs, {});
    for (const auto& row : matrix.cells) {
        for (const auto& cell : row) {
            CHECK(!cell.significant);
        }
    }
}

TEST_CASE("a clearly better judge on 300 items earns the column mark") {
    rng::SplitMix r(rng::derive_seed(2025, "ood-fixture"));
    std::vector<EvalRun> runs(2);
    runs[0].system_name = "sharp";
    runs[1].system_name = "dull";
    runs[0].seed = runs[1].seed = 11;
    for (int i = 0; i < 300; ++i) {
        bool gold = i % 2 == 0;
        bool sharp_correct = r.below(100) < 90;
        bool dull_correct = r.below(100) < 55;
        runs[0].results.push_back(result_of("s" + std::to_string(i),
                                            sharp_correct == gold, gold, 0, 0, "ds1"));
        runs[1].results.push_back(result_of("s" + std::to_string(i),
                                            dull_correct == gold, gold, 0, 0, "ds1"));
    }
    auto matrix = ood_matrix(runs, {}, 0.05, 1000, 11);
    CHECK(matrix.cells[0][0].significant);
    CHECK(!matrix.cells[1][0].significant);
    // the alpha=0.1 configuration is at least as permissive
    auto looser = ood_matrix(runs, {}, 0.1, 1000, 11);
    CHECK(looser.cells[0][0].significant);
}

TEST_CASE("explanation match rate over a constructed 48/100 fixture") {
    std::vector<scoring::ScoredResult> results;
    std::map<std::string, std::string> gold;
    for (int i = 0; i < 100; ++i) {
        std::string id = "h" + std::to_string(i);
        gold[id] = "Lunar New Year";
        scoring::ScoredResult r = result_of(id, true, true, -5.0, -5.0);
        r.error_mode = ErrorMode::kHard;
        ErrorReport report;
        ErrorEntry e;
        e.error_type = "incorrect information";
        e.severity = Severity::kMajor;
        e.location = ErrorLocation::kOutput;
        e.span = {0, 1};
        e.explanation = i < 48 ? "The correct holiday is  lunar   new year." : "Wrong answer.";
        report.errors.push_back(e);
        r.predicted_report = report;
        results.push_back(std::move(r));
    }
    auto rate = explanation_match_rate(results, gold);
    CHECK(rate.presence_rate == 1.0);
    CHECK(rate.match_rate == 0.48);
    CHECK(rate.match_rate_defined);
}

TEST_CASE("match rate handles absent predictions") {
    std::vector<scoring::ScoredResult> results;
    std::map<std::string, std::string> gold;
    for (int i = 0; i < 10; ++i) {
        std::string id = "h" + std::to_string(i);
        gold[id] = "answer";
        auto r = result_of(id, false, true, 0.5, -5.0);
        r.error_mode = ErrorMode::kHard;
        results.push_back(r);
    }
    auto rate = explanation_match_rate(results, gold);
    CHECK(rate.presence_rate == 0.0);
    CHECK(rate.match_rate == 0.0);
    CHECK(!rate.match_rate_defined);
}

TEST_CASE("match normalization ignores case and whitespace") {
    CHECK(normalize_for_match("  Lunar   NEW\tYear. ") == "lunar new year.");
    CHECK(normalize_for_match("Lunar New Year.").find(normalize_for_match("lunar new year")) !=
          std::string::npos);
}

TEST_CASE("statistics ignore input item order") {
    rng::SplitMix r(rng::derive_seed(31, "orderfree"));
    std::vector<double> gold(50);
    std::vector<double> metric(50);
    for (size_t i = 0; i < 50; ++i) {
        gold[i] = -static_cast<double>(r.below(3));
        metric[i] = r.normal();
    }
    std::vector<size_t> order(50);
    for (size_t i = 0; i < 50; ++i) order[i] = i;
    rng::shuffle(order, r);
    std::vector<double> gold_shuffled(50);
    std::vector<double> metric_shuffled(50);
    for (size_t i = 0; i < 50; ++i) {
        gold_shuffled[i] = gold[order[i]];
        metric_shuffled[i] = metric[order[i]];
    }
    CHECK(kendall(gold, metric) ==
          doctest::Approx(kendall(gold_shuffled, metric_shuffled)).epsilon(1e-12));
    CHECK(tie_calibrated_accuracy(gold, metric, 1'000'000, 1).accuracy ==
          doctest::Approx(
              tie_calibrated_accuracy(gold_shuffled, metric_shuffled, 1'000'000, 1).accuracy)
              .epsilon(1e-12));
}
