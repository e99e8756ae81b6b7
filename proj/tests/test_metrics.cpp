#include "doctest.h"

#include "mcsp/errors.hpp"
#include "mcsp/metrics.hpp"
#include "mcsp/rng.hpp"

#include <cmath>
#include <vector>

using namespace mcsp;

namespace {

// Brute-force all-pairs AUROC: every (positive, negative) pair contributes 1
// if the positive outranks the negative, 0.5 on ties.
double pair_counting_auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
    double wins = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 1) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] != 0) continue;
            ++pairs;
            if (scores[i] > scores[j]) wins += 1.0;
            else if (scores[i] == scores[j]) wins += 0.5;
        }
    }
    return 100.0 * wins / double(pairs);
}

} // namespace

TEST_CASE("auroc endpoints and tie convention") {
    FoldMetrics perfect = evaluate_scores({0.1, 0.9}, {0, 1});
    CHECK(perfect.auroc_defined);
    CHECK(perfect.auroc == doctest::Approx(100.0));

    FoldMetrics ties = evaluate_scores({0.4, 0.4, 0.4, 0.4}, {0, 1, 0, 1});
    CHECK(ties.auroc == doctest::Approx(50.0));

    FoldMetrics inverted = evaluate_scores({0.9, 0.1}, {0, 1});
    CHECK(inverted.auroc == doctest::Approx(0.0));
}

TEST_CASE("auroc matches the pair-counting oracle on random fixtures") {
    Rng rng(401);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> scores;
        std::vector<int> labels;
        for (int i = 0; i < 20; ++i) {
            // Quantized scores force plenty of ties.
            scores.push_back(std::round(rng.uniform() * 8.0) / 8.0);
            labels.push_back(int(rng.index(2)));
        }
        labels[0] = 1;
        labels[1] = 0;
        const FoldMetrics got = evaluate_scores(scores, labels);
        REQUIRE(got.auroc_defined);
        CHECK(got.auroc == doctest::Approx(pair_counting_auroc(scores, labels)).epsilon(1e-12));
    }
}

TEST_CASE("threshold metrics at 0.5") {
    // scores: predicted 1, 1, 0, 0 against labels 1, 0, 1, 0.
    FoldMetrics m = evaluate_scores({0.9, 0.6, 0.2, 0.1}, {1, 0, 1, 0});
    CHECK(m.accuracy == doctest::Approx(50.0));
    CHECK(m.recall == doctest::Approx(50.0));
    CHECK(m.precision == doctest::Approx(50.0));

    FoldMetrics all_neg_pred = evaluate_scores({0.1, 0.2}, {1, 1});
    CHECK_FALSE(all_neg_pred.auroc_defined);
    CHECK(all_neg_pred.accuracy == doctest::Approx(0.0));
    CHECK(all_neg_pred.recall == doctest::Approx(0.0));
    CHECK(all_neg_pred.precision == doctest::Approx(0.0));
}

TEST_CASE("aggregation reports mean and sample std per metric") {
    FoldMetrics a;
    a.auroc = 80.0;
    a.auroc_defined = true;
    a.accuracy = 70.0;
    a.recall = 60.0;
    a.precision = 50.0;
    FoldMetrics b = a;
    b.auroc = 90.0;
    b.accuracy = 80.0;
    FoldMetrics c;
    c.auroc_defined = false;
    c.accuracy = 75.0;
    c.recall = 60.0;
    c.precision = 50.0;

    MetricsReport r = aggregate_metrics({a, b, c});
    CHECK(r.folds == 3);
    CHECK(r.auroc_folds == 2);
    CHECK(r.auroc.mean == doctest::Approx(85.0));
    CHECK(r.auroc.stddev == doctest::Approx(std::sqrt(50.0)));
    CHECK(r.accuracy.mean == doctest::Approx(75.0));
    CHECK(r.recall.stddev == doctest::Approx(0.0));
}

TEST_CASE("metrics serialize and parse losslessly") {
    FoldMetrics a;
    a.auroc = 81.25;
    a.auroc_defined = true;
    a.accuracy = 73.4375;
    a.recall = 66.0 + 1.0 / 3.0;
    a.precision = 59.87;
    FoldMetrics b = a;
    b.auroc = 88.8;
    b.recall = 71.0;
    MetricsReport r = aggregate_metrics({a, b});

    const std::string text = serialize_metrics(r);
    MetricsReport parsed = parse_metrics_text(text);
    CHECK(parsed.auroc.mean == r.auroc.mean);
    CHECK(parsed.auroc.stddev == r.auroc.stddev);
    CHECK(parsed.recall.mean == r.recall.mean);
    CHECK(parsed.folds == r.folds);
    CHECK(parsed.auroc_folds == r.auroc_folds);

    CHECK_THROWS_AS(parse_metrics_text("nonsense_key = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_metrics_text("auroc_mean = banana\n"), ConfigError);
}

TEST_CASE("table formatting carries the four columns") {
    FoldMetrics a;
    a.auroc = 87.5;
    a.auroc_defined = true;
    a.accuracy = 82.0;
    a.recall = 79.0;
    a.precision = 75.5;
    const std::string table = format_metrics_table(aggregate_metrics({a}));
    CHECK(table.find("AUROC") != std::string::npos);
    CHECK(table.find("Acc") != std::string::npos);
    CHECK(table.find("Recall") != std::string::npos);
    CHECK(table.find("Precision") != std::string::npos);
    CHECK(table.find("87.50") != std::string::npos);
}

TEST_CASE("evaluate_scores rejects malformed input") {
    CHECK_THROWS_AS(evaluate_scores({}, {}), ValidationError);
    CHECK_THROWS_AS(evaluate_scores({0.5}, {2}), ValidationError);
    CHECK_THROWS_AS(evaluate_scores({0.5, 0.2}, {1}), ValidationError);
}
