#pragma once

#include <string>
#include <vector>

namespace mcsp {

// Single-fold classification metrics, all percentages. A fold whose test
// labels are single-class has no defined AUROC; the other metrics still
// count. Threshold for the hard decision is 0.5 (score >= 0.5 → positive).
struct FoldMetrics {
    double auroc = 0.0;
    bool auroc_defined = false;
    double accuracy = 0.0;
    double recall = 0.0;
    double precision = 0.0;
};

FoldMetrics evaluate_scores(const std::vector<double>& scores, const std::vector<int>& labels);

struct MetricEntry {
    double mean = 0.0;
    double stddev = 0.0;
};

struct MetricsReport {
    MetricEntry auroc;
    MetricEntry accuracy;
    MetricEntry recall;
    MetricEntry precision;
    int folds = 0;
    // Folds that had a defined AUROC (two classes present).
    int auroc_folds = 0;
};

// Mean and sample standard deviation across folds.
MetricsReport aggregate_metrics(const std::vector<FoldMetrics>& folds);

// Fixed-width table row, header optional.
std::string format_metrics_table(const MetricsReport& report, bool header = true);

// Machine-readable key = value block; parse(serialize(r)) == r.
std::string serialize_metrics(const MetricsReport& report);
MetricsReport parse_metrics_text(const std::string& text, const std::string& origin = "<string>");
MetricsReport read_metrics_file(const std::string& path);
void write_metrics_file(const std::string& path, const MetricsReport& report);

} // namespace mcsp
