#include "mcsp/metrics.hpp"

#include "mcsp/errors.hpp"
#include "mcsp/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace mcsp {

namespace {

std::string real_str(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
}

double stddev_of(const std::vector<double>& v, double mean) {
    if (v.size() < 2) return 0.0;
    double acc = 0.0;
    for (double x : v) acc += (x - mean) * (x - mean);
    return std::sqrt(acc / double(v.size() - 1));
}

MetricEntry entry_of(const std::vector<double>& v) {
    MetricEntry e;
    e.mean = mean_of(v);
    e.stddev = stddev_of(v, e.mean);
    return e;
}

} // namespace

FoldMetrics evaluate_scores(const std::vector<double>& scores, const std::vector<int>& labels) {
    require(scores.size() == labels.size(), "evaluate_scores: size mismatch");
    require(!scores.empty(), "evaluate_scores: empty input");
    for (double s : scores) require(std::isfinite(s), "evaluate_scores: non-finite score");
    for (int l : labels) require(l == 0 || l == 1, "evaluate_scores: labels must be 0/1");

    const std::size_t n = scores.size();
    std::size_t n_pos = 0;
    for (int l : labels) n_pos += std::size_t(l);
    const std::size_t n_neg = n - n_pos;

    FoldMetrics out;

    std::size_t tp = 0, fp = 0, fn = 0, correct = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const bool pred = scores[i] >= 0.5;
        if (pred && labels[i] == 1) ++tp;
        if (pred && labels[i] == 0) ++fp;
        if (!pred && labels[i] == 1) ++fn;
        if (int(pred) == labels[i]) ++correct;
    }
    out.accuracy = 100.0 * double(correct) / double(n);
    out.recall = (tp + fn) == 0 ? 0.0 : 100.0 * double(tp) / double(tp + fn);
    out.precision = (tp + fp) == 0 ? 0.0 : 100.0 * double(tp) / double(tp + fp);

    if (n_pos == 0 || n_neg == 0) {
        out.auroc_defined = false;
        return out;
    }

    // Mid-rank Mann-Whitney statistic.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double mid_rank = 0.5 * double(i + 1 + j + 1);
        for (std::size_t k = i; k <= j; ++k) {
            if (labels[order[k]] == 1) rank_sum_pos += mid_rank;
        }
        i = j + 1;
    }
    const double u = rank_sum_pos - double(n_pos) * double(n_pos + 1) / 2.0;
    out.auroc = 100.0 * u / (double(n_pos) * double(n_neg));
    out.auroc_defined = true;
    return out;
}

MetricsReport aggregate_metrics(const std::vector<FoldMetrics>& folds) {
    require(!folds.empty(), "aggregate_metrics: no folds");
    std::vector<double> auroc, acc, rec, prec;
    for (const auto& f : folds) {
        if (f.auroc_defined) auroc.push_back(f.auroc);
        acc.push_back(f.accuracy);
        rec.push_back(f.recall);
        prec.push_back(f.precision);
    }
    MetricsReport r;
    r.folds = int(folds.size());
    r.auroc_folds = int(auroc.size());
    if (!auroc.empty()) r.auroc = entry_of(auroc);
    r.accuracy = entry_of(acc);
    r.recall = entry_of(rec);
    r.precision = entry_of(prec);
    return r;
}

std::string format_metrics_table(const MetricsReport& report, bool header) {
    auto cell = [](const MetricEntry& e) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.2f ± %.2f", e.mean, e.stddev);
        return std::string(buf);
    };
    std::ostringstream os;
    auto pad = [&](const std::string& s) {
        os << s;
        for (std::size_t i = s.size(); i < 18; ++i) os << ' ';
    };
    if (header) {
        for (const char* name : {"AUROC", "Acc", "Recall", "Precision"}) pad(name);
        os << '\n';
    }
    pad(report.auroc_folds > 0 ? cell(report.auroc) : std::string("n/a"));
    pad(cell(report.accuracy));
    pad(cell(report.recall));
    pad(cell(report.precision));
    os << '\n';
    return os.str();
}

std::string serialize_metrics(const MetricsReport& r) {
    std::ostringstream os;
    os << "auroc_mean = " << real_str(r.auroc.mean) << "\n";
    os << "auroc_std = " << real_str(r.auroc.stddev) << "\n";
    os << "accuracy_mean = " << real_str(r.accuracy.mean) << "\n";
    os << "accuracy_std = " << real_str(r.accuracy.stddev) << "\n";
    os << "recall_mean = " << real_str(r.recall.mean) << "\n";
    os << "recall_std = " << real_str(r.recall.stddev) << "\n";
    os << "precision_mean = " << real_str(r.precision.mean) << "\n";
    os << "precision_std = " << real_str(r.precision.stddev) << "\n";
    os << "folds = " << r.folds << "\n";
    os << "auroc_folds = " << r.auroc_folds << "\n";
    return os.str();
}

MetricsReport parse_metrics_text(const std::string& text, const std::string& origin) {
    MetricsReport r;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    int seen = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto eq = line.find('=');
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
        }
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            if (key == "auroc_mean") r.auroc.mean = std::stod(value);
            else if (key == "auroc_std") r.auroc.stddev = std::stod(value);
            else if (key == "accuracy_mean") r.accuracy.mean = std::stod(value);
            else if (key == "accuracy_std") r.accuracy.stddev = std::stod(value);
            else if (key == "recall_mean") r.recall.mean = std::stod(value);
            else if (key == "recall_std") r.recall.stddev = std::stod(value);
            else if (key == "precision_mean") r.precision.mean = std::stod(value);
            else if (key == "precision_std") r.precision.stddev = std::stod(value);
            else if (key == "folds") r.folds = std::stoi(value);
            else if (key == "auroc_folds") r.auroc_folds = std::stoi(value);
            else
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": unknown key '" +
                                  key + "'");
        } catch (const std::invalid_argument&) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": bad value for '" + key +
                              "'");
        }
        ++seen;
    }
    require(seen > 0, "parse_metrics_text: empty report");
    return r;
}

MetricsReport read_metrics_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open metrics file: " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return parse_metrics_text(os.str(), path);
}

void write_metrics_file(const std::string& path, const MetricsReport& report) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write metrics file: " + path);
    out << serialize_metrics(report);
    if (!out) throw IoError("failed writing metrics file: " + path);
}

} // namespace mcsp
