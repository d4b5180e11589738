#include "ctca/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "ctca/common.hpp"

namespace ctca {

int64_t edit_distance(const std::string& reference, const std::string& hypothesis) {
    const size_t n = reference.size();
    const size_t m = hypothesis.size();
    if (n == 0) return static_cast<int64_t>(m);
    if (m == 0) return static_cast<int64_t>(n);

    std::vector<int64_t> prev(m + 1), cur(m + 1);
    for (size_t j = 0; j <= m; ++j) prev[j] = static_cast<int64_t>(j);
    for (size_t i = 1; i <= n; ++i) {
        cur[0] = static_cast<int64_t>(i);
        for (size_t j = 1; j <= m; ++j) {
            const int64_t sub = prev[j - 1] + (reference[i - 1] == hypothesis[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

CerReport cer_report(const std::vector<std::string>& references,
                     const std::vector<std::string>& hypotheses) {
    if (references.size() != hypotheses.size()) {
        throw ShapeError("cer_report: got " + std::to_string(references.size()) +
                         " references but " + std::to_string(hypotheses.size()) +
                         " hypotheses");
    }
    CerReport report;
    report.samples.reserve(references.size());
    for (size_t i = 0; i < references.size(); ++i) {
        CerSample s;
        s.reference = references[i];
        s.hypothesis = hypotheses[i];
        s.distance = edit_distance(s.reference, s.hypothesis);
        report.total_distance += s.distance;
        report.total_reference_length += static_cast<int64_t>(s.reference.size());
        report.samples.push_back(std::move(s));
    }
    report.cer = static_cast<double>(report.total_distance) /
                 static_cast<double>(std::max<int64_t>(1, report.total_reference_length));
    return report;
}

double cer(const std::vector<std::string>& references,
           const std::vector<std::string>& hypotheses) {
    return cer_report(references, hypotheses).cer;
}

double relative_reduction(double baseline_cer, double finetuned_cer) {
    if (!(baseline_cer > 0.0)) {
        throw ConfigError("relative_reduction: baseline CER must be positive, got " +
                          std::to_string(baseline_cer));
    }
    return (finetuned_cer - baseline_cer) / baseline_cer;
}

namespace {

// Linear-interpolation quantile on a sorted series (the common spreadsheet
// definition): index p*(n-1), fractional part interpolated.
double quantile_sorted(const std::vector<double>& sorted, double p) {
    const size_t n = sorted.size();
    if (n == 1) return sorted[0];
    const double pos = p * static_cast<double>(n - 1);
    const size_t lo = static_cast<size_t>(pos);
    const size_t hi = std::min(lo + 1, n - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

} // namespace

WriterStats aggregate(const std::vector<ReductionRecord>& records) {
    if (records.empty()) {
        throw ConfigError("aggregate: no reduction records");
    }
    std::map<int, std::pair<double, int64_t>> by_writer;
    for (const ReductionRecord& r : records) {
        auto& acc = by_writer[r.writer_id];
        acc.first += r.reduction;
        acc.second += 1;
    }

    WriterStats stats;
    for (const auto& [writer, acc] : by_writer) {
        stats.writer_ids.push_back(writer);
        stats.per_writer_mean.push_back(acc.first / static_cast<double>(acc.second));
    }

    const std::vector<double>& means = stats.per_writer_mean;
    const double n = static_cast<double>(means.size());
    double sum = 0.0;
    for (double v : means) sum += v;
    stats.mean = sum / n;
    double sq = 0.0;
    for (double v : means) sq += (v - stats.mean) * (v - stats.mean);
    stats.stddev = std::sqrt(sq / n);

    std::vector<double> sorted = means;
    std::sort(sorted.begin(), sorted.end());
    stats.min = sorted.front();
    stats.max = sorted.back();
    stats.q1 = quantile_sorted(sorted, 0.25);
    stats.median = quantile_sorted(sorted, 0.5);
    stats.q3 = quantile_sorted(sorted, 0.75);
    return stats;
}

} // namespace ctca
