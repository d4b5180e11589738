#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ctca {

int64_t edit_distance(const std::string& reference, const std::string& hypothesis);

struct CerSample {
    std::string reference;
    std::string hypothesis;
    int64_t distance = 0;
};

struct CerReport {
    std::vector<CerSample> samples;
    int64_t total_distance = 0;
    int64_t total_reference_length = 0;
    double cer = 0.0;
};

CerReport cer_report(const std::vector<std::string>& references,
                     const std::vector<std::string>& hypotheses);

double cer(const std::vector<std::string>& references,
           const std::vector<std::string>& hypotheses);

// (finetuned - baseline) / baseline; negative means improvement.
double relative_reduction(double baseline_cer, double finetuned_cer);

struct ReductionRecord {
    int writer_id = 0;
    double baseline_cer = 0.0;
    double finetuned_cer = 0.0;
    double reduction = 0.0;
};

struct WriterStats {
    std::vector<int> writer_ids;           // sorted
    std::vector<double> per_writer_mean;   // aligned with writer_ids
    double mean = 0.0;
    double stddev = 0.0;
    double min = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double max = 0.0;
};

// Two-level aggregation: reductions are first averaged within each writer
// (over that writer's runs), then mean/stddev/quartiles are taken across the
// per-writer means so writers with more runs do not dominate.
WriterStats aggregate(const std::vector<ReductionRecord>& records);

} // namespace ctca
