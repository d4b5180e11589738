#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ctca {

// Outcome of one finetuning run at its estimated stopping point.
struct RunResult {
    int writer_id = -1;
    std::string combo = "NONE";
    int cluster_size = 0;
    uint64_t run_seed = 0;
    int64_t stop_iteration = 0;
    double baseline_cer = 0.0;
    double finetuned_cer = 0.0;
    double reduction = 0.0;
};

void save_results(const std::string& path, const std::vector<RunResult>& results);
std::vector<RunResult> load_results(const std::string& path);
// Collects every *.results.json directly inside `dir`, sorted by filename.
std::vector<RunResult> load_results_dir(const std::string& dir);

// Aggregate table: one row per (combo, cluster), two-level writer statistics.
std::string reduction_table(const std::vector<RunResult>& results);

struct ReportPaths {
    std::string table;
    std::vector<std::string> plots;
};

// Emits the table plus reduction-vs-combo, reduction-vs-cluster,
// writer-reduction plots (with sidecars) into `out_dir`.
// Throws ProtocolError("no runs found") when `results` is empty.
ReportPaths write_report(const std::vector<RunResult>& results, const std::string& out_dir);

} // namespace ctca
