#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ctca {

// Evaluation-grid series: values[i] was measured at iterations[i]
// (20, 40, ... for the standard cadence).
struct Curve {
    std::vector<int64_t> iterations;
    std::vector<double> values;
};

// Trailing moving average over the up-to-`window` most recent points.
std::vector<double> smooth(const std::vector<double>& series, int window = 4);
Curve smooth(const Curve& curve, int window = 4);

enum class StopStrategy { Last, OracleCer, FoldAverage, FoldMean, FoldMax, CrossWriter };

StopStrategy stop_strategy_from_name(const std::string& name); // "L","O","A","M","X","S"
const char* stop_strategy_name(StopStrategy strategy);

struct EstimatorSpec {
    StopStrategy strategy = StopStrategy::Last;
    double factor = 1.0; // R
    int window = 4;
};

struct EstimatorInputs {
    int64_t budget = 0;
    // O: test CER curve of the run being stopped.
    const Curve* test_cer = nullptr;
    // A/M/X: one held-out loss curve per cross-validation fold.
    const std::vector<Curve>* fold_losses = nullptr;
    // S: run loss curves per *other* writer (the target writer excluded by
    // the caller, so the estimate never sees its own curves).
    const std::vector<std::vector<Curve>>* writer_run_losses = nullptr;
};

// Returns the stopping iteration: strategy-specific raw estimate, times R,
// rounded to the evaluation grid, clamped to [20, budget].
int64_t estimate_stop(const EstimatorSpec& spec, const EstimatorInputs& inputs);

struct RatioTable {
    std::string name;
    std::vector<int> cluster_sizes;
    std::vector<double> ratios; // iterations per adaptation line
};

// Published ratios 180,90,60,38,33,30,24,15,9 for clusters 1..256.
RatioTable paper_s3_ratio_table();

// Per cluster size: S-estimate over the provided writers' runs, divided by
// the cluster size. writer_runs_per_cluster[c][w] holds writer w's run loss
// curves for cluster c.
RatioTable compute_ratio_table(const std::vector<int>& cluster_sizes,
                               const std::vector<int64_t>& budgets,
                               const std::vector<std::vector<std::vector<Curve>>>& writer_runs_per_cluster,
                               double factor, int window = 4);

// llround(ratio * cluster_size) clamped to [1, budget]; not grid-snapped.
int64_t iterations_from_ratio(const RatioTable& table, int cluster_size, int64_t budget);

struct IterationFit {
    int degree = 2;
    std::vector<double> coefficients; // c[k] * log2(N)^k
};

struct IterationSample {
    double lines = 0.0;      // N
    double iterations = 0.0; // I
};

// Least-squares polynomial I(log2 N); throws if underdetermined or singular.
IterationFit fit_iterations(const std::vector<IterationSample>& samples, int degree = 2);

double fit_value(const IterationFit& fit, double lines);
double fit_residual(const IterationFit& fit, const std::vector<IterationSample>& samples);

// Prediction rounded to the nearest multiple of 20 (ties up), clamped to
// [20, budget].
int64_t predict_iterations(const IterationFit& fit, double lines, int64_t budget);

// Budget for a writer with `lines` adaptation lines: 1000/2000/3000/6000 for
// lines >= 1/100/500/1000.
int64_t writer_dependent_budget(int64_t lines);

} // namespace ctca
