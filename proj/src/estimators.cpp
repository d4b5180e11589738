#include "ctca/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ctca/common.hpp"

namespace ctca {

std::vector<double> smooth(const std::vector<double>& series, int window) {
    if (window < 1) {
        throw ConfigError("smooth: window must be >= 1, got " + std::to_string(window));
    }
    std::vector<double> out(series.size());
    double running = 0.0;
    for (size_t i = 0; i < series.size(); ++i) {
        running += series[i];
        if (i >= static_cast<size_t>(window)) {
            running -= series[i - static_cast<size_t>(window)];
        }
        const size_t span = std::min<size_t>(i + 1, static_cast<size_t>(window));
        out[i] = running / static_cast<double>(span);
    }
    return out;
}

Curve smooth(const Curve& curve, int window) {
    if (curve.iterations.size() != curve.values.size()) {
        throw ShapeError("smooth: curve has " + std::to_string(curve.iterations.size()) +
                         " iterations but " + std::to_string(curve.values.size()) + " values");
    }
    Curve out;
    out.iterations = curve.iterations;
    out.values = smooth(curve.values, window);
    return out;
}

StopStrategy stop_strategy_from_name(const std::string& name) {
    if (name == "L") return StopStrategy::Last;
    if (name == "O") return StopStrategy::OracleCer;
    if (name == "A") return StopStrategy::FoldAverage;
    if (name == "M") return StopStrategy::FoldMean;
    if (name == "X") return StopStrategy::FoldMax;
    if (name == "S") return StopStrategy::CrossWriter;
    throw ConfigError("unknown stop strategy '" + name + "' (expected L, O, A, M, X or S)");
}

const char* stop_strategy_name(StopStrategy strategy) {
    switch (strategy) {
        case StopStrategy::Last: return "L";
        case StopStrategy::OracleCer: return "O";
        case StopStrategy::FoldAverage: return "A";
        case StopStrategy::FoldMean: return "M";
        case StopStrategy::FoldMax: return "X";
        case StopStrategy::CrossWriter: return "S";
    }
    throw ConfigError("invalid stop strategy value");
}

namespace {

constexpr int64_t kEvalStep = 20;

int64_t round_to_grid(double x) {
    return std::llround(x / static_cast<double>(kEvalStep)) * kEvalStep;
}

int64_t argmin_iteration(const Curve& curve) {
    if (curve.values.empty()) {
        throw ConfigError("estimate_stop: empty curve");
    }
    if (curve.iterations.size() != curve.values.size()) {
        throw ShapeError("estimate_stop: curve has " + std::to_string(curve.iterations.size()) +
                         " iterations but " + std::to_string(curve.values.size()) + " values");
    }
    size_t best = 0;
    for (size_t i = 1; i < curve.values.size(); ++i) {
        if (curve.values[i] < curve.values[best]) best = i;
    }
    return curve.iterations[best];
}

void require_aligned(const std::vector<Curve>& curves, const char* what) {
    if (curves.empty()) {
        throw ConfigError(std::string("estimate_stop: no ") + what + " provided");
    }
    for (const Curve& c : curves) {
        if (c.values.empty()) {
            throw ConfigError(std::string("estimate_stop: empty ") + what);
        }
        if (c.iterations != curves.front().iterations) {
            throw ShapeError(std::string("estimate_stop: ") + what +
                             " evaluated on mismatched iteration grids");
        }
    }
}

Curve average_curves(const std::vector<Curve>& curves) {
    Curve out;
    out.iterations = curves.front().iterations;
    out.values.assign(out.iterations.size(), 0.0);
    for (const Curve& c : curves) {
        for (size_t i = 0; i < c.values.size(); ++i) out.values[i] += c.values[i];
    }
    for (double& v : out.values) v /= static_cast<double>(curves.size());
    return out;
}

std::vector<int64_t> fold_argmins(const std::vector<Curve>& folds, int window) {
    require_aligned(folds, "fold curves");
    std::vector<int64_t> argmins;
    argmins.reserve(folds.size());
    for (const Curve& fold : folds) {
        argmins.push_back(argmin_iteration(smooth(fold, window)));
    }
    return argmins;
}

// Per writer: smooth each run, average the runs, divide by the curve minimum
// (epsilon-floored) so every writer's curve bottoms out at exactly 1.
Curve cross_writer_curve(const std::vector<std::vector<Curve>>& writers, int window) {
    if (writers.size() < 2) {
        throw ConfigError("estimate_stop: S needs curves from at least 2 writers, got " +
                          std::to_string(writers.size()));
    }
    std::vector<Curve> normalized;
    normalized.reserve(writers.size());
    for (const std::vector<Curve>& runs : writers) {
        require_aligned(runs, "run curves");
        std::vector<Curve> smoothed;
        smoothed.reserve(runs.size());
        for (const Curve& run : runs) smoothed.push_back(smooth(run, window));
        Curve writer_curve = average_curves(smoothed);
        const double floor = std::max(*std::min_element(writer_curve.values.begin(),
                                                        writer_curve.values.end()),
                                      1e-8);
        for (double& v : writer_curve.values) v /= floor;
        normalized.push_back(std::move(writer_curve));
    }
    require_aligned(normalized, "writer curves");
    return average_curves(normalized);
}

} // namespace

int64_t estimate_stop(const EstimatorSpec& spec, const EstimatorInputs& inputs) {
    if (!(spec.factor > 0.0)) {
        throw ConfigError("estimate_stop: factor R must be positive");
    }
    if (spec.window < 1) {
        throw ConfigError("estimate_stop: smoothing window must be >= 1");
    }
    if (inputs.budget < kEvalStep) {
        throw ConfigError("estimate_stop: budget must be at least " +
                          std::to_string(kEvalStep) + " iterations");
    }

    int64_t raw = 0;
    switch (spec.strategy) {
        case StopStrategy::Last:
            raw = inputs.budget;
            break;
        case StopStrategy::OracleCer:
            if (inputs.test_cer == nullptr) {
                throw ConfigError("estimate_stop: O needs a test CER curve");
            }
            raw = argmin_iteration(*inputs.test_cer);
            break;
        case StopStrategy::FoldAverage: {
            if (inputs.fold_losses == nullptr) {
                throw ConfigError("estimate_stop: A needs fold loss curves");
            }
            require_aligned(*inputs.fold_losses, "fold curves");
            std::vector<Curve> smoothed;
            smoothed.reserve(inputs.fold_losses->size());
            for (const Curve& fold : *inputs.fold_losses) {
                smoothed.push_back(smooth(fold, spec.window));
            }
            raw = argmin_iteration(average_curves(smoothed));
            break;
        }
        case StopStrategy::FoldMean: {
            if (inputs.fold_losses == nullptr) {
                throw ConfigError("estimate_stop: M needs fold loss curves");
            }
            const std::vector<int64_t> argmins = fold_argmins(*inputs.fold_losses, spec.window);
            double mean = 0.0;
            for (int64_t a : argmins) mean += static_cast<double>(a);
            mean /= static_cast<double>(argmins.size());
            raw = round_to_grid(mean);
            break;
        }
        case StopStrategy::FoldMax: {
            if (inputs.fold_losses == nullptr) {
                throw ConfigError("estimate_stop: X needs fold loss curves");
            }
            const std::vector<int64_t> argmins = fold_argmins(*inputs.fold_losses, spec.window);
            raw = *std::max_element(argmins.begin(), argmins.end());
            break;
        }
        case StopStrategy::CrossWriter:
            if (inputs.writer_run_losses == nullptr) {
                throw ConfigError("estimate_stop: S needs per-writer run loss curves");
            }
            raw = argmin_iteration(cross_writer_curve(*inputs.writer_run_losses, spec.window));
            break;
    }

    const int64_t grid_budget = (inputs.budget / kEvalStep) * kEvalStep;
    int64_t result = round_to_grid(static_cast<double>(raw) * spec.factor);
    result = std::clamp<int64_t>(result, kEvalStep, grid_budget);
    return result;
}

RatioTable paper_s3_ratio_table() {
    RatioTable table;
    table.name = "paper-S3";
    table.cluster_sizes = {1, 2, 4, 8, 16, 32, 64, 128, 256};
    table.ratios = {180.0, 90.0, 60.0, 38.0, 33.0, 30.0, 24.0, 15.0, 9.0};
    return table;
}

RatioTable compute_ratio_table(const std::vector<int>& cluster_sizes,
                               const std::vector<int64_t>& budgets,
                               const std::vector<std::vector<std::vector<Curve>>>& writer_runs_per_cluster,
                               double factor, int window) {
    if (cluster_sizes.size() != budgets.size() ||
        cluster_sizes.size() != writer_runs_per_cluster.size()) {
        throw ShapeError("compute_ratio_table: cluster sizes, budgets and curve sets "
                         "must align");
    }
    if (cluster_sizes.empty()) {
        throw ConfigError("compute_ratio_table: no clusters");
    }
    RatioTable table;
    table.name = "computed";
    EstimatorSpec spec;
    spec.strategy = StopStrategy::CrossWriter;
    spec.factor = factor;
    spec.window = window;
    for (size_t c = 0; c < cluster_sizes.size(); ++c) {
        if (cluster_sizes[c] < 1) {
            throw ConfigError("compute_ratio_table: cluster size must be positive");
        }
        EstimatorInputs inputs;
        inputs.budget = budgets[c];
        inputs.writer_run_losses = &writer_runs_per_cluster[c];
        const int64_t stop = estimate_stop(spec, inputs);
        table.cluster_sizes.push_back(cluster_sizes[c]);
        table.ratios.push_back(static_cast<double>(stop) / static_cast<double>(cluster_sizes[c]));
    }
    return table;
}

int64_t iterations_from_ratio(const RatioTable& table, int cluster_size, int64_t budget) {
    if (budget < 1) {
        throw ConfigError("iterations_from_ratio: budget must be positive");
    }
    for (size_t i = 0; i < table.cluster_sizes.size(); ++i) {
        if (table.cluster_sizes[i] == cluster_size) {
            const int64_t raw = std::llround(table.ratios[i] * static_cast<double>(cluster_size));
            return std::clamp<int64_t>(raw, 1, budget);
        }
    }
    throw RegistryError("ratio table '" + table.name + "' has no entry for cluster size " +
                        std::to_string(cluster_size));
}

namespace {

// Solves the (degree+1)-dimensional normal equations by Gaussian elimination
// with partial pivoting; systems here are tiny (degree <= 5 in practice).
std::vector<double> solve_normal_equations(std::vector<std::vector<double>> a,
                                           std::vector<double> b) {
    const size_t n = b.size();
    for (size_t col = 0; col < n; ++col) {
        size_t pivot = col;
        for (size_t row = col + 1; row < n; ++row) {
            if (std::abs(a[row][col]) > std::abs(a[pivot][col])) pivot = row;
        }
        if (std::abs(a[pivot][col]) < 1e-12) {
            throw ConfigError("fit_iterations: singular system (degenerate sample "
                              "positions)");
        }
        std::swap(a[col], a[pivot]);
        std::swap(b[col], b[pivot]);
        for (size_t row = col + 1; row < n; ++row) {
            const double f = a[row][col] / a[col][col];
            for (size_t k = col; k < n; ++k) a[row][k] -= f * a[col][k];
            b[row] -= f * b[col];
        }
    }
    std::vector<double> x(n);
    for (size_t i = n; i-- > 0;) {
        double v = b[i];
        for (size_t k = i + 1; k < n; ++k) v -= a[i][k] * x[k];
        x[i] = v / a[i][i];
    }
    return x;
}

double poly_eval(const std::vector<double>& coeffs, double x) {
    double v = 0.0;
    for (size_t k = coeffs.size(); k-- > 0;) v = v * x + coeffs[k];
    return v;
}

} // namespace

IterationFit fit_iterations(const std::vector<IterationSample>& samples, int degree) {
    if (degree < 0) {
        throw ConfigError("fit_iterations: degree must be >= 0");
    }
    if (samples.size() <= static_cast<size_t>(degree)) {
        throw ConfigError("fit_iterations: underdetermined fit, " +
                          std::to_string(samples.size()) + " samples for degree " +
                          std::to_string(degree));
    }
    const size_t terms = static_cast<size_t>(degree) + 1;
    std::vector<std::vector<double>> ata(terms, std::vector<double>(terms, 0.0));
    std::vector<double> atb(terms, 0.0);
    for (const IterationSample& s : samples) {
        if (!(s.lines > 0.0)) {
            throw ConfigError("fit_iterations: line counts must be positive");
        }
        const double x = std::log2(s.lines);
        std::vector<double> powers(terms);
        powers[0] = 1.0;
        for (size_t k = 1; k < terms; ++k) powers[k] = powers[k - 1] * x;
        for (size_t i = 0; i < terms; ++i) {
            for (size_t j = 0; j < terms; ++j) ata[i][j] += powers[i] * powers[j];
            atb[i] += powers[i] * s.iterations;
        }
    }
    IterationFit fit;
    fit.degree = degree;
    fit.coefficients = solve_normal_equations(std::move(ata), std::move(atb));
    return fit;
}

double fit_value(const IterationFit& fit, double lines) {
    if (!(lines > 0.0)) {
        throw ConfigError("fit_value: line count must be positive");
    }
    return poly_eval(fit.coefficients, std::log2(lines));
}

double fit_residual(const IterationFit& fit, const std::vector<IterationSample>& samples) {
    double sq = 0.0;
    for (const IterationSample& s : samples) {
        const double r = fit_value(fit, s.lines) - s.iterations;
        sq += r * r;
    }
    return sq;
}

int64_t predict_iterations(const IterationFit& fit, double lines, int64_t budget) {
    if (budget < kEvalStep) {
        throw ConfigError("predict_iterations: budget must be at least " +
                          std::to_string(kEvalStep));
    }
    const int64_t grid = round_to_grid(fit_value(fit, lines));
    return std::clamp<int64_t>(grid, kEvalStep, (budget / kEvalStep) * kEvalStep);
}

int64_t writer_dependent_budget(int64_t lines) {
    if (lines < 1) {
        throw ConfigError("writer_dependent_budget: need at least 1 line");
    }
    if (lines >= 1000) return 6000;
    if (lines >= 500) return 3000;
    if (lines >= 100) return 2000;
    return 1000;
}

} // namespace ctca
