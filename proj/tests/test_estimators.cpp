#include <doctest.h>

#include <cmath>
#include <vector>

#include "ctca/common.hpp"
#include "ctca/estimators.hpp"
#include "ctca/rng.hpp"

using namespace ctca;

namespace {

Curve make_curve(const std::vector<double>& values) {
    Curve c;
    for (size_t i = 0; i < values.size(); ++i) {
        c.iterations.push_back(static_cast<int64_t>(20 * (i + 1)));
    }
    c.values = values;
    return c;
}

// Saturating U: drops from ~1+depth into a basin of half-width `width`
// around min_iter and climbs back out, like a finetuning loss curve.
Curve u_curve(int64_t budget, int64_t min_iter, double depth, double width,
              double noise_sigma, RngStream* rng) {
    Curve c;
    for (int64_t it = 20; it <= budget; it += 20) {
        const double x = static_cast<double>(it - min_iter) / width;
        double v = 1.0 + depth * (1.0 - std::exp(-x * x));
        if (rng != nullptr) v += noise_sigma * rng->gauss();
        c.iterations.push_back(it);
        c.values.push_back(v);
    }
    return c;
}

} // namespace

TEST_CASE("smooth matches the documented example") {
    const std::vector<double> in = {5, 4, 3, 2, 10};
    const std::vector<double> out = smooth(in, 4);
    REQUIRE(out.size() == 5);
    CHECK(out[0] == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(out[1] == doctest::Approx(4.5).epsilon(1e-12));
    CHECK(out[2] == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(out[3] == doctest::Approx(3.5).epsilon(1e-12));
    CHECK(out[4] == doctest::Approx(4.75).epsilon(1e-12));
}

TEST_CASE("smooth window 1 is the identity and constants are fixed points") {
    const std::vector<double> in = {3.0, 1.0, 4.0, 1.5};
    CHECK(smooth(in, 1) == in);
    const std::vector<double> flat(10, 2.5);
    const std::vector<double> out = smooth(flat, 4);
    for (double v : out) CHECK(v == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(smooth(std::vector<double>{}, 4).empty());
    CHECK_THROWS_AS(smooth(in, 0), ConfigError);
}

TEST_CASE("L returns the budget") {
    EstimatorSpec spec;
    spec.strategy = StopStrategy::Last;
    EstimatorInputs in;
    in.budget = 3000;
    CHECK(estimate_stop(spec, in) == 3000);
}

TEST_CASE("O returns the earliest argmin of the test CER curve") {
    EstimatorSpec spec;
    spec.strategy = StopStrategy::OracleCer;
    const Curve cer = make_curve({0.5, 0.3, 0.1, 0.1, 0.4});
    EstimatorInputs in;
    in.budget = 100;
    in.test_cer = &cer;
    CHECK(estimate_stop(spec, in) == 60);

    EstimatorInputs missing;
    missing.budget = 100;
    CHECK_THROWS_AS(estimate_stop(spec, missing), ConfigError);
    Curve empty;
    missing.test_cer = &empty;
    CHECK_THROWS_AS(estimate_stop(spec, missing), ConfigError);
}

TEST_CASE("M and X on the documented fold argmins") {
    // Window 1 keeps the curves unsmoothed so the minima sit exactly at
    // 200, 240, 280 and 400.
    std::vector<Curve> folds;
    for (int64_t target : {200, 240, 280, 400}) {
        Curve c;
        for (int64_t it = 20; it <= 1000; it += 20) {
            c.iterations.push_back(it);
            c.values.push_back(std::abs(static_cast<double>(it - target)));
        }
        folds.push_back(std::move(c));
    }
    EstimatorInputs in;
    in.budget = 1000;
    in.fold_losses = &folds;

    EstimatorSpec spec;
    spec.window = 1;
    spec.strategy = StopStrategy::FoldMean;
    CHECK(estimate_stop(spec, in) == 280);
    spec.strategy = StopStrategy::FoldMax;
    CHECK(estimate_stop(spec, in) == 400);

    spec.factor = 1.5;
    CHECK(estimate_stop(spec, in) == 600);
    spec.factor = 3.0;
    CHECK(estimate_stop(spec, in) == 1000);
}

TEST_CASE("estimates land on the evaluation grid") {
    EstimatorSpec spec;
    spec.strategy = StopStrategy::OracleCer;
    spec.factor = 1.5;
    const Curve cer = make_curve({0.5, 0.1, 0.4, 0.6, 0.7});
    EstimatorInputs in;
    in.budget = 100;
    in.test_cer = &cer;
    // argmin 40, x1.5 = 60, already on grid.
    CHECK(estimate_stop(spec, in) == 60);
    spec.factor = 1.7; // 68 -> nearest grid point 60
    CHECK(estimate_stop(spec, in) == 60);
    spec.factor = 1.75; // 70 -> tie rounds up to 80
    CHECK(estimate_stop(spec, in) == 80);
    spec.factor = 0.1; // 4 -> clamped up to the first grid point
    CHECK(estimate_stop(spec, in) == 20);
}

TEST_CASE("A averages smoothed folds before taking the argmin") {
    // Two folds whose unsmoothed minima disagree; the averaged curve has a
    // unique minimum at 60.
    std::vector<Curve> folds;
    folds.push_back(make_curve({5.0, 4.0, 1.0, 4.0, 5.0}));
    folds.push_back(make_curve({5.0, 4.0, 1.2, 4.0, 5.0}));
    EstimatorSpec spec;
    spec.strategy = StopStrategy::FoldAverage;
    spec.window = 1;
    EstimatorInputs in;
    in.budget = 100;
    in.fold_losses = &folds;
    CHECK(estimate_stop(spec, in) == 60);

    std::vector<Curve> misaligned = folds;
    misaligned[1].iterations[0] = 999;
    in.fold_losses = &misaligned;
    CHECK_THROWS_AS(estimate_stop(spec, in), ShapeError);
}

TEST_CASE("X is never below M") {
    RngStream rng(42);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<Curve> folds;
        const int64_t budget = 1000;
        for (int f = 0; f < 4; ++f) {
            const int64_t min_iter =
                20 + 20 * static_cast<int64_t>(rng.uniform_int(0, 49));
            folds.push_back(u_curve(budget, min_iter, 1.0, 150.0, 0.01, &rng));
        }
        EstimatorInputs in;
        in.budget = budget;
        in.fold_losses = &folds;
        EstimatorSpec spec;
        spec.strategy = StopStrategy::FoldMean;
        const int64_t m = estimate_stop(spec, in);
        spec.strategy = StopStrategy::FoldMax;
        const int64_t x = estimate_stop(spec, in);
        CHECK(x >= m);
    }
}

TEST_CASE("A/M/X recover a noisy U-curve minimum within one smoothing window") {
    RngStream rng(7);
    const int64_t budget = 1000;
    const double depth = 1.0;
    int hits = 0;
    const int trials = 40;
    for (int trial = 0; trial < trials; ++trial) {
        const int64_t true_min = 300 + 20 * static_cast<int64_t>(rng.uniform_int(0, 20));
        std::vector<Curve> folds;
        for (int f = 0; f < 4; ++f) {
            folds.push_back(u_curve(budget, true_min, depth, 150.0, 0.05 * depth, &rng));
        }
        EstimatorInputs in;
        in.budget = budget;
        in.fold_losses = &folds;
        for (StopStrategy strat :
             {StopStrategy::FoldAverage, StopStrategy::FoldMean, StopStrategy::FoldMax}) {
            EstimatorSpec spec;
            spec.strategy = strat;
            const int64_t got = estimate_stop(spec, in);
            if (std::llabs(got - true_min) <= 80) ++hits;
        }
    }
    CHECK(hits >= 3 * trials * 95 / 100);
}

TEST_CASE("S normalizes each writer curve to minimum 1 and needs 2 writers") {
    // Writer A's losses dwarf writer B's; an unnormalized average would sit
    // at A's own minimum (40), but each curve is divided by its minimum
    // first, so B's deep minimum at 80 wins.
    std::vector<std::vector<Curve>> writers;
    writers.push_back({make_curve({100.0, 20.0, 30.0, 40.0, 50.0})});
    writers.push_back({make_curve({5.0, 4.0, 3.0, 1.0, 4.0})});
    EstimatorSpec spec;
    spec.strategy = StopStrategy::CrossWriter;
    spec.window = 1;
    EstimatorInputs in;
    in.budget = 100;
    in.writer_run_losses = &writers;
    // Normalized: A = {5,1,1.5,2,2.5}, B = {5,4,3,1,4}; average argmin at 80.
    CHECK(estimate_stop(spec, in) == 80);

    std::vector<std::vector<Curve>> lone = {writers[0]};
    in.writer_run_losses = &lone;
    CHECK_THROWS_AS(estimate_stop(spec, in), ConfigError);
}

TEST_CASE("S averages runs within a writer before normalizing") {
    std::vector<std::vector<Curve>> writers;
    writers.push_back({make_curve({4.0, 2.0, 6.0, 8.0, 9.0}),
                       make_curve({6.0, 2.0, 6.0, 8.0, 9.0})});
    writers.push_back({make_curve({9.0, 3.0, 4.0, 8.0, 9.0})});
    EstimatorSpec spec;
    spec.strategy = StopStrategy::CrossWriter;
    spec.window = 1;
    EstimatorInputs in;
    in.budget = 100;
    in.writer_run_losses = &writers;
    // Writer 0 average {5,2,6,8,9} -> /2; writer 1 {9,3,4,8,9} -> /3.
    // Cross-writer average argmin at 40.
    CHECK(estimate_stop(spec, in) == 40);
}

TEST_CASE("paper ratio table reproduces the documented iteration counts") {
    const RatioTable table = paper_s3_ratio_table();
    CHECK(iterations_from_ratio(table, 16, 1000) == 528);
    CHECK(iterations_from_ratio(table, 256, 3000) == 2304);
    CHECK(iterations_from_ratio(table, 1, 200) == 180);
    CHECK(iterations_from_ratio(table, 32, 100) == 100);
    CHECK_THROWS_AS(iterations_from_ratio(table, 7, 1000), RegistryError);
}

TEST_CASE("computed ratio table with duplicated writers matches S / size") {
    // Both writers share the same curve, so the S estimate is that curve's
    // argmin (x3, clamped) and the ratio is estimate / size.
    const Curve shared = make_curve({5.0, 4.0, 1.0, 2.0, 3.0});
    std::vector<std::vector<std::vector<Curve>>> per_cluster = {{{shared}, {shared}}};
    const RatioTable table = compute_ratio_table({4}, {100}, per_cluster, 3.0, 1);
    REQUIRE(table.cluster_sizes == std::vector<int>{4});
    // argmin 60, x3 = 180 -> clamped to 100; ratio 100/4.
    CHECK(table.ratios[0] == doctest::Approx(25.0).epsilon(1e-12));
}

TEST_CASE("fit recovers exact polynomials in log2 N") {
    std::vector<IterationSample> samples;
    for (double n : {2.0, 4.0, 8.0, 16.0, 64.0}) {
        samples.push_back({n, 100.0 * std::log2(n)});
    }
    const IterationFit fit = fit_iterations(samples, 1);
    CHECK(fit_residual(fit, samples) <= 1e-9);
    CHECK(fit_value(fit, 8.0) == doctest::Approx(300.0).epsilon(1e-9));
    CHECK(predict_iterations(fit, 8.0, 6000) == 300);

    std::vector<IterationSample> quad;
    for (double n : {2.0, 4.0, 8.0, 16.0, 32.0, 256.0}) {
        const double x = std::log2(n);
        quad.push_back({n, 50.0 + 10.0 * x + 5.0 * x * x});
    }
    const IterationFit fit2 = fit_iterations(quad, 2);
    CHECK(fit_residual(fit2, quad) <= 1e-9);
}

TEST_CASE("degree 0 fit is the mean and predictions stay on the grid") {
    std::vector<IterationSample> samples = {{2.0, 100.0}, {8.0, 200.0}, {32.0, 330.0}};
    const IterationFit fit = fit_iterations(samples, 0);
    CHECK(fit_value(fit, 999.0) == doctest::Approx(210.0).epsilon(1e-12));
    CHECK(predict_iterations(fit, 999.0, 6000) == 220);
    CHECK(predict_iterations(fit, 999.0, 100) == 100);
}

TEST_CASE("underdetermined or degenerate fits are rejected") {
    CHECK_THROWS_AS(fit_iterations({{2.0, 100.0}, {4.0, 200.0}}, 2), ConfigError);
    CHECK_THROWS_AS(fit_iterations({}, 0), ConfigError);
    // All samples at the same N: degree-1 system is singular.
    CHECK_THROWS_AS(fit_iterations({{8.0, 100.0}, {8.0, 200.0}}, 1), ConfigError);
    CHECK_THROWS_AS(fit_iterations({{-2.0, 100.0}, {4.0, 50.0}}, 0), ConfigError);
}

TEST_CASE("writer-dependent budget preset") {
    CHECK(writer_dependent_budget(1) == 1000);
    CHECK(writer_dependent_budget(99) == 1000);
    CHECK(writer_dependent_budget(100) == 2000);
    CHECK(writer_dependent_budget(499) == 2000);
    CHECK(writer_dependent_budget(500) == 3000);
    CHECK(writer_dependent_budget(999) == 3000);
    CHECK(writer_dependent_budget(1000) == 6000);
    CHECK(writer_dependent_budget(100000) == 6000);
    CHECK_THROWS_AS(writer_dependent_budget(0), ConfigError);
}

TEST_CASE("strategy names round-trip") {
    for (const char* name : {"L", "O", "A", "M", "X", "S"}) {
        CHECK(stop_strategy_name(stop_strategy_from_name(name)) == doctest::String(name));
    }
    CHECK_THROWS_AS(stop_strategy_from_name("Q"), ConfigError);
}
