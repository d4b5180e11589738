#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "ctca/adam.hpp"
#include "ctca/augment.hpp"
#include "ctca/dataset.hpp"
#include "ctca/estimators.hpp"
#include "ctca/recognizer.hpp"
#include "ctca/schedule.hpp"

namespace ctca {

// One training/finetuning run's recorded series, evaluated every 20
// iterations against a fixed held-out set.
struct FinetuneCurves {
    int writer_id = -1;
    int cluster_size = 0;
    std::string combo = "NONE";
    uint64_t run_seed = 0;
    std::vector<int64_t> eval_iterations;
    std::vector<double> train_loss;
    std::vector<double> test_loss;
    std::vector<double> test_cer;

    Curve loss_curve() const { return {eval_iterations, test_loss}; }
    Curve cer_curve() const { return {eval_iterations, test_cer}; }
};

constexpr int kEvalEvery = 20;

struct TrainOptions {
    int64_t iterations = 0;
    int batch_size = 32;
    uint64_t seed = 0;
    WarmupSchedule schedule = WarmupSchedule::constant(3e-4);
    const AugmentationCombo* combo = nullptr;  // null: no augmentation
    int eval_batch = 32;
};

struct TrainResult {
    FinetuneCurves curves;
    int64_t skipped_samples = 0;  // targets infeasible after width subsampling
    double final_train_loss = 0.0;
};

// Mean CTC loss and CER of the model on the given records, no augmentation.
struct EvalResult {
    double loss = 0.0;
    double cer = 0.0;
};
EvalResult evaluate_model(const Recognizer& model, const Dataset& data,
                          const std::vector<size_t>& eval_pool, int eval_batch = 32);

// Adam/CTC training loop: sample with replacement from train_pool, augment,
// step with lr_at(iteration); every 20 iterations record train loss plus
// held-out loss and CER. 0 iterations: model untouched, empty curves.
TrainResult train(Recognizer& model, AdamState& adam, const Dataset& data,
                  const std::vector<size_t>& train_pool,
                  const std::vector<size_t>& eval_pool, const TrainOptions& options);

struct ClusterProtocol {
    std::vector<int> cluster_sizes = {1, 2, 4, 8, 16, 32, 64, 128, 256};
    std::vector<int64_t> budgets = {200, 200, 400, 800, 1000, 1500, 2000, 2500, 3000};
    int runs_per_writer = 10;
    int folds = 4;
    int batch_cap = 32;          // finetuning batch = min(cap, cluster size)
    double finetune_lr = 3e-4;   // constant, no warmup
    int eval_limit = 0;          // cap on test lines per eval; 0 = all 256

    void validate() const;
};

// One finetuning run: re-draws the writer's 512 lines into 256 test + 256
// adaptation using run_seed, builds nested prefix clusters, finetunes a
// fresh copy of the base model per cluster for its budget.
std::map<int, FinetuneCurves> finetune_run(const Checkpoint& base, const Dataset& data,
                                           int writer_id, const ClusterProtocol& protocol,
                                           const AugmentationCombo& combo,
                                           uint64_t run_seed);

// The nested cluster index sets a run would use (exposed for tests).
std::map<int, std::vector<size_t>> run_clusters(const Dataset& data, int writer_id,
                                                const ClusterProtocol& protocol,
                                                uint64_t run_seed);

// The 256 test lines of the same re-draw; disjoint from every cluster.
std::vector<size_t> run_test_lines(const Dataset& data, int writer_id, uint64_t run_seed);

// 4-fold cross-validation on one cluster's adaptation lines; returns the
// held-out loss curve per fold. Clusters below 16 lines are refused.
std::vector<Curve> kfold_curves(const Checkpoint& base, const Dataset& data,
                                const std::vector<size_t>& adaptation_lines,
                                const ClusterProtocol& protocol, int64_t budget,
                                const AugmentationCombo& combo, uint64_t seed);

// Line-delimited persistence; loading and re-saving is byte-identical.
void save_curves(const std::string& path, const std::vector<FinetuneCurves>& runs);
std::vector<FinetuneCurves> load_curves(const std::string& path);

// Runs jobs on `workers` threads (1 = inline); each job must own its model
// copy and RNG stream. CTC_ADAPT_WORKERS overrides when set.
int resolve_worker_count(int requested);
void run_jobs(std::vector<std::function<void()>> jobs, int workers);

}  // namespace ctca
