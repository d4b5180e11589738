#include "ctca/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>

#include <json.hpp>

#include "ctca/adapt.hpp"
#include "ctca/augment.hpp"
#include "ctca/common.hpp"
#include "ctca/dataset.hpp"
#include "ctca/estimators.hpp"
#include "ctca/metrics.hpp"
#include "ctca/recognizer.hpp"
#include "ctca/schedule.hpp"

namespace ctca {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string join_int_list(const std::vector<int>& values) {
    std::string out;
    for (size_t i = 0; i < values.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(values[i]);
    }
    return out;
}

std::string join_int_list(const std::vector<int64_t>& values) {
    std::string out;
    for (size_t i = 0; i < values.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(values[i]);
    }
    return out;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void emit(ExperimentLog log, const std::string& line) {
    if (log != nullptr) log(line);
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

} // namespace

DeskExperimentConfig DeskExperimentConfig::from_config(const KeyValueConfig& kv) {
    DeskExperimentConfig c;
    c.work_dir = kv.get_string("work_dir", c.work_dir);
    c.seed = static_cast<uint64_t>(kv.get_int("seed", static_cast<int64_t>(c.seed)));
    c.workers = static_cast<int>(kv.get_int("workers", c.workers));

    c.symbols = kv.get_string("symbols", c.symbols);
    c.base_writers = static_cast<int>(kv.get_int("base_writers", c.base_writers));
    c.lines_per_base_writer =
        static_cast<int>(kv.get_int("lines_per_base_writer", c.lines_per_base_writer));
    c.target_writers = static_cast<int>(kv.get_int("target_writers", c.target_writers));
    c.min_chars = static_cast<int>(kv.get_int("min_chars", c.min_chars));
    c.max_chars = static_cast<int>(kv.get_int("max_chars", c.max_chars));
    c.base_divergence = kv.get_double("base_divergence", c.base_divergence);
    c.target_divergence = kv.get_double("target_divergence", c.target_divergence);

    c.base_iterations = kv.get_int("base_iterations", c.base_iterations);
    c.base_batch = static_cast<int>(kv.get_int("base_batch", c.base_batch));
    c.base_combo = kv.get_string("base_combo", c.base_combo);

    std::vector<int64_t> cluster_defaults(c.clusters.begin(), c.clusters.end());
    c.clusters.clear();
    for (int64_t v : kv.get_int_list("clusters", cluster_defaults)) {
        c.clusters.push_back(static_cast<int>(v));
    }
    c.budgets = kv.get_int_list("budgets", c.budgets);
    c.runs_per_writer = static_cast<int>(kv.get_int("runs_per_writer", c.runs_per_writer));
    c.finetune_batch = static_cast<int>(kv.get_int("finetune_batch", c.finetune_batch));
    c.eval_limit = static_cast<int>(kv.get_int("eval_limit", c.eval_limit));
    c.aug_combo = kv.get_string("aug_combo", c.aug_combo);
    c.none_arm = kv.get_bool("none_arm", c.none_arm);
    c.estimator_factor = kv.get_double("estimator_factor", c.estimator_factor);
    return c;
}

KeyValueConfig DeskExperimentConfig::to_config() const {
    KeyValueConfig kv;
    kv.set("work_dir", work_dir);
    kv.set("seed", std::to_string(seed));
    kv.set("workers", std::to_string(workers));

    kv.set("symbols", symbols);
    kv.set("base_writers", std::to_string(base_writers));
    kv.set("lines_per_base_writer", std::to_string(lines_per_base_writer));
    kv.set("target_writers", std::to_string(target_writers));
    kv.set("min_chars", std::to_string(min_chars));
    kv.set("max_chars", std::to_string(max_chars));
    kv.set("base_divergence", format_double(base_divergence));
    kv.set("target_divergence", format_double(target_divergence));

    kv.set("base_iterations", std::to_string(base_iterations));
    kv.set("base_batch", std::to_string(base_batch));
    kv.set("base_combo", base_combo);

    kv.set("clusters", join_int_list(clusters));
    kv.set("budgets", join_int_list(budgets));
    kv.set("runs_per_writer", std::to_string(runs_per_writer));
    kv.set("finetune_batch", std::to_string(finetune_batch));
    kv.set("eval_limit", std::to_string(eval_limit));
    kv.set("aug_combo", aug_combo);
    kv.set("none_arm", none_arm ? "true" : "false");
    kv.set("estimator_factor", format_double(estimator_factor));
    return kv;
}

void DeskExperimentConfig::validate() const {
    if (clusters.empty() || clusters.size() != budgets.size()) {
        throw ConfigError("experiment: clusters and budgets must align");
    }
    for (size_t i = 0; i < clusters.size(); ++i) {
        if (i > 0 && clusters[i] <= clusters[i - 1]) {
            throw ConfigError("experiment: clusters must be strictly increasing");
        }
        if (budgets[i] < 20 || budgets[i] % 20 != 0) {
            throw ConfigError("experiment: budgets must be positive multiples of 20");
        }
    }
    if (base_writers < 1 || target_writers < 1 || lines_per_base_writer < 1) {
        throw ConfigError("experiment: writer counts must be positive");
    }
    if (runs_per_writer < 1) throw ConfigError("experiment: runs_per_writer must be >= 1");
    if (base_iterations < 0) throw ConfigError("experiment: negative base_iterations");
    if (base_batch < 1 || finetune_batch < 1) {
        throw ConfigError("experiment: batch sizes must be >= 1");
    }
    if (!(estimator_factor > 0.0)) {
        throw ConfigError("experiment: estimator_factor must be positive");
    }
    parse_combo(base_combo);
    parse_combo(aug_combo);
}

DeskExperimentConfig DeskExperimentConfig::tiny_variant() const {
    DeskExperimentConfig c = *this;
    c.base_writers = 8;
    c.lines_per_base_writer = 100;
    c.target_writers = 2;
    c.base_iterations = 4000;
    c.clusters = {64};
    c.budgets = {320};
    c.runs_per_writer = 1;
    c.eval_limit = 48;
    c.none_arm = false;
    return c;
}

namespace {

// Keys that change the science; work_dir and workers only change where and
// how fast artifacts appear.
std::string science_content_id(const DeskExperimentConfig& config) {
    KeyValueConfig kv = config.to_config();
    KeyValueConfig science;
    for (const auto& [key, value] : kv.entries()) {
        if (key == "work_dir" || key == "workers") continue;
        science.set(key, value);
    }
    return science.content_id();
}

struct Arm {
    std::string combo;
    int cluster = 0;
    int64_t budget = 0;
};

struct JobOutcome {
    RunResult result;
    FinetuneCurves curves;
};

} // namespace

DeskOutcome run_desk_experiment(const DeskExperimentConfig& config, ExperimentLog log) {
    const auto t0 = std::chrono::steady_clock::now();
    config.validate();

    DeskOutcome outcome;
    const std::string run_dir =
        (fs::path(config.work_dir) / ("desk-" + science_content_id(config))).string();
    outcome.run_dir = run_dir;
    fs::create_directories(fs::path(run_dir) / "results");
    fs::create_directories(fs::path(run_dir) / "curves");
    config.to_config().save((fs::path(run_dir) / "config.conf").string());
    emit(log, "run directory: " + run_dir);

    // Dataset.
    const std::string ds_dir = (fs::path(run_dir) / "dataset").string();
    if (!fs::exists(fs::path(ds_dir) / "manifest.jsonl")) {
        DatasetSpec spec;
        spec.out_dir = ds_dir;
        spec.seed = config.seed;
        spec.symbols = config.symbols;
        spec.base_writers = config.base_writers;
        spec.lines_per_base_writer = config.lines_per_base_writer;
        spec.target_writers = config.target_writers;
        spec.min_chars = config.min_chars;
        spec.max_chars = config.max_chars;
        spec.base_divergence = config.base_divergence;
        spec.target_divergence = config.target_divergence;
        build_dataset(spec);
        emit(log, "dataset built (" + std::to_string(seconds_since(t0)) + " s)");
    } else {
        emit(log, "dataset reused");
    }
    const Dataset data(ds_dir);
    // Warm the image cache single-threaded so parallel jobs only read.
    for (size_t i = 0; i < data.size(); ++i) data.image(i);
    emit(log, "dataset ready: " + std::to_string(data.size()) + " lines (" +
                  std::to_string(seconds_since(t0)) + " s)");

    // Base model.
    const std::string ckpt_path = (fs::path(run_dir) / "base.ckpt").string();
    if (!fs::exists(ckpt_path)) {
        Recognizer model(desk_preset(config.symbols), config.seed);
        AdamState adam(model.params());
        const AugmentationCombo base_combo = parse_combo(config.base_combo);
        const std::vector<size_t> train_pool = data.indices(Split::train);
        std::vector<size_t> eval_pool = train_pool;
        if (eval_pool.size() > 64) eval_pool.resize(64);

        TrainOptions options;
        options.iterations = config.base_iterations;
        options.batch_size = config.base_batch;
        options.seed = mix_seed(config.seed, 1);
        options.schedule = WarmupSchedule::base_preset().scaled_to(config.base_iterations,
                                                                   500000);
        options.combo = &base_combo;
        const TrainResult trained = train(model, adam, data, train_pool, eval_pool, options);
        save_checkpoint(ckpt_path, model, config.base_iterations, config.seed, &adam);

        FinetuneCurves base_curves = trained.curves;
        base_curves.writer_id = -1;
        base_curves.combo = config.base_combo;
        base_curves.run_seed = config.seed;
        save_curves((fs::path(run_dir) / "base_curves.jsonl").string(), {base_curves});
        emit(log, "base model trained: final loss " +
                      std::to_string(trained.final_train_loss) + " (" +
                      std::to_string(seconds_since(t0)) + " s)");
    } else {
        emit(log, "base checkpoint reused");
    }
    const Checkpoint base = read_checkpoint(ckpt_path);

    // Arms: the augmented combo across all clusters, plus NONE at 64 lines
    // for the augmentation-vs-none comparison.
    std::vector<Arm> arms;
    for (size_t i = 0; i < config.clusters.size(); ++i) {
        arms.push_back({config.aug_combo, config.clusters[i], config.budgets[i]});
    }
    if (config.none_arm && config.aug_combo != "NONE") {
        const auto it = std::find(config.clusters.begin(), config.clusters.end(), 64);
        if (it != config.clusters.end()) {
            const size_t idx = static_cast<size_t>(it - config.clusters.begin());
            arms.push_back({"NONE", 64, config.budgets[idx]});
        }
    }

    const std::vector<int> writers = data.target_writer_ids();
    std::map<int, std::vector<RunResult>> results_by_writer;
    std::vector<int> pending_writers;
    for (int w : writers) {
        const std::string path =
            (fs::path(run_dir) / "results" / ("writer" + std::to_string(w) + ".results.json"))
                .string();
        if (fs::exists(path)) {
            results_by_writer[w] = load_results(path);
        } else {
            pending_writers.push_back(w);
        }
    }

    if (!pending_writers.empty()) {
        struct JobSpec {
            int writer = 0;
            int run = 0;
            Arm arm;
        };
        std::vector<JobSpec> specs;
        for (int w : pending_writers) {
            for (int r = 0; r < config.runs_per_writer; ++r) {
                for (const Arm& arm : arms) specs.push_back({w, r, arm});
            }
        }
        std::vector<std::optional<JobOutcome>> outcomes(specs.size());

        std::vector<std::function<void()>> jobs;
        for (size_t ji = 0; ji < specs.size(); ++ji) {
            jobs.push_back([&, ji] {
                const JobSpec& spec = specs[ji];
                const uint64_t run_seed =
                    mix_seed(mix_seed(config.seed, 0xADA9),
                             static_cast<uint64_t>(spec.writer) * 100 +
                                 static_cast<uint64_t>(spec.run));
                const AugmentationCombo combo = parse_combo(spec.arm.combo);

                ClusterProtocol protocol;
                protocol.cluster_sizes = {spec.arm.cluster};
                protocol.budgets = {spec.arm.budget};
                protocol.batch_cap = config.finetune_batch;
                protocol.eval_limit = config.eval_limit;

                const auto clusters = run_clusters(data, spec.writer, protocol, run_seed);
                const std::vector<size_t>& lines = clusters.at(spec.arm.cluster);
                const std::vector<Curve> folds =
                    kfold_curves(base, data, lines, protocol, spec.arm.budget, combo,
                                 mix_seed(run_seed, static_cast<uint64_t>(spec.arm.cluster)));

                EstimatorSpec estimator;
                estimator.strategy = StopStrategy::FoldMax;
                estimator.factor = config.estimator_factor;
                EstimatorInputs inputs;
                inputs.budget = spec.arm.budget;
                inputs.fold_losses = &folds;
                const int64_t stop = estimate_stop(estimator, inputs);

                const auto trained =
                    finetune_run(base, data, spec.writer, protocol, combo, run_seed);
                const FinetuneCurves& curves = trained.at(spec.arm.cluster);
                const size_t point = static_cast<size_t>(stop / kEvalEvery) - 1;

                std::vector<size_t> eval_pool = run_test_lines(data, spec.writer, run_seed);
                if (config.eval_limit > 0 &&
                    eval_pool.size() > static_cast<size_t>(config.eval_limit)) {
                    eval_pool.resize(static_cast<size_t>(config.eval_limit));
                }
                const Recognizer base_model = restore_model(base);
                const EvalResult baseline = evaluate_model(base_model, data, eval_pool);

                JobOutcome job;
                job.result.writer_id = spec.writer;
                job.result.combo = spec.arm.combo;
                job.result.cluster_size = spec.arm.cluster;
                job.result.run_seed = run_seed;
                job.result.stop_iteration = stop;
                job.result.baseline_cer = baseline.cer;
                job.result.finetuned_cer = curves.test_cer.at(point);
                job.result.reduction =
                    relative_reduction(baseline.cer, job.result.finetuned_cer);
                job.curves = curves;
                outcomes[ji] = std::move(job);
            });
        }
        const int workers = resolve_worker_count(config.workers);
        emit(log, "finetuning " + std::to_string(jobs.size()) + " jobs on " +
                      std::to_string(workers) + " workers");
        run_jobs(std::move(jobs), workers);

        std::map<int, std::vector<FinetuneCurves>> curves_by_writer;
        for (size_t ji = 0; ji < specs.size(); ++ji) {
            const JobSpec& spec = specs[ji];
            JobOutcome& job = *outcomes[ji];
            results_by_writer[spec.writer].push_back(job.result);
            curves_by_writer[spec.writer].push_back(std::move(job.curves));
        }
        for (int w : pending_writers) {
            save_results((fs::path(run_dir) / "results" /
                          ("writer" + std::to_string(w) + ".results.json"))
                             .string(),
                         results_by_writer[w]);
            save_curves((fs::path(run_dir) / "curves" /
                         ("writer" + std::to_string(w) + ".curves.jsonl"))
                            .string(),
                        curves_by_writer[w]);
            emit(log, "writer " + std::to_string(w) + " finished (" +
                          std::to_string(seconds_since(t0)) + " s)");
        }
    }

    for (const auto& [w, results] : results_by_writer) {
        outcome.results.insert(outcome.results.end(), results.begin(), results.end());
    }

    // Directional aggregates; each uses the two-level writer mean.
    auto mean_for = [&](const std::string& combo, int cluster,
                        double* out) -> bool {
        std::vector<ReductionRecord> records;
        for (const RunResult& r : outcome.results) {
            if (r.combo == combo && r.cluster_size == cluster) {
                records.push_back({r.writer_id, r.baseline_cer, r.finetuned_cer, r.reduction});
            }
        }
        if (records.empty()) return false;
        *out = aggregate(records).mean;
        return true;
    };
    const bool has_aug_16 = mean_for(config.aug_combo, 16, &outcome.aug_mean_16);
    const bool has_aug_64 = mean_for(config.aug_combo, 64, &outcome.aug_mean_64);
    const bool has_aug_256 = mean_for(config.aug_combo, 256, &outcome.aug_mean_256);
    const bool has_none_64 = mean_for("NONE", 64, &outcome.none_mean_64);

    outcome.checked_reduction_64 = has_aug_64;
    outcome.pass_reduction_64 = has_aug_64 && outcome.aug_mean_64 < -0.10;
    outcome.checked_monotone = has_aug_16 && has_aug_256;
    outcome.pass_monotone =
        outcome.checked_monotone && outcome.aug_mean_256 <= outcome.aug_mean_16;
    outcome.checked_aug_vs_none = has_aug_64 && has_none_64;
    outcome.pass_aug_vs_none =
        outcome.checked_aug_vs_none && outcome.aug_mean_64 <= outcome.none_mean_64;

    json summary;
    summary["aug_combo"] = config.aug_combo;
    summary["aug_mean_16"] = has_aug_16 ? json(outcome.aug_mean_16) : json();
    summary["aug_mean_64"] = has_aug_64 ? json(outcome.aug_mean_64) : json();
    summary["aug_mean_256"] = has_aug_256 ? json(outcome.aug_mean_256) : json();
    summary["none_mean_64"] = has_none_64 ? json(outcome.none_mean_64) : json();
    summary["pass_reduction_64"] = outcome.pass_reduction_64;
    summary["pass_monotone"] = outcome.pass_monotone;
    summary["pass_aug_vs_none"] = outcome.pass_aug_vs_none;
    summary["elapsed_seconds"] = seconds_since(t0);
    {
        std::ofstream out((fs::path(run_dir) / "outcome.json").string(),
                          std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("experiment: cannot write outcome.json");
        out << summary.dump(2) << "\n";
    }
    if (!outcome.results.empty()) {
        write_report(outcome.results, (fs::path(run_dir) / "report").string());
    }
    emit(log, "experiment complete (" + std::to_string(seconds_since(t0)) + " s)");
    return outcome;
}

} // namespace ctca
