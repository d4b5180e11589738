#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ctca/adapt.hpp"
#include "ctca/augment.hpp"
#include "ctca/common.hpp"
#include "ctca/config.hpp"
#include "ctca/dataset.hpp"
#include "ctca/estimators.hpp"
#include "ctca/experiment.hpp"
#include "ctca/metrics.hpp"
#include "ctca/recognizer.hpp"
#include "ctca/report.hpp"
#include "ctca/schedule.hpp"

namespace fs = std::filesystem;
using namespace ctca;

namespace {

void say(const std::string& line) {
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
}

// Config file value unless the flag was passed on the command line.
template <typename T>
T resolve(const CLI::Option* opt, const T& flag_value, const KeyValueConfig& kv,
          const std::string& key, const T& fallback) {
    if (opt != nullptr && opt->count() > 0) return flag_value;
    if constexpr (std::is_same_v<T, std::string>) {
        return kv.get_string(key, fallback);
    } else if constexpr (std::is_same_v<T, bool>) {
        return kv.get_bool(key, fallback);
    } else if constexpr (std::is_floating_point_v<T>) {
        return static_cast<T>(kv.get_double(key, fallback));
    } else {
        return static_cast<T>(kv.get_int(key, static_cast<int64_t>(fallback)));
    }
}

std::vector<int64_t> default_budgets_for(const std::vector<int>& clusters) {
    const ClusterProtocol defaults;
    std::vector<int64_t> budgets;
    for (int c : clusters) {
        const auto it = std::find(defaults.cluster_sizes.begin(),
                                  defaults.cluster_sizes.end(), c);
        if (it == defaults.cluster_sizes.end()) {
            throw ConfigError("no default budget for cluster size " + std::to_string(c) +
                              "; pass --budgets explicitly");
        }
        budgets.push_back(
            defaults.budgets[static_cast<size_t>(it - defaults.cluster_sizes.begin())]);
    }
    return budgets;
}

struct GenDataArgs {
    std::string out;
    uint64_t seed = 1;
    std::string symbols;
    int writers = 8;
    int lines_per_writer = 200;
    int target_writers = 5;
    int target_lines = 512;
    int min_chars = 3;
    int max_chars = 6;
    double base_divergence = 0.35;
    double divergence = 0.8;
};

int cmd_gen_data(const GenDataArgs& args) {
    DatasetSpec spec;
    spec.out_dir = args.out;
    spec.seed = args.seed;
    if (!args.symbols.empty()) spec.symbols = args.symbols;
    spec.base_writers = args.writers;
    spec.lines_per_base_writer = args.lines_per_writer;
    spec.target_writers = args.target_writers;
    spec.lines_per_target_writer = args.target_lines;
    spec.min_chars = args.min_chars;
    spec.max_chars = args.max_chars;
    spec.base_divergence = args.base_divergence;
    spec.target_divergence = args.divergence;
    const DatasetManifest manifest = build_dataset(spec);
    say("dataset written to " + args.out + ": " + std::to_string(manifest.records.size()) +
        " records");
    return 0;
}

struct TrainBaseArgs {
    std::string config_file;
    std::string data;
    std::string out;
    std::string preset = "desk";
    int64_t iters = 12000;
    int batch = 8;
    std::string aug = "B1C1G1M1";
    uint64_t seed = 1;
    int eval_limit = 64;
};

int cmd_train_base(const TrainBaseArgs& args) {
    const Dataset data(args.data);
    Recognizer model(preset_by_name(args.preset, data.manifest().spec.symbols), args.seed);
    AdamState adam(model.params());
    const AugmentationCombo combo = parse_combo(args.aug);

    const std::vector<size_t> train_pool = data.indices(Split::train);
    std::vector<size_t> eval_pool = train_pool;
    if (args.eval_limit > 0 && eval_pool.size() > static_cast<size_t>(args.eval_limit)) {
        eval_pool.resize(static_cast<size_t>(args.eval_limit));
    }

    TrainOptions options;
    options.iterations = args.iters;
    options.batch_size = args.batch;
    options.seed = mix_seed(args.seed, 1);
    options.schedule = args.iters > 0
                           ? WarmupSchedule::base_preset().scaled_to(args.iters, 500000)
                           : WarmupSchedule::constant(0.0);
    options.combo = &combo;
    const TrainResult trained = train(model, adam, data, train_pool, eval_pool, options);

    fs::create_directories(args.out);
    const std::string ckpt = (fs::path(args.out) / "base.ckpt").string();
    save_checkpoint(ckpt, model, args.iters, args.seed, &adam);
    FinetuneCurves curves = trained.curves;
    curves.writer_id = -1;
    curves.combo = args.aug;
    curves.run_seed = args.seed;
    save_curves((fs::path(args.out) / "base_curves.jsonl").string(), {curves});

    KeyValueConfig resolved;
    resolved.set("data", args.data);
    resolved.set("preset", args.preset);
    resolved.set("iters", std::to_string(args.iters));
    resolved.set("batch", std::to_string(args.batch));
    resolved.set("aug", args.aug);
    resolved.set("seed", std::to_string(args.seed));
    resolved.set("eval_limit", std::to_string(args.eval_limit));
    resolved.save((fs::path(args.out) / "train_config.conf").string());

    say("checkpoint written to " + ckpt);
    if (!trained.curves.eval_iterations.empty()) {
        say("final train loss " + std::to_string(trained.final_train_loss) + ", eval cer " +
            std::to_string(trained.curves.test_cer.back()));
    }
    return 0;
}

struct FinetuneArgs {
    std::string checkpoint;
    std::string data;
    std::string out;
    int writer = -1;
    std::vector<int> clusters = {16, 64, 256};
    std::vector<int64_t> budgets;
    int runs = 10;
    std::string aug = "B1C1G1M1";
    std::string estimator = "X";
    double factor = 1.5;
    int window = 4;
    std::string ratio_preset;
    uint64_t seed = 1;
    int batch = 32;
    int eval_limit = 0;
    int workers = 0;
};

int cmd_finetune(const FinetuneArgs& args) {
    const Dataset data(args.data);
    const Checkpoint base = read_checkpoint(args.checkpoint);
    const AugmentationCombo combo = parse_combo(args.aug);
    const StopStrategy strategy = stop_strategy_from_name(args.estimator);
    const std::vector<int64_t> budgets =
        args.budgets.empty() ? default_budgets_for(args.clusters) : args.budgets;
    if (budgets.size() != args.clusters.size()) {
        throw ConfigError("finetune: --budgets must have one entry per cluster");
    }
    std::optional<RatioTable> ratio_table;
    if (!args.ratio_preset.empty()) {
        if (args.ratio_preset != "paper-S3") {
            throw RegistryError("unknown ratio preset '" + args.ratio_preset + "'");
        }
        ratio_table = paper_s3_ratio_table();
    } else if (strategy == StopStrategy::CrossWriter) {
        throw ConfigError(
            "estimator S needs curves from several writers; pass --ratio-preset paper-S3 "
            "to use the published per-cluster ratios instead");
    }

    struct Slot {
        RunResult result;
        FinetuneCurves curves;
    };
    std::vector<std::optional<Slot>> slots(static_cast<size_t>(args.runs) *
                                           args.clusters.size());
    std::vector<std::function<void()>> jobs;
    for (int run = 0; run < args.runs; ++run) {
        for (size_t ci = 0; ci < args.clusters.size(); ++ci) {
            const size_t slot_index = static_cast<size_t>(run) * args.clusters.size() + ci;
            jobs.push_back([&, run, ci, slot_index] {
                const int cluster = args.clusters[ci];
                const int64_t budget = budgets[ci];
                const uint64_t run_seed = mix_seed(args.seed, static_cast<uint64_t>(run));

                ClusterProtocol protocol;
                protocol.cluster_sizes = {cluster};
                protocol.budgets = {budget};
                protocol.batch_cap = args.batch;
                protocol.eval_limit = args.eval_limit;

                EstimatorSpec estimator{strategy, args.factor, args.window};
                int64_t stop = 0;
                if (ratio_table.has_value()) {
                    stop = iterations_from_ratio(*ratio_table, cluster, budget);
                    stop = std::max<int64_t>(kEvalEvery,
                                             (stop / kEvalEvery) * kEvalEvery);
                } else if (strategy == StopStrategy::FoldAverage ||
                           strategy == StopStrategy::FoldMean ||
                           strategy == StopStrategy::FoldMax) {
                    const auto clusters = run_clusters(data, args.writer, protocol, run_seed);
                    const std::vector<Curve> folds = kfold_curves(
                        base, data, clusters.at(cluster), protocol, budget, combo,
                        mix_seed(run_seed, static_cast<uint64_t>(cluster)));
                    EstimatorInputs inputs;
                    inputs.budget = budget;
                    inputs.fold_losses = &folds;
                    stop = estimate_stop(estimator, inputs);
                } else if (strategy == StopStrategy::Last) {
                    EstimatorInputs inputs;
                    inputs.budget = budget;
                    stop = estimate_stop(estimator, inputs);
                }

                const auto trained =
                    finetune_run(base, data, args.writer, protocol, combo, run_seed);
                const FinetuneCurves& curves = trained.at(cluster);
                if (strategy == StopStrategy::OracleCer && !ratio_table.has_value()) {
                    const Curve cer_curve = curves.cer_curve();
                    EstimatorInputs inputs;
                    inputs.budget = budget;
                    inputs.test_cer = &cer_curve;
                    stop = estimate_stop(estimator, inputs);
                }

                std::vector<size_t> eval_pool = run_test_lines(data, args.writer, run_seed);
                if (args.eval_limit > 0 &&
                    eval_pool.size() > static_cast<size_t>(args.eval_limit)) {
                    eval_pool.resize(static_cast<size_t>(args.eval_limit));
                }
                const Recognizer base_model = restore_model(base);
                const EvalResult baseline = evaluate_model(base_model, data, eval_pool);

                Slot slot;
                slot.result.writer_id = args.writer;
                slot.result.combo = args.aug;
                slot.result.cluster_size = cluster;
                slot.result.run_seed = run_seed;
                slot.result.stop_iteration = stop;
                slot.result.baseline_cer = baseline.cer;
                slot.result.finetuned_cer =
                    curves.test_cer.at(static_cast<size_t>(stop / kEvalEvery) - 1);
                slot.result.reduction =
                    relative_reduction(baseline.cer, slot.result.finetuned_cer);
                slot.curves = curves;
                slots[slot_index] = std::move(slot);
            });
        }
    }
    run_jobs(std::move(jobs), resolve_worker_count(args.workers));

    std::vector<RunResult> results;
    std::vector<FinetuneCurves> curves;
    for (auto& slot : slots) {
        results.push_back(slot->result);
        curves.push_back(std::move(slot->curves));
    }
    fs::create_directories(args.out);
    const std::string stem = "writer" + std::to_string(args.writer);
    save_results((fs::path(args.out) / (stem + ".results.json")).string(), results);
    save_curves((fs::path(args.out) / (stem + ".curves.jsonl")).string(), curves);
    for (const RunResult& r : results) {
        char line[160];
        std::snprintf(line, sizeof(line),
                      "run %016llx cluster %3d stop %5lld cer %.4f -> %.4f (%+.4f)",
                      static_cast<unsigned long long>(r.run_seed), r.cluster_size,
                      static_cast<long long>(r.stop_iteration), r.baseline_cer,
                      r.finetuned_cer, r.reduction);
        say(line);
    }
    return 0;
}

struct EstimateStopArgs {
    std::string curves_file;
    std::string estimator = "X";
    double factor = 1.0;
    int window = 4;
    int64_t budget = 0;
};

int cmd_estimate_stop(const EstimateStopArgs& args) {
    const std::vector<FinetuneCurves> runs = load_curves(args.curves_file);
    if (runs.empty()) throw ProtocolError("no curves in '" + args.curves_file + "'");
    const StopStrategy strategy = stop_strategy_from_name(args.estimator);
    const int64_t budget =
        args.budget > 0 ? args.budget : runs.front().eval_iterations.back();

    EstimatorSpec spec{strategy, args.factor, args.window};
    EstimatorInputs inputs;
    inputs.budget = budget;

    std::vector<Curve> fold_losses;
    Curve cer_curve;
    std::vector<std::vector<Curve>> writer_losses;
    if (strategy == StopStrategy::OracleCer) {
        cer_curve = runs.front().cer_curve();
        inputs.test_cer = &cer_curve;
    } else if (strategy == StopStrategy::CrossWriter) {
        std::map<int, std::vector<Curve>> grouped;
        for (const FinetuneCurves& run : runs) {
            grouped[run.writer_id].push_back(run.loss_curve());
        }
        for (auto& [writer, curves] : grouped) writer_losses.push_back(std::move(curves));
        inputs.writer_run_losses = &writer_losses;
    } else {
        for (const FinetuneCurves& run : runs) fold_losses.push_back(run.loss_curve());
        inputs.fold_losses = &fold_losses;
    }
    std::printf("%lld\n", static_cast<long long>(estimate_stop(spec, inputs)));
    return 0;
}

struct EvaluateArgs {
    std::string checkpoint;
    std::string data;
    int writer = -1;
    std::string split = "test";
    int limit = 0;
    int batch = 32;
};

int cmd_evaluate(const EvaluateArgs& args) {
    const Dataset data(args.data);
    const Recognizer model = restore_model(read_checkpoint(args.checkpoint));
    const Split split = split_from_name(args.split);
    std::vector<size_t> pool =
        args.writer >= 0 ? data.indices(args.writer, split) : data.indices(split);
    if (pool.empty()) throw ProtocolError("evaluate: no lines selected");
    if (args.limit > 0 && pool.size() > static_cast<size_t>(args.limit)) {
        pool.resize(static_cast<size_t>(args.limit));
    }
    const EvalResult result = evaluate_model(model, data, pool, args.batch);
    nlohmann::json out;
    out["lines"] = pool.size();
    out["loss"] = result.loss;
    out["cer"] = result.cer;
    say(out.dump());
    return 0;
}

struct ReportArgs {
    std::string in;
    std::string out;
};

int cmd_report(const ReportArgs& args) {
    const std::vector<RunResult> results = load_results_dir(args.in);
    const ReportPaths paths = write_report(results, args.out);
    std::printf("%s", reduction_table(results).c_str());
    say("table: " + paths.table);
    for (const std::string& plot : paths.plots) say("plot: " + plot);
    return 0;
}

struct DeskArgs {
    std::string config_file;
    std::string out;
    uint64_t seed = 0;
    int workers = 0;
    bool tiny = false;
};

int cmd_desk_experiment(const DeskArgs& args) {
    KeyValueConfig kv;
    if (!args.config_file.empty()) kv = KeyValueConfig::parse_file(args.config_file);
    DeskExperimentConfig config = DeskExperimentConfig::from_config(kv);
    if (!args.out.empty()) config.work_dir = args.out;
    if (args.seed != 0) config.seed = args.seed;
    if (args.workers != 0) config.workers = args.workers;
    if (args.tiny) config = config.tiny_variant();

    const DeskOutcome outcome = run_desk_experiment(config, &say);
    char line[160];
    if (outcome.checked_reduction_64) {
        std::snprintf(line, sizeof(line), "mean reduction at 64 (%s): %+.4f [%s]",
                      config.aug_combo.c_str(), outcome.aug_mean_64,
                      outcome.pass_reduction_64 ? "ok" : "weak");
        say(line);
    }
    if (outcome.checked_monotone) {
        std::snprintf(line, sizeof(line), "mean reduction 16: %+.4f vs 256: %+.4f [%s]",
                      outcome.aug_mean_16, outcome.aug_mean_256,
                      outcome.pass_monotone ? "ok" : "inverted");
        say(line);
    }
    if (outcome.checked_aug_vs_none) {
        std::snprintf(line, sizeof(line), "aug %+.4f vs NONE %+.4f at 64 [%s]",
                      outcome.aug_mean_64, outcome.none_mean_64,
                      outcome.pass_aug_vs_none ? "ok" : "inverted");
        say(line);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Domain adaptation toolkit for CTC text-line recognizers"};
    app.require_subcommand(1);

    GenDataArgs gen;
    CLI::App* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic line dataset");
    gen_cmd->add_option("--out", gen.out, "Output directory")->required();
    gen_cmd->add_option("--seed", gen.seed, "Root seed");
    gen_cmd->add_option("--symbols", gen.symbols, "Alphabet symbols");
    gen_cmd->add_option("--writers", gen.writers, "Base writer count");
    gen_cmd->add_option("--lines-per-writer", gen.lines_per_writer, "Lines per base writer");
    gen_cmd->add_option("--target-writers", gen.target_writers, "Held-out writer count");
    gen_cmd->add_option("--target-lines", gen.target_lines, "Lines per held-out writer");
    gen_cmd->add_option("--min-chars", gen.min_chars, "Shortest phrase length");
    gen_cmd->add_option("--max-chars", gen.max_chars, "Longest phrase length");
    gen_cmd->add_option("--base-divergence", gen.base_divergence, "Base writer divergence");
    gen_cmd->add_option("--divergence", gen.divergence, "Held-out writer divergence");

    TrainBaseArgs tb;
    CLI::App* tb_cmd = app.add_subcommand("train-base", "Train a base model from scratch");
    tb_cmd->add_option("--config", tb.config_file, "Key-value config file");
    CLI::Option* tb_data = tb_cmd->add_option("--data", tb.data, "Dataset directory");
    CLI::Option* tb_out = tb_cmd->add_option("--out", tb.out, "Output directory");
    CLI::Option* tb_preset = tb_cmd->add_option("--preset", tb.preset, "Model preset");
    CLI::Option* tb_iters = tb_cmd->add_option("--iters", tb.iters, "Training iterations");
    CLI::Option* tb_batch = tb_cmd->add_option("--batch", tb.batch, "Batch size");
    CLI::Option* tb_aug = tb_cmd->add_option("--aug", tb.aug, "Augmentation combo");
    CLI::Option* tb_seed = tb_cmd->add_option("--seed", tb.seed, "Root seed");
    CLI::Option* tb_eval = tb_cmd->add_option("--eval-limit", tb.eval_limit,
                                              "Eval pool cap");

    FinetuneArgs ft;
    CLI::App* ft_cmd = app.add_subcommand("finetune", "Adapt a checkpoint to one writer");
    ft_cmd->add_option("--checkpoint", ft.checkpoint, "Base checkpoint")->required();
    ft_cmd->add_option("--data", ft.data, "Dataset directory")->required();
    ft_cmd->add_option("--writer", ft.writer, "Target writer id")->required();
    ft_cmd->add_option("--out", ft.out, "Output directory")->required();
    ft_cmd->add_option("--clusters", ft.clusters, "Cluster sizes")->delimiter(',');
    ft_cmd->add_option("--budgets", ft.budgets, "Budget per cluster")->delimiter(',');
    ft_cmd->add_option("--runs", ft.runs, "Runs (independent re-splits)");
    ft_cmd->add_option("--aug", ft.aug, "Augmentation combo");
    ft_cmd->add_option("--estimator", ft.estimator, "Stop strategy L|O|A|M|X|S");
    ft_cmd->add_option("--factor", ft.factor, "Estimator factor R");
    ft_cmd->add_option("--window", ft.window, "Smoothing window");
    ft_cmd->add_option("--ratio-preset", ft.ratio_preset, "Static ratio table name");
    ft_cmd->add_option("--seed", ft.seed, "Root seed");
    ft_cmd->add_option("--batch", ft.batch, "Finetuning batch cap");
    ft_cmd->add_option("--eval-limit", ft.eval_limit, "Eval pool cap");
    ft_cmd->add_option("--workers", ft.workers, "Worker threads (0 = auto)");

    EstimateStopArgs es;
    CLI::App* es_cmd = app.add_subcommand("estimate-stop",
                                          "Pick a stopping iteration from saved curves");
    es_cmd->add_option("--curves", es.curves_file, "Curves file")->required();
    es_cmd->add_option("--estimator", es.estimator, "Stop strategy L|O|A|M|X|S");
    es_cmd->add_option("--factor", es.factor, "Estimator factor R");
    es_cmd->add_option("--window", es.window, "Smoothing window");
    es_cmd->add_option("--budget", es.budget, "Iteration budget (0 = from curves)");

    EvaluateArgs ev;
    CLI::App* ev_cmd = app.add_subcommand("evaluate", "Evaluate a checkpoint on a dataset");
    ev_cmd->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
    ev_cmd->add_option("--data", ev.data, "Dataset directory")->required();
    ev_cmd->add_option("--writer", ev.writer, "Writer id (-1 = whole split)");
    ev_cmd->add_option("--split", ev.split, "train|test|adaptation");
    ev_cmd->add_option("--limit", ev.limit, "Line cap (0 = all)");
    ev_cmd->add_option("--batch", ev.batch, "Eval batch size");

    ReportArgs rp;
    CLI::App* rp_cmd = app.add_subcommand("report", "Aggregate results into tables and plots");
    rp_cmd->add_option("--in", rp.in, "Directory with *.results.json")->required();
    rp_cmd->add_option("--out", rp.out, "Report output directory")->required();

    DeskArgs desk;
    CLI::App* desk_cmd = app.add_subcommand("desk-experiment",
                                            "Full desk-scale adaptation experiment");
    desk_cmd->add_option("--config", desk.config_file, "Key-value config file");
    desk_cmd->add_option("--out", desk.out, "Work directory");
    desk_cmd->add_option("--seed", desk.seed, "Root seed");
    desk_cmd->add_option("--workers", desk.workers, "Worker threads (0 = auto)");
    desk_cmd->add_flag("--tiny", desk.tiny, "Reduced-footprint variant");

    try {
        app.parse(argc, argv);

        if (gen_cmd->parsed()) return cmd_gen_data(gen);
        if (tb_cmd->parsed()) {
            KeyValueConfig kv;
            if (!tb.config_file.empty()) kv = KeyValueConfig::parse_file(tb.config_file);
            TrainBaseArgs resolved = tb;
            resolved.data = resolve(tb_data, tb.data, kv, "data", std::string());
            resolved.out = resolve(tb_out, tb.out, kv, "out", std::string());
            resolved.preset = resolve(tb_preset, tb.preset, kv, "preset", tb.preset);
            resolved.iters = resolve(tb_iters, tb.iters, kv, "iters", tb.iters);
            resolved.batch = resolve(tb_batch, tb.batch, kv, "batch", tb.batch);
            resolved.aug = resolve(tb_aug, tb.aug, kv, "aug", tb.aug);
            resolved.seed = resolve(tb_seed, tb.seed, kv, "seed", tb.seed);
            resolved.eval_limit =
                resolve(tb_eval, tb.eval_limit, kv, "eval_limit", tb.eval_limit);
            if (resolved.data.empty() || resolved.out.empty()) {
                throw CLI::RequiredError("--data and --out (flag or config file)");
            }
            return cmd_train_base(resolved);
        }
        if (ft_cmd->parsed()) return cmd_finetune(ft);
        if (es_cmd->parsed()) return cmd_estimate_stop(es);
        if (ev_cmd->parsed()) return cmd_evaluate(ev);
        if (rp_cmd->parsed()) return cmd_report(rp);
        if (desk_cmd->parsed()) return cmd_desk_experiment(desk);
        return 2;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
