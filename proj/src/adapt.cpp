#include "ctca/adapt.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "ctca/common.hpp"
#include "ctca/metrics.hpp"

namespace ctca {

using nlohmann::json;

void ClusterProtocol::validate() const {
    if (cluster_sizes.empty() || cluster_sizes.size() != budgets.size()) {
        throw ConfigError("protocol: cluster sizes and budgets must align, got " +
                          std::to_string(cluster_sizes.size()) + " sizes and " +
                          std::to_string(budgets.size()) + " budgets");
    }
    for (size_t i = 0; i < cluster_sizes.size(); ++i) {
        if (cluster_sizes[i] < 1) throw ConfigError("protocol: cluster sizes must be positive");
        if (budgets[i] < kEvalEvery) {
            throw ConfigError("protocol: budget " + std::to_string(budgets[i]) +
                              " for cluster " + std::to_string(cluster_sizes[i]) +
                              " is below one evaluation interval");
        }
        if (i > 0 && cluster_sizes[i] <= cluster_sizes[i - 1]) {
            throw ConfigError("protocol: cluster sizes must be strictly increasing");
        }
    }
    if (runs_per_writer < 1) throw ConfigError("protocol: runs_per_writer must be >= 1");
    if (folds < 2) throw ConfigError("protocol: folds must be >= 2");
    if (batch_cap < 1) throw ConfigError("protocol: batch_cap must be >= 1");
    if (!(finetune_lr > 0.0)) throw ConfigError("protocol: finetune_lr must be positive");
}

namespace {

BatchOptions model_batch_options(const Recognizer& model, const AugmentationCombo* combo) {
    BatchOptions options;
    options.width_multiple = model.width_multiple();
    options.channels = model.config().input_channels;
    options.combo = (combo != nullptr && !combo->parts.empty()) ? combo : nullptr;
    return options;
}

// A sample survives width subsampling iff the collapsed sequence still has
// room for the blank-interleaved target.
bool is_feasible(const Recognizer& model, int width, const std::vector<int>& target) {
    const int64_t frames =
        (static_cast<int64_t>(width) + model.width_subsample() - 1) / model.width_subsample();
    return frames >= ctc_min_frames(target);
}

} // namespace

EvalResult evaluate_model(const Recognizer& model, const Dataset& data,
                          const std::vector<size_t>& eval_pool, int eval_batch) {
    if (eval_pool.empty()) throw ConfigError("evaluate_model: empty evaluation pool");
    if (eval_batch < 1) throw ConfigError("evaluate_model: eval_batch must be >= 1");
    const BatchOptions options = model_batch_options(model, nullptr);

    double loss_sum = 0.0;
    int64_t loss_count = 0;
    int64_t dist_sum = 0;
    int64_t ref_len_sum = 0;
    for (size_t begin = 0; begin < eval_pool.size(); begin += static_cast<size_t>(eval_batch)) {
        const size_t end = std::min(eval_pool.size(), begin + static_cast<size_t>(eval_batch));
        const std::vector<size_t> chunk(eval_pool.begin() + begin, eval_pool.begin() + end);
        const Batch batch = data.assemble_batch(chunk, options, nullptr);
        const Tensor log_probs = model.infer(batch.images);
        const int64_t n = batch.images.shape[0];
        const int64_t classes = log_probs.shape[2];
        for (int64_t s = 0; s < n; ++s) {
            const int64_t frames = model.frame_count(batch.widths[s], batch.images.shape[3]);
            Tensor sample({frames, classes});
            for (int64_t t = 0; t < frames; ++t) {
                for (int64_t k = 0; k < classes; ++k) {
                    sample.data[t * classes + k] = log_probs.data[(t * n + s) * classes + k];
                }
            }
            if (is_feasible(model, static_cast<int>(batch.widths[s]), batch.targets[s])) {
                loss_sum += ctc_loss_grad(sample, batch.targets[s]).loss;
                loss_count += 1;
            }
            const std::string hyp = model.alphabet().decode(best_path_decode(sample));
            dist_sum += edit_distance(batch.texts[s], hyp);
            ref_len_sum += static_cast<int64_t>(batch.texts[s].size());
        }
    }
    EvalResult result;
    result.loss = loss_count > 0 ? loss_sum / static_cast<double>(loss_count) : 0.0;
    result.cer = static_cast<double>(dist_sum) /
                 static_cast<double>(std::max<int64_t>(1, ref_len_sum));
    return result;
}

TrainResult train(Recognizer& model, AdamState& adam, const Dataset& data,
                  const std::vector<size_t>& train_pool,
                  const std::vector<size_t>& eval_pool, const TrainOptions& options) {
    if (options.iterations < 0) throw ConfigError("train: negative iteration count");
    if (options.batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    TrainResult result;
    if (options.iterations == 0) return result;
    if (train_pool.empty()) throw ConfigError("train: empty training pool");
    if (eval_pool.empty() && options.iterations >= kEvalEvery) {
        throw ConfigError("train: empty evaluation pool");
    }
    if (model.config().symbols != data.manifest().spec.symbols) {
        throw ConfigError("train: model alphabet '" + model.config().symbols +
                          "' does not match dataset alphabet '" +
                          data.manifest().spec.symbols + "'");
    }

    const BatchOptions batch_options = model_batch_options(model, options.combo);
    RngStream root(options.seed);
    RngStream batch_rng = root.substream(0);
    const RngStream aug_root = root.substream(1);

    double last_train_loss = std::numeric_limits<double>::quiet_NaN();
    for (int64_t iter = 0; iter < options.iterations; ++iter) {
        std::vector<size_t> drawn;
        drawn.reserve(static_cast<size_t>(options.batch_size));
        for (int b = 0; b < options.batch_size; ++b) {
            drawn.push_back(
                train_pool[static_cast<size_t>(batch_rng.uniform_int(
                    0, static_cast<int64_t>(train_pool.size()) - 1))]);
        }
        std::vector<size_t> kept;
        kept.reserve(drawn.size());
        for (size_t idx : drawn) {
            const std::vector<int> target =
                data.alphabet().encode(data.manifest().records[idx].text);
            if (is_feasible(model, data.image(idx).width, target)) {
                kept.push_back(idx);
            } else {
                result.skipped_samples += 1;
            }
        }
        if (!kept.empty()) {
            RngStream aug_rng = aug_root.substream(static_cast<uint64_t>(iter));
            const Batch batch = data.assemble_batch(kept, batch_options, &aug_rng);
            std::vector<int64_t> frames(kept.size());
            for (size_t s = 0; s < kept.size(); ++s) {
                frames[s] = model.frame_count(batch.widths[s], batch.images.shape[3]);
            }
            Tape tape;
            const Recognizer::Binding binding = model.bind(tape, true);
            const Var images = tape.push(batch.images, false, nullptr);
            const Var log_probs = model.forward(tape, binding, images);
            const Var loss = ctc_loss_mean(tape, log_probs, batch.targets, frames);
            last_train_loss = tape.value(loss).data[0];
            tape.backward(loss);
            std::vector<Tensor> grads;
            grads.reserve(binding.vars.size());
            for (const Var v : binding.vars) grads.push_back(tape.grad(v));
            adam.step(model.params(), grads, options.schedule.lr_at(iter));
        }
        const int64_t done = iter + 1;
        if (done % kEvalEvery == 0) {
            const EvalResult eval = evaluate_model(model, data, eval_pool, options.eval_batch);
            result.curves.eval_iterations.push_back(done);
            result.curves.train_loss.push_back(last_train_loss);
            result.curves.test_loss.push_back(eval.loss);
            result.curves.test_cer.push_back(eval.cer);
        }
    }
    result.final_train_loss = last_train_loss;
    return result;
}

namespace {

struct RunSplit {
    std::vector<size_t> test_lines;       // 256
    std::vector<size_t> adaptation_order; // 256, cluster c = first c entries
};

RunSplit split_run_lines(const Dataset& data, int writer_id, uint64_t run_seed) {
    std::vector<size_t> pool = data.indices(writer_id, Split::test);
    const std::vector<size_t> adapt = data.indices(writer_id, Split::adaptation);
    pool.insert(pool.end(), adapt.begin(), adapt.end());
    if (pool.size() < 512) {
        throw ProtocolError("writer " + std::to_string(writer_id) + " has only " +
                            std::to_string(pool.size()) +
                            " target lines; the protocol draws 512");
    }
    std::sort(pool.begin(), pool.end());
    RngStream rng(run_seed, 0x52554e);
    const std::vector<size_t> perm = rng.permutation(pool.size());
    RunSplit split;
    for (size_t i = 0; i < 256; ++i) split.test_lines.push_back(pool[perm[i]]);
    for (size_t i = 256; i < 512; ++i) split.adaptation_order.push_back(pool[perm[i]]);
    return split;
}

} // namespace

std::map<int, std::vector<size_t>> run_clusters(const Dataset& data, int writer_id,
                                                const ClusterProtocol& protocol,
                                                uint64_t run_seed) {
    protocol.validate();
    const RunSplit split = split_run_lines(data, writer_id, run_seed);
    std::map<int, std::vector<size_t>> clusters;
    for (int size : protocol.cluster_sizes) {
        if (static_cast<size_t>(size) > split.adaptation_order.size()) {
            throw ProtocolError("cluster size " + std::to_string(size) +
                                " exceeds the 256 adaptation lines");
        }
        clusters[size] = std::vector<size_t>(split.adaptation_order.begin(),
                                             split.adaptation_order.begin() + size);
    }
    return clusters;
}

std::vector<size_t> run_test_lines(const Dataset& data, int writer_id, uint64_t run_seed) {
    return split_run_lines(data, writer_id, run_seed).test_lines;
}

std::map<int, FinetuneCurves> finetune_run(const Checkpoint& base, const Dataset& data,
                                           int writer_id, const ClusterProtocol& protocol,
                                           const AugmentationCombo& combo,
                                           uint64_t run_seed) {
    protocol.validate();
    const RunSplit split = split_run_lines(data, writer_id, run_seed);
    std::vector<size_t> eval_pool = split.test_lines;
    if (protocol.eval_limit > 0 &&
        eval_pool.size() > static_cast<size_t>(protocol.eval_limit)) {
        eval_pool.resize(static_cast<size_t>(protocol.eval_limit));
    }

    std::map<int, FinetuneCurves> by_cluster;
    for (size_t ci = 0; ci < protocol.cluster_sizes.size(); ++ci) {
        const int cluster = protocol.cluster_sizes[ci];
        const std::vector<size_t> lines(split.adaptation_order.begin(),
                                        split.adaptation_order.begin() + cluster);
        Recognizer model = restore_model(base);
        AdamState adam(model.params());

        TrainOptions options;
        options.iterations = protocol.budgets[ci];
        options.batch_size = std::min(protocol.batch_cap, cluster);
        options.seed = mix_seed(run_seed, static_cast<uint64_t>(cluster));
        options.schedule = WarmupSchedule::constant(protocol.finetune_lr);
        options.combo = &combo;

        TrainResult trained = train(model, adam, data, lines, eval_pool, options);
        trained.curves.writer_id = writer_id;
        trained.curves.cluster_size = cluster;
        trained.curves.combo = combo.name;
        trained.curves.run_seed = run_seed;
        by_cluster.emplace(cluster, std::move(trained.curves));
    }
    return by_cluster;
}

std::vector<Curve> kfold_curves(const Checkpoint& base, const Dataset& data,
                                const std::vector<size_t>& adaptation_lines,
                                const ClusterProtocol& protocol, int64_t budget,
                                const AugmentationCombo& combo, uint64_t seed) {
    protocol.validate();
    const size_t n = adaptation_lines.size();
    if (n < 16) {
        throw ProtocolError(
            "cross-validation refused for " + std::to_string(n) +
            " lines: adaptation sets below 16 lines are too small to give reliable "
            "fold estimates");
    }
    const size_t folds = static_cast<size_t>(protocol.folds);
    if (n % folds != 0) {
        throw ConfigError("kfold_curves: " + std::to_string(folds) +
                          " folds must divide the cluster size " + std::to_string(n));
    }
    RngStream rng(seed, 0x4b464f4c);
    const std::vector<size_t> perm = rng.permutation(n);
    const size_t fold_size = n / folds;

    std::vector<Curve> curves;
    curves.reserve(folds);
    for (size_t f = 0; f < folds; ++f) {
        std::vector<size_t> held_out, train_lines;
        for (size_t i = 0; i < n; ++i) {
            const size_t idx = adaptation_lines[perm[i]];
            if (i / fold_size == f) {
                held_out.push_back(idx);
            } else {
                train_lines.push_back(idx);
            }
        }
        Recognizer model = restore_model(base);
        AdamState adam(model.params());
        TrainOptions options;
        options.iterations = budget;
        options.batch_size = std::min<int>(protocol.batch_cap,
                                           static_cast<int>(train_lines.size()));
        options.seed = mix_seed(seed, f + 1);
        options.schedule = WarmupSchedule::constant(protocol.finetune_lr);
        options.combo = &combo;
        const TrainResult trained = train(model, adam, data, train_lines, held_out, options);
        curves.push_back(trained.curves.loss_curve());
    }
    return curves;
}

void save_curves(const std::string& path, const std::vector<FinetuneCurves>& runs) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("save_curves: cannot open '" + path + "' for writing");
    json header;
    header["format"] = "ctc-adapt-curves";
    header["version"] = 1;
    header["runs"] = runs.size();
    out << header.dump() << "\n";
    for (const FinetuneCurves& run : runs) {
        const size_t points = run.eval_iterations.size();
        if (run.train_loss.size() != points || run.test_loss.size() != points ||
            run.test_cer.size() != points) {
            throw ShapeError("save_curves: run series lengths disagree");
        }
        json meta;
        meta["writer"] = run.writer_id;
        meta["cluster"] = run.cluster_size;
        meta["combo"] = run.combo;
        meta["run_seed"] = run.run_seed;
        meta["points"] = points;
        out << meta.dump() << "\n";
        for (size_t i = 0; i < points; ++i) {
            json point;
            point["iteration"] = run.eval_iterations[i];
            point["train_loss"] = run.train_loss[i];
            point["test_loss"] = run.test_loss[i];
            point["test_cer"] = run.test_cer[i];
            out << point.dump() << "\n";
        }
    }
    if (!out) throw IoError("save_curves: write to '" + path + "' failed");
}

namespace {

json parse_line(std::istream& in, const std::string& path, const char* what) {
    std::string line;
    if (!std::getline(in, line)) {
        throw IoError("load_curves: '" + path + "' ended while expecting " + what);
    }
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
        throw IoError("load_curves: malformed " + std::string(what) + " in '" + path + "'");
    }
    return j;
}

} // namespace

std::vector<FinetuneCurves> load_curves(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_curves: cannot open '" + path + "'");
    const json header = parse_line(in, path, "header");
    if (header.value("format", "") != "ctc-adapt-curves" || header.value("version", 0) != 1) {
        throw IoError("load_curves: '" + path + "' is not a version-1 curves file");
    }
    const size_t runs = header.value("runs", size_t{0});
    std::vector<FinetuneCurves> out;
    out.reserve(runs);
    for (size_t r = 0; r < runs; ++r) {
        const json meta = parse_line(in, path, "run metadata");
        FinetuneCurves run;
        run.writer_id = meta.at("writer").get<int>();
        run.cluster_size = meta.at("cluster").get<int>();
        run.combo = meta.at("combo").get<std::string>();
        run.run_seed = meta.at("run_seed").get<uint64_t>();
        const size_t points = meta.at("points").get<size_t>();
        for (size_t i = 0; i < points; ++i) {
            const json point = parse_line(in, path, "curve point");
            run.eval_iterations.push_back(point.at("iteration").get<int64_t>());
            run.train_loss.push_back(point.at("train_loss").get<double>());
            run.test_loss.push_back(point.at("test_loss").get<double>());
            run.test_cer.push_back(point.at("test_cer").get<double>());
        }
        out.push_back(std::move(run));
    }
    return out;
}

int resolve_worker_count(int requested) {
    if (const char* env = std::getenv("CTC_ADAPT_WORKERS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || v < 1) {
            throw ConfigError("CTC_ADAPT_WORKERS must be a positive integer, got '" +
                              std::string(env) + "'");
        }
        return static_cast<int>(v);
    }
    if (requested >= 1) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

void run_jobs(std::vector<std::function<void()>> jobs, int workers) {
    if (workers < 1) throw ConfigError("run_jobs: worker count must be >= 1");
    if (workers == 1 || jobs.size() <= 1) {
        for (auto& job : jobs) job();
        return;
    }
    std::atomic<size_t> next{0};
    std::exception_ptr first_error = nullptr;
    std::mutex error_mutex;
    auto worker = [&]() {
        while (true) {
            const size_t i = next.fetch_add(1);
            if (i >= jobs.size()) return;
            try {
                jobs[i]();
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> threads;
    const int spawn = std::min<int>(workers, static_cast<int>(jobs.size()));
    threads.reserve(static_cast<size_t>(spawn));
    for (int i = 0; i < spawn; ++i) threads.emplace_back(worker);
    for (std::thread& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace ctca
