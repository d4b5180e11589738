#include "ctca/recognizer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "ctca/rng.hpp"

namespace ctca {

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'C', 'T', 'C', 'A'};
constexpr uint16_t kVersion = 1;

void init_glorot(Tensor& w, int64_t fan_in, int64_t fan_out, RngStream& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : w.data) v = rng.uniform(-limit, limit);
}

// --- little-endian scalar I/O ---

template <typename T>
void write_scalar(std::ostream& out, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    uint8_t bytes[sizeof(T)];
    uint64_t bits = 0;
    if constexpr (sizeof(T) == 8) {
        bits = std::bit_cast<uint64_t>(v);
    } else if constexpr (sizeof(T) == 4) {
        bits = std::bit_cast<uint32_t>(v);
    } else {
        bits = static_cast<uint64_t>(v);
    }
    for (size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<uint8_t>(bits >> (8 * i));
    out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T read_scalar(std::istream& in) {
    uint8_t bytes[sizeof(T)];
    in.read(reinterpret_cast<char*>(bytes), sizeof(T));
    if (!in) throw CheckpointError("checkpoint truncated while reading scalar");
    uint64_t bits = 0;
    for (size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<uint64_t>(bytes[i]) << (8 * i);
    if constexpr (sizeof(T) == 8) {
        return std::bit_cast<T>(bits);
    } else if constexpr (sizeof(T) == 4) {
        return std::bit_cast<T>(static_cast<uint32_t>(bits));
    } else {
        return static_cast<T>(bits);
    }
}

void write_string(std::ostream& out, const std::string& s) {
    write_scalar<uint64_t>(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
    const uint64_t n = read_scalar<uint64_t>(in);
    if (n > (1ULL << 30)) throw CheckpointError("checkpoint string length implausible");
    std::string s(n, '\0');
    in.read(s.data(), static_cast<std::streamsize>(n));
    if (!in) throw CheckpointError("checkpoint truncated while reading string");
    return s;
}

void write_tensor(std::ostream& out, const Tensor& t) {
    write_scalar<uint32_t>(out, static_cast<uint32_t>(t.ndim()));
    for (int64_t d : t.shape) write_scalar<int64_t>(out, d);
    for (double v : t.data) write_scalar<double>(out, v);
}

Tensor read_tensor(std::istream& in) {
    const uint32_t rank = read_scalar<uint32_t>(in);
    if (rank == 0 || rank > 8) throw CheckpointError("checkpoint tensor rank implausible");
    std::vector<int64_t> shape(rank);
    for (auto& d : shape) d = read_scalar<int64_t>(in);
    Tensor t(shape);
    for (double& v : t.data) v = read_scalar<double>(in);
    return t;
}

}  // namespace

std::string RecognizerConfig::canonical_json() const {
    json blocks = json::array();
    for (const ConvBlockSpec& b : conv_blocks) {
        blocks.push_back({b.channels, b.layers, b.pool_h, b.pool_w});
    }
    json j{{"name", name},
           {"input_channels", input_channels},
           {"input_height", input_height},
           {"conv_blocks", blocks},
           {"conv_kernel", conv_kernel},
           {"final_kernel_h", final_kernel_h},
           {"recurrent_hidden", recurrent_hidden},
           {"branch_scales", branch_scales},
           {"final_conv1d_kernel", final_conv1d_kernel},
           {"symbols", symbols}};
    return j.dump();
}

RecognizerConfig RecognizerConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw CheckpointError(std::string("config block is not valid JSON: ") + e.what());
    }
    RecognizerConfig c;
    c.name = j.at("name").get<std::string>();
    c.input_channels = j.at("input_channels").get<int>();
    c.input_height = j.at("input_height").get<int>();
    for (const auto& b : j.at("conv_blocks")) {
        c.conv_blocks.push_back(
            {b.at(0).get<int>(), b.at(1).get<int>(), b.at(2).get<int>(), b.at(3).get<int>()});
    }
    c.conv_kernel = j.at("conv_kernel").get<int>();
    c.final_kernel_h = j.at("final_kernel_h").get<int>();
    c.recurrent_hidden = j.at("recurrent_hidden").get<int>();
    c.branch_scales = j.at("branch_scales").get<std::vector<double>>();
    c.final_conv1d_kernel = j.at("final_conv1d_kernel").get<int>();
    c.symbols = j.at("symbols").get<std::string>();
    return c;
}

RecognizerConfig paper_preset(const std::string& symbols) {
    RecognizerConfig c;
    c.name = "paper";
    c.conv_blocks = {{64, 2, 2, 2}, {128, 2, 2, 2}, {256, 2, 2, 1}, {512, 2, 1, 1}};
    c.final_kernel_h = 5;  // 40 -> 20 -> 10 -> 5, collapsed by the last conv
    c.recurrent_hidden = 256;
    c.branch_scales = {1.0, 0.5, 0.25};
    c.symbols = symbols;
    return c;
}

RecognizerConfig desk_preset(const std::string& symbols) {
    RecognizerConfig c;
    c.name = "desk";
    c.conv_blocks = {{8, 2, 2, 2}, {16, 2, 1, 1}};
    c.final_kernel_h = 20;  // 40 -> 20, collapsed by the last conv
    c.recurrent_hidden = 32;
    c.branch_scales = {1.0, 0.5};
    c.symbols = symbols;
    return c;
}

RecognizerConfig preset_by_name(const std::string& name, const std::string& symbols) {
    if (name == "paper") return paper_preset(symbols);
    if (name == "desk") return desk_preset(symbols);
    throw ConfigError("unknown preset '" + name + "' (available: paper, desk)");
}

void Recognizer::validate_and_index() {
    const RecognizerConfig& c = config_;
    if (c.conv_blocks.empty()) throw ConfigError("recognizer: no convolutional blocks");
    if (c.input_channels != 1 && c.input_channels != 3) {
        throw ConfigError("recognizer: input_channels must be 1 or 3");
    }
    if (c.conv_kernel % 2 != 1) throw ConfigError("recognizer: conv kernel must be odd");
    if (c.final_conv1d_kernel % 2 != 1) {
        throw ConfigError("recognizer: output conv kernel must be odd");
    }
    if (c.branch_scales.empty()) throw ConfigError("recognizer: no branch scales");
    double min_scale = 1.0;
    for (double s : c.branch_scales) {
        if (s != 1.0 && s != 0.5 && s != 0.25) {
            throw ConfigError("recognizer: branch scale " + std::to_string(s) +
                              " not in {1, 0.5, 0.25}");
        }
        min_scale = std::min(min_scale, s);
        if (std::count(c.branch_scales.begin(), c.branch_scales.end(), s) != 1) {
            throw ConfigError("recognizer: duplicate branch scale");
        }
    }
    int h = c.input_height;
    width_subsample_ = 1;
    for (size_t b = 0; b < c.conv_blocks.size(); ++b) {
        const ConvBlockSpec& blk = c.conv_blocks[b];
        if (blk.channels < 1 || blk.layers < 1 || blk.pool_h < 1 || blk.pool_w < 1) {
            throw ConfigError("recognizer: malformed conv block " + std::to_string(b));
        }
        if (b + 1 == c.conv_blocks.size()) {
            h = h - c.final_kernel_h + 1;  // valid-height collapse on the last layer
        }
        if (blk.pool_h > 1) {
            if (h % blk.pool_h != 0) {
                throw ConfigError("recognizer: height " + std::to_string(h) +
                                  " not divisible by pool " + std::to_string(blk.pool_h) +
                                  " after block " + std::to_string(b));
            }
            h /= blk.pool_h;
        }
        width_subsample_ *= blk.pool_w;
    }
    if (h != 1) {
        throw ConfigError("recognizer: height collapses to " + std::to_string(h) +
                          ", expected 1; check final_kernel_h against the pooled height");
    }
    width_multiple_ =
        width_subsample_ * static_cast<int>(std::llround(1.0 / min_scale));
}

Recognizer::Recognizer(RecognizerConfig config, uint64_t seed)
    : config_(std::move(config)), alphabet_(config_.symbols) {
    validate_and_index();
    RngStream rng(seed);

    const int k = config_.conv_kernel;
    const int h4 = 4 * config_.recurrent_hidden;
    const int hid = config_.recurrent_hidden;

    auto add_param = [this](const std::string& name, Tensor t) {
        names_.push_back(name);
        params_.push_back(std::move(t));
    };
    auto add_lstm_dir = [&](const std::string& prefix, int64_t feat) {
        Tensor wx({feat, h4});
        init_glorot(wx, feat, h4, rng);
        add_param(prefix + "_wx", std::move(wx));
        Tensor wh({hid, h4});
        init_glorot(wh, hid, h4, rng);
        add_param(prefix + "_wh", std::move(wh));
        Tensor b = Tensor::zeros({h4});
        // Forget-gate bias 1.0 stabilizes early training.
        for (int i = hid; i < 2 * hid; ++i) b.data[static_cast<size_t>(i)] = 1.0;
        add_param(prefix + "_b", std::move(b));
    };

    int in_ch = config_.input_channels;
    for (size_t b = 0; b < config_.conv_blocks.size(); ++b) {
        const ConvBlockSpec& blk = config_.conv_blocks[b];
        for (int l = 0; l < blk.layers; ++l) {
            const bool last_layer = b + 1 == config_.conv_blocks.size() && l + 1 == blk.layers;
            const int kh = last_layer ? config_.final_kernel_h : k;
            Tensor w({blk.channels, in_ch, kh, k});
            init_glorot(w, static_cast<int64_t>(in_ch) * kh * k,
                        static_cast<int64_t>(blk.channels) * kh * k, rng);
            const std::string base =
                "conv" + std::to_string(b) + "_" + std::to_string(l);
            add_param(base + "_w", std::move(w));
            add_param(base + "_b", Tensor::zeros({blk.channels}));
            in_ch = blk.channels;
        }
    }
    const int64_t feat = in_ch;
    for (size_t s = 0; s < config_.branch_scales.size(); ++s) {
        const std::string bp = "branch" + std::to_string(s);
        add_lstm_dir(bp + "_l0_fw", feat);
        add_lstm_dir(bp + "_l0_bw", feat);
        add_lstm_dir(bp + "_l1_fw", 2 * hid);
        add_lstm_dir(bp + "_l1_bw", 2 * hid);
    }
    add_lstm_dir("final_fw", 2 * hid);
    add_lstm_dir("final_bw", 2 * hid);
    {
        const int classes = alphabet_.num_classes();
        Tensor w({classes, 2 * hid, config_.final_conv1d_kernel});
        init_glorot(w, static_cast<int64_t>(2 * hid) * config_.final_conv1d_kernel,
                    static_cast<int64_t>(classes) * config_.final_conv1d_kernel, rng);
        add_param("out_w", std::move(w));
        add_param("out_b", Tensor::zeros({classes}));
    }
}

int64_t Recognizer::param_count() const {
    int64_t n = 0;
    for (const Tensor& p : params_) n += p.numel();
    return n;
}

Recognizer::Binding Recognizer::bind(Tape& t, bool track) const {
    Binding binding;
    binding.vars.reserve(params_.size());
    for (const Tensor& p : params_) {
        binding.vars.push_back(track ? t.leaf(p) : t.constant(p));
    }
    return binding;
}

Var Recognizer::forward(Tape& t, const Binding& binding, Var images) const {
    const Tensor& in = t.value(images);
    if (in.ndim() != 4 || in.dim(1) != config_.input_channels ||
        in.dim(2) != config_.input_height) {
        throw ShapeError("recognizer: input must be [N," +
                         std::to_string(config_.input_channels) + "," +
                         std::to_string(config_.input_height) + ",W], got " + in.shape_str());
    }
    if (in.dim(3) % width_multiple_ != 0) {
        throw ShapeError("recognizer: width " + std::to_string(in.dim(3)) +
                         " must be padded to a multiple of " + std::to_string(width_multiple_));
    }
    if (binding.vars.size() != params_.size()) {
        throw ShapeError("recognizer: binding does not match parameter list");
    }

    size_t pi = 0;
    auto next = [&]() { return binding.vars[pi++]; };
    auto take_lstm = [&]() {
        ops::LstmDirVars d;
        d.w_x = next();
        d.w_h = next();
        d.b = next();
        return d;
    };

    Var x = images;
    const int pad_w = (config_.conv_kernel - 1) / 2;
    for (size_t b = 0; b < config_.conv_blocks.size(); ++b) {
        const ConvBlockSpec& blk = config_.conv_blocks[b];
        for (int l = 0; l < blk.layers; ++l) {
            const bool last_layer = b + 1 == config_.conv_blocks.size() && l + 1 == blk.layers;
            Var w = next();
            Var bias = next();
            x = ops::conv2d(t, x, w, bias, 1, 1, last_layer ? 0 : pad_w, pad_w);
            x = ops::relu(t, x);
        }
        if (blk.pool_h > 1 || blk.pool_w > 1) {
            x = ops::maxpool2d(t, x, blk.pool_h, blk.pool_w, blk.pool_h, blk.pool_w);
        }
    }
    Var seq = ops::collapse_height_to_seq(t, x);

    Var summed;
    for (size_t s = 0; s < config_.branch_scales.size(); ++s) {
        const double scale = config_.branch_scales[s];
        Var branch = ops::resample_width(t, seq, scale);
        ops::BiLstmVars l0{take_lstm(), take_lstm()};
        ops::BiLstmVars l1{take_lstm(), take_lstm()};
        branch = ops::bilstm(t, branch, l0);
        branch = ops::bilstm(t, branch, l1);
        branch = ops::resample_width(t, branch, 1.0 / scale);
        summed = summed.valid() ? ops::add(t, summed, branch) : branch;
    }
    ops::BiLstmVars final_lstm{take_lstm(), take_lstm()};
    Var out = ops::bilstm(t, summed, final_lstm);
    Var ow = next();
    Var ob = next();
    out = ops::conv1d_seq(t, out, ow, ob);
    return ops::log_softmax(t, out);
}

Tensor Recognizer::infer(const Tensor& images) const {
    Tape t;
    Binding binding = bind(t, false);
    Var images_v = t.constant(images);
    Var out = forward(t, binding, images_v);
    return t.value(out);
}

int64_t Recognizer::frame_count(int64_t sample_width, int64_t padded_width) const {
    const int64_t total = padded_width / width_subsample_;
    const int64_t used = (sample_width + width_subsample_ - 1) / width_subsample_;
    return std::clamp<int64_t>(used, 1, total);
}

void save_checkpoint(const std::string& path, const Recognizer& model, int64_t iteration,
                     uint64_t train_seed, const AdamState* adam) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("save_checkpoint: cannot open " + path);
    out.write(kMagic, 4);
    write_scalar<uint16_t>(out, kVersion);
    write_string(out, model.config().canonical_json());
    write_scalar<int64_t>(out, iteration);
    write_scalar<uint64_t>(out, train_seed);
    const auto& params = model.params();
    const auto& names = model.param_names();
    write_scalar<uint64_t>(out, params.size());
    for (size_t i = 0; i < params.size(); ++i) {
        write_string(out, names[i]);
        write_tensor(out, params[i]);
    }
    write_scalar<uint8_t>(out, adam ? 1 : 0);
    if (adam) {
        write_scalar<int64_t>(out, adam->step_count());
        for (size_t i = 0; i < params.size(); ++i) {
            write_tensor(out, adam->first_moments()[i]);
        }
        for (size_t i = 0; i < params.size(); ++i) {
            write_tensor(out, adam->second_moments()[i]);
        }
    }
    if (!out) throw IoError("save_checkpoint: write failed for " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("read_checkpoint: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw CheckpointError("read_checkpoint: bad magic in " + path);
    }
    const uint16_t version = read_scalar<uint16_t>(in);
    if (version != kVersion) {
        throw CheckpointError("read_checkpoint: unsupported version " +
                              std::to_string(version) + " in " + path);
    }
    Checkpoint ckpt;
    ckpt.config = RecognizerConfig::from_json_text(read_string(in));
    ckpt.iteration = read_scalar<int64_t>(in);
    ckpt.train_seed = read_scalar<uint64_t>(in);
    const uint64_t count = read_scalar<uint64_t>(in);
    if (count > 100000) throw CheckpointError("read_checkpoint: parameter count implausible");
    std::vector<std::string> names;
    for (uint64_t i = 0; i < count; ++i) {
        names.push_back(read_string(in));
        ckpt.params.push_back(read_tensor(in));
    }
    const uint8_t has_adam = read_scalar<uint8_t>(in);
    ckpt.has_adam = has_adam != 0;
    if (ckpt.has_adam) {
        ckpt.adam_step = read_scalar<int64_t>(in);
        for (uint64_t i = 0; i < count; ++i) ckpt.adam_m.push_back(read_tensor(in));
        for (uint64_t i = 0; i < count; ++i) ckpt.adam_v.push_back(read_tensor(in));
    }
    // Validate names against a freshly built model of this config.
    Recognizer probe(ckpt.config, 0);
    if (probe.param_names() != names) {
        throw CheckpointError("read_checkpoint: parameter names do not match the config in " +
                              path);
    }
    for (size_t i = 0; i < names.size(); ++i) {
        if (!probe.params()[i].same_shape(ckpt.params[i])) {
            throw CheckpointError("read_checkpoint: shape mismatch for " + names[i]);
        }
    }
    return ckpt;
}

Recognizer restore_model(const Checkpoint& ckpt) {
    Recognizer model(ckpt.config, 0);
    model.params() = ckpt.params;
    return model;
}

void restore_into(const Checkpoint& ckpt, Recognizer& model, AdamState* adam) {
    if (ckpt.config.canonical_json() != model.config().canonical_json()) {
        throw CheckpointError("checkpoint config does not match the model config");
    }
    model.params() = ckpt.params;
    if (adam) {
        if (!ckpt.has_adam) {
            throw CheckpointError("checkpoint carries no optimizer state");
        }
        adam->restore(ckpt.adam_step, ckpt.adam_m, ckpt.adam_v);
    }
}

}  // namespace ctca
