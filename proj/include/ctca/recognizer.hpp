#pragma once

#include <string>
#include <vector>

#include "ctca/adam.hpp"
#include "ctca/ctc.hpp"
#include "ctca/ops.hpp"
#include "ctca/tensor.hpp"

namespace ctca {

struct ConvBlockSpec {
    int channels = 0;
    int layers = 2;
    int pool_h = 1;  // 1 = no pooling after the block
    int pool_w = 1;
};

struct RecognizerConfig {
    std::string name = "custom";
    int input_channels = 1;
    int input_height = 40;
    std::vector<ConvBlockSpec> conv_blocks;
    int conv_kernel = 3;       // square kernels, same padding, all layers but the last
    int final_kernel_h = 5;    // last conv layer: this x conv_kernel, valid height
    int recurrent_hidden = 256;
    std::vector<double> branch_scales = {1.0, 0.5, 0.25};
    int final_conv1d_kernel = 3;
    std::string symbols = "abcdefghijklmnopqrstuvwxyz";

    std::string canonical_json() const;
    static RecognizerConfig from_json_text(const std::string& text);
};

RecognizerConfig paper_preset(const std::string& symbols);
RecognizerConfig desk_preset(const std::string& symbols);
RecognizerConfig preset_by_name(const std::string& name, const std::string& symbols);

class Recognizer {
public:
    Recognizer(RecognizerConfig config, uint64_t seed);

    const RecognizerConfig& config() const { return config_; }
    const Alphabet& alphabet() const { return alphabet_; }
    int num_classes() const { return alphabet_.num_classes(); }
    int width_subsample() const { return width_subsample_; }
    // Required divisor of padded input widths.
    int width_multiple() const { return width_multiple_; }

    std::vector<Tensor>& params() { return params_; }
    const std::vector<Tensor>& params() const { return params_; }
    const std::vector<std::string>& param_names() const { return names_; }
    int64_t param_count() const;

    // Registers parameters on the tape (tracked or frozen) in declaration
    // order; forward consumes the returned handle.
    struct Binding {
        std::vector<Var> vars;
    };
    Binding bind(Tape& t, bool track) const;

    // images [N,C,40,W] with W a multiple of width_multiple() ->
    // log_probs [T,N,K], T = W / width_subsample().
    Var forward(Tape& t, const Binding& binding, Var images) const;

    // Inference convenience: no tracking, value out.
    Tensor infer(const Tensor& images) const;

    // Valid (non-padding) output frames for a sample of the given pixel
    // width inside a batch padded to padded_width.
    int64_t frame_count(int64_t sample_width, int64_t padded_width) const;

private:
    void validate_and_index();

    RecognizerConfig config_;
    Alphabet alphabet_;
    int width_subsample_ = 1;
    int width_multiple_ = 1;
    std::vector<std::string> names_;
    std::vector<Tensor> params_;
};

struct Checkpoint {
    RecognizerConfig config;
    std::vector<Tensor> params;
    int64_t iteration = 0;
    uint64_t train_seed = 0;
    bool has_adam = false;
    int64_t adam_step = 0;
    std::vector<Tensor> adam_m, adam_v;
};

void save_checkpoint(const std::string& path, const Recognizer& model, int64_t iteration,
                     uint64_t train_seed, const AdamState* adam);
Checkpoint read_checkpoint(const std::string& path);

// Builds the model from the stored config and restores parameters; optional
// Adam state restored when present and wanted.
Recognizer restore_model(const Checkpoint& ckpt);
// Restores into an existing model; config must match exactly.
void restore_into(const Checkpoint& ckpt, Recognizer& model, AdamState* adam);

}  // namespace ctca
