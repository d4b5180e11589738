#pragma once

#include <string>
#include <vector>

#include "ctca/tensor.hpp"

namespace ctca {

// Character inventory of a recognizer. Class 0 is always the CTC blank and is
// not a member of symbols; class i >= 1 maps to symbols[i-1].
class Alphabet {
public:
    explicit Alphabet(std::string symbols);

    int num_classes() const { return static_cast<int>(symbols_.size()) + 1; }
    static constexpr int blank_index = 0;
    const std::string& symbols() const { return symbols_; }

    char symbol(int class_id) const;
    int class_of(char c) const;  // throws ConfigError for unknown characters

    std::vector<int> encode(const std::string& text) const;
    std::string decode(const std::vector<int>& ids) const;

private:
    std::string symbols_;
    std::vector<int> lookup_;  // byte -> class id, -1 if absent
};

struct CtcResult {
    double loss = 0.0;
    Tensor grad;  // [T,K], d loss / d log_probs
};

// Exact CTC loss and gradient for one sequence, log-space forward-backward
// over the blank-interleaved extended target. log_probs is [T,K] with rows
// that must be normalized log distributions (checked to 1e-6 unless
// check_normalization is false, which finite-difference tests need).
// Throws InfeasibleTargetError when T is too short for the target.
CtcResult ctc_loss_grad(const Tensor& log_probs, const std::vector<int>& target,
                        bool check_normalization = true);

// Minimum number of frames able to emit the target: |target| plus one blank
// between each adjacent repeated pair.
int64_t ctc_min_frames(const std::vector<int>& target);

// Alignment-enumeration oracle: sums the probability of every length-T class
// string collapsing to the target. Refuses K^T > 1e7. Returns +infinity for
// zero total mass.
double ctc_brute_force(const Tensor& log_probs, const std::vector<int>& target);

// Per-frame argmax (ties to the lower class), collapse repeats, drop blanks.
std::vector<int> best_path_decode(const Tensor& log_probs);

// Tape op: mean CTC loss over a batch. log_probs is [T,N,K]; frame_counts[n]
// gives the valid prefix length for sequence n (padding frames beyond it are
// ignored). Skips nothing: every target must be feasible for its frame count.
Var ctc_loss_mean(Tape& t, Var log_probs, const std::vector<std::vector<int>>& targets,
                  const std::vector<int64_t>& frame_counts);

}  // namespace ctca
