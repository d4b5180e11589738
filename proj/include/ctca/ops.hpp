#pragma once

#include "ctca/tensor.hpp"

namespace ctca::ops {

// All operators record onto the tape when any input is tracked, and are
// differentiable w.r.t. every tracked input.

// input [N,C,H,W] (cross-correlation), weight [O,C,kh,kw], bias [O].
Var conv2d(Tape& t, Var input, Var weight, Var bias, int stride_h, int stride_w,
           int pad_h, int pad_w);

Var relu(Tape& t, Var x);

// Per-window max over [N,C,H,W]; gradient routes to the argmax, ties to the
// lowest flat index.
Var maxpool2d(Tape& t, Var x, int kh, int kw, int stride_h, int stride_w);

// [N,C,1,W] -> [W,N,C]; the CNN-to-RNN handoff.
Var collapse_height_to_seq(Tape& t, Var x);

// factor in {0.25, 0.5, 1, 2, 4}; downsample = adjacent-frame mean,
// upsample = frame repetition. Output length round(T*factor), >= 1.
Var resample_width(Tape& t, Var seq, double factor);

struct LstmDirVars {
    Var w_x;  // [F, 4H], gate order i|f|g|o
    Var w_h;  // [H, 4H]
    Var b;    // [4H]
};
struct BiLstmVars {
    LstmDirVars fw, bw;
};

// seq [T,N,F] -> [T,N,2H]; forward direction fills [0,H), backward [H,2H).
Var bilstm(Tape& t, Var seq, const BiLstmVars& p);

// seq [T,N,F], weight [K,F,kw] (kw odd), bias [K] -> [T,N,K], same padding
// over time.
Var conv1d_seq(Tape& t, Var seq, Var weight, Var bias);

// Numerically stable log-softmax over the last dimension.
Var log_softmax(Tape& t, Var x);

Var add(Tape& t, Var a, Var b);
Var mul(Tape& t, Var a, Var b);
Var scale(Tape& t, Var a, double c);
Var sum(Tape& t, Var x);
Var mean(Tape& t, Var x);

}  // namespace ctca::ops
