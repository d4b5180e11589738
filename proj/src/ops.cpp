#include "ctca/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>

namespace ctca::ops {

namespace {

double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// C[M][P] += A[M][K] * B[K][P], row-major contiguous.
void gemm_acc(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t p) {
    for (int64_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * p;
        for (int64_t j = 0; j < k; ++j) {
            const double av = arow[j];
            const double* brow = b + j * p;
            for (int64_t q = 0; q < p; ++q) crow[q] += av * brow[q];
        }
    }
}

// C[M][K] += A[M][P] * B^T with B [K][P]: C[i][j] += dot(A[i], B[j]).
void gemm_acc_bt(const double* a, const double* b, double* c, int64_t m, int64_t p, int64_t k) {
    for (int64_t i = 0; i < m; ++i) {
        const double* arow = a + i * p;
        double* crow = c + i * k;
        for (int64_t j = 0; j < k; ++j) {
            const double* brow = b + j * p;
            double acc = 0.0;
            for (int64_t q = 0; q < p; ++q) acc += arow[q] * brow[q];
            crow[j] += acc;
        }
    }
}

// C[K][P] += A^T * B with A [M][K], B [M][P].
void gemm_acc_at(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t p) {
    for (int64_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        const double* brow = b + i * p;
        for (int64_t j = 0; j < k; ++j) {
            const double av = arow[j];
            double* crow = c + j * p;
            for (int64_t q = 0; q < p; ++q) crow[q] += av * brow[q];
        }
    }
}

}  // namespace

Var conv2d(Tape& t, Var input, Var weight, Var bias, int stride_h, int stride_w,
           int pad_h, int pad_w) {
    const Tensor& in = t.value(input);
    const Tensor& w = t.value(weight);
    const Tensor& b = t.value(bias);
    if (in.ndim() != 4) throw ShapeError("conv2d: input must be [N,C,H,W], got " + in.shape_str());
    if (w.ndim() != 4) throw ShapeError("conv2d: weight must be [O,C,kh,kw], got " + w.shape_str());
    const int64_t n = in.dim(0), c = in.dim(1), h = in.dim(2), wd = in.dim(3);
    const int64_t o = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    if (w.dim(1) != c) {
        throw ShapeError("conv2d: weight channels " + std::to_string(w.dim(1)) +
                         " do not match input channels " + std::to_string(c));
    }
    if (b.ndim() != 1 || b.dim(0) != o) {
        throw ShapeError("conv2d: bias must be [" + std::to_string(o) + "], got " + b.shape_str());
    }
    if (stride_h < 1 || stride_w < 1) throw ShapeError("conv2d: stride must be >= 1");
    if (kh > h + 2 * pad_h || kw > wd + 2 * pad_w) {
        throw ShapeError("conv2d: kernel " + std::to_string(kh) + "x" + std::to_string(kw) +
                         " does not fit padded input " + std::to_string(h + 2 * pad_h) + "x" +
                         std::to_string(wd + 2 * pad_w));
    }
    const int64_t oh = (h + 2 * pad_h - kh) / stride_h + 1;
    const int64_t ow = (wd + 2 * pad_w - kw) / stride_w + 1;

    Tensor out({n, o, oh, ow});
    {
        const double* ip = in.data.data();
        const double* wp = w.data.data();
        double* op = out.data.data();
        for (int64_t ni = 0; ni < n; ++ni) {
            for (int64_t oi = 0; oi < o; ++oi) {
                double* oplane = op + (ni * o + oi) * oh * ow;
                const double bv = b.data[static_cast<size_t>(oi)];
                for (int64_t i = 0; i < oh * ow; ++i) oplane[i] = bv;
                for (int64_t ci = 0; ci < c; ++ci) {
                    const double* iplane = ip + (ni * c + ci) * h * wd;
                    const double* wplane = wp + (oi * c + ci) * kh * kw;
                    for (int64_t ky = 0; ky < kh; ++ky) {
                        for (int64_t kx = 0; kx < kw; ++kx) {
                            const double wv = wplane[ky * kw + kx];
                            if (stride_h == 1 && stride_w == 1) {
                                const int64_t y0 = std::max<int64_t>(0, pad_h - ky);
                                const int64_t y1 = std::min(oh, h + pad_h - ky);
                                const int64_t x0 = std::max<int64_t>(0, pad_w - kx);
                                const int64_t x1 = std::min(ow, wd + pad_w - kx);
                                for (int64_t oy = y0; oy < y1; ++oy) {
                                    const double* irow =
                                        iplane + (oy + ky - pad_h) * wd + (kx - pad_w);
                                    double* orow = oplane + oy * ow;
                                    for (int64_t ox = x0; ox < x1; ++ox) orow[ox] += wv * irow[ox];
                                }
                            } else {
                                for (int64_t oy = 0; oy < oh; ++oy) {
                                    const int64_t iy = oy * stride_h + ky - pad_h;
                                    if (iy < 0 || iy >= h) continue;
                                    for (int64_t ox = 0; ox < ow; ++ox) {
                                        const int64_t ix = ox * stride_w + kx - pad_w;
                                        if (ix < 0 || ix >= wd) continue;
                                        oplane[oy * ow + ox] += wv * iplane[iy * wd + ix];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    const bool track =
        t.requires_grad(input) || t.requires_grad(weight) || t.requires_grad(bias);
    Var out_v = t.push(std::move(out), track, nullptr);
    if (!track) return out_v;

    struct Capt {
        Var input, weight, bias, out;
        int64_t n, c, h, wd, o, kh, kw, oh, ow;
        int sh, sw, ph, pw;
    };
    const Capt cp{input, weight, bias, out_v, n,        c,        h,     wd,   o,
                  kh,    kw,     oh,   ow,    stride_h, stride_w, pad_h, pad_w};
    t.set_backward(out_v, [cp](Tape& tp) {
        const Tensor& gout = tp.grad(cp.out);
        const double* gp = gout.data.data();
        const Tensor& in = tp.value(cp.input);
        const Tensor& w = tp.value(cp.weight);
        if (tp.requires_grad(cp.bias)) {
            Tensor& gb = tp.grad_mut(cp.bias);
            for (int64_t ni = 0; ni < cp.n; ++ni)
                for (int64_t oi = 0; oi < cp.o; ++oi) {
                    const double* gplane = gp + (ni * cp.o + oi) * cp.oh * cp.ow;
                    double acc = 0.0;
                    for (int64_t i = 0; i < cp.oh * cp.ow; ++i) acc += gplane[i];
                    gb.data[static_cast<size_t>(oi)] += acc;
                }
        }
        const bool gi = tp.requires_grad(cp.input);
        const bool gw = tp.requires_grad(cp.weight);
        if (!gi && !gw) return;
        double* gin = gi ? tp.grad_mut(cp.input).data.data() : nullptr;
        double* gwt = gw ? tp.grad_mut(cp.weight).data.data() : nullptr;
        for (int64_t ni = 0; ni < cp.n; ++ni) {
            for (int64_t oi = 0; oi < cp.o; ++oi) {
                const double* gplane = gp + (ni * cp.o + oi) * cp.oh * cp.ow;
                for (int64_t ci = 0; ci < cp.c; ++ci) {
                    const double* iplane = in.data.data() + (ni * cp.c + ci) * cp.h * cp.wd;
                    const double* wplane = w.data.data() + (oi * cp.c + ci) * cp.kh * cp.kw;
                    double* giplane = gi ? gin + (ni * cp.c + ci) * cp.h * cp.wd : nullptr;
                    double* gwplane = gw ? gwt + (oi * cp.c + ci) * cp.kh * cp.kw : nullptr;
                    for (int64_t ky = 0; ky < cp.kh; ++ky) {
                        for (int64_t kx = 0; kx < cp.kw; ++kx) {
                            const double wv = wplane[ky * cp.kw + kx];
                            double wacc = 0.0;
                            if (cp.sh == 1 && cp.sw == 1) {
                                const int64_t y0 = std::max<int64_t>(0, cp.ph - ky);
                                const int64_t y1 = std::min(cp.oh, cp.h + cp.ph - ky);
                                const int64_t x0 = std::max<int64_t>(0, cp.pw - kx);
                                const int64_t x1 = std::min(cp.ow, cp.wd + cp.pw - kx);
                                for (int64_t oy = y0; oy < y1; ++oy) {
                                    const int64_t off =
                                        (oy + ky - cp.ph) * cp.wd + (kx - cp.pw);
                                    const double* grow = gplane + oy * cp.ow;
                                    if (gi) {
                                        double* girow = giplane + off;
                                        for (int64_t ox = x0; ox < x1; ++ox)
                                            girow[ox] += wv * grow[ox];
                                    }
                                    if (gw) {
                                        const double* irow = iplane + off;
                                        for (int64_t ox = x0; ox < x1; ++ox)
                                            wacc += irow[ox] * grow[ox];
                                    }
                                }
                            } else {
                                for (int64_t oy = 0; oy < cp.oh; ++oy) {
                                    const int64_t iy = oy * cp.sh + ky - cp.ph;
                                    if (iy < 0 || iy >= cp.h) continue;
                                    for (int64_t ox = 0; ox < cp.ow; ++ox) {
                                        const int64_t ix = ox * cp.sw + kx - cp.pw;
                                        if (ix < 0 || ix >= cp.wd) continue;
                                        const double g = gplane[oy * cp.ow + ox];
                                        if (gi) giplane[iy * cp.wd + ix] += wv * g;
                                        if (gw) wacc += iplane[iy * cp.wd + ix] * g;
                                    }
                                }
                            }
                            if (gw) gwplane[ky * cp.kw + kx] += wacc;
                        }
                    }
                }
            }
        }
    });
    return out_v;
}

Var relu(Tape& t, Var x) {
    const Tensor& in = t.value(x);
    Tensor out(in.shape);
    for (size_t i = 0; i < in.data.size(); ++i) out.data[i] = in.data[i] > 0.0 ? in.data[i] : 0.0;
    const bool track = t.requires_grad(x);
    Var out_v = t.push(std::move(out), track, nullptr);
    if (!track) return out_v;
    t.set_backward(out_v, [x, out_v](Tape& tp) {
        const Tensor& gout = tp.grad(out_v);
        const Tensor& in = tp.value(x);
        Tensor& gin = tp.grad_mut(x);
        for (size_t i = 0; i < in.data.size(); ++i) {
            if (in.data[i] > 0.0) gin.data[i] += gout.data[i];
        }
    });
    return out_v;
}

Var maxpool2d(Tape& t, Var x, int kh, int kw, int stride_h, int stride_w) {
    const Tensor& in = t.value(x);
    if (in.ndim() != 4) throw ShapeError("maxpool2d: input must be [N,C,H,W], got " + in.shape_str());
    const int64_t n = in.dim(0), c = in.dim(1), h = in.dim(2), w = in.dim(3);
    if (kh < 1 || kw < 1 || stride_h < 1 || stride_w < 1) {
        throw ShapeError("maxpool2d: window and stride must be >= 1");
    }
    if (kh > h || kw > w) {
        throw ShapeError("maxpool2d: window " + std::to_string(kh) + "x" + std::to_string(kw) +
                         " larger than input " + std::to_string(h) + "x" + std::to_string(w));
    }
    const int64_t oh = (h - kh) / stride_h + 1;
    const int64_t ow = (w - kw) / stride_w + 1;
    Tensor out({n, c, oh, ow});
    std::vector<int64_t> argmax(static_cast<size_t>(n * c * oh * ow));
    for (int64_t ni = 0; ni < n; ++ni) {
        for (int64_t ci = 0; ci < c; ++ci) {
            const double* iplane = in.data.data() + (ni * c + ci) * h * w;
            double* oplane = out.data.data() + (ni * c + ci) * oh * ow;
            int64_t* aplane = argmax.data() + (ni * c + ci) * oh * ow;
            for (int64_t oy = 0; oy < oh; ++oy) {
                for (int64_t ox = 0; ox < ow; ++ox) {
                    double best = -std::numeric_limits<double>::infinity();
                    int64_t best_idx = 0;
                    for (int64_t ky = 0; ky < kh; ++ky) {
                        const int64_t iy = oy * stride_h + ky;
                        for (int64_t kx = 0; kx < kw; ++kx) {
                            const int64_t ix = ox * stride_w + kx;
                            const int64_t idx = iy * w + ix;
                            if (iplane[idx] > best) {
                                best = iplane[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    oplane[oy * ow + ox] = best;
                    aplane[oy * ow + ox] = best_idx;
                }
            }
        }
    }
    const bool track = t.requires_grad(x);
    Var out_v = t.push(std::move(out), track, nullptr);
    if (!track) return out_v;
    auto am = std::make_shared<std::vector<int64_t>>(std::move(argmax));
    t.set_backward(out_v, [x, out_v, am, n, c, oh, ow, h, w](Tape& tp) {
        const Tensor& gout = tp.grad(out_v);
        Tensor& gin = tp.grad_mut(x);
        for (int64_t pc = 0; pc < n * c; ++pc) {
            const double* gplane = gout.data.data() + pc * oh * ow;
            const int64_t* aplane = am->data() + pc * oh * ow;
            double* giplane = gin.data.data() + pc * h * w;
            for (int64_t i = 0; i < oh * ow; ++i) giplane[aplane[i]] += gplane[i];
        }
    });
    return out_v;
}

Var collapse_height_to_seq(Tape& t, Var x) {
    const Tensor& in = t.value(x);
    if (in.ndim() != 4 || in.dim(2) != 1) {
        throw ShapeError("collapse_height_to_seq: input must be [N,C,1,W], got " + in.shape_str());
    }
    const int64_t n = in.dim(0), c = in.dim(1), w = in.dim(3);
    Tensor out({w, n, c});
    for (int64_t ni = 0; ni < n; ++ni)
        for (int64_t ci = 0; ci < c; ++ci) {
            const double* irow = in.data.data() + (ni * c + ci) * w;
            for (int64_t wi = 0; wi < w; ++wi) out.data[(wi * n + ni) * c + ci] = irow[wi];
        }
    const bool track = t.requires_grad(x);
    Var out_v = t.push(std::move(out), track, nullptr);
    if (!track) return out_v;
    t.set_backward(out_v, [x, out_v, n, c, w](Tape& tp) {
        const Tensor& gout = tp.grad(out_v);
        Tensor& gin = tp.grad_mut(x);
        for (int64_t ni = 0; ni < n; ++ni)
            for (int64_t ci = 0; ci < c; ++ci) {
                double* girow = gin.data.data() + (ni * c + ci) * w;
                for (int64_t wi = 0; wi < w; ++wi) girow[wi] += gout.data[(wi * n + ni) * c + ci];
            }
    });
    return out_v;
}

Var resample_width(Tape& t, Var seq, double factor) {
    const Tensor& in = t.value(seq);
    if (in.ndim() != 3) {
        throw ShapeError("resample_width: input must be [T,N,F], got " + in.shape_str());
    }
    const bool down = factor == 0.25 || factor == 0.5;
    const bool up = factor == 2.0 || factor == 4.0;
    if (factor == 1.0) return seq;
    if (!down && !up) {
        throw ShapeError("resample_width: unsupported factor " + std::to_string(factor) +
                         " (supported: 0.25, 0.5, 1, 2, 4)");
    }
    const int64_t tlen = in.dim(0), n = in.dim(1), f = in.dim(2);
    const int64_t row = n * f;
    const int64_t out_t = std::max<int64_t>(1, std::llround(static_cast<double>(tlen) * factor));
    Tensor out({out_t, n, f});
    const int64_t g = down ? static_cast<int64_t>(std::llround(1.0 / factor))
                           : static_cast<int64_t>(std::llround(factor));
    if (down) {
        for (int64_t j = 0; j < out_t; ++j) {
            const int64_t lo = j * g;
            const int64_t hi = (j + 1 == out_t) ? tlen : std::min(tlen, lo + g);
            const double inv = 1.0 / static_cast<double>(hi - lo);
            double* orow = out.data.data() + j * row;
            for (int64_t src = lo; src < hi; ++src) {
                const double* irow = in.data.data() + src * row;
                for (int64_t i = 0; i < row; ++i) orow[i] += irow[i];
            }
            for (int64_t i = 0; i < row; ++i) orow[i] *= inv;
        }
    } else {
        for (int64_t j = 0; j < out_t; ++j) {
            const int64_t src = std::min(tlen - 1, j / g);
            const double* irow = in.data.data() + src * row;
            double* orow = out.data.data() + j * row;
            for (int64_t i = 0; i < row; ++i) orow[i] = irow[i];
        }
    }
    const bool track = t.requires_grad(seq);
    Var out_v = t.push(std::move(out), track, nullptr);
    if (!track) return out_v;
    t.set_backward(out_v, [seq, out_v, tlen, row, out_t, g, down](Tape& tp) {
        const Tensor& gout = tp.grad(out_v);
        Tensor& gin = tp.grad_mut(seq);
        if (down) {
            for (int64_t j = 0; j < out_t; ++j) {
                const int64_t lo = j * g;
                const int64_t hi = (j + 1 == out_t) ? tlen : std::min(tlen, lo + g);
                const double inv = 1.0 / static_cast<double>(hi - lo);
                const double* grow = gout.data.data() + j * row;
                for (int64_t src = lo; src < hi; ++src) {
                    double* girow = gin.data.data() + src * row;
                    for (int64_t i = 0; i < row; ++i) girow[i] += inv * grow[i];
                }
            }
        } else {
            for (int64_t j = 0; j < out_t; ++j) {
                const int64_t src = std::min(tlen - 1, j / g);
                const double* grow = gout.data.data() + j * row;
                double* girow = gin.data.data() + src * row;
                for (int64_t i = 0; i < row; ++i) girow[i] += grow[i];
            }
        }
    });
    return out_v;
}

namespace {

// One direction of an LSTM pass; shared by bilstm forward/backward.
struct LstmTrace {
    // [T][N][4H] post-activation gates (i,f,g,o) and [T][N][H] cell / tanh(cell).
    std::vector<double> gates, cell, tanh_cell, hidden;
};

void lstm_dir_forward(const double* x, int64_t tlen, int64_t n, int64_t f, int64_t hsz,
                      const double* wx, const double* wh, const double* b, bool reverse,
                      LstmTrace& tr) {
    const int64_t g4 = 4 * hsz;
    tr.gates.assign(static_cast<size_t>(tlen * n * g4), 0.0);
    tr.cell.assign(static_cast<size_t>(tlen * n * hsz), 0.0);
    tr.tanh_cell.assign(static_cast<size_t>(tlen * n * hsz), 0.0);
    tr.hidden.assign(static_cast<size_t>(tlen * n * hsz), 0.0);
    std::vector<double> pre(static_cast<size_t>(n * g4));
    const double* h_prev = nullptr;
    const double* c_prev = nullptr;
    for (int64_t step = 0; step < tlen; ++step) {
        const int64_t ti = reverse ? tlen - 1 - step : step;
        for (int64_t ni = 0; ni < n; ++ni)
            for (int64_t j = 0; j < g4; ++j) pre[static_cast<size_t>(ni * g4 + j)] = b[j];
        gemm_acc(x + ti * n * f, wx, pre.data(), n, f, g4);
        if (h_prev) gemm_acc(h_prev, wh, pre.data(), n, hsz, g4);
        double* gates_t = tr.gates.data() + ti * n * g4;
        double* cell_t = tr.cell.data() + ti * n * hsz;
        double* tc_t = tr.tanh_cell.data() + ti * n * hsz;
        double* hid_t = tr.hidden.data() + ti * n * hsz;
        for (int64_t ni = 0; ni < n; ++ni) {
            const double* p = pre.data() + ni * g4;
            double* gt = gates_t + ni * g4;
            for (int64_t j = 0; j < hsz; ++j) {
                const double ig = sigmoid(p[j]);
                const double fg = sigmoid(p[hsz + j]);
                const double gg = std::tanh(p[2 * hsz + j]);
                const double og = sigmoid(p[3 * hsz + j]);
                gt[j] = ig;
                gt[hsz + j] = fg;
                gt[2 * hsz + j] = gg;
                gt[3 * hsz + j] = og;
                const double cprev = c_prev ? c_prev[ni * hsz + j] : 0.0;
                const double cv = fg * cprev + ig * gg;
                cell_t[ni * hsz + j] = cv;
                const double tcv = std::tanh(cv);
                tc_t[ni * hsz + j] = tcv;
                hid_t[ni * hsz + j] = og * tcv;
            }
        }
        h_prev = hid_t;
        c_prev = cell_t;
    }
}

// Accumulates parameter/input gradients for one direction.
// dh_out [T][N][H] is the upstream gradient on this direction's hidden outputs.
void lstm_dir_backward(const double* x, int64_t tlen, int64_t n, int64_t f, int64_t hsz,
                       const double* wx, const double* wh, const LstmTrace& tr,
                       const double* dh_out, bool reverse, double* dx, double* dwx, double* dwh,
                       double* db) {
    const int64_t g4 = 4 * hsz;
    std::vector<double> dh(static_cast<size_t>(n * hsz), 0.0);
    std::vector<double> dc(static_cast<size_t>(n * hsz), 0.0);
    std::vector<double> dpre(static_cast<size_t>(n * g4));
    for (int64_t step = tlen; step-- > 0;) {
        const int64_t ti = reverse ? tlen - 1 - step : step;
        const int64_t ti_prev = reverse ? ti + 1 : ti - 1;
        const bool has_prev = step > 0;
        const double* gates_t = tr.gates.data() + ti * n * g4;
        const double* cell_t = tr.cell.data() + ti * n * hsz;
        const double* tc_t = tr.tanh_cell.data() + ti * n * hsz;
        (void)cell_t;
        const double* c_prev = has_prev ? tr.cell.data() + ti_prev * n * hsz : nullptr;
        const double* h_prev = has_prev ? tr.hidden.data() + ti_prev * n * hsz : nullptr;
        for (int64_t ni = 0; ni < n; ++ni) {
            const double* gt = gates_t + ni * g4;
            double* dp = dpre.data() + ni * g4;
            for (int64_t j = 0; j < hsz; ++j) {
                const double dhv = dh[static_cast<size_t>(ni * hsz + j)] +
                                   dh_out[(ti * n + ni) * hsz + j];
                const double ig = gt[j], fg = gt[hsz + j], gg = gt[2 * hsz + j],
                             og = gt[3 * hsz + j];
                const double tcv = tc_t[ni * hsz + j];
                const double dcv =
                    dc[static_cast<size_t>(ni * hsz + j)] + dhv * og * (1.0 - tcv * tcv);
                const double cprev = c_prev ? c_prev[ni * hsz + j] : 0.0;
                dp[j] = dcv * gg * ig * (1.0 - ig);
                dp[hsz + j] = dcv * cprev * fg * (1.0 - fg);
                dp[2 * hsz + j] = dcv * ig * (1.0 - gg * gg);
                dp[3 * hsz + j] = dhv * tcv * og * (1.0 - og);
                dc[static_cast<size_t>(ni * hsz + j)] = dcv * fg;
            }
        }
        // db += sum_n dpre
        for (int64_t ni = 0; ni < n; ++ni) {
            const double* dp = dpre.data() + ni * g4;
            for (int64_t j = 0; j < g4; ++j) db[j] += dp[j];
        }
        // dwx[f][4H] += x_t^T * dpre ; dx_t += dpre * wx^T
        gemm_acc_at(x + ti * n * f, dpre.data(), dwx, n, f, g4);
        if (dx) gemm_acc_bt(dpre.data(), wx, dx + ti * n * f, n, g4, f);
        if (has_prev) {
            gemm_acc_at(h_prev, dpre.data(), dwh, n, hsz, g4);
            std::fill(dh.begin(), dh.end(), 0.0);
            gemm_acc_bt(dpre.data(), wh, dh.data(), n, g4, hsz);
        }
    }
}

}  // namespace

Var bilstm(Tape& t, Var seq, const BiLstmVars& p) {
    const Tensor& in = t.value(seq);
    if (in.ndim() != 3) throw ShapeError("bilstm: input must be [T,N,F], got " + in.shape_str());
    const int64_t tlen = in.dim(0), n = in.dim(1), f = in.dim(2);
    const Tensor& wx_f = t.value(p.fw.w_x);
    if (wx_f.ndim() != 2 || wx_f.dim(0) != f || wx_f.dim(1) % 4 != 0) {
        throw ShapeError("bilstm: w_x must be [F,4H] with F=" + std::to_string(f) + ", got " +
                         wx_f.shape_str());
    }
    const int64_t hsz = wx_f.dim(1) / 4;
    auto check_dir = [&](const LstmDirVars& d, const char* which) {
        const Tensor& wx = t.value(d.w_x);
        const Tensor& wh = t.value(d.w_h);
        const Tensor& b = t.value(d.b);
        if (wx.shape != std::vector<int64_t>{f, 4 * hsz} ||
            wh.shape != std::vector<int64_t>{hsz, 4 * hsz} ||
            b.shape != std::vector<int64_t>{4 * hsz}) {
            throw ShapeError(std::string("bilstm: inconsistent ") + which + " parameter shapes");
        }
    };
    check_dir(p.fw, "forward");
    check_dir(p.bw, "backward");

    auto tr_f = std::make_shared<LstmTrace>();
    auto tr_b = std::make_shared<LstmTrace>();
    lstm_dir_forward(in.data.data(), tlen, n, f, hsz, t.value(p.fw.w_x).data.data(),
                     t.value(p.fw.w_h).data.data(), t.value(p.fw.b).data.data(), false, *tr_f);
    lstm_dir_forward(in.data.data(), tlen, n, f, hsz, t.value(p.bw.w_x).data.data(),
                     t.value(p.bw.w_h).data.data(), t.value(p.bw.b).data.data(), true, *tr_b);

    Tensor out({tlen, n, 2 * hsz});
    for (int64_t ti = 0; ti < tlen; ++ti)
        for (int64_t ni = 0; ni < n; ++ni) {
            double* orow = out.data.data() + (ti * n + ni) * 2 * hsz;
            const double* hf = tr_f->hidden.data() + (ti * n + ni) * hsz;
            const double* hb = tr_b->hidden.data() + (ti * n + ni) * hsz;
            for (int64_t j = 0; j < hsz; ++j) orow[j] = hf[j];
            for (int64_t j = 0; j < hsz; ++j) orow[hsz + j] = hb[j];
        }

    const bool track = t.requires_grad(seq) || t.requires_grad(p.fw.w_x) ||
                       t.requires_grad(p.fw.w_h) || t.requires_grad(p.fw.b) ||
                       t.requires_grad(p.bw.w_x) || t.requires_grad(p.bw.w_h) ||
                       t.requires_grad(p.bw.b);
    Var out_v = t.push(std::move(out), track, nullptr);
    if (!track) return out_v;

    const BiLstmVars pc = p;
    t.set_backward(out_v, [seq, out_v, pc, tr_f, tr_b, tlen, n, f, hsz](Tape& tp) {
        const Tensor& gout = tp.grad(out_v);
        const Tensor& in = tp.value(seq);
        // Split upstream grad into the two direction halves.
        std::vector<double> dh_f(static_cast<size_t>(tlen * n * hsz));
        std::vector<double> dh_b(static_cast<size_t>(tlen * n * hsz));
        for (int64_t ti = 0; ti < tlen; ++ti)
            for (int64_t ni = 0; ni < n; ++ni) {
                const double* grow = gout.data.data() + (ti * n + ni) * 2 * hsz;
                for (int64_t j = 0; j < hsz; ++j) {
                    dh_f[static_cast<size_t>((ti * n + ni) * hsz + j)] = grow[j];
                    dh_b[static_cast<size_t>((ti * n + ni) * hsz + j)] = grow[hsz + j];
                }
            }
        const bool gi = tp.requires_grad(seq);
        double* dx = gi ? tp.grad_mut(seq).data.data() : nullptr;
        auto run_dir = [&](const LstmDirVars& d, const LstmTrace& tr, const double* dh,
                           bool reverse) {
            // Direction parameters are registered together; track flags match.
            Tensor dwx_local({f, 4 * hsz});
            Tensor dwh_local({hsz, 4 * hsz});
            Tensor db_local({4 * hsz});
            lstm_dir_backward(in.data.data(), tlen, n, f, hsz, tp.value(d.w_x).data.data(),
                              tp.value(d.w_h).data.data(), tr, dh, reverse, dx,
                              dwx_local.data.data(), dwh_local.data.data(),
                              db_local.data.data());
            if (tp.requires_grad(d.w_x)) {
                Tensor& g = tp.grad_mut(d.w_x);
                for (size_t i = 0; i < g.data.size(); ++i) g.data[i] += dwx_local.data[i];
            }
            if (tp.requires_grad(d.w_h)) {
                Tensor& g = tp.grad_mut(d.w_h);
                for (size_t i = 0; i < g.data.size(); ++i) g.data[i] += dwh_local.data[i];
            }
            if (tp.requires_grad(d.b)) {
                Tensor& g = tp.grad_mut(d.b);
                for (size_t i = 0; i < g.data.size(); ++i) g.data[i] += db_local.data[i];
            }
        };
        run_dir(pc.fw, *tr_f, dh_f.data(), false);
        run_dir(pc.bw, *tr_b, dh_b.data(), true);
    });
    return out_v;
}

Var conv1d_seq(Tape& t, Var seq, Var weight, Var bias) {
    const Tensor& in = t.value(seq);
    const Tensor& w = t.value(weight);
    const Tensor& b = t.value(bias);
    if (in.ndim() != 3) throw ShapeError("conv1d_seq: input must be [T,N,F], got " + in.shape_str());
    if (w.ndim() != 3) throw ShapeError("conv1d_seq: weight must be [K,F,kw], got " + w.shape_str());
    const int64_t tlen = in.dim(0), n = in.dim(1), f = in.dim(2);
    const int64_t k = w.dim(0), kw = w.dim(2);
    if (w.dim(1) != f) {
        throw ShapeError("conv1d_seq: weight feature dim " + std::to_string(w.dim(1)) +
                         " does not match input features " + std::to_string(f));
    }
    if (kw % 2 == 0) throw ShapeError("conv1d_seq: kernel width must be odd for same padding");
    if (b.ndim() != 1 || b.dim(0) != k) {
        throw ShapeError("conv1d_seq: bias must be [" + std::to_string(k) + "]");
    }
    const int64_t pad = (kw - 1) / 2;
    Tensor out({tlen, n, k});
    for (int64_t ti = 0; ti < tlen; ++ti) {
        for (int64_t ni = 0; ni < n; ++ni) {
            double* orow = out.data.data() + (ti * n + ni) * k;
            for (int64_t kk = 0; kk < k; ++kk) orow[kk] = b.data[static_cast<size_t>(kk)];
            for (int64_t dt = 0; dt < kw; ++dt) {
                const int64_t si = ti + dt - pad;
                if (si < 0 || si >= tlen) continue;
                const double* irow = in.data.data() + (si * n + ni) * f;
                for (int64_t kk = 0; kk < k; ++kk) {
                    const double* wrow = w.data.data() + (kk * f) * kw + dt;
                    // weight layout [K,F,kw]: stride kw between features
                    double acc = 0.0;
                    for (int64_t fi = 0; fi < f; ++fi) acc += irow[fi] * wrow[fi * kw];
                    orow[kk] += acc;
                }
            }
        }
    }
    const bool track =
        t.requires_grad(seq) || t.requires_grad(weight) || t.requires_grad(bias);
    Var out_v = t.push(std::move(out), track, nullptr);
    if (!track) return out_v;
    t.set_backward(out_v, [seq, weight, bias, out_v, tlen, n, f, k, kw, pad](Tape& tp) {
        const Tensor& gout = tp.grad(out_v);
        const Tensor& in = tp.value(seq);
        const Tensor& w = tp.value(weight);
        const bool gi = tp.requires_grad(seq);
        const bool gw = tp.requires_grad(weight);
        if (tp.requires_grad(bias)) {
            Tensor& gb = tp.grad_mut(bias);
            for (int64_t i = 0; i < tlen * n; ++i) {
                const double* grow = gout.data.data() + i * k;
                for (int64_t kk = 0; kk < k; ++kk) gb.data[static_cast<size_t>(kk)] += grow[kk];
            }
        }
        if (!gi && !gw) return;
        double* gin = gi ? tp.grad_mut(seq).data.data() : nullptr;
        double* gwt = gw ? tp.grad_mut(weight).data.data() : nullptr;
        for (int64_t ti = 0; ti < tlen; ++ti) {
            for (int64_t ni = 0; ni < n; ++ni) {
                const double* grow = gout.data.data() + (ti * n + ni) * k;
                for (int64_t dt = 0; dt < kw; ++dt) {
                    const int64_t si = ti + dt - pad;
                    if (si < 0 || si >= tlen) continue;
                    const double* irow = in.data.data() + (si * n + ni) * f;
                    double* girow = gi ? gin + (si * n + ni) * f : nullptr;
                    for (int64_t kk = 0; kk < k; ++kk) {
                        const double g = grow[kk];
                        if (g == 0.0) continue;
                        const double* wrow = w.data.data() + (kk * f) * kw + dt;
                        if (gi) {
                            for (int64_t fi = 0; fi < f; ++fi) girow[fi] += g * wrow[fi * kw];
                        }
                        if (gw) {
                            double* gwrow = gwt + (kk * f) * kw + dt;
                            for (int64_t fi = 0; fi < f; ++fi) gwrow[fi * kw] += g * irow[fi];
                        }
                    }
                }
            }
        }
    });
    return out_v;
}

Var log_softmax(Tape& t, Var x) {
    const Tensor& in = t.value(x);
    if (in.ndim() < 1) throw ShapeError("log_softmax: rank must be >= 1");
    const int64_t k = in.shape.back();
    const int64_t rows = in.numel() / k;
    Tensor out(in.shape);
    for (int64_t r = 0; r < rows; ++r) {
        const double* irow = in.data.data() + r * k;
        double* orow = out.data.data() + r * k;
        double mx = irow[0];
        for (int64_t i = 1; i < k; ++i) mx = std::max(mx, irow[i]);
        double se = 0.0;
        for (int64_t i = 0; i < k; ++i) se += std::exp(irow[i] - mx);
        const double lse = mx + std::log(se);
        for (int64_t i = 0; i < k; ++i) orow[i] = irow[i] - lse;
    }
    const bool track = t.requires_grad(x);
    Var out_v = t.push(std::move(out), track, nullptr);
    if (!track) return out_v;
    t.set_backward(out_v, [x, out_v, rows, k](Tape& tp) {
        const Tensor& gout = tp.grad(out_v);
        const Tensor& out = tp.value(out_v);
        Tensor& gin = tp.grad_mut(x);
        for (int64_t r = 0; r < rows; ++r) {
            const double* grow = gout.data.data() + r * k;
            const double* orow = out.data.data() + r * k;
            double* girow = gin.data.data() + r * k;
            double gsum = 0.0;
            for (int64_t i = 0; i < k; ++i) gsum += grow[i];
            for (int64_t i = 0; i < k; ++i) girow[i] += grow[i] - std::exp(orow[i]) * gsum;
        }
    });
    return out_v;
}

Var add(Tape& t, Var a, Var b) {
    const Tensor& ta = t.value(a);
    const Tensor& tb = t.value(b);
    if (ta.shape != tb.shape) {
        throw ShapeError("add: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
    }
    Tensor out(ta.shape);
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = ta.data[i] + tb.data[i];
    const bool track = t.requires_grad(a) || t.requires_grad(b);
    Var out_v = t.push(std::move(out), track, nullptr);
    if (!track) return out_v;
    t.set_backward(out_v, [a, b, out_v](Tape& tp) {
        const Tensor& g = tp.grad(out_v);
        if (tp.requires_grad(a)) {
            Tensor& ga = tp.grad_mut(a);
            for (size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i];
        }
        if (tp.requires_grad(b)) {
            Tensor& gb = tp.grad_mut(b);
            for (size_t i = 0; i < g.data.size(); ++i) gb.data[i] += g.data[i];
        }
    });
    return out_v;
}

Var mul(Tape& t, Var a, Var b) {
    const Tensor& ta = t.value(a);
    const Tensor& tb = t.value(b);
    if (ta.shape != tb.shape) {
        throw ShapeError("mul: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
    }
    Tensor out(ta.shape);
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = ta.data[i] * tb.data[i];
    const bool track = t.requires_grad(a) || t.requires_grad(b);
    Var out_v = t.push(std::move(out), track, nullptr);
    if (!track) return out_v;
    t.set_backward(out_v, [a, b, out_v](Tape& tp) {
        const Tensor& g = tp.grad(out_v);
        const Tensor& ta = tp.value(a);
        const Tensor& tb = tp.value(b);
        if (tp.requires_grad(a)) {
            Tensor& ga = tp.grad_mut(a);
            for (size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i] * tb.data[i];
        }
        if (tp.requires_grad(b)) {
            Tensor& gb = tp.grad_mut(b);
            for (size_t i = 0; i < g.data.size(); ++i) gb.data[i] += g.data[i] * ta.data[i];
        }
    });
    return out_v;
}

Var scale(Tape& t, Var a, double c) {
    const Tensor& ta = t.value(a);
    Tensor out(ta.shape);
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = ta.data[i] * c;
    const bool track = t.requires_grad(a);
    Var out_v = t.push(std::move(out), track, nullptr);
    if (!track) return out_v;
    t.set_backward(out_v, [a, out_v, c](Tape& tp) {
        const Tensor& g = tp.grad(out_v);
        Tensor& ga = tp.grad_mut(a);
        for (size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i] * c;
    });
    return out_v;
}

Var sum(Tape& t, Var x) {
    const Tensor& in = t.value(x);
    double acc = 0.0;
    for (double v : in.data) acc += v;
    const bool track = t.requires_grad(x);
    Var out_v = t.push(Tensor::scalar(acc), track, nullptr);
    if (!track) return out_v;
    t.set_backward(out_v, [x, out_v](Tape& tp) {
        const double g = tp.grad(out_v).data[0];
        Tensor& gx = tp.grad_mut(x);
        for (double& v : gx.data) v += g;
    });
    return out_v;
}

Var mean(Tape& t, Var x) {
    const Tensor& in = t.value(x);
    const double inv = 1.0 / static_cast<double>(in.numel());
    double acc = 0.0;
    for (double v : in.data) acc += v;
    const bool track = t.requires_grad(x);
    Var out_v = t.push(Tensor::scalar(acc * inv), track, nullptr);
    if (!track) return out_v;
    t.set_backward(out_v, [x, out_v, inv](Tape& tp) {
        const double g = tp.grad(out_v).data[0] * inv;
        Tensor& gx = tp.grad_mut(x);
        for (double& v : gx.data) v += g;
    });
    return out_v;
}

}  // namespace ctca::ops
