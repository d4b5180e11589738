#include "ctca/ctc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

namespace ctca {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    const double hi = std::max(a, b);
    const double lo = std::min(a, b);
    return hi + std::log1p(std::exp(lo - hi));
}

void validate_target(const std::vector<int>& target, int64_t k) {
    for (int id : target) {
        if (id < 1 || id >= k) {
            throw ShapeError("ctc: target class " + std::to_string(id) +
                             " outside [1, " + std::to_string(k - 1) + "]");
        }
    }
}

void validate_rows_normalized(const double* lp, int64_t t, int64_t k) {
    for (int64_t ti = 0; ti < t; ++ti) {
        double s = 0.0;
        for (int64_t ki = 0; ki < k; ++ki) s += std::exp(lp[ti * k + ki]);
        if (std::abs(s - 1.0) > 1e-6) {
            throw ShapeError("ctc: log_probs row " + std::to_string(ti) +
                             " is not a normalized log distribution (sum exp = " +
                             std::to_string(s) + ")");
        }
    }
}

}  // namespace

Alphabet::Alphabet(std::string symbols) : symbols_(std::move(symbols)), lookup_(256, -1) {
    for (size_t i = 0; i < symbols_.size(); ++i) {
        const auto b = static_cast<unsigned char>(symbols_[i]);
        if (lookup_[b] != -1) {
            throw ConfigError(std::string("Alphabet: duplicate symbol '") + symbols_[i] + "'");
        }
        lookup_[b] = static_cast<int>(i) + 1;
    }
}

char Alphabet::symbol(int class_id) const {
    if (class_id < 1 || class_id > static_cast<int>(symbols_.size())) {
        throw ConfigError("Alphabet: class id " + std::to_string(class_id) +
                          " has no symbol (blank or out of range)");
    }
    return symbols_[static_cast<size_t>(class_id - 1)];
}

int Alphabet::class_of(char c) const {
    const int id = lookup_[static_cast<unsigned char>(c)];
    if (id == -1) throw ConfigError(std::string("Alphabet: unknown character '") + c + "'");
    return id;
}

std::vector<int> Alphabet::encode(const std::string& text) const {
    std::vector<int> ids;
    ids.reserve(text.size());
    for (char c : text) ids.push_back(class_of(c));
    return ids;
}

std::string Alphabet::decode(const std::vector<int>& ids) const {
    std::string out;
    out.reserve(ids.size());
    for (int id : ids) out.push_back(symbol(id));
    return out;
}

int64_t ctc_min_frames(const std::vector<int>& target) {
    int64_t frames = static_cast<int64_t>(target.size());
    for (size_t i = 1; i < target.size(); ++i) {
        if (target[i] == target[i - 1]) ++frames;
    }
    return frames;
}

CtcResult ctc_loss_grad(const Tensor& log_probs, const std::vector<int>& target,
                        bool check_normalization) {
    if (log_probs.ndim() != 2) {
        throw ShapeError("ctc_loss_grad: log_probs must be [T,K], got " + log_probs.shape_str());
    }
    const int64_t t = log_probs.dim(0);
    const int64_t k = log_probs.dim(1);
    if (k < 2) throw ShapeError("ctc_loss_grad: need at least blank plus one class");
    validate_target(target, k);
    if (check_normalization) validate_rows_normalized(log_probs.data.data(), t, k);
    if (ctc_min_frames(target) > t) {
        throw InfeasibleTargetError(
            "infeasible target: needs " + std::to_string(ctc_min_frames(target)) +
            " frames, only " + std::to_string(t) + " available");
    }

    // Extended sequence: blank, l1, blank, l2, ..., blank. Length S = 2L+1.
    const int64_t len = static_cast<int64_t>(target.size());
    const int64_t s = 2 * len + 1;
    auto ext = [&](int64_t si) -> int64_t {
        return (si % 2 == 0) ? 0 : target[static_cast<size_t>(si / 2)];
    };
    const double* lp = log_probs.data.data();

    // alpha[t][s], beta[t][s] in log space.
    std::vector<double> alpha(static_cast<size_t>(t * s), kNegInf);
    std::vector<double> beta(static_cast<size_t>(t * s), kNegInf);

    alpha[0] = lp[ext(0)];
    if (s > 1) alpha[1] = lp[ext(1)];
    for (int64_t ti = 1; ti < t; ++ti) {
        for (int64_t si = 0; si < s; ++si) {
            double acc = alpha[static_cast<size_t>((ti - 1) * s + si)];
            if (si >= 1) acc = log_add(acc, alpha[static_cast<size_t>((ti - 1) * s + si - 1)]);
            if (si >= 2 && ext(si) != 0 && ext(si) != ext(si - 2)) {
                acc = log_add(acc, alpha[static_cast<size_t>((ti - 1) * s + si - 2)]);
            }
            alpha[static_cast<size_t>(ti * s + si)] = acc + lp[ti * k + ext(si)];
        }
    }

    beta[static_cast<size_t>((t - 1) * s + s - 1)] = lp[(t - 1) * k + ext(s - 1)];
    if (s > 1) beta[static_cast<size_t>((t - 1) * s + s - 2)] = lp[(t - 1) * k + ext(s - 2)];
    for (int64_t ti = t - 2; ti >= 0; --ti) {
        for (int64_t si = s - 1; si >= 0; --si) {
            double acc = beta[static_cast<size_t>((ti + 1) * s + si)];
            if (si + 1 < s) acc = log_add(acc, beta[static_cast<size_t>((ti + 1) * s + si + 1)]);
            if (si + 2 < s && ext(si) != 0 && ext(si) != ext(si + 2)) {
                acc = log_add(acc, beta[static_cast<size_t>((ti + 1) * s + si + 2)]);
            }
            beta[static_cast<size_t>(ti * s + si)] = acc + lp[ti * k + ext(si)];
        }
    }

    double log_total = kNegInf;
    log_total = log_add(log_total, alpha[static_cast<size_t>((t - 1) * s + s - 1)]);
    if (s > 1) log_total = log_add(log_total, alpha[static_cast<size_t>((t - 1) * s + s - 2)]);

    CtcResult res;
    res.loss = -log_total;
    res.grad = Tensor::zeros({t, k});
    // gamma_t(k) = sum over extended positions with label k of
    // alpha*beta/p_t(k); grad w.r.t. log p_t(k) is -exp(log gamma - logP).
    for (int64_t ti = 0; ti < t; ++ti) {
        std::vector<double> lg(static_cast<size_t>(k), kNegInf);
        for (int64_t si = 0; si < s; ++si) {
            const int64_t cls = ext(si);
            const double v = alpha[static_cast<size_t>(ti * s + si)] +
                             beta[static_cast<size_t>(ti * s + si)] - lp[ti * k + cls];
            lg[static_cast<size_t>(cls)] = log_add(lg[static_cast<size_t>(cls)], v);
        }
        for (int64_t ki = 0; ki < k; ++ki) {
            if (lg[static_cast<size_t>(ki)] == kNegInf) continue;
            res.grad.data[static_cast<size_t>(ti * k + ki)] =
                -std::exp(lg[static_cast<size_t>(ki)] - log_total);
        }
    }
    return res;
}

double ctc_brute_force(const Tensor& log_probs, const std::vector<int>& target) {
    if (log_probs.ndim() != 2) {
        throw ShapeError("ctc_brute_force: log_probs must be [T,K], got " + log_probs.shape_str());
    }
    const int64_t t = log_probs.dim(0);
    const int64_t k = log_probs.dim(1);
    validate_target(target, k);
    double paths = 1.0;
    for (int64_t i = 0; i < t; ++i) {
        paths *= static_cast<double>(k);
        if (paths > 1e7) {
            throw ShapeError("ctc_brute_force: K^T exceeds 1e7, refusing to enumerate");
        }
    }
    const double* lp = log_probs.data.data();
    std::vector<int64_t> path(static_cast<size_t>(t), 0);
    double total = kNegInf;
    while (true) {
        // Collapse: merge repeats, drop blanks.
        std::vector<int> collapsed;
        int64_t prev = -1;
        for (int64_t i = 0; i < t; ++i) {
            if (path[static_cast<size_t>(i)] != prev && path[static_cast<size_t>(i)] != 0) {
                collapsed.push_back(static_cast<int>(path[static_cast<size_t>(i)]));
            }
            prev = path[static_cast<size_t>(i)];
        }
        if (collapsed.size() == target.size() &&
            std::equal(collapsed.begin(), collapsed.end(), target.begin())) {
            double lpath = 0.0;
            for (int64_t i = 0; i < t; ++i) lpath += lp[i * k + path[static_cast<size_t>(i)]];
            total = log_add(total, lpath);
        }
        // Next path in odometer order.
        int64_t pos = t - 1;
        while (pos >= 0) {
            if (++path[static_cast<size_t>(pos)] < k) break;
            path[static_cast<size_t>(pos)] = 0;
            --pos;
        }
        if (pos < 0) break;
    }
    if (total == kNegInf) return std::numeric_limits<double>::infinity();
    return -total;
}

std::vector<int> best_path_decode(const Tensor& log_probs) {
    if (log_probs.ndim() != 2) {
        throw ShapeError("best_path_decode: log_probs must be [T,K], got " +
                         log_probs.shape_str());
    }
    const int64_t t = log_probs.dim(0);
    const int64_t k = log_probs.dim(1);
    const double* lp = log_probs.data.data();
    std::vector<int> out;
    int64_t prev = -1;
    for (int64_t ti = 0; ti < t; ++ti) {
        int64_t best = 0;
        for (int64_t ki = 1; ki < k; ++ki) {
            if (lp[ti * k + ki] > lp[ti * k + best]) best = ki;
        }
        if (best != prev && best != 0) out.push_back(static_cast<int>(best));
        prev = best;
    }
    return out;
}

Var ctc_loss_mean(Tape& t, Var log_probs, const std::vector<std::vector<int>>& targets,
                  const std::vector<int64_t>& frame_counts) {
    const Tensor& lp = t.value(log_probs);
    if (lp.ndim() != 3) {
        throw ShapeError("ctc_loss_mean: log_probs must be [T,N,K], got " + lp.shape_str());
    }
    const int64_t tmax = lp.dim(0), n = lp.dim(1), k = lp.dim(2);
    if (static_cast<int64_t>(targets.size()) != n ||
        static_cast<int64_t>(frame_counts.size()) != n) {
        throw ShapeError("ctc_loss_mean: batch size mismatch between log_probs, targets and "
                         "frame_counts");
    }
    double total = 0.0;
    auto grads = std::make_shared<std::vector<Tensor>>();
    grads->reserve(static_cast<size_t>(n));
    for (int64_t ni = 0; ni < n; ++ni) {
        const int64_t tn = frame_counts[static_cast<size_t>(ni)];
        if (tn < 1 || tn > tmax) {
            throw ShapeError("ctc_loss_mean: frame count " + std::to_string(tn) +
                             " outside [1, " + std::to_string(tmax) + "]");
        }
        Tensor one({tn, k});
        for (int64_t ti = 0; ti < tn; ++ti)
            for (int64_t ki = 0; ki < k; ++ki)
                one.data[static_cast<size_t>(ti * k + ki)] =
                    lp.data[static_cast<size_t>((ti * n + ni) * k + ki)];
        CtcResult r = ctc_loss_grad(one, targets[static_cast<size_t>(ni)]);
        total += r.loss;
        grads->push_back(std::move(r.grad));
    }
    const double inv = 1.0 / static_cast<double>(n);
    const bool track = t.requires_grad(log_probs);
    Var out_v = t.push(Tensor::scalar(total * inv), track, nullptr);
    if (!track) return out_v;
    t.set_backward(out_v, [log_probs, out_v, grads, n, k, inv](Tape& tp) {
        const double g = tp.grad(out_v).data[0] * inv;
        Tensor& gin = tp.grad_mut(log_probs);
        for (int64_t ni = 0; ni < n; ++ni) {
            const Tensor& gone = (*grads)[static_cast<size_t>(ni)];
            const int64_t tn = gone.dim(0);
            for (int64_t ti = 0; ti < tn; ++ti)
                for (int64_t ki = 0; ki < k; ++ki)
                    gin.data[static_cast<size_t>((ti * n + ni) * k + ki)] +=
                        g * gone.data[static_cast<size_t>(ti * k + ki)];
        }
    });
    return out_v;
}

}  // namespace ctca
