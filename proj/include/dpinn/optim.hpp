#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dpinn/common.hpp"
#include "dpinn/loss.hpp"
#include "dpinn/net.hpp"

namespace dpinn {

struct AdamOptions {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Bias-corrected first/second moment accumulators over every cell's
/// parameter tree, plus the shared step counter.
struct AdamState {
    std::vector<ParameterGradient> m;
    std::vector<ParameterGradient> v;
    long t = 0;
    AdamOptions opt;
};

inline AdamState make_adam_state(std::span<const NetworkParameters> params,
                                 const AdamOptions& opt = {}) {
    AdamState s;
    s.opt = opt;
    s.m.reserve(params.size());
    s.v.reserve(params.size());
    for (const NetworkParameters& p : params) {
        s.m.push_back(make_zero_gradient(p));
        s.v.push_back(make_zero_gradient(p));
    }
    return s;
}

namespace detail {

inline bool all_finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

inline void adam_update_block(std::vector<double>& x, std::vector<double>& m,
                              std::vector<double>& v, const std::vector<double>& g,
                              const AdamOptions& o, double bc1, double bc2) {
    for (std::size_t i = 0; i < x.size(); ++i) {
        m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * g[i];
        v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * g[i] * g[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        x[i] -= o.lr * mhat / (std::sqrt(vhat) + o.eps);
    }
}

} // namespace detail

/// One Adam step over all cells:
///   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2,  t <- t+1
///   theta <- theta - lr * (m/(1-b1^t)) / (sqrt(v/(1-b2^t)) + eps)
/// A non-finite gradient raises numerical_failure with the state untouched.
inline void adam_step(AdamState& state, std::vector<NetworkParameters>& params,
                      std::span<const ParameterGradient> grads) {
    if (grads.size() != params.size() || state.m.size() != params.size())
        throw invalid_input("adam_step: shape mismatch between state, params and gradient");
    for (std::size_t c = 0; c < grads.size(); ++c)
        for (std::size_t k = 0; k < grads[c].weights.size(); ++k)
            if (!detail::all_finite(grads[c].weights[k]) || !detail::all_finite(grads[c].biases[k]))
                throw numerical_failure("adam_step: non-finite gradient in cell " +
                                        std::to_string(c + 1) + " layer " + std::to_string(k));
    state.t += 1;
    const double bc1 = 1.0 - std::pow(state.opt.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.opt.beta2, static_cast<double>(state.t));
    for (std::size_t c = 0; c < params.size(); ++c)
        for (std::size_t k = 0; k < params[c].weights.size(); ++k) {
            detail::adam_update_block(params[c].weights[k], state.m[c].weights[k],
                                      state.v[c].weights[k], grads[c].weights[k], state.opt, bc1,
                                      bc2);
            detail::adam_update_block(params[c].biases[k], state.m[c].biases[k],
                                      state.v[c].biases[k], grads[c].biases[k], state.opt, bc1,
                                      bc2);
        }
}

/// Single-network convenience overload.
inline void adam_step(AdamState& state, NetworkParameters& params, const ParameterGradient& grad) {
    std::vector<NetworkParameters> ps{params};
    adam_step(state, ps, std::span<const ParameterGradient>(&grad, 1));
    params = std::move(ps[0]);
}

struct TrainBudget {
    long max_steps = 0;
    double loss_threshold = 0.0; // <= 0 disables the threshold stop
};

struct MetricsRecord {
    long step = 0;
    LossBreakdown loss;
};

struct TrainCallbacks {
    long checkpoint_interval = 0; // 0 disables periodic checkpoints
    std::function<void(long step, std::span<const NetworkParameters>)> on_checkpoint;
    std::function<void(long step, const LossBreakdown&)> on_log;
};

struct TrainResult {
    std::vector<NetworkParameters> params;
    std::vector<MetricsRecord> history;
    long steps_run = 0;
    bool hit_threshold = false;
};

/// Full-batch gradient descent on the composite loss. Deterministic for a
/// fixed (training set, initial params, options). The loss recorded at step s
/// is evaluated at the parameters after s updates. On numerical failure the
/// last good parameters are handed to on_checkpoint before rethrowing.
inline TrainResult train(const ProblemDefinition& problem, const TrainingSet& ts,
                         std::vector<NetworkParameters> initial, const TrainBudget& budget,
                         const AdamOptions& adam_opt, long log_interval = 100,
                         const TrainCallbacks& cb = {}) {
    if (budget.max_steps < 0) throw invalid_configuration("train: max_steps must be >= 0");
    if (log_interval < 1) throw invalid_configuration("train: log_interval must be >= 1");

    TrainResult res;
    res.params = std::move(initial);
    AdamState state = make_adam_state(res.params, adam_opt);
    std::vector<ParameterGradient> grads;

    auto record = [&](long step, const LossBreakdown& loss) {
        res.history.push_back({step, loss});
        if (cb.on_log) cb.on_log(step, loss);
    };

    long step = 0;
    try {
        while (true) {
            const bool last = step >= budget.max_steps;
            LossBreakdown loss;
            if (last) {
                loss = total_loss(problem, ts, res.params);
            } else {
                loss = total_loss_with_gradient(problem, ts, res.params, grads);
            }
            const bool threshold_hit =
                budget.loss_threshold > 0.0 && loss.total <= budget.loss_threshold;
            if (last || threshold_hit) {
                record(step, loss);
                res.hit_threshold = threshold_hit && !last;
                break;
            }
            if (step % log_interval == 0) record(step, loss);
            adam_step(state, res.params, grads);
            ++step;
            if (cb.checkpoint_interval > 0 && cb.on_checkpoint &&
                step % cb.checkpoint_interval == 0)
                cb.on_checkpoint(step, res.params);
        }
    } catch (const numerical_failure&) {
        if (cb.on_checkpoint) cb.on_checkpoint(step, res.params);
        throw;
    }
    res.steps_run = step;
    if (cb.on_checkpoint) cb.on_checkpoint(step, res.params);
    return res;
}

} // namespace dpinn
