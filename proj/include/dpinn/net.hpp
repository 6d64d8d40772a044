#pragma once

#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "dpinn/common.hpp"

namespace dpinn {

/// Hidden layers apply tanh; the final layer is always affine.
enum class Activation { Tanh };

/// Weights and biases of one dense feed-forward network.
/// weights[k] is row-major (layer_sizes[k+1] x layer_sizes[k]), one row per
/// output neuron; biases[k] has layer_sizes[k+1] entries.
struct NetworkParameters {
    std::vector<int> layer_sizes;
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;
    Activation activation = Activation::Tanh;

    int input_dim() const { return layer_sizes.front(); }
    int output_dim() const { return layer_sizes.back(); }
    int layer_count() const { return static_cast<int>(layer_sizes.size()) - 1; }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (std::size_t k = 0; k + 1 < layer_sizes.size(); ++k)
            n += static_cast<std::size_t>(layer_sizes[k + 1]) * (layer_sizes[k] + 1);
        return n;
    }
};

/// Same tree shape as NetworkParameters; holds d(scalar)/d(parameter).
struct ParameterGradient {
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;
};

/// Network output together with its exact input derivatives.
/// jac[o*n_in + i] = df_o/dx_i, hess_diag[o*n_in + i] = d2f_o/dx_i2.
struct FieldEvaluation {
    int n_out = 0;
    int n_in = 0;
    std::vector<double> value;
    std::vector<double> jac;
    std::vector<double> hess_diag;

    double v(int o) const { return value[o]; }
    double d(int o, int i) const { return jac[o * n_in + i]; }
    double dd(int o, int i) const { return hess_diag[o * n_in + i]; }
};

inline ParameterGradient make_zero_gradient(const NetworkParameters& p) {
    ParameterGradient g;
    g.weights.resize(p.weights.size());
    g.biases.resize(p.biases.size());
    for (std::size_t k = 0; k < p.weights.size(); ++k) {
        g.weights[k].assign(p.weights[k].size(), 0.0);
        g.biases[k].assign(p.biases[k].size(), 0.0);
    }
    return g;
}

inline void validate_layer_sizes(const std::vector<int>& sizes) {
    if (sizes.size() < 2)
        throw invalid_configuration("layer_sizes needs at least input and output dims, got " +
                                    std::to_string(sizes.size()) + " entries");
    for (int s : sizes)
        if (s < 1)
            throw invalid_configuration("layer_sizes entries must be positive, got " +
                                        std::to_string(s));
}

/// Glorot-uniform weights (+/- sqrt(6/(fan_in+fan_out))), zero biases.
/// Identical (sizes, seed) give bit-identical parameters on any platform.
inline NetworkParameters init_params(const std::vector<int>& layer_sizes, std::uint64_t seed) {
    validate_layer_sizes(layer_sizes);
    NetworkParameters p;
    p.layer_sizes = layer_sizes;
    const int L = p.layer_count();
    p.weights.resize(L);
    p.biases.resize(L);
    // xoshiro256++ with draws mapped to [0,1) by hand, so results do not
    // depend on std::uniform_real_distribution internals.
    std::uint64_t state[4];
    for (int i = 0; i < 4; ++i) state[i] = split_seed(seed, static_cast<std::uint64_t>(i) + 17);
    if ((state[0] | state[1] | state[2] | state[3]) == 0) state[0] = 0x9e3779b97f4a7c15ULL;
    auto next = [&state]() {
        // xoshiro256++
        auto rotl = [](std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); };
        std::uint64_t result = rotl(state[0] + state[3], 23) + state[0];
        std::uint64_t t = state[1] << 17;
        state[2] ^= state[0];
        state[3] ^= state[1];
        state[1] ^= state[2];
        state[0] ^= state[3];
        state[2] ^= t;
        state[3] = rotl(state[3], 45);
        return result;
    };
    for (int k = 0; k < L; ++k) {
        const int fan_in = layer_sizes[k];
        const int fan_out = layer_sizes[k + 1];
        const double bound = std::sqrt(6.0 / (fan_in + fan_out));
        p.weights[k].resize(static_cast<std::size_t>(fan_out) * fan_in);
        for (double& w : p.weights[k]) w = (2.0 * u01_from_bits(next()) - 1.0) * bound;
        p.biases[k].assign(fan_out, 0.0);
    }
    return p;
}

namespace detail {

/// Per-point record of the forward sweep with derivative streams.
///
/// Every layer carries parallel streams per neuron:
///   stream 0            value
///   stream 1 + i        d/dx_i
///   stream 1 + n_in + i d2/dx_i2   (omitted when with_hessian is false)
/// pre[k] holds the streams of the affine output of layer k, act[k] the
/// streams after activation (act[0] is the input itself). Both are kept so
/// the reverse sweep can form exact adjoints of value, Jacobian and diagonal
/// Hessian in one pass.
struct NetTape {
    int n_in = 0;
    int n_streams = 0;
    bool with_hessian = true;
    std::vector<std::vector<double>> pre;  // [layer 1..L] -> n_streams * s_k
    std::vector<std::vector<double>> act;  // [layer 0..L] -> n_streams * s_k
    std::vector<double> adj_a;             // scratch: act adjoint of current layer
    std::vector<double> adj_z;             // scratch: pre adjoint of current layer

    void resize(const NetworkParameters& p, bool hessian = true) {
        const int L = p.layer_count();
        n_in = p.input_dim();
        with_hessian = hessian;
        n_streams = 1 + n_in + (hessian ? n_in : 0);
        pre.resize(L);
        act.resize(L + 1);
        act[0].resize(static_cast<std::size_t>(n_streams) * n_in);
        int max_width = 0;
        for (int k = 0; k < L; ++k) {
            const int w = p.layer_sizes[k + 1];
            pre[k].resize(static_cast<std::size_t>(n_streams) * w);
            act[k + 1].resize(static_cast<std::size_t>(n_streams) * w);
            max_width = std::max(max_width, w);
        }
        adj_a.resize(static_cast<std::size_t>(n_streams) * std::max(max_width, n_in));
        adj_z.resize(adj_a.size());
    }
};

inline void forward_traced(const NetworkParameters& p, const double* x, NetTape& tape) {
    const int n_in = p.input_dim();
    const int ns = tape.n_streams;
    // Input streams: value = x, d x_i/d x_j = delta_ij, second derivatives 0.
    std::vector<double>& a0 = tape.act[0];
    std::fill(a0.begin(), a0.end(), 0.0);
    for (int i = 0; i < n_in; ++i) {
        a0[i] = x[i];
        a0[(1 + i) * n_in + i] = 1.0;
    }
    const int L = p.layer_count();
    for (int k = 0; k < L; ++k) {
        const int m = p.layer_sizes[k];
        const int n = p.layer_sizes[k + 1];
        const double* W = p.weights[k].data();
        const double* b = p.biases[k].data();
        const double* in = tape.act[k].data();
        double* z = tape.pre[k].data();
        for (int s = 0; s < ns; ++s) {
            const double* as = in + static_cast<std::size_t>(s) * m;
            double* zs = z + static_cast<std::size_t>(s) * n;
            for (int o = 0; o < n; ++o) {
                const double* row = W + static_cast<std::size_t>(o) * m;
                double acc = (s == 0) ? b[o] : 0.0;
                for (int j = 0; j < m; ++j) acc += row[j] * as[j];
                zs[o] = acc;
            }
        }
        double* out = tape.act[k + 1].data();
        if (k + 1 < L) {
            // tanh with first/second derivative streams:
            //   a  = tanh(z)
            //   a' = (1 - a^2) z'
            //   a''= -2 a (1 - a^2) z'^2 + (1 - a^2) z''
            for (int o = 0; o < n; ++o) {
                const double T = std::tanh(z[o]);
                const double d1 = 1.0 - T * T;
                const double d2 = -2.0 * T * d1;
                out[o] = T;
                for (int i = 0; i < n_in; ++i) {
                    const double zd = z[(1 + i) * n + o];
                    out[(1 + i) * n + o] = d1 * zd;
                    if (tape.with_hessian) {
                        const double zdd = z[(1 + n_in + i) * n + o];
                        out[(1 + n_in + i) * n + o] = d2 * zd * zd + d1 * zdd;
                    }
                }
            }
        } else {
            std::copy(z, z + static_cast<std::size_t>(ns) * n, out);
        }
    }
}

/// Reverse sweep. Seeds are adjoints of a scalar J with respect to the
/// network outputs: value_bar (n_out), jac_bar and hess_bar (n_out x n_in,
/// row-major, may be null for zero). Accumulates dJ/dtheta into grad.
inline void backprop(const NetworkParameters& p, NetTape& tape, const double* value_bar,
                     const double* jac_bar, const double* hess_bar, ParameterGradient& grad) {
    const int n_in = p.input_dim();
    const int ns = tape.n_streams;
    const int L = p.layer_count();
    const int n_out = p.output_dim();

    double* adj_a = tape.adj_a.data();
    std::fill(tape.adj_a.begin(), tape.adj_a.end(), 0.0);
    for (int o = 0; o < n_out; ++o) {
        adj_a[o] = value_bar ? value_bar[o] : 0.0;
        for (int i = 0; i < n_in; ++i) {
            if (jac_bar) adj_a[(1 + i) * n_out + o] = jac_bar[o * n_in + i];
            if (hess_bar && tape.with_hessian)
                adj_a[(1 + n_in + i) * n_out + o] = hess_bar[o * n_in + i];
        }
    }

    double* adj_z = tape.adj_z.data();
    for (int k = L - 1; k >= 0; --k) {
        const int m = p.layer_sizes[k];
        const int n = p.layer_sizes[k + 1];
        const double* z = tape.pre[k].data();
        const double* a = tape.act[k + 1].data();

        if (k == L - 1) {
            // Affine output layer: pre adjoint equals act adjoint.
            std::copy(adj_a, adj_a + static_cast<std::size_t>(ns) * n, adj_z);
        } else {
            // Invert the tanh stream rules. With T = a, f1 = 1-T^2,
            // f2 = -2 T f1, f3 = f1 (6 T^2 - 2):
            //   zbar   = abar f1 + sum_i adotbar_i f2 zdot_i
            //            + sum_i addotbar_i (f3 zdot_i^2 + f2 zddot_i)
            //   zdotbar_i  = adotbar_i f1 + 2 addotbar_i f2 zdot_i
            //   zddotbar_i = addotbar_i f1
            for (int o = 0; o < n; ++o) {
                const double T = a[o];
                const double f1 = 1.0 - T * T;
                const double f2 = -2.0 * T * f1;
                double zb = adj_a[o] * f1;
                for (int i = 0; i < n_in; ++i) {
                    const double zd = z[(1 + i) * n + o];
                    const double ab_d = adj_a[(1 + i) * n + o];
                    zb += ab_d * f2 * zd;
                    double zdb = ab_d * f1;
                    if (tape.with_hessian) {
                        const double f3 = f1 * (6.0 * T * T - 2.0);
                        const double zdd = z[(1 + n_in + i) * n + o];
                        const double ab_dd = adj_a[(1 + n_in + i) * n + o];
                        zb += ab_dd * (f3 * zd * zd + f2 * zdd);
                        zdb += 2.0 * ab_dd * f2 * zd;
                        adj_z[(1 + n_in + i) * n + o] = ab_dd * f1;
                    }
                    adj_z[(1 + i) * n + o] = zdb;
                }
                adj_z[o] = zb;
            }
        }

        // Parameter adjoints: W takes one outer product per stream, the bias
        // only sees the value stream (derivative streams have no bias).
        const double* in = tape.act[k].data();
        double* Wg = grad.weights[k].data();
        double* bg = grad.biases[k].data();
        for (int o = 0; o < n; ++o) {
            double* wrow = Wg + static_cast<std::size_t>(o) * m;
            for (int s = 0; s < ns; ++s) {
                const double zb = adj_z[s * n + o];
                if (zb == 0.0) continue;
                const double* as = in + static_cast<std::size_t>(s) * m;
                for (int j = 0; j < m; ++j) wrow[j] += zb * as[j];
            }
            bg[o] += adj_z[o];
        }

        if (k > 0) {
            // adj wrt previous activation: W^T applied per stream.
            const double* W = p.weights[k].data();
            for (int s = 0; s < ns; ++s) {
                double* out_s = adj_a + static_cast<std::size_t>(s) * m;
                const double* zb_s = adj_z + static_cast<std::size_t>(s) * n;
                for (int j = 0; j < m; ++j) out_s[j] = 0.0;
                for (int o = 0; o < n; ++o) {
                    const double zb = zb_s[o];
                    if (zb == 0.0) continue;
                    const double* row = W + static_cast<std::size_t>(o) * m;
                    for (int j = 0; j < m; ++j) out_s[j] += zb * row[j];
                }
            }
        }
    }
}

} // namespace detail

/// Plain forward pass.
inline std::vector<double> forward(const NetworkParameters& p, std::span<const double> x) {
    if (static_cast<int>(x.size()) != p.input_dim())
        throw invalid_input("forward: input has " + std::to_string(x.size()) +
                            " entries, network expects " + std::to_string(p.input_dim()));
    std::vector<double> cur(x.begin(), x.end());
    std::vector<double> nxt;
    const int L = p.layer_count();
    for (int k = 0; k < L; ++k) {
        const int m = p.layer_sizes[k];
        const int n = p.layer_sizes[k + 1];
        nxt.assign(n, 0.0);
        for (int o = 0; o < n; ++o) {
            double acc = p.biases[k][o];
            const double* row = p.weights[k].data() + static_cast<std::size_t>(o) * m;
            for (int j = 0; j < m; ++j) acc += row[j] * cur[j];
            nxt[o] = (k + 1 < L) ? std::tanh(acc) : acc;
        }
        cur.swap(nxt);
    }
    return cur;
}

/// Value, Jacobian and diagonal Hessian in one exact pass.
inline FieldEvaluation evaluate_with_derivatives(const NetworkParameters& p,
                                                 std::span<const double> x) {
    if (static_cast<int>(x.size()) != p.input_dim())
        throw invalid_input("evaluate_with_derivatives: input has " + std::to_string(x.size()) +
                            " entries, network expects " + std::to_string(p.input_dim()));
    detail::NetTape tape;
    tape.resize(p);
    detail::forward_traced(p, x.data(), tape);
    const int n_in = p.input_dim();
    const int n_out = p.output_dim();
    FieldEvaluation e;
    e.n_in = n_in;
    e.n_out = n_out;
    e.value.resize(n_out);
    e.jac.resize(static_cast<std::size_t>(n_out) * n_in);
    e.hess_diag.resize(static_cast<std::size_t>(n_out) * n_in);
    const double* out = tape.act.back().data();
    for (int o = 0; o < n_out; ++o) {
        e.value[o] = out[o];
        for (int i = 0; i < n_in; ++i) {
            e.jac[o * n_in + i] = out[(1 + i) * n_out + o];
            e.hess_diag[o * n_in + i] = out[(1 + n_in + i) * n_out + o];
        }
    }
    return e;
}

/// Differentiation session for one network: evaluate at points, seed adjoints
/// of a scalar against each evaluation, collect the exact parameter gradient.
/// Buffers are reused across points; evaluate() invalidates the previous view.
/// with_hessian = false skips the second-derivative streams (the returned
/// hess_diag is then identically zero and hess seeds are ignored), saving
/// roughly a third of the work for first-order problems.
class GradientSession {
public:
    explicit GradientSession(const NetworkParameters& p, bool with_hessian = true) : params_(&p) {
        tape_.resize(p, with_hessian);
        grad_ = make_zero_gradient(p);
        eval_.n_in = p.input_dim();
        eval_.n_out = p.output_dim();
        eval_.value.resize(eval_.n_out);
        eval_.jac.resize(static_cast<std::size_t>(eval_.n_out) * eval_.n_in);
        eval_.hess_diag.resize(static_cast<std::size_t>(eval_.n_out) * eval_.n_in);
    }

    const NetworkParameters& params() const { return *params_; }

    const FieldEvaluation& evaluate(std::span<const double> x) {
        if (static_cast<int>(x.size()) != params_->input_dim())
            throw invalid_input("GradientSession::evaluate: bad input size");
        detail::forward_traced(*params_, x.data(), tape_);
        const int n_in = eval_.n_in;
        const int n_out = eval_.n_out;
        const double* out = tape_.act.back().data();
        for (int o = 0; o < n_out; ++o) {
            eval_.value[o] = out[o];
            for (int i = 0; i < n_in; ++i) {
                eval_.jac[o * n_in + i] = out[(1 + i) * n_out + o];
                eval_.hess_diag[o * n_in + i] =
                    tape_.with_hessian ? out[(1 + n_in + i) * n_out + o] : 0.0;
            }
        }
        bool ok = true;
        for (double v : eval_.value) ok = ok && is_finite(v);
        for (double v : eval_.jac) ok = ok && is_finite(v);
        for (double v : eval_.hess_diag) ok = ok && is_finite(v);
        if (!ok)
            throw numerical_failure("network evaluation produced a non-finite value at (" +
                                    format_double(x[0]) +
                                    (n_in > 1 ? ", " + format_double(x[1]) : "") + ")");
        return eval_;
    }

    /// Accumulate adjoints for the most recent evaluate() call. Null spans
    /// mean an all-zero seed for that block.
    void accumulate(std::span<const double> value_bar, std::span<const double> jac_bar,
                    std::span<const double> hess_bar) {
        detail::backprop(*params_, tape_, value_bar.empty() ? nullptr : value_bar.data(),
                         jac_bar.empty() ? nullptr : jac_bar.data(),
                         hess_bar.empty() ? nullptr : hess_bar.data(), grad_);
    }

    ParameterGradient take_gradient() { return std::move(grad_); }

    void reset() { grad_ = make_zero_gradient(*params_); }

private:
    const NetworkParameters* params_;
    detail::NetTape tape_;
    ParameterGradient grad_;
    FieldEvaluation eval_;
};

/// Loss value plus its exact parameter gradient. The functional receives a
/// GradientSession, evaluates the network wherever it needs, seeds the
/// adjoints of its scalar, and returns the scalar.
template <class F>
std::pair<double, ParameterGradient> loss_gradient(const NetworkParameters& p, F&& functional) {
    GradientSession session(p);
    const double value = static_cast<double>(functional(session));
    if (!is_finite(value)) throw numerical_failure("loss functional returned a non-finite value");
    return {value, session.take_gradient()};
}

// --- checkpoint format ----------------------------------------------------
//
// Plain text, whitespace-separated tokens, decimals printed with 17
// significant digits so reload is bit-exact:
//
//   dpinn-checkpoint v1
//   cells <count>
//   cell <index>
//   layers <n> <size_0> ... <size_n-1>
//   activation tanh
//   W<k> <rows> <cols>
//   <rows lines of cols values>
//   b<k> <len>
//   <len values>
//   ...
//   end

inline void save_checkpoint(std::ostream& os, std::span<const NetworkParameters> nets) {
    os << "dpinn-checkpoint v1\n";
    os << "cells " << nets.size() << "\n";
    for (std::size_t c = 0; c < nets.size(); ++c) {
        const NetworkParameters& p = nets[c];
        os << "cell " << (c + 1) << "\n";
        os << "layers " << p.layer_sizes.size();
        for (int s : p.layer_sizes) os << " " << s;
        os << "\nactivation tanh\n";
        for (int k = 0; k < p.layer_count(); ++k) {
            const int rows = p.layer_sizes[k + 1];
            const int cols = p.layer_sizes[k];
            os << "W" << k << " " << rows << " " << cols << "\n";
            for (int r = 0; r < rows; ++r) {
                for (int j = 0; j < cols; ++j)
                    os << (j ? " " : "") << format_double(p.weights[k][r * cols + j]);
                os << "\n";
            }
            os << "b" << k << " " << rows << "\n";
            for (int r = 0; r < rows; ++r) os << (r ? " " : "") << format_double(p.biases[k][r]);
            os << "\n";
        }
    }
    os << "end\n";
}

inline std::vector<NetworkParameters> load_checkpoint(std::istream& is) {
    auto fail = [](const std::string& msg) -> void {
        throw invalid_input("checkpoint: " + msg);
    };
    std::string tok;
    auto expect = [&](const std::string& want) {
        if (!(is >> tok) || tok != want) fail("expected '" + want + "', got '" + tok + "'");
    };
    expect("dpinn-checkpoint");
    expect("v1");
    expect("cells");
    std::size_t count = 0;
    if (!(is >> count)) fail("missing cell count");
    std::vector<NetworkParameters> nets(count);
    for (std::size_t c = 0; c < count; ++c) {
        expect("cell");
        std::size_t idx = 0;
        if (!(is >> idx) || idx != c + 1) fail("cell index out of order");
        expect("layers");
        std::size_t n_sizes = 0;
        if (!(is >> n_sizes) || n_sizes < 2) fail("bad layer count");
        NetworkParameters& p = nets[c];
        p.layer_sizes.resize(n_sizes);
        for (auto& s : p.layer_sizes)
            if (!(is >> s)) fail("missing layer size");
        validate_layer_sizes(p.layer_sizes);
        expect("activation");
        expect("tanh");
        const int L = p.layer_count();
        p.weights.resize(L);
        p.biases.resize(L);
        for (int k = 0; k < L; ++k) {
            expect("W" + std::to_string(k));
            int rows = 0, cols = 0;
            if (!(is >> rows >> cols) || rows != p.layer_sizes[k + 1] || cols != p.layer_sizes[k])
                fail("weight shape mismatch in layer " + std::to_string(k));
            p.weights[k].resize(static_cast<std::size_t>(rows) * cols);
            for (auto& w : p.weights[k])
                if (!(is >> w)) fail("missing weight value");
            expect("b" + std::to_string(k));
            int len = 0;
            if (!(is >> len) || len != rows) fail("bias length mismatch in layer " + std::to_string(k));
            p.biases[k].resize(len);
            for (auto& b : p.biases[k])
                if (!(is >> b)) fail("missing bias value");
        }
    }
    expect("end");
    return nets;
}

inline void save_checkpoint_file(const std::string& path, std::span<const NetworkParameters> nets) {
    std::ofstream os(path);
    if (!os) throw invalid_input("cannot open checkpoint file for writing: " + path);
    save_checkpoint(os, nets);
}

inline std::vector<NetworkParameters> load_checkpoint_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw invalid_input("cannot open checkpoint file: " + path);
    return load_checkpoint(is);
}

} // namespace dpinn
