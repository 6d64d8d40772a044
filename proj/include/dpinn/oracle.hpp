#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "dpinn/common.hpp"
#include "dpinn/net.hpp"
#include "dpinn/problems.hpp"

namespace dpinn {

// --- central-difference gradient over a parameter tree ----------------------

/// Central differences of a scalar function of one network's parameters.
template <class F>
ParameterGradient finite_difference_gradient(F&& f, const NetworkParameters& params, double step) {
    if (!(step > 0.0)) throw invalid_input("finite_difference_gradient: step must be positive");
    NetworkParameters work = params;
    ParameterGradient g = make_zero_gradient(params);
    auto probe = [&](std::vector<double>& block, std::size_t i) {
        const double saved = block[i];
        block[i] = saved + step;
        const double fp = f(static_cast<const NetworkParameters&>(work));
        block[i] = saved - step;
        const double fm = f(static_cast<const NetworkParameters&>(work));
        block[i] = saved;
        return (fp - fm) / (2.0 * step);
    };
    for (std::size_t k = 0; k < work.weights.size(); ++k) {
        for (std::size_t i = 0; i < work.weights[k].size(); ++i)
            g.weights[k][i] = probe(work.weights[k], i);
        for (std::size_t i = 0; i < work.biases[k].size(); ++i)
            g.biases[k][i] = probe(work.biases[k], i);
    }
    return g;
}

/// Same, over the concatenated trees of several cells.
template <class F>
std::vector<ParameterGradient> finite_difference_gradient_multi(
    F&& f, const std::vector<NetworkParameters>& params, double step) {
    if (!(step > 0.0)) throw invalid_input("finite_difference_gradient: step must be positive");
    std::vector<NetworkParameters> work = params;
    std::vector<ParameterGradient> g;
    g.reserve(params.size());
    for (const auto& p : params) g.push_back(make_zero_gradient(p));
    auto probe = [&](std::vector<double>& block, std::size_t i) {
        const double saved = block[i];
        block[i] = saved + step;
        const double fp = f(static_cast<const std::vector<NetworkParameters>&>(work));
        block[i] = saved - step;
        const double fm = f(static_cast<const std::vector<NetworkParameters>&>(work));
        block[i] = saved;
        return (fp - fm) / (2.0 * step);
    };
    for (std::size_t c = 0; c < work.size(); ++c)
        for (std::size_t k = 0; k < work[c].weights.size(); ++k) {
            for (std::size_t i = 0; i < work[c].weights[k].size(); ++i)
                g[c].weights[k][i] = probe(work[c].weights[k], i);
            for (std::size_t i = 0; i < work[c].biases[k].size(); ++i)
                g[c].biases[k][i] = probe(work[c].biases[k], i);
        }
    return g;
}

// --- inviscid Burgers by characteristics ------------------------------------

/// Characteristic solution of u_t + u u_x = 0 with u(x,0) = sin(-pi x):
/// the implicit equation u = sin(-pi (x - u t)) solved by safeguarded Newton.
/// Valid strictly before shock formation at t = 1/pi.
inline double burgers_characteristics(double x, double t) {
    if (t < 0.0) throw invalid_input("burgers_characteristics: t must be >= 0");
    if (t >= 1.0 / kPi)
        throw out_of_validity("burgers_characteristics: t = " + format_double(t) +
                              " is past shock formation at 1/pi");
    if (t == 0.0) return std::sin(-kPi * x);
    // g(u) = u + sin(pi (x - u t)); g(-1) <= 0 <= g(1), g' = 1 - pi t cos(...) > 0.
    double lo = -1.0, hi = 1.0;
    double u = std::sin(-kPi * x);
    for (int it = 0; it < 200; ++it) {
        const double s = kPi * (x - u * t);
        const double g = u + std::sin(s);
        if (std::abs(g) <= 1e-13) return u;
        if (g > 0.0)
            hi = u;
        else
            lo = u;
        const double dg = 1.0 - kPi * t * std::cos(s);
        double next = u - g / dg;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        u = next;
    }
    const double res = u + std::sin(kPi * (x - u * t));
    if (std::abs(res) <= 1e-12) return u;
    throw numerical_failure("burgers_characteristics: Newton failed at x=" + format_double(x) +
                            " t=" + format_double(t) + " residual=" + format_double(res));
}

// --- viscous Burgers by Cole-Hopf quadrature ---------------------------------

namespace detail {

// Gauss 7 / Kronrod 15 pair on [-1, 1].
struct GK15 {
    static constexpr std::array<double, 8> xk = {
        0.991455371120812639207, 0.949107912342758524526, 0.864864423359769072789,
        0.741531185599394439864, 0.586087235467691130295, 0.405845151377397166907,
        0.207784955007898467601, 0.0};
    static constexpr std::array<double, 8> wk = {
        0.022935322010529224964, 0.063092092629978553291, 0.104790010322250183840,
        0.140653259715525918745, 0.169004726639267902827, 0.190350578064785409913,
        0.204432940075298892414, 0.209482141084727828013};
    static constexpr std::array<double, 4> wg = {
        0.129484966168869693271, 0.279705391489276667901, 0.381830050505118944950,
        0.417959183673469387755};
};

/// Integrates a 2-component integrand with the GK15 pair, bisecting until
/// both embedded error estimates are below the per-length tolerance.
template <class F>
void gk_adaptive(F&& f, double a, double b, double tol_per_len, int depth,
                 std::array<double, 2>& acc) {
    const double c = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    std::array<double, 2> ik{0.0, 0.0}, ig{0.0, 0.0};
    for (int i = 0; i < 8; ++i) {
        std::array<double, 2> fv{0.0, 0.0};
        if (i == 7) {
            f(c, fv);
        } else {
            std::array<double, 2> f1{0.0, 0.0}, f2{0.0, 0.0};
            f(c - half * GK15::xk[i], f1);
            f(c + half * GK15::xk[i], f2);
            fv = {f1[0] + f2[0], f1[1] + f2[1]};
        }
        ik[0] += GK15::wk[i] * fv[0];
        ik[1] += GK15::wk[i] * fv[1];
        if (i % 2 == 1) {
            ig[0] += GK15::wg[i / 2] * fv[0];
            ig[1] += GK15::wg[i / 2] * fv[1];
        }
    }
    ik[0] *= half;
    ik[1] *= half;
    ig[0] *= half;
    ig[1] *= half;
    const double err = std::max(std::abs(ik[0] - ig[0]), std::abs(ik[1] - ig[1]));
    if (err <= tol_per_len * (b - a) || depth >= 48) {
        if (depth >= 48 && err > 1e3 * tol_per_len * (b - a))
            throw numerical_failure("adaptive quadrature failed to converge");
        acc[0] += ik[0];
        acc[1] += ik[1];
        return;
    }
    gk_adaptive(f, a, c, tol_per_len, depth + 1, acc);
    gk_adaptive(f, c, b, tol_per_len, depth + 1, acc);
}

} // namespace detail

/// Exact viscous Burgers solution for u_t + u u_x = nu u_xx with
/// u(x,0) = sin(-pi x), via the Cole-Hopf integral representation
///
///   u(x,t) = int (x-y)/t K(x,y,t) dy / int K(x,y,t) dy,
///   K = exp(-cos(pi y)/(2 pi nu) - (x-y)^2/(4 nu t)),
///
/// evaluated by adaptive Gauss-Kronrod quadrature after substituting
/// y = x + eta sqrt(4 nu t) and shifting the exponent to avoid overflow.
inline double burgers_cole_hopf(double x, double t, double nu) {
    if (!(nu > 0.0)) throw invalid_input("burgers_cole_hopf: nu must be positive");
    if (t < 0.0) throw invalid_input("burgers_cole_hopf: t must be >= 0");
    if (x < -1.0 - 1e-12 || x > 1.0 + 1e-12)
        throw invalid_input("burgers_cole_hopf: x must lie in [-1, 1]");
    if (t < 1e-13) return std::sin(-kPi * x);

    const double sigma = std::sqrt(4.0 * nu * t);
    const double cos_scale = 1.0 / (2.0 * kPi * nu);
    const double L = std::sqrt(2.0 * cos_scale + 60.0);

    auto exponent = [&](double eta) {
        const double y = x + eta * sigma;
        return -std::cos(kPi * y) * cos_scale - eta * eta;
    };
    double shift = -std::numeric_limits<double>::infinity();
    const int presample = 201;
    for (int i = 0; i < presample; ++i) {
        const double eta = -L + 2.0 * L * i / (presample - 1);
        shift = std::max(shift, exponent(eta));
    }

    const double vel_scale = sigma / t; // |integrand| of the numerator ~ L * vel_scale
    auto integrand = [&](double eta, std::array<double, 2>& out) {
        const double w = std::exp(exponent(eta) - shift);
        out[0] = -eta * vel_scale * w;
        out[1] = w;
    };
    std::array<double, 2> acc{0.0, 0.0};
    const double tol = 1e-11 * std::max(1.0, L * vel_scale) / (2.0 * L);
    // Seed the adaptive pass with a few segments so narrow peaks are found.
    const int seed_segments = 16;
    for (int s = 0; s < seed_segments; ++s) {
        const double a = -L + 2.0 * L * s / seed_segments;
        const double b = -L + 2.0 * L * (s + 1) / seed_segments;
        detail::gk_adaptive(integrand, a, b, tol, 0, acc);
    }
    if (!(acc[1] > 0.0) || !is_finite(acc[0]))
        throw numerical_failure("burgers_cole_hopf: quadrature produced an unusable result");
    return acc[0] / acc[1];
}

// --- lid-driven cavity reference solver --------------------------------------

/// Steady cavity fields from a second-order vorticity-streamfunction
/// finite-difference iteration on an n x n node grid over the unit square.
/// Velocities derive from the streamfunction, so the discrete flow is
/// divergence-free by construction; no pressure field is produced.
struct CavityReference {
    int n = 0;
    double re = 0.0;
    std::vector<double> psi;   // [j*n + i], i along x, j along y
    std::vector<double> u;
    std::vector<double> v;
    std::vector<double> omega;
    long iterations = 0;
    double final_residual = 0.0;

    double h() const { return 1.0 / (n - 1); }

    double bilinear(const std::vector<double>& f, double x, double y) const {
        const double hx = h();
        double fx = std::clamp(x, 0.0, 1.0) / hx;
        double fy = std::clamp(y, 0.0, 1.0) / hx;
        int i = std::min(static_cast<int>(fx), n - 2);
        int j = std::min(static_cast<int>(fy), n - 2);
        const double ax = fx - i;
        const double ay = fy - j;
        return (1 - ax) * (1 - ay) * f[j * n + i] + ax * (1 - ay) * f[j * n + i + 1] +
               (1 - ax) * ay * f[(j + 1) * n + i] + ax * ay * f[(j + 1) * n + i + 1];
    }

    double u_at(double x, double y) const { return bilinear(u, x, y); }
    double v_at(double x, double y) const { return bilinear(v, x, y); }
    double psi_at(double x, double y) const { return bilinear(psi, x, y); }

    /// Discrete volume flux through the vertical line at x: the sum of
    /// per-segment streamfunction differences, which telescopes to
    /// psi(x,1) - psi(x,0).
    double net_flux_vertical(double x) const {
        double flux = 0.0;
        for (int j = 0; j + 1 < n; ++j) {
            const double y0 = static_cast<double>(j) / (n - 1);
            const double y1 = static_cast<double>(j + 1) / (n - 1);
            flux += psi_at(x, y1) - psi_at(x, y0);
        }
        return flux;
    }
};

inline CavityReference cavity_reference(double re, int n, double tol = 1e-8,
                                        long max_outer = 200000) {
    if (!(re > 0.0) || re > 100.0)
        throw invalid_configuration("cavity_reference: Re must lie in (0, 100], got " +
                                    format_double(re));
    if (n < 33) throw invalid_configuration("cavity_reference: grid must have n >= 33 nodes");

    CavityReference ref;
    ref.n = n;
    ref.re = re;
    const std::size_t nn = static_cast<std::size_t>(n) * n;
    ref.psi.assign(nn, 0.0);
    ref.omega.assign(nn, 0.0);
    ref.u.assign(nn, 0.0);
    ref.v.assign(nn, 0.0);
    const double h = ref.h();
    const double h2 = h * h;
    const double lid = 1.0;
    auto id = [n](int i, int j) { return static_cast<std::size_t>(j) * n + i; };

    for (int i = 0; i < n; ++i) ref.u[id(i, n - 1)] = lid;

    const double sor = 2.0 / (1.0 + std::sin(kPi * h)); // optimal for the Poisson sweep
    const double relax_w = 0.6;
    double dmax = 0.0;
    long outer = 0;
    for (outer = 1; outer <= max_outer; ++outer) {
        // Streamfunction: a few SOR sweeps of lap(psi) = -omega.
        for (int sweep = 0; sweep < 3; ++sweep)
            for (int j = 1; j + 1 < n; ++j)
                for (int i = 1; i + 1 < n; ++i) {
                    const double rhs = 0.25 * (ref.psi[id(i + 1, j)] + ref.psi[id(i - 1, j)] +
                                               ref.psi[id(i, j + 1)] + ref.psi[id(i, j - 1)] +
                                               h2 * ref.omega[id(i, j)]);
                    ref.psi[id(i, j)] += sor * (rhs - ref.psi[id(i, j)]);
                }
        // Velocities from the streamfunction.
        for (int j = 1; j + 1 < n; ++j)
            for (int i = 1; i + 1 < n; ++i) {
                ref.u[id(i, j)] = (ref.psi[id(i, j + 1)] - ref.psi[id(i, j - 1)]) / (2.0 * h);
                ref.v[id(i, j)] = -(ref.psi[id(i + 1, j)] - ref.psi[id(i - 1, j)]) / (2.0 * h);
            }
        // Wall vorticity (Thom's relations).
        dmax = 0.0;
        for (int i = 1; i + 1 < n; ++i) {
            const double wb = -2.0 * ref.psi[id(i, 1)] / h2;
            const double wt = -2.0 * ref.psi[id(i, n - 2)] / h2 - 2.0 * lid / h;
            dmax = std::max({dmax, std::abs(wb - ref.omega[id(i, 0)]),
                             std::abs(wt - ref.omega[id(i, n - 1)])});
            ref.omega[id(i, 0)] = wb;
            ref.omega[id(i, n - 1)] = wt;
        }
        for (int j = 1; j + 1 < n; ++j) {
            const double wl = -2.0 * ref.psi[id(1, j)] / h2;
            const double wr = -2.0 * ref.psi[id(n - 2, j)] / h2;
            dmax = std::max({dmax, std::abs(wl - ref.omega[id(0, j)]),
                             std::abs(wr - ref.omega[id(n - 1, j)])});
            ref.omega[id(0, j)] = wl;
            ref.omega[id(n - 1, j)] = wr;
        }
        // Interior vorticity: one relaxed Gauss-Seidel sweep of the steady
        // transport balance u w_x + v w_y = (1/Re) lap(w).
        for (int j = 1; j + 1 < n; ++j)
            for (int i = 1; i + 1 < n; ++i) {
                const double we = ref.omega[id(i + 1, j)], ww = ref.omega[id(i - 1, j)];
                const double wn = ref.omega[id(i, j + 1)], ws = ref.omega[id(i, j - 1)];
                const double conv = ref.u[id(i, j)] * (we - ww) + ref.v[id(i, j)] * (wn - ws);
                const double target = 0.25 * (we + ww + wn + ws) - 0.125 * re * h * conv;
                const double delta = target - ref.omega[id(i, j)];
                dmax = std::max(dmax, std::abs(delta));
                ref.omega[id(i, j)] += relax_w * delta;
            }
        if (dmax <= tol) break;
        if (!is_finite(dmax))
            throw numerical_failure("cavity_reference: iteration diverged at outer step " +
                                    std::to_string(outer));
    }
    if (dmax > tol)
        throw numerical_failure("cavity_reference: no convergence after " +
                                std::to_string(max_outer) + " iterations, residual " +
                                format_double(dmax));
    ref.iterations = outer;
    ref.final_residual = dmax;
    return ref;
}

// --- oracle disk cache --------------------------------------------------------

inline std::string cavity_cache_filename(double re, int n) {
    std::string re_s = format_double(re);
    for (char& c : re_s)
        if (c == '.' || c == '+' || c == '-') c = '_';
    return "cavity_re" + re_s + "_n" + std::to_string(n) + ".txt";
}

inline void save_cavity_cache(const std::string& path, const CavityReference& ref) {
    std::ofstream os(path);
    if (!os) throw invalid_input("cannot open oracle cache for writing: " + path);
    os << "dpinn-oracle-cache v1\nkind cavity\n";
    os << "re " << format_double(ref.re) << "\nn " << ref.n << "\n";
    os << "iterations " << ref.iterations << "\nresidual " << format_double(ref.final_residual)
       << "\n";
    auto dump = [&os](const char* tag, const std::vector<double>& f) {
        os << tag << " " << f.size() << "\n";
        for (std::size_t i = 0; i < f.size(); ++i)
            os << format_double(f[i]) << ((i + 1) % 8 == 0 ? "\n" : " ");
        os << "\n";
    };
    dump("psi", ref.psi);
    dump("omega", ref.omega);
    dump("u", ref.u);
    dump("v", ref.v);
    os << "end\n";
}

inline CavityReference load_cavity_cache(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw invalid_input("cannot open oracle cache: " + path);
    auto fail = [&path](const std::string& m) -> void {
        throw invalid_input("oracle cache " + path + ": " + m);
    };
    std::string tok;
    auto expect = [&](const std::string& want) {
        if (!(is >> tok) || tok != want) fail("expected '" + want + "'");
    };
    expect("dpinn-oracle-cache");
    expect("v1");
    expect("kind");
    expect("cavity");
    CavityReference ref;
    expect("re");
    if (!(is >> ref.re)) fail("missing re");
    expect("n");
    if (!(is >> ref.n) || ref.n < 2) fail("bad n");
    expect("iterations");
    if (!(is >> ref.iterations)) fail("missing iterations");
    expect("residual");
    if (!(is >> ref.final_residual)) fail("missing residual");
    auto slurp = [&](const char* tag, std::vector<double>& f) {
        expect(tag);
        std::size_t len = 0;
        if (!(is >> len) || len != static_cast<std::size_t>(ref.n) * ref.n) fail("bad field size");
        f.resize(len);
        for (auto& x : f)
            if (!(is >> x)) fail("missing field value");
    };
    slurp("psi", ref.psi);
    slurp("omega", ref.omega);
    slurp("u", ref.u);
    slurp("v", ref.v);
    expect("end");
    return ref;
}

/// Load the cavity reference from `cache_dir` if present, otherwise solve and
/// store it. An empty cache_dir disables caching.
inline CavityReference cavity_reference_cached(double re, int n, const std::string& cache_dir) {
    if (cache_dir.empty()) return cavity_reference(re, n);
    namespace fs = std::filesystem;
    const fs::path path = fs::path(cache_dir) / cavity_cache_filename(re, n);
    if (fs::exists(path)) {
        CavityReference ref = load_cavity_cache(path.string());
        if (ref.n == n && ref.re == re) return ref;
    }
    CavityReference ref = cavity_reference(re, n);
    std::error_code ec;
    fs::create_directories(cache_dir, ec);
    save_cavity_cache(path.string(), ref);
    return ref;
}

} // namespace dpinn
