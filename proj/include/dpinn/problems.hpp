#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dpinn/common.hpp"
#include "dpinn/grid.hpp"

namespace dpinn {

inline constexpr double kPi = 3.14159265358979323846;

/// Field data at one point, already mapped to global coordinates.
struct PointEvalView {
    int n_out = 0;
    int n_in = 0;
    const double* value = nullptr;
    const double* jac = nullptr;  // [o*n_in + i]
    const double* hess = nullptr; // [o*n_in + i], pure second derivatives

    double v(int o) const { return value[o]; }
    double d(int o, int i) const { return jac[o * n_in + i]; }
    double dd(int o, int i) const { return hess[o * n_in + i]; }
};

/// Residual values plus their exact partial derivatives with respect to the
/// field evaluation slots; everything a gradient pass needs from a PDE.
struct ResidualJet {
    int n_res = 0;
    int n_out = 0;
    int n_in = 0;
    std::vector<double> r;       // n_res
    std::vector<double> d_value; // n_res x n_out
    std::vector<double> d_jac;   // n_res x n_out x n_in
    std::vector<double> d_hess;  // n_res x n_out x n_in

    void resize(int nr, int no, int ni) {
        n_res = nr;
        n_out = no;
        n_in = ni;
        r.assign(nr, 0.0);
        d_value.assign(static_cast<std::size_t>(nr) * no, 0.0);
        d_jac.assign(static_cast<std::size_t>(nr) * no * ni, 0.0);
        d_hess.assign(static_cast<std::size_t>(nr) * no * ni, 0.0);
    }
    void clear() {
        std::fill(r.begin(), r.end(), 0.0);
        std::fill(d_value.begin(), d_value.end(), 0.0);
        std::fill(d_jac.begin(), d_jac.end(), 0.0);
        std::fill(d_hess.begin(), d_hess.end(), 0.0);
    }
    double& dv(int c, int o) { return d_value[c * n_out + o]; }
    double& dj(int c, int o, int i) { return d_jac[(c * n_out + o) * n_in + i]; }
    double& dh(int c, int o, int i) { return d_hess[(c * n_out + o) * n_in + i]; }
};

/// Dirichlet data at a boundary point: per-output target values plus a mask
/// of which outputs are actually constrained there.
struct BoundaryValues {
    std::array<double, 3> target{};
    std::array<bool, 3> active{};
};

/// A PDE system over the two-axis domain: residual operator (with partials),
/// boundary/initial data, interface smoothness requirements and constants.
struct ProblemDefinition {
    std::string name;
    int input_dims = 2;
    int output_dims = 1;
    int residual_dims = 1;
    Domain2D default_domain;
    bool needs_hessian = false;
    /// How boundary-condition points are placed along exterior faces.
    FaceSampling boundary_sampling = FaceSampling::IncludeEndpoints;

    /// Fills jet.r and the partials. jet must be resized by the caller.
    std::function<void(const Point2&, const PointEvalView&, ResidualJet&)> residual;
    std::function<BoundaryValues(const Point2&)> boundary_data;
    std::function<double(double)> initial_data; // empty for steady problems

    /// Outputs whose first derivative must match across interfaces with the
    /// given normal axis (C1 coupling); value continuity (C0) always applies
    /// to every output.
    std::array<std::vector<int>, 2> c1_outputs;

    /// Output pinned to zero at one reference point (pressure gauge).
    struct GaugePin {
        Point2 point;
        int output = 0;
    };
    std::optional<GaugePin> gauge_pin;

    bool has_initial_condition() const { return static_cast<bool>(initial_data); }

    /// Residual values only.
    void eval_residual(const Point2& p, const PointEvalView& e, std::span<double> out,
                       ResidualJet& scratch) const {
        scratch.resize(residual_dims, output_dims, input_dims);
        residual(p, e, scratch);
        for (int c = 0; c < residual_dims; ++c) out[c] = scratch.r[c];
    }
};

// --- advection: u_t + u_x = 0 ----------------------------------------------

/// Wave-packet initial profile exp(-x^2) sin(10 pi x).
inline double advection_initial(double x) { return std::exp(-x * x) * std::sin(10.0 * kPi * x); }

/// Unit-speed transport of the initial profile.
inline double advection_exact(double x, double t) { return advection_initial(x - t); }

inline ProblemDefinition advection_problem(const Domain2D& domain) {
    validate_domain(domain);
    ProblemDefinition p;
    p.name = "advection";
    p.output_dims = 1;
    p.residual_dims = 1;
    p.default_domain = domain;
    p.needs_hessian = false;
    p.residual = [](const Point2&, const PointEvalView& e, ResidualJet& jet) {
        jet.r[0] = e.d(0, 1) + e.d(0, 0);
        jet.dj(0, 0, 0) = 1.0;
        jet.dj(0, 0, 1) = 1.0;
    };
    p.boundary_data = [](const Point2& g) {
        BoundaryValues b;
        b.target[0] = advection_exact(g.a0, g.a1);
        b.active[0] = true;
        return b;
    };
    p.initial_data = [](double x) { return advection_initial(x); };
    return p;
}

inline ProblemDefinition advection_problem() {
    return advection_problem({{-1.0, 1.0}, {0.0, 0.2}, AxisKind::SpaceTime});
}

// --- Burgers: u_t + u u_x = nu u_xx -----------------------------------------

inline double burgers_initial(double x) { return std::sin(-kPi * x); }

inline ProblemDefinition burgers_problem(double nu, bool allow_zero = true) {
    if (nu < 0.0)
        throw invalid_configuration("burgers viscosity must be >= 0, got " + format_double(nu));
    if (nu == 0.0 && !allow_zero)
        throw invalid_configuration("burgers viscosity is zero but zero was not allowed");
    ProblemDefinition p;
    p.name = "burgers";
    p.output_dims = 1;
    p.residual_dims = 1;
    p.default_domain = {{-1.0, 1.0}, {0.0, 0.5}, AxisKind::SpaceTime};
    p.needs_hessian = nu > 0.0;
    p.residual = [nu](const Point2&, const PointEvalView& e, ResidualJet& jet) {
        const double u = e.v(0);
        const double ux = e.d(0, 0);
        jet.r[0] = e.d(0, 1) + u * ux - nu * e.dd(0, 0);
        jet.dv(0, 0) = ux;
        jet.dj(0, 0, 0) = u;
        jet.dj(0, 0, 1) = 1.0;
        jet.dh(0, 0, 0) = -nu;
    };
    p.boundary_data = [](const Point2&) {
        BoundaryValues b;
        b.target[0] = 0.0;
        b.active[0] = true;
        return b;
    };
    p.initial_data = [](double x) { return burgers_initial(x); };
    if (nu > 0.0) p.c1_outputs[0] = {0};
    return p;
}

// --- steady incompressible Navier-Stokes, lid-driven cavity -----------------

struct CavityConstants {
    double rho = 1.0;
    double nu = 0.1;
    double lid_speed = 1.0;
    double length = 1.0;

    double reynolds() const { return rho * lid_speed * length / nu; }

    static CavityConstants from_reynolds(double re) {
        if (!(re > 0.0)) throw invalid_configuration("cavity Reynolds number must be positive");
        CavityConstants c;
        c.nu = c.rho * c.lid_speed * c.length / re;
        return c;
    }
};

inline void validate_cavity_constants(const CavityConstants& c) {
    if (!(c.rho > 0.0)) throw invalid_configuration("cavity density must be positive");
    if (!(c.nu > 0.0)) throw invalid_configuration("cavity viscosity must be positive");
    if (!(c.length > 0.0)) throw invalid_configuration("cavity length must be positive");
}

/// Outputs (u, v, p); residuals (continuity, x-momentum, y-momentum).
/// Boundary data: lid u = U0, v = 0 on the top face, no-slip elsewhere;
/// pressure is gauged by pinning output 2 to zero at the bottom-left corner.
inline ProblemDefinition cavity_problem(const CavityConstants& c) {
    validate_cavity_constants(c);
    ProblemDefinition p;
    p.name = "cavity";
    p.output_dims = 3;
    p.residual_dims = 3;
    p.default_domain = {{0.0, c.length}, {0.0, c.length}, AxisKind::SpaceSpace};
    p.needs_hessian = true;
    const double inv_rho = 1.0 / c.rho;
    const double nu = c.nu;
    p.residual = [inv_rho, nu](const Point2&, const PointEvalView& e, ResidualJet& jet) {
        const double u = e.v(0), v = e.v(1);
        const double ux = e.d(0, 0), uy = e.d(0, 1);
        const double vx = e.d(1, 0), vy = e.d(1, 1);
        // continuity
        jet.r[0] = ux + vy;
        jet.dj(0, 0, 0) = 1.0;
        jet.dj(0, 1, 1) = 1.0;
        // x-momentum
        jet.r[1] = u * ux + v * uy + inv_rho * e.d(2, 0) - nu * (e.dd(0, 0) + e.dd(0, 1));
        jet.dv(1, 0) = ux;
        jet.dv(1, 1) = uy;
        jet.dj(1, 0, 0) = u;
        jet.dj(1, 0, 1) = v;
        jet.dj(1, 2, 0) = inv_rho;
        jet.dh(1, 0, 0) = -nu;
        jet.dh(1, 0, 1) = -nu;
        // y-momentum
        jet.r[2] = u * vx + v * vy + inv_rho * e.d(2, 1) - nu * (e.dd(1, 0) + e.dd(1, 1));
        jet.dv(2, 0) = vx;
        jet.dv(2, 1) = vy;
        jet.dj(2, 1, 0) = u;
        jet.dj(2, 1, 1) = v;
        jet.dj(2, 2, 1) = inv_rho;
        jet.dh(2, 1, 0) = -nu;
        jet.dh(2, 1, 1) = -nu;
    };
    const double top = c.length;
    const double lid = c.lid_speed;
    p.boundary_data = [top, lid](const Point2& g) {
        BoundaryValues b;
        const bool on_lid = std::abs(g.a1 - top) <= 1e-12 * std::max(1.0, top);
        b.target[0] = on_lid ? lid : 0.0;
        b.target[1] = 0.0;
        b.active[0] = true;
        b.active[1] = true;
        return b;
    };
    p.c1_outputs[0] = {0, 1};
    p.c1_outputs[1] = {0, 1};
    p.gauge_pin = ProblemDefinition::GaugePin{{0.0, 0.0}, 2};
    // The lid meets the side walls with a velocity jump; sampling away from
    // the corners keeps boundary targets single-valued.
    p.boundary_sampling = FaceSampling::InteriorOffset;
    return p;
}

} // namespace dpinn
