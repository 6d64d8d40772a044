#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dpinn/common.hpp"
#include "dpinn/grid.hpp"
#include "dpinn/net.hpp"
#include "dpinn/problems.hpp"

namespace dpinn {

/// Residual samples over one point set; contributes xi'xi / (2N).
struct ResidualBatch {
    std::vector<double> xi;

    long count() const { return static_cast<long>(xi.size()); }
    double contribution() const {
        if (xi.empty()) return 0.0;
        double s = 0.0;
        for (double v : xi) s += v * v;
        return s / (2.0 * static_cast<double>(xi.size()));
    }
};

/// The composite loss, one scalar per term. total is always the exact sum
/// of the parts. c0x/c1x couple cells across faces whose normal is axis0,
/// c0t/c1t across faces whose normal is axis1 (t, or y for planar problems).
struct LossBreakdown {
    double j_pde = 0.0;
    double j_bc = 0.0;
    double j_ic = 0.0;
    double j_c0x = 0.0;
    double j_c0t = 0.0;
    double j_c1x = 0.0;
    double j_c1t = 0.0;
    double total = 0.0;

    void sum_parts() { total = j_pde + j_bc + j_ic + j_c0x + j_c0t + j_c1x + j_c1t; }
};

enum class CollocationMode { Tensor, Random };

struct TrainingSetOptions {
    int colloc_n0 = 9;
    int colloc_n1 = 5;
    CollocationMode mode = CollocationMode::Tensor;
    long random_total = 0;         // Random mode: points over the whole domain
    std::uint64_t seed = 0;        // Random mode sampling seed
    int interface_points = 10;
};

/// All point data a training run needs, precomputed once: global points and
/// their per-cell normalized twins, boundary/initial targets, interface
/// pairings and the optional gauge pin.
struct TrainingSet {
    struct CellPoints {
        std::vector<Point2> global;
        std::vector<Point2> local;
    };
    struct BcFace {
        int cell = 0;
        Face face = Face::Bottom;
        std::vector<Point2> global;
        std::vector<Point2> local;
        std::vector<BoundaryValues> values;
    };
    struct IcFace {
        int cell = 0;
        std::vector<Point2> global;
        std::vector<Point2> local;
        std::vector<double> target;
    };
    struct InterfaceFace {
        int cell_lo = 0;
        int cell_hi = 0;
        int axis = 0;
        std::vector<Point2> global;
        std::vector<Point2> local_lo;
        std::vector<Point2> local_hi;
    };
    struct Pin {
        int cell = 0;
        Point2 local;
        int output = 0;
    };

    CellGrid grid;
    std::vector<CellPoints> collocation;
    std::vector<BcFace> bc;
    std::vector<IcFace> ic;
    std::vector<InterfaceFace> interfaces;
    std::optional<Pin> pin;

    long collocation_point_count() const {
        long n = 0;
        for (const auto& c : collocation) n += static_cast<long>(c.global.size());
        return n;
    }
};

namespace detail {

inline int locate_edge_bin(const std::vector<double>& edges, double v) {
    // Index of the cell interval containing v, clamped to valid range.
    int lo = 0, hi = static_cast<int>(edges.size()) - 2;
    int bin = static_cast<int>((v - edges.front()) / (edges.back() - edges.front()) *
                               (edges.size() - 1));
    bin = std::clamp(bin, lo, hi);
    while (bin > lo && v < edges[bin]) --bin;
    while (bin < hi && v >= edges[bin + 1]) ++bin;
    return bin;
}

} // namespace detail

inline TrainingSet build_training_set(const ProblemDefinition& problem, const CellGrid& grid,
                                      const TrainingSetOptions& opt) {
    TrainingSet ts;
    ts.grid = grid;
    const int nc = grid.cell_count();
    ts.collocation.resize(nc);

    if (opt.mode == CollocationMode::Tensor) {
        if (opt.colloc_n0 < 1 || opt.colloc_n1 < 1)
            throw invalid_configuration("collocation counts must be >= 1");
        for (int i = 1; i <= nc; ++i) {
            const Cell& cell = grid.cell(i);
            auto pts = collocation_points(cell, opt.colloc_n0, opt.colloc_n1);
            auto& set = ts.collocation[i - 1];
            set.global = std::move(pts);
            set.local.reserve(set.global.size());
            for (const Point2& g : set.global) set.local.push_back(cell.normalize(g));
        }
    } else {
        if (opt.random_total < 1)
            throw invalid_configuration("random collocation mode needs a positive total");
        std::uint64_t state[4];
        for (int i = 0; i < 4; ++i)
            state[i] = split_seed(opt.seed, static_cast<std::uint64_t>(i) + 101);
        if ((state[0] | state[1] | state[2] | state[3]) == 0) state[0] = 1;
        auto next = [&state]() {
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
        const Domain2D& d = grid.domain;
        for (long k = 0; k < opt.random_total; ++k) {
            Point2 g{d.axis0.lo + u01_from_bits(next()) * d.axis0.width(),
                     d.axis1.lo + u01_from_bits(next()) * d.axis1.width()};
            const int col = detail::locate_edge_bin(grid.edges0, g.a0);
            const int row = detail::locate_edge_bin(grid.edges1, g.a1);
            const int idx = row * grid.nb0 + col + 1;
            const Cell& cell = grid.cell(idx);
            ts.collocation[idx - 1].global.push_back(g);
            ts.collocation[idx - 1].local.push_back(cell.normalize(g));
        }
    }

    InterfaceSet ifs = interface_points(grid, opt.interface_points, problem.boundary_sampling);
    for (InterfacePair& pair : ifs.pairs) {
        TrainingSet::InterfaceFace f;
        f.cell_lo = pair.cell_lo;
        f.cell_hi = pair.cell_hi;
        f.axis = pair.axis;
        const Cell& lo = grid.cell(pair.cell_lo);
        const Cell& hi = grid.cell(pair.cell_hi);
        for (const Point2& g : pair.points) {
            f.local_lo.push_back(lo.normalize(g));
            f.local_hi.push_back(hi.normalize(g));
        }
        f.global = std::move(pair.points);
        ts.interfaces.push_back(std::move(f));
    }

    const bool space_time = grid.domain.kind == AxisKind::SpaceTime;
    for (BoundaryFace& bf : ifs.boundary) {
        const Cell& cell = grid.cell(bf.cell);
        if (space_time && bf.face == Face::Bottom && problem.has_initial_condition()) {
            TrainingSet::IcFace f;
            f.cell = bf.cell;
            for (const Point2& g : bf.points) {
                f.local.push_back(cell.normalize(g));
                f.target.push_back(problem.initial_data(g.a0));
            }
            f.global = std::move(bf.points);
            ts.ic.push_back(std::move(f));
            continue;
        }
        if (space_time && (bf.face == Face::Bottom || bf.face == Face::Top))
            continue; // no condition on the open time faces
        TrainingSet::BcFace f;
        f.cell = bf.cell;
        f.face = bf.face;
        for (const Point2& g : bf.points) {
            f.local.push_back(cell.normalize(g));
            f.values.push_back(problem.boundary_data(g));
        }
        f.global = std::move(bf.points);
        ts.bc.push_back(std::move(f));
    }

    if (problem.gauge_pin) {
        const Point2 g = problem.gauge_pin->point;
        const int col = detail::locate_edge_bin(grid.edges0, g.a0);
        const int row = detail::locate_edge_bin(grid.edges1, g.a1);
        const int idx = row * grid.nb0 + col + 1;
        ts.pin = TrainingSet::Pin{idx, grid.cell(idx).normalize(g), problem.gauge_pin->output};
    }
    return ts;
}

namespace detail {

/// Which loss terms a pass should assemble.
struct LossParts {
    bool pde = true;
    bool bc = true;
    bool ic = true;
    bool c0 = true;
    bool c1 = true;
};

/// One pass over the training set: loss parts and, when grads is non-null,
/// the exact parameter gradient of the total. Evaluation order is fixed so
/// repeated runs are bit-identical.
class LossAssembler {
public:
    LossAssembler(const ProblemDefinition& problem, const TrainingSet& ts,
                  std::span<const NetworkParameters> params)
        : problem_(problem), ts_(ts), params_(params) {
        if (static_cast<int>(params.size()) != ts.grid.cell_count())
            throw invalid_input("loss: expected one parameter tree per cell (" +
                                std::to_string(ts.grid.cell_count()) + "), got " +
                                std::to_string(params.size()));
        const int n_in = 2;
        for (const NetworkParameters& p : params) {
            if (p.input_dim() != n_in)
                throw invalid_input("loss: cell networks must take 2 inputs");
            if (p.output_dim() != problem.output_dims)
                throw invalid_input("loss: cell network outputs " +
                                    std::to_string(p.output_dim()) + " fields, problem has " +
                                    std::to_string(problem.output_dims));
        }
        jet_.resize(problem.residual_dims, problem.output_dims, n_in);
        const std::size_t slots = static_cast<std::size_t>(problem.output_dims) * n_in;
        jac_g_.resize(slots);
        hess_g_.resize(slots);
        vbar_.resize(problem.output_dims);
        jbar_.resize(slots);
        hbar_.resize(slots);
    }

    void set_want_grad(bool w) { want_grad_ = w; }

    LossBreakdown compute(const LossParts& parts, std::vector<ParameterGradient>* grads) {
        sessions_.clear();
        sessions_.reserve(params_.size());
        for (const NetworkParameters& p : params_)
            sessions_.emplace_back(p, problem_.needs_hessian);

        LossBreakdown out;
        if (parts.pde) out.j_pde = pde_term();
        if (parts.bc) out.j_bc = bc_term();
        if (parts.ic) out.j_ic = ic_term();
        if (parts.c0 || parts.c1) interface_terms(parts, out);
        out.sum_parts();
        if (!is_finite(out.total)) throw numerical_failure("loss total is non-finite");

        if (grads) {
            grads->clear();
            grads->reserve(sessions_.size());
            for (auto& s : sessions_) grads->push_back(s.take_gradient());
        }
        return out;
    }

private:
    const ProblemDefinition& problem_;
    const TrainingSet& ts_;
    std::span<const NetworkParameters> params_;
    std::vector<GradientSession> sessions_;
    ResidualJet jet_;
    std::vector<double> jac_g_, hess_g_;
    std::vector<double> vbar_, jbar_, hbar_;
    bool want_grad_ = false;

    GradientSession& session(int cell_index1) { return sessions_[cell_index1 - 1]; }

    /// Evaluate cell network at a local point and map derivatives to global
    /// coordinates (inputs are cell-normalized, so each first derivative
    /// scales by 1/width and each second by 1/width^2).
    PointEvalView eval_global(int cell_index1, const Point2& local) {
        const Cell& cell = ts_.grid.cell(cell_index1);
        const double in[2] = {local.a0, local.a1};
        const FieldEvaluation& e = session(cell_index1).evaluate(std::span<const double>(in, 2));
        const double iw0 = 1.0 / cell.width0();
        const double iw1 = 1.0 / cell.width1();
        const int no = e.n_out;
        for (int o = 0; o < no; ++o) {
            jac_g_[o * 2 + 0] = e.jac[o * 2 + 0] * iw0;
            jac_g_[o * 2 + 1] = e.jac[o * 2 + 1] * iw1;
            hess_g_[o * 2 + 0] = e.hess_diag[o * 2 + 0] * iw0 * iw0;
            hess_g_[o * 2 + 1] = e.hess_diag[o * 2 + 1] * iw1 * iw1;
        }
        return PointEvalView{no, 2, e.value.data(), jac_g_.data(), hess_g_.data()};
    }

    void clear_seeds() {
        std::fill(vbar_.begin(), vbar_.end(), 0.0);
        std::fill(jbar_.begin(), jbar_.end(), 0.0);
        std::fill(hbar_.begin(), hbar_.end(), 0.0);
    }

    /// Push global-coordinate seeds through the normalization chain rule into
    /// the cell's session.
    void accumulate_global(int cell_index1, bool value_only) {
        const Cell& cell = ts_.grid.cell(cell_index1);
        if (!value_only) {
            const double iw0 = 1.0 / cell.width0();
            const double iw1 = 1.0 / cell.width1();
            for (int o = 0; o < problem_.output_dims; ++o) {
                jbar_[o * 2 + 0] *= iw0;
                jbar_[o * 2 + 1] *= iw1;
                hbar_[o * 2 + 0] *= iw0 * iw0;
                hbar_[o * 2 + 1] *= iw1 * iw1;
            }
            session(cell_index1).accumulate(vbar_, jbar_, hbar_);
        } else {
            session(cell_index1).accumulate(vbar_, {}, {});
        }
    }

    double pde_term() {
        double total = 0.0;
        const int nr = problem_.residual_dims;
        const int no = problem_.output_dims;
        ResidualBatch batch;
        for (int i = 1; i <= ts_.grid.cell_count(); ++i) {
            const auto& set = ts_.collocation[i - 1];
            if (set.global.empty()) continue;
            batch.xi.clear();
            const double inv_n = 1.0 / (static_cast<double>(set.global.size()) * nr);
            for (std::size_t p = 0; p < set.global.size(); ++p) {
                PointEvalView view = eval_global(i, set.local[p]);
                jet_.clear();
                problem_.residual(set.global[p], view, jet_);
                for (int c = 0; c < nr; ++c) {
                    const double r = jet_.r[c];
                    if (!is_finite(r))
                        throw numerical_failure("non-finite PDE residual in cell " +
                                                std::to_string(i) + " at " +
                                                point_str(set.global[p]));
                    batch.xi.push_back(r);
                }
                if (want_grad_) {
                    clear_seeds();
                    for (int c = 0; c < nr; ++c) {
                        const double w = jet_.r[c] * inv_n;
                        if (w == 0.0) continue;
                        for (int o = 0; o < no; ++o) {
                            vbar_[o] += w * jet_.d_value[c * no + o];
                            for (int k = 0; k < 2; ++k) {
                                jbar_[o * 2 + k] += w * jet_.d_jac[(c * no + o) * 2 + k];
                                hbar_[o * 2 + k] += w * jet_.d_hess[(c * no + o) * 2 + k];
                            }
                        }
                    }
                    accumulate_global(i, false);
                }
            }
            total += batch.contribution();
        }
        return total;
    }

    double bc_term() {
        double total = 0.0;
        for (const auto& f : ts_.bc) {
            if (f.global.empty()) continue;
            long n_entries = 0;
            for (const BoundaryValues& bv : f.values)
                for (int o = 0; o < problem_.output_dims; ++o)
                    if (bv.active[o]) ++n_entries;
            if (n_entries == 0) continue;
            const double inv_n = 1.0 / static_cast<double>(n_entries);
            double acc = 0.0;
            for (std::size_t p = 0; p < f.global.size(); ++p) {
                PointEvalView view = eval_global(f.cell, f.local[p]);
                clear_seeds();
                for (int o = 0; o < problem_.output_dims; ++o) {
                    if (!f.values[p].active[o]) continue;
                    const double m = view.v(o) - f.values[p].target[o];
                    acc += m * m;
                    vbar_[o] = m * inv_n;
                }
                if (want_grad_) accumulate_global(f.cell, true);
            }
            total += acc * 0.5 * inv_n;
        }
        if (ts_.pin) {
            PointEvalView view = eval_global(ts_.pin->cell, ts_.pin->local);
            const double m = view.v(ts_.pin->output);
            total += 0.5 * m * m;
            if (want_grad_) {
                clear_seeds();
                vbar_[ts_.pin->output] = m;
                accumulate_global(ts_.pin->cell, true);
            }
        }
        return total;
    }

    double ic_term() {
        double total = 0.0;
        for (const auto& f : ts_.ic) {
            if (f.global.empty()) continue;
            const double inv_n = 1.0 / static_cast<double>(f.global.size());
            double acc = 0.0;
            for (std::size_t p = 0; p < f.global.size(); ++p) {
                PointEvalView view = eval_global(f.cell, f.local[p]);
                const double m = view.v(0) - f.target[p];
                acc += m * m;
                if (want_grad_) {
                    clear_seeds();
                    vbar_[0] = m * inv_n;
                    accumulate_global(f.cell, true);
                }
            }
            total += acc * 0.5 * inv_n;
        }
        return total;
    }

    void interface_terms(const LossParts& parts, LossBreakdown& out) {
        const int no = problem_.output_dims;
        std::vector<double> lo_value(no), lo_jac(static_cast<std::size_t>(no) * 2);
        for (const auto& f : ts_.interfaces) {
            if (f.global.empty()) continue;
            const auto& c1_outs = problem_.c1_outputs[f.axis];
            const bool do_c1 = parts.c1 && !c1_outs.empty();
            const bool do_c0 = parts.c0;
            if (!do_c0 && !do_c1) continue;
            const double n_pts = static_cast<double>(f.global.size());
            const double inv_n_c0 = 1.0 / (n_pts * no);
            const double inv_n_c1 =
                do_c1 ? 1.0 / (n_pts * static_cast<double>(c1_outs.size())) : 0.0;
            double acc_c0 = 0.0, acc_c1 = 0.0;
            for (std::size_t p = 0; p < f.global.size(); ++p) {
                // Evaluate the lower cell and copy what the mismatch needs
                // before the shared buffers are reused by the upper cell.
                PointEvalView vl = eval_global(f.cell_lo, f.local_lo[p]);
                for (int o = 0; o < no; ++o) {
                    lo_value[o] = vl.v(o);
                    lo_jac[o * 2 + 0] = vl.d(o, 0);
                    lo_jac[o * 2 + 1] = vl.d(o, 1);
                }
                PointEvalView vh = eval_global(f.cell_hi, f.local_hi[p]);
                // Seeds for the hi cell first (its tape is current), then lo.
                clear_seeds();
                if (do_c0)
                    for (int o = 0; o < no; ++o) {
                        const double m = lo_value[o] - vh.v(o);
                        acc_c0 += m * m;
                        vbar_[o] = -m * inv_n_c0;
                    }
                if (do_c1)
                    for (int o : c1_outs) {
                        const double m = lo_jac[o * 2 + f.axis] - vh.d(o, f.axis);
                        acc_c1 += m * m;
                        jbar_[o * 2 + f.axis] = -m * inv_n_c1;
                    }
                if (want_grad_) accumulate_global(f.cell_hi, !do_c1);
                clear_seeds();
                if (do_c0)
                    for (int o = 0; o < no; ++o)
                        vbar_[o] = (lo_value[o] - vh.v(o)) * inv_n_c0;
                if (do_c1)
                    for (int o : c1_outs)
                        jbar_[o * 2 + f.axis] =
                            (lo_jac[o * 2 + f.axis] - vh.d(o, f.axis)) * inv_n_c1;
                if (want_grad_) accumulate_global(f.cell_lo, !do_c1);
            }
            if (do_c0) (f.axis == 0 ? out.j_c0x : out.j_c0t) += acc_c0 * 0.5 * inv_n_c0;
            if (do_c1) (f.axis == 0 ? out.j_c1x : out.j_c1t) += acc_c1 * 0.5 * inv_n_c1;
        }
    }
};

} // namespace detail

inline LossBreakdown total_loss(const ProblemDefinition& problem, const TrainingSet& ts,
                                std::span<const NetworkParameters> params) {
    detail::LossAssembler a(problem, ts, params);
    a.set_want_grad(false);
    return a.compute(detail::LossParts{}, nullptr);
}

inline LossBreakdown total_loss_with_gradient(const ProblemDefinition& problem,
                                              const TrainingSet& ts,
                                              std::span<const NetworkParameters> params,
                                              std::vector<ParameterGradient>& grads) {
    detail::LossAssembler a(problem, ts, params);
    a.set_want_grad(true);
    return a.compute(detail::LossParts{}, &grads);
}

inline double pde_loss(const ProblemDefinition& problem, const TrainingSet& ts,
                       std::span<const NetworkParameters> params) {
    detail::LossAssembler a(problem, ts, params);
    a.set_want_grad(false);
    detail::LossParts parts{true, false, false, false, false};
    return a.compute(parts, nullptr).j_pde;
}

inline double bc_loss(const ProblemDefinition& problem, const TrainingSet& ts,
                      std::span<const NetworkParameters> params) {
    detail::LossAssembler a(problem, ts, params);
    a.set_want_grad(false);
    detail::LossParts parts{false, true, false, false, false};
    return a.compute(parts, nullptr).j_bc;
}

inline double ic_loss(const ProblemDefinition& problem, const TrainingSet& ts,
                      std::span<const NetworkParameters> params) {
    detail::LossAssembler a(problem, ts, params);
    a.set_want_grad(false);
    detail::LossParts parts{false, false, true, false, false};
    return a.compute(parts, nullptr).j_ic;
}

/// Mean-squared value mismatch across interfaces whose normal is `axis`.
inline double interface_c0_loss(const ProblemDefinition& problem, const TrainingSet& ts,
                                std::span<const NetworkParameters> params, int axis) {
    detail::LossAssembler a(problem, ts, params);
    a.set_want_grad(false);
    detail::LossParts parts{false, false, false, true, false};
    LossBreakdown b = a.compute(parts, nullptr);
    return axis == 0 ? b.j_c0x : b.j_c0t;
}

/// Mean-squared global-coordinate first-derivative mismatch across
/// interfaces whose normal is `axis`.
inline double interface_c1_loss(const ProblemDefinition& problem, const TrainingSet& ts,
                                std::span<const NetworkParameters> params, int axis) {
    detail::LossAssembler a(problem, ts, params);
    a.set_want_grad(false);
    detail::LossParts parts{false, false, false, false, true};
    LossBreakdown b = a.compute(parts, nullptr);
    return axis == 0 ? b.j_c1x : b.j_c1t;
}

} // namespace dpinn
