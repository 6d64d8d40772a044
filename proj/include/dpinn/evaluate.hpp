#pragma once

#include <cmath>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dpinn/common.hpp"
#include "dpinn/config.hpp"
#include "dpinn/grid.hpp"
#include "dpinn/loss.hpp"
#include "dpinn/net.hpp"
#include "dpinn/optim.hpp"
#include "dpinn/oracle.hpp"
#include "dpinn/problems.hpp"

namespace dpinn {

/// The trained per-cell networks stitched into one field over the domain.
/// A point is routed to its containing cell; points that lie on interior
/// interfaces (within a 1e-12 relative slack) take the average of every
/// adjacent cell's value.
class StitchedField {
public:
    StitchedField(const CellGrid& grid, std::span<const NetworkParameters> params)
        : grid_(&grid), params_(params) {
        if (static_cast<int>(params.size()) != grid.cell_count())
            throw invalid_input("stitched field: expected " + std::to_string(grid.cell_count()) +
                                " parameter trees, got " + std::to_string(params.size()));
        n_out_ = params.empty() ? 0 : params_[0].output_dim();
    }

    int output_dim() const { return n_out_; }
    const CellGrid& grid() const { return *grid_; }

    /// 1-based indices of every cell containing the point.
    std::vector<int> containing_cells(const Point2& g) const {
        auto bins = [](const std::vector<double>& edges, double v) {
            std::vector<int> out;
            const double extent = edges.back() - edges.front();
            const double tol = 1e-12 * std::max(1.0, std::abs(extent));
            if (v < edges.front() - tol || v > edges.back() + tol) return out;
            const int nb = static_cast<int>(edges.size()) - 1;
            int bin = static_cast<int>((v - edges.front()) / extent * nb);
            bin = std::clamp(bin, 0, nb - 1);
            while (bin > 0 && v < edges[bin] - tol) --bin;
            while (bin < nb - 1 && v > edges[bin + 1] + tol) ++bin;
            out.push_back(bin);
            // On an interior edge the neighbor bin also contains the point.
            if (bin > 0 && std::abs(v - edges[bin]) <= tol) out.push_back(bin - 1);
            if (bin < nb - 1 && std::abs(v - edges[bin + 1]) <= tol) out.push_back(bin + 1);
            return out;
        };
        std::vector<int> cols = bins(grid_->edges0, g.a0);
        std::vector<int> rows = bins(grid_->edges1, g.a1);
        std::vector<int> cells;
        for (int r : rows)
            for (int c : cols) cells.push_back(r * grid_->nb0 + c + 1);
        return cells;
    }

    /// Field values at a global point (cell-averaged on interfaces).
    std::vector<double> value(const Point2& g) const {
        std::vector<int> cells = containing_cells(g);
        if (cells.empty())
            throw invalid_input("stitched field: point " + point_str(g) + " outside the domain");
        std::vector<double> acc(n_out_, 0.0);
        for (int idx : cells) {
            const Cell& cell = grid_->cell(idx);
            const Point2 local = cell.normalize(g);
            const double in[2] = {local.a0, local.a1};
            const auto v = forward(params_[idx - 1], std::span<const double>(in, 2));
            for (int o = 0; o < n_out_; ++o) acc[o] += v[o];
        }
        for (double& a : acc) a /= static_cast<double>(cells.size());
        return acc;
    }

    /// Value plus global-coordinate derivatives, averaged the same way.
    FieldEvaluation eval_global(const Point2& g) const {
        std::vector<int> cells = containing_cells(g);
        if (cells.empty())
            throw invalid_input("stitched field: point " + point_str(g) + " outside the domain");
        FieldEvaluation out;
        out.n_out = n_out_;
        out.n_in = 2;
        out.value.assign(n_out_, 0.0);
        out.jac.assign(static_cast<std::size_t>(n_out_) * 2, 0.0);
        out.hess_diag.assign(static_cast<std::size_t>(n_out_) * 2, 0.0);
        for (int idx : cells) {
            const Cell& cell = grid_->cell(idx);
            const Point2 local = cell.normalize(g);
            const double in[2] = {local.a0, local.a1};
            FieldEvaluation e =
                evaluate_with_derivatives(params_[idx - 1], std::span<const double>(in, 2));
            const double iw0 = 1.0 / cell.width0();
            const double iw1 = 1.0 / cell.width1();
            for (int o = 0; o < n_out_; ++o) {
                out.value[o] += e.value[o];
                out.jac[o * 2 + 0] += e.jac[o * 2 + 0] * iw0;
                out.jac[o * 2 + 1] += e.jac[o * 2 + 1] * iw1;
                out.hess_diag[o * 2 + 0] += e.hess_diag[o * 2 + 0] * iw0 * iw0;
                out.hess_diag[o * 2 + 1] += e.hess_diag[o * 2 + 1] * iw1 * iw1;
            }
        }
        const double inv = 1.0 / static_cast<double>(cells.size());
        for (auto& v : out.value) v *= inv;
        for (auto& v : out.jac) v *= inv;
        for (auto& v : out.hess_diag) v *= inv;
        return out;
    }

private:
    const CellGrid* grid_;
    std::span<const NetworkParameters> params_;
    int n_out_ = 0;
};

/// Per-output reference values at a point; `has` marks available outputs.
using ReferenceFn = std::function<void(const Point2&, std::span<double> ref, std::span<char> has)>;

inline ReferenceFn make_advection_reference() {
    return [](const Point2& g, std::span<double> ref, std::span<char> has) {
        ref[0] = advection_exact(g.a0, g.a1);
        has[0] = 1;
    };
}

inline ReferenceFn make_burgers_reference(double nu) {
    if (nu > 0.0)
        return [nu](const Point2& g, std::span<double> ref, std::span<char> has) {
            ref[0] = burgers_cole_hopf(g.a0, g.a1, nu);
            has[0] = 1;
        };
    return [](const Point2& g, std::span<double> ref, std::span<char> has) {
        ref[0] = burgers_characteristics(g.a0, g.a1);
        has[0] = 1;
    };
}

/// u and v from the finite-difference cavity solution; pressure has no
/// reference (the oracle's formulation eliminates it).
inline ReferenceFn make_cavity_reference_fn(std::shared_ptr<const CavityReference> ref) {
    return [ref](const Point2& g, std::span<double> out, std::span<char> has) {
        out[0] = ref->u_at(g.a0, g.a1);
        out[1] = ref->v_at(g.a0, g.a1);
        has[0] = 1;
        has[1] = 1;
        has[2] = 0;
    };
}

struct EvaluationRow {
    Point2 point;
    std::vector<double> predicted;
    std::vector<double> reference;
    std::vector<char> has_reference;
};

/// Error summary over an evaluation point set: mse and rel_l2 run over every
/// (point, output) pair that has a reference value; rel_l2 is absent when
/// the reference norm vanishes.
struct EvaluationReport {
    long n_points = 0;
    long n_compared = 0;
    double mse = 0.0;
    std::optional<double> rel_l2;
    std::vector<double> mse_per_output;

    std::string summary() const {
        std::string s = "points=" + std::to_string(n_points) + " mse=" + format_double(mse);
        s += " rel_l2=";
        s += rel_l2 ? format_double(*rel_l2) : std::string("n/a");
        return s;
    }
};

/// Tensor evaluation grid over a window, both endpoints included, a0 fastest.
inline std::vector<Point2> evaluation_grid(const Interval& a0, const Interval& a1, int n0, int n1) {
    if (n0 < 2 || n1 < 2) throw invalid_configuration("evaluation grid needs n0, n1 >= 2");
    std::vector<Point2> pts;
    pts.reserve(static_cast<std::size_t>(n0) * n1);
    for (int j = 0; j < n1; ++j) {
        const double y = (j == n1 - 1) ? a1.hi : a1.lo + j * a1.width() / (n1 - 1);
        for (int i = 0; i < n0; ++i) {
            const double x = (i == n0 - 1) ? a0.hi : a0.lo + i * a0.width() / (n0 - 1);
            pts.push_back({x, y});
        }
    }
    return pts;
}

inline std::pair<EvaluationReport, std::vector<EvaluationRow>> evaluate_field(
    const StitchedField& field, std::span<const Point2> points, const ReferenceFn& reference) {
    const int no = field.output_dim();
    EvaluationReport rep;
    rep.mse_per_output.assign(no, 0.0);
    std::vector<long> count_per_output(no, 0);
    std::vector<EvaluationRow> rows;
    rows.reserve(points.size());
    double sq_err = 0.0, sq_ref = 0.0;
    for (const Point2& g : points) {
        EvaluationRow row;
        row.point = g;
        row.predicted = field.value(g);
        row.reference.assign(no, 0.0);
        row.has_reference.assign(no, 0);
        if (reference) reference(g, row.reference, row.has_reference);
        for (int o = 0; o < no; ++o) {
            if (!row.has_reference[o]) continue;
            const double d = row.predicted[o] - row.reference[o];
            sq_err += d * d;
            sq_ref += row.reference[o] * row.reference[o];
            rep.mse_per_output[o] += d * d;
            ++count_per_output[o];
            ++rep.n_compared;
        }
        rows.push_back(std::move(row));
    }
    rep.n_points = static_cast<long>(points.size());
    if (rep.n_compared > 0) rep.mse = sq_err / static_cast<double>(rep.n_compared);
    for (int o = 0; o < no; ++o)
        if (count_per_output[o] > 0) rep.mse_per_output[o] /= static_cast<double>(count_per_output[o]);
    if (sq_ref > 0.0) rep.rel_l2 = std::sqrt(sq_err) / std::sqrt(sq_ref);
    return {rep, std::move(rows)};
}

// --- CSV emission -----------------------------------------------------------

inline void write_metrics_csv(std::ostream& os, std::span<const MetricsRecord> history,
                              const std::string& timestamp) {
    if (!timestamp.empty()) os << "# generated " << timestamp << "\n";
    os << "step,j_pde,j_bc,j_ic,j_c0x,j_c0t,j_c1x,j_c1t,total\n";
    for (const MetricsRecord& r : history) {
        const LossBreakdown& l = r.loss;
        os << r.step << "," << format_double(l.j_pde) << "," << format_double(l.j_bc) << ","
           << format_double(l.j_ic) << "," << format_double(l.j_c0x) << ","
           << format_double(l.j_c0t) << "," << format_double(l.j_c1x) << ","
           << format_double(l.j_c1t) << "," << format_double(l.total) << "\n";
    }
}

inline void write_evaluation_csv(std::ostream& os, std::span<const EvaluationRow> rows,
                                 const AxisKind kind, int n_out) {
    const char* a1_name = kind == AxisKind::SpaceSpace ? "y" : "t";
    os << "x," << a1_name;
    if (n_out == 1) {
        os << ",predicted,reference";
    } else {
        static const char* fields[3] = {"u", "v", "p"};
        for (int o = 0; o < n_out; ++o) os << "," << fields[o] << "_pred";
        for (int o = 0; o < n_out; ++o) os << "," << fields[o] << "_ref";
    }
    os << "\n";
    for (const EvaluationRow& r : rows) {
        os << format_double(r.point.a0) << "," << format_double(r.point.a1);
        for (int o = 0; o < n_out; ++o) os << "," << format_double(r.predicted[o]);
        for (int o = 0; o < n_out; ++o)
            os << "," << (r.has_reference[o] ? format_double(r.reference[o]) : std::string(""));
        os << "\n";
    }
}

/// One slice file: the field along a1 = value, sampled on the a0 window.
inline void write_slice_csv(std::ostream& os, const StitchedField& field,
                            const ReferenceFn& reference, const Interval& a0, double a1_value,
                            int n_points) {
    const int no = field.output_dim();
    os << "x,predicted,reference\n";
    std::vector<double> ref(no, 0.0);
    std::vector<char> has(no, 0);
    for (int i = 0; i < n_points; ++i) {
        const double x = (i == n_points - 1) ? a0.hi : a0.lo + i * a0.width() / (n_points - 1);
        const Point2 g{x, a1_value};
        const auto v = field.value(g);
        std::fill(ref.begin(), ref.end(), 0.0);
        std::fill(has.begin(), has.end(), 0);
        if (reference) reference(g, ref, has);
        os << format_double(x) << "," << format_double(v[0]) << ","
           << (has[0] ? format_double(ref[0]) : std::string("")) << "\n";
    }
}

/// Cavity centerline profiles: u along the vertical line a0 = x0 and v along
/// the horizontal line a1 = y0.
inline void write_centerline_u_csv(std::ostream& os, const StitchedField& field,
                                   const ReferenceFn& reference, double x0, const Interval& a1,
                                   int n_points) {
    os << "y,u_predicted,u_reference\n";
    const int no = field.output_dim();
    std::vector<double> ref(no, 0.0);
    std::vector<char> has(no, 0);
    for (int i = 0; i < n_points; ++i) {
        const double y = (i == n_points - 1) ? a1.hi : a1.lo + i * a1.width() / (n_points - 1);
        const Point2 g{x0, y};
        const auto v = field.value(g);
        std::fill(has.begin(), has.end(), 0);
        if (reference) reference(g, ref, has);
        os << format_double(y) << "," << format_double(v[0]) << ","
           << (has[0] ? format_double(ref[0]) : std::string("")) << "\n";
    }
}

inline void write_centerline_v_csv(std::ostream& os, const StitchedField& field,
                                   const ReferenceFn& reference, double y0, const Interval& a0,
                                   int n_points) {
    os << "x,v_predicted,v_reference\n";
    const int no = field.output_dim();
    std::vector<double> ref(no, 0.0);
    std::vector<char> has(no, 0);
    for (int i = 0; i < n_points; ++i) {
        const double x = (i == n_points - 1) ? a0.hi : a0.lo + i * a0.width() / (n_points - 1);
        const Point2 g{x, y0};
        const auto v = field.value(g);
        std::fill(has.begin(), has.end(), 0);
        if (reference) reference(g, ref, has);
        os << format_double(x) << "," << format_double(v.size() > 1 ? v[1] : v[0]) << ","
           << (has.size() > 1 && has[1] ? format_double(ref[1]) : std::string("")) << "\n";
    }
}

/// Build the reference selected by the config ("auto" picks the problem's
/// natural oracle). Throws invalid_configuration for selectors that do not
/// apply to the problem.
inline ReferenceFn make_reference(const RunConfig& c) {
    std::string sel = c.reference;
    if (sel == "none") return nullptr;
    if (sel == "auto") {
        if (c.problem == "advection") sel = "exact";
        else if (c.problem == "burgers") sel = c.burgers_nu > 0.0 ? "cole-hopf" : "characteristics";
        else sel = "cavity-fd";
    }
    if (sel == "exact") {
        if (c.problem != "advection")
            throw invalid_configuration("eval.reference: 'exact' applies to the advection problem");
        return make_advection_reference();
    }
    if (sel == "cole-hopf") {
        if (c.problem != "burgers" || !(c.burgers_nu > 0.0))
            throw invalid_configuration("eval.reference: 'cole-hopf' needs burgers with nu > 0");
        return make_burgers_reference(c.burgers_nu);
    }
    if (sel == "characteristics") {
        if (c.problem != "burgers")
            throw invalid_configuration("eval.reference: 'characteristics' applies to burgers");
        return make_burgers_reference(0.0);
    }
    if (sel == "cavity-fd") {
        if (c.problem != "cavity")
            throw invalid_configuration("eval.reference: 'cavity-fd' applies to the cavity problem");
        auto ref = std::make_shared<CavityReference>(
            cavity_reference_cached(c.cavity_reynolds, c.oracle_n, c.oracle_cache));
        return make_cavity_reference_fn(ref);
    }
    throw invalid_configuration("eval.reference: unknown selector '" + sel + "'");
}

/// The evaluation window: the training domain with the configured a1 cap
/// (used to keep inviscid Burgers evaluation inside the oracle's validity).
inline std::pair<Interval, Interval> evaluation_window(const RunConfig& c) {
    Interval a0 = c.domain.axis0;
    Interval a1 = c.domain.axis1;
    if (c.eval_a1_max > a1.lo && c.eval_a1_max < a1.hi) a1.hi = c.eval_a1_max;
    return {a0, a1};
}

} // namespace dpinn
