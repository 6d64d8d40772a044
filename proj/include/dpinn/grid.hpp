#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "dpinn/common.hpp"

namespace dpinn {

enum class AxisKind { SpaceTime, SpaceSpace };

struct Interval {
    double lo = 0.0;
    double hi = 1.0;
    double width() const { return hi - lo; }
    bool operator==(const Interval&) const = default;
};

/// Rectangular computational domain. axis0 = x; axis1 = t or y.
struct Domain2D {
    Interval axis0;
    Interval axis1;
    AxisKind kind = AxisKind::SpaceTime;
    bool operator==(const Domain2D&) const = default;
};

inline void validate_domain(const Domain2D& d) {
    if (!(d.axis0.lo < d.axis0.hi))
        throw invalid_configuration("domain axis0 bounds must satisfy lo < hi");
    if (!(d.axis1.lo < d.axis1.hi))
        throw invalid_configuration("domain axis1 bounds must satisfy lo < hi");
}

/// Face numbering of a rectangular cell: 1 bottom (axis1 low), 2 right
/// (axis0 high), 3 top (axis1 high), 4 left (axis0 low).
enum class Face : int { Bottom = 1, Right = 2, Top = 3, Left = 4 };

/// One rectangle of the partition, with its affine unit-square maps.
struct Cell {
    int index = 0; // 1-based
    Interval b0;
    Interval b1;

    double width0() const { return b0.width(); }
    double width1() const { return b1.width(); }

    bool contains(const Point2& g, double slack = 0.0) const {
        return g.a0 >= b0.lo - slack && g.a0 <= b0.hi + slack && g.a1 >= b1.lo - slack &&
               g.a1 <= b1.hi + slack;
    }

    /// Global -> unit square. Exact at corners; points outside the cell by
    /// more than a 1e-12 slack are rejected.
    Point2 normalize(const Point2& g) const {
        const double s0 = 1e-12 * std::max({1.0, std::abs(b0.lo), std::abs(b0.hi)});
        const double s1 = 1e-12 * std::max({1.0, std::abs(b1.lo), std::abs(b1.hi)});
        if (g.a0 < b0.lo - s0 || g.a0 > b0.hi + s0 || g.a1 < b1.lo - s1 || g.a1 > b1.hi + s1)
            throw invalid_input("normalize: point " + point_str(g) + " outside cell " +
                                std::to_string(index));
        return {(g.a0 - b0.lo) / width0(), (g.a1 - b1.lo) / width1()};
    }

    /// Unit square -> global.
    Point2 denormalize(const Point2& u) const {
        return {b0.lo + u.a0 * width0(), b1.lo + u.a1 * width1()};
    }
};

/// Uniform non-overlapping tiling of a rectangular domain, cells stored
/// row-major with axis0 fastest, indices 1-based.
struct CellGrid {
    Domain2D domain;
    int nb0 = 1;
    int nb1 = 1;
    std::vector<Cell> cells;
    // Shared edge coordinates; edges0[c] is exact at both domain ends, so
    // adjacent cells agree bit-for-bit on their common face.
    std::vector<double> edges0;
    std::vector<double> edges1;

    int cell_count() const { return nb0 * nb1; }
    const Cell& cell(int index1) const { return cells[static_cast<std::size_t>(index1) - 1]; }
    int index_at(int col1, int row1) const { return (row1 - 1) * nb0 + col1; }
    int col_of(int index1) const { return (index1 - 1) % nb0 + 1; }
    int row_of(int index1) const { return (index1 - 1) / nb0 + 1; }
};

namespace detail {
inline std::vector<double> uniform_edges(const Interval& iv, int nb) {
    std::vector<double> e(static_cast<std::size_t>(nb) + 1);
    for (int k = 0; k <= nb; ++k) e[k] = iv.lo + static_cast<double>(k) * iv.width() / nb;
    e.front() = iv.lo;
    e.back() = iv.hi;
    return e;
}
} // namespace detail

inline CellGrid partition(const Domain2D& domain, int nb0, int nb1) {
    validate_domain(domain);
    if (nb0 < 1 || nb1 < 1)
        throw invalid_configuration("partition: cell counts must be >= 1, got nb0=" +
                                    std::to_string(nb0) + " nb1=" + std::to_string(nb1));
    CellGrid g;
    g.domain = domain;
    g.nb0 = nb0;
    g.nb1 = nb1;
    g.edges0 = detail::uniform_edges(domain.axis0, nb0);
    g.edges1 = detail::uniform_edges(domain.axis1, nb1);
    g.cells.reserve(static_cast<std::size_t>(nb0) * nb1);
    for (int r = 0; r < nb1; ++r)
        for (int c = 0; c < nb0; ++c) {
            Cell cell;
            cell.index = r * nb0 + c + 1;
            cell.b0 = {g.edges0[c], g.edges0[c + 1]};
            cell.b1 = {g.edges1[r], g.edges1[r + 1]};
            g.cells.push_back(cell);
        }
    return g;
}

/// Tensor grid of n0 x n1 points strictly inside the cell, offset half a
/// spacing from every face so interior points never land on an interface.
inline std::vector<Point2> collocation_points(const Cell& cell, int n0, int n1) {
    if (n0 < 1 || n1 < 1)
        throw invalid_configuration("collocation_points: counts must be >= 1");
    std::vector<Point2> pts;
    pts.reserve(static_cast<std::size_t>(n0) * n1);
    const double h0 = cell.width0() / n0;
    const double h1 = cell.width1() / n1;
    for (int j = 0; j < n1; ++j)
        for (int i = 0; i < n0; ++i)
            pts.push_back({cell.b0.lo + (i + 0.5) * h0, cell.b1.lo + (j + 0.5) * h1});
    return pts;
}

/// Closed-form index vectors over the 1-based row-major cell ordering.
struct IndexSets {
    std::vector<int> interior; // all cells
    std::vector<int> left_bc;  // first column
    std::vector<int> right_bc; // last column
    std::vector<int> ic;       // first row
    std::vector<int> kappa_x0; // first column (column-pair base indices)
    std::vector<int> kappa_t0; // first row (row-pair base indices)
};

inline IndexSets index_sets(int nb0, int nb1) {
    if (nb0 < 1 || nb1 < 1) throw invalid_configuration("index_sets: cell counts must be >= 1");
    IndexSets s;
    const int nc = nb0 * nb1;
    s.interior.resize(nc);
    for (int i = 0; i < nc; ++i) s.interior[i] = i + 1;
    for (int r = 0; r < nb1; ++r) {
        s.left_bc.push_back(1 + r * nb0);
        s.right_bc.push_back((r + 1) * nb0);
    }
    for (int c = 1; c <= nb0; ++c) s.ic.push_back(c);
    s.kappa_x0 = s.left_bc;
    s.kappa_t0 = s.ic;
    return s;
}

/// How points are placed along a face of length w.
///   IncludeEndpoints: n equally spaced points including both corners.
///   InteriorOffset:   n points offset half a spacing from both corners.
enum class FaceSampling { IncludeEndpoints, InteriorOffset };

namespace detail {
inline std::vector<double> face_coords(double lo, double hi, int n, FaceSampling s) {
    std::vector<double> v(static_cast<std::size_t>(n));
    if (s == FaceSampling::IncludeEndpoints) {
        for (int k = 0; k < n; ++k) v[k] = lo + static_cast<double>(k) * (hi - lo) / (n - 1);
        v.front() = lo;
        v.back() = hi;
    } else {
        const double h = (hi - lo) / n;
        for (int k = 0; k < n; ++k) v[k] = lo + (k + 0.5) * h;
    }
    return v;
}
} // namespace detail

/// A shared face between two adjacent cells. The same global points serve
/// both sides, in the same order. axis is the face-normal axis: 0 pairs the
/// left cell's right face with the right cell's left face, 1 pairs the lower
/// cell's top face with the upper cell's bottom face.
struct InterfacePair {
    int cell_lo = 0; // lower index side (left of / below the face)
    int cell_hi = 0;
    int axis = 0;
    std::vector<Point2> points;
};

/// Points on one exterior face of a boundary cell.
struct BoundaryFace {
    int cell = 0;
    Face face = Face::Bottom;
    std::vector<Point2> points;
};

struct InterfaceSet {
    std::vector<InterfacePair> pairs;
    std::vector<BoundaryFace> boundary;
};

/// Paired point lists for every interior interface plus per-face point lists
/// on the domain boundary. Interior interface points always include the face
/// endpoints; boundary faces follow boundary_sampling.
inline InterfaceSet interface_points(const CellGrid& g, int n_per_interface,
                                     FaceSampling boundary_sampling = FaceSampling::IncludeEndpoints) {
    if (n_per_interface < 2)
        throw invalid_configuration("interface_points: need at least 2 points per interface");
    InterfaceSet out;
    const int nb0 = g.nb0, nb1 = g.nb1;
    // Vertical interfaces (normal along axis0), column gap c between columns
    // c and c+1, sweeping rows.
    for (int c = 1; c < nb0; ++c)
        for (int r = 1; r <= nb1; ++r) {
            InterfacePair p;
            p.cell_lo = g.index_at(c, r);
            p.cell_hi = g.index_at(c + 1, r);
            p.axis = 0;
            const double x = g.edges0[c];
            for (double t : detail::face_coords(g.edges1[r - 1], g.edges1[r], n_per_interface,
                                                FaceSampling::IncludeEndpoints))
                p.points.push_back({x, t});
            out.pairs.push_back(std::move(p));
        }
    // Horizontal interfaces (normal along axis1), row gap r.
    for (int r = 1; r < nb1; ++r)
        for (int c = 1; c <= nb0; ++c) {
            InterfacePair p;
            p.cell_lo = g.index_at(c, r);
            p.cell_hi = g.index_at(c, r + 1);
            p.axis = 1;
            const double t = g.edges1[r];
            for (double x : detail::face_coords(g.edges0[c - 1], g.edges0[c], n_per_interface,
                                                FaceSampling::IncludeEndpoints))
                p.points.push_back({x, t});
            out.pairs.push_back(std::move(p));
        }
    // Domain-edge faces.
    auto add_boundary = [&](int cell_index, Face face) {
        const Cell& cell = g.cell(cell_index);
        BoundaryFace f;
        f.cell = cell_index;
        f.face = face;
        switch (face) {
        case Face::Bottom:
            for (double x : detail::face_coords(cell.b0.lo, cell.b0.hi, n_per_interface,
                                                boundary_sampling))
                f.points.push_back({x, cell.b1.lo});
            break;
        case Face::Top:
            for (double x : detail::face_coords(cell.b0.lo, cell.b0.hi, n_per_interface,
                                                boundary_sampling))
                f.points.push_back({x, cell.b1.hi});
            break;
        case Face::Left:
            for (double t : detail::face_coords(cell.b1.lo, cell.b1.hi, n_per_interface,
                                                boundary_sampling))
                f.points.push_back({cell.b0.lo, t});
            break;
        case Face::Right:
            for (double t : detail::face_coords(cell.b1.lo, cell.b1.hi, n_per_interface,
                                                boundary_sampling))
                f.points.push_back({cell.b0.hi, t});
            break;
        }
        out.boundary.push_back(std::move(f));
    };
    for (int c = 1; c <= nb0; ++c) add_boundary(g.index_at(c, 1), Face::Bottom);
    for (int r = 1; r <= nb1; ++r) add_boundary(g.index_at(nb0, r), Face::Right);
    for (int c = 1; c <= nb0; ++c) add_boundary(g.index_at(c, nb1), Face::Top);
    for (int r = 1; r <= nb1; ++r) add_boundary(g.index_at(1, r), Face::Left);
    return out;
}

} // namespace dpinn
