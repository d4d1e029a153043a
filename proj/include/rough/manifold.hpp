// SPDX-License-Identifier: MIT
//
// Rough paths on manifolds presented through atlases of jet charts.
//
// A manifold here is nothing but its charts: each chart carries closed-form
// jets for both directions between an ambient presentation of the manifold's
// points and R^m, plus a domain predicate that can be shrunk by a safety
// fraction.  Manifold rough paths are ordered, overlapping chart pieces;
// transitions push pieces between charts, validation measures the overlap
// compatibility defects, the rough integral sums per-chart sewing limits over
// a partition, and RDEs are solved leg by leg under a greedy chart schedule.
// The extrinsic viewpoint (paths constrained to an embedded submanifold of
// flat space) is covered by a tubular-projection check.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rough/controlled.hpp"
#include "rough/rde.hpp"
#include "rough/roughpath.hpp"
#include "rough/taylor.hpp"
#include "rough/tensor.hpp"
#include "rough/words.hpp"

namespace rough::manifold {

using controlled::ControlledIntegrand;
using controlled::ControlledJet;
using controlled::ControlledPath;
using controlled::JetFunction;
using path::RoughPath;
using Tensor = tensor::TensorSeries<double>;

// ---------------------------------------------------------------------------
// Charts and atlases.

/// Membership test for a chart's domain on ambient points; `margin` in [0,1)
/// shrinks the domain toward its center by that fraction (0 = full domain).
using DomainPredicate = std::function<bool(const std::vector<double>&, double)>;

/// One chart: closed-form jets for both directions between the ambient
/// presentation of manifold points and R^m, plus a shrinkable domain.
class Chart {
public:
    Chart(std::string id, JetFunction forward, JetFunction inverse, DomainPredicate domain)
        : id_(std::move(id)),
          forward_(std::move(forward)),
          inverse_(std::move(inverse)),
          domain_(std::move(domain)) {
        if (id_.empty()) throw std::invalid_argument("Chart: empty identifier");
        if (forward_.in_dim() != inverse_.out_dim() || forward_.out_dim() != inverse_.in_dim())
            throw std::invalid_argument("Chart: forward/inverse dimensions do not pair up");
        if (!domain_) throw std::invalid_argument("Chart: missing domain predicate");
    }

    const std::string& id() const { return id_; }
    int dim() const { return forward_.out_dim(); }       ///< chart-coordinate dimension
    int point_dim() const { return forward_.in_dim(); }  ///< ambient presentation dimension

    const JetFunction& forward() const { return forward_; }  ///< point -> coordinates
    const JetFunction& inverse() const { return inverse_; }  ///< coordinates -> point

    bool contains(const std::vector<double>& point, double margin = 0.0) const {
        return domain_(point, margin);
    }

    std::vector<double> coords(const std::vector<double>& point) const {
        return forward_.value(point);
    }
    std::vector<double> point(const std::vector<double>& coords) const {
        return inverse_.value(coords);
    }

    /// Largest domain-shrink fraction still containing the point, bisected to
    /// about 1e-3; -1 when the point is outside even the full domain.
    double margin_of(const std::vector<double>& point) const {
        if (!contains(point, 0.0)) return -1.0;
        double lo = 0.0, hi = 0.999;
        if (contains(point, hi)) return hi;
        for (int it = 0; it < 20; ++it) {
            const double mid = 0.5 * (lo + hi);
            (contains(point, mid) ? lo : hi) = mid;
        }
        return lo;
    }

    /// sup |forward(inverse(u)) - u| over coordinate samples.
    double round_trip_defect(const std::vector<std::vector<double>>& coord_samples) const {
        double worst = 0.0;
        for (const auto& u : coord_samples) {
            const std::vector<double> back = coords(point(u));
            for (std::size_t i = 0; i < u.size(); ++i)
                worst = std::max(worst, std::abs(back[i] - u[i]));
        }
        return worst;
    }

private:
    std::string id_;
    JetFunction forward_;
    JetFunction inverse_;
    DomainPredicate domain_;
};

/// A named collection of charts of one manifold presentation.
class Atlas {
public:
    Atlas(std::string name, std::vector<Chart> charts)
        : name_(std::move(name)), charts_(std::move(charts)) {
        if (charts_.empty()) throw std::invalid_argument("Atlas: need at least one chart");
        for (std::size_t i = 0; i < charts_.size(); ++i) {
            const Chart& c = charts_[i];
            if (c.dim() != charts_.front().dim() ||
                c.point_dim() != charts_.front().point_dim())
                throw std::invalid_argument("Atlas: charts disagree on dimensions");
            if (!index_.emplace(c.id(), i).second)
                throw std::invalid_argument("Atlas: duplicate chart id " + c.id());
        }
    }

    const std::string& name() const { return name_; }
    int dim() const { return charts_.front().dim(); }
    int point_dim() const { return charts_.front().point_dim(); }
    const std::vector<Chart>& charts() const { return charts_; }

    bool has_chart(const std::string& id) const { return index_.count(id) > 0; }

    const Chart& chart(const std::string& id) const {
        auto it = index_.find(id);
        if (it == index_.end()) throw std::invalid_argument("Atlas: unknown chart id " + id);
        return charts_[it->second];
    }

    /// Chart keeping the point deepest inside its shrunken domains, as
    /// (index, achieved margin); index -1 when no chart contains the point.
    std::pair<int, double> best_chart(const std::vector<double>& point) const {
        int best = -1;
        double best_margin = -1.0;
        for (std::size_t i = 0; i < charts_.size(); ++i) {
            const double m = charts_[i].margin_of(point);
            if (m > best_margin) {
                best_margin = m;
                best = static_cast<int>(i);
            }
        }
        return {best, best_margin};
    }

private:
    std::string name_;
    std::vector<Chart> charts_;
    std::map<std::string, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// Built-in atlases: the circle (angle charts), the unit sphere (stereographic
// charts), tangent-frame charts above the sphere, and flat space.

/// Angle chart on the unit circle: the coordinate is the polar angle measured
/// from `center`, cut at the antipode with half-gap `gap`, written in the
/// half-angle form 2 atan(y / (r + x)) which is smooth away from the cut.
/// Ambient presentation: points of R^2 near the circle.
inline Chart angle_chart(std::string id, double center, double gap = std::acos(0.0) / 4.0) {
    const double pi = 2.0 * std::acos(0.0);
    if (!(gap > 0.0 && gap < pi / 2.0))
        throw std::invalid_argument("angle_chart: half-gap must lie in (0, pi/2)");
    const double cc = std::cos(center), sc = std::sin(center);
    taylor::JetMap fwd = [cc, sc](const std::vector<taylor::Jet>& z) {
        const taylor::Jet xr = cc * z[0] + sc * z[1];
        const taylor::Jet yr = cc * z[1] - sc * z[0];
        const taylor::Jet r = sqrt(z[0] * z[0] + z[1] * z[1]);
        return std::vector<taylor::Jet>{2.0 * atan(yr * recip(r + xr))};
    };
    taylor::JetMap inv = [cc, sc](const std::vector<taylor::Jet>& z) {
        return std::vector<taylor::Jet>{cos(z[0]) * cc - sin(z[0]) * sc,
                                        sin(z[0]) * cc + cos(z[0]) * sc};
    };
    DomainPredicate dom = [center, gap, pi](const std::vector<double>& pt, double margin) {
        const double r2 = pt[0] * pt[0] + pt[1] * pt[1];
        if (!(r2 > 0.25 && r2 < 4.0)) return false;
        const double offset = std::remainder(std::atan2(pt[1], pt[0]) - center, 2.0 * pi);
        return std::abs(offset) < (1.0 - margin) * (pi - gap);
    };
    return Chart(std::move(id), JetFunction(2, 1, JetFunction::kUnlimitedOrder, std::move(fwd)),
                 JetFunction(1, 2, JetFunction::kUnlimitedOrder, std::move(inv)),
                 std::move(dom));
}

/// The circle with two angle charts centered a half-turn apart.
inline Atlas circle_atlas() {
    const double pi = 2.0 * std::acos(0.0);
    return Atlas("circle", {angle_chart("east", 0.0), angle_chart("west", pi)});
}

/// Stereographic chart of the unit sphere projected from the north pole
/// (pole = +1, covers z < zmax) or from the south pole (pole = -1, covers
/// z > -zmax).  Ambient presentation: points of R^3 near the sphere.
inline Chart stereographic_chart(std::string id, int pole, double zmax = 0.8) {
    if (pole != 1 && pole != -1)
        throw std::invalid_argument("stereographic_chart: pole must be +1 or -1");
    if (!(zmax > 0.0 && zmax < 1.0))
        throw std::invalid_argument("stereographic_chart: cap height must lie in (0,1)");
    const double sg = static_cast<double>(pole);
    taylor::JetMap fwd = [sg](const std::vector<taylor::Jet>& z) {
        const taylor::Jet q = recip(1.0 - sg * z[2]);
        return std::vector<taylor::Jet>{z[0] * q, z[1] * q};
    };
    taylor::JetMap inv = [sg](const std::vector<taylor::Jet>& z) {
        const taylor::Jet r2 = z[0] * z[0] + z[1] * z[1];
        const taylor::Jet w = recip(1.0 + r2);
        return std::vector<taylor::Jet>{2.0 * (z[0] * w), 2.0 * (z[1] * w),
                                        sg * ((r2 - 1.0) * w)};
    };
    DomainPredicate dom = [sg, zmax](const std::vector<double>& pt, double margin) {
        const double n2 = pt[0] * pt[0] + pt[1] * pt[1] + pt[2] * pt[2];
        if (!(n2 > 0.25 && n2 < 4.0)) return false;
        return sg * pt[2] < zmax - margin * (zmax + 1.0);
    };
    return Chart(std::move(id), JetFunction(3, 2, JetFunction::kUnlimitedOrder, std::move(fwd)),
                 JetFunction(2, 3, JetFunction::kUnlimitedOrder, std::move(inv)),
                 std::move(dom));
}

/// The unit sphere with its two stereographic charts.
inline Atlas sphere_atlas(double zmax = 0.8) {
    return Atlas("sphere", {stereographic_chart("from-north", +1, zmax),
                            stereographic_chart("from-south", -1, zmax)});
}

/// Chart for (point, tangent frame) states above a stereographic sphere
/// chart: coordinates (u, v, A) with A the 2x2 frame matrix in the coordinate
/// basis, stored row-major; frame columns transform through the chart
/// Jacobians.  Ambient presentation: (p, c1, c2) in R^9 with p near the unit
/// sphere and c1, c2 the frame columns as ambient tangent vectors.
inline Chart sphere_frame_chart(std::string id, int pole, double zmax = 0.8) {
    if (pole != 1 && pole != -1)
        throw std::invalid_argument("sphere_frame_chart: pole must be +1 or -1");
    const double sg = static_cast<double>(pole);
    taylor::JetMap fwd = [sg](const std::vector<taylor::Jet>& z) {
        const taylor::Jet q = recip(1.0 - sg * z[2]);
        const taylor::Jet q2 = q * q;
        std::vector<taylor::Jet> out;
        out.reserve(6);
        out.push_back(z[0] * q);
        out.push_back(z[1] * q);
        // rows of D(projection) applied to the frame columns c1 = z[3..5],
        // c2 = z[6..8]:  A_{1g} = q c_g.x + sg x q^2 c_g.z  (and y alike)
        for (int row = 0; row < 2; ++row)
            for (int col = 0; col < 2; ++col) {
                const std::size_t base = 3 + 3 * static_cast<std::size_t>(col);
                out.push_back(q * z[base + static_cast<std::size_t>(row)] +
                              sg * (z[static_cast<std::size_t>(row)] * (q2 * z[base + 2])));
            }
        return out;
    };
    taylor::JetMap inv = [sg](const std::vector<taylor::Jet>& z) {
        const taylor::Jet& u = z[0];
        const taylor::Jet& v = z[1];
        const taylor::Jet r2 = u * u + v * v;
        const taylor::Jet w = recip(1.0 + r2);
        const taylor::Jet w2 = w * w;
        // Jacobian of the inverse projection in closed form
        const taylor::Jet dxx = 2.0 * w - 4.0 * (u * (u * w2));
        const taylor::Jet dyy = 2.0 * w - 4.0 * (v * (v * w2));
        const taylor::Jet dxy = -4.0 * (u * (v * w2));
        const taylor::Jet dzx = sg * (4.0 * (u * w2));
        const taylor::Jet dzy = sg * (4.0 * (v * w2));
        std::vector<taylor::Jet> out;
        out.reserve(9);
        out.push_back(2.0 * (u * w));
        out.push_back(2.0 * (v * w));
        out.push_back(sg * ((r2 - 1.0) * w));
        for (int col = 0; col < 2; ++col) {
            const taylor::Jet& a1 = z[2 + static_cast<std::size_t>(col)];  // A_{1,col}
            const taylor::Jet& a2 = z[4 + static_cast<std::size_t>(col)];  // A_{2,col}
            out.push_back(dxx * a1 + dxy * a2);
            out.push_back(dxy * a1 + dyy * a2);
            out.push_back(dzx * a1 + dzy * a2);
        }
        return out;
    };
    DomainPredicate dom = [sg, zmax](const std::vector<double>& pt, double margin) {
        const double n2 = pt[0] * pt[0] + pt[1] * pt[1] + pt[2] * pt[2];
        if (!(n2 > 0.25 && n2 < 4.0)) return false;
        return sg * pt[2] < zmax - margin * (zmax + 1.0);
    };
    return Chart(std::move(id), JetFunction(9, 6, JetFunction::kUnlimitedOrder, std::move(fwd)),
                 JetFunction(6, 9, JetFunction::kUnlimitedOrder, std::move(inv)),
                 std::move(dom));
}

/// Frame charts above both stereographic sphere charts.
inline Atlas sphere_frame_atlas(double zmax = 0.8) {
    return Atlas("sphere-frames", {sphere_frame_chart("frames-from-north", +1, zmax),
                                   sphere_frame_chart("frames-from-south", -1, zmax)});
}

/// Single-chart atlas of flat space: the identity chart on the centered box
/// of the given half-width (shrunk linearly by the margin).
inline Atlas flat_atlas(int dim, double half_width = 1e6) {
    if (dim < 1) throw std::invalid_argument("flat_atlas: positive dimension required");
    if (!(half_width > 0.0)) throw std::invalid_argument("flat_atlas: positive half-width required");
    DomainPredicate dom = [half_width](const std::vector<double>& pt, double margin) {
        for (double c : pt)
            if (!(std::abs(c) < half_width * (1.0 - margin))) return false;
        return true;
    };
    return Atlas("flat", {Chart("flat", JetFunction::identity(dim), JetFunction::identity(dim),
                                std::move(dom))});
}

// ---------------------------------------------------------------------------
// Manifold rough paths.

/// The same rough path on a sub-interval; evaluations are shared with the
/// original, only the admissible time simplex narrows.
inline RoughPath restrict_path(const RoughPath& x, double s, double e) {
    if (!(x.t0() <= s && s < e && e <= x.T()))
        throw std::invalid_argument("restrict_path: sub-interval must sit inside the domain");
    std::function<std::vector<double>(double)> tr;
    if (x.has_trace()) tr = [x](double t) { return x.trace(t); };
    return RoughPath(x.p(), x.dim(), s, e, x.control(),
                     [x](double a, double b) { return x.eval(a, b); }, std::move(tr));
}

/// One chart piece of a manifold rough path: the coordinate rough path of the
/// trace over [a, b] read through the named chart.
struct ChartPiece {
    double a = 0.0;
    double b = 1.0;
    std::string chart;
    RoughPath path;
};

/// Finite representation of a manifold-valued rough path: ordered chart
/// pieces whose intervals cover [t0, T], consecutive pieces overlapping on
/// genuine intervals so that compatibility is observable.
class ManifoldRoughPath {
public:
    ManifoldRoughPath(Atlas atlas, std::vector<ChartPiece> pieces)
        : atlas_(std::move(atlas)), pieces_(std::move(pieces)) {
        if (pieces_.empty()) throw std::invalid_argument("ManifoldRoughPath: no pieces");
        const double p = pieces_.front().path.p();
        for (std::size_t i = 0; i < pieces_.size(); ++i) {
            const ChartPiece& pc = pieces_[i];
            atlas_.chart(pc.chart);  // id must exist
            if (!(pc.a < pc.b))
                throw std::invalid_argument("ManifoldRoughPath: empty piece interval");
            if (pc.path.dim() != atlas_.dim())
                throw std::invalid_argument(
                    "ManifoldRoughPath: piece dimension must match the atlas");
            if (pc.path.p() != p)
                throw std::invalid_argument("ManifoldRoughPath: pieces disagree on p");
            if (std::abs(pc.path.t0() - pc.a) > 1e-9 || std::abs(pc.path.T() - pc.b) > 1e-9)
                throw std::invalid_argument(
                    "ManifoldRoughPath: piece path domain must equal its interval");
            if (!pc.path.has_trace())
                throw std::invalid_argument("ManifoldRoughPath: pieces need traces");
            if (i + 1 < pieces_.size()) {
                const ChartPiece& nx = pieces_[i + 1];
                if (!(pc.a < nx.a && pc.b < nx.b))
                    throw std::invalid_argument("ManifoldRoughPath: pieces must advance strictly");
                if (!(nx.a < pc.b))
                    throw std::invalid_argument(
                        "ManifoldRoughPath: consecutive pieces must overlap");
            }
        }
    }

    const Atlas& atlas() const { return atlas_; }
    const std::vector<ChartPiece>& pieces() const { return pieces_; }
    double p() const { return pieces_.front().path.p(); }
    int level() const { return pieces_.front().path.level(); }
    double t0() const { return pieces_.front().a; }
    double T() const { return pieces_.back().b; }

    /// Index of the first piece whose interval contains t.
    std::size_t piece_index(double t) const {
        for (std::size_t i = 0; i < pieces_.size(); ++i)
            if (pieces_[i].a <= t && t <= pieces_[i].b) return i;
        throw std::invalid_argument("ManifoldRoughPath: time outside every piece");
    }

    /// Ambient position of the trace at t (chart-independent on overlaps).
    std::vector<double> trace(double t) const {
        const ChartPiece& pc = pieces_[piece_index(t)];
        return atlas_.chart(pc.chart).point(pc.path.trace(t));
    }

private:
    Atlas atlas_;
    std::vector<ChartPiece> pieces_;
};

// ---------------------------------------------------------------------------
// Chart transitions.

/// The coordinate rough path rewritten in another chart: the pushforward of x
/// through (to) o (from)^{-1}.  The trace must stay inside both chart domains
/// over the whole domain of x; restrict_path first for overlap work.
inline RoughPath transition(const RoughPath& x, const Chart& from, const Chart& to,
                            double tol = 1e-8, int max_depth = 14, int trace_samples = 33) {
    if (x.dim() != from.dim())
        throw std::invalid_argument("transition: path does not live in the source chart");
    if (!x.has_trace())
        throw std::invalid_argument("transition: need a trace to check chart domains");
    if (trace_samples < 2) throw std::invalid_argument("transition: degenerate sample count");
    for (int i = 0; i < trace_samples; ++i) {
        const double t =
            x.t0() + (x.T() - x.t0()) * static_cast<double>(i) / (trace_samples - 1.0);
        const std::vector<double> pt = from.point(x.trace(t));
        if (!from.contains(pt, 0.0) || !to.contains(pt, 0.0))
            throw std::invalid_argument("transition: trace leaves the chart domains");
    }
    return controlled::pushforward_path(JetFunction::compose(to.forward(), from.inverse()), x,
                                        tol, max_depth);
}

// ---------------------------------------------------------------------------
// Validation of manifold rough paths.

struct PieceCheck {
    std::size_t index = 0;
    std::string chart;
    path::AxiomReport axioms;
};

struct OverlapCheck {
    std::size_t left = 0;
    std::size_t right = 0;
    double push_defect = 0.0;   ///< transition of left vs right, all tensor levels
    double trace_defect = 0.0;  ///< ambient trace disagreement
};

struct ValidationReport {
    std::vector<PieceCheck> pieces;
    std::vector<OverlapCheck> overlaps;
    double worst_axiom_defect = 0.0;
    double worst_overlap_defect = 0.0;
    bool pass(double tol) const {
        return worst_axiom_defect <= tol && worst_overlap_defect <= tol;
    }
};

/// Per-piece rough-path axioms on a sampled grid, plus pushforward
/// compatibility and ambient trace consistency on every interval overlap.
inline ValidationReport validate(const ManifoldRoughPath& X, double tol = 1e-8,
                                 int grid_points = 9) {
    if (grid_points < 3) throw std::invalid_argument("validate: need at least three grid points");
    ValidationReport rep;
    const auto& pieces = X.pieces();
    for (std::size_t i = 0; i < pieces.size(); ++i) {
        std::vector<double> grid(static_cast<std::size_t>(grid_points));
        for (int k = 0; k < grid_points; ++k)
            grid[static_cast<std::size_t>(k)] =
                pieces[i].a + (pieces[i].b - pieces[i].a) * k / (grid_points - 1.0);
        PieceCheck pc{i, pieces[i].chart, path::check_rough_axioms(pieces[i].path, grid)};
        rep.worst_axiom_defect = std::max(
            {rep.worst_axiom_defect, pc.axioms.mult_defect, pc.axioms.shuffle_defect});
        rep.pieces.push_back(std::move(pc));
    }
    for (std::size_t i = 0; i < pieces.size(); ++i)
        for (std::size_t j = i + 1; j < pieces.size(); ++j) {
            const double s = std::max(pieces[i].a, pieces[j].a);
            const double e = std::min(pieces[i].b, pieces[j].b);
            if (!(s < e)) continue;
            const Chart& ci = X.atlas().chart(pieces[i].chart);
            const Chart& cj = X.atlas().chart(pieces[j].chart);
            const RoughPath left = restrict_path(pieces[i].path, s, e);
            const RoughPath right = restrict_path(pieces[j].path, s, e);
            const RoughPath moved = transition(left, ci, cj, tol);
            OverlapCheck oc{i, j, 0.0, 0.0};
            std::vector<double> grid(5);
            for (int k = 0; k < 5; ++k) grid[static_cast<std::size_t>(k)] = s + (e - s) * k / 4.0;
            for (std::size_t a = 0; a < grid.size(); ++a) {
                const std::vector<double> pa = ci.point(pieces[i].path.trace(grid[a]));
                const std::vector<double> pb = cj.point(pieces[j].path.trace(grid[a]));
                for (std::size_t c = 0; c < pa.size(); ++c)
                    oc.trace_defect = std::max(oc.trace_defect, std::abs(pa[c] - pb[c]));
                for (std::size_t b = a; b < grid.size(); ++b) {
                    const Tensor diff = moved.eval(grid[a], grid[b]) - right.eval(grid[a], grid[b]);
                    oc.push_defect = std::max(oc.push_defect, diff.max_abs());
                }
            }
            rep.worst_overlap_defect =
                std::max({rep.worst_overlap_defect, oc.push_defect, oc.trace_defect});
            rep.overlaps.push_back(oc);
        }
    return rep;
}

// ---------------------------------------------------------------------------
// Controlled integrands over a manifold rough path.

/// Per-chart integrand piece; `jets` must reference the aligned chart piece of
/// the manifold path it will be integrated against.
struct IntegrandPiece {
    double a = 0.0;
    double b = 0.0;
    std::string chart;
    ControlledIntegrand jets;
};

/// W-valued controlled integrand above a manifold rough path, given per chart
/// piece; pieces are aligned index by index with the reference path's pieces.
class ManifoldControlledIntegrand {
public:
    ManifoldControlledIntegrand(int target_dim, std::vector<IntegrandPiece> pieces)
        : w_(target_dim), pieces_(std::move(pieces)) {
        if (w_ < 1)
            throw std::invalid_argument("ManifoldControlledIntegrand: positive target dimension");
        if (pieces_.empty()) throw std::invalid_argument("ManifoldControlledIntegrand: no pieces");
        for (const auto& pc : pieces_)
            if (pc.jets.rows() != w_)
                throw std::invalid_argument(
                    "ManifoldControlledIntegrand: piece rows must match the target dimension");
    }

    int target_dim() const { return w_; }
    const std::vector<IntegrandPiece>& pieces() const { return pieces_; }

private:
    int w_;
    std::vector<IntegrandPiece> pieces_;
};

/// Integrand of a one-form given per chart: chart id -> closed-form jets of
/// the coefficient matrix, R^m -> R^{w x m}, evaluated along each piece.
inline ManifoldControlledIntegrand one_form_integrand(
    const ManifoldRoughPath& X, const std::map<std::string, JetFunction>& coefficients,
    int target_dim) {
    const int m = X.atlas().dim();
    std::vector<IntegrandPiece> out;
    for (const auto& pc : X.pieces()) {
        auto it = coefficients.find(pc.chart);
        if (it == coefficients.end())
            throw std::invalid_argument("one_form_integrand: no coefficients for chart " +
                                        pc.chart);
        const JetFunction& f = it->second;
        if (f.in_dim() != m || f.out_dim() != target_dim * m)
            throw std::invalid_argument(
                "one_form_integrand: coefficient jets must map R^m to R^(w m)");
        out.push_back(
            {pc.a, pc.b, pc.chart, controlled::controlled_from_function(f, pc.path, target_dim, m)});
    }
    return ManifoldControlledIntegrand(target_dim, std::move(out));
}

namespace detail {

inline void require_alignment(const ManifoldControlledIntegrand& H, const ManifoldRoughPath& X,
                              const char* what) {
    const auto& xp = X.pieces();
    const auto& hp = H.pieces();
    if (xp.size() != hp.size())
        throw std::invalid_argument(std::string(what) +
                                    ": integrand does not align with the path pieces");
    for (std::size_t i = 0; i < xp.size(); ++i)
        if (hp[i].jets.reference().token() != xp[i].path.token())
            throw std::invalid_argument(std::string(what) +
                                        ": integrand piece references a different rough path");
}

}  // namespace detail

/// Worst defect of the coordinate-change compatibility between overlapping
/// integrand pieces: the left piece's jets, star-composed with the transition
/// jets and multiplied by the transition derivative, must reproduce the right
/// piece's jets on the overlap.
inline double integrand_compatibility_defect(const ManifoldControlledIntegrand& H,
                                             const ManifoldRoughPath& X, int samples = 5) {
    detail::require_alignment(H, X, "integrand_compatibility_defect");
    if (samples < 2)
        throw std::invalid_argument("integrand_compatibility_defect: degenerate sample count");
    const auto& xp = X.pieces();
    const auto& hp = H.pieces();
    const int m = X.atlas().dim();
    double worst = 0.0;
    for (std::size_t i = 0; i < xp.size(); ++i)
        for (std::size_t j = i + 1; j < xp.size(); ++j) {
            const double s = std::max(xp[i].a, xp[j].a);
            const double e = std::min(xp[i].b, xp[j].b);
            if (!(s < e)) continue;
            const Chart& ci = X.atlas().chart(xp[i].chart);
            const Chart& cj = X.atlas().chart(xp[j].chart);
            // transition from the right chart's coordinates into the left's
            const JetFunction g = JetFunction::compose(ci.forward(), cj.inverse());
            const ControlledPath gx = controlled::controlled_from_function(g, xp[j].path);
            const ControlledPath moved = controlled::detail::star_core(hp[i].jets, gx);
            const int depth = moved.depth();
            auto deval = [g, xj = xp[j].path, m, depth](double t) {
                const ControlledJet tbl = g.table(xj.trace(t), depth + 1);
                ControlledJet out = ControlledJet::zeros(m, m * m, depth);
                for (int n = 0; n <= depth; ++n) {
                    const std::size_t count = tensor::level_size(m, n);
                    for (std::size_t r = 0; r < count; ++r) {
                        const words::Word gamma = tensor::word_unrank(r, n, m);
                        for (int a = 1; a <= m; ++a)
                            for (int b = 1; b <= m; ++b) {
                                words::Word ext = gamma;
                                ext.push_back(b);
                                out.at(gamma, controlled::flat_index(a, b, m)) = tbl.coeff(ext, a);
                            }
                    }
                }
                return out;
            };
            const ControlledPath dg(xp[j].path, m, m, deval);
            const ControlledIntegrand pulled = controlled::leibniz_product(moved, dg);
            for (int k = 0; k < samples; ++k) {
                const double t = s + (e - s) * static_cast<double>(k) / (samples - 1.0);
                const ControlledJet lhs = pulled.jet(t);
                const ControlledJet rhs = hp[j].jets.jet(t);
                for (std::size_t n = 0; n < lhs.levels.size(); ++n)
                    for (std::size_t r = 0; r < lhs.levels[n].size(); ++r)
                        worst = std::max(worst,
                                         std::abs(lhs.levels[n][r] - rhs.levels[n][r]));
            }
        }
    return worst;
}

// ---------------------------------------------------------------------------
// The rough integral over a manifold path.

/// Cumulative integral values along a partition.
struct IntegralPath {
    std::vector<double> times;
    std::vector<std::vector<double>> values;  ///< running sums; values[0] = 0
    const std::vector<double>& value() const { return values.back(); }
};

/// Sum of per-chart rough integrals over the partition intervals.  Each
/// interval must sit inside a single chart piece; `piece_choice` (one index
/// per interval) overrides the default first-fit assignment, e.g. to charge
/// an overlap interval to the other chart.
inline IntegralPath manifold_rough_integral(const ManifoldControlledIntegrand& H,
                                            const ManifoldRoughPath& X,
                                            const std::vector<double>& partition,
                                            double tol = 1e-8,
                                            const std::vector<std::size_t>* piece_choice = nullptr) {
    detail::require_alignment(H, X, "manifold_rough_integral");
    if (partition.size() < 2)
        throw std::invalid_argument("manifold_rough_integral: need at least two partition times");
    for (std::size_t k = 0; k + 1 < partition.size(); ++k)
        if (!(partition[k] < partition[k + 1]))
            throw std::invalid_argument("manifold_rough_integral: partition must increase");
    if (piece_choice && piece_choice->size() != partition.size() - 1)
        throw std::invalid_argument("manifold_rough_integral: one piece choice per interval");
    const auto& xp = X.pieces();
    const auto& hp = H.pieces();
    IntegralPath out;
    out.times = partition;
    out.values.assign(partition.size(),
                      std::vector<double>(static_cast<std::size_t>(H.target_dim()), 0.0));
    for (std::size_t k = 0; k + 1 < partition.size(); ++k) {
        const double a = partition[k], b = partition[k + 1];
        std::size_t pi = xp.size();
        if (piece_choice) {
            pi = (*piece_choice)[k];
            if (pi >= xp.size() || !(xp[pi].a <= a && b <= xp[pi].b))
                throw std::invalid_argument(
                    "manifold_rough_integral: chosen piece does not cover its interval");
        } else {
            for (std::size_t i = 0; i < xp.size(); ++i)
                if (xp[i].a <= a && b <= xp[i].b) {
                    pi = i;
                    break;
                }
            if (pi == xp.size())
                throw std::invalid_argument(
                    "manifold_rough_integral: partition interval not inside any single chart piece");
        }
        const std::vector<double> inc = controlled::rough_integral(hp[pi].jets, a, b, tol).value;
        for (std::size_t c = 0; c < inc.size(); ++c)
            out.values[k + 1][c] = out.values[k][c] + inc[c];
    }
    return out;
}

// ---------------------------------------------------------------------------
// RDEs driven by manifold rough paths.

/// Field table of a manifold RDE: for every (solution chart, driver chart)
/// pair, the coefficient jets R^{e+m} -> R^{e x m} of the coordinate system
/// dY = h(Y, X) dX, solution coordinates first, then driver coordinates.
class FieldTable {
public:
    FieldTable(int state_dim, int driver_dim) : e_(state_dim), m_(driver_dim) {
        if (e_ < 1 || m_ < 1)
            throw std::invalid_argument("FieldTable: dimensions must be positive");
    }

    int state_dim() const { return e_; }
    int driver_dim() const { return m_; }

    void set(const std::string& solution_chart, const std::string& driver_chart, JetFunction h) {
        if (h.in_dim() != e_ + m_ || h.out_dim() != e_ * m_)
            throw std::invalid_argument(
                "FieldTable: coefficient jets must map R^(e+m) to R^(e m)");
        table_.insert_or_assign({solution_chart, driver_chart}, std::move(h));
    }

    const JetFunction& at(const std::string& solution_chart,
                          const std::string& driver_chart) const {
        auto it = table_.find({solution_chart, driver_chart});
        if (it == table_.end())
            throw std::invalid_argument("FieldTable: no field for chart pair (" + solution_chart +
                                        ", " + driver_chart + ")");
        return it->second;
    }

private:
    int e_;
    int m_;
    std::map<std::pair<std::string, std::string>, JetFunction> table_;
};

/// Knobs of the greedy chart scheduler.
struct ScheduleOptions {
    double margin = 0.1;     ///< domain shrink fraction that triggers a chart switch
    double tol = 1e-7;       ///< per-leg solver tolerance
    int max_depth = 16;      ///< per-leg dyadic refinement budget
    int probe_depth = 8;     ///< dyadic depth of the exit-detection probe
    int max_legs = 64;       ///< hard cap on chart handoffs
    double guard = 1e6;      ///< explosion guard for the state
    double lift_tol = 1e-8;  ///< lift tolerance for the output pieces
};

/// Solves dY = F(Y, X) dX with Y on the target atlas.  Legs stay inside one
/// driver piece and one solution chart; a leg ends when the probed solution
/// trace leaves the chart's margin-shrunk domain (re-charting slightly before
/// the exit, so consecutive output pieces genuinely overlap) or at the driver
/// piece's end (re-charting inside the driver overlap).  Blowup surfaces as
/// ExplosionError; an uncovered solution point is a runtime error.
inline ManifoldRoughPath solve_manifold_rde(const FieldTable& F, const ManifoldRoughPath& X,
                                            const std::vector<double>& y0, const Atlas& target,
                                            ScheduleOptions opt = {}) {
    const int m = X.atlas().dim();
    const int e = target.dim();
    if (F.state_dim() != e || F.driver_dim() != m)
        throw std::invalid_argument(
            "solve_manifold_rde: field table dimensions do not match the atlases");
    if (static_cast<int>(y0.size()) != target.point_dim())
        throw std::invalid_argument(
            "solve_manifold_rde: initial point must use the target ambient presentation");
    const auto& xp = X.pieces();
    std::vector<ChartPiece> out;
    double t = X.t0();
    std::vector<double> y_pt = y0;
    for (int leg = 0;; ++leg) {
        if (t >= X.T() - 1e-12) break;
        if (leg >= opt.max_legs)
            throw std::runtime_error("solve_manifold_rde: chart schedule exceeded the leg budget");

        // driver piece containing t with the most road ahead
        std::size_t ip = xp.size();
        for (std::size_t i = 0; i < xp.size(); ++i)
            if (xp[i].a <= t + 1e-12 && t < xp[i].b - 1e-12 &&
                (ip == xp.size() || xp[i].b > xp[ip].b))
                ip = i;
        if (ip == xp.size())
            throw std::runtime_error("solve_manifold_rde: driver pieces do not cover the time");
        const ChartPiece& dp = xp[ip];

        // solution chart holding the current point deepest inside
        const auto [ci, entry_margin] = target.best_chart(y_pt);
        if (ci < 0)
            throw std::runtime_error(
                "solve_manifold_rde: no chart contains the current solution point");
        const Chart& cn = target.charts()[static_cast<std::size_t>(ci)];
        const double exit_margin = std::min(opt.margin, 0.5 * entry_margin);

        const rde::VectorFieldJet field = rde::doubled_system(F.at(cn.id(), dp.chart), m);

        // stacked initial state (driver coordinates first, then solution)
        std::vector<double> z0 = dp.path.trace(t);
        {
            const std::vector<double> yc = cn.coords(y_pt);
            z0.insert(z0.end(), yc.begin(), yc.end());
        }

        // cheap forward probe to locate the chart exit
        const auto probe =
            rde::euler_path(field, restrict_path(dp.path, t, dp.b), z0, opt.probe_depth, opt.guard);
        const std::size_t nodes = probe.size() - 1;
        auto node_time = [&](std::size_t k) {
            return t + (dp.b - t) * static_cast<double>(k) / static_cast<double>(nodes);
        };
        auto node_point = [&](std::size_t k) {
            return cn.point(std::vector<double>(probe[k].begin() + m, probe[k].end()));
        };
        std::size_t exit_node = nodes + 1;
        for (std::size_t k = 1; k <= nodes; ++k)
            if (!cn.contains(node_point(k), exit_margin)) {
                exit_node = k;
                break;
            }

        double target_t = dp.b;
        double sigma = dp.b;  // next leg's start
        if (exit_node <= nodes) {
            // extend a little past the exit while the full domain still holds
            std::size_t ext = exit_node;
            const std::size_t cap =
                std::min(nodes, exit_node + std::max<std::size_t>(2, nodes / 16));
            while (ext < cap && cn.contains(node_point(ext + 1), 0.0)) ++ext;
            if (ext > exit_node) {
                target_t = node_time(ext);
                sigma = node_time(exit_node);
            } else {
                target_t = node_time(exit_node);
                sigma = node_time(exit_node - 1);
            }
            if (!(sigma > t))
                throw std::runtime_error("solve_manifold_rde: chart schedule stalled");
        } else if (dp.b < X.T() - 1e-12) {
            // ride to the driver piece's end; hand off inside the driver overlap
            const double next_a = xp[ip + 1].a;
            sigma = std::max(0.5 * (t + dp.b), next_a + 0.25 * (dp.b - next_a));
        }

        const RoughPath leg_driver = restrict_path(dp.path, t, target_t);
        const rde::RdeSolution sol = rde::solve(field, leg_driver, z0, opt.tol, opt.max_depth,
                                                opt.guard);

        // output piece: the solution block of the stacked state, lifted
        const ControlledPath full = sol.controlled();
        auto yeval = [full, m, e](double tt) {
            const ControlledJet src = full.jet(tt);
            ControlledJet outj = ControlledJet::zeros(src.d, e, src.depth);
            for (int n = 0; n <= src.depth; ++n) {
                const std::size_t count = tensor::level_size(src.d, n);
                for (std::size_t r = 0; r < count; ++r)
                    for (int c = 1; c <= e; ++c)
                        outj.levels[static_cast<std::size_t>(n)]
                                   [r * static_cast<std::size_t>(e) +
                                    static_cast<std::size_t>(c - 1)] =
                            src.levels[static_cast<std::size_t>(n)]
                                      [r * static_cast<std::size_t>(m + e) +
                                       static_cast<std::size_t>(m + c - 1)];
            }
            return outj;
        };
        out.push_back({t, target_t, cn.id(),
                       controlled::lift(ControlledPath(leg_driver, e, 1, yeval), opt.lift_tol)});

        if (target_t >= X.T() - 1e-12) break;
        const std::vector<double> zs = sol.trace(sigma);
        y_pt = cn.point(std::vector<double>(zs.begin() + m, zs.end()));
        t = sigma;
    }
    return ManifoldRoughPath(target, std::move(out));
}

/// Coefficient jets of the frame-development system on a stereographic sphere
/// chart: state (u, v, A row-major), driver increments dZ in the flat plane,
///   dY^k = A^k_g dZ^g,   dA^k_g = -Gamma^k_{ij}(Y) A^i_a A^j_g dZ^a,
/// with the round metric's Christoffel symbols in conformal coordinates,
///   Gamma^k_{ij} = -2 (delta_{ik} u_j + delta_{jk} u_i - delta_{ij} u_k)
///                    / (1 + |u|^2).
/// The same expression serves both stereographic charts.
inline JetFunction development_field() {
    taylor::JetMap map = [](const std::vector<taylor::Jet>& z) {
        const taylor::Jet uu[2] = {z[0], z[1]};
        const taylor::Jet a[2][2] = {{z[2], z[3]}, {z[4], z[5]}};
        const taylor::Jet s = recip(1.0 + uu[0] * uu[0] + uu[1] * uu[1]);
        const taylor::Jet zero = z[0] * 0.0;
        std::vector<taylor::Jet> out;
        out.reserve(12);
        for (int k = 0; k < 2; ++k)
            for (int g = 0; g < 2; ++g) out.push_back(a[k][g]);
        for (int k = 0; k < 2; ++k)
            for (int g = 0; g < 2; ++g)
                for (int al = 0; al < 2; ++al) {
                    taylor::Jet acc = zero;
                    for (int i = 0; i < 2; ++i)
                        for (int j = 0; j < 2; ++j) {
                            taylor::Jet gam = zero;  // -Gamma^k_{ij} / (2 s)
                            if (i == k) gam = gam + uu[j];
                            if (j == k) gam = gam + uu[i];
                            if (i == j) gam = gam - uu[k];
                            acc = acc + (gam * s) * (a[i][al] * a[j][g]) * 2.0;
                        }
                    out.push_back(acc);
                }
        return out;
    };
    return JetFunction(8, 12, JetFunction::kUnlimitedOrder, std::move(map));
}

// ---------------------------------------------------------------------------
// Extrinsic constraint checks.

/// Radial tubular projection x -> x / |x| (nearest-point projection onto the
/// unit sphere of R^d) with closed-form jets.
inline JetFunction radial_projection(int d) {
    if (d < 1) throw std::invalid_argument("radial_projection: positive dimension required");
    taylor::JetMap map = [d](const std::vector<taylor::Jet>& z) {
        taylor::Jet r2 = z[0] * z[0];
        for (int i = 1; i < d; ++i) r2 = r2 + z[i] * z[i];
        const taylor::Jet s = recip(sqrt(r2));
        std::vector<taylor::Jet> out;
        out.reserve(z.size());
        for (int i = 0; i < d; ++i) out.push_back(z[i] * s);
        return out;
    };
    return JetFunction(d, d, JetFunction::kUnlimitedOrder, std::move(map));
}

struct ConstraintReport {
    std::vector<double> level_defects;  ///< sup per-level defect of the pushforward vs the path
    double trace_defect = 0.0;          ///< sup |projection(X_t) - X_t|
    double log_defect = 0.0;            ///< same increment comparison after the tensor logarithm
    bool pass(double tol) const {
        if (trace_defect > tol) return false;
        for (double v : level_defects)
            if (v > tol) return false;
        return true;
    }
};

/// Measures how far the pushforward through a tubular projection moves the
/// path: per-level increment defects on a sampled grid, the trace defect (is
/// the trace fixed by the projection?), and the log-space variant of the same
/// comparison.  The optional neighborhood predicate turns "trace outside the
/// tube" into a hard error.
inline ConstraintReport constrained_check(
    const RoughPath& x, const JetFunction& projection, double tol = 1e-8, int grid_points = 9,
    std::function<bool(const std::vector<double>&)> neighborhood = {}) {
    if (projection.in_dim() != x.dim() || projection.out_dim() != x.dim())
        throw std::invalid_argument(
            "constrained_check: projection must be an endomorphism of the ambient space");
    if (!x.has_trace()) throw std::invalid_argument("constrained_check: need a trace");
    if (grid_points < 2) throw std::invalid_argument("constrained_check: degenerate grid");
    std::vector<double> grid(static_cast<std::size_t>(grid_points));
    for (int k = 0; k < grid_points; ++k)
        grid[static_cast<std::size_t>(k)] =
            x.t0() + (x.T() - x.t0()) * static_cast<double>(k) / (grid_points - 1.0);
    if (neighborhood)
        for (double tt : grid)
            if (!neighborhood(x.trace(tt)))
                throw std::invalid_argument(
                    "constrained_check: trace leaves the tubular neighborhood");
    const RoughPath moved = controlled::pushforward_path(projection, x, tol);
    ConstraintReport rep;
    rep.level_defects.assign(static_cast<std::size_t>(x.level()), 0.0);
    for (double tt : grid) {
        const std::vector<double> pos = x.trace(tt);
        const std::vector<double> proj = projection.value(pos);
        for (std::size_t c = 0; c < pos.size(); ++c)
            rep.trace_defect = std::max(rep.trace_defect, std::abs(proj[c] - pos[c]));
    }
    for (std::size_t a = 0; a < grid.size(); ++a)
        for (std::size_t b = a + 1; b < grid.size(); ++b) {
            const Tensor lhs = moved.eval(grid[a], grid[b]);
            const Tensor rhs = x.eval(grid[a], grid[b]);
            const Tensor diff = lhs - rhs;
            for (int n = 1; n <= x.level(); ++n)
                rep.level_defects[static_cast<std::size_t>(n - 1)] =
                    std::max(rep.level_defects[static_cast<std::size_t>(n - 1)],
                             diff.max_abs_level(n));
            const Tensor logdiff = tensor::log_series(lhs) - tensor::log_series(rhs);
            rep.log_defect = std::max(rep.log_defect, logdiff.max_abs());
        }
    return rep;
}

}  // namespace rough::manifold
