// SPDX-License-Identifier: MIT
#pragma once
// Rough differential equations dY = F(Y) dX.  Vector fields enter through
// their derivative tables, iterated applications F_w g are computed by a
// word-Leibniz fold, and one Euler step sums iterated fields against the
// driver's tensor increment.  The solver refines a global dyadic partition
// until two refinements agree, guards against blowup with a norm cap, and
// exposes the solution as a trace, as a controlled path whose jets are the
// iterated fields at the trace, and as a rough path via the canonical lift.
// A change-of-variable checker solves the transported equation and compares.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rough/controlled.hpp"
#include "rough/roughpath.hpp"
#include "rough/taylor.hpp"
#include "rough/tensor.hpp"
#include "rough/words.hpp"

namespace rough::rde {

using controlled::ControlledJet;
using controlled::ControlledPath;
using controlled::flat_index;
using controlled::JetFunction;
using path::RoughPath;
using words::Word;
using Tensor = tensor::TensorSeries<double>;

// ---------------------------------------------------------------------------
// Vector fields.

/// A driving vector field for dY = F(Y) dX: a smooth map from the state space
/// R^e into e x d matrices, stored as a JetFunction whose flat components are
/// flat_index(state row k, driver letter gamma, d).
class VectorFieldJet {
public:
    VectorFieldJet(JetFunction f, int driver_dim) : f_(std::move(f)), d_(driver_dim) {
        if (driver_dim < 1)
            throw std::invalid_argument("VectorFieldJet: driver dimension must be positive");
        if (f_.out_dim() != f_.in_dim() * driver_dim)
            throw std::invalid_argument(
                "VectorFieldJet: codomain must factor as state rows times driver columns");
    }

    int state_dim() const { return f_.in_dim(); }
    int driver_dim() const { return d_; }
    int order() const { return f_.order(); }
    const JetFunction& function() const { return f_; }

    /// Derivative table of all components at y, up to the requested order.
    ControlledJet table(const std::vector<double>& y, int order) const {
        return f_.table(y, order);
    }

    /// Constant field a (e x d): the equation degenerates to dY = a dX.
    static VectorFieldJet constant(const std::vector<std::vector<double>>& a) {
        const int e = static_cast<int>(a.size());
        if (e == 0) throw std::invalid_argument("VectorFieldJet::constant: empty matrix");
        const int d = static_cast<int>(a.front().size());
        for (const auto& row : a)
            if (static_cast<int>(row.size()) != d)
                throw std::invalid_argument("VectorFieldJet::constant: ragged matrix");
        std::vector<std::vector<std::pair<double, std::vector<int>>>> terms(
            static_cast<std::size_t>(e * d));
        for (int k = 1; k <= e; ++k)
            for (int g = 1; g <= d; ++g)
                terms[static_cast<std::size_t>(flat_index(k, g, d) - 1)] = {
                    {a[static_cast<std::size_t>(k - 1)][static_cast<std::size_t>(g - 1)],
                     std::vector<int>(static_cast<std::size_t>(e), 0)}};
        return VectorFieldJet(JetFunction::polynomial(e, e * d, terms), d);
    }

    /// Linear field with one e x e matrix per driver letter:
    /// F(y) e_gamma = a[gamma-1] y, so dY = sum_gamma A_gamma Y dX^gamma.
    static VectorFieldJet linear(const std::vector<std::vector<std::vector<double>>>& a) {
        const int d = static_cast<int>(a.size());
        if (d == 0) throw std::invalid_argument("VectorFieldJet::linear: no matrices");
        const int e = static_cast<int>(a.front().size());
        for (const auto& mat : a) {
            if (static_cast<int>(mat.size()) != e)
                throw std::invalid_argument("VectorFieldJet::linear: matrices must share a size");
            for (const auto& row : mat)
                if (static_cast<int>(row.size()) != e)
                    throw std::invalid_argument("VectorFieldJet::linear: matrices must be square");
        }
        std::vector<std::vector<std::pair<double, std::vector<int>>>> terms(
            static_cast<std::size_t>(e * d));
        for (int g = 1; g <= d; ++g)
            for (int k = 1; k <= e; ++k) {
                auto& comp = terms[static_cast<std::size_t>(flat_index(k, g, d) - 1)];
                for (int h = 1; h <= e; ++h) {
                    const double c = a[static_cast<std::size_t>(g - 1)]
                                      [static_cast<std::size_t>(k - 1)]
                                      [static_cast<std::size_t>(h - 1)];
                    if (c == 0.0) continue;
                    std::vector<int> mono(static_cast<std::size_t>(e), 0);
                    mono[static_cast<std::size_t>(h - 1)] = 1;
                    comp.emplace_back(c, std::move(mono));
                }
            }
        return VectorFieldJet(JetFunction::polynomial(e, e * d, terms), d);
    }

    /// Field of the transformed equation for Z = g(Y):
    ///   (g_push F)(z) = Dg(g^{-1}(z)) F(g^{-1}(z)),
    /// assembled by jet composition from the inverse map and the Jacobian of
    /// g (dg components are flat_index(row c, column k, e)).  All three maps
    /// must carry closed-form evaluators.
    static VectorFieldJet transported(const JetFunction& ginv, const JetFunction& dg,
                                      const VectorFieldJet& f) {
        const int e = f.state_dim();
        const int d = f.driver_dim();
        if (ginv.in_dim() != e || ginv.out_dim() != e)
            throw std::invalid_argument(
                "VectorFieldJet::transported: inverse must be a self-map of the state space");
        if (dg.in_dim() != e || dg.out_dim() != e * e)
            throw std::invalid_argument(
                "VectorFieldJet::transported: Jacobian must map states to e x e matrices");
        taylor::JetMap map = [gim = ginv.jet_map(), dgm = dg.jet_map(),
                              fm = f.function().jet_map(), e, d](const std::vector<taylor::Jet>& z) {
            const std::vector<taylor::Jet> eta = gim(z);
            const std::vector<taylor::Jet> dgj = dgm(eta);
            const std::vector<taylor::Jet> fj = fm(eta);
            std::vector<taylor::Jet> out;
            out.reserve(static_cast<std::size_t>(e * d));
            for (int c = 1; c <= e; ++c)
                for (int g = 1; g <= d; ++g) {
                    taylor::Jet acc = dgj[static_cast<std::size_t>(flat_index(c, 1, e) - 1)] *
                                      fj[static_cast<std::size_t>(flat_index(1, g, d) - 1)];
                    for (int k = 2; k <= e; ++k)
                        acc += dgj[static_cast<std::size_t>(flat_index(c, k, e) - 1)] *
                               fj[static_cast<std::size_t>(flat_index(k, g, d) - 1)];
                    out.push_back(std::move(acc));
                }
            return out;
        };
        const int order = std::min({ginv.order(), dg.order(), f.order()});
        return VectorFieldJet(JetFunction(e, e * d, order, std::move(map)), d);
    }

private:
    JetFunction f_;
    int d_;
};

// ---------------------------------------------------------------------------
// Iterated vector-field application.

namespace detail {

/// Derivative table of the identity map at y.
inline ControlledJet identity_table(const std::vector<double>& y, int depth) {
    const int e = static_cast<int>(y.size());
    ControlledJet t = ControlledJet::zeros(e, e, depth);
    t.levels.front() = y;
    if (depth >= 1)
        for (int k = 1; k <= e; ++k) t.at(Word{k}, k) = 1.0;
    return t;
}

/// One field application on derivative tables: given the table of h (depth at
/// least `depth`+1) and the field's table, returns the table of
///   (F_letter h)(y) = sum_k d_k h(y) F^{k,letter}(y)
/// to the requested depth.  Derivatives of the product split over two-part
/// unshuffles of each word, with the extra state letter k joined to h's part.
inline ControlledJet apply_letter(const ControlledJet& field, const ControlledJet& h, int letter,
                                  int depth) {
    const int e = field.d;
    const int d = field.e / e;
    const int m = h.e;
    ControlledJet out = ControlledJet::zeros(e, m, depth);
    for (int n = 0; n <= depth; ++n) {
        const std::size_t count = tensor::level_size(e, n);
        for (std::size_t r = 0; r < count; ++r) {
            const Word u = tensor::word_unrank(r, n, e);
            for (const auto& [cut, mult] : words::unshuffle_pairs(u)) {
                const auto& [a, b] = cut;
                for (int k = 1; k <= e; ++k) {
                    const double fv = field.coeff(b, flat_index(k, letter, d));
                    if (fv == 0.0) continue;
                    Word ak = a;
                    ak.push_back(k);
                    const double w = static_cast<double>(mult) * fv;
                    for (int c = 1; c <= m; ++c) out.at(u, c) += w * h.coeff(ak, c);
                }
            }
        }
    }
    return out;
}

/// sum over words 1 <= |w| <= cap of F_w g(y) X^w, by a suffix recursion:
/// tables of F_{tail} g feed tables of F_w g one letter at a time, and the
/// value rows contract against the driver's tensor increment.  `seed` is g's
/// table at y (depth cap) and `field` the vector field's (depth cap-1).
inline std::vector<double> davie_sum(const ControlledJet& field, const ControlledJet& seed,
                                     const Tensor& xs, int cap) {
    const int d = field.e / field.d;
    const int m = seed.e;
    std::vector<double> acc(static_cast<std::size_t>(m), 0.0);
    std::vector<ControlledJet> prev{seed};
    std::size_t pw = 1;  // d^{L-1}: rank of a word splits as first letter + tail rank
    for (int level = 1; level <= cap; ++level) {
        const auto& coeffs = xs.level(level);
        std::vector<ControlledJet> cur;
        cur.reserve(coeffs.size());
        for (std::size_t r = 0; r < coeffs.size(); ++r) {
            const int letter = static_cast<int>(r / pw) + 1;
            cur.push_back(apply_letter(field, prev[r % pw], letter, cap - level));
            const double xc = coeffs[r];
            if (xc == 0.0) continue;
            const auto& vals = cur.back().levels.front();
            for (int c = 0; c < m; ++c)
                acc[static_cast<std::size_t>(c)] += vals[static_cast<std::size_t>(c)] * xc;
        }
        prev = std::move(cur);
        pw *= static_cast<std::size_t>(d);
    }
    return acc;
}

/// Gubinelli jet of a solution at state y: the level-|w| coefficient at word
/// w is the value F_w 1(y), computed by the same suffix recursion.
inline ControlledJet solution_jet(const VectorFieldJet& f, int driver_dim,
                                  const std::vector<double>& y, int depth) {
    const int e = f.state_dim();
    ControlledJet out = ControlledJet::zeros(driver_dim, e, depth);
    out.levels.front() = y;
    if (depth == 0) return out;
    const ControlledJet field = f.table(y, depth - 1);
    std::vector<ControlledJet> prev{identity_table(y, depth)};
    std::size_t pw = 1;
    for (int level = 1; level <= depth; ++level) {
        const std::size_t count = tensor::level_size(driver_dim, level);
        std::vector<ControlledJet> cur;
        cur.reserve(count);
        auto& dst = out.levels[static_cast<std::size_t>(level)];
        for (std::size_t r = 0; r < count; ++r) {
            const int letter = static_cast<int>(r / pw) + 1;
            cur.push_back(apply_letter(field, prev[r % pw], letter, depth - level));
            const auto& vals = cur.back().levels.front();
            for (int k = 0; k < e; ++k)
                dst[r * static_cast<std::size_t>(e) + static_cast<std::size_t>(k)] =
                    vals[static_cast<std::size_t>(k)];
        }
        prev = std::move(cur);
        pw *= static_cast<std::size_t>(driver_dim);
    }
    return out;
}

}  // namespace detail

/// F_gamma g(y) = F_{gamma_1}(... F_{gamma_n} g ...)(y): the letters apply
/// from the back of the word inward, each application trading one order of
/// g's jet for a field factor.  The result has g's codomain dimension.
inline std::vector<double> iterated_field(const VectorFieldJet& f, const JetFunction& g,
                                          const Word& gamma, const std::vector<double>& y) {
    const int e = f.state_dim();
    if (g.in_dim() != e)
        throw std::invalid_argument("iterated_field: map domain must match the state space");
    if (static_cast<int>(y.size()) != e)
        throw std::invalid_argument("iterated_field: state dimension mismatch");
    for (int l : gamma)
        if (l < 1 || l > f.driver_dim())
            throw std::invalid_argument("iterated_field: word letter outside the driver alphabet");
    const int n = static_cast<int>(gamma.size());
    if (g.order() < n || f.order() < std::max(n - 1, 0))
        throw std::invalid_argument("iterated_field: insufficient jet depth");
    ControlledJet h = g.table(y, n);
    if (n == 0) return h.levels.front();
    const ControlledJet field = f.table(y, n - 1);
    for (int i = n - 1; i >= 0; --i)
        h = detail::apply_letter(field, h, gamma[static_cast<std::size_t>(i)], i);
    return h.levels.front();
}

/// One local Euler increment of dY = F(Y) dX over [s, t]:
///   sum over words 1 <= |w| <= floor(p) of F_w 1(y) X^w(s, t).
inline std::vector<double> davie_step(const VectorFieldJet& f, const RoughPath& x,
                                      const std::vector<double>& y, double s, double t) {
    if (f.driver_dim() != x.dim())
        throw std::invalid_argument("davie_step: field and driver alphabets must match");
    if (static_cast<int>(y.size()) != f.state_dim())
        throw std::invalid_argument("davie_step: state dimension mismatch");
    const int cap = path::floor_p(x.p());
    if (f.order() < std::max(cap - 1, 0))
        throw std::invalid_argument("davie_step: insufficient jet depth");
    const ControlledJet field = f.table(y, std::max(cap - 1, 0));
    return detail::davie_sum(field, detail::identity_table(y, cap), x.eval(s, t), cap);
}

/// Truncated expansion of an observable g along the local flow from y:
///   g(y) + sum over words 1 <= |w| <= floor(p) of F_w g(y) X^w(s, t);
/// for the true solution started at y this approximates g(Y_t) with a
/// remainder of order omega^{(floor(p)+1)/p}.
inline std::vector<double> davie_expansion(const VectorFieldJet& f, const RoughPath& x,
                                           const JetFunction& g, const std::vector<double>& y,
                                           double s, double t) {
    if (f.driver_dim() != x.dim())
        throw std::invalid_argument("davie_expansion: field and driver alphabets must match");
    if (g.in_dim() != f.state_dim())
        throw std::invalid_argument("davie_expansion: map domain must match the state space");
    if (static_cast<int>(y.size()) != f.state_dim())
        throw std::invalid_argument("davie_expansion: state dimension mismatch");
    const int cap = path::floor_p(x.p());
    if (g.order() < cap || f.order() < std::max(cap - 1, 0))
        throw std::invalid_argument("davie_expansion: insufficient jet depth");
    const ControlledJet seed = g.table(y, cap);
    std::vector<double> out = seed.levels.front();
    const ControlledJet field = f.table(y, std::max(cap - 1, 0));
    const std::vector<double> sum = detail::davie_sum(field, seed, x.eval(s, t), cap);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += sum[i];
    return out;
}

// ---------------------------------------------------------------------------
// The solver.

/// Structured blowup report: the first time the Euler trace left the guard
/// ball, together with the offending state.
class ExplosionError : public std::runtime_error {
public:
    ExplosionError(double when, std::vector<double> state)
        : std::runtime_error("rde: state norm exceeded the explosion guard at t = " +
                             std::to_string(when)),
          time_(when),
          state_(std::move(state)) {}

    double time() const { return time_; }
    const std::vector<double>& state() const { return state_; }

private:
    double time_;
    std::vector<double> state_;
};

/// One global dyadic Euler run: 2^depth local increments across the driver's
/// whole domain, starting from y0.  States are reported at every partition
/// node (the start included); any state with a component beyond `guard` (or
/// non-finite) aborts with an ExplosionError.
inline std::vector<std::vector<double>> euler_path(const VectorFieldJet& f, const RoughPath& x,
                                                   const std::vector<double>& y0, int depth,
                                                   double guard = 1e6) {
    if (depth < 0 || depth > 30) throw std::invalid_argument("euler_path: bad partition depth");
    if (!(guard > 0.0)) throw std::invalid_argument("euler_path: guard must be positive");
    const std::size_t steps = std::size_t{1} << depth;
    const double t0 = x.t0();
    const double span = x.T() - x.t0();
    auto check = [guard](double when, const std::vector<double>& st) {
        for (double v : st)
            if (!(std::abs(v) <= guard)) throw ExplosionError(when, st);
    };
    check(t0, y0);
    std::vector<std::vector<double>> states;
    states.reserve(steps + 1);
    states.push_back(y0);
    for (std::size_t i = 0; i < steps; ++i) {
        const double s = t0 + span * static_cast<double>(i) / static_cast<double>(steps);
        const double t = t0 + span * static_cast<double>(i + 1) / static_cast<double>(steps);
        std::vector<double> next = states.back();
        const std::vector<double> inc = davie_step(f, x, states.back(), s, t);
        for (std::size_t c = 0; c < next.size(); ++c) next[c] += inc[c];
        check(t, next);
        states.push_back(std::move(next));
    }
    return states;
}

/// An immutable solved equation: the dyadic trace, its Gubinelli jets (the
/// iterated fields at the trace), and the canonical lift.
class RdeSolution {
public:
    double p() const { return data_->driver.p(); }
    const RoughPath& driver() const { return data_->driver; }
    const VectorFieldJet& field() const { return data_->field; }
    int depth() const { return data_->depth; }
    double last_diff() const { return data_->last_diff; }
    const std::vector<double>& times() const { return data_->times; }
    const std::vector<std::vector<double>>& states() const { return data_->states; }

    /// Piecewise-linear interpolation of the solved partition states.
    std::vector<double> trace(double t) const {
        const auto& d = *data_;
        if (t < d.driver.t0() || t > d.driver.T())
            throw std::invalid_argument("RdeSolution: time outside the driver domain");
        const std::size_t n = d.states.size();
        const double u = (t - d.driver.t0()) / (d.driver.T() - d.driver.t0()) *
                         static_cast<double>(n - 1);
        std::size_t i = static_cast<std::size_t>(u);
        if (i >= n - 1) i = n - 2;
        const double w = u - static_cast<double>(i);
        std::vector<double> out(d.states[i].size());
        for (std::size_t c = 0; c < out.size(); ++c)
            out[c] = (1.0 - w) * d.states[i][c] + w * d.states[i + 1][c];
        return out;
    }

    /// The solution as a path controlled by the driver: the jet at time t has
    /// level-|w| coefficients F_w 1(Y_t).
    ControlledPath controlled() const {
        const std::shared_ptr<const Data> d = data_;
        const int jet_depth = path::floor_p(d->driver.p()) - 1;
        RdeSolution self = *this;
        auto eval = [self, d, jet_depth](double t) {
            return detail::solution_jet(d->field, d->driver.dim(), self.trace(t), jet_depth);
        };
        return ControlledPath(d->driver, d->field.state_dim(), 1, std::move(eval));
    }

    /// The canonical rough-path lift of the solution.
    RoughPath lift(double tol = 1e-8, int max_depth = 14) const {
        return controlled::lift(controlled(), tol, max_depth);
    }

private:
    struct Data {
        RoughPath driver;
        VectorFieldJet field;
        std::vector<double> times;
        std::vector<std::vector<double>> states;
        int depth = 0;
        double last_diff = 0.0;
    };

    explicit RdeSolution(std::shared_ptr<const Data> data) : data_(std::move(data)) {}

    friend RdeSolution solve(const VectorFieldJet&, const RoughPath&, const std::vector<double>&,
                             double, int, double);

    std::shared_ptr<const Data> data_;
};

/// Solves dY = F(Y) dX from y0 by doubling the partition until two
/// consecutive Euler runs agree below `tol` in the sup norm on the coarser
/// grid.  Blowup surfaces as ExplosionError; exhausting the depth budget
/// without agreement is a runtime error.
inline RdeSolution solve(const VectorFieldJet& f, const RoughPath& x,
                         const std::vector<double>& y0, double tol = 1e-6, int max_depth = 14,
                         double guard = 1e6) {
    if (!(tol > 0.0)) throw std::invalid_argument("rde::solve: tolerance must be positive");
    if (max_depth < 1) throw std::invalid_argument("rde::solve: need at least one refinement");
    std::vector<std::vector<double>> prev = euler_path(f, x, y0, 0, guard);
    for (int depth = 1; depth <= max_depth; ++depth) {
        std::vector<std::vector<double>> cur = euler_path(f, x, y0, depth, guard);
        double diff = 0.0;
        for (std::size_t i = 0; i < prev.size(); ++i)
            for (std::size_t c = 0; c < prev[i].size(); ++c)
                diff = std::max(diff, std::abs(prev[i][c] - cur[2 * i][c]));
        if (diff < tol) {
            const std::size_t n = cur.size();
            std::vector<double> times(n);
            for (std::size_t i = 0; i < n; ++i)
                times[i] = x.t0() + (x.T() - x.t0()) * static_cast<double>(i) /
                                        static_cast<double>(n - 1);
            return RdeSolution(std::shared_ptr<const RdeSolution::Data>(new RdeSolution::Data{
                x, f, std::move(times), std::move(cur), depth, diff}));
        }
        prev = std::move(cur);
    }
    throw std::runtime_error(
        "rde::solve: refinement did not converge within the depth budget");
}

// ---------------------------------------------------------------------------
// Non-autonomous equations by doubling the state.

/// Turns dY = h(Y, X) dX into an autonomous system on the stacked state
/// (x, y): the first block carries an identity field (so it reproduces the
/// driver's trace), the second reads h at the unstacked arguments.  `h` maps
/// R^{e+d} (state variables first, then driver variables) to R^{e d} with
/// components flat_index(k, gamma, d).
inline VectorFieldJet doubled_system(const JetFunction& h, int driver_dim) {
    if (driver_dim < 1)
        throw std::invalid_argument("doubled_system: driver dimension must be positive");
    if (h.out_dim() % driver_dim != 0)
        throw std::invalid_argument("doubled_system: codomain must factor over the driver");
    const int e = h.out_dim() / driver_dim;
    const int d = driver_dim;
    if (h.in_dim() != e + d)
        throw std::invalid_argument(
            "doubled_system: domain must hold the state and driver variables");
    auto backend = [h, e, d](const std::vector<double>& z, int order) {
        // Unstack (x, y) into h's argument order (y, x).
        std::vector<double> arg(static_cast<std::size_t>(e + d));
        for (int i = 0; i < e; ++i) arg[static_cast<std::size_t>(i)] = z[static_cast<std::size_t>(d + i)];
        for (int i = 0; i < d; ++i) arg[static_cast<std::size_t>(e + i)] = z[static_cast<std::size_t>(i)];
        const ControlledJet tbl = h.table(arg, order);
        ControlledJet out = ControlledJet::zeros(d + e, (d + e) * d, order);
        for (int n = 0; n <= order; ++n) {
            const std::size_t count = tensor::level_size(d + e, n);
            for (std::size_t r = 0; r < count; ++r) {
                const Word w = tensor::word_unrank(r, n, d + e);
                Word mapped;
                mapped.reserve(w.size());
                for (int l : w) mapped.push_back(l <= d ? e + l : l - d);
                for (int g = 1; g <= d; ++g) {
                    if (n == 0) out.at(w, flat_index(g, g, d)) = 1.0;
                    for (int k = 1; k <= e; ++k)
                        out.at(w, flat_index(d + k, g, d)) = tbl.coeff(mapped, flat_index(k, g, d));
                }
            }
        }
        return out;
    };
    return VectorFieldJet(JetFunction::from_table(e + d, (e + d) * d, h.order(), backend), d);
}

// ---------------------------------------------------------------------------
// Change of variable.

struct ChangeOfVariableReport {
    double defect = 0.0;          ///< sup gap between the two rough paths (traces and levels)
    double inverse_defect = 0.0;  ///< sup |g^{-1}(g(Y_t)) - Y_t| along the solution
};

/// Checks that transporting the equation commutes with transporting the
/// solution: solves dY = F(Y) dX, pushes the lifted solution through g, and
/// compares -- trace and all tensor levels on a dyadic grid -- against the
/// lifted solution of dZ = Dg(g^{-1}(Z)) F(g^{-1}(Z)) dX from g(y0).  The
/// inverse map and the Jacobian of g must be supplied as closed-form jets.
inline ChangeOfVariableReport verify_change_of_variable(
    const VectorFieldJet& f, const RoughPath& x, const std::vector<double>& y0,
    const JetFunction& g, const std::optional<JetFunction>& ginv = std::nullopt,
    const std::optional<JetFunction>& dg = std::nullopt, double tol = 1e-6,
    int max_depth = 14) {
    const int e = f.state_dim();
    if (g.in_dim() != e || g.out_dim() != e)
        throw std::invalid_argument(
            "verify_change_of_variable: g must be a self-map of the state space");
    if (!ginv || !dg)
        throw std::invalid_argument("verify_change_of_variable: inverse jet missing");

    const RdeSolution y = solve(f, x, y0, tol, max_depth);
    const RoughPath left = controlled::pushforward_path(g, y.lift());
    const VectorFieldJet moved = VectorFieldJet::transported(*ginv, *dg, f);
    const RdeSolution z = solve(moved, x, g.value(y0), tol, max_depth);
    const RoughPath right = z.lift();

    ChangeOfVariableReport report;
    const int segments = 16;
    const double t0 = x.t0();
    const double span = x.T() - x.t0();
    std::vector<double> nodes(segments + 1);
    for (int i = 0; i <= segments; ++i)
        nodes[static_cast<std::size_t>(i)] =
            t0 + span * static_cast<double>(i) / static_cast<double>(segments);
    for (double t : nodes) {
        const std::vector<double> lt = left.trace(t);
        const std::vector<double> rt = right.trace(t);
        const std::vector<double> yt = y.trace(t);
        const std::vector<double> back = ginv->value(g.value(yt));
        for (int c = 0; c < e; ++c) {
            report.defect = std::max(report.defect,
                                     std::abs(lt[static_cast<std::size_t>(c)] -
                                              rt[static_cast<std::size_t>(c)]));
            report.inverse_defect = std::max(report.inverse_defect,
                                             std::abs(back[static_cast<std::size_t>(c)] -
                                                      yt[static_cast<std::size_t>(c)]));
        }
    }
    for (int i = 0; i < segments; ++i) {
        const Tensor a = left.eval(nodes[static_cast<std::size_t>(i)],
                                   nodes[static_cast<std::size_t>(i + 1)]);
        const Tensor b = right.eval(nodes[static_cast<std::size_t>(i)],
                                    nodes[static_cast<std::size_t>(i + 1)]);
        for (int lev = 1; lev <= left.level(); ++lev) {
            const auto& la = a.level(lev);
            const auto& lb = b.level(lev);
            for (std::size_t r = 0; r < la.size(); ++r)
                report.defect = std::max(report.defect, std::abs(la[r] - lb[r]));
        }
    }
    return report;
}

}  // namespace rough::rde
