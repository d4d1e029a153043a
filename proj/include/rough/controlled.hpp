// SPDX-License-Identifier: MIT
#pragma once
// Paths controlled by a rough path: a controlled path stores, for every time,
// a jet of Gubinelli derivatives indexed by words over the driver's alphabet.
// This module provides the calculus on such jets: construction from smooth
// functions, remainder-order diagnostics, rough integration via the sewing
// limit, the canonical lift back to a rough path, change of reference path,
// pushforwards, Leibniz products and pullbacks of integrands.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <valarray>
#include <vector>

#include "rough/roughpath.hpp"
#include "rough/taylor.hpp"
#include "rough/tensor.hpp"
#include "rough/words.hpp"

namespace rough::controlled {

using path::RoughPath;
using words::Word;
using Tensor = tensor::TensorSeries<double>;

// ---------------------------------------------------------------------------
// Jets of derivatives: dense tables indexed by (word over {1..d}, component).

/// One time-slice of a controlled path: levels[n] holds the coefficients for
/// all words of length n over the reference alphabet {1..d}, for each of the
/// e target components, laid out as levels[n][word_rank * e + (k-1)].
struct ControlledJet {
    int d = 1;      ///< reference alphabet size
    int e = 1;      ///< flat target dimension
    int depth = 0;  ///< largest stored word length
    std::vector<std::vector<double>> levels;

    static ControlledJet zeros(int d, int e, int depth) {
        ControlledJet j;
        j.d = d;
        j.e = e;
        j.depth = depth;
        j.levels.resize(static_cast<std::size_t>(depth) + 1);
        for (int n = 0; n <= depth; ++n)
            j.levels[static_cast<std::size_t>(n)].assign(
                tensor::level_size(d, n) * static_cast<std::size_t>(e), 0.0);
        return j;
    }

    double coeff(const Word& gamma, int k) const {
        return levels[gamma.size()][tensor::word_rank(gamma, d) * static_cast<std::size_t>(e) +
                                    static_cast<std::size_t>(k - 1)];
    }
    double& at(const Word& gamma, int k) {
        return levels[gamma.size()][tensor::word_rank(gamma, d) * static_cast<std::size_t>(e) +
                                    static_cast<std::size_t>(k - 1)];
    }
};

/// Flat component index of the (row i, column j) entry of an operator-valued
/// path, 1-based on both sides.  The column index varies fastest, so for an
/// integrand the trailing slot is the letter of the driving alphabet.
inline int flat_index(int i, int j, int cols) { return (i - 1) * cols + j; }

namespace detail {

inline std::uint64_t next_controlled_token() {
    static std::atomic<std::uint64_t> counter{0};
    return counter.fetch_add(1);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Differentiable maps presented through their derivative tables.

/// A smooth map R^in -> R^out exposed through its partial-derivative tables
/// d_gamma F^k at arbitrary base points.  Closed-form backends (linear,
/// polynomial, arbitrary jet-arithmetic lambdas) are machine exact; the
/// finite-difference wrapper trades accuracy for generality.  Mixed partials
/// are symmetric for every backend.
class JetFunction {
public:
    /// Effectively unbounded derivative order (linear/polynomial backends).
    static constexpr int kUnlimitedOrder = 1 << 20;

    JetFunction(int in_dim, int out_dim, int order, taylor::JetMap map)
        : in_(in_dim), out_(out_dim), order_(order), token_(detail::next_controlled_token()) {
        check_dims();
        if (!map) throw std::invalid_argument("JetFunction: missing evaluator");
        map_ = std::move(map);
        table_ = [m = map_, in = in_, out = out_](const std::vector<double>& x, int order_req) {
            const std::vector<taylor::Jet> jets = taylor::expand(m, x, order_req);
            if (static_cast<int>(jets.size()) != out)
                throw std::invalid_argument("JetFunction: evaluator output dimension mismatch");
            ControlledJet t = ControlledJet::zeros(in, out, order_req);
            for (int n = 0; n <= order_req; ++n) {
                const std::size_t count = tensor::level_size(in, n);
                for (std::size_t r = 0; r < count; ++r) {
                    const Word gamma = tensor::word_unrank(r, n, in);
                    for (int c = 1; c <= out; ++c)
                        t.at(gamma, c) = jets[static_cast<std::size_t>(c - 1)].partial(gamma);
                }
            }
            return t;
        };
    }

    /// x |-> A x with exact derivatives; a[i][j] multiplies coordinate j+1.
    static JetFunction linear(const std::vector<std::vector<double>>& a) {
        const int out = static_cast<int>(a.size());
        if (out == 0) throw std::invalid_argument("JetFunction::linear: empty matrix");
        const int in = static_cast<int>(a.front().size());
        for (const auto& row : a)
            if (static_cast<int>(row.size()) != in)
                throw std::invalid_argument("JetFunction::linear: ragged matrix");
        taylor::JetMap map = [a](const std::vector<taylor::Jet>& x) {
            std::vector<taylor::Jet> y;
            y.reserve(a.size());
            for (const auto& row : a) {
                taylor::Jet acc = x.front() * row.front();
                for (std::size_t j = 1; j < row.size(); ++j) acc += x[j] * row[j];
                y.push_back(std::move(acc));
            }
            return y;
        };
        return JetFunction(in, out, kUnlimitedOrder, std::move(map));
    }

    static JetFunction identity(int d) {
        std::vector<std::vector<double>> a(static_cast<std::size_t>(d),
                                           std::vector<double>(static_cast<std::size_t>(d), 0.0));
        for (std::size_t i = 0; i < static_cast<std::size_t>(d); ++i) a[i][i] = 1.0;
        return linear(a);
    }

    /// Polynomial map: terms[c] lists (coefficient, exponent multi-index) for
    /// output component c+1.  Derivatives are exact.
    static JetFunction polynomial(
        int in_dim, int out_dim,
        const std::vector<std::vector<std::pair<double, std::vector<int>>>>& terms) {
        if (static_cast<int>(terms.size()) != out_dim)
            throw std::invalid_argument("JetFunction::polynomial: one term list per component");
        for (const auto& comp : terms)
            for (const auto& [coef, alpha] : comp) {
                (void)coef;
                if (static_cast<int>(alpha.size()) != in_dim)
                    throw std::invalid_argument(
                        "JetFunction::polynomial: exponent length must match the domain");
            }
        taylor::JetMap map = [terms](const std::vector<taylor::Jet>& x) {
            std::vector<taylor::Jet> y;
            y.reserve(terms.size());
            const int vars = x.front().vars();
            const int order = x.front().order();
            for (const auto& comp : terms) {
                taylor::Jet acc = taylor::Jet::constant(vars, order, 0.0);
                for (const auto& [coef, alpha] : comp) {
                    taylor::Jet term = taylor::Jet::constant(vars, order, coef);
                    for (std::size_t j = 0; j < alpha.size(); ++j)
                        if (alpha[j] > 0) term = term * pow(x[j], alpha[j]);
                    acc += term;
                }
                y.push_back(std::move(acc));
            }
            return y;
        };
        return JetFunction(in_dim, out_dim, kUnlimitedOrder, std::move(map));
    }

    /// f after g; both sides must carry closed-form evaluators, and the
    /// composite inherits the smaller declared order.
    static JetFunction compose(const JetFunction& f, const JetFunction& g) {
        if (f.in_dim() != g.out_dim())
            throw std::invalid_argument("JetFunction::compose: inner/outer dimension mismatch");
        if (!f.map_ || !g.map_)
            throw std::invalid_argument(
                "JetFunction::compose: both factors need closed-form evaluators");
        taylor::JetMap map = [fm = f.map_, gm = g.map_](const std::vector<taylor::Jet>& x) {
            return fm(gm(x));
        };
        return JetFunction(g.in_dim(), f.out_dim(), std::min(f.order(), g.order()),
                           std::move(map));
    }

    /// Wrap a plain function with nested central differences; each partial is
    /// differenced on the sorted word, so mixed partials are symmetric by
    /// construction.  Accuracy degrades quickly with the order.
    static JetFunction finite_difference(
        std::function<std::vector<double>(const std::vector<double>&)> fn, int in_dim,
        int out_dim, int order, double step = 1e-4) {
        if (!fn) throw std::invalid_argument("JetFunction::finite_difference: missing function");
        if (order < 0 || order > 3)
            throw std::invalid_argument(
                "JetFunction::finite_difference: supported derivative orders are 0..3");
        if (!(step > 0.0))
            throw std::invalid_argument("JetFunction::finite_difference: step must be positive");
        JetFunction jf(in_dim, out_dim, order);
        jf.table_ = [fn = std::move(fn), step, in_dim, out_dim](const std::vector<double>& x,
                                                                int order_req) {
            auto sample = [&fn, out_dim](const std::vector<double>& pt) {
                std::vector<double> v = fn(pt);
                if (static_cast<int>(v.size()) != out_dim)
                    throw std::invalid_argument(
                        "JetFunction::finite_difference: function output dimension mismatch");
                return v;
            };
            // Nested symmetric differences: run(pt, letters, i, c) differences
            // letter i of the word and recurses on the rest.
            std::function<double(std::vector<double>&, const Word&, std::size_t, int)> run =
                [&](std::vector<double>& pt, const Word& letters, std::size_t from,
                    int comp) -> double {
                if (from == letters.size()) return sample(pt)[static_cast<std::size_t>(comp - 1)];
                const std::size_t i = static_cast<std::size_t>(letters[from] - 1);
                pt[i] += step;
                const double up = run(pt, letters, from + 1, comp);
                pt[i] -= 2.0 * step;
                const double dn = run(pt, letters, from + 1, comp);
                pt[i] += step;
                return (up - dn) / (2.0 * step);
            };
            ControlledJet out = ControlledJet::zeros(in_dim, out_dim, order_req);
            std::map<Word, std::vector<double>> cache;
            std::vector<double> pt = x;
            for (int n = 0; n <= order_req; ++n) {
                const std::size_t count = tensor::level_size(in_dim, n);
                for (std::size_t r = 0; r < count; ++r) {
                    const Word gamma = tensor::word_unrank(r, n, in_dim);
                    Word key = gamma;
                    std::sort(key.begin(), key.end());
                    auto it = cache.find(key);
                    if (it == cache.end()) {
                        std::vector<double> vals(static_cast<std::size_t>(out_dim));
                        for (int c = 1; c <= out_dim; ++c)
                            vals[static_cast<std::size_t>(c - 1)] = run(pt, key, 0, c);
                        it = cache.emplace(std::move(key), std::move(vals)).first;
                    }
                    for (int c = 1; c <= out_dim; ++c)
                        out.at(gamma, c) = it->second[static_cast<std::size_t>(c - 1)];
                }
            }
            return out;
        };
        return jf;
    }

    /// Wraps a raw derivative-table backend (for maps whose jets are produced
    /// by index bookkeeping rather than a formula, e.g. block assemblies).
    static JetFunction from_table(
        int in_dim, int out_dim, int order,
        std::function<ControlledJet(const std::vector<double>&, int)> backend) {
        if (!backend) throw std::invalid_argument("JetFunction::from_table: missing backend");
        JetFunction jf(in_dim, out_dim, order);
        jf.table_ = std::move(backend);
        return jf;
    }

    /// Whether a closed-form jet-arithmetic evaluator is available (needed to
    /// compose this map inside other formulas).
    bool closed_form() const { return static_cast<bool>(map_); }

    const taylor::JetMap& jet_map() const {
        if (!map_)
            throw std::invalid_argument("JetFunction: no closed-form evaluator available");
        return map_;
    }

    /// Full derivative table d_gamma F^k(x) for all |gamma| <= order.
    ControlledJet table(const std::vector<double>& x, int order) const {
        if (static_cast<int>(x.size()) != in_)
            throw std::invalid_argument("JetFunction: base point dimension mismatch");
        if (order < 0 || order > order_)
            throw std::invalid_argument("JetFunction: requested order exceeds the declared one");
        return table_(x, order);
    }

    std::vector<double> value(const std::vector<double>& x) const {
        return table(x, 0).levels.front();
    }

    double partial(const std::vector<double>& x, const Word& gamma, int comp) const {
        if (comp < 1 || comp > out_)
            throw std::invalid_argument("JetFunction: component out of range");
        return table(x, static_cast<int>(gamma.size())).coeff(gamma, comp);
    }

    int in_dim() const { return in_; }
    int out_dim() const { return out_; }
    int order() const { return order_; }
    std::uint64_t token() const { return token_; }

private:
    JetFunction(int in_dim, int out_dim, int order)
        : in_(in_dim), out_(out_dim), order_(order), token_(detail::next_controlled_token()) {
        check_dims();
    }

    void check_dims() const {
        if (in_ < 1 || out_ < 1 || order_ < 0)
            throw std::invalid_argument("JetFunction: dimensions must be positive");
    }

    int in_;
    int out_;
    int order_;
    std::uint64_t token_;
    taylor::JetMap map_;  // closed-form backend; empty for finite differences
    std::function<ControlledJet(const std::vector<double>&, int)> table_;
};

// ---------------------------------------------------------------------------
// Controlled paths.

namespace detail {

struct ControlledState {
    std::mutex mutex;
    std::map<double, ControlledJet> memo;
    std::set<std::uint64_t> lift_tokens;  // rough paths produced by lift()
};

}  // namespace detail

/// A path whose increments are expanded along a reference rough path: at each
/// time the evaluator returns the jet {H_gamma(t)} for |gamma| <= floor(p)-1.
/// Operator-valued paths carry a (rows x cols) shape with flat components
/// flat_index(i, j, cols); plain vector paths use cols == 1.  Jets are
/// memoized per time, and the object remembers which rough paths were built
/// from it by lift() so that changes of reference path can be validated.
class ControlledPath {
public:
    ControlledPath(RoughPath reference, int rows, int cols,
                   std::function<ControlledJet(double)> eval)
        : x_(std::move(reference)),
          rows_(rows),
          cols_(cols),
          depth_(path::floor_p(x_.p()) - 1),
          eval_(std::move(eval)),
          state_(std::make_shared<detail::ControlledState>()),
          token_(detail::next_controlled_token()) {
        if (rows_ < 1 || cols_ < 1)
            throw std::invalid_argument("ControlledPath: target shape must be positive");
        if (!eval_) throw std::invalid_argument("ControlledPath: missing evaluator");
    }

    const RoughPath& reference() const { return x_; }
    int rows() const { return rows_; }
    int cols() const { return cols_; }
    int dim() const { return rows_ * cols_; }
    int depth() const { return depth_; }
    std::uint64_t token() const { return token_; }

    /// Memoized jet at time t (shape-checked on first evaluation).
    ControlledJet jet(double t) const {
        if (t < x_.t0() || t > x_.T())
            throw std::invalid_argument("ControlledPath: time outside the reference domain");
        {
            std::lock_guard<std::mutex> lock(state_->mutex);
            auto it = state_->memo.find(t);
            if (it != state_->memo.end()) return it->second;
        }
        ControlledJet j = eval_(t);
        if (j.d != x_.dim() || j.e != dim() || j.depth != depth_ ||
            j.levels.size() != static_cast<std::size_t>(depth_) + 1)
            throw std::invalid_argument("ControlledPath: evaluator returned a wrong jet shape");
        std::lock_guard<std::mutex> lock(state_->mutex);
        return state_->memo.emplace(t, std::move(j)).first->second;
    }

    /// Level-0 jet: the path's own value at t.
    std::vector<double> trace(double t) const { return jet(t).levels.front(); }

    /// Bookkeeping used by lift(): associates a rough-path token with this
    /// controlled path so star_change_of_base can verify reference chains.
    void note_lift(std::uint64_t rough_token) const {
        std::lock_guard<std::mutex> lock(state_->mutex);
        state_->lift_tokens.insert(rough_token);
    }
    bool lifted_to(std::uint64_t rough_token) const {
        std::lock_guard<std::mutex> lock(state_->mutex);
        return state_->lift_tokens.count(rough_token) > 0;
    }

private:
    RoughPath x_;
    int rows_;
    int cols_;
    int depth_;
    std::function<ControlledJet(double)> eval_;
    std::shared_ptr<detail::ControlledState> state_;
    std::uint64_t token_;
};

/// An L(V, W)-valued controlled path ready for integration against its
/// reference: cols equals the reference dimension and the trailing component
/// slot is the V-letter.
using ControlledIntegrand = ControlledPath;

/// Same jets, new operator shape (the flat target dimension must not change).
inline ControlledPath reshape(const ControlledPath& h, int rows, int cols) {
    if (rows < 1 || cols < 1 || rows * cols != h.dim())
        throw std::invalid_argument("reshape: shape must factor the flat dimension");
    return ControlledPath(h.reference(), rows, cols, [h](double t) { return h.jet(t); });
}

// ---------------------------------------------------------------------------
// Construction from smooth functions.

/// Controlled path t |-> jets of F at X(t): H_gamma(t) = d_gamma F(X_t).  The
/// optional shape reinterprets F's flat output as a (rows x cols) operator,
/// e.g. for building integrands.
inline ControlledPath controlled_from_function(const JetFunction& f, const RoughPath& x,
                                               int rows = -1, int cols = -1) {
    if (f.in_dim() != x.dim())
        throw std::invalid_argument(
            "controlled_from_function: domain must match the reference dimension");
    if (!x.has_trace())
        throw std::invalid_argument("controlled_from_function: reference path needs a trace");
    if (rows < 0 && cols < 0) {
        rows = f.out_dim();
        cols = 1;
    }
    if (rows < 1 || cols < 1 || rows * cols != f.out_dim())
        throw std::invalid_argument("controlled_from_function: shape must factor the codomain");
    const int depth = path::floor_p(x.p()) - 1;
    if (f.order() < depth)
        throw std::invalid_argument("controlled_from_function: insufficient jet order");
    auto eval = [f, x, depth](double t) { return f.table(x.trace(t), depth); };
    return ControlledPath(x, rows, cols, std::move(eval));
}

// ---------------------------------------------------------------------------
// Remainder diagnostics.

/// Fitted remainder order for one jet level.
struct RemainderFit {
    int level = 0;
    double expected = 0.0;       ///< (floor(p) - level) / p
    double slope = 0.0;          ///< least-squares slope of log R against log omega
    double max_remainder = 0.0;  ///< largest remainder seen at this level
    std::size_t points = 0;      ///< pairs entering the fit
    bool trivial = false;        ///< remainders at machine zero; passes vacuously
    bool pass = false;
};

struct ControlledReport {
    std::vector<RemainderFit> levels;
    bool pass() const {
        for (const auto& f : levels)
            if (!f.pass) return false;
        return true;
    }
};

/// Checks the defining remainder estimates: for each level n the compensated
/// increment H_beta(t) - sum_{|alpha| <= depth-n} H_{alpha beta}(s) X^alpha(s,t)
/// should shrink like omega(s,t)^{(floor(p)-n)/p}.  The order is estimated by
/// a log-log fit over grid pairs at dyadic strides, and a level passes when
/// its fitted slope reaches the expected one minus `slack` (or when all its
/// remainders sit at machine zero).
inline ControlledReport check_controlled(const ControlledPath& h,
                                         const std::vector<double>& grid, double slack = 0.15) {
    const RoughPath& x = h.reference();
    if (grid.size() < 3) throw std::invalid_argument("check_controlled: degenerate grid");
    for (std::size_t i = 0; i + 1 < grid.size(); ++i)
        if (!(grid[i] < grid[i + 1]))
            throw std::invalid_argument("check_controlled: grid must increase strictly");
    if (grid.front() < x.t0() || grid.back() > x.T())
        throw std::invalid_argument("check_controlled: grid leaves the reference domain");

    // Pairs at dyadic strides cover the control range evenly in log scale.
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i + 1 < grid.size(); ++i)
        for (std::size_t stride = 1; i + stride < grid.size(); stride *= 2)
            pairs.emplace_back(i, i + stride);
    double omega_min = std::numeric_limits<double>::infinity();
    double omega_max = 0.0;
    for (const auto& [i, j] : pairs) {
        const double om = x.control()(grid[i], grid[j]);
        if (om > 0.0) {
            omega_min = std::min(omega_min, om);
            omega_max = std::max(omega_max, om);
        }
    }
    if (!(omega_max > 0.0) || omega_max / omega_min < 100.0)
        throw std::invalid_argument(
            "check_controlled: control must span at least two decades across the grid");

    const int depth = h.depth();
    const int d = x.dim();
    const int e = h.dim();
    const double p = x.p();
    const int lvl = path::floor_p(p);

    ControlledReport report;
    report.levels.resize(static_cast<std::size_t>(depth) + 1);
    std::vector<std::vector<std::pair<double, double>>> pts(
        static_cast<std::size_t>(depth) + 1);

    for (const auto& [gi, gj] : pairs) {
        const double s = grid[gi];
        const double t = grid[gj];
        const double om = x.control()(s, t);
        if (!(om > 0.0)) continue;
        const ControlledJet js = h.jet(s);
        const ControlledJet jt = h.jet(t);
        const Tensor xs = x.eval(s, t);
        for (int n = 0; n <= depth; ++n) {
            double worst = 0.0;
            const std::size_t nb = tensor::level_size(d, n);
            for (std::size_t rb = 0; rb < nb; ++rb) {
                const Word beta = tensor::word_unrank(rb, n, d);
                for (int k = 1; k <= e; ++k) {
                    double acc = jt.coeff(beta, k);
                    for (int m = 0; m <= depth - n; ++m) {
                        const std::size_t na = tensor::level_size(d, m);
                        for (std::size_t ra = 0; ra < na; ++ra) {
                            const Word alpha = tensor::word_unrank(ra, m, d);
                            const double xc =
                                m == 0 ? 1.0
                                       : xs.level(m)[ra];
                            if (xc == 0.0) continue;
                            acc -= js.coeff(words::concat(alpha, beta), k) * xc;
                        }
                    }
                    worst = std::max(worst, std::abs(acc));
                }
            }
            auto& fit = report.levels[static_cast<std::size_t>(n)];
            fit.max_remainder = std::max(fit.max_remainder, worst);
            if (worst > 1e-13) pts[static_cast<std::size_t>(n)].emplace_back(std::log(om),
                                                                             std::log(worst));
        }
    }

    for (int n = 0; n <= depth; ++n) {
        auto& fit = report.levels[static_cast<std::size_t>(n)];
        fit.level = n;
        fit.expected = static_cast<double>(lvl - n) / p;
        const auto& data = pts[static_cast<std::size_t>(n)];
        fit.points = data.size();
        if (data.size() < 3) {
            fit.trivial = true;
            fit.pass = true;
            continue;
        }
        double sx = 0.0, sy = 0.0;
        for (const auto& [lx, ly] : data) {
            sx += lx;
            sy += ly;
        }
        const double mx = sx / static_cast<double>(data.size());
        const double my = sy / static_cast<double>(data.size());
        double num = 0.0, den = 0.0;
        for (const auto& [lx, ly] : data) {
            num += (lx - mx) * (ly - my);
            den += (lx - mx) * (lx - mx);
        }
        fit.slope = den > 0.0 ? num / den : 0.0;
        fit.pass = fit.slope >= fit.expected - slack;
    }
    return report;
}

// ---------------------------------------------------------------------------
// Rough integration.

struct IntegralValue {
    std::vector<double> value;
    double last_increment = 0.0;
    int sewing_depth = 0;
};

/// Integral of an L(V, W)-valued integrand against its reference path: the
/// germ contracts the jet at u with the signature increment on (u, v),
///   Xi(u,v)^w = sum_{|gamma| <= floor(p)-1} sum_j H^{(w,j)}_gamma(u) X^{gamma j}(u,v),
/// which is almost additive with exponent (floor(p)+1)/p, so the sewing limit
/// converges; non-convergence within the depth budget is an error.
inline IntegralValue rough_integral(const ControlledIntegrand& h, double s, double t,
                                    double tol = 1e-8, int max_depth = 14) {
    const RoughPath& x = h.reference();
    const int d = x.dim();
    if (h.cols() != d)
        throw std::invalid_argument(
            "rough_integral: integrand columns must match the reference alphabet");
    if (s < x.t0() || t > x.T() || s > t)
        throw std::invalid_argument("rough_integral: bad integration interval");
    const int rows = h.rows();
    const int depth = h.depth();
    const double theta = static_cast<double>(path::floor_p(x.p()) + 1) / x.p();

    std::function<std::valarray<double>(double, double)> xi =
        [h, rows, d, depth](double u, double v) {
            const ControlledJet j = h.jet(u);
            const Tensor xs = h.reference().eval(u, v);
            std::valarray<double> acc(0.0, static_cast<std::size_t>(rows));
            for (int lev = 1; lev <= depth + 1; ++lev) {
                const auto& coeffs = xs.level(lev);
                const auto& jets = j.levels[static_cast<std::size_t>(lev - 1)];
                for (std::size_t r = 0; r < coeffs.size(); ++r) {
                    const double xc = coeffs[r];
                    if (xc == 0.0) continue;
                    // word = (gamma, jj): gamma has rank r / d, the last
                    // letter is r % d + 1, and the jet component is (w, jj).
                    const std::size_t gr = r / static_cast<std::size_t>(d);
                    const std::size_t jj = r % static_cast<std::size_t>(d);
                    const std::size_t base = gr * static_cast<std::size_t>(rows * d) + jj;
                    for (int w = 0; w < rows; ++w)
                        acc[static_cast<std::size_t>(w)] +=
                            jets[base + static_cast<std::size_t>(w * d)] * xc;
                }
            }
            return acc;
        };

    const auto res = path::sewing_limit<std::valarray<double>>(xi, s, t, theta, tol, max_depth);
    if (!res.converged)
        throw std::runtime_error(
            "rough_integral: sewing did not converge within the depth budget (last increment " +
            std::to_string(res.last_increment) + ")");
    return IntegralValue{std::vector<double>(std::begin(res.value), std::end(res.value)),
                         res.last_increment, res.depth};
}

/// Indefinite integral as a controlled path: the trace starts at zero at the
/// left end of the domain and the higher jets are the integrand's, shifted by
/// the adjunction between words (gamma j) and components (w, j).
inline ControlledPath controlled_integral(const ControlledIntegrand& h, double tol = 1e-8,
                                          int max_depth = 14) {
    const RoughPath& x = h.reference();
    const int d = x.dim();
    if (h.cols() != d)
        throw std::invalid_argument(
            "controlled_integral: integrand columns must match the reference alphabet");
    const int rows = h.rows();
    const int depth = h.depth();
    auto eval = [h, rows, d, depth, tol, max_depth](double t) {
        const RoughPath& ref = h.reference();
        ControlledJet out = ControlledJet::zeros(d, rows, depth);
        out.levels.front() = rough_integral(h, ref.t0(), t, tol, max_depth).value;
        const ControlledJet j = h.jet(t);
        for (int lev = 1; lev <= depth; ++lev) {
            const auto& src = j.levels[static_cast<std::size_t>(lev - 1)];
            auto& dst = out.levels[static_cast<std::size_t>(lev)];
            const std::size_t count = tensor::level_size(d, lev);
            for (std::size_t r = 0; r < count; ++r) {
                const std::size_t gr = r / static_cast<std::size_t>(d);
                const std::size_t jj = r % static_cast<std::size_t>(d);
                const std::size_t base = gr * static_cast<std::size_t>(rows * d) + jj;
                for (int w = 0; w < rows; ++w)
                    dst[r * static_cast<std::size_t>(rows) + static_cast<std::size_t>(w)] =
                        src[base + static_cast<std::size_t>(w * d)];
            }
        }
        return out;
    };
    return ControlledPath(x, rows, 1, std::move(eval));
}

// ---------------------------------------------------------------------------
// Canonical lift of a controlled path to a rough path.

/// One local candidate increment of the lift of H over [s, t], valued in the
/// truncated tensor algebra over H's target alphabet.  Level 1 is the trace
/// increment; level m >= 2 at word (k_1..k_m) contracts products of jets at s
/// with ordered-shuffle sums of reference coordinates:
///   sum over nonempty (gamma^1..gamma^m), total length <= floor(p), of
///   prod_i H^{k_i}_{gamma^i}(s) * sum_{gamma in OSh(gamma^1..gamma^m)} X^gamma(s,t).
inline Tensor lift_local(const ControlledPath& h, double s, double t) {
    const RoughPath& x = h.reference();
    const int d = x.dim();
    const int e = h.dim();
    const int cap = x.level();
    Tensor out(e, cap);
    out.coeff(Word{}) = 1.0;
    const ControlledJet js = h.jet(s);
    const ControlledJet jt = h.jet(t);
    for (int k = 1; k <= e; ++k)
        out.coeff(Word{k}) = jt.coeff(Word{}, k) - js.coeff(Word{}, k);
    if (cap < 2) return out;

    const Tensor xs = x.eval(s, t);
    for (int m = 2; m <= cap; ++m) {
        auto& target = out.level(m);
        for (int total = m; total <= cap; ++total) {
            for (const std::vector<int>& parts : words::compositions(total, m)) {
                // Mixed-radix walk over the word tuple (gamma^1..gamma^m).
                std::vector<std::size_t> ranks(parts.size(), 0);
                std::vector<std::size_t> sizes(parts.size());
                for (std::size_t i = 0; i < parts.size(); ++i)
                    sizes[i] = tensor::level_size(d, parts[i]);
                while (true) {
                    words::WordTuple tuple;
                    tuple.reserve(parts.size());
                    for (std::size_t i = 0; i < parts.size(); ++i)
                        tuple.push_back(tensor::word_unrank(ranks[i], parts[i], d));
                    double sig = 0.0;
                    for (const auto& [w, mult] : words::ordered_shuffle_multiset(tuple))
                        sig += static_cast<double>(mult) * xs.level(total)[tensor::word_rank(w, d)];
                    if (sig != 0.0) {
                        const std::size_t combos = tensor::level_size(e, m);
                        for (std::size_t kr = 0; kr < combos; ++kr) {
                            const Word kw = tensor::word_unrank(kr, m, e);
                            double prod = 1.0;
                            for (std::size_t i = 0; i < tuple.size() && prod != 0.0; ++i)
                                prod *= js.coeff(tuple[i], kw[i]);
                            if (prod != 0.0) target[kr] += prod * sig;
                        }
                    }
                    std::size_t pos = 0;
                    while (pos < ranks.size() && ++ranks[pos] == sizes[pos]) {
                        ranks[pos] = 0;
                        ++pos;
                    }
                    if (pos == ranks.size()) break;
                }
            }
        }
    }
    return out;
}

/// The rough path generated by a controlled path: lift_local is almost
/// multiplicative with defect exponent (floor(p)+1)/p, so its completion is a
/// genuine rough path over H's target alphabet; the trace is H itself.  The
/// produced token is recorded on H for later reference-chain checks.
inline RoughPath lift(const ControlledPath& h, double tol = 1e-8, int max_depth = 14) {
    const RoughPath& x = h.reference();
    path::AlmostRoughPath raw;
    raw.p = x.p();
    raw.d = h.dim();
    raw.t0 = x.t0();
    raw.T = x.T();
    raw.control = x.control();
    raw.eval = [h](double s, double t) { return lift_local(h, s, t); };
    raw.trace = [h](double t) { return h.trace(t); };
    RoughPath out = path::complete_almost(raw, false, tol, max_depth);
    h.note_lift(out.token());
    return out;
}

// ---------------------------------------------------------------------------
// Pushforward of the reference path under a smooth map.

namespace detail {

/// Records which (function, base path) pair produced each pushforward, so
/// pullbacks can verify they are undoing the matching construction.
struct PushforwardRegistry {
    std::mutex mutex;
    std::map<std::uint64_t, std::pair<std::uint64_t, std::uint64_t>> entries;

    static PushforwardRegistry& instance() {
        static PushforwardRegistry reg;
        return reg;
    }
};

}  // namespace detail

/// F_* X: the lift of the controlled path t |-> jets of F at X(t).
inline RoughPath pushforward_path(const JetFunction& f, const RoughPath& x, double tol = 1e-8,
                                  int max_depth = 14) {
    const ControlledPath fx = controlled_from_function(f, x);
    RoughPath out = lift(fx, tol, max_depth);
    auto& reg = detail::PushforwardRegistry::instance();
    std::lock_guard<std::mutex> lock(reg.mutex);
    reg.entries[out.token()] = {f.token(), x.token()};
    return out;
}

// ---------------------------------------------------------------------------
// Change of reference path, pushforwards of controlled paths, products.

namespace detail {

/// Shared coordinate formula behind star_change_of_base and pullback:
///   (K * H)_gamma = sum_m sum over nonempty ordered unshuffles
///   (gamma^1..gamma^m) of gamma of  K_{(k_1..k_m)} prod_i H^{k_i}_{gamma^i},
/// evaluated jetwise at matching times; level 0 is K's trace.
inline ControlledPath star_core(const ControlledPath& k, const ControlledPath& h) {
    const RoughPath& x = h.reference();
    const int d = x.dim();
    const int eh = h.dim();
    const int ek = k.dim();
    const int depth = h.depth();
    if (k.depth() != depth)
        throw std::invalid_argument("star_change_of_base: mismatched jet depths");
    if (k.reference().dim() != eh)
        throw std::invalid_argument(
            "star_change_of_base: moving path's alphabet must match the base target");
    auto eval = [k, h, d, eh, ek, depth](double t) {
        const ControlledJet jk = k.jet(t);
        const ControlledJet jh = h.jet(t);
        ControlledJet out = ControlledJet::zeros(d, ek, depth);
        out.levels.front() = jk.levels.front();
        for (int n = 1; n <= depth; ++n) {
            const std::size_t count = tensor::level_size(d, n);
            for (std::size_t r = 0; r < count; ++r) {
                const Word gamma = tensor::word_unrank(r, n, d);
                for (int m = 1; m <= n; ++m) {
                    for (const auto& [tuple, mult] : words::ordered_unshuffle(gamma, m)) {
                        const std::size_t combos = tensor::level_size(eh, m);
                        for (std::size_t kr = 0; kr < combos; ++kr) {
                            const Word kw = tensor::word_unrank(kr, m, eh);
                            double prod = static_cast<double>(mult);
                            for (std::size_t i = 0; i < tuple.size() && prod != 0.0; ++i)
                                prod *= jh.coeff(tuple[i], kw[i]);
                            if (prod == 0.0) continue;
                            for (int c = 1; c <= ek; ++c)
                                out.at(gamma, c) += prod * jk.coeff(kw, c);
                        }
                    }
                }
            }
        }
        return out;
    };
    return ControlledPath(x, k.rows(), k.cols(), std::move(eval));
}

}  // namespace detail

/// Rewrites a path controlled by lift(H) as a path controlled by H's own
/// reference.  The moving path's reference must be a rough path produced by
/// lift() from the base controlled path; anything else is a hard error, since
/// the formula silently produces garbage across unrelated references.
inline ControlledPath star_change_of_base(const ControlledPath& k, const ControlledPath& h) {
    if (!h.lifted_to(k.reference().token()))
        throw std::invalid_argument(
            "star_change_of_base: moving path must be controlled by a lift of the base path");
    return detail::star_core(k, h);
}

/// F_* H: jets of t |-> F(H_t) as a path controlled by H's reference, via the
/// chain rule for jets (unordered unshuffles with 1/m! symmetry factors):
///   (F_* H)_gamma = sum_m (1/m!) sum over nonempty unshuffles of
///   d_{(k_1..k_m)} F(H_t) prod_i H^{k_i}_{gamma^i}.
inline ControlledPath pushforward_controlled(const JetFunction& f, const ControlledPath& h) {
    const RoughPath& x = h.reference();
    const int d = x.dim();
    const int eh = h.dim();
    const int depth = h.depth();
    if (f.in_dim() != eh)
        throw std::invalid_argument(
            "pushforward_controlled: domain must match the controlled target");
    if (f.order() < depth)
        throw std::invalid_argument("pushforward_controlled: insufficient jet order");
    const int out_dim = f.out_dim();
    auto eval = [f, h, d, eh, out_dim, depth](double t) {
        const ControlledJet jh = h.jet(t);
        const ControlledJet tbl = f.table(jh.levels.front(), depth);
        ControlledJet out = ControlledJet::zeros(d, out_dim, depth);
        out.levels.front() = tbl.levels.front();
        for (int n = 1; n <= depth; ++n) {
            const std::size_t count = tensor::level_size(d, n);
            for (std::size_t r = 0; r < count; ++r) {
                const Word gamma = tensor::word_unrank(r, n, d);
                for (int m = 1; m <= n; ++m) {
                    const double inv = 1.0 / static_cast<double>(taylor::factorial(m));
                    for (const auto& [tuple, mult] : words::unshuffle_tuples(gamma, m)) {
                        const std::size_t combos = tensor::level_size(eh, m);
                        for (std::size_t kr = 0; kr < combos; ++kr) {
                            const Word kw = tensor::word_unrank(kr, m, eh);
                            double prod = inv * static_cast<double>(mult);
                            for (std::size_t i = 0; i < tuple.size() && prod != 0.0; ++i)
                                prod *= jh.coeff(tuple[i], kw[i]);
                            if (prod == 0.0) continue;
                            for (int c = 1; c <= out_dim; ++c)
                                out.at(gamma, c) += prod * tbl.coeff(kw, c);
                        }
                    }
                }
            }
        }
        return out;
    };
    return ControlledPath(x, out_dim, 1, std::move(eval));
}

/// Pointwise operator product of controlled paths over one reference: jets
/// multiply by the shuffle Leibniz rule, splitting each word over all
/// two-part unshuffles (empty parts included):
///   (K H)^{(i,j)}_gamma = sum_{(alpha,beta)} K^{(i,l)}_alpha H^{(l,j)}_beta.
inline ControlledPath leibniz_product(const ControlledPath& k, const ControlledPath& h) {
    if (k.reference().token() != h.reference().token())
        throw std::invalid_argument("leibniz_product: factors need a common reference path");
    if (k.cols() != h.rows())
        throw std::invalid_argument("leibniz_product: inner dimensions must agree");
    const RoughPath& x = h.reference();
    const int d = x.dim();
    const int rows = k.rows();
    const int mid = k.cols();
    const int cols = h.cols();
    const int depth = h.depth();
    auto eval = [k, h, d, rows, mid, cols, depth](double t) {
        const ControlledJet jk = k.jet(t);
        const ControlledJet jh = h.jet(t);
        ControlledJet out = ControlledJet::zeros(d, rows * cols, depth);
        for (int n = 0; n <= depth; ++n) {
            const std::size_t count = tensor::level_size(d, n);
            for (std::size_t r = 0; r < count; ++r) {
                const Word gamma = tensor::word_unrank(r, n, d);
                for (const auto& [pair, mult] : words::unshuffle_pairs(gamma)) {
                    const auto& [alpha, beta] = pair;
                    for (int i = 1; i <= rows; ++i)
                        for (int l = 1; l <= mid; ++l) {
                            const double kv = jk.coeff(alpha, flat_index(i, l, mid));
                            if (kv == 0.0) continue;
                            for (int j = 1; j <= cols; ++j)
                                out.at(gamma, flat_index(i, j, cols)) +=
                                    static_cast<double>(mult) * kv *
                                    jh.coeff(beta, flat_index(l, j, cols));
                        }
                }
            }
        }
        return out;
    };
    return ControlledPath(x, rows, cols, std::move(eval));
}

/// Pullback of an integrand along a pushforward: for H controlled by F_* X,
///   F^* H = (H * F(X)-jets) . DF(X)-jets
/// is controlled by X and satisfies  int H d(F_* X) = int F^* H dX.  The
/// integrand's reference must be the rough path recorded by
/// pushforward_path(f, x), and F needs one derivative order beyond the jet
/// depth to supply DF's own jets.
inline ControlledIntegrand pullback(const JetFunction& f, const ControlledIntegrand& h,
                                    const RoughPath& x) {
    {
        auto& reg = detail::PushforwardRegistry::instance();
        std::lock_guard<std::mutex> lock(reg.mutex);
        auto it = reg.entries.find(h.reference().token());
        if (it == reg.entries.end() || it->second != std::make_pair(f.token(), x.token()))
            throw std::invalid_argument(
                "pullback: integrand must be controlled by pushforward_path(f, x)");
    }
    const int depth = path::floor_p(x.p()) - 1;
    if (f.order() < depth + 1)
        throw std::invalid_argument("pullback: insufficient jet order");
    if (h.cols() != f.out_dim())
        throw std::invalid_argument("pullback: integrand columns must match the map codomain");

    const ControlledPath fx = controlled_from_function(f, x);
    const ControlledPath moved = detail::star_core(h, fx);

    // Jets of DF along X: d_gamma (d_j F^i)(X_t) = d_{gamma j} F^i(X_t).
    const int d = x.dim();
    const int out_dim = f.out_dim();
    auto deval = [f, x, d, out_dim, depth](double t) {
        const ControlledJet tbl = f.table(x.trace(t), depth + 1);
        ControlledJet out = ControlledJet::zeros(d, out_dim * d, depth);
        for (int n = 0; n <= depth; ++n) {
            const std::size_t count = tensor::level_size(d, n);
            for (std::size_t r = 0; r < count; ++r) {
                const Word gamma = tensor::word_unrank(r, n, d);
                for (int i = 1; i <= out_dim; ++i)
                    for (int j = 1; j <= d; ++j) {
                        Word ext = gamma;
                        ext.push_back(j);
                        out.at(gamma, flat_index(i, j, d)) = tbl.coeff(ext, i);
                    }
            }
        }
        return out;
    };
    const ControlledPath df(x, out_dim, d, std::move(deval));
    return leibniz_product(moved, df);
}

}  // namespace rough::controlled
