// SPDX-License-Identifier: MIT
//
// Weakly geometric p-rough paths as two-parameter group-like functionals.
//
// A rough path here is evaluator-backed: a closure (s,t) -> truncated tensor
// series at level floor(p), together with a control function, a trace (the
// absolute level-0/1 position, needed by pushforwards), and a memo cache so
// sewing-style algorithms can hammer dyadic points cheaply.  Constructors
// cover exact polyline signatures (Chen concatenation of segment
// exponentials) and pure-area paths; verification, the compensated sewing
// limit, Lyons extension above level floor(p), and completion of almost rough
// paths are provided as free functions.

#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <valarray>
#include <vector>

#include "rough/tensor.hpp"
#include "rough/words.hpp"

namespace rough::path {

using Tensor = tensor::TensorSeries<double>;
using words::Word;

/// floor(p) for the supported analysis range p in [1,4).
inline int floor_p(double p) {
    if (!(p >= 1.0 && p < 4.0))
        throw std::invalid_argument("p must lie in [1,4), got " + std::to_string(p));
    return static_cast<int>(std::floor(p));
}

// ---------------------------------------------------------------------------
// Control
// ---------------------------------------------------------------------------

/// Superadditive control function on the simplex {0 <= s <= t <= T}.
class Control {
public:
    Control() : fn_([](double, double) { return 0.0; }) {}
    explicit Control(std::function<double(double, double)> fn) : fn_(std::move(fn)) {}

    /// The built-in Hoelder-type control omega(s,t) = C (t - s).
    static Control linear(double C = 1.0) {
        if (C < 0.0) throw std::invalid_argument("Control::linear: negative constant");
        return Control([C](double s, double t) { return C * (t - s); });
    }

    double operator()(double s, double t) const {
        if (t < s) throw std::invalid_argument("Control: evaluated off the simplex (t < s)");
        return fn_(s, t);
    }

private:
    std::function<double(double, double)> fn_;
};

/// Worst violation of omega(s,u) + omega(u,t) <= omega(s,t) and omega(t,t) = 0
/// over all triples from a sorted grid (positive = violated).
inline double control_superadditivity_defect(const Control& omega, const std::vector<double>& grid) {
    double worst = 0.0;
    for (std::size_t a = 0; a < grid.size(); ++a) {
        worst = std::max(worst, std::abs(omega(grid[a], grid[a])));
        for (std::size_t b = a; b < grid.size(); ++b)
            for (std::size_t c = b; c < grid.size(); ++c)
                worst = std::max(worst, omega(grid[a], grid[b]) + omega(grid[b], grid[c]) -
                                            omega(grid[a], grid[c]));
    }
    return worst;
}

// ---------------------------------------------------------------------------
// RoughPath / AlmostRoughPath
// ---------------------------------------------------------------------------

namespace detail {

inline std::uint64_t next_path_token() {
    static std::atomic<std::uint64_t> counter{1};
    return counter.fetch_add(1);
}

struct Memo {
    std::mutex mu;
    std::map<std::pair<double, double>, Tensor> cache;
};

}  // namespace detail

/// Two-parameter tensor-valued functional with the same shape as a rough path
/// but only an *approximate* contract: multiplicativity and the shuffle
/// identity may fail with defects O(omega^theta), theta > 1.
struct AlmostRoughPath {
    double p = 1.0;
    int d = 1;
    double t0 = 0.0;
    double T = 1.0;
    Control control;
    std::function<Tensor(double, double)> eval;
    std::function<std::vector<double>(double)> trace;  ///< absolute position; may be null

    int level() const { return floor_p(p); }
};

/// Weakly geometric p-rough path.  Copies share the evaluation memo (and the
/// identity token used by controlled paths to pin their reference).
class RoughPath {
public:
    RoughPath() = default;

    RoughPath(double p, int d, double t0, double T, Control control,
              std::function<Tensor(double, double)> eval,
              std::function<std::vector<double>(double)> trace)
        : p_(p),
          d_(d),
          t0_(t0),
          T_(T),
          control_(std::move(control)),
          eval_(std::move(eval)),
          trace_(std::move(trace)),
          memo_(std::make_shared<detail::Memo>()),
          token_(detail::next_path_token()) {
        floor_p(p);  // validates the range
        if (d < 1) throw std::invalid_argument("RoughPath: alphabet size must be >= 1");
        if (!(t0 <= T)) throw std::invalid_argument("RoughPath: empty time domain");
        if (!eval_) throw std::invalid_argument("RoughPath: missing evaluator");
    }

    double p() const { return p_; }
    int level() const { return floor_p(p_); }
    int dim() const { return d_; }
    double t0() const { return t0_; }
    double T() const { return T_; }
    const Control& control() const { return control_; }
    std::uint64_t token() const { return token_; }
    bool has_trace() const { return static_cast<bool>(trace_); }

    /// X_{st} at level floor(p); memoized.
    Tensor eval(double s, double t) const {
        require_times(s, t);
        {
            std::lock_guard<std::mutex> lock(memo_->mu);
            auto it = memo_->cache.find({s, t});
            if (it != memo_->cache.end()) return it->second;
        }
        Tensor v = eval_(s, t);
        if (v.dim() != d_ || v.cap() != level())
            throw std::logic_error("RoughPath: evaluator returned wrong tensor shape");
        std::lock_guard<std::mutex> lock(memo_->mu);
        return memo_->cache.emplace(std::make_pair(s, t), std::move(v)).first->second;
    }

    /// Absolute position of the underlying trace at time t.
    std::vector<double> trace(double t) const {
        if (!trace_) throw std::logic_error("RoughPath: no trace attached");
        if (t < t0_ || t > T_) throw std::invalid_argument("RoughPath: trace time outside domain");
        return trace_(t);
    }

    AlmostRoughPath as_almost() const {
        AlmostRoughPath a;
        a.p = p_;
        a.d = d_;
        a.t0 = t0_;
        a.T = T_;
        a.control = control_;
        a.eval = [self = *this](double s, double t) { return self.eval(s, t); };
        if (trace_) a.trace = trace_;
        return a;
    }

private:
    void require_times(double s, double t) const {
        if (!(t0_ <= s && s <= t && t <= T_))
            throw std::invalid_argument("RoughPath: (s,t) outside the domain simplex");
    }

    double p_ = 1.0;
    int d_ = 1;
    double t0_ = 0.0;
    double T_ = 1.0;
    Control control_;
    std::function<Tensor(double, double)> eval_;
    std::function<std::vector<double>(double)> trace_;
    std::shared_ptr<detail::Memo> memo_;
    std::uint64_t token_ = 0;
};

// ---------------------------------------------------------------------------
// Constructors
// ---------------------------------------------------------------------------

/// Exact signature of the polyline through the samples, truncated at level N:
/// X_{st} is the Chen concatenation of exponentials of (partial) segment
/// increments.  p defaults to N, so level() == N; any p with floor(p) == N in
/// [1,4) may be supplied instead.
inline RoughPath pwl_signature(const std::vector<double>& times,
                               const std::vector<std::vector<double>>& points, int N,
                               double p = -1.0) {
    if (times.size() != points.size() || times.size() < 2)
        throw std::invalid_argument("pwl_signature: need matching times/points, at least two");
    for (std::size_t i = 0; i + 1 < times.size(); ++i)
        if (!(times[i] < times[i + 1]))
            throw std::invalid_argument("pwl_signature: times must strictly increase");
    const int d = static_cast<int>(points.front().size());
    if (d < 1) throw std::invalid_argument("pwl_signature: empty sample points");
    for (const auto& x : points)
        if (static_cast<int>(x.size()) != d)
            throw std::invalid_argument("pwl_signature: inconsistent point dimension");
    if (N < 1) throw std::invalid_argument("pwl_signature: level must be >= 1");
    if (p < 0.0) p = static_cast<double>(N);
    if (floor_p(p) != N)
        throw std::invalid_argument("pwl_signature: floor(p) must equal the requested level");

    auto eval = [times, points, d, N](double s, double t) {
        Tensor acc = Tensor::unit(d, N);
        if (s == t) return acc;
        double cur = s;
        // segment index: largest i with times[i] <= cur, clamped to the last segment
        std::size_t i = static_cast<std::size_t>(
            std::upper_bound(times.begin(), times.end(), cur) - times.begin());
        i = (i == 0 ? 0 : i - 1);
        if (i + 1 >= times.size()) i = times.size() - 2;
        while (cur < t) {
            const double seg_end = std::min(times[i + 1], t);
            const double frac = (seg_end - cur) / (times[i + 1] - times[i]);
            Tensor inc(d, N);
            for (int k = 0; k < d; ++k)
                inc.level(1)[static_cast<std::size_t>(k)] =
                    frac * (points[i + 1][static_cast<std::size_t>(k)] -
                            points[i][static_cast<std::size_t>(k)]);
            acc = tensor::concat_mul(acc, tensor::exp_series(inc));
            cur = seg_end;
            ++i;
        }
        return acc;
    };

    auto trace = [times, points, d](double t) {
        std::size_t i = static_cast<std::size_t>(
            std::upper_bound(times.begin(), times.end(), t) - times.begin());
        i = (i == 0 ? 0 : i - 1);
        if (i + 1 >= times.size()) i = times.size() - 2;
        const double lam = (t - times[i]) / (times[i + 1] - times[i]);
        std::vector<double> x(static_cast<std::size_t>(d));
        for (int k = 0; k < d; ++k)
            x[static_cast<std::size_t>(k)] = (1.0 - lam) * points[i][static_cast<std::size_t>(k)] +
                                             lam * points[i + 1][static_cast<std::size_t>(k)];
        return x;
    };

    // total variation scale for the control constant
    double var = 0.0;
    for (std::size_t i = 0; i + 1 < times.size(); ++i) {
        double seg = 0.0;
        for (int k = 0; k < d; ++k) {
            const double dx = points[i + 1][static_cast<std::size_t>(k)] -
                              points[i][static_cast<std::size_t>(k)];
            seg += dx * dx;
        }
        var += std::sqrt(seg);
    }
    const double span = times.back() - times.front();
    const double rate = span > 0.0 ? var / span : 1.0;
    const double C = std::max(1.0, std::pow(rate, p));

    return RoughPath(p, d, times.front(), times.back(), Control::linear(C), eval, trace);
}

/// Convenience overload for a (times, values) table given as one struct-free
/// pair, used by the CSV front end.
inline RoughPath pwl_signature(const std::vector<std::pair<double, std::vector<double>>>& samples,
                               int N, double p = -1.0) {
    std::vector<double> times;
    std::vector<std::vector<double>> points;
    for (const auto& [t, x] : samples) {
        times.push_back(t);
        points.push_back(x);
    }
    return pwl_signature(times, points, N, p);
}

/// The pure-area rough path X_{st} = 1 + 0 + (t-s) a for antisymmetric a:
/// exactly multiplicative and group-like, trace identically zero.
inline RoughPath pure_area_path(const Tensor& a, double p, double t0 = 0.0, double T = 1.0) {
    if (!(p > 2.0 && p < 3.0))
        throw std::invalid_argument("pure_area_path: p must lie in (2,3)");
    if (a.cap() < 2) throw std::invalid_argument("pure_area_path: need a level-2 tensor");
    const int d = a.dim();
    for (int i = 1; i <= d; ++i)
        for (int j = 1; j <= d; ++j)
            if (std::abs(a.coeff({i, j}) + a.coeff({j, i})) > 0.0)
                throw std::invalid_argument("pure_area_path: tensor is not antisymmetric");

    Tensor area(d, 2);
    area.level(2) = a.level(2);
    auto eval = [area, d](double s, double t) {
        Tensor out = Tensor::unit(d, 2);
        out += area * (t - s);
        return out;
    };
    auto trace = [d](double) { return std::vector<double>(static_cast<std::size_t>(d), 0.0); };
    return RoughPath(p, d, t0, T, Control::linear(std::max(1.0, a.max_abs_level(2))), eval, trace);
}

// ---------------------------------------------------------------------------
// Axiom verification
// ---------------------------------------------------------------------------

struct AxiomReport {
    double mult_defect = 0.0;        ///< worst |X_{su} (x) X_{ut} - X_{st}| over grid triples
    double shuffle_defect = 0.0;     ///< worst shuffle-identity defect over grid pairs
    double regularity_constant = 0.0;  ///< exp of the log-log fit intercept
    double regularity_max_ratio = 0.0; ///< max |X^n| / omega^{n/p} over the sample
    bool pass(double tol) const { return mult_defect <= tol && shuffle_defect <= tol; }
};

/// Measures the three rough-path axioms on a sorted grid.  Reports only; the
/// regularity constant comes from a least-squares fit of log|X^n_{st}| against
/// (n/p) log omega(s,t) with unit slope, as an overall scale estimate.
inline AxiomReport check_rough_axioms(const RoughPath& X, const std::vector<double>& grid,
                                      double /*tol (recorded by callers)*/ = 1e-8) {
    if (grid.size() < 2) throw std::invalid_argument("check_rough_axioms: need at least two grid points");
    AxiomReport rep;
    double log_ratio_sum = 0.0;
    std::size_t log_ratio_count = 0;

    for (std::size_t a = 0; a < grid.size(); ++a) {
        for (std::size_t b = a; b < grid.size(); ++b) {
            const Tensor x = X.eval(grid[a], grid[b]);
            rep.shuffle_defect = std::max(rep.shuffle_defect, tensor::is_grouplike(x).max_defect);

            const double om = X.control()(grid[a], grid[b]);
            for (int n = 1; n <= X.level(); ++n) {
                const double mag = x.max_abs_level(n);
                if (om > 0.0 && mag > 0.0) {
                    const double ratio = mag / std::pow(om, n / X.p());
                    rep.regularity_max_ratio = std::max(rep.regularity_max_ratio, ratio);
                    log_ratio_sum += std::log(ratio);
                    ++log_ratio_count;
                }
            }
            for (std::size_t c = b; c < grid.size(); ++c) {
                const Tensor chen =
                    tensor::concat_mul(x, X.eval(grid[b], grid[c])) - X.eval(grid[a], grid[c]);
                rep.mult_defect = std::max(rep.mult_defect, chen.max_abs());
            }
        }
    }
    rep.regularity_constant = log_ratio_count ? std::exp(log_ratio_sum / static_cast<double>(log_ratio_count)) : 0.0;
    return rep;
}

/// Defect of the trace-symmetry property: max over 2 <= n <= cap of
/// | n! sym(X^n) - (X^1)^{(x) n} |.
inline double trace_symmetry_defect(const Tensor& x) {
    double worst = 0.0;
    Tensor pow1 = Tensor::unit(x.dim(), x.cap());
    Tensor lvl1(x.dim(), x.cap());
    lvl1.level(1) = x.level(1);
    for (int n = 1; n <= x.cap(); ++n) {
        pow1 = tensor::concat_mul(pow1, lvl1);
        if (n < 2) continue;
        std::vector<double> sym = tensor::symmetrize_level(x.level(n), n, x.dim());
        double fact = 1.0;
        for (int i = 2; i <= n; ++i) fact *= i;
        double defect = 0.0;
        for (std::size_t r = 0; r < sym.size(); ++r)
            defect = std::max(defect, std::abs(fact * sym[r] - pow1.level(n)[r]));
        worst = std::max(worst, defect);
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Sewing limit
// ---------------------------------------------------------------------------

inline double norm_of(double v) { return std::abs(v); }
inline double norm_of(const Tensor& v) { return v.max_abs(); }
inline double norm_of(const std::valarray<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}
inline double norm_of(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

inline void axpy(double& y, double a, double x) { y += a * x; }
inline void axpy(Tensor& y, double a, const Tensor& x) { y += x * a; }
inline void axpy(std::valarray<double>& y, double a, const std::valarray<double>& x) {
    y += a * x;
}

enum class Refinement { dyadic, uniform_ternary };

template <class V>
struct SewingResult {
    V value;
    double last_increment = 0.0;
    int depth = 0;
    bool converged = false;
};

namespace detail {

// Accelerated limit of a refinement sequence I_k = gen(factor^k).  The raw
// increments d_k = I_k - I_{k-1} of an almost-additive/multiplicative scheme
// decay geometrically, so a one-term Richardson tail estimate
// E_k = I_k + d_k rho/(1-rho), rho = |d_k|/|d_{k-1}|, jumps ahead of the raw
// sequence; convergence is declared when consecutive extrapolated values
// agree within tol.
template <class V, class Gen>
SewingResult<V> refine_limit(Gen&& gen, long factor, double tol, int max_depth) {
    SewingResult<V> res{gen(1), 0.0, 0, false};
    V extrap_prev = res.value;
    bool have_extrap = false;
    double d_prev = -1.0;
    long pieces = 1;
    for (int depth = 1; depth <= max_depth; ++depth) {
        pieces *= factor;
        V next = gen(pieces);
        V d = next;
        d -= res.value;
        const double dn = norm_of(d);
        res.value = next;
        res.depth = depth;
        if (dn == 0.0) {
            res.last_increment = 0.0;
            res.converged = true;
            return res;
        }
        V extrap = next;
        if (d_prev > 0.0) {
            const double rho = dn / d_prev;
            if (rho < 0.95) axpy(extrap, rho / (1.0 - rho), d);
        }
        if (have_extrap) {
            V de = extrap;
            de -= extrap_prev;
            res.last_increment = norm_of(de);
            if (res.last_increment < tol * std::max(1.0, norm_of(extrap))) {
                res.converged = true;
                res.value = std::move(extrap);
                return res;
            }
        } else {
            res.last_increment = dn;
        }
        extrap_prev = std::move(extrap);
        have_extrap = true;
        d_prev = dn;
    }
    res.value = std::move(extrap_prev);  // best available estimate
    return res;
}

}  // namespace detail

/// Limit of Riemann-type sums sum Xi(t_i, t_{i+1}) over refining partitions of
/// [s,t].  The caller asserts that Xi is almost additive with defect exponent
/// theta > 1; refinements then converge geometrically, the tail is
/// extrapolated away, and we stop once successive estimates agree within tol
/// (else the depth budget runs out, reported via `converged`).
template <class V>
SewingResult<V> sewing_limit(const std::function<V(double, double)>& xi, double s, double t,
                             double theta, double tol = 1e-8, int max_depth = 14,
                             Refinement refinement = Refinement::dyadic) {
    if (!(theta > 1.0))
        throw std::invalid_argument("sewing_limit: defect exponent must exceed 1");
    if (!(s <= t)) throw std::invalid_argument("sewing_limit: need s <= t");

    if (s == t) return {xi(s, t), 0.0, 0, true};
    const long factor = refinement == Refinement::dyadic ? 2 : 3;
    return detail::refine_limit<V>(
        [&](long pieces) {
            const double h = (t - s) / static_cast<double>(pieces);
            V acc = xi(s, pieces == 1 ? t : s + h);
            for (long i = 1; i < pieces; ++i) {
                const double a = s + h * static_cast<double>(i);
                const double b = (i + 1 == pieces) ? t : s + h * static_cast<double>(i + 1);
                acc += xi(a, b);
            }
            return acc;
        },
        factor, tol, max_depth);
}

// ---------------------------------------------------------------------------
// Lyons extension and completion of almost rough paths
// ---------------------------------------------------------------------------

/// Evaluator of a rough path extended above floor(p): levels <= floor(p) are
/// copied, higher levels emerge as the limit of partition-wise concatenation
/// products of the zero-padded input.
struct ExtendedPath {
    int level = 0;
    std::function<Tensor(double, double)> eval;
};

namespace detail {

/// Limit of partition-wise concatenation products of two-parameter tensors.
template <class Piece>
Tensor product_limit(Piece&& piece, double s, double t, int d, int level, double tol,
                     int max_depth, const char* what) {
    if (s == t) return Tensor::unit(d, level);
    auto res = refine_limit<Tensor>(
        [&](long pieces) {
            if (pieces == 1) return piece(s, t);
            const double h = (t - s) / static_cast<double>(pieces);
            Tensor acc = Tensor::unit(d, level);
            for (long i = 0; i < pieces; ++i) {
                const double a = s + h * static_cast<double>(i);
                const double b = (i + 1 == pieces) ? t : s + h * static_cast<double>(i + 1);
                acc = tensor::concat_mul(acc, piece(a, b));
            }
            return acc;
        },
        2, tol, max_depth);
    if (!res.converged)
        throw std::runtime_error(std::string(what) + ": no convergence within depth budget (last increment " +
                                 std::to_string(res.last_increment) + ")");
    return res.value;
}

}  // namespace detail

inline ExtendedPath lyons_extend(const RoughPath& X, int M, double tol = 1e-8,
                                 int max_depth = 14) {
    if (M <= X.level())
        throw std::invalid_argument("lyons_extend: target level must exceed floor(p)");

    ExtendedPath ext;
    ext.level = M;
    ext.eval = [X, M, tol, max_depth](double s, double t) {
        return detail::product_limit([&X, M](double a, double b) { return X.eval(a, b).with_cap(M); },
                                     s, t, X.dim(), M, tol, max_depth, "lyons_extend");
    };
    return ext;
}

/// Completion of an almost rough path into a genuine one: the evaluator
/// becomes the limit of partition products (optionally geometrized pointwise
/// first, which forces the shuffle identity before multiplying).  Defects of
/// order omega^theta, theta = (floor(p)+1)/p > 1, vanish in the limit, and
/// products of group-like factors stay group-like.
inline RoughPath complete_almost(const AlmostRoughPath& raw, bool geometrize_first = false,
                                 double tol = 1e-8, int max_depth = 14,
                                 std::optional<double> theta_opt = std::nullopt) {
    const int lvl = raw.level();
    const double theta = theta_opt.value_or((lvl + 1) / raw.p);
    if (!(theta > 1.0))
        throw std::invalid_argument("complete_almost: defect exponent must exceed 1");
    if (!raw.eval) throw std::invalid_argument("complete_almost: missing evaluator");

    auto base = raw.eval;
    auto piece = [base, geometrize_first](double a, double b) {
        Tensor v = base(a, b);
        return geometrize_first ? tensor::geometrize(v) : v;
    };

    auto eval = [piece, raw, tol, max_depth, lvl](double s, double t) {
        return detail::product_limit(piece, s, t, raw.d, lvl, tol, max_depth, "complete_almost");
    };

    return RoughPath(raw.p, raw.d, raw.t0, raw.T, raw.control, eval, raw.trace);
}

}  // namespace rough::path
