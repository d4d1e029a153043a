// SPDX-License-Identifier: MIT
//
// Truncated multivariate Taylor arithmetic.
//
// A Jet stores the Taylor coefficients (not the raw partials) of a smooth
// function at a base point, truncated at a total degree.  Arithmetic on jets
// propagates derivatives exactly (up to floating point), so closed-form maps
// written as lambdas over jets yield machine-accurate mixed partials at any
// base point -- no finite differencing.  The order we need downstream is
// small (<= 4), so sparse maps over multi-indices are plenty fast.

#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace rough::taylor {

/// Exponent vector: alpha[i] = power of variable i (0-based).
using MultiIndex = std::vector<int>;

inline long factorial(int n) {
    long f = 1;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
}

class Jet {
public:
    Jet(int vars, int order) : vars_(vars), order_(order) {
        if (vars < 1) throw std::invalid_argument("Jet: need at least one variable");
        if (order < 0) throw std::invalid_argument("Jet: order must be >= 0");
    }

    static Jet constant(int vars, int order, double v) {
        Jet j(vars, order);
        if (v != 0.0) j.c_[MultiIndex(static_cast<std::size_t>(vars), 0)] = v;
        return j;
    }

    /// The coordinate function x_i expanded at base: base + (x_i - base).
    static Jet variable(int vars, int order, int i, double base) {
        if (i < 0 || i >= vars) throw std::invalid_argument("Jet::variable: index out of range");
        Jet j = constant(vars, order, base);
        if (order >= 1) {
            MultiIndex e(static_cast<std::size_t>(vars), 0);
            e[static_cast<std::size_t>(i)] = 1;
            j.c_[e] = 1.0;
        }
        return j;
    }

    int vars() const { return vars_; }
    int order() const { return order_; }

    double value() const {
        auto it = c_.find(MultiIndex(static_cast<std::size_t>(vars_), 0));
        return it == c_.end() ? 0.0 : it->second;
    }

    double coeff(const MultiIndex& alpha) const {
        auto it = c_.find(alpha);
        return it == c_.end() ? 0.0 : it->second;
    }

    /// Mixed partial d_{letters} f at the base point; letters are 1-based
    /// variable indices, repetitions allowed (order of letters is immaterial).
    double partial(const std::vector<int>& letters) const {
        MultiIndex alpha(static_cast<std::size_t>(vars_), 0);
        for (int l : letters) {
            if (l < 1 || l > vars_) throw std::invalid_argument("Jet::partial: letter out of range");
            ++alpha[static_cast<std::size_t>(l - 1)];
        }
        if (static_cast<int>(letters.size()) > order_)
            throw std::invalid_argument("Jet::partial: derivative order exceeds jet order");
        long bang = 1;
        for (int a : alpha) bang *= factorial(a);
        return static_cast<double>(bang) * coeff(alpha);
    }

    Jet& operator+=(const Jet& o) {
        check(o);
        for (const auto& [a, v] : o.c_) add(a, v);
        return *this;
    }
    Jet& operator-=(const Jet& o) {
        check(o);
        for (const auto& [a, v] : o.c_) add(a, -v);
        return *this;
    }
    Jet& operator*=(double s) {
        for (auto& [a, v] : c_) v *= s;
        return *this;
    }

    friend Jet operator+(Jet a, const Jet& b) { return a += b; }
    friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
    friend Jet operator*(Jet a, double s) { return a *= s; }
    friend Jet operator*(double s, Jet a) { return a *= s; }
    friend Jet operator+(Jet a, double s) { return a += constant(a.vars_, a.order_, s); }
    friend Jet operator+(double s, Jet a) { return a += constant(a.vars_, a.order_, s); }
    friend Jet operator-(Jet a, double s) { return a -= constant(a.vars_, a.order_, s); }
    friend Jet operator-(double s, const Jet& a) { return constant(a.vars_, a.order_, s) - a; }
    friend Jet operator-(Jet a) { return a *= -1.0; }

    /// Jet of the partial derivative d_i f (coefficient shift); the order
    /// drops by one, so differentiating an order-0 jet is an error.
    friend Jet derivative(const Jet& a, int i) {
        if (i < 1 || i > a.vars_)
            throw std::invalid_argument("derivative: variable index out of range");
        if (a.order_ < 1)
            throw std::invalid_argument("derivative: jet order exhausted");
        Jet out(a.vars_, a.order_ - 1);
        for (const auto& [alpha, v] : a.c_) {
            const int ai = alpha[static_cast<std::size_t>(i - 1)];
            if (ai == 0) continue;
            MultiIndex beta = alpha;
            --beta[static_cast<std::size_t>(i - 1)];
            out.c_[beta] = v * static_cast<double>(ai);
        }
        return out;
    }

    friend Jet operator*(const Jet& a, const Jet& b) {
        a.check(b);
        Jet out(a.vars_, a.order_);
        for (const auto& [al, va] : a.c_) {
            const int da = degree(al);
            for (const auto& [be, vb] : b.c_) {
                if (da + degree(be) > a.order_) continue;
                MultiIndex g(al);
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += be[i];
                out.add(g, va * vb);
            }
        }
        return out;
    }

    friend Jet operator/(const Jet& a, const Jet& b) { return a * recip(b); }
    friend Jet operator/(Jet a, double s) { return a *= 1.0 / s; }
    friend Jet operator/(double s, const Jet& b) { return recip(b) * s; }

    /// g(f) for univariate g given by its Taylor coefficients at f's value:
    /// series[k] = g^{(k)}(f0) / k!.  Horner in h = f - f0.
    static Jet compose_univariate(const Jet& f, const std::vector<double>& series) {
        Jet h = f;
        h.add(MultiIndex(static_cast<std::size_t>(f.vars_), 0), -f.value());
        Jet r = constant(f.vars_, f.order_, series.empty() ? 0.0 : series.back());
        for (int k = static_cast<int>(series.size()) - 2; k >= 0; --k)
            r = r * h + constant(f.vars_, f.order_, series[static_cast<std::size_t>(k)]);
        return r;
    }

    friend Jet recip(const Jet& f) {
        const double u = f.value();
        if (u == 0.0) throw std::domain_error("Jet recip: zero base value");
        std::vector<double> s(static_cast<std::size_t>(f.order_) + 1);
        double p = 1.0 / u;
        for (int k = 0; k <= f.order_; ++k) {
            s[static_cast<std::size_t>(k)] = (k % 2 ? -p : p);
            p /= u;
        }
        return compose_univariate(f, s);
    }

    friend Jet sqrt(const Jet& f) {
        const double u = f.value();
        if (u <= 0.0) throw std::domain_error("Jet sqrt: non-positive base value");
        // series[k] = binom(1/2, k) u^{1/2-k}
        std::vector<double> s(static_cast<std::size_t>(f.order_) + 1);
        double binom = 1.0, pw = std::sqrt(u);
        for (int k = 0; k <= f.order_; ++k) {
            s[static_cast<std::size_t>(k)] = binom * pw;
            binom *= (0.5 - k) / (k + 1);
            pw /= u;
        }
        return compose_univariate(f, s);
    }

    friend Jet exp(const Jet& f) {
        std::vector<double> s(static_cast<std::size_t>(f.order_) + 1);
        const double e = std::exp(f.value());
        for (int k = 0; k <= f.order_; ++k)
            s[static_cast<std::size_t>(k)] = e / static_cast<double>(factorial(k));
        return compose_univariate(f, s);
    }

    friend Jet log(const Jet& f) {
        const double u = f.value();
        if (u <= 0.0) throw std::domain_error("Jet log: non-positive base value");
        std::vector<double> s(static_cast<std::size_t>(f.order_) + 1);
        s[0] = std::log(u);
        double p = 1.0 / u;
        for (int k = 1; k <= f.order_; ++k) {
            s[static_cast<std::size_t>(k)] = (k % 2 ? p : -p) / k;
            p /= u;
        }
        return compose_univariate(f, s);
    }

    friend Jet sin(const Jet& f) {
        std::vector<double> s(static_cast<std::size_t>(f.order_) + 1);
        const double sv = std::sin(f.value()), cv = std::cos(f.value());
        const double cyc[4] = {sv, cv, -sv, -cv};
        for (int k = 0; k <= f.order_; ++k)
            s[static_cast<std::size_t>(k)] = cyc[k % 4] / static_cast<double>(factorial(k));
        return compose_univariate(f, s);
    }

    friend Jet cos(const Jet& f) {
        std::vector<double> s(static_cast<std::size_t>(f.order_) + 1);
        const double sv = std::sin(f.value()), cv = std::cos(f.value());
        const double cyc[4] = {cv, -sv, -cv, sv};
        for (int k = 0; k <= f.order_; ++k)
            s[static_cast<std::size_t>(k)] = cyc[k % 4] / static_cast<double>(factorial(k));
        return compose_univariate(f, s);
    }

    friend Jet atan(const Jet& f) {
        // d^k atan(x) = (k-1)! cos^k(y) sin(k (y + pi/2)) with y = atan(x)
        std::vector<double> s(static_cast<std::size_t>(f.order_) + 1);
        const double y = std::atan(f.value());
        const double c = std::cos(y);
        const double half_pi = std::acos(0.0);
        s[0] = y;
        double cn = 1.0;
        for (int k = 1; k <= f.order_; ++k) {
            cn *= c;
            s[static_cast<std::size_t>(k)] =
                cn * std::sin(static_cast<double>(k) * (y + half_pi)) / static_cast<double>(k);
        }
        return compose_univariate(f, s);
    }

    friend Jet pow(const Jet& f, int n) {
        if (n < 0) return recip(pow(f, -n));
        Jet r = constant(f.vars_, f.order_, 1.0);
        for (int i = 0; i < n; ++i) r = r * f;
        return r;
    }

private:
    static int degree(const MultiIndex& a) {
        int s = 0;
        for (int x : a) s += x;
        return s;
    }

    void check(const Jet& o) const {
        if (vars_ != o.vars_ || order_ != o.order_)
            throw std::invalid_argument("Jet: mixing jets of different shape");
    }

    void add(const MultiIndex& a, double v) {
        if (v == 0.0) return;
        if (degree(a) > order_) return;
        auto [it, inserted] = c_.emplace(a, v);
        if (!inserted) {
            it->second += v;
            if (it->second == 0.0) c_.erase(it);
        }
    }

    int vars_;
    int order_;
    std::map<MultiIndex, double> c_;
};

/// A smooth map R^v -> R^c written as jet arithmetic: feed coordinate jets in,
/// read component jets out.
using JetMap = std::function<std::vector<Jet>(const std::vector<Jet>&)>;

/// Expand `f` at base point x to the given order: one jet per component.
inline std::vector<Jet> expand(const JetMap& f, const std::vector<double>& x, int order) {
    std::vector<Jet> coords;
    const int vars = static_cast<int>(x.size());
    coords.reserve(x.size());
    for (int i = 0; i < vars; ++i) coords.push_back(Jet::variable(vars, order, i, x[static_cast<std::size_t>(i)]));
    return f(coords);
}

/// Evaluate the plain value of `f` at x.
inline std::vector<double> value(const JetMap& f, const std::vector<double>& x) {
    std::vector<double> out;
    for (const Jet& j : expand(f, x, 0)) out.push_back(j.value());
    return out;
}

}  // namespace rough::taylor
