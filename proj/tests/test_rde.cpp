// SPDX-License-Identifier: MIT
#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "rough/controlled.hpp"
#include "rough/rde.hpp"
#include "rough/roughpath.hpp"
#include "rough/taylor.hpp"
#include "rough/words.hpp"

using namespace rough::rde;
using rough::controlled::check_controlled;
using rough::controlled::controlled_integral;
using rough::controlled::ControlledJet;
using rough::controlled::ControlledPath;
using rough::controlled::JetFunction;
using rough::controlled::pushforward_controlled;
using rough::controlled::reshape;
using rough::path::pwl_signature;
using rough::path::RoughPath;
using rough::words::Word;

namespace {

std::vector<double> uniform_times(int points, double horizon = 1.0) {
    std::vector<double> t(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i)
        t[static_cast<std::size_t>(i)] = horizon * static_cast<double>(i) / (points - 1);
    return t;
}

/// Scalar polyline x(t) = t over [0, horizon].
RoughPath line_driver(int points, int level, double p, double horizon = 1.0) {
    const std::vector<double> times = uniform_times(points, horizon);
    std::vector<std::vector<double>> pts;
    pts.reserve(times.size());
    for (double t : times) pts.push_back({t});
    return pwl_signature(times, pts, level, p);
}

/// Polyline through samples of (t, t^2).
RoughPath parabola_driver(int points, int level, double p) {
    const std::vector<double> times = uniform_times(points);
    std::vector<std::vector<double>> pts;
    pts.reserve(times.size());
    for (double t : times) pts.push_back({t, t * t});
    return pwl_signature(times, pts, level, p);
}

/// Scalar field F(y) = y, so dY = Y dX.
VectorFieldJet scalar_identity_field() { return VectorFieldJet::linear({{{1.0}}}); }

/// Independent evaluation of F_gamma g(y) by jet arithmetic alone: expand g
/// at y, then repeatedly differentiate the jet coefficients and contract with
/// the field's own jets.  No word combinatorics are involved, so agreement
/// with iterated_field is a genuine cross-check.
std::vector<double> iterated_field_via_jets(const VectorFieldJet& f, const JetFunction& g,
                                            const Word& gamma, const std::vector<double>& y) {
    using rough::taylor::Jet;
    const int n = static_cast<int>(gamma.size());
    const int e = f.state_dim();
    const int d = f.driver_dim();
    std::vector<Jet> h = rough::taylor::expand(g.jet_map(), y, n);
    for (int i = n - 1; i >= 0; --i) {
        const std::vector<Jet> fj = rough::taylor::expand(f.function().jet_map(), y, i);
        std::vector<Jet> next;
        next.reserve(h.size());
        for (const Jet& hc : h) {
            Jet acc = Jet::constant(static_cast<int>(y.size()), i, 0.0);
            for (int k = 1; k <= e; ++k)
                acc += derivative(hc, k) *
                       fj[static_cast<std::size_t>(
                           rough::controlled::flat_index(k, gamma[static_cast<std::size_t>(i)], d) -
                           1)];
            next.push_back(std::move(acc));
        }
        h = std::move(next);
    }
    std::vector<double> out;
    out.reserve(h.size());
    for (const Jet& j : h) out.push_back(j.value());
    return out;
}

double sup_diff(const std::vector<double>& a, const std::vector<double>& b) {
    REQUIRE(a.size() == b.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
}

}  // namespace

TEST_CASE("vector field builders expose exact tables") {
    SECTION("constant fields") {
        const auto f = VectorFieldJet::constant({{1.5, -0.5}, {2.0, 0.25}});
        CHECK(f.state_dim() == 2);
        CHECK(f.driver_dim() == 2);
        const ControlledJet t = f.table({3.0, -1.0}, 1);
        CHECK(t.coeff(Word{}, flat_index(1, 1, 2)) == 1.5);
        CHECK(t.coeff(Word{}, flat_index(1, 2, 2)) == -0.5);
        CHECK(t.coeff(Word{}, flat_index(2, 1, 2)) == 2.0);
        CHECK(t.coeff(Word{}, flat_index(2, 2, 2)) == 0.25);
        for (int k = 1; k <= 4; ++k) CHECK(t.coeff(Word{1}, k) == 0.0);
    }

    SECTION("linear fields") {
        // One letter, F(y) = A y with A the swap matrix.
        const auto f = VectorFieldJet::linear({{{0.0, 1.0}, {1.0, 0.0}}});
        const ControlledJet t = f.table({2.0, 3.0}, 1);
        CHECK(t.coeff(Word{}, flat_index(1, 1, 1)) == 3.0);
        CHECK(t.coeff(Word{}, flat_index(2, 1, 1)) == 2.0);
        CHECK(t.coeff(Word{2}, flat_index(1, 1, 1)) == 1.0);
        CHECK(t.coeff(Word{1}, flat_index(1, 1, 1)) == 0.0);
        CHECK(t.coeff(Word{1}, flat_index(2, 1, 1)) == 1.0);
    }

    SECTION("shape misuse is rejected") {
        CHECK_THROWS_AS(VectorFieldJet(JetFunction::identity(3), 2), std::invalid_argument);
        CHECK_THROWS_AS(VectorFieldJet::linear({{{1.0, 0.0}}}), std::invalid_argument);
        const auto fd = JetFunction::finite_difference(
            [](const std::vector<double>& y) { return std::vector<double>{y[0]}; }, 1, 1, 2);
        CHECK_THROWS_AS(
            VectorFieldJet::transported(JetFunction::identity(1), JetFunction::identity(1),
                                        VectorFieldJet(fd, 1)),
            std::invalid_argument);
    }
}

TEST_CASE("iterated fields match closed forms and independent jet arithmetic") {
    SECTION("scalar dY = Y dX reproduces y for every word") {
        const auto f = scalar_identity_field();
        const auto id = JetFunction::identity(1);
        const std::vector<double> y{0.7};
        for (const Word& w : {Word{1}, Word{1, 1}, Word{1, 1, 1}}) {
            const auto v = iterated_field(f, id, w, y);
            REQUIRE(v.size() == 1);
            CHECK(std::abs(v[0] - 0.7) < 1e-14);
        }
        // g(y) = y^2 doubles a factor of y per application: 2y^2, 4y^2, 8y^2.
        const auto square = JetFunction::polynomial(1, 1, {{{1.0, {2}}}});
        CHECK(std::abs(iterated_field(f, square, Word{1}, y)[0] - 0.98) < 1e-14);
        CHECK(std::abs(iterated_field(f, square, Word{1, 1}, y)[0] - 1.96) < 1e-14);
        CHECK(std::abs(iterated_field(f, square, Word{1, 1, 1}, y)[0] - 3.92) < 1e-14);
    }

    SECTION("polynomial fields agree with the jet-arithmetic route") {
        // F: R^2 -> L(R^2, R^2) with genuinely mixed entries.
        const auto f = VectorFieldJet(
            JetFunction::polynomial(2, 4,
                                    {{{1.0, {1, 1}}},                  // F^{1,1} = y1 y2
                                     {{1.0, {0, 2}}},                  // F^{1,2} = y2^2
                                     {{1.0, {1, 0}}, {1.0, {0, 1}}},   // F^{2,1} = y1 + y2
                                     {{1.0, {0, 0}}}}),                // F^{2,2} = 1
            2);
        const auto g = JetFunction::polynomial(2, 2,
                                               {{{1.0, {2, 1}}},       // g^1 = y1^2 y2
                                                {{1.0, {0, 1}}}});     // g^2 = y2
        const std::vector<double> y{0.8, -0.6};
        for (int len = 1; len <= 3; ++len) {
            const std::size_t count = rough::tensor::level_size(2, len);
            for (std::size_t r = 0; r < count; ++r) {
                const Word w = rough::tensor::word_unrank(r, len, 2);
                const auto direct = iterated_field(f, g, w, y);
                const auto viajets = iterated_field_via_jets(f, g, w, y);
                CHECK(sup_diff(direct, viajets) < 1e-12);
            }
        }
    }

    SECTION("words expand over ordered unshuffles of iterated unit fields") {
        const auto f = VectorFieldJet(
            JetFunction::polynomial(2, 4,
                                    {{{1.0, {1, 1}}},
                                     {{1.0, {0, 2}}},
                                     {{1.0, {1, 0}}, {1.0, {0, 1}}},
                                     {{1.0, {0, 0}}}}),
            2);
        const auto g = JetFunction::polynomial(2, 1, {{{1.0, {2, 1}}, {0.5, {0, 2}}}});
        const auto id = JetFunction::identity(2);
        const std::vector<double> y{0.4, 1.1};
        const int e = 2;
        for (int len = 1; len <= 3; ++len) {
            const std::size_t count = rough::tensor::level_size(2, len);
            for (std::size_t r = 0; r < count; ++r) {
                const Word w = rough::tensor::word_unrank(r, len, 2);
                const double direct = iterated_field(f, g, w, y)[0];
                double expanded = 0.0;
                for (int m = 1; m <= len; ++m) {
                    for (const auto& [tuple, mult] : rough::words::ordered_unshuffle(w, m)) {
                        const std::size_t combos = rough::tensor::level_size(e, m);
                        for (std::size_t kr = 0; kr < combos; ++kr) {
                            const Word kw = rough::tensor::word_unrank(kr, m, e);
                            double prod = static_cast<double>(mult) * g.partial(y, kw, 1);
                            for (std::size_t i = 0; i < tuple.size() && prod != 0.0; ++i)
                                prod *= iterated_field(f, id, tuple[i], y)
                                    [static_cast<std::size_t>(kw[i] - 1)];
                            expanded += prod;
                        }
                    }
                }
                CHECK(std::abs(direct - expanded) < 1e-12);
            }
        }
    }

    SECTION("misuse is rejected") {
        const auto f = scalar_identity_field();
        const auto id = JetFunction::identity(1);
        CHECK_THROWS_AS(iterated_field(f, id, Word{2}, {1.0}), std::invalid_argument);
        CHECK_THROWS_AS(iterated_field(f, id, Word{1}, {1.0, 2.0}), std::invalid_argument);
        CHECK_THROWS_AS(iterated_field(f, JetFunction::identity(2), Word{1}, {1.0}),
                        std::invalid_argument);
        // A finite-difference field of order 1 cannot support |gamma| = 3.
        const auto shallow = VectorFieldJet(
            JetFunction::finite_difference(
                [](const std::vector<double>& y) { return std::vector<double>{y[0]}; }, 1, 1, 1),
            1);
        CHECK_THROWS_AS(iterated_field(shallow, id, Word{1, 1, 1}, {1.0}),
                        std::invalid_argument);
    }
}

TEST_CASE("local Euler increments match closed forms") {
    SECTION("zero and constant fields") {
        const auto x = parabola_driver(33, 2, 2.5);
        const auto zero = VectorFieldJet::constant({{0.0, 0.0}, {0.0, 0.0}});
        CHECK(sup_diff(davie_step(zero, x, {1.0, 2.0}, 0.125, 0.875), {0.0, 0.0}) == 0.0);

        const auto a = VectorFieldJet::constant({{1.5, -0.5}, {2.0, 0.25}});
        const auto inc = davie_step(a, x, {1.0, 2.0}, 0.2, 0.7);
        // A times the level-1 increment (0.5, 0.45) of (t, t^2).
        CHECK(std::abs(inc[0] - 0.525) < 1e-12);
        CHECK(std::abs(inc[1] - 1.1125) < 1e-12);
    }

    SECTION("scalar dY = Y dX over a smooth line sums the truncated exponential") {
        const auto x = line_driver(33, 3, 3.5);
        const auto f = scalar_identity_field();
        const double y = 1.3, s = 0.25, t = 0.5, inc = t - s;
        const auto got = davie_step(f, x, {y}, s, t);
        const double want = y * (inc + inc * inc / 2.0 + inc * inc * inc / 6.0);
        CHECK(std::abs(got[0] - want) < 1e-13);
    }

    SECTION("expansions of observables track the flow to fourth order") {
        const auto x = line_driver(33, 3, 3.5);
        const auto f = scalar_identity_field();
        const auto square = JetFunction::polynomial(1, 1, {{{1.0, {2}}}});
        const double y = 0.9, s = 0.3, t = 0.42, inc = t - s;
        const auto got = davie_expansion(f, x, square, {y}, s, t);
        // g(Y_t) = y^2 exp(2 inc); the truncation error is (2 inc)^4/24 y^2.
        const double exact = y * y * std::exp(2.0 * inc);
        CHECK(std::abs(got[0] - exact) < 2e-4);
        CHECK(std::abs(got[0] - exact) > 1e-8);  // the truncation is visible
    }

    SECTION("observable remainders shrink at the almost-additivity order") {
        const auto x = line_driver(257, 2, 2.5);
        const auto f = scalar_identity_field();
        // Exact solution Y = exp(t): fit |g(Y_t) - expansion from Y_s| against
        // the step over dyadic strides; smooth data beats the rough-case bound.
        for (const auto& g :
             {JetFunction::identity(1), JetFunction::polynomial(1, 1, {{{1.0, {2}}}})}) {
            std::vector<std::pair<double, double>> pts;
            for (std::size_t i = 0; i + 1 < 257; i += 8)
                for (std::size_t stride = 1; i + stride < 257; stride *= 2) {
                    const double s = static_cast<double>(i) / 256.0;
                    const double t = static_cast<double>(i + stride) / 256.0;
                    const auto pred = davie_expansion(f, x, g, {std::exp(s)}, s, t);
                    const double truth = g.value({std::exp(t)})[0];
                    const double r = std::abs(truth - pred[0]);
                    if (r > 1e-14) pts.emplace_back(std::log(t - s), std::log(r));
                }
            REQUIRE(pts.size() >= 10);
            double sx = 0.0, sy = 0.0;
            for (const auto& [a, b] : pts) {
                sx += a;
                sy += b;
            }
            const double mx = sx / static_cast<double>(pts.size());
            const double my = sy / static_cast<double>(pts.size());
            double num = 0.0, den = 0.0;
            for (const auto& [a, b] : pts) {
                num += (a - mx) * (b - my);
                den += (a - mx) * (a - mx);
            }
            const double slope = num / den;
            CHECK(slope >= (std::floor(2.5) + 1.0) / 2.5 - 0.15);
            CHECK(slope > 2.5);  // smooth drivers give the full truncation order
        }
    }
}

TEST_CASE("the solver reproduces closed-form solutions") {
    SECTION("scalar exponential") {
        const auto x = line_driver(33, 2, 2.5);
        const auto sol = solve(scalar_identity_field(), x, {1.0});
        CHECK(sol.last_diff() < 1e-6);
        CHECK(sol.depth() <= 12);
        for (double t : {0.0, 0.3, 0.77, 1.0})
            CHECK(std::abs(sol.trace(t)[0] - std::exp(t)) < 2e-6);
        CHECK(sol.times().size() == sol.states().size());
    }

    SECTION("commuting matrices give a matrix exponential") {
        // dY = A1 Y dX^1 + A2 Y dX^2 with A1 the swap and A2 the identity,
        // driven by (t, t^2): Y_t = e^{t^2} (cosh t, sinh t) from y0 = (1, 0).
        const auto f = VectorFieldJet::linear(
            {{{0.0, 1.0}, {1.0, 0.0}}, {{1.0, 0.0}, {0.0, 1.0}}});
        const auto x = parabola_driver(65, 2, 2.5);
        const auto sol = solve(f, x, {1.0, 0.0});
        for (double t : {0.25, 0.5, 1.0}) {
            const auto y = sol.trace(t);
            const double scale = std::exp(t * t);
            CHECK(std::abs(y[0] - scale * std::cosh(t)) < 5e-6);
            CHECK(std::abs(y[1] - scale * std::sinh(t)) < 5e-6);
        }
    }

    SECTION("zero fields freeze the state") {
        const auto x = parabola_driver(17, 2, 2.5);
        const auto sol = solve(VectorFieldJet::constant({{0.0, 0.0}}), x, {4.0});
        CHECK(sol.depth() == 1);
        for (const auto& st : sol.states()) CHECK(st[0] == 4.0);
    }

    SECTION("an unreachable tolerance is reported") {
        const auto x = line_driver(33, 2, 2.5);
        CHECK_THROWS_AS(solve(scalar_identity_field(), x, {1.0}, 1e-15, 2),
                        std::runtime_error);
    }
}

TEST_CASE("explosions surface as structured errors") {
    const auto square_field = VectorFieldJet(JetFunction::polynomial(1, 1, {{{1.0, {2}}}}), 1);

    SECTION("dY = Y^2 dX blows up at the closed-form time") {
        const auto x = line_driver(65, 2, 2.5, 2.0);
        bool thrown = false;
        try {
            euler_path(square_field, x, {1.0}, 12);
        } catch (const ExplosionError& err) {
            thrown = true;
            CHECK(std::abs(err.time() - 1.0) < 0.05);  // 1/(1-t) leaves any compact set at 1
            CHECK(std::abs(err.state()[0]) > 1e6);
        }
        CHECK(thrown);
    }

    SECTION("solve propagates the explosion") {
        const auto x = line_driver(65, 2, 2.5, 2.0);
        bool thrown = false;
        try {
            solve(square_field, x, {1.0});
        } catch (const ExplosionError& err) {
            thrown = true;
            CHECK(err.time() > 0.9);
            CHECK(err.time() <= 2.0);
        }
        CHECK(thrown);
    }

    SECTION("custom guards trip early") {
        const auto x = line_driver(33, 2, 2.5);
        bool thrown = false;
        try {
            euler_path(scalar_identity_field(), x, {1.0}, 5, 2.0);
        } catch (const ExplosionError& err) {
            thrown = true;
            CHECK(err.time() > 0.5);  // exp(t) crosses 2 near log 2
            CHECK(err.time() < 0.9);
        }
        CHECK(thrown);
    }
}

TEST_CASE("solution jets form a controlled path") {
    SECTION("first-order jets carry the field at the trace") {
        const auto x = line_driver(257, 2, 2.5);
        const auto sol = solve(scalar_identity_field(), x, {1.0});
        const ControlledPath h = sol.controlled();
        CHECK(h.depth() == 1);
        for (double t : {0.1, 0.5, 0.9}) {
            const ControlledJet j = h.jet(t);
            CHECK(std::abs(j.coeff(Word{}, 1) - sol.trace(t)[0]) < 1e-12);
            CHECK(std::abs(j.coeff(Word{1}, 1) - sol.trace(t)[0]) < 1e-12);
        }
        CHECK(check_controlled(h, uniform_times(257)).pass());
    }

    SECTION("pushing the jet through the field shifts one word letter") {
        const auto f = VectorFieldJet::linear(
            {{{0.0, 1.0}, {1.0, 0.0}}, {{1.0, 0.0}, {0.0, -1.0}}});
        const auto x = parabola_driver(33, 3, 3.5);
        const auto sol = solve(f, x, {1.0, 0.5});
        const ControlledPath h = sol.controlled();
        const ControlledPath fh = pushforward_controlled(f.function(), h);
        for (double t : {0.25, 0.6}) {
            const ControlledJet jy = h.jet(t);
            const ControlledJet jf = fh.jet(t);
            for (int len = 0; len <= 1; ++len) {
                const std::size_t count = rough::tensor::level_size(2, len);
                for (std::size_t r = 0; r < count; ++r) {
                    const Word g = rough::tensor::word_unrank(r, len, 2);
                    for (int j = 1; j <= 2; ++j) {
                        Word gj = g;
                        gj.push_back(j);
                        for (int k = 1; k <= 2; ++k)
                            CHECK(std::abs(jf.coeff(g, flat_index(k, j, 2)) -
                                           jy.coeff(gj, k)) < 1e-10);
                    }
                }
            }
        }
    }

    SECTION("the same adjunction holds for observables") {
        const auto f = VectorFieldJet::linear(
            {{{0.0, 1.0}, {1.0, 0.0}}, {{1.0, 0.0}, {0.0, -1.0}}});
        const auto x = parabola_driver(33, 3, 3.5);
        const auto sol = solve(f, x, {1.0, 0.5});
        const ControlledPath h = sol.controlled();
        // One application of the field to g, bundled as a map into L(V, R).
        // Differentiating a jet costs one order, so g is expanded one order
        // above the request (read off the incoming identity jets).
        const auto g = JetFunction::polynomial(2, 1, {{{1.0, {2, 0}}, {1.0, {0, 2}}}});
        rough::taylor::JetMap fg_map = [gm = g.jet_map(), fm = f.function().jet_map()](
                                           const std::vector<rough::taylor::Jet>& z) {
            std::vector<double> base;
            base.reserve(z.size());
            for (const auto& zj : z) base.push_back(zj.value());
            const int ord = z[0].order();
            const auto gj = rough::taylor::expand(gm, base, ord + 1);
            const auto fj = rough::taylor::expand(fm, base, ord);
            std::vector<rough::taylor::Jet> out;
            for (int j = 1; j <= 2; ++j) {
                rough::taylor::Jet acc = derivative(gj[0], 1) *
                                         fj[static_cast<std::size_t>(flat_index(1, j, 2) - 1)];
                acc += derivative(gj[0], 2) *
                       fj[static_cast<std::size_t>(flat_index(2, j, 2) - 1)];
                out.push_back(std::move(acc));
            }
            return out;
        };
        const JetFunction fg(2, 2, 3, fg_map);
        const ControlledPath pushed = pushforward_controlled(fg, h);
        for (double t : {0.3, 0.8}) {
            const auto y = sol.trace(t);
            const ControlledJet jp = pushed.jet(t);
            for (int len = 0; len <= 1; ++len) {
                const std::size_t count = rough::tensor::level_size(2, len);
                for (std::size_t r = 0; r < count; ++r) {
                    Word w = rough::tensor::word_unrank(r, len, 2);
                    for (int j = 1; j <= 2; ++j) {
                        Word wj = w;
                        wj.push_back(j);
                        const double want = iterated_field(f, g, wj, y)[0];
                        CHECK(std::abs(jp.coeff(w, flat_index(1, j, 2)) - want) < 1e-10);
                    }
                }
            }
        }
    }
}

TEST_CASE("the solved jet satisfies its own integral equation") {
    const auto f = VectorFieldJet::linear(
        {{{0.0, 1.0}, {1.0, 0.0}}, {{1.0, 0.0}, {0.0, -1.0}}});
    const auto x = parabola_driver(65, 2, 2.5);
    const std::vector<double> y0{1.0, 0.5};
    const auto sol = solve(f, x, y0, 2e-7);
    const ControlledPath h = sol.controlled();
    const ControlledPath integrand = reshape(pushforward_controlled(f.function(), h), 2, 2);
    const ControlledPath integral = controlled_integral(integrand, 1e-8);
    for (double t : {0.2, 0.5, 0.85}) {
        const auto lhs = h.trace(t);
        const auto inc = integral.trace(t);
        for (int c = 0; c < 2; ++c)
            CHECK(std::abs(lhs[static_cast<std::size_t>(c)] - y0[static_cast<std::size_t>(c)] -
                           inc[static_cast<std::size_t>(c)]) < 1e-5);
        // Above level zero the two jets agree identically by the adjunction.
        const ControlledJet a = h.jet(t);
        const ControlledJet b = integral.jet(t);
        for (std::size_t i = 0; i < a.levels[1].size(); ++i)
            CHECK(std::abs(a.levels[1][i] - b.levels[1][i]) < 1e-12);
    }
}

TEST_CASE("doubling the state handles driven coefficients") {
    SECTION("dY = X dX integrates to the square") {
        // h(y, x) = x; stacked state is (x, y) with the driver copied first.
        const auto h = JetFunction::polynomial(2, 1, {{{1.0, {0, 1}}}});
        const auto g = doubled_system(h, 1);
        CHECK(g.state_dim() == 2);
        const auto x = line_driver(33, 2, 2.5);
        const auto sol = solve(g, x, {0.0, 0.0});
        // Every local increment integrates x dx exactly, so the partition
        // nodes carry the closed form to machine precision.
        for (std::size_t i = 0; i < sol.times().size(); ++i) {
            const double t = sol.times()[i];
            const auto& z = sol.states()[i];
            CHECK(std::abs(z[0] - t) < 1e-12);               // first block reproduces the driver
            CHECK(std::abs(z[1] - t * t / 2.0) < 1e-12);     // second integrates x dx
        }
    }

    SECTION("coefficients without driver dependence reduce to the plain system") {
        const auto h = JetFunction::polynomial(2, 1, {{{1.0, {1, 0}}}});  // h(y, x) = y
        const auto doubled = doubled_system(h, 1);
        const auto x = line_driver(33, 2, 2.5);
        const auto stacked = solve(doubled, x, {0.0, 1.0});
        const auto plain = solve(scalar_identity_field(), x, {1.0});
        REQUIRE(stacked.states().size() == plain.states().size());
        for (std::size_t i = 0; i < plain.states().size(); ++i)
            CHECK(std::abs(stacked.states()[i][1] - plain.states()[i][0]) < 1e-12);
    }

    SECTION("dimension mismatches are rejected") {
        CHECK_THROWS_AS(doubled_system(JetFunction::identity(3), 2), std::invalid_argument);
    }
}

TEST_CASE("transported equations match transported solutions") {
    SECTION("the identity transport is a fixed point") {
        const auto x = line_driver(33, 2, 2.5);
        const auto dg = JetFunction::polynomial(1, 1, {{{1.0, {0}}}});
        const auto report = verify_change_of_variable(scalar_identity_field(), x, {1.0},
                                                      JetFunction::identity(1),
                                                      JetFunction::identity(1), dg);
        CHECK(report.defect < 1e-6);
        CHECK(report.inverse_defect < 1e-12);
    }

    SECTION("the logarithm straightens dY = Y dX") {
        const auto x = line_driver(33, 2, 2.5);
        const JetFunction g(1, 1, 12, [](const std::vector<rough::taylor::Jet>& z) {
            return std::vector<rough::taylor::Jet>{log(z[0])};
        });
        const JetFunction ginv(1, 1, 12, [](const std::vector<rough::taylor::Jet>& z) {
            return std::vector<rough::taylor::Jet>{exp(z[0])};
        });
        const JetFunction dg(1, 1, 12, [](const std::vector<rough::taylor::Jet>& z) {
            return std::vector<rough::taylor::Jet>{1.0 / z[0]};
        });
        const auto report =
            verify_change_of_variable(scalar_identity_field(), x, {1.0}, g, ginv, dg);
        CHECK(report.defect < 2e-6);
        CHECK(report.inverse_defect < 1e-9);
    }

    SECTION("linear changes of coordinates conjugate the field") {
        const auto f = VectorFieldJet::linear(
            {{{0.0, 1.0}, {1.0, 0.0}}, {{0.5, 0.0}, {0.0, 0.5}}});
        const auto x = parabola_driver(33, 2, 2.5);
        const auto g = JetFunction::linear({{2.0, 1.0}, {1.0, 1.0}});
        const auto ginv = JetFunction::linear({{1.0, -1.0}, {-1.0, 2.0}});
        const auto dg = JetFunction::polynomial(
            2, 4,
            {{{2.0, {0, 0}}}, {{1.0, {0, 0}}}, {{1.0, {0, 0}}}, {{1.0, {0, 0}}}});
        const auto report = verify_change_of_variable(f, x, {1.0, 0.5}, g, ginv, dg);
        CHECK(report.defect < 1e-5);
        CHECK(report.inverse_defect < 1e-12);
    }

    SECTION("a missing inverse jet is an error") {
        const auto x = line_driver(17, 2, 2.5);
        CHECK_THROWS_AS(verify_change_of_variable(scalar_identity_field(), x, {1.0},
                                                  JetFunction::identity(1)),
                        std::invalid_argument);
    }
}

TEST_CASE("the Euler scheme converges at the smooth-driver rate") {
    const auto x = line_driver(33, 3, 3.5);
    const auto f = scalar_identity_field();
    std::vector<std::pair<double, double>> pts;
    for (int depth = 2; depth <= 6; ++depth) {
        const auto states = euler_path(f, x, {1.0}, depth);
        const double err = std::abs(states.back()[0] - std::exp(1.0));
        REQUIRE(err > 0.0);
        pts.emplace_back(std::log(std::pow(0.5, depth)), std::log(err));
    }
    double sx = 0.0, sy = 0.0;
    for (const auto& [a, b] : pts) {
        sx += a;
        sy += b;
    }
    const double mx = sx / static_cast<double>(pts.size());
    const double my = sy / static_cast<double>(pts.size());
    double num = 0.0, den = 0.0;
    for (const auto& [a, b] : pts) {
        num += (a - mx) * (b - my);
        den += (a - mx) * (a - mx);
    }
    const double slope = num / den;
    // The guaranteed exponent is barely positive, but smooth drivers realise
    // the full truncation order of the three-term step.
    CHECK(slope >= (std::floor(3.5) + 1.0) / 3.5 - 1.0 - 0.2);
    CHECK(slope > 2.5);
}
