// SPDX-License-Identifier: MIT
#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "rough/oracle.hpp"
#include "rough/roughpath.hpp"

using namespace rough::path;
using rough::tensor::concat_mul;
using rough::words::Word;

namespace {

std::vector<double> uniform_grid(double a, double b, int n) {
    std::vector<double> g;
    for (int i = 0; i <= n; ++i) g.push_back(a + (b - a) * i / n);
    return g;
}

RoughPath parabola_sig(int points, int level, double p = -1.0) {
    std::vector<double> times;
    std::vector<std::vector<double>> vals;
    for (int i = 0; i < points; ++i) {
        const double t = static_cast<double>(i) / (points - 1);
        times.push_back(t);
        vals.push_back({t, t * t});
    }
    return pwl_signature(times, vals, level, p);
}

}  // namespace

TEST_CASE("control functions", "[roughpath]") {
    const Control om = Control::linear(2.0);
    CHECK(om(0.25, 0.75) == Catch::Approx(1.0));
    CHECK_THROWS_AS(om(0.5, 0.25), std::invalid_argument);

    const auto grid = uniform_grid(0.0, 1.0, 8);
    CHECK(control_superadditivity_defect(om, grid) <= 1e-15);
    // (t-s)^2 is superadditive, sqrt(t-s) is not
    CHECK(control_superadditivity_defect(
              Control([](double s, double t) { return (t - s) * (t - s); }), grid) <= 1e-15);
    CHECK(control_superadditivity_defect(
              Control([](double s, double t) { return std::sqrt(t - s); }), grid) > 0.1);
}

TEST_CASE("polyline signature basics", "[roughpath]") {
    // constant path: identity functional
    const RoughPath c = pwl_signature({0.0, 0.5, 1.0}, {{1.0, 2.0}, {1.0, 2.0}, {1.0, 2.0}}, 2);
    CHECK(c.eval(0.1, 0.9).max_abs_level(1) == 0.0);
    CHECK(c.eval(0.1, 0.9).coeff(Word{}) == 1.0);

    // single segment: exponential of the partial increment
    const RoughPath seg = pwl_signature({0.0, 1.0}, {{0.0, 0.0}, {2.0, -1.0}}, 3);
    const Tensor full = seg.eval(0.0, 0.5);
    CHECK(full.coeff({1}) == Catch::Approx(1.0));
    CHECK(full.coeff({2}) == Catch::Approx(-0.5));
    CHECK(full.coeff({1, 1}) == Catch::Approx(0.5));
    CHECK(full.coeff({1, 2}) == Catch::Approx(-0.25));
    CHECK(full.coeff({1, 1, 2}) == Catch::Approx(1.0 * 1.0 * (-0.5) / 6.0));

    CHECK_THROWS_AS(pwl_signature({0.0, 0.0}, {{0.0}, {1.0}}, 2), std::invalid_argument);
    CHECK_THROWS_AS(pwl_signature({0.0, 1.0}, {{0.0}, {1.0}}, 2, 1.5), std::invalid_argument);
    CHECK_THROWS_AS(seg.eval(-0.1, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(seg.eval(0.7, 0.3), std::invalid_argument);
}

TEST_CASE("chen flow property is exact for polylines", "[roughpath]") {
    const RoughPath X = pwl_signature(
        {0.0, 0.2, 0.45, 0.7, 1.0},
        {{0.0, 1.0}, {0.3, 0.4}, {-0.2, 0.8}, {0.5, 0.5}, {1.0, -0.3}}, 3);
    const double triples[][3] = {{0.0, 0.3, 1.0}, {0.1, 0.45, 0.83}, {0.2, 0.2, 0.6}};
    for (const auto& tr : triples) {
        const Tensor lhs = concat_mul(X.eval(tr[0], tr[1]), X.eval(tr[1], tr[2]));
        CHECK((lhs - X.eval(tr[0], tr[2])).max_abs() < 1e-14);
    }
    // trace interpolates the samples
    CHECK(X.trace(0.2)[0] == Catch::Approx(0.3));
    CHECK(X.trace(0.575)[1] == Catch::Approx(0.65));
}

TEST_CASE("parabola signature approaches closed forms", "[roughpath]") {
    const RoughPath X = parabola_sig(1000, 3);
    const Tensor sig = X.eval(0.0, 1.0);
    CHECK(sig.coeff({1}) == Catch::Approx(1.0));
    CHECK(sig.coeff({2}) == Catch::Approx(1.0));
    CHECK(sig.coeff({1, 2}) == Catch::Approx(2.0 / 3.0).margin(2e-3));
    CHECK(sig.coeff({2, 1}) == Catch::Approx(1.0 / 3.0).margin(2e-3));

    // against the independent quadrature reference
    rough::oracle::SampledPath sp;
    for (int i = 0; i < 500; ++i) {
        const double t = i / 499.0;
        sp.times.push_back(t);
        sp.values.push_back({t, t * t});
    }
    CHECK(sig.coeff({2, 1, 1}) ==
          Catch::Approx(rough::oracle::riemann_iterated(sp, {2, 1, 1})).margin(5e-3));
}

TEST_CASE("axiom check on polyline signatures", "[roughpath]") {
    const RoughPath X = parabola_sig(60, 2);
    const auto rep = check_rough_axioms(X, uniform_grid(0.0, 1.0, 10));
    CHECK(rep.mult_defect < 1e-10);
    CHECK(rep.shuffle_defect < 1e-10);
    CHECK(rep.pass(1e-10));
    CHECK(rep.regularity_constant > 0.0);
    CHECK(std::isfinite(rep.regularity_max_ratio));

    CHECK(trace_symmetry_defect(X.eval(0.0, 1.0)) < 1e-14);
}

TEST_CASE("pure area path", "[roughpath]") {
    Tensor a(2, 2);
    a.coeff({1, 2}) = 1.0;
    a.coeff({2, 1}) = -1.0;
    const RoughPath X = pure_area_path(a, 2.5);

    const Tensor x = X.eval(0.25, 0.75);
    CHECK(x.max_abs_level(1) == 0.0);
    CHECK(x.coeff({1, 2}) == Catch::Approx(0.5));

    const auto rep = check_rough_axioms(X, uniform_grid(0.0, 1.0, 8));
    CHECK(rep.mult_defect < 1e-15);
    CHECK(rep.shuffle_defect < 1e-15);
    CHECK(trace_symmetry_defect(x) < 1e-15);

    Tensor sym(2, 2);
    sym.coeff({1, 2}) = 1.0;
    sym.coeff({2, 1}) = 1.0;
    CHECK_THROWS_AS(pure_area_path(sym, 2.5), std::invalid_argument);
    CHECK_THROWS_AS(pure_area_path(a, 3.5), std::invalid_argument);

    // zero tensor: trivial path, still valid
    const RoughPath Z = pure_area_path(Tensor(2, 2), 2.5);
    CHECK(Z.eval(0.0, 1.0).max_abs_level(2) == 0.0);
}

TEST_CASE("a level-2-killed functional fails the shuffle identity", "[roughpath]") {
    // keep the trace of a genuine signature but zero out level 2: the
    // symmetric part should have been half the square of the trace
    const RoughPath base = parabola_sig(50, 2);
    auto eval = [base](double s, double t) {
        Tensor x = base.eval(s, t);
        for (auto& c : x.level(2)) c = 0.0;
        return x;
    };
    const RoughPath broken(2.0, 2, 0.0, 1.0, base.control(), eval, nullptr);
    const auto rep = check_rough_axioms(broken, uniform_grid(0.0, 1.0, 6));
    CHECK(rep.shuffle_defect > 0.1);
}

TEST_CASE("sewing limit", "[roughpath]") {
    // exactly additive input: value survives unchanged
    const std::function<double(double, double)> additive = [](double s, double t) {
        return std::sin(t) - std::sin(s);
    };
    const auto exact = sewing_limit<double>(additive, 0.0, 1.0, 2.0);
    CHECK(exact.converged);
    CHECK(exact.value == Catch::Approx(std::sin(1.0)).epsilon(1e-12));

    // left-point Young sums of  u d(u^2): limit 2/3, defect exponent 2
    const std::function<double(double, double)> young = [](double s, double t) {
        return s * (t * t - s * s);
    };
    const auto dyadic = sewing_limit<double>(young, 0.0, 1.0, 2.0, 1e-5, 20);
    CHECK(dyadic.converged);
    CHECK(dyadic.value == Catch::Approx(2.0 / 3.0).margin(1e-4));

    const auto ternary =
        sewing_limit<double>(young, 0.0, 1.0, 2.0, 1e-5, 14, Refinement::uniform_ternary);
    CHECK(std::abs(ternary.value - dyadic.value) < 10 * 1e-4);

    CHECK_THROWS_AS(sewing_limit<double>(young, 0.0, 1.0, 0.9), std::invalid_argument);
}

TEST_CASE("lyons extension", "[roughpath]") {
    // level-2 signature extended to level 3 matches the direct construction
    const RoughPath X2 = parabola_sig(40, 2);
    const RoughPath X3 = parabola_sig(40, 3);
    const ExtendedPath ext = lyons_extend(X2, 3);
    CHECK(ext.level == 3);
    for (const auto& [s, t] : std::vector<std::pair<double, double>>{{0.0, 1.0}, {0.2, 0.7}}) {
        const Tensor diff = ext.eval(s, t) - X3.eval(s, t);
        CHECK(diff.max_abs() < 1e-8);
        // restriction to low levels is untouched
        CHECK((ext.eval(s, t).with_cap(2) - X2.eval(s, t)).max_abs() < 1e-12);
    }

    // pure-area extension stays multiplicative at level 3
    Tensor a(2, 2);
    a.coeff({1, 2}) = 0.7;
    a.coeff({2, 1}) = -0.7;
    const ExtendedPath ext_area = lyons_extend(pure_area_path(a, 2.5), 3);
    const Tensor glued = concat_mul(ext_area.eval(0.0, 0.5), ext_area.eval(0.5, 1.0));
    CHECK((glued - ext_area.eval(0.0, 1.0)).max_abs() < 1e-10);

    // single straight segment at p in (1,2): level 2 is half the squared trace
    const RoughPath line = pwl_signature({0.0, 1.0}, {{0.0, 0.0}, {1.0, 2.0}}, 1, 1.5);
    const Tensor two = lyons_extend(line, 2).eval(0.0, 1.0);
    CHECK(two.coeff({1, 1}) == Catch::Approx(0.5).margin(1e-9));
    CHECK(two.coeff({1, 2}) == Catch::Approx(1.0).margin(1e-9));
    CHECK(two.coeff({2, 2}) == Catch::Approx(2.0).margin(1e-9));

    CHECK_THROWS_AS(lyons_extend(X2, 2), std::invalid_argument);
}

TEST_CASE("completion of almost rough paths", "[roughpath]") {
    const RoughPath X = parabola_sig(80, 2);

    // a genuine rough path passes through unchanged
    const RoughPath same = complete_almost(X.as_almost());
    CHECK((same.eval(0.1, 0.9) - X.eval(0.1, 0.9)).max_abs() < 1e-12);

    // inject a defect of size eps * omega^{3/2} at level 2 and repair it
    const double eps = 1e-4;
    AlmostRoughPath noisy = X.as_almost();
    auto base = X;
    noisy.eval = [base, eps](double s, double t) {
        Tensor x = base.eval(s, t);
        const double w = std::pow(t - s, 1.5);
        x.coeff({1, 2}) += eps * w * (1.0 + std::sin(3.0 * s + 5.0 * t));
        x.coeff({2, 2}) -= eps * w * std::cos(2.0 * t);
        return x;
    };
    const RoughPath repaired = complete_almost(noisy, /*geometrize_first=*/false, 1e-7, 14);
    CHECK((repaired.eval(0.0, 1.0) - X.eval(0.0, 1.0)).max_abs() < 5e-6);
    CHECK((repaired.eval(0.3, 0.8) - X.eval(0.3, 0.8)).max_abs() < 5e-6);

    // geometrized completion also lands on the exact signature
    const RoughPath repaired2 = complete_almost(noisy, /*geometrize_first=*/true, 1e-7, 14);
    CHECK((repaired2.eval(0.0, 1.0) - X.eval(0.0, 1.0)).max_abs() < 5e-6);

    CHECK_THROWS_AS(complete_almost(noisy, false, 1e-9, 14, 0.99), std::invalid_argument);
}
