// test_lowerlevel.cpp : the operations-side programs on hand-solvable
// fixtures, with grid-search cross-checks.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "droplan/lowerlevel.hpp"
#include "droplan/mechanism.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace droplan;

namespace {

TwoPointDistribution scarf_mechanism() {
    const auto m = testfix::newsvendor_moments();
    return build_two_point(m.mu, mechanism_from_ratios(1.0, 1.0, m.mu, m.sigma),
                           ScaleIndex{1.0, 1.0});
}

}  // namespace

TEST_CASE("dirac expectation problem on the newsvendor") {
    // buy exactly the mean: value 10 - 3*10 = -20
    const auto pd = testfix::newsvendor();
    const auto m = testfix::newsvendor_moments();
    const auto sol = solve_V0(pd, m, ScaleIndex{1.0, 1.0});
    REQUIRE(sol.status == SolveStatus::optimal);
    CHECK(sol.value == doctest::Approx(-20.0).epsilon(1e-6));
    CHECK(sol.x[0] == doctest::Approx(10.0).epsilon(1e-5));
    CHECK(sol.y_l[0] == doctest::Approx(10.0).epsilon(1e-5));
    CHECK_FALSE(sol.has_high);
}

TEST_CASE("dirac value scales linearly in k") {
    const auto pd = testfix::newsvendor();
    const auto m = testfix::newsvendor_moments();
    const double base = solve_V0(pd, m, ScaleIndex{1.0, 1.0}).value;
    for (double k : {2.0, 7.0, 31.0}) {
        const double scaled = solve_V0(pd, m, ScaleIndex{k, 1.3}).value;
        CHECK(testfix::close_rel(scaled, k * base, 1e-7));
    }
}

TEST_CASE("two-scenario expectation program on the newsvendor") {
    // atoms {0, 11}: buying 11 sells 11 with probability 10/11, so the
    // value is 11 - 3*10 = -19
    const auto pd = testfix::newsvendor();
    const auto sol =
        solve_lower_level(pd, scarf_mechanism(), RiskSpec::expectation(), ScaleIndex{1.0, 1.0});
    REQUIRE(sol.status == SolveStatus::optimal);
    CHECK(sol.value == doctest::Approx(-19.0).epsilon(1e-6));
    CHECK(sol.x[0] == doctest::Approx(11.0).epsilon(1e-4));
    CHECK(sol.has_high);
    CHECK(sol.y_l[0] == doctest::Approx(0.0).epsilon(1e-5));
    CHECK(sol.y_h[0] == doctest::Approx(11.0).epsilon(1e-4));
}

TEST_CASE("two-scenario cvar program on the newsvendor") {
    // x = 11 keeps losses {0, -33}; the worst half of the mass averages to
    // -27, so the total is 11 - 27 = -16
    const auto pd = testfix::newsvendor();
    const auto sol =
        solve_lower_level(pd, scarf_mechanism(), RiskSpec::cvar(0.5), ScaleIndex{1.0, 1.0});
    REQUIRE(sol.status == SolveStatus::optimal);
    CHECK(sol.value == doctest::Approx(-16.0).epsilon(1e-6));
}

TEST_CASE("two-scenario risk programs agree with a grid search over x") {
    const auto pd = testfix::newsvendor();
    const auto d2 = scarf_mechanism();
    const auto objective_for = [&](const RiskSpec& r) {
        return [&pd, &d2, r](double x) {
            // with one product the best recourse is y = min(x, d) per atom
            const std::vector<std::pair<double, double>> losses = {
                {-pd.p[0] * std::min(x, d2.d_l[0]), 1.0 - d2.tau},
                {-pd.p[0] * std::min(x, d2.d_h[0]), d2.tau}};
            double rho = 0.0;
            switch (r.kind) {
                case RiskSpec::Kind::expectation:
                    rho = losses[0].first * losses[0].second + losses[1].first * losses[1].second;
                    break;
                case RiskSpec::Kind::cvar:
                    rho = oracle::cvar(losses, r.beta);
                    break;
                default:
                    rho = oracle::mean_semideviation(losses, r.lambda, r.q);
            }
            return pd.c[0] * x + rho;
        };
    };
    for (const auto& r : {RiskSpec::expectation(), RiskSpec::cvar(0.5), RiskSpec::cvar(0.1),
                          RiskSpec::mean_semideviation(0.5), RiskSpec::mean_semideviation(1.0)}) {
        const auto sol = solve_lower_level(pd, d2, r, ScaleIndex{1.0, 1.0});
        REQUIRE(sol.status == SolveStatus::optimal);
        const auto [xg, vg] = oracle::grid_min(objective_for(r), 0.0, 30.0);
        CHECK(testfix::close_rel(sol.value, vg, 1e-4));
    }
}

TEST_CASE("dirac input reduces to the expectation problem") {
    const auto pd = testfix::newsvendor();
    const auto m = testfix::newsvendor_moments();
    TwoPointDistribution dirac;
    dirac.d_l = m.mu;
    dirac.d_h = m.mu;
    dirac.tau = 0.0;
    const auto a = solve_lower_level(pd, dirac, RiskSpec::cvar(0.5), ScaleIndex{1.0, 1.0});
    const auto b = solve_V0(pd, m, ScaleIndex{1.0, 1.0});
    REQUIRE(a.status == SolveStatus::optimal);
    CHECK(a.value == doctest::Approx(b.value).epsilon(1e-7));
    CHECK_FALSE(a.has_high);
}

TEST_CASE("tied allocations resolve to proportional rationing") {
    // two interchangeable products: every budget split is optimal, so the
    // refinement pass must return the symmetric one
    ProblemData pd;
    pd.c = Vec::Constant(2, 1.0);
    pd.p = Vec::Constant(2, 2.0);
    pd.A = Mat::Identity(2, 2);
    pd.H = Mat::Identity(2, 2);
    pd.G = Mat::Constant(1, 2, 1.0);
    pd.b = Vec::Constant(1, 10.0);
    MomentInfo m;
    m.mu = Vec::Constant(2, 10.0);
    m.sigma = Vec::Constant(2, 2.0);
    const auto sol = solve_V0(pd, m, ScaleIndex{1.0, 1.0});
    REQUIRE(sol.status == SolveStatus::optimal);
    CHECK(sol.value == doctest::Approx(-10.0).epsilon(1e-6));
    CHECK(sol.x[0] == doctest::Approx(5.0).epsilon(1e-4));
    CHECK(sol.x[1] == doctest::Approx(5.0).epsilon(1e-4));
    CHECK(sol.y_l[0] == doctest::Approx(5.0).epsilon(1e-4));
}

TEST_CASE("tie refinement is deterministic across repeat solves") {
    ProblemData pd;
    pd.c = Vec::Constant(3, 1.0);
    pd.p = Vec::Constant(3, 3.0);
    pd.A = Mat::Identity(3, 3);
    pd.H = Mat::Identity(3, 3);
    pd.G = Mat::Constant(1, 3, 1.0);
    pd.b = Vec::Constant(1, 12.0);
    MomentInfo m;
    m.mu = Vec::Constant(3, 10.0);
    m.sigma = Vec::Constant(3, 3.0);
    const auto d2 = build_two_point(m.mu, mechanism_from_ratios(0.5, 0.5, m.mu, m.sigma),
                                    ScaleIndex{1.0, 1.0});
    const auto s1 = solve_lower_level(pd, d2, RiskSpec::expectation(), ScaleIndex{1.0, 1.0});
    const auto s2 = solve_lower_level(pd, d2, RiskSpec::expectation(), ScaleIndex{1.0, 1.0});
    REQUIRE(s1.status == SolveStatus::optimal);
    CHECK((s1.x - s2.x).lpNorm<Eigen::Infinity>() == doctest::Approx(0.0));
    CHECK((s1.y_h - s2.y_h).lpNorm<Eigen::Infinity>() == doctest::Approx(0.0));
}

TEST_CASE("budget binds the first stage") {
    ProblemData pd = testfix::newsvendor();
    pd.b = Vec::Constant(1, 4.0);  // cheaper than the mean demand
    const auto m = testfix::newsvendor_moments();
    const auto sol = solve_V0(pd, m, ScaleIndex{1.0, 1.0});
    REQUIRE(sol.status == SolveStatus::optimal);
    CHECK(sol.x[0] == doctest::Approx(4.0).epsilon(1e-5));
    CHECK(sol.value == doctest::Approx(4.0 - 12.0).epsilon(1e-6));
}

TEST_CASE("empty budget set is reported infeasible") {
    ProblemData pd = testfix::newsvendor();
    pd.b = Vec::Constant(1, -1.0);
    const auto m = testfix::newsvendor_moments();
    const auto sol = solve_V0(pd, m, ScaleIndex{1.0, 1.0});
    CHECK(sol.status == SolveStatus::infeasible);
}

TEST_CASE("unsupported risk kinds are rejected") {
    const auto pd = testfix::newsvendor();
    CHECK_THROWS_AS(
        solve_lower_level(pd, scarf_mechanism(), RiskSpec::var(0.5), ScaleIndex{1.0, 1.0}),
        std::invalid_argument);
    CHECK_THROWS_AS(solve_lower_level(pd, scarf_mechanism(),
                                      RiskSpec::mean_semideviation(0.5, 1.5),
                                      ScaleIndex{1.0, 1.0}),
                    std::invalid_argument);
}

TEST_CASE("assumption report separates trivial from profitable instances") {
    const auto good = check_assumptions(testfix::newsvendor(), testfix::newsvendor_moments());
    CHECK(good.nontrivial);
    CHECK(good.margin_condition);
    CHECK(good.v0 == doctest::Approx(-20.0).epsilon(1e-6));

    ProblemData flat = testfix::newsvendor();
    flat.p = Vec::Constant(1, 0.5);  // selling below cost
    const auto bad = check_assumptions(flat, testfix::newsvendor_moments());
    CHECK_FALSE(bad.nontrivial);
    CHECK_FALSE(bad.margin_condition);
    CHECK(bad.v0 == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("substitution structure sells through the cheaper channel") {
    // two products serving one demand pool plus a dedicated one; prices
    // favor product 2, so the pool is served by it alone
    ProblemData pd;
    pd.c = Vec::Constant(3, 1.0);
    Vec p(3);
    p << 2.0, 4.0, 3.0;
    pd.p = p;
    pd.A = Mat::Identity(3, 3);
    Mat H(2, 3);
    H << 1.0, 1.0, 0.0, 0.0, 0.0, 1.0;
    pd.H = H;
    pd.G = Mat::Constant(1, 3, 1.0);
    pd.b = Vec::Constant(1, 100.0);
    MomentInfo m;
    m.mu = Vec::Constant(2, 10.0);
    m.sigma = Vec::Constant(2, 1.0);
    const auto sol = solve_V0(pd, m, ScaleIndex{1.0, 1.0});
    REQUIRE(sol.status == SolveStatus::optimal);
    // pool demand 10 at margin 3, dedicated demand 10 at margin 2
    CHECK(sol.value == doctest::Approx(-(10.0 * 3.0 + 10.0 * 2.0)).epsilon(1e-6));
    CHECK(sol.y_l[0] == doctest::Approx(0.0).epsilon(1e-4));
    CHECK(sol.y_l[1] == doctest::Approx(10.0).epsilon(1e-4));
}
