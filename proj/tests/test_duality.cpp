#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "nlmv/duality.hpp"

using namespace nlmv;

TEST_CASE("generator branches") {
    // inside the band only the quadratic-in-Z part survives
    CHECK(dual_generator(0.3, 0.2, 0.4, 0.03) ==
          doctest::Approx(-0.5 * 0.09 - 0.06).epsilon(1e-14));
    // below the band: distance to theta_lower enters
    CHECK(dual_generator(0.0, 0.2, 0.4, 0.03) ==
          doctest::Approx(0.04 - 0.06).epsilon(1e-14));
    // above the band: distance to theta_upper enters
    CHECK(dual_generator(0.5, 0.2, 0.4, 0.0) ==
          doctest::Approx(0.01 - 0.125).epsilon(1e-14));
    CHECK(optimal_dual_control(0.5, 0.2, 0.4) == 0.4);
    CHECK(optimal_dual_control(0.0, 0.2, 0.4) == 0.2);
    CHECK(optimal_dual_control(0.3, 0.2, 0.4) == 0.3);
}

TEST_CASE("deterministic dual solution for the base market") {
    MarketModel m = testutil::model_a();
    TimeGrid grid(1.0, 200);
    DualSolution dual = solve_dual_bsde(m, grid);
    CHECK(dual.deterministic);
    // g(0) = theta_lower^2 - 2r = -0.02, so Y~(0) = -0.02
    CHECK(evaluate_dual(dual, 0.0).Y == doctest::Approx(-0.02).epsilon(1e-12));
    CHECK(evaluate_dual(dual, 1.0).Y == doctest::Approx(0.0));
    CHECK(evaluate_dual(dual, 0.5).Z == 0.0);

    // multiplier and budget level match the closed-form chain
    double rho = m.discount_factor(grid, 0.0);
    double d_star = 2.8040959;
    double zeta = dual_multiplier(-0.02, 1.0, d_star, rho);
    CHECK(zeta == doctest::Approx(3.511986).epsilon(1e-5));
}

TEST_CASE("pathwise identities against the second Riccati solution") {
    MarketModel m = testutil::model_a();
    TimeGrid grid(1.0, 250);
    RiccatiSolution sol2 = solve_riccati_ode(m, Which::H2, grid);
    DualSolution dual = solve_dual_bsde(m, grid);
    ConsistencyReport rep = duality_consistency_check(sol2, dual);
    CHECK(rep.pass);
    CHECK(rep.threshold == doctest::Approx(1e-6));
    CHECK(rep.max_p_residual < 1e-9);
    CHECK(rep.max_z_residual == 0.0);
    CHECK(rep.rows.size() == static_cast<std::size_t>(grid.num_nodes()));
}

TEST_CASE("weak duality across constant dual controls") {
    // For constant v, E(N_{0,T})^2 = e^{-2rT + v^2 T}; the dual value
    // (x0 - d rho)^2 e^{2rT - v^2 T} is maximized at v = theta_lower, where
    // it equals P2(0) (x0 - d rho)^2.
    MarketModel m = testutil::model_a();
    TimeGrid grid(1.0, 500);
    RiccatiSolution sol2 = solve_riccati_ode(m, Which::H2, grid);
    double P2_0 = evaluate_solution(sol2, 0.0).P;
    for (double v = 0.2; v <= 0.4 + 1e-12; v += 0.02) {
        double dual_gain = std::exp(2.0 * 0.03 - v * v);
        CHECK(dual_gain <= P2_0 * (1.0 + 1e-6));
    }
    CHECK(std::exp(2.0 * 0.03 - 0.04) == doctest::Approx(P2_0).epsilon(1e-6));
}

TEST_CASE("terminal wealth repricing on common random numbers") {
    MarketModel m = testutil::model_a();
    TimeGrid grid(1.0, 250);
    TerminalWealthReport rep = dual_terminal_wealth_check(m, grid, 1.0, 1.1, 40000, 4242);
    CHECK(rep.zeta == doctest::Approx(3.511986).epsilon(1e-5));
    CHECK(std::abs(rep.budget - 1.0) < 4.0 * rep.budget_se);
    CHECK(rep.mean_abs_diff < 0.5 * std::sqrt(rep.dt));
    CHECK(rep.excess_sq == 0.0); // xi never exceeds d*
}

TEST_CASE("factor-driven dual solution stays consistent with the LSMC Riccati") {
    MarketModel fac = testutil::factor_model(1.0, 0.0, 0.3, 0.0);
    TimeGrid grid(1.0, 40);
    RiccatiSolution sol2 = solve_riccati_lsmc(fac, Which::H2, grid, 20000, 3, 2024);
    DualSolution dual = solve_dual_bsde(fac, grid, 20000, 2024, 3);
    ConsistencyReport rep = duality_consistency_check(sol2, dual);
    CHECK(rep.threshold == doctest::Approx(0.02));
    CHECK(rep.max_p_residual < 0.02);
    CHECK(rep.max_z_residual < 0.02);
}

TEST_CASE("dimension and wiring guards") {
    TimeGrid grid(1.0, 10);
    MarketModel two;
    two.dimension = 2;
    two.rate = CoefficientSpec::constant(0.0);
    two.theta_lower = {CoefficientSpec::constant(0.1), CoefficientSpec::constant(0.1)};
    two.theta_upper = {CoefficientSpec::constant(0.2), CoefficientSpec::constant(0.2)};
    two.sigma = {CoefficientSpec::constant(1.0), CoefficientSpec::constant(0.0),
                 CoefficientSpec::constant(0.0), CoefficientSpec::constant(1.0)};
    CHECK_THROWS_AS(solve_dual_bsde(two, grid), SchemaError);
    CHECK_THROWS_AS(dual_terminal_wealth_check(two, grid, 1.0, 1.1, 100, 1), SchemaError);

    MarketModel m = testutil::model_a();
    RiccatiSolution sol1 = solve_riccati_ode(m, Which::H1, grid);
    DualSolution dual = solve_dual_bsde(m, grid);
    CHECK_THROWS_AS(duality_consistency_check(sol1, dual), SchemaError);
}
