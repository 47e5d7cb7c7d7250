#include <doctest.h>

#include <cmath>
#include <cstdlib>

#include "helpers.hpp"
#include "nlmv/frontier.hpp"
#include "nlmv/policy.hpp"

using namespace nlmv;

namespace {

FeedbackPolicy make_policy(const MarketModel& m, const TimeGrid& grid, double x0, double K) {
    return efficient_policy(m, grid, x0, K, SolverOptions{});
}

} // namespace

TEST_CASE("optimal cost branches on the sign of x0 - d e^{-int r}") {
    CHECK(optimal_cost(0.9, 1.1, 2.0, 1.0, 0.97) ==
          doctest::Approx(0.9 * (2.0 - 0.97) * (2.0 - 0.97)));
    CHECK(optimal_cost(0.9, 1.1, 0.5, 1.0, 0.97) ==
          doctest::Approx(1.1 * (0.5 - 0.97) * (0.5 - 0.97)));
    CHECK(optimal_cost(0.9, 1.1, 0.97, 1.0, 0.97) == doctest::Approx(0.0));
}

TEST_CASE("reference policy values for the base market") {
    MarketModel m = testutil::model_a();
    TimeGrid grid(1.0, 1000);
    FeedbackPolicy policy = make_policy(m, grid, 1.0, 1.1);

    CHECK(policy.d_value == doctest::Approx(2.8040959).epsilon(1e-5));

    // below the discounted target the gain is pi2 = theta_lower / sigma = 1
    PortfolioEval pe = optimal_portfolio(policy, 0.0, 1.0);
    CHECK(pe.pi(0) == doctest::Approx(1.7212223).epsilon(1e-5));
    CHECK(!pe.extrapolated);

    // far above it the H1 gain takes over with the opposite sign
    PortfolioEval above = optimal_portfolio(policy, 0.0, 10.0);
    CHECK(above.pi(0) < 0.0);

    double rho = m.discount_factor(grid, 0.0);
    double P1_0 = evaluate_solution(*policy.sol1, 0.0).P;
    double P2_0 = evaluate_solution(*policy.sol2, 0.0).P;
    CHECK(optimal_cost(P1_0, P2_0, 1.0, policy.d_value, rho) ==
          doctest::Approx(3.0224545).epsilon(1e-5));
}

TEST_CASE("zero portfolio grows at the riskless rate") {
    MarketModel m = testutil::model_a();
    TimeGrid grid(1.0, 50);
    auto zero_rule = [](int, double, double, Eigen::VectorXd& pi) { pi.setZero(1); };
    SimulationReport rep = simulate_paths(m, grid, 1.0, 500, 99, 0.0, zero_rule);
    // no diffusion: every path compounds deterministically
    double expect = std::pow(1.0 + 0.03 * grid.dt(), 50);
    CHECK(rep.mean == doctest::Approx(expect).epsilon(1e-12));
    CHECK(rep.variance == doctest::Approx(0.0));
}

TEST_CASE("simulated moments track the frontier prediction") {
    MarketModel m = testutil::model_a();
    TimeGrid grid(1.0, 250);
    FeedbackPolicy policy = make_policy(m, grid, 1.0, 1.1);
    SimulationReport rep = simulate_wealth(m, policy, 1.0, grid, 40000, 321);
    CHECK(std::abs(rep.mean - 1.1) < 3.5 * rep.se_mean);
    CHECK(std::abs(rep.variance - 0.1185117) <
          std::max(3.5 * rep.se_variance, 0.02 * 0.1185117));
    CHECK(rep.max_y_plus <= 5.0 * std::sqrt(rep.dt));
}

TEST_CASE("terminal sample dump is aligned with the report") {
    MarketModel m = testutil::model_a();
    TimeGrid grid(1.0, 50);
    FeedbackPolicy policy = make_policy(m, grid, 1.0, 1.1);
    std::vector<double> terminal;
    SimulationReport rep = simulate_wealth(m, policy, 1.0, grid, 5000, 9, &terminal);
    REQUIRE(terminal.size() == 5000);
    double mean = 0.0;
    for (double x : terminal) mean += x;
    mean /= 5000.0;
    CHECK(mean == doctest::Approx(rep.mean).epsilon(1e-12));
}

TEST_CASE("worker count does not change the report") {
    MarketModel m = testutil::model_a();
    TimeGrid grid(1.0, 100);
    FeedbackPolicy policy = make_policy(m, grid, 1.0, 1.1);

    setenv("NLMV_THREADS", "1", 1);
    SimulationReport one = simulate_wealth(m, policy, 1.0, grid, 30000, 77);
    setenv("NLMV_THREADS", "5", 1);
    SimulationReport five = simulate_wealth(m, policy, 1.0, grid, 30000, 77);
    unsetenv("NLMV_THREADS");

    CHECK(one.mean == five.mean);
    CHECK(one.variance == five.variance);
    CHECK(one.sq_dev == five.sq_dev);
    CHECK(one.max_y_plus == five.max_y_plus);
}

TEST_CASE("explosive control is reported with the offending path") {
    MarketModel m = testutil::model_a();
    TimeGrid grid(1.0, 10);
    auto bomb = [](int, double, double, Eigen::VectorXd& pi) {
        pi.setConstant(1, 1e200);
    };
    CHECK_THROWS_AS(simulate_paths(m, grid, 1.0, 100, 1, 0.0, bomb), NumericalError);
}

TEST_CASE("policy wiring is validated") {
    MarketModel m = testutil::model_a();
    TimeGrid grid(1.0, 50);
    FeedbackPolicy policy = make_policy(m, grid, 1.0, 1.1);

    FeedbackPolicy swapped = policy;
    std::swap(swapped.sol1, swapped.sol2);
    CHECK_THROWS_AS(swapped.check(), SchemaError);

    FeedbackPolicy missing = policy;
    missing.sol1.reset();
    CHECK_THROWS_AS(missing.check(), SchemaError);

    FeedbackPolicy wrong_grid = policy;
    wrong_grid.grid = TimeGrid(1.0, 49);
    CHECK_THROWS_AS(wrong_grid.check(), SchemaError);
}

TEST_CASE("factor-driven policy evaluates state-dependent gains") {
    MarketModel fac = testutil::factor_model(1.0, 0.0, 0.3, 0.0);
    TimeGrid grid(1.0, 40);
    SolverOptions opts;
    opts.paths = 4000;
    opts.seed = 3;
    FeedbackPolicy policy = efficient_policy(fac, grid, 1.0, 1.1, opts);
    PortfolioEval low = optimal_portfolio(policy, 0.2, 1.0, -0.5);
    PortfolioEval high = optimal_portfolio(policy, 0.2, 1.0, 0.5);
    // higher factor state raises theta_lower, hence the long gain
    CHECK(high.pi(0) > low.pi(0));
    // coarse grid and small LSMC budget: only a loose sanity band is stable
    SimulationReport rep = simulate_wealth(fac, policy, 1.0, grid, 8000, 5);
    CHECK(std::abs(rep.mean - 1.1) < 0.05);
}
