#include <doctest.h>

#include <cmath>

#include <nlohmann/json.hpp>

#include "helpers.hpp"
#include "nlmv/riccati.hpp"

using namespace nlmv;

TEST_CASE("base market: P2(0) = e^{0.02}, P1(0) = e^{-0.10}") {
    MarketModel m = testutil::model_a();
    TimeGrid grid(1.0, 1000);

    RiccatiSolution s2 = solve_riccati_ode(m, Which::H2, grid);
    CHECK(std::abs(evaluate_solution(s2, 0.0).P - std::exp(0.02)) < 1e-8);

    RiccatiSolution s1 = solve_riccati_ode(m, Which::H1, grid);
    CHECK(std::abs(evaluate_solution(s1, 0.0).P - std::exp(-0.10)) < 1e-8);
}

TEST_CASE("classical reduction theta_lower = theta_upper") {
    // With a single theta the kink vanishes and P2(0) = e^{(2r - theta^2) T}.
    for (double theta : {0.1, 0.3, 0.5}) {
        MarketModel m = testutil::const_model(0.03, theta, theta, 0.2);
        TimeGrid grid(1.0, 1000);
        RiccatiSolution s2 = solve_riccati_ode(m, Which::H2, grid);
        double expect = std::exp(2.0 * 0.03 - theta * theta);
        CHECK(std::abs(evaluate_solution(s2, 0.0).P - expect) < 1e-8);
    }
}

TEST_CASE("solution stays inside the certified corridor") {
    MarketModel m = testutil::model_a();
    TimeGrid grid(1.0, 200);
    for (Which which : {Which::H1, Which::H2}) {
        RiccatiSolution sol = solve_riccati_ode(m, which, grid);
        for (int k = 0; k <= grid.steps; ++k) {
            double P = sol.p_nodes[static_cast<std::size_t>(k)];
            CHECK(P >= sol.floor_c1 * (1.0 - 1e-9));
            CHECK(P <= sol.upper_nodes[static_cast<std::size_t>(k)] * (1.0 + 1e-9));
        }
    }
}

TEST_CASE("positivity floor for the base market") {
    MarketModel m = testutil::model_a();
    TimeGrid grid(1.0, 100);
    // c = max(2r, theta_upper^2) = 0.16, so c1 = e^{0.06 - 0.16}
    CHECK(positivity_floor(m, grid) == doctest::Approx(std::exp(-0.10)).epsilon(1e-12));
}

TEST_CASE("RK4 convergence order on a stiff single-theta market") {
    // theta = 1.5, r = 0: P2(t) = e^{-theta^2 (T - t)} exactly.
    MarketModel m = testutil::const_model(0.0, 1.5, 1.5, 1.0);
    double exact = std::exp(-2.25);
    double err[3];
    int idx = 0;
    for (int N : {8, 16, 32}) {
        RiccatiSolution sol = solve_riccati_ode(m, Which::H2, TimeGrid(1.0, N));
        err[idx++] = std::abs(evaluate_solution(sol, 0.0).P - exact);
    }
    CHECK(err[0] / err[1] == doctest::Approx(16.0).epsilon(0.15));
    CHECK(err[1] / err[2] == doctest::Approx(16.0).epsilon(0.15));
}

TEST_CASE("evaluation interpolates between nodes") {
    MarketModel m = testutil::model_a();
    TimeGrid grid(1.0, 10);
    RiccatiSolution sol = solve_riccati_ode(m, Which::H2, grid);
    CHECK(evaluate_solution(sol, 1.0).P == 1.0);
    double mid = evaluate_solution(sol, 0.05).P;
    double a = sol.p_nodes[0], b = sol.p_nodes[1];
    CHECK(mid == doctest::Approx(0.5 * (a + b)).epsilon(1e-12));
    CHECK(evaluate_solution(sol, 0.3).Lambda == 0.0);
    CHECK_THROWS_AS(evaluate_solution(sol, -0.1), SchemaError);
}

TEST_CASE("deterministic factor path matches the frozen-coefficient solve") {
    // vol = 0 with y0 = mean pins the factor at 0, where the tanh thetas
    // equal 0.2 / 0.4; the regression collapses to degree 0.
    MarketModel fac = testutil::factor_model(1.0, 0.0, 0.0, 0.0);
    TimeGrid grid(1.0, 100);
    RiccatiSolution lsmc = solve_riccati_lsmc(fac, Which::H2, grid, 1000, 3, 11);
    RiccatiSolution ode = solve_riccati_ode(testutil::model_a(), Which::H2, grid);
    CHECK(std::abs(evaluate_solution(lsmc, 0.0, 0.0).P - evaluate_solution(ode, 0.0).P) <
          2e-4);
    CHECK(evaluate_solution(lsmc, 0.5, 0.0).Lambda == 0.0);
}

TEST_CASE("LSMC solution respects the clamp corridor and stays reproducible") {
    MarketModel fac = testutil::factor_model(1.0, 0.0, 0.3, 0.0);
    TimeGrid grid(1.0, 40);
    RiccatiSolution a = solve_riccati_lsmc(fac, Which::H2, grid, 4000, 3, 123);
    RiccatiSolution b = solve_riccati_lsmc(fac, Which::H2, grid, 4000, 3, 123);
    CHECK(a.clamp_fraction <= 0.05);
    for (int k = 0; k <= grid.steps; k += 10) {
        double t = grid.node(k);
        for (double y : {-0.3, 0.0, 0.3}) {
            RiccatiEval ea = evaluate_solution(a, t, y);
            RiccatiEval eb = evaluate_solution(b, t, y);
            CHECK(ea.P == eb.P); // bitwise: same seed, same result
            CHECK(ea.Lambda == eb.Lambda);
            CHECK(ea.P >= a.floor_c1 * (1.0 - RiccatiSolution::kClampSlack));
        }
    }
    // outside the simulated range the read-out is flagged
    CHECK(evaluate_solution(a, 0.5, 50.0).extrapolated);
    CHECK(!evaluate_solution(a, 0.5, 0.0).extrapolated);
}

TEST_CASE("solver dispatch guards") {
    TimeGrid grid(1.0, 10);
    CHECK_THROWS_AS(solve_riccati_ode(testutil::factor_model(1, 0, 0.3, 0), Which::H1, grid),
                    SchemaError);
    CHECK_THROWS_AS(solve_riccati_lsmc(testutil::model_a(), Which::H1, grid, 1000, 3, 1),
                    SchemaError);
    CHECK_THROWS_AS(solve_riccati_lsmc(testutil::factor_model(1, 0, 0.3, 0), Which::H1,
                                       grid, 10, 3, 1),
                    SchemaError); // too few paths for the basis
}

TEST_CASE("JSON round trip") {
    TimeGrid grid(1.0, 20);

    SUBCASE("deterministic representation") {
        RiccatiSolution sol = solve_riccati_ode(testutil::model_a(), Which::H2, grid);
        RiccatiSolution back = riccati_from_json(riccati_to_json(sol));
        CHECK(back.deterministic);
        CHECK(back.which == Which::H2);
        for (int k = 0; k <= grid.steps; ++k)
            CHECK(back.p_nodes[static_cast<std::size_t>(k)] ==
                  sol.p_nodes[static_cast<std::size_t>(k)]);
        CHECK(back.floor_c1 == sol.floor_c1);
    }
    SUBCASE("regression representation") {
        MarketModel fac = testutil::factor_model(1.0, 0.0, 0.3, 0.0);
        RiccatiSolution sol = solve_riccati_lsmc(fac, Which::H1, grid, 1000, 2, 5);
        RiccatiSolution back = riccati_from_json(riccati_to_json(sol));
        for (double t : {0.0, 0.5, 1.0})
            for (double y : {-0.2, 0.1}) {
                RiccatiEval a = evaluate_solution(sol, t, y);
                RiccatiEval b = evaluate_solution(back, t, y);
                CHECK(a.P == b.P);
                CHECK(a.Lambda == b.Lambda);
            }
    }
    SUBCASE("malformed document") {
        nlohmann::json j;
        j["which"] = 2;
        CHECK_THROWS_AS(riccati_from_json(j), SchemaError);
    }
}
