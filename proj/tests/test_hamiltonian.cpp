#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "nlmv/hamiltonian.hpp"

using namespace nlmv;

namespace {

HamiltonianInput make_input(double P, const Eigen::VectorXd& Lambda,
                            const Eigen::MatrixXd& sigma, const Eigen::VectorXd& lo,
                            const Eigen::VectorXd& hi) {
    HamiltonianInput in;
    in.P = P;
    in.Lambda = Lambda;
    in.sigma = sigma;
    in.theta_lower = lo;
    in.theta_upper = hi;
    return in;
}

HamiltonianInput random_input(std::mt19937_64& gen, int d) {
    std::uniform_real_distribution<double> uP(0.5, 2.0), uL(-1.0, 1.0), uT(-0.5, 0.5);
    Eigen::VectorXd Lambda(d), lo(d), hi(d);
    for (int i = 0; i < d; ++i) {
        Lambda(i) = uL(gen);
        double a = uT(gen), b = uT(gen);
        lo(i) = std::min(a, b);
        hi(i) = std::max(a, b);
    }
    return make_input(uP(gen), Lambda, testutil::random_sigma(gen, d), lo, hi);
}

} // namespace

TEST_CASE("orthant_qp_min reproduces hand-checked minimizers") {
    Eigen::MatrixXd sigma = Eigen::MatrixXd::Identity(2, 2);
    Eigen::VectorXd Lambda = Eigen::VectorXd::Zero(2);

    SUBCASE("interior minimizer") {
        Eigen::VectorXd mu(2);
        mu << -1.0, 1.0;
        auto [value, pi] = orthant_qp_min(1.0, Lambda, sigma, mu, 0b01);
        CHECK(value == doctest::Approx(-2.0).epsilon(1e-12));
        CHECK(pi(0) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(pi(1) == doctest::Approx(-1.0).epsilon(1e-12));
    }
    SUBCASE("origin is the KKT point") {
        Eigen::VectorXd mu(2);
        mu << 1.0, 1.0;
        auto [value, pi] = orthant_qp_min(1.0, Lambda, sigma, mu, 0b11);
        CHECK(value == 0.0);
        CHECK(pi.norm() == 0.0);
    }
    SUBCASE("one coordinate clamped") {
        Eigen::VectorXd mu(2);
        mu << 1.0, -1.0;
        auto [value, pi] = orthant_qp_min(1.0, Lambda, sigma, mu, 0b11);
        CHECK(value == doctest::Approx(-1.0).epsilon(1e-12));
        CHECK(pi(0) == 0.0);
        CHECK(pi(1) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("reference values for the base market") {
    Eigen::VectorXd Lambda = Eigen::VectorXd::Zero(1);
    Eigen::MatrixXd sigma = Eigen::MatrixXd::Constant(1, 1, 0.2);
    Eigen::VectorXd lo = Eigen::VectorXd::Constant(1, 0.2);
    Eigen::VectorXd hi = Eigen::VectorXd::Constant(1, 0.4);

    HamiltonianResult h1 = eval_hamiltonian(Which::H1, make_input(1.0, Lambda, sigma, lo, hi));
    CHECK(h1.value == doctest::Approx(-0.16).epsilon(1e-12));
    CHECK(h1.argmin(0) == doctest::Approx(-2.0).epsilon(1e-12));

    HamiltonianResult h2 = eval_hamiltonian(Which::H2, make_input(1.0, Lambda, sigma, lo, hi));
    CHECK(h2.value == doctest::Approx(-0.04).epsilon(1e-12));
    CHECK(h2.argmin(0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("matches the dense-grid brute-force minimizer") {
    std::mt19937_64 gen(20240501);
    for (int d = 1; d <= 2; ++d) {
        for (int trial = 0; trial < 100; ++trial) {
            HamiltonianInput in = random_input(gen, d);
            for (Which which : {Which::H1, Which::H2}) {
                double ref = testutil::brute_force_min(which == Which::H2, in.P, in.Lambda,
                                                       in.sigma, in.theta_lower,
                                                       in.theta_upper);
                HamiltonianResult res = eval_hamiltonian(which, in);
                CAPTURE(d);
                CAPTURE(trial);
                CHECK(std::abs(res.value - ref) < 1e-6);
            }
        }
    }
}

TEST_CASE("argmin reproduces the reported value") {
    std::mt19937_64 gen(7);
    for (int trial = 0; trial < 200; ++trial) {
        int d = 1 + trial % 2;
        HamiltonianInput in = random_input(gen, d);
        for (Which which : {Which::H1, Which::H2}) {
            HamiltonianResult res = eval_hamiltonian(which, in);
            double replay = testutil::kinked_objective(which == Which::H2, in.P, in.Lambda,
                                                       in.sigma, in.theta_lower,
                                                       in.theta_upper, res.argmin);
            CHECK(res.value <= 1e-15);
            CHECK(std::abs(replay - res.value) <= 1e-12 * std::max(1.0, std::abs(res.value)));
        }
    }
}

TEST_CASE("d=1 closed form agrees with the combinatorial solver") {
    std::mt19937_64 gen(99);
    std::uniform_real_distribution<double> uP(0.5, 2.0), uL(-1.0, 1.0), uT(-0.5, 0.5),
        uS(0.1, 2.0);
    for (int trial = 0; trial < 2000; ++trial) {
        double a = uT(gen), b = uT(gen);
        double lo = std::min(a, b), hi = std::max(a, b);
        double P = uP(gen), Lambda = uL(gen), sg = uS(gen);
        Eigen::VectorXd L(1), tl(1), th(1);
        L << Lambda;
        tl << lo;
        th << hi;
        Eigen::MatrixXd sm = Eigen::MatrixXd::Constant(1, 1, sg);
        for (Which which : {Which::H1, Which::H2}) {
            ClosedForm1d cf = closed_form_1d(which, P, Lambda, lo, hi, sg);
            HamiltonianResult res = eval_hamiltonian(which, make_input(P, L, sm, tl, th));
            CHECK(std::abs(cf.value - res.value) < 1e-12);
            CHECK(std::abs(cf.pi - res.argmin(0)) < 1e-9);
        }
    }
}

TEST_CASE("positive homogeneity in (P, Lambda)") {
    std::mt19937_64 gen(1234);
    for (int trial = 0; trial < 100; ++trial) {
        HamiltonianInput in = random_input(gen, 2);
        HamiltonianInput scaled = in;
        const double c = 2.7;
        scaled.P *= c;
        scaled.Lambda *= c;
        for (Which which : {Which::H1, Which::H2}) {
            HamiltonianResult base = eval_hamiltonian(which, in);
            HamiltonianResult big = eval_hamiltonian(which, scaled);
            CHECK(big.value ==
                  doctest::Approx(c * base.value).epsilon(1e-10));
            CHECK((big.argmin - base.argmin).norm() < 1e-8 * (1.0 + base.argmin.norm()));
        }
    }
}

TEST_CASE("orthant lower bound sits below H1") {
    std::mt19937_64 gen(5150);
    for (int trial = 0; trial < 300; ++trial) {
        int d = 1 + trial % 2;
        HamiltonianInput in = random_input(gen, d);
        double f = lower_bound_f(in);
        HamiltonianResult h1 = eval_hamiltonian(Which::H1, in);
        CHECK(f <= h1.value + 1e-10);
    }
}

TEST_CASE("degenerate input reports orthant ties") {
    Eigen::VectorXd zero = Eigen::VectorXd::Zero(2);
    HamiltonianInput in = make_input(1.0, zero, Eigen::MatrixXd::Identity(2, 2), zero, zero);
    HamiltonianResult res = eval_hamiltonian(Which::H1, in);
    CHECK(res.value == 0.0);
    CHECK(res.orthant == 0);
    CHECK(res.ties.size() == 4);
}

TEST_CASE("input validation") {
    Eigen::VectorXd L = Eigen::VectorXd::Zero(1);
    Eigen::MatrixXd sg = Eigen::MatrixXd::Identity(1, 1);
    CHECK_THROWS_AS(eval_hamiltonian(Which::H1,
                                     make_input(-1.0, L, sg, L, L)),
                    SchemaError);
    Eigen::VectorXd lo = Eigen::VectorXd::Constant(1, 0.5);
    Eigen::VectorXd hi = Eigen::VectorXd::Constant(1, 0.4);
    CHECK_THROWS_AS(eval_hamiltonian(Which::H1, make_input(1.0, L, sg, lo, hi)),
                    SchemaError);
    CHECK_THROWS_AS(closed_form_1d(Which::H2, 1.0, 0.0, 0.2, 0.4, 0.0), SchemaError);
}
