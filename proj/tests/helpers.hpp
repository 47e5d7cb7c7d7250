#pragma once

// Shared fixtures for the unit and acceptance suites: reference market
// models, an independent brute-force minimizer for the kinked quadratic, and
// small RNG utilities. The brute-force code evaluates the objective straight
// from its definition so it shares nothing with the library's solver.

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "nlmv/market_model.hpp"

namespace testutil {

/// d = 1, r = 0.03, sigma = 0.2, theta_lower = 0.2, theta_upper = 0.4, T = 1.
inline nlmv::MarketModel model_a() {
    nlmv::MarketModel m;
    m.dimension = 1;
    m.rate = nlmv::CoefficientSpec::constant(0.03);
    m.theta_lower = {nlmv::CoefficientSpec::constant(0.2)};
    m.theta_upper = {nlmv::CoefficientSpec::constant(0.4)};
    m.sigma = {nlmv::CoefficientSpec::constant(0.2)};
    return m;
}

/// Constant-coefficient d = 1 model with the given parameters.
inline nlmv::MarketModel const_model(double r, double lo, double hi, double sigma) {
    nlmv::MarketModel m;
    m.dimension = 1;
    m.rate = nlmv::CoefficientSpec::constant(r);
    m.theta_lower = {nlmv::CoefficientSpec::constant(lo)};
    m.theta_upper = {nlmv::CoefficientSpec::constant(hi)};
    m.sigma = {nlmv::CoefficientSpec::constant(sigma)};
    return m;
}

/// Factor-driven d = 1 model: theta = a +/- b tanh(y), OU factor.
inline nlmv::MarketModel factor_model(double kappa, double mean, double vol, double y0) {
    nlmv::MarketModel m;
    m.dimension = 1;
    m.rate = nlmv::CoefficientSpec::constant(0.03);
    m.theta_lower = {nlmv::CoefficientSpec::tanh_map(0.2, 0.1, 1.0)};
    m.theta_upper = {nlmv::CoefficientSpec::tanh_map(0.4, 0.1, 1.0)};
    m.sigma = {nlmv::CoefficientSpec::constant(0.2)};
    nlmv::FactorProcess f;
    f.kappa = kappa;
    f.mean = mean;
    f.vol = vol;
    f.y0 = y0;
    f.component = 0;
    m.factor = f;
    return m;
}

/// Objective of H1/H2 evaluated verbatim from the definition:
///   P pi'SS'pi +/- 2 [P ((pi+)' sigma theta_lo - (pi-)' sigma theta_hi)
///                    + pi' sigma Lambda]
inline double kinked_objective(bool second, double P, const Eigen::VectorXd& Lambda,
                               const Eigen::MatrixXd& sigma,
                               const Eigen::VectorXd& theta_lo,
                               const Eigen::VectorXd& theta_hi,
                               const Eigen::VectorXd& pi) {
    Eigen::VectorXd pi_pos = pi.cwiseMax(0.0);
    Eigen::VectorXd pi_neg = (-pi).cwiseMax(0.0);
    Eigen::MatrixXd S = sigma * sigma.transpose();
    double bracket = P * (pi_pos.dot(sigma * theta_lo) - pi_neg.dot(sigma * theta_hi)) +
                     pi.dot(sigma * Lambda);
    double sign = second ? -1.0 : 1.0;
    return P * pi.dot(S * pi) + sign * 2.0 * bracket;
}

/// Dense-grid search with iterative local refinement. The objective is
/// convex, so recentering on the incumbent converges to the global minimum.
inline double brute_force_min(bool second, double P, const Eigen::VectorXd& Lambda,
                              const Eigen::MatrixXd& sigma,
                              const Eigen::VectorXd& theta_lo,
                              const Eigen::VectorXd& theta_hi) {
    const int d = static_cast<int>(Lambda.size());
    Eigen::MatrixXd S = sigma * sigma.transpose();
    double lam_min = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(S)
                         .eigenvalues()
                         .minCoeff();
    double drive = (P * (sigma * theta_lo).norm() + P * (sigma * theta_hi).norm() +
                    (sigma * Lambda).norm());
    double radius = 2.0 * drive / (P * lam_min) + 1.0;

    Eigen::VectorXd center = Eigen::VectorXd::Zero(d);
    double width = radius;
    const int grid_n = d == 1 ? 81 : 21;
    double best = kinked_objective(second, P, Lambda, sigma, theta_lo, theta_hi, center);
    Eigen::VectorXd pt(d);
    for (int round = 0; round < 80; ++round) {
        Eigen::VectorXd best_pt = center;
        for (long long idx = 0; idx < static_cast<long long>(std::pow(grid_n, d)); ++idx) {
            long long rem = idx;
            for (int i = 0; i < d; ++i) {
                int gi = static_cast<int>(rem % grid_n);
                rem /= grid_n;
                pt(i) = center(i) + width * (2.0 * gi / (grid_n - 1) - 1.0);
            }
            double v = kinked_objective(second, P, Lambda, sigma, theta_lo, theta_hi, pt);
            if (v < best) {
                best = v;
                best_pt = pt;
            }
        }
        center = best_pt;
        width *= 0.62;
        if (width < 1e-9) break;
    }
    return best;
}

/// Random symmetric positive-definite volatility matrix whose singular
/// values stay within [0.5, d + 1.5], so sigma sigma' is uniformly
/// well conditioned and grid-search oracles stay reliable.
inline Eigen::MatrixXd random_sigma(std::mt19937_64& gen, int d) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::MatrixXd A(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) A(i, j) = u(gen);
    Eigen::MatrixXd sym = 0.5 * (A + A.transpose());
    // Gershgorin: |lambda(sym)| <= d, so the shift keeps lambda >= 0.5
    return sym + (d + 0.5) * Eigen::MatrixXd::Identity(d, d);
}

} // namespace testutil
