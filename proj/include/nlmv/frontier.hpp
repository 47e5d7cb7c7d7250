#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "nlmv/policy.hpp"

namespace nlmv {

/// Knobs for the backward solvers behind the frontier operations. Paths,
/// degree and seed only matter for factor-driven models.
struct SolverOptions {
    long paths = 100000;
    int basis_degree = 3;
    std::uint64_t seed = 0;
};

/**
 * d* = (x0 P2(0) rho - K) / (P2(0) rho^2 - 1) with rho = e^{-int_0^T r}.
 * Requires P2(0) rho^2 < 1 (non-degenerate dual) and K >= x0 / rho; targets
 * below the riskless return throw InfeasibleError.
 */
double lagrange_multiplier(double P2_0, double x0, double K, double rho);

/// Var X_T = P2(0) rho^2 / (1 - P2(0) rho^2) * (K - x0 e^{int r})^2.
double frontier_variance(double P2_0, double x0, double K, double rho);

/// Solves both Riccati equations (cached per model/grid/options) and wraps
/// them with the Lagrange level d* for the target K.
FeedbackPolicy efficient_policy(const MarketModel& model, const TimeGrid& grid, double x0,
                                double K, const SolverOptions& opts = {});

struct FrontierPoint {
    double K = 0.0;
    double d_star = 0.0;
    double variance = 0.0;
    double std_dev = 0.0;
};

/// One frontier point per target, sharing a single pair of Riccati solves.
std::vector<FrontierPoint> frontier_curve(const MarketModel& model, const TimeGrid& grid,
                                          double x0, const std::vector<double>& targets,
                                          const SolverOptions& opts = {});

/**
 * Constructive admissible strategy hitting EX_T = K: a single-coordinate
 * portfolio beta * mu on the set where the relevant premium has the right
 * sign, scaled so the expected terminal value matches the target exactly.
 */
struct FeasibleStrategy {
    int coordinate = 0;
    bool short_side = false; ///< true: shorts on {mu_upper < 0}; else longs on {mu_lower > 0}
    double beta = 0.0;
};

FeasibleStrategy feasible_strategy(const MarketModel& model, const TimeGrid& grid,
                                   double x0, double K, int mc_paths, std::uint64_t seed);

/// The portfolio the feasible strategy prescribes on interval k at factor
/// state y.
Eigen::VectorXd feasible_strategy_portfolio(const MarketModel& model, const TimeGrid& grid,
                                            const FeasibleStrategy& strat, int k, double y);

/// Pair of cached/solved Riccati solutions for a model (H1, H2).
struct RiccatiPair {
    std::shared_ptr<const RiccatiSolution> sol1;
    std::shared_ptr<const RiccatiSolution> sol2;
};

RiccatiPair solve_riccati_pair(const MarketModel& model, const TimeGrid& grid,
                               const SolverOptions& opts = {});

} // namespace nlmv
