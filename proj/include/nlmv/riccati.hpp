#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "nlmv/hamiltonian.hpp"
#include "nlmv/market_model.hpp"
#include "nlmv/time_grid.hpp"

namespace nlmv {

/// Per-node regression of P and Lambda on the factor state (LSMC case).
struct RegressionNode {
    Eigen::VectorXd p_coeff;
    Eigen::VectorXd lambda_coeff;
    double y_mean = 0.0;
    double y_sd = 1.0;
    double y_min = 0.0;
    double y_max = 0.0;
};

/**
 * Backward Riccati solution (P, Lambda) on the grid. Deterministic models
 * carry one P value per node with Lambda identically zero; factor-driven
 * models carry per-node regression coefficients. The representation is
 * certified against the bounds floor_c1 <= P <= e^{2 int r} (the LSMC clamp
 * allows a 5% slack on both sides).
 */
struct RiccatiSolution {
    static constexpr double kClampSlack = 0.05;

    Which which = Which::H1;
    TimeGrid grid;
    bool deterministic = true;

    std::vector<double> p_nodes;         ///< deterministic representation
    std::vector<RegressionNode> nodes;   ///< LSMC representation, steps+1 entries

    double floor_c1 = 0.0;               ///< lower bound certificate
    std::vector<double> upper_nodes;     ///< e^{2 int_{t_k}^T r} per node

    std::uint64_t seed = 0;
    long paths = 0;
    int basis_degree = 0;
    long clamp_events = 0;
    double clamp_fraction = 0.0;
};

struct RiccatiEval {
    double P = 1.0;
    double Lambda = 0.0; ///< factor-component integrand; other components are zero
    bool extrapolated = false;
};

/**
 * Lower bound c1 = e^{int (2r - c)} with c = max(sup 2r, sup_I sup over probe
 * points of (mu_I)' (sigma sigma')^{-1} mu_I).
 */
double positivity_floor(const MarketModel& model, const TimeGrid& grid,
                        const std::vector<double>& probe_states = {});

/**
 * Deterministic-coefficient solver: Lambda is zero a priori and the BSDE
 * collapses to dP/dt = -[2 r P + H(P, 0)], integrated by classical RK4
 * backward from P(T) = 1. Refuses (rather than clamps) if a step leaves the
 * certified corridor.
 */
RiccatiSolution solve_riccati_ode(const MarketModel& model, Which which,
                                  const TimeGrid& grid);

/**
 * Factor-driven solver: regression-based backward induction over a simulated
 * factor ensemble. Explicit driver at k+1 with one inner fixed-point pass for
 * the P entering the Hamiltonian; Lambda from a martingale-increment
 * regression. Deterministic given (seed, paths, basis_degree).
 */
RiccatiSolution solve_riccati_lsmc(const MarketModel& model, Which which,
                                   const TimeGrid& grid, long paths, int basis_degree,
                                   std::uint64_t seed);

/// Interpolating (deterministic) or nearest-node regression (LSMC) read-out.
RiccatiEval evaluate_solution(const RiccatiSolution& sol, double t, double factor_state = 0.0);

nlohmann::json riccati_to_json(const RiccatiSolution& sol);
RiccatiSolution riccati_from_json(const nlohmann::json& j);

} // namespace nlmv
