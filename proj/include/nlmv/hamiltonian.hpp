#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "nlmv/errors.hpp"

namespace nlmv {

enum class Which { H1, H2 };

/// Dimension cap for the exact combinatorial minimizer (2^d orthants times
/// active-set enumeration). Larger d signals combinatorial blowup.
inline constexpr int kMaxHamiltonianDim = 10;

/**
 * Pointwise arguments of the Hamiltonians: P > 0, martingale integrand
 * Lambda, volatility sigma with sigma*sigma' positive definite, and the two
 * market-price-of-risk vectors with theta_lower <= theta_upper.
 */
struct HamiltonianInput {
    double P = 1.0;
    Eigen::VectorXd Lambda;
    Eigen::MatrixXd sigma;
    Eigen::VectorXd theta_lower;
    Eigen::VectorXd theta_upper;

    int dim() const { return static_cast<int>(Lambda.size()); }
    Eigen::VectorXd mu_lower() const { return sigma * theta_lower; }
    Eigen::VectorXd mu_upper() const { return sigma * theta_upper; }
    void check() const;
};

/**
 * Minimum of the kinked quadratic plus the minimizing portfolio. The orthant
 * is the sign pattern I on which the minimum is attained (bit i set means
 * pi_i >= 0); ties lists every orthant whose minimum agrees to 1e-12
 * relative, and the reported orthant is the smallest such bitmask.
 */
struct HamiltonianResult {
    double value = 0.0;
    Eigen::VectorXd argmin;
    std::uint32_t orthant = 0;
    std::vector<std::uint32_t> ties;
};

/**
 * Exact minimum of  P pi' S pi + 2 [P pi'mu_I + pi' sigma Lambda]  over the
 * closed orthant {pi_i >= 0 for i in I, pi_i <= 0 otherwise}, S = sigma*sigma'.
 * Solved by enumerating active coordinate sets: clamp a subset to zero, solve
 * the reduced unconstrained quadratic, keep sign-feasible candidates, return
 * the least value.
 */
std::pair<double, Eigen::VectorXd> orthant_qp_min(double P, const Eigen::VectorXd& Lambda,
                                                  const Eigen::MatrixXd& sigma,
                                                  const Eigen::VectorXd& mu_I,
                                                  std::uint32_t orthant);

/**
 * H1 or H2 with its minimizer. H1 minimizes
 *   P pi'S pi + 2 [P ((pi+)'mu_lo - (pi-)'mu_hi) + pi' sigma Lambda]
 * by splitting R^d into orthants; on orthant I the kinked term is linear with
 * premium mu_I (component i from mu_lo if i in I, else mu_hi). H2 reduces to
 * the same kernel with the theta pair swapped (same Lambda), and its
 * minimizer is the negated kernel minimizer.
 */
HamiltonianResult eval_hamiltonian(Which which, const HamiltonianInput& input);

/// Three-branch d = 1 closed form for H2 (requires sigma > 0); the oracle
/// counterpart of eval_hamiltonian.
struct ClosedForm1d {
    double value = 0.0;
    double pi = 0.0;
};
ClosedForm1d closed_form_1d(Which which, double P, double Lambda, double theta_lower,
                            double theta_upper, double sigma);

/**
 * Orthant lower bound
 *   min_I { -(mu_I)'S^{-1}mu_I P - 2 (mu_I)'(sigma')^{-1} Lambda } - Lambda'Lambda/P,
 * which sits below H1 for every valid input.
 */
double lower_bound_f(const HamiltonianInput& input);

} // namespace nlmv
