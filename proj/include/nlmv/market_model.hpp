#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nlmv/coefficient.hpp"
#include "nlmv/time_grid.hpp"

namespace nlmv {

/**
 * Market with one riskless asset at deterministic rate r and d risky assets.
 * Long positions earn the premium vector sigma*theta_lower, short positions
 * pay sigma*theta_upper, which makes the wealth drift kinked in the
 * portfolio. Immutable after construction; safe for concurrent reads.
 */
struct MarketModel {
    int dimension = 1;
    double epsilon = 1e-8; ///< nondegeneracy floor for sigma*sigma'

    CoefficientSpec rate; ///< deterministic (Constant or Piecewise) only
    std::vector<CoefficientSpec> theta_lower; ///< size d
    std::vector<CoefficientSpec> theta_upper; ///< size d
    std::vector<CoefficientSpec> sigma;       ///< row-major d x d
    std::optional<FactorProcess> factor;

    bool is_deterministic() const { return !factor.has_value(); }

    double rate_at(const TimeGrid& grid, int k) const {
        return rate.eval(grid, k, 0.0);
    }

    Eigen::VectorXd theta_lower_at(const TimeGrid& grid, int k, double y) const;
    Eigen::VectorXd theta_upper_at(const TimeGrid& grid, int k, double y) const;
    Eigen::MatrixXd sigma_at(const TimeGrid& grid, int k, double y) const;

    /// Exact integral of the piecewise-constant rate over [t0, t1].
    double integral_rate(const TimeGrid& grid, double t0, double t1) const;

    /// e^{-int_t^T r}
    double discount_factor(const TimeGrid& grid, double t) const;

    /// e^{int_0^T r}
    double riskless_growth(const TimeGrid& grid) const;

    /// Structural checks (sizes, deterministic r); throws SchemaError.
    void check_shape() const;
};

struct Violation {
    std::string what; ///< "theta ordering", "nondegeneracy", ...
    double t = 0.0;
    double state = 0.0;
    int index = -1;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool valid() const { return violations.empty(); }
};

/**
 * Checks theta_lower <= theta_upper componentwise and uniform nondegeneracy
 * of sigma*sigma' at every grid node and probed factor state. Violations are
 * reported, not thrown; a non-finite coefficient evaluation is a hard error.
 */
ValidationReport validate_model(const MarketModel& model, const TimeGrid& grid,
                                const std::vector<double>& probe_states);

struct FeasibilityResult {
    bool feasible = false;
    double lhs_long = 0.0;  ///< sum_i E int (sigma*theta_lower)_i^+ dt
    double lhs_short = 0.0; ///< sum_i E int (sigma*theta_upper)_i^- dt
    double tol = 0.0;
};

/**
 * Feasibility of the mean-variance problem for every target K above the
 * riskless return: at least one of the two premium integrals must be
 * strictly positive. Deterministic coefficients are integrated exactly on
 * the grid; factor-driven ones by Monte Carlo over mc_paths factor paths.
 */
FeasibilityResult check_feasibility(const MarketModel& model, const TimeGrid& grid,
                                    int mc_paths, std::uint64_t seed);

/// Default factor probe states: y0 and mean +/- up to three stationary sds.
std::vector<double> default_probe_states(const MarketModel& model);

} // namespace nlmv
