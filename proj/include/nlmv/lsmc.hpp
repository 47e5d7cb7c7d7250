#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "nlmv/errors.hpp"
#include "nlmv/market_model.hpp"
#include "nlmv/time_grid.hpp"

namespace nlmv {

/**
 * Forward ensemble of the scalar factor: states y(path, node) for all N+1
 * nodes and the Brownian increments dW^j(path, interval) of the factor's
 * driving component. Generated in fixed-size blocks with per-block
 * substreams, so the ensemble is deterministic for a given seed regardless
 * of worker count.
 */
struct FactorEnsemble {
    long paths = 0;
    int steps = 0;
    std::vector<double> y;  ///< paths x (steps+1), row-major
    std::vector<double> dw; ///< paths x steps, row-major

    double state(long p, int k) const { return y[static_cast<std::size_t>(p) * (steps + 1) + k]; }
    double incr(long p, int k) const { return dw[static_cast<std::size_t>(p) * steps + k]; }
};

FactorEnsemble simulate_factor_paths(const MarketModel& model, const TimeGrid& grid,
                                     long paths, std::uint64_t seed);

/**
 * Per-node polynomial regression basis in the normalized factor state
 * z = (y - mean)/sd. Degenerate spread collapses the basis to the constant
 * term, which keeps the ensemble with vol = 0 well-posed.
 */
class PolyBasis {
public:
    PolyBasis(const std::vector<double>& states, int degree);

    int size() const { return degree_ + 1; }
    int degree() const { return degree_; }
    double y_mean() const { return mean_; }
    double y_sd() const { return sd_; }
    double y_min() const { return y_min_; }
    double y_max() const { return y_max_; }

    void features(double y, Eigen::VectorXd& phi) const;

    /// Least-squares coefficients of target on the basis; throws
    /// NumericalError on a rank-deficient normal matrix.
    Eigen::VectorXd fit(const std::vector<double>& states,
                        const std::vector<double>& target) const;

    double predict(const Eigen::VectorXd& coeff, double y) const;

private:
    int degree_;
    double mean_, sd_, y_min_, y_max_;
};

} // namespace nlmv
