#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <memory>
#include <vector>

#include "nlmv/market_model.hpp"
#include "nlmv/parallel.hpp"
#include "nlmv/riccati.hpp"
#include "nlmv/rng.hpp"
#include "nlmv/time_grid.hpp"

namespace nlmv {

/**
 * Feedback policy pi(t, X, y) = pi1(t, y) * Y^+ + pi2(t, y) * Y^- with
 * Y = X - d_value * e^{-int_t^T r}; pi1, pi2 are the Hamiltonian minimizers
 * at the two Riccati solutions.
 */
struct FeedbackPolicy {
    double d_value = 0.0;
    std::shared_ptr<const RiccatiSolution> sol1;
    std::shared_ptr<const RiccatiSolution> sol2;
    MarketModel model;
    TimeGrid grid;

    void check() const;
};

struct PortfolioEval {
    Eigen::VectorXd pi;
    bool extrapolated = false;
};

/// The optimal portfolio at (t, X, factor state).
PortfolioEval optimal_portfolio(const FeedbackPolicy& policy, double t, double X,
                                double factor_state = 0.0);

/// Branch formula P1(0)(x0 - d*disc)^2 / P2(0)(x0 - d*disc)^2 for the
/// optimal quadratic cost; both branches vanish at equality.
double optimal_cost(double P1_0, double P2_0, double x0, double d, double discount0);

struct SimulationReport {
    long paths = 0;
    double mean = 0.0;
    double variance = 0.0;
    double se_mean = 0.0;
    double se_variance = 0.0;
    double sq_dev = 0.0;    ///< E (X_T - d)^2
    double se_sq_dev = 0.0;
    double max_y_plus = 0.0; ///< max over paths/nodes of (X - d e^{-int r})^+
    double dt = 0.0;
    std::uint64_t seed = 0;
};

/**
 * Forward Euler-Maruyama over all paths for an arbitrary control rule
 * fn(k, X, y, pi_out). Paths run in fixed blocks with per-block substreams
 * and the block partials merge in order, so the report does not depend on
 * the worker count. d_ref anchors the squared-deviation and Y^+ columns.
 */
template <class PolicyFn>
SimulationReport simulate_paths(const MarketModel& model, const TimeGrid& grid, double x0,
                                long paths, std::uint64_t seed, double d_ref,
                                PolicyFn&& fn, std::vector<double>* terminal_out = nullptr) {
    if (paths < 1) throw SchemaError("simulate_paths: paths must be >= 1");
    if (terminal_out) terminal_out->assign(static_cast<std::size_t>(paths), 0.0);
    const int d = model.dimension;
    const int N = grid.steps;
    const double dt = grid.dt();
    const double sqdt = std::sqrt(dt);

    // per-node discount e^{-int_{t_k}^T r} for the Y diagnostic
    std::vector<double> disc(static_cast<std::size_t>(N + 1));
    for (int k = 0; k <= N; ++k)
        disc[static_cast<std::size_t>(k)] = model.discount_factor(grid, grid.node(k));

    const bool det_coeffs = model.is_deterministic();
    // frozen per-node market data for the deterministic fast path
    std::vector<Eigen::VectorXd> mu_lo_k, mu_hi_k;
    std::vector<Eigen::MatrixXd> sigma_k;
    if (det_coeffs) {
        for (int k = 0; k < N; ++k) {
            Eigen::MatrixXd s = model.sigma_at(grid, k, 0.0);
            mu_lo_k.push_back(s * model.theta_lower_at(grid, k, 0.0));
            mu_hi_k.push_back(s * model.theta_upper_at(grid, k, 0.0));
            sigma_k.push_back(std::move(s));
        }
    }

    struct BlockStats {
        double sx = 0, sx2 = 0, sx3 = 0, sx4 = 0;
        double sd2 = 0, sd4 = 0;
        double max_y_plus = 0;
        long bad_path = -1;
    };
    int blocks = num_blocks(paths);
    std::vector<BlockStats> stats(static_cast<std::size_t>(blocks));

    for_each_block(blocks, [&](int b) {
        BlockRng rng(seed, /*stream=*/7, static_cast<std::uint64_t>(b));
        long lo = static_cast<long>(b) * kBlockSize;
        long hi = std::min<long>(lo + kBlockSize, paths);
        BlockStats& st = stats[static_cast<std::size_t>(b)];
        Eigen::VectorXd pi(d), dW(d), vol(d);
        for (long p = lo; p < hi; ++p) {
            double X = x0;
            double y = model.factor ? model.factor->y0 : 0.0;
            for (int k = 0; k < N; ++k) {
                for (int i = 0; i < d; ++i) dW(i) = sqdt * rng.normal();
                fn(k, X, y, pi);
                double drift = 0.0, diff = 0.0;
                if (det_coeffs) {
                    const Eigen::VectorXd& mlo = mu_lo_k[static_cast<std::size_t>(k)];
                    const Eigen::VectorXd& mhi = mu_hi_k[static_cast<std::size_t>(k)];
                    for (int i = 0; i < d; ++i)
                        drift += pi(i) > 0.0 ? pi(i) * mlo(i) : pi(i) * mhi(i);
                    vol.noalias() = sigma_k[static_cast<std::size_t>(k)].transpose() * pi;
                } else {
                    Eigen::MatrixXd s = model.sigma_at(grid, k, y);
                    Eigen::VectorXd mlo = s * model.theta_lower_at(grid, k, y);
                    Eigen::VectorXd mhi = s * model.theta_upper_at(grid, k, y);
                    for (int i = 0; i < d; ++i)
                        drift += pi(i) > 0.0 ? pi(i) * mlo(i) : pi(i) * mhi(i);
                    vol.noalias() = s.transpose() * pi;
                }
                drift += model.rate_at(grid, k) * X;
                diff = vol.dot(dW);
                X += drift * dt + diff;
                if (!std::isfinite(X)) {
                    st.bad_path = p;
                    return;
                }
                if (model.factor) {
                    const FactorProcess& f = *model.factor;
                    y += f.kappa * (f.mean - y) * dt + f.vol * dW(f.component);
                }
                double yplus = X - d_ref * disc[static_cast<std::size_t>(k + 1)];
                if (yplus > st.max_y_plus) st.max_y_plus = yplus;
            }
            if (terminal_out) (*terminal_out)[static_cast<std::size_t>(p)] = X;
            double dev = X - d_ref;
            st.sx += X;
            st.sx2 += X * X;
            st.sx3 += X * X * X;
            st.sx4 += X * X * X * X;
            st.sd2 += dev * dev;
            st.sd4 += dev * dev * dev * dev;
        }
    });

    for (const auto& st : stats)
        if (st.bad_path >= 0)
            throw NumericalError("simulate_paths: non-finite state on path " +
                                 std::to_string(st.bad_path));

    double sx = 0, sx2 = 0, sx3 = 0, sx4 = 0, sd2 = 0, sd4 = 0, myp = 0;
    for (const auto& st : stats) {
        sx += st.sx;
        sx2 += st.sx2;
        sx3 += st.sx3;
        sx4 += st.sx4;
        sd2 += st.sd2;
        sd4 += st.sd4;
        myp = std::max(myp, st.max_y_plus);
    }
    // a path can stay representable while its higher moments overflow
    if (!std::isfinite(sx) || !std::isfinite(sx2) || !std::isfinite(sx3) ||
        !std::isfinite(sx4) || !std::isfinite(sd2) || !std::isfinite(sd4))
        throw NumericalError("simulate_paths: terminal moments overflowed");
    double n = static_cast<double>(paths);
    SimulationReport rep;
    rep.paths = paths;
    rep.dt = dt;
    rep.seed = seed;
    rep.mean = sx / n;
    double m2 = sx2 / n - rep.mean * rep.mean;
    rep.variance = paths > 1 ? m2 * n / (n - 1.0) : 0.0;
    rep.se_mean = std::sqrt(std::max(m2, 0.0) / n);
    // central fourth moment from raw sums
    double m = rep.mean;
    double mu4 = sx4 / n - 4.0 * m * sx3 / n + 6.0 * m * m * sx2 / n - 3.0 * m * m * m * m;
    rep.se_variance = std::sqrt(std::max(mu4 - m2 * m2, 0.0) / n);
    rep.sq_dev = sd2 / n;
    rep.se_sq_dev = std::sqrt(std::max(sd4 / n - rep.sq_dev * rep.sq_dev, 0.0) / n);
    rep.max_y_plus = myp;
    return rep;
}

/// Simulates the controlled nonlinear wealth equation under the feedback
/// policy and reports terminal moments plus the sign-invariance diagnostic.
SimulationReport simulate_wealth(const MarketModel& model, const FeedbackPolicy& policy,
                                 double x0, const TimeGrid& grid, long paths,
                                 std::uint64_t seed,
                                 std::vector<double>* terminal_out = nullptr);

/**
 * Per-node policy gains. Deterministic models freeze pi1/pi2 per node;
 * factor models evaluate them from the regression read-outs on the fly
 * (closed form when d = 1).
 */
class PolicyGains {
public:
    PolicyGains(const FeedbackPolicy& policy);
    void gains(int k, double y, Eigen::VectorXd& pi1, Eigen::VectorXd& pi2) const;

private:
    const FeedbackPolicy& policy_;
    bool frozen_;
    std::vector<Eigen::VectorXd> pi1_k_, pi2_k_;
};

} // namespace nlmv
