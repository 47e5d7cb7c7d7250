#include "nlmv/policy.hpp"

#include <cmath>

namespace nlmv {

void FeedbackPolicy::check() const {
    if (!sol1 || !sol2) throw SchemaError("FeedbackPolicy: missing Riccati solutions");
    if (sol1->which != Which::H1 || sol2->which != Which::H2)
        throw SchemaError("FeedbackPolicy: solutions tagged with the wrong Hamiltonian");
    if (sol1->grid.steps != grid.steps || sol1->grid.horizon != grid.horizon ||
        sol2->grid.steps != grid.steps || sol2->grid.horizon != grid.horizon)
        throw SchemaError("FeedbackPolicy: grid mismatch");
    model.check_shape();
    if (!std::isfinite(d_value)) throw SchemaError("FeedbackPolicy: non-finite d");
}

namespace {

// Hamiltonian minimizer at frozen (P, Lambda) and interval-k coefficients.
Eigen::VectorXd gain_at(const MarketModel& model, const TimeGrid& grid, Which which,
                        int k, double y, double P, double Lambda_scalar) {
    const int d = model.dimension;
    if (d == 1) {
        double sigma = model.sigma_at(grid, k, y)(0, 0);
        ClosedForm1d cf = closed_form_1d(which, P, Lambda_scalar,
                                         model.theta_lower_at(grid, k, y)(0),
                                         model.theta_upper_at(grid, k, y)(0), sigma);
        Eigen::VectorXd pi(1);
        pi(0) = cf.pi;
        return pi;
    }
    HamiltonianInput in;
    in.P = P;
    in.Lambda = Eigen::VectorXd::Zero(d);
    if (model.factor) in.Lambda(model.factor->component) = Lambda_scalar;
    in.sigma = model.sigma_at(grid, k, y);
    in.theta_lower = model.theta_lower_at(grid, k, y);
    in.theta_upper = model.theta_upper_at(grid, k, y);
    return eval_hamiltonian(which, in).argmin;
}

} // namespace

PolicyGains::PolicyGains(const FeedbackPolicy& policy)
    : policy_(policy), frozen_(policy.model.is_deterministic()) {
    policy.check();
    if (!frozen_) return;
    const TimeGrid& grid = policy.grid;
    pi1_k_.reserve(static_cast<std::size_t>(grid.steps));
    pi2_k_.reserve(static_cast<std::size_t>(grid.steps));
    for (int k = 0; k < grid.steps; ++k) {
        double t = grid.node(k);
        double P1 = evaluate_solution(*policy.sol1, t).P;
        double P2 = evaluate_solution(*policy.sol2, t).P;
        pi1_k_.push_back(gain_at(policy.model, grid, Which::H1, k, 0.0, P1, 0.0));
        pi2_k_.push_back(gain_at(policy.model, grid, Which::H2, k, 0.0, P2, 0.0));
    }
}

void PolicyGains::gains(int k, double y, Eigen::VectorXd& pi1, Eigen::VectorXd& pi2) const {
    if (frozen_) {
        pi1 = pi1_k_[static_cast<std::size_t>(k)];
        pi2 = pi2_k_[static_cast<std::size_t>(k)];
        return;
    }
    double t = policy_.grid.node(k);
    RiccatiEval e1 = evaluate_solution(*policy_.sol1, t, y);
    RiccatiEval e2 = evaluate_solution(*policy_.sol2, t, y);
    pi1 = gain_at(policy_.model, policy_.grid, Which::H1, k, y, e1.P, e1.Lambda);
    pi2 = gain_at(policy_.model, policy_.grid, Which::H2, k, y, e2.P, e2.Lambda);
}

PortfolioEval optimal_portfolio(const FeedbackPolicy& policy, double t, double X,
                                double factor_state) {
    policy.check();
    int k = policy.grid.interval_of(t);
    RiccatiEval e1 = evaluate_solution(*policy.sol1, t, factor_state);
    RiccatiEval e2 = evaluate_solution(*policy.sol2, t, factor_state);
    double Y = X - policy.d_value * policy.model.discount_factor(policy.grid, t);

    PortfolioEval out;
    out.extrapolated = e1.extrapolated || e2.extrapolated;
    if (Y > 0.0) {
        out.pi = gain_at(policy.model, policy.grid, Which::H1, k, factor_state, e1.P,
                         e1.Lambda) * Y;
    } else if (Y < 0.0) {
        out.pi = gain_at(policy.model, policy.grid, Which::H2, k, factor_state, e2.P,
                         e2.Lambda) * (-Y);
    } else {
        out.pi = Eigen::VectorXd::Zero(policy.model.dimension);
    }
    return out;
}

double optimal_cost(double P1_0, double P2_0, double x0, double d, double discount0) {
    double y0 = x0 - d * discount0;
    return y0 >= 0.0 ? P1_0 * y0 * y0 : P2_0 * y0 * y0;
}

SimulationReport simulate_wealth(const MarketModel& model, const FeedbackPolicy& policy,
                                 double x0, const TimeGrid& grid, long paths,
                                 std::uint64_t seed, std::vector<double>* terminal_out) {
    PolicyGains gains(policy);
    std::vector<double> disc(static_cast<std::size_t>(grid.steps));
    for (int k = 0; k < grid.steps; ++k)
        disc[static_cast<std::size_t>(k)] = model.discount_factor(grid, grid.node(k));

    auto rule = [&](int k, double X, double y, Eigen::VectorXd& pi) {
        thread_local Eigen::VectorXd pi1, pi2; // per-worker scratch
        double Y = X - policy.d_value * disc[static_cast<std::size_t>(k)];
        gains.gains(k, y, pi1, pi2);
        if (Y > 0.0)
            pi = pi1 * Y;
        else if (Y < 0.0)
            pi = pi2 * (-Y);
        else
            pi.setZero(pi1.size());
    };
    return simulate_paths(model, grid, x0, paths, seed, policy.d_value, rule, terminal_out);
}

} // namespace nlmv
