#include "nlmv/frontier.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>
#include <string>

#include "nlmv/lsmc.hpp"

namespace nlmv {

namespace {

void append_num(std::string& s, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g;", v);
    s += buf;
}

void append_coeff(std::string& s, const CoefficientSpec& c) {
    s += std::to_string(static_cast<int>(c.kind()));
    s += ':';
    switch (c.kind()) {
    case CoefficientSpec::Kind::Constant:
        append_num(s, c.constant_value());
        break;
    case CoefficientSpec::Kind::Piecewise:
    case CoefficientSpec::Kind::Poly:
        for (double v : c.table()) append_num(s, v);
        break;
    case CoefficientSpec::Kind::Tanh:
        for (int i = 0; i < 4; ++i) append_num(s, c.tanh_params()[i]);
        break;
    }
    s += '|';
}

std::string cache_key(const MarketModel& model, const TimeGrid& grid,
                      const SolverOptions& opts) {
    std::string key;
    key += std::to_string(model.dimension) + "|";
    append_num(key, grid.horizon);
    key += std::to_string(grid.steps) + "|";
    append_coeff(key, model.rate);
    for (const auto& c : model.theta_lower) append_coeff(key, c);
    for (const auto& c : model.theta_upper) append_coeff(key, c);
    for (const auto& c : model.sigma) append_coeff(key, c);
    if (model.factor) {
        append_num(key, model.factor->kappa);
        append_num(key, model.factor->mean);
        append_num(key, model.factor->vol);
        append_num(key, model.factor->y0);
        key += std::to_string(model.factor->component) + "|";
        key += std::to_string(opts.paths) + "," + std::to_string(opts.basis_degree) +
               "," + std::to_string(opts.seed);
    }
    return key;
}

std::mutex cache_mutex;
std::map<std::string, RiccatiPair>& cache() {
    static std::map<std::string, RiccatiPair> c;
    return c;
}

// Exact integral of e^{int_t^T r} over grid interval k (r piecewise constant).
double growth_weight(const MarketModel& model, const TimeGrid& grid, int k) {
    double dt = grid.dt();
    double tail = 1.0 / model.discount_factor(grid, grid.node(k + 1)); // e^{int_{t_{k+1}}^T r}
    double r = model.rate_at(grid, k);
    if (std::abs(r) < 1e-14) return dt * tail;
    return tail * (std::exp(r * dt) - 1.0) / r;
}

} // namespace

RiccatiPair solve_riccati_pair(const MarketModel& model, const TimeGrid& grid,
                               const SolverOptions& opts) {
    std::string key = cache_key(model, grid, opts);
    {
        std::lock_guard<std::mutex> lock(cache_mutex);
        auto it = cache().find(key);
        if (it != cache().end()) return it->second;
    }
    RiccatiPair pair;
    if (model.is_deterministic()) {
        pair.sol1 = std::make_shared<RiccatiSolution>(
            solve_riccati_ode(model, Which::H1, grid));
        pair.sol2 = std::make_shared<RiccatiSolution>(
            solve_riccati_ode(model, Which::H2, grid));
    } else {
        pair.sol1 = std::make_shared<RiccatiSolution>(
            solve_riccati_lsmc(model, Which::H1, grid, opts.paths, opts.basis_degree,
                               opts.seed));
        pair.sol2 = std::make_shared<RiccatiSolution>(
            solve_riccati_lsmc(model, Which::H2, grid, opts.paths, opts.basis_degree,
                               opts.seed));
    }
    std::lock_guard<std::mutex> lock(cache_mutex);
    cache().emplace(key, pair);
    return pair;
}

double lagrange_multiplier(double P2_0, double x0, double K, double rho) {
    if (!(P2_0 > 0.0) || !(rho > 0.0))
        throw SchemaError("lagrange_multiplier: P2(0) and rho must be positive");
    double denom = P2_0 * rho * rho - 1.0;
    if (denom >= -1e-12)
        throw InfeasibleError("lagrange_multiplier: degenerate dual (P2(0) rho^2 >= 1)");
    if (K < x0 / rho - 1e-12 * std::max(1.0, std::abs(x0 / rho)))
        throw InfeasibleError("lagrange_multiplier: target below the riskless return");
    return (x0 * P2_0 * rho - K) / denom;
}

double frontier_variance(double P2_0, double x0, double K, double rho) {
    double p = P2_0 * rho * rho;
    if (p >= 1.0 - 1e-12)
        throw InfeasibleError("frontier_variance: degenerate dual (P2(0) rho^2 >= 1)");
    double gap = K - x0 / rho; // x0 / rho = x0 e^{int r}
    return p / (1.0 - p) * gap * gap;
}

FeedbackPolicy efficient_policy(const MarketModel& model, const TimeGrid& grid, double x0,
                                double K, const SolverOptions& opts) {
    model.check_shape();
    RiccatiPair pair = solve_riccati_pair(model, grid, opts);
    double rho = model.discount_factor(grid, 0.0);
    double P2_0 = evaluate_solution(*pair.sol2, 0.0,
                                    model.factor ? model.factor->y0 : 0.0).P;
    FeedbackPolicy policy;
    policy.d_value = lagrange_multiplier(P2_0, x0, K, rho);
    policy.sol1 = pair.sol1;
    policy.sol2 = pair.sol2;
    policy.model = model;
    policy.grid = grid;
    return policy;
}

std::vector<FrontierPoint> frontier_curve(const MarketModel& model, const TimeGrid& grid,
                                          double x0, const std::vector<double>& targets,
                                          const SolverOptions& opts) {
    model.check_shape();
    RiccatiPair pair = solve_riccati_pair(model, grid, opts);
    double rho = model.discount_factor(grid, 0.0);
    double P2_0 = evaluate_solution(*pair.sol2, 0.0,
                                    model.factor ? model.factor->y0 : 0.0).P;
    std::vector<FrontierPoint> out;
    out.reserve(targets.size());
    for (double K : targets) {
        FrontierPoint pt;
        pt.K = K;
        pt.d_star = lagrange_multiplier(P2_0, x0, K, rho);
        pt.variance = frontier_variance(P2_0, x0, K, rho);
        pt.std_dev = std::sqrt(pt.variance);
        out.push_back(pt);
    }
    return out;
}

FeasibleStrategy feasible_strategy(const MarketModel& model, const TimeGrid& grid,
                                   double x0, double K, int mc_paths, std::uint64_t seed) {
    model.check_shape();
    const int d = model.dimension;
    const int N = grid.steps;
    const double dt = grid.dt();
    const double growth = model.riskless_growth(grid);
    if (K < x0 * growth - 1e-12 * std::max(1.0, std::abs(x0 * growth)))
        throw InfeasibleError("feasible_strategy: target below the riskless return");

    // Per-coordinate mass of positive long premium / negative short premium,
    // and the matching exactly-discounted denominators for beta.
    std::vector<double> long_mass(static_cast<std::size_t>(d), 0.0);
    std::vector<double> short_mass(static_cast<std::size_t>(d), 0.0);
    std::vector<double> long_denom(static_cast<std::size_t>(d), 0.0);
    std::vector<double> short_denom(static_cast<std::size_t>(d), 0.0);

    auto accumulate = [&](int k, double y, double weight_mass, double weight_denom) {
        Eigen::MatrixXd s = model.sigma_at(grid, k, y);
        Eigen::VectorXd mu_lo = s * model.theta_lower_at(grid, k, y);
        Eigen::VectorXd mu_hi = s * model.theta_upper_at(grid, k, y);
        for (int i = 0; i < d; ++i) {
            if (mu_lo(i) > 0.0) {
                long_mass[static_cast<std::size_t>(i)] += mu_lo(i) * weight_mass;
                long_denom[static_cast<std::size_t>(i)] +=
                    mu_lo(i) * mu_lo(i) * weight_denom;
            }
            if (mu_hi(i) < 0.0) {
                short_mass[static_cast<std::size_t>(i)] += -mu_hi(i) * weight_mass;
                short_denom[static_cast<std::size_t>(i)] +=
                    mu_hi(i) * mu_hi(i) * weight_denom;
            }
        }
    };

    if (model.is_deterministic()) {
        for (int k = 0; k < N; ++k) accumulate(k, 0.0, dt, growth_weight(model, grid, k));
    } else {
        if (mc_paths < 1)
            throw SchemaError("feasible_strategy: mc_paths must be >= 1 for factor models");
        FactorEnsemble ens = simulate_factor_paths(model, grid, mc_paths, seed);
        double inv = 1.0 / static_cast<double>(mc_paths);
        for (long p = 0; p < ens.paths; ++p)
            for (int k = 0; k < N; ++k)
                accumulate(k, ens.state(p, k), dt * inv,
                           growth_weight(model, grid, k) * inv);
    }

    FeasibleStrategy strat;
    double best = 0.0;
    for (int i = 0; i < d; ++i) {
        if (long_mass[static_cast<std::size_t>(i)] > best) {
            best = long_mass[static_cast<std::size_t>(i)];
            strat.coordinate = i;
            strat.short_side = false;
        }
        if (short_mass[static_cast<std::size_t>(i)] > best) {
            best = short_mass[static_cast<std::size_t>(i)];
            strat.coordinate = i;
            strat.short_side = true;
        }
    }
    if (!(best > 0.0))
        throw InfeasibleError("feasible_strategy: no coordinate carries positive premium");

    double denom = strat.short_side ? short_denom[static_cast<std::size_t>(strat.coordinate)]
                                    : long_denom[static_cast<std::size_t>(strat.coordinate)];
    if (!(denom > 0.0))
        throw InfeasibleError("feasible_strategy: degenerate premium denominator");
    strat.beta = (K - x0 * growth) / denom;
    return strat;
}

Eigen::VectorXd feasible_strategy_portfolio(const MarketModel& model, const TimeGrid& grid,
                                            const FeasibleStrategy& strat, int k, double y) {
    Eigen::VectorXd pi = Eigen::VectorXd::Zero(model.dimension);
    Eigen::MatrixXd s = model.sigma_at(grid, k, y);
    int i = strat.coordinate;
    if (strat.short_side) {
        double mu_hi = (s * model.theta_upper_at(grid, k, y))(i);
        if (mu_hi < 0.0) pi(i) = strat.beta * mu_hi;
    } else {
        double mu_lo = (s * model.theta_lower_at(grid, k, y))(i);
        if (mu_lo > 0.0) pi(i) = strat.beta * mu_lo;
    }
    return pi;
}

} // namespace nlmv
