#include "nlmv/duality.hpp"

#include <algorithm>
#include <cmath>

#include "nlmv/parallel.hpp"
#include "nlmv/rng.hpp"

namespace nlmv {

double dual_generator(double Z, double theta_lower, double theta_upper, double r) {
    double base = -0.5 * Z * Z - 2.0 * r;
    if (Z > theta_upper) {
        double e = theta_upper - Z;
        return e * e + base;
    }
    if (Z < theta_lower) {
        double e = theta_lower - Z;
        return e * e + base;
    }
    return base;
}

double optimal_dual_control(double Z, double theta_lower, double theta_upper) {
    return std::clamp(Z, theta_lower, theta_upper);
}

DualSolution solve_dual_bsde(const MarketModel& model, const TimeGrid& grid, long paths,
                             std::uint64_t seed, int basis_degree) {
    model.check_shape();
    if (model.dimension != 1)
        throw SchemaError("solve_dual_bsde: only available for one risky asset");

    DualSolution sol;
    sol.grid = grid;
    sol.deterministic = model.is_deterministic();
    const double dt = grid.dt();

    if (sol.deterministic) {
        // Z~ = 0 and Y~ is a backward quadrature of the generator.
        sol.y_nodes.assign(static_cast<std::size_t>(grid.num_nodes()), 0.0);
        for (int k = grid.steps - 1; k >= 0; --k) {
            double g = dual_generator(0.0, model.theta_lower[0].eval(grid, k, 0.0),
                                      model.theta_upper[0].eval(grid, k, 0.0),
                                      model.rate_at(grid, k));
            sol.y_nodes[static_cast<std::size_t>(k)] =
                sol.y_nodes[static_cast<std::size_t>(k + 1)] + dt * g;
        }
        return sol;
    }

    if (basis_degree < 0) throw SchemaError("solve_dual_bsde: negative basis degree");
    long min_paths = 10L * (basis_degree + 1) * (basis_degree + 1);
    if (paths < min_paths)
        throw SchemaError("solve_dual_bsde: paths < 10*(basis_degree+1)^2");
    sol.seed = seed;
    sol.paths = paths;
    sol.basis_degree = basis_degree;
    sol.nodes.assign(static_cast<std::size_t>(grid.num_nodes()), RegressionNode{});

    FactorEnsemble ens = simulate_factor_paths(model, grid, paths, seed);
    const bool stochastic_factor = model.factor->vol > 0.0;

    {
        RegressionNode& terminal = sol.nodes.back();
        terminal.p_coeff = Eigen::VectorXd::Zero(1); // Y~(T) = 0
        terminal.lambda_coeff = Eigen::VectorXd::Zero(1);
        std::vector<double> yT(static_cast<std::size_t>(paths));
        for (long p = 0; p < paths; ++p)
            yT[static_cast<std::size_t>(p)] = ens.state(p, grid.steps);
        PolyBasis basis(yT, 0);
        terminal.y_mean = basis.y_mean();
        terminal.y_sd = basis.y_sd();
        terminal.y_min = basis.y_min();
        terminal.y_max = basis.y_max();
    }

    std::vector<double> Y_path(static_cast<std::size_t>(paths), 0.0);
    std::vector<double> states(static_cast<std::size_t>(paths));
    std::vector<double> Z_path(static_cast<std::size_t>(paths), 0.0);
    std::vector<double> target(static_cast<std::size_t>(paths));

    for (int k = grid.steps - 1; k >= 0; --k) {
        for (long p = 0; p < paths; ++p)
            states[static_cast<std::size_t>(p)] = ens.state(p, k);
        PolyBasis basis(states, basis_degree);
        RegressionNode& node = sol.nodes[static_cast<std::size_t>(k)];
        node.y_mean = basis.y_mean();
        node.y_sd = basis.y_sd();
        node.y_min = basis.y_min();
        node.y_max = basis.y_max();

        // martingale-increment regression: Z~_k = E_k[Y~_{k+1} dW]/dt, with
        // the conditional fit of Y~_{k+1} subtracted as a control variate
        if (stochastic_factor && basis.degree() > 0) {
            Eigen::VectorXd level = basis.fit(states, Y_path);
            for (long p = 0; p < paths; ++p) {
                std::size_t i = static_cast<std::size_t>(p);
                double centered = Y_path[i] - basis.predict(level, states[i]);
                target[i] = centered * ens.incr(p, k) / dt;
            }
            node.lambda_coeff = basis.fit(states, target);
            for (long p = 0; p < paths; ++p)
                Z_path[static_cast<std::size_t>(p)] =
                    basis.predict(node.lambda_coeff, states[static_cast<std::size_t>(p)]);
        } else {
            node.lambda_coeff = Eigen::VectorXd::Zero(basis.size());
            std::fill(Z_path.begin(), Z_path.end(), 0.0);
        }

        const double r_k = model.rate_at(grid, k);
        for (long p = 0; p < paths; ++p) {
            std::size_t i = static_cast<std::size_t>(p);
            double g = dual_generator(Z_path[i],
                                      model.theta_lower[0].eval(grid, k, states[i]),
                                      model.theta_upper[0].eval(grid, k, states[i]), r_k);
            target[i] = Y_path[i] + dt * g;
        }
        node.p_coeff = basis.fit(states, target);
        for (long p = 0; p < paths; ++p) {
            std::size_t i = static_cast<std::size_t>(p);
            Y_path[i] = basis.predict(node.p_coeff, states[i]);
        }
    }
    return sol;
}

DualEval evaluate_dual(const DualSolution& sol, double t, double factor_state) {
    const TimeGrid& grid = sol.grid;
    if (t < 0.0 || t > grid.horizon * (1.0 + 1e-12))
        throw SchemaError("evaluate_dual: t outside [0, T]");

    DualEval out;
    if (sol.deterministic) {
        if (t >= grid.horizon) return out;
        int k = grid.interval_of(t);
        double w = (t - grid.node(k)) / grid.dt();
        out.Y = (1.0 - w) * sol.y_nodes[static_cast<std::size_t>(k)] +
                w * sol.y_nodes[static_cast<std::size_t>(k + 1)];
        return out;
    }

    int k = static_cast<int>(std::lround(t / grid.dt()));
    k = std::clamp(k, 0, grid.steps);
    const RegressionNode& node = sol.nodes[static_cast<std::size_t>(k)];
    out.extrapolated = factor_state < node.y_min || factor_state > node.y_max;
    auto predict = [&](const Eigen::VectorXd& coeff) {
        double z = (factor_state - node.y_mean) / node.y_sd;
        double acc = 0.0;
        for (int j = static_cast<int>(coeff.size()) - 1; j >= 0; --j)
            acc = acc * z + coeff(j);
        return acc;
    };
    out.Y = predict(node.p_coeff);
    out.Z = predict(node.lambda_coeff);
    return out;
}

double dual_multiplier(double Ytilde0, double x0, double d_star, double rho) {
    return -2.0 * std::exp(-Ytilde0) * (x0 - d_star * rho);
}

ConsistencyReport duality_consistency_check(const RiccatiSolution& sol2,
                                            const DualSolution& dual) {
    if (sol2.which != Which::H2)
        throw SchemaError("duality_consistency_check: expected the second Riccati solution");
    if (sol2.grid.steps != dual.grid.steps || sol2.grid.horizon != dual.grid.horizon)
        throw SchemaError("duality_consistency_check: grid mismatch");
    if (sol2.deterministic != dual.deterministic)
        throw SchemaError("duality_consistency_check: representation mismatch");

    ConsistencyReport rep;
    rep.threshold = sol2.deterministic ? 1e-6 : 0.02;

    const TimeGrid& grid = sol2.grid;
    for (int k = 0; k <= grid.steps; ++k) {
        double t = grid.node(k);
        std::vector<double> probes;
        if (sol2.deterministic) {
            probes.push_back(0.0);
        } else {
            const RegressionNode& node = sol2.nodes[static_cast<std::size_t>(k)];
            probes = {node.y_mean - node.y_sd, node.y_mean, node.y_mean + node.y_sd};
        }
        for (double y : probes) {
            RiccatiEval re = evaluate_solution(sol2, t, y);
            DualEval de = evaluate_dual(dual, t, y);
            ConsistencyRow row;
            row.t = t;
            row.state = y;
            row.p_residual = re.P * std::exp(de.Y) - 1.0;
            row.z_residual = re.Lambda / re.P + de.Z;
            rep.max_p_residual = std::max(rep.max_p_residual, std::abs(row.p_residual));
            rep.max_z_residual = std::max(rep.max_z_residual, std::abs(row.z_residual));
            rep.rows.push_back(row);
        }
    }
    rep.pass = rep.max_p_residual <= rep.threshold && rep.max_z_residual <= rep.threshold;
    return rep;
}

TerminalWealthReport dual_terminal_wealth_check(const MarketModel& model,
                                                const TimeGrid& grid, double x0, double K,
                                                long paths, std::uint64_t seed,
                                                const SolverOptions& opts) {
    if (model.dimension != 1)
        throw SchemaError("dual_terminal_wealth_check: only available for one risky asset");
    if (paths < 1) throw SchemaError("dual_terminal_wealth_check: paths must be >= 1");

    FeedbackPolicy policy = efficient_policy(model, grid, x0, K, opts);
    DualSolution dual = solve_dual_bsde(model, grid, opts.paths, opts.seed,
                                        opts.basis_degree);
    PolicyGains gains(policy);

    const int N = grid.steps;
    const double dt = grid.dt();
    const double sqdt = std::sqrt(dt);
    const double rho = model.discount_factor(grid, 0.0);
    const double y0 = model.factor ? model.factor->y0 : 0.0;
    const double Ytilde0 = evaluate_dual(dual, 0.0, y0).Y;
    const double d_star = policy.d_value;
    const double zeta = dual_multiplier(Ytilde0, x0, d_star, rho);

    std::vector<double> disc(static_cast<std::size_t>(N));
    std::vector<double> rate(static_cast<std::size_t>(N));
    for (int k = 0; k < N; ++k) {
        disc[static_cast<std::size_t>(k)] = model.discount_factor(grid, grid.node(k));
        rate[static_cast<std::size_t>(k)] = model.rate_at(grid, k);
    }

    struct BlockStats {
        double s_abs = 0, s_abs2 = 0;
        double s_budget = 0, s_budget2 = 0;
        double s_excess2 = 0;
        long bad_path = -1;
    };
    int blocks = num_blocks(paths);
    std::vector<BlockStats> stats(static_cast<std::size_t>(blocks));

    for_each_block(blocks, [&](int b) {
        BlockRng rng(seed, /*stream=*/11, static_cast<std::uint64_t>(b));
        long lo = static_cast<long>(b) * kBlockSize;
        long hi = std::min<long>(lo + kBlockSize, paths);
        BlockStats& st = stats[static_cast<std::size_t>(b)];
        thread_local Eigen::VectorXd pi1, pi2;
        for (long p = lo; p < hi; ++p) {
            double X = x0;
            double y = y0;
            double logN = 0.0;
            for (int k = 0; k < N; ++k) {
                double dW = sqdt * rng.normal();
                double t = grid.node(k);

                double lo_t = model.theta_lower_at(grid, k, y)(0);
                double hi_t = model.theta_upper_at(grid, k, y)(0);
                double sg = model.sigma_at(grid, k, y)(0, 0);
                double Z = evaluate_dual(dual, t, y).Z;
                double v = optimal_dual_control(Z, lo_t, hi_t);
                double r = rate[static_cast<std::size_t>(k)];
                logN += -(r + 0.5 * v * v) * dt - v * dW;

                gains.gains(k, y, pi1, pi2);
                double Y = X - d_star * disc[static_cast<std::size_t>(k)];
                double pi = Y > 0.0 ? pi1(0) * Y : (Y < 0.0 ? pi2(0) * (-Y) : 0.0);
                double drift = r * X + (pi > 0.0 ? pi * sg * lo_t : pi * sg * hi_t);
                X += drift * dt + pi * sg * dW;
                if (!std::isfinite(X) || !std::isfinite(logN)) {
                    st.bad_path = p;
                    return;
                }
                if (model.factor) {
                    const FactorProcess& f = *model.factor;
                    y += f.kappa * (f.mean - y) * dt + f.vol * dW;
                }
            }
            double Nv = std::exp(logN);
            double xi = d_star - 0.5 * zeta * Nv;
            double ad = std::abs(X - xi);
            double bu = xi * Nv;
            double ex = std::max(xi - d_star, 0.0);
            st.s_abs += ad;
            st.s_abs2 += ad * ad;
            st.s_budget += bu;
            st.s_budget2 += bu * bu;
            st.s_excess2 += ex * ex;
        }
    });

    for (const auto& st : stats)
        if (st.bad_path >= 0)
            throw NumericalError("dual_terminal_wealth_check: non-finite state on path " +
                                 std::to_string(st.bad_path));

    double s_abs = 0, s_abs2 = 0, s_budget = 0, s_budget2 = 0, s_excess2 = 0;
    for (const auto& st : stats) {
        s_abs += st.s_abs;
        s_abs2 += st.s_abs2;
        s_budget += st.s_budget;
        s_budget2 += st.s_budget2;
        s_excess2 += st.s_excess2;
    }
    double n = static_cast<double>(paths);
    TerminalWealthReport rep;
    rep.paths = paths;
    rep.dt = dt;
    rep.d_star = d_star;
    rep.zeta = zeta;
    rep.mean_abs_diff = s_abs / n;
    rep.se_abs_diff =
        std::sqrt(std::max(s_abs2 / n - rep.mean_abs_diff * rep.mean_abs_diff, 0.0) / n);
    rep.budget = s_budget / n;
    rep.budget_se =
        std::sqrt(std::max(s_budget2 / n - rep.budget * rep.budget, 0.0) / n);
    rep.excess_sq = s_excess2 / n;
    return rep;
}

} // namespace nlmv
