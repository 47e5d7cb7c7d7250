#include "nlmv/riccati.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "nlmv/lsmc.hpp"

namespace nlmv {

namespace {

/// Hamiltonian value at grid node k, state y, with the factor-component
/// martingale integrand lambda (all other components zero).
double ham_value(const MarketModel& model, Which which, const TimeGrid& grid, int k,
                 double y, double P, double lambda) {
    if (model.dimension == 1) {
        double lo = model.theta_lower[0].eval(grid, k, y);
        double hi = model.theta_upper[0].eval(grid, k, y);
        double sg = model.sigma[0].eval(grid, k, y);
        return closed_form_1d(which, P, lambda, lo, hi, sg).value;
    }
    HamiltonianInput in;
    in.P = P;
    in.Lambda = Eigen::VectorXd::Zero(model.dimension);
    if (model.factor) in.Lambda(model.factor->component) = lambda;
    in.sigma = model.sigma_at(grid, k, y);
    in.theta_lower = model.theta_lower_at(grid, k, y);
    in.theta_upper = model.theta_upper_at(grid, k, y);
    return eval_hamiltonian(which, in).value;
}

std::vector<double> upper_bound_nodes(const MarketModel& model, const TimeGrid& grid) {
    std::vector<double> upper(static_cast<std::size_t>(grid.num_nodes()));
    for (int k = 0; k <= grid.steps; ++k)
        upper[static_cast<std::size_t>(k)] =
            std::exp(2.0 * model.integral_rate(grid, grid.node(k), grid.horizon));
    return upper;
}

} // namespace

double positivity_floor(const MarketModel& model, const TimeGrid& grid,
                        const std::vector<double>& probe_states) {
    model.check_shape();
    std::vector<double> states = probe_states.empty() ? default_probe_states(model)
                                                      : probe_states;
    double c = 0.0;
    for (int k = 0; k < grid.steps; ++k) {
        c = std::max(c, 2.0 * model.rate_at(grid, k));
        for (double y : states) {
            Eigen::MatrixXd sg = model.sigma_at(grid, k, y);
            Eigen::LDLT<Eigen::MatrixXd> S_ldlt(sg * sg.transpose());
            Eigen::VectorXd mu_lo = sg * model.theta_lower_at(grid, k, y);
            Eigen::VectorXd mu_hi = sg * model.theta_upper_at(grid, k, y);
            for (std::uint32_t I = 0; I < (1u << model.dimension); ++I) {
                Eigen::VectorXd mu_I(model.dimension);
                for (int i = 0; i < model.dimension; ++i)
                    mu_I(i) = (I & (1u << i)) ? mu_lo(i) : mu_hi(i);
                c = std::max(c, mu_I.dot(S_ldlt.solve(mu_I)));
            }
        }
    }
    double int_2r = 2.0 * model.integral_rate(grid, 0.0, grid.horizon);
    return std::exp(int_2r - c * grid.horizon);
}

RiccatiSolution solve_riccati_ode(const MarketModel& model, Which which,
                                  const TimeGrid& grid) {
    model.check_shape();
    if (model.factor)
        throw SchemaError("solve_riccati_ode: model has a factor process; use the LSMC solver");

    RiccatiSolution sol;
    sol.which = which;
    sol.grid = grid;
    sol.deterministic = true;
    sol.floor_c1 = positivity_floor(model, grid);
    sol.upper_nodes = upper_bound_nodes(model, grid);
    sol.p_nodes.assign(static_cast<std::size_t>(grid.num_nodes()), 0.0);
    sol.p_nodes.back() = 1.0;

    const double h = -grid.dt(); // backward step
    for (int k = grid.steps - 1; k >= 0; --k) {
        // coefficients are constant on interval k
        auto rhs = [&](double P) {
            if (P <= 0.0)
                throw NumericalError("solve_riccati_ode: stage produced P <= 0 (grid too coarse)");
            double r = model.rate_at(grid, k);
            return -(2.0 * r * P + ham_value(model, which, grid, k, 0.0, P, 0.0));
        };
        double P = sol.p_nodes[static_cast<std::size_t>(k + 1)];
        double k1 = rhs(P);
        double k2 = rhs(P + 0.5 * h * k1);
        double k3 = rhs(P + 0.5 * h * k2);
        double k4 = rhs(P + h * k3);
        double Pk = P + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (Pk <= 0.0)
            throw NumericalError("solve_riccati_ode: step produced P <= 0 (grid too coarse)");
        sol.p_nodes[static_cast<std::size_t>(k)] = Pk;
    }

    // certified corridor, with a whisker for RK4 truncation error
    for (int k = 0; k <= grid.steps; ++k) {
        double P = sol.p_nodes[static_cast<std::size_t>(k)];
        double hi = sol.upper_nodes[static_cast<std::size_t>(k)];
        if (P < sol.floor_c1 * (1.0 - 1e-9) || P > hi * (1.0 + 1e-9))
            throw NumericalError("solve_riccati_ode: solution left the certified bounds");
    }
    return sol;
}

RiccatiSolution solve_riccati_lsmc(const MarketModel& model, Which which,
                                   const TimeGrid& grid, long paths, int basis_degree,
                                   std::uint64_t seed) {
    model.check_shape();
    if (!model.factor)
        throw SchemaError("solve_riccati_lsmc: model has no factor process; use the ODE solver");
    if (basis_degree < 0) throw SchemaError("solve_riccati_lsmc: negative basis degree");
    long min_paths = 10L * (basis_degree + 1) * (basis_degree + 1);
    if (paths < min_paths)
        throw SchemaError("solve_riccati_lsmc: paths < 10*(basis_degree+1)^2");

    RiccatiSolution sol;
    sol.which = which;
    sol.grid = grid;
    sol.deterministic = false;
    sol.floor_c1 = positivity_floor(model, grid);
    sol.upper_nodes = upper_bound_nodes(model, grid);
    sol.seed = seed;
    sol.paths = paths;
    sol.basis_degree = basis_degree;
    sol.nodes.assign(static_cast<std::size_t>(grid.num_nodes()), RegressionNode{});

    const double tau = RiccatiSolution::kClampSlack;
    const double dt = grid.dt();
    const bool stochastic_factor = model.factor->vol > 0.0;

    FactorEnsemble ens = simulate_factor_paths(model, grid, paths, seed);

    // terminal node: P = 1, Lambda = 0
    {
        RegressionNode& terminal = sol.nodes.back();
        terminal.p_coeff = Eigen::VectorXd::Constant(1, 1.0);
        terminal.lambda_coeff = Eigen::VectorXd::Zero(1);
        std::vector<double> yT(static_cast<std::size_t>(paths));
        for (long p = 0; p < paths; ++p) yT[static_cast<std::size_t>(p)] = ens.state(p, grid.steps);
        PolyBasis basis(yT, 0);
        terminal.y_mean = basis.y_mean();
        terminal.y_sd = basis.y_sd();
        terminal.y_min = basis.y_min();
        terminal.y_max = basis.y_max();
    }

    std::vector<double> P_path(static_cast<std::size_t>(paths), 1.0);
    std::vector<double> states(static_cast<std::size_t>(paths));
    std::vector<double> lambda_path(static_cast<std::size_t>(paths), 0.0);
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

        // martingale-increment regression for the factor-component Lambda;
        // subtracting the conditional fit of P_{k+1} leaves the estimator
        // unbiased (predictable-times-increment has mean zero) while removing
        // the O(1/sqrt(dt)) noise of the raw product
        if (stochastic_factor && basis.degree() > 0) {
            Eigen::VectorXd level = basis.fit(states, P_path);
            for (long p = 0; p < paths; ++p) {
                std::size_t i = static_cast<std::size_t>(p);
                double centered = P_path[i] - basis.predict(level, states[i]);
                target[i] = centered * ens.incr(p, k) / dt;
            }
            node.lambda_coeff = basis.fit(states, target);
            for (long p = 0; p < paths; ++p)
                lambda_path[static_cast<std::size_t>(p)] =
                    basis.predict(node.lambda_coeff, states[static_cast<std::size_t>(p)]);
        } else {
            node.lambda_coeff = Eigen::VectorXd::Zero(basis.size());
            std::fill(lambda_path.begin(), lambda_path.end(), 0.0);
        }

        const double r_k = model.rate_at(grid, k);
        const double lo_clamp = sol.floor_c1 * (1.0 - tau);
        const double hi_clamp = sol.upper_nodes[static_cast<std::size_t>(k)] * (1.0 + tau);

        // explicit pass: driver at the k+1 values
        for (long p = 0; p < paths; ++p) {
            std::size_t i = static_cast<std::size_t>(p);
            double Pn = P_path[i];
            double H = ham_value(model, which, grid, k, states[i], Pn, lambda_path[i]);
            target[i] = Pn + dt * (2.0 * r_k * Pn + H);
        }
        Eigen::VectorXd coeff = basis.fit(states, target);

        // one fixed-point pass: re-evaluate the driver at the fitted P_k
        for (long p = 0; p < paths; ++p) {
            std::size_t i = static_cast<std::size_t>(p);
            double Pk = std::clamp(basis.predict(coeff, states[i]), lo_clamp, hi_clamp);
            double H = ham_value(model, which, grid, k, states[i], Pk, lambda_path[i]);
            target[i] = P_path[i] + dt * (2.0 * r_k * Pk + H);
        }
        node.p_coeff = basis.fit(states, target);

        for (long p = 0; p < paths; ++p) {
            std::size_t i = static_cast<std::size_t>(p);
            double Pk = basis.predict(node.p_coeff, states[i]);
            if (Pk < lo_clamp || Pk > hi_clamp) {
                ++sol.clamp_events;
                Pk = std::clamp(Pk, lo_clamp, hi_clamp);
            }
            P_path[i] = Pk;
        }
    }

    sol.clamp_fraction = static_cast<double>(sol.clamp_events) /
                         (static_cast<double>(paths) * grid.steps);
    if (sol.clamp_fraction > 0.05)
        throw NumericalError("solve_riccati_lsmc: clamping fraction above 5% "
                             "(basis or path count inadequate)");
    return sol;
}

RiccatiEval evaluate_solution(const RiccatiSolution& sol, double t, double factor_state) {
    const TimeGrid& grid = sol.grid;
    if (t < 0.0 || t > grid.horizon * (1.0 + 1e-12))
        throw SchemaError("evaluate_solution: t outside [0, T]");

    RiccatiEval out;
    if (sol.deterministic) {
        if (t >= grid.horizon) {
            out.P = 1.0;
            return out;
        }
        int k = grid.interval_of(t);
        double w = (t - grid.node(k)) / grid.dt();
        out.P = (1.0 - w) * sol.p_nodes[static_cast<std::size_t>(k)] +
                w * sol.p_nodes[static_cast<std::size_t>(k + 1)];
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
    const double tau = RiccatiSolution::kClampSlack;
    double lo = sol.floor_c1 * (1.0 - tau);
    double hi = sol.upper_nodes[static_cast<std::size_t>(k)] * (1.0 + tau);
    out.P = std::clamp(predict(node.p_coeff), lo, hi);
    out.Lambda = predict(node.lambda_coeff);
    return out;
}

nlohmann::json riccati_to_json(const RiccatiSolution& sol) {
    nlohmann::json j;
    j["which"] = sol.which == Which::H1 ? 1 : 2;
    j["grid"] = {{"horizon", sol.grid.horizon}, {"steps", sol.grid.steps}};
    j["deterministic"] = sol.deterministic;
    j["floor_c1"] = sol.floor_c1;
    j["upper_nodes"] = sol.upper_nodes;
    if (sol.deterministic) {
        j["p_nodes"] = sol.p_nodes;
    } else {
        j["seed"] = sol.seed;
        j["paths"] = sol.paths;
        j["basis_degree"] = sol.basis_degree;
        j["clamp_events"] = sol.clamp_events;
        j["clamp_fraction"] = sol.clamp_fraction;
        nlohmann::json nodes = nlohmann::json::array();
        for (const auto& n : sol.nodes) {
            nlohmann::json jn;
            jn["p_coeff"] = std::vector<double>(n.p_coeff.data(),
                                                n.p_coeff.data() + n.p_coeff.size());
            jn["lambda_coeff"] = std::vector<double>(
                n.lambda_coeff.data(), n.lambda_coeff.data() + n.lambda_coeff.size());
            jn["y_mean"] = n.y_mean;
            jn["y_sd"] = n.y_sd;
            jn["y_min"] = n.y_min;
            jn["y_max"] = n.y_max;
            nodes.push_back(std::move(jn));
        }
        j["nodes"] = std::move(nodes);
    }
    return j;
}

RiccatiSolution riccati_from_json(const nlohmann::json& j) {
    RiccatiSolution sol;
    try {
        sol.which = j.at("which").get<int>() == 1 ? Which::H1 : Which::H2;
        sol.grid = TimeGrid(j.at("grid").at("horizon").get<double>(),
                            j.at("grid").at("steps").get<int>());
        sol.deterministic = j.at("deterministic").get<bool>();
        sol.floor_c1 = j.at("floor_c1").get<double>();
        sol.upper_nodes = j.at("upper_nodes").get<std::vector<double>>();
        if (sol.deterministic) {
            sol.p_nodes = j.at("p_nodes").get<std::vector<double>>();
            if (static_cast<int>(sol.p_nodes.size()) != sol.grid.num_nodes())
                throw SchemaError("riccati_from_json: p_nodes length mismatch");
        } else {
            sol.seed = j.at("seed").get<std::uint64_t>();
            sol.paths = j.at("paths").get<long>();
            sol.basis_degree = j.at("basis_degree").get<int>();
            sol.clamp_events = j.value("clamp_events", 0L);
            sol.clamp_fraction = j.value("clamp_fraction", 0.0);
            for (const auto& jn : j.at("nodes")) {
                RegressionNode n;
                auto pc = jn.at("p_coeff").get<std::vector<double>>();
                auto lc = jn.at("lambda_coeff").get<std::vector<double>>();
                n.p_coeff = Eigen::Map<Eigen::VectorXd>(pc.data(),
                                                        static_cast<long>(pc.size()));
                n.lambda_coeff = Eigen::Map<Eigen::VectorXd>(lc.data(),
                                                             static_cast<long>(lc.size()));
                n.y_mean = jn.at("y_mean").get<double>();
                n.y_sd = jn.at("y_sd").get<double>();
                n.y_min = jn.at("y_min").get<double>();
                n.y_max = jn.at("y_max").get<double>();
                sol.nodes.push_back(std::move(n));
            }
            if (static_cast<int>(sol.nodes.size()) != sol.grid.num_nodes())
                throw SchemaError("riccati_from_json: nodes length mismatch");
        }
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("riccati_from_json: ") + e.what());
    }
    return sol;
}

} // namespace nlmv
