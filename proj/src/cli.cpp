#include "nlmv/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "nlmv/duality.hpp"
#include "nlmv/policy.hpp"
#include "nlmv/riccati.hpp"

namespace nlmv {

namespace {

using nlohmann::json;

std::string fmt12(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw SchemaError("cannot open output file: " + path.string());
    out << text;
    if (!out) throw SchemaError("cannot write output file: " + path.string());
}

void write_json(const std::filesystem::path& path, const json& j) {
    write_text(path, j.dump(2) + "\n");
}

std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

} // namespace

std::uint64_t fnv1a_hash(const std::string& data) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

CoefficientSpec coefficient_from_json(const json& j) {
    if (j.is_number()) return CoefficientSpec::constant(j.get<double>());
    if (!j.is_object() || !j.contains("kind"))
        throw SchemaError("coefficient: expected a number or an object with \"kind\"");
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "constant") return CoefficientSpec::constant(j.at("value").get<double>());
    if (kind == "piecewise")
        return CoefficientSpec::piecewise(j.at("values").get<std::vector<double>>());
    if (kind == "poly")
        return CoefficientSpec::poly(j.at("coeffs").get<std::vector<double>>());
    if (kind == "tanh")
        return CoefficientSpec::tanh_map(j.at("a").get<double>(), j.at("b").get<double>(),
                                         j.at("c").get<double>(), j.value("e", 0.0));
    throw SchemaError("coefficient: unknown kind \"" + kind + "\"");
}

json coefficient_to_json(const CoefficientSpec& c) {
    switch (c.kind()) {
    case CoefficientSpec::Kind::Constant:
        return json(c.constant_value());
    case CoefficientSpec::Kind::Piecewise:
        return json{{"kind", "piecewise"}, {"values", c.table()}};
    case CoefficientSpec::Kind::Poly:
        return json{{"kind", "poly"}, {"coeffs", c.table()}};
    case CoefficientSpec::Kind::Tanh:
        return json{{"kind", "tanh"},
                    {"a", c.tanh_params()[0]},
                    {"b", c.tanh_params()[1]},
                    {"c", c.tanh_params()[2]},
                    {"e", c.tanh_params()[3]}};
    }
    throw SchemaError("coefficient: unknown kind");
}

MarketModel model_from_json(const json& j) {
    MarketModel m;
    try {
        m.dimension = j.at("dimension").get<int>();
        m.epsilon = j.value("epsilon", 1e-8);
        m.rate = coefficient_from_json(j.at("rate"));
        for (const auto& c : j.at("theta_lower"))
            m.theta_lower.push_back(coefficient_from_json(c));
        for (const auto& c : j.at("theta_upper"))
            m.theta_upper.push_back(coefficient_from_json(c));
        for (const auto& row : j.at("sigma")) {
            if (!row.is_array())
                throw SchemaError("model: sigma must be an array of rows");
            for (const auto& c : row) m.sigma.push_back(coefficient_from_json(c));
        }
        if (j.contains("factor")) {
            const json& f = j.at("factor");
            FactorProcess fp;
            fp.kappa = f.at("kappa").get<double>();
            fp.mean = f.at("mean").get<double>();
            fp.vol = f.at("vol").get<double>();
            fp.y0 = f.at("y0").get<double>();
            fp.component = f.value("component", 0);
            m.factor = fp;
        }
    } catch (const json::exception& e) {
        throw SchemaError(std::string("model: ") + e.what());
    }
    m.check_shape();
    return m;
}

json model_to_json(const MarketModel& model) {
    json j;
    j["dimension"] = model.dimension;
    j["epsilon"] = model.epsilon;
    j["rate"] = coefficient_to_json(model.rate);
    json lo = json::array(), hi = json::array();
    for (const auto& c : model.theta_lower) lo.push_back(coefficient_to_json(c));
    for (const auto& c : model.theta_upper) hi.push_back(coefficient_to_json(c));
    j["theta_lower"] = std::move(lo);
    j["theta_upper"] = std::move(hi);
    json sigma = json::array();
    for (int r = 0; r < model.dimension; ++r) {
        json row = json::array();
        for (int c = 0; c < model.dimension; ++c)
            row.push_back(coefficient_to_json(
                model.sigma[static_cast<std::size_t>(r * model.dimension + c)]));
        sigma.push_back(std::move(row));
    }
    j["sigma"] = std::move(sigma);
    if (model.factor) {
        j["factor"] = json{{"kappa", model.factor->kappa},
                           {"mean", model.factor->mean},
                           {"vol", model.factor->vol},
                           {"y0", model.factor->y0},
                           {"component", model.factor->component}};
    }
    return j;
}

RunConfig parse_config(const json& j) {
    RunConfig cfg;
    try {
        cfg.model = model_from_json(j.at("model"));
        cfg.grid = TimeGrid(j.at("grid").at("horizon").get<double>(),
                            j.at("grid").at("steps").get<int>());
        cfg.task = j.value("task", "");
        cfg.x0 = j.value("x0", 1.0);
        cfg.target = j.value("target", 0.0);
        if (j.contains("targets")) cfg.targets = j.at("targets").get<std::vector<double>>();
        if (j.contains("numerics")) {
            const json& n = j.at("numerics");
            cfg.paths = n.value("paths", cfg.paths);
            cfg.mc_paths = n.value("mc_paths", cfg.mc_paths);
            cfg.basis_degree = n.value("basis_degree", cfg.basis_degree);
            cfg.seed = n.value("seed", cfg.seed);
        }
        if (j.contains("output")) {
            const json& o = j.at("output");
            cfg.out_dir = o.value("dir", cfg.out_dir);
            cfg.terminal_csv = o.value("terminal_csv", cfg.terminal_csv);
        }
    } catch (const json::exception& e) {
        throw SchemaError(std::string("config: ") + e.what());
    }
    // the output destination must not perturb the run identity: the same
    // config written to two directories has to produce identical reports
    json hashed = j;
    if (hashed.contains("output")) hashed["output"].erase("dir");
    cfg.config_hash = fnv1a_hash(hashed.dump());
    cfg.model_hash = fnv1a_hash(model_to_json(cfg.model).dump());
    return cfg;
}

std::string render_frontier_csv(const std::vector<FrontierPoint>& points) {
    if (points.empty()) throw SchemaError("render_frontier_csv: empty point list");
    std::string csv = "K,d_star,variance,std_dev\n";
    for (const auto& pt : points) {
        csv += fmt12(pt.K) + "," + fmt12(pt.d_star) + "," + fmt12(pt.variance) + "," +
               fmt12(pt.std_dev) + "\n";
    }
    return csv;
}

namespace {

SolverOptions solver_options(const RunConfig& cfg) {
    SolverOptions opts;
    opts.paths = cfg.paths;
    opts.basis_degree = cfg.basis_degree;
    opts.seed = cfg.seed;
    return opts;
}

json violations_json(const ValidationReport& rep) {
    json arr = json::array();
    for (const auto& v : rep.violations)
        arr.push_back(json{{"what", v.what}, {"t", v.t}, {"state", v.state},
                           {"index", v.index}});
    return arr;
}

int dispatch(const RunConfig& cfg, const std::filesystem::path& out_dir, json& result) {
    ValidationReport validation =
        validate_model(cfg.model, cfg.grid, default_probe_states(cfg.model));
    result["valid"] = validation.valid();
    if (!validation.valid()) {
        result["violations"] = violations_json(validation);
        result["reason"] = "model invariants violated";
        return kValidationFailure;
    }
    if (cfg.task == "validate") return kOk;

    if (cfg.task == "feasibility") {
        FeasibilityResult fr = check_feasibility(cfg.model, cfg.grid, cfg.mc_paths, cfg.seed);
        result["feasible"] = fr.feasible;
        result["lhs_long"] = fr.lhs_long;
        result["lhs_short"] = fr.lhs_short;
        result["tol"] = fr.tol;
        if (!fr.feasible) {
            result["reason"] = "infeasible model";
            return kInfeasible;
        }
        return kOk;
    }

    if (cfg.task == "riccati") {
        RiccatiPair pair = solve_riccati_pair(cfg.model, cfg.grid, solver_options(cfg));
        write_json(out_dir / "riccati1.json", riccati_to_json(*pair.sol1));
        write_json(out_dir / "riccati2.json", riccati_to_json(*pair.sol2));
        double y0 = cfg.model.factor ? cfg.model.factor->y0 : 0.0;
        result["P1_0"] = evaluate_solution(*pair.sol1, 0.0, y0).P;
        result["P2_0"] = evaluate_solution(*pair.sol2, 0.0, y0).P;
        result["floor_c1"] = pair.sol1->floor_c1;
        return kOk;
    }

    if (cfg.task == "frontier") {
        if (cfg.targets.empty())
            throw SchemaError("frontier task requires a nonempty \"targets\" list");
        std::vector<FrontierPoint> points =
            frontier_curve(cfg.model, cfg.grid, cfg.x0, cfg.targets, solver_options(cfg));
        write_text(out_dir / "frontier.csv", render_frontier_csv(points));
        json rows = json::array();
        for (const auto& pt : points)
            rows.push_back(json{{"K", pt.K}, {"d_star", pt.d_star},
                                {"variance", pt.variance}, {"std_dev", pt.std_dev}});
        result["points"] = std::move(rows);
        return kOk;
    }

    if (cfg.task == "simulate") {
        FeedbackPolicy policy =
            efficient_policy(cfg.model, cfg.grid, cfg.x0, cfg.target, solver_options(cfg));
        std::vector<double> terminal;
        SimulationReport rep =
            simulate_wealth(cfg.model, policy, cfg.x0, cfg.grid, cfg.paths, cfg.seed,
                            cfg.terminal_csv ? &terminal : nullptr);
        result["d_star"] = policy.d_value;
        result["mean"] = rep.mean;
        result["variance"] = rep.variance;
        result["se_mean"] = rep.se_mean;
        result["se_variance"] = rep.se_variance;
        result["sq_dev"] = rep.sq_dev;
        result["max_y_plus"] = rep.max_y_plus;
        result["paths"] = rep.paths;
        result["dt"] = rep.dt;
        if (cfg.terminal_csv) {
            std::string csv = "path_id,X_T\n";
            for (std::size_t p = 0; p < terminal.size(); ++p)
                csv += std::to_string(p) + "," + fmt12(terminal[p]) + "\n";
            write_text(out_dir / "terminal.csv", csv);
        }
        return kOk;
    }

    if (cfg.task == "duality-check") {
        RiccatiPair pair = solve_riccati_pair(cfg.model, cfg.grid, solver_options(cfg));
        DualSolution dual =
            solve_dual_bsde(cfg.model, cfg.grid, cfg.paths, cfg.seed, cfg.basis_degree);
        ConsistencyReport cons = duality_consistency_check(*pair.sol2, dual);
        std::string csv = "t,P2_times_expY_minus_1,lambda_ratio_plus_Z\n";
        for (const auto& row : cons.rows)
            csv += fmt12(row.t) + "," + fmt12(row.p_residual) + "," +
                   fmt12(row.z_residual) + "\n";
        write_text(out_dir / "residuals.csv", csv);
        result["max_p_residual"] = cons.max_p_residual;
        result["max_z_residual"] = cons.max_z_residual;
        result["threshold"] = cons.threshold;
        result["consistency_pass"] = cons.pass;
        TerminalWealthReport tw = dual_terminal_wealth_check(
            cfg.model, cfg.grid, cfg.x0, cfg.target, cfg.paths, cfg.seed,
            solver_options(cfg));
        result["d_star"] = tw.d_star;
        result["zeta"] = tw.zeta;
        result["mean_abs_diff"] = tw.mean_abs_diff;
        result["budget"] = tw.budget;
        result["budget_se"] = tw.budget_se;
        result["excess_sq"] = tw.excess_sq;
        if (!cons.pass) {
            result["reason"] = "duality residuals above threshold";
            return kNumericalFailure;
        }
        return kOk;
    }

    throw SchemaError("unknown task \"" + cfg.task + "\"");
}

} // namespace

int run(const RunConfig& cfg) {
    std::filesystem::path out_dir = cfg.out_dir.empty() ? "." : cfg.out_dir;
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);

    json report;
    report["task"] = cfg.task;
    report["config_hash"] = hex64(cfg.config_hash);
    report["model_hash"] = hex64(cfg.model_hash);
    report["solver_version"] = kSolverVersion;
    report["seed"] = cfg.seed;

    int code = kOk;
    json result;
    try {
        code = dispatch(cfg, out_dir, result);
    } catch (const SchemaError& e) {
        code = kSchemaFailure;
        result["reason"] = e.what();
    } catch (const InfeasibleError& e) {
        code = kInfeasible;
        result["reason"] = e.what();
    } catch (const NumericalError& e) {
        code = kNumericalFailure;
        result["reason"] = e.what();
    } catch (const std::exception& e) {
        code = kNumericalFailure;
        result["reason"] = e.what();
    }
    report["status"] = code == kOk ? "ok" : "error";
    report["exit_code"] = code;
    report["result"] = std::move(result);
    try {
        write_json(out_dir / "report.json", report);
    } catch (const std::exception&) {
        if (code == kOk) code = kSchemaFailure;
    }
    return code;
}

int run_cli(const std::string& task, const std::string& config_path,
            std::optional<std::uint64_t> seed_override, std::optional<long> paths_override,
            std::optional<std::string> out_override) {
    json j;
    try {
        std::ifstream in(config_path, std::ios::binary);
        if (!in) throw SchemaError("cannot open config file: " + config_path);
        j = json::parse(in);
    } catch (const json::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kSchemaFailure;
    } catch (const SchemaError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kSchemaFailure;
    }
    // overrides become part of the canonical (hashed) config
    j["task"] = task;
    if (seed_override) j["numerics"]["seed"] = *seed_override;
    if (paths_override) j["numerics"]["paths"] = *paths_override;
    if (out_override) j["output"]["dir"] = *out_override;

    RunConfig cfg;
    try {
        cfg = parse_config(j);
    } catch (const SchemaError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kSchemaFailure;
    }
    return run(cfg);
}

} // namespace nlmv
