#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "nlmv/frontier.hpp"
#include "nlmv/market_model.hpp"

namespace nlmv {

inline constexpr const char* kSolverVersion = "nlmv 1.0.0";

/// Process exit codes of the command-line front end.
enum ExitCode : int {
    kOk = 0,
    kValidationFailure = 2,
    kInfeasible = 3,
    kNumericalFailure = 4,
    kSchemaFailure = 5,
};

/**
 * Parsed run configuration. The JSON layout is documented in the README;
 * model coefficients accept a bare number (constant) or tagged objects
 * {"kind": "piecewise"|"poly"|"tanh", ...}.
 */
struct RunConfig {
    MarketModel model;
    TimeGrid grid{1.0, 1};
    std::string task; ///< validate | feasibility | riccati | frontier | simulate | duality-check

    double x0 = 1.0;
    double target = 0.0;          ///< simulate / duality-check / feasibility margin
    std::vector<double> targets;  ///< frontier K list

    long paths = 200000;
    int mc_paths = 10000;
    int basis_degree = 3;
    std::uint64_t seed = 0;

    std::string out_dir = ".";
    bool terminal_csv = false;

    std::uint64_t config_hash = 0;
    std::uint64_t model_hash = 0;
};

/// FNV-1a 64-bit over a canonical serialization.
std::uint64_t fnv1a_hash(const std::string& data);

CoefficientSpec coefficient_from_json(const nlohmann::json& j);
nlohmann::json coefficient_to_json(const CoefficientSpec& c);

MarketModel model_from_json(const nlohmann::json& j);
nlohmann::json model_to_json(const MarketModel& model);

/// Parses a full config document; throws SchemaError on any malformed field.
RunConfig parse_config(const nlohmann::json& j);

/// 12 significant digits, LF line endings, header K,d_star,variance,std_dev.
std::string render_frontier_csv(const std::vector<FrontierPoint>& points);

/**
 * Dispatches the configured task, writes <out_dir>/report.json plus
 * task-specific CSV/JSON artifacts, and returns the process exit code.
 * Failures still write a report with a machine-readable "reason".
 */
int run(const RunConfig& config);

/// Convenience: load the config file, apply optional overrides, run.
int run_cli(const std::string& task, const std::string& config_path,
            std::optional<std::uint64_t> seed_override,
            std::optional<long> paths_override,
            std::optional<std::string> out_override);

} // namespace nlmv
