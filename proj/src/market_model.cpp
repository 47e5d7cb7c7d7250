#include "nlmv/market_model.hpp"

#include <cmath>

#include "nlmv/parallel.hpp"
#include "nlmv/rng.hpp"

namespace nlmv {

Eigen::VectorXd MarketModel::theta_lower_at(const TimeGrid& grid, int k, double y) const {
    Eigen::VectorXd v(dimension);
    for (int i = 0; i < dimension; ++i)
        v(i) = theta_lower[static_cast<std::size_t>(i)].eval(grid, k, y);
    return v;
}

Eigen::VectorXd MarketModel::theta_upper_at(const TimeGrid& grid, int k, double y) const {
    Eigen::VectorXd v(dimension);
    for (int i = 0; i < dimension; ++i)
        v(i) = theta_upper[static_cast<std::size_t>(i)].eval(grid, k, y);
    return v;
}

Eigen::MatrixXd MarketModel::sigma_at(const TimeGrid& grid, int k, double y) const {
    Eigen::MatrixXd m(dimension, dimension);
    for (int i = 0; i < dimension; ++i)
        for (int j = 0; j < dimension; ++j)
            m(i, j) = sigma[static_cast<std::size_t>(i * dimension + j)].eval(grid, k, y);
    return m;
}

double MarketModel::integral_rate(const TimeGrid& grid, double t0, double t1) const {
    if (t0 > t1) return -integral_rate(grid, t1, t0);
    double acc = 0.0;
    double dt = grid.dt();
    int k0 = grid.interval_of(t0);
    int k1 = grid.interval_of(t1);
    if (k0 == k1) return (t1 - t0) * rate_at(grid, k0);
    acc += (grid.node(k0 + 1) - t0) * rate_at(grid, k0);
    for (int k = k0 + 1; k < k1; ++k) acc += dt * rate_at(grid, k);
    acc += (t1 - grid.node(k1)) * rate_at(grid, k1);
    return acc;
}

double MarketModel::discount_factor(const TimeGrid& grid, double t) const {
    if (t < 0.0 || t > grid.horizon * (1.0 + 1e-12))
        throw SchemaError("discount_factor: t outside [0, T]");
    if (t >= grid.horizon) return 1.0;
    return std::exp(-integral_rate(grid, t, grid.horizon));
}

double MarketModel::riskless_growth(const TimeGrid& grid) const {
    return std::exp(integral_rate(grid, 0.0, grid.horizon));
}

void MarketModel::check_shape() const {
    if (dimension < 1) throw SchemaError("MarketModel: dimension < 1");
    if (!(epsilon > 0.0)) throw SchemaError("MarketModel: epsilon must be > 0");
    if (!rate.is_deterministic())
        throw SchemaError("MarketModel: r must be deterministic");
    auto d = static_cast<std::size_t>(dimension);
    if (theta_lower.size() != d || theta_upper.size() != d)
        throw SchemaError("MarketModel: theta vectors must have length d");
    if (sigma.size() != d * d)
        throw SchemaError("MarketModel: sigma must be d x d");
    if (factor) factor->validate(dimension);
}

std::vector<double> default_probe_states(const MarketModel& model) {
    if (!model.factor) return {0.0};
    const FactorProcess& f = *model.factor;
    double sd = 0.0;
    if (f.vol > 0.0)
        sd = (f.kappa > 0.0) ? f.vol / std::sqrt(2.0 * f.kappa) : f.vol;
    std::vector<double> probes = {f.y0};
    for (int s = 0; s <= 3; ++s) {
        probes.push_back(f.mean + s * sd);
        probes.push_back(f.mean - s * sd);
    }
    return probes;
}

ValidationReport validate_model(const MarketModel& model, const TimeGrid& grid,
                                const std::vector<double>& probe_states) {
    model.check_shape();
    ValidationReport report;
    std::vector<double> states = probe_states.empty()
                                     ? default_probe_states(model)
                                     : probe_states;
    for (int k = 0; k < grid.steps; ++k) {
        double t = grid.node(k);
        for (double y : states) {
            Eigen::VectorXd lo = model.theta_lower_at(grid, k, y);
            Eigen::VectorXd hi = model.theta_upper_at(grid, k, y);
            for (int i = 0; i < model.dimension; ++i) {
                if (lo(i) > hi(i))
                    report.violations.push_back({"theta ordering", t, y, i});
            }
            Eigen::MatrixXd s = model.sigma_at(grid, k, y);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s * s.transpose());
            double min_eig = eig.eigenvalues().minCoeff();
            if (min_eig < model.epsilon)
                report.violations.push_back({"nondegeneracy", t, y, -1});
        }
    }
    return report;
}

namespace {

// Per-path time integral of the two premium integrands.
struct PremiumIntegrals {
    double lhs_long = 0.0;
    double lhs_short = 0.0;
};

PremiumIntegrals premium_integrals_on_path(const MarketModel& model, const TimeGrid& grid,
                                           const std::vector<double>& y_path) {
    PremiumIntegrals out;
    double dt = grid.dt();
    for (int k = 0; k < grid.steps; ++k) {
        double y = y_path[static_cast<std::size_t>(k)];
        Eigen::MatrixXd s = model.sigma_at(grid, k, y);
        Eigen::VectorXd mu_lo = s * model.theta_lower_at(grid, k, y);
        Eigen::VectorXd mu_hi = s * model.theta_upper_at(grid, k, y);
        for (int i = 0; i < model.dimension; ++i) {
            out.lhs_long += std::max(mu_lo(i), 0.0) * dt;
            out.lhs_short += std::max(-mu_hi(i), 0.0) * dt;
        }
    }
    return out;
}

} // namespace

FeasibilityResult check_feasibility(const MarketModel& model, const TimeGrid& grid,
                                    int mc_paths, std::uint64_t seed) {
    model.check_shape();
    FeasibilityResult res;

    bool coeffs_deterministic = true;
    for (const auto& c : model.theta_lower) coeffs_deterministic &= c.is_deterministic();
    for (const auto& c : model.theta_upper) coeffs_deterministic &= c.is_deterministic();
    for (const auto& c : model.sigma) coeffs_deterministic &= c.is_deterministic();

    if (coeffs_deterministic || !model.factor || model.factor->vol == 0.0) {
        // Exact quadrature: coefficients are constant per interval, or ride a
        // deterministic factor path.
        std::vector<double> y_path(static_cast<std::size_t>(grid.steps), 0.0);
        if (model.factor) {
            double y = model.factor->y0;
            double dt = grid.dt();
            for (int k = 0; k < grid.steps; ++k) {
                y_path[static_cast<std::size_t>(k)] = y;
                y += model.factor->kappa * (model.factor->mean - y) * dt;
            }
        }
        PremiumIntegrals pi = premium_integrals_on_path(model, grid, y_path);
        res.lhs_long = pi.lhs_long;
        res.lhs_short = pi.lhs_short;
        res.tol = 1e-10;
        res.feasible = res.lhs_long > res.tol || res.lhs_short > res.tol;
        return res;
    }

    if (mc_paths <= 0)
        throw SchemaError("check_feasibility: mc_paths must be > 0 for a factor-driven model");

    const FactorProcess& f = *model.factor;
    double dt = grid.dt();
    int blocks = num_blocks(mc_paths);
    std::vector<double> sum_long(static_cast<std::size_t>(blocks), 0.0);
    std::vector<double> sum_short(static_cast<std::size_t>(blocks), 0.0);
    std::vector<double> sum_long2(static_cast<std::size_t>(blocks), 0.0);
    std::vector<double> sum_short2(static_cast<std::size_t>(blocks), 0.0);

    for_each_block(blocks, [&](int b) {
        BlockRng rng(seed, /*stream=*/17, static_cast<std::uint64_t>(b));
        long lo = static_cast<long>(b) * kBlockSize;
        long hi = std::min<long>(lo + kBlockSize, mc_paths);
        std::vector<double> y_path(static_cast<std::size_t>(grid.steps));
        for (long p = lo; p < hi; ++p) {
            double y = f.y0;
            for (int k = 0; k < grid.steps; ++k) {
                y_path[static_cast<std::size_t>(k)] = y;
                y += f.kappa * (f.mean - y) * dt + f.vol * std::sqrt(dt) * rng.normal();
            }
            PremiumIntegrals pi = premium_integrals_on_path(model, grid, y_path);
            sum_long[static_cast<std::size_t>(b)] += pi.lhs_long;
            sum_short[static_cast<std::size_t>(b)] += pi.lhs_short;
            sum_long2[static_cast<std::size_t>(b)] += pi.lhs_long * pi.lhs_long;
            sum_short2[static_cast<std::size_t>(b)] += pi.lhs_short * pi.lhs_short;
        }
    });

    double n = static_cast<double>(mc_paths);
    double sl = 0.0, ss = 0.0, sl2 = 0.0, ss2 = 0.0;
    for (int b = 0; b < blocks; ++b) {
        sl += sum_long[static_cast<std::size_t>(b)];
        ss += sum_short[static_cast<std::size_t>(b)];
        sl2 += sum_long2[static_cast<std::size_t>(b)];
        ss2 += sum_short2[static_cast<std::size_t>(b)];
    }
    res.lhs_long = sl / n;
    res.lhs_short = ss / n;
    double se_long = std::sqrt(std::max(sl2 / n - res.lhs_long * res.lhs_long, 0.0) / n);
    double se_short = std::sqrt(std::max(ss2 / n - res.lhs_short * res.lhs_short, 0.0) / n);
    res.tol = 3.0 * std::max(se_long, se_short);
    res.feasible = res.lhs_long > 3.0 * se_long || res.lhs_short > 3.0 * se_short;
    return res;
}

} // namespace nlmv
