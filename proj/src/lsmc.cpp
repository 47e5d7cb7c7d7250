#include "nlmv/lsmc.hpp"

#include <algorithm>
#include <cmath>

#include "nlmv/parallel.hpp"
#include "nlmv/rng.hpp"

namespace nlmv {

FactorEnsemble simulate_factor_paths(const MarketModel& model, const TimeGrid& grid,
                                     long paths, std::uint64_t seed) {
    if (!model.factor)
        throw SchemaError("simulate_factor_paths: model has no factor process");
    const FactorProcess f = *model.factor;
    FactorEnsemble ens;
    ens.paths = paths;
    ens.steps = grid.steps;
    ens.y.assign(static_cast<std::size_t>(paths) * (grid.steps + 1), 0.0);
    ens.dw.assign(static_cast<std::size_t>(paths) * grid.steps, 0.0);

    const double dt = grid.dt();
    const double sqdt = std::sqrt(dt);
    for_each_block(num_blocks(paths), [&](int b) {
        BlockRng rng(seed, /*stream=*/31, static_cast<std::uint64_t>(b));
        long lo = static_cast<long>(b) * kBlockSize;
        long hi = std::min<long>(lo + kBlockSize, paths);
        for (long p = lo; p < hi; ++p) {
            double y = f.y0;
            std::size_t yrow = static_cast<std::size_t>(p) * (grid.steps + 1);
            std::size_t wrow = static_cast<std::size_t>(p) * grid.steps;
            ens.y[yrow] = y;
            for (int k = 0; k < grid.steps; ++k) {
                double dw = sqdt * rng.normal();
                ens.dw[wrow + static_cast<std::size_t>(k)] = dw;
                y += f.kappa * (f.mean - y) * dt + f.vol * dw;
                ens.y[yrow + static_cast<std::size_t>(k) + 1] = y;
            }
        }
    });
    return ens;
}

PolyBasis::PolyBasis(const std::vector<double>& states, int degree) : degree_(degree) {
    if (states.empty()) throw SchemaError("PolyBasis: empty state sample");
    double sum = 0.0, sum2 = 0.0;
    y_min_ = states.front();
    y_max_ = states.front();
    for (double y : states) {
        sum += y;
        sum2 += y * y;
        y_min_ = std::min(y_min_, y);
        y_max_ = std::max(y_max_, y);
    }
    double n = static_cast<double>(states.size());
    mean_ = sum / n;
    sd_ = std::sqrt(std::max(sum2 / n - mean_ * mean_, 0.0));
    if (sd_ < 1e-12) {
        degree_ = 0; // no spread to regress on
        sd_ = 1.0;
    }
}

void PolyBasis::features(double y, Eigen::VectorXd& phi) const {
    double z = (y - mean_) / sd_;
    phi.resize(degree_ + 1);
    double m = 1.0;
    for (int j = 0; j <= degree_; ++j) {
        phi(j) = m;
        m *= z;
    }
}

Eigen::VectorXd PolyBasis::fit(const std::vector<double>& states,
                               const std::vector<double>& target) const {
    const int m = size();
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(m, m);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd phi(m);
    for (std::size_t p = 0; p < states.size(); ++p) {
        features(states[p], phi);
        gram.noalias() += phi * phi.transpose();
        rhs.noalias() += phi * target[p];
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
    if (lu.rank() < m)
        throw NumericalError("PolyBasis: rank-deficient regression matrix");
    return lu.solve(rhs);
}

double PolyBasis::predict(const Eigen::VectorXd& coeff, double y) const {
    double z = (y - mean_) / sd_;
    double acc = 0.0;
    for (int j = degree_; j >= 0; --j) acc = acc * z + coeff(j);
    return acc;
}

} // namespace nlmv
