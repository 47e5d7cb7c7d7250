#include "nlmv/hamiltonian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace nlmv {

void HamiltonianInput::check() const {
    int d = dim();
    if (d < 1) throw SchemaError("HamiltonianInput: empty Lambda");
    if (!(P > 0.0) || !std::isfinite(P))
        throw SchemaError("HamiltonianInput: P must be positive");
    if (sigma.rows() != d || sigma.cols() != d || theta_lower.size() != d ||
        theta_upper.size() != d)
        throw SchemaError("HamiltonianInput: inconsistent dimensions");
    Eigen::LLT<Eigen::MatrixXd> llt(sigma * sigma.transpose());
    if (llt.info() != Eigen::Success)
        throw SchemaError("HamiltonianInput: sigma*sigma' not positive definite");
    for (int i = 0; i < d; ++i)
        if (theta_lower(i) > theta_upper(i))
            throw SchemaError("HamiltonianInput: theta_lower > theta_upper");
}

std::pair<double, Eigen::VectorXd> orthant_qp_min(double P, const Eigen::VectorXd& Lambda,
                                                  const Eigen::MatrixXd& sigma,
                                                  const Eigen::VectorXd& mu_I,
                                                  std::uint32_t orthant) {
    const int d = static_cast<int>(mu_I.size());
    if (d > kMaxHamiltonianDim)
        throw SchemaError("orthant_qp_min: dimension above cap");
    const Eigen::MatrixXd S = sigma * sigma.transpose();
    const Eigen::VectorXd b = P * mu_I + sigma * Lambda;

    double best_value = 0.0; // pi = 0 is always admissible
    Eigen::VectorXd best_pi = Eigen::VectorXd::Zero(d);

    const std::uint32_t n_clamp = 1u << d;
    std::vector<int> free_idx;
    free_idx.reserve(static_cast<std::size_t>(d));
    for (std::uint32_t clamp = 0; clamp + 1 < n_clamp; ++clamp) {
        // coordinates with a set bit are clamped to zero
        free_idx.clear();
        for (int i = 0; i < d; ++i)
            if (!(clamp & (1u << i))) free_idx.push_back(i);
        const int nf = static_cast<int>(free_idx.size());

        Eigen::MatrixXd S_ff(nf, nf);
        Eigen::VectorXd b_f(nf);
        for (int a = 0; a < nf; ++a) {
            b_f(a) = b(free_idx[static_cast<std::size_t>(a)]);
            for (int c = 0; c < nf; ++c)
                S_ff(a, c) = S(free_idx[static_cast<std::size_t>(a)],
                               free_idx[static_cast<std::size_t>(c)]);
        }
        Eigen::VectorXd x_f = S_ff.ldlt().solve(-b_f / P);

        Eigen::VectorXd pi = Eigen::VectorXd::Zero(d);
        double scale = std::max(1.0, x_f.cwiseAbs().maxCoeff());
        bool feasible = true;
        for (int a = 0; a < nf; ++a) {
            double x = x_f(a);
            if (std::abs(x) < 1e-14 * scale) x = 0.0;
            int i = free_idx[static_cast<std::size_t>(a)];
            bool wants_nonneg = (orthant & (1u << i)) != 0;
            if ((wants_nonneg && x < 0.0) || (!wants_nonneg && x > 0.0)) {
                feasible = false;
                break;
            }
            pi(i) = x;
        }
        if (!feasible) continue;

        double value = P * pi.dot(S * pi) + 2.0 * b.dot(pi);
        if (value < best_value) {
            best_value = value;
            best_pi = pi;
        }
    }
    return {best_value, best_pi};
}

namespace {

struct OrthantCandidate {
    double value;
    Eigen::VectorXd pi;
    std::uint32_t orthant;
};

// H1 kernel; theta ordering not required (the H2 reduction swaps the pair).
HamiltonianResult eval_h1_kernel(double P, const Eigen::VectorXd& Lambda,
                                 const Eigen::MatrixXd& sigma,
                                 const Eigen::VectorXd& theta_lower,
                                 const Eigen::VectorXd& theta_upper) {
    const int d = static_cast<int>(Lambda.size());
    if (d > kMaxHamiltonianDim)
        throw SchemaError("eval_hamiltonian: dimension above cap");
    const Eigen::VectorXd mu_lo = sigma * theta_lower;
    const Eigen::VectorXd mu_hi = sigma * theta_upper;

    std::vector<OrthantCandidate> cands;
    cands.reserve(std::size_t{1} << d);
    double best = std::numeric_limits<double>::infinity();
    for (std::uint32_t I = 0; I < (1u << d); ++I) {
        Eigen::VectorXd mu_I(d);
        for (int i = 0; i < d; ++i)
            mu_I(i) = (I & (1u << i)) ? mu_lo(i) : mu_hi(i);
        auto [value, pi] = orthant_qp_min(P, Lambda, sigma, mu_I, I);
        cands.push_back({value, std::move(pi), I});
        best = std::min(best, value);
    }

    const double tie_tol = 1e-12 * std::max(1.0, std::abs(best));
    HamiltonianResult result;
    result.value = best;
    bool first = true;
    for (const auto& c : cands) {
        if (c.value <= best + tie_tol) {
            result.ties.push_back(c.orthant);
            if (first) { // candidates are ordered by orthant mask
                result.orthant = c.orthant;
                result.argmin = c.pi;
                result.value = c.value;
                first = false;
            }
        }
    }
    if (result.ties.size() <= 1) result.ties.clear();
    return result;
}

} // namespace

HamiltonianResult eval_hamiltonian(Which which, const HamiltonianInput& input) {
    input.check();
    if (which == Which::H1)
        return eval_h1_kernel(input.P, input.Lambda, input.sigma, input.theta_lower,
                              input.theta_upper);

    // H2(P, Lambda; lo, hi) = inf over rho of the H1 form with the theta pair
    // swapped, attained at pi2 = -rho. Swapping breaks the ordering invariant,
    // which is why the kernel does not enforce it.
    HamiltonianResult swapped = eval_h1_kernel(input.P, input.Lambda, input.sigma,
                                               input.theta_upper, input.theta_lower);
    const std::uint32_t full = (1u << input.dim()) - 1u;
    HamiltonianResult result;
    result.value = swapped.value;
    result.argmin = -swapped.argmin;
    result.orthant = swapped.orthant ^ full;
    for (std::uint32_t t : swapped.ties) result.ties.push_back(t ^ full);
    if (!result.ties.empty()) {
        std::uint32_t smallest = result.ties.front();
        for (std::uint32_t t : result.ties)
            if (t < smallest) smallest = t;
        if (smallest != result.orthant) {
            // re-evaluate the lexicographic representative among the tied orthants
            Eigen::VectorXd mu_I(input.dim());
            const Eigen::VectorXd mu_lo = input.sigma * input.theta_upper;
            const Eigen::VectorXd mu_hi = input.sigma * input.theta_lower;
            std::uint32_t swapped_mask = smallest ^ full;
            for (int i = 0; i < input.dim(); ++i)
                mu_I(i) = (swapped_mask & (1u << i)) ? mu_lo(i) : mu_hi(i);
            auto [value, pi] = orthant_qp_min(input.P, input.Lambda, input.sigma, mu_I,
                                              swapped_mask);
            result.orthant = smallest;
            result.argmin = -pi;
            result.value = value;
        }
        std::sort(result.ties.begin(), result.ties.end());
    }
    return result;
}

ClosedForm1d closed_form_1d(Which which, double P, double Lambda, double theta_lower,
                            double theta_upper, double sigma) {
    if (!(sigma > 0.0))
        throw SchemaError("closed_form_1d: sigma must be positive");
    if (!(P > 0.0))
        throw SchemaError("closed_form_1d: P must be positive");

    // d = 1 kernel for H2: candidate vertices on the two half-lines plus the
    // origin. With theta_lower <= theta_upper exactly three branches arise,
    // selected by where Lambda / P falls relative to the theta band.
    auto h2 = [&](double lo, double hi) -> ClosedForm1d {
        ClosedForm1d out; // origin candidate: value 0
        double a = P * lo + Lambda;
        if (a >= 0.0) { // vertex on pi > 0
            double v = -a * a / P;
            if (v < out.value) {
                out.value = v;
                out.pi = a / (P * sigma);
            }
        }
        double b = P * hi + Lambda;
        if (b <= 0.0) { // vertex on pi < 0
            double v = -b * b / P;
            if (v < out.value) {
                out.value = v;
                out.pi = b / (P * sigma);
            }
        }
        return out;
    };

    if (which == Which::H2) return h2(theta_lower, theta_upper);
    ClosedForm1d r = h2(theta_upper, theta_lower);
    r.pi = -r.pi;
    return r;
}

double lower_bound_f(const HamiltonianInput& input) {
    input.check();
    const int d = input.dim();
    if (d > kMaxHamiltonianDim)
        throw SchemaError("lower_bound_f: dimension above cap");
    const Eigen::MatrixXd S = input.sigma * input.sigma.transpose();
    const Eigen::LDLT<Eigen::MatrixXd> S_ldlt(S);
    const Eigen::VectorXd sigmaT_inv_Lambda =
        input.sigma.transpose().fullPivLu().solve(input.Lambda);
    const Eigen::VectorXd mu_lo = input.mu_lower();
    const Eigen::VectorXd mu_hi = input.mu_upper();

    double best = std::numeric_limits<double>::infinity();
    for (std::uint32_t I = 0; I < (1u << d); ++I) {
        Eigen::VectorXd mu_I(d);
        for (int i = 0; i < d; ++i)
            mu_I(i) = (I & (1u << i)) ? mu_lo(i) : mu_hi(i);
        double term = -mu_I.dot(S_ldlt.solve(mu_I)) * input.P -
                      2.0 * mu_I.dot(sigmaT_inv_Lambda);
        best = std::min(best, term);
    }
    return best - input.Lambda.squaredNorm() / input.P;
}

} // namespace nlmv
