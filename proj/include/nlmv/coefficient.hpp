#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "nlmv/errors.hpp"
#include "nlmv/time_grid.hpp"

namespace nlmv {

/**
 * A single scalar coefficient process. Three families are supported:
 *   - Constant:  v
 *   - Piecewise: one value per grid interval (deterministic, right-open)
 *   - Poly:      polynomial in the factor state y
 *   - Tanh:      a + b * tanh(c * y + e), a bounded map of the factor state
 *
 * Constant and Piecewise coefficients are deterministic; Poly and Tanh read
 * the factor state. Evaluation must be finite everywhere it is used; a
 * non-finite value is a hard error.
 */
class CoefficientSpec {
public:
    enum class Kind { Constant, Piecewise, Poly, Tanh };

    CoefficientSpec() : kind_(Kind::Constant), value_(0.0) {}

    static CoefficientSpec constant(double v) {
        CoefficientSpec c;
        c.kind_ = Kind::Constant;
        c.value_ = v;
        return c;
    }

    /// One value per grid interval.
    static CoefficientSpec piecewise(std::vector<double> values) {
        if (values.empty())
            throw SchemaError("CoefficientSpec: piecewise values empty");
        CoefficientSpec c;
        c.kind_ = Kind::Piecewise;
        c.values_ = std::move(values);
        return c;
    }

    /// c0 + c1*y + c2*y^2 + ...
    static CoefficientSpec poly(std::vector<double> coeffs) {
        if (coeffs.empty())
            throw SchemaError("CoefficientSpec: poly coefficients empty");
        CoefficientSpec c;
        c.kind_ = Kind::Poly;
        c.values_ = std::move(coeffs);
        return c;
    }

    /// a + b * tanh(c*y + e)
    static CoefficientSpec tanh_map(double a, double b, double c, double e = 0.0) {
        CoefficientSpec s;
        s.kind_ = Kind::Tanh;
        s.tanh_[0] = a;
        s.tanh_[1] = b;
        s.tanh_[2] = c;
        s.tanh_[3] = e;
        return s;
    }

    Kind kind() const { return kind_; }

    bool is_deterministic() const {
        return kind_ == Kind::Constant || kind_ == Kind::Piecewise;
    }

    /// Evaluate on grid interval k at factor state y.
    double eval(const TimeGrid& grid, int k, double y) const {
        double v = 0.0;
        switch (kind_) {
        case Kind::Constant:
            v = value_;
            break;
        case Kind::Piecewise: {
            if (static_cast<int>(values_.size()) != grid.steps)
                throw SchemaError("CoefficientSpec: piecewise length != grid steps");
            v = values_[static_cast<std::size_t>(std::clamp(k, 0, grid.steps - 1))];
            break;
        }
        case Kind::Poly: {
            double p = 0.0;
            for (auto it = values_.rbegin(); it != values_.rend(); ++it)
                p = p * y + *it;
            v = p;
            break;
        }
        case Kind::Tanh:
            v = tanh_[0] + tanh_[1] * std::tanh(tanh_[2] * y + tanh_[3]);
            break;
        }
        if (!std::isfinite(v))
            throw NumericalError("CoefficientSpec: non-finite evaluation");
        return v;
    }

    /// Declared bound B; for factor-driven polynomials it is certified only on
    /// the probed states.
    double declared_bound(const std::vector<double>& probe_states) const {
        switch (kind_) {
        case Kind::Constant:
            return std::abs(value_);
        case Kind::Piecewise: {
            double m = 0.0;
            for (double v : values_) m = std::max(m, std::abs(v));
            return m;
        }
        case Kind::Tanh:
            return std::abs(tanh_[0]) + std::abs(tanh_[1]);
        case Kind::Poly: {
            double m = 0.0;
            for (double y : probe_states) {
                double p = 0.0;
                for (auto it = values_.rbegin(); it != values_.rend(); ++it)
                    p = p * y + *it;
                m = std::max(m, std::abs(p));
            }
            return m;
        }
        }
        return 0.0;
    }

    // Accessors for serialization.
    double constant_value() const { return value_; }
    const std::vector<double>& table() const { return values_; }
    const double* tanh_params() const { return tanh_; }

private:
    Kind kind_;
    double value_ = 0.0;
    std::vector<double> values_; // piecewise values or poly coefficients
    double tanh_[4] = {0, 0, 0, 0};
};

/**
 * Scalar mean-reverting factor dy = kappa*(mean - y) dt + vol dW^j driven by
 * Brownian component j. vol = 0 degenerates to a deterministic ODE path.
 */
struct FactorProcess {
    double kappa = 0.0;
    double mean = 0.0;
    double vol = 0.0;
    double y0 = 0.0;
    int component = 0; ///< zero-based Brownian component index

    void validate(int dimension) const {
        if (kappa < 0.0) throw SchemaError("FactorProcess: kappa < 0");
        if (vol < 0.0) throw SchemaError("FactorProcess: vol < 0");
        if (component < 0 || component >= dimension)
            throw SchemaError("FactorProcess: component out of range");
    }
};

} // namespace nlmv
