#pragma once

#include <algorithm>
#include <cmath>

#include "nlmv/errors.hpp"

namespace nlmv {

/**
 * Uniform grid on [0, T]. Node k sits at k*T/N; interval k spans
 * [node(k), node(k+1)) and carries the piecewise-constant coefficients.
 */
struct TimeGrid {
    double horizon = 1.0; ///< T in years
    int steps = 1;        ///< N >= 1

    TimeGrid() = default;
    TimeGrid(double T, int N) : horizon(T), steps(N) {
        if (!(T > 0.0) || !std::isfinite(T))
            throw SchemaError("TimeGrid: horizon must be positive and finite");
        if (N < 1)
            throw SchemaError("TimeGrid: steps must be >= 1");
    }

    double dt() const { return horizon / steps; }
    double node(int k) const { return k * horizon / steps; }
    int num_nodes() const { return steps + 1; }

    /// Index of the interval containing t; t = T maps to the last interval.
    int interval_of(double t) const {
        if (t < 0.0 || t > horizon * (1.0 + 1e-12))
            throw SchemaError("TimeGrid: t outside [0, T]");
        int k = static_cast<int>(std::floor(t / dt()));
        return std::clamp(k, 0, steps - 1);
    }
};

} // namespace nlmv
