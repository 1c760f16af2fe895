#pragma once

#include <cmath>
#include <stdexcept>

namespace coopmotion {

/// Parameters of a cooperative motion: cooperation exponent m (real, >= 1)
/// and move probability q in (0,1). The exact CDF/PMF recursions accept any
/// real m >= 1; trajectory sampling and the l-of-m walk need integer m.
struct ModelParams {
    double m;
    double q;

    ModelParams(double m_, double q_) : m(m_), q(q_) {
        if (!(m >= 1.0) || !std::isfinite(m))
            throw std::invalid_argument("ModelParams: m must be a finite real >= 1");
        if (!(q > 0.0 && q < 1.0))
            throw std::invalid_argument("ModelParams: q must lie in (0,1)");
    }

    bool has_integer_m() const { return m == std::floor(m); }

    int m_as_int() const {
        if (!has_integer_m())
            throw std::invalid_argument("ModelParams: operation requires integer m");
        return static_cast<int>(m);
    }
};

}  // namespace coopmotion
