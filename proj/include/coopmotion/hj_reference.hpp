#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "coopmotion/model_params.hpp"

namespace coopmotion {

/// c(q, m) = m q^{-1/m} (m+1)^{-(m+1)/m}: the prefactor shared by the
/// Legendre transform of H(p) = q|p|^{m+1}, the explicit solutions with step
/// initial data, and the limit CDFs.
inline double limit_coefficient(const ModelParams& pm) {
    return pm.m * std::pow(pm.q, -1.0 / pm.m) *
           std::pow(pm.m + 1.0, -(pm.m + 1.0) / pm.m);
}

inline double hamiltonian(double p, const ModelParams& pm) {
    return pm.q * std::pow(std::abs(p), pm.m + 1.0);
}

/// Closed-form Legendre transform H*(p) = c(q,m) |p|^{(m+1)/m}. Even in p,
/// zero at zero.
inline double legendre_closed(double p, const ModelParams& pm) {
    return limit_coefficient(pm) * std::pow(std::abs(p), (pm.m + 1.0) / pm.m);
}

/// Grid supremum of alpha*p - H(alpha) over alpha in [-half_width, half_width].
/// Deliberately plain: it is the independent check on legendre_closed.
inline double legendre_numeric(double p, const ModelParams& pm, double half_width,
                               long long grid_points) {
    if (grid_points < 3) throw std::invalid_argument("legendre_numeric: need >= 3 grid points");
    if (!(half_width > 0.0)) throw std::invalid_argument("legendre_numeric: bad window");
    double best = -std::numeric_limits<double>::infinity();
    for (long long i = 0; i < grid_points; ++i) {
        double alpha = -half_width + 2.0 * half_width * static_cast<double>(i) /
                                         static_cast<double>(grid_points - 1);
        best = std::max(best, alpha * p - hamiltonian(alpha, pm));
    }
    return best;
}

/// Hopf-Lax evaluation u(x,t) = inf_y { u0(y) + t H*((x-y)/t) } by grid
/// infimum with two zoom passes around the incumbent (robust to jumps in
/// lsc initial data, where a slope-based refinement could stall). If the
/// infimum lands on the window edge, the window doubles, at most three
/// times.
inline double hopf_lax_numeric(const std::function<double(double)>& u0, double x, double t,
                               const ModelParams& pm, double y_lo, double y_hi,
                               long long y_points) {
    if (!(t > 0.0)) throw std::invalid_argument("hopf_lax_numeric: t must be > 0");
    if (!(y_hi > y_lo)) throw std::invalid_argument("hopf_lax_numeric: empty window");
    if (y_points < 3) throw std::invalid_argument("hopf_lax_numeric: need >= 3 grid points");

    auto objective = [&](double y) { return u0(y) + t * legendre_closed((x - y) / t, pm); };

    for (int doubling = 0; doubling <= 3; ++doubling) {
        double lo = y_lo, hi = y_hi;
        double best = std::numeric_limits<double>::infinity();
        double best_y = lo;
        long long pts = y_points;
        for (int pass = 0; pass < 3; ++pass) {
            double h = (hi - lo) / static_cast<double>(pts - 1);
            for (long long i = 0; i < pts; ++i) {
                double y = lo + h * static_cast<double>(i);
                double v = objective(y);
                if (v < best) {
                    best = v;
                    best_y = y;
                }
            }
            lo = best_y - h;
            hi = best_y + h;
            pts = 512;
        }
        bool on_edge = best_y <= y_lo + (y_hi - y_lo) * 1e-9 ||
                       best_y >= y_hi - (y_hi - y_lo) * 1e-9;
        if (!on_edge) return best;
        double width = y_hi - y_lo;
        y_lo -= width / 2.0;
        y_hi += width / 2.0;
    }
    throw std::runtime_error("hopf_lax_numeric: infimum stuck on window edge after doubling");
}

/// Default window: the variational reach at time t scales like
/// t^{1/(m+1)} c^{-m/(m+1)}; a 5x margin plus edge-doubling covers the rest.
inline double hopf_lax_numeric(const std::function<double(double)>& u0, double x, double t,
                               const ModelParams& pm, long long y_points = 4001) {
    double reach = std::pow(std::max(t, std::pow(t, 1.0 / (pm.m + 1.0))), 1.0) *
                   std::pow(limit_coefficient(pm), -pm.m / (pm.m + 1.0));
    double w = 5.0 * std::max(reach, 1.0);
    return hopf_lax_numeric(u0, x, t, pm, x - w, x + w, y_points);
}

/// Explicit solution with initial data a 1_{x<=0} + b 1_{x>0}, 0 <= a < b <= 1:
///   a                              for x <= 0,
///   a + c (x^{m+1}/t)^{1/m}        while that value is below b,
///   b                              beyond the edge.
/// t = 0 returns the initial data.
inline double u_ab_closed(double x, double t, double a, double b, const ModelParams& pm) {
    if (!(a >= 0.0 && b <= 1.0 && a < b))
        throw std::invalid_argument("u_ab_closed: need 0 <= a < b <= 1");
    if (t < 0.0) throw std::invalid_argument("u_ab_closed: negative time");
    if (t == 0.0) return x <= 0.0 ? a : b;
    if (x <= 0.0) return a;
    double ramp = limit_coefficient(pm) *
                  std::pow(std::pow(x, pm.m + 1.0) / t, 1.0 / pm.m);
    return std::min(a + ramp, b);
}

/// Right edge of the middle branch: where a + c (x^{m+1}/t)^{1/m} reaches b.
inline double solution_edge(double t, double a, double b, const ModelParams& pm) {
    if (!(a >= 0.0 && b <= 1.0 && a < b))
        throw std::invalid_argument("solution_edge: need 0 <= a < b <= 1");
    return std::pow((b - a) / limit_coefficient(pm), pm.m / (pm.m + 1.0)) *
           std::pow(t, 1.0 / (pm.m + 1.0));
}

/// Solution with two-level step initial data, as an evaluatable value type.
struct PiecewiseSolution {
    double a;
    double b;
    ModelParams params;

    PiecewiseSolution(double a_, double b_, const ModelParams& pm)
        : a(a_), b(b_), params(pm) {
        if (!(a >= 0.0 && b <= 1.0 && a < b))
            throw std::invalid_argument("PiecewiseSolution: need 0 <= a < b <= 1");
    }

    double operator()(double x, double t) const { return u_ab_closed(x, t, a, b, params); }
    double right_edge(double t) const { return solution_edge(t, a, b, params); }
};

/// CDF of (m+1) (q/m^m)^{1/(m+1)} B with B ~ Beta((m+1)/m, 1): the t = 1,
/// (a,b) = (0,1) solution.
inline double beta_limit_cdf(double x, const ModelParams& pm) {
    return u_ab_closed(x, 1.0, 0.0, 1.0, pm);
}

/// Limit CDF F^{a,b} when masses a and 1-b sit at -inf and +inf: the t = 1
/// solution with levels a and b.
inline double extended_limit_cdf(double x, double a, double b, const ModelParams& pm) {
    return u_ab_closed(x, 1.0, a, b, pm);
}

/// P(B^{a,b} <= x | |B^{a,b}| finite): the finite part of the extended limit,
/// rescaled to a proper CDF.
inline double conditional_extended_cdf(double x, double a, double b, const ModelParams& pm) {
    return (extended_limit_cdf(x, a, b, pm) - a) / (b - a);
}

/// Mixture limit for a g-step lattice walk with residue-class masses pi:
/// component r is the finite-conditional extended limit with a = 1 - pi_r,
/// weighted by pi_r. With g = 1 this is beta_limit_cdf.
inline double mixture_limit_cdf(double x, long long g, std::span<const double> pi,
                                const ModelParams& pm) {
    if (g < 1) throw std::invalid_argument("mixture_limit_cdf: g must be >= 1");
    if (static_cast<long long>(pi.size()) != g)
        throw std::invalid_argument("mixture_limit_cdf: pi length must equal g");
    double total = 0.0;
    for (double p : pi) {
        if (!(p >= 0.0)) throw std::invalid_argument("mixture_limit_cdf: negative weight");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw std::invalid_argument("mixture_limit_cdf: weights must sum to 1");

    double value = 0.0;
    for (double p : pi) {
        if (p == 0.0) continue;
        value += p * conditional_extended_cdf(x, 1.0 - p, 1.0, pm);
    }
    return value;
}

/// Edge of mixture component r at t = 1.
inline double mixture_component_edge(double pi_r, const ModelParams& pm) {
    return std::pow(pi_r / limit_coefficient(pm), pm.m / (pm.m + 1.0));
}

/// S(eps) = (1-eps)^{m/(m+1)} (m+1) q^{1/(m+1)} m^{-m/(m+1)} eps^{1/(m+1)}:
/// the spatial shift that makes the upper sandwich profile hit 1. Equals the
/// edge of the (0, 1-eps) solution at time eps.
inline double sandwich_shift(double eps, const ModelParams& pm) {
    return std::pow(1.0 - eps, pm.m / (pm.m + 1.0)) * (pm.m + 1.0) *
           std::pow(pm.q, 1.0 / (pm.m + 1.0)) * std::pow(pm.m, -pm.m / (pm.m + 1.0)) *
           std::pow(eps, 1.0 / (pm.m + 1.0));
}

}  // namespace coopmotion
