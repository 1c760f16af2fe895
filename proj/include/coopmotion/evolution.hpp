#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "coopmotion/lattice_dist.hpp"
#include "coopmotion/model_params.hpp"
#include "coopmotion/step_law.hpp"

namespace coopmotion {

/// Slack when checking CDF monotonicity of inputs: absorbs sub-ulp wobble
/// from faithfully-rounded powers with non-integer m.
inline constexpr double kCdfMonotoneSlack = 1e-14;

namespace detail {

/// sign(x) |x|^{m+1}. Integer m uses a left-associated product so that all
/// update paths produce bit-identical fluxes; real m goes through powl.
inline long double pow_mp1(long double x, const ModelParams& pm) {
    long double ax = x < 0.0L ? -x : x;
    long double r;
    if (pm.has_integer_m()) {
        int e = pm.m_as_int() + 1;
        r = 1.0L;
        for (int i = 0; i < e; ++i) r *= ax;
    } else {
        r = powl(ax, static_cast<long double>(pm.m) + 1.0L);
    }
    return x < 0.0L ? -r : r;
}

inline long double pow_int(long double x, int e) {
    long double r = 1.0L;
    for (int i = 0; i < e; ++i) r *= x;
    return r;
}

inline void validate_cdf_input(std::span<const double> f) {
    if (f.empty()) throw std::invalid_argument("cdf step: empty input");
    for (double v : f)
        if (!std::isfinite(v) || v < -1e-12 || v > 1.0 + 1e-12)
            throw std::invalid_argument("cdf step: values must lie in [0,1]");
    for (std::size_t i = 1; i < f.size(); ++i)
        if (f[i] - f[i - 1] < -kCdfMonotoneSlack)
            throw std::invalid_argument("cdf step: non-monotone CDF input");
}

/// P(Binomial(m, p) >= l), exact tail sum; m is small.
inline long double binomial_tail_ge(long double p, int m, int l) {
    long double total = 0.0L;
    long double one_minus = 1.0L - p;
    for (int j = l; j <= m; ++j) {
        long double coeff = 1.0L;
        for (int i = 0; i < j; ++i)
            coeff = coeff * static_cast<long double>(m - i) / static_cast<long double>(i + 1);
        total += coeff * pow_int(p, j) * pow_int(one_minus, m - j);
    }
    return total;
}

}  // namespace detail

/// Spatial/temporal mesh tied by dt = dx^{m+1}, the scaling that leaves the
/// limit equation invariant.
struct SchemeMesh {
    double dx;
    double dt;

    SchemeMesh(double dx_, double dt_, const ModelParams& pm) : dx(dx_), dt(dt_) {
        if (!(dx > 0.0) || !(dt > 0.0))
            throw std::invalid_argument("SchemeMesh: mesh sizes must be positive");
        double want = std::pow(dx, pm.m + 1.0);
        if (std::abs(dt - want) > 1e-12 * std::max(dt, want))
            throw std::invalid_argument("SchemeMesh: dt must equal dx^{m+1}");
    }

    static SchemeMesh from_step_count(long long n, const ModelParams& pm) {
        if (n < 1) throw std::invalid_argument("SchemeMesh: step count must be >= 1");
        double dx = std::pow(static_cast<double>(n), -1.0 / (pm.m + 1.0));
        return SchemeMesh(dx, 1.0 / static_cast<double>(n), pm);
    }
};

/// p* = (1 / (q (m+1)))^{1/m}. Single-site masses below this threshold keep
/// the one-step update order-preserving; always > 1/2.
inline double p_star(const ModelParams& pm) {
    return std::pow(1.0 / (pm.q * (pm.m + 1.0)), 1.0 / pm.m);
}

/// f(p) = p - q p^{m+1}, the one-step image of an isolated atom's mass.
/// Increasing on [0, p*], decreasing on [p*, 1].
inline double f_map(double p, const ModelParams& pm) {
    return static_cast<double>(static_cast<long double>(p) -
                               static_cast<long double>(pm.q) * detail::pow_mp1(p, pm));
}

/// g(a, b) = f(a) - f(b).
inline double g_func(double a, double b, const ModelParams& pm) {
    return static_cast<double>(
        (static_cast<long double>(a) - static_cast<long double>(pm.q) * detail::pow_mp1(a, pm)) -
        (static_cast<long double>(b) - static_cast<long double>(pm.q) * detail::pow_mp1(b, pm)));
}

/// Constants controlling how fast an over-p* atom sheds mass, and the step
/// count n1 after which any initial law is p*-bounded. When p* >= 1 every
/// law already is, and n1 = 0 (c1..c3 are then not meaningful).
struct RelaxationBound {
    double c1;
    double c2;
    double c3;
    double c_min;
    long long n1;
};

inline RelaxationBound relaxation_bound(const ModelParams& pm) {
    const double ps = p_star(pm);
    RelaxationBound r{};
    r.c1 = ps - 0.5;
    r.c2 = pm.q * static_cast<double>(detail::pow_mp1(ps, pm) - detail::pow_mp1(0.5, pm));
    r.c3 = std::min(g_func(ps, 1.0 - ps, pm), 1.0 - pm.q);
    r.c_min = std::min({r.c1, r.c2, r.c3});
    if (ps >= 1.0) {
        r.n1 = 0;
    } else {
        // The ratio can be an exact integer; nudge below before the ceiling so
        // float noise cannot bump the bound by one.
        r.n1 = static_cast<long long>(std::ceil((1.0 - ps) / r.c_min - 1e-9));
    }
    return r;
}

/// One CDF-level step. `values` covers the same sites as the input
/// (constant extension outside); callers pad the window when the law can
/// move mass across its ends.
struct CdfStepResult {
    std::vector<double> values;
    bool output_monotone = true;
    double max_violation = 0.0;  // largest negative output increment, as a magnitude
};

namespace detail {

inline void scan_output_monotonicity(CdfStepResult& r) {
    for (std::size_t i = 1; i < r.values.size(); ++i) {
        double inc = r.values[i] - r.values[i - 1];
        if (inc < 0.0) {
            r.output_monotone = false;
            r.max_violation = std::max(r.max_violation, -inc);
        }
    }
}

}  // namespace detail

/// F'_k = F_k - q (F_k - F_{k-1})^{m+1}, the Bernoulli CDF recursion.
inline CdfStepResult step_cdf(std::span<const double> cdf, const ModelParams& pm) {
    detail::validate_cdf_input(cdf);
    const std::size_t n = cdf.size();
    CdfStepResult res;
    res.values.resize(n);
    res.values[0] = cdf[0];
    const long double q = pm.q;
    for (std::size_t k = 1; k < n; ++k) {
        long double inc = static_cast<long double>(cdf[k]) - static_cast<long double>(cdf[k - 1]);
        res.values[k] = static_cast<double>(static_cast<long double>(cdf[k]) -
                                            q * detail::pow_mp1(inc, pm));
    }
    detail::scan_output_monotonicity(res);
    return res;
}

/// CDF recursion for a general bounded step law with support in [-l, s]:
///   F'_k = F_k - sum_{j=k-s}^{k-1} (F_{j+1}-F_j)^{m+1} P(D >= k-j)
///              + sum_{j=k}^{k+l-1} (F_{j+1}-F_j)^{m+1} P(D <  k-j).
/// With the Bernoulli law this reproduces step_cdf bit for bit.
inline CdfStepResult step_general(std::span<const double> cdf, const StepLaw& law,
                                  const ModelParams& pm) {
    detail::validate_cdf_input(cdf);
    const long long n = static_cast<long long>(cdf.size());
    const long long s = law.right_range();
    const long long l = law.left_range();

    std::vector<long double> matched(n > 0 ? static_cast<std::size_t>(n - 1) : 0);
    for (long long j = 0; j + 1 < n; ++j)
        matched[static_cast<std::size_t>(j)] = detail::pow_mp1(
            static_cast<long double>(cdf[static_cast<std::size_t>(j + 1)]) -
                static_cast<long double>(cdf[static_cast<std::size_t>(j)]),
            pm);
    auto mat = [&](long long j) -> long double {
        return (j >= 0 && j + 1 < n) ? matched[static_cast<std::size_t>(j)] : 0.0L;
    };

    std::vector<double> tail_ge(static_cast<std::size_t>(s) + 1, 0.0);
    for (long long d = 1; d <= s; ++d) tail_ge[static_cast<std::size_t>(d)] = law.prob_ge(d);
    std::vector<double> tail_lt(static_cast<std::size_t>(l) + 1, 0.0);
    for (long long d = 0; d < l; ++d) tail_lt[static_cast<std::size_t>(d)] = law.prob_lt(-d);

    CdfStepResult res;
    res.values.resize(static_cast<std::size_t>(n));
    for (long long k = 0; k < n; ++k) {
        long double outgoing = 0.0L;
        for (long long j = k - s; j <= k - 1; ++j)
            outgoing += mat(j) * static_cast<long double>(tail_ge[static_cast<std::size_t>(k - j)]);
        long double incoming = 0.0L;
        for (long long j = k; j <= k + l - 1; ++j)
            incoming += mat(j) * static_cast<long double>(tail_lt[static_cast<std::size_t>(j - k)]);
        res.values[static_cast<std::size_t>(k)] = static_cast<double>(
            (static_cast<long double>(cdf[static_cast<std::size_t>(k)]) - outgoing) + incoming);
    }
    detail::scan_output_monotonicity(res);
    return res;
}

namespace detail {

/// Working PMF kept in extended precision across multi-step evolutions, so
/// the stored-double rounding happens once at the end instead of once per
/// step (per-step rounding drifts past the mass tolerance near 1e5 steps).
struct PmfState {
    long long offset = 0;
    std::vector<long double> mass;
    double neg = 0.0;
    double pos = 0.0;

    static PmfState from(const LatticeDist& d) {
        PmfState st;
        st.offset = d.offset();
        st.mass.assign(d.mass().begin(), d.mass().end());
        st.neg = d.mass_neg_inf();
        st.pos = d.mass_pos_inf();
        return st;
    }

    LatticeDist to_dist() const {
        std::vector<double> out(mass.begin(), mass.end());
        return LatticeDist(offset, std::move(out), neg, pos);
    }
};

inline void trim_state(PmfState& st) {
    auto& m = st.mass;
    while (m.size() > 1 && m.front() < static_cast<long double>(kTrimThreshold)) {
        m[1] += m[0];
        m.erase(m.begin());
        ++st.offset;
    }
    while (m.size() > 1 && m.back() < static_cast<long double>(kTrimThreshold)) {
        m[m.size() - 2] += m.back();
        m.pop_back();
    }
}

/// Matched mass p_k^{m+1} at site k jumps by D; extended atoms never move.
/// Mass moves as paired fluxes, so conservation telescopes exactly.
inline void general_step_state(PmfState& st, const StepLaw& law, const ModelParams& pm) {
    if (st.mass.empty()) return;
    const long long len = static_cast<long long>(st.mass.size());
    const long long l = law.left_range();
    const long long s = law.right_range();

    std::vector<long double> matched(static_cast<std::size_t>(len));
    for (long long i = 0; i < len; ++i)
        matched[static_cast<std::size_t>(i)] = pow_mp1(st.mass[static_cast<std::size_t>(i)], pm);
    auto mat = [&](long long i) -> long double {
        return (i >= 0 && i < len) ? matched[static_cast<std::size_t>(i)] : 0.0L;
    };

    const long long new_len = len + l + s;
    std::vector<long double> out(static_cast<std::size_t>(new_len));
    for (long long j = 0; j < new_len; ++j) {
        const long long i = j - l;
        const long double pk = (i >= 0 && i < len) ? st.mass[static_cast<std::size_t>(i)] : 0.0L;
        long double outflow = 0.0L, inflow = 0.0L;
        for (auto [dstep, pd] : law.atoms()) {
            if (dstep == 0) continue;
            outflow += static_cast<long double>(pd) * mat(i);
            inflow += static_cast<long double>(pd) * mat(i - dstep);
        }
        out[static_cast<std::size_t>(j)] = pk - (outflow - inflow);
    }
    st.offset -= l;
    st.mass = std::move(out);
    trim_state(st);
}

/// p'_k = p_k - q p_k T(p_k) + q p_{k-1} T(p_{k-1}), T(p) = P(Bin(m,p) >= l).
inline void l_of_m_step_state(PmfState& st, const ModelParams& pm, int l) {
    const int m = pm.m_as_int();
    if (l < 1 || l > m) throw std::invalid_argument("step_l_of_m: need 1 <= l <= m");
    if (st.mass.empty()) return;
    const long long len = static_cast<long long>(st.mass.size());

    std::vector<long double> flux(static_cast<std::size_t>(len));
    const long double q = pm.q;
    for (long long i = 0; i < len; ++i) {
        long double p = st.mass[static_cast<std::size_t>(i)];
        flux[static_cast<std::size_t>(i)] = q * (p * binomial_tail_ge(p, m, l));
    }
    auto flx = [&](long long i) -> long double {
        return (i >= 0 && i < len) ? flux[static_cast<std::size_t>(i)] : 0.0L;
    };

    std::vector<long double> out(static_cast<std::size_t>(len + 1));
    for (long long i = 0; i <= len; ++i) {
        long double pk = (i < len) ? st.mass[static_cast<std::size_t>(i)] : 0.0L;
        out[static_cast<std::size_t>(i)] = pk - (flx(i) - flx(i - 1));
    }
    st.mass = std::move(out);
    trim_state(st);
}

}  // namespace detail

/// One PMF-level step for a general bounded step law.
inline LatticeDist general_pmf_step(const LatticeDist& d, const StepLaw& law,
                                    const ModelParams& pm) {
    auto st = detail::PmfState::from(d);
    detail::general_step_state(st, law, pm);
    return st.to_dist();
}

/// p'_k = p_k - q (p_k^{m+1} - p_{k-1}^{m+1}): the Bernoulli PMF recursion.
inline LatticeDist step_pmf(const LatticeDist& d, const ModelParams& pm) {
    return general_pmf_step(d, StepLaw::bernoulli(pm.q), pm);
}

/// Variant walk that moves when at least l of the m sampled friends match.
/// Requires integer m; with l = m this reduces exactly to step_pmf.
inline LatticeDist step_l_of_m(const LatticeDist& d, const ModelParams& pm, int l) {
    auto st = detail::PmfState::from(d);
    detail::l_of_m_step_state(st, pm, l);
    return st.to_dist();
}

/// n-fold composition of the one-step PMF evolution; n = 0 is the identity.
inline LatticeDist evolve(const LatticeDist& d, const StepLaw& law, const ModelParams& pm,
                          long long n) {
    if (n < 0) throw std::invalid_argument("evolve: negative step count");
    auto st = detail::PmfState::from(d);
    for (long long i = 0; i < n; ++i) detail::general_step_state(st, law, pm);
    return st.to_dist();
}

/// n-fold composition of the l-of-m step.
inline LatticeDist evolve_l_of_m(const LatticeDist& d, const ModelParams& pm, int l,
                                 long long n) {
    if (n < 0) throw std::invalid_argument("evolve_l_of_m: negative step count");
    auto st = detail::PmfState::from(d);
    for (long long i = 0; i < n; ++i) detail::l_of_m_step_state(st, pm, l);
    return st.to_dist();
}

/// Largest increment bound on which the one-step CDF map is non-decreasing in
/// every argument. Exists only when the law cannot jump past a neighbour
/// (support within {-1, 0, 1}); the derivative of the update in the k-1 (or
/// k+1) argument otherwise goes negative near a flat spot, for every bound.
/// For Bernoulli(q) the bound is p*; a zero-step law gives +infinity.
inline std::optional<double> monotone_region_bound(const StepLaw& law, const ModelParams& pm) {
    if (law.prob_abs_above_one() > 0.0) return std::nullopt;
    double r = law.prob_nonzero();
    if (r == 0.0) return std::numeric_limits<double>::infinity();
    return std::pow(1.0 / (r * (pm.m + 1.0)), 1.0 / pm.m);
}

/// A pair of ordered CDFs whose one-step images cross: lower <= upper
/// pointwise, but after one step lower_image > upper_image at `site`.
struct OrderingViolation {
    long long offset = 0;  // site of index 0 in the vectors
    std::vector<double> lower_cdf;
    std::vector<double> upper_cdf;
    long long site = 0;
    double lower_image = 0.0;
    double upper_image = 0.0;
};

/// Searches for an ordered CDF pair whose order breaks after one step of the
/// law. Tries the deterministic flat-spot construction first (a plateau
/// directly above a rise, with the lower CDF dipping at the plateau), then
/// seeded random pairs. Candidates keep increments within the law's monotone
/// region when one exists, so Bernoulli searches over p*-bounded data must
/// come up empty.
inline std::optional<OrderingViolation> find_monotonicity_violation(
    const StepLaw& law, const ModelParams& pm, long long trials, std::uint64_t seed) {
    if (trials < 1)
        throw std::invalid_argument("find_monotonicity_violation: trials must be >= 1");

    const double cap = [&] {
        auto b = monotone_region_bound(law, pm);
        return b ? std::min(*b, 1.0) : 1.0;
    }();

    auto check = [&](const std::vector<double>& lo,
                     const std::vector<double>& up) -> std::optional<OrderingViolation> {
        auto lo1 = step_general(lo, law, pm).values;
        auto up1 = step_general(up, law, pm).values;
        for (std::size_t i = 0; i < lo1.size(); ++i) {
            if (lo1[i] > up1[i] + 1e-12) {
                OrderingViolation v;
                v.offset = 0;
                v.lower_cdf = lo;
                v.upper_cdf = up;
                v.site = static_cast<long long>(i);
                v.lower_image = lo1[i];
                v.upper_image = up1[i];
                return v;
            }
        }
        return std::nullopt;
    };

    auto reflect = [](const std::vector<double>& f) {
        std::vector<double> r(f.size());
        for (std::size_t i = 0; i < f.size(); ++i) r[i] = 1.0 - f[f.size() - 1 - i];
        return r;
    };

    if (law.prob_abs_above_one() > 0.0) {
        const std::size_t pad = static_cast<std::size_t>(law.left_range() + law.right_range()) + 2;
        const std::tuple<double, double, double> shapes[] = {
            {0.1, 0.5, 0.1}, {0.1, 0.4, 0.2}, {0.2, 0.6, 0.15}, {0.05, 0.45, 0.05}};
        for (auto [a, b, del] : shapes) {
            std::vector<double> up(pad, 0.0);
            up.push_back(a);
            up.push_back(a + b);
            up.push_back(a + b);
            up.insert(up.end(), pad, 1.0);
            std::vector<double> lo = up;
            lo[pad + 1] -= del;
            if (law.prob_ge(2) > 0.0)
                if (auto v = check(lo, up)) return v;
            if (law.prob_lt(-1) > 0.0)
                if (auto v = check(reflect(up), reflect(lo))) return v;
        }
    }

    std::mt19937_64 rng(seed);
    auto uni = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    const std::size_t pad = static_cast<std::size_t>(law.left_range() + law.right_range()) + 2;

    for (long long t = 0; t < trials; ++t) {
        const std::size_t L = 6 + rng() % 5;
        std::vector<double> inc(L);
        bool ok = false;
        for (int attempt = 0; attempt < 32 && !ok; ++attempt) {
            double total = 0.0;
            for (auto& x : inc) {
                x = (uni() < 0.3) ? 0.0 : uni() * uni();
                total += x;
            }
            if (total <= 0.0) continue;
            ok = true;
            for (auto& x : inc) {
                x /= total;
                if (x > cap * 0.999) ok = false;
            }
        }
        if (!ok) continue;

        std::vector<double> up(pad, 0.0);
        double acc = 0.0;
        for (double x : inc) {
            acc += x;
            up.push_back(std::min(acc, 1.0));
        }
        up.back() = 1.0;
        up.insert(up.end(), pad, 1.0);

        std::vector<double> lo;
        if (rng() % 2 == 0) {
            // Right shift by one site: lowers the CDF, keeps increments.
            lo.assign(up.size(), 0.0);
            for (std::size_t i = 1; i < up.size(); ++i) lo[i] = up[i - 1];
            lo[0] = 0.0;
        } else {
            // A single dip, sized to keep both neighbours' increments capped.
            lo = up;
            std::size_t idx = pad + 1 + rng() % L;
            double inc_left = up[idx] - up[idx - 1];
            double headroom = idx + 1 < up.size() ? cap * 0.999 - (up[idx + 1] - up[idx]) : 0.0;
            double dip = uni() * std::min(inc_left, headroom);
            if (dip <= 0.0) continue;
            lo[idx] -= dip;
        }
        if (auto v = check(lo, up)) return v;
    }
    return std::nullopt;
}

}  // namespace coopmotion
