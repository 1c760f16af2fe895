#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "coopmotion/evolution.hpp"
#include "coopmotion/hj_reference.hpp"
#include "coopmotion/lattice_dist.hpp"
#include "coopmotion/model_params.hpp"
#include "coopmotion/step_law.hpp"

namespace coopmotion {

namespace detail {

/// Shortest round-trip decimal form.
inline std::string format_double(double v) {
    char buf[40];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

/// Write-then-rename so readers never observe a partial file.
inline void write_file_atomic(const std::string& path, const std::string& contents) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("cannot open for writing: " + tmp);
        os << contents;
        if (!os) throw std::runtime_error("write failed: " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw std::runtime_error("rename failed for " + path + ": " + ec.message());
}

/// Least-squares slope of log(y) against log(x); the smallest x is dropped
/// as transient when at least three points are available.
inline double fit_loglog_slope(std::span<const std::pair<double, double>> series) {
    std::size_t begin = series.size() >= 3 ? 1 : 0;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t n = 0;
    for (std::size_t i = begin; i < series.size(); ++i) {
        auto [x, y] = series[i];
        if (!(x > 0.0) || !(y > 0.0)) continue;
        double lx = std::log(x), ly = std::log(y);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++n;
    }
    if (n < 2) return std::numeric_limits<double>::quiet_NaN();
    double denom = static_cast<double>(n) * sxx - sx * sx;
    return (static_cast<double>(n) * sxy - sx * sy) / denom;
}

/// Uniform grid on [lo, hi] with points within 1e-9 of a branch point
/// dropped (the closed forms follow one fixed convention exactly at branch
/// points; the schemes need not).
inline std::vector<double> sup_grid(double lo, double hi, int points,
                                    std::span<const double> branch_points) {
    std::vector<double> grid;
    grid.reserve(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) {
        double x = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
        bool near_branch = false;
        for (double b : branch_points)
            if (std::abs(x - b) <= 1e-9) near_branch = true;
        if (!near_branch) grid.push_back(x);
    }
    return grid;
}

}  // namespace detail

/// Outcome of one scripted experiment. The verdict is decided only by the
/// declared tolerance; informational experiments report a verdict but are
/// not meant to gate anything.
struct RunReport {
    std::string experiment;
    std::map<std::string, std::string> parameters;
    std::vector<std::pair<double, double>> series;  // (n or N, error or statistic)
    std::optional<double> fitted_rate;
    bool pass = false;
    double tolerance = 0.0;
    bool informational = false;
    std::string note;
    std::vector<std::string> artifacts;
};

inline nlohmann::json to_json(const RunReport& r) {
    nlohmann::json j;
    j["experiment"] = r.experiment;
    j["parameters"] = r.parameters;
    auto series = nlohmann::json::array();
    for (auto [x, y] : r.series) series.push_back({x, y});
    j["series"] = series;
    if (r.fitted_rate)
        j["fitted_rate"] = *r.fitted_rate;
    else
        j["fitted_rate"] = nullptr;
    j["verdict"] = {{"pass", r.pass}, {"tolerance", r.tolerance}, {"informational", r.informational}};
    j["note"] = r.note;
    j["artifacts"] = r.artifacts;
    return j;
}

inline void write_report_json(RunReport& r, const std::string& path) {
    r.artifacts.push_back(path);
    detail::write_file_atomic(path, to_json(r).dump(2) + "\n");
}

inline void write_series_csv(RunReport& r, const std::string& path) {
    std::ostringstream os;
    os << "n,sup_error\n";
    for (auto [x, y] : r.series)
        os << detail::format_double(x) << "," << detail::format_double(y) << "\n";
    r.artifacts.push_back(path);
    detail::write_file_atomic(path, os.str());
}

/// Non-decreasing piecewise-linear extended CDF given by knots; constant
/// before the first and after the last knot.
struct PiecewiseLinearCdf {
    std::vector<std::pair<double, double>> knots;

    explicit PiecewiseLinearCdf(std::vector<std::pair<double, double>> knots_)
        : knots(std::move(knots_)) {
        if (knots.empty()) throw std::invalid_argument("PiecewiseLinearCdf: no knots");
        for (std::size_t i = 0; i < knots.size(); ++i) {
            auto [x, v] = knots[i];
            if (!(v >= 0.0 && v <= 1.0))
                throw std::invalid_argument("PiecewiseLinearCdf: values must lie in [0,1]");
            if (i > 0 && (x <= knots[i - 1].first || v < knots[i - 1].second))
                throw std::invalid_argument("PiecewiseLinearCdf: knots must increase");
        }
    }

    static PiecewiseLinearCdf ramp() { return PiecewiseLinearCdf({{0.0, 0.0}, {1.0, 1.0}}); }

    double operator()(double x) const {
        if (x <= knots.front().first) return knots.front().second;
        if (x >= knots.back().first) return knots.back().second;
        auto it = std::upper_bound(knots.begin(), knots.end(), x,
                                   [](double xx, const auto& k) { return xx < k.first; });
        auto [x1, v1] = *it;
        auto [x0, v0] = *(it - 1);
        return v0 + (v1 - v0) * (x - x0) / (x1 - x0);
    }

    double lipschitz_constant() const {
        double best = 0.0;
        for (std::size_t i = 1; i < knots.size(); ++i)
            best = std::max(best, (knots[i].second - knots[i - 1].second) /
                                      (knots[i].first - knots[i - 1].first));
        return best;
    }

    double value_at_neg_inf() const { return knots.front().second; }
    double value_at_pos_inf() const { return knots.back().second; }
};

/// mu[-inf, k) = u0(k dx): the lattice distribution whose CDF samples u0.
inline LatticeDist discretize_cdf(const PiecewiseLinearCdf& u0, double dx) {
    if (!(dx > 0.0)) throw std::invalid_argument("discretize_cdf: dx must be positive");
    long long kmin = static_cast<long long>(std::floor(u0.knots.front().first / dx)) - 1;
    long long kmax = static_cast<long long>(std::ceil(u0.knots.back().first / dx)) + 1;
    std::vector<double> mass;
    mass.reserve(static_cast<std::size_t>(kmax - kmin + 1));
    for (long long k = kmin; k <= kmax; ++k)
        mass.push_back(u0((static_cast<double>(k) + 1.0) * dx) - u0(static_cast<double>(k) * dx));
    return LatticeDist(kmin, std::move(mass), u0.value_at_neg_inf(),
                       1.0 - u0.value_at_pos_inf());
}

/// Smallest admissible step count for Lipschitz data: below it the update is
/// not monotone on the discrete Lipschitz class and nothing is guaranteed.
inline double min_step_count(const ModelParams& pm, double lipschitz_k) {
    return std::pow(std::pow(pm.q * (pm.m + 1.0), 1.0 / pm.m) * (lipschitz_k + 1.0), pm.m + 1.0);
}

/// Convergence of the scheme started from a discretized Lipschitz CDF toward
/// the variational solution at time T, across mesh refinements N. The error
/// should shrink like N^{-1/2}; the verdict requires errors to decrease and
/// err * sqrt(N) to stay within 10x its value at the coarsest mesh.
inline RunReport run_lipschitz_convergence(const PiecewiseLinearCdf& u0, const ModelParams& pm,
                                           std::span<const long long> n_list, double T = 1.0) {
    if (n_list.empty()) throw std::invalid_argument("run_lipschitz_convergence: empty N list");
    if (!(T > 0.0)) throw std::invalid_argument("run_lipschitz_convergence: T must be > 0");
    const double K = u0.lipschitz_constant();
    const double n0 = min_step_count(pm, K);
    for (long long n : n_list)
        if (static_cast<double>(n) < n0)
            throw std::invalid_argument(
                "run_lipschitz_convergence: N below the admissible minimum " +
                detail::format_double(n0));

    RunReport rep;
    rep.experiment = "lipschitz_convergence";
    rep.parameters = {{"m", detail::format_double(pm.m)},
                      {"q", detail::format_double(pm.q)},
                      {"T", detail::format_double(T)},
                      {"lipschitz_K", detail::format_double(K)},
                      {"min_N", detail::format_double(n0)}};
    rep.tolerance = 10.0;
    rep.note = "errors must decrease and err*sqrt(N) must stay within 10x of its first value";

    std::function<double(double)> u0_fn = [&](double x) { return u0(x); };
    for (long long n : n_list) {
        const auto mesh = SchemeMesh::from_step_count(n, pm);
        const auto init = discretize_cdf(u0, mesh.dx);
        const long long steps = static_cast<long long>(std::floor(static_cast<double>(n) * T));
        const auto evolved = evolve(init, StepLaw::bernoulli(pm.q), pm, steps);

        long long lo = evolved.finite_part_empty() ? -1 : evolved.min_site() - 2;
        long long hi = evolved.finite_part_empty() ? 1 : evolved.max_site() + 2;
        double err = 0.0;
        for (long long k = lo; k <= hi; ++k) {
            double ref = hopf_lax_numeric(u0_fn, static_cast<double>(k) * mesh.dx, T, pm);
            err = std::max(err, std::abs(evolved.cdf_at(k) - ref));
        }
        rep.series.emplace_back(static_cast<double>(n), err);
    }

    rep.fitted_rate = detail::fit_loglog_slope(rep.series);
    bool decreasing = true;
    for (std::size_t i = 1; i < rep.series.size(); ++i)
        decreasing &= rep.series[i].second < rep.series[i - 1].second + 1e-15;
    const double base = rep.series.front().second *
                        std::sqrt(rep.series.front().first);
    bool bounded = true;
    for (auto [n, err] : rep.series)
        bounded &= err * std::sqrt(n) <= rep.tolerance * std::max(base, 1e-15);
    rep.pass = decreasing && bounded;
    return rep;
}

/// Rescaled exact evolution from a fixed lattice law against the Beta limit
/// CDF, along increasing horizons.
inline RunReport run_dirac_limit(const ModelParams& pm, const LatticeDist& init,
                                 std::span<const long long> n_list, double tolerance = 0.05) {
    if (n_list.empty()) throw std::invalid_argument("run_dirac_limit: empty n list");
    if (init.mass_neg_inf() != 0.0 || init.mass_pos_inf() != 0.0)
        throw std::invalid_argument("run_dirac_limit: init must be supported on the lattice");

    RunReport rep;
    rep.experiment = "dirac_limit";
    rep.parameters = {{"m", detail::format_double(pm.m)}, {"q", detail::format_double(pm.q)}};
    rep.tolerance = tolerance;
    rep.note = "limit threshold is a pilot-calibrated regression baseline; no rate is asserted";

    const double edge = solution_edge(1.0, 0.0, 1.0, pm);
    const double branch[] = {0.0, edge};
    const auto grid = detail::sup_grid(-0.5, edge + 0.5, 2001, branch);

    LatticeDist cur = init;
    long long done = 0;
    const auto law = StepLaw::bernoulli(pm.q);
    for (long long n : n_list) {
        if (n < done) throw std::invalid_argument("run_dirac_limit: n list must increase");
        cur = evolve(cur, law, pm, n - done);
        done = n;
        double err = 0.0;
        for (double x : grid)
            err = std::max(err, std::abs(rescaled_cdf(cur, n, pm.m, x) - beta_limit_cdf(x, pm)));
        rep.series.emplace_back(static_cast<double>(n), err);
    }

    rep.fitted_rate = detail::fit_loglog_slope(rep.series);
    bool decreasing = true;
    for (std::size_t i = 1; i < rep.series.size(); ++i)
        decreasing &= rep.series[i].second < rep.series[i - 1].second + 1e-3;
    rep.pass = decreasing && rep.series.back().second < tolerance;
    return rep;
}

/// Lattice walk with g-sized steps started from residue masses pi: the
/// rescaled law (including the 1/g) against the Beta-mixture limit.
inline RunReport run_lattice_limit(const ModelParams& pm, long long g,
                                   std::span<const double> pi, long long n,
                                   double tolerance = 0.05) {
    if (static_cast<long long>(pi.size()) != g)
        throw std::invalid_argument("run_lattice_limit: pi length must equal g");
    if (n < 1) throw std::invalid_argument("run_lattice_limit: n must be >= 1");

    RunReport rep;
    rep.experiment = "lattice_limit";
    std::string pi_str;
    for (double p : pi) pi_str += (pi_str.empty() ? "" : ",") + detail::format_double(p);
    rep.parameters = {{"m", detail::format_double(pm.m)},
                      {"q", detail::format_double(pm.q)},
                      {"g", std::to_string(g)},
                      {"pi", pi_str},
                      {"n", std::to_string(n)}};
    rep.tolerance = tolerance;

    // Residue-class masses: an atom of mass pi_r at site r, r = 1..g.
    std::vector<double> mass(static_cast<std::size_t>(g), 0.0);
    for (long long r = 1; r <= g; ++r) mass[static_cast<std::size_t>(r - 1)] = pi[static_cast<std::size_t>(r - 1)];
    const LatticeDist init(1, std::move(mass));
    const auto evolved = evolve(init, StepLaw::scaled_bernoulli(g, pm.q), pm, n);

    std::vector<double> branch = {0.0};
    double max_edge = 0.0;
    for (double p : pi) {
        if (p <= 0.0) continue;
        double e = mixture_component_edge(p, pm);
        branch.push_back(e);
        max_edge = std::max(max_edge, e);
    }
    const auto grid = detail::sup_grid(-0.5, max_edge + 0.5, 2001, branch);
    double err = 0.0;
    for (double x : grid)
        err = std::max(err, std::abs(rescaled_cdf(evolved, n, pm.m, static_cast<double>(g) * x) -
                                     mixture_limit_cdf(x, g, pi, pm)));
    rep.series.emplace_back(static_cast<double>(n), err);
    rep.pass = err < tolerance;
    return rep;
}

/// Law with frozen masses at -inf and +inf against the extended limit CDF.
inline RunReport run_extended_limit(const ModelParams& pm, double a, double b, long long n,
                                    double tolerance = 0.05) {
    if (!(a >= 0.0 && b <= 1.0 && a < b))
        throw std::invalid_argument("run_extended_limit: need 0 <= a < b <= 1");
    if (n < 1) throw std::invalid_argument("run_extended_limit: n must be >= 1");

    RunReport rep;
    rep.experiment = "extended_limit";
    rep.parameters = {{"m", detail::format_double(pm.m)},
                      {"q", detail::format_double(pm.q)},
                      {"a", detail::format_double(a)},
                      {"b", detail::format_double(b)},
                      {"n", std::to_string(n)}};
    rep.tolerance = tolerance;

    const LatticeDist init(0, {b - a}, a, 1.0 - b);
    const auto evolved = evolve(init, StepLaw::bernoulli(pm.q), pm, n);

    const double edge = solution_edge(1.0, a, b, pm);
    const double branch[] = {0.0, edge};
    const auto grid = detail::sup_grid(-0.5, edge + 0.5, 2001, branch);
    double err = 0.0;
    for (double x : grid)
        err = std::max(err,
                       std::abs(rescaled_cdf(evolved, n, pm.m, x) - extended_limit_cdf(x, a, b, pm)));
    rep.series.emplace_back(static_cast<double>(n), err);
    rep.pass = err < tolerance;
    return rep;
}

/// Evolves the process CDF between two discretized closed-form profiles (the
/// lower one level-shifted down by eps, the upper shifted up and spatially by
/// S(eps)) and checks the pointwise ordering at every step. With p*-bounded
/// data the ordering is preserved exactly, so any positive violation is a
/// failure.
inline RunReport run_sandwich_demo(const ModelParams& pm, double eps, long long n,
                                   const LatticeDist& init) {
    if (!(eps > 0.0 && eps < 0.5))
        throw std::invalid_argument("run_sandwich_demo: need 0 < eps < 1/2");
    if (n < 1) throw std::invalid_argument("run_sandwich_demo: n must be >= 1");
    if (init.mass_neg_inf() != 0.0 || init.mass_pos_inf() != 0.0)
        throw std::invalid_argument("run_sandwich_demo: init must be supported on the lattice");
    // The order-preserving region is the closed increment range [0, p*], so
    // atoms exactly at p* are admissible.
    const double ps = p_star(pm);
    if (init.max_atom() > ps)
        throw std::invalid_argument("run_sandwich_demo: init is not p*-bounded");

    const double dx = std::pow(static_cast<double>(n), -1.0 / (pm.m + 1.0));
    const double S = sandwich_shift(eps, pm);

    long long L = 0;
    while (init.cdf_at(L) > eps) --L;
    long long R = 0;
    while (init.cdf_at(R) < 1.0 - eps) ++R;

    const long long reach = static_cast<long long>(std::ceil(S / dx)) + 2;
    const long long lo = std::min(init.min_site(), L - reach) - 2;
    const long long hi = std::max(init.max_site(), R + reach) + n + 2;
    const auto size = static_cast<std::size_t>(hi - lo + 1);

    std::vector<double> lower(size), mid(size), upper(size);
    for (long long k = lo; k <= hi; ++k) {
        auto i = static_cast<std::size_t>(k - lo);
        double xk = static_cast<double>(k) * dx;
        upper[i] = u_ab_closed(static_cast<double>(k - L) * dx + S, eps, eps, 1.0, pm);
        lower[i] = u_ab_closed(static_cast<double>(k - R) * dx, eps, 0.0, 1.0 - eps, pm);
        mid[i] = init.cdf_at(k);
        (void)xk;
    }
    for (std::size_t i = 1; i < size; ++i) {
        if (upper[i] - upper[i - 1] > ps || lower[i] - lower[i - 1] > ps)
            throw std::invalid_argument(
                "run_sandwich_demo: n too small for eps, profile increments exceed p*");
    }

    RunReport rep;
    rep.experiment = "sandwich_ordering";
    rep.parameters = {{"m", detail::format_double(pm.m)},
                      {"q", detail::format_double(pm.q)},
                      {"eps", detail::format_double(eps)},
                      {"n", std::to_string(n)},
                      {"S", detail::format_double(S)},
                      {"L", std::to_string(L)},
                      {"R", std::to_string(R)}};
    rep.tolerance = 0.0;
    rep.note = "max pointwise ordering violation across all steps; expected exactly 0";

    auto violation = [&](const std::vector<double>& lo_v, const std::vector<double>& mid_v,
                         const std::vector<double>& up_v) {
        double worst = 0.0;
        for (std::size_t i = 0; i < lo_v.size(); ++i)
            worst = std::max({worst, lo_v[i] - mid_v[i], mid_v[i] - up_v[i]});
        return worst;
    };

    double max_violation = violation(lower, mid, upper);
    rep.series.emplace_back(0.0, max_violation);
    for (long long step = 1; step <= n; ++step) {
        lower = step_cdf(lower, pm).values;
        mid = step_cdf(mid, pm).values;
        upper = step_cdf(upper, pm).values;
        double v = violation(lower, mid, upper);
        max_violation = std::max(max_violation, v);
        rep.series.emplace_back(static_cast<double>(step), v);
    }
    rep.pass = max_violation <= rep.tolerance;
    rep.parameters["max_violation"] = detail::format_double(max_violation);
    return rep;
}

/// Growth-exponent probe for the at-least-l-of-m walk: fits the slope of
/// log median(X_n) against log n and compares with 1/(l+1). The exponent is
/// a conjecture, so the report is informational.
inline RunReport run_l_of_m_exponent(const ModelParams& pm, int l,
                                     std::span<const long long> n_list,
                                     double slope_tolerance = 0.05) {
    if (n_list.empty()) throw std::invalid_argument("run_l_of_m_exponent: empty n list");
    const int m = pm.m_as_int();
    if (l < 1 || l > m) throw std::invalid_argument("run_l_of_m_exponent: need 1 <= l <= m");

    RunReport rep;
    rep.experiment = "l_of_m_exponent";
    rep.parameters = {{"m", std::to_string(m)},
                      {"q", detail::format_double(pm.q)},
                      {"l", std::to_string(l)},
                      {"expected_slope", detail::format_double(1.0 / (l + 1.0))}};
    rep.tolerance = slope_tolerance;
    rep.informational = true;
    rep.note = "conjecture probe: measures the growth exponent, asserts nothing about the limit law";

    LatticeDist cur = LatticeDist::point_mass(0);
    long long done = 0;
    for (long long n : n_list) {
        if (n < done) throw std::invalid_argument("run_l_of_m_exponent: n list must increase");
        cur = evolve_l_of_m(cur, pm, l, n - done);
        done = n;
        long long median = cur.min_site();
        while (cur.cdf_at(median + 1) < 0.5) ++median;
        rep.series.emplace_back(static_cast<double>(n), static_cast<double>(median));
    }

    double slope = detail::fit_loglog_slope(rep.series);
    rep.fitted_rate = slope;
    rep.pass = std::isfinite(slope) && std::abs(slope - 1.0 / (l + 1.0)) <= slope_tolerance;
    return rep;
}

}  // namespace coopmotion
