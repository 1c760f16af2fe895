// Command-line front end: exact evolution, trajectory sampling, closed-form
// references, and the scripted experiments, each as a subcommand.
//
// Exit codes: 0 success (and every verdict PASS), 1 a verdict FAILed,
// 2 usage or configuration error.

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "coopmotion/evolution.hpp"
#include "coopmotion/harness.hpp"
#include "coopmotion/hj_reference.hpp"
#include "coopmotion/lattice_dist.hpp"
#include "coopmotion/montecarlo.hpp"

namespace cm = coopmotion;

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) out.push_back(cur);
    return out;
}

// Mini-grammar shared by --init and --step: comma-separated `site:mass`
// pairs, with `-inf:mass` / `+inf:mass` allowed for distributions.
std::vector<std::pair<std::string, double>> parse_pairs(const std::string& spec) {
    std::vector<std::pair<std::string, double>> out;
    for (const auto& item : split(spec, ',')) {
        auto colon = item.rfind(':');
        if (colon == std::string::npos)
            throw CLI::ValidationError("expected `site:mass` pairs, got '" + item + "'");
        out.emplace_back(item.substr(0, colon), std::stod(item.substr(colon + 1)));
    }
    return out;
}

cm::LatticeDist parse_init(const std::string& spec) {
    std::string text;
    for (auto& [key, value] : parse_pairs(spec))
        text += key + " " + cm::detail::format_double(value) + "\n";
    return cm::parse_dist_text(text);
}

cm::StepLaw parse_step(const std::string& spec, double q) {
    if (spec.empty() || spec == "bernoulli") return cm::StepLaw::bernoulli(q);
    std::vector<std::pair<long long, double>> atoms;
    for (auto& [key, value] : parse_pairs(spec)) atoms.emplace_back(std::stoll(key), value);
    return cm::StepLaw(atoms);
}

std::vector<long long> parse_ll_list(const std::string& s) {
    std::vector<long long> out;
    for (const auto& item : split(s, ',')) out.push_back(std::stoll(item));
    return out;
}

std::vector<double> parse_double_list(const std::string& s) {
    std::vector<double> out;
    for (const auto& item : split(s, ',')) out.push_back(std::stod(item));
    return out;
}

std::string pmf_csv(const cm::LatticeDist& d) {
    std::ostringstream os;
    if (d.mass_neg_inf() > 0.0) os << "-inf," << cm::detail::format_double(d.mass_neg_inf()) << "\n";
    if (!d.finite_part_empty())
        for (long long k = d.min_site(); k <= d.max_site(); ++k)
            os << k << "," << cm::detail::format_double(d.pmf_at(k)) << "\n";
    if (d.mass_pos_inf() > 0.0) os << "+inf," << cm::detail::format_double(d.mass_pos_inf()) << "\n";
    return os.str();
}

void emit_report(cm::RunReport& rep, const std::string& json_path, const std::string& csv_path) {
    if (!csv_path.empty()) cm::write_series_csv(rep, csv_path);
    if (!json_path.empty()) cm::write_report_json(rep, json_path);
    std::cout << rep.experiment << ": " << (rep.pass ? "PASS" : "FAIL")
              << (rep.informational ? " (informational)" : "") << "\n";
    if (rep.fitted_rate && std::isfinite(*rep.fitted_rate))
        std::cout << "  fitted rate: " << cm::detail::format_double(*rep.fitted_rate) << "\n";
    for (auto [n, err] : rep.series)
        std::cout << "  n=" << cm::detail::format_double(n)
                  << "  value=" << cm::detail::format_double(err) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Numerical laboratory for cooperative lattice walks"};
    app.set_config("--config", "", "Config file with key=value lines; flags win on conflict");
    app.require_subcommand(1);

    double m = 1.0, q = 0.5;
    app.add_option("--m", m, "Cooperation exponent (real >= 1)")->capture_default_str();
    app.add_option("--q", q, "Move probability in (0,1)")->capture_default_str();

    // evolve
    auto* sc_evolve = app.add_subcommand("evolve", "Exact n-step distribution evolution");
    std::string ev_init = "0:1", ev_step, ev_out;
    long long ev_n = 0;
    int ev_l = 0;
    sc_evolve->add_option("--init", ev_init, "Initial distribution, `site:mass,...`");
    sc_evolve->add_option("--step", ev_step, "Step law `d:prob,...` (default Bernoulli(q))");
    sc_evolve->add_option("--n", ev_n, "Step count")->required();
    sc_evolve->add_option("--l", ev_l, "Use the at-least-l-of-m walk (integer m)");
    sc_evolve->add_option("--out", ev_out, "Output pmf CSV (site,mass)")->required();

    // simulate
    auto* sc_sim = app.add_subcommand("simulate", "Monte Carlo endpoint distribution");
    std::string sim_init = "0:1", sim_step, sim_out;
    long long sim_n = 0, sim_paths = 10000, sim_particles = 0;
    std::uint64_t sim_seed = 1;
    bool sim_compare = false;
    sc_sim->add_option("--init", sim_init, "Initial distribution");
    sc_sim->add_option("--step", sim_step, "Step law (default Bernoulli(q))");
    sc_sim->add_option("--n", sim_n, "Horizon")->required();
    sc_sim->add_option("--paths", sim_paths, "Trajectories (exact-marginal sampler)");
    sc_sim->add_option("--particles", sim_particles,
                       "Use the mean-field particle system with this many particles");
    sc_sim->add_option("--seed", sim_seed, "RNG seed");
    sc_sim->add_flag("--compare-exact", sim_compare, "Print sup CDF distance to the exact law");
    sc_sim->add_option("--out", sim_out, "Output empirical pmf CSV")->required();

    // reference
    auto* sc_ref = app.add_subcommand("reference", "Closed-form and numeric reference values");
    std::string ref_kind = "beta", ref_pi;
    double ref_x = 0.0, ref_t = 1.0, ref_a = 0.0, ref_b = 1.0, ref_p = 0.0, ref_width = 0.0;
    long long ref_g = 1, ref_points = 400001;
    sc_ref->add_option("--kind", ref_kind,
                       "beta|solution|extended|mixture|legendre|legendre-numeric|hopflax")
        ->check(CLI::IsMember({"beta", "solution", "extended", "mixture", "legendre",
                               "legendre-numeric", "hopflax"}));
    sc_ref->add_option("--x", ref_x, "Evaluation point");
    sc_ref->add_option("--t", ref_t, "Time (solution/hopflax)");
    sc_ref->add_option("--a", ref_a, "Lower level");
    sc_ref->add_option("--b", ref_b, "Upper level");
    sc_ref->add_option("--p", ref_p, "Legendre argument");
    sc_ref->add_option("--g", ref_g, "Lattice step size (mixture)");
    sc_ref->add_option("--pi", ref_pi, "Residue masses, comma separated (mixture)");
    sc_ref->add_option("--width", ref_width, "Half-width of the numeric Legendre grid (0 = auto)");
    sc_ref->add_option("--points", ref_points, "Grid points for numeric kinds");

    // converge
    auto* sc_conv = app.add_subcommand("converge", "Mesh-refinement convergence for Lipschitz data");
    std::string conv_nlist = "1000,10000,100000", conv_knots = "0:0,1:1", conv_json, conv_csv;
    double conv_T = 1.0;
    sc_conv->add_option("--N-list", conv_nlist, "Comma-separated mesh step counts");
    sc_conv->add_option("--knots", conv_knots, "Piecewise-linear CDF knots `x:value,...`");
    sc_conv->add_option("--T", conv_T, "Comparison time");
    sc_conv->add_option("--report", conv_json, "Report JSON path");
    sc_conv->add_option("--csv", conv_csv, "Series CSV path");

    // lattice
    auto* sc_lat = app.add_subcommand("lattice", "Lattice-step walk vs Beta-mixture limit");
    std::string lat_pi = "0.5,0.3,0.2", lat_json, lat_csv;
    long long lat_g = 3, lat_n = 10000;
    double lat_tol = 0.05;
    sc_lat->add_option("--g", lat_g, "Step size");
    sc_lat->add_option("--pi", lat_pi, "Residue masses");
    sc_lat->add_option("--n", lat_n, "Horizon");
    sc_lat->add_option("--tol", lat_tol, "Sup-error tolerance");
    sc_lat->add_option("--report", lat_json, "Report JSON path");
    sc_lat->add_option("--csv", lat_csv, "Series CSV path");

    // extended
    auto* sc_ext = app.add_subcommand("extended", "Walk with frozen +-inf masses vs extended limit");
    std::string ext_json, ext_csv;
    double ext_a = 0.25, ext_b = 0.75, ext_tol = 0.05;
    long long ext_n = 10000;
    sc_ext->add_option("--a", ext_a, "Mass at -inf");
    sc_ext->add_option("--b", ext_b, "1 - mass at +inf");
    sc_ext->add_option("--n", ext_n, "Horizon");
    sc_ext->add_option("--tol", ext_tol, "Sup-error tolerance");
    sc_ext->add_option("--report", ext_json, "Report JSON path");
    sc_ext->add_option("--csv", ext_csv, "Series CSV path");

    // sandwich
    auto* sc_sand = app.add_subcommand("sandwich", "Ordering between closed-form sandwich profiles");
    std::string sand_init = "0:1", sand_json, sand_csv;
    double sand_eps = 0.1;
    long long sand_n = 1000;
    sc_sand->add_option("--eps", sand_eps, "Level margin, in (0, 1/2)");
    sc_sand->add_option("--n", sand_n, "Steps");
    sc_sand->add_option("--init", sand_init, "Initial distribution (p*-bounded)");
    sc_sand->add_option("--report", sand_json, "Report JSON path");
    sc_sand->add_option("--csv", sand_csv, "Series CSV path");

    // lofm
    auto* sc_lofm = app.add_subcommand("lofm", "Growth exponent of the at-least-l-of-m walk");
    std::string lofm_nlist = "100,1000,10000,100000", lofm_json, lofm_csv;
    int lofm_l = 1;
    double lofm_tol = 0.05;
    sc_lofm->add_option("--l", lofm_l, "Required matches (1 <= l <= m)");
    sc_lofm->add_option("--n-list", lofm_nlist, "Horizons");
    sc_lofm->add_option("--tol", lofm_tol, "Slope tolerance");
    sc_lofm->add_option("--report", lofm_json, "Report JSON path");
    sc_lofm->add_option("--csv", lofm_csv, "Series CSV path");

    // counterexample
    auto* sc_ce = app.add_subcommand("counterexample",
                                     "Search for an order-breaking CDF pair under a step law");
    std::string ce_step = "0:0.5,2:0.5";
    long long ce_trials = 10000;
    std::uint64_t ce_seed = 1;
    sc_ce->add_option("--step", ce_step, "Step law `d:prob,...`");
    sc_ce->add_option("--trials", ce_trials, "Random trials after the deterministic constructions");
    sc_ce->add_option("--seed", ce_seed, "RNG seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        cm::ModelParams pm(m, q);

        if (*sc_evolve) {
            auto init = parse_init(ev_init);
            cm::LatticeDist out = ev_l > 0 ? cm::evolve_l_of_m(init, pm, ev_l, ev_n)
                                           : cm::evolve(init, parse_step(ev_step, q), pm, ev_n);
            cm::detail::write_file_atomic(ev_out, pmf_csv(out));
            return 0;
        }

        if (*sc_sim) {
            cm::TrajectoryConfig cfg(pm, parse_step(sim_step, q), parse_init(sim_init), sim_n,
                                     sim_paths, sim_seed);
            cm::LatticeDist emp = sim_particles > 0
                                      ? cm::sample_particle_system(cfg, sim_particles)
                                      : cm::sample_ensemble(cfg);
            cm::detail::write_file_atomic(sim_out, pmf_csv(emp));
            if (sim_compare) {
                auto exact = cm::evolve(cfg.init, cfg.step, pm, sim_n);
                std::cout << "sup_cdf_distance="
                          << cm::detail::format_double(cm::sup_cdf_distance(emp, exact))
                          << " dkw=" << cm::detail::format_double(cm::dkw_bound(sim_paths)) << "\n";
            }
            return 0;
        }

        if (*sc_ref) {
            double value = 0.0;
            if (ref_kind == "beta") {
                value = cm::beta_limit_cdf(ref_x, pm);
            } else if (ref_kind == "solution") {
                value = cm::u_ab_closed(ref_x, ref_t, ref_a, ref_b, pm);
            } else if (ref_kind == "extended") {
                value = cm::extended_limit_cdf(ref_x, ref_a, ref_b, pm);
            } else if (ref_kind == "mixture") {
                auto pi = parse_double_list(ref_pi);
                value = cm::mixture_limit_cdf(ref_x, ref_g, pi, pm);
            } else if (ref_kind == "legendre") {
                value = cm::legendre_closed(ref_p, pm);
            } else if (ref_kind == "legendre-numeric") {
                double w = ref_width > 0.0
                               ? ref_width
                               : 2.0 * std::pow(std::abs(ref_p) / (pm.q * (pm.m + 1.0)), 1.0 / pm.m) + 1.0;
                value = cm::legendre_numeric(ref_p, pm, w, ref_points);
            } else {  // hopflax
                double a = ref_a, b = ref_b;
                value = cm::hopf_lax_numeric(
                    [a, b](double y) { return y > 0.0 ? b : a; }, ref_x, ref_t, pm);
            }
            std::cout << cm::detail::format_double(value) << "\n";
            return 0;
        }

        if (*sc_conv) {
            std::vector<std::pair<double, double>> knots;
            for (auto& [key, value] : parse_pairs(conv_knots))
                knots.emplace_back(std::stod(key), value);
            auto n_list = parse_ll_list(conv_nlist);
            auto rep = cm::run_lipschitz_convergence(cm::PiecewiseLinearCdf(knots), pm, n_list,
                                                     conv_T);
            emit_report(rep, conv_json, conv_csv);
            return rep.pass ? 0 : 1;
        }

        if (*sc_lat) {
            auto pi = parse_double_list(lat_pi);
            auto rep = cm::run_lattice_limit(pm, lat_g, pi, lat_n, lat_tol);
            emit_report(rep, lat_json, lat_csv);
            return rep.pass ? 0 : 1;
        }

        if (*sc_ext) {
            auto rep = cm::run_extended_limit(pm, ext_a, ext_b, ext_n, ext_tol);
            emit_report(rep, ext_json, ext_csv);
            return rep.pass ? 0 : 1;
        }

        if (*sc_sand) {
            auto rep = cm::run_sandwich_demo(pm, sand_eps, sand_n, parse_init(sand_init));
            emit_report(rep, sand_json, sand_csv);
            return rep.pass ? 0 : 1;
        }

        if (*sc_lofm) {
            auto n_list = parse_ll_list(lofm_nlist);
            auto rep = cm::run_l_of_m_exponent(pm, lofm_l, n_list, lofm_tol);
            emit_report(rep, lofm_json, lofm_csv);
            return rep.pass ? 0 : 1;
        }

        if (*sc_ce) {
            auto law = parse_step(ce_step, q);
            auto v = cm::find_monotonicity_violation(law, pm, ce_trials, ce_seed);
            if (!v) {
                std::cout << "none\n";
                return 0;
            }
            auto print_cdf = [&](const char* name, const std::vector<double>& f) {
                std::cout << name << ":";
                for (double x : f) std::cout << " " << cm::detail::format_double(x);
                std::cout << "\n";
            };
            std::cout << "ordering violated at site " << v->site << ": lower image "
                      << cm::detail::format_double(v->lower_image) << " > upper image "
                      << cm::detail::format_double(v->upper_image) << "\n";
            print_cdf("lower", v->lower_cdf);
            print_cdf("upper", v->upper_cdf);
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
