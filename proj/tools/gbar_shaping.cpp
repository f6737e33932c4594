// gbar_shaping: command-line front end for the velocity-shaping library.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gbar/config.hpp"
#include "gbar/core.hpp"
#include "gbar/gravstates.hpp"
#include "gbar/montecarlo.hpp"
#include "gbar/quasiclassical.hpp"
#include "gbar/shaper.hpp"
#include "gbar/wavepacket.hpp"

#ifndef GBAR_SHAPING_VERSION
#define GBAR_SHAPING_VERSION "dev"
#endif

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace gbar;

namespace {

constexpr int exit_config = 2;
constexpr int exit_numerical = 3;

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

/// A table with string cells; written as CSV or as a JSON array of records.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    void add(std::vector<double> values) {
        std::vector<std::string> r;
        for (double v : values) r.push_back(num(v));
        rows.push_back(std::move(r));
    }
    void add_cells(std::vector<std::string> cells) { rows.push_back(std::move(cells)); }

    std::string csv() const {
        std::ostringstream os;
        for (std::size_t i = 0; i < columns.size(); ++i) os << (i ? "," : "") << columns[i];
        os << '\n';
        for (const auto& r : rows) {
            for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
            os << '\n';
        }
        return os.str();
    }

    json records() const {
        json arr = json::array();
        for (const auto& r : rows) {
            json o = json::object();
            for (std::size_t i = 0; i < columns.size(); ++i) {
                char* end = nullptr;
                const double d = std::strtod(r[i].c_str(), &end);
                if (end && *end == '\0' && !r[i].empty())
                    o[columns[i]] = d;
                else
                    o[columns[i]] = r[i];
            }
            arr.push_back(std::move(o));
        }
        return arr;
    }
};

struct Run {
    std::string subcommand;  // e.g. "montecarlo", "reproduce"
    std::string name;        // file stem, e.g. "reproduce_fig5"
    Config cfg;
    std::uint64_t seed = 12345;
    fs::path out = ".";
    std::string format = "csv";
    std::map<std::string, std::string> args;
    std::vector<std::string> outputs;

    void write_file(const std::string& filename, const std::string& content) {
        fs::create_directories(out);
        std::ofstream f(out / filename, std::ios::binary);
        if (!f) throw ConfigError("cannot write " + (out / filename).string());
        f << content;
        outputs.push_back(filename);
    }

    void write_table(const std::string& stem, const Table& t) {
        if (format == "json")
            write_file(stem + ".json", t.records().dump(2) + "\n");
        else
            write_file(stem + ".csv", t.csv());
    }

    void write_json(const std::string& stem, const json& j) {
        write_file(stem + ".json", j.dump(2) + "\n");
    }

    std::string arg(const std::string& key, const std::string& fallback = "") const {
        auto it = args.find(key);
        return it == args.end() ? fallback : it->second;
    }

    void write_manifest() {
        json m;
        m["subcommand"] = subcommand;
        m["name"] = name;
        m["version"] = GBAR_SHAPING_VERSION;
        m["seed"] = seed;
        m["format"] = format;
        m["arguments"] = args;
        m["config"] = to_ini(cfg);
        m["outputs"] = outputs;
        fs::create_directories(out);
        std::ofstream f(out / (name + ".manifest.json"), std::ios::binary);
        f << m.dump(2) << '\n';
    }
};

// ---------------------------------------------------------------- helpers

double resolved_absorber(Run& run) {
    static std::map<std::string, double> cache;
    if (run.cfg.geometry.absorber_strength >= 0) return run.cfg.geometry.absorber_strength;
    const std::string key = num(run.cfg.shaper.v_hor) + "/" + num(run.cfg.constants.gbar) + "/" +
                            num(run.cfg.constants.mass);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    const auto cal =
        shaper::calibrate_absorber(24e-6, 0.05, run.cfg.shaper.v_hor, 0.72, run.cfg.constants);
    cache[key] = cal.absorber_strength;
    return cal.absorber_strength;
}

json stats_json(const wavepacket::TimingDistribution& d, double t_h) {
    json j;
    j["source"] = d.source;
    j["samples"] = d.times.size();
    j["window_start_s"] = d.times.front();
    j["window_end_s"] = d.times.back();
    j["integral"] = d.integral;
    j["mean_s"] = d.mean;
    j["mode_s"] = d.mode;
    j["std_s"] = d.stddev;
    j["std_over_t_H"] = d.stddev / t_h;
    j["skew"] = d.skew;
    j["min_flux_per_s"] = d.min_flux;
    j["negative_integral"] = d.negative_integral;
    return j;
}

Table flux_table(const wavepacket::TimingDistribution& d) {
    Table t{{"t (s)", "flux (1/s)"}, {}};
    for (std::size_t i = 0; i < d.times.size(); ++i) t.add({d.times[i], d.flux[i]});
    return t;
}

wavepacket::TimingDistribution gaussian_flux(const TrapConfig& trap, const PhysicsConstants& c,
                                             const WavepacketSettings& w) {
    const double t_h = free_fall_scales(trap.height, c).time;
    const auto disp = trap_dispersions(trap, c);
    const double dt = t_h * quasiclassical::free_fall_spread(disp.zeta, disp.upsilon, trap.height, c);
    const auto times = wavepacket::adaptive_time_grid(t_h, w.core_widths * dt, 0.0, 3.0 * t_h,
                                                      static_cast<std::size_t>(w.core_points),
                                                      static_cast<std::size_t>(w.wing_points));
    return wavepacket::analytic_flux(trap, times, c);
}

wavepacket::TimingDistribution state_flux(int n, const Config& cfg) {
    const auto psi0 = gravstates::sample_state(n, cfg.constants, cfg.trap.height,
                                               static_cast<std::size_t>(cfg.wavepacket.grid_points));
    wavepacket::FluxWindow w;
    w.core_widths = cfg.wavepacket.core_widths;
    w.wing_widths = cfg.wavepacket.wing_widths;
    w.core_points = static_cast<std::size_t>(cfg.wavepacket.core_points);
    w.wing_points = static_cast<std::size_t>(cfg.wavepacket.wing_points);
    return wavepacket::numerical_flux(psi0, cfg.constants, w);
}

// ---------------------------------------------------------------- estimate

Table estimate_table(const Config& cfg, json& summary) {
    const auto& c = cfg.constants;
    const double H = cfg.trap.height;
    const auto opt = quasiclassical::optimal_initial_size(H, c);
    const double n_tot = cfg.estimate.n_tot;
    summary["zeta_opt_m"] = opt.zeta_opt;
    summary["spread_opt"] = opt.spread_opt;
    summary["optimal_resolution_total"] = quasiclassical::optimal_resolution(H, n_tot, c);
    const double ups = trap_dispersions(cfg.resolved_trap(), c).upsilon;
    summary["upsilon_m_per_s"] = ups;
    summary["unshaped_resolution_total"] = quasiclassical::unshaped_resolution(ups, H, n_tot, c);

    Table t{{"case", "h (m)", "upsilon (m/s)", "delta_v (m/s)", "acceptance", "n_accepted",
             "dt_over_t", "dg_over_g_per_event", "dg_over_g_total", "r_max_over_sqrt_eps (m)",
             "R_min_over_sqrt_eps (m)", "h_max (m)", "improvement_ratio", "beta"},
            {}};
    auto row = [&](const std::string& name, double h, double upsilon, double beta, double ntot) {
        const auto rep = quasiclassical::shaped_resolution(h, H, beta, upsilon, ntot, c,
                                                           cfg.estimate.alpha);
        const auto geo = quasiclassical::geometry_bounds(h, upsilon, 1.0, c);
        t.add_cells({name, num(h), num(upsilon), num(rep.delta_v), num(rep.acceptance),
                     num(rep.n_accepted), num(rep.dt_over_t), num(rep.dg_over_g_per_event),
                     num(rep.dg_over_g_total), num(geo.r_max), num(geo.R_min), num(geo.h_max),
                     num(quasiclassical::improvement_ratio(h, beta, upsilon, c)), num(beta)});
    };
    for (int id = 1; id <= 3; ++id) {
        const auto dc = quasiclassical::design_case(id);
        row(dc.name, dc.slit_height, dc.upsilon, cfg.estimate.beta, dc.n_tot);
    }
    const double h3 = quasiclassical::design_case(3).slit_height;
    row("ground-state-20um-quantum-beta", h3, 0.44, shaper::shaped_spread(h3, H, {}, c).beta_effective,
        2.6e4);
    if (cfg.geometry.slit_height < quasiclassical::max_slit_height(ups, c))
        row("config", cfg.geometry.slit_height, ups, cfg.estimate.beta, n_tot);
    return t;
}

int cmd_estimate(Run& run) {
    json summary;
    const Table t = estimate_table(run.cfg, summary);
    summary["cases"] = t.records();
    run.write_json("estimate", summary);

    if (run.format == "json") {
        std::cout << summary.dump(2) << '\n';
        return 0;
    }
    std::printf("zeta_opt                 %.4g m\n", summary["zeta_opt_m"].get<double>());
    std::printf("(dt/t_H)_opt             %.4g\n", summary["spread_opt"].get<double>());
    std::printf("optimal dg/g, one month  %.4g\n", summary["optimal_resolution_total"].get<double>());
    std::printf("unshaped dg/g, one month %.4g\n", summary["unshaped_resolution_total"].get<double>());
    std::printf("\n%-32s %10s %10s %10s %10s %10s %12s %12s\n", "case", "h (m)", "accept",
                "N", "dt/t", "dg/g", "r_max/rt(e)", "R_min/rt(e)");
    for (const auto& r : t.rows)
        std::printf("%-32s %10.4g %10.4g %10.4g %10.4g %10.4g %12.4g %12.4g\n", r[0].c_str(),
                    std::stod(r[1]), std::stod(r[4]), std::stod(r[5]), std::stod(r[6]),
                    std::stod(r[8]), std::stod(r[9]), std::stod(r[10]));
    return 0;
}

// ---------------------------------------------------------------- wavepacket

int cmd_wavepacket(Run& run) {
    const int state = std::stoi(run.arg("state", std::to_string(run.cfg.wavepacket.state)));
    const auto& c = run.cfg.constants;
    const double t_h = free_fall_scales(run.cfg.trap.height, c).time;
    wavepacket::TimingDistribution d;
    json stats;
    if (state <= 0) {
        const TrapConfig trap = run.cfg.resolved_trap();
        d = gaussian_flux(trap, c, run.cfg.wavepacket);
        const auto disp = trap_dispersions(trap, c);
        stats = stats_json(d, t_h);
        stats["initial"] = "gaussian";
        stats["zeta_m"] = disp.zeta;
        stats["predicted_std_s"] =
            t_h * quasiclassical::free_fall_spread(disp.zeta, disp.upsilon, trap.height, c);
    } else {
        d = state_flux(state, run.cfg);
        stats = stats_json(d, t_h);
        stats["initial"] = "gravitational_state";
        stats["state"] = state;
        stats["predicted_std_s"] =
            t_h * gravstates::dispersion_spread_estimate(state, run.cfg.trap.height, c).full;
    }
    run.write_table("wavepacket_flux", flux_table(d));
    run.write_json("wavepacket_stats", stats);
    std::printf("arrival-time std %.6g s, mean %.6g s, skew %.4g (%s)\n", d.stddev, d.mean, d.skew,
                d.source.c_str());
    return 0;
}

// ---------------------------------------------------------------- gravstates

void gravstate_outputs(Run& run, int count, const std::string& prefix, json& stats) {
    const auto& c = run.cfg.constants;
    Table table{{"n", "lambda", "energy (peV)", "dz (m)", "dv (m/s)"}, {}};
    for (int n = 1; n <= count; ++n) {
        const auto s = gravstates::eigenstate(n, c);
        const auto d = gravstates::state_dispersions(n, c);
        table.add({double(n), s.lambda, s.energy / constants::electron_volt * 1e12, d.dz, d.dv});
    }
    run.write_table(prefix + "_table", table);

    const double l = gravitational_length(c);
    const double z_max = l * (airy::airy_zero(count) + 5.0);
    Table psi{{"z (m)"}, {}};
    for (int n = 1; n <= count; ++n) psi.columns.push_back("psi_" + std::to_string(n) + " (m^-1/2)");
    std::vector<gravstates::GravState> states;
    for (int n = 1; n <= count; ++n) states.push_back(gravstates::eigenstate(n, c));
    for (int i = 0; i <= 2000; ++i) {
        const double z = z_max * i / 2000.0;
        std::vector<double> r{z};
        for (const auto& s : states) r.push_back(s.amplitude(z));
        psi.add(r);
    }
    run.write_table(prefix + "_psi", psi);

    Table vel{{"n", "v (m/s)", "density (s/m)"}, {}};
    json widths = json::array();
    for (int n = 1; n <= count; ++n) {
        const auto vd = gravstates::velocity_distribution(
            n, c, static_cast<std::size_t>(run.cfg.gravstates.points),
            static_cast<std::size_t>(run.cfg.gravstates.padding));
        const double lim = 6.0 * vd.stddev;
        for (std::size_t i = 0; i < vd.velocity.size(); ++i)
            if (std::abs(vd.velocity[i]) <= lim) vel.add({double(n), vd.velocity[i], vd.density[i]});
        widths.push_back({{"n", n}, {"std_m_per_s", vd.stddev}, {"mean_m_per_s", vd.mean},
                          {"raw_integral", vd.raw_integral},
                          {"closed_form_dv_m_per_s", gravstates::state_dispersions(n, c).dv}});
    }
    run.write_table(prefix + "_velocity", vel);
    stats["gravitational_length_m"] = l;
    stats["velocity_widths"] = widths;
}

int cmd_gravstates(Run& run) {
    const int count = std::stoi(run.arg("count", std::to_string(run.cfg.gravstates.count)));
    if (count < 1) throw ConfigError("gravstates count must be >= 1");
    json stats;
    gravstate_outputs(run, count, "gravstates", stats);
    run.write_json("gravstates_stats", stats);
    std::printf("%4s %12s %14s %12s %12s\n", "n", "lambda", "E (peV)", "dz (um)", "dv (mm/s)");
    for (int n = 1; n <= count; ++n) {
        const auto s = gravstates::eigenstate(n, run.cfg.constants);
        const auto d = gravstates::state_dispersions(n, run.cfg.constants);
        std::printf("%4d %12.8f %14.6f %12.4f %12.4f\n", n, s.lambda,
                    s.energy / constants::electron_volt * 1e12, d.dz * 1e6, d.dv * 1e3);
    }
    return 0;
}

// ---------------------------------------------------------------- shaper

Table shaper_sweep(Run& run, json& stats) {
    const auto& c = run.cfg.constants;
    const auto& sh = run.cfg.shaper;
    const double s = resolved_absorber(run);
    const double h_min = std::stod(run.arg("h_min", num(sh.sweep_h_min)));
    const double h_max = std::stod(run.arg("h_max", num(sh.sweep_h_max)));
    const int points = std::stoi(run.arg("points", std::to_string(sh.sweep_points)));
    if (points < 1 || !(h_max >= h_min) || !(h_min > 0)) throw ConfigError("empty slit-height range");

    Table t{{"h (m)", "T1", "T2", "n_max", "beta_eff", "survival"}, {}};
    auto geometry_at = [&](double h) {
        ShaperGeometry g = run.cfg.geometry;
        g.slit_height = h;
        g.absorber_strength = s;
        return g;
    };
    for (int i = 0; i < points; ++i) {
        const double h = points == 1 ? h_min : h_min + (h_max - h_min) * i / (points - 1);
        const ShaperGeometry g = geometry_at(h);
        const auto ens = shaper::shape_ensemble(g, sh.v_hor, c);
        const auto modes = shaper::slit_modes(g, std::max(2, ens.n_max), c);
        const double t1 = shaper::transmission(modes[0], g, sh.v_hor, c);
        const double t2 = shaper::transmission(modes[1], g, sh.v_hor, c);
        const double beta = ens.survival() > 0
                                ? shaper::shaped_spread(h, run.cfg.trap.height, ens.normalized(), c)
                                      .beta_effective
                                : std::nan("");
        t.add({h, t1, t2, double(ens.n_max), beta, ens.survival()});
    }
    const ShaperGeometry ref = [&] {
        ShaperGeometry g = geometry_at(24e-6);
        g.opening_radius = 1e-4;
        g.disk_radius = 1e-4 + 0.05;
        return g;
    }();
    const auto ref_modes = shaper::slit_modes(ref, 2, c);
    stats["absorber_strength"] = s;
    stats["v_hor_m_per_s"] = sh.v_hor;
    stats["T1_at_24um_5cm"] = shaper::transmission(ref_modes[0], ref, sh.v_hor, c);
    stats["T2_at_24um_5cm"] = shaper::transmission(ref_modes[1], ref, sh.v_hor, c);
    stats["reference_T1"] = 0.72;
    stats["reference_T2"] = 0.003;
    return t;
}

int cmd_shaper(Run& run) {
    json stats;
    const Table t = shaper_sweep(run, stats);
    run.write_table("shaper_sweep", t);
    run.write_json("shaper_stats", stats);
    std::printf("absorber strength %.6g; at h = 24 um over 5 cm: T1 = %.4f, T2 = %.3g\n",
                stats["absorber_strength"].get<double>(), stats["T1_at_24um_5cm"].get<double>(),
                stats["T2_at_24um_5cm"].get<double>());
    return 0;
}

// ---------------------------------------------------------------- montecarlo

montecarlo::ExperimentConfig experiment_config(const Config& cfg) {
    montecarlo::ExperimentConfig e;
    e.constants = cfg.constants;
    e.trap = cfg.resolved_trap();
    e.geometry = cfg.geometry;
    e.geometry.absorber_strength = std::max(0.0, e.geometry.absorber_strength);
    e.shaping = cfg.montecarlo.shaping;
    e.recoil_sigma = cfg.montecarlo.recoil;
    const auto& refl = cfg.montecarlo.reflection;
    if (refl == "ideal")
        e.reflection = montecarlo::ReflectionModel::ideal();
    else if (refl == "quantum")
        e.reflection = montecarlo::ReflectionModel::quantum_reflection();
    else if (refl == "table")
        e.reflection = montecarlo::ReflectionModel::from_file(cfg.montecarlo.reflection_table);
    else
        throw ConfigError("config key 'montecarlo.reflection': unknown model '" + refl + "'");
    e.transport.top_survival = cfg.montecarlo.top_survival;
    e.blur = {cfg.montecarlo.time_blur, cfg.montecarlo.position_blur};
    if (cfg.montecarlo.n_atoms < 1) throw ConfigError("montecarlo.n_atoms must be >= 1");
    e.n_atoms = static_cast<std::size_t>(cfg.montecarlo.n_atoms);
    e.histogram_bins = static_cast<std::size_t>(std::max(1, cfg.montecarlo.bins));
    e.bootstrap_resamples = static_cast<std::size_t>(std::max(10, cfg.montecarlo.bootstrap));
    e.trim_keep = cfg.montecarlo.trim;
    e.threads = static_cast<unsigned>(std::max(0, cfg.montecarlo.threads));
    return e;
}

int cmd_montecarlo(Run& run) {
    if (auto a = run.arg("atoms"); !a.empty()) run.cfg.montecarlo.n_atoms = std::stol(a);
    const auto ecfg = experiment_config(run.cfg);
    const auto r = montecarlo::run_experiment(ecfg, run.seed);

    Table hist{{"bin_center (s)", "count"}, {}};
    for (std::size_t i = 0; i < r.histogram.counts.size(); ++i)
        hist.add({r.histogram.center(i), double(r.histogram.counts[i])});
    run.write_table("montecarlo_histogram", hist);

    json fates;
    fates["n_atoms"] = r.n_atoms;
    fates["transmitted"] = r.tally.transmitted;
    fates["absorbed_top"] = r.tally.absorbed_top;
    fates["annihilated_mirror"] = r.tally.annihilated_mirror;
    fates["back_into_opening"] = r.tally.back_into_opening;
    fates["reentered_opening"] = r.tally.reentries;
    fates["extrapolated_reflection"] = r.tally.extrapolated_reflections;
    run.write_json("montecarlo_fates", fates);

    json est;
    est["n_accepted"] = r.corrected_times.size();
    est["acceptance"] = r.acceptance;
    est["correction_bias_s"] = r.correction_bias;
    est["max_energy_error"] = r.max_energy_error;
    if (r.estimate) {
        est["gbar_hat"] = r.estimate->gbar;
        est["ci_low"] = r.estimate->ci_low;
        est["ci_high"] = r.estimate->ci_high;
        est["ci_half_width_relative"] = r.estimate->half_width_relative();
        est["trimmed_mean_time_s"] = r.estimate->time;
        est["gbar_mode_fit"] = montecarlo::estimate_gbar_mode(r.corrected_times, ecfg.trap.height);
    } else {
        est["gbar_hat"] = nullptr;
    }
    run.write_json("montecarlo_estimate", est);
    std::printf("accepted %zu / %zu (%.4g)", r.corrected_times.size(), r.n_atoms, r.acceptance);
    if (r.estimate)
        std::printf("; gbar = %.6g [%.6g, %.6g]", r.estimate->gbar, r.estimate->ci_low,
                    r.estimate->ci_high);
    std::printf("\n");
    return 0;
}

// ---------------------------------------------------------------- reproduce

int cmd_reproduce(Run& run) {
    const std::string which = run.arg("case");
    const auto& c = run.cfg.constants;
    const double H = run.cfg.trap.height;
    const double t_h = free_fall_scales(H, c).time;
    json stats;
    stats["case"] = which;
    if (which == "fig2a") {
        const auto d = gaussian_flux(run.cfg.resolved_trap(), c, run.cfg.wavepacket);
        run.write_table(run.name, flux_table(d));
        stats.update(stats_json(d, t_h));
        stats["headline"] = {{"quantity", "std_s"}, {"value", d.stddev}, {"reference", 0.045}};
    } else if (which == "fig2b") {
        const auto opt = quasiclassical::optimal_initial_size(H, c);
        const auto trap = TrapConfig::with_position_dispersion(opt.zeta_opt, H, c, run.cfg.trap.epsilon);
        const auto d = gaussian_flux(trap, c, run.cfg.wavepacket);
        run.write_table(run.name, flux_table(d));
        stats.update(stats_json(d, t_h));
        stats["headline"] = {{"quantity", "std_over_t_H"}, {"value", d.stddev / t_h},
                             {"reference", 2.1e-4}};
    } else if (which == "fig3") {
        const Table t = shaper_sweep(run, stats);
        run.write_table(run.name, t);
        stats["headline"] = {{"quantity", "T1_T2_at_24um"},
                             {"value", {stats["T1_at_24um_5cm"], stats["T2_at_24um_5cm"]}},
                             {"reference", {0.72, 0.003}}};
    } else if (which == "fig4") {
        const auto vd = gravstates::velocity_distribution(
            1, c, static_cast<std::size_t>(run.cfg.gravstates.points),
            static_cast<std::size_t>(run.cfg.gravstates.padding));
        Table t{{"v (m/s)", "density (s/m)"}, {}};
        for (std::size_t i = 0; i < vd.velocity.size(); ++i)
            if (std::abs(vd.velocity[i]) <= 6.0 * vd.stddev) t.add({vd.velocity[i], vd.density[i]});
        run.write_table(run.name, t);
        stats["std_m_per_s"] = vd.stddev;
        stats["mean_m_per_s"] = vd.mean;
        stats["raw_integral"] = vd.raw_integral;
        stats["headline"] = {{"quantity", "std_m_per_s"}, {"value", vd.stddev}, {"reference", 9.5e-3}};
    } else if (which == "fig5") {
        const auto d = state_flux(1, run.cfg);
        run.write_table(run.name, flux_table(d));
        stats.update(stats_json(d, t_h));
        stats["predicted_std_s"] = t_h * gravstates::dispersion_spread_estimate(1, H, c).full;
        stats["headline"] = {{"quantity", "std_s"}, {"value", d.stddev}, {"reference", 0.97e-3}};
    } else if (which == "table-cases") {
        json summary;
        const Table t = estimate_table(run.cfg, summary);
        run.write_table(run.name, t);
        stats.update(summary);
    } else {
        throw ConfigError("unknown reproduce case '" + which +
                          "' (expected fig2a, fig2b, fig3, fig4, fig5, table-cases)");
    }
    run.write_json(run.name + "_stats", stats);
    if (stats.contains("headline"))
        std::cout << which << ": " << stats["headline"].dump() << '\n';
    else
        std::cout << which << ": written\n";
    return 0;
}

// ---------------------------------------------------------------- scan

int cmd_scan(Run& run) {
    const std::string param = run.arg("parameter");
    const std::string objective = run.arg("objective", "total_resolution");
    const std::string backend = run.arg("backend", "quasiclassical");
    const double from = std::stod(run.arg("from"));
    const double to = std::stod(run.arg("to"));
    const int points = std::stoi(run.arg("points", "20"));
    const bool log_spacing = run.arg("log", "false") == "true";
    if (param != "h" && param != "r" && param != "R" && param != "omega")
        throw ConfigError("scan parameter must be one of h, r, R, omega");
    if (objective != "total_resolution" && objective != "acceptance")
        throw ConfigError("scan objective must be total_resolution or acceptance");
    if (backend != "quasiclassical" && backend != "montecarlo")
        throw ConfigError("scan backend must be quasiclassical or montecarlo");
    if (points < 1 || !(to >= from))
        throw ConfigError("empty scan range");
    if (log_spacing && !(from > 0)) throw ConfigError("log scan needs a positive range");

    const std::map<std::string, std::string> units{{"h", "m"}, {"r", "m"}, {"R", "m"}, {"omega", "rad/s"}};
    Table t{{param + " (" + units.at(param) + ")", "total_resolution", "acceptance", "n_accepted",
             "geometry_ok", "valid"},
            {}};
    double best_value = std::nan(""), best_obj = std::nan("");
    const bool minimize = objective == "total_resolution";
    const int n = (to == from) ? 1 : points;
    for (int i = 0; i < n; ++i) {
        const double f = n == 1 ? 0.0 : double(i) / (n - 1);
        const double x = log_spacing ? from * std::pow(to / from, f) : from + (to - from) * f;
        Config cfg = run.cfg;
        if (param == "h") cfg.geometry.slit_height = x;
        if (param == "r") cfg.geometry.opening_radius = x;
        if (param == "R") cfg.geometry.disk_radius = x;
        if (param == "omega") {
            cfg.trap.omega = x;
            cfg.trap_upsilon = 0;
        }
        const TrapConfig trap = cfg.resolved_trap();
        const auto disp = trap_dispersions(trap, cfg.constants);
        const double h = cfg.geometry.slit_height;
        double total = std::nan(""), acc = std::nan(""), n_acc = std::nan("");
        bool valid = h < quasiclassical::max_slit_height(disp.upsilon, cfg.constants);
        bool geometry_ok = false;
        if (valid) {
            const auto geo = quasiclassical::geometry_bounds(h, disp.upsilon, trap.epsilon, cfg.constants);
            geometry_ok = cfg.geometry.opening_radius <= geo.r_max && cfg.geometry.disk_radius >= geo.R_min;
        }
        if (valid && backend == "quasiclassical") {
            const auto rep = quasiclassical::shaped_resolution(h, trap.height, cfg.estimate.beta,
                                                               disp.upsilon, cfg.estimate.n_tot,
                                                               cfg.constants, cfg.estimate.alpha);
            total = rep.dg_over_g_total;
            acc = rep.acceptance;
            n_acc = rep.n_accepted;
        } else if (backend == "montecarlo") {
            const auto r = montecarlo::run_experiment(experiment_config(cfg), run.seed);
            acc = r.acceptance;
            n_acc = double(r.corrected_times.size());
            valid = r.estimate.has_value();
            if (valid) total = r.estimate->half_width_relative();
        }
        t.add_cells({num(x), num(total), num(acc), num(n_acc), geometry_ok ? "true" : "false",
                     valid ? "true" : "false"});
        const double obj = minimize ? total : acc;
        if (valid && geometry_ok && std::isfinite(obj) &&
            (std::isnan(best_obj) || (minimize ? obj < best_obj : obj > best_obj))) {
            best_obj = obj;
            best_value = x;
        }
    }
    run.write_table(run.name, t);
    json best;
    best["parameter"] = param;
    best["objective"] = objective;
    best["backend"] = backend;
    best["best_value"] = std::isnan(best_value) ? json(nullptr) : json(best_value);
    best["best_objective"] = std::isnan(best_obj) ? json(nullptr) : json(best_obj);
    run.write_json(run.name + "_best", best);
    std::cout << "best " << param << " = " << num(best_value) << " (" << objective << " "
              << num(best_obj) << ")\n";
    return 0;
}

// ---------------------------------------------------------------- dispatch

void apply_design_case(Config& cfg, int id) {
    const auto dc = quasiclassical::design_case(id);
    cfg.geometry.slit_height = dc.slit_height;
    cfg.geometry.opening_radius = 1e-4;
    cfg.geometry.disk_radius = 5.01e-2;
    cfg.trap_upsilon = dc.upsilon;
    cfg.trap.height = dc.height;
    cfg.trap.epsilon = dc.epsilon;
    cfg.estimate.n_tot = dc.n_tot;
    cfg.montecarlo.n_atoms = static_cast<long>(dc.n_tot);
}

const std::map<std::string, std::function<int(Run&)>>& handlers() {
    static const std::map<std::string, std::function<int(Run&)>> h{
        {"estimate", cmd_estimate},     {"wavepacket", cmd_wavepacket},
        {"gravstates", cmd_gravstates}, {"shaper", cmd_shaper},
        {"montecarlo", cmd_montecarlo}, {"reproduce", cmd_reproduce},
        {"scan", cmd_scan}};
    return h;
}

int execute(Run& run) {
    const int rc = handlers().at(run.subcommand)(run);
    run.write_manifest();
    return rc;
}

int replay(const std::string& manifest_path, const std::optional<std::string>& out_override) {
    std::ifstream in(manifest_path);
    if (!in) throw ConfigError("cannot open manifest " + manifest_path);
    json m;
    try {
        m = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed manifest: ") + e.what());
    }
    Run run;
    run.subcommand = m.at("subcommand").get<std::string>();
    run.name = m.at("name").get<std::string>();
    run.seed = m.at("seed").get<std::uint64_t>();
    run.format = m.at("format").get<std::string>();
    run.args = m.at("arguments").get<std::map<std::string, std::string>>();
    run.cfg = parse_config_text(m.at("config").get<std::string>());
    run.out = out_override ? fs::path(*out_override) : fs::path(manifest_path).parent_path();
    if (!handlers().count(run.subcommand)) throw ConfigError("manifest names unknown subcommand");
    return execute(run);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Velocity-shaping simulations for antihydrogen free-fall timing"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path, out_dir, format = "csv";
    std::uint64_t seed = 12345;
    int design_case_id = 0;
    const char* env_out = std::getenv("GBAR_SHAPING_OUT");
    out_dir = env_out ? env_out : ".";
    app.add_option("--config", config_path, "INI configuration file");
    app.add_option("--seed", seed, "random seed");
    app.add_option("--out", out_dir, "output directory (default $GBAR_SHAPING_OUT or .)");
    app.add_option("--format", format, "table format")->check(CLI::IsMember({"csv", "json"}));
    app.add_option("--paper-case", design_case_id, "load design case 1, 2 or 3")
        ->check(CLI::IsMember({1, 2, 3}));

    std::map<std::string, std::string> args;
    app.add_subcommand("estimate", "closed-form accuracy estimates");

    auto* wp = app.add_subcommand("wavepacket", "arrival-time flux of a falling wave packet");
    std::string wp_state;
    wp->add_option("--state", wp_state, "0: trap Gaussian; n >= 1: gravitational state n");

    auto* gs = app.add_subcommand("gravstates", "gravitational states above a mirror");
    std::string gs_count;
    gs->add_option("--count", gs_count, "number of states");

    auto* sh = app.add_subcommand("shaper", "transmission sweep over slit height");
    std::string sh_min, sh_max, sh_points;
    sh->add_option("--h-min", sh_min, "smallest slit height (m)");
    sh->add_option("--h-max", sh_max, "largest slit height (m)");
    sh->add_option("--points", sh_points, "number of slit heights");

    auto* mc = app.add_subcommand("montecarlo", "classical Monte Carlo of the apparatus");
    std::string mc_atoms;
    mc->add_option("--atoms", mc_atoms, "number of released atoms");

    auto* rp = app.add_subcommand("reproduce", "data behind a figure or the design-case table");
    std::string rp_case;
    rp->add_option("case", rp_case, "fig2a | fig2b | fig3 | fig4 | fig5 | table-cases")->required();

    auto* sc = app.add_subcommand("scan", "parameter scan");
    std::string sc_param, sc_from, sc_to, sc_points = "20", sc_obj = "total_resolution",
                                             sc_backend = "quasiclassical";
    bool sc_log = false;
    sc->add_option("--parameter", sc_param, "h | r | R | omega")->required();
    sc->add_option("--from", sc_from, "range start (SI)")->required();
    sc->add_option("--to", sc_to, "range end (SI)")->required();
    sc->add_option("--points", sc_points, "grid points");
    sc->add_flag("--log", sc_log, "logarithmic spacing");
    sc->add_option("--objective", sc_obj, "total_resolution | acceptance");
    sc->add_option("--backend", sc_backend, "quasiclassical | montecarlo");

    auto* rl = app.add_subcommand("replay", "re-run a manifest");
    std::string rl_path;
    rl->add_option("manifest", rl_path, "manifest.json")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : exit_config;
    }

    try {
        if (rl->parsed()) {
            std::optional<std::string> over;
            if (app.count("--out")) over = out_dir;
            return replay(rl_path, over);
        }
        Run run;
        run.cfg = config_path.empty() ? Config{} : load_config(config_path);
        if (design_case_id) apply_design_case(run.cfg, design_case_id);
        run.seed = seed;
        run.out = out_dir;
        run.format = format;
        auto set = [&](const char* k, const std::string& v) {
            if (!v.empty()) run.args[k] = v;
        };
        CLI::App* sub = app.get_subcommands().front();
        run.subcommand = sub->get_name();
        run.name = run.subcommand;
        if (sub == wp) set("state", wp_state);
        if (sub == gs) set("count", gs_count);
        if (sub == sh) {
            set("h_min", sh_min);
            set("h_max", sh_max);
            set("points", sh_points);
        }
        if (sub == mc) set("atoms", mc_atoms);
        if (sub == rp) {
            set("case", rp_case);
            run.name = "reproduce_" + rp_case;
        }
        if (sub == sc) {
            set("parameter", sc_param);
            set("from", sc_from);
            set("to", sc_to);
            set("points", sc_points);
            set("objective", sc_obj);
            set("backend", sc_backend);
            set("log", sc_log ? "true" : "false");
            run.name = "scan_" + sc_param;
        }
        return execute(run);
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return exit_numerical;
    } catch (const DomainError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return exit_config;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: invalid number (" << e.what() << ")\n";
        return exit_config;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
