#pragma once

/// \file montecarlo.hpp
/// Classical trajectories through the shaper, free fall to the detector and
/// the free-fall-acceleration estimator.
///
/// Frame: detection plate at z = 0, mirror surface at z = H (the trap
/// centre height), absorber surface at z = H + h, symmetry axis at x = y = 0.
/// The slit occupies r <= rho <= R between the disks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "gbar/core.hpp"

namespace gbar::montecarlo {

struct InitialState {
    double x = 0, y = 0, z = 0;
    double vx = 0, vy = 0, vz = 0;

    double v_hor() const { return std::hypot(vx, vy); }
    double azimuth() const { return std::atan2(vy, vx); }
};

/// Draw order is fixed (z, vz, x, y, vx, vy, recoil) so streams are stable.
inline InitialState sample_initial(const TrapDispersions& d, double height, double recoil_sigma,
                                   SeededRng& rng) {
    InitialState s;
    s.z = rng.normal(height, d.zeta);
    s.vz = rng.normal(0.0, d.upsilon);
    s.x = rng.normal(0.0, d.zeta_hor);
    s.y = rng.normal(0.0, d.zeta_hor);
    s.vx = rng.normal(0.0, d.upsilon_hor);
    s.vy = rng.normal(0.0, d.upsilon_hor);
    if (recoil_sigma > 0) s.vz += rng.normal(0.0, recoil_sigma);
    return s;
}

inline InitialState sample_initial(const TrapConfig& t, double recoil_sigma, SeededRng& rng,
                                   const PhysicsConstants& c = {}) {
    return sample_initial(trap_dispersions(t, c), t.height, recoil_sigma, rng);
}

struct ReflectionResult {
    double probability;
    bool extrapolated;  // impact speed outside [0, 1 m/s]
};

/// Per-bounce survival on the mirror as a function of vertical impact speed:
/// piecewise linear in ln v through the anchors, extended linearly beyond
/// them and clamped to [0, 1].
class ReflectionModel {
public:
    static ReflectionModel ideal() { return ReflectionModel(); }

    static ReflectionModel quantum_reflection() {
        return from_table({{0.031, 0.94}, {0.14, 0.78}});
    }

    static ReflectionModel from_table(std::vector<std::pair<double, double>> table) {
        if (table.size() < 2) throw DomainError("reflection table needs at least two rows");
        std::sort(table.begin(), table.end());
        for (std::size_t i = 0; i < table.size(); ++i) {
            if (!(table[i].first > 0)) throw DomainError("reflection table velocities must be > 0");
            if (!(table[i].second >= 0 && table[i].second <= 1))
                throw DomainError("reflection table probabilities must be in [0, 1]");
            if (i > 0 && table[i].first == table[i - 1].first)
                throw DomainError("reflection table has duplicate velocities");
        }
        ReflectionModel m;
        m.table_ = std::move(table);
        return m;
    }

    /// Whitespace or comma separated "velocity probability" rows; '#' comments.
    static ReflectionModel from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw DomainError("cannot open reflection table " + path);
        std::vector<std::pair<double, double>> rows;
        std::string line;
        while (std::getline(in, line)) {
            if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
            std::replace(line.begin(), line.end(), ',', ' ');
            std::istringstream ls(line);
            double v, p;
            if (ls >> v >> p) rows.emplace_back(v, p);
        }
        return from_table(std::move(rows));
    }

    bool is_ideal() const { return table_.empty(); }
    const std::vector<std::pair<double, double>>& table() const { return table_; }

    ReflectionResult operator()(double v) const {
        if (!(v >= 0)) throw DomainError("impact speed must be >= 0");
        const bool extrapolated = v > 1.0;
        if (is_ideal()) return {1.0, extrapolated};
        std::size_t i = 0;
        while (i + 2 < table_.size() && v > table_[i + 1].first) ++i;
        const auto [v0, p0] = table_[i];
        const auto [v1, p1] = table_[i + 1];
        double p;
        if (v == 0) {
            p = p1 < p0 ? 1.0 : (p1 > p0 ? 0.0 : p0);  // ln v -> -inf
        } else {
            p = p0 + (p1 - p0) * std::log(v / v0) / std::log(v1 / v0);
        }
        return {std::clamp(p, 0.0, 1.0), extrapolated};
    }

private:
    std::vector<std::pair<double, double>> table_;
};

inline ReflectionResult reflection_probability(double v, const ReflectionModel& model) {
    return model(v);
}

/// Arcs lower than this are treated as sliding on the mirror (no bounces).
inline constexpr double resting_apex = 1e-12;  // m

enum class Fate { transmitted, absorbed_top, annihilated_mirror, back_into_opening };

inline const char* fate_name(Fate f) {
    switch (f) {
        case Fate::transmitted: return "transmitted";
        case Fate::absorbed_top: return "absorbed_top";
        case Fate::annihilated_mirror: return "annihilated_mirror";
        case Fate::back_into_opening: return "back_into_opening";
    }
    return "unknown";
}

struct ExitState {
    double t = 0;  // since release
    double x = 0, y = 0, z = 0;
    double vx = 0, vy = 0, vz = 0;
};

struct DetectionRecord {
    double total_time = 0;      // T_tot
    double landing_radius = 0;  // L
    double fall_time = 0;       // true time from exit to plate
    double shaper_time = 0;     // true time from release to exit
};

struct Trajectory {
    InitialState initial;
    Fate fate = Fate::transmitted;
    long bounces = 0;
    int reentries = 0;
    int scatterings = 0;
    bool extrapolated_reflection = false;
    ExitState exit;
    std::optional<DetectionRecord> detection;
    double energy_error = 0;  // worst relative drift of v^2/2 + g (z - H) per arc
};

struct TransportOptions {
    double top_survival = 0;  // probability of diffuse scattering instead of absorption
    int max_scatterings = 1000;
};

namespace detail {

/// Smallest t > eps with |p + v t| = radius, if any.
inline std::optional<double> radius_crossing(double px, double py, double vx, double vy,
                                             double radius, bool outward) {
    const double a = vx * vx + vy * vy;
    if (a == 0) return std::nullopt;
    const double b = px * vx + py * vy;
    const double c = px * px + py * py - radius * radius;
    const double disc = b * b - a * c;
    if (disc < 0) return std::nullopt;
    const double root = std::sqrt(disc);
    if (outward) {
        const double t = (-b + root) / a;
        return t > 0 ? std::optional(t) : std::nullopt;
    }
    // inward crossing only from outside the circle
    if (c <= 0) return std::nullopt;
    const double t = c / (-b + root);  // (-b - root)/a without cancellation
    return (b < 0 && t > 0) ? std::optional(t) : std::nullopt;
}

/// First positive time at which z0 + v0 t - g t^2/2 reaches `level` from below.
inline std::optional<double> time_to_rise(double z0, double v0, double level, double g) {
    const double disc = v0 * v0 - 2.0 * g * (level - z0);
    if (v0 <= 0 || disc < 0) return std::nullopt;
    return (v0 - std::sqrt(disc)) / g;
}

/// Time to fall from z0 (moving at v0) to `level` below: positive root.
inline double time_to_fall(double z0, double v0, double level, double g) {
    const double disc = std::max(0.0, v0 * v0 + 2.0 * g * (z0 - level));
    const double root = std::sqrt(disc);
    return v0 >= 0 ? (v0 + root) / g : 2.0 * (z0 - level) / (root - v0);
}

}  // namespace detail

/// Follows one atom from release until it leaves the slit or is lost.
inline Trajectory trace_through_shaper(const InitialState& s0, const ShaperGeometry& geom,
                                       double height, const ReflectionModel& reflection,
                                       SeededRng& rng, const PhysicsConstants& c = {},
                                       const TransportOptions& opt = {}) {
    geom.validate();
    Trajectory tr;
    tr.initial = s0;
    const double g = c.gbar;
    const double mirror = height;
    const double top = height + geom.slit_height;
    const double r_in = geom.opening_radius;
    const double r_out = geom.disk_radius;
    if (std::hypot(s0.x, s0.y) >= r_in) throw DomainError("atom must start inside the opening");

    // state at the start of the current segment
    double t = 0, x = s0.x, y = s0.y, z = s0.z, vx = s0.vx, vy = s0.vy, vz = s0.vz;
    bool in_opening = true;

    auto fly = [&](double dt) {  // free ballistic flight
        x += vx * dt;
        y += vy * dt;
        z += vz * dt - 0.5 * g * dt * dt;
        vz -= g * dt;
        t += dt;
    };

    for (;;) {
        if (in_opening) {
            const auto out = detail::radius_crossing(x, y, vx, vy, r_in, true);
            if (!out) {  // no horizontal motion: falls straight through the hole
                tr.fate = tr.reentries > 0 ? Fate::back_into_opening : Fate::annihilated_mirror;
                return tr;
            }
            fly(*out);
            if (z < mirror) {
                tr.fate = tr.reentries > 0 ? Fate::back_into_opening : Fate::annihilated_mirror;
                return tr;
            }
            if (z > top) {
                tr.fate = Fate::absorbed_top;
                return tr;
            }
            in_opening = false;
            continue;
        }

        // inside the slit: horizontal exit or re-entry into the opening
        const auto t_exit = detail::radius_crossing(x, y, vx, vy, r_out, true);
        const auto t_back = detail::radius_crossing(x, y, vx, vy, r_in, false);
        const double t_horizontal = t_back ? *t_back : *t_exit;
        const bool leaves_outward = !t_back;

        const double vb = std::sqrt(vz * vz + 2.0 * g * (z - mirror));  // mirror impact speed
        const double apex = vb * vb / (2.0 * g);
        const bool resting = apex < resting_apex;
        const double t_first = detail::time_to_fall(z, vz, mirror, g);
        const double period = 2.0 * vb / g;

        // time of the first contact with the absorber, if the arc reaches it
        std::optional<double> t_top;
        if (apex >= geom.slit_height) {
            if (auto up = detail::time_to_rise(z, vz, top, g)) {
                t_top = *up;
            } else {
                t_top = t_first + (vb - std::sqrt(std::max(0.0, vb * vb - 2.0 * g * geom.slit_height))) / g;
            }
        }

        const double t_stop = t_top ? std::min(*t_top, t_horizontal) : t_horizontal;
        const bool hits_top = t_top && *t_top <= t_horizontal;

        // mirror impacts in (0, t_stop]
        long impacts = 0;
        if (!resting && t_first <= t_stop) {
            const double k = std::floor((t_stop - t_first) / period);
            impacts = static_cast<long>(std::min(k, 1e15)) + 1;
            if (hits_top && impacts > 1) impacts = 1;  // the arc that reaches the top has one bounce at most
        }
        if (impacts > 0 && !reflection.is_ideal()) {
            const auto rp = reflection(vb);
            tr.extrapolated_reflection = tr.extrapolated_reflection || rp.extrapolated;
            if (rp.probability < 1.0) {
                const double u = rng.uniform();
                long first_loss = 1;
                if (rp.probability > 0) {
                    const double k = std::floor(std::log1p(-u) / std::log(rp.probability));
                    first_loss = static_cast<long>(std::min(k, 1e15)) + 1;
                }
                if (first_loss <= impacts) {
                    tr.bounces += first_loss - 1;
                    tr.fate = Fate::annihilated_mirror;
                    return tr;
                }
            }
        }
        tr.bounces += impacts;

        // advance to t_stop analytically
        // heights are tracked relative to the mirror so low arcs keep their precision
        const double e0 = 0.5 * vb * vb;
        double u = z - mirror;
        x += vx * t_stop;
        y += vy * t_stop;
        if (resting) {
            u = 0;
            vz = 0;
        } else if (impacts == 0) {
            u += vz * t_stop - 0.5 * g * t_stop * t_stop;
            vz -= g * t_stop;
        } else {
            const double d = t_stop - t_first - static_cast<double>(impacts - 1) * period;
            u = vb * d - 0.5 * g * d * d;
            vz = vb - g * d;
        }
        t += t_stop;
        const double e1 = 0.5 * vz * vz + g * u;
        if (e0 > 0) tr.energy_error = std::max(tr.energy_error, std::abs(e1 - e0) / e0);
        z = mirror + std::clamp(u, 0.0, geom.slit_height);

        if (hits_top) {
            if (opt.top_survival <= 0 || rng.uniform() >= opt.top_survival ||
                tr.scatterings >= opt.max_scatterings) {
                tr.fate = Fate::absorbed_top;
                return tr;
            }
            // diffuse (cosine-law) re-emission into the lower half space
            ++tr.scatterings;
            const double speed = std::sqrt(vx * vx + vy * vy + vz * vz);
            const double cos_t = std::sqrt(rng.uniform());
            const double sin_t = std::sqrt(1.0 - cos_t * cos_t);
            const double phi = 2.0 * std::numbers::pi * rng.uniform();
            vx = speed * sin_t * std::cos(phi);
            vy = speed * sin_t * std::sin(phi);
            vz = -speed * cos_t;
            z = top;
            continue;
        }
        if (!leaves_outward) {
            ++tr.reentries;
            in_opening = true;
            continue;
        }
        tr.fate = Fate::transmitted;
        tr.exit = {t, x, y, z, vx, vy, vz};
        return tr;
    }
}

struct DetectorBlur {
    double time_sigma = 0;
    double position_sigma = 0;
};

inline DetectionRecord free_fall_and_detect(const ExitState& e, const PhysicsConstants& c = {},
                                            const DetectorBlur& blur = {},
                                            SeededRng* rng = nullptr) {
    if (!(e.z > 0)) throw DomainError("exit height must be above the detector");
    const double tf = detail::time_to_fall(e.z, e.vz, 0.0, c.gbar);
    double lx = e.x + e.vx * tf, ly = e.y + e.vy * tf;
    double total = e.t + tf;
    if (rng && blur.position_sigma > 0) {
        lx += rng->normal(0.0, blur.position_sigma);
        ly += rng->normal(0.0, blur.position_sigma);
    }
    if (rng && blur.time_sigma > 0) total += rng->normal(0.0, blur.time_sigma);
    return {total, std::hypot(lx, ly), tf, e.t};
}

/// T_tot - R T_tot / L.
inline double correct_shaper_time(const DetectionRecord& rec, const ShaperGeometry& geom) {
    if (!(rec.landing_radius > geom.disk_radius))
        throw DomainError("invalid detection record: landing radius must exceed R");
    return rec.total_time - geom.disk_radius * rec.total_time / rec.landing_radius;
}

struct GbarEstimate {
    double gbar = 0;
    double ci_low = 0;
    double ci_high = 0;
    double time = 0;  // trimmed-mean fall time
    std::size_t n = 0;

    double half_width_relative() const { return 0.5 * (ci_high - ci_low) / gbar; }
};

inline double trimmed_mean(std::vector<double> v, double keep = 0.9) {
    if (v.empty()) throw DomainError("trimmed mean of an empty sample");
    std::sort(v.begin(), v.end());
    const auto cut = static_cast<std::size_t>(
        std::floor(0.5 * (1.0 - keep) * static_cast<double>(v.size()) + 1e-9));
    double s = 0;
    for (std::size_t i = cut; i < v.size() - cut; ++i) s += v[i];
    return s / static_cast<double>(v.size() - 2 * cut);
}

/// gbar = 2H / t^2 with t the trimmed mean of the fall times; percentile
/// bootstrap confidence interval.
inline GbarEstimate estimate_gbar(const std::vector<double>& times, double height,
                                  std::uint64_t seed = 0, std::size_t resamples = 1000,
                                  double keep = 0.9, double confidence = 0.95) {
    if (times.size() < 30) throw DomainError("estimate_gbar needs at least 30 samples");
    if (!(height > 0)) throw DomainError("height must be positive");
    if (resamples < 10) throw DomainError("bootstrap needs at least 10 resamples");
    GbarEstimate e;
    e.n = times.size();
    e.time = trimmed_mean(times, keep);
    e.gbar = 2.0 * height / (e.time * e.time);
    SeededRng rng(seed, 0xb0075ULL);
    std::vector<double> boot(resamples), sample(times.size());
    for (std::size_t b = 0; b < resamples; ++b) {
        for (auto& x : sample) x = times[rng.index(times.size())];
        const double tb = trimmed_mean(sample, keep);
        boot[b] = 2.0 * height / (tb * tb);
    }
    std::sort(boot.begin(), boot.end());
    const double alpha = 0.5 * (1.0 - confidence);
    auto quantile = [&](double q) {
        const double pos = q * static_cast<double>(resamples - 1);
        const auto i = static_cast<std::size_t>(std::floor(pos));
        const double f = pos - static_cast<double>(i);
        return i + 1 < resamples ? boot[i] * (1 - f) + boot[i + 1] * f : boot[i];
    };
    e.ci_low = quantile(alpha);
    e.ci_high = quantile(1.0 - alpha);
    return e;
}

struct Histogram {
    double lo = 0, hi = 1;
    std::vector<std::size_t> counts;

    double width() const { return (hi - lo) / static_cast<double>(counts.size()); }
    double center(std::size_t i) const { return lo + (static_cast<double>(i) + 0.5) * width(); }
};

inline Histogram make_histogram(const std::vector<double>& v, std::size_t bins) {
    if (bins == 0) throw DomainError("histogram needs at least one bin");
    Histogram h;
    h.counts.assign(bins, 0);
    if (v.empty()) return h;
    const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
    h.lo = *mn;
    h.hi = *mx > *mn ? *mx : *mn + 1e-12;
    for (double x : v) {
        auto i = static_cast<std::size_t>((x - h.lo) / h.width());
        h.counts[std::min(i, bins - 1)]++;
    }
    return h;
}

/// gbar from the histogram mode of the fall times, refined by a parabola
/// through the peak bin and its neighbours.
inline double estimate_gbar_mode(const std::vector<double>& times, double height,
                                 std::size_t bins = 60) {
    if (times.size() < 30) throw DomainError("estimate_gbar_mode needs at least 30 samples");
    const Histogram h = make_histogram(times, bins);
    const auto k = static_cast<std::size_t>(
        std::max_element(h.counts.begin(), h.counts.end()) - h.counts.begin());
    double mode = h.center(k);
    if (k > 0 && k + 1 < bins) {
        const double y0 = static_cast<double>(h.counts[k - 1]);
        const double y1 = static_cast<double>(h.counts[k]);
        const double y2 = static_cast<double>(h.counts[k + 1]);
        const double den = y0 - 2 * y1 + y2;
        if (den != 0) mode += 0.5 * h.width() * (y0 - y2) / den;
    }
    return 2.0 * height / (mode * mode);
}

struct FateTally {
    std::size_t transmitted = 0;
    std::size_t absorbed_top = 0;
    std::size_t annihilated_mirror = 0;
    std::size_t back_into_opening = 0;
    std::size_t reentries = 0;  // trajectories that re-entered the opening at least once
    std::size_t extrapolated_reflections = 0;

    std::size_t total() const {
        return transmitted + absorbed_top + annihilated_mirror + back_into_opening;
    }
    void add(const Trajectory& t) {
        switch (t.fate) {
            case Fate::transmitted: ++transmitted; break;
            case Fate::absorbed_top: ++absorbed_top; break;
            case Fate::annihilated_mirror: ++annihilated_mirror; break;
            case Fate::back_into_opening: ++back_into_opening; break;
        }
        if (t.reentries > 0) ++reentries;
        if (t.extrapolated_reflection) ++extrapolated_reflections;
    }
};

struct ExperimentConfig {
    PhysicsConstants constants;
    TrapConfig trap;
    std::optional<TrapDispersions> dispersions;  // overrides the trap ground state
    ShaperGeometry geometry;
    bool shaping = true;
    double recoil_sigma = 0;
    ReflectionModel reflection = ReflectionModel::ideal();
    TransportOptions transport;
    DetectorBlur blur;
    std::size_t n_atoms = 100000;
    std::size_t histogram_bins = 100;
    std::size_t bootstrap_resamples = 1000;
    double trim_keep = 0.9;
    unsigned threads = 0;  // 0: hardware concurrency
};

struct ExperimentResult {
    std::vector<double> corrected_times;  // transmitted atoms, trajectory order
    std::vector<double> true_fall_times;
    std::vector<double> landing_radii;
    FateTally tally;
    double acceptance = 0;
    std::optional<GbarEstimate> estimate;
    Histogram histogram;
    double correction_bias = 0;   // mean(corrected - true fall time)
    double max_energy_error = 0;
    std::size_t n_atoms = 0;
};

struct AtomOutcome {
    Trajectory trajectory;
    double corrected = 0;
};

/// Atom `index` of the run keyed by `seed`; independent of any other atom.
inline AtomOutcome simulate_atom(const ExperimentConfig& cfg, std::uint64_t seed,
                                 std::uint64_t index) {
    SeededRng rng = SeededRng(seed).substream(index);
    const auto disp = cfg.dispersions ? *cfg.dispersions : trap_dispersions(cfg.trap, cfg.constants);
    const InitialState s0 = sample_initial(disp, cfg.trap.height, cfg.recoil_sigma, rng);
    AtomOutcome out;
    if (!cfg.shaping) {
        out.trajectory.initial = s0;
        out.trajectory.fate = Fate::transmitted;
        out.trajectory.exit = {0.0, s0.x, s0.y, s0.z, s0.vx, s0.vy, s0.vz};
        const auto rec = free_fall_and_detect(out.trajectory.exit, cfg.constants, cfg.blur, &rng);
        out.trajectory.detection = rec;
        out.corrected = rec.total_time;
        return out;
    }
    out.trajectory = trace_through_shaper(s0, cfg.geometry, cfg.trap.height, cfg.reflection, rng,
                                          cfg.constants, cfg.transport);
    if (out.trajectory.fate == Fate::transmitted) {
        const auto rec = free_fall_and_detect(out.trajectory.exit, cfg.constants, cfg.blur, &rng);
        out.trajectory.detection = rec;
        out.corrected = correct_shaper_time(rec, cfg.geometry);
    }
    return out;
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg, std::uint64_t seed) {
    cfg.constants.validate();
    cfg.trap.validate();
    if (cfg.shaping) cfg.geometry.validate();
    if (cfg.n_atoms == 0) throw DomainError("n_atoms must be positive");
    const std::size_t n = cfg.n_atoms;
    std::vector<AtomOutcome> outcomes(n);

    unsigned threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
    std::vector<std::string> errors(threads);
    auto work = [&](unsigned id) {
        try {
            const std::size_t begin = n * id / threads, end = n * (id + 1) / threads;
            for (std::size_t i = begin; i < end; ++i) outcomes[i] = simulate_atom(cfg, seed, i);
        } catch (const std::exception& e) {
            errors[id] = e.what();
        }
    };
    if (threads == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (unsigned id = 0; id < threads; ++id) pool.emplace_back(work, id);
        for (auto& t : pool) t.join();
    }
    for (const auto& e : errors)
        if (!e.empty()) throw NumericalError(e);

    ExperimentResult r;
    r.n_atoms = n;
    double bias = 0;
    for (const auto& o : outcomes) {
        r.tally.add(o.trajectory);
        r.max_energy_error = std::max(r.max_energy_error, o.trajectory.energy_error);
        if (o.trajectory.fate != Fate::transmitted) continue;
        r.corrected_times.push_back(o.corrected);
        const auto& d = *o.trajectory.detection;
        r.true_fall_times.push_back(d.fall_time);
        r.landing_radii.push_back(d.landing_radius);
        bias += o.corrected - d.fall_time;
    }
    const std::size_t m = r.corrected_times.size();
    r.acceptance = static_cast<double>(m) / static_cast<double>(n);
    if (m > 0) r.correction_bias = bias / static_cast<double>(m);
    r.histogram = make_histogram(r.corrected_times, cfg.histogram_bins);
    if (m >= 30)
        r.estimate = estimate_gbar(r.corrected_times, cfg.trap.height, seed,
                                   cfg.bootstrap_resamples, cfg.trim_keep);
    return r;
}

}  // namespace gbar::montecarlo
