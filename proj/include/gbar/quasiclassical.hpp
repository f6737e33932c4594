#pragma once

/// \file quasiclassical.hpp
/// Closed-form estimators for free-fall timing spread and the statistical
/// accuracy of the measurement, with and without velocity shaping.

#include <cmath>
#include <numbers>
#include <optional>
#include <string>

#include "gbar/core.hpp"

namespace gbar::quasiclassical {

/// sqrt((zeta/2H)^2 + (upsilon/v_H)^2)
inline double free_fall_spread(double zeta, double upsilon, double height,
                               const PhysicsConstants& c = {}) {
    if (!(zeta >= 0) || !(upsilon >= 0) || !(height > 0))
        throw DomainError("free_fall_spread needs zeta, upsilon >= 0 and height > 0");
    const double v_h = free_fall_scales(height, c).velocity;
    const double a = zeta / (2.0 * height);
    const double b = upsilon / v_h;
    return std::sqrt(a * a + b * b);
}

struct OptimalSize {
    double zeta_opt;
    double spread_opt;
};

inline OptimalSize optimal_initial_size(double height, const PhysicsConstants& c = {}) {
    const double v_h = free_fall_scales(height, c).velocity;
    return {std::sqrt(c.hbar * height / (c.mass * v_h)),
            std::sqrt(c.hbar / (2.0 * c.mass * v_h * height))};
}

/// 2 upsilon / (v_H sqrt(N_tot)): one-period accuracy without shaping.
inline double unshaped_resolution(double upsilon, double height, double n_tot,
                                  const PhysicsConstants& c = {}) {
    if (!(n_tot >= 1)) throw DomainError("n_tot must be >= 1");
    if (!(upsilon > 0)) throw DomainError("upsilon must be positive");
    return 2.0 * upsilon / (free_fall_scales(height, c).velocity * std::sqrt(n_tot));
}

/// Heisenberg-limited accuracy sqrt(2 hbar / (m v_H H N_tot)).
inline double optimal_resolution(double height, double n_tot, const PhysicsConstants& c = {}) {
    if (!(n_tot >= 1)) throw DomainError("n_tot must be >= 1");
    const double v_h = free_fall_scales(height, c).velocity;
    return std::sqrt(2.0 * c.hbar / (c.mass * v_h * height * n_tot));
}

inline double max_slit_height(double upsilon, const PhysicsConstants& c = {}) {
    return upsilon * upsilon / (2.0 * c.gbar);
}

struct Acceptance {
    double fraction;
    double delta_v;
};

/// Fraction of a Gaussian vertical velocity distribution with
/// 0 < v < sqrt(2 gbar h). By default the selective-regime linearisation
/// (delta_v/upsilon)/sqrt(2 pi) is used and h >= h_max is rejected; with
/// `full_integral` the exact Gaussian integral is returned for any h.
inline Acceptance acceptance_fraction(double h, double upsilon, const PhysicsConstants& c = {},
                                      bool full_integral = false) {
    if (!(h > 0) || !(upsilon > 0)) throw DomainError("acceptance_fraction needs h, upsilon > 0");
    const double dv = std::sqrt(2.0 * c.gbar * h);
    if (full_integral)
        return {0.5 * std::erf(dv / (upsilon * std::numbers::sqrt2)), dv};
    const double h_max = max_slit_height(upsilon, c);
    if (h >= h_max)
        throw DomainError("slit height " + std::to_string(h) +
                          " m is outside the selective regime: h must be below h_max = " +
                          std::to_string(h_max) + " m");
    return {dv / upsilon / std::sqrt(2.0 * std::numbers::pi), dv};
}

struct GeometryBounds {
    double r_max;
    double R_min;
    double h_max;
    double transit_time;  // R / (upsilon sqrt(eps))
};

inline GeometryBounds geometry_bounds(double h, double upsilon, double epsilon,
                                      const PhysicsConstants& c = {},
                                      std::optional<double> disk_radius = std::nullopt) {
    if (!(h > 0) || !(upsilon > 0) || !(epsilon > 0))
        throw DomainError("geometry_bounds needs positive h, upsilon, epsilon");
    const double r_max = upsilon * std::sqrt(epsilon * h) / std::sqrt(2.0 * c.gbar);
    const double r_min_disk = 4.0 * r_max;
    const double radius = disk_radius.value_or(r_min_disk);
    return {r_max, r_min_disk, max_slit_height(upsilon, c),
            radius / (upsilon * std::sqrt(epsilon))};
}

struct AccuracyReport {
    double dt_over_t = 0;            // sqrt(beta h / H)
    double dt_over_t_full = 0;       // sqrt(alpha (h/2H)^2 + beta h/H)
    double dg_over_g_per_event = 0;  // 2 dt_over_t
    double n_accepted = 0;
    double dg_over_g_total = 0;
    double beta = 1;
    double alpha = 1;
    double acceptance = 0;
    double delta_v = 0;
};

inline AccuracyReport shaped_resolution(double h, double height, double beta, double upsilon,
                                        double n_tot, const PhysicsConstants& c = {},
                                        double alpha = 1.0) {
    if (!(beta > 0 && beta <= 1)) throw DomainError("beta must lie in (0, 1]");
    if (!(alpha > 0 && alpha <= 1)) throw DomainError("alpha must lie in (0, 1]");
    if (!(n_tot >= 1)) throw DomainError("n_tot must be >= 1");
    if (!(height > 0)) throw DomainError("height must be positive");
    const Acceptance acc = acceptance_fraction(h, upsilon, c);
    AccuracyReport r;
    r.beta = beta;
    r.alpha = alpha;
    r.acceptance = acc.fraction;
    r.delta_v = acc.delta_v;
    r.dt_over_t = std::sqrt(beta * h / height);
    const double pos = h / (2.0 * height);
    r.dt_over_t_full = std::sqrt(alpha * pos * pos + beta * h / height);
    r.dg_over_g_per_event = 2.0 * r.dt_over_t;
    r.n_accepted = n_tot * acc.fraction;
    r.dg_over_g_total = r.dg_over_g_per_event / std::sqrt(r.n_accepted);
    return r;
}

/// Shaped over unshaped total resolution, (2 pi h beta^2 / h_max)^(1/4).
inline double improvement_ratio(double h, double beta, double upsilon,
                                const PhysicsConstants& c = {}) {
    return std::pow(2.0 * std::numbers::pi * h * beta * beta / max_slit_height(upsilon, c), 0.25);
}

struct PhotodetachmentRate {
    double sigma;  // m^2
    double rate;   // 1/s
};

/// Wigner-law cross section 6.8e-26 m^2 (dE / 1 cm^-1)^(3/2) and the
/// resulting rate sigma P / (A E_T). Energies in joules.
inline PhotodetachmentRate photodetachment_rate(double power, double area, double detuning,
                                                double threshold) {
    if (!(detuning > 0)) throw DomainError("photodetachment detuning must be positive");
    if (!(power >= 0) || !(area > 0) || !(threshold > 0))
        throw DomainError("photodetachment needs power >= 0, area > 0, threshold > 0");
    const double wavenumber =
        detuning / constants::electron_volt / constants::inverse_cm_in_ev;  // cm^-1
    const double sigma = 6.8e-26 * std::pow(wavenumber, 1.5);
    return {sigma, sigma * power / (area * threshold)};
}

/// Slit-height scenarios used throughout: 1 mm, 50 um, and the ground-state
/// limit at 20 um. All share upsilon = 0.44 m/s, H = 0.3 m, N_tot = 2.6e4.
struct DesignCase {
    int id;
    std::string name;
    double slit_height;
    double upsilon = 0.44;
    double height = 0.3;
    double n_tot = 2.6e4;
    double epsilon = 3.0;
};

inline DesignCase design_case(int id) {
    switch (id) {
        case 1: return {1, "classical-1mm", 1e-3};
        case 2: return {2, "classical-50um", 50e-6};
        case 3: return {3, "ground-state-20um", 20e-6};
        default: throw DomainError("design case must be 1, 2 or 3");
    }
}

}  // namespace gbar::quasiclassical
