#pragma once

/// \file wavepacket.hpp
/// Vertical wave-packet free fall and the arrival-time flux through z = 0.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "gbar/core.hpp"
#include "gbar/detail/fft.hpp"
#include "gbar/wavefunction.hpp"

namespace gbar::wavepacket {

/// [-0.05 m, H + 20 zeta + 10 l] with 2^15 points.
inline UniformGrid default_grid(const TrapConfig& trap, const PhysicsConstants& c = {},
                                std::size_t points = 1 << 15) {
    const double zeta = trap_dispersions(trap, c).zeta;
    return {-0.05, trap.height + 20.0 * zeta + 10.0 * gravitational_length(c), points};
}

/// Grid of `points` samples spanning centre +- half_widths * sigma.
inline UniformGrid compact_grid(double centre, double sigma, std::size_t points = 4096,
                                double half_widths = 12.0) {
    return {centre - half_widths * sigma, centre + half_widths * sigma, points};
}

inline WaveFunction1D gaussian_initial_state(const TrapConfig& trap, const UniformGrid& grid,
                                             const PhysicsConstants& c = {}) {
    trap.validate();
    grid.validate();
    const double zeta = trap_dispersions(trap, c).zeta;
    if (grid.step() > zeta / 4.0)
        throw DomainError("grid too small: step " + std::to_string(grid.step()) +
                          " m does not resolve zeta = " + std::to_string(zeta) + " m");
    if (grid.z_min > trap.height - 8.0 * zeta || grid.z_max < trap.height + 8.0 * zeta)
        throw DomainError("grid too small: it must cover H +- 8 zeta");
    const double a = c.mass * trap.omega / c.hbar;
    const double pref = std::pow(a / std::numbers::pi, 0.25);
    std::vector<complex> amp(grid.points);
    for (std::size_t i = 0; i < grid.points; ++i) {
        const double d = grid[i] - trap.height;
        amp[i] = pref * std::exp(-0.5 * a * d * d);
    }
    return WaveFunction1D(grid, std::move(amp));
}

inline WaveFunction1D gaussian_initial_state(const TrapConfig& trap,
                                             const PhysicsConstants& c = {}) {
    return gaussian_initial_state(trap, default_grid(trap, c), c);
}

/// Closed-form evolved Gaussian.
inline complex evolved_gaussian(const TrapConfig& trap, double t, double z,
                                const PhysicsConstants& c = {}) {
    const double w = trap.omega;
    const complex a(1.0, w * t);
    const double m = c.mass;
    const double phase = -(m * c.gbar * z * t + m * c.gbar * c.gbar * t * t * t / 6.0) / c.hbar;
    const double d = z - trap.height + 0.5 * c.gbar * t * t;
    return std::pow(m * w / (c.hbar * std::numbers::pi), 0.25) / std::sqrt(a) *
           std::polar(1.0, phase) * std::exp(-m * w / (2.0 * c.hbar * a) * d * d);
}

/// Psi(z, t) on the input grid translated down by gbar t^2 / 2.
///
/// The kernel factorises into free-particle evolution in the falling frame
/// (applied as a phase in wavenumber space) and a position-space phase.
inline WaveFunction1D propagate_free_fall(const WaveFunction1D& psi0, double t,
                                          const PhysicsConstants& c = {}) {
    if (!(t >= 0)) throw DomainError("propagation time must be >= 0");
    if (t == 0) return psi0;
    const std::size_t n = psi0.size();
    const double dz = psi0.grid.step();
    const double peak = psi0.max_abs();
    if (!(peak > 0)) throw DomainError("cannot propagate a null wave function");

    std::vector<complex> buf = psi0.amplitudes;
    detail::fft_in_place(buf, detail::FftDirection::forward);

    double spec_peak = 0, spec_edge = 0;
    const double dk = 2.0 * std::numbers::pi / (static_cast<double>(n) * dz);
    const long k_cut = static_cast<long>(0.8 * static_cast<double>(n / 2));
    for (std::size_t j = 0; j < n; ++j) {
        const long idx = detail::fft_frequency_index(j, n);
        const double mag = std::abs(buf[j]);
        spec_peak = std::max(spec_peak, mag);
        if (std::labs(idx) > k_cut) spec_edge = std::max(spec_edge, mag);
    }
    if (spec_edge > 1e-9 * spec_peak)
        throw NumericalError("integration-failure: initial state not resolved by the grid "
                             "(spectral content near Nyquist " +
                             std::to_string(spec_edge / spec_peak) + " of peak)");

    const double coef = c.hbar * t / (2.0 * c.mass);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double k = dk * static_cast<double>(detail::fft_frequency_index(j, n));
        buf[j] *= std::polar(inv_n, -coef * k * k);
    }
    detail::fft_in_place(buf, detail::FftDirection::backward);

    const std::size_t margin = std::min<std::size_t>(16, n / 4);
    double edge = 0, inner = 0;
    for (std::size_t j = 0; j < n; ++j) {
        const double mag = std::abs(buf[j]);
        inner = std::max(inner, mag);
        if (j < margin || j + margin >= n) edge = std::max(edge, mag);
    }
    if (edge > 1e-7 * inner)
        throw NumericalError("integration-failure: packet reached the grid boundary "
                             "(edge amplitude " + std::to_string(edge / inner) +
                             " of peak at t = " + std::to_string(t) + " s)");

    const double shift = 0.5 * c.gbar * t * t;
    const UniformGrid out_grid = psi0.grid.shifted(-shift);
    const double m = c.mass;
    const double phase0 = m * c.gbar * c.gbar * t * t * t / 6.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double z = out_grid[j];
        buf[j] *= std::polar(1.0, -(m * c.gbar * z * t + phase0) / c.hbar);
    }
    return WaveFunction1D(out_grid, std::move(buf));
}

struct PointValue {
    complex psi;
    complex dpsi;   // d psi / dz
    double max_phase_step;  // largest kernel phase increment between samples (rad)
};

/// Psi(z, t) and its z derivative from direct quadrature of the kernel over
/// the compact support of psi0.
inline PointValue propagate_to_point(const WaveFunction1D& psi0, double z, double t,
                                     const PhysicsConstants& c = {},
                                     double max_phase_step = 1.0) {
    if (!(t > 0)) throw DomainError("point propagation needs t > 0");
    const std::size_t n = psi0.size();
    const double dz = psi0.grid.step();
    const double m = c.mass;
    const double a = m / (2.0 * c.hbar * t);
    const double centre = z + 0.5 * c.gbar * t * t;
    const double z0 = psi0.grid.z_min;

    const double far = std::max(std::abs(centre - z0), std::abs(centre - psi0.grid.z_max));
    const double step = 2.0 * a * far * dz;
    if (step > max_phase_step)
        throw NumericalError("integration-failure: kernel phase step " + std::to_string(step) +
                             " rad exceeds " + std::to_string(max_phase_step) +
                             " at t = " + std::to_string(t) + " s; refine the initial grid");

    // exp(i a (centre - z_j)^2) by a second-order recurrence, resynchronised
    // every 64 samples to bound round-off.
    complex integral = 0.0, dintegral = 0.0;
    complex e, r;
    const complex rr = std::polar(1.0, 2.0 * a * dz * dz);
    for (std::size_t j = 0; j < n; ++j) {
        const double u = centre - (z0 + dz * static_cast<double>(j));
        if (j % 64 == 0) {
            e = std::polar(1.0, a * u * u);
            const double u1 = u - dz;
            r = std::polar(1.0, a * (u1 * u1 - u * u));
        }
        const double w = (j == 0 || j + 1 == n) ? 0.5 : 1.0;
        const complex f = w * e * psi0.amplitudes[j];
        integral += f;
        dintegral += f * u;
        e *= r;
        r *= rr;
    }
    integral *= dz;
    dintegral *= complex(0.0, 2.0 * a) * dz;

    const complex pref = std::sqrt(complex(0.0, -m / (2.0 * std::numbers::pi * c.hbar * t)));
    const double phase = -(m * c.gbar * z * t + m * c.gbar * c.gbar * t * t * t / 6.0) / c.hbar;
    const complex lin = pref * std::polar(1.0, phase);
    const complex dlin = complex(0.0, -m * c.gbar * t / c.hbar);
    return {lin * integral, lin * (dintegral + dlin * integral), step};
}

struct TimingDistribution {
    std::vector<double> times;  // s
    std::vector<double> flux;   // 1/s
    std::string source;         // "analytic" or "numerical"
    double integral = std::numeric_limits<double>::quiet_NaN();
    double mean = std::numeric_limits<double>::quiet_NaN();
    double mode = std::numeric_limits<double>::quiet_NaN();
    double stddev = std::numeric_limits<double>::quiet_NaN();
    double skew = std::numeric_limits<double>::quiet_NaN();
    double min_flux = 0;           // most negative sample (0 if none)
    double negative_integral = 0;  // integral of the negative part
};

struct DistributionStats {
    double integral, mean, mode, stddev, skew;
};

/// Moments by trapezoid quadrature on the (possibly non-uniform) time grid,
/// normalised by the window integral; mode by a parabola through the
/// largest sample and its neighbours.
inline DistributionStats distribution_stats(const TimingDistribution& d) {
    const auto& t = d.times;
    const auto& f = d.flux;
    if (t.size() != f.size() || t.size() < 3)
        throw DomainError("distribution needs at least three matching samples");
    auto quad = [&](auto&& g) {
        double s = 0;
        for (std::size_t i = 0; i + 1 < t.size(); ++i)
            s += 0.5 * (g(i) + g(i + 1)) * (t[i + 1] - t[i]);
        return s;
    };
    const double norm = quad([&](std::size_t i) { return f[i]; });
    if (!std::isfinite(norm) || !(norm > 0))
        throw DomainError("distribution is not normalizable over its window");
    const double mean = quad([&](std::size_t i) { return t[i] * f[i]; }) / norm;
    const double var = quad([&](std::size_t i) {
                           const double x = t[i] - mean;
                           return x * x * f[i];
                       }) /
                       norm;
    const double m3 = quad([&](std::size_t i) {
                          const double x = t[i] - mean;
                          return x * x * x * f[i];
                      }) /
                      norm;
    const double sd = std::sqrt(var);

    const std::size_t k =
        static_cast<std::size_t>(std::max_element(f.begin(), f.end()) - f.begin());
    double mode = t[k];
    if (k > 0 && k + 1 < t.size()) {
        const double x0 = t[k - 1], x1 = t[k], x2 = t[k + 1];
        const double y0 = f[k - 1], y1 = f[k], y2 = f[k + 1];
        const double num = (x1 - x0) * (x1 - x0) * (y1 - y2) - (x1 - x2) * (x1 - x2) * (y1 - y0);
        const double den = (x1 - x0) * (y1 - y2) - (x1 - x2) * (y1 - y0);
        if (den != 0) mode = x1 - 0.5 * num / den;
    }
    return {norm, mean, mode, sd, m3 / (sd * sd * sd)};
}

namespace detail {
inline void finalize(TimingDistribution& d) {
    d.min_flux = 0;
    d.negative_integral = 0;
    for (std::size_t i = 0; i < d.flux.size(); ++i) {
        d.min_flux = std::min(d.min_flux, d.flux[i]);
        if (i + 1 < d.flux.size()) {
            const double a = std::min(0.0, d.flux[i]), b = std::min(0.0, d.flux[i + 1]);
            d.negative_integral += 0.5 * (a + b) * (d.times[i + 1] - d.times[i]);
        }
    }
    try {
        const auto s = distribution_stats(d);
        d.integral = s.integral;
        d.mean = s.mean;
        d.mode = s.mode;
        d.stddev = s.stddev;
        d.skew = s.skew;
    } catch (const DomainError&) {
    }
}
}  // namespace detail

inline double analytic_flux_value(const TrapConfig& trap, double t,
                                  const PhysicsConstants& c = {}) {
    const double w = trap.omega, m = c.mass, g = c.gbar, h = trap.height;
    const double q = 1.0 + w * w * t * t;
    const double pref = std::sqrt(m * std::pow(w, 5) * t * t / (c.hbar * std::numbers::pi * q * q * q));
    const double d = 0.5 * g * t * t - h;
    return pref * (h + 0.5 * g * t * t + g / (w * w)) * std::exp(-m * w / (c.hbar * q) * d * d);
}

inline TimingDistribution analytic_flux(const TrapConfig& trap, const std::vector<double>& times,
                                        const PhysicsConstants& c = {}) {
    trap.validate();
    TimingDistribution d;
    d.source = "analytic";
    d.times = times;
    d.flux.resize(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (!(times[i] >= 0)) throw DomainError("flux times must be non-negative");
        d.flux[i] = analytic_flux_value(trap, times[i], c);
    }
    detail::finalize(d);
    return d;
}

/// Uniform core on [centre - core, centre + core] and geometric wings out
/// to [lo, hi]; every returned time lies in [lo, hi] and ascends strictly.
inline std::vector<double> adaptive_time_grid(double centre, double core, double lo, double hi,
                                              std::size_t core_points = 4001,
                                              std::size_t wing_points = 1000) {
    if (!(hi > lo) || !(core > 0) || core_points < 3)
        throw DomainError("invalid time window");
    const double a = std::max(lo, centre - core);
    const double b = std::min(hi, centre + core);
    if (!(b > a)) throw DomainError("time window does not contain the flux core");
    const double h0 = (b - a) / static_cast<double>(core_points - 1);

    auto wing = [&](double distance) {
        std::vector<double> out;
        if (distance <= h0 || wing_points == 0) return out;
        const auto nw = static_cast<double>(wing_points);
        double q = 1.0;
        if (h0 * nw < distance) {  // growth factor solving h0 (q^n - 1)/(q - 1) = distance
            double lo_q = 1.0, hi_q = 2.0;
            while (h0 * (std::pow(hi_q, nw) - 1.0) / (hi_q - 1.0) < distance) hi_q *= 2.0;
            for (int it = 0; it < 200; ++it) {
                const double mid = 0.5 * (lo_q + hi_q);
                (h0 * (std::pow(mid, nw) - 1.0) / (mid - 1.0) < distance ? lo_q : hi_q) = mid;
            }
            q = hi_q;
        }
        double step = q > 1.0 ? h0 : distance / nw;
        double pos = 0;
        for (std::size_t i = 0; i < wing_points; ++i) {
            step *= q > 1.0 ? q : 1.0;
            pos += step;
            if (pos >= distance * (1.0 - 1e-12)) break;
            out.push_back(pos);
        }
        out.push_back(distance);
        return out;
    };

    std::vector<double> t;
    const auto left = wing(a - lo);
    for (auto it = left.rbegin(); it != left.rend(); ++it) t.push_back(a - *it);
    for (std::size_t i = 0; i < core_points; ++i) t.push_back(a + h0 * static_cast<double>(i));
    t.back() = b;
    for (double x : wing(hi - b)) t.push_back(b + x);
    return t;
}

struct FluxWindow {
    double core_widths = 6.0;    // uniform core half-width in predicted spreads
    double wing_widths = 60.0;   // total half-width in predicted spreads
    std::size_t core_points = 4001;
    std::size_t wing_points = 1000;
    double min_fraction = 0.1;   // window never starts before this fraction of the peak time
    double max_fraction = 3.0;
};

struct ArrivalPrediction {
    double peak;    // classical arrival time of the mean state
    double spread;  // first-order arrival-time spread
};

/// Classical arrival time and spread from the position and momentum moments.
inline ArrivalPrediction predict_arrival(const WaveFunction1D& psi0,
                                         const PhysicsConstants& c = {}) {
    const double zbar = psi0.mean_position();
    if (!(zbar > 0)) throw DomainError("initial state must lie above the detection plane");
    const double dz = psi0.position_stddev();
    const auto [k1, k2] = psi0.wavenumber_moments();
    const double vbar = c.hbar * k1 / c.mass;
    const double dv = c.hbar / c.mass * std::sqrt(std::max(0.0, k2 - k1 * k1));
    const double vf = std::sqrt(vbar * vbar + 2.0 * c.gbar * zbar);
    const double tp = (vbar + vf) / c.gbar;
    const double a = dz / vf;
    const double b = dv * (1.0 + vbar / vf) / c.gbar;
    return {tp, std::sqrt(a * a + b * b)};
}

inline std::vector<double> flux_time_grid(const ArrivalPrediction& p, const FluxWindow& w = {}) {
    const double lo = std::max(p.peak * w.min_fraction, p.peak - w.wing_widths * p.spread);
    const double hi = std::min(p.peak * w.max_fraction, p.peak + w.wing_widths * p.spread);
    return adaptive_time_grid(p.peak, w.core_widths * p.spread, lo, hi, w.core_points,
                              w.wing_points);
}

/// F(t) = -(hbar/m) Im(Psi* dPsi/dz) at z = 0 for a release delayed by
/// `release_delay`; times before the release carry zero flux.
inline TimingDistribution numerical_flux(const WaveFunction1D& psi0,
                                         const std::vector<double>& times,
                                         const PhysicsConstants& c = {},
                                         double release_delay = 0.0, unsigned threads = 0) {
    if (!(psi0.grid.z_min >= 0)) throw DomainError("initial state must be supported above z = 0");
    TimingDistribution d;
    d.source = "numerical";
    d.times = times;
    d.flux.assign(times.size(), 0.0);
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(1, times.size())));

    std::vector<std::string> failures(threads);
    auto work = [&](unsigned id) {
        try {
            for (std::size_t i = id; i < times.size(); i += threads) {
                const double t = times[i] - release_delay;
                if (t <= 0) continue;
                const PointValue p = propagate_to_point(psi0, 0.0, t, c);
                d.flux[i] = -(c.hbar / c.mass) * std::imag(std::conj(p.psi) * p.dpsi);
            }
        } catch (const std::exception& e) {
            failures[id] = e.what();
        }
    };
    if (threads == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (unsigned id = 0; id < threads; ++id) pool.emplace_back(work, id);
        for (auto& th : pool) th.join();
    }
    for (const auto& f : failures)
        if (!f.empty()) throw NumericalError(f);
    detail::finalize(d);
    return d;
}

inline TimingDistribution numerical_flux(const WaveFunction1D& psi0,
                                         const PhysicsConstants& c = {},
                                         const FluxWindow& window = {}) {
    return numerical_flux(psi0, flux_time_grid(predict_arrival(psi0, c), window), c);
}

}  // namespace gbar::wavepacket
