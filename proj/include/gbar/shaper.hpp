#pragma once

/// \file shaper.hpp
/// Gravitational states in the two-disk slit: complex-energy modes with an
/// absorbing top surface, transmissions, and the shaped arrival spread.
///
/// Dimensionless coordinate x = z/l with the mirror at x = 0 and the absorber
/// at x_h = h/l. A mode with eigenvalue lambda solves Ai-type motion
/// psi = a Ai(x - lambda) + b Bi(x - lambda) with psi(0) = 0 and the complex
/// Robin condition
///
///     psi'(x_h) = i s lambda psi(x_h),
///
/// an absorbing top surface whose coupling grows with the state energy. s = 0
/// is a fully reflecting (Neumann) top. With the exp(-iEt/hbar) convention
/// s > 0 gives Im lambda < 0, i.e. E - i Gamma with E = m gbar l Re(lambda)
/// and Gamma = -m gbar l Im(lambda). A mode whose local wavenumber at the top
/// matches the coupling (s sqrt(lambda) ~ 1) is absorbed without a resonance;
/// modes are only followed below that point.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <numbers>
#include <mutex>
#include <numeric>
#include <optional>
#include <shared_mutex>
#include <string>
#include <tuple>
#include <vector>

#include "gbar/airy.hpp"
#include "gbar/core.hpp"
#include "gbar/gravstates.hpp"

namespace gbar::shaper {

using cplx = std::complex<double>;

/// Velocity-shape factor of the shaped state in the many-state limit.
inline constexpr double quasiclassical_beta = 0.2;

/// Transit velocity used when none is given: 0.44 m/s * sqrt(3).
inline constexpr double default_v_hor = 0.7621023553303117;

struct SlitMode {
    int n = 0;
    cplx lambda;
    double energy = 0;  // J
    double width = 0;   // Gamma (J)

    double lifetime(const PhysicsConstants& c = {}) const {
        return width > 0 ? c.hbar / (2.0 * width) : std::numeric_limits<double>::infinity();
    }
};

namespace detail {

/// Boundary determinant and its lambda derivative.
struct Determinant {
    double xh;
    double s;

    cplx value(cplx lam) const { return eval(lam, false).first; }

    std::pair<cplx, cplx> eval(cplx lam, bool with_derivative = true) const {
        const auto m = airy::airy(-lam);
        const cplx y = xh - lam;
        const auto t = airy::airy(y);
        const cplx i(0.0, 1.0);
        const cplx kappa = s * lam;
        const cplx a_top = t.aip - i * kappa * t.ai;
        const cplx b_top = t.bip - i * kappa * t.bi;
        const cplx d = m.ai * b_top - m.bi * a_top;
        if (!with_derivative) return {d, 0.0};
        const cplx dkappa = s;
        // d/dlambda of f(y) is -f'(y); Ai''(y) = y Ai(y)
        const cplx da = -y * t.ai + i * kappa * t.aip - i * dkappa * t.ai;
        const cplx db = -y * t.bi + i * kappa * t.bip - i * dkappa * t.bi;
        const cplx dd = -m.aip * b_top + m.ai * db + m.bip * a_top - m.bi * da;
        return {d, dd};
    }
};

/// Real eigenvalues of the slit with a reflecting top: Dirichlet at x = 0 and
/// either Neumann (default) or Dirichlet at x = xh.
inline std::vector<double> box_spectrum(double xh, int count, bool dirichlet_top = false) {
    if (!(xh > 0) || count < 1) throw DomainError("box_spectrum needs xh > 0 and count >= 1");
    auto f = [&](double lam) {
        const auto m = airy::airy(-lam);
        const auto t = airy::airy(xh - lam);
        return dirichlet_top ? m.ai * t.bi - m.bi * t.ai : m.ai * t.bip - m.bi * t.aip;
    };
    std::vector<double> roots;
    double step = 0.02;
    double a = 1e-9, fa = f(a);
    while (static_cast<int>(roots.size()) < count) {
        const double b = a + step;
        const double fb = f(b);
        if (fa == 0.0) {
            roots.push_back(a);
        } else if (fa * fb < 0) {
            double lo = a, hi = b, flo = fa;
            for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
                const double mid = 0.5 * (lo + hi);
                const double fm = f(mid);
                if ((fm > 0) == (flo > 0)) {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            roots.push_back(0.5 * (lo + hi));
        }
        a = b;
        fa = fb;
        // levels of a narrow box are widely spaced
        if (roots.size() >= 2) {
            const double gap = roots.back() - roots[roots.size() - 2];
            step = std::min(0.05 * gap, 0.25);
        }
        if (a > 1e7) throw NumericalError("box_spectrum: too few roots found");
    }
    return roots;
}

/// Winding number of the determinant around the rectangle [lo, hi].
inline int count_zeros(const Determinant& det, cplx lo, cplx hi) {
    const cplx corners[4] = {lo, {hi.real(), lo.imag()}, hi, {lo.real(), hi.imag()}};
    double total = 0;
    for (int e = 0; e < 4; ++e) {
        const cplx a = corners[e], b = corners[(e + 1) % 4];
        // walk the edge, halving steps where the phase moves too fast
        double u = 0, du = 1.0 / 64.0;
        cplx fa = det.value(a);
        while (u < 1.0) {
            const double u1 = std::min(1.0, u + du);
            const cplx fb = det.value(a + (b - a) * u1);
            const double dphi = std::arg(fb / fa);
            if (std::abs(dphi) > 0.5 && du > 1e-9) {
                du *= 0.5;
                continue;
            }
            total += dphi;
            u = u1;
            fa = fb;
            du = std::min(du * 1.5, 1.0 / 16.0);
        }
    }
    return static_cast<int>(std::lround(total / (2.0 * std::numbers::pi)));
}

inline std::optional<cplx> newton(const Determinant& det, cplx z, double tol = 1e-13,
                                  int max_iter = 60) {
    for (int it = 0; it < max_iter; ++it) {
        const auto [d, dd] = det.eval(z);
        if (d == 0.0) return z;
        if (dd == 0.0 || !std::isfinite(std::abs(dd))) return std::nullopt;
        const cplx step = d / dd;
        z -= step;
        if (!std::isfinite(std::abs(z))) return std::nullopt;
        if (std::abs(step) <= tol * std::max(1.0, std::abs(z))) return z;
    }
    return std::nullopt;
}

/// Isolates the single zero inside a square by repeated quartering.
inline std::optional<cplx> isolate(const Determinant& det, cplx centre, double half) {
    if (count_zeros(det, centre - cplx(half, half), centre + cplx(half, half)) != 1)
        return std::nullopt;
    for (int depth = 0; depth < 40 && half > 1e-6; ++depth) {
        half *= 0.5;
        bool found = false;
        for (int q = 0; q < 4 && !found; ++q) {
            const cplx c = centre + cplx((q & 1) ? half : -half, (q & 2) ? half : -half);
            if (count_zeros(det, c - cplx(half, half), c + cplx(half, half)) == 1) {
                centre = c;
                found = true;
            }
        }
        if (!found) break;  // zero on a sub-square edge: Newton from here
    }
    return newton(det, centre);
}

inline double min_separation(const std::vector<cplx>& roots, std::size_t i) {
    double d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < roots.size(); ++j)
        if (j != i) d = std::min(d, std::abs(roots[i] - roots[j]));
    return d;
}

/// Follows the real s = 0 spectrum to absorber strength `s_target`.
inline std::vector<cplx> continue_roots(double xh, double s_target, int count) {
    const auto seeds = box_spectrum(xh, count);
    std::vector<cplx> roots(seeds.begin(), seeds.end());
    if (s_target == 0) return roots;
    double s = 0, ds = std::min(s_target, 1e-6);
    while (s < s_target) {
        const double s1 = std::min(s_target, s + ds);
        const Determinant det{xh, s1};
        std::vector<cplx> next(roots.size());
        bool ok = true;
        for (std::size_t i = 0; i < roots.size() && ok; ++i) {
            const double room = 0.3 * min_separation(roots, i);
            const auto z = newton(det, roots[i]);
            ok = z && std::abs(*z - roots[i]) < std::min(room, 0.5);
            if (ok) next[i] = *z;
        }
        if (ok) {
            for (std::size_t i = 0; i < next.size() && ok; ++i)
                ok = min_separation(next, i) > 1e-8 * std::max(1.0, std::abs(next[i]));
        }
        if (!ok && ds < 1e-10 * std::max(1.0, s)) {
            // Newton keeps straying: fall back to argument-principle isolation
            ok = true;
            for (std::size_t i = 0; i < roots.size() && ok; ++i) {
                const double half = std::min(0.3 * min_separation(roots, i), 0.5);
                const auto z = isolate(det, roots[i], half);
                if (!z)
                    throw NumericalError("slit mode " + std::to_string(i + 1) +
                                         " did not converge at absorber strength " +
                                         std::to_string(s1));
                next[i] = *z;
            }
        }
        if (ok) {
            for (std::size_t i = 0; i < next.size(); ++i)
                if (-next[i].imag() > 50.0 * std::max(1.0, next[i].real()))
                    throw NumericalError("slit mode " + std::to_string(i + 1) +
                                         " is over-damped at absorber strength " +
                                         std::to_string(s1));
            roots = std::move(next);
            s = s1;
            ds *= 1.6;
        } else {
            ds *= 0.25;
        }
    }
    return roots;
}

}  // namespace detail

/// Complex modes n = 1..n_count of the slit.
///
/// Very wide slits are truncated at x_h = lambda_top + 60, far above every
/// requested turning point, where the absorber coupling is below double
/// precision anyway.
inline std::vector<SlitMode> slit_modes(const ShaperGeometry& geom, int n_count,
                                        const PhysicsConstants& c = {}) {
    if (!(geom.slit_height > 0)) throw DomainError("slit_height must be positive");
    if (!(geom.absorber_strength >= 0)) throw DomainError("absorber_strength must be >= 0");
    if (n_count < 1) throw DomainError("n_count must be >= 1");
    const double l = gravitational_length(c);
    const double cap = airy::airy_zero(n_count) + 60.0;
    const double xh = std::min(geom.slit_height / l, cap);
    const auto roots = detail::continue_roots(xh, geom.absorber_strength, n_count);
    const double unit = c.mass * c.gbar * l;
    std::vector<SlitMode> out;
    for (int n = 1; n <= n_count; ++n) {
        const cplx lam = roots[static_cast<std::size_t>(n - 1)];
        out.push_back({n, lam, unit * lam.real(), std::max(0.0, -unit * lam.imag())});
    }
    return out;
}

/// Number of determinant zeros in a rectangle of the dimensionless lambda plane.
inline int count_modes_in_rectangle(const ShaperGeometry& geom, cplx lo, cplx hi,
                                    const PhysicsConstants& c = {}) {
    const double xh = geom.slit_height / gravitational_length(c);
    return detail::count_zeros({xh, geom.absorber_strength}, lo, hi);
}

/// Read-shared cache of slit_modes keyed by geometry and constants.
class SlitModeCache {
public:
    std::vector<SlitMode> get(const ShaperGeometry& geom, int n_count,
                              const PhysicsConstants& c = {}) {
        const Key key{geom.slit_height, geom.absorber_strength, n_count, c.hbar, c.mass, c.gbar};
        {
            std::shared_lock lock(mutex_);
            if (auto it = cache_.find(key); it != cache_.end()) return it->second;
        }
        auto modes = slit_modes(geom, n_count, c);
        std::unique_lock lock(mutex_);
        return cache_.emplace(key, std::move(modes)).first->second;
    }

    std::size_t size() const {
        std::shared_lock lock(mutex_);
        return cache_.size();
    }

private:
    using Key = std::tuple<double, double, int, double, double, double>;
    mutable std::shared_mutex mutex_;
    std::map<Key, std::vector<SlitMode>> cache_;
};

/// exp(-2 Gamma (R - r) / (hbar v_hor)) times an optional reflection survival.
inline double transmission(const SlitMode& mode, const ShaperGeometry& geom, double v_hor,
                           const PhysicsConstants& c = {}, double reflection_survival = 1.0) {
    if (!(v_hor > 0)) throw DomainError("v_hor must be positive");
    return std::exp(-2.0 * mode.width * geom.length() / (c.hbar * v_hor)) * reflection_survival;
}

inline double transmission(int n, const ShaperGeometry& geom, double v_hor,
                           const PhysicsConstants& c = {}, double reflection_survival = 1.0) {
    geom.validate();
    const auto modes = slit_modes(geom, n, c);
    return transmission(modes.back(), geom, v_hor, c, reflection_survival);
}

struct FittingStates {
    int n_max;
    bool below_ground_state;  // h < l lambda_1
};

inline FittingStates fitting_states(double h, const PhysicsConstants& c = {}) {
    if (!(h > 0)) throw DomainError("slit height must be positive");
    const double l = gravitational_length(c);
    if (l * airy::airy_zero(1) > h) return {1, true};
    int n = 1;
    while (l * airy::airy_zero(n + 1) <= h) ++n;
    return {n, false};
}

struct ShapedSpread {
    double dt_over_t;
    double beta_effective;
};

/// sqrt(sum pi_n l lambda_n / 3H); equal populations over the fitting states
/// when none are given.
inline ShapedSpread shaped_spread(double h, double height,
                                  const std::vector<double>& populations = {},
                                  const PhysicsConstants& c = {}) {
    if (!(h > 0) || !(height > 0)) throw DomainError("shaped_spread needs h, H > 0");
    std::vector<double> pi = populations;
    if (pi.empty()) {
        const int n_max = fitting_states(h, c).n_max;
        pi.assign(static_cast<std::size_t>(n_max), 1.0 / n_max);
    }
    double total = 0;
    for (double p : pi) {
        if (!(p >= 0)) throw DomainError("populations must be non-negative");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw DomainError("populations must sum to 1 (got " + std::to_string(total) + ")");
    const double l = gravitational_length(c);
    double sum = 0;
    for (std::size_t i = 0; i < pi.size(); ++i)
        if (pi[i] > 0) sum += pi[i] * l * airy::airy_zero(static_cast<int>(i) + 1);
    const double spread = std::sqrt(sum / (3.0 * height));
    return {spread, spread * spread * height / h};
}

/// beta_eff for the widest slit that still holds exactly n_max states.
inline double beta_effective(int n_max, const PhysicsConstants& c = {}) {
    if (n_max < 1) throw DomainError("n_max must be >= 1");
    double sum = 0;
    for (int n = 1; n <= n_max; ++n) sum += airy::airy_zero(n);
    (void)c;
    return sum / n_max / (3.0 * airy::airy_zero(n_max + 1));
}

struct ShapedEnsemble {
    std::vector<double> populations;    // pi_n, n = 1..
    std::vector<double> transmissions;  // T_n
    std::vector<SlitMode> modes;
    ShaperGeometry geometry;
    int n_max = 1;

    double survival() const {
        return std::accumulate(populations.begin(), populations.end(), 0.0);
    }
    std::vector<double> normalized() const {
        std::vector<double> p = populations;
        const double s = survival();
        if (s > 0)
            for (double& x : p) x /= s;
        return p;
    }
};

inline ShapedEnsemble shape_ensemble(const ShaperGeometry& geom, double v_hor = default_v_hor,
                                     const PhysicsConstants& c = {}, bool renormalize = false) {
    geom.validate();
    ShapedEnsemble e;
    e.geometry = geom;
    e.n_max = fitting_states(geom.slit_height, c).n_max;
    e.modes = slit_modes(geom, e.n_max, c);
    for (const auto& m : e.modes) {
        const double t = transmission(m, geom, v_hor, c);
        e.transmissions.push_back(t);
        e.populations.push_back(t / e.n_max);
    }
    if (renormalize) e.populations = e.normalized();
    return e;
}

struct Calibration {
    double absorber_strength;
    double t1;
    double t2;
    double residual;  // t1 - target
};

/// Absorber strength on the weak-coupling branch giving T_1 = target.
inline Calibration calibrate_absorber(double h, double length, double v_hor,
                                      double target_t1 = 0.72, const PhysicsConstants& c = {}) {
    if (!(target_t1 > 0 && target_t1 < 1)) throw DomainError("target transmission must be in (0,1)");
    auto t_pair = [&](double s) {
        ShaperGeometry g;
        g.slit_height = h;
        g.opening_radius = 1e-4;
        g.disk_radius = 1e-4 + length;
        g.absorber_strength = s;
        const auto modes = slit_modes(g, 2, c);
        return std::pair{transmission(modes[0], g, v_hor, c), transmission(modes[1], g, v_hor, c)};
    };
    double lo = 0, hi = 1e-5;
    while (t_pair(hi).first > target_t1) {
        lo = hi;
        hi *= 1.5;
        if (hi > 1e4)
            throw NumericalError("calibrate_absorber: target transmission is not reachable");
    }
    for (int it = 0; it < 100 && hi - lo > 1e-12 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (t_pair(mid).first > target_t1 ? lo : hi) = mid;
    }
    const double s = 0.5 * (lo + hi);
    const auto [t1, t2] = t_pair(s);
    return {s, t1, t2, t1 - target_t1};
}

}  // namespace gbar::shaper
