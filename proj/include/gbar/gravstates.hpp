#pragma once

/// \file gravstates.hpp
/// Bound states above an ideal horizontal mirror at z = 0.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "gbar/airy.hpp"
#include "gbar/core.hpp"
#include "gbar/detail/fft.hpp"
#include "gbar/wavefunction.hpp"

namespace gbar::gravstates {

using airy::airy_zero;

struct GravState {
    int n = 1;
    double lambda = 0;       // n-th zero magnitude of Ai
    double energy = 0;       // m gbar l lambda (J)
    double length = 0;       // l
    double ai_prime = 0;     // Ai'(-lambda)

    /// Psi_n(z) = Ai(z/l - lambda) / (sqrt(l) Ai'(-lambda)), zero below the mirror.
    double amplitude(double z) const {
        if (z < 0) return 0.0;
        return airy::ai(z / length - lambda) / (std::sqrt(length) * ai_prime);
    }

    double derivative(double z) const {
        if (z < 0) return 0.0;
        return airy::ai_prime(z / length - lambda) / (length * std::sqrt(length) * ai_prime);
    }

    /// Classical turning height l lambda.
    double extent() const { return length * lambda; }
};

inline GravState eigenstate(int n, const PhysicsConstants& c = {}) {
    if (n < 1) throw DomainError("gravitational state index must be >= 1");
    GravState s;
    s.n = n;
    s.lambda = airy_zero(n);
    s.length = gravitational_length(c);
    s.energy = c.mass * c.gbar * s.length * s.lambda;
    s.ai_prime = airy::ai_prime(-s.lambda);
    return s;
}

/// Samples Psi_n on [offset, offset + l (lambda + extent)], i.e. with the
/// mirror surface at z = offset.
inline WaveFunction1D sample_state(int n, const PhysicsConstants& c = {}, double offset = 0.0,
                                   std::size_t points = 1 << 14, double extent = 20.0) {
    const GravState s = eigenstate(n, c);
    UniformGrid grid{offset, offset + s.length * (s.lambda + extent), points};
    grid.validate();
    std::vector<complex> a(points);
    for (std::size_t i = 0; i < points; ++i) a[i] = s.amplitude(grid[i] - offset);
    a[0] = 0.0;
    return WaveFunction1D(grid, std::move(a));
}

struct StateDispersions {
    double dz;
    double dv;
};

inline StateDispersions state_dispersions(int n, const PhysicsConstants& c = {}) {
    const GravState s = eigenstate(n, c);
    return {2.0 * s.length * s.lambda / (3.0 * std::sqrt(5.0)),
            c.hbar / (c.mass * s.length) * std::sqrt(s.lambda / 3.0)};
}

struct VelocityDistribution {
    std::vector<double> velocity;  // m/s, ascending
    std::vector<double> density;   // s/m
    double raw_integral = 0;       // sum density dv before normalisation
    double mean = 0;
    double stddev = 0;
};

/// |Phi_n(v)|^2 with v = hbar k / m, from a zero-padded DFT of Psi_n sampled
/// on [0, l (lambda + 15)].
inline VelocityDistribution velocity_distribution(int n, const PhysicsConstants& c = {},
                                                  std::size_t points = 1 << 14,
                                                  std::size_t padding = 8) {
    if (points < 1024) throw DomainError("velocity_distribution needs at least 1024 points");
    if (padding < 1) throw DomainError("padding factor must be >= 1");
    const GravState s = eigenstate(n, c);
    const double span = s.length * (s.lambda + 15.0);
    const double dz = span / static_cast<double>(points - 1);

    // The kink at the mirror gives |Phi|^2 ~ 1/k^4; the variance missing
    // beyond the Nyquist wavenumber is ~ 1/(pi l^3 k_N) relative to <k^2>.
    const double k_nyquist = std::numbers::pi / dz;
    const double k2 = s.lambda / (3.0 * s.length * s.length);
    const double missing = 1.0 / (std::numbers::pi * std::pow(s.length, 3) * k_nyquist * k2);
    if (missing > 1e-3)
        throw DomainError("velocity grid too coarse: truncated variance fraction " +
                          std::to_string(missing));

    const std::size_t m = points * padding;
    std::vector<complex> buf(m, 0.0);
    for (std::size_t j = 1; j < points; ++j) buf[j] = s.amplitude(dz * static_cast<double>(j));
    detail::fft_in_place(buf, detail::FftDirection::forward);

    const double dk = 2.0 * std::numbers::pi / (static_cast<double>(m) * dz);
    const double dv = c.hbar / c.mass * dk;
    const double scale = dz * dz / (2.0 * std::numbers::pi) * c.mass / c.hbar;

    VelocityDistribution out;
    out.velocity.resize(m);
    out.density.resize(m);
    const std::size_t half = m / 2;
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t j = (i + m - half) % m;  // ascending frequency order
        out.velocity[i] = dv * static_cast<double>(detail::fft_frequency_index(j, m));
        out.density[i] = std::norm(buf[j]) * scale;
    }
    double total = 0, first = 0;
    for (std::size_t i = 0; i < m; ++i) {
        total += out.density[i];
        first += out.density[i] * out.velocity[i];
    }
    total *= dv;
    first *= dv;
    out.raw_integral = total;
    out.mean = first / total;
    double second = 0;
    for (std::size_t i = 0; i < m; ++i) {
        out.density[i] /= total;
        const double d = out.velocity[i] - out.mean;
        second += d * d * out.density[i];
    }
    out.stddev = std::sqrt(second * dv);
    return out;
}

struct SpreadEstimate {
    double full;        // sqrt(l^2 lambda^2 / 45 H^2 + l lambda / 3H)
    double simplified;  // sqrt(l lambda / 3H)
};

/// Relative arrival-time spread of state n dropped from height H.
inline SpreadEstimate dispersion_spread_estimate(int n, double height,
                                                 const PhysicsConstants& c = {}) {
    if (!(height > 0)) throw DomainError("height must be positive");
    const GravState s = eigenstate(n, c);
    const double x = s.length * s.lambda / height;
    return {std::sqrt(x * x / 45.0 + x / 3.0), std::sqrt(x / 3.0)};
}

}  // namespace gbar::gravstates
