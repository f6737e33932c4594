#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include "gbar/core.hpp"

namespace gbar {

using complex = std::complex<double>;

struct UniformGrid {
    double z_min = 0;
    double z_max = 1;
    std::size_t points = 2;

    double step() const { return (z_max - z_min) / static_cast<double>(points - 1); }
    double operator[](std::size_t i) const { return z_min + step() * static_cast<double>(i); }
    double span() const { return z_max - z_min; }

    void validate() const {
        if (points < 2) throw DomainError("grid needs at least two points");
        if (!(z_max > z_min)) throw DomainError("grid needs z_max > z_min");
    }

    UniformGrid shifted(double dz) const { return {z_min + dz, z_max + dz, points}; }
};

/// Samples of a one-dimensional wave function on a uniform grid.
struct WaveFunction1D {
    UniformGrid grid;
    std::vector<complex> amplitudes;

    WaveFunction1D() = default;
    WaveFunction1D(UniformGrid g, std::vector<complex> a) : grid(g), amplitudes(std::move(a)) {
        grid.validate();
        if (amplitudes.size() != grid.points)
            throw DomainError("amplitude count does not match grid size");
    }

    std::size_t size() const { return amplitudes.size(); }
    double z(std::size_t i) const { return grid[i]; }

    /// Trapezoid integral of f(i) over the grid.
    template <class F>
    double integrate(F&& f) const {
        const std::size_t n = size();
        double s = 0.5 * (f(0) + f(n - 1));
        for (std::size_t i = 1; i + 1 < n; ++i) s += f(i);
        return s * grid.step();
    }

    double norm() const {
        return integrate([&](std::size_t i) { return std::norm(amplitudes[i]); });
    }

    double mean_position() const {
        return integrate([&](std::size_t i) { return z(i) * std::norm(amplitudes[i]); }) / norm();
    }

    double position_stddev() const {
        const double m = mean_position();
        const double var = integrate([&](std::size_t i) {
                               const double d = z(i) - m;
                               return d * d * std::norm(amplitudes[i]);
                           }) /
                           norm();
        return std::sqrt(var);
    }

    /// Central-difference derivative at sample i (one-sided at the ends).
    complex derivative(std::size_t i) const {
        const double h = grid.step();
        const std::size_t n = size();
        if (i == 0) return (amplitudes[1] - amplitudes[0]) / h;
        if (i + 1 == n) return (amplitudes[n - 1] - amplitudes[n - 2]) / h;
        return (amplitudes[i + 1] - amplitudes[i - 1]) / (2.0 * h);
    }

    /// <p>/hbar and <p^2>/hbar^2 by finite differences.
    std::pair<double, double> wavenumber_moments() const {
        const double nrm = norm();
        const double k1 = integrate([&](std::size_t i) {
                              return std::imag(std::conj(amplitudes[i]) * derivative(i));
                          }) /
                          nrm;
        const double k2 =
            integrate([&](std::size_t i) { return std::norm(derivative(i)); }) / nrm;
        return {k1, k2};
    }

    double max_abs() const {
        double m = 0;
        for (const auto& a : amplitudes) m = std::max(m, std::abs(a));
        return m;
    }

    void normalize() {
        const double n = norm();
        if (!(n > 0) || !std::isfinite(n)) throw DomainError("cannot normalize a null wave function");
        const double s = 1.0 / std::sqrt(n);
        for (auto& a : amplitudes) a *= s;
    }

    /// Throws unless |psi| at both grid ends is below `tolerance` of its peak.
    void check_support(double tolerance = 1e-6) const {
        const double peak = max_abs();
        const double edge = std::max(std::abs(amplitudes.front()), std::abs(amplitudes.back()));
        if (edge > tolerance * peak)
            throw DomainError("wave function is not contained in its grid (edge/peak = " +
                              std::to_string(edge / peak) + ")");
    }
};

}  // namespace gbar
