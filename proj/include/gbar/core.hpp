#pragma once

/// \file core.hpp
/// Physical constants, configuration types and the seeded random-number
/// contract shared by every module. Everything is SI.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace gbar {

/// Precondition or configuration-range violation.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// A numerical method failed to reach its tolerance.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace constants {
inline constexpr double hbar = 1.054571817e-34;            // J s
inline constexpr double atomic_mass_unit = 1.66053906660e-27;
inline constexpr double hydrogen_mass = 1.00782503207 * atomic_mass_unit;
inline constexpr double standard_gravity = 9.81;           // m/s^2
inline constexpr double electron_volt = 1.602176634e-19;   // J
inline constexpr double inverse_cm_in_ev = 1.2398e-4;      // 1 cm^-1 in eV
}  // namespace constants

struct PhysicsConstants {
    double hbar = constants::hbar;
    double mass = constants::hydrogen_mass;  // inertial mass of antihydrogen
    double gbar = constants::standard_gravity;  // free-fall acceleration of antihydrogen
    double g = constants::standard_gravity;     // ordinary matter

    void validate() const {
        if (!(hbar > 0) || !(mass > 0) || !(gbar > 0) || !(g > 0))
            throw DomainError("physics constants must be strictly positive");
    }
};

/// l = (hbar^2 / (2 m^2 gbar))^(1/3), the length scale of gravitational states.
inline double gravitational_length(const PhysicsConstants& c) {
    c.validate();
    return std::cbrt(c.hbar * c.hbar / (2.0 * c.mass * c.mass * c.gbar));
}

struct FreeFallScales {
    double time;      // t_H
    double velocity;  // v_H
};

inline FreeFallScales free_fall_scales(double height, const PhysicsConstants& c) {
    if (!(height > 0)) throw DomainError("drop height must be positive");
    return {std::sqrt(2.0 * height / c.gbar), std::sqrt(2.0 * c.gbar * height)};
}

struct TrapConfig {
    double omega = 2.0 * std::numbers::pi * 1.0e6;  // vertical angular frequency (rad/s)
    double epsilon = 3.0;                           // omega_hor / omega
    double height = 0.3;                            // drop height H (m)

    void validate() const {
        if (!(omega > 0)) throw DomainError("trap omega must be positive");
        if (!(epsilon > 0)) throw DomainError("trap epsilon must be positive");
        if (!(height > 0)) throw DomainError("trap height must be positive");
    }

    /// Trap whose ground state has vertical velocity dispersion `upsilon`.
    static TrapConfig with_velocity_dispersion(double upsilon, double height,
                                               const PhysicsConstants& c,
                                               double epsilon = 3.0) {
        return {2.0 * c.mass * upsilon * upsilon / c.hbar, epsilon, height};
    }
    /// Trap whose ground state has vertical position dispersion `zeta`.
    static TrapConfig with_position_dispersion(double zeta, double height,
                                               const PhysicsConstants& c,
                                               double epsilon = 3.0) {
        return {c.hbar / (2.0 * c.mass * zeta * zeta), epsilon, height};
    }
};

struct TrapDispersions {
    double zeta;         // vertical position
    double upsilon;      // vertical velocity
    double zeta_hor;
    double upsilon_hor;
};

inline TrapDispersions trap_dispersions(const TrapConfig& t, const PhysicsConstants& c) {
    t.validate();
    const double zeta = std::sqrt(c.hbar / (2.0 * c.mass * t.omega));
    const double upsilon = c.hbar / (2.0 * c.mass * zeta);  // m upsilon zeta = hbar/2
    const double root_eps = std::sqrt(t.epsilon);
    return {zeta, upsilon, zeta / root_eps, upsilon * root_eps};
}

/// Two-disk slit. The mirror top surface is at the reference height of the
/// trap centre; the absorber is `slit_height` above it.
struct ShaperGeometry {
    double slit_height = 50e-6;       // h
    double opening_radius = 1e-4;     // r
    double disk_radius = 5.01e-2;     // R
    double absorber_strength = 0.0;   // dimensionless, see shaper.hpp
    double roughness = 1e-6;          // metadata only

    double length() const { return disk_radius - opening_radius; }

    void validate() const {
        if (!(slit_height > 0)) throw DomainError("slit_height must be positive");
        if (!(opening_radius > 0) || !(opening_radius < disk_radius))
            throw DomainError("shaper geometry needs 0 < opening_radius < disk_radius");
        if (!(absorber_strength >= 0)) throw DomainError("absorber_strength must be >= 0");
    }
};

/// Reproducible random stream keyed by (seed, stream_id).
///
/// The engine is seeded through std::seed_seq, whose algorithm is fixed by
/// the standard, so a given key reproduces the same sequence in every run and
/// independent of how work is split across threads.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed, std::uint64_t stream_id = 0)
        : seed_(seed), stream_id_(stream_id) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(stream_id),
                          static_cast<std::uint32_t>(stream_id >> 32), 0x9e3779b9u};
        engine_.seed(seq);
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_id_; }

    /// Stream for sub-task `index` (e.g. one trajectory).
    SeededRng substream(std::uint64_t index) const {
        return SeededRng(seed_, mix(stream_id_ ^ mix(index + 0x632be59bd9b4e019ULL)));
    }

    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
    double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }
    double normal(double mean, double sd) { return mean + sd * normal(); }
    std::size_t index(std::size_t n) {
        return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
    }

    std::mt19937_64& engine() { return engine_; }

private:
    static std::uint64_t mix(std::uint64_t x) {  // splitmix64 finaliser
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::mt19937_64 engine_;
};

}  // namespace gbar
