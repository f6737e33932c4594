#include <catch_amalgamated.hpp>

#include "gbar/gravstates.hpp"
#include "gbar/quasiclassical.hpp"
#include "gbar/wavepacket.hpp"
#include "support/oracles.hpp"

using namespace gbar;
using Catch::Matchers::WithinRel;

namespace {
const PhysicsConstants C;
constexpr double H = 0.3;

WaveFunction1D gaussian(double zeta, std::size_t points, double half_widths) {
    const auto trap = TrapConfig::with_position_dispersion(zeta, H, C);
    return wavepacket::gaussian_initial_state(trap, wavepacket::compact_grid(H, zeta, points, half_widths), C);
}
}  // namespace

TEST_CASE("unitarity for t <= 2 t_H") {
    const double t_h = free_fall_scales(H, C).time;
    const auto psi0 = gaussian(50e-6, 1 << 13, 60);
    for (double f : {0.1, 0.5, 1.0, 1.5, 2.0})
        CHECK(std::abs(wavepacket::propagate_free_fall(psi0, f * t_h, C).norm() - 1.0) < 1e-6);
}

TEST_CASE("FFT propagation matches the falling Gaussian oracle") {
    const double t_h = free_fall_scales(H, C).time;
    const double zeta = 40e-6;
    const auto psi0 = gaussian(zeta, 1 << 14, 100);
    const oracle::FallingGaussian ref{zeta, H, C.mass, C.hbar, C.gbar};
    const auto psi = wavepacket::propagate_free_fall(psi0, 0.7 * t_h, C);
    double err = 0, peak = 0;
    for (std::size_t i = 0; i < psi.size(); ++i) {
        const auto want = ref(psi.z(i), 0.7 * t_h);
        peak = std::max(peak, std::abs(want));
        err = std::max(err, std::abs(psi.amplitudes[i] - want));
    }
    CHECK(err < 1e-6 * peak);
}

TEST_CASE("point quadrature matches the closed form") {
    const double zeta = 88e-6;
    const auto trap = TrapConfig::with_position_dispersion(zeta, H, C);
    const auto psi0 = gaussian(zeta, 1 << 12, 12);
    const double t_h = free_fall_scales(H, C).time;
    for (double dt : {-2e-4, 0.0, 3e-4}) {
        const auto p = wavepacket::propagate_to_point(psi0, 0.0, t_h + dt, C);
        const auto want = wavepacket::evolved_gaussian(trap, t_h + dt, 0.0, C);
        CHECK(std::abs(p.psi - want) < 1e-6 * std::abs(wavepacket::evolved_gaussian(trap, t_h, 0.0, C)));
    }
}

TEST_CASE("numerical flux of a Gaussian agrees with the analytic flux") {
    const double zeta = 88e-6;
    const auto trap = TrapConfig::with_position_dispersion(zeta, H, C);
    const auto psi0 = gaussian(zeta, 1 << 12, 12);
    const auto num = wavepacket::numerical_flux(psi0, C);
    const auto ana = wavepacket::analytic_flux(trap, num.times, C);
    double err = 0, peak = 0;
    for (std::size_t i = 0; i < num.times.size(); ++i) {
        peak = std::max(peak, ana.flux[i]);
        err = std::max(err, std::abs(num.flux[i] - ana.flux[i]));
    }
    CHECK(err < 1e-5 * peak);
    CHECK_THAT(num.stddev, WithinRel(ana.stddev, 1e-5));
}

TEST_CASE("flux normalization for trap configurations") {
    const double t_h = free_fall_scales(H, C).time;
    const double zeta_opt = quasiclassical::optimal_initial_size(H, C).zeta_opt;
    for (const auto& trap : {TrapConfig::with_velocity_dispersion(0.14, H, C),
                             TrapConfig::with_velocity_dispersion(0.44, H, C), TrapConfig{},
                             TrapConfig::with_position_dispersion(zeta_opt, H, C)}) {
        const auto d = trap_dispersions(trap, C);
        const double dt = t_h * quasiclassical::free_fall_spread(d.zeta, d.upsilon, H, C);
        const auto f = wavepacket::analytic_flux(trap, wavepacket::adaptive_time_grid(t_h, 6 * dt, 0.0, 3 * t_h), C);
        CHECK(std::abs(f.integral - 1.0) < 1e-4);
    }
}

TEST_CASE("classical limit: mode near t_H at zeta_opt") {
    const auto opt = quasiclassical::optimal_initial_size(H, C);
    const auto trap = TrapConfig::with_position_dispersion(opt.zeta_opt, H, C);
    const double t_h = free_fall_scales(H, C).time;
    const auto f = wavepacket::analytic_flux(trap, wavepacket::adaptive_time_grid(t_h, 6 * opt.spread_opt * t_h, 0.0, 3 * t_h), C);
    CHECK(std::abs(f.mode - t_h) < opt.spread_opt * t_h);
}

TEST_CASE("release delay shifts the distribution") {
    const auto psi0 = gravstates::sample_state(1, C, H, 1 << 12);
    const auto pred = wavepacket::predict_arrival(psi0, C);
    const auto times = wavepacket::flux_time_grid(pred);
    std::vector<double> shifted = times;
    for (double& t : shifted) t += 1e-3;
    const auto a = wavepacket::numerical_flux(psi0, times, C);
    const auto b = wavepacket::numerical_flux(psi0, shifted, C, 1e-3);
    CHECK_THAT(b.mean - a.mean, WithinRel(1e-3, 1e-6));
    CHECK_THAT(b.stddev, WithinRel(a.stddev, 1e-6));
}

TEST_CASE("unresolved inputs are reported") {
    const auto trap = TrapConfig::with_position_dispersion(70e-9, H, C);
    CHECK_THROWS_AS(wavepacket::gaussian_initial_state(trap, C), DomainError);
    const auto psi0 = gaussian(20e-6, 1 << 10, 12);
    CHECK_THROWS_AS(wavepacket::propagate_free_fall(psi0, free_fall_scales(H, C).time, C), NumericalError);
}
