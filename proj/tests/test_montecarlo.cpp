#include <catch_amalgamated.hpp>

#include <cstring>

#include "gbar/montecarlo.hpp"

using namespace gbar;
using namespace gbar::montecarlo;
using Catch::Matchers::WithinRel;

namespace {
const PhysicsConstants C;
constexpr double H = 0.3;

ShaperGeometry slit(double h, double r = 1e-4, double R = 5.01e-2) {
    ShaperGeometry g;
    g.slit_height = h;
    g.opening_radius = r;
    g.disk_radius = R;
    return g;
}

ExperimentConfig experiment(double h, std::size_t atoms) {
    ExperimentConfig e;
    e.trap = TrapConfig::with_velocity_dispersion(0.44, H, C, 3.0);
    e.geometry = slit(h);
    e.n_atoms = atoms;
    e.bootstrap_resamples = 200;
    return e;
}

InitialState at_rest(double z0, double vx) {
    InitialState s;
    s.z = H + z0;
    s.vx = vx;
    return s;
}
}  // namespace

TEST_CASE("grazing atom bounce count") {
    SeededRng rng(1);
    const double z0 = 20e-6, v = 0.5;
    const auto g = slit(50e-6);
    const auto tr = trace_through_shaper(at_rest(z0, v), g, H, ReflectionModel::ideal(), rng, C);
    REQUIRE(tr.fate == Fate::transmitted);
    const double t_first = std::sqrt(2 * z0 / C.gbar), period = 2 * t_first;
    const double transit = g.disk_radius / v;
    CHECK(tr.bounces == static_cast<long>(std::floor((transit - t_first) / period)) + 1);
    CHECK_THAT(tr.exit.t, WithinRel(transit, 1e-12));
    CHECK(tr.energy_error < 1e-9);
}

TEST_CASE("atom released on the mirror plane") {
    SeededRng rng(1);
    // vanishing opening: grazing transport along the mirror
    const auto tr = trace_through_shaper(at_rest(0.0, 0.3), slit(50e-6, 1e-12), H, ReflectionModel::ideal(), rng, C);
    CHECK(tr.fate == Fate::transmitted);
    CHECK(tr.bounces == 0);
    // a finite opening lets it drop below the mirror edge first
    CHECK(trace_through_shaper(at_rest(0.0, 0.3), slit(50e-6), H, ReflectionModel::ideal(), rng, C).fate ==
          Fate::annihilated_mirror);
}

TEST_CASE("simple fates") {
    SeededRng rng(1);
    const auto g = slit(50e-6);
    CHECK(trace_through_shaper(at_rest(10e-6, 0.0), g, H, ReflectionModel::ideal(), rng, C).fate ==
          Fate::annihilated_mirror);
    InitialState fast = at_rest(1e-6, 0.5);
    fast.vz = 0.1;  // apex far above the slit
    CHECK(trace_through_shaper(fast, g, H, ReflectionModel::ideal(), rng, C).fate == Fate::absorbed_top);
    InitialState down = at_rest(0.0, 0.5);
    down.vz = -0.01;
    CHECK(trace_through_shaper(down, g, H, ReflectionModel::ideal(), rng, C).fate == Fate::annihilated_mirror);
    const auto black = ReflectionModel::from_table({{0.001, 0.0}, {1.0, 0.0}});
    CHECK(trace_through_shaper(at_rest(10e-6, 0.5), g, H, black, rng, C).fate == Fate::annihilated_mirror);
}

TEST_CASE("quantum reflection model") {
    const auto m = ReflectionModel::quantum_reflection();
    CHECK_THAT(m(0.031).probability, WithinRel(0.94, 1e-12));
    CHECK_THAT(m(0.14).probability, WithinRel(0.78, 1e-12));
    CHECK(m(0.0).probability == 1.0);
    CHECK(m(2.0).extrapolated);
    CHECK(m(2.0).probability >= 0.0);
    CHECK_FALSE(m(0.5).extrapolated);
    CHECK_THROWS_AS(ReflectionModel::from_table({{0.1, 1.2}, {0.2, 0.5}}), DomainError);
    CHECK_THROWS_AS(m(-0.1), DomainError);
}

TEST_CASE("time-in-shaper correction is exact for a level exit") {
    ExitState e{0.1, 0.05, 0.0, H, 0.5, 0.0, 0.0};
    const auto rec = free_fall_and_detect(e, C);
    const auto g = slit(50e-6, 1e-4, 0.05);
    CHECK_THAT(correct_shaper_time(rec, g), WithinRel(std::sqrt(2 * H / C.gbar), 1e-12));
    DetectionRecord bad{1.0, 0.01, 0.9, 0.1};
    CHECK_THROWS_AS(correct_shaper_time(bad, g), DomainError);
}

TEST_CASE("fate conservation and energy conservation") {
    const auto e = experiment(50e-6, 20000);
    const auto r = run_experiment(e, 5);
    CHECK(r.tally.total() == e.n_atoms);
    CHECK(r.max_energy_error < 1e-9);
    CHECK(r.corrected_times.size() == r.tally.transmitted);
}

TEST_CASE("determinism regardless of worker count") {
    auto e = experiment(50e-6, 6000);
    e.reflection = ReflectionModel::quantum_reflection();
    e.recoil_sigma = 0.01;
    e.threads = 1;
    const auto a = run_experiment(e, 99);
    e.threads = 4;
    const auto b = run_experiment(e, 99);
    REQUIRE(a.corrected_times.size() == b.corrected_times.size());
    CHECK(std::memcmp(a.corrected_times.data(), b.corrected_times.data(),
                      a.corrected_times.size() * sizeof(double)) == 0);
    CHECK(a.tally.absorbed_top == b.tally.absorbed_top);
    CHECK(a.estimate->ci_low == b.estimate->ci_low);
    const auto c = run_experiment(e, 100);
    CHECK(c.corrected_times != a.corrected_times);
}

TEST_CASE("estimator recovers gbar on ideal-mirror data") {
    const auto r = run_experiment(experiment(1e-3, 20000), 3);
    REQUIRE(r.estimate);
    REQUIRE(r.corrected_times.size() >= 1000);
    CHECK(r.estimate->ci_low <= C.gbar);
    CHECK(C.gbar <= r.estimate->ci_high);
}

TEST_CASE("without shaping the fall time is recorded directly") {
    auto e = experiment(50e-6, 2000);
    e.shaping = false;
    const auto r = run_experiment(e, 11);
    CHECK(r.acceptance == 1.0);
    REQUIRE(r.estimate);
    CHECK_THAT(r.estimate->gbar, WithinRel(C.gbar, 0.05));
}

TEST_CASE("estimator input checks") {
    CHECK_THROWS_AS(estimate_gbar(std::vector<double>(10, 0.25), H), DomainError);
    CHECK_THAT(trimmed_mean({1, 2, 3, 4, 100, 5, 6, 7, 8, 9}, 0.8), WithinRel(5.5, 1e-12));
    const auto h = make_histogram({0.1, 0.2, 0.2, 0.3}, 2);
    CHECK(h.counts[0] + h.counts[1] == 4);
}
