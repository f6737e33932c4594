#include <catch_amalgamated.hpp>

#include "gbar/config.hpp"

using namespace gbar;

TEST_CASE("defaults and overrides") {
    const auto cfg = parse_config_text("[trap]\nheight = 0.5\nupsilon = 0.44\n[montecarlo]\nn_atoms = 123\nshaping = false\n");
    CHECK(cfg.trap.height == 0.5);
    CHECK(cfg.montecarlo.n_atoms == 123);
    CHECK_FALSE(cfg.montecarlo.shaping);
    CHECK(std::abs(trap_dispersions(cfg.resolved_trap(), cfg.constants).upsilon - 0.44) < 1e-12);
    CHECK(cfg.geometry.absorber_strength < 0);  // calibrate by default
}

TEST_CASE("round trip through INI text") {
    auto cfg = parse_config_text("[shaper]\nslit_height = 2.4e-05\nabsorber_strength = 0.048\n[montecarlo]\nreflection = quantum\n");
    const std::string text = to_ini(cfg);
    const auto back = parse_config_text(text);
    CHECK(to_ini(back) == text);
    CHECK(back.geometry.slit_height == cfg.geometry.slit_height);
    CHECK(back.montecarlo.reflection == "quantum");
}

TEST_CASE("bad configs name the offending key") {
    auto message = [](const std::string& text) {
        try {
            parse_config_text(text);
        } catch (const ConfigError& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    CHECK(message("[trap]\nheigth = 1\n").find("trap.heigth") != std::string::npos);
    CHECK(message("[trap]\nheight = tall\n").find("trap.height") != std::string::npos);
    CHECK(message("[montecarlo]\nn_atoms = 1.5\n").find("montecarlo.n_atoms") != std::string::npos);
    CHECK(message("[montecarlo]\nshaping = maybe\n").find("montecarlo.shaping") != std::string::npos);
    CHECK_THROWS_AS(load_config("/nonexistent/file.ini"), ConfigError);
}
