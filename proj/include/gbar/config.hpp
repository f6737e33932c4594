#pragma once

/// \file config.hpp
/// INI configuration: one section per module, SI units, every key optional.
///
///   [constants]   hbar mass gbar g
///   [trap]        omega epsilon height upsilon
///   [shaper]      slit_height opening_radius disk_radius absorber_strength
///                 roughness v_hor n_count sweep_h_min sweep_h_max sweep_points
///   [estimate]    n_tot beta alpha
///   [wavepacket]  state grid_points core_points wing_points core_widths wing_widths
///   [gravstates]  count points padding
///   [montecarlo]  n_atoms shaping recoil reflection reflection_table top_survival
///                 time_blur position_blur bins bootstrap trim threads
///
/// trap.upsilon, when positive, replaces omega by the frequency whose ground
/// state has that vertical velocity dispersion. shaper.absorber_strength < 0
/// means "calibrate" (T1 = 0.72 at h = 24 um over 5 cm at v_hor).

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "gbar/core.hpp"

namespace gbar {

class ConfigError : public DomainError {
public:
    using DomainError::DomainError;
};

struct EstimateSettings {
    double n_tot = 2.6e4;
    double beta = 1.0;
    double alpha = 1.0;
};

struct ShaperSettings {
    double v_hor = 0.7621023553303117;  // 0.44 sqrt(3) m/s
    int n_count = 4;
    double sweep_h_min = 15e-6;
    double sweep_h_max = 40e-6;
    int sweep_points = 26;
};

struct WavepacketSettings {
    int state = 0;  // 0: Gaussian trap ground state; n >= 1: gravitational state n
    int grid_points = 1 << 14;
    int core_points = 4001;
    int wing_points = 1000;
    double core_widths = 6.0;
    double wing_widths = 60.0;
};

struct GravstateSettings {
    int count = 10;
    int points = 1 << 14;
    int padding = 8;
};

struct MonteCarloSettings {
    long n_atoms = 100000;
    bool shaping = true;
    double recoil = 0;
    std::string reflection = "ideal";  // ideal | quantum | table
    std::string reflection_table;
    double top_survival = 0;
    double time_blur = 0;
    double position_blur = 0;
    int bins = 100;
    int bootstrap = 1000;
    double trim = 0.9;
    int threads = 0;
};

inline ShaperGeometry calibrated_default_geometry() {
    ShaperGeometry g;
    g.absorber_strength = -1.0;
    return g;
}

struct Config {
    PhysicsConstants constants;
    TrapConfig trap;
    double trap_upsilon = 0;
    ShaperGeometry geometry = calibrated_default_geometry();
    ShaperSettings shaper;
    EstimateSettings estimate;
    WavepacketSettings wavepacket;
    GravstateSettings gravstates;
    MonteCarloSettings montecarlo;

    /// Trap with the upsilon override applied.
    TrapConfig resolved_trap() const {
        if (trap_upsilon > 0)
            return TrapConfig::with_velocity_dispersion(trap_upsilon, trap.height, constants,
                                                        trap.epsilon);
        return trap;
    }
};

namespace detail {

class ConfigVisitor {
public:
    explicit ConfigVisitor(Config& c) : c_(c) {}

    template <class F>
    void each(F&& f) {
        f("constants.hbar", c_.constants.hbar);
        f("constants.mass", c_.constants.mass);
        f("constants.gbar", c_.constants.gbar);
        f("constants.g", c_.constants.g);
        f("trap.omega", c_.trap.omega);
        f("trap.epsilon", c_.trap.epsilon);
        f("trap.height", c_.trap.height);
        f("trap.upsilon", c_.trap_upsilon);
        f("shaper.slit_height", c_.geometry.slit_height);
        f("shaper.opening_radius", c_.geometry.opening_radius);
        f("shaper.disk_radius", c_.geometry.disk_radius);
        f("shaper.absorber_strength", c_.geometry.absorber_strength);
        f("shaper.roughness", c_.geometry.roughness);
        f("shaper.v_hor", c_.shaper.v_hor);
        f("shaper.n_count", c_.shaper.n_count);
        f("shaper.sweep_h_min", c_.shaper.sweep_h_min);
        f("shaper.sweep_h_max", c_.shaper.sweep_h_max);
        f("shaper.sweep_points", c_.shaper.sweep_points);
        f("estimate.n_tot", c_.estimate.n_tot);
        f("estimate.beta", c_.estimate.beta);
        f("estimate.alpha", c_.estimate.alpha);
        f("wavepacket.state", c_.wavepacket.state);
        f("wavepacket.grid_points", c_.wavepacket.grid_points);
        f("wavepacket.core_points", c_.wavepacket.core_points);
        f("wavepacket.wing_points", c_.wavepacket.wing_points);
        f("wavepacket.core_widths", c_.wavepacket.core_widths);
        f("wavepacket.wing_widths", c_.wavepacket.wing_widths);
        f("gravstates.count", c_.gravstates.count);
        f("gravstates.points", c_.gravstates.points);
        f("gravstates.padding", c_.gravstates.padding);
        f("montecarlo.n_atoms", c_.montecarlo.n_atoms);
        f("montecarlo.shaping", c_.montecarlo.shaping);
        f("montecarlo.recoil", c_.montecarlo.recoil);
        f("montecarlo.reflection", c_.montecarlo.reflection);
        f("montecarlo.reflection_table", c_.montecarlo.reflection_table);
        f("montecarlo.top_survival", c_.montecarlo.top_survival);
        f("montecarlo.time_blur", c_.montecarlo.time_blur);
        f("montecarlo.position_blur", c_.montecarlo.position_blur);
        f("montecarlo.bins", c_.montecarlo.bins);
        f("montecarlo.bootstrap", c_.montecarlo.bootstrap);
        f("montecarlo.trim", c_.montecarlo.trim);
        f("montecarlo.threads", c_.montecarlo.threads);
    }

private:
    Config& c_;
};

inline std::string format_value(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}
inline std::string format_value(int v) { return std::to_string(v); }
inline std::string format_value(long v) { return std::to_string(v); }
inline std::string format_value(bool v) { return v ? "true" : "false"; }
inline std::string format_value(const std::string& v) { return v; }

inline void parse_value(const std::string& key, const std::string& text, double& out) {
    std::size_t pos = 0;
    try {
        out = std::stod(text, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos == 0 || pos != text.size())
        throw ConfigError("config key '" + key + "': '" + text + "' is not a number");
}
inline void parse_value(const std::string& key, const std::string& text, long& out) {
    double d;
    parse_value(key, text, d);
    if (d != static_cast<double>(static_cast<long>(d)))
        throw ConfigError("config key '" + key + "': '" + text + "' is not an integer");
    out = static_cast<long>(d);
}
inline void parse_value(const std::string& key, const std::string& text, int& out) {
    long l;
    parse_value(key, text, l);
    out = static_cast<int>(l);
}
inline void parse_value(const std::string& key, const std::string& text, bool& out) {
    if (text == "true" || text == "yes" || text == "1" || text == "on") {
        out = true;
    } else if (text == "false" || text == "no" || text == "0" || text == "off") {
        out = false;
    } else {
        throw ConfigError("config key '" + key + "': '" + text + "' is not a boolean");
    }
}
inline void parse_value(const std::string&, const std::string& text, std::string& out) {
    out = text;
}

}  // namespace detail

/// Applies every key in `tree` onto `cfg`; unknown sections or keys throw
/// ConfigError naming them.
inline void apply_config(Config& cfg, const boost::property_tree::ptree& tree) {
    std::set<std::string> known;
    detail::ConfigVisitor(cfg).each([&](const std::string& k, auto&) { known.insert(k); });
    for (const auto& [section, body] : tree) {
        if (body.empty() && !body.data().empty())
            throw ConfigError("config key '" + section + "' must live in a section");
        for (const auto& [key, value] : body) {
            const std::string full = section + "." + key;
            if (!known.count(full)) throw ConfigError("unknown config key '" + full + "'");
        }
    }
    detail::ConfigVisitor(cfg).each([&](const std::string& k, auto& target) {
        if (auto v = tree.get_optional<std::string>(boost::property_tree::ptree::path_type(k, '.')))
            detail::parse_value(k, *v, target);
    });
}

inline Config parse_config(std::istream& in) {
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
    Config cfg;
    apply_config(cfg, tree);
    return cfg;
}

inline Config parse_config_text(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

inline Config load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    return parse_config(in);
}

/// Full resolved configuration as INI text (parses back to the same Config).
inline std::string to_ini(const Config& cfg) {
    Config copy = cfg;
    std::map<std::string, std::map<std::string, std::string>> sections;
    std::vector<std::string> order;
    detail::ConfigVisitor(copy).each([&](const std::string& k, auto& v) {
        const auto dot = k.find('.');
        const std::string s = k.substr(0, dot);
        if (!sections.count(s)) order.push_back(s);
        sections[s][k.substr(dot + 1)] = detail::format_value(v);
    });
    std::ostringstream os;
    for (const auto& s : order) {
        os << '[' << s << "]\n";
        detail::ConfigVisitor(copy).each([&](const std::string& k, auto&) {
            if (k.compare(0, s.size() + 1, s + ".") == 0) {
                const std::string key = k.substr(s.size() + 1);
                os << key << " = " << sections[s][key] << '\n';
            }
        });
        os << '\n';
    }
    return os.str();
}

}  // namespace gbar
