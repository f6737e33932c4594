#include <catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("gbar_cli_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int run(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + " \"" GBAR_CLI_PATH "\" " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::string first_line(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    return line;
}

}  // namespace

TEST_CASE("estimate writes a summary") {
    const auto dir = scratch("estimate");
    REQUIRE(run("--out " + dir.string() + " estimate") == 0);
    const auto j = nlohmann::json::parse(slurp(dir / "estimate.json"));
    CHECK(std::abs(j["zeta_opt_m"].get<double>() - 88.27e-6) < 0.01e-6);
    CHECK(j["cases"].size() >= 3);
    CHECK(fs::exists(dir / "estimate.manifest.json"));
}

TEST_CASE("CSV headers carry units") {
    const auto dir = scratch("headers");
    REQUIRE(run("--out " + dir.string() + " reproduce fig2a") == 0);
    CHECK(first_line(dir / "reproduce_fig2a.csv") == "t (s),flux (1/s)");
    REQUIRE(run("--out " + dir.string() + " gravstates --count 2") == 0);
    CHECK(first_line(dir / "gravstates_table.csv") == "n,lambda,energy (peV),dz (m),dv (m/s)");
}

TEST_CASE("replaying a manifest reproduces the CSV byte for byte") {
    const auto a = scratch("replay_a"), b = scratch("replay_b");
    REQUIRE(run("--out " + a.string() + " --seed 7 --paper-case 2 montecarlo --atoms 3000") == 0);
    REQUIRE(run("replay " + (a / "montecarlo.manifest.json").string() + " --out " + b.string()) == 0);
    CHECK(slurp(a / "montecarlo_histogram.csv") == slurp(b / "montecarlo_histogram.csv"));
    CHECK(slurp(a / "montecarlo_estimate.json") == slurp(b / "montecarlo_estimate.json"));

    REQUIRE(run("--out " + a.string() + " scan --parameter h --from 1e-5 --to 1e-3 --points 5 --log") == 0);
    REQUIRE(run("replay " + (a / "scan_h.manifest.json").string() + " --out " + b.string()) == 0);
    CHECK(slurp(a / "scan_h.csv") == slurp(b / "scan_h.csv"));
}

TEST_CASE("JSON tables and the output directory variable") {
    const auto dir = scratch("env");
    REQUIRE(run("--format json reproduce fig2b", "GBAR_SHAPING_OUT=" + dir.string()) == 0);
    const auto j = nlohmann::json::parse(slurp(dir / "reproduce_fig2b.json"));
    CHECK(j.is_array());
    CHECK(j[0].contains("t (s)"));
}

TEST_CASE("exit codes") {
    const auto dir = scratch("codes");
    CHECK(run("--out " + dir.string() + " frobnicate") == 2);
    CHECK(run("--out " + dir.string() + " scan --parameter h --from 2e-5 --to 1e-5") == 2);
    CHECK(run("--out " + dir.string() + " reproduce fig9") == 2);
    std::ofstream(dir / "bad.ini") << "[trap]\nheigth = 0.3\n";
    CHECK(run("--out " + dir.string() + " --config " + (dir / "bad.ini").string() + " estimate") == 2);
    std::ofstream(dir / "coarse.ini") << "[wavepacket]\ngrid_points = 256\n";
    CHECK(run("--out " + dir.string() + " --config " + (dir / "coarse.ini").string() + " wavepacket --state 1") == 3);
}
