#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "viscomem/config.hpp"
#include "viscomem/csv.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path work = fs::temp_directory_path() / "viscomem_cli_test";

int run(const std::string& args) {
    const std::string cmd = std::string(VISCOMEM_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string config(const std::string& name) { return std::string(VISCOMEM_CONFIG_DIR) + "/" + name; }

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

fs::path out_dir(const std::string& name) {
    const fs::path d = work / name;
    fs::remove_all(d);
    return d;
}

}  // namespace

TEST_CASE("simulate writes every artifact and a complete manifest") {
    const fs::path d = out_dir("sim");
    REQUIRE(run("simulate --config " + config("simulate_zero.json") + " --out " + d.string()) == 0);
    for (const char* f : {"effective_config.json", "manifest.json", "plot.py", "trajectory.csv", "energy.csv",
                          "inequalities.csv", "report.json"}) {
        CAPTURE(f);
        CHECK(fs::exists(d / f));
    }
    const auto man = read_json(d / "manifest.json");
    CHECK(man.at("command") == "simulate");
    CHECK(man.at("exit_code") == 0);
    CHECK(man.at("seed") == 42);
    CHECK(man.at("config_hash").get<std::string>().size() == 16);
    CHECK(man.at("versions").contains("viscomem"));
    // The echoed config reloads to the same configuration.
    const auto eff = read_json(d / "effective_config.json");
    CHECK(viscomem::parse_config(eff) == viscomem::load_config(config("simulate_zero.json")));
    std::ifstream csv(d / "energy.csv", std::ios::binary);
    const auto tab = viscomem::read_csv(csv);
    CHECK(tab.header.front() == "t");
    CHECK_FALSE(tab.rows.empty());
    CHECK(read_json(d / "report.json").at("all_pass") == true);
}

TEST_CASE("same seed gives byte-identical outputs; --seed overrides the config") {
    const fs::path a = out_dir("det_a"), b = out_dir("det_b"), c = out_dir("det_c");
    const std::string cfg = config("simulate_rheological_forced.json");
    REQUIRE(run("simulate --config " + cfg + " --out " + a.string()) == 0);
    REQUIRE(run("simulate --config " + cfg + " --out " + b.string() + " --threads 2") == 0);
    for (const char* f : {"trajectory.csv", "energy.csv", "inequalities.csv", "report.json"}) {
        CAPTURE(f);
        CHECK(slurp(a / f) == slurp(b / f));
    }
    REQUIRE(run("simulate --config " + cfg + " --out " + c.string() + " --seed 9") == 0);
    CHECK(read_json(c / "effective_config.json").at("seed") == 9);
    CHECK(slurp(a / "trajectory.csv") != slurp(c / "trajectory.csv"));
}

TEST_CASE("check-kernel exit status reflects the certificate") {
    const fs::path d = out_dir("ck");
    CHECK(run("check-kernel --config " + config("check_kernel_rescaled.json") + " --out " + d.string()) == 0);
    const auto ax = read_json(d / "axioms.json");
    CHECK(fs::exists(d / "axioms.csv"));
    CHECK(fs::exists(d / "kernel_profile.csv"));
    CHECK(ax.dump().find("M8") != std::string::npos);
    const fs::path m = out_dir("ck_mut");
    CHECK(run("check-kernel --config " + config("check_kernel_mutation_increasing.json") + " --out " + m.string()) == 1);
    CHECK(slurp(m / "axioms.csv").find("M4") != std::string::npos);
}

TEST_CASE("configuration errors and refusals exit with status 2") {
    fs::create_directories(work);
    std::ofstream(work / "bad_dt.json") << R"({"basis": {"modes": 64}, "solver": {"dt": 0.05, "T": 1.0}})";
    std::ofstream(work / "bad_key.json") << R"({"solver": {"step": 0.05}})";
    CHECK(run("simulate --config " + (work / "bad_dt.json").string() + " --out " + out_dir("e1").string()) == 2);
    CHECK(run("simulate --config " + (work / "bad_key.json").string() + " --out " + out_dir("e2").string()) == 2);
    CHECK(run("simulate --config " + (work / "missing.json").string() + " --out " + out_dir("e3").string()) == 2);
    CHECK(run("nonsense") == 2);
    const fs::path kv = out_dir("kv_refused");
    CHECK(run("kv-compare --config " + config("kv_compare_constant.json") + " --out " + kv.string()) == 2);
    CHECK(read_json(kv / "manifest.json").at("exit_code") == 2);
}

TEST_CASE("gronwall accepts a stored instance") {
    const fs::path d = out_dir("gr");
    CHECK(run("gronwall --config " + config("gronwall_trivial.json") + " --out " + d.string()) == 0);
    const auto g = read_json(d / "gronwall.json");
    CHECK(g.at("source") == "file");
    CHECK(g.at("pass") == true);
    CHECK(fs::exists(d / "bound.csv"));
}
