// Command-line front end: one subcommand per experiment, each writing CSVs,
// JSON reports, a plotting script, the effective config and a manifest.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "viscomem/config.hpp"
#include "viscomem/csv.hpp"
#include "viscomem/experiments.hpp"
#include "viscomem/kernel.hpp"

#ifndef VISCOMEM_VERSION
#define VISCOMEM_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using namespace viscomem;
using nlohmann::json;

namespace {

constexpr int kExitPass = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

/// FNV-1a over the canonical JSON text of the effective config.
std::string config_hash(const json& effective) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : effective.dump()) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string compiler_version() {
#if defined(__clang__)
    return std::string("clang ") + __clang_version__;
#elif defined(__GNUC__)
    return std::string("gcc ") + __VERSION__;
#else
    return "unknown";
#endif
}

/// Files written by one command, in order.
class Output {
public:
    explicit Output(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

    void text(const std::string& name, const std::function<void(std::ostream&)>& body) {
        std::ofstream os(dir_ / name, std::ios::binary);
        if (!os) throw ConfigError("cannot write " + (dir_ / name).string());
        body(os);
        files_.push_back(name);
    }
    void json_file(const std::string& name, const json& j) {
        text(name, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
    }
    const std::vector<std::string>& files() const { return files_; }
    const fs::path& dir() const { return dir_; }

private:
    fs::path dir_;
    std::vector<std::string> files_;
};

/// Plotting script that only names CSV files and columns.
struct Plot {
    std::string csv, x;
    std::vector<std::string> y;
    bool logy = false;
    std::string title;
};

void write_plot_script(Output& out, const std::vector<Plot>& plots) {
    out.text("plot.py", [&](std::ostream& os) {
        os << "import os\nimport sys\n\nimport matplotlib\nmatplotlib.use(\"Agg\")\n"
              "import matplotlib.pyplot as plt\nimport pandas as pd\n\n"
              "here = os.path.dirname(os.path.abspath(__file__))\n"
              "out = sys.argv[1] if len(sys.argv) > 1 else os.path.join(here, \"plots.png\")\n\n"
              "PLOTS = [\n";
        for (const auto& p : plots) {
            os << "    (\"" << p.csv << "\", \"" << p.x << "\", [";
            for (std::size_t i = 0; i < p.y.size(); ++i) os << (i ? ", " : "") << '"' << p.y[i] << '"';
            os << "], " << (p.logy ? "True" : "False") << ", \"" << p.title << "\"),\n";
        }
        os << "]\n\n"
              "fig, axes = plt.subplots(len(PLOTS), 1, figsize=(7, 3.2 * len(PLOTS)), squeeze=False)\n"
              "for ax, (csv, x, ys, logy, title) in zip(axes[:, 0], PLOTS):\n"
              "    df = pd.read_csv(os.path.join(here, csv))\n"
              "    for y in ys:\n"
              "        ax.plot(df[x], df[y].abs() if logy else df[y], label=y)\n"
              "    if logy:\n"
              "        ax.set_yscale(\"log\")\n"
              "    ax.set_xlabel(x)\n"
              "    ax.set_title(title)\n"
              "    ax.legend(fontsize=\"small\")\n"
              "fig.tight_layout()\n"
              "fig.savefig(out, dpi=120)\n";
    });
}

std::string num(double x) { return format_number(x); }

int cmd_simulate(const ExperimentConfig& c, Output& out) {
    const SimulateResult r = run_simulate(c);
    const Trajectory& tr = r.coarse.traj;
    out.text("trajectory.csv", [&](std::ostream& os) {
        CsvWriter w(os);
        std::vector<std::string> header{"t"};
        const std::size_t n = c.basis.modes;
        for (std::size_t k = 1; k <= n; ++k) header.push_back("u_" + std::to_string(k));
        for (std::size_t k = 1; k <= n; ++k) header.push_back("v_" + std::to_string(k));
        w.row(header);
        for (std::size_t i = 0; i < tr.t.size(); ++i) {
            std::vector<double> rec{tr.t[i]};
            rec.insert(rec.end(), tr.u[i].vector().begin(), tr.u[i].vector().end());
            rec.insert(rec.end(), tr.v[i].vector().begin(), tr.v[i].vector().end());
            w.row_numbers(rec);
        }
    });
    out.text("energy.csv", [&](std::ostream& os) {
        write_energy_csv(os, r.coarse.series, r.suite.eps, c.run.output_stride);
    });
    out.text("inequalities.csv", [&](std::ostream& os) { write_inequality_csv(os, r.suite.reports); });
    out.json_file("report.json", to_json(r));
    write_plot_script(out, {{"energy.csv", "t", {"E", "L", "Lambda"}, false, "energy functionals"},
                            {"energy.csv", "t", {"Phi", "Psi"}, false, "auxiliary functionals"},
                            {"energy.csv", "t", {"u_H1", "v_L2", "eta_M"}, true, "component norms"}});
    std::cout << "simulate: " << r.suite.reports.size() << " inequality reports, "
              << (r.all_pass() ? "all pass" : "FAILURES") << " (eps = " << r.suite.eps << ")\n";
    for (const auto& rep : r.suite.reports) {
        if (rep.verdict == "fail") std::cout << "  fail: " << rep.id << " " << rep.parameters.dump() << '\n';
    }
    return r.all_pass() ? kExitPass : kExitCheckFailed;
}

int cmd_check_kernel(const ExperimentConfig& c, Output& out) {
    const KernelPtr kernel = make_kernel(c.kernel);
    const AxiomReport rep = certify_axioms(*kernel);
    const std::vector<double> times{0.0, 1.0, 2.0, 5.0, 10.0};
    json j = rep.to_json();
    j["k_of_mu"] = k_of_mu_consistency(*kernel, times).to_json();
    const KvCompareConfig kc;
    j["delta_convergence"] = certify_delta_convergence(*kernel, kc.certification_times).to_json();
    j["passed"] = rep.passed();
    out.json_file("axioms.json", j);
    out.text("axioms.csv", [&](std::ostream& os) {
        CsvWriter w(os);
        w.row({"id", "verdict", "value", "witness_t", "witness_s", "detail"});
        for (const auto& a : rep.axioms) {
            w.row({a.id, to_string(a.verdict), num(a.value), num(a.witness_t), num(a.witness_s), a.detail});
        }
    });
    out.text("kernel_profile.csv", [&](std::ostream& os) {
        CsvWriter w(os);
        std::vector<std::string> header{"s"};
        for (double t : times) header.push_back("mu_t" + num(t));
        for (double t : times) header.push_back("k_t" + num(t));
        w.row(header);
        double smax = 0.0;
        for (double t : times) smax = std::max(smax, kernel->tail_point(t, 1e-6));
        const std::size_t n = 200;
        for (std::size_t i = 1; i <= n; ++i) {
            const double s = smax * static_cast<double>(i) / n;
            std::vector<double> rec{s};
            for (double t : times) rec.push_back(kernel->mu(t, s));
            for (double t : times) rec.push_back(kernel->k(t, s));
            w.row_numbers(rec);
        }
    });
    std::vector<std::string> mus;
    for (double t : times) mus.push_back("mu_t" + num(t));
    write_plot_script(out, {{"kernel_profile.csv", "s", mus, true, "mu_t(s)"}});
    std::cout << "check-kernel: " << kernel->name() << " " << rep.passed() << "/" << rep.axioms.size()
              << " axioms pass\n";
    for (const auto& id : rep.failed_ids()) {
        const auto& a = rep.axiom(id);
        std::cout << "  " << id << " " << to_string(a.verdict) << " at (t, s) = (" << a.witness_t << ", "
                  << a.witness_s << "): " << a.detail << '\n';
    }
    return rep.passed() == rep.axioms.size() ? kExitPass : kExitCheckFailed;
}

int cmd_decay(const ExperimentConfig& c, Output& out) {
    const DecayBundle b = run_decay(c);
    out.json_file("decay.json", to_json(b));
    std::vector<std::string> cols;
    for (const auto& m : b.members) cols.push_back("E_R" + num(m.R));
    out.text("decay.csv", [&](std::ostream& os) {
        CsvWriter w(os);
        std::vector<std::string> header{"t"};
        header.insert(header.end(), cols.begin(), cols.end());
        w.row(header);
        const std::size_t n = b.members.empty() ? 0 : b.members.front().t.size();
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> rec{b.members.front().t[i]};
            for (const auto& m : b.members) rec.push_back(m.E[i]);
            w.row_numbers(rec);
        }
    });
    out.text("decay_fits.csv", [&](std::ostream& os) {
        CsvWriter w(os);
        w.row({"R", "omega", "r_squared", "t_lo", "t_hi", "R0", "entered", "entry_time", "entry_radius"});
        for (const auto& m : b.members) {
            w.row({num(m.R), num(m.fit.omega), num(m.fit.r_squared), num(m.fit.t_lo), num(m.fit.t_hi),
                   num(m.absorbing.R0), m.absorbing.entered ? "true" : "false", num(m.absorbing.entry_time),
                   num(m.entry_radius)});
        }
    });
    write_plot_script(out, {{"decay.csv", "t", cols, true, "E(t) per initial radius"}});
    std::cout << "decay: " << (b.forced ? "R0" : "omega") << " spread " << b.spread << " (limit "
              << b.spread_limit << "), " << (b.pass() ? "pass" : "FAIL") << '\n';
    return b.pass() ? kExitPass : kExitCheckFailed;
}

int cmd_attractor(const ExperimentConfig& c, Output& out) {
    const AttractorExperiment r = run_attractor(c);
    out.json_file("attractor.json", to_json(r));
    const auto& p = r.pullback;
    out.text("pullback.csv", [&](std::ostream& os) {
        CsvWriter w(os);
        w.row({"tau", "offset", "radius", "failed", "semidist_to_previous"});
        for (std::size_t n = 0; n < p.taus.size(); ++n) {
            w.row({num(p.taus[n]), num(p.t - p.taus[n]), num(p.radius[n]), std::to_string(p.failed[n]),
                   n == 0 ? "" : num(p.consecutive[n - 1])});
        }
    });
    for (std::size_t n = 0; n < p.clouds.size(); ++n) {
        out.text("cloud_" + std::to_string(n) + ".csv", [&](std::ostream& os) { write_cloud_csv(os, p.clouds[n]); });
    }
    write_plot_script(out, {{"pullback.csv", "offset", {"semidist_to_previous", "radius"}, true,
                             "pullback sections"},
                            {"cloud_" + std::to_string(p.clouds.size() - 1) + ".csv", "u_1", {"v_1"}, false,
                             "section cloud (deepest start)"}});
    std::cout << "attractor: monotone " << p.monotone << ", invariance error " << r.invariance.error
              << " (resolution " << r.invariance.resolution << "), " << (r.pass() ? "pass" : "FAIL") << '\n';
    return r.pass() ? kExitPass : kExitCheckFailed;
}

int cmd_kv_compare(const ExperimentConfig& c, Output& out) {
    const KvCompare r = run_kv_compare(c);
    out.json_file("kv_compare.json", to_json(r));
    if (r.refused) {
        std::cerr << "kv-compare refused: " << r.reason << '\n';
        return kExitConfig;
    }
    out.text("kv_distances.csv", [&](std::ostream& os) {
        CsvWriter w(os);
        w.row({"T", "dist_energy", "dist_strong", "memory_radius", "failed"});
        for (const auto& row : r.rows) {
            w.row({num(row.T), num(row.dist_energy), num(row.dist_strong), num(row.memory_radius),
                   std::to_string(row.failed)});
        }
    });
    write_plot_script(out, {{"kv_distances.csv", "T", {"dist_energy", "dist_strong"}, true,
                             "distance to the Kelvin-Voigt attractor"}});
    std::cout << "kv-compare: m = " << r.m << ", nonincreasing " << r.nonincreasing << '\n';
    return r.nonincreasing ? kExitPass : kExitCheckFailed;
}

int cmd_gronwall(const ExperimentConfig& c, Output& out) {
    const GronwallExperiment r = run_gronwall(c);
    out.json_file("gronwall.json", to_json(r));
    std::ostringstream side;
    out.text("instance.csv", [&](std::ostream& os) { write_instance(os, side, r.instance); });
    out.text("instance.json", [&](std::ostream& os) { os << side.str(); });
    out.text("bound.csv", [&](std::ostream& os) {
        CsvWriter w(os);
        w.row({"t", "Lambda", "bound"});
        for (std::size_t i = 0; i < r.instance.size(); ++i) {
            w.row_numbers({r.instance.t(i), r.instance.Lambda[i], gronwall_bound(r.instance, r.instance.t(i))});
        }
    });
    write_plot_script(out, {{"bound.csv", "t", {"Lambda", "bound"}, true, "Gronwall bound"}});
    std::cout << "gronwall: hypothesis " << (r.hypothesis.holds() ? "holds" : "fails");
    if (r.conclusion.refused) {
        std::cout << ", conclusion refused (" << r.conclusion.reason << ")\n";
    } else {
        std::cout << ", max ratio " << r.conclusion.max_ratio << ", violations " << r.conclusion.violations << '\n';
    }
    return r.pass() ? kExitPass : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Wave equation with time-dependent memory kernel: experiments"};
    app.set_version_flag("--version", VISCOMEM_VERSION);
    app.require_subcommand(1);

    std::string config_path, out_dir = "viscomem_out", instance_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> threads;

    using Command = int (*)(const ExperimentConfig&, Output&);
    const std::vector<std::tuple<std::string, std::string, Command>> commands{
        {"simulate", "reference run with the inequality battery", cmd_simulate},
        {"check-kernel", "certify the kernel axioms", cmd_check_kernel},
        {"decay", "decay / absorbing fits over the radius bundle", cmd_decay},
        {"attractor", "pullback sections, invariance and regularity probes", cmd_attractor},
        {"kv-compare", "distance of pullback sections to the Kelvin-Voigt attractor", cmd_kv_compare},
        {"gronwall", "Gronwall hypothesis and conclusion", cmd_gronwall},
    };
    std::vector<CLI::App*> subs;
    for (const auto& [name, help, fn] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "experiment config (JSON)")->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "output directory")->capture_default_str();
        sub->add_option("--seed", seed, "override the config seed");
        sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
        if (name == "gronwall") {
            sub->add_option("--instance", instance_path,
                            "instance CSV (sidecar: same path with .json)")->check(CLI::ExistingFile);
        }
        subs.push_back(sub);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitPass : kExitConfig;
    }

    std::size_t which = 0;
    while (!subs[which]->parsed()) ++which;
    const auto& [name, help, fn] = commands[which];

    const auto t0 = std::chrono::steady_clock::now();
    int code = kExitPass;
    json manifest{{"command", name}, {"config_path", config_path}};
    std::optional<Output> out;
    try {
        json raw = json::object();
        std::string base;
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            try {
                in >> raw;
            } catch (const json::exception& e) {
                throw ConfigError(std::string("config: ") + e.what());
            }
            base = fs::path(config_path).parent_path().string();
        }
        if (!raw.is_object()) throw ConfigError("config: top level must be an object");
        if (seed) raw["seed"] = *seed;
        if (threads) raw["threads"] = *threads;
        if (!instance_path.empty()) {
            const fs::path p = fs::absolute(instance_path);
            raw["gronwall"]["instance_csv"] = p.string();
            raw["gronwall"]["instance_json"] = fs::path(p).replace_extension(".json").string();
        }
        const ExperimentConfig cfg = parse_config(raw, base);
        const json effective = to_json(cfg);
        out.emplace(out_dir);
        out->json_file("effective_config.json", effective);
        manifest["config_hash"] = config_hash(effective);
        manifest["seed"] = cfg.seed;
        manifest["threads"] = cfg.threads;
        code = fn(cfg, *out);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        code = kExitConfig;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        code = kExitNumeric;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        code = kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        code = kExitCheckFailed;
    }

    if (out) {
        manifest["exit_code"] = code;
        manifest["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        manifest["versions"] = {{"viscomem", VISCOMEM_VERSION},
                                {"compiler", compiler_version()},
                                {"cxx_standard", static_cast<long>(__cplusplus)},
                                {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                                      std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                                      std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
                                {"cli11", CLI11_VERSION}};
        manifest["outputs"] = out->files();
        std::ofstream(out->dir() / "manifest.json") << manifest.dump(2) << '\n';
    }
    return code;
}
