// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "support/oracles.hpp"
#include "viscomem/experiments.hpp"

using namespace viscomem;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", x);
    return buf;
}

ExperimentConfig config(const std::string& name) {
    return load_config(std::string(VISCOMEM_CONFIG_DIR) + "/" + name);
}

ExperimentConfig with(ExperimentConfig c, const nlohmann::json& patch) {
    nlohmann::json j = to_json(c);
    j.merge_patch(patch);
    return parse_config(j);
}

/// Reference runs shared by several criteria.
struct References {
    ExperimentConfig rescaled_cfg, rheological_cfg;
    SimulateResult rescaled, rheological;
};

References& refs() {
    static References r = [] {
        References x;
        x.rescaled_cfg = config("simulate.json");
        x.rheological_cfg = with(config("simulate_rheological_forced.json"), {{"energy", {{"refine", true}}}});
        x.rescaled = run_simulate(x.rescaled_cfg);
        x.rheological = run_simulate(x.rheological_cfg);
        return x;
    }();
    return r;
}

// 1 ---------------------------------------------------------------------------
Outcome form_equivalence() {
    ExperimentConfig c = with(config("simulate.json"), {{"solver", {{"T", 5.0}}}});
    const Model model = make_model(c, 0.0, 5.0);
    const std::size_t N = model.n_modes();
    // Smooth manufactured past with a kink-free join at tau (zero initial velocity).
    auto amp = [](std::size_t k) { return 1.0 / std::pow(static_cast<double>(k + 1), 3); };
    PastDescription past;
    past.tau = 0.0;
    past.u = [&](double t) {
        ModalField x(N);
        for (std::size_t k = 0; k < N; ++k) x[k] = amp(k) * std::cos((k % 5 + 1) * t) * std::exp(-0.2 * t);
        return x;
    };
    past.v = [&](double t) {
        ModalField x(N);
        for (std::size_t k = 0; k < N; ++k) {
            const double w = static_cast<double>(k % 5 + 1);
            x[k] = amp(k) * std::exp(-0.2 * t) * (-w * std::sin(w * t) - 0.2 * std::cos(w * t));
        }
        return x;
    };
    past.u_tau = past.u(0.0);
    double manufactured = 0.0;
    for (double t : {0.5, 2.0, 4.5}) manufactured = std::max(manufactured, form_residual(past, ModalField(N), t, model).rel_cross);

    bool runs_ok = true;
    std::string runs;
    for (const SimulateResult* r : {&refs().rescaled, &refs().rheological}) {
        if (!r->coarse.form) return {false, "simulated run lacks a form residual"};
        runs += " " + fmt(r->coarse.form->rel_cross) + "<" + fmt(r->form_bound);
        runs_ok = runs_ok && r->coarse.form->rel_cross < r->form_bound;
    }
    return {manufactured <= 1e-6 && runs_ok,
            "manufactured rel " + fmt(manufactured) + " (<= 1e-6, N=32 J=400); simulated" + runs};
}

// 2 ---------------------------------------------------------------------------
Outcome eta_cross_validation() {
    const ExperimentConfig& c = refs().rescaled_cfg;
    const double e400 = refs().rescaled.coarse.traj.max_cross_check();
    const ExperimentConfig fine = with(c, {{"grid", {{"J", 2 * c.grid.J}}}});
    const double e800 = reference_run(fine, c.run.dt, fine.grid.J).traj.max_cross_check();
    const double order = std::log2(e400 / e800);
    return {e400 < 0.02 && order >= 0.8,
            "J=400 " + fmt(e400) + " (< 0.02), J=800 " + fmt(e800) + ", observed order " + fmt(order) +
                " (>= 0.8)"};
}

// 3 ---------------------------------------------------------------------------
Outcome kernel_certification() {
    std::string detail;
    bool ok = true;
    const RescaledKernel resc(0.4);
    const RheologicalKernel rheo(1.0, 1.0, 0.5);
    for (const KernelFamily* k : {static_cast<const KernelFamily*>(&resc), static_cast<const KernelFamily*>(&rheo)}) {
        const AxiomReport rep = certify_axioms(*k);
        ok = ok && rep.passed() == 8;
        detail += k->name() + " " + std::to_string(rep.passed()) + "/8; ";
    }
    const std::vector<nlohmann::json> mutations{{{"family", "rescaled"}, {"increasing", true}},
                                                {{"family", "rheological"}, {"alpha", 5.0}},
                                                {{"family", "oscillating"}}};
    for (const auto& spec : mutations) {
        const KernelPtr k = make_kernel(spec);
        const AxiomReport rep = certify_axioms(*k);
        const auto failed = rep.failed_ids();
        const auto& m4 = rep.axiom("M4");
        const bool witness = k->dmu_dt(m4.witness_t, m4.witness_s) + k->dmu_ds(m4.witness_t, m4.witness_s) > 0.0;
        const bool exact = failed.size() == 1 && failed[0] == "M4" && witness;
        ok = ok && exact;
        detail += k->name() + (exact ? " fails M4 only at (" + fmt(m4.witness_t) + "," + fmt(m4.witness_s) + "); "
                                     : " unexpected verdicts; ");
    }
    // Closed-form identities against independent quadrature.
    double worst = 0.0;
    const RheologicalKernel skew(2.0, 0.5, 0.5);
    for (double t : {-5.0, -1.0, 0.0, 2.0, 8.0}) {
        auto mass = [&](const KernelFamily& k) {
            return oracle::gauss_to_infinity([&](double s) { return k.mu(t, s); }, 0.0, k.scale(t));
        };
        worst = std::max(worst, std::abs(mass(resc) * resc.epsilon(t) - 1.0));
        worst = std::max(worst, std::abs(mass(rheo) / (rheo.stiffness(t) / rheo.rho()) - 1.0));
        worst = std::max(worst, std::abs(mass(skew) / (skew.stiffness(t) / skew.rho()) - 1.0));
        worst = std::max(worst, std::abs(resc.mu(t, 0.0) / std::pow(mass(resc), 2) - 1.0));
        worst = std::max(worst, std::abs(rheo.mu(t, 0.0) / std::pow(mass(rheo), 2) - 1.0));
        worst = std::max(worst, std::abs(skew.mu(t, 0.0) / std::pow(mass(skew), 2) / (skew.rho() / skew.gamma()) - 1.0));
    }
    ok = ok && worst <= 1e-6;
    return {ok, detail + "identities max rel " + fmt(worst) + " (<= 1e-6)"};
}

// 4 ---------------------------------------------------------------------------
Outcome decay() {
    std::string detail;
    bool ok = true;
    for (const char* name : {"decay.json", "decay_rheological.json"}) {
        const DecayBundle b = run_decay(config(name));
        double min_r2 = 1.0;
        std::string omegas;
        for (const auto& m : b.members) {
            min_r2 = std::min(min_r2, m.fit.r_squared);
            omegas += fmt(m.fit.omega) + " ";
        }
        ok = ok && !b.forced && b.pass() && min_r2 > 0.99 && b.spread <= 0.2;
        detail += std::string(name) + ": omega " + omegas + "spread " + fmt(b.spread) + " min R2 " + fmt(min_r2) + "; ";
    }
    return {ok, detail};
}

// 5 ---------------------------------------------------------------------------
Outcome absorbing() {
    std::string detail;
    bool ok = true;
    const ExperimentConfig resc = config("decay_forced.json");
    const ExperimentConfig rheo = with(resc, {{"kernel", {{"family", "rheological"}, {"c", nullptr}, {"increasing", nullptr}, {"rho", 1.0}, {"gamma", 1.0}, {"alpha", 0.5}}}});
    for (const ExperimentConfig* c : {&resc, &rheo}) {
        const DecayBundle b = run_decay(*c);
        std::string entries;
        bool finite = true;
        for (const auto& m : b.members) {
            entries += fmt(m.absorbing.entry_time) + " ";
            finite = finite && m.absorbing.entered && std::isfinite(m.absorbing.entry_time);
        }
        ok = ok && b.forced && b.pass() && finite && b.spread <= 0.2;
        detail += c->kernel.at("family").get<std::string>() + ": R0 spread " + fmt(b.spread) + ", entries " + entries + "; ";
    }
    return {ok, detail};
}

// 6 ---------------------------------------------------------------------------
Outcome inequality_suite() {
    std::string detail;
    bool ok = true;
    for (const auto* pair : {&refs().rescaled, &refs().rheological}) {
        const SimulateResult& r = *pair;
        std::size_t fails = 0, refined_pass = 0;
        bool constants_ok = true;
        for (const auto& rep : r.suite.reports) {
            if (rep.verdict == "fail") ++fails;
            if (rep.verdict == "pass_within_tolerance") ++refined_pass;
            if (rep.verdict != "pass" && !rep.refined) ++fails;
            if (rep.id == "psi" || rep.id == "psi_tailored") {
                for (const char* name : {"M", "C", "c"}) {
                    const auto it = rep.constants.find(name);
                    if (it == rep.constants.end()) continue;
                    const auto fine = rep.constants.find(std::string(name) + "_refined");
                    const double a = std::abs(it->second);
                    const double b = fine == rep.constants.end() ? NAN : std::abs(fine->second);
                    const double hi = std::max(a, b), lo = std::min(a, b);
                    if (!std::isfinite(a) || !std::isfinite(b)) constants_ok = false;
                    if (hi > 1e-9 * std::max(1.0, hi) && 2.0 * lo < hi) constants_ok = false;
                }
            }
        }
        ok = ok && fails == 0 && constants_ok && r.fine.has_value();
        detail += std::to_string(r.suite.reports.size()) + " reports, " + std::to_string(fails) + " fail, " +
                  std::to_string(refined_pass) + " within tolerance, (M,C) " + (constants_ok ? "stable" : "UNSTABLE") +
                  "; ";
    }
    return {ok, detail};
}

// 7 ---------------------------------------------------------------------------
Outcome gronwall() {
    std::mt19937_64 rng(20240601);
    std::size_t violations = 0, hyp_fail = 0;
    double worst_ratio = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        const double eps = 0.05 + 0.45 * std::uniform_real_distribution<double>(0, 1)(rng);
        const std::size_t n = 1001;
        std::vector<double> q1, q2;
        oracle::random_coefficients(rng, n, 25 + rep % 50, eps, 3.0, q1, q2);
        const double L0 = std::pow(10.0, std::uniform_real_distribution<double>(-1, 3)(rng));
        const auto s = oracle::synthesize(eps, 0.01, n, L0, q1, q2);
        GronwallInstance g;
        g.dt = s.dt;
        g.eps = eps;
        g.Lambda = s.Lambda;
        g.q1 = q1;
        g.q2 = q2;
        g.c1 = minimal_c1(q1, g.dt, eps);
        g.c2 = window_mass(q2, g.dt);
        const auto hyp = verify_hypothesis(g);
        if (!hyp.holds()) {
            ++hyp_fail;
            continue;
        }
        const auto con = check_conclusion(g, hyp);
        violations += con.violations;
        worst_ratio = std::max(worst_ratio, con.max_ratio);
    }

    GronwallInstance trivial;
    trivial.dt = 0.01;
    trivial.eps = 0.1;
    for (int i = 0; i <= 2000; ++i) {
        trivial.Lambda.push_back(2.0 * std::exp(-0.2 * 0.01 * i));
        trivial.q1.push_back(0.0);
        trivial.q2.push_back(0.0);
    }
    const auto th = verify_hypothesis(trivial);
    const auto tc = check_conclusion(trivial, th);
    const double trivial_ratio = tc.max_ratio;

    const GronwallInstance pipe = gronwall_from_run(refs().rheological.coarse, refs().rheological.suite);
    const auto ph = verify_hypothesis(pipe);
    const auto pc = check_conclusion(pipe, ph);

    return {hyp_fail == 0 && violations == 0 && th.holds() && trivial_ratio <= 1.0 + 1e-12 && ph.holds() && pc.holds(),
            "100 synthesized: " + std::to_string(hyp_fail) + " hypothesis failures, " + std::to_string(violations) +
                " violations, max ratio " + fmt(worst_ratio) + "; trivial ratio " + fmt(trivial_ratio) +
                "; pipeline (eps " + fmt(pipe.eps) + ", Q " + fmt(refs().rheological.suite.lemma_q) + ") ratio " +
                fmt(pc.max_ratio)};
}

// 8 ---------------------------------------------------------------------------
Outcome pullback() {
    const AttractorExperiment r = run_attractor(config("attractor.json"));
    std::string cons;
    for (double d : r.pullback.consecutive) cons += fmt(d) + " ";
    return {r.pass(),
            "consecutive " + cons + (r.pullback.monotone ? "(monotone)" : "(NOT monotone)") + "; invariance " +
                fmt(r.invariance.error) + " vs 2 x resolution " + fmt(2 * std::max(r.invariance.resolution, r.invariance.floor)) +
                "; sup strong norm^2 " + fmt(r.pullback.sup_strong_sq)};
}

// 9 ---------------------------------------------------------------------------
Outcome kelvin_voigt() {
    const ExperimentConfig forced = config("kv_compare.json");
    const ExperimentConfig unforced = with(forced, {{"forcing", {{"type", "zero"}, {"coefficients", nlohmann::json::array()}}}});
    const KvCompare a = run_kv_compare(forced);
    const KvCompare b = run_kv_compare(unforced);
    if (a.refused || b.refused) return {false, "comparison refused: " + a.reason + b.reason};
    std::string da, db;
    bool small = true;
    for (const auto& row : a.rows) da += fmt(row.dist_energy) + " ";
    for (const auto& row : b.rows) {
        db += fmt(row.dist_energy) + " ";
        small = small && row.dist_energy < 1e-4;
    }
    return {a.nonincreasing && small, "m=" + fmt(a.m) + "; g!=0: " + da + (a.nonincreasing ? "(nonincreasing)" : "(INCREASING)") +
                                          "; g=0: " + db + "(< 1e-4)"};
}

// 10 --------------------------------------------------------------------------
std::string serialize(const ReferenceRun& r, double eps) {
    std::ostringstream os;
    write_energy_csv(os, r.series, eps, 1, &r.traj);
    return os.str();
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome determinism() {
    const ExperimentConfig c = config("simulate_rheological_forced.json");
    const ReferenceRun a = reference_run(c, c.run.dt, c.grid.J);
    const ReferenceRun b = reference_run(c, c.run.dt, c.grid.J);
    const bool same_run = serialize(a, 0.1) == serialize(b, 0.1);

    // Same outputs from two processes.
    bool same_files = true;
    const fs::path base = fs::temp_directory_path() / "viscomem_acceptance";
    fs::remove_all(base);
    for (const char* d : {"a", "b"}) {
        const std::string cmd = std::string(VISCOMEM_CLI_PATH) + " simulate --config " + VISCOMEM_CONFIG_DIR +
                                "/simulate_rheological_forced.json --out " + (base / d).string() + " > /dev/null 2>&1";
        const int st = std::system(cmd.c_str());
        same_files = same_files && WIFEXITED(st) && WEXITSTATUS(st) == 0;
    }
    for (const char* f : {"trajectory.csv", "energy.csv", "inequalities.csv", "report.json", "effective_config.json"}) {
        same_files = same_files && fs::exists(base / "a" / f) && slurp(base / "a" / f) == slurp(base / "b" / f);
    }

    // Threaded ensembles match serial ones bit for bit.
    const ExperimentConfig e = with(config("attractor.json"), {{"attractor", {{"members", 8}}}});
    const Model em = make_model(e, -2.0, 0.0);
    const auto ens = random_ball(8, 10.0, em.basis(), e.seed);
    const PointCloud s1 = project(evolve_ensemble(em, ens, -2.0, 0.0, 1), 0.0);
    const PointCloud s4 = project(evolve_ensemble(em, ens, -2.0, 0.0, 4), 0.0);
    const bool same_threads = s1.u == s4.u && s1.v == s4.v;

    // U(t, sigma) U(sigma, tau) = U(t, tau) on the step grid.
    const Model m = make_model(c, c.run.tau, c.run.T);
    const InitialDatum z = make_initial(c, m.basis(), c.initial.R);
    SimState one = initial_state(m, c.run.tau, z.u, z.v);
    simulate(one, m, c.run.T);
    SimState two = initial_state(m, c.run.tau, z.u, z.v);
    simulate(two, m, 3.715);
    simulate(two, m, c.run.T);
    const bool composed = one.u == two.u && one.v == two.v && one.eta == two.eta;

    return {same_run && same_files && same_threads && composed,
            std::string("in-process ") + (same_run ? "identical" : "DIFFERENT") + ", CLI files " +
                (same_files ? "byte-identical" : "DIFFERENT") + ", threads " + (same_threads ? "identical" : "DIFFERENT") +
                ", two-leg composition " + (composed ? "exact" : "INEXACT")};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"form equivalence", form_equivalence},
        {"eta cross-validation", eta_cross_validation},
        {"kernel certification", kernel_certification},
        {"energy decay", decay},
        {"absorbing set", absorbing},
        {"inequality suite", inequality_suite},
        {"Gronwall lemma", gronwall},
        {"pullback attraction", pullback},
        {"Kelvin-Voigt limit", kelvin_voigt},
        {"determinism and composition", determinism},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (!o.pass) ++failed;
        std::cout << (o.pass ? "PASS" : "FAIL") << " [" << (i + 1) << "] " << criteria[i].first << " ("
                  << fmt(secs) << " s): " << o.detail << std::endl;
    }
    std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria pass" << std::endl;
    return failed == 0 ? 0 : 1;
}
