#include "viscomem/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "viscomem/parallel.hpp"

namespace viscomem {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Output stride in steps for a run at dt that keeps the configured output times.
std::size_t scaled_stride(const ExperimentConfig& c, double dt) {
    const double ratio = c.run.dt / dt;
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(c.run.output_stride * ratio)));
}

double relative_spread(const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
    if (*hi == 0.0) return 0.0;
    if (!(*lo > 0.0)) return std::numeric_limits<double>::infinity();
    return (*hi - *lo) / *lo;
}

}  // namespace

ReferenceRun reference_run(const ExperimentConfig& c, double dt, std::size_t J) {
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentConfig cc = c;
    cc.run.output_stride = scaled_stride(c, dt);
    const Model model = make_model(cc, c.run.tau, c.run.T, dt, J);
    const InitialDatum z = make_initial(c, model.basis(), c.initial.R);
    ReferenceRun r;
    r.dt = dt;
    r.J = J;
    EnergyRecorder rec(model);
    SimState s = initial_state(model, c.run.tau, z.u, z.v);
    rec.record(s);
    r.traj = simulate(s, model, c.run.T, rec.observer());
    r.series = EnergySeries(rec.snapshots(), rec.constants());
    for (const auto& snap : r.series.snapshots()) r.sup_E = std::max(r.sup_E, snap.E);
    if (s.buffer.size() >= 3) r.form = convolution_form_residual(s, model);
    r.wall_seconds = seconds_since(t0);
    return r;
}

SimulateResult run_simulate(const ExperimentConfig& c) {
    SimulateResult out;
    out.coarse = reference_run(c, c.run.dt, c.grid.J);
    out.suite = run_inequality_suite(out.coarse.series, c.energy.window);
    out.form_bound = 5.0 * (c.run.dt + 1.0 / static_cast<double>(c.grid.J));
    if (c.energy.refine) {
        out.fine = reference_run(c, 0.5 * c.run.dt, 2 * c.grid.J);
        const InequalitySuite fine = run_inequality_suite(out.fine->series, c.energy.window);
        refine_suite(out.suite, fine);
    }
    return out;
}

nlohmann::json to_json(const SimulateResult& r) {
    nlohmann::json reports = nlohmann::json::array();
    for (const auto& rep : r.suite.reports) reports.push_back(to_json(rep));
    nlohmann::json j{{"all_pass", r.all_pass()},
                     {"eps", r.suite.eps},
                     {"Q", r.suite.lemma_q},
                     {"sup_E", r.coarse.sup_E},
                     {"steps", r.coarse.series.size() - 1},
                     {"max_eta_cross_check", r.coarse.traj.max_cross_check()},
                     {"refined", r.fine.has_value()},
                     {"reports", reports}};
    if (r.coarse.form) {
        j["form_residual"] = {{"t", r.coarse.form->t},
                              {"rel_direct", r.coarse.form->rel_direct},
                              {"rel_convolution", r.coarse.form->rel_convolution},
                              {"rel_cross", r.coarse.form->rel_cross},
                              {"bound", r.form_bound},
                              {"ok", r.coarse.form->rel_cross < r.form_bound}};
    }
    return j;
}

bool DecayBundle::pass() const {
    if (members.empty()) return false;
    if (!forced) return fits_ok && spread <= spread_limit;
    const bool entered = std::all_of(members.begin(), members.end(),
                                     [](const DecayMember& m) { return m.absorbing.entered; });
    return entered && entries_increasing && spread <= spread_limit;
}

DecayBundle run_decay(const ExperimentConfig& c) {
    DecayBundle b;
    const SpectralBasis basis = make_basis(c);
    const ModalField g = make_forcing(c, basis);
    b.forced = sigma_norm_sq(g, basis, 0.0) > 0.0;
    b.spread_limit = b.forced ? c.decay.R0_spread : c.decay.omega_spread;
    const double t_end = c.run.tau + c.decay.T;
    const Model model = make_model(c, c.run.tau, t_end);
    const std::size_t stride = c.run.output_stride;
    const InitialDatum shape = make_initial(c, basis, 1.0);

    b.members.resize(c.decay.radii.size());
    parallel_for(b.members.size(), c.threads, [&](std::size_t i) {
        DecayMember& m = b.members[i];
        m.R = c.decay.radii[i];
        const InitialDatum z = scale_to_energy(shape, m.R, basis);
        SimState s = initial_state(model, c.run.tau, z.u, z.v);
        m.t.push_back(s.t);
        m.E.push_back(0.5 * state_norm_sq(s, model));
        simulate(s, model, t_end, [&](const StepEvent& ev) {
            const bool last = std::abs(ev.after.t - t_end) < 0.5 * model.dt();
            if (ev.after.steps % stride != 0 && !last) return;
            const SimState& a = ev.after;
            m.t.push_back(a.t);
            m.E.push_back(0.5 * (sigma_norm_sq(a.u, basis, 1.0) + sigma_norm_sq(a.v, basis, 0.0) +
                                 m_norm_sq(a.eta, ev.weights_after, basis, 0.0)));
        });
        m.fit = fit_decay(m.t, m.E, c.decay.lo_rel, c.decay.hi_rel);
        m.absorbing = fit_absorbing(m.t, m.E);
        m.entry_radius = std::sqrt(2.0 * (m.absorbing.R0 + 1.0));
    });

    std::vector<std::size_t> order(b.members.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return b.members[x].R < b.members[y].R; });

    std::vector<double> values;
    if (b.forced) {
        for (const auto& m : b.members) values.push_back(m.absorbing.R0);
        b.entries_increasing = order.size() >= 2;
        for (std::size_t n = 0; n + 1 < order.size(); ++n) {
            if (b.members[order[n + 1]].absorbing.entry_time < b.members[order[n]].absorbing.entry_time) {
                b.entries_increasing = false;
            }
        }
        if (order.size() >= 2 &&
            !(b.members[order.back()].absorbing.entry_time > b.members[order.front()].absorbing.entry_time)) {
            b.entries_increasing = false;
        }
    } else {
        b.fits_ok = true;
        for (const auto& m : b.members) {
            if (m.fit.trivial) continue;
            values.push_back(m.fit.omega);
            if (!(m.fit.ok && m.fit.omega > 0.0 && m.fit.r_squared > 0.99)) b.fits_ok = false;
        }
    }
    b.spread = relative_spread(values);
    return b;
}

nlohmann::json to_json(const DecayBundle& b) {
    nlohmann::json members = nlohmann::json::array();
    for (const auto& m : b.members) {
        members.push_back({{"R", m.R},
                           {"E0", m.E.empty() ? 0.0 : m.E.front()},
                           {"omega", m.fit.omega},
                           {"r_squared", m.fit.r_squared},
                           {"fit_window", {m.fit.t_lo, m.fit.t_hi}},
                           {"fit_points", m.fit.n_points},
                           {"fit_ok", m.fit.ok},
                           {"trivial", m.fit.trivial},
                           {"diagnostic", m.fit.diagnostic},
                           {"R0", m.absorbing.R0},
                           {"R0_over_E0", m.E.empty() || m.E.front() == 0.0 ? 0.0 : m.absorbing.R0 / m.E.front()},
                           {"sup_E", m.absorbing.sup_E},
                           {"entered", m.absorbing.entered},
                           {"entry_time", m.absorbing.entry_time},
                           {"entry_radius", m.entry_radius}});
    }
    return {{"forced", b.forced},
            {"members", members},
            {"spread_of", b.forced ? "R0" : "omega"},
            {"spread", b.spread},
            {"spread_limit", b.spread_limit},
            {"fits_ok", b.fits_ok},
            {"entries_increasing", b.entries_increasing},
            {"pass", b.pass()}};
}

AttractorExperiment run_attractor(const ExperimentConfig& c) {
    const auto& a = c.attractor;
    const SpectralBasis basis = make_basis(c);
    const double length = a.offsets.back();
    const double lo = std::min(a.t - a.offsets.back(), a.t - a.invariance_offset - length);
    const Model model = make_model(c, lo, a.t);
    const auto ensemble = random_ball(a.members, a.R, basis, c.seed);
    std::vector<double> taus;
    for (double off : a.offsets) taus.push_back(a.t - off);
    AttractorExperiment r;
    r.pullback = pullback_section(model, a.t, taus, ensemble, c.threads, a.probe_stride);
    r.invariance = invariance_probe(model, a.t - a.invariance_offset, a.t, length, ensemble, c.threads);
    r.bounded = std::isfinite(r.pullback.sup_strong_sq);
    return r;
}

nlohmann::json to_json(const AttractorExperiment& r) {
    return {{"pullback", to_json(r.pullback)},
            {"invariance", to_json(r.invariance)},
            {"bounded", r.bounded},
            {"pass", r.pass()}};
}

KvCompare run_kv_compare(const ExperimentConfig& c) {
    const SpectralBasis basis = make_basis(c);
    const KernelPtr kernel = make_kernel(c.kernel);
    KvCompareConfig kc;
    kc.windows = c.kv.windows;
    kc.pullback_length = c.kv.pullback_length;
    kc.burn_in = c.kv.burn_in;
    kc.J = c.grid.J;
    const auto ensemble = random_ball(c.attractor.members, c.attractor.R, basis, c.seed);
    return kv_limit_compare(kernel, basis, make_solver_config(c, basis), ensemble, kc, c.threads);
}

GronwallInstance gronwall_from_run(const ReferenceRun& run, const InequalitySuite& suite,
                                   std::size_t max_samples) {
    const std::size_t n = run.series.size();
    if (n < 2) throw std::invalid_argument("gronwall_from_run: run has fewer than two snapshots");
    const std::size_t stride = std::max<std::size_t>(1, (n + max_samples - 1) / std::max<std::size_t>(1, max_samples));
    GronwallInstance inst;
    inst.tau = run.series.t(0);
    inst.dt = static_cast<double>(stride) * run.dt;
    inst.eps = suite.eps;
    const double q2 = suite.eps * suite.lemma_q;
    for (std::size_t i = 0; i < n; i += stride) {
        inst.Lambda.push_back(lambda_functional(run.series, i, suite.eps));
        inst.q1.push_back(0.0);
        inst.q2.push_back(q2);
    }
    inst.c1 = 0.0;
    inst.c2 = q2;
    return inst;
}

GronwallExperiment run_gronwall(const ExperimentConfig& c) {
    GronwallExperiment r;
    if (!c.gronwall.instance_csv.empty()) {
        try {
            r.instance = load_instance(c.gronwall.instance_csv, c.gronwall.instance_json);
        } catch (const std::exception& e) {
            throw ConfigError(std::string("gronwall instance: ") + e.what());
        }
        r.source = "file";
    } else {
        const ReferenceRun run = reference_run(c, c.run.dt, c.grid.J);
        const InequalitySuite suite = run_inequality_suite(run.series, c.energy.window);
        r.instance = gronwall_from_run(run, suite);
        r.source = "run";
    }
    r.hypothesis = verify_hypothesis(r.instance);
    r.conclusion = check_conclusion(r.instance, r.hypothesis);
    return r;
}

nlohmann::json to_json(const GronwallExperiment& r) {
    return {{"source", r.source},
            {"samples", r.instance.size()},
            {"tau", r.instance.tau},
            {"dt", r.instance.dt},
            {"eps", r.instance.eps},
            {"c1", r.instance.c1},
            {"c2", r.instance.c2},
            {"hypothesis", to_json(r.hypothesis)},
            {"conclusion", to_json(r.conclusion)},
            {"pass", r.pass()}};
}

}  // namespace viscomem
