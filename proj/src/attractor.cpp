#include "viscomem/attractor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "viscomem/csv.hpp"
#include "viscomem/parallel.hpp"

namespace viscomem {

InitialDatum random_shape(const SpectralBasis& basis, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::size_t n = basis.n_modes();
    InitialDatum d{ModalField(n), ModalField(n)};
    for (std::size_t k = 0; k < n; ++k) {
        const double kk = static_cast<double>(k + 1);
        d.u[k] = normal(rng) / (kk * kk * kk);
        d.v[k] = normal(rng) / (kk * kk);
    }
    return d;
}

InitialDatum scale_to_energy(const InitialDatum& d, double R, const SpectralBasis& basis) {
    const double e = 0.5 * (sigma_norm_sq(d.u, basis, 1.0) + sigma_norm_sq(d.v, basis, 0.0));
    InitialDatum out = d;
    if (R <= 0.0 || e == 0.0) {
        out.u *= 0.0;
        out.v *= 0.0;
        return out;
    }
    const double a = std::sqrt(R / e);
    out.u *= a;
    out.v *= a;
    return out;
}

std::vector<InitialDatum> random_ball(std::size_t n, double R, const SpectralBasis& basis,
                                      std::uint64_t seed, bool on_sphere) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<InitialDatum> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const InitialDatum shape = random_shape(basis, rng);
        const double rho = on_sphere ? 1.0 : 1.0 - unit(rng);  // (0, 1]
        out.push_back(scale_to_energy(shape, R * rho * rho, basis));
    }
    return out;
}

std::string to_string(CloudNorm n) { return n == CloudNorm::energy ? "H1xH0" : "H2xH1"; }

double point_distance(const ModalField& u1, const ModalField& v1, const ModalField& u2,
                      const ModalField& v2, const SpectralBasis& basis, CloudNorm norm) {
    const double su = norm == CloudNorm::energy ? 1.0 : 2.0;
    const double sv = su - 1.0;
    double acc = 0.0;
    for (std::size_t k = 0; k < basis.n_modes(); ++k) {
        const double lam = basis.eigenvalue(k);
        const double du = u1[k] - u2[k], dv = v1[k] - v2[k];
        acc += std::pow(lam, su) * du * du + std::pow(lam, sv) * dv * dv;
    }
    return std::sqrt(acc);
}

double hausdorff_semidist(const PointCloud& B, const PointCloud& C, const SpectralBasis& basis) {
    if (B.empty() || C.empty()) throw std::invalid_argument("hausdorff_semidist: empty cloud");
    if (B.norm != C.norm) throw std::invalid_argument("hausdorff_semidist: clouds carry different norm tags");
    double sup = 0.0;
    for (std::size_t i = 0; i < B.size(); ++i) {
        double inf = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < C.size(); ++j) {
            inf = std::min(inf, point_distance(B.u[i], B.v[i], C.u[j], C.v[j], basis, B.norm));
        }
        sup = std::max(sup, inf);
    }
    return sup;
}

double hausdorff_distance(const PointCloud& B, const PointCloud& C, const SpectralBasis& basis) {
    return std::max(hausdorff_semidist(B, C, basis), hausdorff_semidist(C, B, basis));
}

PointCloud retag(PointCloud c, CloudNorm norm) {
    c.norm = norm;
    return c;
}

double cloud_diameter(const PointCloud& c, const SpectralBasis& basis) {
    double d = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        for (std::size_t j = i + 1; j < c.size(); ++j) {
            d = std::max(d, point_distance(c.u[i], c.v[i], c.u[j], c.v[j], basis, c.norm));
        }
    }
    return d;
}

double cloud_radius(const PointCloud& c, const SpectralBasis& basis) {
    const ModalField z = basis.zero();
    double r = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) r = std::max(r, point_distance(c.u[i], c.v[i], z, z, basis, c.norm));
    return r;
}

std::size_t EnsembleRun::n_failed() const {
    return static_cast<std::size_t>(std::count(failed.begin(), failed.end(), true));
}

namespace {

double strong_sq(const SimState& s, const Model& m, std::span<const double> weights) {
    return sigma_norm_sq(s.u, m.basis(), 2.0) + sigma_norm_sq(s.v, m.basis(), 1.0) +
           m_norm_sq(s.eta, weights, m.basis(), 1.0);
}

}  // namespace

EnsembleRun evolve_states(const Model& model, std::vector<SimState> states, double t,
                          std::size_t threads, std::size_t probe_stride) {
    EnsembleRun run;
    const std::size_t n = states.size();
    run.states = std::move(states);
    run.failed.assign(n, false);
    run.errors.assign(n, "");
    std::vector<double> sup(n, 0.0);
    parallel_for(n, threads, [&](std::size_t i) {
        SimState& s = run.states[i];
        StepObserver obs;
        if (probe_stride > 0) {
            obs = [&, i](const StepEvent& ev) {
                if (ev.after.steps % probe_stride == 0) {
                    sup[i] = std::max(sup[i], strong_sq(ev.after, model, ev.weights_after));
                }
            };
            sup[i] = strong_sq(s, model, model.grid().kernel_weights(model.kernel(), s.t));
        }
        try {
            simulate(s, model, t, obs);
        } catch (const NumericError& e) {
            run.failed[i] = true;
            run.errors[i] = e.what();
        }
    });
    for (std::size_t i = 0; i < n; ++i) {
        if (!run.failed[i]) run.sup_strong_sq = std::max(run.sup_strong_sq, sup[i]);
    }
    return run;
}

EnsembleRun evolve_ensemble(const Model& model, const std::vector<InitialDatum>& ensemble,
                            double tau, double t, std::size_t threads, std::size_t probe_stride) {
    std::vector<SimState> states;
    states.reserve(ensemble.size());
    for (const auto& d : ensemble) states.push_back(initial_state(model, tau, d.u, d.v));
    return evolve_states(model, std::move(states), t, threads, probe_stride);
}

PointCloud project(const EnsembleRun& run, double t, CloudNorm norm) {
    PointCloud c;
    c.t = t;
    c.norm = norm;
    for (std::size_t i = 0; i < run.states.size(); ++i) {
        if (run.failed[i]) continue;
        c.u.push_back(run.states[i].u);
        c.v.push_back(run.states[i].v);
    }
    return c;
}

double noise_floor(double scale) { return 1e-12 * std::max(1.0, scale); }

PullbackResult pullback_section(const Model& model, double t, const std::vector<double>& taus,
                                const std::vector<InitialDatum>& ensemble, std::size_t threads,
                                std::size_t probe_stride) {
    if (ensemble.empty()) throw std::invalid_argument("pullback_section: empty ensemble");
    if (taus.empty()) throw std::invalid_argument("pullback_section: empty tau list");
    for (std::size_t n = 0; n < taus.size(); ++n) {
        if (!(taus[n] < t)) throw std::invalid_argument("pullback_section: every tau must lie below t");
        if (n > 0 && !(taus[n] < taus[n - 1])) {
            throw std::invalid_argument("pullback_section: tau list must be strictly decreasing");
        }
    }
    PullbackResult r;
    r.t = t;
    r.taus = taus;
    double scale = 0.0;
    for (double tau : taus) {
        const EnsembleRun run = evolve_ensemble(model, ensemble, tau, t, threads, probe_stride);
        r.clouds.push_back(project(run, t));
        r.failed.push_back(run.n_failed());
        r.sup_strong_sq = std::max(r.sup_strong_sq, run.sup_strong_sq);
        if (r.clouds.back().empty()) {
            throw NumericError("pullback_section: every member failed for tau=" + std::to_string(tau));
        }
        r.radius.push_back(cloud_radius(r.clouds.back(), model.basis()));
        scale = std::max(scale, r.radius.back());
    }
    for (std::size_t n = 0; n + 1 < r.clouds.size(); ++n) {
        r.consecutive.push_back(hausdorff_semidist(r.clouds[n + 1], r.clouds[n], model.basis()));
    }
    r.floor = noise_floor(scale);
    r.monotone = true;
    for (std::size_t n = 0; n + 1 < r.consecutive.size(); ++n) {
        if (r.consecutive[n] > r.floor && r.consecutive[n + 1] > r.consecutive[n]) r.monotone = false;
        if (r.consecutive[n] <= r.floor && r.consecutive[n + 1] > r.floor) r.monotone = false;
    }
    return r;
}

InvarianceProbe invariance_probe(const Model& model, double tau, double t, double length,
                                 const std::vector<InitialDatum>& ensemble, std::size_t threads) {
    if (!(tau < t) || !(length > 0.0)) throw std::invalid_argument("invariance_probe: need tau < t and length > 0");
    const auto& basis = model.basis();
    InvarianceProbe p;
    p.tau = tau;
    p.t = t;
    p.length = length;
    EnsembleRun at_tau = evolve_ensemble(model, ensemble, tau - length, tau, threads);
    const EnsembleRun forward = evolve_states(model, std::move(at_tau.states), t, threads);
    const PointCloud image = project(forward, t);
    const PointCloud direct = project(evolve_ensemble(model, ensemble, t - length, t, threads), t);
    const PointCloud coarse = project(evolve_ensemble(model, ensemble, t - 0.5 * length, t, threads), t);
    if (image.empty() || direct.empty() || coarse.empty()) {
        throw NumericError("invariance_probe: every member failed");
    }
    p.error = hausdorff_distance(image, direct, basis);
    p.resolution = hausdorff_distance(coarse, direct, basis);
    p.floor = noise_floor(std::max(cloud_radius(direct, basis), cloud_radius(coarse, basis)));
    p.ok = p.error <= 2.0 * std::max(p.resolution, p.floor);
    return p;
}

KvEstimate kv_attractor_estimate(const SpectralBasis& basis, const Nonlinearity& f,
                                 const ModalField& g, double m,
                                 const std::vector<InitialDatum>& ensemble, double burn_in,
                                 double dt, std::size_t threads, std::size_t n_samples) {
    if (!(m > 0.0)) throw std::invalid_argument("kv_attractor_estimate: m must be positive");
    if (ensemble.empty()) throw std::invalid_argument("kv_attractor_estimate: empty ensemble");
    const auto n_steps = static_cast<std::uint64_t>(std::llround(burn_in / dt));
    if (n_steps == 0 || std::abs(static_cast<double>(n_steps) * dt - burn_in) > 1e-9 * std::max(1.0, burn_in)) {
        throw std::invalid_argument("kv_attractor_estimate: burn_in must be a positive multiple of dt");
    }
    n_samples = std::max<std::size_t>(2, n_samples);
    const std::size_t n = ensemble.size();
    std::vector<std::vector<KelvinVoigtState>> samples(n, std::vector<KelvinVoigtState>(n_samples + 1));
    std::vector<bool> failed(n, false);
    parallel_for(n, threads, [&](std::size_t i) {
        KelvinVoigtState s{0.0, 0, 0.0, ensemble[i].u, ensemble[i].v};
        samples[i][0] = s;
        std::size_t next = 1;
        for (std::uint64_t k = 1; k <= n_steps; ++k) {
            kelvin_voigt_step(s, basis, f, g, m, dt);
            if (!s.u.all_finite() || !s.v.all_finite()) {
                failed[i] = true;
                break;
            }
            while (next <= n_samples && k * n_samples >= next * n_steps) samples[i][next++] = s;
        }
    });
    KvEstimate est;
    for (std::size_t q = 0; q <= n_samples; ++q) {
        PointCloud c;
        c.t = burn_in * static_cast<double>(q) / static_cast<double>(n_samples);
        for (std::size_t i = 0; i < n; ++i) {
            if (failed[i]) continue;
            c.u.push_back(samples[i][q].u);
            c.v.push_back(samples[i][q].v);
        }
        est.t.push_back(c.t);
        est.diameter.push_back(c.empty() ? 0.0 : cloud_diameter(c, basis));
        if (q == n_samples) est.cloud = std::move(c);
    }
    if (est.cloud.empty()) throw NumericError("kv_attractor_estimate: every member failed");
    const double half = est.diameter[n_samples / 2];
    const double floor = noise_floor(cloud_radius(est.cloud, basis));
    est.contracting = est.diameter.back() <= std::max(half, floor);
    if (!est.contracting) est.warning = "diameter did not contract over the burn-in; lengthen burn_in";
    return est;
}

KvCompare kv_limit_compare(const KernelPtr& kernel, const SpectralBasis& basis,
                           const SolverConfig& cfg, const std::vector<InitialDatum>& ensemble,
                           const KvCompareConfig& kc, std::size_t threads) {
    KvCompare out;
    const DeltaConvergence cert = certify_delta_convergence(*kernel, kc.certification_times);
    out.certificate = cert.to_json();
    if (!cert.certified) {
        out.refused = true;
        out.reason = "kernel " + kernel->name() + " has no certified limit k_t -> m delta_0";
        return out;
    }
    out.m = cert.mass;
    if (kc.windows.size() < 3) throw ConfigError("kv_limit_compare: need at least three windows");
    const KvEstimate kv = kv_attractor_estimate(basis, cfg.f, cfg.g.size() ? cfg.g : basis.zero(), out.m,
                                                ensemble, kc.burn_in, cfg.dt, threads);
    out.kv_diameter = kv.diameter.back();
    out.kv_contracting = kv.contracting;
    const PointCloud kv_energy = kv.cloud;
    const PointCloud kv_strong = retag(kv.cloud, CloudNorm::strong);
    double scale = cloud_radius(kv_energy, basis);
    for (double T : kc.windows) {
        const double tau = T - kc.pullback_length;
        const SGrid grid = SGrid::for_kernel(*kernel, tau, T, kc.J);
        const Model model(basis, kernel, grid, cfg);
        model.validate(tau, T);
        const EnsembleRun run = evolve_ensemble(model, ensemble, tau, T, threads);
        const PointCloud cloud = project(run, T);
        if (cloud.empty()) throw NumericError("kv_limit_compare: every member failed at T=" + std::to_string(T));
        KvCompareRow row;
        row.T = T;
        row.dist_energy = hausdorff_semidist(cloud, kv_energy, basis);
        row.dist_strong = hausdorff_semidist(retag(cloud, CloudNorm::strong), kv_strong, basis);
        row.memory_radius = cloud_radius(cloud, basis);
        row.failed = run.n_failed();
        scale = std::max(scale, row.memory_radius);
        out.rows.push_back(row);
    }
    out.floor = noise_floor(scale);
    out.nonincreasing = true;
    for (std::size_t n = 0; n + 1 < out.rows.size(); ++n) {
        if (out.rows[n + 1].dist_energy > std::max(out.rows[n].dist_energy, out.floor)) out.nonincreasing = false;
    }
    return out;
}

nlohmann::json to_json(const PullbackResult& r) {
    nlohmann::json clouds = nlohmann::json::array();
    for (std::size_t n = 0; n < r.taus.size(); ++n) {
        clouds.push_back({{"tau", r.taus[n]}, {"members", r.clouds[n].size()}, {"failed", r.failed[n]},
                          {"radius", r.radius[n]}});
    }
    return {{"t", r.t},
            {"clouds", clouds},
            {"consecutive_semidistance", r.consecutive},
            {"floor", r.floor},
            {"monotone", r.monotone},
            {"sup_strong_norm", std::sqrt(r.sup_strong_sq)}};
}

nlohmann::json to_json(const InvarianceProbe& r) {
    return {{"tau", r.tau},         {"t", r.t},         {"length", r.length}, {"error", r.error},
            {"resolution", r.resolution}, {"floor", r.floor}, {"ok", r.ok}};
}

nlohmann::json to_json(const KvCompare& r) {
    nlohmann::json j{{"refused", r.refused}, {"certificate", r.certificate}};
    if (r.refused) {
        j["reason"] = r.reason;
        return j;
    }
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : r.rows) {
        rows.push_back({{"T", row.T},
                        {"dist_H1xH0", row.dist_energy},
                        {"dist_H2xH1", row.dist_strong},
                        {"memory_radius", row.memory_radius},
                        {"failed", row.failed}});
    }
    j["m"] = r.m;
    j["rows"] = rows;
    j["kv_diameter"] = r.kv_diameter;
    j["kv_contracting"] = r.kv_contracting;
    j["floor"] = r.floor;
    j["nonincreasing"] = r.nonincreasing;
    return j;
}

void write_cloud_csv(std::ostream& os, const PointCloud& c) {
    CsvWriter w(os);
    const std::size_t n = c.empty() ? 0 : c.u.front().size();
    std::vector<std::string> header{"member", "t"};
    for (std::size_t k = 0; k < n; ++k) header.push_back("u_" + std::to_string(k + 1));
    for (std::size_t k = 0; k < n; ++k) header.push_back("v_" + std::to_string(k + 1));
    w.row(header);
    for (std::size_t i = 0; i < c.size(); ++i) {
        std::vector<double> row{static_cast<double>(i), c.t};
        for (std::size_t k = 0; k < n; ++k) row.push_back(c.u[i][k]);
        for (std::size_t k = 0; k < n; ++k) row.push_back(c.v[i][k]);
        w.row_numbers(row);
    }
}

}  // namespace viscomem
