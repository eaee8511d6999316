#include "viscomem/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "viscomem/quadrature.hpp"

namespace viscomem {

namespace {

constexpr double kTiny = 1e-290;

double safe_json(double x) { return std::isfinite(x) ? x : (x > 0 ? 1e300 : -1e300); }

std::vector<double> linspace(double a, double b, std::size_t n) {
    std::vector<double> out(n);
    if (n == 1) {
        out[0] = a;
        return out;
    }
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
    }
    return out;
}

}  // namespace

nlohmann::json KernelFamily::family_conditions(double, double) const {
    return nlohmann::json::array();
}

double KernelFamily::tail_point(double t, double rel) const {
    const double k0 = k(t, 0.0);
    const double sc = scale(t);
    if (!(k0 > 0.0)) return 50.0 * sc;
    double hi = sc;
    int guard = 0;
    while (k(t, hi) > rel * k0 && guard++ < 200) hi *= 2.0;
    double lo = hi / 2.0;
    if (k(t, lo) <= rel * k0) return lo;
    for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (k(t, mid) > rel * k0) lo = mid;
        else hi = mid;
    }
    return hi;
}

// ---------------------------------------------------------------------------
// Rescaled kernel

RescaledKernel::RescaledKernel(double c, bool increasing) : c_(c), increasing_(increasing) {
    if (!(c > 0.0) || !std::isfinite(c)) {
        throw std::invalid_argument("RescaledKernel: c must be positive");
    }
}

double RescaledKernel::epsilon(double t) const {
    constexpr double half_pi = std::numbers::pi / 2.0;
    // pi/2 - arctan(t) = arctan(1/t) for t > 0 avoids cancellation at large t.
    if (!increasing_) return c_ * (t > 0.0 ? std::atan(1.0 / t) : half_pi - std::atan(t));
    return c_ * (t < 0.0 ? std::atan(-1.0 / t) : half_pi + std::atan(t));
}

double RescaledKernel::epsilon_dot(double t) const {
    const double d = c_ / (1.0 + t * t);
    return increasing_ ? d : -d;
}

double RescaledKernel::mu(double t, double s) const {
    const double e = epsilon(t);
    return std::exp(-s / e) / (e * e);
}

double RescaledKernel::dmu_ds(double t, double s) const {
    const double e = epsilon(t);
    return -std::exp(-s / e) / (e * e * e);
}

double RescaledKernel::dmu_dt(double t, double s) const {
    const double e = epsilon(t);
    return -(epsilon_dot(t) / e) * mu(t, s) * (2.0 - s / e);
}

double RescaledKernel::k(double t, double s) const {
    const double e = epsilon(t);
    return std::exp(-s / e) / e;
}

std::optional<double> RescaledKernel::limit_mass() const {
    if (increasing_) return std::nullopt;
    return 1.0;
}

nlohmann::json RescaledKernel::parameters() const {
    return {{"family", "rescaled"}, {"c", c_}, {"increasing", increasing_}};
}

nlohmann::json RescaledKernel::family_conditions(double t_min, double t_max) const {
    // Base kernel exp(-s) satisfies mu' + rho mu <= 0 with rho = 1 (equality).
    constexpr double rho = 1.0;
    double inf_dot = std::numeric_limits<double>::infinity();
    double sup_dot = -std::numeric_limits<double>::infinity();
    for (double t : linspace(t_min, t_max, 2001)) {
        inf_dot = std::min(inf_dot, epsilon_dot(t));
        sup_dot = std::max(sup_dot, epsilon_dot(t));
    }
    if (t_min <= 0.0 && t_max >= 0.0) {
        inf_dot = std::min(inf_dot, epsilon_dot(0.0));
        sup_dot = std::max(sup_dot, epsilon_dot(0.0));
    }
    nlohmann::json out = nlohmann::json::array();
    out.push_back({{"id", "base_decay"}, {"holds", true}, {"rho", rho},
                   {"detail", "mu(s)=exp(-s): mu' + rho mu = 0"}});
    out.push_back({{"id", "eps_nonincreasing"}, {"holds", sup_dot <= 0.0}, {"sup_eps_dot", sup_dot}});
    out.push_back({{"id", "inf_eps_dot"}, {"holds", inf_dot > -rho / 2.0}, {"inf_eps_dot", inf_dot},
                   {"bound", -rho / 2.0}});
    out.push_back({{"id", "c_range"}, {"holds", c_ > 0.0 && c_ < 0.5}, {"c", c_}});
    return out;
}

// ---------------------------------------------------------------------------
// Rheological kernel

RheologicalKernel::RheologicalKernel(double rho, double gamma, double alpha)
    : rho_(rho), gamma_(gamma), alpha_(alpha) {
    if (!(rho > 0.0) || !(gamma > 0.0) || !(alpha >= 0.0)) {
        throw std::invalid_argument("RheologicalKernel: need rho > 0, gamma > 0, alpha >= 0");
    }
}

double RheologicalKernel::stiffness(double t) const { return 1.0 + std::exp(alpha_ * t); }
double RheologicalKernel::stiffness_dot(double t) const { return alpha_ * std::exp(alpha_ * t); }

double RheologicalKernel::stiffness_integral(double t, double s) const {
    if (alpha_ == 0.0) return 2.0 * s;
    return s + std::exp(alpha_ * t) * (-std::expm1(-alpha_ * s)) / alpha_;
}

double RheologicalKernel::mu(double t, double s) const {
    const double decay = std::exp(-stiffness_integral(t, s) / gamma_);
    if (decay == 0.0) return 0.0;
    return stiffness(t) * stiffness(t - s) * decay / (rho_ * gamma_);
}

double RheologicalKernel::dmu_ds(double t, double s) const {
    const double decay = std::exp(-stiffness_integral(t, s) / gamma_);
    if (decay == 0.0) return 0.0;
    const double ks = stiffness(t - s);
    return -stiffness(t) / (rho_ * gamma_) * (stiffness_dot(t - s) + ks * ks / gamma_) * decay;
}

double RheologicalKernel::dmu_dt(double t, double s) const {
    const double decay = std::exp(-stiffness_integral(t, s) / gamma_);
    if (decay == 0.0) return 0.0;
    const double kt = stiffness(t);
    const double ks = stiffness(t - s);
    // K0(t-s) - K0(t) without cancellation
    const double gap = std::exp(alpha_ * t) * std::expm1(-alpha_ * s);
    const double bracket = stiffness_dot(t) * ks + kt * stiffness_dot(t - s) + kt * ks * gap / gamma_;
    return bracket * decay / (rho_ * gamma_);
}

double RheologicalKernel::k(double t, double s) const {
    const double decay = std::exp(-stiffness_integral(t, s) / gamma_);
    return stiffness(t) / rho_ * decay;
}

double RheologicalKernel::m4_bracket(double t, double delta) const {
    const double kt = stiffness(t);
    return rho_ * gamma_ * stiffness_dot(t) + (delta * gamma_ - rho_) * kt * kt;
}

nlohmann::json RheologicalKernel::parameters() const {
    return {{"family", "rheological"}, {"rho", rho_}, {"gamma", gamma_}, {"alpha", alpha_}};
}

nlohmann::json RheologicalKernel::family_conditions(double t_min, double t_max) const {
    double sup_ratio = 0.0;
    double sup_t = t_min;
    for (double t : linspace(t_min, t_max, 2001)) {
        const double r = stiffness_dot(t) / stiffness(t);
        if (r > sup_ratio) {
            sup_ratio = r;
            sup_t = t;
        }
    }
    nlohmann::json out = nlohmann::json::array();
    out.push_back({{"id", "stiffness_limit"}, {"holds", beta() > 0.0}, {"beta", beta()},
                   {"detail", "K0(t) -> 1 as t -> -inf, K0 nondecreasing"}});
    out.push_back({{"id", "growth_bound"},
                   {"holds", growth_bound() < beta() / gamma_},
                   {"M", growth_bound()},
                   {"beta_over_gamma", beta() / gamma_},
                   {"sampled_sup_ratio", sup_ratio},
                   {"witness_t", sup_t}});
    return out;
}

// ---------------------------------------------------------------------------
// Constant and oscillating kernels

ConstantKernel::ConstantKernel(double delta0, double mass) : delta0_(delta0), mass_(mass) {
    if (!(delta0 > 0.0) || !(mass >= 0.0)) {
        throw std::invalid_argument("ConstantKernel: need delta0 > 0 and mass >= 0");
    }
}

double ConstantKernel::mu(double, double s) const {
    return mass_ * delta0_ * std::exp(-delta0_ * s);
}

double ConstantKernel::dmu_ds(double, double s) const {
    return -mass_ * delta0_ * delta0_ * std::exp(-delta0_ * s);
}

double ConstantKernel::k(double, double s) const { return mass_ * std::exp(-delta0_ * s); }

nlohmann::json ConstantKernel::parameters() const {
    return {{"family", mass_ == 0.0 ? "zero" : "constant"}, {"delta0", delta0_}, {"mass", mass_}};
}

OscillatingKernel::OscillatingKernel(double amplitude, double frequency)
    : amplitude_(amplitude), frequency_(frequency) {
    if (!(std::abs(amplitude) < 1.0)) {
        throw std::invalid_argument("OscillatingKernel: |amplitude| must be < 1");
    }
}

double OscillatingKernel::kappa(double t) const {
    return 1.0 + amplitude_ * std::sin(frequency_ * t);
}
double OscillatingKernel::mu(double t, double s) const { return kappa(t) * std::exp(-s); }
double OscillatingKernel::dmu_ds(double t, double s) const { return -kappa(t) * std::exp(-s); }
double OscillatingKernel::dmu_dt(double t, double s) const {
    return amplitude_ * frequency_ * std::cos(frequency_ * t) * std::exp(-s);
}
double OscillatingKernel::k(double t, double s) const { return kappa(t) * std::exp(-s); }

nlohmann::json OscillatingKernel::parameters() const {
    return {{"family", "oscillating"}, {"amplitude", amplitude_}, {"frequency", frequency_}};
}

// ---------------------------------------------------------------------------
// Certification

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::pass: return "pass";
        case Verdict::fail: return "fail";
        case Verdict::indeterminate: return "indeterminate";
    }
    return "indeterminate";
}

const AxiomResult& AxiomReport::axiom(const std::string& id) const {
    for (const auto& a : axioms) {
        if (a.id == id) return a;
    }
    throw std::out_of_range("AxiomReport: no axiom " + id);
}

std::size_t AxiomReport::passed() const {
    return static_cast<std::size_t>(std::count_if(
        axioms.begin(), axioms.end(), [](const auto& a) { return a.verdict == Verdict::pass; }));
}

std::vector<std::string> AxiomReport::failed_ids() const {
    std::vector<std::string> out;
    for (const auto& a : axioms) {
        if (a.verdict != Verdict::pass) out.push_back(a.id);
    }
    return out;
}

nlohmann::json AxiomReport::to_json() const {
    nlohmann::json j;
    j["family"] = family;
    j["parameters"] = parameters;
    j["passed"] = passed();
    j["total"] = axioms.size();
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& a : axioms) {
        nlohmann::json e = {{"id", a.id},
                            {"verdict", to_string(a.verdict)},
                            {"value", safe_json(a.value)},
                            {"witness", {{"t", a.witness_t}, {"s", a.witness_s}}},
                            {"detail", a.detail}};
        if (!a.extra.is_null()) e["extra"] = a.extra;
        arr.push_back(std::move(e));
    }
    j["axioms"] = std::move(arr);
    j["identities"] = identities;
    j["family_conditions"] = family_conditions;
    return j;
}

namespace {

struct Samples {
    std::vector<double> t, s;
    // row-major [t][s]
    std::vector<double> mu, ds, dt;
    std::vector<double> kappa, mu0;
    bool finite = true;
    double bad_t = 0.0, bad_s = 0.0;
    double at(const std::vector<double>& v, std::size_t i, std::size_t j) const {
        return v[i * s.size() + j];
    }
};

Samples sample(const KernelFamily& fam, const CertificationGrid& g) {
    Samples out;
    out.t = linspace(g.t_min, g.t_max, g.n_t);
    double min_sc = std::numeric_limits<double>::infinity();
    double max_sc = 0.0;
    for (double t : out.t) {
        min_sc = std::min(min_sc, fam.scale(t));
        max_sc = std::max(max_sc, fam.scale(t));
    }
    double s_hi = g.s_hi_factor * max_sc;
    for (double t : out.t) s_hi = std::max(s_hi, fam.tail_point(t, 1e-12));
    out.s = quad::geometric_nodes(g.s_lo_factor * min_sc, s_hi, g.n_s);
    const std::size_t nt = out.t.size(), ns = out.s.size();
    out.mu.resize(nt * ns);
    out.ds.resize(nt * ns);
    out.dt.resize(nt * ns);
    out.kappa.resize(nt);
    out.mu0.resize(nt);
    for (std::size_t i = 0; i < nt; ++i) {
        const double t = out.t[i];
        out.kappa[i] = fam.kappa(t);
        out.mu0[i] = fam.mu(t, 0.0);
        if (!std::isfinite(out.kappa[i]) || !std::isfinite(out.mu0[i])) {
            if (out.finite) {
                out.bad_t = t;
                out.bad_s = 0.0;
            }
            out.finite = false;
        }
        for (std::size_t j = 0; j < ns; ++j) {
            const double s = out.s[j];
            const double m = fam.mu(t, s), a = fam.dmu_ds(t, s), b = fam.dmu_dt(t, s);
            out.mu[i * ns + j] = m;
            out.ds[i * ns + j] = a;
            out.dt[i * ns + j] = b;
            if (!(std::isfinite(m) && std::isfinite(a) && std::isfinite(b)) && out.finite) {
                out.finite = false;
                out.bad_t = t;
                out.bad_s = s;
            }
        }
    }
    return out;
}

double kernel_integral(const KernelFamily& fam, double t, double s_lo_factor,
                       const auto& integrand) {
    const double sc = fam.scale(t);
    const double hi = std::max(fam.tail_point(t, 1e-16), 2.0 * s_lo_factor * sc);
    return quad::integrate_log(integrand, s_lo_factor * sc, hi, 3000, true);
}

AxiomResult indeterminate(const std::string& id, const Samples& smp) {
    AxiomResult r;
    r.id = id;
    r.verdict = Verdict::indeterminate;
    r.witness_t = smp.bad_t;
    r.witness_s = smp.bad_s;
    r.detail = "non-finite kernel evaluation";
    return r;
}

}  // namespace

AxiomReport certify_axioms(const KernelFamily& fam, const CertificationGrid& g) {
    if (!(g.t_max > g.t_min) || g.n_t < 2 || g.n_s < 2) {
        throw std::invalid_argument("certify_axioms: degenerate certification grid");
    }
    AxiomReport rep;
    rep.family = fam.name();
    rep.parameters = fam.parameters();
    rep.family_conditions = fam.family_conditions(g.t_min, g.t_max);

    const Samples smp = sample(fam, g);
    const std::size_t nt = smp.t.size(), ns = smp.s.size();
    const double tol = g.sign_tol;

    // Numeric masses, reused by M1, M6 and the identities.
    std::vector<double> kappa_num(nt), dot_abs(nt), s_dmu(nt);
    for (std::size_t i = 0; i < nt; ++i) {
        const double t = smp.t[i];
        kappa_num[i] = kernel_integral(fam, t, g.s_lo_factor, [&](double s) { return fam.mu(t, s); });
        dot_abs[i] = kernel_integral(fam, t, g.s_lo_factor,
                                     [&](double s) { return std::abs(fam.dmu_dt(t, s)); });
        s_dmu[i] = kernel_integral(fam, t, g.s_lo_factor,
                                   [&](double s) { return s * fam.dmu_ds(t, s); });
    }

    // M1: nonincreasing, nonnegative, summable.
    if (!smp.finite) {
        rep.axioms.push_back(indeterminate("M1", smp));
    } else {
        AxiomResult r;
        r.id = "M1";
        double worst = 0.0;
        bool summable = true;
        for (std::size_t i = 0; i < nt; ++i) {
            const double t = smp.t[i];
            const double ref = std::max(smp.mu0[i], std::numeric_limits<double>::min());
            const double sc = fam.scale(t);
            for (std::size_t j = 0; j < ns; ++j) {
                double v = std::max(-smp.at(smp.mu, i, j) / ref, 0.0);
                v = std::max(v, smp.at(smp.ds, i, j) * sc / ref);
                if (j + 1 < ns) v = std::max(v, (smp.at(smp.mu, i, j + 1) - smp.at(smp.mu, i, j)) / ref);
                if (v > worst) {
                    worst = v;
                    r.witness_t = t;
                    r.witness_s = smp.s[j];
                }
            }
            if (!std::isfinite(kappa_num[i]) || !(fam.tail_point(t, 1e-12) < 1e300)) {
                summable = false;
                r.witness_t = t;
            }
        }
        r.value = worst;
        r.verdict = (worst <= tol && summable) ? Verdict::pass : Verdict::fail;
        r.detail = summable ? "max normalized monotonicity/sign violation" : "tail not summable on grid";
        rep.axioms.push_back(r);
    }

    // M2: K_tau(t) = sup_s mu_t(s) / mu_tau(s) on the grid, locally summable.
    if (!smp.finite) {
        rep.axioms.push_back(indeterminate("M2", smp));
    } else {
        AxiomResult r;
        r.id = "M2";
        double sup = 0.0, sup_tau = smp.t[0], worst_integral = 0.0;
        std::size_t skipped = 0;
        bool finite = true;
        for (std::size_t a = 0; a < nt; ++a) {
            std::vector<double> K(nt, 0.0);
            for (std::size_t b = a; b < nt; ++b) {
                double best = 0.0, best_s = smp.s[0];
                for (std::size_t j = 0; j < ns; ++j) {
                    const double den = smp.at(smp.mu, a, j);
                    const double num = smp.at(smp.mu, b, j);
                    if (den < kTiny) {
                        if (num >= kTiny) ++skipped;
                        continue;
                    }
                    const double q = num / den;
                    if (q > best) {
                        best = q;
                        best_s = smp.s[j];
                    }
                }
                K[b] = best;
                if (!std::isfinite(best)) finite = false;
                if (best > sup) {
                    sup = best;
                    sup_tau = smp.t[a];
                    r.witness_t = smp.t[b];
                    r.witness_s = best_s;
                }
            }
            double integral = 0.0;
            for (std::size_t b = a + 1; b < nt; ++b) {
                integral += 0.5 * (K[b] + K[b - 1]) * (smp.t[b] - smp.t[b - 1]);
            }
            worst_integral = std::max(worst_integral, integral);
            if (!std::isfinite(integral)) finite = false;
        }
        r.value = sup;
        r.verdict = finite ? Verdict::pass : Verdict::fail;
        r.detail = "grid supremum of mu_t/mu_tau (candidate K_tau(t))";
        r.extra = {{"tau_at_sup", sup_tau},
                   {"max_window_integral", safe_json(worst_integral)},
                   {"skipped_underflow_points", skipped}};
        rep.axioms.push_back(r);
    }

    // M3: mu and its time derivative bounded on the sampled compact set.
    if (!smp.finite) {
        rep.axioms.push_back(indeterminate("M3", smp));
    } else {
        AxiomResult r;
        r.id = "M3";
        double sup_mu = 0.0, sup_dot = 0.0;
        for (std::size_t i = 0; i < nt; ++i) {
            for (std::size_t j = 0; j < ns; ++j) {
                sup_mu = std::max(sup_mu, std::abs(smp.at(smp.mu, i, j)));
                if (std::abs(smp.at(smp.dt, i, j)) > sup_dot) {
                    sup_dot = std::abs(smp.at(smp.dt, i, j));
                    r.witness_t = smp.t[i];
                    r.witness_s = smp.s[j];
                }
            }
        }
        r.value = sup_dot;
        r.verdict = (std::isfinite(sup_mu) && std::isfinite(sup_dot)) ? Verdict::pass : Verdict::fail;
        r.detail = "sup |d/dt mu| on grid";
        r.extra = {{"sup_mu", sup_mu}};
        rep.axioms.push_back(r);
    }

    // M4: largest delta with dmu_dt + dmu_ds + delta kappa mu <= 0.
    double delta_star = std::numeric_limits<double>::infinity();
    if (!smp.finite) {
        rep.axioms.push_back(indeterminate("M4", smp));
    } else {
        AxiomResult r;
        r.id = "M4";
        bool any = false;
        for (std::size_t i = 0; i < nt; ++i) {
            const double kap = smp.kappa[i];
            for (std::size_t j = 0; j < ns; ++j) {
                const double m = smp.at(smp.mu, i, j);
                if (m < kTiny || !(kap > 0.0)) continue;
                any = true;
                const double d = -(smp.at(smp.dt, i, j) + smp.at(smp.ds, i, j)) / (kap * m);
                if (d < delta_star) {
                    delta_star = d;
                    r.witness_t = smp.t[i];
                    r.witness_s = smp.s[j];
                }
            }
        }
        if (!any) {
            r.value = 0.0;
            r.verdict = Verdict::pass;
            r.detail = "vacuous: mu vanishes on the grid";
        } else {
            r.value = delta_star;
            r.verdict = delta_star > tol ? Verdict::pass : Verdict::fail;
            r.detail = delta_star > tol ? "largest admissible delta on grid"
                                        : "d/dt mu + d/ds mu > 0 at witness; no delta > 0";
            // residual of the sign condition with the reported delta
            double max_res = -std::numeric_limits<double>::infinity();
            const double d_use = std::max(delta_star, 0.0);
            for (std::size_t i = 0; i < nt; ++i) {
                const double ref = std::max(smp.mu0[i] / fam.scale(smp.t[i]), kTiny);
                for (std::size_t j = 0; j < ns; ++j) {
                    const double v = smp.at(smp.dt, i, j) + smp.at(smp.ds, i, j) +
                                     d_use * smp.kappa[i] * smp.at(smp.mu, i, j);
                    max_res = std::max(max_res, v / ref);
                }
            }
            r.extra = {{"max_normalized_residual", max_res}};
        }
        rep.axioms.push_back(r);
    }

    // M5: inf kappa > 0.
    {
        AxiomResult r;
        r.id = "M5";
        double inf = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < nt; ++i) {
            if (smp.kappa[i] < inf) {
                inf = smp.kappa[i];
                r.witness_t = smp.t[i];
            }
        }
        r.value = inf;
        r.verdict = !std::isfinite(inf) ? Verdict::indeterminate
                                        : (inf > tol ? Verdict::pass : Verdict::fail);
        r.detail = "inf kappa(t) on grid";
        rep.axioms.push_back(r);
    }

    // M6: sup kappa^-2 int |d/dt mu| ds.
    {
        AxiomResult r;
        r.id = "M6";
        double sup = 0.0;
        bool ok = true;
        for (std::size_t i = 0; i < nt; ++i) {
            const double kap = smp.kappa[i];
            const double v = kap > 0.0 ? dot_abs[i] / (kap * kap)
                                       : (dot_abs[i] == 0.0 ? 0.0
                                                            : std::numeric_limits<double>::infinity());
            if (!std::isfinite(v)) ok = false;
            if (v > sup || !std::isfinite(v)) {
                sup = v;
                r.witness_t = smp.t[i];
            }
        }
        r.value = sup;
        r.verdict = ok ? Verdict::pass : Verdict::fail;
        r.detail = "sup_t kappa(t)^-2 int |d/dt mu_t|";
        rep.axioms.push_back(r);
    }

    // M7: sup mu_t(0) / kappa^2.
    {
        AxiomResult r;
        r.id = "M7";
        double sup = 0.0;
        bool ok = true;
        for (std::size_t i = 0; i < nt; ++i) {
            const double kap = smp.kappa[i];
            const double v = kap > 0.0 ? smp.mu0[i] / (kap * kap)
                                       : (smp.mu0[i] == 0.0 ? 0.0
                                                            : std::numeric_limits<double>::infinity());
            if (!std::isfinite(v)) ok = false;
            if (v > sup || !std::isfinite(v)) {
                sup = v;
                r.witness_t = smp.t[i];
            }
        }
        r.value = sup;
        r.verdict = ok ? Verdict::pass : Verdict::fail;
        r.detail = "sup_t mu_t(0) / kappa(t)^2";
        rep.axioms.push_back(r);
    }

    // M8: for each window, the largest nu in (0,1] with int_nu^{1/nu} mu_t >= kappa/2.
    {
        AxiomResult r;
        r.id = "M8";
        nlohmann::json windows = nlohmann::json::array();
        double min_nu = 1.0;
        bool ok = true;
        const std::size_t nw = std::max<std::size_t>(1, g.n_windows);
        for (std::size_t w = 0; w < nw; ++w) {
            const double a = g.t_min + (g.t_max - g.t_min) * static_cast<double>(w) / nw;
            const double b = g.t_min + (g.t_max - g.t_min) * static_cast<double>(w + 1) / nw;
            const auto ts = linspace(a, b, 33);
            auto holds = [&](double nu, double* bad_t) {
                for (double t : ts) {
                    const double mass = fam.k(t, nu) - fam.k(t, 1.0 / nu);
                    if (mass < 0.5 * fam.kappa(t)) {
                        if (bad_t) *bad_t = t;
                        return false;
                    }
                }
                return true;
            };
            constexpr double nu_floor = 1e-250;
            double bad_t = a;
            double nu_star = 0.0;
            if (holds(nu_floor, &bad_t)) {
                double lo = std::log(nu_floor), hi = 0.0;  // log nu
                for (int it = 0; it < 100; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    if (holds(std::exp(mid), nullptr)) lo = mid;
                    else hi = mid;
                }
                nu_star = std::exp(lo);
            } else {
                ok = false;
                r.witness_t = bad_t;
            }
            windows.push_back({{"a", a}, {"b", b}, {"nu", nu_star}});
            if (nu_star < min_nu) {
                min_nu = nu_star;
                if (ok) r.witness_t = a;
            }
        }
        r.value = min_nu;
        r.verdict = ok ? Verdict::pass : Verdict::fail;
        r.detail = "largest nu achieving the half-mass bound, minimized over windows";
        r.extra = {{"windows", windows}};
        rep.axioms.push_back(r);
    }

    // Identities and closed-form cross-checks.
    {
        double kappa_err = 0.0, sdmu_err = 0.0;
        double ratio_min = std::numeric_limits<double>::infinity(), ratio_max = 0.0;
        for (std::size_t i = 0; i < nt; ++i) {
            const double kap = smp.kappa[i];
            if (kap > 0.0) {
                kappa_err = std::max(kappa_err, std::abs(kappa_num[i] - kap) / kap);
                sdmu_err = std::max(sdmu_err, std::abs(s_dmu[i] + kap) / kap);
                const double q = smp.mu0[i] / (kap * kap);
                ratio_min = std::min(ratio_min, q);
                ratio_max = std::max(ratio_max, q);
            }
        }
        // Central differences against the closed-form derivatives.
        double fd_s = 0.0, fd_t = 0.0;
        for (std::size_t i = 0; i < nt; i += 4) {
            const double t = smp.t[i];
            const double sc = fam.scale(t);
            double row_ds = 0.0, row_dt = 0.0;
            for (std::size_t j = 0; j < ns; ++j) {
                row_ds = std::max(row_ds, std::abs(smp.at(smp.ds, i, j)));
                row_dt = std::max(row_dt, std::abs(smp.at(smp.dt, i, j)));
            }
            // differences below this level are round-off in mu itself
            row_dt += 1e-6 * smp.mu0[i];
            for (std::size_t j = 0; j < ns; j += 10) {
                const double s = smp.s[j];
                if (s < 1e-3 * sc) continue;
                const double hs = 1e-5 * s;
                const double ht = 1e-5 * std::max(1.0, std::abs(t));
                const double num_s = (fam.mu(t, s + hs) - fam.mu(t, s - hs)) / (2 * hs);
                const double num_t = (fam.mu(t + ht, s) - fam.mu(t - ht, s)) / (2 * ht);
                if (row_ds > 0.0) fd_s = std::max(fd_s, std::abs(num_s - smp.at(smp.ds, i, j)) / row_ds);
                if (row_dt > 0.0) fd_t = std::max(fd_t, std::abs(num_t - smp.at(smp.dt, i, j)) / row_dt);
            }
        }
        rep.identities = {{"kappa_vs_quadrature_rel", kappa_err},
                          {"mu0_over_kappa_sq_min",
                           std::isfinite(ratio_min) ? nlohmann::json(ratio_min) : nlohmann::json()},
                          {"mu0_over_kappa_sq_max", ratio_max},
                          {"s_dmu_integral_plus_kappa_rel", sdmu_err},
                          {"fd_dmu_ds_rel", fd_s},
                          {"fd_dmu_dt_rel", fd_t}};
        if (const auto* rh = dynamic_cast<const RheologicalKernel*>(&fam)) {
            double gamma_err = 0.0, max_bracket = -std::numeric_limits<double>::infinity();
            const double d_use = std::isfinite(delta_star) ? std::max(delta_star, 0.0) : 0.0;
            for (std::size_t i = 0; i < nt; ++i) {
                const double t = smp.t[i];
                const double val = kernel_integral(fam, t, g.s_lo_factor, [&](double s) {
                    return rh->stiffness(t - s) * std::exp(-rh->stiffness_integral(t, s) / rh->gamma());
                });
                gamma_err = std::max(gamma_err, std::abs(val - rh->gamma()) / rh->gamma());
                const double kt = rh->stiffness(t);
                max_bracket = std::max(max_bracket, rh->m4_bracket(t, d_use) / (kt * kt));
            }
            rep.identities["stiffness_exp_integral_minus_gamma_rel"] = gamma_err;
            rep.identities["m4_bracket_max_normalized"] = max_bracket;
            rep.identities["m4_bracket_delta"] = d_use;
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Delta-mass convergence and k/mu consistency.

nlohmann::json DeltaMassTable::to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < times.size(); ++i) rows.push_back({times[i], safe_json(values[i])});
    return {{"eps_cut", eps_cut},
            {"rows", rows},
            {"finite", finite},
            {"converges", converges},
            {"limit_estimate", safe_json(limit_estimate)}};
}

DeltaMassTable delta_mass_convergence(const KernelFamily& fam, const std::vector<double>& times,
                                      double eps_cut) {
    if (eps_cut < 0.0) throw std::invalid_argument("delta_mass_convergence: eps_cut < 0");
    if (times.size() < 2) throw std::invalid_argument("delta_mass_convergence: need >= 2 times");
    DeltaMassTable tab;
    tab.eps_cut = eps_cut;
    tab.times = times;
    for (double t : times) {
        const double sc = fam.scale(t);
        const double hi = std::max(fam.tail_point(t, 1e-15), 2e-6 * sc);
        auto kk = [&](double s) { return fam.k(t, s); };
        double v = 0.0;
        if (eps_cut == 0.0) {
            v = quad::integrate_log(kk, 1e-6 * sc, hi, 4000, true);
        } else if (eps_cut < hi) {
            v = quad::integrate_log(kk, eps_cut, hi, 4000, false);
        }
        if (!std::isfinite(v)) tab.finite = false;
        tab.values.push_back(v);
    }
    const double first = tab.values.front();
    const double last = tab.values.back();
    const double prev = tab.values[tab.values.size() - 2];
    tab.limit_estimate = last;
    if (!tab.finite) {
        tab.converges = false;
    } else if (eps_cut == 0.0) {
        tab.converges = last > 0.0 && std::abs(last - prev) <= 1e-2 * std::abs(last);
    } else {
        bool mono = true;
        for (std::size_t i = 1; i < tab.values.size(); ++i) {
            if (tab.values[i] > tab.values[i - 1] * (1.0 + 1e-9) + 1e-300) mono = false;
        }
        tab.converges = mono && (last <= 1e-2 * first || last < 1e-12);
    }
    return tab;
}

nlohmann::json DeltaConvergence::to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& t : tables) arr.push_back(t.to_json());
    return {{"certified", certified}, {"mass", mass}, {"tables", arr}};
}

DeltaConvergence certify_delta_convergence(const KernelFamily& fam, const std::vector<double>& times,
                                           const std::vector<double>& eps_cuts) {
    DeltaConvergence out;
    out.tables.push_back(delta_mass_convergence(fam, times, 0.0));
    out.certified = out.tables.front().converges;
    for (double e : eps_cuts) {
        out.tables.push_back(delta_mass_convergence(fam, times, e));
        out.certified = out.certified && out.tables.back().converges;
    }
    out.mass = fam.limit_mass().value_or(out.tables.front().limit_estimate);
    return out;
}

nlohmann::json KernelConsistency::to_json() const {
    return {{"max_k_residual", max_k_residual},
            {"max_derivative_residual", max_derivative_residual},
            {"max_tail_ratio", max_tail_ratio}};
}

KernelConsistency k_of_mu_consistency(const KernelFamily& fam, const std::vector<double>& times,
                                      std::size_t n_s, double s_hi_factor) {
    KernelConsistency out;
    for (double t : times) {
        const double sc = fam.scale(t);
        const double k0 = fam.k(t, 0.0);
        const double m0 = fam.mu(t, 0.0);
        if (!(k0 > 0.0)) continue;
        const double far = fam.tail_point(t, 1e-17);
        for (double s : quad::geometric_nodes(1e-4 * sc, s_hi_factor * sc, n_s)) {
            double tail = 0.0;
            if (s < far) {
                tail = quad::integrate_log([&](double y) { return fam.mu(t, y); }, s, far, 2000, false);
            }
            out.max_k_residual = std::max(out.max_k_residual, std::abs(fam.k(t, s) - tail) / k0);
            const double h = 1e-5 * std::min(s, sc);
            const double dk = (fam.k(t, s + h) - fam.k(t, s - h)) / (2.0 * h);
            out.max_derivative_residual =
                std::max(out.max_derivative_residual, std::abs(dk + fam.mu(t, s)) / m0);
        }
        out.max_tail_ratio = std::max(out.max_tail_ratio, fam.k(t, s_hi_factor * sc) / k0);
    }
    return out;
}

KernelPtr make_kernel(const nlohmann::json& spec) {
    const std::string fam = spec.value("family", std::string("rescaled"));
    if (fam == "rescaled") {
        return std::make_shared<RescaledKernel>(spec.value("c", 0.4), spec.value("increasing", false));
    }
    if (fam == "rheological") {
        return std::make_shared<RheologicalKernel>(spec.value("rho", 1.0), spec.value("gamma", 1.0),
                                                   spec.value("alpha", 0.5));
    }
    if (fam == "constant") {
        return std::make_shared<ConstantKernel>(spec.value("delta0", 1.0), spec.value("mass", 1.0));
    }
    if (fam == "zero") return std::make_shared<ConstantKernel>(1.0, 0.0);
    if (fam == "oscillating") {
        return std::make_shared<OscillatingKernel>(spec.value("amplitude", 0.5),
                                                   spec.value("frequency", 4.0));
    }
    throw std::invalid_argument("unknown kernel family '" + fam + "'");
}

}  // namespace viscomem
