#include "viscomem/energy.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <ostream>
#include <unordered_map>

#include "viscomem/csv.hpp"

namespace viscomem {

EnergySnapshot snapshot(const SimState& s, const Model& model, std::span<const double> weights) {
    const auto& basis = model.basis();
    const auto& f = model.config().f;
    const auto& g = model.g();
    EnergySnapshot e;
    e.t = s.t;
    e.u1_sq = sigma_norm_sq(s.u, basis, 1.0);
    e.u2_sq = sigma_norm_sq(s.u, basis, 2.0);
    e.v_sq = sigma_norm_sq(s.v, basis, 0.0);
    e.v1_sq = sigma_norm_sq(s.v, basis, 1.0);
    e.eta_sq = m_norm_sq(s.eta, weights, basis, 0.0);
    e.eta1_sq = m_norm_sq(s.eta, weights, basis, 1.0);
    for (double b : weights) e.kappa += b;
    e.kappa_eta = e.kappa * e.eta_sq;
    const auto dw = model.grid().dissipation_weights(model.kernel(), s.t);
    e.diss0 = m_norm_sq(s.eta, dw, basis, 0.0);
    e.diss1 = m_norm_sq(s.eta, dw, basis, 1.0);
    e.pair0 = history_pairing(s.eta, s.v, weights, basis, 1.0);
    e.pair1 = history_pairing(s.eta, s.v, weights, basis, 2.0);
    e.Phi = 2.0 * sigma_inner(s.u, s.v, basis, 0.0);
    const ModalField fu = f.is_zero() ? basis.zero() : apply_nonlinearity(s.u, f, basis);
    const ModalField gamma = fu - g;
    e.gamma_u = sigma_inner(gamma, s.u, basis, 0.0);
    e.F1 = f.is_zero() ? 0.0 : integral_antiderivative(s.u, f, basis);
    e.g_u = sigma_inner(g, s.u, basis, 0.0);
    if (e.kappa > 0.0) {
        e.Psi = -2.0 / e.kappa * history_pairing(s.eta, s.v, weights, basis, 0.0);
        e.psi_gamma = 2.0 / e.kappa * history_pairing(s.eta, gamma, weights, basis, 0.0);
    }
    e.L_mech = e.u1_sq + e.v_sq + 2.0 * e.F1 - 2.0 * e.g_u;
    e.L = e.L_mech + e.eta_sq;
    e.E = 0.5 * (e.u1_sq + e.v_sq + e.eta_sq);
    return e;
}

EnergyRecorder::EnergyRecorder(const Model& model, double delta) : model_(&model) {
    const auto& basis = model.basis();
    consts_.theta = model.config().f.theta;
    consts_.c_f = model.config().f.c_f;
    consts_.lambda1 = basis.lambda1();
    consts_.g_sq = sigma_norm_sq(model.g(), basis, 0.0);
    consts_.g_minus1_sq = sigma_norm_sq(model.g(), basis, -1.0);
    consts_.Q0 = consts_.c_f + 2.0 / consts_.theta * consts_.g_minus1_sq;
    consts_.delta = delta;
}

void EnergyRecorder::record(const SimState& s, std::span<const double> weights) {
    snaps_.push_back(snapshot(s, *model_, weights));
}

void EnergyRecorder::record(const SimState& s) {
    const auto b = model_->grid().kernel_weights(model_->kernel(), s.t);
    record(s, b);
}

StepObserver EnergyRecorder::observer() {
    return [this](const StepEvent& ev) {
        record(ev.after, ev.weights_after);
        const ModalField du = ev.after.u - ev.u_before;
        snaps_.back().memory_work_step = history_pairing(ev.after.eta, du, ev.weights_after, model_->basis(), 1.0);
    };
}

// ---------------------------------------------------------------------------

EnergySeries::EnergySeries(std::vector<EnergySnapshot> snaps, EnergyConstants consts)
    : snaps_(std::move(snaps)), consts_(consts) {}

const EnergySeries::Sums& EnergySeries::cumulative(SnapshotField f, bool trapezoid) const {
    // Member pointers are not hashable; key on the field offset.
    const EnergySnapshot probe{};
    const auto offset = reinterpret_cast<const char*>(&(probe.*f)) -
                        reinterpret_cast<const char*>(&probe);
    const auto key = 2 * offset + (trapezoid ? 1 : 0);
    auto it = cumulative_.find(key);
    if (it != cumulative_.end()) return it->second;
    const std::size_t n = snaps_.size();
    Sums c{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
    auto piece = [&](std::size_t i) {
        return trapezoid ? 0.5 * (snaps_[i].t - snaps_[i - 1].t) * (snaps_[i].*f + snaps_[i - 1].*f) : snaps_[i].*f;
    };
    for (std::size_t i = 1; i < n; ++i) c.forward[i] = c.forward[i - 1] + piece(i);
    for (std::size_t i = n; i-- > 1;) c.backward[i - 1] = c.backward[i] + piece(i);
    return cumulative_.emplace(key, std::move(c)).first->second;
}

double EnergySeries::Sums::between(std::size_t a, std::size_t b) const {
    // Difference of whichever running sum is smaller at the endpoints, so that
    // late windows of a decaying run keep their relative accuracy.
    const double fwd = std::max(std::abs(forward.at(a)), std::abs(forward.at(b)));
    const double bwd = std::max(std::abs(backward.at(a)), std::abs(backward.at(b)));
    return bwd < fwd ? backward[a] - backward[b] : forward[b] - forward[a];
}

double EnergySeries::integral(SnapshotField f, std::size_t a, std::size_t b) const {
    return cumulative(f, true).between(a, b);
}

double EnergySeries::step_sum(SnapshotField f, std::size_t a, std::size_t b) const {
    return cumulative(f, false).between(a, b);
}

std::vector<std::size_t> EnergySeries::marks(double spacing) const {
    std::vector<std::size_t> out;
    if (snaps_.empty() || !(spacing > 0.0)) return out;
    const double t0 = snaps_.front().t;
    const double t1 = snaps_.back().t;
    std::size_t i = 0;
    for (int k = 0;; ++k) {
        const double target = t0 + k * spacing;
        if (target > t1 + 1e-9 * spacing) break;
        while (i + 1 < snaps_.size() &&
               std::abs(snaps_[i + 1].t - target) <= std::abs(snaps_[i].t - target)) {
            ++i;
        }
        if (out.empty() || out.back() != i) out.push_back(i);
    }
    return out;
}

double lambda_functional(const EnergySeries& run, std::size_t i, double eps) {
    const auto& s = run.snapshots()[i];
    return s.L + 2.0 * eps * (s.Phi + 4.0 * s.Psi) + run.constants().Q0;
}

// ---------------------------------------------------------------------------

void InequalityReport::finalize() {
    worst_slack = windows.empty() ? 0.0 : std::numeric_limits<double>::infinity();
    bool ok = true, strict = true;
    double worst_margin = std::numeric_limits<double>::infinity();
    for (auto& w : windows) {
        // Round-off floor so exactly balanced identities do not flip on the last bit.
        w.tolerance = std::max(w.tolerance, 1e-10 * std::max({w.scale, std::abs(w.lhs), std::abs(w.rhs)}));
        worst_slack = std::min(worst_slack, w.slack);
        if (w.slack < 0.0) strict = false;
        if (w.slack < -w.tolerance) ok = false;
        if (w.slack + w.tolerance < worst_margin) worst_margin = w.slack + w.tolerance;
        if (w.slack == worst_slack) tolerance = w.tolerance;
    }
    verdict = strict ? "pass" : ok ? "pass_within_tolerance" : "fail";
    for (const auto& [name, value] : constants) {
        if (!std::isfinite(value)) {
            verdict = "fail";
            note += (note.empty() ? "" : "; ") + ("constant " + name + " is not finite");
        }
    }
}

namespace {

bool is_fitted_constant(const std::string& name) {
    return name == "M" || name == "C" || name == "c" || name == "Q";
}

std::string report_key(const InequalityReport& r) { return r.id + r.parameters.dump(); }

}  // namespace

void apply_refinement(std::vector<InequalityReport>& coarse,
                      const std::vector<InequalityReport>& fine) {
    std::unordered_map<std::string, const InequalityReport*> by_key;
    for (const auto& r : fine) by_key[report_key(r)] = &r;
    for (auto& r : coarse) {
        const auto it = by_key.find(report_key(r));
        if (it == by_key.end()) continue;
        const InequalityReport& f = *it->second;
        // Richardson estimate of the slack error: largest change over matching
        // windows, or of the worst slack when pointwise checks sample different times.
        double est = std::abs(r.worst_slack - f.worst_slack);
        if (r.windows.size() == f.windows.size()) {
            est = 0.0;
            for (std::size_t i = 0; i < r.windows.size(); ++i) {
                est = std::max(est, std::abs(r.windows[i].slack - f.windows[i].slack));
            }
        }
        for (auto& w : r.windows) w.tolerance = 3.0 * est;
        r.refined = true;
        r.finalize();
        const auto fitted = r.constants;
        for (const auto& [name, value] : fitted) {
            if (!is_fitted_constant(name)) continue;
            const auto fc = f.constants.find(name);
            if (fc == f.constants.end()) continue;
            const double a = std::abs(value), b = std::abs(fc->second);
            const double hi = std::max(a, b), lo = std::min(a, b);
            const double floor = 1e-9 * std::max(1.0, hi);
            r.constants[name + "_refined"] = fc->second;
            if (hi > floor && lo * 2.0 < hi) {
                r.verdict = "fail";
                r.note += (r.note.empty() ? "" : "; ") +
                          ("constant " + name + " changes by more than 2x under refinement");
            }
        }
    }
}

nlohmann::json to_json(const InequalityReport& r) {
    nlohmann::json j;
    j["id"] = r.id;
    j["parameters"] = r.parameters;
    j["worst_slack"] = r.worst_slack;
    j["tolerance"] = r.tolerance;
    j["refined"] = r.refined;
    j["verdict"] = r.verdict;
    j["constants"] = r.constants;
    if (!r.note.empty()) j["note"] = r.note;
    j["n_windows"] = r.windows.size();
    return j;
}

void write_inequality_csv(std::ostream& os, const std::vector<InequalityReport>& reports) {
    CsvWriter w(os);
    w.row({"id", "parameters", "a", "b", "lhs", "rhs", "slack", "tolerance", "verdict"});
    for (const auto& r : reports) {
        const std::string params = r.parameters.dump();
        auto emit = [&](const WindowSlack& x) {
            w.row({r.id, params, format_number(x.a), format_number(x.b), format_number(x.lhs),
                   format_number(x.rhs), format_number(x.slack), format_number(r.tolerance), r.verdict});
        };
        // Consecutive windows are those whose a equals the previous window's b.
        double last_b = std::numeric_limits<double>::quiet_NaN();
        const WindowSlack* full = nullptr;
        for (const auto& x : r.windows) {
            if (!full || (x.b - x.a) > (full->b - full->a)) full = &x;
            const bool consecutive = std::isnan(last_b) ? x.a == r.windows.front().a : x.a == last_b;
            if (consecutive) {
                emit(x);
                last_b = x.b;
            }
        }
        if (full) emit(*full);
        if (r.windows.empty()) {
            w.row({r.id, params, "", "", "", "", format_number(r.worst_slack),
                   format_number(r.tolerance), r.verdict});
        }
    }
}

// ---------------------------------------------------------------------------

namespace {

using Side = std::function<void(std::size_t, std::size_t, double&, double&)>;

InequalityReport pairwise(const EnergySeries& run, const std::vector<std::size_t>& marks,
                          const std::string& id, const Side& sides) {
    InequalityReport r;
    r.id = id;
    for (std::size_t i = 0; i < marks.size(); ++i) {
        for (std::size_t j = i + 1; j < marks.size(); ++j) {
            WindowSlack w;
            w.a = run.t(marks[i]);
            w.b = run.t(marks[j]);
            sides(marks[i], marks[j], w.lhs, w.rhs);
            w.slack = w.rhs - w.lhs;
            r.windows.push_back(w);
        }
    }
    return r;
}

/// Smallest M + C (M, C >= 0) with M A_w + C B_w >= need_w for all windows,
/// scanning M over {0} and a log grid.
std::pair<double, double> fit_two_constants(const std::vector<double>& A,
                                            const std::vector<double>& B,
                                            const std::vector<double>& need) {
    auto c_for = [&](double M) {
        double C = 0.0;
        for (std::size_t w = 0; w < need.size(); ++w) {
            const double rest = need[w] - M * A[w];
            if (rest <= 0.0) continue;
            if (B[w] <= 0.0) return std::numeric_limits<double>::infinity();
            C = std::max(C, rest / B[w]);
        }
        return C;
    };
    double best_M = 0.0, best_C = c_for(0.0);
    for (int i = 0; i <= 480; ++i) {
        const double M = std::pow(10.0, -8.0 + i * (16.0 / 480.0));
        const double C = c_for(M);
        if (M + C < best_M + best_C) {
            best_M = M;
            best_C = C;
        }
    }
    return {best_M, best_C};
}

double sup_field(const EnergySeries& run, SnapshotField f) {
    double m = 0.0;
    for (const auto& s : run.snapshots()) m = std::max(m, s.*f);
    return m;
}

}  // namespace

InequalityReport check_eta_norm_inequality(const EnergySeries& run,
                                           const std::vector<std::size_t>& marks, double sigma) {
    const SnapshotField norm = sigma == 0.0 ? &EnergySnapshot::eta_sq : &EnergySnapshot::eta1_sq;
    const SnapshotField diss = sigma == 0.0 ? &EnergySnapshot::diss0 : &EnergySnapshot::diss1;
    const SnapshotField pair = sigma == 0.0 ? &EnergySnapshot::pair0 : &EnergySnapshot::pair1;
    if (sigma != 0.0 && sigma != 1.0) throw ConfigError("history-norm inequality: sigma must be 0 or 1");
    auto r = pairwise(run, marks, "eta_norm", [&](std::size_t a, std::size_t b, double& l, double& rh) {
        l = run.value(norm, b) + run.integral(diss, a, b);
        rh = run.value(norm, a) + 2.0 * run.integral(pair, a, b);
    });
    r.parameters["sigma"] = sigma;
    r.finalize();
    return r;
}

InequalityReport check_phi_inequality(const EnergySeries& run,
                                      const std::vector<std::size_t>& marks, double varpi) {
    auto r = pairwise(run, marks, "phi", [&](std::size_t a, std::size_t b, double& l, double& rh) {
        l = run.value(&EnergySnapshot::Phi, b) +
            (2.0 - varpi) * run.integral(&EnergySnapshot::u1_sq, a, b);
        rh = run.value(&EnergySnapshot::Phi, a) + 2.0 * run.integral(&EnergySnapshot::v_sq, a, b) +
             run.integral(&EnergySnapshot::kappa_eta, a, b) / varpi -
             2.0 * run.integral(&EnergySnapshot::gamma_u, a, b);
    });
    r.parameters["varpi"] = varpi;
    r.finalize();
    return r;
}

namespace {

InequalityReport fitted_psi(const EnergySeries& run, const std::vector<std::size_t>& marks,
                            const std::string& id, double varpi, bool tailored) {
    const double sup_u = sup_field(run, &EnergySnapshot::u1_sq);
    const double q_factor = tailored ? (1.0 + sup_u) : 1.0;
    const double g_sq = run.constants().g_sq;
    std::vector<double> A, B, need, base;
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < marks.size(); ++i) {
        for (std::size_t j = i + 1; j < marks.size(); ++j) {
            const std::size_t a = marks[i], b = marks[j];
            const double lhs = run.value(&EnergySnapshot::Psi, b) + run.integral(&EnergySnapshot::v_sq, a, b);
            double known = run.value(&EnergySnapshot::Psi, a);
            if (tailored) {
                known += 2.0 * varpi * run.integral(&EnergySnapshot::u1_sq, a, b) +
                         varpi * g_sq * (run.t(b) - run.t(a));
            } else {
                known += varpi * run.integral(&EnergySnapshot::u1_sq, a, b) +
                         run.integral(&EnergySnapshot::psi_gamma, a, b);
            }
            A.push_back(run.integral(&EnergySnapshot::diss0, a, b));
            B.push_back(q_factor * run.integral(&EnergySnapshot::kappa_eta, a, b) / varpi);
            need.push_back(lhs - known);
            base.push_back(lhs);
            pairs.emplace_back(a, b);
        }
    }
    const auto [M, C] = fit_two_constants(A, B, need);
    InequalityReport r;
    r.id = id;
    r.parameters["varpi"] = varpi;
    for (std::size_t w = 0; w < pairs.size(); ++w) {
        WindowSlack ws;
        ws.a = run.t(pairs[w].first);
        ws.b = run.t(pairs[w].second);
        ws.lhs = base[w];
        ws.rhs = base[w] - need[w] + M * A[w] + C * B[w];
        ws.slack = ws.rhs - ws.lhs;
        r.windows.push_back(ws);
    }
    r.constants["M"] = M;
    r.constants[tailored ? "c" : "C"] = C;
    if (tailored) r.constants["sup_u1_sq"] = sup_u;
    r.finalize();
    return r;
}

}  // namespace

InequalityReport check_psi_inequality(const EnergySeries& run,
                                      const std::vector<std::size_t>& marks, double varpi) {
    return fitted_psi(run, marks, "psi", varpi, false);
}

InequalityReport check_psi_tailored(const EnergySeries& run,
                                    const std::vector<std::size_t>& marks, double varpi) {
    return fitted_psi(run, marks, "psi_tailored", varpi, true);
}

InequalityReport check_phi_tailored(const EnergySeries& run,
                                    const std::vector<std::size_t>& marks) {
    const double theta = run.constants().theta;
    const double c_f = run.constants().c_f;
    auto r = pairwise(run, marks, "phi_tailored", [&](std::size_t a, std::size_t b, double& l, double& rh) {
        l = run.value(&EnergySnapshot::Phi, b) +
            (1.0 + 0.5 * theta) * run.integral(&EnergySnapshot::u1_sq, a, b) +
            2.0 * run.integral(&EnergySnapshot::F1, a, b) -
            2.0 * run.integral(&EnergySnapshot::g_u, a, b);
        rh = run.value(&EnergySnapshot::Phi, a) + 2.0 * run.integral(&EnergySnapshot::v_sq, a, b) +
             2.0 / theta * run.integral(&EnergySnapshot::kappa_eta, a, b) +
             c_f * (run.t(b) - run.t(a));
    });
    r.parameters["theta"] = theta;
    r.parameters["c_f"] = c_f;
    r.finalize();
    return r;
}

InequalityReport check_lyapunov(const EnergySeries& run, const std::vector<std::size_t>& marks) {
    auto r = pairwise(run, marks, "lyapunov", [&](std::size_t a, std::size_t b, double& l, double& rh) {
        l = run.value(&EnergySnapshot::L, b) + run.integral(&EnergySnapshot::diss0, a, b);
        rh = run.value(&EnergySnapshot::L, a);
    });
    r.finalize();
    return r;
}

InequalityReport check_energy_identity(const EnergySeries& run,
                                       const std::vector<std::size_t>& marks) {
    double worst_rel = 0.0, worst_trap = 0.0;
    auto r = pairwise(run, marks, "energy_identity", [&](std::size_t a, std::size_t b, double& l, double& rh) {
        const double right = run.value(&EnergySnapshot::L_mech, a);
        const double trap = run.value(&EnergySnapshot::L_mech, b) +
                            2.0 * run.integral(&EnergySnapshot::pair0, a, b);
        worst_trap = std::max(worst_trap, std::abs(trap - right) /
                                              std::max({std::abs(trap), std::abs(right), 1e-300}));
        const double left = run.value(&EnergySnapshot::L_mech, b) +
                            2.0 * run.step_sum(&EnergySnapshot::memory_work_step, a, b);
        // Two-sided: lhs carries |residual|, rhs is zero.
        l = std::abs(left - right);
        rh = 0.0;
        const double scale = std::max({std::abs(left), std::abs(right), 1e-300});
        worst_rel = std::max(worst_rel, l / scale);
    });
    for (std::size_t i = 0, w = 0; i < marks.size(); ++i) {
        for (std::size_t j = i + 1; j < marks.size(); ++j, ++w) {
            r.windows[w].scale = std::max({std::abs(run.value(&EnergySnapshot::L_mech, marks[i])),
                                           std::abs(run.value(&EnergySnapshot::L_mech, marks[j])),
                                           2.0 * std::abs(run.step_sum(&EnergySnapshot::memory_work_step,
                                                                       marks[i], marks[j]))});
        }
    }
    r.constants["max_relative_residual"] = worst_rel;
    r.constants["max_relative_residual_trapezoid"] = worst_trap;
    r.finalize();
    return r;
}

InequalityReport check_dissipation_integral(const EnergySeries& run,
                                            const std::vector<std::size_t>& marks,
                                            const std::vector<double>& eps_list) {
    double Q = 0.0;
    for (double eps : eps_list) {
        for (std::size_t i = 0; i < marks.size(); ++i) {
            for (std::size_t j = i + 1; j < marks.size(); ++j) {
                const double lhs = run.integral(&EnergySnapshot::v_sq, marks[i], marks[j]);
                const double span = run.t(marks[j]) - run.t(marks[i]);
                Q = std::max(Q, eps * eps * (lhs - eps * span));
            }
        }
    }
    InequalityReport r;
    r.id = "dissipation_integral";
    r.parameters["eps"] = eps_list;
    for (double eps : eps_list) {
        for (std::size_t i = 0; i < marks.size(); ++i) {
            for (std::size_t j = i + 1; j < marks.size(); ++j) {
                WindowSlack w;
                w.a = run.t(marks[i]);
                w.b = run.t(marks[j]);
                w.lhs = run.integral(&EnergySnapshot::v_sq, marks[i], marks[j]);
                w.rhs = eps * (w.b - w.a) + Q / (eps * eps);
                w.slack = w.rhs - w.lhs;
                r.windows.push_back(w);
            }
        }
    }
    r.constants["Q"] = Q;
    r.finalize();
    return r;
}

InequalityReport check_lambda_inequality(const EnergySeries& run,
                                         const std::vector<std::size_t>& marks, double eps,
                                         double Q) {
    auto lambda_integral = [&](std::size_t a, std::size_t b) {
        return run.integral(&EnergySnapshot::L, a, b) +
               2.0 * eps * (run.integral(&EnergySnapshot::Phi, a, b) +
                            4.0 * run.integral(&EnergySnapshot::Psi, a, b)) +
               run.constants().Q0 * (run.t(b) - run.t(a));
    };
    double Q_min = 0.0;
    for (std::size_t i = 0; i < marks.size(); ++i) {
        for (std::size_t j = i + 1; j < marks.size(); ++j) {
            const std::size_t a = marks[i], b = marks[j];
            const double excess = lambda_functional(run, b, eps) + 2.0 * eps * lambda_integral(a, b) -
                                  lambda_functional(run, a, eps);
            Q_min = std::max(Q_min, excess / (eps * (run.t(b) - run.t(a))));
        }
    }
    auto r = pairwise(run, marks, "lambda", [&](std::size_t a, std::size_t b, double& l, double& rh) {
        l = lambda_functional(run, b, eps) + 2.0 * eps * lambda_integral(a, b);
        rh = lambda_functional(run, a, eps) + eps * Q * (run.t(b) - run.t(a));
    });
    r.parameters["eps"] = eps;
    r.constants["Q_checked"] = Q;
    r.constants["Q"] = Q_min;
    r.finalize();
    return r;
}

double lambda_forcing_constant(const EnergyConstants& c, double varpi) {
    return 2.0 * (c.Q0 + c.c_f + 4.0 * varpi * c.g_sq);
}

namespace {

InequalityReport pointwise(const EnergySeries& run, const std::string& id,
                           const std::function<void(const EnergySnapshot&, double&, double&)>& sides) {
    InequalityReport r;
    r.id = id;
    for (const auto& s : run.snapshots()) {
        WindowSlack w;
        w.a = w.b = s.t;
        sides(s, w.lhs, w.rhs);
        w.slack = w.rhs - w.lhs;
        r.windows.push_back(w);
    }
    r.finalize();
    return r;
}

}  // namespace

InequalityReport check_auxiliary_bound(const EnergySeries& run) {
    double kappa_inf = std::numeric_limits<double>::infinity();
    for (const auto& s : run.snapshots()) kappa_inf = std::min(kappa_inf, s.kappa);
    const double lam1 = run.constants().lambda1;
    const double C = kappa_inf > 0.0 ? (1.0 + 1.0 / std::sqrt(kappa_inf)) / std::sqrt(lam1)
                                     : 1.0 / std::sqrt(lam1);
    auto r = pointwise(run, "auxiliary_bound", [&](const EnergySnapshot& s, double& l, double& rh) {
        l = std::abs(s.Phi) + std::abs(s.Psi);
        rh = C * (s.u1_sq + s.v_sq + s.eta_sq);
    });
    r.constants["C_bound"] = C;
    r.constants["kappa_inf"] = kappa_inf;
    return r;
}

InequalityReport check_energy_sandwich(const EnergySeries& run) {
    const double theta = run.constants().theta;
    const double Q0 = run.constants().Q0;
    double envelope = 0.0, ratio = 0.0;
    auto r = pointwise(run, "energy_sandwich", [&](const EnergySnapshot& s, double& l, double& rh) {
        l = theta * s.E - Q0;
        rh = s.L;
        envelope = std::max(envelope, s.E);
        if (envelope > 0.0) ratio = std::max(ratio, s.L / envelope);
    });
    r.constants["Q0"] = Q0;
    r.constants["sup_L_over_E_envelope"] = ratio;
    return r;
}

InequalityReport check_lambda_sandwich(const EnergySeries& run, double eps) {
    const double theta = run.constants().theta;
    std::size_t i = 0;
    auto r = pointwise(run, "lambda_sandwich", [&](const EnergySnapshot& s, double& l, double& rh) {
        l = 0.5 * theta * s.E;
        rh = lambda_functional(run, i++, eps);
    });
    r.parameters["eps"] = eps;
    return r;
}

double choose_lambda_eps(const EnergySeries& run, double M, double q_R) {
    const double theta = run.constants().theta;
    const double Q0 = run.constants().Q0;
    auto admissible = [&](double eps) {
        for (const auto& s : run.snapshots()) {
            const double aux = s.Phi + 4.0 * s.Psi;
            const double floor = 1e-12 * std::max(1.0, s.E);
            if (theta * s.E - 4.0 * eps * aux < -floor) return false;
            if (s.L + 2.0 * eps * aux + Q0 - 0.5 * theta * s.E < -floor) return false;
            if ((1.0 - 8.0 * eps * M) * s.diss0 - eps * q_R * s.kappa_eta < -floor) return false;
        }
        return true;
    };
    if (admissible(1.0)) return 1.0;
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        (admissible(mid) ? lo : hi) = mid;
    }
    return lo;
}

bool InequalitySuite::all_pass() const {
    return std::all_of(reports.begin(), reports.end(),
                       [](const InequalityReport& r) { return r.verdict != "fail"; });
}

InequalitySuite run_inequality_suite(const EnergySeries& run, double window) {
    InequalitySuite suite;
    const auto marks = run.marks(window);
    auto& out = suite.reports;
    out.push_back(check_eta_norm_inequality(run, marks, 0.0));
    out.push_back(check_eta_norm_inequality(run, marks, 1.0));
    for (double w : {0.1, 0.5, 1.0}) out.push_back(check_phi_inequality(run, marks, w));
    for (double w : {0.1, 0.5, 1.0}) out.push_back(check_psi_inequality(run, marks, w));
    out.push_back(check_phi_tailored(run, marks));
    const double theta = run.constants().theta;
    const double varpi_t = theta / 32.0;
    const std::size_t tailored_index = out.size();
    out.push_back(check_psi_tailored(run, marks, varpi_t));
    out.push_back(check_lyapunov(run, marks));
    out.push_back(check_energy_identity(run, marks));
    out.push_back(check_dissipation_integral(run, marks, {0.1, 0.5, 1.0}));
    out.push_back(check_auxiliary_bound(run));
    out.push_back(check_energy_sandwich(run));
    const auto& tail = out[tailored_index];
    const double M = tail.constants.at("M");
    const double kappa_inf = out[tailored_index + 4].constants.at("kappa_inf");
    const double q_R = 2.0 * (2.0 / theta +
                              4.0 / varpi_t * tail.constants.at("c") * (1.0 + tail.constants.at("sup_u1_sq")) +
                              (kappa_inf > 0.0 ? (1.0 + 0.25 * theta) / kappa_inf : 0.0));
    suite.eps = choose_lambda_eps(run, M, q_R);
    const double Q = lambda_forcing_constant(run.constants(), varpi_t);
    out.push_back(check_lambda_inequality(run, marks, suite.eps, Q));
    out.back().constants["M_used"] = M;
    out.back().constants["q_R"] = q_R;
    suite.lemma_q = Q;
    out.push_back(check_lambda_sandwich(run, suite.eps));
    return suite;
}

void refine_suite(InequalitySuite& coarse, const InequalitySuite& fine) {
    apply_refinement(coarse.reports, fine.reports);
}

// ---------------------------------------------------------------------------

DecayFit fit_decay(const std::vector<double>& t, const std::vector<double>& E, double lo_rel,
                   double hi_rel) {
    DecayFit fit;
    if (t.empty() || t.size() != E.size()) {
        fit.diagnostic = "empty or mismatched series";
        return fit;
    }
    const double E0 = E.front();
    if (std::all_of(E.begin(), E.end(), [](double e) { return e == 0.0; })) {
        fit.ok = true;
        fit.trivial = true;
        fit.r_squared = 1.0;
        fit.diagnostic = "energy identically zero";
        return fit;
    }
    if (!(E0 > 0.0)) {
        fit.diagnostic = "initial energy is zero but the run is not";
        return fit;
    }
    std::size_t first = E.size(), last = E.size();
    for (std::size_t i = 0; i < E.size(); ++i) {
        if (first == E.size() && E[i] <= hi_rel * E0) first = i;
        if (first != E.size() && E[i] < lo_rel * E0) {
            last = i;
            break;
        }
    }
    if (first == E.size()) {
        fit.diagnostic = "energy never dropped below hi_rel * E0: not decaying";
        return fit;
    }
    if (last == E.size()) fit.diagnostic = "window truncated at the end of the run";
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    std::size_t n = 0;
    for (std::size_t i = first; i < last; ++i) {
        if (!(E[i] > 0.0)) continue;
        const double x = t[i], y = std::log(E[i]);
        sx += x; sy += y; sxx += x * x; sxy += x * y; syy += y * y;
        ++n;
    }
    fit.n_points = n;
    fit.t_lo = t[first];
    fit.t_hi = t[last - 1];
    if (n < 5) {
        fit.diagnostic = "fewer than 5 points in the decay window";
        return fit;
    }
    const double dn = static_cast<double>(n);
    const double vx = sxx - sx * sx / dn, vy = syy - sy * sy / dn, cxy = sxy - sx * sy / dn;
    const double slope = cxy / vx;
    fit.omega = -slope;
    fit.r_squared = vy > 0.0 ? cxy * cxy / (vx * vy) : 1.0;
    fit.ok = fit.omega > 0.0;
    if (!fit.ok) fit.diagnostic = "non-decaying data: fitted slope is nonnegative";
    return fit;
}

AbsorbingFit fit_absorbing(const std::vector<double>& t, const std::vector<double>& E,
                           double tail_fraction) {
    AbsorbingFit fit;
    if (t.empty()) return fit;
    const double t0 = t.front(), t1 = t.back();
    const double cut = t1 - tail_fraction * (t1 - t0);
    for (std::size_t i = 0; i < t.size(); ++i) {
        fit.sup_E = std::max(fit.sup_E, E[i]);
        if (t[i] >= cut) fit.R0 = std::max(fit.R0, E[i]);
    }
    const double level = fit.R0 + 1.0;
    std::size_t entry = t.size();
    for (std::size_t i = t.size(); i-- > 0;) {
        if (E[i] > level) break;
        entry = i;
    }
    fit.entered = entry < t.size();
    if (fit.entered) fit.entry_time = t[entry] - t0;
    return fit;
}

void write_energy_csv(std::ostream& os, const EnergySeries& run, double eps, std::size_t stride,
                      const Trajectory* modes) {
    if (stride == 0) stride = 1;
    std::unordered_map<double, std::size_t> mode_row;
    std::size_t n_modes = 0;
    if (modes && !modes->u.empty()) {
        n_modes = modes->u.front().size();
        for (std::size_t i = 0; i < modes->t.size(); ++i) mode_row[modes->t[i]] = i;
    }
    CsvWriter w(os);
    std::vector<std::string> header{"t", "E", "L", "Phi", "Psi", "Lambda", "u_H1", "v_L2", "eta_M"};
    for (std::size_t k = 0; k < n_modes; ++k) header.push_back("u_" + std::to_string(k + 1));
    w.row(header);
    const auto& s = run.snapshots();
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i % stride != 0 && i + 1 != s.size()) continue;
        std::vector<std::string> rec{
            format_number(s[i].t),   format_number(s[i].E),   format_number(s[i].L),
            format_number(s[i].Phi), format_number(s[i].Psi), format_number(lambda_functional(run, i, eps)),
            format_number(std::sqrt(s[i].u1_sq)), format_number(std::sqrt(s[i].v_sq)),
            format_number(std::sqrt(s[i].eta_sq))};
        if (n_modes > 0) {
            const auto it = mode_row.find(s[i].t);
            for (std::size_t k = 0; k < n_modes; ++k) {
                rec.push_back(it != mode_row.end() ? format_number(modes->u[it->second][k]) : "");
            }
        }
        w.row(rec);
    }
}

}  // namespace viscomem
