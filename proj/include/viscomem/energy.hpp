#pragma once

/// @file energy.hpp
/// @brief Energy functionals along trajectories, integral-inequality checks
/// with refinement-based tolerances, and decay/absorbing-set fits.

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "viscomem/solver.hpp"

namespace viscomem {

/// Pointwise functionals at one time. Norms follow |w|_sigma^2 = sum lambda^sigma w_k^2.
struct EnergySnapshot {
    double t = 0.0;
    double E = 0.0;          ///< (|u|_1^2 + |v|^2 + |eta|_M^2) / 2
    double L_mech = 0.0;     ///< |u|_1^2 + |v|^2 + 2<F(u),1> - 2<g,u>
    double L = 0.0;          ///< L_mech + |eta|_M^2
    double Phi = 0.0;        ///< 2 <u, v>
    double Psi = 0.0;        ///< -(2/kappa) int mu <eta(s), v> ds
    double u1_sq = 0.0;      ///< |u|_1^2
    double u2_sq = 0.0;      ///< |u|_2^2
    double v_sq = 0.0;       ///< |v|^2
    double v1_sq = 0.0;      ///< |v|_1^2
    double eta_sq = 0.0;     ///< |eta|_{M_t}^2
    double eta1_sq = 0.0;    ///< |eta|_{M_t^1}^2
    double kappa = 0.0;      ///< discrete mass sum_j w_j mu_t(s_j)
    double kappa_eta = 0.0;  ///< kappa |eta|_M^2
    double diss0 = 0.0;      ///< -int (d_t mu + d_s mu) |eta|_1^2 ds
    double diss1 = 0.0;      ///< same with |eta|_2^2
    double pair0 = 0.0;      ///< <v, eta>_{M_t}
    double pair1 = 0.0;      ///< <v, eta>_{M_t^1}
    double gamma_u = 0.0;    ///< <f(u) - g, u>
    double F1 = 0.0;         ///< <F(u), 1>
    double g_u = 0.0;        ///< <g, u>
    double psi_gamma = 0.0;  ///< (2/kappa) int mu <eta(s), f(u) - g> ds
    /// <u^{n+1} - u^n, eta^{n+1}>_{M_{t^{n+1}}} for the step ending here (0 at
    /// the first snapshot); summed over steps it is the step-consistent
    /// quadrature of int <v, eta>_M.
    double memory_work_step = 0.0;
};

using SnapshotField = double EnergySnapshot::*;

/// Run-level constants needed by the checks.
struct EnergyConstants {
    double theta = 1.0;
    double c_f = 0.0;
    double lambda1 = 0.0;
    double g_sq = 0.0;        ///< |g|^2
    double g_minus1_sq = 0.0; ///< |g|_{-1}^2
    double Q0 = 0.0;          ///< c_f + (2/theta)|g|_{-1}^2, zero iff g = 0 and c_f = 0
    double delta = 0.0;       ///< dissipation rate from the kernel certificate
};

/// Collects snapshots at every step (integrals are trapezoidal over steps).
class EnergyRecorder {
public:
    explicit EnergyRecorder(const Model& model, double delta = 0.0);

    void record(const SimState& s, std::span<const double> weights);
    void record(const SimState& s);
    /// Observer recording the post-step state.
    StepObserver observer();

    const std::vector<EnergySnapshot>& snapshots() const { return snaps_; }
    const EnergyConstants& constants() const { return consts_; }

private:
    const Model* model_;
    EnergyConstants consts_;
    std::vector<EnergySnapshot> snaps_;
};

EnergySnapshot snapshot(const SimState& s, const Model& model, std::span<const double> weights);

/// A completed run: snapshots plus time integrals on demand.
class EnergySeries {
public:
    EnergySeries() = default;
    EnergySeries(std::vector<EnergySnapshot> snaps, EnergyConstants consts);

    const std::vector<EnergySnapshot>& snapshots() const { return snaps_; }
    const EnergyConstants& constants() const { return consts_; }
    std::size_t size() const { return snaps_.size(); }
    double t(std::size_t i) const { return snaps_[i].t; }
    double value(SnapshotField f, std::size_t i) const { return snaps_[i].*f; }
    /// Trapezoidal integral of the field between snapshot indices.
    double integral(SnapshotField f, std::size_t a, std::size_t b) const;
    /// Sum of the field over snapshots a+1 .. b.
    double step_sum(SnapshotField f, std::size_t a, std::size_t b) const;
    /// Indices closest to tau + k * spacing for k = 0, 1, ...
    std::vector<std::size_t> marks(double spacing) const;

private:
    std::vector<EnergySnapshot> snaps_;
    EnergyConstants consts_;
    struct Sums {
        std::vector<double> forward, backward;  ///< running sums from the first / to the last snapshot
        double between(std::size_t a, std::size_t b) const;
    };
    mutable std::map<std::ptrdiff_t, Sums> cumulative_;
    const Sums& cumulative(SnapshotField f, bool trapezoid) const;
};

/// Lambda = L + 2 eps (Phi + 4 Psi) + Q0 at snapshot i.
double lambda_functional(const EnergySeries& run, std::size_t i, double eps);

/// Result of checking one inequality "lhs <= rhs" on all window pairs.
struct WindowSlack {
    double a = 0.0, b = 0.0;
    double lhs = 0.0, rhs = 0.0;
    double slack = 0.0;  ///< rhs - lhs
    double tolerance = 0.0;
    double scale = 0.0;  ///< size of the terms for the round-off floor (at least max |lhs|, |rhs|)
};

struct InequalityReport {
    std::string id;
    nlohmann::json parameters = nlohmann::json::object();
    std::vector<WindowSlack> windows;  ///< all pairs a < b of window marks
    double worst_slack = 0.0;
    double tolerance = 0.0;            ///< tolerance of the window with the smallest margin
    bool refined = false;              ///< tolerances came from a refined run
    std::map<std::string, double> constants;
    std::string verdict;               ///< "pass", "pass_within_tolerance", "fail"
    std::string note;

    /// pass iff slack >= -tolerance on every window.
    void finalize();
};

/// Sets the tolerance of each coarse report from the matching fine report:
/// tol = 3 max_w |slack_coarse(w) - slack_fine(w)|, with a per-window round-off floor.
void apply_refinement(std::vector<InequalityReport>& coarse,
                      const std::vector<InequalityReport>& fine);

nlohmann::json to_json(const InequalityReport& r);
/// One row per report per consecutive window, plus the full-run window.
void write_inequality_csv(std::ostream& os, const std::vector<InequalityReport>& reports);

// Individual checks; `marks` are snapshot indices of the window endpoints.
InequalityReport check_eta_norm_inequality(const EnergySeries& run,
                                           const std::vector<std::size_t>& marks, double sigma);
InequalityReport check_phi_inequality(const EnergySeries& run,
                                      const std::vector<std::size_t>& marks, double varpi);
/// Minimal (M, C) with M + C smallest over a log grid of M values.
InequalityReport check_psi_inequality(const EnergySeries& run,
                                      const std::vector<std::size_t>& marks, double varpi);
/// The tailored Phi inequality with theta and c_f of the nonlinearity.
InequalityReport check_phi_tailored(const EnergySeries& run,
                                    const std::vector<std::size_t>& marks);
/// The tailored Psi inequality with Q(|u|_1) = c (1 + sup |u|_1^2); reports
/// minimal (M, c).
InequalityReport check_psi_tailored(const EnergySeries& run,
                                    const std::vector<std::size_t>& marks, double varpi);
/// L(b) + int D_0 <= L(a) with L including the history norm.
InequalityReport check_lyapunov(const EnergySeries& run, const std::vector<std::size_t>& marks);
/// |L_mech(b) + 2 int <v, eta>_M - L_mech(a)| as a two-sided check (slack = -|residual|),
/// with the integral taken from memory_work_step; the trapezoidal value is reported
/// as constant "max_relative_residual_trapezoid".
InequalityReport check_energy_identity(const EnergySeries& run,
                                       const std::vector<std::size_t>& marks);
/// int |v|^2 <= eps (b - a) + Q / eps^2: minimal Q over the windows and eps list.
InequalityReport check_dissipation_integral(const EnergySeries& run,
                                            const std::vector<std::size_t>& marks,
                                            const std::vector<double>& eps_list);
/// Lambda(b) + 2 eps int Lambda <= Lambda(a) + eps Q (b - a) checked with the
/// supplied Q; the minimal Q over the windows is reported as constant "Q".
InequalityReport check_lambda_inequality(const EnergySeries& run,
                                         const std::vector<std::size_t>& marks, double eps,
                                         double Q);
/// Q = 2 (Q0 + c_f + 4 varpi |g|^2), zero when g = 0 and c_f = 0.
double lambda_forcing_constant(const EnergyConstants& c, double varpi);
/// |Phi| + |Psi| <= C (|u|_1^2 + |v|^2 + |eta|_M^2) with
/// C = (1 + 1/sqrt(inf kappa)) / sqrt(lambda_1), checked at every snapshot.
InequalityReport check_auxiliary_bound(const EnergySeries& run);
/// theta E - Q0 <= L at every snapshot; reports sup L / sup-envelope of E.
InequalityReport check_energy_sandwich(const EnergySeries& run);
/// (theta / 2) E <= Lambda at every snapshot.
InequalityReport check_lambda_sandwich(const EnergySeries& run, double eps);

/// Largest eps in (0, 1] (bisection) such that at every snapshot
/// theta E - 4 eps (Phi + 4 Psi) >= 0, (theta/2) E <= Lambda, and
/// (1 - 8 eps M) D_0 >= eps q_R kappa |eta|_M^2. The suite takes M from the
/// tailored Psi fit and q_R = 2 (2/theta + (4/varpi) c (1 + sup |u|_1^2)
/// + (1 + theta/4) / inf kappa) with varpi = theta / 32.
double choose_lambda_eps(const EnergySeries& run, double M, double q_R);

/// Full battery of checks for one run with the parameter sweeps used by the tools:
/// sigma in {0, 1}, varpi in {0.1, 0.5, 1}, eps in {0.1, 0.5, 1}.
struct InequalitySuite {
    std::vector<InequalityReport> reports;
    double eps = 0.0;
    double lemma_q = 0.0;
    bool all_pass() const;
};
InequalitySuite run_inequality_suite(const EnergySeries& run, double window);

/// Uses the fine suite for tolerances and the 2x stability of fitted constants.
void refine_suite(InequalitySuite& coarse, const InequalitySuite& fine);

// ---------------------------------------------------------------------------

struct DecayFit {
    double omega = 0.0;      ///< E ~ exp(-omega t)
    double r_squared = 0.0;
    double t_lo = 0.0, t_hi = 0.0;
    std::size_t n_points = 0;
    bool ok = false;
    bool trivial = false;    ///< E identically zero
    std::string diagnostic;
};

/// Log-linear least squares of E over the window where E lies in
/// [lo_rel E_0, hi_rel E_0].
DecayFit fit_decay(const std::vector<double>& t, const std::vector<double>& E,
                   double lo_rel = 1e-8, double hi_rel = 1e-1);

struct AbsorbingFit {
    double R0 = 0.0;          ///< tail level: max E over the final tail_fraction of the run
    double entry_time = 0.0;  ///< first time after which E <= R0 + 1 (elapsed from tau)
    bool entered = false;
    double sup_E = 0.0;
};
AbsorbingFit fit_absorbing(const std::vector<double>& t, const std::vector<double>& E,
                           double tail_fraction = 0.1);

/// Trajectory CSV: t,E,L,Phi,Psi,Lambda,u_H1,v_L2,eta_M and optional u_1..u_N.
void write_energy_csv(std::ostream& os, const EnergySeries& run, double eps,
                      std::size_t stride = 1, const Trajectory* modes = nullptr);

}  // namespace viscomem
