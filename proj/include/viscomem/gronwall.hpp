#pragma once

/// @file gronwall.hpp
/// @brief Integral-form Gronwall lemma: hypothesis verification on sampled
/// functions and checking of the resulting exponential bound.

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

namespace viscomem {

/// Samples of Lambda, q1, q2 on the uniform grid t_i = tau + i dt.
struct GronwallInstance {
    double tau = 0.0;
    double dt = 0.0;
    std::vector<double> Lambda, q1, q2;
    double eps = 0.0;
    double c1 = 0.0;
    double c2 = 0.0;

    std::size_t size() const { return Lambda.size(); }
    double t(std::size_t i) const { return tau + static_cast<double>(i) * dt; }
    /// Throws std::invalid_argument on misaligned grids, negative q, or bad parameters.
    void validate() const;
};

struct HypothesisReport {
    /// min over checked pairs of
    /// Lambda(a) + int q1 Lambda + int q2 - Lambda(b) - 2 eps int Lambda.
    double worst_slack = 0.0;
    double worst_a = 0.0, worst_b = 0.0;
    /// Quadrature tolerance at the worst pair: 3x the trapezoid error estimate.
    double tolerance = 0.0;
    /// min over pairs of eps (b - a) + c1 - int q1.
    double q1_budget_slack = 0.0;
    /// sup over t of the mass of q2 on [t, t + 1] (q2 = 0 past the last sample).
    double q2_window_mass = 0.0;
    std::size_t pairs_checked = 0;
    bool subsampled = false;
    bool integral_ok = false;
    bool q1_ok = false;
    bool q2_ok = false;
    bool holds() const { return integral_ok && q1_ok && q2_ok; }
    std::vector<std::string> failures;
};

/// All pairs a < b for n <= max_full samples; beyond that all pairs of an
/// evenly spaced subsample of max_full indices plus every adjacent pair.
HypothesisReport verify_hypothesis(const GronwallInstance& inst, std::size_t max_full = 2000);

/// e^{c1} |Lambda(tau)| e^{-eps (t - tau)} + c2 e^{c1} e^{eps} / (1 - e^{-eps}).
double gronwall_bound(const GronwallInstance& inst, double t);

struct ConclusionReport {
    bool refused = false;  ///< hypothesis failed, so no assertion is made
    std::string reason;
    double max_ratio = 0.0;  ///< max over samples of Lambda(t) / bound(t)
    double worst_t = 0.0;
    std::size_t violations = 0;  ///< samples with Lambda(t) > bound(t)
    bool holds() const { return !refused && violations == 0; }
};

/// Checks the bound at every sample when the hypothesis holds.
ConclusionReport check_conclusion(const GronwallInstance& inst, const HypothesisReport& hyp);
ConclusionReport check_conclusion(const GronwallInstance& inst);

nlohmann::json to_json(const HypothesisReport& r);
nlohmann::json to_json(const ConclusionReport& r);

/// CSV with header t,Lambda,q1,q2 and a JSON sidecar {tau, dt, eps, c1, c2}.
void write_instance(std::ostream& csv, std::ostream& sidecar, const GronwallInstance& inst);
/// Reads the pair written by write_instance; the grid must be uniform.
GronwallInstance read_instance(std::istream& csv, std::istream& sidecar);
GronwallInstance load_instance(const std::string& csv_path, const std::string& sidecar_path);

/// Smallest c1 with int_a^b q1 <= eps (b - a) + c1 on all sample pairs.
double minimal_c1(const std::vector<double>& q1, double dt, double eps);
/// sup_t int_t^{t+1} q2 with trapezoidal integrals, q2 = 0 past the end.
double window_mass(const std::vector<double>& q2, double dt);

}  // namespace viscomem
