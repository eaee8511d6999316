#pragma once

/// @file experiments.hpp
/// @brief Experiment runners shared by the command-line tool and the
/// acceptance suite: reference runs with the inequality battery, decay and
/// absorbing bundles, attractor probes, the Kelvin-Voigt comparison and the
/// Gronwall pipeline.

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "viscomem/attractor.hpp"
#include "viscomem/config.hpp"
#include "viscomem/energy.hpp"
#include "viscomem/gronwall.hpp"

namespace viscomem {

/// One trajectory from the configured initial datum over [tau, T].
struct ReferenceRun {
    double dt = 0.0;
    std::size_t J = 0;
    Trajectory traj;
    EnergySeries series;
    double sup_E = 0.0;
    /// Cross-form residual at the final time (zero initial history only).
    std::optional<FormResidual> form;
    double wall_seconds = 0.0;
};
ReferenceRun reference_run(const ExperimentConfig& c, double dt, std::size_t J);

struct SimulateResult {
    ReferenceRun coarse;
    std::optional<ReferenceRun> fine;  ///< dt / 2 and 2 J, when energy.refine
    InequalitySuite suite;
    double form_bound = 0.0;  ///< 5 (dt + 1/J) for the cross-form residual
    /// Every inequality report passes (the exit status of the simulate command).
    bool all_pass() const { return suite.all_pass(); }
};
SimulateResult run_simulate(const ExperimentConfig& c);
nlohmann::json to_json(const SimulateResult& r);

struct DecayMember {
    double R = 0.0;
    std::vector<double> t, E;
    DecayFit fit;
    AbsorbingFit absorbing;
    double entry_radius = 0.0;  ///< sqrt(2 (R0 + 1))
};

struct DecayBundle {
    bool forced = false;  ///< g != 0
    std::vector<DecayMember> members;
    /// (max - min) / min of omega (unforced) or R0 (forced).
    double spread = 0.0;
    double spread_limit = 0.0;
    bool fits_ok = false;           ///< every unforced fit has omega > 0 and R^2 > 0.99
    bool entries_increasing = false;  ///< forced: finite entry times nondecreasing in R, last > first
    bool pass() const;
};
/// Runs every radius of decay.radii over [tau, tau + decay.T] on `threads` workers.
DecayBundle run_decay(const ExperimentConfig& c);
nlohmann::json to_json(const DecayBundle& b);

struct AttractorExperiment {
    PullbackResult pullback;
    InvarianceProbe invariance;
    bool bounded = false;  ///< finite sup of the strong norms
    bool pass() const { return pullback.monotone && invariance.ok && bounded; }
};
AttractorExperiment run_attractor(const ExperimentConfig& c);
nlohmann::json to_json(const AttractorExperiment& r);

KvCompare run_kv_compare(const ExperimentConfig& c);

/// Lambda of a reference run sampled every `stride` steps (at most max_samples
/// samples), with q1 = 0, q2 = eps Q, c1 = 0, c2 = eps Q.
GronwallInstance gronwall_from_run(const ReferenceRun& run, const InequalitySuite& suite,
                                   std::size_t max_samples = 2000);

struct GronwallExperiment {
    GronwallInstance instance;
    std::string source;  ///< "file" or "run"
    HypothesisReport hypothesis;
    ConclusionReport conclusion;
    bool pass() const { return hypothesis.holds() && conclusion.holds(); }
};
/// Loads the configured instance, or builds one from a reference run.
GronwallExperiment run_gronwall(const ExperimentConfig& c);
nlohmann::json to_json(const GronwallExperiment& r);

}  // namespace viscomem
