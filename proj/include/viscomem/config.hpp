#pragma once

/// @file config.hpp
/// @brief Experiment configuration: JSON loading with every default resolved,
/// validation against module preconditions, and the effective-config echo.

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "viscomem/attractor.hpp"
#include "viscomem/solver.hpp"

namespace viscomem {

struct BasisConfig {
    double length = 1.0;
    std::size_t modes = 16;
    std::size_t points = 0;  ///< 0 selects 2N

    bool operator==(const BasisConfig&) const = default;
};

struct NonlinearityConfig {
    double cubic = 1.0;
    double linear = 0.0;
    /// Resolved from the coefficients unless given explicitly.
    double theta = 1.0;
    double c_f = 0.0;

    bool operator==(const NonlinearityConfig&) const = default;
};

struct ForcingConfig {
    std::string type = "zero";  ///< "zero" | "modal"
    std::vector<double> coefficients;

    bool operator==(const ForcingConfig&) const = default;
};

struct InitialConfig {
    std::string type = "random";  ///< "random" (shape from the seed) | "zero" | "modal"
    double R = 10.0;              ///< energy (|u|_1^2 + |v|^2) / 2 for "random"
    std::vector<double> u, v;

    bool operator==(const InitialConfig&) const = default;
};

struct RunConfig {
    double dt = 0.005;
    double tau = 0.0;
    double T = 10.0;  ///< end time
    std::size_t output_stride = 10;
    std::string eta_mode = "transport";
    std::size_t cross_check_every = 50;
    std::size_t transport_rebase_every = 20;

    bool operator==(const RunConfig&) const = default;
};

struct GridConfig {
    std::size_t J = 400;
    double first_factor = 1e-3;
    double tail_rel = 1e-8;

    bool operator==(const GridConfig&) const = default;
};

struct EnergyConfig {
    double window = 1.0;  ///< spacing of the window marks
    bool refine = true;   ///< rerun at dt/2, 2J for tolerances

    bool operator==(const EnergyConfig&) const = default;
};

struct DecayConfig {
    std::vector<double> radii{1.0, 10.0, 100.0};
    double T = 40.0;
    double lo_rel = 1e-8, hi_rel = 1e-1;
    double omega_spread = 0.2;  ///< (max - min) / min allowed across radii
    double R0_spread = 0.2;     ///< same for the absorbing level

    bool operator==(const DecayConfig&) const = default;
};

struct AttractorConfig {
    std::size_t members = 64;
    double R = 10.0;
    double t = 0.0;
    std::vector<double> offsets{10.0, 20.0, 40.0, 80.0};  ///< tau = t - offset
    double invariance_offset = 10.0;                    ///< probe from t - offset to t
    std::size_t probe_stride = 10;

    bool operator==(const AttractorConfig&) const = default;
};

struct KvConfig {
    std::vector<double> windows{20.0, 40.0, 80.0};
    double pullback_length = 80.0;
    double burn_in = 80.0;

    bool operator==(const KvConfig&) const = default;
};

struct GronwallConfig {
    std::string instance_csv;   ///< empty: instance built from a reference run
    std::string instance_json;

    bool operator==(const GronwallConfig&) const = default;
};

struct ExperimentConfig {
    BasisConfig basis;
    nlohmann::json kernel = {{"family", "rescaled"}, {"c", 0.4}, {"increasing", false}};
    NonlinearityConfig nonlinearity;
    ForcingConfig forcing;
    InitialConfig initial;
    RunConfig run;
    GridConfig grid;
    EnergyConfig energy;
    DecayConfig decay;
    AttractorConfig attractor;
    KvConfig kv;
    GronwallConfig gronwall;
    std::uint64_t seed = 42;
    std::size_t threads = 1;

    bool operator==(const ExperimentConfig&) const = default;
};

/// Parses and validates; unknown keys and violated preconditions raise
/// ConfigError naming the offending field. Relative instance paths resolve
/// against base_dir.
ExperimentConfig parse_config(const nlohmann::json& j, const std::string& base_dir = "");
ExperimentConfig load_config(const std::string& path);
/// Effective configuration with every default resolved; parse_config of the
/// result reproduces the same ExperimentConfig.
nlohmann::json to_json(const ExperimentConfig& c);

SpectralBasis make_basis(const ExperimentConfig& c);
Nonlinearity make_nonlinearity(const ExperimentConfig& c, const SpectralBasis& basis);
ModalField make_forcing(const ExperimentConfig& c, const SpectralBasis& basis);
SolverConfig make_solver_config(const ExperimentConfig& c, const SpectralBasis& basis);
/// Model whose s-grid covers kernels over [t_lo, t_hi]; validated.
Model make_model(const ExperimentConfig& c, double t_lo, double t_hi);
Model make_model(const ExperimentConfig& c, double t_lo, double t_hi, double dt, std::size_t J);
/// Initial datum of the single-trajectory runs at energy R.
InitialDatum make_initial(const ExperimentConfig& c, const SpectralBasis& basis, double R);

}  // namespace viscomem
