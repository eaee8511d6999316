#pragma once

/// @file attractor.hpp
/// @brief Ensemble estimates of pullback attractor sections, Hausdorff
/// semidistances, and the comparison with the Kelvin-Voigt attractor.

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "viscomem/solver.hpp"

namespace viscomem {

struct InitialDatum {
    ModalField u, v;
};

/// Shape with u_k ~ N(0,1)/k^3 and v_k ~ N(0,1)/k^2 (std::mt19937_64).
InitialDatum random_shape(const SpectralBasis& basis, std::mt19937_64& rng);
/// The datum rescaled so that (|u|_1^2 + |v|^2) / 2 = R.
InitialDatum scale_to_energy(const InitialDatum& d, double R, const SpectralBasis& basis);
/// n members of random shape with energy R rho^2, rho uniform in (0, 1]
/// (rho = 1 when on_sphere).
std::vector<InitialDatum> random_ball(std::size_t n, double R, const SpectralBasis& basis,
                                      std::uint64_t seed, bool on_sphere = false);

enum class CloudNorm { energy, strong };  ///< H^1 x H^0 and H^2 x H^1
std::string to_string(CloudNorm n);

/// Projections (u, v) of ensemble members at one time.
struct PointCloud {
    double t = 0.0;
    CloudNorm norm = CloudNorm::energy;
    std::vector<ModalField> u, v;
    std::size_t size() const { return u.size(); }
    bool empty() const { return u.empty(); }
};

double point_distance(const ModalField& u1, const ModalField& v1, const ModalField& u2,
                      const ModalField& v2, const SpectralBasis& basis, CloudNorm norm);
/// sup_{b in B} inf_{c in C} |b - c| in the shared norm tag. Throws
/// std::invalid_argument on an empty cloud or mismatched tags.
double hausdorff_semidist(const PointCloud& B, const PointCloud& C, const SpectralBasis& basis);
/// max of both semidistances.
double hausdorff_distance(const PointCloud& B, const PointCloud& C, const SpectralBasis& basis);
PointCloud retag(PointCloud c, CloudNorm norm);
double cloud_diameter(const PointCloud& c, const SpectralBasis& basis);
/// Largest member norm (semidistance to the origin).
double cloud_radius(const PointCloud& c, const SpectralBasis& basis);

/// Final states of independently evolved members; failed members keep their
/// last state and are flagged.
struct EnsembleRun {
    std::vector<SimState> states;
    std::vector<bool> failed;
    std::vector<std::string> errors;
    /// sup over members and sampled times of |u|_2^2 + |v|_1^2 + |eta|_{M^1}^2.
    double sup_strong_sq = 0.0;
    std::size_t n_failed() const;
};

/// Evolves every state to t on `threads` workers; strong norms are sampled
/// every probe_stride steps (0 disables).
EnsembleRun evolve_states(const Model& model, std::vector<SimState> states, double t,
                          std::size_t threads = 1, std::size_t probe_stride = 0);
/// Members start at tau with zero history.
EnsembleRun evolve_ensemble(const Model& model, const std::vector<InitialDatum>& ensemble,
                            double tau, double t, std::size_t threads = 1,
                            std::size_t probe_stride = 0);
/// Cloud of the non-failed members.
PointCloud project(const EnsembleRun& run, double t, CloudNorm norm = CloudNorm::energy);

/// Round-off level below which semidistances are not resolved.
double noise_floor(double scale);

struct PullbackResult {
    double t = 0.0;
    std::vector<double> taus;
    std::vector<PointCloud> clouds;
    /// dist(cloud(tau_{n+1}), cloud(tau_n)), n = 0 .. size - 2.
    std::vector<double> consecutive;
    std::vector<double> radius;  ///< cloud_radius per tau
    std::vector<std::size_t> failed;  ///< failed members per tau
    double sup_strong_sq = 0.0;
    double floor = 0.0;
    /// consecutive[n+1] <= consecutive[n] whenever consecutive[n] is above the floor.
    bool monotone = false;
};

/// Requires taus strictly decreasing and below t; evolves the ensemble from
/// each tau to t. Model must cover [min tau, t].
PullbackResult pullback_section(const Model& model, double t, const std::vector<double>& taus,
                                const std::vector<InitialDatum>& ensemble, std::size_t threads = 1,
                                std::size_t probe_stride = 0);

/// Forward image of the section estimated at tau versus the section estimated
/// directly at t, both from pullback length L.
struct InvarianceProbe {
    double tau = 0.0, t = 0.0, length = 0.0;
    double error = 0.0;       ///< Hausdorff distance of the two clouds at t
    double resolution = 0.0;  ///< distance between the t-sections from lengths L/2 and L
    double floor = 0.0;
    bool ok = false;          ///< error <= 2 max(resolution, floor)
};
InvarianceProbe invariance_probe(const Model& model, double tau, double t, double length,
                                 const std::vector<InitialDatum>& ensemble, std::size_t threads = 1);

struct KvEstimate {
    PointCloud cloud;
    std::vector<double> t, diameter;
    bool contracting = false;  ///< final diameter <= diameter at half burn-in, or below floor
    std::string warning;
};
/// Evolves the Kelvin-Voigt equation with damping m from each member for burn_in.
KvEstimate kv_attractor_estimate(const SpectralBasis& basis, const Nonlinearity& f,
                                 const ModalField& g, double m,
                                 const std::vector<InitialDatum>& ensemble, double burn_in,
                                 double dt, std::size_t threads = 1, std::size_t n_samples = 20);

struct KvCompareConfig {
    std::vector<double> windows{20.0, 40.0, 80.0};
    double pullback_length = 80.0;
    double burn_in = 80.0;
    std::size_t J = 200;
    std::vector<double> certification_times{1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1024};
};

struct KvCompareRow {
    double T = 0.0;
    double dist_energy = 0.0;  ///< semidistance of the memory section to the KV estimate
    double dist_strong = 0.0;
    double memory_radius = 0.0;
    std::size_t failed = 0;
};

struct KvCompare {
    bool refused = false;
    std::string reason;
    double m = 0.0;
    nlohmann::json certificate;
    std::vector<KvCompareRow> rows;
    double kv_diameter = 0.0;
    bool kv_contracting = false;
    double floor = 0.0;
    /// dist_energy nonincreasing over the windows up to the floor.
    bool nonincreasing = false;
};
/// Refuses kernels whose k_t -> m delta_0 convergence is not certified.
KvCompare kv_limit_compare(const KernelPtr& kernel, const SpectralBasis& basis,
                           const SolverConfig& cfg, const std::vector<InitialDatum>& ensemble,
                           const KvCompareConfig& kc, std::size_t threads = 1);

nlohmann::json to_json(const PullbackResult& r);
nlohmann::json to_json(const InvarianceProbe& r);
nlohmann::json to_json(const KvCompare& r);

/// One row per member: member,t,u_1..u_N,v_1..v_N.
void write_cloud_csv(std::ostream& os, const PointCloud& c);

}  // namespace viscomem
