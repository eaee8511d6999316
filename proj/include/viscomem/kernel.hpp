#pragma once

/// @file kernel.hpp
/// @brief Time-dependent memory kernels mu_t(s), their integrated kernels
/// k_t(s), and a sampled certifier for the structural axioms M1-M8.

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace viscomem {

/// Closed-form memory kernel family (t, s) -> mu_t(s), s > 0.
class KernelFamily {
public:
    virtual ~KernelFamily() = default;

    virtual std::string name() const = 0;
    virtual double mu(double t, double s) const = 0;
    virtual double dmu_ds(double t, double s) const = 0;
    virtual double dmu_dt(double t, double s) const = 0;
    /// Total mass kappa(t) = int_0^inf mu_t(s) ds.
    virtual double kappa(double t) const = 0;
    /// Integrated kernel k_t(s) = int_s^inf mu_t(y) dy.
    virtual double k(double t, double s) const = 0;
    /// Length in s over which mu_t varies (used to size s-grids).
    virtual double scale(double t) const = 0;
    /// m in k_t -> m delta_0 when the family is built to converge, else empty.
    virtual std::optional<double> limit_mass() const { return std::nullopt; }
    virtual nlohmann::json parameters() const = 0;
    /// Family-specific sufficient conditions, one entry per condition with
    /// "id", "holds" and witness values.
    virtual nlohmann::json family_conditions(double t_min, double t_max) const;

    /// Smallest s with k_t(s) <= rel * k_t(0), found by doubling + bisection.
    double tail_point(double t, double rel) const;
};

using KernelPtr = std::shared_ptr<const KernelFamily>;

/// mu_t(s) = eps(t)^-2 exp(-s / eps(t)) with eps(t) = c [pi/2 - arctan t]
/// (or c [pi/2 + arctan t] for the increasing variant used as a mutation).
class RescaledKernel final : public KernelFamily {
public:
    explicit RescaledKernel(double c = 0.4, bool increasing = false);

    std::string name() const override { return increasing_ ? "rescaled_increasing" : "rescaled"; }
    double mu(double t, double s) const override;
    double dmu_ds(double t, double s) const override;
    double dmu_dt(double t, double s) const override;
    double kappa(double t) const override { return 1.0 / epsilon(t); }
    double k(double t, double s) const override;
    double scale(double t) const override { return epsilon(t); }
    std::optional<double> limit_mass() const override;
    nlohmann::json parameters() const override;
    nlohmann::json family_conditions(double t_min, double t_max) const override;

    double epsilon(double t) const;
    double epsilon_dot(double t) const;
    double c() const { return c_; }
    bool increasing() const { return increasing_; }

private:
    double c_;
    bool increasing_;
};

/// mu_t(s) = (rho gamma)^-1 K0(t) K0(t-s) exp(-gamma^-1 int_0^s K0(t-y) dy)
/// with K0(t) = 1 + exp(alpha t).
class RheologicalKernel final : public KernelFamily {
public:
    RheologicalKernel(double rho = 1.0, double gamma = 1.0, double alpha = 0.5);

    std::string name() const override { return "rheological"; }
    double mu(double t, double s) const override;
    double dmu_ds(double t, double s) const override;
    double dmu_dt(double t, double s) const override;
    double kappa(double t) const override { return stiffness(t) / rho_; }
    double k(double t, double s) const override;
    double scale(double t) const override { return gamma_ / stiffness(t); }
    std::optional<double> limit_mass() const override { return gamma_ / rho_; }
    nlohmann::json parameters() const override;
    nlohmann::json family_conditions(double t_min, double t_max) const override;

    double stiffness(double t) const;
    double stiffness_dot(double t) const;
    /// int_0^s K0(t - y) dy.
    double stiffness_integral(double t, double s) const;
    /// rho gamma K0'(t) + (delta gamma - rho) K0(t)^2; M4 holds with delta iff <= 0.
    double m4_bracket(double t, double delta) const;
    /// Constants of the growth condition: beta = inf K0, M = sup K0'/K0.
    double beta() const { return 1.0; }
    double growth_bound() const { return alpha_; }

    double rho() const { return rho_; }
    double gamma() const { return gamma_; }
    double alpha() const { return alpha_; }

private:
    double rho_, gamma_, alpha_;
};

/// Time-independent mu(s) = mass * delta0 * exp(-delta0 s). mass = 0 gives
/// the zero kernel.
class ConstantKernel final : public KernelFamily {
public:
    explicit ConstantKernel(double delta0 = 1.0, double mass = 1.0);

    std::string name() const override { return mass_ == 0.0 ? "zero" : "constant"; }
    double mu(double, double s) const override;
    double dmu_ds(double, double s) const override;
    double dmu_dt(double, double) const override { return 0.0; }
    double kappa(double) const override { return mass_; }
    double k(double, double s) const override;
    double scale(double) const override { return 1.0 / delta0_; }
    nlohmann::json parameters() const override;

    double delta0() const { return delta0_; }
    double mass() const { return mass_; }

private:
    double delta0_, mass_;
};

/// mu_t(s) = (1 + a sin(w t)) exp(-s); fixture whose d/dt + d/ds is positive
/// on part of the (t, s) plane while every other axiom holds.
class OscillatingKernel final : public KernelFamily {
public:
    OscillatingKernel(double amplitude = 0.5, double frequency = 4.0);

    std::string name() const override { return "oscillating"; }
    double mu(double t, double s) const override;
    double dmu_ds(double t, double s) const override;
    double dmu_dt(double t, double s) const override;
    double kappa(double t) const override;
    double k(double t, double s) const override;
    double scale(double) const override { return 1.0; }
    nlohmann::json parameters() const override;

private:
    double amplitude_, frequency_;
};

/// Sampling rectangle and tolerances for the certifier.
struct CertificationGrid {
    double t_min = -10.0;
    double t_max = 10.0;
    std::size_t n_t = 41;
    double s_lo_factor = 1e-4;   ///< s_min = factor * min_t scale(t)
    double s_hi_factor = 50.0;   ///< s_max = factor * max_t scale(t)
    std::size_t n_s = 400;
    double sign_tol = 1e-9;      ///< absolute tolerance on sign conditions (relative to mu_t(0))
    std::size_t n_windows = 4;   ///< M8 windows [a, b] partitioning [t_min, t_max]
};

enum class Verdict { pass, fail, indeterminate };
std::string to_string(Verdict v);

struct AxiomResult {
    std::string id;
    Verdict verdict = Verdict::indeterminate;
    double value = 0.0;      ///< headline quantity (sup, inf, delta, ...)
    double witness_t = 0.0;
    double witness_s = 0.0;
    std::string detail;
    nlohmann::json extra;
};

struct AxiomReport {
    std::string family;
    nlohmann::json parameters;
    std::vector<AxiomResult> axioms;   ///< M1..M8 in order
    nlohmann::json identities;         ///< closed-form identities and their residuals
    nlohmann::json family_conditions;

    const AxiomResult& axiom(const std::string& id) const;
    std::size_t passed() const;
    std::vector<std::string> failed_ids() const;
    nlohmann::json to_json() const;
};

/// Certifies M1-M8 on the sampled rectangle. Any non-finite evaluation marks
/// the affected axiom indeterminate and records the offending (t, s).
AxiomReport certify_axioms(const KernelFamily& family, const CertificationGrid& grid = {});

/// int_{eps_cut}^inf k_t(s) ds along a time sequence.
struct DeltaMassTable {
    double eps_cut = 0.0;
    std::vector<double> times;
    std::vector<double> values;
    bool finite = true;
    /// eps_cut = 0: limit estimate (last value) and whether the sequence settles;
    /// eps_cut > 0: whether the values decrease towards zero.
    bool converges = false;
    double limit_estimate = 0.0;
    nlohmann::json to_json() const;
};

DeltaMassTable delta_mass_convergence(const KernelFamily& family,
                                      const std::vector<double>& times, double eps_cut);

/// Both tables of the distributional limit k_t -> m delta_0; certified when
/// the eps_cut = 0 column settles and every eps_cut > 0 column decays.
struct DeltaConvergence {
    bool certified = false;
    double mass = 0.0;
    std::vector<DeltaMassTable> tables;
    nlohmann::json to_json() const;
};

DeltaConvergence certify_delta_convergence(const KernelFamily& family,
                                           const std::vector<double>& times,
                                           const std::vector<double>& eps_cuts = {0.05, 0.2});

struct KernelConsistency {
    double max_k_residual = 0.0;       ///< |k - int_s^inf mu| / k(t, 0)
    double max_derivative_residual = 0.0;  ///< |d/ds k + mu| / mu(t, 0)
    double max_tail_ratio = 0.0;       ///< k(t, s_max) / k(t, 0)
    nlohmann::json to_json() const;
};

KernelConsistency k_of_mu_consistency(const KernelFamily& family, const std::vector<double>& times,
                                      std::size_t n_s = 200, double s_hi_factor = 50.0);

/// Builds a family from a JSON block {"family": ..., params...}.
KernelPtr make_kernel(const nlohmann::json& spec);

}  // namespace viscomem
