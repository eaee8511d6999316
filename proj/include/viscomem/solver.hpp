#pragma once

/// @file solver.hpp
/// @brief Time integration of the wave equation with time-dependent memory,
/// the Kelvin-Voigt limit equation, residual checks and state checkpoints.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "viscomem/errors.hpp"
#include "viscomem/kernel.hpp"
#include "viscomem/memory.hpp"
#include "viscomem/spectral.hpp"

namespace viscomem {

enum class EtaMode { transport, representation };
std::string to_string(EtaMode m);
EtaMode eta_mode_from_string(const std::string& s);

struct SolverConfig {
    double dt = 0.005;
    EtaMode eta_mode = EtaMode::transport;
    /// Compare transport against the representation formula every this many
    /// steps (0 disables).
    std::size_t cross_check_every = 50;
    /// Transport follows characteristics from a snapshot refreshed every this
    /// many steps (1 interpolates every step).
    std::size_t transport_rebase_every = 20;
    Nonlinearity f{1.0, 0.0, 1.0, 0.0};
    /// Time-independent forcing; empty means zero.
    ModalField g;
    /// Record every this many steps in the trajectory.
    std::size_t output_stride = 10;
    bool store_history = false;
};

/// Immutable problem description shared by all trajectories of a run.
class Model {
public:
    Model(SpectralBasis basis, KernelPtr kernel, SGrid grid, SolverConfig cfg);

    const SpectralBasis& basis() const { return basis_; }
    const KernelFamily& kernel() const { return *kernel_; }
    KernelPtr kernel_ptr() const { return kernel_; }
    const SGrid& grid() const { return grid_; }
    const SolverConfig& config() const { return cfg_; }
    const ModalField& g() const { return g_; }
    double dt() const { return cfg_.dt; }
    std::size_t n_modes() const { return basis_.n_modes(); }

    /// Largest admissible dt: half the quarter period of the highest mode
    /// (0.5 pi / sqrt(lambda_N)) and below S_max / 2.
    double max_dt() const;
    /// Throws ConfigError naming the violated constraint.
    void validate(double t_lo, double t_hi) const;

    /// Interpolation stencil for a shift of since_base steps, if precomputed.
    const ShiftStencil* shift_stencil(std::uint64_t since_base) const;

private:
    SpectralBasis basis_;
    KernelPtr kernel_;
    SGrid grid_;
    SolverConfig cfg_;
    ModalField g_;
    std::vector<ShiftStencil> stencils_;
};

struct SimState {
    double tau = 0.0;
    std::uint64_t steps = 0;
    double t = 0.0;  ///< tau + steps * dt, recomputed after every step
    ModalField u, v;
    HistoryField eta;
    HistoryField eta_tau;
    PastBuffer buffer;
    /// Transport snapshot: eta and u at step base_steps.
    HistoryField eta_base;
    ModalField u_base;
    std::uint64_t base_steps = 0;

    bool operator==(const SimState& o) const = default;
};

/// State at tau with the given initial history (zero when omitted, i.e.
/// u = u_tau before tau).
SimState initial_state(const Model& model, double tau, const ModalField& u, const ModalField& v,
                       std::optional<HistoryField> eta_tau = std::nullopt);

/// Data available to observers after each step.
struct StepEvent {
    const ModalField& u_before;
    const ModalField& v_before;
    const SimState& after;
    std::span<const double> weights_after;  ///< w_j mu_{t_after}(s_j)
};
using StepObserver = std::function<void(const StepEvent&)>;

/// One step: Crank-Nicolson on each (u_k, v_k) oscillator, f evaluated
/// explicitly at u + dt/2 v, memory term implicit (backward Euler in the
/// coupling), eta advanced by its update split. Throws NumericError on
/// non-finite output.
void step(SimState& state, const Model& model, std::vector<double>* weights_out = nullptr);

struct CrossCheck {
    double t = 0.0;
    double rel_difference = 0.0;  ///< |eta_transport - eta_repr|_M / |eta_repr|_M
};

struct Trajectory {
    std::vector<double> t;
    std::vector<ModalField> u, v;
    std::vector<HistoryField> eta;  ///< only with store_history
    std::vector<CrossCheck> cross_checks;
    double max_cross_check() const;
};

/// Advances state to t_end (which must lie on the step grid) and records the
/// initial point plus every output_stride-th step and the final point.
Trajectory simulate(SimState& state, const Model& model, double t_end,
                    const StepObserver& observer = {});

/// Convenience overload: integrates from fresh initial data.
Trajectory simulate(const Model& model, double tau, const ModalField& u0, const ModalField& v0,
                    double t_end, SimState* final_state = nullptr);

/// d^2/dt^2 w + A w + m A d/dt w + f(w) = g with Crank-Nicolson on the linear
/// part and f explicit at w + dt/2 dw.
struct KelvinVoigtState {
    double t0 = 0.0;
    std::uint64_t steps = 0;
    double t = 0.0;
    ModalField u, v;
};

void kelvin_voigt_step(KelvinVoigtState& s, const SpectralBasis& basis, const Nonlinearity& f,
                       const ModalField& g, double m, double dt);

Trajectory kelvin_voigt_simulate(const SpectralBasis& basis, const Nonlinearity& f,
                                 const ModalField& g, double m, const ModalField& u0,
                                 const ModalField& v0, double t0, double t_end, double dt,
                                 std::size_t output_stride = 10);

/// Terms of the equation evaluated at one time from a past described by
/// callables; both memory forms use Gauss panels on the s-grid split at t - tau.
struct FormResidual {
    double t = 0.0;
    ModalField direct;       ///< u_tt + A u + int mu A eta + f(u) - g
    ModalField convolution;  ///< u_tt + A u + int k A u_t(t-s) + f(u) - g
    double scale = 0.0;      ///< largest l2 norm among the individual terms
    double rel_direct = 0.0;
    double rel_convolution = 0.0;
    double rel_cross = 0.0;  ///< |direct - convolution| / scale
};

struct PastDescription {
    std::function<ModalField(double)> u;  ///< u(t') for t' in [tau, t]
    std::function<ModalField(double)> v;  ///< d/dt u(t') for t' in [tau, t]
    double tau = 0.0;
    ModalField u_tau;
};

/// int_0^inf mu_t(s) A eta^t(s) ds with eta from the representation formula
/// (u constant before tau).
ModalField memory_term_from_past(const PastDescription& past, double t, const KernelFamily& kernel,
                                 const SpectralBasis& basis, const SGrid& panels);
/// int_0^inf k_t(s) A d/dt u(t - s) ds (u constant before tau).
ModalField convolution_term_from_past(const PastDescription& past, double t,
                                      const KernelFamily& kernel, const SpectralBasis& basis,
                                      const SGrid& panels);

FormResidual form_residual(const PastDescription& past, const ModalField& u_tt, double t,
                           const Model& model);

/// Both residuals at the second-newest buffer time of a simulated state, with
/// u_tt from centered differences on the step grid. Requires a zero initial
/// history and at least three buffer entries.
FormResidual convolution_form_residual(const SimState& state, const Model& model);

/// Residual of the weak form against each basis function at interior output
/// times (centered u_tt on the output stride, eta from stored snapshots);
/// returns max over times of |r| / scale.
double weak_form_residual(const Trajectory& traj, const Model& model);

/// Solution of A u + f(u) = g by the shifted fixed point
/// u_k <- (g_k - f(u)_k + c u_k) / (lambda_k + c), c = max f' on the grid.
struct Equilibrium {
    ModalField u;
    double residual = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
};
Equilibrium solve_equilibrium(const SpectralBasis& basis, const Nonlinearity& f,
                              const ModalField& g, double tol = 1e-10,
                              std::size_t max_iter = 100000);

/// Distances |z_1(t) - z_2(t)|_H for two runs started delta apart.
struct LipschitzProbe {
    std::vector<double> t, distance;
    double delta = 0.0;
    double rate = 0.0;      ///< least-squares slope of log(distance / delta)
    double constant = 0.0;  ///< max distance / (delta e^{rate (t - tau)})
};
LipschitzProbe lipschitz_probe(const Model& model, double tau, const ModalField& u0,
                               const ModalField& v0, const ModalField& direction, double delta,
                               double t_end);

/// H-norm squared of (u, v, eta) at time t: |u|_1^2 + |v|^2 + |eta|_M^2.
double state_norm_sq(const SimState& s, const Model& model);

/// Binary checkpoint: "VMCK", u32 version, u64 N, u64 J, u64 steps, f64 tau,
/// t, dt, then f64 arrays s[J], u[N], v[N], eta[N*J], eta_tau[N*J],
/// u_tau[N], f64 horizon, u64 B, B rows (t, u[N], v[N]), u64 base_steps,
/// eta_base[N*J], u_base[N]. Host byte order.
void write_checkpoint(std::ostream& os, const SimState& s, const Model& model);
SimState read_checkpoint(std::istream& is, const Model& model);

}  // namespace viscomem
