#pragma once

/// @file memory.hpp
/// @brief History variable eta^t(s) on a geometric s-grid: weighted norms,
/// the memory term, the past buffer and the two update mechanisms.

#include <array>
#include <deque>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "viscomem/kernel.hpp"
#include "viscomem/spectral.hpp"

namespace viscomem {

/// Nodes 0 < s_1 < ... < s_J = S_max with trapezoid weights. The implicit
/// node s_0 = 0 carries eta = 0, so w_1 = s_2 / 2.
class SGrid {
public:
    SGrid() = default;
    explicit SGrid(std::vector<double> nodes);

    static SGrid geometric(double s_first, double s_max, std::size_t n_nodes);

    /// s_1 = first_factor * min scale over [t_lo, t_hi]; S_max is the largest
    /// point where k_t(S_max) = tail_rel * k_t(0) over the same window.
    static SGrid for_kernel(const KernelFamily& kernel, double t_lo, double t_hi,
                            std::size_t n_nodes, double first_factor = 1e-3,
                            double tail_rel = 1e-8);

    std::size_t size() const { return s_.size(); }
    const std::vector<double>& nodes() const { return s_; }
    const std::vector<double>& weights() const { return w_; }
    double node(std::size_t j) const { return s_[j]; }
    double s_max() const { return s_.back(); }

    /// b_j = w_j mu_t(s_j): the discrete measure mu_t(s) ds.
    std::vector<double> kernel_weights(const KernelFamily& kernel, double t) const;
    /// Same for -(d/dt mu + d/ds mu), the dissipation density.
    std::vector<double> dissipation_weights(const KernelFamily& kernel, double t) const;
    /// sum_j w_j mu_t(s_j).
    double kappa(const KernelFamily& kernel, double t) const;
    /// max over n_t sample times of |sum_j w_j mu_t(s_j) - kappa(t)| / kappa(t).
    double max_mass_error(const KernelFamily& kernel, double t_lo, double t_hi,
                          std::size_t n_t = 41) const;

private:
    std::vector<double> s_, w_;
};

/// eta_{k,j}: mode k (0-based) at node s_j, stored mode-major.
class HistoryField {
public:
    HistoryField() = default;
    HistoryField(std::size_t n_modes, std::size_t n_nodes, double t = 0.0)
        : n_modes_(n_modes), n_nodes_(n_nodes), data_(n_modes * n_nodes, 0.0), t(t) {}

    std::size_t n_modes() const { return n_modes_; }
    std::size_t n_nodes() const { return n_nodes_; }
    double& operator()(std::size_t k, std::size_t j) { return data_[k * n_nodes_ + j]; }
    double operator()(std::size_t k, std::size_t j) const { return data_[k * n_nodes_ + j]; }
    std::span<double> mode(std::size_t k) { return {data_.data() + k * n_nodes_, n_nodes_}; }
    std::span<const double> mode(std::size_t k) const {
        return {data_.data() + k * n_nodes_, n_nodes_};
    }
    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    /// Modal vector eta(s_j).
    ModalField at_node(std::size_t j) const;
    bool all_finite() const;
    bool operator==(const HistoryField& o) const {
        return n_modes_ == o.n_modes_ && n_nodes_ == o.n_nodes_ && data_ == o.data_;
    }

private:
    std::size_t n_modes_ = 0;
    std::size_t n_nodes_ = 0;
    std::vector<double> data_;

public:
    double t = 0.0;
};

HistoryField operator-(const HistoryField& a, const HistoryField& b);

/// sum_j b_j sum_k lambda_k^{sigma+1} eta_kj xi_kj.
double m_inner(const HistoryField& eta, const HistoryField& xi, std::span<const double> b,
               const SpectralBasis& basis, double sigma = 0.0);
double m_norm_sq(const HistoryField& eta, std::span<const double> b, const SpectralBasis& basis,
                 double sigma = 0.0);
double m_norm(const HistoryField& eta, const KernelFamily& kernel, double t, const SGrid& grid,
              const SpectralBasis& basis, double sigma = 0.0);

/// sum_j b_j <eta(s_j), w>_sigma for a modal field w (no extra lambda power).
double history_pairing(const HistoryField& eta, const ModalField& w, std::span<const double> b,
                       const SpectralBasis& basis, double sigma = 0.0);

/// Mode k of the result is lambda_k sum_j b_j eta_kj.
ModalField memory_term(const HistoryField& eta, std::span<const double> b,
                       const SpectralBasis& basis);
ModalField memory_term(const HistoryField& eta, const KernelFamily& kernel, double t,
                       const SGrid& grid, const SpectralBasis& basis);

/// Piecewise-linear value of mode k at s (0 at s = 0, constant beyond S_max).
double interpolate(const HistoryField& eta, const SGrid& grid, std::size_t k, double s);

/// (t, u, v) snapshots from tau onwards; older values come from the
/// prescribed initial history.
class PastBuffer {
public:
    PastBuffer() = default;
    /// horizon: how far back from the newest entry values must stay available.
    PastBuffer(double tau, const ModalField& u_tau, const ModalField& v_tau, double horizon);
    /// Rebuilds a buffer from stored rows (times increasing, first row >= tau).
    static PastBuffer restore(double tau, const ModalField& u_tau, double horizon,
                              std::deque<double> times, std::deque<ModalField> u,
                              std::deque<ModalField> v);

    /// Appends a snapshot; t must exceed the newest time. Entries older than
    /// newest - horizon are dropped except for one interpolation anchor.
    void push(double t, const ModalField& u, const ModalField& v);

    double tau() const { return tau_; }
    double horizon() const { return horizon_; }
    const ModalField& u_tau() const { return u_tau_; }
    double oldest() const { return times_.front(); }
    double newest() const { return times_.back(); }
    std::size_t size() const { return times_.size(); }

    /// True when [max(tau, t_query), newest] is backed by stored snapshots.
    bool covers(double t_query) const;
    /// Linear interpolation; throws std::out_of_range on a gap or on t
    /// outside [tau, newest]. Never extrapolates.
    ModalField u_at(double t_query) const;
    ModalField v_at(double t_query) const;

    const std::deque<double>& times() const { return times_; }
    const std::deque<ModalField>& u_values() const { return u_; }
    const std::deque<ModalField>& v_values() const { return v_; }

    bool operator==(const PastBuffer& o) const = default;

private:
    std::size_t locate(double t_query) const;

    double tau_ = 0.0;
    double horizon_ = 0.0;
    ModalField u_tau_;
    std::deque<double> times_;
    std::deque<ModalField> u_;
    std::deque<ModalField> v_;
};

/// eta^t(s_j) = u(t) - u(t - s_j) for s_j <= t - tau, and
/// eta_tau(s_j - t + tau) + u(t) - u_tau otherwise.
HistoryField eta_from_representation(const PastBuffer& buffer, const ModalField& u_now,
                                     const HistoryField& eta_tau, double t, const SGrid& grid);

/// Splits eta^{t+dt} = base + c_j (u(t+dt) - u(t)): base depends only on data at
/// times <= t, c_j = min(1, s_j / dt).
struct EtaUpdate {
    HistoryField base;
    std::vector<double> coupling;
};

/// Cubic Lagrange weights for eta(s_j - shift) on the nodes extended by
/// s = 0 (where eta = 0); the stencil is shifted inward at both ends.
struct ShiftStencil {
    double shift = 0.0;
    std::vector<std::size_t> lo;           ///< first extended-node index per s_j
    std::vector<std::array<double, 4>> w;  ///< weights, zero where s_j <= shift
};
ShiftStencil make_shift_stencil(const SGrid& grid, double shift);

/// eta(s_j - shift) by cubic Lagrange interpolation (0 for s_j <= shift).
HistoryField shift_interpolate(const HistoryField& eta, const SGrid& grid, double shift);
HistoryField shift_interpolate(const HistoryField& eta, const ShiftStencil& stencil);

/// Characteristic shift of the transport equation d/dt eta = -d/ds eta + du/dt:
/// base = eta(s_j - dt) with inflow value 0.
EtaUpdate transport_update(const HistoryField& eta, double dt, const SGrid& grid);

/// Exact characteristics from a snapshot eta_base taken when u was u_base:
/// eta^{t+dt}(s) = eta_base(s - shift_next) + u(t+dt) - u_base for
/// s >= shift_next (the time elapsed since the snapshot), and the inflow
/// u(t+dt) - u(t+dt-s) from the buffer below it. Interpolation errors do not
/// accumulate between snapshots. A precomputed stencil for shift_next may be
/// passed to skip the weight computation.
EtaUpdate characteristic_update(const HistoryField& eta_base, const ModalField& u_base,
                                double shift_next, const PastBuffer& buffer,
                                const ModalField& u_now, double t, double dt, const SGrid& grid,
                                const ShiftStencil* stencil = nullptr);

/// Same split computed from the representation formula and the buffer
/// (which must contain u(t) as its newest entry).
EtaUpdate representation_update(const PastBuffer& buffer, const ModalField& u_now,
                                const HistoryField& eta_tau, double t, double dt,
                                const SGrid& grid);

HistoryField apply_update(const EtaUpdate& upd, const ModalField& du, double t_next);

/// One transport step with du = u_dot * dt. Throws std::invalid_argument if
/// dt is not in (0, S_max), naming an admissible value.
HistoryField eta_transport_step(const HistoryField& eta, const ModalField& u_dot, double dt,
                                const SGrid& grid);

/// CSV with header "s,mode_1,...,mode_N", one row per node.
void write_history_csv(std::ostream& os, const HistoryField& eta, const SGrid& grid);
/// Reads the CSV format above. The s column may be any increasing set of
/// nodes; values are interpolated onto the grid.
HistoryField read_history_csv(std::istream& is, const SGrid& grid);

}  // namespace viscomem
