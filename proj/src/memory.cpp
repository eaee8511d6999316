#include "viscomem/memory.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "viscomem/csv.hpp"
#include "viscomem/quadrature.hpp"

namespace viscomem {

SGrid::SGrid(std::vector<double> nodes) : s_(std::move(nodes)) {
    if (s_.size() < 2) throw std::invalid_argument("SGrid: need at least two nodes");
    if (!(s_.front() > 0.0)) throw std::invalid_argument("SGrid: nodes must be positive");
    for (std::size_t j = 1; j < s_.size(); ++j) {
        if (!(s_[j] > s_[j - 1])) throw std::invalid_argument("SGrid: nodes must increase");
    }
    const std::size_t n = s_.size();
    w_.resize(n);
    w_[0] = 0.5 * s_[1];
    for (std::size_t j = 1; j + 1 < n; ++j) w_[j] = 0.5 * (s_[j + 1] - s_[j - 1]);
    w_[n - 1] = 0.5 * (s_[n - 1] - s_[n - 2]);
}

SGrid SGrid::geometric(double s_first, double s_max, std::size_t n_nodes) {
    return SGrid(quad::geometric_nodes(s_first, s_max, n_nodes));
}

SGrid SGrid::for_kernel(const KernelFamily& kernel, double t_lo, double t_hi, std::size_t n_nodes,
                        double first_factor, double tail_rel) {
    if (t_hi < t_lo) std::swap(t_lo, t_hi);
    constexpr int n_t = 81;
    double min_scale = std::numeric_limits<double>::infinity();
    double s_max = 0.0;
    for (int i = 0; i < n_t; ++i) {
        const double t = t_lo + (t_hi - t_lo) * i / (n_t - 1.0);
        min_scale = std::min(min_scale, kernel.scale(t));
        s_max = std::max(s_max, kernel.tail_point(t, tail_rel));
    }
    const double s_first = first_factor * min_scale;
    if (!(s_max > s_first)) s_max = 50.0 * s_first / first_factor;
    return geometric(s_first, s_max, n_nodes);
}

std::vector<double> SGrid::kernel_weights(const KernelFamily& kernel, double t) const {
    std::vector<double> b(s_.size());
    for (std::size_t j = 0; j < s_.size(); ++j) b[j] = w_[j] * kernel.mu(t, s_[j]);
    return b;
}

std::vector<double> SGrid::dissipation_weights(const KernelFamily& kernel, double t) const {
    std::vector<double> b(s_.size());
    for (std::size_t j = 0; j < s_.size(); ++j) {
        b[j] = -w_[j] * (kernel.dmu_dt(t, s_[j]) + kernel.dmu_ds(t, s_[j]));
    }
    return b;
}

double SGrid::kappa(const KernelFamily& kernel, double t) const {
    double acc = 0.0;
    for (std::size_t j = 0; j < s_.size(); ++j) acc += w_[j] * kernel.mu(t, s_[j]);
    return acc;
}

double SGrid::max_mass_error(const KernelFamily& kernel, double t_lo, double t_hi,
                             std::size_t n_t) const {
    double worst = 0.0;
    for (std::size_t i = 0; i < n_t; ++i) {
        const double t = n_t == 1 ? t_lo : t_lo + (t_hi - t_lo) * i / (n_t - 1.0);
        const double k = kernel.kappa(t);
        if (k > 0.0) worst = std::max(worst, std::abs(kappa(kernel, t) - k) / k);
    }
    return worst;
}

ModalField HistoryField::at_node(std::size_t j) const {
    ModalField out(n_modes_);
    for (std::size_t k = 0; k < n_modes_; ++k) out[k] = (*this)(k, j);
    return out;
}

bool HistoryField::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

HistoryField operator-(const HistoryField& a, const HistoryField& b) {
    if (a.n_modes() != b.n_modes() || a.n_nodes() != b.n_nodes()) {
        throw std::invalid_argument("HistoryField: shape mismatch");
    }
    HistoryField out(a.n_modes(), a.n_nodes(), a.t);
    for (std::size_t i = 0; i < out.data().size(); ++i) out.data()[i] = a.data()[i] - b.data()[i];
    return out;
}

namespace {

void check_shape(const HistoryField& eta, std::span<const double> b, const SpectralBasis& basis) {
    if (eta.n_modes() != basis.n_modes() || eta.n_nodes() != b.size()) {
        throw std::invalid_argument("history field shape does not match basis/grid");
    }
}

}  // namespace

double m_inner(const HistoryField& eta, const HistoryField& xi, std::span<const double> b,
               const SpectralBasis& basis, double sigma) {
    check_shape(eta, b, basis);
    check_shape(xi, b, basis);
    double acc = 0.0;
    for (std::size_t k = 0; k < eta.n_modes(); ++k) {
        const auto e = eta.mode(k);
        const auto x = xi.mode(k);
        double row = 0.0;
        for (std::size_t j = 0; j < b.size(); ++j) row += b[j] * e[j] * x[j];
        acc += std::pow(basis.eigenvalue(k), sigma + 1.0) * row;
    }
    return acc;
}

double m_norm_sq(const HistoryField& eta, std::span<const double> b, const SpectralBasis& basis,
                 double sigma) {
    return m_inner(eta, eta, b, basis, sigma);
}

double m_norm(const HistoryField& eta, const KernelFamily& kernel, double t, const SGrid& grid,
              const SpectralBasis& basis, double sigma) {
    const auto b = grid.kernel_weights(kernel, t);
    return std::sqrt(std::max(0.0, m_norm_sq(eta, b, basis, sigma)));
}

double history_pairing(const HistoryField& eta, const ModalField& w, std::span<const double> b,
                       const SpectralBasis& basis, double sigma) {
    check_shape(eta, b, basis);
    double acc = 0.0;
    for (std::size_t k = 0; k < eta.n_modes(); ++k) {
        const auto e = eta.mode(k);
        double row = 0.0;
        for (std::size_t j = 0; j < b.size(); ++j) row += b[j] * e[j];
        acc += std::pow(basis.eigenvalue(k), sigma) * row * w[k];
    }
    return acc;
}

ModalField memory_term(const HistoryField& eta, std::span<const double> b,
                       const SpectralBasis& basis) {
    check_shape(eta, b, basis);
    ModalField out(eta.n_modes());
    for (std::size_t k = 0; k < eta.n_modes(); ++k) {
        const auto e = eta.mode(k);
        double row = 0.0;
        for (std::size_t j = 0; j < b.size(); ++j) row += b[j] * e[j];
        out[k] = basis.eigenvalue(k) * row;
    }
    return out;
}

ModalField memory_term(const HistoryField& eta, const KernelFamily& kernel, double t,
                       const SGrid& grid, const SpectralBasis& basis) {
    const auto b = grid.kernel_weights(kernel, t);
    return memory_term(eta, b, basis);
}

namespace {

/// Index i with s_{i-1} <= s < s_i in the extended node list (s_{-1} = 0),
/// and the linear weight of the right node.
struct Bracket {
    std::ptrdiff_t left;   // -1 means the implicit origin
    std::size_t right;
    double theta;
    bool beyond;           // s >= S_max
};

Bracket bracket(const std::vector<double>& s, double x) {
    if (x >= s.back()) return {0, s.size() - 1, 1.0, true};
    const auto it = std::upper_bound(s.begin(), s.end(), x);
    const auto r = static_cast<std::size_t>(it - s.begin());
    const double s_left = r == 0 ? 0.0 : s[r - 1];
    const double theta = (x - s_left) / (s[r] - s_left);
    return {static_cast<std::ptrdiff_t>(r) - 1, r, theta, false};
}

double eval(const std::span<const double> row, const Bracket& br) {
    if (br.beyond) return row[row.size() - 1];
    const double left = br.left < 0 ? 0.0 : row[static_cast<std::size_t>(br.left)];
    return left + br.theta * (row[br.right] - left);
}

}  // namespace

double interpolate(const HistoryField& eta, const SGrid& grid, std::size_t k, double s) {
    if (s <= 0.0) return 0.0;
    return eval(eta.mode(k), bracket(grid.nodes(), s));
}

// ---------------------------------------------------------------------------

PastBuffer::PastBuffer(double tau, const ModalField& u_tau, const ModalField& v_tau, double horizon)
    : tau_(tau), horizon_(horizon), u_tau_(u_tau) {
    if (!(horizon > 0.0)) throw std::invalid_argument("PastBuffer: horizon must be positive");
    if (u_tau.size() != v_tau.size()) throw std::invalid_argument("PastBuffer: size mismatch");
    times_.push_back(tau);
    u_.push_back(u_tau);
    v_.push_back(v_tau);
}

PastBuffer PastBuffer::restore(double tau, const ModalField& u_tau, double horizon,
                               std::deque<double> times, std::deque<ModalField> u,
                               std::deque<ModalField> v) {
    if (times.empty() || times.size() != u.size() || times.size() != v.size()) {
        throw std::invalid_argument("PastBuffer: inconsistent rows");
    }
    if (times.front() < tau || !std::is_sorted(times.begin(), times.end())) {
        throw std::invalid_argument("PastBuffer: rows must be increasing and start at or after tau");
    }
    PastBuffer b;
    b.tau_ = tau;
    b.horizon_ = horizon;
    b.u_tau_ = u_tau;
    b.times_ = std::move(times);
    b.u_ = std::move(u);
    b.v_ = std::move(v);
    return b;
}

void PastBuffer::push(double t, const ModalField& u, const ModalField& v) {
    if (!(t > times_.back())) throw std::invalid_argument("PastBuffer: times must increase");
    times_.push_back(t);
    u_.push_back(u);
    v_.push_back(v);
    const double keep_from = t - horizon_;
    while (times_.size() > 2 && times_[1] <= keep_from) {
        times_.pop_front();
        u_.pop_front();
        v_.pop_front();
    }
}

bool PastBuffer::covers(double t_query) const {
    const double lo = std::max(tau_, t_query);
    return lo >= times_.front() && lo <= times_.back();
}

std::size_t PastBuffer::locate(double t_query) const {
    if (t_query < tau_ || t_query > times_.back() || t_query < times_.front()) {
        std::ostringstream msg;
        msg << "PastBuffer: time " << t_query << " not covered by [" << times_.front() << ", "
            << times_.back() << "]";
        throw std::out_of_range(msg.str());
    }
    const auto it = std::upper_bound(times_.begin(), times_.end(), t_query);
    std::size_t r = static_cast<std::size_t>(it - times_.begin());
    if (r == times_.size()) r = times_.size() - 1;
    if (r == 0) r = 1;
    return r;
}

ModalField PastBuffer::u_at(double t_query) const {
    if (times_.size() == 1) {
        if (t_query == times_.front()) return u_.front();
        throw std::out_of_range("PastBuffer: single snapshot");
    }
    const std::size_t r = locate(t_query);
    const double th = (t_query - times_[r - 1]) / (times_[r] - times_[r - 1]);
    ModalField out = u_[r - 1];
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += th * (u_[r][k] - u_[r - 1][k]);
    return out;
}

ModalField PastBuffer::v_at(double t_query) const {
    if (times_.size() == 1) {
        if (t_query == times_.front()) return v_.front();
        throw std::out_of_range("PastBuffer: single snapshot");
    }
    const std::size_t r = locate(t_query);
    const double th = (t_query - times_[r - 1]) / (times_[r] - times_[r - 1]);
    ModalField out = v_[r - 1];
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += th * (v_[r][k] - v_[r - 1][k]);
    return out;
}

HistoryField eta_from_representation(const PastBuffer& buffer, const ModalField& u_now,
                                     const HistoryField& eta_tau, double t, const SGrid& grid) {
    const std::size_t n = u_now.size();
    const std::size_t J = grid.size();
    if (eta_tau.n_modes() != n || eta_tau.n_nodes() != J) {
        throw std::invalid_argument("eta_from_representation: eta_tau shape mismatch");
    }
    const double tau = buffer.tau();
    if (t == tau) {
        HistoryField out = eta_tau;
        out.t = t;
        return out;
    }
    HistoryField out(n, J, t);
    const double elapsed = t - tau;
    for (std::size_t j = 0; j < J; ++j) {
        const double s = grid.node(j);
        if (s <= elapsed) {
            const ModalField past = buffer.u_at(t - s);
            for (std::size_t k = 0; k < n; ++k) out(k, j) = u_now[k] - past[k];
        } else {
            const Bracket br = bracket(grid.nodes(), s - elapsed);
            for (std::size_t k = 0; k < n; ++k) {
                out(k, j) = eval(eta_tau.mode(k), br) + u_now[k] - buffer.u_tau()[k];
            }
        }
    }
    return out;
}

namespace {

std::vector<double> coupling(const SGrid& grid, double dt) {
    std::vector<double> c(grid.size());
    for (std::size_t j = 0; j < grid.size(); ++j) c[j] = std::min(1.0, grid.node(j) / dt);
    return c;
}

void check_dt(double dt, const SGrid& grid) {
    if (!(dt > 0.0) || !(dt < grid.s_max())) {
        std::ostringstream msg;
        msg << "time step " << dt << " outside (0, S_max=" << grid.s_max()
            << "); use dt <= " << 0.5 * grid.s_max();
        throw std::invalid_argument(msg.str());
    }
}

}  // namespace

ShiftStencil make_shift_stencil(const SGrid& grid, double shift) {
    const std::size_t J = grid.size();
    constexpr std::size_t W = 4;
    if (J < W) throw std::invalid_argument("shift_interpolate: grid needs at least 4 nodes");
    ShiftStencil st;
    st.shift = shift;
    st.lo.assign(J, 0);
    st.w.assign(J, {0.0, 0.0, 0.0, 0.0});
    std::vector<double> x(J + 1, 0.0);
    for (std::size_t j = 0; j < J; ++j) x[j + 1] = grid.node(j);
    for (std::size_t j = 0; j < J; ++j) {
        const double foot = grid.node(j) - shift;
        if (foot <= 0.0) continue;
        const auto r = static_cast<std::size_t>(std::upper_bound(x.begin(), x.end(), foot) -
                                                x.begin());
        std::size_t lo = r >= W / 2 ? r - W / 2 : 0;
        lo = std::min(lo, J + 1 - W);
        st.lo[j] = lo;
        for (std::size_t a = 0; a < W; ++a) {
            double p = 1.0;
            for (std::size_t b = 0; b < W; ++b) {
                if (a != b) p *= (foot - x[lo + b]) / (x[lo + a] - x[lo + b]);
            }
            // Node 0 carries eta = 0, so its weight never contributes.
            st.w[j][a] = lo + a == 0 ? 0.0 : p;
        }
    }
    return st;
}

HistoryField shift_interpolate(const HistoryField& eta, const ShiftStencil& st) {
    const std::size_t n = eta.n_modes();
    const std::size_t J = eta.n_nodes();
    if (st.lo.size() != J) throw std::invalid_argument("shift_interpolate: stencil built for another grid");
    HistoryField out(n, J, eta.t + st.shift);
    for (std::size_t k = 0; k < n; ++k) {
        const auto row = eta.mode(k);
        auto dst = out.mode(k);
        for (std::size_t j = 0; j < J; ++j) {
            const auto& w = st.w[j];
            const std::size_t lo = st.lo[j];
            double acc = 0.0;
            for (std::size_t a = 0; a < 4; ++a) {
                if (w[a] != 0.0) acc += w[a] * row[lo + a - 1];
            }
            dst[j] = acc;
        }
    }
    return out;
}

HistoryField shift_interpolate(const HistoryField& eta, const SGrid& grid, double shift) {
    return shift_interpolate(eta, make_shift_stencil(grid, shift));
}

EtaUpdate transport_update(const HistoryField& eta, double dt, const SGrid& grid) {
    check_dt(dt, grid);
    return {shift_interpolate(eta, grid, dt), coupling(grid, dt)};
}

EtaUpdate characteristic_update(const HistoryField& eta_base, const ModalField& u_base,
                                double shift_next, const PastBuffer& buffer,
                                const ModalField& u_now, double t, double dt, const SGrid& grid,
                                const ShiftStencil* stencil) {
    check_dt(dt, grid);
    if (buffer.newest() != t) {
        throw std::invalid_argument("characteristic_update: buffer must end at the current time");
    }
    if (!(shift_next >= dt)) throw std::invalid_argument("characteristic_update: shift below dt");
    const std::size_t n = u_now.size();
    const std::size_t J = grid.size();
    const bool cached = stencil && stencil->shift == shift_next && stencil->lo.size() == J;
    EtaUpdate upd{cached ? shift_interpolate(eta_base, *stencil) : shift_interpolate(eta_base, grid, shift_next),
                  coupling(grid, dt)};
    upd.base.t = t + dt;
    for (std::size_t j = 0; j < J; ++j) {
        const double s = grid.node(j);
        if (s < dt) {
            for (std::size_t k = 0; k < n; ++k) upd.base(k, j) = 0.0;
        } else if (s < shift_next) {
            const ModalField past = buffer.u_at(t + dt - s);
            for (std::size_t k = 0; k < n; ++k) upd.base(k, j) = u_now[k] - past[k];
        } else {
            for (std::size_t k = 0; k < n; ++k) upd.base(k, j) += u_now[k] - u_base[k];
        }
    }
    return upd;
}

EtaUpdate representation_update(const PastBuffer& buffer, const ModalField& u_now,
                                const HistoryField& eta_tau, double t, double dt,
                                const SGrid& grid) {
    check_dt(dt, grid);
    if (buffer.newest() != t) {
        throw std::invalid_argument("representation_update: buffer must end at the current time");
    }
    const std::size_t n = u_now.size();
    const std::size_t J = grid.size();
    EtaUpdate upd{HistoryField(n, J, t + dt), coupling(grid, dt)};
    const double elapsed = t + dt - buffer.tau();
    for (std::size_t j = 0; j < J; ++j) {
        const double s = grid.node(j);
        if (s < dt) continue;
        if (s <= elapsed) {
            const ModalField past = buffer.u_at(t + dt - s);
            for (std::size_t k = 0; k < n; ++k) upd.base(k, j) = u_now[k] - past[k];
        } else {
            const Bracket br = bracket(grid.nodes(), s - elapsed);
            for (std::size_t k = 0; k < n; ++k) {
                upd.base(k, j) = eval(eta_tau.mode(k), br) + u_now[k] - buffer.u_tau()[k];
            }
        }
    }
    return upd;
}

HistoryField apply_update(const EtaUpdate& upd, const ModalField& du, double t_next) {
    HistoryField out = upd.base;
    out.t = t_next;
    for (std::size_t k = 0; k < out.n_modes(); ++k) {
        auto row = out.mode(k);
        for (std::size_t j = 0; j < row.size(); ++j) row[j] += upd.coupling[j] * du[k];
    }
    return out;
}

HistoryField eta_transport_step(const HistoryField& eta, const ModalField& u_dot, double dt,
                                const SGrid& grid) {
    const EtaUpdate upd = transport_update(eta, dt, grid);
    ModalField du = u_dot;
    du *= dt;
    return apply_update(upd, du, eta.t + dt);
}

void write_history_csv(std::ostream& os, const HistoryField& eta, const SGrid& grid) {
    if (eta.n_nodes() != grid.size()) throw std::invalid_argument("write_history_csv: shape");
    CsvWriter w(os);
    std::vector<std::string> header{"s"};
    for (std::size_t k = 0; k < eta.n_modes(); ++k) header.push_back("mode_" + std::to_string(k + 1));
    w.row(header);
    std::vector<double> vals(eta.n_modes() + 1);
    for (std::size_t j = 0; j < grid.size(); ++j) {
        vals[0] = grid.node(j);
        for (std::size_t k = 0; k < eta.n_modes(); ++k) vals[k + 1] = eta(k, j);
        w.row_numbers(vals);
    }
}

HistoryField read_history_csv(std::istream& is, const SGrid& grid) {
    const CsvTable table = read_csv(is);
    const std::size_t n = table.header.size() - 1;
    if (n == 0) throw std::runtime_error("history CSV: header needs s and at least one mode");
    std::vector<double> s;
    std::vector<std::vector<double>> rows;
    for (const auto& rec : table.rows) {
        std::vector<double> vals;
        for (const auto& cell : rec) vals.push_back(std::stod(cell));
        if (!s.empty() && !(vals[0] > s.back())) {
            throw std::runtime_error("history CSV: s column must increase");
        }
        s.push_back(vals[0]);
        rows.push_back(std::vector<double>(vals.begin() + 1, vals.end()));
    }
    if (s.size() < 2) throw std::runtime_error("history CSV: need at least two rows");
    const SGrid src(s);
    HistoryField src_field(n, s.size());
    for (std::size_t j = 0; j < s.size(); ++j) {
        for (std::size_t k = 0; k < n; ++k) src_field(k, j) = rows[j][k];
    }
    HistoryField out(n, grid.size());
    for (std::size_t j = 0; j < grid.size(); ++j) {
        for (std::size_t k = 0; k < n; ++k) out(k, j) = interpolate(src_field, src, k, grid.node(j));
    }
    return out;
}

}  // namespace viscomem
