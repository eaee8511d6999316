#include "viscomem/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include "viscomem/quadrature.hpp"

namespace viscomem {

std::string to_string(EtaMode m) {
    return m == EtaMode::transport ? "transport" : "representation";
}

EtaMode eta_mode_from_string(const std::string& s) {
    if (s == "transport") return EtaMode::transport;
    if (s == "representation") return EtaMode::representation;
    throw ConfigError("eta_mode must be 'transport' or 'representation', got '" + s + "'");
}

Model::Model(SpectralBasis basis, KernelPtr kernel, SGrid grid, SolverConfig cfg)
    : basis_(std::move(basis)), kernel_(std::move(kernel)), grid_(std::move(grid)),
      cfg_(std::move(cfg)) {
    if (!kernel_) throw ConfigError("Model: kernel missing");
    if (cfg_.g.size() == 0) {
        g_ = basis_.zero();
    } else if (cfg_.g.size() != basis_.n_modes()) {
        throw ConfigError("forcing g has " + std::to_string(cfg_.g.size()) +
                          " modes, basis has " + std::to_string(basis_.n_modes()));
    } else {
        g_ = cfg_.g;
    }
    if (!(cfg_.dt > 0.0) || !std::isfinite(cfg_.dt)) throw ConfigError("dt must be positive");
    if (cfg_.output_stride == 0) throw ConfigError("output_stride must be >= 1");
    if (cfg_.eta_mode == EtaMode::transport && grid_.size() >= 4) {
        const std::size_t R = std::max<std::size_t>(1, cfg_.transport_rebase_every);
        for (std::size_t k = 1; k <= R; ++k) {
            stencils_.push_back(make_shift_stencil(grid_, static_cast<double>(k) * cfg_.dt));
        }
    }
}

const ShiftStencil* Model::shift_stencil(std::uint64_t since_base) const {
    if (since_base == 0 || since_base > stencils_.size()) return nullptr;
    return &stencils_[since_base - 1];
}

double Model::max_dt() const {
    const double mode_bound = 0.5 * std::numbers::pi / std::sqrt(basis_.lambda_max());
    return std::min(mode_bound, 0.5 * grid_.s_max());
}

void Model::validate(double t_lo, double t_hi) const {
    const double bound = max_dt();
    if (cfg_.dt > bound) {
        std::ostringstream msg;
        msg << "CFL violation: dt=" << cfg_.dt << " exceeds the stability bound " << bound
            << " (0.5*pi/sqrt(lambda_N) with N=" << basis_.n_modes()
            << ", and S_max/2); suggested dt=" << 0.5 * bound;
        throw ConfigError(msg.str());
    }
    const double rebase_span = static_cast<double>(cfg_.transport_rebase_every) * cfg_.dt;
    if (rebase_span > 0.5 * grid_.s_max()) {
        std::ostringstream msg;
        msg << "transport_rebase_every * dt = " << rebase_span << " exceeds S_max/2 = "
            << 0.5 * grid_.s_max();
        throw ConfigError(msg.str());
    }
    const double err = grid_.max_mass_error(*kernel_, t_lo, t_hi);
    if (err > 0.01) {
        std::ostringstream msg;
        msg << "s-grid quadrature misses kappa(t) by " << 100.0 * err
            << "% on [" << t_lo << ", " << t_hi << "]; refine J or widen the grid";
        throw ConfigError(msg.str());
    }
}

SimState initial_state(const Model& model, double tau, const ModalField& u, const ModalField& v,
                       std::optional<HistoryField> eta_tau) {
    const std::size_t n = model.n_modes();
    const std::size_t J = model.grid().size();
    if (u.size() != n || v.size() != n) {
        throw ConfigError("initial data has wrong number of modes (expected " +
                          std::to_string(n) + ")");
    }
    SimState s;
    s.tau = tau;
    s.t = tau;
    s.u = u;
    s.v = v;
    s.eta_tau = eta_tau ? *eta_tau : HistoryField(n, J, tau);
    if (s.eta_tau.n_modes() != n || s.eta_tau.n_nodes() != J) {
        throw ConfigError("initial history shape does not match basis/grid");
    }
    s.eta_tau.t = tau;
    s.eta = s.eta_tau;
    s.eta_base = s.eta_tau;
    s.u_base = u;
    s.buffer = PastBuffer(tau, u, v, model.grid().s_max() + 2.0 * model.dt());
    return s;
}

void step(SimState& state, const Model& model, std::vector<double>* weights_out) {
    const double h = model.dt();
    const auto& basis = model.basis();
    const std::size_t n = basis.n_modes();
    const std::size_t J = model.grid().size();
    const double t_next = state.tau + static_cast<double>(state.steps + 1) * h;

    const std::uint64_t since_base = state.steps + 1 - state.base_steps;
    const EtaUpdate upd =
        model.config().eta_mode == EtaMode::transport
            ? characteristic_update(state.eta_base, state.u_base,
                                    static_cast<double>(since_base) * h, state.buffer, state.u,
                                    state.t, h, model.grid(), model.shift_stencil(since_base))
            : representation_update(state.buffer, state.u, state.eta_tau, state.t, h, model.grid());

    std::vector<double> b = model.grid().kernel_weights(model.kernel(), t_next);
    double B = 0.0;
    for (std::size_t j = 0; j < J; ++j) B += b[j] * upd.coupling[j];

    ModalField phi = basis.zero();
    if (!model.config().f.is_zero()) {
        ModalField mid = state.u;
        for (std::size_t k = 0; k < n; ++k) mid[k] += 0.5 * h * state.v[k];
        phi = apply_nonlinearity(mid, model.config().f, basis);
    }

    ModalField du(n);
    for (std::size_t k = 0; k < n; ++k) {
        const auto row = upd.base.mode(k);
        double S = 0.0;
        for (std::size_t j = 0; j < J; ++j) S += b[j] * row[j];
        const double lam = basis.eigenvalue(k);
        const double rhs = 2.0 * state.v[k] +
                           h * (-lam * state.u[k] - lam * S - phi[k] + model.g()[k]);
        du[k] = rhs / (2.0 / h + 0.5 * h * lam + h * lam * B);
    }
    for (std::size_t k = 0; k < n; ++k) {
        state.u[k] += du[k];
        state.v[k] = 2.0 * du[k] / h - state.v[k];
    }
    state.eta = apply_update(upd, du, t_next);
    state.steps += 1;
    state.t = t_next;
    if (!state.u.all_finite() || !state.v.all_finite()) {
        std::ostringstream msg;
        msg << "non-finite state at t=" << t_next << " (step " << state.steps
            << "); reduce dt or the initial amplitude";
        throw NumericError(msg.str());
    }
    state.buffer.push(t_next, state.u, state.v);
    if (since_base >= std::max<std::size_t>(1, model.config().transport_rebase_every)) {
        state.eta_base = state.eta;
        state.u_base = state.u;
        state.base_steps = state.steps;
    }
    if (weights_out) *weights_out = std::move(b);
}

double Trajectory::max_cross_check() const {
    double m = 0.0;
    for (const auto& c : cross_checks) m = std::max(m, c.rel_difference);
    return m;
}

namespace {

std::uint64_t steps_to(const SimState& s, double h, double t_end) {
    const double span = t_end - s.t;
    if (span < -1e-12 * std::max(1.0, std::abs(t_end))) {
        throw ConfigError("simulate: end time lies before the current time");
    }
    const double n = std::round(span / h);
    if (std::abs(n * h - span) > 1e-9 * std::max(1.0, std::abs(t_end))) {
        std::ostringstream msg;
        msg << "simulate: end time " << t_end << " is not on the step grid (dt=" << h << ")";
        throw ConfigError(msg.str());
    }
    return static_cast<std::uint64_t>(n);
}

void record(Trajectory& tr, const SimState& s, bool with_eta) {
    tr.t.push_back(s.t);
    tr.u.push_back(s.u);
    tr.v.push_back(s.v);
    if (with_eta) tr.eta.push_back(s.eta);
}

}  // namespace

Trajectory simulate(SimState& state, const Model& model, double t_end,
                    const StepObserver& observer) {
    const std::uint64_t n_steps = steps_to(state, model.dt(), t_end);
    const auto& cfg = model.config();
    Trajectory tr;
    record(tr, state, cfg.store_history);
    std::vector<double> weights;
    for (std::uint64_t i = 0; i < n_steps; ++i) {
        if (observer) {
            const ModalField u_before = state.u, v_before = state.v;
            step(state, model, &weights);
            observer(StepEvent{u_before, v_before, state, weights});
        } else {
            step(state, model, &weights);
        }
        if (cfg.eta_mode == EtaMode::transport && cfg.cross_check_every > 0 &&
            state.steps % cfg.cross_check_every == 0) {
            const HistoryField ref =
                eta_from_representation(state.buffer, state.u, state.eta_tau, state.t, model.grid());
            const double ref_norm = std::sqrt(m_norm_sq(ref, weights, model.basis()));
            const double diff = std::sqrt(m_norm_sq(state.eta - ref, weights, model.basis()));
            tr.cross_checks.push_back({state.t, ref_norm > 0.0 ? diff / ref_norm : diff});
        }
        const bool last = i + 1 == n_steps;
        if (state.steps % cfg.output_stride == 0 || last) record(tr, state, cfg.store_history);
    }
    return tr;
}

Trajectory simulate(const Model& model, double tau, const ModalField& u0, const ModalField& v0,
                    double t_end, SimState* final_state) {
    SimState s = initial_state(model, tau, u0, v0);
    Trajectory tr = simulate(s, model, t_end);
    if (final_state) *final_state = std::move(s);
    return tr;
}

// ---------------------------------------------------------------------------

void kelvin_voigt_step(KelvinVoigtState& s, const SpectralBasis& basis, const Nonlinearity& f,
                       const ModalField& g, double m, double dt) {
    const std::size_t n = basis.n_modes();
    ModalField phi = basis.zero();
    if (!f.is_zero()) {
        ModalField mid = s.u;
        for (std::size_t k = 0; k < n; ++k) mid[k] += 0.5 * dt * s.v[k];
        phi = apply_nonlinearity(mid, f, basis);
    }
    for (std::size_t k = 0; k < n; ++k) {
        const double lam = basis.eigenvalue(k);
        const double gk = g.size() == 0 ? 0.0 : g[k];
        const double du = (2.0 * s.v[k] + dt * (-lam * s.u[k] - phi[k] + gk)) /
                          (2.0 / dt + 0.5 * dt * lam + m * lam);
        s.u[k] += du;
        s.v[k] = 2.0 * du / dt - s.v[k];
    }
    s.steps += 1;
    s.t = s.t0 + static_cast<double>(s.steps) * dt;
    if (!s.u.all_finite() || !s.v.all_finite()) {
        std::ostringstream msg;
        msg << "non-finite Kelvin-Voigt state at t=" << s.t;
        throw NumericError(msg.str());
    }
}

Trajectory kelvin_voigt_simulate(const SpectralBasis& basis, const Nonlinearity& f,
                                 const ModalField& g, double m, const ModalField& u0,
                                 const ModalField& v0, double t0, double t_end, double dt,
                                 std::size_t output_stride) {
    if (!(m > 0.0)) throw ConfigError("Kelvin-Voigt viscosity m must be positive");
    if (!(dt > 0.0)) throw ConfigError("dt must be positive");
    if (output_stride == 0) throw ConfigError("output_stride must be >= 1");
    KelvinVoigtState s{t0, 0, t0, u0, v0};
    const double n_real = std::round((t_end - t0) / dt);
    if (n_real < 0.0 || std::abs(n_real * dt - (t_end - t0)) > 1e-9 * std::max(1.0, std::abs(t_end))) {
        throw ConfigError("kelvin_voigt_simulate: end time not on the step grid");
    }
    const auto n_steps = static_cast<std::uint64_t>(n_real);
    Trajectory tr;
    tr.t.push_back(s.t);
    tr.u.push_back(s.u);
    tr.v.push_back(s.v);
    for (std::uint64_t i = 0; i < n_steps; ++i) {
        kelvin_voigt_step(s, basis, f, g, m, dt);
        if (s.steps % output_stride == 0 || i + 1 == n_steps) {
            tr.t.push_back(s.t);
            tr.u.push_back(s.u);
            tr.v.push_back(s.v);
        }
    }
    return tr;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<double> panel_breaks(const SGrid& grid, double kink) {
    std::vector<double> br;
    br.reserve(grid.size() + 2);
    br.push_back(0.0);
    for (double s : grid.nodes()) br.push_back(s);
    if (kink > 0.0 && kink < grid.s_max()) {
        br.insert(std::upper_bound(br.begin(), br.end(), kink), kink);
    }
    br.erase(std::unique(br.begin(), br.end()), br.end());
    return br;
}

double l2(const ModalField& a) {
    double acc = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) acc += a[k] * a[k];
    return std::sqrt(acc);
}

template <class Integrand>
ModalField panel_integral(const std::vector<double>& breaks, std::size_t n, Integrand&& fn) {
    static constexpr double x[4] = {-0.8611363115940526, -0.3399810435848563,
                                    0.3399810435848563, 0.8611363115940526};
    static constexpr double w[4] = {0.3478548451374538, 0.6521451548625461,
                                    0.6521451548625461, 0.3478548451374538};
    ModalField acc(n);
    for (std::size_t p = 0; p + 1 < breaks.size(); ++p) {
        const double mid = 0.5 * (breaks[p] + breaks[p + 1]);
        const double half = 0.5 * (breaks[p + 1] - breaks[p]);
        for (int q = 0; q < 4; ++q) fn(mid + half * x[q], half * w[q], acc);
    }
    return acc;
}

}  // namespace

ModalField memory_term_from_past(const PastDescription& past, double t, const KernelFamily& kernel,
                                 const SpectralBasis& basis, const SGrid& panels) {
    const std::size_t n = basis.n_modes();
    const double elapsed = t - past.tau;
    const ModalField u_now = past.u(t);
    const auto breaks = panel_breaks(panels, elapsed);
    ModalField out = panel_integral(breaks, n, [&](double s, double wq, ModalField& acc) {
        const double m = kernel.mu(t, s) * wq;
        if (m == 0.0) return;
        const ModalField before = s <= elapsed ? past.u(t - s) : past.u_tau;
        for (std::size_t k = 0; k < n; ++k) acc[k] += m * (u_now[k] - before[k]);
    });
    // eta is constant beyond t - tau, so the tail past S_max is exact.
    const double s_max = panels.s_max();
    if (s_max >= elapsed) {
        const double tail = kernel.k(t, s_max);
        for (std::size_t k = 0; k < n; ++k) out[k] += tail * (u_now[k] - past.u_tau[k]);
    }
    for (std::size_t k = 0; k < n; ++k) out[k] *= basis.eigenvalue(k);
    return out;
}

ModalField convolution_term_from_past(const PastDescription& past, double t,
                                      const KernelFamily& kernel, const SpectralBasis& basis,
                                      const SGrid& panels) {
    const std::size_t n = basis.n_modes();
    const double elapsed = t - past.tau;
    auto breaks = panel_breaks(panels, elapsed);
    breaks.erase(std::remove_if(breaks.begin(), breaks.end(), [&](double s) { return s > elapsed; }),
                 breaks.end());
    ModalField out = panel_integral(breaks, n, [&](double s, double wq, ModalField& acc) {
        const double kw = kernel.k(t, s) * wq;
        if (kw == 0.0) return;
        const ModalField vel = past.v(t - s);
        for (std::size_t k = 0; k < n; ++k) acc[k] += kw * vel[k];
    });
    for (std::size_t k = 0; k < n; ++k) out[k] *= basis.eigenvalue(k);
    return out;
}

FormResidual form_residual(const PastDescription& past, const ModalField& u_tt, double t,
                           const Model& model) {
    const auto& basis = model.basis();
    const std::size_t n = basis.n_modes();
    const ModalField u = past.u(t);
    ModalField Au(n);
    for (std::size_t k = 0; k < n; ++k) Au[k] = basis.eigenvalue(k) * u[k];
    const ModalField mem = memory_term_from_past(past, t, model.kernel(), basis, model.grid());
    const ModalField conv = convolution_term_from_past(past, t, model.kernel(), basis, model.grid());
    const ModalField fu =
        model.config().f.is_zero() ? basis.zero() : apply_nonlinearity(u, model.config().f, basis);
    FormResidual r;
    r.t = t;
    r.direct = u_tt + Au + mem + fu - model.g();
    r.convolution = u_tt + Au + conv + fu - model.g();
    r.scale = std::max({l2(u_tt), l2(Au), l2(mem), l2(conv), l2(fu), l2(model.g())});
    const double sc = r.scale > 0.0 ? r.scale : 1.0;
    r.rel_direct = l2(r.direct) / sc;
    r.rel_convolution = l2(r.convolution) / sc;
    r.rel_cross = l2(mem - conv) / sc;
    return r;
}

FormResidual convolution_form_residual(const SimState& state, const Model& model) {
    const auto& buf = state.buffer;
    if (buf.size() < 3) throw ConfigError("convolution_form_residual: need three buffer entries");
    if (std::any_of(state.eta_tau.data().begin(), state.eta_tau.data().end(),
                    [](double x) { return x != 0.0; })) {
        throw ConfigError("convolution_form_residual: requires a constant past before tau");
    }
    const std::size_t i = buf.size() - 2;
    const double t = buf.times()[i];
    const double h1 = buf.times()[i] - buf.times()[i - 1];
    const double h2 = buf.times()[i + 1] - buf.times()[i];
    const double needed = std::max(state.tau, t - model.grid().s_max());
    if (buf.oldest() > needed) throw ConfigError("convolution_form_residual: insufficient buffer");
    const auto& U = buf.u_values();
    ModalField utt(model.n_modes());
    for (std::size_t k = 0; k < utt.size(); ++k) {
        utt[k] = 2.0 * (h1 * U[i + 1][k] - (h1 + h2) * U[i][k] + h2 * U[i - 1][k]) /
                 (h1 * h2 * (h1 + h2));
    }
    PastDescription past{[&](double tq) { return buf.u_at(tq); },
                         [&](double tq) { return buf.v_at(tq); }, state.tau, buf.u_tau()};
    return form_residual(past, utt, t, model);
}

double weak_form_residual(const Trajectory& traj, const Model& model) {
    if (traj.eta.size() != traj.t.size()) {
        throw ConfigError("weak_form_residual: trajectory lacks history snapshots");
    }
    const auto& basis = model.basis();
    const std::size_t n = basis.n_modes();
    double worst = 0.0;
    for (std::size_t i = 1; i + 1 < traj.t.size(); ++i) {
        const double h1 = traj.t[i] - traj.t[i - 1];
        const double h2 = traj.t[i + 1] - traj.t[i];
        if (std::abs(h1 - h2) > 1e-9 * h1) continue;
        ModalField utt(n), Au(n);
        for (std::size_t k = 0; k < n; ++k) {
            utt[k] = (traj.u[i + 1][k] - 2.0 * traj.u[i][k] + traj.u[i - 1][k]) / (h1 * h1);
            Au[k] = basis.eigenvalue(k) * traj.u[i][k];
        }
        const auto b = model.grid().kernel_weights(model.kernel(), traj.t[i]);
        const ModalField mem = memory_term(traj.eta[i], b, basis);
        const ModalField fu = model.config().f.is_zero()
                                  ? basis.zero()
                                  : apply_nonlinearity(traj.u[i], model.config().f, basis);
        const ModalField r = utt + Au + mem + fu - model.g();
        const double scale = std::max({l2(utt), l2(Au), l2(mem), l2(fu), l2(model.g())});
        if (scale > 0.0) worst = std::max(worst, l2(r) / scale);
    }
    return worst;
}

// ---------------------------------------------------------------------------

Equilibrium solve_equilibrium(const SpectralBasis& basis, const Nonlinearity& f,
                              const ModalField& g, double tol, std::size_t max_iter) {
    const std::size_t n = basis.n_modes();
    Equilibrium eq;
    eq.u = basis.zero();
    const ModalField gg = g.size() == 0 ? basis.zero() : g;
    const double gnorm = std::max(1.0, l2(gg));
    for (std::size_t it = 0; it < max_iter; ++it) {
        const ModalField fu = f.is_zero() ? basis.zero() : apply_nonlinearity(eq.u, f, basis);
        ModalField r(n);
        for (std::size_t k = 0; k < n; ++k) r[k] = basis.eigenvalue(k) * eq.u[k] + fu[k] - gg[k];
        eq.residual = l2(r) / gnorm;
        eq.iterations = it;
        if (eq.residual < tol) {
            eq.converged = true;
            return eq;
        }
        double c = 0.0;
        for (double x : to_physical(eq.u, basis)) c = std::max(c, f.derivative(x));
        for (std::size_t k = 0; k < n; ++k) {
            eq.u[k] = (gg[k] - fu[k] + c * eq.u[k]) / (basis.eigenvalue(k) + c);
        }
    }
    return eq;
}

double state_norm_sq(const SimState& s, const Model& model) {
    const auto b = model.grid().kernel_weights(model.kernel(), s.t);
    return sigma_norm_sq(s.u, model.basis(), 1.0) + sigma_norm_sq(s.v, model.basis(), 0.0) +
           m_norm_sq(s.eta, b, model.basis());
}

LipschitzProbe lipschitz_probe(const Model& model, double tau, const ModalField& u0,
                               const ModalField& v0, const ModalField& direction, double delta,
                               double t_end) {
    SolverConfig cfg = model.config();
    cfg.store_history = true;
    const Model m(model.basis(), model.kernel_ptr(), model.grid(), cfg);
    const double dn = sigma_norm(direction, m.basis(), 1.0);
    if (!(dn > 0.0)) throw ConfigError("lipschitz_probe: zero perturbation direction");
    ModalField u1 = u0;
    for (std::size_t k = 0; k < u1.size(); ++k) u1[k] += delta * direction[k] / dn;
    const Trajectory a = simulate(m, tau, u0, v0, t_end);
    const Trajectory b = simulate(m, tau, u1, v0, t_end);
    LipschitzProbe p;
    p.delta = delta;
    for (std::size_t i = 0; i < a.t.size(); ++i) {
        const auto w = m.grid().kernel_weights(m.kernel(), a.t[i]);
        const double d2 = sigma_norm_sq(a.u[i] - b.u[i], m.basis(), 1.0) +
                          sigma_norm_sq(a.v[i] - b.v[i], m.basis(), 0.0) +
                          m_norm_sq(a.eta[i] - b.eta[i], w, m.basis());
        p.t.push_back(a.t[i]);
        p.distance.push_back(std::sqrt(std::max(0.0, d2)));
    }
    // least-squares slope of log(d/delta) against t - tau through the origin
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < p.t.size(); ++i) {
        const double x = p.t[i] - tau;
        const double y = std::log(std::max(p.distance[i], 1e-300) / delta);
        sxx += x * x;
        sxy += x * y;
    }
    p.rate = sxx > 0.0 ? sxy / sxx : 0.0;
    for (std::size_t i = 0; i < p.t.size(); ++i) {
        p.constant = std::max(p.constant, p.distance[i] / (delta * std::exp(p.rate * (p.t[i] - tau))));
    }
    return p;
}

// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'V', 'M', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& os, const T& x) {
    os.write(reinterpret_cast<const char*>(&x), sizeof(T));
}

void put_array(std::ostream& os, const double* p, std::size_t n) {
    os.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
}

template <class T>
T get(std::istream& is) {
    T x{};
    is.read(reinterpret_cast<char*>(&x), sizeof(T));
    if (!is) throw ConfigError("checkpoint: truncated file");
    return x;
}

void get_array(std::istream& is, double* p, std::size_t n) {
    is.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
    if (!is) throw ConfigError("checkpoint: truncated file");
}

ModalField get_field(std::istream& is, std::size_t n) {
    ModalField f(n);
    get_array(is, f.coefficients().data(), n);
    return f;
}

}  // namespace

void write_checkpoint(std::ostream& os, const SimState& s, const Model& model) {
    const std::uint64_t N = model.n_modes();
    const std::uint64_t J = model.grid().size();
    os.write(kMagic, 4);
    put(os, kVersion);
    put(os, N);
    put(os, J);
    put(os, static_cast<std::uint64_t>(s.steps));
    put(os, s.tau);
    put(os, s.t);
    put(os, model.dt());
    put_array(os, model.grid().nodes().data(), J);
    put_array(os, s.u.coefficients().data(), N);
    put_array(os, s.v.coefficients().data(), N);
    put_array(os, s.eta.data().data(), N * J);
    put_array(os, s.eta_tau.data().data(), N * J);
    put_array(os, s.buffer.u_tau().coefficients().data(), N);
    put(os, s.buffer.horizon());
    put(os, static_cast<std::uint64_t>(s.buffer.size()));
    for (std::size_t i = 0; i < s.buffer.size(); ++i) {
        put(os, s.buffer.times()[i]);
        put_array(os, s.buffer.u_values()[i].coefficients().data(), N);
        put_array(os, s.buffer.v_values()[i].coefficients().data(), N);
    }
    put(os, static_cast<std::uint64_t>(s.base_steps));
    put_array(os, s.eta_base.data().data(), N * J);
    put_array(os, s.u_base.coefficients().data(), N);
    if (!os) throw ConfigError("checkpoint: write failed");
}

SimState read_checkpoint(std::istream& is, const Model& model) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0) throw ConfigError("checkpoint: bad magic");
    if (get<std::uint32_t>(is) != kVersion) throw ConfigError("checkpoint: unsupported version");
    const auto N = get<std::uint64_t>(is);
    const auto J = get<std::uint64_t>(is);
    if (N != model.n_modes() || J != model.grid().size()) {
        throw ConfigError("checkpoint: N/J do not match the configured model");
    }
    SimState s;
    s.steps = get<std::uint64_t>(is);
    s.tau = get<double>(is);
    s.t = get<double>(is);
    const double dt = get<double>(is);
    if (dt != model.dt()) throw ConfigError("checkpoint: dt differs from the configured model");
    std::vector<double> nodes(J);
    get_array(is, nodes.data(), J);
    if (nodes != model.grid().nodes()) throw ConfigError("checkpoint: s-grid differs");
    s.u = get_field(is, N);
    s.v = get_field(is, N);
    s.eta = HistoryField(N, J, s.t);
    get_array(is, s.eta.data().data(), N * J);
    s.eta_tau = HistoryField(N, J, s.tau);
    get_array(is, s.eta_tau.data().data(), N * J);
    const ModalField u_tau = get_field(is, N);
    const double horizon = get<double>(is);
    const auto B = get<std::uint64_t>(is);
    if (B == 0) throw ConfigError("checkpoint: empty buffer");
    std::deque<double> times;
    std::deque<ModalField> us, vs;
    for (std::uint64_t i = 0; i < B; ++i) {
        times.push_back(get<double>(is));
        us.push_back(get_field(is, N));
        vs.push_back(get_field(is, N));
    }
    try {
        s.buffer = PastBuffer::restore(s.tau, u_tau, horizon, std::move(times), std::move(us),
                                       std::move(vs));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("checkpoint: ") + e.what());
    }
    s.base_steps = get<std::uint64_t>(is);
    s.eta_base = HistoryField(N, J, s.tau + static_cast<double>(s.base_steps) * dt);
    get_array(is, s.eta_base.data().data(), N * J);
    s.u_base = get_field(is, N);
    return s;
}

}  // namespace viscomem
