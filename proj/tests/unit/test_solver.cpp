#include "doctest.h"

#include <cmath>
#include <limits>
#include <sstream>

#include "viscomem/solver.hpp"

using namespace viscomem;

namespace {

Model make(std::size_t N, KernelPtr k, double dt, std::size_t J, Nonlinearity f, ModalField g = {},
           double t_lo = 0.0, double t_hi = 10.0) {
    SpectralBasis basis(1.0, N);
    SGrid grid = SGrid::for_kernel(*k, t_lo, t_hi, J);
    SolverConfig cfg;
    cfg.dt = dt;
    cfg.f = f;
    cfg.g = std::move(g);
    cfg.output_stride = 1;
    return Model(std::move(basis), std::move(k), std::move(grid), cfg);
}

/// u'' + lambda u + lambda m (u - z) = 0, z' = delta (u - z), z(0) = u(0): a single
/// mode under mu = m delta e^{-delta s} with constant history. Classical RK4.
double exponential_memory_oracle(double lambda, double m, double delta, double u0, double v0, double T) {
    const int n = 200000;
    const double h = T / n;
    double y[3] = {u0, v0, u0};
    auto rhs = [&](const double* s, double* d) {
        d[0] = s[1];
        d[1] = -lambda * s[0] - lambda * m * (s[0] - s[2]);
        d[2] = delta * (s[0] - s[2]);
    };
    for (int i = 0; i < n; ++i) {
        double k1[3], k2[3], k3[3], k4[3], t[3];
        rhs(y, k1);
        for (int c = 0; c < 3; ++c) t[c] = y[c] + 0.5 * h * k1[c];
        rhs(t, k2);
        for (int c = 0; c < 3; ++c) t[c] = y[c] + 0.5 * h * k2[c];
        rhs(t, k3);
        for (int c = 0; c < 3; ++c) t[c] = y[c] + h * k3[c];
        rhs(t, k4);
        for (int c = 0; c < 3; ++c) y[c] += h / 6.0 * (k1[c] + 2 * k2[c] + 2 * k3[c] + k4[c]);
    }
    return y[0];
}

}  // namespace

TEST_CASE("free oscillation converges at second order in dt") {
    const auto zero = std::make_shared<ConstantKernel>(1.0, 0.0);
    const double T = 2.4;  // away from the phase where cos is stationary
    std::vector<double> err;
    for (double dt : {0.02, 0.01, 0.005}) {
        const Model m = make(2, zero, dt, 40, Nonlinearity::none(), {}, 0.0, T);
        const Trajectory tr = simulate(m, 0.0, ModalField{1.0, 0.0}, ModalField{0.0, 0.0}, T);
        const double w = std::sqrt(m.basis().lambda1());
        err.push_back(std::abs(tr.u.back()[0] - std::cos(w * T)));
        // Crank-Nicolson conserves the oscillator energy.
        const double E = m.basis().lambda1() * tr.u.back()[0] * tr.u.back()[0] + tr.v.back()[0] * tr.v.back()[0];
        CHECK(E == doctest::Approx(m.basis().lambda1()).epsilon(1e-12));
    }
    CHECK(std::log2(err[0] / err[1]) == doctest::Approx(2.0).epsilon(0.1));
    CHECK(std::log2(err[1] / err[2]) == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("exponential memory matches the augmented ODE at first order") {
    const double m0 = 0.8, delta = 2.0, T = 3.0;
    const auto k = std::make_shared<ConstantKernel>(delta, m0);
    const double lambda = M_PI * M_PI;
    const double ref = exponential_memory_oracle(lambda, m0, delta, 1.0, 0.0, T);
    std::vector<double> err;
    for (auto [dt, J] : {std::pair{0.01, 200u}, std::pair{0.005, 400u}, std::pair{0.0025, 800u}}) {
        const Model m = make(1, k, dt, J, Nonlinearity::none(), {}, 0.0, T);
        const Trajectory tr = simulate(m, 0.0, ModalField{1.0}, ModalField{0.0}, T);
        err.push_back(std::abs(tr.u.back()[0] - ref));
    }
    CHECK(err[2] < 2e-2 * std::abs(ref) + 1e-3);
    CHECK(err[1] < err[0]);
    CHECK(err[2] < err[1]);
    const double order = std::log2(err[1] / err[2]);
    CHECK(order > 0.8);
    CHECK(order < 2.2);
}

TEST_CASE("Kelvin-Voigt step matches the damped oscillator closed form") {
    // u'' + m lambda u' + lambda u = 0 with u(0) = 1, u'(0) = 0 (underdamped).
    const SpectralBasis basis(1.0, 1);
    const double lambda = basis.lambda1(), m = 0.05, T = 2.0;
    const double a = 0.5 * m * lambda, w = std::sqrt(lambda - a * a);
    const double ref = std::exp(-a * T) * (std::cos(w * T) + a / w * std::sin(w * T));
    const Trajectory tr = kelvin_voigt_simulate(basis, Nonlinearity::none(), ModalField{0.0}, m,
                                                ModalField{1.0}, ModalField{0.0}, 0.0, T, 1e-3);
    CHECK(tr.u.back()[0] == doctest::Approx(ref).epsilon(1e-4).scale(1e-3));
}

TEST_CASE("equilibrium is a stationary solution") {
    const auto k = std::make_shared<RescaledKernel>(0.4);
    const ModalField g{2.0, 0.5, 0.0, -0.3};
    const Nonlinearity f{1.0, 0.0, 1.0, 0.0};
    const Model m = make(4, k, 0.005, 100, f, g, 0.0, 2.0);
    const Equilibrium eq = solve_equilibrium(m.basis(), f, g);
    REQUIRE(eq.converged);
    // A u + f(u) = g checked independently of the solver iteration.
    ModalField r = apply_nonlinearity(eq.u, f, m.basis());
    for (std::size_t k2 = 0; k2 < 4; ++k2) r[k2] += m.basis().eigenvalue(k2) * eq.u[k2] - g[k2];
    CHECK(sigma_norm(r, m.basis(), 0.0) < 1e-8);
    const Trajectory tr = simulate(m, 0.0, eq.u, m.basis().zero(), 2.0);
    CHECK(sigma_norm(tr.u.back() - eq.u, m.basis(), 1.0) < 1e-8);
    CHECK(sigma_norm(tr.v.back(), m.basis(), 0.0) < 1e-8);
}

TEST_CASE("zero data stays zero") {
    const auto k = std::make_shared<RheologicalKernel>();
    const Model m = make(4, k, 0.01, 60, Nonlinearity{1.0, 0.5, 1.0, 0.0}, {}, 0.0, 1.0);
    const Trajectory tr = simulate(m, 0.0, m.basis().zero(), m.basis().zero(), 1.0);
    for (const auto& u : tr.u) CHECK(u == m.basis().zero());
}

TEST_CASE("two-leg composition and checkpoints reproduce the one-shot run exactly") {
    const auto k = std::make_shared<RescaledKernel>(0.4);
    const Model m = make(6, k, 0.01, 120, Nonlinearity{1.0, 0.0, 1.0, 0.0}, ModalField{1.0, 0, 0, 0, 0, 0}, 0.0, 3.0);
    const ModalField u0{0.3, -0.2, 0.1, 0.0, 0.05, 0.0}, v0{0.0, 0.4, 0.0, 0.0, 0.0, 0.1};
    SimState one = initial_state(m, 0.0, u0, v0);
    simulate(one, m, 3.0);

    SimState two = initial_state(m, 0.0, u0, v0);
    simulate(two, m, 1.37);
    std::stringstream ck;
    write_checkpoint(ck, two, m);
    simulate(two, m, 3.0);
    CHECK(two.u == one.u);
    CHECK(two.v == one.v);
    CHECK(two.eta == one.eta);

    SimState restored = read_checkpoint(ck, m);
    simulate(restored, m, 3.0);
    CHECK(restored.u == one.u);
    CHECK(restored.eta == one.eta);
    CHECK(restored.steps == one.steps);
}

TEST_CASE("memory and convolution forms agree on a manufactured past") {
    const auto k = std::make_shared<RescaledKernel>(0.4);
    const Model m = make(8, k, 0.01, 400, Nonlinearity{1.0, 0.0, 1.0, 0.0}, {}, 0.0, 5.0);
    PastDescription past;
    past.tau = 0.0;
    auto u = [](double t) {
        ModalField x(8);
        x[0] = std::exp(-0.3 * t) * std::cos(2 * t);
        x[2] = 0.2 * std::sin(t);
        return x;
    };
    past.u = u;
    past.v = [](double t) {
        ModalField x(8);
        x[0] = std::exp(-0.3 * t) * (-0.3 * std::cos(2 * t) - 2 * std::sin(2 * t));
        x[2] = 0.2 * std::cos(t);
        return x;
    };
    past.u_tau = u(0.0);
    const FormResidual r = form_residual(past, ModalField(8), 3.0, m);
    CHECK(r.rel_cross < 1e-6);
}

TEST_CASE("simulated state satisfies both forms to discretization accuracy") {
    const auto k = std::make_shared<RescaledKernel>(0.4);
    const double dt = 0.01;
    const std::size_t J = 200;
    const Model m = make(8, k, dt, J, Nonlinearity{1.0, 0.0, 1.0, 0.0}, {}, 0.0, 2.0);
    SimState s = initial_state(m, 0.0, ModalField{0.5, 0.2, 0.0, 0.1, 0, 0, 0, 0}, ModalField(8));
    simulate(s, m, 2.0);
    const FormResidual r = convolution_form_residual(s, m);
    CHECK(r.rel_cross < 5.0 * (dt + 1.0 / J));
    CHECK(r.rel_direct < 5.0 * (dt + 1.0 / J));
}

TEST_CASE("weak-form residual shrinks under refinement") {
    const auto k = std::make_shared<RheologicalKernel>();
    std::vector<double> res;
    for (auto [dt, J] : {std::pair{0.01, 100u}, std::pair{0.005, 200u}}) {
        Model m = make(6, k, dt, J, Nonlinearity{1.0, 0.0, 1.0, 0.0}, ModalField{1.0, 0, 0, 0, 0, 0}, 0.0, 2.0);
        SolverConfig cfg = m.config();
        cfg.store_history = true;
        cfg.output_stride = 2;
        const Model mm(m.basis(), k, m.grid(), cfg);
        const Trajectory tr = simulate(mm, 0.0, ModalField{0.5, 0.1, 0, 0, 0, 0}, ModalField(6), 2.0);
        res.push_back(weak_form_residual(tr, mm));
    }
    CHECK(res[1] < res[0]);
}

TEST_CASE("transport history tracks the representation formula") {
    const auto k = std::make_shared<RescaledKernel>(0.4);
    const Model m = make(8, k, 0.005, 400, Nonlinearity{1.0, 0.0, 1.0, 0.0}, {}, 0.0, 4.0);
    const Trajectory tr = simulate(m, 0.0, ModalField{0.5, 0.2, 0, 0.1, 0, 0, 0, 0}, ModalField(8), 4.0);
    REQUIRE_FALSE(tr.cross_checks.empty());
    CHECK(tr.max_cross_check() < 0.02);
}

TEST_CASE("preconditions and blow-up map onto the error types") {
    const auto k = std::make_shared<RescaledKernel>(0.4);
    const Model m = make(32, k, 0.2, 100, Nonlinearity{1.0, 0.0, 1.0, 0.0}, {}, 0.0, 1.0);
    CHECK(m.dt() > m.max_dt());
    CHECK_THROWS_AS(m.validate(0.0, 1.0), ConfigError);
    const Model ok = make(2, k, 0.01, 200, Nonlinearity{1.0, 0.0, 1.0, 0.0}, {}, 0.0, 1.0);
    CHECK_NOTHROW(ok.validate(0.0, 1.0));
    ModalField bad{std::numeric_limits<double>::quiet_NaN(), 0.0};
    SimState s = initial_state(ok, 0.0, bad, ModalField(2));
    CHECK_THROWS_AS(step(s, ok), NumericError);
    CHECK(eta_mode_from_string(to_string(EtaMode::representation)) == EtaMode::representation);
    CHECK_THROWS(eta_mode_from_string("spline"));
}

TEST_CASE("Lipschitz probe constants are stable under dt halving") {
    const auto k = std::make_shared<RescaledKernel>(0.4);
    std::vector<double> rates;
    for (double dt : {0.01, 0.005}) {
        const Model m = make(6, k, dt, 100, Nonlinearity{1.0, 0.0, 1.0, 0.0}, ModalField{1.0, 0, 0, 0, 0, 0}, 0.0, 3.0);
        const auto p = lipschitz_probe(m, 0.0, ModalField{0.5, 0, 0, 0, 0, 0}, ModalField(6),
                                       ModalField{1, 1, 0, 0, 0, 0}, 1e-6, 3.0);
        CHECK(std::isfinite(p.rate));
        CHECK(p.constant >= 1.0 - 1e-9);
        rates.push_back(p.rate);
    }
    CHECK(std::abs(rates[0] - rates[1]) < 0.1 * (1.0 + std::abs(rates[1])));
}
