#include "doctest.h"

#include <cmath>

#include "support/oracles.hpp"
#include "viscomem/kernel.hpp"

using namespace viscomem;

namespace {

double quad_mass(const KernelFamily& k, double t) {
    return oracle::gauss_to_infinity([&](double s) { return k.mu(t, s); }, 0.0, k.scale(t));
}

void check_only_failure(const AxiomReport& rep, const std::string& id) {
    REQUIRE(rep.axioms.size() == 8);
    for (const auto& a : rep.axioms) {
        CAPTURE(a.id);
        if (a.id == id) {
            CHECK(a.verdict == Verdict::fail);
        } else {
            CHECK(a.verdict == Verdict::pass);
        }
    }
}

}  // namespace

TEST_CASE("certified families pass every axiom") {
    for (const auto& spec : {nlohmann::json{{"family", "rescaled"}, {"c", 0.4}},
                             nlohmann::json{{"family", "rheological"}},
                             nlohmann::json{{"family", "constant"}, {"delta0", 2.0}}}) {
        CAPTURE(spec.dump());
        const auto rep = certify_axioms(*make_kernel(spec));
        CHECK(rep.passed() == 8);
        CHECK(rep.failed_ids().empty());
    }
}

TEST_CASE("mutated kernels fail exactly the dissipation axiom with a witness") {
    for (const auto& spec : {nlohmann::json{{"family", "rescaled"}, {"increasing", true}},
                             nlohmann::json{{"family", "rheological"}, {"alpha", 5.0}},
                             nlohmann::json{{"family", "oscillating"}}}) {
        CAPTURE(spec.dump());
        const auto k = make_kernel(spec);
        const auto rep = certify_axioms(*k);
        check_only_failure(rep, "M4");
        const auto& m4 = rep.axiom("M4");
        // The witness violates d/dt mu + d/ds mu <= 0.
        const double t = m4.witness_t, s = m4.witness_s;
        CHECK(k->dmu_dt(t, s) + k->dmu_ds(t, s) > 0.0);
    }
}

TEST_CASE("zero kernel fails the positive-mass axiom") {
    const auto rep = certify_axioms(ConstantKernel(1.0, 0.0));
    CHECK(rep.axiom("M5").verdict == Verdict::fail);
}

TEST_CASE("rescaled kernel: mass is 1/eps(t) and mu_t(0) = kappa^2") {
    const RescaledKernel k(0.4);
    for (double t : {-5.0, 0.0, 1.0, 7.5}) {
        const double eps = 0.4 * (M_PI / 2 - std::atan(t));
        CHECK(k.epsilon(t) == doctest::Approx(eps).epsilon(1e-14));
        CHECK(k.kappa(t) == doctest::Approx(1.0 / eps).epsilon(1e-14));
        CHECK(quad_mass(k, t) == doctest::Approx(1.0 / eps).epsilon(1e-8));
        CHECK(k.mu(t, 0.0) / (k.kappa(t) * k.kappa(t)) == doctest::Approx(1.0).epsilon(1e-12));
        // int_0^inf k_t = int s mu_t = 1 for every t.
        const double km = oracle::gauss_to_infinity([&](double s) { return k.k(t, s); }, 0.0, eps);
        CHECK(km == doctest::Approx(1.0).epsilon(1e-8));
    }
}

TEST_CASE("rheological kernel: mass is K0(t)/rho and mu_t(0)/kappa^2 = rho/gamma") {
    const double rho = 2.0, gamma = 0.5, alpha = 0.3;
    const RheologicalKernel k(rho, gamma, alpha);
    for (double t : {-4.0, 0.0, 2.0, 6.0}) {
        const double K0 = 1.0 + std::exp(alpha * t);
        CHECK(k.stiffness(t) == doctest::Approx(K0));
        CHECK(quad_mass(k, t) == doctest::Approx(K0 / rho).epsilon(1e-8));
        CHECK(k.mu(t, 0.0) / std::pow(k.kappa(t), 2) == doctest::Approx(rho / gamma).epsilon(1e-12));
    }
    CHECK(k.limit_mass().value() == doctest::Approx(gamma / rho));
}

TEST_CASE("closed-form derivatives agree with finite differences") {
    const RescaledKernel r(0.3);
    const RheologicalKernel h(1.0, 1.0, 0.5);
    const OscillatingKernel o;
    for (const KernelFamily* k : {static_cast<const KernelFamily*>(&r), static_cast<const KernelFamily*>(&h),
                                  static_cast<const KernelFamily*>(&o)}) {
        CAPTURE(k->name());
        for (double t : {-2.0, 0.5, 3.0}) {
            for (double s : {0.05, 0.3, 1.2}) {
                const double e = 1e-6;
                const double ds = (k->mu(t, s + e) - k->mu(t, s - e)) / (2 * e);
                const double dt = (k->mu(t + e, s) - k->mu(t - e, s)) / (2 * e);
                const double sc = std::abs(k->mu(t, 0.0)) + 1.0;
                CHECK(std::abs(k->dmu_ds(t, s) - ds) < 1e-6 * sc);
                CHECK(std::abs(k->dmu_dt(t, s) - dt) < 1e-6 * sc);
                // k_t(s) = int_s^inf mu_t.
                const double tail = oracle::gauss_to_infinity([&](double y) { return k->mu(t, y); }, s,
                                                              k->scale(t));
                CHECK(k->k(t, s) == doctest::Approx(tail).epsilon(1e-7));
            }
        }
    }
}

TEST_CASE("identities reported by the certifier are within 1e-6") {
    const auto rep = certify_axioms(RheologicalKernel());
    CHECK(rep.identities.at("kappa_vs_quadrature_rel").get<double>() < 1e-6);
    CHECK(std::abs(rep.identities.at("mu0_over_kappa_sq_min").get<double>() - 1.0) < 1e-6);
    CHECK(std::abs(rep.identities.at("mu0_over_kappa_sq_max").get<double>() - 1.0) < 1e-6);
    const auto cons = k_of_mu_consistency(RescaledKernel(), {-3.0, 0.0, 3.0});
    CHECK(cons.max_k_residual < 1e-6);
    CHECK(cons.max_derivative_residual < 1e-6);
}

TEST_CASE("delta convergence of the rescaled family to unit mass") {
    const RescaledKernel k(0.4);
    const std::vector<double> times{1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1024};
    const auto d = certify_delta_convergence(k, times);
    CHECK(d.certified);
    CHECK(d.mass == doctest::Approx(1.0).epsilon(1e-3));
    for (const auto& tab : d.tables) {
        if (tab.eps_cut == 0.0) continue;
        // int_cut^inf k_t = (1 + cut/eps) e^{-cut/eps}
        const double eps = k.epsilon(times.back());
        const double ref = (1.0 + tab.eps_cut / eps) * std::exp(-tab.eps_cut / eps);
        CHECK(tab.values.back() == doctest::Approx(ref).epsilon(1e-5).scale(1e-12));
    }
    CHECK_FALSE(certify_delta_convergence(ConstantKernel(), times).certified);
}

TEST_CASE("unknown family and bad parameters are rejected") {
    CHECK_THROWS_AS(make_kernel({{"family", "gamma"}}), std::invalid_argument);
    CHECK_THROWS(make_kernel({{"family", "rescaled"}, {"c", -1.0}}));
    CHECK_THROWS(make_kernel({{"family", "rheological"}, {"rho", 0.0}}));
}

TEST_CASE("tail point bounds the integrated kernel") {
    const RescaledKernel k(0.4);
    const double s = k.tail_point(1.0, 1e-8);
    CHECK(k.k(1.0, s) <= 1e-8 * k.k(1.0, 0.0) * (1 + 1e-9));
    CHECK(k.k(1.0, 0.9 * s) > 1e-8 * k.k(1.0, 0.0));
}
