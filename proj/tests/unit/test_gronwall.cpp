#include "doctest.h"

#include <cmath>
#include <random>
#include <sstream>

#include "support/oracles.hpp"
#include "viscomem/gronwall.hpp"

using namespace viscomem;

namespace {

GronwallInstance to_instance(const oracle::Synthesized& s) {
    GronwallInstance g;
    g.tau = s.tau;
    g.dt = s.dt;
    g.eps = s.eps;
    g.Lambda = s.Lambda;
    g.q1 = s.q1;
    g.q2 = s.q2;
    g.c1 = minimal_c1(g.q1, g.dt, g.eps);
    g.c2 = window_mass(g.q2, g.dt);
    return g;
}

double brute_c1(const std::vector<double>& q, double dt, double eps) {
    double best = 0.0;
    for (std::size_t a = 0; a < q.size(); ++a) {
        double I = 0.0;
        for (std::size_t b = a + 1; b < q.size(); ++b) {
            I += 0.5 * dt * (q[b - 1] + q[b]);
            best = std::max(best, I - eps * dt * (b - a));
        }
    }
    return best;
}

double brute_window(const std::vector<double>& q, std::size_t per_unit, double dt) {
    double best = 0.0;
    for (std::size_t a = 0; a < q.size(); ++a) {
        double I = 0.0;
        for (std::size_t b = a + 1; b < q.size() && b <= a + per_unit; ++b) I += 0.5 * dt * (q[b - 1] + q[b]);
        best = std::max(best, I);
    }
    return best;
}

}  // namespace

TEST_CASE("pure exponential decay satisfies the lemma with zero constants") {
    GronwallInstance g;
    g.dt = 0.01;
    g.eps = 0.1;
    for (int i = 0; i <= 2000; ++i) {
        g.Lambda.push_back(2.0 * std::exp(-0.2 * 0.01 * i));
        g.q1.push_back(0.0);
        g.q2.push_back(0.0);
    }
    const auto hyp = verify_hypothesis(g);
    CHECK(hyp.holds());
    const auto con = check_conclusion(g, hyp);
    CHECK(con.holds());
    CHECK(con.max_ratio == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(gronwall_bound(g, 3.0) == doctest::Approx(2.0 * std::exp(-0.3)));
}

TEST_CASE("ODE-synthesized instances satisfy hypothesis and conclusion (property)") {
    std::mt19937_64 rng(2024);
    for (int rep = 0; rep < 20; ++rep) {
        const double eps = 0.05 + 0.5 * std::uniform_real_distribution<double>(0, 1)(rng);
        const std::size_t n = 801;
        std::vector<double> q1, q2;
        oracle::random_coefficients(rng, n, 40, eps, 2.0, q1, q2);
        const auto s = oracle::synthesize(eps, 0.01, n, 5.0 * (rep + 1), q1, q2);
        const GronwallInstance g = to_instance(s);
        const auto hyp = verify_hypothesis(g);
        CAPTURE(rep);
        CHECK(hyp.holds());
        const auto con = check_conclusion(g, hyp);
        CHECK(con.holds());
        CHECK(con.violations == 0);
    }
}

TEST_CASE("excess q1 violates the budget and the conclusion is refused") {
    GronwallInstance g;
    g.dt = 0.01;
    g.eps = 0.1;
    for (int i = 0; i <= 1000; ++i) {
        g.Lambda.push_back(1.0);
        g.q1.push_back(2.0 * g.eps);
        g.q2.push_back(0.0);
    }
    const auto hyp = verify_hypothesis(g);
    CHECK_FALSE(hyp.q1_ok);
    const auto con = check_conclusion(g, hyp);
    CHECK(con.refused);
    CHECK_FALSE(con.holds());
}

TEST_CASE("an upward jump breaks the integral hypothesis") {
    GronwallInstance g;
    g.dt = 0.01;
    g.eps = 0.1;
    for (int i = 0; i <= 1000; ++i) {
        g.Lambda.push_back(i < 500 ? std::exp(-0.2 * 0.01 * i) : 10.0);
        g.q1.push_back(0.0);
        g.q2.push_back(0.0);
    }
    const auto hyp = verify_hypothesis(g);
    CHECK_FALSE(hyp.integral_ok);
    CHECK(hyp.worst_slack < 0.0);
    CHECK(check_conclusion(g, hyp).refused);
}

TEST_CASE("minimal c1 and window mass agree with brute force") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 10; ++rep) {
        std::vector<double> q(300);
        for (double& x : q) x = u(rng) * (rep % 2 ? 0.3 : 2.0);
        const double dt = 0.02;
        CHECK(minimal_c1(q, dt, 0.5) == doctest::Approx(brute_c1(q, dt, 0.5)).epsilon(1e-12));
        CHECK(window_mass(q, dt) == doctest::Approx(brute_window(q, 50, dt)).epsilon(1e-12));
    }
}

TEST_CASE("instance files round trip") {
    GronwallInstance g;
    g.tau = 1.5;
    g.dt = 0.25;
    g.eps = 0.3;
    g.c1 = 0.1;
    g.c2 = 0.2;
    g.Lambda = {3.0, 2.5, 2.0, 1.75};
    g.q1 = {0.0, 0.1, 0.0, 0.2};
    g.q2 = {0.5, 0.5, 0.0, 0.0};
    std::stringstream csv, side;
    write_instance(csv, side, g);
    const GronwallInstance back = read_instance(csv, side);
    CHECK(back.tau == g.tau);
    CHECK(back.dt == doctest::Approx(g.dt).epsilon(1e-14));
    CHECK(back.Lambda == g.Lambda);
    CHECK(back.q1 == g.q1);
    CHECK(back.q2 == g.q2);
    CHECK(back.c1 == g.c1);
    CHECK(back.c2 == g.c2);

    std::stringstream nonuniform("t,Lambda,q1,q2\r\n0,1,0,0\r\n1,1,0,0\r\n3,1,0,0\r\n");
    std::stringstream side2(R"({"tau":0,"dt":1,"eps":0.1,"c1":0,"c2":0})");
    CHECK_THROWS(read_instance(nonuniform, side2));
}

TEST_CASE("malformed instances are rejected") {
    GronwallInstance g;
    g.dt = 0.1;
    g.eps = 0.1;
    g.Lambda = {1.0, 1.0};
    g.q1 = {0.0, -1.0};
    g.q2 = {0.0, 0.0};
    CHECK_THROWS_AS(g.validate(), std::invalid_argument);
    g.q1 = {0.0};
    CHECK_THROWS_AS(g.validate(), std::invalid_argument);
}

TEST_CASE("verdicts are stable under sample refinement") {
    std::mt19937_64 rng(99);
    std::vector<double> q1c, q2c;
    oracle::random_coefficients(rng, 401, 40, 0.2, 1.0, q1c, q2c);
    // Same piecewise-constant coefficients sampled twice as densely.
    std::vector<double> q1f, q2f;
    for (std::size_t i = 0; i < 401; ++i) {
        for (int r = 0; r < 2 && q1f.size() < 801; ++r) {
            q1f.push_back(q1c[i]);
            q2f.push_back(q2c[i]);
        }
    }
    const auto gc = to_instance(oracle::synthesize(0.2, 0.02, 401, 4.0, q1c, q2c));
    const auto gf = to_instance(oracle::synthesize(0.2, 0.01, 801, 4.0, q1f, q2f));
    const auto hc = verify_hypothesis(gc), hf = verify_hypothesis(gf);
    CHECK(hc.holds());
    CHECK(hf.holds());
    const auto cc = check_conclusion(gc, hc), cf = check_conclusion(gf, hf);
    CHECK(cc.holds());
    CHECK(cf.holds());
    CHECK(std::abs(cc.max_ratio - cf.max_ratio) < 0.1 * cc.max_ratio);
}
