#include "doctest.h"

#include <cmath>
#include <random>
#include <sstream>

#include "support/oracles.hpp"
#include "viscomem/attractor.hpp"
#include "viscomem/csv.hpp"

using namespace viscomem;

namespace {

Model make(std::size_t N, KernelPtr k, double dt, std::size_t J, ModalField g, double t_lo, double t_hi) {
    SpectralBasis basis(1.0, N);
    SGrid grid = SGrid::for_kernel(*k, t_lo, t_hi, J);
    SolverConfig cfg;
    cfg.dt = dt;
    cfg.f = Nonlinearity{1.0, 0.0, 1.0, 0.0};
    cfg.g = std::move(g);
    return Model(std::move(basis), std::move(k), std::move(grid), cfg);
}

PointCloud random_cloud(std::mt19937_64& rng, std::size_t n, std::size_t N) {
    std::normal_distribution<double> d(0.0, 1.0);
    PointCloud c;
    for (std::size_t i = 0; i < n; ++i) {
        ModalField u(N), v(N);
        for (std::size_t k = 0; k < N; ++k) {
            u[k] = d(rng);
            v[k] = d(rng);
        }
        c.u.push_back(u);
        c.v.push_back(v);
    }
    return c;
}

}  // namespace

TEST_CASE("Hausdorff semidistance agrees with a brute-force oracle") {
    const SpectralBasis basis(1.0, 3);
    std::mt19937_64 rng(17);
    for (int rep = 0; rep < 10; ++rep) {
        const PointCloud B = random_cloud(rng, 30 + rep, 3), C = random_cloud(rng, 50, 3);
        struct P { ModalField u, v; };
        std::vector<P> b, c;
        for (std::size_t i = 0; i < B.size(); ++i) b.push_back({B.u[i], B.v[i]});
        for (std::size_t i = 0; i < C.size(); ++i) c.push_back({C.u[i], C.v[i]});
        auto dist = [&](const P& x, const P& y) {
            double s = 0.0;
            for (std::size_t k = 0; k < 3; ++k) {
                s += basis.eigenvalue(k) * std::pow(x.u[k] - y.u[k], 2) + std::pow(x.v[k] - y.v[k], 2);
            }
            return std::sqrt(s);
        };
        CHECK(hausdorff_semidist(B, C, basis) == doctest::Approx(oracle::semidistance(b, c, dist)).epsilon(1e-13));
        CHECK(hausdorff_distance(B, C, basis) ==
              doctest::Approx(std::max(oracle::semidistance(b, c, dist), oracle::semidistance(c, b, dist))));
    }
}

TEST_CASE("semidistance basics") {
    const SpectralBasis basis(1.0, 2);
    std::mt19937_64 rng(3);
    const PointCloud A = random_cloud(rng, 10, 2);
    PointCloud sub = A;
    sub.u.resize(4);
    sub.v.resize(4);
    CHECK(hausdorff_semidist(sub, A, basis) == 0.0);
    CHECK(hausdorff_semidist(A, sub, basis) > 0.0);
    CHECK_THROWS_AS(hausdorff_semidist(A, PointCloud{}, basis), std::invalid_argument);
    CHECK_THROWS_AS(hausdorff_semidist(A, retag(A, CloudNorm::strong), basis), std::invalid_argument);
    PointCloud origin;
    origin.u.push_back(ModalField(2));
    origin.v.push_back(ModalField(2));
    CHECK(cloud_radius(A, basis) == doctest::Approx(hausdorff_semidist(A, origin, basis)));
}

TEST_CASE("random ball members have the requested energies and are reproducible") {
    const SpectralBasis basis(1.0, 6);
    const auto sphere = random_ball(20, 7.0, basis, 5, true);
    for (const auto& d : sphere) {
        const double E = 0.5 * (sigma_norm_sq(d.u, basis, 1.0) + sigma_norm_sq(d.v, basis, 0.0));
        CHECK(E == doctest::Approx(7.0).epsilon(1e-12));
    }
    const auto ball = random_ball(20, 7.0, basis, 5);
    for (const auto& d : ball) {
        CHECK(0.5 * (sigma_norm_sq(d.u, basis, 1.0) + sigma_norm_sq(d.v, basis, 0.0)) <= 7.0 * (1 + 1e-12));
    }
    const auto again = random_ball(20, 7.0, basis, 5);
    CHECK(again[13].u == ball[13].u);
    CHECK(random_ball(20, 7.0, basis, 6)[13].u != ball[13].u);
}

TEST_CASE("unforced pullback sections collapse to the origin") {
    const auto k = std::make_shared<RescaledKernel>(0.4);
    const Model m = make(4, k, 0.01, 100, ModalField(4), -6.0, 0.0);
    const auto ens = random_ball(8, 2.0, m.basis(), 1);
    const auto r = pullback_section(m, 0.0, {-2.0, -4.0, -6.0}, ens);
    REQUIRE(r.radius.size() == 3);
    CHECK(r.radius[1] < r.radius[0]);
    CHECK(r.radius[2] < r.radius[1]);
    CHECK(r.monotone);
    CHECK(std::isfinite(r.sup_strong_sq));
    CHECK_THROWS(pullback_section(m, 0.0, {-4.0, -2.0}, ens));
}

TEST_CASE("a member at the equilibrium stays there") {
    const auto k = std::make_shared<RescaledKernel>(0.4);
    const ModalField g{1.0, 0.0, 0.0};
    const Model m = make(3, k, 0.01, 100, g, 0.0, 2.0);
    const auto eq = solve_equilibrium(m.basis(), m.config().f, g);
    const EnsembleRun run = evolve_ensemble(m, {InitialDatum{eq.u, ModalField(3)}}, 0.0, 2.0);
    const PointCloud c = project(run, 2.0);
    REQUIRE(c.size() == 1);
    CHECK(sigma_norm(c.u[0] - eq.u, m.basis(), 1.0) < 1e-9);
}

TEST_CASE("threaded ensembles are bitwise identical to serial ones") {
    const auto k = std::make_shared<RheologicalKernel>();
    const Model m = make(4, k, 0.01, 80, ModalField{1.0, 0, 0, 0}, 0.0, 1.0);
    const auto ens = random_ball(6, 3.0, m.basis(), 9);
    const PointCloud a = project(evolve_ensemble(m, ens, 0.0, 1.0, 1), 1.0);
    const PointCloud b = project(evolve_ensemble(m, ens, 0.0, 1.0, 3), 1.0);
    CHECK(a.u == b.u);
    CHECK(a.v == b.v);
}

TEST_CASE("Kelvin-Voigt estimates: origin when unforced, equilibrium when forced") {
    const SpectralBasis basis(1.0, 4);
    const Nonlinearity f{1.0, 0.0, 1.0, 0.0};
    const auto ens = random_ball(6, 2.0, basis, 4);
    const auto zero = kv_attractor_estimate(basis, f, ModalField(4), 1.0, ens, 30.0, 0.01);
    CHECK(cloud_radius(zero.cloud, basis) < 1e-6);
    CHECK(zero.contracting);
    const ModalField g{2.0, 0.0, 0.5, 0.0};
    const auto eq = solve_equilibrium(basis, f, g);
    const auto forced = kv_attractor_estimate(basis, f, g, 1.0, ens, 30.0, 0.01);
    for (std::size_t i = 0; i < forced.cloud.size(); ++i) {
        CHECK(sigma_norm(forced.cloud.u[i] - eq.u, basis, 1.0) < 1e-6);
    }
}

TEST_CASE("comparison with Kelvin-Voigt is refused without certified delta convergence") {
    const SpectralBasis basis(1.0, 2);
    SolverConfig cfg;
    cfg.f = Nonlinearity{1.0, 0.0, 1.0, 0.0};
    const auto r = kv_limit_compare(std::make_shared<ConstantKernel>(), basis, cfg,
                                    random_ball(2, 1.0, basis, 1), KvCompareConfig{});
    CHECK(r.refused);
    CHECK_FALSE(r.reason.empty());
}

TEST_CASE("cloud CSV has one row per member") {
    const SpectralBasis basis(1.0, 2);
    std::mt19937_64 rng(1);
    PointCloud c = random_cloud(rng, 5, 2);
    c.t = 3.0;
    std::stringstream ss;
    write_cloud_csv(ss, c);
    const CsvTable tab = read_csv(ss);
    const std::vector<std::string> header{"member", "t", "u_1", "u_2", "v_1", "v_2"};
    CHECK(tab.header == header);
    CHECK(tab.rows.size() == 5);
    CHECK(std::stod(tab.rows[2][3]) == c.u[2][1]);
}
