#include "viscomem/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace viscomem {

ModalField ModalField::unit(std::size_t n_modes, std::size_t k) {
    if (k == 0 || k > n_modes) {
        throw std::invalid_argument("ModalField::unit: mode index out of range");
    }
    ModalField e(n_modes);
    e[k - 1] = 1.0;
    return e;
}

ModalField& ModalField::operator+=(const ModalField& o) {
    if (o.size() != size()) throw std::invalid_argument("ModalField: size mismatch");
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += o.c_[i];
    return *this;
}

ModalField& ModalField::operator-=(const ModalField& o) {
    if (o.size() != size()) throw std::invalid_argument("ModalField: size mismatch");
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] -= o.c_[i];
    return *this;
}

ModalField& ModalField::operator*=(double a) {
    for (double& x : c_) x *= a;
    return *this;
}

bool ModalField::all_finite() const {
    return std::all_of(c_.begin(), c_.end(), [](double x) { return std::isfinite(x); });
}

ModalField operator+(ModalField a, const ModalField& b) { return a += b; }
ModalField operator-(ModalField a, const ModalField& b) { return a -= b; }
ModalField operator*(double s, ModalField a) { return a *= s; }

SpectralBasis::SpectralBasis(double length, std::size_t n_modes, std::size_t n_points)
    : length_(length), n_modes_(n_modes), n_points_(n_points == 0 ? 2 * n_modes : n_points) {
    if (!(length > 0.0) || !std::isfinite(length)) {
        throw std::invalid_argument("SpectralBasis: length must be positive");
    }
    if (n_modes == 0) throw std::invalid_argument("SpectralBasis: need at least one mode");
    if (n_points_ < 2 * n_modes_) {
        throw std::invalid_argument("SpectralBasis: collocation size P=" +
                                    std::to_string(n_points_) + " must be >= 2N=" +
                                    std::to_string(2 * n_modes_));
    }
    const double pi = std::numbers::pi;
    weight_ = length_ / static_cast<double>(n_points_ + 1);
    eigenvalues_.resize(n_modes_);
    for (std::size_t k = 0; k < n_modes_; ++k) {
        const double w = static_cast<double>(k + 1) * pi / length_;
        eigenvalues_[k] = w * w;
    }
    nodes_.resize(n_points_);
    for (std::size_t i = 0; i < n_points_; ++i) nodes_[i] = weight_ * static_cast<double>(i + 1);

    const double norm = std::sqrt(2.0 / length_);
    const double denom = static_cast<double>(n_points_ + 1);
    phi_.resize(n_modes_ * n_points_);
    for (std::size_t k = 0; k < n_modes_; ++k) {
        for (std::size_t i = 0; i < n_points_; ++i) {
            // Reduce (k+1)(i+1) mod 2(P+1) so the sine argument stays in [0, 2 pi).
            const auto m = ((k + 1) * (i + 1)) % (2 * (n_points_ + 1));
            phi_[k * n_points_ + i] = norm * std::sin(pi * static_cast<double>(m) / denom);
        }
    }
}

double sigma_norm_sq(const ModalField& u, const SpectralBasis& basis, double sigma) {
    if (u.size() != basis.n_modes()) throw std::invalid_argument("sigma_norm: size mismatch");
    double acc = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
        acc += std::pow(basis.eigenvalue(k), sigma) * u[k] * u[k];
    }
    return acc;
}

double sigma_norm(const ModalField& u, const SpectralBasis& basis, double sigma) {
    return std::sqrt(sigma_norm_sq(u, basis, sigma));
}

double sigma_inner(const ModalField& u, const ModalField& w, const SpectralBasis& basis,
                   double sigma) {
    if (u.size() != basis.n_modes() || w.size() != basis.n_modes()) {
        throw std::invalid_argument("sigma_inner: size mismatch");
    }
    double acc = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
        acc += std::pow(basis.eigenvalue(k), sigma) * u[k] * w[k];
    }
    return acc;
}

std::vector<double> to_physical(const ModalField& u, const SpectralBasis& basis) {
    if (u.size() != basis.n_modes()) {
        throw std::invalid_argument("to_physical: field has " + std::to_string(u.size()) +
                                    " modes, basis has " + std::to_string(basis.n_modes()));
    }
    const std::size_t P = basis.n_points();
    std::vector<double> out(P, 0.0);
    for (std::size_t k = 0; k < u.size(); ++k) {
        const double c = u[k];
        if (c == 0.0) continue;
        for (std::size_t i = 0; i < P; ++i) out[i] += c * basis.phi(k, i);
    }
    return out;
}

ModalField from_physical(std::span<const double> values, const SpectralBasis& basis) {
    if (values.size() != basis.n_points()) {
        throw std::invalid_argument("from_physical: grid has " + std::to_string(values.size()) +
                                    " points, basis expects " +
                                    std::to_string(basis.n_points()));
    }
    ModalField u(basis.n_modes());
    const double h = basis.node_weight();
    for (std::size_t k = 0; k < basis.n_modes(); ++k) {
        double acc = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i) acc += basis.phi(k, i) * values[i];
        u[k] = h * acc;
    }
    return u;
}

double grid_integral(std::span<const double> values, const SpectralBasis& basis) {
    if (values.size() != basis.n_points()) throw std::invalid_argument("grid_integral: size");
    double acc = 0.0;
    for (double v : values) acc += v;
    return basis.node_weight() * acc;
}

Nonlinearity Nonlinearity::polynomial(double cubic, double linear, const SpectralBasis& basis) {
    if (cubic < 0.0) throw std::invalid_argument("Nonlinearity: cubic coefficient must be >= 0");
    if (!(linear > -basis.lambda1())) {
        throw std::invalid_argument("Nonlinearity: linear coefficient a=" + std::to_string(linear) +
                                    " violates a > -lambda_1=" +
                                    std::to_string(-basis.lambda1()));
    }
    Nonlinearity f{cubic, linear, 1.0, 0.0};
    if (linear < 0.0) {
        if (cubic > 0.0) {
            // min_u (cubic u^4 / 2 + a u^2) = -a^2 / (2 cubic)
            f.c_f = basis.length() * linear * linear / (2.0 * cubic);
        } else {
            // linear f: 2<F,1> = a|u|^2 >= (a / lambda_1)|u|_1^2
            f.theta = 1.0 + linear / basis.lambda1();
        }
    }
    return f;
}

ModalField apply_nonlinearity(const ModalField& u, const Nonlinearity& f,
                              const SpectralBasis& basis) {
    auto grid = to_physical(u, basis);
    for (double& x : grid) x = f.value(x);
    return from_physical(grid, basis);
}

double integral_antiderivative(const ModalField& u, const Nonlinearity& f,
                               const SpectralBasis& basis) {
    auto grid = to_physical(u, basis);
    for (double& x : grid) x = f.antiderivative(x);
    return grid_integral(grid, basis);
}

NonlinearityCheck check_nonlinearity(const Nonlinearity& f, const SpectralBasis& basis,
                                     std::span<const ModalField> samples,
                                     double derivative_range, double tolerance) {
    NonlinearityCheck out;
    double min_d = f.derivative(0.0);
    constexpr int n = 4001;
    for (int i = 0; i < n; ++i) {
        const double x = -derivative_range + 2.0 * derivative_range * i / (n - 1);
        min_d = std::min(min_d, f.derivative(x));
    }
    out.min_derivative = min_d;
    out.dissipative = min_d > -basis.lambda1();

    out.worst_slack_F = std::numeric_limits<double>::infinity();
    out.worst_slack_fu = std::numeric_limits<double>::infinity();
    for (const auto& u : samples) {
        const double two_F = 2.0 * integral_antiderivative(u, f, basis);
        const double h1 = sigma_norm_sq(u, basis, 1.0);
        auto grid = to_physical(u, basis);
        std::vector<double> fu(grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i) fu[i] = f.value(grid[i]) * grid[i];
        const double two_fu = 2.0 * grid_integral(fu, basis);
        out.worst_slack_F = std::min(out.worst_slack_F, two_F + (1.0 - f.theta) * h1 + f.c_f);
        out.worst_slack_fu =
            std::min(out.worst_slack_fu, two_fu - two_F + (1.0 - f.theta) * h1 + f.c_f);
    }
    if (samples.empty()) {
        out.worst_slack_F = 0.0;
        out.worst_slack_fu = 0.0;
    }
    out.bounds_hold = out.worst_slack_F >= -tolerance && out.worst_slack_fu >= -tolerance;
    return out;
}

}  // namespace viscomem
