#pragma once

/// @file spectral.hpp
/// @brief Dirichlet-Laplacian eigenbasis on (0, L), modal fields and the
/// collocation machinery used to evaluate polynomial nonlinearities.

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace viscomem {

/// Coefficients of a field in the orthonormal basis sqrt(2/L) sin(k pi x / L).
class ModalField {
public:
    ModalField() = default;
    explicit ModalField(std::size_t n_modes, double value = 0.0) : c_(n_modes, value) {}
    explicit ModalField(std::vector<double> coefficients) : c_(std::move(coefficients)) {}
    ModalField(std::initializer_list<double> coefficients) : c_(coefficients) {}

    /// Unit vector along mode k (1-based, matching the eigenvalue index).
    static ModalField unit(std::size_t n_modes, std::size_t k);

    std::size_t size() const { return c_.size(); }
    double& operator[](std::size_t i) { return c_[i]; }
    double operator[](std::size_t i) const { return c_[i]; }

    std::span<double> coefficients() { return c_; }
    std::span<const double> coefficients() const { return c_; }
    const std::vector<double>& vector() const { return c_; }

    ModalField& operator+=(const ModalField& o);
    ModalField& operator-=(const ModalField& o);
    ModalField& operator*=(double a);

    bool all_finite() const;
    bool operator==(const ModalField& o) const = default;

private:
    std::vector<double> c_;
};

ModalField operator+(ModalField a, const ModalField& b);
ModalField operator-(ModalField a, const ModalField& b);
ModalField operator*(double s, ModalField a);

/// Eigenpairs of A = -d^2/dx^2 with Dirichlet conditions on (0, L), truncated
/// to N modes, plus a P-point interior collocation grid (P >= 2N).
class SpectralBasis {
public:
    SpectralBasis(double length, std::size_t n_modes, std::size_t n_points = 0);

    double length() const { return length_; }
    std::size_t n_modes() const { return n_modes_; }
    std::size_t n_points() const { return n_points_; }

    /// lambda_k = (k pi / L)^2 for k = 1..N, stored 0-based.
    double eigenvalue(std::size_t index) const { return eigenvalues_[index]; }
    const std::vector<double>& eigenvalues() const { return eigenvalues_; }
    double lambda1() const { return eigenvalues_.front(); }
    double lambda_max() const { return eigenvalues_.back(); }

    const std::vector<double>& nodes() const { return nodes_; }
    /// Uniform quadrature weight L / (P + 1) of the interior collocation grid.
    double node_weight() const { return weight_; }

    /// phi_k(x_i), row-major k * P + i.
    double phi(std::size_t k, std::size_t i) const { return phi_[k * n_points_ + i]; }

    ModalField zero() const { return ModalField(n_modes_); }

private:
    double length_;
    std::size_t n_modes_;
    std::size_t n_points_;
    double weight_;
    std::vector<double> eigenvalues_;
    std::vector<double> nodes_;
    std::vector<double> phi_;
};

/// (sum_k lambda_k^sigma u_k^2)^{1/2}.
double sigma_norm(const ModalField& u, const SpectralBasis& basis, double sigma);
double sigma_norm_sq(const ModalField& u, const SpectralBasis& basis, double sigma);
double sigma_inner(const ModalField& u, const ModalField& w, const SpectralBasis& basis,
                   double sigma);

std::vector<double> to_physical(const ModalField& u, const SpectralBasis& basis);
ModalField from_physical(std::span<const double> values, const SpectralBasis& basis);

/// Quadrature of the product of two grid functions on the collocation grid.
double grid_integral(std::span<const double> values, const SpectralBasis& basis);

/// f(u) = cubic * u^3 + linear * u, together with the constants theta, c_f of
/// the lower bounds 2<F(u),1> >= -(1-theta)|u|_1^2 - c_f and
/// 2<f(u),u> >= 2<F(u),1> - (1-theta)|u|_1^2 - c_f.
struct Nonlinearity {
    double cubic = 1.0;
    double linear = 0.0;
    double theta = 1.0;
    double c_f = 0.0;

    /// Default constants for the given coefficients: theta = 1 and c_f = 0
    /// when linear >= 0, otherwise theta = 1 and c_f = L linear^2 / (2 cubic) (a
    /// pointwise bound on u^4/2 + a u^2 that also covers the second relation).
    static Nonlinearity polynomial(double cubic, double linear, const SpectralBasis& basis);
    static Nonlinearity none() { return {0.0, 0.0, 1.0, 0.0}; }

    double value(double u) const { return cubic * u * u * u + linear * u; }
    double derivative(double u) const { return 3.0 * cubic * u * u + linear; }
    double second_derivative(double u) const { return 6.0 * cubic * u; }
    double antiderivative(double u) const {
        const double u2 = u * u;
        return 0.25 * cubic * u2 * u2 + 0.5 * linear * u2;
    }
    /// inf over R of f'(u); requires cubic >= 0.
    double min_derivative() const { return linear; }
    bool is_zero() const { return cubic == 0.0 && linear == 0.0; }
};

/// Modal coefficients of f(u) by collocation (transform, pointwise, inverse).
ModalField apply_nonlinearity(const ModalField& u, const Nonlinearity& f,
                              const SpectralBasis& basis);

/// <F(u), 1> by quadrature on the collocation grid (exact for degree 4).
double integral_antiderivative(const ModalField& u, const Nonlinearity& f,
                               const SpectralBasis& basis);

/// Outcome of sampling the structural assumptions on f.
struct NonlinearityCheck {
    bool dissipative = false;        ///< inf f' > -lambda_1
    double min_derivative = 0.0;
    double worst_slack_F = 0.0;      ///< min over samples of 2<F,1> + (1-theta)|u|_1^2 + c_f
    double worst_slack_fu = 0.0;     ///< min over samples of the second relation
    bool bounds_hold = false;
};

/// Samples f' on [-range, range] and the two lower bounds on the supplied
/// fields.
NonlinearityCheck check_nonlinearity(const Nonlinearity& f, const SpectralBasis& basis,
                                     std::span<const ModalField> samples,
                                     double derivative_range = 100.0,
                                     double tolerance = 1e-12);

}  // namespace viscomem
