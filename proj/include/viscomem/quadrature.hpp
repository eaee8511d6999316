#pragma once

/// @file quadrature.hpp
/// @brief Small quadrature helpers for integrals over (0, inf) of functions
/// that vary on a characteristic scale near zero.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace viscomem::quad {

/// Geometric nodes s_lo * r^i, i = 0..n-1, ending exactly at s_hi.
inline std::vector<double> geometric_nodes(double s_lo, double s_hi, std::size_t n) {
    if (!(s_lo > 0.0) || !(s_hi > s_lo) || n < 2) {
        throw std::invalid_argument("geometric_nodes: need 0 < s_lo < s_hi and n >= 2");
    }
    std::vector<double> s(n);
    const double a = std::log(s_lo);
    const double b = std::log(s_hi);
    for (std::size_t i = 0; i < n; ++i) {
        s[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
    }
    s.front() = s_lo;
    s.back() = s_hi;
    return s;
}

/// Composite Simpson rule in x = log s on [s_lo, s_hi] (n_intervals even),
/// plus a trapezoid on [0, s_lo] when include_origin is set.
template <class F>
double integrate_log(F&& f, double s_lo, double s_hi, std::size_t n_intervals = 2000,
                     bool include_origin = true) {
    if (n_intervals % 2 != 0) ++n_intervals;
    const double a = std::log(s_lo);
    const double b = std::log(s_hi);
    const double h = (b - a) / static_cast<double>(n_intervals);
    double acc = 0.0;
    for (std::size_t i = 0; i <= n_intervals; ++i) {
        const double s = std::exp(a + h * static_cast<double>(i));
        const double w = (i == 0 || i == n_intervals) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
        acc += w * f(s) * s;
    }
    double total = acc * h / 3.0;
    if (include_origin) total += 0.5 * s_lo * (f(0.0) + f(s_lo));
    return total;
}

/// Composite Simpson rule on a uniform grid of [a, b].
template <class F>
double integrate_uniform(F&& f, double a, double b, std::size_t n_intervals = 2000) {
    if (n_intervals % 2 != 0) ++n_intervals;
    const double h = (b - a) / static_cast<double>(n_intervals);
    double acc = 0.0;
    for (std::size_t i = 0; i <= n_intervals; ++i) {
        const double w = (i == 0 || i == n_intervals) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
        acc += w * f(a + h * static_cast<double>(i));
    }
    return acc * h / 3.0;
}

/// Four-point Gauss-Legendre rule applied panel-wise on the given breakpoints.
template <class F>
double integrate_panels(F&& f, const std::vector<double>& breaks) {
    static constexpr double x[4] = {-0.8611363115940526, -0.3399810435848563,
                                    0.3399810435848563, 0.8611363115940526};
    static constexpr double w[4] = {0.3478548451374538, 0.6521451548625461,
                                    0.6521451548625461, 0.3478548451374538};
    double acc = 0.0;
    for (std::size_t p = 0; p + 1 < breaks.size(); ++p) {
        const double lo = breaks[p];
        const double hi = breaks[p + 1];
        const double mid = 0.5 * (lo + hi);
        const double half = 0.5 * (hi - lo);
        double panel = 0.0;
        for (int q = 0; q < 4; ++q) panel += w[q] * f(mid + half * x[q]);
        acc += half * panel;
    }
    return acc;
}

}  // namespace viscomem::quad
