#pragma once

// Closed-form limiting spectral laws: Marchenko-Pastur and semicircle
// densities, their Stieltjes transforms, and the scalar map D(z) used to
// locate displaced eigenvalues, with its compositional inverse.

#include <cmath>
#include <complex>
#include <stdexcept>

#include "spectral_shrink/common.hpp"

namespace spectral_shrink {

using Complex = std::complex<double>;

struct SupportInterval {
    double lower;
    double upper;
};

namespace detail {

inline void require_gamma(double gamma) {
    if (!(gamma > 0.0) || !std::isfinite(gamma))
        throw std::domain_error("gamma must be finite and positive");
}

inline void require_beta(double beta) {
    if (!(beta > 0.0) || !(beta < 1.0))
        throw std::domain_error("beta must lie in (0,1)");
}

// sqrt((z-a)(z-b)) as the product of principal-branch square roots of each
// factor. Analytic off [a,b], behaves like z at infinity, and reduces to the
// positive real root for real z > b. This is the branch under which the
// Stieltjes transforms below are negative right of the support and
// Herglotz in the upper half plane.
inline Complex edge_sqrt(Complex z, double a, double b) {
    return std::sqrt(z - Complex(a)) * std::sqrt(z - Complex(b));
}

}  // namespace detail

// Support of the Marchenko-Pastur law: [(1-sqrt(g))^2, (1+sqrt(g))^2].
inline SupportInterval mp_support(double gamma) {
    detail::require_gamma(gamma);
    const double sg = std::sqrt(gamma);
    return {(1.0 - sg) * (1.0 - sg), (1.0 + sg) * (1.0 + sg)};
}

// Continuous part of the MP density. For gamma > 1 the point mass at zero is
// reported separately by mp_atom_at_zero.
inline double mp_density(double x, double gamma) {
    const SupportInterval s = mp_support(gamma);
    if (!(x > s.lower) || !(x < s.upper) || !(x > 0.0)) return 0.0;
    return std::sqrt((s.upper - x) * (x - s.lower)) /
           (2.0 * M_PI * gamma * x);
}

inline double mp_atom_at_zero(double gamma) {
    detail::require_gamma(gamma);
    return std::max(0.0, 1.0 - 1.0 / gamma);
}

// Stieltjes transform of the MP law,
//   s(z) = (1 - g - z + sqrt((z - 1 - g)^2 - 4g)) / (2 g z),
// defined off the support; satisfies g z s^2 + (z - 1 + g) s + 1 = 0.
// Evaluated in the rationalized form s = -2 / (z - 1 + g + sqrt(...)),
// which is algebraically identical and free of cancellation at large |z|.
inline Complex mp_stieltjes(Complex z, double gamma) {
    const SupportInterval s = mp_support(gamma);
    if (z == Complex(0.0))
        throw std::domain_error("mp_stieltjes: z = 0 is degenerate");
    if (z.imag() == 0.0 && z.real() >= s.lower && z.real() <= s.upper)
        throw std::domain_error("mp_stieltjes: z lies on the support");
    const Complex root = detail::edge_sqrt(z, s.lower, s.upper);
    return -2.0 / (z - Complex(1.0 - gamma) + root);
}

// Semicircle density (2pi)^-1 sqrt((4 - x^2)_+).
inline double semicircle_density(double x) {
    const double t = 4.0 - x * x;
    return t > 0.0 ? std::sqrt(t) / (2.0 * M_PI) : 0.0;
}

// Stieltjes transform of the semicircle law, s(z) = (-z + sqrt(z^2-4))/2;
// satisfies s^2 + z s + 1 = 0. The edges +-2 evaluate as one-sided limits.
// Rationalized as s = -2 / (z + sqrt(z-2) sqrt(z+2)) for stability.
inline Complex semicircle_stieltjes(Complex z) {
    if (z.imag() == 0.0 && z.real() > -2.0 && z.real() < 2.0)
        throw std::domain_error("semicircle_stieltjes: z lies inside the support");
    return -2.0 / (z + detail::edge_sqrt(z, -2.0, 2.0));
}

// D(z) = -(1 + b - z + sqrt((1+b-z)^2 - 4b)) / (2b) for real z at or beyond
// the upper bulk edge (1+sqrt(b))^2. Strictly decreasing, mapping the edge to
// b^{-1/2} and infinity to 0. The edge itself is accepted as the closed-form
// limit (the square-root term vanishes there).
inline double dbar(double z, double beta) {
    detail::require_beta(beta);
    const double edge = (1.0 + std::sqrt(beta)) * (1.0 + std::sqrt(beta));
    if (!(z >= edge))
        throw std::domain_error("dbar: z below the upper bulk edge");
    const double lo = (1.0 - std::sqrt(beta)) * (1.0 - std::sqrt(beta));
    const double root = std::sqrt(std::max(0.0, (z - lo) * (z - edge)));
    // Rationalized: -(1 + b - z + root)/(2b) without large-z cancellation.
    return 2.0 / (z - 1.0 - beta + root);
}

// Compositional inverse of dbar on (0, b^{-1/2}): t -> (t+1)(b t+1)/t.
inline double dbar_inv(double t, double beta) {
    detail::require_beta(beta);
    if (!(t > 0.0) || !(t < 1.0 / std::sqrt(beta)))
        throw std::domain_error("dbar_inv: t outside (0, beta^{-1/2})");
    return (t + 1.0) * (beta * t + 1.0) / t;
}

}  // namespace spectral_shrink
