#pragma once

// Deterministic limits of leading sample eigenvalues and eigenvector cosines
// as functions of the population spike, per asymptotic regime, together with
// the partial inverses used for spike estimation.

#include <cmath>
#include <stdexcept>
#include <utility>

#include "spectral_shrink/coordinates.hpp"

namespace spectral_shrink {

namespace detail {

inline double sign(double x) { return (x > 0.0) - (x < 0.0); }

// --- Proportional regime (raw scale) ---

inline double prop_edge_spike(double gamma) { return 1.0 + std::sqrt(gamma); }

inline double prop_eig(double ell, double gamma) {
    if (ell > prop_edge_spike(gamma)) return ell + gamma * ell / (ell - 1.0);
    const double sg = std::sqrt(gamma);
    return (1.0 + sg) * (1.0 + sg);
}

inline double prop_eig_inv(double lam, double gamma) {
    const double sg = std::sqrt(gamma);
    const double edge = (1.0 + sg) * (1.0 + sg);
    if (lam > edge) {
        const double d = (lam - 1.0 - gamma) * (lam - 1.0 - gamma) - 4.0 * gamma;
        return 0.5 * (lam + 1.0 - gamma + std::sqrt(std::max(0.0, d)));
    }
    return prop_edge_spike(gamma);
}

inline double prop_cos2(double ell, double gamma) {
    if (!(ell > prop_edge_spike(gamma))) return 0.0;
    const double em1 = ell - 1.0;
    return (1.0 - gamma / (em1 * em1)) / (1.0 + gamma / em1);
}

// --- gamma_n -> 0 regime (hat scale, unilateral) ---

inline void require_hat(double lhat) {
    if (!(lhat >= 0.0))
        throw std::domain_error("hat-scale spike must be nonnegative (use the Wigner maps bilaterally)");
}

inline double hat_eig(double lhat) {
    require_hat(lhat);
    return lhat > 1.0 ? lhat + 1.0 / lhat : 2.0;
}

inline double hat_eig_inv(double lam_hat) {
    if (lam_hat > 2.0) return 0.5 * (lam_hat + std::sqrt(lam_hat * lam_hat - 4.0));
    return 1.0;
}

inline double hat_cos2(double lhat) {
    require_hat(lhat);
    return lhat > 1.0 ? 1.0 - 1.0 / (lhat * lhat) : 0.0;
}

// --- gamma_n -> inf regime (bar scale) ---

inline void require_bar(double lbar) {
    if (!(lbar >= 0.0)) throw std::domain_error("bar-scale spike must be nonnegative");
}

inline double bar_eig(double lbar) {
    require_bar(lbar);
    return 1.0 + lbar;
}

inline double bar_eig_inv(double lam_bar) { return lam_bar - 1.0; }

inline double bar_cos2(double lbar) {
    require_bar(lbar);
    return lbar / (1.0 + lbar);
}

// --- spiked Wigner (theta scale, bilateral) ---

inline double wig_eig(double theta) {
    return std::abs(theta) > 1.0 ? theta + 1.0 / theta : 2.0 * sign(theta);
}

inline double wig_eig_inv(double lam) {
    if (std::abs(lam) > 2.0)
        return 0.5 * (lam + sign(lam) * std::sqrt(lam * lam - 4.0));
    return 0.0;
}

inline double wig_cos2(double theta) {
    return std::abs(theta) > 1.0 ? 1.0 - 1.0 / (theta * theta) : 0.0;
}

}  // namespace detail

// Limiting (normalized) leading eigenvalue produced by a spike. Inputs at or
// below the phase transition take the subcritical branch (bulk edge).
inline double eigenvalue_map(const SpikeValue& spike, const Framework& fw) {
    check_scale(spike, fw);
    switch (fw.tag) {
        case Regime::Proportional: return detail::prop_eig(spike.value, fw.gamma);
        case Regime::DisproZero: return detail::hat_eig(spike.value);
        case Regime::DisproInf: return detail::bar_eig(spike.value);
        case Regime::Wigner: return detail::wig_eig(spike.value);
    }
    throw std::logic_error("unreachable");
}

// Partial inverse of eigenvalue_map; clamps to the transition spike below
// the bulk edge.
inline SpikeValue eigenvalue_map_inverse(double lam, const Framework& fw) {
    switch (fw.tag) {
        case Regime::Proportional:
            return {detail::prop_eig_inv(lam, fw.gamma), SpikeScale::Raw};
        case Regime::DisproZero:
            return {detail::hat_eig_inv(lam), SpikeScale::Hat};
        case Regime::DisproInf:
            return {detail::bar_eig_inv(lam), SpikeScale::Bar};
        case Regime::Wigner:
            return {detail::wig_eig_inv(lam), SpikeScale::Theta};
    }
    throw std::logic_error("unreachable");
}

// Limiting squared cosine between the leading sample eigenvector and its
// population counterpart; zero at or below the transition.
inline double cosine_sq(const SpikeValue& spike, const Framework& fw) {
    check_scale(spike, fw);
    switch (fw.tag) {
        case Regime::Proportional: return detail::prop_cos2(spike.value, fw.gamma);
        case Regime::DisproZero: return detail::hat_cos2(spike.value);
        case Regime::DisproInf: return detail::bar_cos2(spike.value);
        case Regime::Wigner: return detail::wig_cos2(spike.value);
    }
    throw std::logic_error("unreachable");
}

// Signal-plus-noise model, signal strength tau on the beta^{1/4} scale:
// limit of the top squared singular value of the normalized data matrix.
// Subcritical tau <= 1 returns the bulk-edge prediction (1+sqrt(beta))^2.
inline double signal_noise_eigenvalue(double tau, double beta) {
    if (!(tau > 0.0)) throw std::domain_error("signal_noise_eigenvalue: tau must be positive");
    if (!(beta > 0.0) || !(beta < 1.0))
        throw std::domain_error("signal_noise_eigenvalue: beta must lie in (0,1)");
    const double sb = std::sqrt(beta);
    if (tau > 1.0) {
        const double t2 = tau * tau;
        return 1.0 + (t2 + 1.0 / t2) * sb + beta;
    }
    return (1.0 + sb) * (1.0 + sb);
}

// Squared-cosine limits for the leading left/right singular vectors against
// the signal vectors. Right singular vectors decorrelate in the limit.
inline std::pair<double, double> signal_noise_cosines(double tau) {
    if (!(tau > 0.0)) throw std::domain_error("signal_noise_cosines: tau must be positive");
    const double left = tau > 1.0 ? 1.0 - 1.0 / (tau * tau * tau * tau) : 0.0;
    return {left, 0.0};
}

}  // namespace spectral_shrink
