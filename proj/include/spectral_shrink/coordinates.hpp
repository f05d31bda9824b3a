#pragma once

// Asymptotic regimes and the affine coordinate systems that make each
// regime's spectral phenomena order one.

#include <cmath>
#include <stdexcept>
#include <string>

namespace spectral_shrink {

enum class Regime {
    Proportional,  // p/n -> gamma in (0, inf); raw-scale spikes ell >= 1
    DisproZero,    // p/n -> 0; hat-scale spikes, semicircle limit
    DisproInf,     // p/n -> inf; bar-scale spikes
    Wigner,        // symmetric signal plus Wigner noise; theta spikes, bilateral
};

struct Framework {
    Regime tag = Regime::DisproZero;
    double gamma = 0.0;  // meaningful for Proportional only

    static Framework proportional(double g) {
        if (!(g > 0.0) || !std::isfinite(g))
            throw std::domain_error("Framework: proportional gamma must be finite and positive");
        return {Regime::Proportional, g};
    }
    static Framework dispro_zero() { return {Regime::DisproZero, 0.0}; }
    static Framework dispro_inf() { return {Regime::DisproInf, 0.0}; }
    static Framework wigner() { return {Regime::Wigner, 0.0}; }
};

// Which coordinate system a spike parameter lives in.
enum class SpikeScale { Raw, Hat, Bar, Theta };

struct SpikeValue {
    double value = 0.0;
    SpikeScale scale = SpikeScale::Raw;
};

inline SpikeScale required_scale(Regime tag) {
    switch (tag) {
        case Regime::Proportional: return SpikeScale::Raw;
        case Regime::DisproZero: return SpikeScale::Hat;
        case Regime::DisproInf: return SpikeScale::Bar;
        case Regime::Wigner: return SpikeScale::Theta;
    }
    throw std::logic_error("unreachable");
}

inline const char* scale_name(SpikeScale s) {
    switch (s) {
        case SpikeScale::Raw: return "raw";
        case SpikeScale::Hat: return "hat";
        case SpikeScale::Bar: return "bar";
        case SpikeScale::Theta: return "theta";
    }
    return "?";
}

inline void check_scale(const SpikeValue& spike, const Framework& fw) {
    if (spike.scale != required_scale(fw.tag))
        throw std::invalid_argument(std::string("spike scale '") + scale_name(spike.scale) +
                                    "' does not match the framework's coordinate system");
}

namespace detail {
inline void require_gamma_n(double gamma_n) {
    if (!(gamma_n > 0.0) || !std::isfinite(gamma_n))
        throw std::domain_error("gamma_n must be finite and positive");
}
}  // namespace detail

// Hat coordinates (gamma_n -> 0 scale): centered at 1 + gamma_n, unit sqrt(gamma_n).
inline double to_hat(double x, double gamma_n) {
    detail::require_gamma_n(gamma_n);
    return (x - 1.0 - gamma_n) / std::sqrt(gamma_n);
}

inline double from_hat(double xhat, double gamma_n) {
    detail::require_gamma_n(gamma_n);
    return 1.0 + std::sqrt(gamma_n) * xhat + gamma_n;
}

// Spike normalization on the same scale, centered at 1.
inline double psi_hat(double x, double gamma_n) {
    detail::require_gamma_n(gamma_n);
    return (x - 1.0) / std::sqrt(gamma_n);
}

inline double from_psi_hat(double xhat, double gamma_n) {
    detail::require_gamma_n(gamma_n);
    return 1.0 + std::sqrt(gamma_n) * xhat;
}

// Bar coordinates (gamma_n -> inf scale): centered at 1, unit gamma_n.
inline double to_bar(double x, double gamma_n) {
    detail::require_gamma_n(gamma_n);
    return (x - 1.0) / gamma_n;
}

inline double from_bar(double xbar, double gamma_n) {
    detail::require_gamma_n(gamma_n);
    return 1.0 + gamma_n * xbar;
}

}  // namespace spectral_shrink
