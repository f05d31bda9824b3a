#pragma once

// Asymptotic 2x2 loss evaluators, formally optimal shrinkers and losses per
// regime and matrix norm, optimal hard thresholds, framework-agnostic rules,
// and the scalar shrinkage rules applied to raw sample eigenvalues.

#include <cmath>
#include <optional>
#include <stdexcept>

#include "spectral_shrink/common.hpp"
#include "spectral_shrink/coordinates.hpp"
#include "spectral_shrink/numeric.hpp"
#include "spectral_shrink/spike_maps.hpp"

namespace spectral_shrink {

enum class MatrixNorm { Frobenius, Operator, Nuclear };

inline char norm_code(MatrixNorm n) {
    switch (n) {
        case MatrixNorm::Frobenius: return 'F';
        case MatrixNorm::Operator: return 'O';
        case MatrixNorm::Nuclear: return 'N';
    }
    return '?';
}

// A loss is a matrix norm applied to one of five matrix pivots
// (1: A-B, 2: inv difference, 3/4: relative, 5: symmetrized relative).
struct LossSpec {
    MatrixNorm norm = MatrixNorm::Frobenius;
    int pivot = 1;
};

inline void validate_loss_spec(const LossSpec& spec) {
    if (spec.pivot < 1 || spec.pivot > 5)
        throw std::invalid_argument("LossSpec: pivot must be in 1..5");
}

// The rank-one asymptotic loss reduces to a matrix norm of a 2x2 pivot.
// TildeA uses the block diag(spike, 0) against eta * outer(c,s) (the
// centered coordinates of the disproportional and Wigner regimes);
// ProportionalA uses diag(ell, 1) against I + (eta-1) * outer(c,s).
enum class TwoByTwoFlavor { TildeA, ProportionalA };

struct TwoByTwoLossInput {
    double spike;  // ell-hat / ell-bar / theta (TildeA) or raw ell (ProportionalA)
    double c2;     // squared limiting cosine, in [0,1]
    double eta;    // shrinkage descriptor on the matching scale
    TwoByTwoFlavor flavor = TwoByTwoFlavor::TildeA;
};

namespace detail {

inline double norm_of_2x2(double eig_lo, double eig_hi, MatrixNorm norm) {
    switch (norm) {
        case MatrixNorm::Frobenius:
            return std::sqrt(eig_lo * eig_lo + eig_hi * eig_hi);
        case MatrixNorm::Operator:
            return std::max(std::abs(eig_lo), std::abs(eig_hi));
        case MatrixNorm::Nuclear:
            return std::abs(eig_lo) + std::abs(eig_hi);
    }
    throw std::logic_error("unreachable");
}

}  // namespace detail

inline double two_by_two_loss(const TwoByTwoLossInput& in, MatrixNorm norm) {
    if (!(in.c2 >= 0.0) || !(in.c2 <= 1.0))
        throw std::domain_error("two_by_two_loss: c2 outside [0,1]");
    const double s2 = 1.0 - in.c2;
    if (in.flavor == TwoByTwoFlavor::TildeA) {
        const double l = in.spike, t = in.eta;
        if (norm == MatrixNorm::Frobenius)
            return std::sqrt((l - t) * (l - t) + 2.0 * t * l * s2);
        const double disc = std::sqrt(std::max(0.0, (t - l) * (t - l) + 4.0 * t * l * s2));
        const double lo = 0.5 * (t - l - disc);
        const double hi = 0.5 * (t - l + disc);
        return detail::norm_of_2x2(lo, hi, norm);
    }
    // ProportionalA: M = A(ell) - B(eta, c) with trace a - x and
    // determinant -a x s^2, where a = ell - 1, x = eta - 1.
    const double a = in.spike - 1.0;
    const double x = in.eta - 1.0;
    if (norm == MatrixNorm::Frobenius)
        return std::sqrt((a - x) * (a - x) + 2.0 * a * x * s2);
    const double tr = a - x;
    const double det = -a * x * s2;
    const double disc = std::sqrt(std::max(0.0, tr * tr - 4.0 * det));
    return detail::norm_of_2x2(0.5 * (tr - disc), 0.5 * (tr + disc), norm);
}

namespace detail {

// --- formally optimal shrinkers on the regime's normalized scale ---

inline double hat_opt_eta(double lhat, MatrixNorm norm) {
    require_hat(lhat);
    switch (norm) {
        case MatrixNorm::Frobenius: return lhat > 1.0 ? lhat - 1.0 / lhat : 0.0;
        case MatrixNorm::Operator: return lhat > 1.0 ? lhat : 0.0;
        case MatrixNorm::Nuclear: return lhat > std::sqrt(2.0) ? lhat - 2.0 / lhat : 0.0;
    }
    throw std::logic_error("unreachable");
}

inline double hat_opt_loss(double lhat, MatrixNorm norm) {
    require_hat(lhat);
    switch (norm) {
        case MatrixNorm::Frobenius:
            return lhat > 1.0 ? std::sqrt(2.0 - 1.0 / (lhat * lhat)) : lhat;
        case MatrixNorm::Operator:
            return lhat > 1.0 ? 1.0 : lhat;
        case MatrixNorm::Nuclear:
            return lhat > std::sqrt(2.0) ? 2.0 * std::sqrt(1.0 - 1.0 / (lhat * lhat)) : lhat;
    }
    throw std::logic_error("unreachable");
}

inline double bar_opt_eta(double lbar, MatrixNorm norm) {
    require_bar(lbar);
    switch (norm) {
        case MatrixNorm::Frobenius: return lbar * lbar / (1.0 + lbar);
        case MatrixNorm::Operator: return lbar;
        case MatrixNorm::Nuclear:
            return lbar > 1.0 ? lbar * (lbar - 1.0) / (lbar + 1.0) : 0.0;
    }
    throw std::logic_error("unreachable");
}

inline double bar_opt_loss(double lbar, MatrixNorm norm) {
    require_bar(lbar);
    switch (norm) {
        case MatrixNorm::Frobenius:
            return lbar * std::sqrt(2.0 * lbar + 1.0) / (1.0 + lbar);
        case MatrixNorm::Operator:
            return lbar / std::sqrt(1.0 + lbar);
        case MatrixNorm::Nuclear:
            return lbar > 1.0 ? 2.0 * lbar * std::sqrt(lbar) / (lbar + 1.0) : lbar;
    }
    throw std::logic_error("unreachable");
}

// Bilateral (Wigner) rules: odd extensions of the hat-scale rules, with even
// losses.
inline double wig_opt_eta(double theta, MatrixNorm norm) {
    const double s = sign(theta);
    return s * hat_opt_eta(std::abs(theta), norm);
}

inline double wig_opt_loss(double theta, MatrixNorm norm) {
    return hat_opt_loss(std::abs(theta), norm);
}

// Proportional-regime optimal shrinkers (raw scale). The nuclear rule is
// obtained by scalar minimization of the 2x2 loss over [1, eigenvalue map].
inline double prop_opt_eta(double ell, double gamma, MatrixNorm norm) {
    const double c2 = prop_cos2(ell, gamma);
    switch (norm) {
        case MatrixNorm::Frobenius: return 1.0 + (ell - 1.0) * c2;
        case MatrixNorm::Operator: return ell;
        case MatrixNorm::Nuclear: {
            const double hi = std::max(prop_eig(ell, gamma), 1.0 + 1e-9);
            auto loss = [&](double eta) {
                return two_by_two_loss({ell, c2, eta, TwoByTwoFlavor::ProportionalA}, MatrixNorm::Nuclear);
            };
            return golden_section_minimize(loss, 1.0, hi).x;
        }
    }
    throw std::logic_error("unreachable");
}

inline double prop_opt_loss(double ell, double gamma, MatrixNorm norm) {
    const double c2 = prop_cos2(ell, gamma);
    switch (norm) {
        case MatrixNorm::Frobenius:
            return (ell - 1.0) * std::sqrt(1.0 - c2 * c2);
        case MatrixNorm::Operator:
            return (ell - 1.0) * std::sqrt(1.0 - c2);
        case MatrixNorm::Nuclear:
            return two_by_two_loss({ell, c2, prop_opt_eta(ell, gamma, MatrixNorm::Nuclear),
                                    TwoByTwoFlavor::ProportionalA},
                                   MatrixNorm::Nuclear);
    }
    throw std::logic_error("unreachable");
}

}  // namespace detail

// Optimal asymptotic shrinkage descriptor for a spike, on the regime's
// normalized scale (raw scale in the proportional regime).
inline double optimal_shrinker(const SpikeValue& spike, MatrixNorm norm, const Framework& fw) {
    check_scale(spike, fw);
    switch (fw.tag) {
        case Regime::Proportional: return detail::prop_opt_eta(spike.value, fw.gamma, norm);
        case Regime::DisproZero: return detail::hat_opt_eta(spike.value, norm);
        case Regime::DisproInf: return detail::bar_opt_eta(spike.value, norm);
        case Regime::Wigner: return detail::wig_opt_eta(spike.value, norm);
    }
    throw std::logic_error("unreachable");
}

// Loss attained by the optimal shrinker at a spike (same scale conventions).
inline double optimal_loss(const SpikeValue& spike, MatrixNorm norm, const Framework& fw) {
    check_scale(spike, fw);
    switch (fw.tag) {
        case Regime::Proportional: return detail::prop_opt_loss(spike.value, fw.gamma, norm);
        case Regime::DisproZero: return detail::hat_opt_loss(spike.value, norm);
        case Regime::DisproInf: return detail::bar_opt_loss(spike.value, norm);
        case Regime::Wigner: return detail::wig_opt_loss(spike.value, norm);
    }
    throw std::logic_error("unreachable");
}

// Loss of the rank-aware estimator (identity rule on the leading eigenvalue),
// i.e. the 2x2 loss at the descriptor produced by the eigenvalue map.
inline double rank_aware_loss(const SpikeValue& spike, MatrixNorm norm, const Framework& fw) {
    check_scale(spike, fw);
    const double lam = eigenvalue_map(spike, fw);
    const double c2 = cosine_sq(spike, fw);
    const TwoByTwoFlavor flavor = fw.tag == Regime::Proportional
                                      ? TwoByTwoFlavor::ProportionalA
                                      : TwoByTwoFlavor::TildeA;
    return two_by_two_loss({spike.value, c2, lam, flavor}, norm);
}

struct RegretImprovement {
    double regret;       // rank-aware loss minus optimal loss
    double improvement;  // regret as a fraction of the rank-aware loss
};

inline RegretImprovement regret_and_improvement(const SpikeValue& spike, MatrixNorm norm,
                                                const Framework& fw) {
    const double ra = rank_aware_loss(spike, norm, fw);
    const double opt = optimal_loss(spike, norm, fw);
    const double regret = ra - opt;
    return {regret, ra > 0.0 ? regret / ra : 0.0};
}

// Unique admissible hard-thresholding level on the regime's normalized
// eigenvalue scale. Each equals the eigenvalue map evaluated at the spike
// where the rank-aware loss crosses the null rule's loss.
inline double optimal_threshold(MatrixNorm norm, const Framework& fw) {
    if (fw.tag == Regime::DisproZero) {
        switch (norm) {
            case MatrixNorm::Frobenius: return 4.0 / std::sqrt(3.0);
            case MatrixNorm::Operator: return std::sqrt(2.0 * (1.0 + std::sqrt(2.0)));
            case MatrixNorm::Nuclear: return 6.0 / std::sqrt(5.0);
        }
    }
    if (fw.tag == Regime::DisproInf) {
        switch (norm) {
            case MatrixNorm::Frobenius: return 2.0 + std::sqrt(2.0);
            case MatrixNorm::Operator: return 3.0;
            case MatrixNorm::Nuclear: return 3.0 + std::sqrt(5.0);
        }
    }
    throw std::invalid_argument("optimal_threshold: defined for the disproportional regimes only");
}

// Frobenius-loss threshold valid under any asymptotic embedding of a dataset
// with aspect ratio gamma: the raw-scale eigenvalue at which the null and
// identity descriptors attain equal proportional-regime loss. Solved by
// bisection on the supercritical spike interval.
inline double agnostic_threshold(double gamma, MatrixNorm norm = MatrixNorm::Frobenius) {
    if (!(gamma > 0.0) || !std::isfinite(gamma))
        throw std::domain_error("agnostic_threshold: gamma must be finite and positive");
    if (norm != MatrixNorm::Frobenius)
        throw std::invalid_argument("agnostic_threshold: only the Frobenius rule is provided");
    auto crossing = [gamma](double ell) {
        const double lam1 = detail::prop_eig(ell, gamma) - 1.0;
        return lam1 * lam1 - 2.0 * (ell - 1.0) * lam1 * detail::prop_cos2(ell, gamma);
    };
    const double lo = detail::prop_edge_spike(gamma) + 1e-9;
    const double hi = 1e3 * (1.0 + gamma);
    const double ell_star = bisect_root(crossing, lo, hi, 0.0, 200);
    return detail::prop_eig(ell_star, gamma);
}

enum class RuleKind { Identity, RankAware, Optimal, HardThreshold, Agnostic };

// A fully specified scalar rule applied to raw sample eigenvalues. rank_r
// selects, at application time, how many leading eigenvalues are touched.
struct ShrinkageRule {
    RuleKind kind = RuleKind::Identity;
    MatrixNorm norm = MatrixNorm::Frobenius;
    Framework framework = Framework::dispro_zero();
    double gamma_n = 0.0;  // aspect ratio of the dataset (coordinate maps)
    int rank_r = 0;
    double operator_epsilon = 0.1;            // exponent offset in the operator threshold
    std::optional<double> explicit_threshold; // raw-scale threshold override
    std::optional<int> dim_p;                 // dimension, needed by operator thresholds
    bool bulk_edge_operator = false;          // threshold operator rules at the bulk edge
};

namespace detail {

inline double operator_threshold_offset(const ShrinkageRule& rule) {
    if (rule.bulk_edge_operator) return 0.0;
    if (!rule.dim_p)
        throw std::invalid_argument("operator rule requires dim_p (or the bulk-edge variant)");
    return std::pow(static_cast<double>(*rule.dim_p), -2.0 / 3.0 + rule.operator_epsilon);
}

// Proportional-regime optimal rule evaluated at the data's own aspect ratio.
inline double agnostic_shrink(double lam, const ShrinkageRule& rule) {
    const double gamma = rule.gamma_n;
    const double ell = prop_eig_inv(lam, gamma);
    switch (rule.norm) {
        case MatrixNorm::Frobenius:
            return 1.0 + (ell - 1.0) * prop_cos2(ell, gamma);
        case MatrixNorm::Operator: {
            const double sg = std::sqrt(gamma);
            const double cutoff = (1.0 + sg) * (1.0 + sg) + operator_threshold_offset(rule) * sg;
            return lam >= cutoff ? ell : 1.0;
        }
        case MatrixNorm::Nuclear:
            return prop_opt_eta(ell, gamma, MatrixNorm::Nuclear);
    }
    throw std::logic_error("unreachable");
}

inline double raw_threshold(const ShrinkageRule& rule) {
    if (rule.explicit_threshold) return *rule.explicit_threshold;
    switch (rule.framework.tag) {
        case Regime::DisproZero:
            return from_hat(optimal_threshold(rule.norm, rule.framework), rule.gamma_n);
        case Regime::DisproInf:
            return from_bar(optimal_threshold(rule.norm, rule.framework), rule.gamma_n);
        case Regime::Proportional:
            if (rule.norm == MatrixNorm::Frobenius) return agnostic_threshold(rule.gamma_n);
            throw std::invalid_argument("hard threshold: proportional closed form provided for Frobenius only");
        case Regime::Wigner:
            throw std::invalid_argument("hard threshold: use wigner_denoise for the Wigner model");
    }
    throw std::logic_error("unreachable");
}

}  // namespace detail

// Apply a rule to one raw sample eigenvalue; returns the raw-scale estimate.
inline double shrink_eigenvalue(double lam, const ShrinkageRule& rule) {
    switch (rule.kind) {
        case RuleKind::Identity:
        case RuleKind::RankAware:
            return lam;
        case RuleKind::HardThreshold:
            return 1.0 + (lam - 1.0) * (lam >= detail::raw_threshold(rule) ? 1.0 : 0.0);
        case RuleKind::Agnostic:
            detail::require_gamma_n(rule.gamma_n);
            return detail::agnostic_shrink(lam, rule);
        case RuleKind::Optimal:
            break;
    }
    switch (rule.framework.tag) {
        case Regime::DisproZero: {
            detail::require_gamma_n(rule.gamma_n);
            const double lam_hat = to_hat(lam, rule.gamma_n);
            if (rule.norm == MatrixNorm::Operator) {
                const double cutoff = 2.0 + detail::operator_threshold_offset(rule);
                const double eta_hat = lam_hat > cutoff ? detail::hat_eig_inv(lam_hat) : 0.0;
                return from_psi_hat(eta_hat, rule.gamma_n);
            }
            const double eta_hat = detail::hat_opt_eta(detail::hat_eig_inv(lam_hat), rule.norm);
            return from_psi_hat(eta_hat, rule.gamma_n);
        }
        case Regime::DisproInf: {
            detail::require_gamma_n(rule.gamma_n);
            // Inverse of the affine eigenvalue map, floored at the zero spike.
            const double lbar = std::max(detail::bar_eig_inv(to_bar(lam, rule.gamma_n)), 0.0);
            return from_bar(detail::bar_opt_eta(lbar, rule.norm), rule.gamma_n);
        }
        case Regime::Wigner:
            return detail::wig_opt_eta(detail::wig_eig_inv(lam), rule.norm);
        case Regime::Proportional:
            return detail::agnostic_shrink(lam, rule);
    }
    throw std::logic_error("unreachable");
}

}  // namespace spectral_shrink
