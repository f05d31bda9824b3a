#pragma once

// Matrix-level application of shrinkage rules: covariance estimation,
// spiked-Wigner denoising, spike estimation from singular values, noise
// calibration, and finite-matrix losses over the five pivots.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "spectral_shrink/common.hpp"
#include "spectral_shrink/shrinkage.hpp"
#include "spectral_shrink/spike_maps.hpp"

namespace spectral_shrink {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Eigenvalues sorted descending with matching orthonormal eigenvector columns.
struct EigenSystem {
    VectorXd values;
    MatrixXd vectors;
};

struct SvdSystem {
    VectorXd singular_values;  // sorted descending, nonnegative
    MatrixXd left_vectors;
    MatrixXd right_vectors;
};

struct SpikeEstimate {
    double tau_hat = 1.0;
    double lambda_observed = 0.0;
    double predicted_left_c2 = 0.0;
    double predicted_right_c2 = 0.0;
    bool supercritical = false;
};

namespace detail {

inline void require_symmetric(const MatrixXd& m, const char* who) {
    if (m.rows() != m.cols()) throw std::invalid_argument(std::string(who) + ": matrix not square");
    const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
    if (!(asym <= kSymmetryTol))
        throw std::invalid_argument(std::string(who) + ": matrix not symmetric");
}

}  // namespace detail

// Full symmetric eigendecomposition, descending order.
inline EigenSystem eigen_system(const MatrixXd& s) {
    detail::require_symmetric(s, "eigen_system");
    Eigen::SelfAdjointEigenSolver<MatrixXd> solver(s);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("eigen_system: eigensolver failed");
    const Eigen::Index p = s.rows();
    EigenSystem out;
    out.values = solver.eigenvalues().reverse();
    out.vectors = solver.eigenvectors().rowwise().reverse();
    (void)p;
    return out;
}

inline void validate_eigen_system(const EigenSystem& es) {
    for (Eigen::Index i = 0; i + 1 < es.values.size(); ++i)
        if (es.values(i) < es.values(i + 1))
            throw std::invalid_argument("EigenSystem: values not sorted descending");
    const MatrixXd gram = es.vectors.transpose() * es.vectors;
    const double err = (gram - MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
    if (!(err <= kOrthonormalTol))
        throw std::invalid_argument("EigenSystem: vectors not orthonormal");
}

struct CovShrinkResult {
    MatrixXd sigma_hat;
    VectorXd shrunk_values;  // top rank_r shrunk, remainder set to one
};

// Rank-aware shrinkage estimator: eigendecompose, apply the rule to the top
// rank_r eigenvalues, pin the remainder to one, reconstruct.
inline CovShrinkResult cov_shrink(const MatrixXd& s, const ShrinkageRule& rule) {
    detail::require_symmetric(s, "cov_shrink");
    const Eigen::Index p = s.rows();
    if (rule.rank_r < 0 || rule.rank_r > p)
        throw std::invalid_argument("cov_shrink: rank_r outside [0, p]");
    const EigenSystem es = eigen_system(s);
    VectorXd shrunk = VectorXd::Ones(p);
    for (Eigen::Index i = 0; i < rule.rank_r; ++i) {
        shrunk(i) = shrink_eigenvalue(es.values(i), rule);
        if (!(shrunk(i) >= 0.0))
            throw std::logic_error("cov_shrink: rule produced a negative eigenvalue");
    }
    CovShrinkResult out;
    out.sigma_hat = es.vectors * shrunk.asDiagonal() * es.vectors.transpose();
    out.sigma_hat = 0.5 * (out.sigma_hat + out.sigma_hat.transpose());
    out.shrunk_values = shrunk;
    return out;
}

// Low-rank reconstruction from a spiked-Wigner observation: the bilateral
// optimal shrinker is applied to the top r_plus and bottom r_minus
// eigenvalues; all others map to zero.
inline MatrixXd wigner_denoise(const MatrixXd& y, MatrixNorm norm, int r_plus, int r_minus) {
    detail::require_symmetric(y, "wigner_denoise");
    const Eigen::Index n = y.rows();
    if (r_plus < 0 || r_minus < 0 || r_plus + r_minus > n)
        throw std::invalid_argument("wigner_denoise: invalid rank split");
    const EigenSystem es = eigen_system(y);
    MatrixXd theta_hat = MatrixXd::Zero(n, n);
    auto add = [&](Eigen::Index i) {
        const double eta = detail::wig_opt_eta(detail::wig_eig_inv(es.values(i)), norm);
        if (eta != 0.0)
            theta_hat += eta * es.vectors.col(i) * es.vectors.col(i).transpose();
    };
    for (Eigen::Index i = 0; i < r_plus; ++i) add(i);
    for (Eigen::Index i = n - r_minus; i < n; ++i) add(i);
    return theta_hat;
}

// Signal-strength estimates from the squared singular values of a normalized
// n x m signal-plus-noise matrix.
inline std::vector<SpikeEstimate> estimate_spikes(const SvdSystem& svd, int n, int m, int r) {
    if (n <= 0 || m <= 0) throw std::invalid_argument("estimate_spikes: bad shape");
    if (r < 0 || r > std::min<int>(n, m) || r > svd.singular_values.size())
        throw std::invalid_argument("estimate_spikes: r exceeds available singular values");
    const double beta = static_cast<double>(n) / static_cast<double>(m);
    const double sqrt_beta = std::sqrt(beta);
    std::vector<SpikeEstimate> out;
    out.reserve(static_cast<std::size_t>(r));
    for (int i = 0; i < r; ++i) {
        const double lam = svd.singular_values(i) * svd.singular_values(i);
        // Hat coordinates center at 1 + beta, mapping the bulk edge
        // (1+sqrt(beta))^2 to exactly 2; inverting the displacement map there
        // returns the signal strength with no leftover beta term.
        const double normalized = (lam - 1.0 - beta) / sqrt_beta;
        const double lhat = detail::hat_eig_inv(normalized);  // lhat = tau^2
        SpikeEstimate est;
        est.lambda_observed = lam;
        est.tau_hat = std::sqrt(lhat);
        est.supercritical = normalized > 2.0;
        est.predicted_left_c2 = est.supercritical ? 1.0 - 1.0 / (lhat * lhat) : 0.0;
        est.predicted_right_c2 = 0.0;
        out.push_back(est);
    }
    return out;
}

// Noise level from the bulk of the spectrum: the lower median of all
// eigenvalues when p <= n, of the min(n, p) largest when p > n (the
// remainder are structural zeros).
inline double calibrate_noise(std::vector<double> values, int n, int p) {
    if (values.empty()) throw std::invalid_argument("calibrate_noise: empty spectrum");
    if (n <= 0 || p <= 0) throw std::invalid_argument("calibrate_noise: bad shape");
    std::sort(values.begin(), values.end(), std::greater<>());
    std::size_t k = values.size();
    if (p > n) k = std::min<std::size_t>(k, static_cast<std::size_t>(std::min(n, p)));
    // Lower median: the ceil(k/2)-th smallest of the k retained values.
    const std::size_t idx = k - (k + 1) / 2;
    return values[idx];
}

namespace detail {

inline EigenSystem spd_eigs(const MatrixXd& m, const char* who) {
    EigenSystem es = eigen_system(m);
    const double top = es.values.cwiseAbs().maxCoeff();
    const double floor = std::max(top, 1.0) * 1e-12;
    if (es.values.cwiseAbs().minCoeff() <= floor)
        throw std::domain_error(std::string(who) + ": matrix is singular or nearly so");
    return es;
}

inline MatrixXd spd_power(const EigenSystem& es, double exponent, const char* who) {
    for (Eigen::Index i = 0; i < es.values.size(); ++i)
        if (es.values(i) <= 0.0)
            throw std::domain_error(std::string(who) + ": matrix is not positive definite");
    VectorXd powered = es.values.array().pow(exponent);
    return es.vectors * powered.asDiagonal() * es.vectors.transpose();
}

inline double matrix_norm(const MatrixXd& m, MatrixNorm norm, bool symmetric) {
    switch (norm) {
        case MatrixNorm::Frobenius:
            return m.norm();
        case MatrixNorm::Operator:
        case MatrixNorm::Nuclear: {
            VectorXd mags;
            if (symmetric) {
                Eigen::SelfAdjointEigenSolver<MatrixXd> solver(0.5 * (m + m.transpose()));
                mags = solver.eigenvalues().cwiseAbs();
            } else {
                mags = m.jacobiSvd().singularValues();
            }
            return norm == MatrixNorm::Operator ? mags.maxCoeff() : mags.sum();
        }
    }
    throw std::logic_error("unreachable");
}

}  // namespace detail

// Finite-matrix loss ||Delta_k(A, B)||_norm between two symmetric matrices.
// Pivots 2..5 require invertibility; any framework normalization is applied
// by the caller.
inline double empirical_loss(const MatrixXd& a, const MatrixXd& b, const LossSpec& spec) {
    validate_loss_spec(spec);
    detail::require_symmetric(a, "empirical_loss(A)");
    detail::require_symmetric(b, "empirical_loss(B)");
    if (a.rows() != b.rows()) throw std::invalid_argument("empirical_loss: shape mismatch");
    const Eigen::Index p = a.rows();
    const MatrixXd eye = MatrixXd::Identity(p, p);
    switch (spec.pivot) {
        case 1:
            return detail::matrix_norm(a - b, spec.norm, true);
        case 2: {
            const EigenSystem ea = detail::spd_eigs(a, "empirical_loss(A)");
            const EigenSystem eb = detail::spd_eigs(b, "empirical_loss(B)");
            const MatrixXd ainv = ea.vectors * ea.values.cwiseInverse().asDiagonal() * ea.vectors.transpose();
            const MatrixXd binv = eb.vectors * eb.values.cwiseInverse().asDiagonal() * eb.vectors.transpose();
            return detail::matrix_norm(ainv - binv, spec.norm, true);
        }
        case 3: {
            const EigenSystem ea = detail::spd_eigs(a, "empirical_loss(A)");
            const MatrixXd ainv = ea.vectors * ea.values.cwiseInverse().asDiagonal() * ea.vectors.transpose();
            return detail::matrix_norm(ainv * b - eye, spec.norm, false);
        }
        case 4: {
            const EigenSystem eb = detail::spd_eigs(b, "empirical_loss(B)");
            const MatrixXd binv = eb.vectors * eb.values.cwiseInverse().asDiagonal() * eb.vectors.transpose();
            return detail::matrix_norm(binv * a - eye, spec.norm, false);
        }
        case 5: {
            const EigenSystem ea = detail::spd_eigs(a, "empirical_loss(A)");
            const MatrixXd isqrt = detail::spd_power(ea, -0.5, "empirical_loss(A)");
            return detail::matrix_norm(isqrt * b * isqrt - eye, spec.norm, true);
        }
        default:
            throw std::invalid_argument("empirical_loss: pivot must be in 1..5");
    }
}

// Exact pivot-1 loss between two low-rank perturbations of a common center:
// A = center + U diag(a) U', B = center + V diag(b) V'. Works in the combined
// span, so the cost is independent of the ambient dimension.
inline double low_rank_delta1_loss(const MatrixXd& u, const VectorXd& a,
                                   const MatrixXd& v, const VectorXd& b,
                                   MatrixNorm norm) {
    const Eigen::Index p = u.rows();
    const Eigen::Index ka = u.cols(), kb = v.cols();
    if (v.rows() != p || a.size() != ka || b.size() != kb)
        throw std::invalid_argument("low_rank_delta1_loss: shape mismatch");
    if (ka + kb == 0) return 0.0;
    MatrixXd basis(p, ka + kb);
    if (ka > 0) basis.leftCols(ka) = u;
    if (kb > 0) basis.rightCols(kb) = v;
    Eigen::HouseholderQR<MatrixXd> qr(basis);
    const Eigen::Index k = std::min<Eigen::Index>(p, ka + kb);
    const MatrixXd q = qr.householderQ() * MatrixXd::Identity(p, k);
    const MatrixXd qu = q.transpose() * u;
    const MatrixXd qv = q.transpose() * v;
    MatrixXd small = MatrixXd::Zero(k, k);
    small += qu * a.asDiagonal() * qu.transpose();
    small -= qv * b.asDiagonal() * qv.transpose();
    return detail::matrix_norm(small, norm, true);
}

}  // namespace spectral_shrink
