#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>

#include "spectral_shrink/estimators.hpp"
#include "spectral_shrink/montecarlo.hpp"
#include "spectral_shrink/rng.hpp"

namespace ss = spectral_shrink;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr auto F = ss::MatrixNorm::Frobenius;
constexpr auto O = ss::MatrixNorm::Operator;
constexpr auto N = ss::MatrixNorm::Nuclear;

MatrixXd random_symmetric(int p, std::uint64_t seed, double shift = 0.0) {
    ss::Xoshiro256pp rng(seed);
    MatrixXd a(p, p);
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j) a(i, j) = rng.next_gaussian();
    MatrixXd s = 0.5 * (a + a.transpose());
    if (shift > 0.0) s += shift * MatrixXd::Identity(p, p);
    return s;
}

MatrixXd random_orthogonal(int p, std::uint64_t seed) {
    ss::Xoshiro256pp rng(seed);
    MatrixXd a(p, p);
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j) a(i, j) = rng.next_gaussian();
    return Eigen::HouseholderQR<MatrixXd>(a).householderQ();
}

}  // namespace

TEST(CovShrink, IdentityInputsAndExamples) {
    ss::ShrinkageRule rule;
    rule.kind = ss::RuleKind::Optimal;
    rule.norm = F;
    rule.framework = ss::Framework::dispro_zero();
    rule.gamma_n = 0.01;
    rule.rank_r = 0;
    const MatrixXd eye = MatrixXd::Identity(6, 6);
    EXPECT_LT((ss::cov_shrink(eye, rule).sigma_hat - eye).cwiseAbs().maxCoeff(), 1e-14);

    rule.rank_r = 1;
    VectorXd d = VectorXd::Ones(10);
    d(0) = 1.26;
    const MatrixXd s = d.asDiagonal();
    const auto result = ss::cov_shrink(s, rule);
    EXPECT_NEAR(result.shrunk_values(0), 1.15, 1e-12);
    MatrixXd expected = MatrixXd::Identity(10, 10);
    expected(0, 0) = 1.15;
    EXPECT_LT((result.sigma_hat - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(CovShrink, IdentityRuleReconstructs) {
    ss::ShrinkageRule rule;
    rule.kind = ss::RuleKind::Identity;
    rule.rank_r = 12;
    const MatrixXd s = random_symmetric(12, 99, 6.0);
    EXPECT_LT((ss::cov_shrink(s, rule).sigma_hat - s).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(CovShrink, RotationEquivariance) {
    ss::ShrinkageRule rule;
    rule.kind = ss::RuleKind::Agnostic;
    rule.norm = F;
    rule.gamma_n = 0.5;
    rule.rank_r = 3;
    // Well-separated spectrum keeps the eigenvector pairing stable.
    VectorXd d(8);
    d << 9.0, 7.5, 6.0, 4.5, 3.0, 2.0, 1.3, 0.8;
    const MatrixXd q0 = random_orthogonal(8, 5);
    const MatrixXd s = q0 * d.asDiagonal() * q0.transpose();
    const MatrixXd q = random_orthogonal(8, 17);
    const MatrixXd lhs = ss::cov_shrink(q * s * q.transpose(), rule).sigma_hat;
    const MatrixXd rhs = q * ss::cov_shrink(s, rule).sigma_hat * q.transpose();
    EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(CovShrink, MonotoneRulesPreserveOrdering) {
    ss::ShrinkageRule rule;
    rule.kind = ss::RuleKind::Optimal;
    rule.framework = ss::Framework::dispro_zero();
    rule.gamma_n = 0.02;
    rule.rank_r = 4;
    rule.dim_p = 400;
    VectorXd d(9);
    d << 2.4, 1.9, 1.6, 1.35, 1.1, 1.0, 0.95, 0.9, 0.85;
    const MatrixXd s = d.asDiagonal();
    for (auto norm : {F, O, N}) {
        rule.norm = norm;
        const VectorXd shrunk = ss::cov_shrink(s, rule).shrunk_values;
        for (int i = 0; i + 1 < rule.rank_r; ++i) ASSERT_GE(shrunk(i), shrunk(i + 1) - 1e-15);
    }
}

TEST(CovShrink, RejectsBadInput) {
    MatrixXd bad = MatrixXd::Zero(4, 4);
    bad(0, 1) = 1.0;  // asymmetric
    ss::ShrinkageRule rule;
    EXPECT_THROW(ss::cov_shrink(bad, rule), std::invalid_argument);
    rule.rank_r = 9;
    EXPECT_THROW(ss::cov_shrink(MatrixXd::Identity(4, 4), rule), std::invalid_argument);
}

TEST(WignerDenoise, ExamplesAndSymmetry) {
    const MatrixXd zero = MatrixXd::Zero(5, 5);
    EXPECT_LT(ss::wigner_denoise(zero, F, 1, 0).cwiseAbs().maxCoeff(), 1e-15);

    VectorXd d = VectorXd::Zero(6);
    d(0) = 2.5;
    const MatrixXd q = random_orthogonal(6, 3);
    const MatrixXd y = q * d.asDiagonal() * q.transpose();
    const MatrixXd denoised = ss::wigner_denoise(y, F, 1, 0);
    // theta(2.5) = 2, eta = 2 - 1/2 on that eigendirection.
    EXPECT_LT((denoised - 1.5 * q.col(0) * q.col(0).transpose()).cwiseAbs().maxCoeff(), 1e-10);

    const MatrixXd ym = random_symmetric(14, 21);
    for (auto norm : {F, N}) {
        const MatrixXd plus = ss::wigner_denoise(ym, norm, 2, 2);
        const MatrixXd minus = ss::wigner_denoise(-ym, norm, 2, 2);
        ASSERT_LT((plus + minus).cwiseAbs().maxCoeff(), 1e-10);
    }
    EXPECT_THROW(ss::wigner_denoise(MatrixXd::Ones(3, 4), F, 1, 0), std::invalid_argument);
}

TEST(EstimateSpikes, ChainedExamplesAndRoundTrip) {
    ss::SvdSystem svd;
    svd.singular_values = VectorXd(2);
    svd.singular_values << std::sqrt(1.26), std::sqrt(1.21);
    const auto est = ss::estimate_spikes(svd, 100, 10000, 2);
    ASSERT_EQ(est.size(), 2u);
    EXPECT_NEAR(est[0].tau_hat, std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(est[0].predicted_left_c2, 0.75, 1e-12);
    EXPECT_DOUBLE_EQ(est[0].predicted_right_c2, 0.0);
    EXPECT_TRUE(est[0].supercritical);
    // (1 + sqrt(beta))^2 sits exactly at the bulk edge.
    EXPECT_DOUBLE_EQ(est[1].tau_hat, 1.0);
    EXPECT_FALSE(est[1].supercritical);

    // Round trip through the spike -> eigenvalue prediction.
    const double beta = 0.01;
    for (double tau : {1.1, std::sqrt(2.0), 2.0, 3.5}) {
        ss::SvdSystem s2;
        s2.singular_values = VectorXd(1);
        s2.singular_values << std::sqrt(ss::signal_noise_eigenvalue(tau, beta));
        const auto back = ss::estimate_spikes(s2, 100, 10000, 1);
        EXPECT_NEAR(back[0].tau_hat, tau, 1e-10) << "tau=" << tau;
    }
    EXPECT_THROW(ss::estimate_spikes(svd, 100, 10000, 3), std::invalid_argument);
}

TEST(CalibrateNoise, MedianConventions) {
    EXPECT_DOUBLE_EQ(ss::calibrate_noise({1.0, 1.0, 1.0, 1.0}, 50, 4), 1.0);
    EXPECT_DOUBLE_EQ(ss::calibrate_noise({10.0, 1.0, 1.0, 1.0, 1.0}, 50, 5), 1.0);
    // Lower median on even counts.
    EXPECT_DOUBLE_EQ(ss::calibrate_noise({4.0, 3.0, 2.0, 1.0}, 50, 4), 2.0);
    // p > n: only the min(n, p) largest (nonzero) eigenvalues count.
    EXPECT_DOUBLE_EQ(ss::calibrate_noise({5.0, 4.0, 3.0, 0.0, 0.0, 0.0}, 3, 6), 4.0);
    EXPECT_THROW(ss::calibrate_noise({}, 5, 5), std::invalid_argument);
}

TEST(EmpiricalLoss, PivotsHandValues) {
    const MatrixXd eye = MatrixXd::Identity(2, 2);
    for (int pivot = 1; pivot <= 5; ++pivot) {
        for (auto norm : {F, O, N}) {
            const MatrixXd a = random_symmetric(5, 7, 8.0);
            ASSERT_NEAR(ss::empirical_loss(a, a, {norm, pivot}), 0.0, 1e-9);
        }
    }
    MatrixXd a = eye;
    a(0, 0) = 2.0;
    EXPECT_NEAR(ss::empirical_loss(a, eye, {F, 1}), 1.0, 1e-15);
    EXPECT_NEAR(ss::empirical_loss(2.0 * eye, eye, {F, 3}), std::sqrt(0.5), 1e-12);
    // Delta_2 = A^{-1} - B^{-1} on the same pair: |1/2 - 1| * sqrt(2).
    EXPECT_NEAR(ss::empirical_loss(2.0 * eye, eye, {F, 2}), std::sqrt(0.5), 1e-12);
    // Delta_4 = B^{-1} A - I = diag(1, 1).
    EXPECT_NEAR(ss::empirical_loss(2.0 * eye, eye, {O, 4}), 1.0, 1e-12);

    const MatrixXd singular = MatrixXd::Zero(3, 3);
    EXPECT_NEAR(ss::empirical_loss(singular, singular, {F, 1}), 0.0, 1e-15);
    for (int pivot = 2; pivot <= 5; ++pivot)
        EXPECT_THROW(ss::empirical_loss(singular, MatrixXd::Identity(3, 3), {F, pivot}),
                     std::domain_error);
    EXPECT_THROW(ss::empirical_loss(eye, MatrixXd::Identity(3, 3), {F, 1}),
                 std::invalid_argument);
}

TEST(EmpiricalLoss, LowRankPathMatchesFullMatrices) {
    const int p = 60;
    ss::Xoshiro256pp rng(31);
    MatrixXd u(p, 2), v(p, 3);
    for (int j = 0; j < 2; ++j)
        for (int i = 0; i < p; ++i) u(i, j) = rng.next_gaussian();
    for (int j = 0; j < 3; ++j)
        for (int i = 0; i < p; ++i) v(i, j) = rng.next_gaussian();
    u = Eigen::HouseholderQR<MatrixXd>(u).householderQ() * MatrixXd::Identity(p, 2);
    v = Eigen::HouseholderQR<MatrixXd>(v).householderQ() * MatrixXd::Identity(p, 3);
    VectorXd a(2), b(3);
    a << 1.7, -0.4;
    b << 2.2, 0.9, -1.3;
    MatrixXd full_a = MatrixXd::Identity(p, p);
    MatrixXd full_b = MatrixXd::Identity(p, p);
    for (int i = 0; i < 2; ++i) full_a += a(i) * u.col(i) * u.col(i).transpose();
    for (int i = 0; i < 3; ++i) full_b += b(i) * v.col(i) * v.col(i).transpose();
    for (auto norm : {F, O, N}) {
        ASSERT_NEAR(ss::low_rank_delta1_loss(u, a, v, b, norm),
                    ss::empirical_loss(full_a, full_b, {norm, 1}), 1e-10);
    }
}

TEST(EigenSystemValidation, CatchesBadInput) {
    ss::EigenSystem es;
    es.values = VectorXd(2);
    es.values << 1.0, 2.0;  // not descending
    es.vectors = MatrixXd::Identity(2, 2);
    EXPECT_THROW(ss::validate_eigen_system(es), std::invalid_argument);
    es.values << 2.0, 1.0;
    es.vectors(0, 0) = 2.0;  // not orthonormal
    EXPECT_THROW(ss::validate_eigen_system(es), std::invalid_argument);
    es.vectors = MatrixXd::Identity(2, 2);
    EXPECT_NO_THROW(ss::validate_eigen_system(es));
}
