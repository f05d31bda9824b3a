#pragma once

// Seeded generators for the three spiked ensembles and the experiment runner
// producing theory-vs-empirics reports. Replicates are independent work
// units with per-replicate RNG substreams, so reports are identical for a
// fixed seed regardless of thread count.

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "spectral_shrink/coordinates.hpp"
#include "spectral_shrink/estimators.hpp"
#include "spectral_shrink/rng.hpp"
#include "spectral_shrink/shrinkage.hpp"
#include "spectral_shrink/spike_maps.hpp"

namespace spectral_shrink {

enum class ModelKind { SpikedCovariance, SignalPlusNoise, SpikedWigner };

// Generative description of one spiked ensemble. Spikes are stored on the
// generative scale: raw ell for covariance, tau for signal-plus-noise,
// theta for Wigner; sorted descending.
struct SpikedModelSpec {
    ModelKind kind = ModelKind::SpikedCovariance;
    int n = 0;       // samples (covariance), rows (signal-plus-noise), dimension (Wigner)
    int p_or_m = 0;  // p (covariance), m (signal-plus-noise); ignored for Wigner
    std::vector<double> spikes;
    std::uint64_t seed = 0;
    int replicates = 1;
    bool rotate_basis = false;  // covariance: random orthonormal signal basis
    bool bilateral = false;     // covariance: permit spikes below one
};

inline void validate_model(const SpikedModelSpec& spec) {
    if (spec.n <= 0) throw std::invalid_argument("model: n must be positive");
    if (spec.kind != ModelKind::SpikedWigner && spec.p_or_m <= 0)
        throw std::invalid_argument("model: p (or m) must be positive");
    if (spec.replicates < 1) throw std::invalid_argument("model: replicates must be >= 1");
    for (std::size_t i = 1; i < spec.spikes.size(); ++i)
        if (spec.spikes[i] > spec.spikes[i - 1])
            throw std::invalid_argument("model: spikes must be sorted descending");
    if (spec.kind == ModelKind::SpikedCovariance && !spec.bilateral)
        for (double ell : spec.spikes)
            if (ell < 1.0)
                throw std::invalid_argument("model: covariance spikes must be >= 1 (or set bilateral)");
    const int dim = spec.kind == ModelKind::SpikedWigner
                        ? spec.n
                        : std::min(spec.n, spec.p_or_m);
    if (static_cast<int>(spec.spikes.size()) > dim)
        throw std::invalid_argument("model: more spikes than matrix dimension");
}

namespace detail {

inline void fill_gaussian(Xoshiro256pp& rng, MatrixXd& m) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.next_gaussian();
}

// Orthonormal columns from a Gaussian draw via Householder QR, signs fixed
// so the R diagonal is positive.
inline MatrixXd random_orthonormal(Xoshiro256pp& rng, int rows, int cols) {
    MatrixXd g(rows, cols);
    fill_gaussian(rng, g);
    Eigen::HouseholderQR<MatrixXd> qr(g);
    MatrixXd q = qr.householderQ() * MatrixXd::Identity(rows, cols);
    for (int j = 0; j < cols; ++j)
        if (qr.matrixQR()(j, j) < 0.0) q.col(j) = -q.col(j);
    return q;
}

}  // namespace detail

// One generated replicate together with the signal vectors it was built
// from, for cosine bookkeeping.
struct GeneratedReplicate {
    MatrixXd data;
    MatrixXd left_basis;   // population eigen / left singular vectors (one column per spike)
    MatrixXd right_basis;  // signal-plus-noise only
};

inline GeneratedReplicate generate_replicate(const SpikedModelSpec& spec, int replicate) {
    validate_model(spec);
    Xoshiro256pp rng(derive_stream_seed(spec.seed, static_cast<std::uint64_t>(replicate)));
    const int r = static_cast<int>(spec.spikes.size());
    GeneratedReplicate out;

    switch (spec.kind) {
        case ModelKind::SpikedCovariance: {
            const int p = spec.p_or_m, n = spec.n;
            MatrixXd basis;
            if (spec.rotate_basis && r > 0) basis = detail::random_orthonormal(rng, p, r);
            MatrixXd x(p, n);
            detail::fill_gaussian(rng, x);
            if (spec.rotate_basis && r > 0) {
                // X = Sigma^{1/2} Z with Sigma^{1/2} = I + sum (sqrt(ell)-1) q q'.
                MatrixXd proj = basis.transpose() * x;
                for (int i = 0; i < r; ++i)
                    x.noalias() += (std::sqrt(spec.spikes[i]) - 1.0) * basis.col(i) * proj.row(i);
            } else {
                basis = MatrixXd::Identity(p, std::max(r, 0));
                for (int i = 0; i < r; ++i) x.row(i) *= std::sqrt(spec.spikes[i]);
            }
            out.data = std::move(x);
            out.left_basis = std::move(basis);
            return out;
        }
        case ModelKind::SignalPlusNoise: {
            const int n = spec.n, m = spec.p_or_m;
            const double beta = static_cast<double>(n) / static_cast<double>(m);
            MatrixXd u = r > 0 ? detail::random_orthonormal(rng, n, r) : MatrixXd(n, 0);
            MatrixXd v = r > 0 ? detail::random_orthonormal(rng, m, r) : MatrixXd(m, 0);
            MatrixXd x(n, m);
            detail::fill_gaussian(rng, x);
            x /= std::sqrt(static_cast<double>(m));
            for (int i = 0; i < r; ++i) {
                const double theta = spec.spikes[i] * std::pow(beta, 0.25);
                x.noalias() += theta * u.col(i) * v.col(i).transpose();
            }
            out.data = std::move(x);
            out.left_basis = std::move(u);
            out.right_basis = std::move(v);
            return out;
        }
        case ModelKind::SpikedWigner: {
            const int n = spec.n;
            MatrixXd u = r > 0 ? detail::random_orthonormal(rng, n, r) : MatrixXd(n, 0);
            MatrixXd y(n, n);
            const double scale = 1.0 / std::sqrt(static_cast<double>(n));
            for (Eigen::Index i = 0; i < n; ++i) {
                y(i, i) = rng.next_gaussian() * scale;
                for (Eigen::Index j = i + 1; j < n; ++j) {
                    const double w = rng.next_gaussian() * scale;
                    y(i, j) = w;
                    y(j, i) = w;
                }
            }
            for (int i = 0; i < r; ++i)
                y.noalias() += spec.spikes[i] * u.col(i) * u.col(i).transpose();
            out.data = std::move(y);
            out.left_basis = std::move(u);
            return out;
        }
    }
    throw std::logic_error("unreachable");
}

// Spec'd generator entry points (data only).
inline MatrixXd gen_spiked_cov_data(const SpikedModelSpec& spec, int replicate = 0) {
    if (spec.kind != ModelKind::SpikedCovariance)
        throw std::invalid_argument("gen_spiked_cov_data: wrong model kind");
    return generate_replicate(spec, replicate).data;
}

inline MatrixXd gen_signal_plus_noise(const SpikedModelSpec& spec, int replicate = 0) {
    if (spec.kind != ModelKind::SignalPlusNoise)
        throw std::invalid_argument("gen_signal_plus_noise: wrong model kind");
    return generate_replicate(spec, replicate).data;
}

inline MatrixXd gen_spiked_wigner(const SpikedModelSpec& spec, int replicate = 0) {
    if (spec.kind != ModelKind::SpikedWigner)
        throw std::invalid_argument("gen_spiked_wigner: wrong model kind");
    return generate_replicate(spec, replicate).data;
}

// ---------------------------------------------------------------------------
// Experiment runner
// ---------------------------------------------------------------------------

// Serializable rule description; materialized into a ShrinkageRule with the
// experiment's framework and data shape.
struct RuleSpec {
    RuleKind kind = RuleKind::Identity;
    MatrixNorm norm = MatrixNorm::Frobenius;
    std::optional<double> explicit_threshold;
    double operator_epsilon = 0.1;
    bool bulk_edge_operator = false;
    std::string name;  // report label; defaulted when empty
};

inline std::string default_rule_name(const RuleSpec& spec) {
    switch (spec.kind) {
        case RuleKind::Identity: return "identity";
        case RuleKind::RankAware: return "rank_aware";
        case RuleKind::Optimal: return std::string("optimal_") + norm_code(spec.norm);
        case RuleKind::HardThreshold: return std::string("threshold_") + norm_code(spec.norm);
        case RuleKind::Agnostic: return std::string("agnostic_") + norm_code(spec.norm);
    }
    return "rule";
}

struct Assertion {
    std::string metric;     // "eigenvalue" | "left_cos2" | "right_cos2" | "loss"
    int grid_index = 0;
    int spike_index = 0;
    std::string rule;       // rule name, for the loss metric
    MatrixNorm norm = MatrixNorm::Frobenius;
    int pivot = 1;
    std::string compare = "within";  // "within" | "less" | "greater"
    bool expect_theory = false;
    double expect = 0.0;
    double tol = 0.0;
};

struct ExperimentConfig {
    SpikedModelSpec model;
    Framework framework = Framework::dispro_zero();
    std::vector<double> grid;  // optional rank-1 spike grid, framework scale
    std::vector<RuleSpec> rules;
    std::vector<LossSpec> losses;
    int rank_r = -1;  // eigenvalues touched by rules; default: spike count
    std::vector<Assertion> assertions;
    int threads = 0;  // 0: SPECTRAL_SHRINK_THREADS or hardware concurrency
};

struct ReplicateRecord {
    int grid_index = 0;
    int replicate = 0;
    std::uint64_t seed = 0;
    std::vector<double> eigenvalues;  // leading normalized eigenvalues
    std::vector<double> left_cos2;
    std::vector<double> right_cos2;
    std::vector<double> losses;  // [rule][loss] flattened row-major
};

struct Aggregate {
    double mean = 0.0;
    double se = 0.0;  // standard error of the mean
};

struct GridPointReport {
    double grid_value = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> spikes_raw;  // generative scale
    std::vector<double> spikes_fw;   // framework scale
    std::vector<double> theory_eigenvalues;
    std::vector<double> theory_left_cos2;
    std::vector<double> theory_right_cos2;
    std::vector<double> theory_losses;  // [rule][loss] flattened
    std::vector<Aggregate> eigenvalues;
    std::vector<Aggregate> left_cos2;
    std::vector<Aggregate> right_cos2;
    std::vector<Aggregate> losses;  // [rule][loss] flattened
};

struct AssertionResult {
    Assertion assertion;
    double observed = 0.0;
    double expected = 0.0;
    bool passed = false;
};

struct SimulationReport {
    std::vector<std::string> rule_names;
    std::vector<LossSpec> losses;
    std::vector<ReplicateRecord> rows;
    std::vector<GridPointReport> points;
    std::uint64_t base_seed = 0;
    bool assertions_passed = true;
    std::vector<AssertionResult> assertion_results;
};

namespace detail {

inline int resolve_threads(int requested, int work_items) {
    int t = requested;
    if (t <= 0) {
        if (const char* env = std::getenv("SPECTRAL_SHRINK_THREADS")) t = std::atoi(env);
    }
    if (t <= 0) t = static_cast<int>(std::thread::hardware_concurrency());
    if (t <= 0) t = 1;
    return std::max(1, std::min(t, work_items));
}

// Convert a framework-scale spike to the generative scale of the model.
inline double spike_to_generative(double value, ModelKind kind, const Framework& fw, double gamma_n) {
    if (kind == ModelKind::SignalPlusNoise || kind == ModelKind::SpikedWigner) return value;
    switch (fw.tag) {
        case Regime::Proportional: return value;
        case Regime::DisproZero: return from_psi_hat(value, gamma_n);
        case Regime::DisproInf: return from_bar(value, gamma_n);
        case Regime::Wigner:
            throw std::invalid_argument("covariance models pair with covariance frameworks");
    }
    throw std::logic_error("unreachable");
}

inline double spike_to_framework(double raw, ModelKind kind, const Framework& fw, double gamma_n) {
    if (kind == ModelKind::SignalPlusNoise || kind == ModelKind::SpikedWigner) return raw;
    switch (fw.tag) {
        case Regime::Proportional: return raw;
        case Regime::DisproZero: return psi_hat(raw, gamma_n);
        case Regime::DisproInf: return to_bar(raw, gamma_n);
        default: throw std::logic_error("unreachable");
    }
}

inline double normalize_eigenvalue(double lam, ModelKind kind, const Framework& fw,
                                   double gamma_n, double beta) {
    if (kind == ModelKind::SignalPlusNoise) return (lam - 1.0) / std::sqrt(beta);
    if (kind == ModelKind::SpikedWigner) return lam;
    switch (fw.tag) {
        case Regime::Proportional: return lam;
        case Regime::DisproZero: return to_hat(lam, gamma_n);
        case Regime::DisproInf: return to_bar(lam, gamma_n);
        default: throw std::logic_error("unreachable");
    }
}

inline double loss_scale(ModelKind kind, const Framework& fw, double gamma_n) {
    if (kind != ModelKind::SpikedCovariance) return 1.0;
    switch (fw.tag) {
        case Regime::DisproZero: return std::sqrt(gamma_n);
        case Regime::DisproInf: return gamma_n;
        default: return 1.0;
    }
}

// Wigner-model scalar rules (bilateral; raw scale equals normalized scale).
inline double wigner_rule_value(double lam, const RuleSpec& spec) {
    switch (spec.kind) {
        case RuleKind::Identity:
        case RuleKind::RankAware:
            return lam;
        case RuleKind::Optimal:
            return wig_opt_eta(wig_eig_inv(lam), spec.norm);
        case RuleKind::HardThreshold: {
            const double tau = spec.explicit_threshold
                                   ? *spec.explicit_threshold
                                   : optimal_threshold(spec.norm, Framework::dispro_zero());
            return std::abs(lam) >= tau ? lam : 0.0;
        }
        case RuleKind::Agnostic:
            throw std::invalid_argument("agnostic rules are covariance rules");
    }
    throw std::logic_error("unreachable");
}

// Limiting shrinkage descriptor of a rule at a framework-scale spike.
inline double theory_descriptor(double spike_fw, const RuleSpec& spec, const Framework& fw,
                                ModelKind kind) {
    if (kind == ModelKind::SpikedWigner) {
        const double lam = wig_eig(spike_fw);
        switch (spec.kind) {
            case RuleKind::Identity:
            case RuleKind::RankAware: return lam;
            case RuleKind::Optimal: return wig_opt_eta(spike_fw, spec.norm);
            case RuleKind::HardThreshold: {
                const double tau = spec.explicit_threshold
                                       ? *spec.explicit_threshold
                                       : optimal_threshold(spec.norm, Framework::dispro_zero());
                return std::abs(lam) >= tau ? lam : 0.0;
            }
            default: throw std::invalid_argument("unsupported Wigner rule");
        }
    }
    const SpikeValue spike{spike_fw, required_scale(fw.tag)};
    const double lam = eigenvalue_map(spike, fw);
    switch (spec.kind) {
        case RuleKind::Identity:
        case RuleKind::RankAware:
            return lam;
        case RuleKind::Optimal:
        case RuleKind::Agnostic:
            return optimal_shrinker(spike, spec.norm, fw);
        case RuleKind::HardThreshold: {
            // Thresholding compared on the regime's normalized eigenvalue
            // scale; the null output is the identity direction (1 raw,
            // 0 centered).
            double tau;
            if (fw.tag == Regime::Proportional) {
                tau = spec.explicit_threshold ? *spec.explicit_threshold
                                              : agnostic_threshold(fw.gamma, spec.norm);
                return lam >= tau ? lam : 1.0;
            }
            if (spec.explicit_threshold) {
                const double raw = *spec.explicit_threshold;
                throw std::invalid_argument(
                    "theory descriptor: explicit raw thresholds are not normalized here; got " +
                    std::to_string(raw));
            }
            tau = optimal_threshold(spec.norm, fw);
            return lam >= tau ? lam : 0.0;
        }
    }
    throw std::logic_error("unreachable");
}

inline double combine_losses(const std::vector<double>& parts, MatrixNorm norm) {
    double acc = 0.0;
    for (double v : parts) {
        switch (norm) {
            case MatrixNorm::Frobenius: acc += v * v; break;
            case MatrixNorm::Operator: acc = std::max(acc, v); break;
            case MatrixNorm::Nuclear: acc += v; break;
        }
    }
    return norm == MatrixNorm::Frobenius ? std::sqrt(acc) : acc;
}

struct DecomposedTop {
    VectorXd values;   // top k eigenvalues of the sample matrix
    MatrixXd vectors;  // matching eigenvectors
    VectorXd bottom_values;   // Wigner only: bottom k eigenvalues (ascending from the bottom)
    MatrixXd bottom_vectors;
};

}  // namespace detail

inline SimulationReport run_experiment(const ExperimentConfig& config);

namespace detail {

// Top-k (and, for Wigner, bottom-k) eigenpairs of the sample matrix for one
// replicate. Covariance decompositions go through the smaller Gram side.
inline DecomposedTop decompose_replicate(const GeneratedReplicate& rep, const SpikedModelSpec& model,
                                         int k, bool need_vectors) {
    DecomposedTop out;
    if (model.kind == ModelKind::SpikedWigner) {
        if (need_vectors) {
            const EigenSystem es = eigen_system(rep.data);
            const Eigen::Index n = es.values.size();
            out.values = es.values.head(std::min<Eigen::Index>(k, n));
            out.vectors = es.vectors.leftCols(out.values.size());
            out.bottom_values = es.values.tail(std::min<Eigen::Index>(k, n)).reverse();
            out.bottom_vectors = es.vectors.rightCols(out.bottom_values.size()).rowwise().reverse();
        } else {
            Eigen::SelfAdjointEigenSolver<MatrixXd> solver(rep.data, Eigen::EigenvaluesOnly);
            const VectorXd vals = solver.eigenvalues().reverse();
            out.values = vals.head(std::min<Eigen::Index>(k, vals.size()));
            out.bottom_values = vals.tail(std::min<Eigen::Index>(k, vals.size())).reverse();
        }
        return out;
    }

    MatrixXd x = rep.data;  // covariance: p x n; signal-plus-noise: n x m (pre-scaled)
    double scale = 1.0;
    if (model.kind == ModelKind::SpikedCovariance)
        scale = 1.0 / static_cast<double>(model.n);
    const Eigen::Index rows = x.rows(), cols = x.cols();
    if (rows <= cols) {
        MatrixXd gram = MatrixXd::Zero(rows, rows);
        gram.selfadjointView<Eigen::Lower>().rankUpdate(x, scale);
        gram = gram.selfadjointView<Eigen::Lower>();
        const EigenSystem es = eigen_system(gram);
        const Eigen::Index kk = std::min<Eigen::Index>(k, rows);
        out.values = es.values.head(kk);
        if (need_vectors) out.vectors = es.vectors.leftCols(kk);
        return out;
    }
    // Companion side: eigen of (scale X' X); map vectors back through X.
    MatrixXd gram = MatrixXd::Zero(cols, cols);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose(), scale);
    gram = gram.selfadjointView<Eigen::Lower>();
    const EigenSystem es = eigen_system(gram);
    const Eigen::Index kk = std::min<Eigen::Index>(k, cols);
    out.values = es.values.head(kk);
    if (need_vectors) {
        out.vectors.resize(rows, kk);
        for (Eigen::Index i = 0; i < kk; ++i) {
            VectorXd w = x * es.vectors.col(i);
            const double nrm = w.norm();
            out.vectors.col(i) = nrm > 0 ? VectorXd(w / nrm) : w;
        }
    }
    return out;
}

}  // namespace detail

inline SimulationReport run_experiment(const ExperimentConfig& config) {
    validate_model(config.model);
    for (const LossSpec& spec : config.losses) {
        validate_loss_spec(spec);
        if (spec.pivot >= 2 && config.framework.tag == Regime::DisproInf)
            throw std::invalid_argument("pivots 2..5 are undefined when p/n grows without bound");
        if (spec.pivot >= 2 && config.model.kind != ModelKind::SpikedCovariance)
            throw std::invalid_argument("pivots 2..5 apply to covariance models only");
    }
    if (!config.rules.empty() && config.model.kind == ModelKind::SignalPlusNoise)
        throw std::invalid_argument("signal-plus-noise experiments report spectra only (no rules)");

    const SpikedModelSpec& base = config.model;
    const int p_dim = base.kind == ModelKind::SpikedWigner ? base.n : base.p_or_m;
    const double gamma_n = base.kind == ModelKind::SpikedCovariance
                               ? static_cast<double>(base.p_or_m) / static_cast<double>(base.n)
                               : 0.0;
    const double beta = base.kind == ModelKind::SignalPlusNoise
                            ? static_cast<double>(base.n) / static_cast<double>(base.p_or_m)
                            : 0.0;

    std::vector<RuleSpec> rules = config.rules;
    for (RuleSpec& r : rules)
        if (r.name.empty()) r.name = default_rule_name(r);

    const std::size_t n_grid = config.grid.empty() ? 1 : config.grid.size();
    SimulationReport report;
    report.base_seed = base.seed;
    report.losses = config.losses;
    for (const RuleSpec& r : rules) report.rule_names.push_back(r.name);

    for (std::size_t g = 0; g < n_grid; ++g) {
        SpikedModelSpec model = base;
        if (!config.grid.empty()) {
            model.spikes = {detail::spike_to_generative(config.grid[g], base.kind,
                                                        config.framework, gamma_n)};
            if (base.kind == ModelKind::SpikedCovariance && config.grid[g] < 0.0)
                model.bilateral = true;
        }
        validate_model(model);
        const int r = static_cast<int>(model.spikes.size());
        const int rank_r = config.rank_r >= 0 ? config.rank_r : r;
        if (rank_r > (model.kind == ModelKind::SpikedWigner ? model.n
                                                            : std::min(model.n, model.p_or_m)))
            throw std::invalid_argument("rank_r exceeds the matrix dimension");

        // Wigner rank split: positive spikes pair with the top of the
        // spectrum, negative with the bottom.
        int r_plus = 0;
        for (double s : model.spikes) r_plus += s > 0.0 ? 1 : 0;
        const int r_minus = r - r_plus;

        const int k_top = std::max({r + 1, rank_r, 1});
        const bool need_vectors = r > 0 || !rules.empty();

        // Materialize covariance rules once per grid point.
        std::vector<ShrinkageRule> cov_rules;
        if (model.kind == ModelKind::SpikedCovariance) {
            for (const RuleSpec& spec : rules) {
                ShrinkageRule rule;
                rule.kind = spec.kind;
                rule.norm = spec.norm;
                rule.framework = config.framework;
                rule.gamma_n = gamma_n;
                rule.rank_r = rank_r;
                rule.operator_epsilon = spec.operator_epsilon;
                rule.explicit_threshold = spec.explicit_threshold;
                rule.dim_p = p_dim;
                rule.bulk_edge_operator = spec.bulk_edge_operator;
                cov_rules.push_back(rule);
            }
        }

        const double scale = detail::loss_scale(model.kind, config.framework, gamma_n);
        std::vector<ReplicateRecord> records(static_cast<std::size_t>(model.replicates));
        auto run_one = [&](int rep_idx) {
            const GeneratedReplicate rep = generate_replicate(model, rep_idx);
            const detail::DecomposedTop top =
                detail::decompose_replicate(rep, model, k_top, need_vectors);
            ReplicateRecord rec;
            rec.grid_index = static_cast<int>(g);
            rec.replicate = rep_idx;
            rec.seed = derive_stream_seed(model.seed, static_cast<std::uint64_t>(rep_idx));

            // Leading normalized eigenvalues (for Wigner, the top block).
            for (Eigen::Index i = 0; i < top.values.size(); ++i)
                rec.eigenvalues.push_back(detail::normalize_eigenvalue(
                    top.values(i), model.kind, config.framework, gamma_n, beta));

            // Cosines against the known signal vectors.
            for (int i = 0; i < r; ++i) {
                double lc = 0.0;
                if (model.kind == ModelKind::SpikedWigner && i >= r_plus) {
                    const int from_bottom = r - 1 - i;  // spike r-1 sits at the very bottom
                    if (from_bottom < top.bottom_vectors.cols())
                        lc = std::pow(top.bottom_vectors.col(from_bottom).dot(rep.left_basis.col(i)), 2);
                } else if (i < top.vectors.cols()) {
                    lc = std::pow(top.vectors.col(i).dot(rep.left_basis.col(i)), 2);
                }
                rec.left_cos2.push_back(lc);
                if (model.kind == ModelKind::SignalPlusNoise) {
                    // Right singular vector via v = X' u / sigma.
                    double rc = 0.0;
                    if (i < top.vectors.cols() && top.values(i) > 0.0) {
                        VectorXd v = rep.data.transpose() * top.vectors.col(i) /
                                     std::sqrt(top.values(i));
                        rc = std::pow(v.dot(rep.right_basis.col(i)), 2);
                    }
                    rec.right_cos2.push_back(rc);
                }
            }

            // Losses per rule and loss spec.
            if (!rules.empty()) {
                // Shrunk values on the touched eigenvalues.
                std::vector<VectorXd> etas(rules.size());
                std::vector<MatrixXd> eta_vectors(rules.size());
                for (std::size_t ri = 0; ri < rules.size(); ++ri) {
                    if (model.kind == ModelKind::SpikedWigner) {
                        const int kp = std::min<int>(r_plus, top.values.size());
                        const int km = std::min<int>(r_minus, top.bottom_values.size());
                        VectorXd eta(kp + km);
                        MatrixXd vecs(model.n, kp + km);
                        for (int i = 0; i < kp; ++i) {
                            eta(i) = detail::wigner_rule_value(top.values(i), rules[ri]);
                            vecs.col(i) = top.vectors.col(i);
                        }
                        for (int i = 0; i < km; ++i) {
                            eta(kp + i) = detail::wigner_rule_value(top.bottom_values(i), rules[ri]);
                            vecs.col(kp + i) = top.bottom_vectors.col(i);
                        }
                        etas[ri] = eta;
                        eta_vectors[ri] = vecs;
                    } else {
                        const int kk = std::min<int>(rank_r, top.values.size());
                        VectorXd eta(kk);
                        for (int i = 0; i < kk; ++i)
                            eta(i) = shrink_eigenvalue(top.values(i), cov_rules[ri]);
                        etas[ri] = eta;
                        eta_vectors[ri] = top.vectors.leftCols(kk);
                    }
                }
                // Population low-rank description of the estimand.
                VectorXd pop(r);
                for (int i = 0; i < r; ++i)
                    pop(i) = model.kind == ModelKind::SpikedWigner ? model.spikes[i]
                                                                   : model.spikes[i] - 1.0;
                MatrixXd sigma_full, pop_full;
                for (std::size_t ri = 0; ri < rules.size(); ++ri) {
                    VectorXd centered = etas[ri];
                    if (model.kind == ModelKind::SpikedCovariance)
                        centered.array() -= 1.0;
                    for (const LossSpec& lspec : config.losses) {
                        double value;
                        if (lspec.pivot == 1) {
                            value = low_rank_delta1_loss(rep.left_basis, pop,
                                                         eta_vectors[ri], centered, lspec.norm);
                        } else {
                            if (pop_full.size() == 0) {
                                pop_full = MatrixXd::Identity(p_dim, p_dim);
                                for (int i = 0; i < r; ++i)
                                    pop_full += pop(i) * rep.left_basis.col(i) *
                                                rep.left_basis.col(i).transpose();
                            }
                            sigma_full = MatrixXd::Identity(p_dim, p_dim);
                            for (Eigen::Index i = 0; i < centered.size(); ++i)
                                sigma_full += centered(i) * eta_vectors[ri].col(i) *
                                              eta_vectors[ri].col(i).transpose();
                            value = empirical_loss(pop_full, sigma_full, lspec);
                        }
                        rec.losses.push_back(value / scale);
                    }
                }
            }
            records[static_cast<std::size_t>(rep_idx)] = std::move(rec);
        };

        const int n_threads = detail::resolve_threads(config.threads, model.replicates);
        if (n_threads <= 1) {
            for (int i = 0; i < model.replicates; ++i) run_one(i);
        } else {
            std::vector<std::thread> pool;
            std::atomic<int> next{0};
            for (int t = 0; t < n_threads; ++t)
                pool.emplace_back([&] {
                    for (int i = next.fetch_add(1); i < model.replicates; i = next.fetch_add(1))
                        run_one(i);
                });
            for (auto& th : pool) th.join();
        }

        // Aggregate (ordered reduction by replicate index).
        GridPointReport point;
        point.grid_value = config.grid.empty() ? std::numeric_limits<double>::quiet_NaN()
                                               : config.grid[g];
        point.spikes_raw = model.spikes;
        for (double s : model.spikes)
            point.spikes_fw.push_back(
                detail::spike_to_framework(s, model.kind, config.framework, gamma_n));

        auto aggregate = [&](auto&& getter, std::size_t count) {
            std::vector<Aggregate> out(count);
            for (std::size_t j = 0; j < count; ++j) {
                double sum = 0.0;
                for (const auto& rec : records) sum += getter(rec, j);
                const double mean = sum / static_cast<double>(records.size());
                double ss = 0.0;
                for (const auto& rec : records) {
                    const double d = getter(rec, j) - mean;
                    ss += d * d;
                }
                const double sd = records.size() > 1
                                      ? std::sqrt(ss / static_cast<double>(records.size() - 1))
                                      : 0.0;
                out[j] = {mean, sd / std::sqrt(static_cast<double>(records.size()))};
            }
            return out;
        };

        const std::size_t n_eigs = records.empty() ? 0 : records.front().eigenvalues.size();
        point.eigenvalues = aggregate(
            [](const ReplicateRecord& rec, std::size_t j) { return rec.eigenvalues[j]; }, n_eigs);
        point.left_cos2 = aggregate(
            [](const ReplicateRecord& rec, std::size_t j) { return rec.left_cos2[j]; },
            records.empty() ? 0 : records.front().left_cos2.size());
        point.right_cos2 = aggregate(
            [](const ReplicateRecord& rec, std::size_t j) { return rec.right_cos2[j]; },
            records.empty() ? 0 : records.front().right_cos2.size());
        point.losses = aggregate(
            [](const ReplicateRecord& rec, std::size_t j) { return rec.losses[j]; },
            records.empty() ? 0 : records.front().losses.size());

        // Theory columns.
        for (int i = 0; i < r; ++i) {
            const double fw_spike = point.spikes_fw[i];
            if (model.kind == ModelKind::SignalPlusNoise) {
                const double tau = model.spikes[i];
                point.theory_eigenvalues.push_back(
                    tau > 1.0 ? tau * tau + 1.0 / (tau * tau) : 2.0);
                const auto cos2 = signal_noise_cosines(std::max(tau, 1e-300));
                point.theory_left_cos2.push_back(cos2.first);
                point.theory_right_cos2.push_back(cos2.second);
            } else if (model.kind == ModelKind::SpikedWigner) {
                point.theory_eigenvalues.push_back(detail::wig_eig(fw_spike));
                point.theory_left_cos2.push_back(detail::wig_cos2(fw_spike));
            } else {
                const SpikeValue spike{fw_spike, required_scale(config.framework.tag)};
                point.theory_eigenvalues.push_back(eigenvalue_map(spike, config.framework));
                point.theory_left_cos2.push_back(cosine_sq(spike, config.framework));
            }
        }
        for (std::size_t ri = 0; ri < rules.size(); ++ri) {
            for (const LossSpec& lspec : config.losses) {
                std::vector<double> parts;
                for (int i = 0; i < r; ++i) {
                    const double fw_spike = point.spikes_fw[i];
                    const double desc =
                        detail::theory_descriptor(fw_spike, rules[ri], config.framework, model.kind);
                    double c2, loss;
                    if (model.kind == ModelKind::SpikedWigner) {
                        c2 = detail::wig_cos2(fw_spike);
                        loss = two_by_two_loss({fw_spike, c2, desc, TwoByTwoFlavor::TildeA},
                                               lspec.norm);
                    } else {
                        const SpikeValue spike{fw_spike, required_scale(config.framework.tag)};
                        c2 = cosine_sq(spike, config.framework);
                        const TwoByTwoFlavor flavor = config.framework.tag == Regime::Proportional
                                                          ? TwoByTwoFlavor::ProportionalA
                                                          : TwoByTwoFlavor::TildeA;
                        loss = two_by_two_loss({fw_spike, c2, desc, flavor}, lspec.norm);
                    }
                    parts.push_back(loss);
                }
                point.theory_losses.push_back(detail::combine_losses(parts, lspec.norm));
            }
        }

        report.points.push_back(std::move(point));
        for (auto& rec : records) report.rows.push_back(std::move(rec));
    }

    // Evaluate assertions against the aggregates.
    for (const Assertion& a : config.assertions) {
        AssertionResult res;
        res.assertion = a;
        if (a.grid_index < 0 || a.grid_index >= static_cast<int>(report.points.size()))
            throw std::invalid_argument("assertion: grid_index out of range");
        const GridPointReport& point = report.points[static_cast<std::size_t>(a.grid_index)];
        double observed = 0.0, theory = 0.0;
        if (a.metric == "eigenvalue") {
            observed = point.eigenvalues.at(static_cast<std::size_t>(a.spike_index)).mean;
            theory = a.spike_index < static_cast<int>(point.theory_eigenvalues.size())
                         ? point.theory_eigenvalues[static_cast<std::size_t>(a.spike_index)]
                         : 0.0;
        } else if (a.metric == "left_cos2") {
            observed = point.left_cos2.at(static_cast<std::size_t>(a.spike_index)).mean;
            theory = point.theory_left_cos2.at(static_cast<std::size_t>(a.spike_index));
        } else if (a.metric == "right_cos2") {
            observed = point.right_cos2.at(static_cast<std::size_t>(a.spike_index)).mean;
            theory = point.theory_right_cos2.at(static_cast<std::size_t>(a.spike_index));
        } else if (a.metric == "loss") {
            std::size_t ri = report.rule_names.size();
            for (std::size_t i = 0; i < report.rule_names.size(); ++i)
                if (report.rule_names[i] == a.rule) ri = i;
            if (ri == report.rule_names.size())
                throw std::invalid_argument("assertion: unknown rule '" + a.rule + "'");
            std::size_t li = config.losses.size();
            for (std::size_t i = 0; i < config.losses.size(); ++i)
                if (config.losses[i].norm == a.norm && config.losses[i].pivot == a.pivot) li = i;
            if (li == config.losses.size())
                throw std::invalid_argument("assertion: loss spec not in the experiment");
            const std::size_t idx = ri * config.losses.size() + li;
            observed = point.losses.at(idx).mean;
            theory = point.theory_losses.at(idx);
        } else {
            throw std::invalid_argument("assertion: unknown metric '" + a.metric + "'");
        }
        res.observed = observed;
        res.expected = a.expect_theory ? theory : a.expect;
        if (a.compare == "within")
            res.passed = std::abs(observed - res.expected) <= a.tol;
        else if (a.compare == "less")
            res.passed = observed < res.expected;
        else if (a.compare == "greater")
            res.passed = observed > res.expected;
        else
            throw std::invalid_argument("assertion: unknown comparison '" + a.compare + "'");
        report.assertions_passed = report.assertions_passed && res.passed;
        report.assertion_results.push_back(res);
    }
    return report;
}

}  // namespace spectral_shrink
