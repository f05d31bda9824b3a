// Batch command-line front end: covariance shrinkage, spiked-Wigner
// denoising, reference-table emission, and simulation orchestration with
// file-based I/O.
//
// Exit codes: 0 success, 2 usage/config error, 3 numeric/domain error,
// 4 assertion failure.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "spectral_shrink/spectral_shrink.hpp"

namespace ss = spectral_shrink;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitAssertion = 4;

struct ShrinkOptions {
    std::string input;
    std::string output;
    std::string loss = "F";
    std::string rule = "optimal";
    std::string framework = "auto";
    int rank = -1;
    double gamma = 0.0;
    int n_samples = 0;
    bool from_data = false;
    bool calibrate = false;
    bool header = false;
    double threshold = 0.0;
    bool threshold_set = false;
    double operator_epsilon = 0.1;
    bool bulk_edge = false;
};

std::string default_output(const std::string& input, const char* suffix) {
    const auto dot = input.find_last_of('.');
    const std::string stem = dot == std::string::npos ? input : input.substr(0, dot);
    return stem + suffix;
}

Eigen::MatrixXd covariance_from_data(const Eigen::MatrixXd& x) {
    // S = X X' / n with extended-precision accumulation.
    const Eigen::Index p = x.rows(), n = x.cols();
    Eigen::MatrixXd s(p, p);
    for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index j = i; j < p; ++j) {
            long double acc = 0.0L;
            for (Eigen::Index k = 0; k < n; ++k)
                acc += static_cast<long double>(x(i, k)) * static_cast<long double>(x(j, k));
            s(i, j) = s(j, i) = static_cast<double>(acc / static_cast<long double>(n));
        }
    }
    return s;
}

int run_shrink(const ShrinkOptions& opt) {
    Eigen::MatrixXd input = ss::read_csv_matrix(opt.input, opt.header);
    Eigen::MatrixXd s;
    int n = opt.n_samples;
    if (opt.from_data) {
        if (n == 0) n = static_cast<int>(input.cols());
        s = covariance_from_data(input);
    } else {
        s = input;
    }
    const int p = static_cast<int>(s.rows());

    // The proportional framework and "auto" both route to the agnostic rule;
    // aspect ratio comes from --gamma, prop:<gamma>, or the data shape.
    const bool agnostic = opt.framework == "auto" || opt.framework.rfind("prop:", 0) == 0;
    double gamma_n = opt.gamma;
    if (gamma_n <= 0.0 && opt.framework.rfind("prop:", 0) == 0)
        gamma_n = ss::detail::parse_framework(opt.framework).gamma;
    if (gamma_n <= 0.0) {
        if (n <= 0)
            throw ss::ConfigError("aspect ratio unknown: pass --gamma, --n, or --from-data");
        gamma_n = static_cast<double>(p) / static_cast<double>(n);
    }

    ss::ShrinkageRule rule;
    rule.gamma_n = gamma_n;
    rule.rank_r = opt.rank >= 0 ? opt.rank : p;
    rule.operator_epsilon = opt.operator_epsilon;
    rule.bulk_edge_operator = opt.bulk_edge;
    rule.dim_p = p;
    if (opt.threshold_set) rule.explicit_threshold = opt.threshold;
    rule.norm = ss::detail::parse_norm(opt.loss);
    rule.framework = agnostic ? ss::Framework::proportional(gamma_n)
                              : ss::detail::parse_framework(opt.framework);

    if (opt.rule == "identity") rule.kind = ss::RuleKind::Identity;
    else if (opt.rule == "optimal") rule.kind = agnostic ? ss::RuleKind::Agnostic : ss::RuleKind::Optimal;
    else if (opt.rule == "agnostic") rule.kind = ss::RuleKind::Agnostic;
    else if (opt.rule == "threshold") rule.kind = ss::RuleKind::HardThreshold;
    else throw ss::ConfigError("unknown rule '" + opt.rule + "'");

    double sigma2 = 1.0;
    Eigen::MatrixXd work = s;
    std::vector<double> original_values;
    {
        const ss::EigenSystem es = ss::eigen_system(s);
        original_values.assign(es.values.data(), es.values.data() + es.values.size());
    }
    if (opt.calibrate) {
        sigma2 = ss::calibrate_noise(original_values, n > 0 ? n : p, p);
        work = s / sigma2;
    }

    const ss::CovShrinkResult result = ss::cov_shrink(work, rule);
    Eigen::MatrixXd sigma_hat = sigma2 * result.sigma_hat;

    const std::string out_path =
        opt.output.empty() ? default_output(opt.input, "_shrunk.csv") : opt.output;
    ss::write_csv_matrix(out_path, sigma_hat);

    // Sidecar report.
    nlohmann::json info;
    info["input"] = opt.input;
    info["rule"] = opt.rule;
    info["loss"] = opt.loss;
    info["framework"] = agnostic ? "agnostic" : opt.framework;
    info["gamma_n"] = gamma_n;
    info["rank"] = rule.rank_r;
    if (opt.calibrate) info["sigma2"] = sigma2;
    info["original_eigenvalues"] = original_values;
    {
        std::vector<double> shrunk(result.shrunk_values.data(),
                                   result.shrunk_values.data() + result.shrunk_values.size());
        for (double& v : shrunk) v *= sigma2;
        info["shrunk_eigenvalues"] = shrunk;
    }
    {
        // Spike estimates for the touched eigenvalues, on the unit-noise scale.
        nlohmann::json spikes = nlohmann::json::array();
        for (int i = 0; i < rule.rank_r && i < static_cast<int>(original_values.size()); ++i) {
            const double lam = original_values[static_cast<std::size_t>(i)] / sigma2;
            double est = 0.0;
            bool supercritical = false;
            switch (rule.framework.tag) {
                case ss::Regime::DisproZero: {
                    const double lam_hat = ss::to_hat(lam, gamma_n);
                    est = ss::detail::hat_eig_inv(lam_hat);
                    supercritical = lam_hat > 2.0;
                    break;
                }
                case ss::Regime::DisproInf: {
                    est = std::max(ss::to_bar(lam, gamma_n) - 1.0, 0.0);
                    supercritical = est > 0.0;
                    break;
                }
                default: {
                    est = ss::detail::prop_eig_inv(lam, gamma_n);
                    supercritical = lam > ss::mp_support(gamma_n).upper;
                    break;
                }
            }
            spikes.push_back({{"eigenvalue", lam}, {"spike", est}, {"supercritical", supercritical}});
        }
        info["estimated_spikes"] = spikes;
    }
    std::ofstream side(out_path + ".json");
    side << info.dump(2) << '\n';
    std::cout << "wrote " << out_path << " and " << out_path << ".json\n";
    return 0;
}

struct WignerOptions {
    std::string input;
    std::string output;
    std::string loss = "F";
    int rank_plus = 1;
    int rank_minus = 0;
    bool header = false;
};

int run_wigner(const WignerOptions& opt) {
    const Eigen::MatrixXd y = ss::read_csv_matrix(opt.input, opt.header);
    const Eigen::MatrixXd denoised =
        ss::wigner_denoise(y, ss::detail::parse_norm(opt.loss), opt.rank_plus, opt.rank_minus);
    const std::string out_path =
        opt.output.empty() ? default_output(opt.input, "_denoised.csv") : opt.output;
    ss::write_csv_matrix(out_path, denoised);
    std::cout << "wrote " << out_path << '\n';
    return 0;
}

struct TablesOptions {
    std::string which = "thresholds";
    std::string framework = "dzero";
    std::string grid = "0.05:6:120";
    std::string output;
};

std::vector<double> parse_grid(const std::string& spec) {
    double lo = 0, hi = 0;
    int count = 0;
    if (std::sscanf(spec.c_str(), "%lf:%lf:%d", &lo, &hi, &count) != 3 || count < 2 || !(hi > lo))
        throw ss::ConfigError("grid must be lo:hi:count with count >= 2 and hi > lo");
    std::vector<double> g(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i)
        g[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (count - 1);
    return g;
}

int run_tables(const TablesOptions& opt) {
    const ss::Framework fw = ss::detail::parse_framework(opt.framework);
    std::ostringstream out;
    const ss::MatrixNorm norms[] = {ss::MatrixNorm::Frobenius, ss::MatrixNorm::Operator,
                                    ss::MatrixNorm::Nuclear};
    if (opt.which == "thresholds") {
        out << "norm,threshold\n";
        if (fw.tag == ss::Regime::Proportional) {
            out << "F," << ss::format_double(ss::agnostic_threshold(fw.gamma)) << '\n';
        } else {
            for (auto n : norms)
                out << ss::norm_code(n) << ','
                    << ss::format_double(ss::optimal_threshold(n, fw)) << '\n';
        }
    } else if (opt.which == "shrinkers" || opt.which == "losses" || opt.which == "regret") {
        const std::vector<double> grid = parse_grid(opt.grid);
        if (opt.which == "shrinkers") out << "spike,eta_F,eta_O,eta_N\n";
        if (opt.which == "losses")
            out << "spike,rank_aware_F,optimal_F,rank_aware_O,optimal_O,rank_aware_N,optimal_N\n";
        if (opt.which == "regret")
            out << "spike,regret_F,improvement_F,regret_O,improvement_O,regret_N,improvement_N\n";
        for (double x : grid) {
            const ss::SpikeValue spike{x, ss::required_scale(fw.tag)};
            out << ss::format_double(x);
            for (auto n : norms) {
                if (opt.which == "shrinkers") {
                    out << ',' << ss::format_double(ss::optimal_shrinker(spike, n, fw));
                } else if (opt.which == "losses") {
                    out << ',' << ss::format_double(ss::rank_aware_loss(spike, n, fw)) << ','
                        << ss::format_double(ss::optimal_loss(spike, n, fw));
                } else {
                    const auto ri = ss::regret_and_improvement(spike, n, fw);
                    out << ',' << ss::format_double(ri.regret) << ','
                        << ss::format_double(ri.improvement);
                }
            }
            out << '\n';
        }
    } else {
        throw ss::ConfigError("unknown table '" + opt.which +
                              "' (expected thresholds, shrinkers, losses, or regret)");
    }
    if (opt.output.empty()) {
        std::cout << out.str();
    } else {
        std::ofstream f(opt.output);
        f << out.str();
        if (!f) throw std::runtime_error("write to '" + opt.output + "' failed");
    }
    return 0;
}

struct SimulateOptions {
    std::string config;
    std::string out_prefix;
    bool assert_mode = false;
    int threads = 0;
};

int run_simulate(const SimulateOptions& opt) {
    ss::LoadedExperiment loaded = ss::load_experiment_config(opt.config);
    if (opt.threads > 0) loaded.config.threads = opt.threads;

    std::string prefix = opt.out_prefix;
    if (prefix.empty()) {
        std::string base = opt.config;
        const auto slash = base.find_last_of('/');
        if (slash != std::string::npos) base = base.substr(slash + 1);
        const auto dot = base.find_last_of('.');
        if (dot != std::string::npos) base = base.substr(0, dot);
        prefix = base;
    }
    ss::OutputPaths paths = loaded.outputs;
    if (paths.report_json.empty()) paths.report_json = prefix + "_report.json";
    if (paths.replicates_csv.empty()) paths.replicates_csv = prefix + "_replicates.csv";
    if (paths.curves_csv.empty()) paths.curves_csv = prefix + "_curves.csv";

    const ss::SimulationReport report = ss::run_experiment(loaded.config);

    {
        std::ofstream f(paths.report_json);
        if (!f) throw std::runtime_error("cannot open '" + paths.report_json + "' for writing");
        f << ss::report_to_json(report, loaded.config).dump(2) << '\n';
    }
    ss::write_replicates_csv(paths.replicates_csv, report);
    ss::write_curves_csv(paths.curves_csv, report);
    std::cout << "wrote " << paths.report_json << ", " << paths.replicates_csv << ", "
              << paths.curves_csv << '\n';

    for (const auto& res : report.assertion_results) {
        std::cout << (res.passed ? "[ok]   " : "[fail] ") << res.assertion.metric << " grid "
                  << res.assertion.grid_index << ": observed " << res.observed << " vs "
                  << res.expected;
        if (res.assertion.compare == "within") std::cout << " +- " << res.assertion.tol;
        std::cout << '\n';
    }
    if (opt.assert_mode && !report.assertions_passed) {
        std::cerr << "assertions failed\n";
        return kExitAssertion;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Optimal eigenvalue shrinkage and low-rank denoising for spiked models"};
    app.require_subcommand(1);

    ShrinkOptions shrink;
    auto* cmd_shrink = app.add_subcommand("shrink", "Shrink a covariance (or data) matrix");
    cmd_shrink->add_option("input", shrink.input, "CSV matrix file")->required();
    cmd_shrink->add_option("-o,--output", shrink.output, "output CSV path");
    cmd_shrink->add_option("--loss", shrink.loss, "loss norm: F, O, or N")
        ->check(CLI::IsMember({"F", "O", "N"}));
    cmd_shrink->add_option("--rule", shrink.rule, "optimal | agnostic | threshold | identity")
        ->check(CLI::IsMember({"optimal", "agnostic", "threshold", "identity"}));
    cmd_shrink->add_option("--framework", shrink.framework,
                           "prop:<gamma> | dzero | dinf | auto (agnostic)");
    cmd_shrink->add_option("--rank", shrink.rank, "leading eigenvalues eligible for shrinkage");
    cmd_shrink->add_option("--gamma", shrink.gamma, "aspect ratio p/n override");
    cmd_shrink->add_option("--n", shrink.n_samples, "sample count (covariance input)");
    cmd_shrink->add_flag("--from-data", shrink.from_data, "input is p x n data; form S = XX'/n");
    cmd_shrink->add_flag("--calibrate", shrink.calibrate,
                         "estimate the noise level from the median eigenvalue");
    cmd_shrink->add_flag("--header", shrink.header, "skip one header line in the input");
    cmd_shrink->add_option("--threshold", shrink.threshold, "explicit raw threshold")
        ->each([&](const std::string&) { shrink.threshold_set = true; });
    cmd_shrink->add_option("--operator-epsilon", shrink.operator_epsilon,
                           "exponent offset for the operator threshold");
    cmd_shrink->add_flag("--bulk-edge", shrink.bulk_edge,
                         "threshold operator rules exactly at the bulk edge");

    WignerOptions wigner;
    auto* cmd_wigner = app.add_subcommand("wigner", "Denoise a symmetric spiked-Wigner observation");
    cmd_wigner->add_option("input", wigner.input, "CSV symmetric matrix")->required();
    cmd_wigner->add_option("-o,--output", wigner.output, "output CSV path");
    cmd_wigner->add_option("--loss", wigner.loss, "loss norm: F, O, or N")
        ->check(CLI::IsMember({"F", "O", "N"}));
    cmd_wigner->add_option("--rank-plus", wigner.rank_plus, "positive signal rank");
    cmd_wigner->add_option("--rank-minus", wigner.rank_minus, "negative signal rank");
    cmd_wigner->add_flag("--header", wigner.header, "skip one header line in the input");

    TablesOptions tables;
    auto* cmd_tables = app.add_subcommand("tables", "Emit reference tables/curves as CSV");
    cmd_tables->add_option("--which", tables.which, "thresholds | shrinkers | losses | regret")
        ->check(CLI::IsMember({"thresholds", "shrinkers", "losses", "regret"}));
    cmd_tables->add_option("--framework", tables.framework, "dzero | dinf | wigner | prop:<gamma>");
    cmd_tables->add_option("--grid", tables.grid, "spike grid lo:hi:count");
    cmd_tables->add_option("-o,--output", tables.output, "output CSV path (default stdout)");

    SimulateOptions simulate;
    auto* cmd_simulate = app.add_subcommand("simulate", "Run a simulation described by a JSON config");
    cmd_simulate->add_option("config", simulate.config, "experiment config JSON")->required();
    cmd_simulate->add_option("--out-prefix", simulate.out_prefix, "output file prefix");
    cmd_simulate->add_flag("--assert", simulate.assert_mode,
                           "exit 4 unless all configured assertions pass");
    cmd_simulate->add_option("--threads", simulate.threads, "replicate parallelism cap");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (cmd_shrink->parsed()) return run_shrink(shrink);
        if (cmd_wigner->parsed()) return run_wigner(wigner);
        if (cmd_tables->parsed()) return run_tables(tables);
        if (cmd_simulate->parsed()) return run_simulate(simulate);
    } catch (const ss::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ss::CsvParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumeric;
    }
    return 0;
}
