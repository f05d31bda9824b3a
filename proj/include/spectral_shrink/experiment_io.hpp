#pragma once

// JSON experiment configs (strict schema: unknown keys are errors, all
// schema problems reported at once) and report serialization: one JSON
// document plus flat per-replicate and curve CSVs.

#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "spectral_shrink/csv.hpp"
#include "spectral_shrink/montecarlo.hpp"

namespace spectral_shrink {

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct OutputPaths {
    std::string report_json;
    std::string replicates_csv;
    std::string curves_csv;
};

struct LoadedExperiment {
    ExperimentConfig config;
    OutputPaths outputs;
};

namespace detail {

using nlohmann::json;

class SchemaErrors {
  public:
    void add(const std::string& msg) { messages_.push_back(msg); }
    bool empty() const { return messages_.empty(); }
    [[noreturn]] void raise() const {
        std::string all = "config errors:";
        for (const auto& m : messages_) all += "\n  - " + m;
        throw ConfigError(all);
    }
    void raise_if_any() const {
        if (!empty()) raise();
    }

  private:
    std::vector<std::string> messages_;
};

inline void check_keys(const json& obj, const std::vector<std::string>& allowed,
                       const std::string& where, SchemaErrors& errs) {
    for (const auto& item : obj.items()) {
        bool ok = false;
        for (const auto& k : allowed) ok = ok || item.key() == k;
        if (!ok) errs.add(where + ": unknown key '" + item.key() + "'");
    }
}

inline MatrixNorm parse_norm(const std::string& s) {
    if (s == "F") return MatrixNorm::Frobenius;
    if (s == "O") return MatrixNorm::Operator;
    if (s == "N") return MatrixNorm::Nuclear;
    throw ConfigError("unknown norm '" + s + "' (expected F, O, or N)");
}

inline Framework parse_framework(const std::string& s) {
    if (s == "dzero") return Framework::dispro_zero();
    if (s == "dinf") return Framework::dispro_inf();
    if (s == "wigner") return Framework::wigner();
    if (s.rfind("prop:", 0) == 0) {
        const double g = std::strtod(s.c_str() + 5, nullptr);
        return Framework::proportional(g);
    }
    throw ConfigError("unknown framework '" + s + "' (expected dzero, dinf, wigner, or prop:<gamma>)");
}

inline std::string framework_string(const Framework& fw) {
    switch (fw.tag) {
        case Regime::DisproZero: return "dzero";
        case Regime::DisproInf: return "dinf";
        case Regime::Wigner: return "wigner";
        case Regime::Proportional: return "prop:" + format_double(fw.gamma);
    }
    return "?";
}

inline RuleKind parse_rule_kind(const std::string& s) {
    if (s == "identity") return RuleKind::Identity;
    if (s == "rank_aware") return RuleKind::RankAware;
    if (s == "optimal") return RuleKind::Optimal;
    if (s == "hard_threshold") return RuleKind::HardThreshold;
    if (s == "agnostic") return RuleKind::Agnostic;
    throw ConfigError("unknown rule kind '" + s + "'");
}

}  // namespace detail

inline LoadedExperiment load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }

    detail::SchemaErrors errs;
    if (!doc.is_object()) {
        errs.add("top level must be an object");
        errs.raise();
    }
    detail::check_keys(doc,
                       {"model", "framework", "grid", "rules", "losses", "rank", "threads",
                        "assertions", "output"},
                       "config", errs);

    LoadedExperiment out;
    ExperimentConfig& config = out.config;

    // framework first; spike conversion depends on it.
    if (!doc.contains("framework") || !doc["framework"].is_string())
        errs.add("'framework' (string) is required");
    else {
        try {
            config.framework = detail::parse_framework(doc["framework"].get<std::string>());
        } catch (const std::exception& e) {
            errs.add(e.what());
        }
    }

    if (!doc.contains("model") || !doc["model"].is_object()) {
        errs.add("'model' (object) is required");
        errs.raise();
    }
    const auto& jm = doc["model"];
    detail::check_keys(jm,
                       {"kind", "n", "p", "m", "spikes", "seed", "replicates", "rotate_basis",
                        "bilateral"},
                       "model", errs);
    SpikedModelSpec& model = config.model;
    const std::string kind = jm.value("kind", std::string());
    if (kind == "spiked_covariance")
        model.kind = ModelKind::SpikedCovariance;
    else if (kind == "signal_plus_noise")
        model.kind = ModelKind::SignalPlusNoise;
    else if (kind == "spiked_wigner")
        model.kind = ModelKind::SpikedWigner;
    else
        errs.add("model.kind must be spiked_covariance, signal_plus_noise, or spiked_wigner");
    if (!jm.contains("n") || !jm["n"].is_number_integer())
        errs.add("model.n (integer) is required");
    else
        model.n = jm["n"].get<int>();
    if (model.kind == ModelKind::SpikedCovariance) {
        if (!jm.contains("p")) errs.add("model.p is required for spiked_covariance");
        else model.p_or_m = jm["p"].get<int>();
        if (jm.contains("m")) errs.add("model.m does not apply to spiked_covariance");
    } else if (model.kind == ModelKind::SignalPlusNoise) {
        if (!jm.contains("m")) errs.add("model.m is required for signal_plus_noise");
        else model.p_or_m = jm["m"].get<int>();
        if (jm.contains("p")) errs.add("model.p does not apply to signal_plus_noise");
    } else {
        if (jm.contains("p") || jm.contains("m"))
            errs.add("model.p / model.m do not apply to spiked_wigner");
        model.p_or_m = model.n;
    }
    if (jm.contains("seed")) model.seed = jm["seed"].get<std::uint64_t>();
    if (jm.contains("replicates")) model.replicates = jm["replicates"].get<int>();
    model.rotate_basis = jm.value("rotate_basis", false);
    model.bilateral = jm.value("bilateral", false);

    std::vector<double> raw_spikes;
    if (jm.contains("spikes")) {
        if (!jm["spikes"].is_array())
            errs.add("model.spikes must be an array of numbers");
        else
            for (const auto& v : jm["spikes"]) raw_spikes.push_back(v.get<double>());
    }

    errs.raise_if_any();  // dimensions are needed below

    const double gamma_n = model.kind == ModelKind::SpikedCovariance
                               ? static_cast<double>(model.p_or_m) / static_cast<double>(model.n)
                               : 0.0;
    // Config spikes are given on the framework's spike scale; convert to the
    // generative scale.
    for (double s : raw_spikes)
        model.spikes.push_back(
            detail::spike_to_generative(s, model.kind, config.framework, gamma_n));

    if (doc.contains("grid")) {
        if (!doc["grid"].is_array())
            errs.add("'grid' must be an array of numbers");
        else
            for (const auto& v : doc["grid"]) config.grid.push_back(v.get<double>());
    }

    if (doc.contains("rules")) {
        if (!doc["rules"].is_array()) errs.add("'rules' must be an array");
        else {
            int idx = 0;
            for (const auto& jr : doc["rules"]) {
                const std::string where = "rules[" + std::to_string(idx++) + "]";
                if (!jr.is_object()) {
                    errs.add(where + " must be an object");
                    continue;
                }
                detail::check_keys(jr,
                                   {"kind", "norm", "threshold", "operator_epsilon", "bulk_edge",
                                    "name"},
                                   where, errs);
                RuleSpec spec;
                try {
                    spec.kind = detail::parse_rule_kind(jr.value("kind", std::string()));
                    if (jr.contains("norm")) spec.norm = detail::parse_norm(jr["norm"].get<std::string>());
                    else if (spec.kind == RuleKind::Optimal || spec.kind == RuleKind::Agnostic ||
                             spec.kind == RuleKind::HardThreshold)
                        errs.add(where + ": 'norm' is required for this rule kind");
                } catch (const std::exception& e) {
                    errs.add(where + ": " + e.what());
                }
                if (jr.contains("threshold")) spec.explicit_threshold = jr["threshold"].get<double>();
                spec.operator_epsilon = jr.value("operator_epsilon", 0.1);
                spec.bulk_edge_operator = jr.value("bulk_edge", false);
                spec.name = jr.value("name", std::string());
                config.rules.push_back(spec);
            }
        }
    }

    if (doc.contains("losses")) {
        if (!doc["losses"].is_array()) errs.add("'losses' must be an array");
        else {
            int idx = 0;
            for (const auto& jl : doc["losses"]) {
                const std::string where = "losses[" + std::to_string(idx++) + "]";
                if (!jl.is_object()) {
                    errs.add(where + " must be an object");
                    continue;
                }
                detail::check_keys(jl, {"norm", "pivot"}, where, errs);
                LossSpec spec;
                try {
                    spec.norm = detail::parse_norm(jl.value("norm", std::string("F")));
                } catch (const std::exception& e) {
                    errs.add(where + ": " + e.what());
                }
                spec.pivot = jl.value("pivot", 1);
                if (spec.pivot < 1 || spec.pivot > 5) errs.add(where + ": pivot must be in 1..5");
                config.losses.push_back(spec);
            }
        }
    }

    config.rank_r = doc.value("rank", -1);
    config.threads = doc.value("threads", 0);

    if (doc.contains("assertions")) {
        if (!doc["assertions"].is_array()) errs.add("'assertions' must be an array");
        else {
            int idx = 0;
            for (const auto& ja : doc["assertions"]) {
                const std::string where = "assertions[" + std::to_string(idx++) + "]";
                if (!ja.is_object()) {
                    errs.add(where + " must be an object");
                    continue;
                }
                detail::check_keys(ja,
                                   {"metric", "grid_index", "spike_index", "rule", "norm", "pivot",
                                    "compare", "expect", "tol"},
                                   where, errs);
                Assertion a;
                a.metric = ja.value("metric", std::string());
                a.grid_index = ja.value("grid_index", 0);
                a.spike_index = ja.value("spike_index", 0);
                a.rule = ja.value("rule", std::string());
                try {
                    if (ja.contains("norm")) a.norm = detail::parse_norm(ja["norm"].get<std::string>());
                } catch (const std::exception& e) {
                    errs.add(where + ": " + e.what());
                }
                a.pivot = ja.value("pivot", 1);
                a.compare = ja.value("compare", std::string("within"));
                if (!ja.contains("expect")) {
                    errs.add(where + ": 'expect' is required (a number or \"theory\")");
                } else if (ja["expect"].is_string()) {
                    if (ja["expect"].get<std::string>() != "theory")
                        errs.add(where + ": string 'expect' must be \"theory\"");
                    a.expect_theory = true;
                } else {
                    a.expect = ja["expect"].get<double>();
                }
                a.tol = ja.value("tol", 0.0);
                config.assertions.push_back(a);
            }
        }
    }

    if (doc.contains("output")) {
        const auto& jo = doc["output"];
        if (!jo.is_object()) errs.add("'output' must be an object");
        else {
            detail::check_keys(jo, {"report", "replicates", "curves"}, "output", errs);
            out.outputs.report_json = jo.value("report", std::string());
            out.outputs.replicates_csv = jo.value("replicates", std::string());
            out.outputs.curves_csv = jo.value("curves", std::string());
        }
    }

    errs.raise_if_any();
    return out;
}

// ---------------------------------------------------------------------------
// Report serialization
// ---------------------------------------------------------------------------

inline std::string loss_label(const LossSpec& spec) {
    std::string s(1, norm_code(spec.norm));
    if (spec.pivot != 1) s += std::to_string(spec.pivot);
    return s;
}

inline nlohmann::json report_to_json(const SimulationReport& report,
                                     const ExperimentConfig& config) {
    nlohmann::json j;
    j["framework"] = detail::framework_string(config.framework);
    j["model"]["kind"] = config.model.kind == ModelKind::SpikedCovariance ? "spiked_covariance"
                         : config.model.kind == ModelKind::SignalPlusNoise ? "signal_plus_noise"
                                                                           : "spiked_wigner";
    j["model"]["n"] = config.model.n;
    if (config.model.kind == ModelKind::SpikedCovariance) j["model"]["p"] = config.model.p_or_m;
    if (config.model.kind == ModelKind::SignalPlusNoise) j["model"]["m"] = config.model.p_or_m;
    j["model"]["replicates"] = config.model.replicates;
    j["rule_names"] = report.rule_names;
    std::vector<std::string> loss_names;
    for (const auto& l : report.losses) loss_names.push_back(loss_label(l));
    j["losses"] = loss_names;
    j["seeds"]["base"] = report.base_seed;
    {
        // Derived substream seeds, grouped by grid point in replicate order.
        std::vector<std::vector<std::uint64_t>> derived(report.points.size());
        for (const auto& row : report.rows)
            derived[static_cast<std::size_t>(row.grid_index)].push_back(row.seed);
        j["seeds"]["derived"] = derived;
    }
    j["points"] = nlohmann::json::array();
    for (const auto& pt : report.points) {
        nlohmann::json jp;
        if (!std::isnan(pt.grid_value)) jp["grid_value"] = pt.grid_value;
        jp["spikes_raw"] = pt.spikes_raw;
        jp["spikes_framework"] = pt.spikes_fw;
        jp["theory"]["eigenvalues"] = pt.theory_eigenvalues;
        jp["theory"]["left_cos2"] = pt.theory_left_cos2;
        jp["theory"]["right_cos2"] = pt.theory_right_cos2;
        jp["theory"]["losses"] = pt.theory_losses;
        auto dump_aggs = [](const std::vector<Aggregate>& v) {
            nlohmann::json arr = nlohmann::json::array();
            for (const auto& a : v) arr.push_back({{"mean", a.mean}, {"stderr", a.se}});
            return arr;
        };
        jp["aggregate"]["eigenvalues"] = dump_aggs(pt.eigenvalues);
        jp["aggregate"]["left_cos2"] = dump_aggs(pt.left_cos2);
        jp["aggregate"]["right_cos2"] = dump_aggs(pt.right_cos2);
        jp["aggregate"]["losses"] = dump_aggs(pt.losses);
        j["points"].push_back(jp);
    }
    if (!report.assertion_results.empty()) {
        j["assertions_passed"] = report.assertions_passed;
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& res : report.assertion_results) {
            arr.push_back({{"metric", res.assertion.metric},
                           {"grid_index", res.assertion.grid_index},
                           {"compare", res.assertion.compare},
                           {"observed", res.observed},
                           {"expected", res.expected},
                           {"tol", res.assertion.tol},
                           {"passed", res.passed}});
        }
        j["assertion_results"] = arr;
    }
    return j;
}

inline void write_replicates_csv(const std::string& path, const SimulationReport& report) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    const std::size_t n_eig = report.rows.empty() ? 0 : report.rows.front().eigenvalues.size();
    const std::size_t n_l = report.rows.empty() ? 0 : report.rows.front().left_cos2.size();
    const std::size_t n_r = report.rows.empty() ? 0 : report.rows.front().right_cos2.size();
    out << "grid_index,replicate,seed";
    for (std::size_t i = 0; i < n_eig; ++i) out << ",eigenvalue_" << (i + 1);
    for (std::size_t i = 0; i < n_l; ++i) out << ",left_cos2_" << (i + 1);
    for (std::size_t i = 0; i < n_r; ++i) out << ",right_cos2_" << (i + 1);
    for (const auto& rule : report.rule_names)
        for (const auto& l : report.losses) out << ",loss_" << rule << '_' << loss_label(l);
    out << '\n';
    for (const auto& row : report.rows) {
        out << row.grid_index << ',' << row.replicate << ',' << row.seed;
        for (double v : row.eigenvalues) out << ',' << format_double(v);
        for (double v : row.left_cos2) out << ',' << format_double(v);
        for (double v : row.right_cos2) out << ',' << format_double(v);
        for (double v : row.losses) out << ',' << format_double(v);
        out << '\n';
    }
}

// Plot-ready curves: one row per (grid point, rule, loss).
inline void write_curves_csv(const std::string& path, const SimulationReport& report) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << "spike,rule,norm,mean_loss,stderr,theory_loss\n";
    for (const auto& pt : report.points) {
        const double spike = !std::isnan(pt.grid_value)
                                 ? pt.grid_value
                                 : (pt.spikes_fw.empty() ? 0.0 : pt.spikes_fw.front());
        for (std::size_t ri = 0; ri < report.rule_names.size(); ++ri) {
            for (std::size_t li = 0; li < report.losses.size(); ++li) {
                const std::size_t idx = ri * report.losses.size() + li;
                out << format_double(spike) << ',' << report.rule_names[ri] << ','
                    << loss_label(report.losses[li]) << ','
                    << format_double(pt.losses[idx].mean) << ','
                    << format_double(pt.losses[idx].se) << ','
                    << format_double(pt.theory_losses[idx]) << '\n';
            }
        }
    }
}

}  // namespace spectral_shrink
