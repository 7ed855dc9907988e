#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "ogl/baselines.hpp"
#include "ogl/data.hpp"
#include "ogl/dictionary.hpp"
#include "ogl/errors.hpp"
#include "ogl/greedy.hpp"
#include "ogl/modelsel.hpp"
#include "ogl/parallel.hpp"
#include "ogl/paths.hpp"
#include "ogl/rng.hpp"
#include "ogl/serialize.hpp"

namespace ogl {

inline constexpr const char* kArtifactName = "oglearn";
inline constexpr const char* kArtifactVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

struct GridSpec {
    double lo = 1e-6;
    double hi = 0.5;
    std::size_t count = 100;
};

// One config type serves every experiment kind; the parser enforces a per-kind
// key allowlist so a config cannot smuggle in settings its kind ignores.
struct ExperimentConfig {
    std::string kind;
    std::size_t m_train = 1000;
    std::size_t m_test = 1000;
    std::size_t n_atoms = 300;
    double eta = 1.0;
    bool normalize = false;
    std::vector<double> sigmas = {0.1, 0.5, 1.0, 2.0};
    GridSpec delta_grid{1e-6, 0.5, 100};
    std::size_t k_max = 15;
    std::size_t trials = 10;
    std::uint64_t seed = 1;
    std::string mode; // "oracle" (parameter chosen against the test set) or "cv"
    double truncation = std::numeric_limits<double>::quiet_NaN(); // NaN = derive from data

    // Cross-validated kinds.
    std::size_t cv_folds = 5;
    std::size_t cv_grid_count = 20;
    GridSpec ridge_lambda_grid{1e-7, 1e-1, 15};
    GridSpec lasso_lambda_grid{1e-7, 1e-1, 15};
    std::vector<std::size_t> n_list = {300};
    std::vector<std::size_t> m_list = {100, 400, 1600};
    std::vector<double> accuracies = {0.02, 0.05, 0.1, 0.2};

    // Single-fit kind.
    std::string data_csv;
    std::string selection = "argmax";
    std::string stopping = "adaptive";
    double delta = std::numeric_limits<double>::quiet_NaN();
    std::optional<std::array<double, 2>> domain;
};

namespace detail {

inline const std::vector<std::string>& experiment_kinds() {
    static const std::vector<std::string> kinds = {
        "ogl-compare", "togl-compare", "delta-togl",  "cost-profile",
        "phase-diagram", "method-table", "fit"};
    return kinds;
}

inline void require_keys(const nlohmann::json& j, const std::vector<std::string>& allowed,
                         const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
    for (const auto& item : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end())
            throw ConfigError(where + ": unknown key '" + item.key() + "'");
    }
}

template <typename T>
T get_as(const nlohmann::json& j, const std::string& key, const std::string& where) {
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(where + ": bad value for '" + key + "': " + e.what());
    }
}

inline GridSpec parse_grid_spec(const nlohmann::json& j, const std::string& where,
                                bool threshold_range, GridSpec g) {
    require_keys(j, {"lo", "hi", "count"}, where);
    if (j.contains("lo")) g.lo = get_as<double>(j, "lo", where);
    if (j.contains("hi")) g.hi = get_as<double>(j, "hi", where);
    if (j.contains("count")) g.count = get_as<std::size_t>(j, "count", where);
    if (!(g.lo > 0) || !(g.hi > g.lo)) throw ConfigError(where + ": need 0 < lo < hi");
    if (threshold_range && g.hi > 1.0) throw ConfigError(where + ": thresholds cannot exceed 1");
    if (g.count < 2) throw ConfigError(where + ": need at least 2 grid points");
    return g;
}

inline nlohmann::json grid_spec_to_json(const GridSpec& g) {
    return {{"lo", g.lo}, {"hi", g.hi}, {"count", g.count}};
}

} // namespace detail

// Parses and validates a config file for the given experiment kind.  Unknown
// keys are rejected outright; known keys are range-checked here so the
// runners can assume a sane config.
inline ExperimentConfig parse_experiment_config(const nlohmann::json& j, const std::string& kind) {
    const auto& kinds = detail::experiment_kinds();
    if (std::find(kinds.begin(), kinds.end(), kind) == kinds.end())
        throw ConfigError("unknown experiment kind '" + kind + "'");

    std::vector<std::string> allowed = {"kind", "seed"};
    const bool is_fit = kind == "fit";
    if (is_fit) {
        for (const char* k : {"data_csv", "n_atoms", "eta", "normalize", "selection", "stopping",
                              "delta", "k_max", "truncation", "domain"})
            allowed.push_back(k);
    } else {
        for (const char* k : {"m_train", "m_test", "n_atoms", "eta", "normalize", "sigmas",
                              "trials", "mode", "truncation"})
            allowed.push_back(k);
        if (kind == "ogl-compare") allowed.push_back("k_max");
        if (kind == "togl-compare") {
            allowed.push_back("k_max");
            allowed.push_back("delta_grid");
        }
        if (kind == "delta-togl" || kind == "cost-profile") allowed.push_back("delta_grid");
        if (kind == "phase-diagram") {
            for (const char* k : {"delta_grid", "cv_folds", "cv_grid_count", "m_list", "accuracies"})
                allowed.push_back(k);
        }
        if (kind == "method-table") {
            for (const char* k : {"delta_grid", "cv_folds", "cv_grid_count", "ridge_lambda_grid",
                                  "lasso_lambda_grid", "n_list", "k_max"})
                allowed.push_back(k);
        }
    }
    detail::require_keys(j, allowed, "config");

    ExperimentConfig cfg;
    cfg.kind = kind;
    if (j.contains("kind")) {
        const auto declared = detail::get_as<std::string>(j, "kind", "config");
        if (declared != kind)
            throw ConfigError("config: kind '" + declared + "' does not match subcommand '" +
                              kind + "'");
    }

    // Per-kind defaults that differ from the struct's.
    if (kind == "togl-compare") cfg.k_max = 20;
    if (kind == "cost-profile" || kind == "phase-diagram" || kind == "method-table")
        cfg.sigmas = {0.1};
    cfg.mode = (kind == "phase-diagram" || kind == "method-table") ? "cv" : "oracle";

    using detail::get_as;
    if (j.contains("seed")) cfg.seed = get_as<std::uint64_t>(j, "seed", "config");
    if (j.contains("m_train")) cfg.m_train = get_as<std::size_t>(j, "m_train", "config");
    if (j.contains("m_test")) cfg.m_test = get_as<std::size_t>(j, "m_test", "config");
    if (j.contains("n_atoms")) cfg.n_atoms = get_as<std::size_t>(j, "n_atoms", "config");
    if (j.contains("eta")) cfg.eta = get_as<double>(j, "eta", "config");
    if (j.contains("normalize")) cfg.normalize = get_as<bool>(j, "normalize", "config");
    if (j.contains("trials")) cfg.trials = get_as<std::size_t>(j, "trials", "config");
    if (j.contains("k_max")) cfg.k_max = get_as<std::size_t>(j, "k_max", "config");
    if (j.contains("truncation")) cfg.truncation = get_as<double>(j, "truncation", "config");
    if (j.contains("sigmas")) {
        cfg.sigmas = get_as<std::vector<double>>(j, "sigmas", "config");
        if (cfg.sigmas.empty()) throw ConfigError("config: sigmas must be nonempty");
        for (double s : cfg.sigmas)
            if (s < 0) throw ConfigError("config: sigmas must be nonnegative");
    }
    if (j.contains("delta_grid"))
        cfg.delta_grid =
            detail::parse_grid_spec(j.at("delta_grid"), "config.delta_grid", true, cfg.delta_grid);
    if (j.contains("mode")) {
        cfg.mode = get_as<std::string>(j, "mode", "config");
        if (cfg.mode != "oracle" && cfg.mode != "cv")
            throw ConfigError("config: mode must be 'oracle' or 'cv'");
        const bool wants_cv = kind == "phase-diagram" || kind == "method-table";
        if (wants_cv != (cfg.mode == "cv"))
            throw ConfigError("config: kind '" + kind + "' runs in " +
                              (wants_cv ? std::string("'cv'") : std::string("'oracle'")) +
                              " mode only");
    }
    if (j.contains("cv_folds")) cfg.cv_folds = get_as<std::size_t>(j, "cv_folds", "config");
    if (j.contains("cv_grid_count"))
        cfg.cv_grid_count = get_as<std::size_t>(j, "cv_grid_count", "config");
    if (j.contains("ridge_lambda_grid"))
        cfg.ridge_lambda_grid = detail::parse_grid_spec(j.at("ridge_lambda_grid"),
                                                        "config.ridge_lambda_grid", false,
                                                        cfg.ridge_lambda_grid);
    if (j.contains("lasso_lambda_grid"))
        cfg.lasso_lambda_grid = detail::parse_grid_spec(j.at("lasso_lambda_grid"),
                                                        "config.lasso_lambda_grid", false,
                                                        cfg.lasso_lambda_grid);
    if (j.contains("n_list")) {
        cfg.n_list = get_as<std::vector<std::size_t>>(j, "n_list", "config");
        if (cfg.n_list.empty()) throw ConfigError("config: n_list must be nonempty");
    }
    if (j.contains("m_list")) {
        cfg.m_list = get_as<std::vector<std::size_t>>(j, "m_list", "config");
        if (cfg.m_list.empty()) throw ConfigError("config: m_list must be nonempty");
    }
    if (j.contains("accuracies")) {
        cfg.accuracies = get_as<std::vector<double>>(j, "accuracies", "config");
        if (cfg.accuracies.empty()) throw ConfigError("config: accuracies must be nonempty");
        for (double a : cfg.accuracies)
            if (!(a > 0)) throw ConfigError("config: accuracies must be positive");
    }
    if (is_fit) {
        if (!j.contains("data_csv")) throw ConfigError("config: fit needs 'data_csv'");
        cfg.data_csv = get_as<std::string>(j, "data_csv", "config");
        if (j.contains("selection")) cfg.selection = get_as<std::string>(j, "selection", "config");
        if (j.contains("stopping")) cfg.stopping = get_as<std::string>(j, "stopping", "config");
        if (j.contains("delta")) cfg.delta = get_as<double>(j, "delta", "config");
        if (j.contains("domain")) {
            const auto dom = get_as<std::vector<double>>(j, "domain", "config");
            if (dom.size() != 2 || !(dom[0] < dom[1]))
                throw ConfigError("config: domain must be [lo, hi] with lo < hi");
            cfg.domain = {dom[0], dom[1]};
        }
        cfg.k_max = j.contains("k_max") ? get_as<std::size_t>(j, "k_max", "config") : 10;
    }

    if (cfg.m_train == 0 || cfg.m_test == 0) throw ConfigError("config: sample sizes must be positive");
    if (cfg.n_atoms == 0) throw ConfigError("config: n_atoms must be positive");
    if (!(cfg.eta > 0)) throw ConfigError("config: eta must be positive");
    if (cfg.trials == 0) throw ConfigError("config: trials must be positive");
    if (cfg.cv_folds < 2) throw ConfigError("config: cv_folds must be at least 2");
    if (cfg.cv_grid_count < 2) throw ConfigError("config: cv_grid_count must be at least 2");
    if (!std::isnan(cfg.truncation) && !(cfg.truncation >= 0))
        throw ConfigError("config: truncation must be nonnegative");
    return cfg;
}

// Effective-config echo: everything the run actually used, so a report can be
// reproduced from its manifest alone.
inline nlohmann::json config_to_json(const ExperimentConfig& cfg) {
    nlohmann::json j;
    j["kind"] = cfg.kind;
    j["seed"] = cfg.seed;
    if (cfg.kind == "fit") {
        j["data_csv"] = cfg.data_csv;
        j["n_atoms"] = cfg.n_atoms;
        j["eta"] = cfg.eta;
        j["normalize"] = cfg.normalize;
        j["selection"] = cfg.selection;
        j["stopping"] = cfg.stopping;
        if (!std::isnan(cfg.delta)) j["delta"] = cfg.delta;
        j["k_max"] = cfg.k_max;
        if (!std::isnan(cfg.truncation)) j["truncation"] = cfg.truncation;
        if (cfg.domain) j["domain"] = {(*cfg.domain)[0], (*cfg.domain)[1]};
        return j;
    }
    j["m_train"] = cfg.m_train;
    j["m_test"] = cfg.m_test;
    j["n_atoms"] = cfg.n_atoms;
    j["eta"] = cfg.eta;
    j["normalize"] = cfg.normalize;
    j["sigmas"] = cfg.sigmas;
    j["trials"] = cfg.trials;
    j["mode"] = cfg.mode;
    if (!std::isnan(cfg.truncation)) j["truncation"] = cfg.truncation;
    if (cfg.kind == "ogl-compare" || cfg.kind == "togl-compare" || cfg.kind == "method-table")
        j["k_max"] = cfg.k_max;
    if (cfg.kind != "ogl-compare") j["delta_grid"] = detail::grid_spec_to_json(cfg.delta_grid);
    if (cfg.kind == "phase-diagram" || cfg.kind == "method-table") {
        j["cv_folds"] = cfg.cv_folds;
        j["cv_grid_count"] = cfg.cv_grid_count;
    }
    if (cfg.kind == "phase-diagram") {
        j["m_list"] = cfg.m_list;
        j["accuracies"] = cfg.accuracies;
    }
    if (cfg.kind == "method-table") {
        j["n_list"] = cfg.n_list;
        j["ridge_lambda_grid"] = detail::grid_spec_to_json(cfg.ridge_lambda_grid);
        j["lasso_lambda_grid"] = detail::grid_spec_to_json(cfg.lasso_lambda_grid);
    }
    return j;
}

// ---------------------------------------------------------------------------
// Report output
// ---------------------------------------------------------------------------

namespace detail {

inline std::string hardware_cpu() {
    std::ifstream in("/proc/cpuinfo");
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("model name", 0) == 0) {
            const auto colon = line.find(':');
            if (colon != std::string::npos) {
                auto s = line.substr(colon + 1);
                const auto first = s.find_first_not_of(" \t");
                return first == std::string::npos ? s : s.substr(first);
            }
        }
    }
    return "unknown";
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << content;
    if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

inline void write_csv(const std::filesystem::path& path, const std::string& header,
                      const std::vector<std::string>& rows) {
    std::string content = header + "\n";
    for (const auto& r : rows) {
        content += r;
        content += '\n';
    }
    write_text_file(path, content);
}

inline void write_manifest(const std::filesystem::path& out_dir, const ExperimentConfig& cfg,
                           const std::vector<std::string>& outputs) {
    nlohmann::json m;
    m["artifact"] = {{"name", kArtifactName}, {"version", kArtifactVersion}};
    m["kind"] = cfg.kind;
    m["config"] = config_to_json(cfg);
    m["hardware"] = {{"cpu", hardware_cpu()},
                     {"threads", std::thread::hardware_concurrency()}};
    m["outputs"] = outputs;
    write_text_file(out_dir / "manifest.json", m.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Small statistics used by the aggregations
// ---------------------------------------------------------------------------

inline double mean_of(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double sample_std(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double mu = mean_of(v);
    double ss = 0;
    for (double x : v) ss += (x - mu) * (x - mu);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

// Interpolated median (average of the two middle order statistics).
inline double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    if (n % 2 == 1) return v[n / 2];
    return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Median that stays on the candidate grid (lower middle for even counts).
inline double grid_median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[(v.size() - 1) / 2];
}

// Index of the smallest value; ties break toward the smaller index, i.e. the
// smaller parameter for ascending grids.
inline std::size_t argmin_index(const std::vector<double>& v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] < v[best]) best = i;
    return best;
}

// ---------------------------------------------------------------------------
// Shared per-trial plumbing
// ---------------------------------------------------------------------------

// Sub-stream tags within one trial.  Train and test precede everything so
// data never depends on which methods run; fit streams are salted by method
// (and candidate, for per-threshold random fits).
inline constexpr std::uint64_t kTagTrain = 1;
inline constexpr std::uint64_t kTagTest = 2;
inline constexpr std::uint64_t kTagCvSplit = 3;
inline constexpr std::uint64_t kTagFinalFit = 4;
inline constexpr std::uint64_t kTagFitBase = 100;
inline constexpr std::uint64_t kTagPerDeltaBase = 4096;

struct TrialData {
    SampleSet train;
    SampleSet test;
    Dictionary dict;
};

inline TrialData make_trial_data(const ExperimentConfig& cfg, std::size_t m_train, double sigma,
                                 std::uint64_t base_seed) {
    const TargetFunction target = sinc_target();
    TrialData td;
    td.train = gen_samples(target, m_train, sigma, substream_seed(base_seed, kTagTrain));
    td.test = gen_samples(target, cfg.m_test, 0.0, substream_seed(base_seed, kTagTest));
    td.dict = build_rbf_dictionary(packing_centers(cfg.n_atoms, target.lo, target.hi), cfg.eta,
                                   td.train.xs, cfg.normalize);
    return td;
}

struct MethodSpec {
    std::string name;
    SelectionRule selection;
};

inline std::vector<MethodSpec> ranked_methods(const std::string& prefix) {
    return {{prefix + "1", SelectionRule::argmax()},
            {prefix + "2", SelectionRule::kth_max(2)},
            {prefix + "3", SelectionRule::kth_max(3)}};
}

} // namespace detail

// ---------------------------------------------------------------------------
// Cross-validation fitters
// ---------------------------------------------------------------------------

// CV fitter for path-replayable greedy methods: traces one path per fold
// (the fold is recognized by its dictionary's address) and answers every
// candidate by replaying the stop along it.  `stopping_kind` must be
// FixedK (candidate = atom budget, path driven to k_cap) or Adaptive
// (candidate = threshold, path driven at drive_delta).
class GreedyPathCvFitter {
public:
    GreedyPathCvFitter(SelectionRule selection, StoppingRule::Kind stopping_kind,
                       double drive_delta, std::size_t k_cap, double truncation,
                       std::uint64_t fit_seed)
        : selection_(selection), stopping_kind_(stopping_kind), drive_delta_(drive_delta),
          k_cap_(k_cap), truncation_(truncation), fit_seed_(fit_seed) {
        if (stopping_kind != StoppingRule::Kind::FixedK &&
            stopping_kind != StoppingRule::Kind::Adaptive)
            throw std::invalid_argument("GreedyPathCvFitter: unsupported stopping kind");
    }

    BatchPredictor operator()(double candidate, const SampleSet& train, const Dictionary& d) {
        if (&d != last_dict_) {
            GreedyConfig cfg;
            cfg.selection = selection_;
            cfg.stopping = stopping_kind_ == StoppingRule::Kind::FixedK
                               ? StoppingRule::fixed_k(k_cap_)
                               : StoppingRule::adaptive(drive_delta_);
            cfg.truncation_M = truncation_;
            cfg.seed = substream_seed(fit_seed_, fold_counter_++);
            path_ = std::make_shared<GreedyPath>(trace_greedy_path(cfg, train, d));
            last_dict_ = &d;
        }

        std::size_t k;
        if (stopping_kind_ == StoppingRule::Kind::FixedK) {
            k = std::min(static_cast<std::size_t>(candidate), path_->K());
        } else {
            k = reconstruct_adaptive_stop(*path_, candidate).k;
        }
        return [path = path_, dict = &d, k](const std::vector<double>& xs) {
            return PathEvaluator(*path, *dict, xs).predict_at_k(k);
        };
    }

private:
    SelectionRule selection_;
    StoppingRule::Kind stopping_kind_;
    double drive_delta_;
    std::size_t k_cap_;
    double truncation_;
    std::uint64_t fit_seed_;
    std::shared_ptr<GreedyPath> path_;
    const Dictionary* last_dict_ = nullptr;
    std::uint64_t fold_counter_ = 0;
};

// CV fitter for threshold-consulting random selection: every (fold, candidate)
// cell is its own seeded fit.
class GreedyDirectCvFitter {
public:
    GreedyDirectCvFitter(SelectionRule selection, double truncation, std::uint64_t fit_seed)
        : selection_(selection), truncation_(truncation), fit_seed_(fit_seed) {}

    BatchPredictor operator()(double candidate, const SampleSet& train, const Dictionary& d) {
        if (&d != last_dict_) {
            last_dict_ = &d;
            ++fold_counter_;
            candidate_counter_ = 0;
        }
        GreedyConfig cfg;
        cfg.selection = selection_;
        cfg.stopping = StoppingRule::adaptive(candidate);
        cfg.truncation_M = truncation_;
        cfg.seed = substream_seed(fit_seed_, fold_counter_ * 100000 + candidate_counter_++);
        auto estimator = std::make_shared<Estimator>(fit_greedy(cfg, train, d));
        return [estimator, dict = &d](const std::vector<double>& xs) {
            return predict(*estimator, *dict, xs);
        };
    }

private:
    SelectionRule selection_;
    double truncation_;
    std::uint64_t fit_seed_;
    const Dictionary* last_dict_ = nullptr;
    std::uint64_t fold_counter_ = 0;
    std::uint64_t candidate_counter_ = 0;
};

// Ridge CV fitter: one Gram matrix per fold, one SPD solve per candidate.
class RidgeCvFitter {
public:
    BatchPredictor operator()(double lambda, const SampleSet& train, const Dictionary& d) {
        if (&d != last_dict_) {
            qf_ = QuadraticForm::from(d, train.ys);
            last_dict_ = &d;
        }
        auto model = std::make_shared<DenseModel>(fit_ridge(qf_, lambda));
        return [model, dict = &d](const std::vector<double>& xs) {
            return predict(*model, *dict, xs);
        };
    }

private:
    QuadraticForm qf_;
    const Dictionary* last_dict_ = nullptr;
};

// Lasso CV fitter: shares the fold's Gram matrix and warm-starts each
// candidate from the previous one's solution (candidates arrive in grid
// order, so neighbours are close on the regularization path).
class LassoCvFitter {
public:
    explicit LassoCvFitter(FistaOptions base_opts = {}) : base_opts_(std::move(base_opts)) {}

    BatchPredictor operator()(double lambda, const SampleSet& train, const Dictionary& d) {
        if (&d != last_dict_) {
            qf_ = QuadraticForm::from(d, train.ys);
            last_dict_ = &d;
            warm_ = Eigen::VectorXd();
        }
        FistaOptions opts = base_opts_;
        opts.init = warm_;
        auto model = std::make_shared<DenseModel>(fit_lasso_fista(qf_, lambda, opts));
        warm_ = model->coefficients;
        return [model, dict = &d](const std::vector<double>& xs) {
            return predict(*model, *dict, xs);
        };
    }

private:
    FistaOptions base_opts_;
    QuadraticForm qf_;
    Eigen::VectorXd warm_;
    const Dictionary* last_dict_ = nullptr;
};

// ---------------------------------------------------------------------------
// Experiment runners.  Each writes its CSV reports plus manifest.json into
// out_dir.  Tasks are spread over `workers` threads; every task writes only
// its own result slot, so reports are identical for any worker count.
// ---------------------------------------------------------------------------

// Atom-budget comparison of the ranked and random selection rules: drive each
// selection to k_max atoms, score the test RMSE of every prefix, and report
// both the per-k mean curves and the best-k summary (parameter chosen against
// the test curve, as an oracle reference).
inline void run_ogl_comparison(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                               std::size_t workers) {
    auto methods = detail::ranked_methods("ogl");
    methods.push_back({"oglr", SelectionRule::uniform_random()});

    struct MethodTrial {
        std::vector<double> rmse_by_k;
        double fit_seconds = 0;
    };
    struct Task {
        std::vector<MethodTrial> per_method;
    };
    const std::size_t n_sigma = cfg.sigmas.size();
    std::vector<Task> tasks(n_sigma * cfg.trials);

    parallel_for(tasks.size(), workers, [&](std::size_t idx) {
        const std::size_t si = idx / cfg.trials;
        const std::size_t t = idx % cfg.trials;
        const std::uint64_t base = trial_seed(cfg.seed, t);
        const auto td = detail::make_trial_data(cfg, cfg.m_train, cfg.sigmas[si], base);

        Task& task = tasks[idx];
        task.per_method.resize(methods.size());
        for (std::size_t mi = 0; mi < methods.size(); ++mi) {
            GreedyConfig gc;
            gc.selection = methods[mi].selection;
            gc.stopping = StoppingRule::fixed_k(cfg.k_max);
            gc.truncation_M = cfg.truncation;
            gc.seed = substream_seed(base, detail::kTagFitBase + mi);
            const GreedyPath path = trace_greedy_path(gc, td.train, td.dict);
            const PathEvaluator eval(path, td.dict, td.test.xs);
            auto& mt = task.per_method[mi];
            mt.fit_seconds = path.fit_seconds;
            const std::size_t top = std::min(path.K(), cfg.k_max);
            mt.rmse_by_k.resize(top + 1);
            for (std::size_t k = 0; k <= top; ++k)
                mt.rmse_by_k[k] = eval.rmse_at_k(k, td.test.ys);
        }
    });

    std::vector<std::string> curve_rows;
    std::vector<std::string> summary_rows;
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
        for (std::size_t si = 0; si < n_sigma; ++si) {
            std::size_t k_common = cfg.k_max;
            for (std::size_t t = 0; t < cfg.trials; ++t)
                k_common = std::min(k_common,
                                    tasks[si * cfg.trials + t].per_method[mi].rmse_by_k.size() - 1);

            std::vector<double> mean_curve(k_common + 1);
            for (std::size_t k = 0; k <= k_common; ++k) {
                std::vector<double> vals(cfg.trials);
                for (std::size_t t = 0; t < cfg.trials; ++t)
                    vals[t] = tasks[si * cfg.trials + t].per_method[mi].rmse_by_k[k];
                mean_curve[k] = detail::mean_of(vals);
                curve_rows.push_back(std::to_string(k) + "," + methods[mi].name + "," +
                                     fmt17(cfg.sigmas[si]) + "," + fmt17(mean_curve[k]));
            }

            const std::size_t k_hat = detail::argmin_index(mean_curve);
            std::vector<double> rmse_at_k_hat(cfg.trials);
            std::vector<double> per_trial_best_k(cfg.trials);
            std::vector<double> fit_secs(cfg.trials);
            for (std::size_t t = 0; t < cfg.trials; ++t) {
                const auto& mt = tasks[si * cfg.trials + t].per_method[mi];
                rmse_at_k_hat[t] = mt.rmse_by_k[k_hat];
                std::vector<double> head(mt.rmse_by_k.begin(),
                                         mt.rmse_by_k.begin() +
                                             static_cast<std::ptrdiff_t>(k_common + 1));
                per_trial_best_k[t] = static_cast<double>(detail::argmin_index(head));
                fit_secs[t] = mt.fit_seconds;
            }
            summary_rows.push_back(methods[mi].name + "," + fmt17(cfg.sigmas[si]) + "," +
                                   std::to_string(k_hat) + "," + fmt17(mean_curve[k_hat]) + "," +
                                   fmt17(detail::sample_std(rmse_at_k_hat)) + "," +
                                   fmt17(detail::mean_of(per_trial_best_k)) + "," +
                                   std::to_string(k_hat) + "," +
                                   fmt17(detail::mean_of(fit_secs)));
        }
    }

    std::filesystem::create_directories(out_dir);
    detail::write_csv(out_dir / "ogl_curves.csv", "k,method,sigma,mean_test_rmse", curve_rows);
    detail::write_csv(out_dir / "ogl_summary.csv",
                      "method,sigma,best_param,test_rmse_mean,test_rmse_std,k_star,sparsity,"
                      "train_time_s",
                      summary_rows);
    detail::write_manifest(out_dir, cfg, {"ogl_curves.csv", "ogl_summary.csv"});
}

namespace detail {

// Shared bookkeeping for the two threshold-grid comparisons: per (method,
// sigma, trial, delta) the stop-k, the test RMSE at the stop, the best point
// along the realized path, and the fit time.
struct ThresholdCell {
    double stop_k = 0;
    double rmse_at_stop = 0;
    double best_k_on_path = 0;
    double fit_seconds = 0;
};

struct ThresholdTrial {
    std::vector<ThresholdCell> by_delta;
};

} // namespace detail

// Threshold-grid comparison with a hard atom budget: ranked selections are
// traced once per trial and replayed over the threshold grid; the random
// in-threshold selection refits per threshold because its choices depend on
// the threshold itself.  Summary picks the threshold with the best mean test
// RMSE; its sparsity column reports the mean stop-k at that threshold.
inline void run_togl_comparison(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                                std::size_t workers) {
    auto methods = detail::ranked_methods("togl");
    methods.push_back({"toglr", SelectionRule::delta_random()});
    const Grid grid = log_grid(cfg.delta_grid.lo, cfg.delta_grid.hi, cfg.delta_grid.count);

    const std::size_t n_sigma = cfg.sigmas.size();
    struct Task {
        std::vector<detail::ThresholdTrial> per_method;
    };
    std::vector<Task> tasks(n_sigma * cfg.trials);

    parallel_for(tasks.size(), workers, [&](std::size_t idx) {
        const std::size_t si = idx / cfg.trials;
        const std::size_t t = idx % cfg.trials;
        const std::uint64_t base = trial_seed(cfg.seed, t);
        const auto td = detail::make_trial_data(cfg, cfg.m_train, cfg.sigmas[si], base);

        Task& task = tasks[idx];
        task.per_method.resize(methods.size());
        for (std::size_t mi = 0; mi < methods.size(); ++mi) {
            auto& trial = task.per_method[mi];
            trial.by_delta.resize(grid.values.size());
            if (methods[mi].selection.kind != SelectionRule::Kind::DeltaRandom) {
                GreedyConfig gc;
                gc.selection = methods[mi].selection;
                gc.stopping = StoppingRule::threshold_plus_k(grid.values.front(), cfg.k_max);
                gc.truncation_M = cfg.truncation;
                gc.seed = substream_seed(base, detail::kTagFitBase + mi);
                const GreedyPath path = trace_greedy_path(gc, td.train, td.dict);
                const PathEvaluator eval(path, td.dict, td.test.xs);
                std::vector<double> rmse_by_k(path.K() + 1);
                for (std::size_t k = 0; k <= path.K(); ++k)
                    rmse_by_k[k] = eval.rmse_at_k(k, td.test.ys);
                const auto best_k = static_cast<double>(detail::argmin_index(rmse_by_k));
                for (std::size_t di = 0; di < grid.values.size(); ++di) {
                    const auto stop = reconstruct_threshold_stop(path, grid.values[di], cfg.k_max);
                    trial.by_delta[di] = {static_cast<double>(stop.k), rmse_by_k[stop.k], best_k,
                                          path.fit_seconds};
                }
            } else {
                for (std::size_t di = 0; di < grid.values.size(); ++di) {
                    GreedyConfig gc;
                    gc.selection = methods[mi].selection;
                    gc.stopping = StoppingRule::threshold_plus_k(grid.values[di], cfg.k_max);
                    gc.truncation_M = cfg.truncation;
                    gc.seed = substream_seed(base, detail::kTagPerDeltaBase + mi * 8192 + di);
                    const GreedyPath path = trace_greedy_path(gc, td.train, td.dict);
                    const PathEvaluator eval(path, td.dict, td.test.xs);
                    std::vector<double> rmse_by_k(path.K() + 1);
                    for (std::size_t k = 0; k <= path.K(); ++k)
                        rmse_by_k[k] = eval.rmse_at_k(k, td.test.ys);
                    trial.by_delta[di] = {
                        static_cast<double>(path.K()), rmse_by_k[path.K()],
                        static_cast<double>(detail::argmin_index(rmse_by_k)), path.fit_seconds};
                }
            }
        }
    });

    std::vector<std::string> curve_rows;
    std::vector<std::string> summary_rows;
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
        for (std::size_t si = 0; si < n_sigma; ++si) {
            std::vector<double> mean_curve(grid.values.size());
            for (std::size_t di = 0; di < grid.values.size(); ++di) {
                std::vector<double> vals(cfg.trials);
                for (std::size_t t = 0; t < cfg.trials; ++t)
                    vals[t] = tasks[si * cfg.trials + t].per_method[mi].by_delta[di].rmse_at_stop;
                mean_curve[di] = detail::mean_of(vals);
                curve_rows.push_back(fmt17(grid.values[di]) + "," + methods[mi].name + "," +
                                     fmt17(cfg.sigmas[si]) + "," + fmt17(mean_curve[di]));
            }
            const std::size_t best_di = detail::argmin_index(mean_curve);
            std::vector<double> rmse_at_best(cfg.trials);
            std::vector<double> stop_k_at_best(cfg.trials);
            std::vector<double> per_trial_kstar(cfg.trials);
            std::vector<double> fit_secs(cfg.trials);
            for (std::size_t t = 0; t < cfg.trials; ++t) {
                const auto& cell = tasks[si * cfg.trials + t].per_method[mi].by_delta[best_di];
                rmse_at_best[t] = cell.rmse_at_stop;
                stop_k_at_best[t] = cell.stop_k;
                per_trial_kstar[t] = cell.best_k_on_path;
                fit_secs[t] = cell.fit_seconds;
            }
            summary_rows.push_back(methods[mi].name + "," + fmt17(cfg.sigmas[si]) + "," +
                                   fmt17(grid.values[best_di]) + "," +
                                   fmt17(mean_curve[best_di]) + "," +
                                   fmt17(detail::sample_std(rmse_at_best)) + "," +
                                   fmt17(detail::mean_of(per_trial_kstar)) + "," +
                                   fmt17(detail::mean_of(stop_k_at_best)) + "," +
                                   fmt17(detail::mean_of(fit_secs)));
        }
    }

    std::filesystem::create_directories(out_dir);
    detail::write_csv(out_dir / "togl_curves.csv", "delta,method,sigma,mean_test_rmse",
                      curve_rows);
    detail::write_csv(out_dir / "togl_summary.csv",
                      "method,sigma,best_param,test_rmse_mean,test_rmse_std,k_star,sparsity,"
                      "train_time_s",
                      summary_rows);
    detail::write_manifest(out_dir, cfg, {"togl_curves.csv", "togl_summary.csv"});
}

// Adaptive-stopping comparison over the threshold grid: like the budgeted
// comparison but the residual test ends the run on its own, so the reported
// sparsity is the terminal k of the adaptive rule at the best threshold.
inline void run_delta_togl(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                           std::size_t workers) {
    auto methods = detail::ranked_methods("delta_togl");
    methods.push_back({"delta_toglr", SelectionRule::delta_random()});
    const Grid grid = log_grid(cfg.delta_grid.lo, cfg.delta_grid.hi, cfg.delta_grid.count);

    const std::size_t n_sigma = cfg.sigmas.size();
    struct Task {
        std::vector<detail::ThresholdTrial> per_method;
        std::vector<double> kstar_per_method; // test-optimal k along the ranked path
    };
    std::vector<Task> tasks(n_sigma * cfg.trials);

    parallel_for(tasks.size(), workers, [&](std::size_t idx) {
        const std::size_t si = idx / cfg.trials;
        const std::size_t t = idx % cfg.trials;
        const std::uint64_t base = trial_seed(cfg.seed, t);
        const auto td = detail::make_trial_data(cfg, cfg.m_train, cfg.sigmas[si], base);

        Task& task = tasks[idx];
        task.per_method.resize(methods.size());
        task.kstar_per_method.assign(methods.size(), 0.0);
        for (std::size_t mi = 0; mi < methods.size(); ++mi) {
            auto& trial = task.per_method[mi];
            trial.by_delta.resize(grid.values.size());
            if (methods[mi].selection.kind != SelectionRule::Kind::DeltaRandom) {
                GreedyConfig gc;
                gc.selection = methods[mi].selection;
                gc.stopping = StoppingRule::adaptive(grid.values.front());
                gc.truncation_M = cfg.truncation;
                gc.seed = substream_seed(base, detail::kTagFitBase + mi);
                const GreedyPath path = trace_greedy_path(gc, td.train, td.dict);
                const PathEvaluator eval(path, td.dict, td.test.xs);
                std::vector<double> rmse_by_k(path.K() + 1);
                for (std::size_t k = 0; k <= path.K(); ++k)
                    rmse_by_k[k] = eval.rmse_at_k(k, td.test.ys);
                const std::size_t kstar = detail::argmin_index(rmse_by_k);
                task.kstar_per_method[mi] = static_cast<double>(kstar);
                for (std::size_t di = 0; di < grid.values.size(); ++di) {
                    const auto stop = reconstruct_adaptive_stop(path, grid.values[di]);
                    trial.by_delta[di] = {static_cast<double>(stop.k), rmse_by_k[stop.k],
                                          static_cast<double>(kstar), path.fit_seconds};
                }
            } else {
                double best_seen = std::numeric_limits<double>::infinity();
                double best_seen_k = 0;
                for (std::size_t di = 0; di < grid.values.size(); ++di) {
                    GreedyConfig gc;
                    gc.selection = methods[mi].selection;
                    gc.stopping = StoppingRule::adaptive(grid.values[di]);
                    gc.truncation_M = cfg.truncation;
                    gc.seed = substream_seed(base, detail::kTagPerDeltaBase + mi * 8192 + di);
                    const GreedyPath path = trace_greedy_path(gc, td.train, td.dict);
                    const PathEvaluator eval(path, td.dict, td.test.xs);
                    std::vector<double> rmse_by_k(path.K() + 1);
                    for (std::size_t k = 0; k <= path.K(); ++k)
                        rmse_by_k[k] = eval.rmse_at_k(k, td.test.ys);
                    const std::size_t kstar = detail::argmin_index(rmse_by_k);
                    if (rmse_by_k[kstar] < best_seen) {
                        best_seen = rmse_by_k[kstar];
                        best_seen_k = static_cast<double>(kstar);
                    }
                    trial.by_delta[di] = {static_cast<double>(path.K()), rmse_by_k[path.K()],
                                          static_cast<double>(kstar), path.fit_seconds};
                }
                task.kstar_per_method[mi] = best_seen_k;
            }
        }
    });

    std::vector<std::string> curve_rows;
    std::vector<std::string> summary_rows;
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
        for (std::size_t si = 0; si < n_sigma; ++si) {
            std::vector<double> mean_curve(grid.values.size());
            std::vector<double> mean_k(grid.values.size());
            for (std::size_t di = 0; di < grid.values.size(); ++di) {
                std::vector<double> vals(cfg.trials);
                std::vector<double> ks(cfg.trials);
                for (std::size_t t = 0; t < cfg.trials; ++t) {
                    const auto& cell = tasks[si * cfg.trials + t].per_method[mi].by_delta[di];
                    vals[t] = cell.rmse_at_stop;
                    ks[t] = cell.stop_k;
                }
                mean_curve[di] = detail::mean_of(vals);
                mean_k[di] = detail::mean_of(ks);
                curve_rows.push_back(fmt17(grid.values[di]) + "," + methods[mi].name + "," +
                                     fmt17(cfg.sigmas[si]) + "," + fmt17(mean_curve[di]) + "," +
                                     fmt17(mean_k[di]));
            }
            const std::size_t best_di = detail::argmin_index(mean_curve);
            std::vector<double> rmse_at_best(cfg.trials);
            std::vector<double> stop_k_at_best(cfg.trials);
            std::vector<double> kstars(cfg.trials);
            std::vector<double> fit_secs(cfg.trials);
            for (std::size_t t = 0; t < cfg.trials; ++t) {
                const auto& task = tasks[si * cfg.trials + t];
                const auto& cell = task.per_method[mi].by_delta[best_di];
                rmse_at_best[t] = cell.rmse_at_stop;
                stop_k_at_best[t] = cell.stop_k;
                kstars[t] = task.kstar_per_method[mi];
                fit_secs[t] = cell.fit_seconds;
            }
            summary_rows.push_back(methods[mi].name + "," + fmt17(cfg.sigmas[si]) + "," +
                                   fmt17(grid.values[best_di]) + "," +
                                   fmt17(mean_curve[best_di]) + "," +
                                   fmt17(detail::sample_std(rmse_at_best)) + "," +
                                   fmt17(detail::mean_of(kstars)) + "," +
                                   fmt17(detail::mean_of(stop_k_at_best)) + "," +
                                   fmt17(detail::mean_of(fit_secs)));
        }
    }

    std::filesystem::create_directories(out_dir);
    detail::write_csv(out_dir / "delta_togl_curves.csv",
                      "delta,method,sigma,mean_test_rmse,mean_k_final", curve_rows);
    detail::write_csv(out_dir / "delta_togl_summary.csv",
                      "method,sigma,best_param,test_rmse_mean,test_rmse_std,k_star,sparsity,"
                      "train_time_s",
                      summary_rows);
    detail::write_manifest(out_dir, cfg, {"delta_togl_curves.csv", "delta_togl_summary.csv"});
}

// Cost profile of the adaptive rule across the threshold grid: every cell is
// a real timed fit (no path replay — the clock is the measurement), medians
// over trials.  The timed region is the fit alone; data generation and
// dictionary construction sit outside it.
inline void run_cost_profile(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                             std::size_t workers) {
    const Grid grid = log_grid(cfg.delta_grid.lo, cfg.delta_grid.hi, cfg.delta_grid.count);
    const double sigma = cfg.sigmas.front();

    struct Task {
        std::vector<double> seconds;
        std::vector<double> sparsity;
    };
    std::vector<Task> tasks(cfg.trials);

    parallel_for(cfg.trials, workers, [&](std::size_t t) {
        const std::uint64_t base = trial_seed(cfg.seed, t);
        const auto td = detail::make_trial_data(cfg, cfg.m_train, sigma, base);
        Task& task = tasks[t];
        task.seconds.resize(grid.values.size());
        task.sparsity.resize(grid.values.size());
        for (std::size_t di = 0; di < grid.values.size(); ++di) {
            GreedyConfig gc;
            gc.selection = SelectionRule::argmax();
            gc.stopping = StoppingRule::adaptive(grid.values[di]);
            gc.truncation_M = cfg.truncation;
            gc.seed = substream_seed(base, detail::kTagPerDeltaBase + di);
            const auto t0 = std::chrono::steady_clock::now();
            const Estimator e = fit_greedy(gc, td.train, td.dict);
            const auto t1 = std::chrono::steady_clock::now();
            task.seconds[di] = std::chrono::duration<double>(t1 - t0).count();
            task.sparsity[di] = static_cast<double>(e.k_final);
        }
    });

    std::vector<std::string> rows;
    for (std::size_t di = 0; di < grid.values.size(); ++di) {
        std::vector<double> secs(cfg.trials);
        std::vector<double> spars(cfg.trials);
        for (std::size_t t = 0; t < cfg.trials; ++t) {
            secs[t] = tasks[t].seconds[di];
            spars[t] = tasks[t].sparsity[di];
        }
        rows.push_back(fmt17(grid.values[di]) + "," + fmt17(detail::median_of(secs)) + "," +
                       fmt17(detail::median_of(spars)));
    }

    std::filesystem::create_directories(out_dir);
    detail::write_csv(out_dir / "cost_profile.csv", "delta,fit_time_s,sparsity", rows);
    detail::write_manifest(out_dir, cfg, {"cost_profile.csv"});
}

// Success-rate phase diagram over (sample size, accuracy target): per trial
// the threshold is chosen by k-fold cross validation, the model is refit on
// the full training set, and success means beating the accuracy on a
// noiseless test set.  Cells report success rates in [0, 1].
inline void run_phase_diagram(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                              std::size_t workers) {
    const Grid cv_grid = log_grid(cfg.delta_grid.lo, cfg.delta_grid.hi, cfg.cv_grid_count);
    const double sigma = cfg.sigmas.front();

    std::vector<double> rmse(cfg.m_list.size() * cfg.trials, 0.0);
    parallel_for(rmse.size(), workers, [&](std::size_t idx) {
        const std::size_t mi = idx / cfg.trials;
        const std::size_t t = idx % cfg.trials;
        const std::uint64_t base = substream_seed(trial_seed(cfg.seed, t), 500 + mi);
        const auto td = detail::make_trial_data(cfg, cfg.m_list[mi], sigma, base);

        GreedyPathCvFitter fitter(SelectionRule::argmax(), StoppingRule::Kind::Adaptive,
                                  cv_grid.values.front(), 0, cfg.truncation,
                                  substream_seed(base, detail::kTagFitBase));
        const auto builder = [&](const std::vector<double>& xs) {
            return build_rbf_dictionary(packing_centers(cfg.n_atoms, -kPi, kPi), cfg.eta, xs,
                                        cfg.normalize);
        };
        const CvResult cv =
            cross_validate(std::ref(fitter), cv_grid, td.train, builder, cfg.cv_folds,
                           substream_seed(base, detail::kTagCvSplit));

        GreedyConfig gc;
        gc.selection = SelectionRule::argmax();
        gc.stopping = StoppingRule::adaptive(cv.best_candidate());
        gc.truncation_M = cfg.truncation;
        gc.seed = substream_seed(base, detail::kTagFinalFit);
        const Estimator e = fit_greedy(gc, td.train, td.dict);
        rmse[idx] = ogl::rmse(predict(e, td.dict, td.test.xs), td.test.ys);
    });

    std::string header = "accuracy";
    for (std::size_t m : cfg.m_list) header += "," + std::to_string(m);
    std::vector<std::string> rows;
    for (double acc : cfg.accuracies) {
        std::string row = fmt17(acc);
        for (std::size_t mi = 0; mi < cfg.m_list.size(); ++mi) {
            std::size_t successes = 0;
            for (std::size_t t = 0; t < cfg.trials; ++t)
                if (rmse[mi * cfg.trials + t] < acc) ++successes;
            row += "," + fmt17(static_cast<double>(successes) / static_cast<double>(cfg.trials));
        }
        rows.push_back(row);
    }

    std::filesystem::create_directories(out_dir);
    detail::write_csv(out_dir / "phase_diagram.csv", header, rows);
    detail::write_manifest(out_dir, cfg, {"phase_diagram.csv"});
}

// Head-to-head table: greedy variants with cross-validated parameters against
// ridge and lasso with cross-validated penalties, at one or more dictionary
// sizes.  Sparsity is the terminal atom count for greedy methods and the
// support size for the dense baselines.
inline void run_method_table(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                             std::size_t workers) {
    const double sigma = cfg.sigmas.front();
    const std::vector<std::string> method_names = {"ogl",         "delta_togl1", "delta_togl2",
                                                   "delta_togl3", "delta_toglr", "ridge",
                                                   "lasso"};

    struct Cell {
        double param = 0;
        double test_rmse = 0;
        double sparsity = 0;
    };
    struct Task {
        std::vector<Cell> per_method;
    };
    std::vector<Task> tasks(cfg.n_list.size() * cfg.trials);

    parallel_for(tasks.size(), workers, [&](std::size_t idx) {
        const std::size_t ni = idx / cfg.trials;
        const std::size_t t = idx % cfg.trials;
        const std::size_t n_atoms = cfg.n_list[ni];
        const std::uint64_t base = substream_seed(trial_seed(cfg.seed, t), 700 + ni);

        const TargetFunction target = sinc_target();
        SampleSet train = gen_samples(target, cfg.m_train, sigma,
                                      substream_seed(base, detail::kTagTrain));
        SampleSet test =
            gen_samples(target, cfg.m_test, 0.0, substream_seed(base, detail::kTagTest));
        const auto builder = [&](const std::vector<double>& xs) {
            return build_rbf_dictionary(packing_centers(n_atoms, target.lo, target.hi), cfg.eta,
                                        xs, cfg.normalize);
        };
        const Dictionary dict = builder(train.xs);
        const std::uint64_t cv_seed = substream_seed(base, detail::kTagCvSplit);

        const Grid delta_cv = log_grid(cfg.delta_grid.lo, cfg.delta_grid.hi, cfg.cv_grid_count);
        const Grid k_cv = linear_grid(1.0, static_cast<double>(cfg.k_max),
                                      cfg.k_max); // integer budgets 1..k_max
        const Grid ridge_cv =
            log_grid(cfg.ridge_lambda_grid.lo, cfg.ridge_lambda_grid.hi, cfg.ridge_lambda_grid.count);
        const Grid lasso_cv =
            log_grid(cfg.lasso_lambda_grid.lo, cfg.lasso_lambda_grid.hi, cfg.lasso_lambda_grid.count);

        Task& task = tasks[idx];
        task.per_method.resize(method_names.size());
        std::size_t slot = 0;

        // Budgeted greedy, budget chosen by CV.
        {
            GreedyPathCvFitter fitter(SelectionRule::argmax(), StoppingRule::Kind::FixedK, 0.0,
                                      cfg.k_max, cfg.truncation,
                                      substream_seed(base, detail::kTagFitBase + 0));
            const CvResult cv =
                cross_validate(std::ref(fitter), k_cv, train, builder, cfg.cv_folds, cv_seed);
            const auto k_best = static_cast<std::size_t>(std::llround(cv.best_candidate()));
            GreedyConfig gc;
            gc.selection = SelectionRule::argmax();
            gc.stopping = StoppingRule::fixed_k(k_best);
            gc.truncation_M = cfg.truncation;
            gc.seed = substream_seed(base, detail::kTagFinalFit + 0);
            const Estimator e = fit_greedy(gc, train, dict);
            task.per_method[slot++] = {static_cast<double>(k_best),
                                       rmse(predict(e, dict, test.xs), test.ys),
                                       static_cast<double>(e.k_final)};
        }

        // Adaptive greedy, ranked selections, threshold chosen by CV.
        const std::array<SelectionRule, 3> ranked = {SelectionRule::argmax(),
                                                     SelectionRule::kth_max(2),
                                                     SelectionRule::kth_max(3)};
        for (std::size_t r = 0; r < ranked.size(); ++r) {
            GreedyPathCvFitter fitter(ranked[r], StoppingRule::Kind::Adaptive,
                                      delta_cv.values.front(), 0, cfg.truncation,
                                      substream_seed(base, detail::kTagFitBase + 1 + r));
            const CvResult cv =
                cross_validate(std::ref(fitter), delta_cv, train, builder, cfg.cv_folds, cv_seed);
            GreedyConfig gc;
            gc.selection = ranked[r];
            gc.stopping = StoppingRule::adaptive(cv.best_candidate());
            gc.truncation_M = cfg.truncation;
            gc.seed = substream_seed(base, detail::kTagFinalFit + 1 + r);
            const Estimator e = fit_greedy(gc, train, dict);
            task.per_method[slot++] = {cv.best_candidate(),
                                       rmse(predict(e, dict, test.xs), test.ys),
                                       static_cast<double>(e.k_final)};
        }

        // Adaptive greedy with random in-threshold selection.
        {
            GreedyDirectCvFitter fitter(SelectionRule::delta_random(), cfg.truncation,
                                        substream_seed(base, detail::kTagFitBase + 4));
            const CvResult cv =
                cross_validate(std::ref(fitter), delta_cv, train, builder, cfg.cv_folds, cv_seed);
            GreedyConfig gc;
            gc.selection = SelectionRule::delta_random();
            gc.stopping = StoppingRule::adaptive(cv.best_candidate());
            gc.truncation_M = cfg.truncation;
            gc.seed = substream_seed(base, detail::kTagFinalFit + 4);
            const Estimator e = fit_greedy(gc, train, dict);
            task.per_method[slot++] = {cv.best_candidate(),
                                       rmse(predict(e, dict, test.xs), test.ys),
                                       static_cast<double>(e.k_final)};
        }

        // Ridge.
        {
            RidgeCvFitter fitter;
            const CvResult cv =
                cross_validate(std::ref(fitter), ridge_cv, train, builder, cfg.cv_folds, cv_seed);
            const DenseModel model = fit_ridge(dict, train.ys, cv.best_candidate());
            task.per_method[slot++] = {cv.best_candidate(),
                                       rmse(predict(model, dict, test.xs), test.ys),
                                       static_cast<double>(model.nnz())};
        }

        // Lasso.
        {
            LassoCvFitter fitter;
            const CvResult cv =
                cross_validate(std::ref(fitter), lasso_cv, train, builder, cfg.cv_folds, cv_seed);
            const DenseModel model = fit_lasso_fista(dict, train.ys, cv.best_candidate());
            task.per_method[slot++] = {cv.best_candidate(),
                                       rmse(predict(model, dict, test.xs), test.ys),
                                       static_cast<double>(model.nnz())};
        }
    });

    std::vector<std::string> rows;
    for (std::size_t mi = 0; mi < method_names.size(); ++mi) {
        for (std::size_t ni = 0; ni < cfg.n_list.size(); ++ni) {
            std::vector<double> params(cfg.trials);
            std::vector<double> rmses(cfg.trials);
            std::vector<double> spars(cfg.trials);
            for (std::size_t t = 0; t < cfg.trials; ++t) {
                const auto& cell = tasks[ni * cfg.trials + t].per_method[mi];
                params[t] = cell.param;
                rmses[t] = cell.test_rmse;
                spars[t] = cell.sparsity;
            }
            rows.push_back(method_names[mi] + "," + std::to_string(cfg.n_list[ni]) + "," +
                           fmt17(detail::grid_median(params)) + "," +
                           fmt17(detail::mean_of(rmses)) + "," +
                           fmt17(detail::sample_std(rmses)) + "," +
                           fmt17(detail::mean_of(spars)));
        }
    }

    std::filesystem::create_directories(out_dir);
    detail::write_csv(out_dir / "method_table.csv",
                      "method,n,param,test_rmse_mean,test_rmse_std,sparsity", rows);
    detail::write_manifest(out_dir, cfg, {"method_table.csv"});
}

// ---------------------------------------------------------------------------
// Single fit on a CSV dataset
// ---------------------------------------------------------------------------

struct FitOneResult {
    Estimator estimator;
    double train_rmse = 0;
    std::size_t m = 0;
};

inline FitOneResult fit_one(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
    const SampleSet z = load_csv(cfg.data_csv);

    double lo;
    double hi;
    if (cfg.domain) {
        lo = (*cfg.domain)[0];
        hi = (*cfg.domain)[1];
    } else {
        lo = *std::min_element(z.xs.begin(), z.xs.end());
        hi = *std::max_element(z.xs.begin(), z.xs.end());
        if (!(lo < hi))
            throw DataError("fit: all inputs identical; supply an explicit 'domain'");
    }

    const Dictionary d =
        build_rbf_dictionary(packing_centers(cfg.n_atoms, lo, hi), cfg.eta, z.xs, cfg.normalize);

    GreedyConfig gc;
    if (cfg.selection == "argmax") gc.selection = SelectionRule::argmax();
    else if (cfg.selection == "second_max") gc.selection = SelectionRule::kth_max(2);
    else if (cfg.selection == "third_max") gc.selection = SelectionRule::kth_max(3);
    else if (cfg.selection == "uniform_random") gc.selection = SelectionRule::uniform_random();
    else if (cfg.selection == "delta_arbitrary") gc.selection = SelectionRule::delta_arbitrary();
    else if (cfg.selection == "delta_random") gc.selection = SelectionRule::delta_random();
    else throw ConfigError("fit: unknown selection '" + cfg.selection + "'");

    const bool needs_delta = cfg.stopping != "fixed_k";
    if (needs_delta && std::isnan(cfg.delta))
        throw ConfigError("fit: stopping '" + cfg.stopping + "' needs 'delta'");
    try {
        if (cfg.stopping == "fixed_k") gc.stopping = StoppingRule::fixed_k(cfg.k_max);
        else if (cfg.stopping == "threshold_only") gc.stopping = StoppingRule::threshold_only(cfg.delta);
        else if (cfg.stopping == "threshold_plus_k")
            gc.stopping = StoppingRule::threshold_plus_k(cfg.delta, cfg.k_max);
        else if (cfg.stopping == "adaptive") gc.stopping = StoppingRule::adaptive(cfg.delta);
        else throw ConfigError("fit: unknown stopping '" + cfg.stopping + "'");
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("fit: ") + e.what());
    }
    gc.truncation_M = cfg.truncation;
    gc.seed = cfg.seed;

    FitOneResult result;
    result.estimator = fit_greedy(gc, z, d);
    result.train_rmse = rmse(predict(result.estimator, d, z.xs), z.ys);
    result.m = z.m();

    std::filesystem::create_directories(out_dir);
    detail::write_text_file(out_dir / "estimator.json",
                            estimator_to_json(result.estimator).dump(2) + "\n");
    detail::write_manifest(out_dir, cfg, {"estimator.json"});
    return result;
}

// Dispatch by config kind (the CLI subcommands map 1:1 onto these).
inline void run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                           std::size_t workers) {
    if (cfg.kind == "ogl-compare") return run_ogl_comparison(cfg, out_dir, workers);
    if (cfg.kind == "togl-compare") return run_togl_comparison(cfg, out_dir, workers);
    if (cfg.kind == "delta-togl") return run_delta_togl(cfg, out_dir, workers);
    if (cfg.kind == "cost-profile") return run_cost_profile(cfg, out_dir, workers);
    if (cfg.kind == "phase-diagram") return run_phase_diagram(cfg, out_dir, workers);
    if (cfg.kind == "method-table") return run_method_table(cfg, out_dir, workers);
    throw ConfigError("run_experiment: no runner for kind '" + cfg.kind + "'");
}

} // namespace ogl
