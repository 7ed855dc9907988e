// Command-line front end: each subcommand loads a JSON config, runs the
// corresponding experiment or fit, and writes reports plus a manifest into an
// output directory.  Exit codes: 0 success, 2 configuration problem, 3 data
// problem, 4 numerical failure.
#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "ogl/errors.hpp"
#include "ogl/experiments.hpp"
#include "ogl/parallel.hpp"
#include "ogl/serialize.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::size_t workers = 0; // 0 = resolve from environment / hardware
    std::optional<std::int64_t> seed;
};

void add_common_flags(CLI::App* sub, CommonArgs& args, const std::string& kind) {
    sub->add_option("--config", args.config_path, "JSON config file (defaults apply if omitted)");
    sub->add_option("--out", args.out_dir, "output directory")->default_val("out/" + kind);
    sub->add_option("--workers", args.workers,
                    "worker threads (default: GREEDY_DICT_WORKERS or hardware)");
    sub->add_option("--seed", args.seed, "master seed (overrides the config's)");
}

nlohmann::json load_config_json(const std::string& path) {
    if (path.empty()) return nlohmann::json::object();
    std::ifstream in(path);
    if (!in) throw ogl::ConfigError("cannot open config file '" + path + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ogl::ConfigError("config file '" + path + "': " + e.what());
    }
}

ogl::ExperimentConfig make_config(const CommonArgs& args, const std::string& kind) {
    ogl::ExperimentConfig cfg = ogl::parse_experiment_config(load_config_json(args.config_path), kind);
    if (args.seed) cfg.seed = static_cast<std::uint64_t>(*args.seed);
    return cfg;
}

int dispatch(const CommonArgs& args, const std::string& kind) {
    const ogl::ExperimentConfig cfg = make_config(args, kind);
    const std::size_t workers = ogl::resolve_workers(args.workers);
    const std::filesystem::path out_dir(args.out_dir);

    if (kind == "fit") {
        const ogl::FitOneResult r = ogl::fit_one(cfg, out_dir);
        std::cout << "fit: m=" << r.m << " atoms=" << r.estimator.k_final
                  << " stop=" << ogl::to_string(r.estimator.termination_reason)
                  << " train_rmse=" << ogl::fmt17(r.train_rmse) << "\n"
                  << "wrote " << (out_dir / "estimator.json").string() << "\n";
        return 0;
    }
    ogl::run_experiment(cfg, out_dir, workers);
    std::cout << kind << ": reports written to " << out_dir.string() << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"sparse greedy regression over radial basis dictionaries"};
    app.set_version_flag("--version", std::string(ogl::kArtifactName) + " " + ogl::kArtifactVersion);
    app.require_subcommand(1);

    const std::vector<std::pair<std::string, std::string>> kinds = {
        {"ogl-compare", "compare greedy selection rules under a fixed atom budget"},
        {"togl-compare", "compare thresholded selection rules over a threshold grid"},
        {"delta-togl", "threshold grid with the adaptive residual stop"},
        {"cost-profile", "fit time and sparsity across the threshold grid"},
        {"phase-diagram", "success rates over sample size and accuracy target"},
        {"method-table", "cross-validated greedy methods against ridge and lasso"},
        {"fit", "fit one CSV dataset and write the estimator as JSON"},
    };

    std::vector<CommonArgs> args(kinds.size());
    for (std::size_t i = 0; i < kinds.size(); ++i)
        add_common_flags(app.add_subcommand(kinds[i].first, kinds[i].second), args[i],
                         kinds[i].first);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2; // help/version exit 0, usage errors are config errors
    }

    try {
        for (std::size_t i = 0; i < kinds.size(); ++i)
            if (app.get_subcommand(kinds[i].first)->parsed()) return dispatch(args[i], kinds[i].first);
        std::cerr << "error: no subcommand\n";
        return 2;
    } catch (const ogl::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ogl::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const ogl::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
