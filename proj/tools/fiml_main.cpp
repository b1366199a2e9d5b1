/// fiml: field-inversion + machine-learning turbulence correction toolkit.
///
/// Subcommands cover the batch workflow end to end: baseline solve, adjoint
/// field inversion, feature extraction, ensemble training, gated one-time
/// correction, sigma-bar sweeps, and a built-in oracle battery.

#include <CLI11.hpp>
#include <cstdio>
#include <exception>
#include <functional>
#include <iostream>

#include "fiml/pipeline.hpp"

namespace {

struct GlobalArgs {
    std::string config_path;
    std::string out_dir;
    long long seed = -1;
    int threads = 0;
    double sigma_bar = -1.0;
};

fiml::RunConfig load(const GlobalArgs& args) {
    if (args.config_path.empty())
        throw fiml::ConfigError("a config file is required (--config PATH)");
    fiml::RunConfig cfg = fiml::load_config(args.config_path);
    if (!args.out_dir.empty()) {
        cfg.output_dir = args.out_dir;
        cfg.resolved["output_dir"] = args.out_dir;
    }
    if (args.seed >= 0) {
        cfg.master_seed = static_cast<std::uint64_t>(args.seed);
        cfg.resolved["master_seed"] = cfg.master_seed;
    }
    if (args.threads > 0) {
        cfg.threads = args.threads;
        cfg.resolved["threads"] = cfg.threads;
    }
    return cfg;
}

int run_guarded(const std::function<int()>& body) {
    try {
        return body();
    } catch (const fiml::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid argument: " << e.what() << '\n';
        return 2;
    } catch (const fiml::SolverError& e) {
        std::cerr << "solver error: " << e.what() << '\n';
        return 3;
    } catch (const fiml::TrainingError& e) {
        std::cerr << "training error: " << e.what() << '\n';
        return 4;
    } catch (const fiml::IoError& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return 5;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fiml: data-driven turbulence-model correction toolkit"};
    app.require_subcommand(1);

    GlobalArgs args;
    app.add_option("--config", args.config_path, "run configuration file (JSON)");
    app.add_option("--out", args.out_dir, "output directory override");
    app.add_option("--seed", args.seed, "master seed override");
    app.add_option("--threads", args.threads, "worker threads override");
    app.add_option("--sigma-bar", args.sigma_bar, "acceptance tolerance override");

    auto* solve = app.add_subcommand("solve", "baseline RANS solve (beta_c = 1)");
    auto* invert = app.add_subcommand("invert", "adjoint field inversion for beta_c");
    auto* features = app.add_subcommand("features", "feature extraction from the baseline");
    auto* train = app.add_subcommand("train", "train the correction model ensemble");
    auto* predict =
        app.add_subcommand("predict-correct", "gated prediction + one-time corrected solve");
    auto* sweep = app.add_subcommand("sweep-sigma", "sweep the acceptance tolerance");
    auto* verify = app.add_subcommand("verify", "run the built-in oracle checks");

    CLI11_PARSE(app, argc, argv);

    if (verify->parsed())
        return run_guarded([&] { return fiml::cmd_verify() == 0 ? 0 : 1; });

    return run_guarded([&]() -> int {
        fiml::RunConfig cfg = load(args);
        if (solve->parsed()) {
            fiml::SolveArtifacts art = fiml::cmd_solve(cfg);
            std::printf("solve: converged in %d iterations -> %s\n",
                        art.solution.info.iterations, art.state_csv.c_str());
        } else if (invert->parsed()) {
            fiml::InvertArtifacts art = fiml::cmd_invert(cfg);
            std::printf("invert: %s after %d iterations\n",
                        art.result.termination.c_str(), art.result.iterations);
        } else if (features->parsed()) {
            const std::string path = fiml::cmd_features(cfg);
            std::printf("features: wrote %s\n", path.c_str());
        } else if (train->parsed()) {
            const std::string archive = fiml::cmd_train(cfg);
            std::printf("train: wrote %s\n", archive.c_str());
        } else if (predict->parsed()) {
            fiml::PredictCorrectArtifacts art =
                fiml::cmd_predict_correct(cfg, args.sigma_bar);
            std::printf("predict-correct: %d active cells, corrected %s\n",
                        art.prediction.active_cells,
                        art.corrected_converged ? "converged" : "kept uncorrected");
        } else if (sweep->parsed()) {
            const auto points = fiml::cmd_sweep_sigma(cfg);
            for (const auto& pt : points)
                std::printf("sigma_bar=%g active_cells=%d\n", pt.sigma_bar,
                            pt.active_cells);
        }
        return 0;
    });
}
