/// @file test_pipeline.cpp
/// @brief Stage-level pipeline checks: artifacts, manifest-driven skipping,
/// training/prediction round trips, sweep behavior.

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "fiml/pipeline.hpp"
#include "support/twin_setup.hpp"

using namespace fiml;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        static std::mt19937_64 gen(std::random_device{}());
        path = fs::temp_directory_path() / ("fiml_pipe_" + std::to_string(gen()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str(const std::string& name) const { return (path / name).string(); }
};

nlohmann::json channel_case_json(int n_cells = 40, double retau = 395.0) {
    return {
        {"mesh", {{"type", "channel1d"}, {"n_cells", n_cells}, {"stretch_ratio", 1.1}}},
        {"flow",
         {{"nu", 1.0 / retau}, {"body_force", 1.0}, {"turbulence", "sst"}}},
        {"solver", {{"tolerance", 1e-9}, {"max_iterations", 60000}}}};
}

}  // namespace

TEST_CASE("solve stage writes artifacts and skips up-to-date reruns") {
    TempDir dir;
    nlohmann::json j = {{"output_dir", dir.str("run")},
                        {"case", channel_case_json()}};
    const RunConfig cfg = parse_config(j);

    const SolveArtifacts art = cmd_solve(cfg);
    CHECK(art.solution.info.converged);
    CHECK(fs::exists(dir.str("run") + "/baseline_state.csv"));
    CHECK(fs::exists(dir.str("run") + "/residual_history.csv"));
    CHECK(fs::exists(dir.str("run") + "/mesh.csv"));
    CHECK(fs::exists(dir.str("run") + "/manifest.json"));
    CHECK(fs::exists(dir.str("run") + "/resolved_config.json"));

    // rerun skips the solve, keeping byte-identical outputs
    const std::string h1 = hash_file(dir.str("run") + "/baseline_state.csv");
    const SolveArtifacts art2 = cmd_solve(cfg);
    CHECK(hash_file(dir.str("run") + "/baseline_state.csv") == h1);
    for (int c = 0; c < art.mesh.n_cells(); ++c)
        CHECK(art2.solution.state.u[c] == art.solution.state.u[c]);

    // deleting an output forces recomputation with identical bytes
    fs::remove(dir.str("run") + "/baseline_state.csv");
    cmd_solve(cfg);
    CHECK(hash_file(dir.str("run") + "/baseline_state.csv") == h1);
}

TEST_CASE("invert stage fails fast on a missing data file") {
    TempDir dir;
    nlohmann::json j = {{"output_dir", dir.str("run")},
                        {"case", channel_case_json()},
                        {"inversion",
                         {{"lambda", 1e-4}, {"data_file", dir.str("missing.csv")}}}};
    const RunConfig cfg = parse_config(j);
    CHECK_THROWS_AS(cmd_invert(cfg), IoError);
    // no solve happened: no baseline artifact
    CHECK_FALSE(fs::exists(dir.str("run") + "/baseline_state.csv"));
}

TEST_CASE("twin invert reaches an order-of-magnitude objective reduction") {
    TempDir dir;

    // manufacture reference data from a known bump
    const DiscreteCase cs = twin::channel_case(40, 395.0, 1e-10);
    const RansSolution ref = cs.solve(twin::bump_beta(cs.mesh(), 0.5));
    ReferenceSamples samples;
    for (int c = 0; c < cs.n_cells(); ++c) {
        samples.x.push_back(cs.mesh().cx[c]);
        samples.y.push_back(cs.mesh().cy[c]);
        samples.u.push_back(ref.state.u[c]);
        samples.v.push_back(0.0);
    }
    write_reference_csv(samples, dir.str("ref.csv"));

    nlohmann::json j = {
        {"output_dir", dir.str("run")},
        {"case", channel_case_json(40)},
        {"inversion",
         {{"lambda", 1e-4},
          {"data_file", dir.str("ref.csv")},
          {"optimizer", {{"max_iterations", 60}}}}}};
    const RunConfig cfg = parse_config(j);

    const InvertArtifacts art = cmd_invert(cfg);
    CHECK(fs::exists(dir.str("run") + "/beta_c.csv"));
    CHECK(fs::exists(dir.str("run") + "/objective_history.csv"));
    CHECK(fs::exists(dir.str("run") + "/inversion_summary.json"));

    nlohmann::json summary;
    std::ifstream in(dir.str("run") + "/inversion_summary.json");
    in >> summary;
    CHECK(summary.at("reduction_factor").get<double>() >= 10.0);
}

TEST_CASE("train stage produces a reloadable archive and drop notices") {
    TempDir dir;
    const DiscreteCase cs = twin::channel_case(32, 395.0, 1e-9);

    // three sources; one lies entirely inside the band filter
    const twin::TwinSource a = twin::make_source(cs, 0.5, "src_a");
    const twin::TwinSource b = twin::make_source(cs, -0.4, "src_b");
    twin::TwinSource inside = twin::make_source(cs, 0.05, "src_inside");

    int idx = 0;
    nlohmann::json sources = nlohmann::json::array();
    const std::vector<const twin::TwinSource*> all_sources = {&a, &b, &inside};
    for (const twin::TwinSource* src : all_sources) {
        const std::string fpath = dir.str("features_" + std::to_string(idx) + ".csv");
        const std::string bpath = dir.str("beta_" + std::to_string(idx) + ".csv");
        write_features_csv(src->features, fpath);
        write_beta_csv(cs.mesh(), src->beta_star, bpath);
        sources.push_back({{"name", src->name},
                           {"features_file", fpath},
                           {"beta_file", bpath}});
        ++idx;
    }

    nlohmann::json j = {
        {"output_dir", dir.str("run")},
        {"train", {{"sources", sources}}},
        {"model",
         {{"type", "gpe"},
          {"gpe", {{"restarts", 2}, {"opt_iterations", 80}}}}},
        {"master_seed", 11}};
    const RunConfig cfg = parse_config(j);
    const std::string archive = cmd_train(cfg);
    CHECK(fs::exists(archive));

    nlohmann::json report;
    std::ifstream rf(dir.str("run") + "/training_report.json");
    rf >> report;
    REQUIRE(report.at("dropped_sources").size() == 1);
    CHECK(report.at("dropped_sources")[0] == "src_inside");
    CHECK(report.at("sources").size() == 2);

    // reload reproduces predictions bit for bit
    std::ifstream af(archive);
    nlohmann::json jar;
    af >> jar;
    const CorrectionModel m1 = CorrectionModel::from_json(jar);
    const CorrectionModel m2 = CorrectionModel::from_json(jar);
    Eigen::VectorXd q(kNumFeatures);
    for (int i = 0; i < kNumFeatures; ++i) q[i] = 0.01 * i - 0.2;
    const EnsemblePrediction p1 = m1.predict(q, 0.2);
    const EnsemblePrediction p2 = m2.predict(q, 0.2);
    CHECK(p1.mu_star == p2.mu_star);
    CHECK(p1.sigma_star == p2.sigma_star);
}

TEST_CASE("predict-correct with sigma_bar = 0 reproduces the uncorrected flow") {
    TempDir dir;
    const DiscreteCase cs = twin::channel_case(32, 395.0, 1e-9);
    const CorrectionModel model = twin::opposing_gpe_ensemble(cs, 7, 2, 60);
    {
        std::ofstream out(dir.str("model.json"));
        out << model.to_json().dump() << '\n';
    }

    nlohmann::json j = {{"output_dir", dir.path.string()},
                        {"case", channel_case_json(32)},
                        {"model", {{"type", "gpe"}, {"archive", "model.json"}}}};
    const RunConfig cfg = parse_config(j);

    const PredictCorrectArtifacts art = cmd_predict_correct(cfg, 0.0);
    CHECK(art.prediction.active_cells == 0);
    for (double b : art.prediction.beta.beta) CHECK(b == 1.0);
    for (int c = 0; c < 32; ++c)
        CHECK(art.corrected.u[c] ==
              doctest::Approx(art.uncorrected.u[c]).epsilon(1e-9));
    CHECK(fs::exists(dir.str("predictions.csv")));
    CHECK(fs::exists(dir.str("lof.csv")));
    CHECK(fs::exists(dir.str("profiles.csv")));
}

TEST_CASE("sigma sweep is monotone, deduplicates, and rejects empty lists") {
    TempDir dir;
    const DiscreteCase cs = twin::channel_case(32, 395.0, 1e-9);
    const CorrectionModel model = twin::opposing_gpe_ensemble(cs, 13, 2, 60);
    {
        std::ofstream out(dir.str("model.json"));
        out << model.to_json().dump() << '\n';
    }

    nlohmann::json j = {
        {"output_dir", dir.path.string()},
        {"case", channel_case_json(32)},
        {"model", {{"type", "gpe"}, {"archive", "model.json"}}},
        {"sweep", {{"sigma_bars", {0.1, 0.05, 0.1, 0.2}}}}};
    const RunConfig cfg = parse_config(j);

    const std::vector<SweepPoint> points = cmd_sweep_sigma(cfg);
    REQUIRE(points.size() == 3);  // deduplicated and sorted
    CHECK(points[0].sigma_bar == 0.05);
    for (std::size_t i = 1; i < points.size(); ++i)
        CHECK(points[i].active_cells >= points[i - 1].active_cells);
    CHECK(fs::exists(dir.path.string() + "/sweep_report.csv"));

    nlohmann::json bad = j;
    bad["sweep"]["sigma_bars"] = nlohmann::json::array();
    CHECK_THROWS_AS(cmd_sweep_sigma(parse_config(bad)), ConfigError);
}
