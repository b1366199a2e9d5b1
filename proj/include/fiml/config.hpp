#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fiml/deep_ensemble.hpp"
#include "fiml/gp.hpp"
#include "fiml/inversion.hpp"
#include "fiml/io.hpp"
#include "fiml/mesh.hpp"
#include "fiml/solver.hpp"

namespace fiml {

struct MeshConfig {
    std::string type;  // channel1d | channel2d | step2d
    int n_cells = 96;
    double stretch_ratio = 1.08;
    double half_height = 1.0;
    int nx = 32, ny = 16;
    double step_height_fraction = 0.25;
    double domain_length = 8.0;
    double domain_height = 2.0;

    Mesh build() const;
};

struct CaseConfig {
    MeshConfig mesh;
    FlowConditions flow;
    SolverSettings solver;
};

struct SelectorConfig {
    std::string type = "all";  // all | box
    BoxSelector box;
};

struct InversionConfig {
    double lambda = 1e-2;
    std::string data_file;
    SelectorConfig selection;
    SelectorConfig activity;
    OptimizerSettings optimizer;

    std::vector<std::uint8_t> activity_mask(const Mesh& mesh) const;
};

struct FeatureSectionConfig {
    double band_low = 0.9;
    double band_high = 1.1;
    FeatureOptions options;
};

struct TrainSourceConfig {
    std::string name;
    std::string features_file;
    std::string beta_file;
};

struct TrainConfig {
    std::vector<TrainSourceConfig> sources;
};

struct ModelConfig {
    std::string type = "gpe";  // gpe | deep_ensemble
    double sigma_bar = -1.0;   // negative = model default (0.2 gpe, 0.1 de)
    std::string archive = "model.json";
    GpOptions gpe;
    DeepEnsembleOptions de;
    int lof_neighbors = 20;
};

struct SweepConfig {
    std::vector<double> sigma_bars;
};

struct RunConfig {
    int format_version = 1;
    std::uint64_t master_seed = 0;
    int threads = 1;
    std::string output_dir = "fiml_out";

    std::optional<CaseConfig> case_;
    std::optional<InversionConfig> inversion;
    FeatureSectionConfig features;
    std::optional<TrainConfig> train;
    std::optional<ModelConfig> model;
    std::vector<double> stations;
    std::optional<SweepConfig> sweep;

    nlohmann::json resolved;  // full config with defaults applied
};

/// Parse and schema-validate a config file. Unknown keys and type errors
/// raise ConfigError.
RunConfig load_config(const std::string& path);
RunConfig parse_config(const nlohmann::json& j);

}  // namespace fiml
