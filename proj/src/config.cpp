#include "fiml/config.hpp"

#include <fstream>
#include <set>

#include "fiml/errors.hpp"

namespace fiml {

namespace {

using nlohmann::json;

void require_keys(const json& j, const std::string& section,
                  const std::set<std::string>& allowed) {
    if (!j.is_object())
        throw ConfigError("config: section '" + section + "' must be an object");
    for (const auto& [key, value] : j.items()) {
        if (!allowed.count(key))
            throw ConfigError("config: unknown key '" + key + "' in section '" +
                              section + "'");
    }
}

template <typename T>
T get_or(const json& j, const std::string& key, const T& fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config: key '" + key + "' has the wrong type");
    }
}

template <typename T>
T get_required(const json& j, const std::string& key, const std::string& section) {
    if (!j.contains(key))
        throw ConfigError("config: missing required key '" + key + "' in section '" +
                          section + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config: key '" + key + "' has the wrong type");
    }
}

MeshConfig parse_mesh(const json& j) {
    require_keys(j, "case.mesh",
                 {"type", "n_cells", "stretch_ratio", "half_height", "nx", "ny",
                  "step_height_fraction", "domain_length", "domain_height"});
    MeshConfig m;
    m.type = get_required<std::string>(j, "type", "case.mesh");
    if (m.type != "channel1d" && m.type != "channel2d" && m.type != "step2d")
        throw ConfigError("config: mesh type must be channel1d, channel2d, or step2d");
    m.n_cells = get_or(j, "n_cells", m.n_cells);
    m.stretch_ratio = get_or(j, "stretch_ratio", m.stretch_ratio);
    m.half_height = get_or(j, "half_height", m.half_height);
    m.nx = get_or(j, "nx", m.nx);
    m.ny = get_or(j, "ny", m.ny);
    m.step_height_fraction = get_or(j, "step_height_fraction", m.step_height_fraction);
    m.domain_length = get_or(j, "domain_length", m.domain_length);
    m.domain_height = get_or(j, "domain_height", m.domain_height);
    return m;
}

FlowConditions parse_flow(const json& j) {
    require_keys(j, "case.flow",
                 {"nu", "body_force", "turbulence", "inlet_u", "inlet_k", "inlet_omega"});
    FlowConditions f;
    f.nu = get_required<double>(j, "nu", "case.flow");
    f.body_force_x = get_or(j, "body_force", 0.0);
    const std::string model = get_or<std::string>(j, "turbulence", "sst");
    if (model == "sst") f.model = TurbulenceModel::SstMenter;
    else if (model == "komega") f.model = TurbulenceModel::KOmegaWilcox;
    else if (model == "laminar") f.model = TurbulenceModel::Laminar;
    else throw ConfigError("config: turbulence must be sst, komega, or laminar");
    f.inlet_u = get_or(j, "inlet_u", 0.0);
    // Inlet turbulence quantities carry no defaults: 2D turbulent cases must
    // set them explicitly.
    f.inlet_k = get_or(j, "inlet_k", -1.0);
    f.inlet_omega = get_or(j, "inlet_omega", -1.0);
    return f;
}

SolverSettings parse_solver(const json& j) {
    require_keys(j, "case.solver",
                 {"tolerance", "max_iterations", "relax_momentum", "relax_pressure",
                  "relax_turbulence", "divergence_factor", "first_order_convection",
                  "history_stride", "omega_sublayer_yplus"});
    SolverSettings s;
    s.tolerance = get_or(j, "tolerance", s.tolerance);
    s.max_iterations = get_or(j, "max_iterations", s.max_iterations);
    s.relax_momentum = get_or(j, "relax_momentum", s.relax_momentum);
    s.relax_pressure = get_or(j, "relax_pressure", s.relax_pressure);
    s.relax_turbulence = get_or(j, "relax_turbulence", s.relax_turbulence);
    s.divergence_factor = get_or(j, "divergence_factor", s.divergence_factor);
    s.first_order_convection = get_or(j, "first_order_convection", s.first_order_convection);
    s.history_stride = get_or(j, "history_stride", s.history_stride);
    s.omega_sublayer_yplus = get_or(j, "omega_sublayer_yplus", s.omega_sublayer_yplus);
    return s;
}

SelectorConfig parse_selector(const json& j, const std::string& section) {
    require_keys(j, section, {"type", "x_min", "x_max", "y_min", "y_max"});
    SelectorConfig s;
    s.type = get_or<std::string>(j, "type", "all");
    if (s.type == "all") return s;
    if (s.type != "box")
        throw ConfigError("config: selector type must be all or box in " + section);
    s.box.enabled = true;
    s.box.x_min = get_or(j, "x_min", -1e300);
    s.box.x_max = get_or(j, "x_max", 1e300);
    s.box.y_min = get_or(j, "y_min", -1e300);
    s.box.y_max = get_or(j, "y_max", 1e300);
    return s;
}

OptimizerSettings parse_optimizer(const json& j) {
    require_keys(j, "inversion.optimizer",
                 {"max_iterations", "initial_step", "armijo_c1", "max_backtracks",
                  "plateau_tol", "plateau_window", "target_reduction", "beta_min",
                  "step_growth"});
    OptimizerSettings o;
    o.max_iterations = get_or(j, "max_iterations", o.max_iterations);
    o.initial_step = get_or(j, "initial_step", o.initial_step);
    o.armijo_c1 = get_or(j, "armijo_c1", o.armijo_c1);
    o.max_backtracks = get_or(j, "max_backtracks", o.max_backtracks);
    o.plateau_rel_change = get_or(j, "plateau_tol", o.plateau_rel_change);
    o.plateau_window = get_or(j, "plateau_window", o.plateau_window);
    o.target_reduction = get_or(j, "target_reduction", o.target_reduction);
    o.beta_min = get_or(j, "beta_min", o.beta_min);
    o.step_growth = get_or(j, "step_growth", o.step_growth);
    return o;
}

}  // namespace

Mesh MeshConfig::build() const {
    if (type == "channel1d") return build_channel_1d(n_cells, stretch_ratio, half_height);
    if (type == "channel2d") return build_channel_2d(nx, ny, domain_length, domain_height);
    return build_step_2d(nx, ny, step_height_fraction, domain_length, domain_height);
}

std::vector<std::uint8_t> InversionConfig::activity_mask(const Mesh& mesh) const {
    std::vector<std::uint8_t> mask(mesh.n_cells(), 1);
    if (activity.type == "box") {
        for (int c = 0; c < mesh.n_cells(); ++c)
            mask[c] = activity.box.contains(mesh.cx[c], mesh.cy[c]);
    }
    return mask;
}

RunConfig parse_config(const nlohmann::json& j) {
    require_keys(j, "<root>",
                 {"format_version", "master_seed", "threads", "output_dir", "case",
                  "inversion", "features", "train", "model", "stations", "sweep"});

    RunConfig cfg;
    cfg.format_version = get_or(j, "format_version", 1);
    if (cfg.format_version != 1)
        throw ConfigError("config: unsupported format_version " +
                          std::to_string(cfg.format_version));
    cfg.master_seed = get_or<std::uint64_t>(j, "master_seed", 0);
    cfg.threads = get_or(j, "threads", 1);
    if (cfg.threads < 1) throw ConfigError("config: threads must be >= 1");
    cfg.output_dir = get_or<std::string>(j, "output_dir", cfg.output_dir);

    if (j.contains("case")) {
        const json& jc = j.at("case");
        require_keys(jc, "case", {"mesh", "flow", "solver"});
        CaseConfig cc;
        cc.mesh = parse_mesh(jc.at("mesh"));
        if (!jc.contains("flow"))
            throw ConfigError("config: missing required key 'flow' in section 'case'");
        cc.flow = parse_flow(jc.at("flow"));
        cc.solver = jc.contains("solver") ? parse_solver(jc.at("solver")) : SolverSettings{};
        cfg.case_ = cc;
    }

    if (j.contains("inversion")) {
        const json& ji = j.at("inversion");
        require_keys(ji, "inversion",
                     {"lambda", "data_file", "selection", "activity", "optimizer"});
        InversionConfig ic;
        ic.lambda = get_required<double>(ji, "lambda", "inversion");
        ic.data_file = get_required<std::string>(ji, "data_file", "inversion");
        if (ji.contains("selection"))
            ic.selection = parse_selector(ji.at("selection"), "inversion.selection");
        if (ji.contains("activity"))
            ic.activity = parse_selector(ji.at("activity"), "inversion.activity");
        if (ji.contains("optimizer")) ic.optimizer = parse_optimizer(ji.at("optimizer"));
        cfg.inversion = ic;
    }

    if (j.contains("features")) {
        const json& jf = j.at("features");
        require_keys(jf, "features", {"band", "squash_invariants"});
        if (jf.contains("band")) {
            const auto band = jf.at("band").get<std::vector<double>>();
            if (band.size() != 2 || !(band[0] <= band[1]))
                throw ConfigError("config: features.band must be [low, high]");
            cfg.features.band_low = band[0];
            cfg.features.band_high = band[1];
        }
        cfg.features.options.squash_invariants =
            get_or(jf, "squash_invariants", true);
    }

    if (j.contains("train")) {
        const json& jt = j.at("train");
        require_keys(jt, "train", {"sources"});
        TrainConfig tc;
        for (const json& js : jt.at("sources")) {
            require_keys(js, "train.sources[]", {"name", "features_file", "beta_file"});
            TrainSourceConfig src;
            src.name = get_required<std::string>(js, "name", "train.sources[]");
            src.features_file =
                get_required<std::string>(js, "features_file", "train.sources[]");
            src.beta_file = get_required<std::string>(js, "beta_file", "train.sources[]");
            tc.sources.push_back(std::move(src));
        }
        if (tc.sources.empty())
            throw ConfigError("config: train.sources must not be empty");
        cfg.train = tc;
    }

    if (j.contains("model")) {
        const json& jm = j.at("model");
        require_keys(jm, "model",
                     {"type", "sigma_bar", "archive", "gpe", "de", "lof_neighbors"});
        ModelConfig mc;
        mc.type = get_or<std::string>(jm, "type", "gpe");
        if (mc.type != "gpe" && mc.type != "deep_ensemble")
            throw ConfigError("config: model.type must be gpe or deep_ensemble");
        mc.sigma_bar = get_or(jm, "sigma_bar", -1.0);
        mc.archive = get_or<std::string>(jm, "archive", "model.json");
        mc.lof_neighbors = get_or(jm, "lof_neighbors", 20);
        if (jm.contains("gpe")) {
            const json& jg = jm.at("gpe");
            require_keys(jg, "model.gpe",
                         {"restarts", "opt_iterations", "learning_rate",
                          "sparse_threshold", "max_inducing", "pin_prior_mean",
                          "predict_with_noise"});
            mc.gpe.restarts = get_or(jg, "restarts", mc.gpe.restarts);
            mc.gpe.opt_iterations = get_or(jg, "opt_iterations", mc.gpe.opt_iterations);
            mc.gpe.learning_rate = get_or(jg, "learning_rate", mc.gpe.learning_rate);
            mc.gpe.sparse_threshold =
                get_or(jg, "sparse_threshold", mc.gpe.sparse_threshold);
            mc.gpe.max_inducing = get_or(jg, "max_inducing", mc.gpe.max_inducing);
            mc.gpe.pin_prior_mean = get_or(jg, "pin_prior_mean", mc.gpe.pin_prior_mean);
            mc.gpe.predict_with_noise =
                get_or(jg, "predict_with_noise", mc.gpe.predict_with_noise);
        }
        if (jm.contains("de")) {
            const json& jd = jm.at("de");
            require_keys(jd, "model.de",
                         {"members", "hidden", "epochs", "learning_rate"});
            mc.de.members = get_or(jd, "members", mc.de.members);
            mc.de.hidden = get_or(jd, "hidden", mc.de.hidden);
            mc.de.epochs = get_or(jd, "epochs", mc.de.epochs);
            mc.de.learning_rate = get_or(jd, "learning_rate", mc.de.learning_rate);
        }
        cfg.model = mc;
    }

    if (j.contains("stations")) cfg.stations = j.at("stations").get<std::vector<double>>();

    if (j.contains("sweep")) {
        const json& js = j.at("sweep");
        require_keys(js, "sweep", {"sigma_bars"});
        SweepConfig sc;
        sc.sigma_bars = get_required<std::vector<double>>(js, "sigma_bars", "sweep");
        cfg.sweep = sc;
    }

    // resolved config (inputs echoed; defaults are what the structs carry)
    cfg.resolved = j;
    cfg.resolved["format_version"] = cfg.format_version;
    cfg.resolved["master_seed"] = cfg.master_seed;
    cfg.resolved["threads"] = cfg.threads;
    cfg.resolved["output_dir"] = cfg.output_dir;
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: JSON parse error: ") + e.what());
    }
    return parse_config(j);
}

}  // namespace fiml
