/// @file twin_setup.hpp
/// @brief Shared desk-scale twin-experiment fixtures: manufactured
/// correction fields, reference data, and trained ensembles.
#pragma once

#include <cmath>
#include <vector>

#include "fiml/ensemble.hpp"
#include "fiml/features.hpp"
#include "fiml/inversion.hpp"
#include "fiml/solver.hpp"

namespace twin {

inline fiml::DiscreteCase channel_case(int n_cells = 48, double retau = 395.0,
                                       double tol = 1e-10) {
    fiml::Mesh mesh = fiml::build_channel_1d(n_cells, 1.1, 1.0);
    fiml::FlowConditions cond;
    cond.nu = 1.0 / retau;
    cond.body_force_x = 1.0;
    cond.model = fiml::TurbulenceModel::SstMenter;
    fiml::SolverSettings set;
    set.tolerance = tol;
    set.max_iterations = 60000;
    return fiml::DiscreteCase(std::move(mesh), cond, set);
}

/// Gaussian bump in the channel core: depth > 0 lowers beta_c (more k),
/// depth < 0 raises it.
inline fiml::CorrectionField bump_beta(const fiml::Mesh& mesh, double depth,
                                       double center = 0.5, double width = 0.15) {
    fiml::CorrectionField beta(mesh.n_cells());
    for (int j = 0; j < mesh.n_cells(); ++j) {
        const double z = (mesh.cy[j] - center) / width;
        beta.beta[j] = 1.0 - depth * std::exp(-z * z);
    }
    return beta;
}

inline fiml::InversionProblem twin_problem(const fiml::DiscreteCase& cs,
                                           const fiml::FlowState& reference,
                                           double lambda = 1e-4) {
    fiml::InversionProblem p;
    p.mesh = cs.mesh();
    p.conditions = cs.conditions();
    p.solver = cs.settings();
    p.lambda = lambda;
    for (int c = 0; c < cs.n_cells(); ++c) {
        p.data.cells.push_back(c);
        p.data.u_ref.push_back(reference.u[c]);
    }
    return p;
}

struct TwinSource {
    std::string name;
    fiml::FlowState baseline;                 // uncorrected converged state
    fiml::CorrectionField beta_star;          // manufactured correction
    std::vector<std::array<double, fiml::kNumFeatures>> features;  // of baseline
};

/// Build a training source: solve the uncorrected case, manufacture a known
/// beta field, and pair the baseline features with those targets.
inline TwinSource make_source(const fiml::DiscreteCase& cs, double bump_depth,
                              const std::string& name) {
    TwinSource src;
    src.name = name;
    const fiml::RansSolution base = cs.solve(fiml::CorrectionField(cs.n_cells()));
    src.baseline = base.state;
    src.beta_star = bump_beta(cs.mesh(), bump_depth);
    src.features = fiml::compute_features(base.state, cs.mesh());
    return src;
}

inline fiml::TrainingSet training_from_sources(const std::vector<TwinSource>& sources,
                                               double band_low = 0.9,
                                               double band_high = 1.1) {
    std::vector<fiml::TrainingCase> cases;
    for (const TwinSource& src : sources) {
        fiml::TrainingCase tc;
        tc.source = src.name;
        tc.features = src.features;
        tc.beta = src.beta_star.beta;
        cases.push_back(std::move(tc));
    }
    return fiml::assemble_training_set(cases, band_low, band_high);
}

/// A two-source GPE ensemble trained on opposing twin corrections
/// (beta < 1 in one source, beta > 1 in the other).
inline fiml::CorrectionModel opposing_gpe_ensemble(const fiml::DiscreteCase& cs,
                                                   std::uint64_t seed = 42,
                                                   int restarts = 3,
                                                   int opt_iterations = 150) {
    const TwinSource low = make_source(cs, 0.5, "twin_low");
    const TwinSource high = make_source(cs, -0.5, "twin_high");
    const fiml::TrainingSet training = training_from_sources({low, high});
    fiml::GpOptions opts;
    opts.seed = seed;
    opts.restarts = restarts;
    opts.opt_iterations = opt_iterations;
    return fiml::CorrectionModel::train_gpe(training, opts);
}

}  // namespace twin
