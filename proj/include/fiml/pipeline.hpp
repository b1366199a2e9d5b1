#pragma once

#include <functional>
#include <string>
#include <vector>

#include "fiml/config.hpp"
#include "fiml/ensemble.hpp"
#include "fiml/manifest.hpp"

namespace fiml {

/// Run indexed jobs on a small worker pool; results land in caller-owned
/// slots so the merge order is deterministic for any thread count.
void parallel_for(int n_jobs, int n_threads, const std::function<void(int)>& fn);

struct SolveArtifacts {
    Mesh mesh;
    RansSolution solution;
    std::string state_csv;
};

/// Baseline (beta_c = 1) solve; emits state + residual history + manifest
/// entry. Re-runs are skipped when the stage is up to date.
SolveArtifacts cmd_solve(const RunConfig& cfg);

struct InvertArtifacts {
    Mesh mesh;
    InversionResult result;
    std::string beta_csv;
};

InvertArtifacts cmd_invert(const RunConfig& cfg);

/// Features of the converged baseline state.
std::string cmd_features(const RunConfig& cfg);

/// Assemble the band-filtered training set from configured sources and train
/// the configured model; emits the archive and a training report.
std::string cmd_train(const RunConfig& cfg);

struct PredictCorrectArtifacts {
    FieldPrediction prediction;
    bool corrected_converged = false;
    double delta_u_l2 = 0.0;  // corrected vs uncorrected velocity
    FlowState uncorrected;
    FlowState corrected;
};

PredictCorrectArtifacts cmd_predict_correct(const RunConfig& cfg,
                                            double sigma_bar_override = -1.0);

struct SweepPoint {
    double sigma_bar = 0.0;
    int active_cells = 0;
    bool corrected_converged = false;
    double delta_u_l2 = 0.0;
    std::string note;
};

std::vector<SweepPoint> cmd_sweep_sigma(const RunConfig& cfg);

/// Built-in oracle battery; prints one PASS/FAIL line per check and returns
/// the number of failures.
int cmd_verify();

}  // namespace fiml
