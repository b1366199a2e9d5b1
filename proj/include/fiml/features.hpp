#pragma once

#include <array>
#include <string>
#include <vector>

#include "fiml/fields.hpp"
#include "fiml/mesh.hpp"

namespace fiml {

inline constexpr int kNumEngineeredFeatures = 5;
inline constexpr int kNumInvariantFeatures = 47;
inline constexpr int kNumFeatures = kNumEngineeredFeatures + kNumInvariantFeatures;

/// Stable name per feature column (index map shipped with the artifact;
/// tests guard count, order, and uniqueness).
const std::array<std::string, kNumFeatures>& feature_names();

/// Trace expressions of the invariant basis, as token strings over the
/// tensor set {S, W, Ap, Ak} (e.g. "W W S" is tr(W*W*S)). Shipped as data so
/// the enumeration is checkable.
const std::array<std::string, kNumInvariantFeatures>& invariant_expressions();

/// Local tensors entering the invariant basis, before normalization.
struct TensorSet {
    std::array<double, 9> S{};   // strain rate (symmetric)
    std::array<double, 9> W{};   // rotation rate (antisymmetric)
    std::array<double, 9> Ap{};  // -I x grad(p)
    std::array<double, 9> Ak{};  // -I x grad(k)
    double omega = 1.0;          // time-scale normalizer
    double conv_accel_norm = 0.0;  // |u . grad u|
    double k_scale = 0.0;          // omega * sqrt(k)
};

struct FeatureOptions {
    /// Squash raw invariants through x/(|x|+1) so all 52 features share the
    /// bounded range of the engineered ones.
    bool squash_invariants = true;
};

/// Per-cell tensor sets from a converged state (gradients via the mesh
/// gradient operator).
std::vector<TensorSet> tensor_sets(const FlowState& state, const Mesh& mesh);

/// The five engineered scalars, each in [-1, 1].
std::array<double, kNumEngineeredFeatures> engineered_features_cell(
    double ux, double uy, double dpdx, double dpdy, double strain_frob,
    double rotation_frob, double k, double omega, double nu_t, double nu);

std::vector<std::array<double, kNumEngineeredFeatures>> engineered_features(
    const FlowState& state, const Mesh& mesh);

/// The 47 invariants of the normalized tensor set.
std::array<double, kNumInvariantFeatures> invariant_features_cell(
    const TensorSet& tensors, const FeatureOptions& opts = {});

std::vector<std::array<double, kNumInvariantFeatures>> invariant_features(
    const FlowState& state, const Mesh& mesh, const FeatureOptions& opts = {});

/// Full n_cells x 52 feature matrix (row-major).
std::vector<std::array<double, kNumFeatures>> compute_features(
    const FlowState& state, const Mesh& mesh, const FeatureOptions& opts = {});

/// Tensor dependencies of invariant i (bitmask: 1=S, 2=W, 4=Ap, 8=Ak);
/// used by the Galilean-invariance property test.
unsigned invariant_dependencies(int invariant_index);

// --- training set assembly ---------------------------------------------------

struct TrainingSource {
    std::string name;
    std::vector<std::array<double, kNumFeatures>> features;
    std::vector<double> targets;  // beta_c
};

struct TrainingSet {
    std::vector<TrainingSource> sources;
    std::vector<std::string> dropped_sources;  // emptied by the band filter
    double band_low = 0.9;
    double band_high = 1.1;
};

struct TrainingCase {
    std::string source;
    std::vector<std::array<double, kNumFeatures>> features;
    std::vector<double> beta;
    std::vector<std::uint8_t> usable;  // e.g. unblanked cells; empty = all
};

/// Keep only rows whose beta_c lies strictly outside the closed band
/// [band_low, band_high]; sources left empty are dropped with a notice.
TrainingSet assemble_training_set(const std::vector<TrainingCase>& cases,
                                  double band_low = 0.9, double band_high = 1.1);

}  // namespace fiml
