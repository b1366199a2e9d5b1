#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "fiml/ensemble.hpp"
#include "fiml/features.hpp"
#include "fiml/fields.hpp"
#include "fiml/inversion.hpp"
#include "fiml/mesh.hpp"
#include "fiml/solver.hpp"

namespace fiml {

// All writers use "%.17g" so doubles round-trip exactly and reruns are
// byte-identical. Readers skip '#' comment lines.

void write_mesh_csv(const Mesh& mesh, const std::string& path);
void write_state_csv(const Mesh& mesh, const FlowState& state, const std::string& path);
FlowState read_state_csv(const Mesh& mesh, const std::string& path);

void write_residual_history_csv(const ResidualHistory& history, const std::string& path);

void write_beta_csv(const Mesh& mesh, const CorrectionField& beta,
                    const std::string& path);
CorrectionField read_beta_csv(const Mesh& mesh, const std::string& path);

void write_objective_history_csv(const InversionResult& result, const std::string& path);

void write_features_csv(const std::vector<std::array<double, kNumFeatures>>& features,
                        const std::string& path);
std::vector<std::array<double, kNumFeatures>> read_features_csv(const std::string& path);

void write_predictions_csv(const Mesh& mesh, const FieldPrediction& pred,
                           const std::string& path);

void write_scalar_csv(const Mesh& mesh, const std::vector<double>& values,
                      const std::string& column, const std::string& path);

/// Raw reference samples (x, y, u_ref, v_ref) from a CSV file.
struct ReferenceSamples {
    std::vector<double> x, y, u, v;
    int n() const { return static_cast<int>(x.size()); }
};

ReferenceSamples read_reference_csv(const std::string& path);
void write_reference_csv(const ReferenceSamples& samples, const std::string& path);

/// Optional coordinate box for sample selection.
struct BoxSelector {
    bool enabled = false;
    double x_min = 0.0, x_max = 0.0, y_min = 0.0, y_max = 0.0;

    bool contains(double x, double y) const {
        return !enabled || (x >= x_min && x <= x_max && y >= y_min && y <= y_max);
    }
};

/// Map reference samples to their nearest unblanked cells (deduplicated,
/// later samples win), optionally restricted to a coordinate box.
AssimilationData map_reference_to_cells(const Mesh& mesh, const ReferenceSamples& samples,
                                        const BoxSelector& box = {},
                                        const std::string& source = "reference");

/// Legacy-ASCII structured-grid VTK export of cell fields.
void write_vtk(const Mesh& mesh, const std::map<std::string, std::vector<double>>& fields,
               const std::string& path, const std::string& title = "fiml fields");

/// Training set persistence: one CSV per source plus a manifest file.
void write_training_set(const TrainingSet& training, const std::string& directory);
TrainingSet read_training_set(const std::string& directory);

std::string format_double(double v);

}  // namespace fiml
