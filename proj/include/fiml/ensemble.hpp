#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "fiml/deep_ensemble.hpp"
#include "fiml/features.hpp"
#include "fiml/fields.hpp"
#include "fiml/gp.hpp"

namespace fiml {

enum class WeightScheme { InverseVariance, Uniform };

/// Mixture moments of the model ensemble at one query point, plus the gated
/// correction value.
struct EnsemblePrediction {
    std::vector<double> member_means;
    std::vector<double> member_sds;
    std::vector<double> weights;
    double mu_star = 1.0;
    double sigma_mu = 0.0;     // spread of member means
    double sigma_sigma = 0.0;  // weighted average member spread
    double sigma_star = 0.0;   // total: sigma_star^2 = sigma_mu^2 + sigma_sigma^2
    double beta_c = 1.0;
    bool active = false;
};

/// Inverse-variance (or uniform) weighted mixture moments:
///   mu* = sum w_k mu_k
///   sigma*_mu^2 = sum w_k mu_k^2 - mu*^2
///   sigma*_sigma^2 = sum w_k sigma_k^2
EnsemblePrediction ensemble_predict(const std::vector<double>& means,
                                    const std::vector<double>& sds,
                                    WeightScheme scheme = WeightScheme::InverseVariance);

/// Acceptance gate: mu* where sigma* <= sigma_bar, otherwise 1 (the
/// boundary accepts).
double apply_acceptance(const EnsemblePrediction& pred, double sigma_bar);

struct FieldPrediction {
    CorrectionField beta;
    std::vector<EnsemblePrediction> cells;
    int active_cells = 0;
};

/// Trained correction model: either one GPE per data source combined by
/// inverse-variance weights, or a pooled deep ensemble with uniform weights.
class CorrectionModel {
public:
    enum class Kind { GpEnsemble, DeepEnsemble };

    static CorrectionModel train_gpe(const TrainingSet& training, const GpOptions& opts);
    static CorrectionModel train_deep(const TrainingSet& training,
                                      const DeepEnsembleOptions& opts);

    Kind kind() const { return kind_; }
    int n_submodels() const;
    const std::vector<std::string>& source_names() const { return source_names_; }
    const std::vector<GpModel>& gpes() const { return gpes_; }
    double default_sigma_bar() const { return default_sigma_bar_; }

    EnsemblePrediction predict(const Eigen::VectorXd& alpha, double sigma_bar) const;

    FieldPrediction predict_field(
        const std::vector<std::array<double, kNumFeatures>>& features,
        double sigma_bar) const;

    /// Pooled training inputs across sources (the novelty-detection
    /// reference set).
    Eigen::MatrixXd pooled_training_inputs() const;

    nlohmann::json to_json() const;
    static CorrectionModel from_json(const nlohmann::json& j);

private:
    Kind kind_ = Kind::GpEnsemble;
    std::vector<GpModel> gpes_;
    std::vector<std::string> source_names_;
    DeepEnsembleModel de_;
    Eigen::MatrixXd pooled_inputs_;
    double default_sigma_bar_ = 0.2;
};

}  // namespace fiml
