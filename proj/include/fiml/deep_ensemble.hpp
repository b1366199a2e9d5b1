#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace fiml {

struct DeepEnsembleOptions {
    int members = 5;
    int hidden = 64;       // two hidden layers of this width
    int epochs = 2000;
    double learning_rate = 5e-3;
    double variance_floor = 1e-6;
    int max_member_retries = 3;
    std::uint64_t seed = 0;
};

/// One mean-variance network: input -> tanh(hidden) -> tanh(hidden) ->
/// (mean, raw variance); the variance passes through softplus plus a floor.
struct MlpMember {
    Eigen::MatrixXd w1, w2, w3;
    Eigen::VectorXd b1, b2, b3;

    std::pair<double, double> predict(const Eigen::VectorXd& x) const;
};

/// Uniform-weight ensemble of independently initialized mean-variance
/// networks trained on the pooled data with the Gaussian negative log
/// likelihood.
class DeepEnsembleModel {
public:
    DeepEnsembleModel() = default;

    static DeepEnsembleModel train(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                   const DeepEnsembleOptions& opts = {});

    /// Per-member means and standard deviations at one input.
    std::vector<std::pair<double, double>> member_predictions(
        const Eigen::VectorXd& x) const;

    int n_members() const { return static_cast<int>(members_.size()); }
    int input_dim() const { return static_cast<int>(x_mean_.size()); }

    nlohmann::json to_json() const;
    static DeepEnsembleModel from_json(const nlohmann::json& j);

private:
    std::vector<MlpMember> members_;
    Eigen::VectorXd x_mean_, x_scale_;  // input standardization
    double variance_floor_ = 1e-6;
};

}  // namespace fiml
