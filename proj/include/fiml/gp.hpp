#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>

#include <nlohmann/json_fwd.hpp>

namespace fiml {

struct GpOptions {
    int restarts = 5;
    int opt_iterations = 200;
    double learning_rate = 0.05;
    int sparse_threshold = 1000;  // above this, inducing-point inference
    int max_inducing = 512;
    int hyper_subset = 512;  // sparse mode fits hyperparameters on a subset
    bool pin_prior_mean = false;
    double pinned_mean = 1.0;
    bool predict_with_noise = false;  // add sigma_n^2 to predictive variance
    std::uint64_t seed = 0;
};

/// Gaussian-process regressor with a squared-exponential kernel and one
/// lengthscale per input dimension. Exact inference by default; above
/// sparse_threshold training points, a deterministic-transcript DTC
/// inducing-point approximation is used.
class GpModel {
public:
    GpModel() = default;

    static GpModel train(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                         const GpOptions& opts = {});

    /// Build a model with given hyperparameters (no optimization); used by
    /// tests and oracles.
    static GpModel from_hyperparameters(const Eigen::MatrixXd& X,
                                        const Eigen::VectorXd& y,
                                        const Eigen::VectorXd& lengthscales,
                                        double signal_sd, double noise_sd,
                                        double mean, bool predict_with_noise = false);

    /// Posterior mean and standard deviation at one input.
    std::pair<double, double> predict(const Eigen::VectorXd& x) const;

    int input_dim() const { return static_cast<int>(log_ell_.size()); }
    int n_training() const { return static_cast<int>(y_.size()); }
    bool sparse() const { return sparse_; }
    double prior_mean() const { return mu0_; }
    double signal_sd() const { return std::exp(log_sf_); }
    double noise_sd() const { return std::exp(log_sn_); }
    Eigen::VectorXd lengthscales() const { return log_ell_.array().exp(); }
    double log_marginal_likelihood() const { return lml_; }
    const Eigen::MatrixXd& training_inputs() const { return X_; }
    const Eigen::VectorXd& training_targets() const { return y_; }

    nlohmann::json to_json() const;
    static GpModel from_json(const nlohmann::json& j);

private:
    Eigen::MatrixXd X_;
    Eigen::VectorXd y_;
    Eigen::VectorXd log_ell_;
    double log_sf_ = 0.0;
    double log_sn_ = -2.0;
    double mu0_ = 0.0;
    bool predict_with_noise_ = false;
    double jitter_ = 0.0;  // relative jitter actually used for the factorization
    double lml_ = 0.0;
    bool sparse_ = false;
    Eigen::MatrixXd Xu_;  // inducing inputs (sparse mode)

    // caches rebuilt deterministically from the persisted fields
    Eigen::LLT<Eigen::MatrixXd> chol_;       // exact: chol(K + sn^2 I + jitter)
    Eigen::VectorXd alpha_;                  // exact: C^-1 (y - mu0)
    Eigen::LLT<Eigen::MatrixXd> chol_kuu_;   // sparse
    Eigen::LLT<Eigen::MatrixXd> chol_a_;     // sparse: Kuu + sn^-2 Kuf Kfu
    Eigen::VectorXd sparse_coef_;

    void rebuild_caches();
    friend struct GpTrainer;
};

/// Deterministic k-means used for inducing-point selection (exposed for
/// tests).
Eigen::MatrixXd kmeans_centers(const Eigen::MatrixXd& X, int k, std::uint64_t seed,
                               int iterations = 25);

}  // namespace fiml
