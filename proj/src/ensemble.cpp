#include "fiml/ensemble.hpp"

#include <cmath>
#include <nlohmann/json.hpp>
#include <stdexcept>

#include "fiml/errors.hpp"
#include "fiml/rng.hpp"

namespace fiml {

namespace {
constexpr double kSdFloor = 1e-9;
}

EnsemblePrediction ensemble_predict(const std::vector<double>& means,
                                    const std::vector<double>& sds,
                                    WeightScheme scheme) {
    if (means.empty() || means.size() != sds.size())
        throw std::invalid_argument("ensemble_predict: need matching nonempty moments");

    const std::size_t m = means.size();
    EnsemblePrediction out;
    out.member_means = means;
    out.member_sds = sds;
    out.weights.resize(m);

    double wsum = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        const double sd = std::max(sds[k], kSdFloor);
        out.member_sds[k] = sd;
        out.weights[k] = (scheme == WeightScheme::InverseVariance)
                             ? 1.0 / (sd * sd)
                             : 1.0;
        wsum += out.weights[k];
    }
    double mu = 0.0, mu2 = 0.0, var_avg = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        out.weights[k] /= wsum;
        mu += out.weights[k] * means[k];
        mu2 += out.weights[k] * means[k] * means[k];
        var_avg += out.weights[k] * out.member_sds[k] * out.member_sds[k];
    }
    double var_mu = mu2 - mu * mu;
    if (var_mu < 0.0) {
        if (var_mu < -1e-12)
            throw std::runtime_error("ensemble_predict: negative spread variance");
        var_mu = 0.0;
    }
    out.mu_star = mu;
    out.sigma_mu = std::sqrt(var_mu);
    out.sigma_sigma = std::sqrt(var_avg);
    out.sigma_star = std::sqrt(var_mu + var_avg);
    out.beta_c = 1.0;
    out.active = false;
    return out;
}

double apply_acceptance(const EnsemblePrediction& pred, double sigma_bar) {
    return (pred.sigma_star <= sigma_bar) ? pred.mu_star : 1.0;
}

CorrectionModel CorrectionModel::train_gpe(const TrainingSet& training,
                                           const GpOptions& opts) {
    if (training.sources.empty())
        throw TrainingError("train_gpe: no training sources after band filtering");
    CorrectionModel model;
    model.kind_ = Kind::GpEnsemble;
    model.default_sigma_bar_ = 0.2;
    int sub = 0;
    for (const TrainingSource& src : training.sources) {
        Eigen::MatrixXd X(src.features.size(), kNumFeatures);
        Eigen::VectorXd y(src.targets.size());
        for (std::size_t i = 0; i < src.features.size(); ++i) {
            for (int c = 0; c < kNumFeatures; ++c) X(i, c) = src.features[i][c];
            y[i] = src.targets[i];
        }
        GpOptions o = opts;
        o.seed = Rng(opts.seed).derive(7000 + sub);
        model.gpes_.push_back(GpModel::train(X, y, o));
        model.source_names_.push_back(src.name);
        ++sub;
    }
    return model;
}

CorrectionModel CorrectionModel::train_deep(const TrainingSet& training,
                                            const DeepEnsembleOptions& opts) {
    if (training.sources.empty())
        throw TrainingError("train_deep: no training sources after band filtering");
    std::size_t total = 0;
    for (const auto& src : training.sources) total += src.targets.size();
    Eigen::MatrixXd X(total, kNumFeatures);
    Eigen::VectorXd y(total);
    std::size_t row = 0;
    CorrectionModel model;
    for (const TrainingSource& src : training.sources) {
        for (std::size_t i = 0; i < src.targets.size(); ++i, ++row) {
            for (int c = 0; c < kNumFeatures; ++c) X(row, c) = src.features[i][c];
            y[row] = src.targets[i];
        }
        model.source_names_.push_back(src.name);
    }
    model.kind_ = Kind::DeepEnsemble;
    model.default_sigma_bar_ = 0.1;
    model.de_ = DeepEnsembleModel::train(X, y, opts);
    model.pooled_inputs_ = X;
    return model;
}

int CorrectionModel::n_submodels() const {
    return kind_ == Kind::GpEnsemble ? static_cast<int>(gpes_.size())
                                     : de_.n_members();
}

EnsemblePrediction CorrectionModel::predict(const Eigen::VectorXd& alpha,
                                            double sigma_bar) const {
    std::vector<double> means, sds;
    if (kind_ == Kind::GpEnsemble) {
        means.reserve(gpes_.size());
        sds.reserve(gpes_.size());
        for (const GpModel& gp : gpes_) {
            auto [m, s] = gp.predict(alpha);
            means.push_back(m);
            sds.push_back(s);
        }
    } else {
        for (auto& [m, s] : de_.member_predictions(alpha)) {
            means.push_back(m);
            sds.push_back(s);
        }
    }
    EnsemblePrediction pred = ensemble_predict(
        means, sds,
        kind_ == Kind::GpEnsemble ? WeightScheme::InverseVariance
                                  : WeightScheme::Uniform);
    pred.beta_c = apply_acceptance(pred, sigma_bar);
    pred.active = (pred.sigma_star <= sigma_bar);
    return pred;
}

FieldPrediction CorrectionModel::predict_field(
    const std::vector<std::array<double, kNumFeatures>>& features,
    double sigma_bar) const {
    FieldPrediction out;
    const int n = static_cast<int>(features.size());
    out.beta = CorrectionField(n);
    out.cells.reserve(n);
    Eigen::VectorXd alpha(kNumFeatures);
    for (int c = 0; c < n; ++c) {
        for (int i = 0; i < kNumFeatures; ++i) alpha[i] = features[c][i];
        EnsemblePrediction pred = predict(alpha, sigma_bar);
        out.beta.beta[c] = pred.beta_c;
        if (pred.active) ++out.active_cells;
        out.cells.push_back(std::move(pred));
    }
    return out;
}

Eigen::MatrixXd CorrectionModel::pooled_training_inputs() const {
    if (kind_ == Kind::DeepEnsemble) return pooled_inputs_;
    long total = 0;
    for (const GpModel& gp : gpes_) total += gp.n_training();
    Eigen::MatrixXd X(total, kNumFeatures);
    long row = 0;
    for (const GpModel& gp : gpes_) {
        X.middleRows(row, gp.n_training()) = gp.training_inputs();
        row += gp.n_training();
    }
    return X;
}

nlohmann::json CorrectionModel::to_json() const {
    nlohmann::json j;
    j["format_version"] = 1;
    j["kind"] = (kind_ == Kind::GpEnsemble) ? "gpe_ensemble" : "deep_ensemble";
    j["default_sigma_bar"] = default_sigma_bar_;
    j["sources"] = source_names_;
    if (kind_ == Kind::GpEnsemble) {
        j["submodels"] = nlohmann::json::array();
        for (const GpModel& gp : gpes_) j["submodels"].push_back(gp.to_json());
    } else {
        j["model"] = de_.to_json();
        std::vector<std::vector<double>> rows(pooled_inputs_.rows(),
                                              std::vector<double>(pooled_inputs_.cols()));
        for (int i = 0; i < pooled_inputs_.rows(); ++i)
            for (int c = 0; c < pooled_inputs_.cols(); ++c)
                rows[i][c] = pooled_inputs_(i, c);
        j["pooled_inputs"] = rows;
    }
    return j;
}

CorrectionModel CorrectionModel::from_json(const nlohmann::json& j) {
    CorrectionModel model;
    const std::string kind = j.at("kind").get<std::string>();
    model.default_sigma_bar_ = j.at("default_sigma_bar").get<double>();
    model.source_names_ = j.at("sources").get<std::vector<std::string>>();
    if (kind == "gpe_ensemble") {
        model.kind_ = Kind::GpEnsemble;
        for (const auto& js : j.at("submodels"))
            model.gpes_.push_back(GpModel::from_json(js));
    } else if (kind == "deep_ensemble") {
        model.kind_ = Kind::DeepEnsemble;
        model.de_ = DeepEnsembleModel::from_json(j.at("model"));
        const auto rows = j.at("pooled_inputs").get<std::vector<std::vector<double>>>();
        model.pooled_inputs_.resize(rows.size(), rows.empty() ? 0 : rows[0].size());
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t c = 0; c < rows[i].size(); ++c)
                model.pooled_inputs_(i, c) = rows[i][c];
    } else {
        throw IoError("CorrectionModel: unknown archive kind '" + kind + "'");
    }
    return model;
}

}  // namespace fiml
