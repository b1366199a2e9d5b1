#include "fiml/deep_ensemble.hpp"

#include <cmath>
#include <nlohmann/json.hpp>

#include "fiml/errors.hpp"
#include "fiml/rng.hpp"

namespace fiml {

namespace {

double softplus(double x) {
    if (x > 30.0) return x;
    return std::log1p(std::exp(x));
}

double softplus_deriv(double x) {
    if (x > 30.0) return 1.0;
    const double e = std::exp(x);
    return e / (1.0 + e);
}

struct Workspace {
    Eigen::MatrixXd h1, h2;          // activations (n x hidden)
    Eigen::VectorXd mean, raw_var;   // outputs
};

void forward(const MlpMember& m, const Eigen::MatrixXd& X, Workspace& ws) {
    ws.h1 = ((X * m.w1).rowwise() + m.b1.transpose()).array().tanh();
    ws.h2 = ((ws.h1 * m.w2).rowwise() + m.b2.transpose()).array().tanh();
    Eigen::MatrixXd out = (ws.h2 * m.w3).rowwise() + m.b3.transpose();
    ws.mean = out.col(0);
    ws.raw_var = out.col(1);
}

MlpMember init_member(int dim, int hidden, Rng& rng) {
    MlpMember m;
    auto init = [&](Eigen::MatrixXd& w, int rows, int cols) {
        w.resize(rows, cols);
        const double scale = std::sqrt(2.0 / (rows + cols));
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) w(i, j) = scale * rng.normal();
    };
    init(m.w1, dim, hidden);
    init(m.w2, hidden, hidden);
    init(m.w3, hidden, 2);
    m.b1 = Eigen::VectorXd::Zero(hidden);
    m.b2 = Eigen::VectorXd::Zero(hidden);
    m.b3 = Eigen::VectorXd::Zero(2);
    return m;
}

struct AdamState {
    std::vector<Eigen::MatrixXd> mw, vw;
    std::vector<Eigen::VectorXd> mb, vb;
};

/// Full-batch Gaussian NLL training of one member; returns the final loss.
double train_member(MlpMember& m, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                    const DeepEnsembleOptions& opts) {
    const int n = static_cast<int>(X.rows());

    AdamState ad;
    ad.mw = {Eigen::MatrixXd::Zero(m.w1.rows(), m.w1.cols()),
             Eigen::MatrixXd::Zero(m.w2.rows(), m.w2.cols()),
             Eigen::MatrixXd::Zero(m.w3.rows(), m.w3.cols())};
    ad.vw = ad.mw;
    ad.mb = {Eigen::VectorXd::Zero(m.b1.size()), Eigen::VectorXd::Zero(m.b2.size()),
             Eigen::VectorXd::Zero(m.b3.size())};
    ad.vb = ad.mb;

    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    Workspace ws;
    double loss = 0.0;

    for (int epoch = 1; epoch <= opts.epochs; ++epoch) {
        forward(m, X, ws);

        // Gaussian NLL: 0.5 log(var) + 0.5 (y - mean)^2 / var
        Eigen::VectorXd var(n), dvar_draw(n);
        for (int i = 0; i < n; ++i) {
            var[i] = softplus(ws.raw_var[i]) + opts.variance_floor;
            dvar_draw[i] = softplus_deriv(ws.raw_var[i]);
        }
        const Eigen::VectorXd resid = ws.mean - y;
        loss = 0.0;
        for (int i = 0; i < n; ++i)
            loss += 0.5 * std::log(var[i]) + 0.5 * resid[i] * resid[i] / var[i];
        loss /= n;
        if (!std::isfinite(loss)) return loss;

        // gradients w.r.t. outputs
        Eigen::MatrixXd dout(n, 2);
        for (int i = 0; i < n; ++i) {
            dout(i, 0) = resid[i] / var[i] / n;
            const double dnll_dvar =
                0.5 * (1.0 / var[i] - resid[i] * resid[i] / (var[i] * var[i])) / n;
            dout(i, 1) = dnll_dvar * dvar_draw[i];
        }

        // backprop
        Eigen::MatrixXd dw3 = ws.h2.transpose() * dout;
        Eigen::VectorXd db3 = dout.colwise().sum();
        Eigen::MatrixXd dh2 = (dout * m.w3.transpose()).array() *
                              (1.0 - ws.h2.array().square());
        Eigen::MatrixXd dw2 = ws.h1.transpose() * dh2;
        Eigen::VectorXd db2 = dh2.colwise().sum();
        Eigen::MatrixXd dh1 = (dh2 * m.w2.transpose()).array() *
                              (1.0 - ws.h1.array().square());
        Eigen::MatrixXd dw1 = X.transpose() * dh1;
        Eigen::VectorXd db1 = dh1.colwise().sum();

        const double bc1 = 1.0 - std::pow(b1, epoch);
        const double bc2 = 1.0 - std::pow(b2, epoch);
        auto adam_w = [&](Eigen::MatrixXd& w, Eigen::MatrixXd& mm, Eigen::MatrixXd& vv,
                          const Eigen::MatrixXd& g) {
            mm = b1 * mm + (1.0 - b1) * g;
            vv = b2 * vv.array().matrix() + (1.0 - b2) * g.cwiseProduct(g);
            w -= opts.learning_rate *
                 (mm / bc1).cwiseQuotient(((vv / bc2).cwiseSqrt().array() + eps).matrix());
        };
        auto adam_b = [&](Eigen::VectorXd& w, Eigen::VectorXd& mm, Eigen::VectorXd& vv,
                          const Eigen::VectorXd& g) {
            mm = b1 * mm + (1.0 - b1) * g;
            vv = b2 * vv.array().matrix() + (1.0 - b2) * g.cwiseProduct(g);
            w -= opts.learning_rate *
                 (mm / bc1).cwiseQuotient(((vv / bc2).cwiseSqrt().array() + eps).matrix());
        };
        adam_w(m.w1, ad.mw[0], ad.vw[0], dw1);
        adam_w(m.w2, ad.mw[1], ad.vw[1], dw2);
        adam_w(m.w3, ad.mw[2], ad.vw[2], dw3);
        adam_b(m.b1, ad.mb[0], ad.vb[0], db1);
        adam_b(m.b2, ad.mb[1], ad.vb[1], db2);
        adam_b(m.b3, ad.mb[2], ad.vb[2], db3);
    }
    return loss;
}

}  // namespace

std::pair<double, double> MlpMember::predict(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd h1 = (w1.transpose() * x + b1).array().tanh();
    const Eigen::VectorXd h2 = (w2.transpose() * h1 + b2).array().tanh();
    const Eigen::VectorXd out = w3.transpose() * h2 + b3;
    return {out[0], out[1]};
}

DeepEnsembleModel DeepEnsembleModel::train(const Eigen::MatrixXd& X,
                                           const Eigen::VectorXd& y,
                                           const DeepEnsembleOptions& opts) {
    if (opts.members < 2)
        throw std::invalid_argument("deep ensemble: need at least 2 members");
    if (X.rows() != y.size() || X.rows() < 2)
        throw std::invalid_argument("deep ensemble: bad training data shape");
    if (!X.allFinite() || !y.allFinite())
        throw std::invalid_argument("deep ensemble: training data must be finite");

    DeepEnsembleModel model;
    model.variance_floor_ = opts.variance_floor;
    model.x_mean_ = X.colwise().mean();
    model.x_scale_.resize(X.cols());
    for (int c = 0; c < X.cols(); ++c) {
        const double sd = std::sqrt((X.col(c).array() - model.x_mean_[c]).square().sum() /
                                    std::max<int>(X.rows() - 1, 1));
        model.x_scale_[c] = (sd > 1e-12) ? sd : 1.0;
    }
    Eigen::MatrixXd Xs = (X.rowwise() - model.x_mean_.transpose()) *
                         model.x_scale_.cwiseInverse().asDiagonal();

    Rng master(opts.seed);
    for (int k = 0; k < opts.members; ++k) {
        bool ok = false;
        for (int attempt = 0; attempt <= opts.max_member_retries; ++attempt) {
            Rng rng(master.derive(1000 + 17 * k + attempt));
            MlpMember member = init_member(static_cast<int>(X.cols()), opts.hidden, rng);
            const double loss = train_member(member, Xs, y, opts);
            if (std::isfinite(loss)) {
                model.members_.push_back(std::move(member));
                ok = true;
                break;
            }
        }
        if (!ok)
            throw TrainingError("deep ensemble: member training kept producing "
                                "non-finite loss");
    }
    return model;
}

std::vector<std::pair<double, double>> DeepEnsembleModel::member_predictions(
    const Eigen::VectorXd& x) const {
    if (x.size() != x_mean_.size())
        throw std::invalid_argument("deep ensemble: query dimension mismatch");
    const Eigen::VectorXd xs = (x - x_mean_).cwiseQuotient(x_scale_);
    std::vector<std::pair<double, double>> out;
    out.reserve(members_.size());
    for (const MlpMember& m : members_) {
        auto [mean, raw] = m.predict(xs);
        const double var = softplus(raw) + variance_floor_;
        out.emplace_back(mean, std::sqrt(var));
    }
    return out;
}

namespace {

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
    std::vector<std::vector<double>> rows(m.rows(), std::vector<double>(m.cols()));
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) rows[i][j] = m(i, j);
    return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
    const auto rows = j.get<std::vector<std::vector<double>>>();
    Eigen::MatrixXd m(rows.size(), rows.empty() ? 0 : rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t c = 0; c < rows[i].size(); ++c) m(i, c) = rows[i][c];
    return m;
}

}  // namespace

nlohmann::json DeepEnsembleModel::to_json() const {
    nlohmann::json j;
    j["format_version"] = 1;
    j["kind"] = "deep_ensemble";
    j["variance_floor"] = variance_floor_;
    j["x_mean"] = std::vector<double>(x_mean_.data(), x_mean_.data() + x_mean_.size());
    j["x_scale"] = std::vector<double>(x_scale_.data(), x_scale_.data() + x_scale_.size());
    j["members"] = nlohmann::json::array();
    for (const MlpMember& m : members_) {
        nlohmann::json jm;
        jm["w1"] = matrix_json(m.w1);
        jm["w2"] = matrix_json(m.w2);
        jm["w3"] = matrix_json(m.w3);
        jm["b1"] = std::vector<double>(m.b1.data(), m.b1.data() + m.b1.size());
        jm["b2"] = std::vector<double>(m.b2.data(), m.b2.data() + m.b2.size());
        jm["b3"] = std::vector<double>(m.b3.data(), m.b3.data() + m.b3.size());
        j["members"].push_back(std::move(jm));
    }
    return j;
}

DeepEnsembleModel DeepEnsembleModel::from_json(const nlohmann::json& j) {
    if (j.at("kind").get<std::string>() != "deep_ensemble")
        throw IoError("deep ensemble: archive kind mismatch");
    DeepEnsembleModel model;
    model.variance_floor_ = j.at("variance_floor").get<double>();
    const auto xm = j.at("x_mean").get<std::vector<double>>();
    const auto xs = j.at("x_scale").get<std::vector<double>>();
    model.x_mean_ = Eigen::Map<const Eigen::VectorXd>(xm.data(), xm.size());
    model.x_scale_ = Eigen::Map<const Eigen::VectorXd>(xs.data(), xs.size());
    for (const auto& jm : j.at("members")) {
        MlpMember m;
        m.w1 = matrix_from_json(jm.at("w1"));
        m.w2 = matrix_from_json(jm.at("w2"));
        m.w3 = matrix_from_json(jm.at("w3"));
        const auto b1 = jm.at("b1").get<std::vector<double>>();
        const auto b2 = jm.at("b2").get<std::vector<double>>();
        const auto b3 = jm.at("b3").get<std::vector<double>>();
        m.b1 = Eigen::Map<const Eigen::VectorXd>(b1.data(), b1.size());
        m.b2 = Eigen::Map<const Eigen::VectorXd>(b2.data(), b2.size());
        m.b3 = Eigen::Map<const Eigen::VectorXd>(b3.data(), b3.size());
        model.members_.push_back(std::move(m));
    }
    return model;
}

}  // namespace fiml
