#include "fiml/gp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>
#include <vector>

#include "fiml/errors.hpp"
#include "fiml/rng.hpp"

namespace fiml {

namespace {

constexpr double kLogParamMin = -16.0;
constexpr double kLogParamMax = 16.0;

Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                              const Eigen::VectorXd& log_ell, double log_sf) {
    const double sf2 = std::exp(2.0 * log_sf);
    const Eigen::VectorXd inv_ell = (-log_ell).array().exp();
    Eigen::MatrixXd As = A * inv_ell.asDiagonal();
    Eigen::MatrixXd Bs = B * inv_ell.asDiagonal();
    Eigen::VectorXd an = As.rowwise().squaredNorm();
    Eigen::VectorXd bn = Bs.rowwise().squaredNorm();
    Eigen::MatrixXd d2 = an.replicate(1, Bs.rows()) +
                         bn.transpose().replicate(As.rows(), 1) -
                         2.0 * As * Bs.transpose();
    return sf2 * (-0.5 * d2.cwiseMax(0.0)).array().exp();
}

Eigen::VectorXd kernel_vector(const Eigen::MatrixXd& X, const Eigen::VectorXd& x,
                              const Eigen::VectorXd& log_ell, double log_sf) {
    const double sf2 = std::exp(2.0 * log_sf);
    const Eigen::VectorXd inv_ell2 = (-2.0 * log_ell).array().exp();
    Eigen::VectorXd out(X.rows());
    for (int i = 0; i < X.rows(); ++i) {
        const Eigen::VectorXd d = X.row(i).transpose() - x;
        out[i] = sf2 * std::exp(-0.5 * d.cwiseProduct(d).dot(inv_ell2));
    }
    return out;
}

/// Cholesky with escalating relative jitter; returns the jitter used or
/// throws TrainingError past the cap.
double factor_with_jitter(const Eigen::MatrixXd& C, double sf2,
                          Eigen::LLT<Eigen::MatrixXd>& llt) {
    double jit = 0.0;
    for (int attempt = 0; attempt < 8; ++attempt) {
        Eigen::MatrixXd Cj = C;
        if (jit > 0.0)
            Cj.diagonal().array() += jit * sf2;
        llt.compute(Cj);
        if (llt.info() == Eigen::Success) return jit;
        jit = (jit == 0.0) ? 1e-8 : jit * 10.0;
        if (jit > 1e-2) break;
    }
    throw TrainingError("gp: covariance factorization failed after jitter escalation");
}

}  // namespace

Eigen::MatrixXd kmeans_centers(const Eigen::MatrixXd& X, int k, std::uint64_t seed,
                               int iterations) {
    const int n = static_cast<int>(X.rows());
    k = std::min(k, n);
    Rng rng(seed);
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);

    Eigen::MatrixXd centers(k, X.cols());
    for (int j = 0; j < k; ++j) centers.row(j) = X.row(order[j]);

    std::vector<int> assign(n, 0);
    for (int it = 0; it < iterations; ++it) {
        for (int i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (int j = 0; j < k; ++j) {
                const double d = (X.row(i) - centers.row(j)).squaredNorm();
                if (d < best) {
                    best = d;
                    assign[i] = j;
                }
            }
        }
        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, X.cols());
        std::vector<int> counts(k, 0);
        for (int i = 0; i < n; ++i) {
            sums.row(assign[i]) += X.row(i);
            ++counts[assign[i]];
        }
        for (int j = 0; j < k; ++j)
            if (counts[j] > 0) centers.row(j) = sums.row(j) / counts[j];
    }
    return centers;
}

struct GpTrainer {
    const Eigen::MatrixXd& X;
    const Eigen::VectorXd& y;
    const GpOptions& opts;
    int n;
    int d;

    struct Params {
        Eigen::VectorXd log_ell;
        double log_sf;
        double log_sn;
        double mu0;
    };

    /// Log marginal likelihood and its gradient; returns -inf on
    /// factorization failure.
    double lml(const Params& p, Params* grad) const {
        const double sf2 = std::exp(2.0 * p.log_sf);
        const double sn2 = std::exp(2.0 * p.log_sn);
        Eigen::MatrixXd Kk = kernel_matrix(X, X, p.log_ell, p.log_sf);
        Eigen::MatrixXd C = Kk;
        C.diagonal().array() += sn2;

        Eigen::LLT<Eigen::MatrixXd> llt;
        try {
            factor_with_jitter(C, sf2, llt);
        } catch (const TrainingError&) {
            return -std::numeric_limits<double>::infinity();
        }

        const Eigen::VectorXd r = y.array() - p.mu0;
        const Eigen::VectorXd alpha = llt.solve(r);
        double logdet = 0.0;
        for (int i = 0; i < n; ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
        const double value = -0.5 * r.dot(alpha) - 0.5 * logdet -
                             0.5 * n * std::log(2.0 * M_PI);
        if (!grad) return value;

        Eigen::MatrixXd Cinv = llt.solve(Eigen::MatrixXd::Identity(n, n));
        Eigen::MatrixXd G = alpha * alpha.transpose() - Cinv;

        grad->log_ell = Eigen::VectorXd::Zero(d);
        const Eigen::VectorXd inv_ell2 = (-2.0 * p.log_ell).array().exp();
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                const double gk = G(i, j) * Kk(i, j);
                for (int a = 0; a < d; ++a) {
                    const double diff = X(i, a) - X(j, a);
                    grad->log_ell[a] += gk * diff * diff * inv_ell2[a];
                }
            }
        }
        grad->log_sf = (G.cwiseProduct(Kk)).sum();
        grad->log_sn = sn2 * G.trace();
        grad->mu0 = opts.pin_prior_mean ? 0.0 : alpha.sum();
        return value;
    }

    Params initial(Rng& rng, bool center) const {
        Params p;
        p.log_ell.resize(d);
        const double ymean = y.mean();
        double ysd = std::sqrt((y.array() - ymean).square().sum() / std::max(n - 1, 1));
        ysd = std::max(ysd, 1e-6 * (1.0 + std::abs(ymean)));
        for (int a = 0; a < d; ++a) {
            const double xm = X.col(a).mean();
            double xsd = std::sqrt((X.col(a).array() - xm).square().sum() /
                                   std::max(n - 1, 1));
            if (xsd < 1e-12) xsd = 1.0;  // constant feature: effectively ignored
            double ell = xsd * std::sqrt(static_cast<double>(d));
            if (!center) ell *= std::exp(rng.uniform(-1.0, 1.0));
            p.log_ell[a] = std::log(ell);
        }
        p.log_sf = std::log(ysd) + (center ? 0.0 : rng.uniform(-0.7, 0.7));
        p.log_sn = std::log(0.1 * ysd) + (center ? 0.0 : rng.uniform(-1.0, 1.0));
        p.mu0 = opts.pin_prior_mean ? opts.pinned_mean : ymean;
        for (int a = 0; a < d; ++a)
            p.log_ell[a] = std::clamp(p.log_ell[a], kLogParamMin, kLogParamMax);
        p.log_sf = std::clamp(p.log_sf, kLogParamMin, kLogParamMax);
        p.log_sn = std::clamp(p.log_sn, kLogParamMin, kLogParamMax);
        return p;
    }

    Params optimize(Params p) const {
        // Adam ascent on the log marginal likelihood.
        const int np = d + 3;
        Eigen::VectorXd m = Eigen::VectorXd::Zero(np);
        Eigen::VectorXd v = Eigen::VectorXd::Zero(np);
        const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        const double lr = opts.learning_rate;

        auto pack = [&](const Params& q) {
            Eigen::VectorXd t(np);
            t.head(d) = q.log_ell;
            t[d] = q.log_sf;
            t[d + 1] = q.log_sn;
            t[d + 2] = q.mu0;
            return t;
        };
        auto unpack = [&](const Eigen::VectorXd& t) {
            Params q;
            q.log_ell = t.head(d);
            q.log_sf = t[d];
            q.log_sn = t[d + 1];
            q.mu0 = t[d + 2];
            for (int a = 0; a < d; ++a)
                q.log_ell[a] = std::clamp(q.log_ell[a], kLogParamMin, kLogParamMax);
            q.log_sf = std::clamp(q.log_sf, kLogParamMin, kLogParamMax);
            q.log_sn = std::clamp(q.log_sn, kLogParamMin, kLogParamMax);
            if (opts.pin_prior_mean) q.mu0 = opts.pinned_mean;
            return q;
        };

        Eigen::VectorXd theta = pack(p);
        for (int it = 1; it <= opts.opt_iterations; ++it) {
            Params grad;
            const double value = lml(unpack(theta), &grad);
            if (!std::isfinite(value)) break;
            Eigen::VectorXd g(np);
            g.head(d) = grad.log_ell;
            g[d] = grad.log_sf;
            g[d + 1] = grad.log_sn;
            g[d + 2] = grad.mu0;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v.array().matrix() + (1.0 - b2) * g.cwiseProduct(g);
            const double bc1 = 1.0 - std::pow(b1, it);
            const double bc2 = 1.0 - std::pow(b2, it);
            for (int a = 0; a < np; ++a)
                theta[a] += lr * (m[a] / bc1) / (std::sqrt(v[a] / bc2) + eps);
        }
        return unpack(theta);
    }
};

GpModel GpModel::train(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                       const GpOptions& opts) {
    if (X.rows() != y.size())
        throw std::invalid_argument("gp: X and y row counts differ");
    if (X.rows() < 2) throw std::invalid_argument("gp: need at least 2 training rows");
    if (!X.allFinite() || !y.allFinite())
        throw std::invalid_argument("gp: training data must be finite");

    const bool sparse = X.rows() > opts.sparse_threshold;

    // Sparse mode fits hyperparameters on a deterministic subset.
    Eigen::MatrixXd Xh = X;
    Eigen::VectorXd yh = y;
    if (sparse) {
        Rng rng(Rng(opts.seed).derive(17));
        std::vector<int> order(X.rows());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
        rng.shuffle(order);
        const int m = std::min<int>(opts.hyper_subset, static_cast<int>(X.rows()));
        Xh.resize(m, X.cols());
        yh.resize(m);
        for (int i = 0; i < m; ++i) {
            Xh.row(i) = X.row(order[i]);
            yh[i] = y[order[i]];
        }
    }

    GpTrainer trainer{Xh, yh, opts, static_cast<int>(Xh.rows()),
                      static_cast<int>(Xh.cols())};

    GpTrainer::Params best;
    double best_value = -std::numeric_limits<double>::infinity();
    for (int r = 0; r < std::max(opts.restarts, 1); ++r) {
        Rng rng(Rng(opts.seed).derive(100 + r));
        GpTrainer::Params p0 = trainer.initial(rng, r == 0);
        GpTrainer::Params p = trainer.optimize(p0);
        const double value = trainer.lml(p, nullptr);
        if (value > best_value) {
            best_value = value;
            best = p;
        }
    }
    if (!std::isfinite(best_value))
        throw TrainingError("gp: no restart produced a usable fit");

    GpModel model;
    model.X_ = X;
    model.y_ = y;
    model.log_ell_ = best.log_ell;
    model.log_sf_ = best.log_sf;
    model.log_sn_ = best.log_sn;
    model.mu0_ = best.mu0;
    model.predict_with_noise_ = opts.predict_with_noise;
    model.lml_ = best_value;
    model.sparse_ = sparse;
    if (sparse) {
        const int m = std::min<int>(opts.max_inducing,
                                    std::max(1, static_cast<int>(X.rows()) / 4));
        model.Xu_ = kmeans_centers(X, m, Rng(opts.seed).derive(31));
    }
    model.rebuild_caches();
    return model;
}

GpModel GpModel::from_hyperparameters(const Eigen::MatrixXd& X,
                                      const Eigen::VectorXd& y,
                                      const Eigen::VectorXd& lengthscales,
                                      double signal_sd, double noise_sd, double mean,
                                      bool predict_with_noise) {
    GpModel model;
    model.X_ = X;
    model.y_ = y;
    model.log_ell_ = lengthscales.array().log();
    model.log_sf_ = std::log(signal_sd);
    model.log_sn_ = std::log(noise_sd);
    model.mu0_ = mean;
    model.predict_with_noise_ = predict_with_noise;
    model.rebuild_caches();
    return model;
}

void GpModel::rebuild_caches() {
    const double sf2 = std::exp(2.0 * log_sf_);
    const double sn2 = std::exp(2.0 * log_sn_);
    if (!sparse_) {
        Eigen::MatrixXd C = kernel_matrix(X_, X_, log_ell_, log_sf_);
        C.diagonal().array() += sn2;
        jitter_ = factor_with_jitter(C, sf2, chol_);
        alpha_ = chol_.solve(Eigen::VectorXd(y_.array() - mu0_));
        return;
    }
    Eigen::MatrixXd Kuu = kernel_matrix(Xu_, Xu_, log_ell_, log_sf_);
    jitter_ = std::max(factor_with_jitter(Kuu, sf2, chol_kuu_), 1e-8);
    Kuu.diagonal().array() += jitter_ * sf2;
    chol_kuu_.compute(Kuu);

    const Eigen::MatrixXd Kuf = kernel_matrix(Xu_, X_, log_ell_, log_sf_);
    Eigen::MatrixXd A = Kuu + Kuf * Kuf.transpose() / sn2;
    factor_with_jitter(A, sf2, chol_a_);
    sparse_coef_ = chol_a_.solve(Kuf * Eigen::VectorXd(y_.array() - mu0_)) / sn2;
}

std::pair<double, double> GpModel::predict(const Eigen::VectorXd& x) const {
    if (x.size() != log_ell_.size())
        throw std::invalid_argument("gp: query dimension mismatch");
    const double sf2 = std::exp(2.0 * log_sf_);
    const double sn2 = std::exp(2.0 * log_sn_);

    double mean, var;
    if (!sparse_) {
        const Eigen::VectorXd ks = kernel_vector(X_, x, log_ell_, log_sf_);
        mean = mu0_ + ks.dot(alpha_);
        var = sf2 - ks.dot(chol_.solve(ks));
    } else {
        const Eigen::VectorXd ku = kernel_vector(Xu_, x, log_ell_, log_sf_);
        mean = mu0_ + ku.dot(sparse_coef_);
        var = sf2 - ku.dot(chol_kuu_.solve(ku)) + ku.dot(chol_a_.solve(ku));
    }
    if (predict_with_noise_) var += sn2;
    var = std::max(var, 0.0);
    return {mean, std::sqrt(var)};
}

nlohmann::json GpModel::to_json() const {
    nlohmann::json j;
    j["format_version"] = 1;
    j["kind"] = "gp";
    j["sparse"] = sparse_;
    j["predict_with_noise"] = predict_with_noise_;
    j["log_sf"] = log_sf_;
    j["log_sn"] = log_sn_;
    j["mu0"] = mu0_;
    j["lml"] = lml_;
    j["log_ell"] = std::vector<double>(log_ell_.data(), log_ell_.data() + log_ell_.size());
    std::vector<std::vector<double>> xr(X_.rows(), std::vector<double>(X_.cols()));
    for (int i = 0; i < X_.rows(); ++i)
        for (int c = 0; c < X_.cols(); ++c) xr[i][c] = X_(i, c);
    j["X"] = xr;
    j["y"] = std::vector<double>(y_.data(), y_.data() + y_.size());
    if (sparse_) {
        std::vector<std::vector<double>> zr(Xu_.rows(), std::vector<double>(Xu_.cols()));
        for (int i = 0; i < Xu_.rows(); ++i)
            for (int c = 0; c < Xu_.cols(); ++c) zr[i][c] = Xu_(i, c);
        j["Xu"] = zr;
    }
    return j;
}

GpModel GpModel::from_json(const nlohmann::json& j) {
    GpModel model;
    if (j.at("kind").get<std::string>() != "gp")
        throw IoError("gp: archive kind mismatch");
    model.sparse_ = j.at("sparse").get<bool>();
    model.predict_with_noise_ = j.at("predict_with_noise").get<bool>();
    model.log_sf_ = j.at("log_sf").get<double>();
    model.log_sn_ = j.at("log_sn").get<double>();
    model.mu0_ = j.at("mu0").get<double>();
    model.lml_ = j.value("lml", 0.0);
    const auto ell = j.at("log_ell").get<std::vector<double>>();
    model.log_ell_ = Eigen::Map<const Eigen::VectorXd>(ell.data(), ell.size());
    const auto xr = j.at("X").get<std::vector<std::vector<double>>>();
    const auto yv = j.at("y").get<std::vector<double>>();
    model.X_.resize(xr.size(), ell.size());
    for (std::size_t i = 0; i < xr.size(); ++i)
        for (std::size_t c = 0; c < ell.size(); ++c) model.X_(i, c) = xr[i][c];
    model.y_ = Eigen::Map<const Eigen::VectorXd>(yv.data(), yv.size());
    if (model.sparse_) {
        const auto zr = j.at("Xu").get<std::vector<std::vector<double>>>();
        model.Xu_.resize(zr.size(), ell.size());
        for (std::size_t i = 0; i < zr.size(); ++i)
            for (std::size_t c = 0; c < ell.size(); ++c) model.Xu_(i, c) = zr[i][c];
    }
    model.rebuild_caches();
    return model;
}

}  // namespace fiml
