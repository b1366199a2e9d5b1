#include "fiml/lof.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fiml {

namespace {
// Reachability distances are floored so duplicate reference points keep the
// densities finite (their scores come out as 1).
constexpr double kReachFloor = 1e-12;
}

void LofModel::neighborhood(const Eigen::VectorXd& point, int exclude,
                            std::vector<int>& neigh, double& kdist) const {
    const int n = n_reference();
    std::vector<std::pair<double, int>> dist;
    dist.reserve(n);
    for (int i = 0; i < n; ++i) {
        if (i == exclude) continue;
        dist.emplace_back((ref_.row(i).transpose() - point).norm(), i);
    }
    std::sort(dist.begin(), dist.end());
    kdist = dist[k_ - 1].first;
    neigh.clear();
    // the k-distance neighborhood includes every point tied at k-distance
    for (const auto& [d, i] : dist) {
        if (d > kdist) break;
        neigh.push_back(i);
    }
}

LofModel LofModel::fit(const Eigen::MatrixXd& reference, int k_neighbors) {
    const int n = static_cast<int>(reference.rows());
    if (k_neighbors < 1 || k_neighbors >= n)
        throw std::invalid_argument("lof: k_neighbors must satisfy 1 <= k < n_reference");
    if (!reference.allFinite())
        throw std::invalid_argument("lof: reference rows must be finite");

    LofModel model;
    model.ref_ = reference;
    model.k_ = k_neighbors;
    model.k_distance_.resize(n);
    model.neighbors_.resize(n);
    for (int i = 0; i < n; ++i) {
        model.neighborhood(reference.row(i).transpose(), i, model.neighbors_[i],
                           model.k_distance_[i]);
    }
    model.lrd_.resize(n);
    for (int i = 0; i < n; ++i) {
        double reach_sum = 0.0;
        for (int o : model.neighbors_[i]) {
            const double d = (reference.row(o) - reference.row(i)).norm();
            reach_sum += std::max({model.k_distance_[o], d, kReachFloor});
        }
        model.lrd_[i] = model.neighbors_[i].size() / reach_sum;
    }
    return model;
}

double LofModel::score(const Eigen::VectorXd& query) const {
    if (query.size() != ref_.cols())
        throw std::invalid_argument("lof: query width mismatch");
    if (!query.allFinite()) throw std::invalid_argument("lof: query must be finite");

    std::vector<int> neigh;
    double kdist;
    neighborhood(query, -1, neigh, kdist);

    double reach_sum = 0.0;
    double lrd_sum = 0.0;
    for (int o : neigh) {
        const double d = (ref_.row(o).transpose() - query).norm();
        reach_sum += std::max({k_distance_[o], d, kReachFloor});
        lrd_sum += lrd_[o];
    }
    const double lrd_query = neigh.size() / reach_sum;
    return (lrd_sum / neigh.size()) / lrd_query;
}

std::vector<double> LofModel::score_rows(const Eigen::MatrixXd& queries) const {
    std::vector<double> out(queries.rows());
    for (int i = 0; i < queries.rows(); ++i) out[i] = score(queries.row(i).transpose());
    return out;
}

}  // namespace fiml
