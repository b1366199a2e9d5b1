#pragma once

#include <Eigen/Dense>
#include <vector>

namespace fiml {

/// Local Outlier Factor scorer against a fixed reference set (Euclidean
/// metric, exact neighbor search). Scores are ~1 for in-distribution
/// queries and grow for outliers.
class LofModel {
public:
    static LofModel fit(const Eigen::MatrixXd& reference, int k_neighbors);

    double score(const Eigen::VectorXd& query) const;
    std::vector<double> score_rows(const Eigen::MatrixXd& queries) const;

    int k_neighbors() const { return k_; }
    int n_reference() const { return static_cast<int>(ref_.rows()); }

private:
    Eigen::MatrixXd ref_;
    int k_ = 20;
    std::vector<double> k_distance_;
    std::vector<double> lrd_;
    std::vector<std::vector<int>> neighbors_;  // ties included

    void neighborhood(const Eigen::VectorXd& point, int exclude,
                      std::vector<int>& neigh, double& kdist) const;
};

}  // namespace fiml
