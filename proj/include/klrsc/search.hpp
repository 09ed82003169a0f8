#pragma once

#include "klrsc/pyramid.hpp"

#include <Eigen/Core>

#include <vector>

namespace klrsc {

/// k indices ordered by ascending squared distance, ties by lower index.
struct NeighborSet {
    std::vector<int> idx;
    std::vector<double> dist2;
};

/// Exact linear-scan k-nearest-neighbors of q among the columns of `cands`.
/// `exclude` removes one column (the query itself) from consideration.
NeighborSet knn(const Eigen::MatrixXd& cands, const Eigen::VectorXd& q, int k, int exclude = -1);

/// For every column listed in `valid`, its k nearest other columns from the
/// same list. Result i belongs to query column valid[i]; returned indices are
/// column indices into f. Distances are evaluated blockwise as
/// |x|^2 + |q|^2 - 2 x.q so the scan is one matrix product per block.
std::vector<NeighborSet> knn_nonlocal(const Eigen::MatrixXd& f, const std::vector<int>& valid, int k);

/// For every column listed in `valid`, the k nearest dictionary columns.
std::vector<NeighborSet> knn_dictionary(const Eigen::MatrixXd& dict_learn, const Eigen::MatrixXd& f,
                                        const std::vector<int>& valid, int k);

/// One patch-coding instance: query feature plus its nonlocal neighbors on
/// the analysis side, the selected dictionary columns on both sides.
struct CodingProblem {
    Eigen::MatrixXd ya;            // feature dim x (1 + #neighbors), query first
    Eigen::MatrixXd yd;            // feature dim x #atoms
    Eigen::MatrixXd xd;            // pixel dim x #atoms
    std::vector<int> atom_idx;     // dictionary columns behind yd/xd
    std::vector<int> neighbor_idx; // feature columns behind ya (query excluded)
    double query_norm = 0.0;
    double query_mean = 0.0;
};

CodingProblem assemble_problem(const LayerFeatures& lf, int query, const NeighborSet& nonlocal,
                               const SelfDictionary& dict, const NeighborSet& atoms);

} // namespace klrsc
