#include "klrsc/search.hpp"
#include "klrsc/errors.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

namespace klrsc {

namespace {

// Keep the k smallest (dist, idx) pairs of a scratch column, ordered by
// distance then index. Shared by all knn entry points so tie handling is
// identical everywhere.
NeighborSet select_k(std::vector<std::pair<double, int>>& scratch, int k) {
    const int n = static_cast<int>(scratch.size());
    const int kk = std::min(k, n);
    auto less = [](const std::pair<double, int>& a, const std::pair<double, int>& b) {
        return a.first < b.first || (a.first == b.first && a.second < b.second);
    };
    std::nth_element(scratch.begin(), scratch.begin() + kk, scratch.end(), less);
    std::sort(scratch.begin(), scratch.begin() + kk, less);
    NeighborSet out;
    out.idx.reserve(kk);
    out.dist2.reserve(kk);
    for (int i = 0; i < kk; ++i) {
        out.idx.push_back(scratch[i].second);
        out.dist2.push_back(scratch[i].first);
    }
    return out;
}

// dist2 of every candidate column against query block [q0, q0+nb), then
// per-query selection. cand_sq holds |column|^2.
void knn_block(const Eigen::MatrixXd& cands, const Eigen::VectorXd& cand_sq,
               const Eigen::MatrixXd& queries, int q0, int nb, int k,
               const std::vector<int>* cand_labels, const std::vector<int>* query_labels,
               bool exclude_same_label, std::vector<NeighborSet>& out) {
    const int m = static_cast<int>(cands.cols());
    Eigen::MatrixXd prod(m, nb);
    prod.noalias() = cands.transpose() * queries.middleCols(q0, nb);
    std::vector<std::pair<double, int>> scratch;
    for (int j = 0; j < nb; ++j) {
        const double qsq = queries.col(q0 + j).squaredNorm();
        const int self = exclude_same_label ? (*query_labels)[q0 + j] : -1;
        scratch.clear();
        scratch.reserve(m);
        for (int i = 0; i < m; ++i) {
            const int label = cand_labels ? (*cand_labels)[i] : i;
            if (label == self) continue;
            const double d = std::max(0.0, cand_sq[i] + qsq - 2.0 * prod(i, j));
            scratch.emplace_back(d, label);
        }
        out[q0 + j] = select_k(scratch, k);
    }
}

} // namespace

NeighborSet knn(const Eigen::MatrixXd& cands, const Eigen::VectorXd& q, int k, int exclude) {
    if (k < 1) throw std::invalid_argument("knn: k must be positive");
    std::vector<std::pair<double, int>> scratch;
    scratch.reserve(cands.cols());
    for (int i = 0; i < cands.cols(); ++i) {
        if (i == exclude) continue;
        scratch.emplace_back((cands.col(i) - q).squaredNorm(), i);
    }
    return select_k(scratch, k);
}

std::vector<NeighborSet> knn_nonlocal(const Eigen::MatrixXd& f, const std::vector<int>& valid, int k) {
    if (k < 1) throw std::invalid_argument("knn_nonlocal: k must be positive");
    const int m = static_cast<int>(valid.size());
    if (m > 1 && m - 1 < k)
        std::fprintf(stderr, "knn_nonlocal: only %d candidates for k=%d\n", m - 1, k);
    Eigen::MatrixXd cands(f.rows(), m);
    for (int i = 0; i < m; ++i) cands.col(i) = f.col(valid[i]);
    Eigen::VectorXd cand_sq(m);
    for (int i = 0; i < m; ++i) cand_sq[i] = cands.col(i).squaredNorm();

    std::vector<NeighborSet> out(m);
    const int block = 256;
    for (int q0 = 0; q0 < m; q0 += block) {
        const int nb = std::min(block, m - q0);
        knn_block(cands, cand_sq, cands, q0, nb, k, &valid, &valid, true, out);
    }
    return out;
}

std::vector<NeighborSet> knn_dictionary(const Eigen::MatrixXd& dict_learn, const Eigen::MatrixXd& f,
                                        const std::vector<int>& valid, int k) {
    if (k < 1) throw std::invalid_argument("knn_dictionary: k must be positive");
    const int m = static_cast<int>(dict_learn.cols());
    if (m == 0) throw PipelineError("knn_dictionary: empty dictionary");
    if (m < k) std::fprintf(stderr, "knn_dictionary: only %d atoms for k=%d\n", m, k);
    if (dict_learn.rows() != f.rows())
        throw std::invalid_argument("knn_dictionary: feature dimension mismatch");
    Eigen::VectorXd cand_sq(m);
    for (int i = 0; i < m; ++i) cand_sq[i] = dict_learn.col(i).squaredNorm();

    const int nq = static_cast<int>(valid.size());
    Eigen::MatrixXd queries(f.rows(), nq);
    for (int i = 0; i < nq; ++i) queries.col(i) = f.col(valid[i]);

    std::vector<NeighborSet> out(nq);
    const int block = 256;
    for (int q0 = 0; q0 < nq; q0 += block) {
        const int nb = std::min(block, nq - q0);
        knn_block(dict_learn, cand_sq, queries, q0, nb, k, nullptr, nullptr, false, out);
    }
    return out;
}

CodingProblem assemble_problem(const LayerFeatures& lf, int query, const NeighborSet& nonlocal,
                               const SelfDictionary& dict, const NeighborSet& atoms) {
    if (query < 0 || query >= lf.f.cols()) throw std::invalid_argument("assemble_problem: bad query index");
    if (lf.flat[query]) throw std::invalid_argument("assemble_problem: flat query has no coding problem");
    if (atoms.idx.empty()) throw PipelineError("assemble_problem: no dictionary atoms selected");

    CodingProblem cp;
    const int kn = static_cast<int>(nonlocal.idx.size());
    const int kd = static_cast<int>(atoms.idx.size());
    cp.ya.resize(lf.f.rows(), 1 + kn);
    cp.ya.col(0) = lf.f.col(query);
    for (int t = 0; t < kn; ++t) cp.ya.col(1 + t) = lf.f.col(nonlocal.idx[t]);
    cp.yd.resize(dict.learn.rows(), kd);
    cp.xd.resize(dict.recon.rows(), kd);
    for (int t = 0; t < kd; ++t) {
        cp.yd.col(t) = dict.learn.col(atoms.idx[t]);
        cp.xd.col(t) = dict.recon.col(atoms.idx[t]);
    }
    cp.atom_idx = atoms.idx;
    cp.neighbor_idx = nonlocal.idx;
    cp.query_norm = lf.norm[query];
    cp.query_mean = lf.mean[query];
    return cp;
}

} // namespace klrsc
