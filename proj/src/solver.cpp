#include "klrsc/solver.hpp"
#include "klrsc/errors.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace klrsc {

double gaussian_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& y, double sigma) {
    if (sigma <= 0.0) throw std::invalid_argument("gaussian_kernel: sigma must be positive");
    return std::exp(-(x - y).squaredNorm() / (sigma * sigma));
}

double soft_threshold(double v, double tau) {
    if (v > tau) return v - tau;
    if (v < -tau) return v + tau;
    return 0.0;
}

Eigen::MatrixXd soft_threshold(const Eigen::MatrixXd& m, double tau) {
    if (tau < 0.0) throw std::invalid_argument("soft_threshold: negative threshold");
    return m.unaryExpr([tau](double v) { return soft_threshold(v, tau); });
}

Eigen::MatrixXd singular_value_threshold(const Eigen::MatrixXd& m, double tau) {
    if (tau < 0.0) throw std::invalid_argument("singular_value_threshold: negative threshold");
    if (!m.allFinite()) throw PipelineError("singular_value_threshold: non-finite input");
    if (tau == 0.0) return m; // prox of 0 * |.|_* is the identity
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Eigen::VectorXd sv = svd.singularValues();
    for (Eigen::Index i = 0; i < sv.size(); ++i) sv[i] = std::max(sv[i] - tau, 0.0);
    return svd.matrixU() * sv.asDiagonal() * svd.matrixV().transpose();
}

namespace {

// Squared distances from dot products: |x|^2 + |y|^2 - 2 x.y.
Eigen::MatrixXd sqdist_from_dots(const Eigen::MatrixXd& dots, const Eigen::VectorXd& row_sq,
                                 const Eigen::VectorXd& col_sq) {
    Eigen::MatrixXd d = (-2.0 * dots).colwise() + row_sq;
    d.rowwise() += col_sq.transpose();
    return d.cwiseMax(0.0);
}

// Dictionary-side linear Grams, gathered from the precomputed full Gram when
// available.
Eigen::MatrixXd dict_dots(const CodingProblem& cp, const Eigen::MatrixXd* atom_gram) {
    const int kd = static_cast<int>(cp.yd.cols());
    if (atom_gram) {
        Eigen::MatrixXd g(kd, kd);
        for (int j = 0; j < kd; ++j)
            for (int i = 0; i < kd; ++i) g(i, j) = (*atom_gram)(cp.atom_idx[i], cp.atom_idx[j]);
        return g;
    }
    return cp.yd.transpose() * cp.yd;
}

double power_lambda_max(const Eigen::MatrixXd& g) {
    const int n = static_cast<int>(g.rows());
    Eigen::VectorXd v = Eigen::VectorXd::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));
    double lambda = 0.0;
    for (int it = 0; it < 200; ++it) {
        Eigen::VectorXd gv = g * v;
        const double nrm = gv.norm();
        if (nrm < 1e-300) return 0.0;
        gv /= nrm;
        const double next = gv.dot(g * gv);
        const bool settled = std::fabs(next - lambda) <= 1e-13 * std::max(1.0, std::fabs(next));
        lambda = next;
        v = gv;
        if (settled) break;
    }
    return lambda;
}

} // namespace

KernelMatrices gaussian_kernel_matrices(const CodingProblem& cp, double sigma,
                                        const Eigen::MatrixXd* atom_gram) {
    if (sigma <= 0.0) throw std::invalid_argument("gaussian_kernel_matrices: sigma must be positive");
    KernelMatrices km;
    const double inv = 1.0 / (sigma * sigma);
    const int kd = static_cast<int>(cp.yd.cols());
    Eigen::VectorXd d_sq(kd);
    for (int i = 0; i < kd; ++i) d_sq[i] = cp.yd.col(i).squaredNorm();
    Eigen::VectorXd a_sq(cp.ya.cols());
    for (int j = 0; j < cp.ya.cols(); ++j) a_sq[j] = cp.ya.col(j).squaredNorm();

    km.dd = sqdist_from_dots(dict_dots(cp, atom_gram), d_sq, d_sq);
    km.dd = (-inv * km.dd.array()).exp();
    Eigen::MatrixXd cross = cp.yd.transpose() * cp.ya;
    km.da = sqdist_from_dots(cross, d_sq, a_sq);
    km.da = (-inv * km.da.array()).exp();
    return km;
}

KernelMatrices linear_kernel_matrices(const CodingProblem& cp, const Eigen::MatrixXd* atom_gram) {
    KernelMatrices km;
    km.dd = dict_dots(cp, atom_gram);
    km.da = cp.yd.transpose() * cp.ya;
    return km;
}

Eigen::MatrixXd sc_code_all(const Eigen::MatrixXd& ya, const Eigen::MatrixXd& yd, double lambda,
                            int iters, const Eigen::MatrixXd* gram) {
    if (lambda < 0.0) throw std::invalid_argument("sc_code_all: negative lambda");
    if (iters < 1) throw std::invalid_argument("sc_code_all: iteration budget must be positive");
    const Eigen::MatrixXd g = gram ? *gram : Eigen::MatrixXd(yd.transpose() * yd);
    const Eigen::MatrixXd c = yd.transpose() * ya;
    const double lmax = power_lambda_max(g);
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(yd.cols(), ya.cols());
    if (lmax < 1e-300) return w;
    const double step = 1.0 / lmax;
    const double tau = lambda * step;
    Eigen::MatrixXd grad, next;
    for (int it = 0; it < iters; ++it) {
        grad.noalias() = g * w;
        grad -= c;
        next = soft_threshold(w - step * grad, tau);
        const double delta = (next - w).norm();
        w.swap(next);
        if (delta <= 1e-10 * std::max(1.0, w.norm())) break; // fixed point reached early
    }
    return w;
}

Eigen::VectorXd sc_code(const Eigen::VectorXd& y, const Eigen::MatrixXd& yd, double lambda,
                        int iters) {
    return sc_code_all(y, yd, lambda, iters, nullptr).col(0);
}

void penalties_from_codes(const Eigen::MatrixXd& z0, double u_floor, double& u1, double& u2) {
    const double mabs = z0.size() ? z0.cwiseAbs().maxCoeff() : 0.0;
    if (mabs <= 0.0) {
        u1 = u_floor;
        u2 = u_floor;
        return;
    }
    // sigma_max via the small-side Gram; z0 is tall and skinny here.
    const Eigen::MatrixXd g = z0.transpose() * z0;
    const double smax = std::sqrt(std::max(0.0, power_lambda_max(g)));
    u1 = 1.0 / smax;
    u2 = 1.0 / mabs;
}

SolverState init_state(const CodingProblem& cp, const SolverConfig& cfg,
                       const Eigen::MatrixXd* atom_gram) {
    SolverState st;
    const Eigen::MatrixXd g = dict_dots(cp, atom_gram);
    st.w3 = sc_code_all(cp.ya, cp.yd, cfg.lambda1, cfg.sc_iters, &g);
    st.w1 = st.w3;
    st.w2 = st.w3;
    st.l1 = Eigen::MatrixXd::Zero(st.w3.rows(), st.w3.cols());
    st.l2 = st.l1;
    penalties_from_codes(st.w3, cfg.u_floor, st.u1, st.u2);
    return st;
}

Eigen::VectorXd solve_ialm(const KernelMatrices& km, SolverState& st, const SolverConfig& cfg,
                           SolveDiagnostics* diag) {
    const Eigen::Index kd = km.dd.rows();
    if (km.da.rows() != kd || st.w3.rows() != kd)
        throw std::invalid_argument("solve_ialm: shape mismatch");
    if (cfg.rho <= 1.0) throw std::invalid_argument("solve_ialm: rho must exceed 1");
    if (cfg.tol <= 0.0) throw std::invalid_argument("solve_ialm: tolerance must be positive");

    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(kd, kd);
    Eigen::MatrixXd rhs;
    bool converged = false;
    double feas = 0.0;
    int it = 0;
    for (; it < cfg.max_iter; ++it) {
        st.w1 = soft_threshold(st.w3 + st.l1 / st.u1, cfg.lambda1 / st.u1);
        st.w2 = singular_value_threshold(st.w3 + st.l2 / st.u2, cfg.lambda2 / st.u2);

        rhs = km.da;
        rhs.noalias() += st.u1 * st.w1 - st.l1 + st.u2 * st.w2 - st.l2;
        Eigen::LLT<Eigen::MatrixXd> llt(km.dd + (st.u1 + st.u2) * eye);
        if (llt.info() != Eigen::Success)
            throw PipelineError("solve_ialm: normal matrix not positive definite");
        st.w3 = llt.solve(rhs);
        if (!st.w3.allFinite()) throw PipelineError("solve_ialm: non-finite iterate");

        st.l1.noalias() += st.u1 * (st.w3 - st.w1);
        st.l2.noalias() += st.u2 * (st.w3 - st.w2);
        feas = std::max((st.w3 - st.w1).norm(), (st.w3 - st.w2).norm()) /
               std::max(1.0, st.w3.norm());
        st.u1 *= cfg.rho;
        st.u2 *= cfg.rho;
        if (feas < cfg.tol) {
            converged = true;
            ++it;
            break;
        }
    }
    if (diag) {
        diag->iterations = it;
        diag->feasibility = feas;
        diag->converged = converged;
        diag->w = st.w3;
    }
    return st.w3.col(0);
}

Eigen::VectorXd klrsc_solve(const CodingProblem& cp, const SolverConfig& cfg,
                            SolveDiagnostics* diag, const Eigen::MatrixXd* atom_gram) {
    const KernelMatrices km = gaussian_kernel_matrices(cp, cfg.kernel_sigma, atom_gram);
    SolverState st = init_state(cp, cfg, atom_gram);
    return solve_ialm(km, st, cfg, diag);
}

Eigen::VectorXd lrsc_solve(const CodingProblem& cp, const SolverConfig& cfg,
                           SolveDiagnostics* diag, const Eigen::MatrixXd* atom_gram) {
    const KernelMatrices km = linear_kernel_matrices(cp, atom_gram);
    SolverState st = init_state(cp, cfg, atom_gram);
    return solve_ialm(km, st, cfg, diag);
}

double nuclear_norm_mapped(const Eigen::MatrixXd& y, double sigma) {
    if (sigma <= 0.0) throw std::invalid_argument("nuclear_norm_mapped: sigma must be positive");
    const int n = static_cast<int>(y.cols());
    Eigen::VectorXd sq(n);
    for (int i = 0; i < n; ++i) sq[i] = y.col(i).squaredNorm();
    Eigen::MatrixXd k = sqdist_from_dots(y.transpose() * y, sq, sq);
    k = (-k.array() / (sigma * sigma)).exp();
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(k, Eigen::EigenvaluesOnly);
    // Rank floor: the square root amplifies eigenvalue noise of order
    // eps * lambda_max into ~1e-8 additive junk, so cut it before the sqrt.
    const double lmax = eig.eigenvalues().maxCoeff();
    const double cut = n * std::numeric_limits<double>::epsilon() * std::max(lmax, 0.0);
    double sum = 0.0;
    for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i) {
        const double ev = eig.eigenvalues()[i];
        if (ev < -1e-10) throw PipelineError("nuclear_norm_mapped: Gram matrix not PSD");
        sum += ev > cut ? std::sqrt(ev) : 0.0;
    }
    return sum;
}

} // namespace klrsc
