#pragma once

#include "klrsc/search.hpp"

#include <Eigen/Core>

namespace klrsc {

struct SolverConfig {
    double lambda1 = 0.07;     // sparsity weight
    double lambda2 = 0.07;     // rank weight
    double rho = 1.5;          // penalty growth per iteration
    double kernel_sigma = 1.0; // Gaussian kernel bandwidth
    double tol = 1e-5;         // relative feasibility stop
    int max_iter = 100;
    int sc_iters = 200;        // shrinkage iterations for the initial codes
    double u_floor = 1e3;      // penalty fallback when the initial code is zero
};

/// Gram matrices of the lifted features: dd between selected dictionary
/// columns, da between dictionary columns and analysis columns.
struct KernelMatrices {
    Eigen::MatrixXd dd;
    Eigen::MatrixXd da;
};

struct SolveDiagnostics {
    int iterations = 0;
    double feasibility = 0.0;
    bool converged = false;
    Eigen::MatrixXd w; // final coefficient matrix, one column per analysis column
};

/// k(x, y) = exp(-|x - y|^2 / sigma^2)
double gaussian_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& y, double sigma);

/// Proximal map of tau * |.|_1 (elementwise shrinkage).
double soft_threshold(double v, double tau);
Eigen::MatrixXd soft_threshold(const Eigen::MatrixXd& m, double tau);

/// Proximal map of tau * |.|_* : SVD, shrink the singular values, rebuild.
Eigen::MatrixXd singular_value_threshold(const Eigen::MatrixXd& m, double tau);

/// Build the solver Grams. When atom_gram (full dictionary linear Gram) is
/// given, dictionary-dictionary dot products are gathered from it instead of
/// being recomputed per problem.
KernelMatrices gaussian_kernel_matrices(const CodingProblem& cp, double sigma,
                                        const Eigen::MatrixXd* atom_gram = nullptr);
KernelMatrices linear_kernel_matrices(const CodingProblem& cp,
                                      const Eigen::MatrixXd* atom_gram = nullptr);

/// Plain l1 sparse coding by iterative shrinkage with fixed step 1/L,
/// L the largest eigenvalue of yd' * yd. Serves as the per-column baseline
/// coder and as the initializer of the split solver.
Eigen::VectorXd sc_code(const Eigen::VectorXd& y, const Eigen::MatrixXd& yd, double lambda,
                        int iters);
Eigen::MatrixXd sc_code_all(const Eigen::MatrixXd& ya, const Eigen::MatrixXd& yd, double lambda,
                            int iters, const Eigen::MatrixXd* gram = nullptr);

struct SolverState {
    Eigen::MatrixXd w1, w2, w3; // split copies of the coefficients
    Eigen::MatrixXd l1, l2;     // multipliers for w3 = w1 and w3 = w2
    double u1 = 0.0, u2 = 0.0;  // penalties
};

/// u1 = 1/sigma_max(z0), u2 = 1/max|z0|; both fall back to u_floor when the
/// initial code is identically zero.
void penalties_from_codes(const Eigen::MatrixXd& z0, double u_floor, double& u1, double& u2);

SolverState init_state(const CodingProblem& cp, const SolverConfig& cfg,
                       const Eigen::MatrixXd* atom_gram = nullptr);

/// Inexact augmented Lagrangian loop over the split
///   min 1/2 |phi(ya) - phi(yd) W3|_F^2 + lambda1 |W1|_1 + lambda2 |W2|_*
///   s.t. W3 = W1, W3 = W2.
/// Per iteration: shrink W1, singular-value shrink W2, then the coupled
/// least-squares step W3 = (dd + (u1+u2) I)^-1 (da + u1 W1 - L1 + u2 W2 - L2),
/// multiplier ascent Li += ui (W3 - Wi) and penalty growth ui *= rho. Stops
/// when max(|W3-W1|, |W3-W2|)_F / max(1, |W3|_F) < tol. Returns the first
/// column of W3 (the query's weights).
Eigen::VectorXd solve_ialm(const KernelMatrices& km, SolverState& st, const SolverConfig& cfg,
                           SolveDiagnostics* diag = nullptr);

/// The full solver at the Gaussian kernel, and its linear-kernel variant.
Eigen::VectorXd klrsc_solve(const CodingProblem& cp, const SolverConfig& cfg,
                            SolveDiagnostics* diag = nullptr,
                            const Eigen::MatrixXd* atom_gram = nullptr);
Eigen::VectorXd lrsc_solve(const CodingProblem& cp, const SolverConfig& cfg,
                           SolveDiagnostics* diag = nullptr,
                           const Eigen::MatrixXd* atom_gram = nullptr);

/// Nuclear norm of the kernel-mapped column set: sum of the square roots of
/// the eigenvalues of the Gaussian Gram matrix. Eigenvalues below -1e-10 are
/// rejected, smaller negative noise is clamped to zero.
double nuclear_norm_mapped(const Eigen::MatrixXd& y, double sigma);

} // namespace klrsc
