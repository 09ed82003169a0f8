#pragma once

#include "klrsc/solver.hpp"

#include <utility>
#include <vector>

namespace klrsc {

/// Undo the feature normalization: pixels = xd * w * query_norm + query_mean,
/// reshaped into the grid cell at (row, col).
Patch reconstruct_patch(const CodingProblem& cp, const Eigen::VectorXd& w, int row, int col);

/// Per-pixel weights predicting a pixel from its 8-neighborhood ring
/// (row-major ring order, center excluded).
struct ArField {
    int width = 0;
    int height = 0;
    std::vector<double> w; // 8 per pixel
};

/// Centers of the n most similar 3x3 patches to the one at (r, c) of `layer`,
/// searched in `ref` within a window around the proportionally mapped
/// position. When both images share dimensions, the co-located candidate is
/// excluded (it would match itself). Fewer than n available means all are
/// returned.
std::vector<std::pair<int, int>> ar_neighbor_patches(const Image& layer, const Image& ref,
                                                     int r, int c, int n, int window);

/// Ridge regression of each pixel's ring weights from its neighbor patches:
/// a = (Q Q' + eta I)^-1 Q s, columns of Q the rings, s the centers.
ArField learn_ar_field(const Image& layer, const Image& ref, int n_neighbors, double eta,
                       int window);

Image apply_ar(const ArField& ar, const Image& img);         // A x
Image apply_ar_adjoint(const ArField& ar, const Image& img); // A' x, exact transpose

struct RefineConfig {
    double tau = 0.5;
    double alpha = 0.05;
    double beta = 0.01;
    double tol = 1e-6; // relative update stop
    int max_iter = 300;
};

/// Blur-then-downsample pair mapping an HR layer onto the observation grid.
struct LayerDegradation {
    LinearOp1D blur_rows, blur_cols;
    LinearOp1D down_rows, down_cols;
};

LayerDegradation make_layer_degradation(int hr_w, int hr_h, int lr_w, int lr_h, double variance,
                                        double bicubic_a = -0.5);
Image degrade_layer(const LayerDegradation& deg, const Image& hr);          // D B x
Image degrade_layer_adjoint(const LayerDegradation& deg, const Image& lr);  // B' D' x

/// The bracketed update at the current iterate, exposed for gradient checks:
/// tau * (B'D'(i0 - D B I) - alpha (E-A)'(E-A) I - beta (I - init)).
Image refine_step_direction(const Image& cur, const Image& init, const Image& i0,
                            const LayerDegradation& deg, const ArField* ar,
                            const RefineConfig& cfg);

struct RefineResult {
    Image image;
    int iterations = 0;
    bool diverged = false;
};

/// Gradient-style correction of a merged layer. The data term back-projects
/// the observation residual, the optional AR term rewards locally
/// predictable structure, the anchor term keeps the result near the merged
/// estimate. Stops on a small relative update or at max_iter; if the update
/// norm grows tenfold over its initial value the best iterate seen (by the
/// underlying objective) is returned with the diverged flag set.
RefineResult refine_layer(const Image& init, const Image& i0, const LayerDegradation& deg,
                          const ArField* ar, const RefineConfig& cfg);

} // namespace klrsc
