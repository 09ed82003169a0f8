#include "klrsc/recon.hpp"

#include "klrsc/errors.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace klrsc {

namespace {

constexpr int kRingOff[8][2] = {
    {-1, -1}, {-1, 0}, {-1, 1}, {0, -1}, {0, 1}, {1, -1}, {1, 0}, {1, 1},
};

} // namespace

Patch reconstruct_patch(const CodingProblem& cp, const Eigen::VectorXd& w, int row, int col) {
    if (w.size() != cp.xd.cols())
        throw std::invalid_argument("reconstruct_patch: code length does not match atom count");
    const int bb = static_cast<int>(cp.xd.rows());
    const int b = static_cast<int>(std::lround(std::sqrt(static_cast<double>(bb))));
    if (b * b != bb)
        throw std::invalid_argument("reconstruct_patch: atom length is not a square");
    Eigen::VectorXd pix = cp.xd * w;
    pix *= cp.query_norm;
    pix.array() += cp.query_mean;

    Patch p;
    p.row = row;
    p.col = col;
    p.size = b;
    p.pix.assign(pix.data(), pix.data() + bb);
    return p;
}

std::vector<std::pair<int, int>> ar_neighbor_patches(const Image& layer, const Image& ref,
                                                     int r, int c, int n, int window) {
    if (ref.width < 3 || ref.height < 3)
        throw std::invalid_argument("ar_neighbor_patches: reference smaller than a 3x3 patch");
    if (n < 1 || window < 1)
        throw std::invalid_argument("ar_neighbor_patches: n and window must be positive");

    // Query ring+center, mirrored at the layer border.
    double q[9];
    int qi = 0;
    for (int dr = -1; dr <= 1; ++dr)
        for (int dc = -1; dc <= 1; ++dc)
            q[qi++] = layer.at(mirror_index(r + dr, layer.height),
                               mirror_index(c + dc, layer.width));

    // Proportional center mapping onto the reference grid, clamped so the
    // whole candidate patch stays inside the image.
    const bool same_dims = (ref.width == layer.width && ref.height == layer.height);
    auto map_center = [](int i, int from, int to) {
        double x = (i + 0.5) * static_cast<double>(to) / static_cast<double>(from) - 0.5;
        return static_cast<int>(std::llround(x));
    };
    const int mr = std::clamp(map_center(r, layer.height, ref.height), 1, ref.height - 2);
    const int mc = std::clamp(map_center(c, layer.width, ref.width), 1, ref.width - 2);

    const int r0 = std::max(1, mr - window), r1 = std::min(ref.height - 2, mr + window);
    const int c0 = std::max(1, mc - window), c1 = std::min(ref.width - 2, mc + window);

    struct Cand {
        double d2;
        int r, c;
    };
    std::vector<Cand> cands;
    cands.reserve(static_cast<size_t>(r1 - r0 + 1) * static_cast<size_t>(c1 - c0 + 1));
    for (int i = r0; i <= r1; ++i) {
        for (int j = c0; j <= c1; ++j) {
            if (same_dims && i == r && j == c)
                continue;
            double d2 = 0.0;
            int t = 0;
            for (int dr = -1; dr <= 1; ++dr) {
                const double* row = &ref.data[static_cast<size_t>(i + dr) * ref.width];
                for (int dc = -1; dc <= 1; ++dc) {
                    const double diff = q[t++] - row[j + dc];
                    d2 += diff * diff;
                }
            }
            cands.push_back({d2, i, j});
        }
    }

    auto better = [&](const Cand& a, const Cand& b) {
        if (a.d2 != b.d2)
            return a.d2 < b.d2;
        if (a.r != b.r)
            return a.r < b.r;
        return a.c < b.c;
    };
    const size_t keep = std::min<size_t>(static_cast<size_t>(n), cands.size());
    std::partial_sort(cands.begin(), cands.begin() + keep, cands.end(), better);

    std::vector<std::pair<int, int>> out;
    out.reserve(keep);
    for (size_t i = 0; i < keep; ++i)
        out.emplace_back(cands[i].r, cands[i].c);
    return out;
}

ArField learn_ar_field(const Image& layer, const Image& ref, int n_neighbors, double eta,
                       int window) {
    if (eta <= 0.0)
        throw std::invalid_argument("learn_ar_field: eta must be positive");
    ArField ar;
    ar.width = layer.width;
    ar.height = layer.height;
    ar.w.assign(static_cast<size_t>(layer.width) * layer.height * 8, 0.0);

    Eigen::MatrixXd quad(8, 8);
    Eigen::VectorXd rhs(8);
    for (int r = 0; r < layer.height; ++r) {
        for (int c = 0; c < layer.width; ++c) {
            auto centers = ar_neighbor_patches(layer, ref, r, c, n_neighbors, window);
            if (centers.empty())
                continue; // row of A stays zero
            quad.setZero();
            rhs.setZero();
            for (const auto& [nr, nc] : centers) {
                double ring[8];
                for (int k = 0; k < 8; ++k)
                    ring[k] = ref.at(nr + kRingOff[k][0], nc + kRingOff[k][1]);
                const double center = ref.at(nr, nc);
                for (int a = 0; a < 8; ++a) {
                    rhs[a] += ring[a] * center;
                    for (int b = 0; b <= a; ++b)
                        quad(a, b) += ring[a] * ring[b];
                }
            }
            for (int a = 0; a < 8; ++a) {
                quad(a, a) += eta;
                for (int b = a + 1; b < 8; ++b)
                    quad(a, b) = quad(b, a);
            }
            Eigen::LDLT<Eigen::MatrixXd> ldlt(quad);
            Eigen::VectorXd a = ldlt.solve(rhs);
            double* dst = &ar.w[(static_cast<size_t>(r) * layer.width + c) * 8];
            for (int k = 0; k < 8; ++k)
                dst[k] = a[k];
        }
    }
    return ar;
}

Image apply_ar(const ArField& ar, const Image& img) {
    if (img.width != ar.width || img.height != ar.height)
        throw std::invalid_argument("apply_ar: field and image dimensions differ");
    Image out(img.width, img.height);
    for (int r = 0; r < img.height; ++r) {
        for (int c = 0; c < img.width; ++c) {
            const double* w = &ar.w[(static_cast<size_t>(r) * ar.width + c) * 8];
            double acc = 0.0;
            for (int k = 0; k < 8; ++k)
                acc += w[k] * img.at(mirror_index(r + kRingOff[k][0], img.height),
                                     mirror_index(c + kRingOff[k][1], img.width));
            out.at(r, c) = acc;
        }
    }
    return out;
}

Image apply_ar_adjoint(const ArField& ar, const Image& img) {
    if (img.width != ar.width || img.height != ar.height)
        throw std::invalid_argument("apply_ar_adjoint: field and image dimensions differ");
    Image out(img.width, img.height);
    for (int r = 0; r < img.height; ++r) {
        for (int c = 0; c < img.width; ++c) {
            const double* w = &ar.w[(static_cast<size_t>(r) * ar.width + c) * 8];
            const double v = img.at(r, c);
            for (int k = 0; k < 8; ++k)
                out.at(mirror_index(r + kRingOff[k][0], img.height),
                       mirror_index(c + kRingOff[k][1], img.width)) += w[k] * v;
        }
    }
    return out;
}

LayerDegradation make_layer_degradation(int hr_w, int hr_h, int lr_w, int lr_h, double variance,
                                        double bicubic_a) {
    if (hr_w < 1 || hr_h < 1 || lr_w < 1 || lr_h < 1)
        throw std::invalid_argument("make_layer_degradation: dimensions must be positive");
    if (lr_w > hr_w || lr_h > hr_h)
        throw std::invalid_argument("make_layer_degradation: observation larger than the layer");
    LayerDegradation deg;
    const int k = gaussian_ksize(variance);
    deg.blur_rows = gaussian_op(hr_h, variance, k);
    deg.blur_cols = gaussian_op(hr_w, variance, k);
    deg.down_rows = bicubic_op(hr_h, lr_h, bicubic_a);
    deg.down_cols = bicubic_op(hr_w, lr_w, bicubic_a);
    return deg;
}

Image degrade_layer(const LayerDegradation& deg, const Image& hr) {
    Image blurred = apply_separable(deg.blur_rows, deg.blur_cols, hr);
    return apply_separable(deg.down_rows, deg.down_cols, blurred);
}

Image degrade_layer_adjoint(const LayerDegradation& deg, const Image& lr) {
    Image up = apply_separable_adjoint(deg.down_rows, deg.down_cols, lr);
    return apply_separable_adjoint(deg.blur_rows, deg.blur_cols, up);
}

namespace {

struct StepEval {
    Image update;     // tau * descent direction
    double objective; // ||i0 - D B I||^2 + alpha ||(E-A)I||^2 + beta ||I - init||^2
};

StepEval eval_step(const Image& cur, const Image& init, const Image& i0,
                   const LayerDegradation& deg, const ArField* ar, const RefineConfig& cfg) {
    Image resid = degrade_layer(deg, cur);
    double obj = 0.0;
    for (size_t i = 0; i < resid.data.size(); ++i) {
        resid.data[i] = i0.data[i] - resid.data[i];
        obj += resid.data[i] * resid.data[i];
    }
    Image upd = degrade_layer_adjoint(deg, resid);

    if (ar != nullptr && cfg.alpha != 0.0) {
        Image e = apply_ar(*ar, cur);
        for (size_t i = 0; i < e.data.size(); ++i) {
            e.data[i] = cur.data[i] - e.data[i];
            obj += cfg.alpha * e.data[i] * e.data[i];
        }
        Image et = apply_ar_adjoint(*ar, e);
        for (size_t i = 0; i < upd.data.size(); ++i)
            upd.data[i] -= cfg.alpha * (e.data[i] - et.data[i]);
    }
    if (cfg.beta != 0.0) {
        for (size_t i = 0; i < upd.data.size(); ++i) {
            const double d = cur.data[i] - init.data[i];
            upd.data[i] -= cfg.beta * d;
            obj += cfg.beta * d * d;
        }
    }
    for (double& v : upd.data)
        v *= cfg.tau;
    return {std::move(upd), obj};
}

double frob(const Image& img) {
    double s = 0.0;
    for (double v : img.data)
        s += v * v;
    return std::sqrt(s);
}

} // namespace

Image refine_step_direction(const Image& cur, const Image& init, const Image& i0,
                            const LayerDegradation& deg, const ArField* ar,
                            const RefineConfig& cfg) {
    return eval_step(cur, init, i0, deg, ar, cfg).update;
}

RefineResult refine_layer(const Image& init, const Image& i0, const LayerDegradation& deg,
                          const ArField* ar, const RefineConfig& cfg) {
    if (init.width != deg.blur_cols.n_in || init.height != deg.blur_rows.n_in)
        throw std::invalid_argument("refine_layer: layer does not match the degradation");
    if (i0.width != deg.down_cols.n_out || i0.height != deg.down_rows.n_out)
        throw std::invalid_argument("refine_layer: observation does not match the degradation");
    if (cfg.tau <= 0.0 || cfg.max_iter < 1)
        throw std::invalid_argument("refine_layer: tau and max_iter must be positive");

    RefineResult res;
    res.image = init;
    Image best = init;
    double best_obj = eval_step(init, init, i0, deg, ar, cfg).objective;
    double first_norm = -1.0;

    for (int it = 0; it < cfg.max_iter; ++it) {
        StepEval step = eval_step(res.image, init, i0, deg, ar, cfg);
        if (step.objective < best_obj) {
            best_obj = step.objective;
            best = res.image;
        }
        const double un = frob(step.update);
        if (!std::isfinite(un))
            throw PipelineError("refine_layer: non-finite update");
        if (it == 0) {
            first_norm = un;
            if (first_norm == 0.0) {
                res.iterations = 0;
                return res;
            }
        } else if (un > 10.0 * first_norm) {
            res.image = std::move(best);
            res.iterations = it;
            res.diverged = true;
            return res;
        }
        for (size_t i = 0; i < res.image.data.size(); ++i)
            res.image.data[i] += step.update.data[i];
        res.iterations = it + 1;
        if (un / std::max(1.0, frob(res.image)) < cfg.tol)
            break;
    }
    return res;
}

} // namespace klrsc
