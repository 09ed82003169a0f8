#include "klrsc/image.hpp"
#include "klrsc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace klrsc {

// JPEG-style luma/chroma split. Both directions are derived from the same
// three primaries so a round trip only loses rounding noise; hand-rounded
// inverse coefficients would leave ~5e-7 of systematic error.
namespace {
constexpr double kKr = 0.299;
constexpr double kKg = 0.587;
constexpr double kKb = 0.114;
} // namespace

LumaChroma rgb_to_luma_chroma(const RgbImage& rgb) {
    LumaChroma lc;
    lc.y = Image(rgb.width, rgb.height);
    lc.cb = Image(rgb.width, rgb.height);
    lc.cr = Image(rgb.width, rgb.height);
    lc.has_chroma = true;
    const std::size_t n = lc.y.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double r = rgb.r[i], g = rgb.g[i], b = rgb.b[i];
        const double y = kKr * r + kKg * g + kKb * b;
        lc.y.data[i] = y;
        lc.cb.data[i] = 0.5 * (b - y) / (1.0 - kKb);
        lc.cr.data[i] = 0.5 * (r - y) / (1.0 - kKr);
    }
    return lc;
}

RgbImage luma_chroma_to_rgb(const LumaChroma& lc) {
    RgbImage rgb;
    rgb.width = lc.y.width;
    rgb.height = lc.y.height;
    const std::size_t n = lc.y.size();
    rgb.r.resize(n);
    rgb.g.resize(n);
    rgb.b.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double y = lc.y.data[i];
        const double cb = lc.has_chroma ? lc.cb.data[i] : 0.0;
        const double cr = lc.has_chroma ? lc.cr.data[i] : 0.0;
        const double r = y + 2.0 * (1.0 - kKr) * cr;
        const double b = y + 2.0 * (1.0 - kKb) * cb;
        rgb.r[i] = r;
        rgb.b[i] = b;
        rgb.g[i] = (y - kKr * r - kKb * b) / kKg;
    }
    return rgb;
}

int mirror_index(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
}

int scaled_dim(int dim, double factor) {
    const long long d = std::llround(static_cast<double>(dim) * factor);
    return static_cast<int>(std::max(1LL, d));
}

int gaussian_ksize(double variance) {
    const double sigma = std::sqrt(variance);
    const int r = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    return 2 * r + 1;
}

namespace {

// Cubic convolution kernel, parameter a (a = -0.5 interpolates exactly
// through the samples and reproduces quadratics).
double cubic_weight(double z, double a) {
    z = std::fabs(z);
    if (z <= 1.0) return ((a + 2.0) * z - (a + 3.0)) * z * z + 1.0;
    if (z < 2.0) return (((z - 5.0) * z + 8.0) * z - 4.0) * a;
    return 0.0;
}

} // namespace

LinearOp1D bicubic_op(int n_in, int n_out, double a) {
    if (n_in < 1) throw std::invalid_argument("bicubic_op: empty source");
    if (n_out < 4) throw std::invalid_argument("bicubic_op: target below kernel support");
    LinearOp1D op;
    op.n_in = n_in;
    op.n_out = n_out;
    op.taps = 4;
    op.idx.resize(static_cast<std::size_t>(n_out) * 4);
    op.w.resize(static_cast<std::size_t>(n_out) * 4);
    const double scale = static_cast<double>(n_in) / n_out;
    for (int i = 0; i < n_out; ++i) {
        const double x = (i + 0.5) * scale - 0.5;
        const int base = static_cast<int>(std::floor(x));
        const double t = x - base;
        double sum = 0.0;
        for (int m = -1; m <= 2; ++m) {
            const double wt = cubic_weight(t - m, a);
            op.idx[i * 4 + (m + 1)] = mirror_index(base + m, n_in);
            op.w[i * 4 + (m + 1)] = wt;
            sum += wt;
        }
        // The kernel sums to one analytically; renormalize away the
        // floating-point residue so constants survive bit-for-bit.
        for (int m = 0; m < 4; ++m) op.w[i * 4 + m] /= sum;
    }
    return op;
}

LinearOp1D gaussian_op(int n, double variance, int ksize) {
    if (variance <= 0.0) throw std::invalid_argument("gaussian_op: variance must be positive");
    if (ksize < 1 || ksize % 2 == 0) throw std::invalid_argument("gaussian_op: kernel width must be odd");
    LinearOp1D op;
    op.n_in = n;
    op.n_out = n;
    op.taps = ksize;
    op.idx.resize(static_cast<std::size_t>(n) * ksize);
    op.w.resize(static_cast<std::size_t>(n) * ksize);
    const int r = ksize / 2;
    std::vector<double> g(ksize);
    double sum = 0.0;
    for (int k = -r; k <= r; ++k) {
        g[k + r] = std::exp(-0.5 * k * k / variance);
        sum += g[k + r];
    }
    for (double& v : g) v /= sum;
    for (int i = 0; i < n; ++i) {
        for (int k = -r; k <= r; ++k) {
            op.idx[static_cast<std::size_t>(i) * ksize + (k + r)] = mirror_index(i + k, n);
            op.w[static_cast<std::size_t>(i) * ksize + (k + r)] = g[k + r];
        }
    }
    return op;
}

void apply_line(const LinearOp1D& op, const double* in, int in_stride, double* out, int out_stride) {
    for (int i = 0; i < op.n_out; ++i) {
        const int* ix = &op.idx[static_cast<std::size_t>(i) * op.taps];
        const double* wt = &op.w[static_cast<std::size_t>(i) * op.taps];
        double acc = 0.0;
        for (int t = 0; t < op.taps; ++t) acc += wt[t] * in[ix[t] * in_stride];
        out[i * out_stride] = acc;
    }
}

void apply_line_adjoint(const LinearOp1D& op, const double* in, int in_stride, double* out, int out_stride) {
    for (int i = 0; i < op.n_out; ++i) {
        const int* ix = &op.idx[static_cast<std::size_t>(i) * op.taps];
        const double* wt = &op.w[static_cast<std::size_t>(i) * op.taps];
        const double v = in[i * in_stride];
        for (int t = 0; t < op.taps; ++t) out[ix[t] * out_stride] += wt[t] * v;
    }
}

Image apply_separable(const LinearOp1D& rows, const LinearOp1D& cols, const Image& img) {
    if (rows.n_in != img.height || cols.n_in != img.width)
        throw std::invalid_argument("apply_separable: operator/image size mismatch");
    // Vertical pass, accumulating whole rows for locality.
    Image mid(img.width, rows.n_out);
    for (int i = 0; i < rows.n_out; ++i) {
        double* dst = &mid.at(i, 0);
        for (int t = 0; t < rows.taps; ++t) {
            const double wt = rows.w[static_cast<std::size_t>(i) * rows.taps + t];
            const double* src = &img.at(rows.idx[static_cast<std::size_t>(i) * rows.taps + t], 0);
            if (t == 0)
                for (int c = 0; c < img.width; ++c) dst[c] = wt * src[c];
            else
                for (int c = 0; c < img.width; ++c) dst[c] += wt * src[c];
        }
    }
    // Horizontal pass.
    Image out(cols.n_out, rows.n_out);
    for (int r = 0; r < rows.n_out; ++r)
        apply_line(cols, &mid.at(r, 0), 1, &out.at(r, 0), 1);
    return out;
}

Image apply_separable_adjoint(const LinearOp1D& rows, const LinearOp1D& cols, const Image& img) {
    if (rows.n_out != img.height || cols.n_out != img.width)
        throw std::invalid_argument("apply_separable_adjoint: operator/image size mismatch");
    Image mid(cols.n_in, img.height, 0.0);
    for (int r = 0; r < img.height; ++r)
        apply_line_adjoint(cols, &img.at(r, 0), 1, &mid.at(r, 0), 1);
    Image out(cols.n_in, rows.n_in, 0.0);
    for (int i = 0; i < rows.n_out; ++i) {
        const double* src = &mid.at(i, 0);
        for (int t = 0; t < rows.taps; ++t) {
            const double wt = rows.w[static_cast<std::size_t>(i) * rows.taps + t];
            double* dst = &out.at(rows.idx[static_cast<std::size_t>(i) * rows.taps + t], 0);
            for (int c = 0; c < mid.width; ++c) dst[c] += wt * src[c];
        }
    }
    return out;
}

Image bicubic_resize(const Image& img, int out_w, int out_h, double a) {
    if (img.empty()) throw std::invalid_argument("bicubic_resize: empty image");
    const LinearOp1D rows = bicubic_op(img.height, out_h, a);
    const LinearOp1D cols = bicubic_op(img.width, out_w, a);
    return apply_separable(rows, cols, img);
}

Image gaussian_blur(const Image& img, double variance, int ksize) {
    if (img.empty()) throw std::invalid_argument("gaussian_blur: empty image");
    const LinearOp1D rows = gaussian_op(img.height, variance, ksize);
    const LinearOp1D cols = gaussian_op(img.width, variance, ksize);
    return apply_separable(rows, cols, img);
}

std::vector<int> patch_origins(int dim, int size, int overlap) {
    if (size < 1 || dim < size) throw std::invalid_argument("patch_origins: patch larger than image");
    if (overlap < 0 || overlap >= size) throw std::invalid_argument("patch_origins: overlap must be in [0, size)");
    const int stride = size - overlap;
    std::vector<int> origins;
    for (int o = 0; o + size <= dim; o += stride) origins.push_back(o);
    if (origins.back() + size < dim) origins.push_back(dim - size);
    return origins;
}

std::vector<Patch> extract_patches(const Image& img, int size, int overlap) {
    const std::vector<int> rows = patch_origins(img.height, size, overlap);
    const std::vector<int> cols = patch_origins(img.width, size, overlap);
    std::vector<Patch> patches;
    patches.reserve(rows.size() * cols.size());
    for (int r : rows) {
        for (int c : cols) {
            Patch p;
            p.row = r;
            p.col = c;
            p.size = size;
            p.pix.resize(static_cast<std::size_t>(size) * size);
            for (int i = 0; i < size; ++i)
                for (int j = 0; j < size; ++j)
                    p.pix[static_cast<std::size_t>(i) * size + j] = img.at(r + i, c + j);
            patches.push_back(std::move(p));
        }
    }
    return patches;
}

Image merge_patches(const std::vector<Patch>& patches, int width, int height) {
    Image sum(width, height, 0.0);
    std::vector<int> count(static_cast<std::size_t>(width) * height, 0);
    for (const Patch& p : patches) {
        if (p.row < 0 || p.col < 0 || p.row + p.size > height || p.col + p.size > width)
            throw std::invalid_argument("merge_patches: patch outside canvas");
        for (int i = 0; i < p.size; ++i)
            for (int j = 0; j < p.size; ++j) {
                sum.at(p.row + i, p.col + j) += p.pix[static_cast<std::size_t>(i) * p.size + j];
                ++count[static_cast<std::size_t>(p.row + i) * width + p.col + j];
            }
    }
    for (std::size_t i = 0; i < sum.size(); ++i) {
        if (count[i] == 0) throw std::invalid_argument("merge_patches: uncovered pixel");
        sum.data[i] /= count[i];
    }
    return sum;
}

} // namespace klrsc
