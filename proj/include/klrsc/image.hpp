#pragma once

#include <vector>

namespace klrsc {

/// Single-channel image, 64-bit samples in row-major order.
/// Intensities live in [0,1] by convention; nothing clamps until 8-bit export.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<double> data;

    Image() = default;
    Image(int w, int h, double fill = 0.0)
        : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

    double& at(int r, int c) { return data[static_cast<std::size_t>(r) * width + c]; }
    const double& at(int r, int c) const { return data[static_cast<std::size_t>(r) * width + c]; }
    bool empty() const { return data.empty(); }
    std::size_t size() const { return data.size(); }
};

/// Planar RGB in [0,1].
struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<double> r, g, b;
};

/// Luma plane plus optional zero-centered chroma planes.
struct LumaChroma {
    Image y;
    Image cb, cr;
    bool has_chroma = false;
};

/// BT.601 full-range split; chroma is zero for gray input.
LumaChroma rgb_to_luma_chroma(const RgbImage& rgb);
RgbImage luma_chroma_to_rgb(const LumaChroma& lc);

/// Reflect an out-of-range index back into [0,n) (symmetric padding,
/// edge sample repeated: -1 -> 0, n -> n-1).
int mirror_index(int i, int n);

/// Dimension scaling rule used everywhere: round half away from zero.
int scaled_dim(int dim, double factor);

/// Odd kernel width covering +-3 sigma for a given variance.
int gaussian_ksize(double variance);

// ---------------------------------------------------------------------------
// 1-D linear maps with exact adjoints.
//
// Both resampling and blurring are separable, so each is expressed as a pair
// of 1-D maps. Source indices are mirror-resolved when the table is built,
// which makes apply/apply_adjoint an exact transpose pair; the back-projection
// refinement depends on that.
// ---------------------------------------------------------------------------

struct LinearOp1D {
    int n_in = 0;
    int n_out = 0;
    int taps = 0;
    std::vector<int> idx;   // n_out * taps resolved source indices
    std::vector<double> w;  // matching weights
};

/// Cubic convolution resampler (a = -0.5 unless configured otherwise),
/// output pixel centers aligned with input pixel centers.
LinearOp1D bicubic_op(int n_in, int n_out, double a);

/// Sampled Gaussian, normalized to unit sum; length preserved.
LinearOp1D gaussian_op(int n, double variance, int ksize);

/// out[i] = sum_t w[i,t] * in[idx[i,t]]
void apply_line(const LinearOp1D& op, const double* in, int in_stride, double* out, int out_stride);
/// out[idx[i,t]] += w[i,t] * in[i]; exact transpose of apply_line,
/// accumulates into a pre-zeroed output.
void apply_line_adjoint(const LinearOp1D& op, const double* in, int in_stride, double* out, int out_stride);

/// Apply vertical then horizontal 1-D maps.
Image apply_separable(const LinearOp1D& rows, const LinearOp1D& cols, const Image& img);
/// Transpose of apply_separable (horizontal adjoint, then vertical adjoint).
Image apply_separable_adjoint(const LinearOp1D& rows, const LinearOp1D& cols, const Image& img);

/// Separable cubic resize to the given target. Constant images are preserved
/// exactly; targets below the 4-sample kernel support are rejected.
Image bicubic_resize(const Image& img, int out_w, int out_h, double a = -0.5);

/// Separable Gaussian blur with symmetric padding.
Image gaussian_blur(const Image& img, double variance, int ksize);

// ---------------------------------------------------------------------------
// Patch grid
// ---------------------------------------------------------------------------

struct Patch {
    int row = 0;
    int col = 0;
    int size = 0;
    std::vector<double> pix; // row-major size*size
};

/// Origins 0, stride, 2*stride, ... with the final origin clamped to
/// dim - size so the grid always reaches the border.
std::vector<int> patch_origins(int dim, int size, int overlap);

std::vector<Patch> extract_patches(const Image& img, int size, int overlap);

/// Uniform overlap averaging; throws if any pixel stays uncovered.
Image merge_patches(const std::vector<Patch>& patches, int width, int height);

} // namespace klrsc
