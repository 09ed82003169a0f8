#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "klrsc/errors.hpp"
#include "klrsc/image.hpp"
#include "klrsc/imageio.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <numeric>
#include <random>
#include <string>
#include <vector>

using namespace klrsc;

namespace {

Image random_image(int w, int h, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    Image img(w, h);
    for (double& v : img.data) v = uni(rng);
    return img;
}

// Low-frequency content so resampling and blur comparisons are dominated by
// the operator, not by aliasing.
Image smooth_image(int w, int h) {
    Image img(w, h);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            img.at(r, c) = 0.5 + 0.2 * std::sin(0.13 * r + 0.4) * std::cos(0.11 * c) +
                           0.15 * std::sin(0.05 * (r + 2.0 * c));
    return img;
}

double dot(const Image& a, const Image& b) {
    REQUIRE(a.data.size() == b.data.size());
    return std::inner_product(a.data.begin(), a.data.end(), b.data.begin(), 0.0);
}

double max_abs_diff(const Image& a, const Image& b) {
    REQUIRE(a.width == b.width);
    REQUIRE(a.height == b.height);
    double m = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i)
        m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

} // namespace

TEST_CASE("mirror index reflects with the edge sample repeated") {
    CHECK(mirror_index(0, 5) == 0);
    CHECK(mirror_index(4, 5) == 4);
    CHECK(mirror_index(-1, 5) == 0);
    CHECK(mirror_index(-2, 5) == 1);
    CHECK(mirror_index(-3, 5) == 2);
    CHECK(mirror_index(5, 5) == 4);
    CHECK(mirror_index(6, 5) == 3);
    CHECK(mirror_index(7, 5) == 2);
    // One sample: everything folds onto it.
    CHECK(mirror_index(-2, 1) == 0);
    CHECK(mirror_index(3, 1) == 0);
}

TEST_CASE("scaled_dim rounds half away from zero and never collapses") {
    CHECK(scaled_dim(60, 1.25) == 75);
    CHECK(scaled_dim(256, 1.0 / 3.0) == 85);
    CHECK(scaled_dim(256, 1.0 / 1.25) == 205);
    CHECK(scaled_dim(256, 0.4096) == 105);
    CHECK(scaled_dim(94, 1.25) == 118);  // 117.5 rounds up
    CHECK(scaled_dim(2, 1.25) == 3);     // 2.5 rounds away from zero
    CHECK(scaled_dim(1, 0.2) == 1);      // floor of one pixel
    CHECK(scaled_dim(3, 3.0) == 9);
}

TEST_CASE("gaussian_ksize covers three standard deviations") {
    CHECK(gaussian_ksize(2.56) == 11); // sigma 1.6 -> ceil(4.8) = 5 taps each side
    CHECK(gaussian_ksize(0.25) == 5);  // sigma 0.5 -> 2 taps each side
    CHECK(gaussian_ksize(1e-12) == 3); // at least one tap each side
    CHECK(gaussian_ksize(2.56) % 2 == 1);
}

TEST_CASE("luma/chroma split round-trips rgb") {
    const int w = 13, h = 9;
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    RgbImage rgb;
    rgb.width = w;
    rgb.height = h;
    rgb.r.resize(static_cast<std::size_t>(w) * h);
    rgb.g.resize(rgb.r.size());
    rgb.b.resize(rgb.r.size());
    for (std::size_t i = 0; i < rgb.r.size(); ++i) {
        rgb.r[i] = uni(rng);
        rgb.g[i] = uni(rng);
        rgb.b[i] = uni(rng);
    }
    const LumaChroma lc = rgb_to_luma_chroma(rgb);
    REQUIRE(lc.has_chroma);
    const RgbImage back = luma_chroma_to_rgb(lc);
    double m = 0.0;
    for (std::size_t i = 0; i < rgb.r.size(); ++i) {
        m = std::max(m, std::abs(back.r[i] - rgb.r[i]));
        m = std::max(m, std::abs(back.g[i] - rgb.g[i]));
        m = std::max(m, std::abs(back.b[i] - rgb.b[i]));
    }
    CHECK(m <= 1e-12);
}

TEST_CASE("gray input produces zero chroma and identity luma") {
    RgbImage rgb;
    rgb.width = 4;
    rgb.height = 3;
    rgb.r = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 0.25};
    rgb.g = rgb.r;
    rgb.b = rgb.r;
    const LumaChroma lc = rgb_to_luma_chroma(rgb);
    for (std::size_t i = 0; i < rgb.r.size(); ++i) {
        CHECK(std::abs(lc.y.data[i] - rgb.r[i]) <= 1e-15);
        CHECK(std::abs(lc.cb.data[i]) <= 1e-15);
        CHECK(std::abs(lc.cr.data[i]) <= 1e-15);
    }
}

TEST_CASE("bicubic resize preserves constant images") {
    const Image img(33, 21, 0.37);
    for (auto [w, h] : {std::pair<int, int>{52, 40}, {17, 9}, {33, 21}}) {
        const Image out = bicubic_resize(img, w, h);
        REQUIRE(out.width == w);
        REQUIRE(out.height == h);
        for (double v : out.data) CHECK(std::abs(v - 0.37) <= 1e-13);
    }
}

TEST_CASE("bicubic resize reproduces a linear ramp away from the borders") {
    const int w = 40, h = 30, ow = 50, oh = 37;
    Image img(w, h);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) img.at(r, c) = 0.3 + 0.01 * c + 0.007 * r;
    const Image out = bicubic_resize(img, ow, oh);
    double m = 0.0;
    for (int r = 3; r < oh - 3; ++r) {
        for (int c = 3; c < ow - 3; ++c) {
            const double xc = (c + 0.5) * (static_cast<double>(w) / ow) - 0.5;
            const double xr = (r + 0.5) * (static_cast<double>(h) / oh) - 0.5;
            m = std::max(m, std::abs(out.at(r, c) - (0.3 + 0.01 * xc + 0.007 * xr)));
        }
    }
    CHECK(m <= 1e-12);
}

TEST_CASE("resize round trip stays close on smooth content") {
    const Image img = smooth_image(40, 40);
    const Image up = bicubic_resize(img, 50, 50);
    const Image back = bicubic_resize(up, 40, 40);
    CHECK(max_abs_diff(img, back) <= 1e-2);
}

TEST_CASE("gaussian blur keeps unit mass and symmetry") {
    Image impulse(31, 31, 0.0);
    impulse.at(15, 15) = 1.0;
    const Image out = gaussian_blur(impulse, 2.56, 11);
    const double sum = std::accumulate(out.data.begin(), out.data.end(), 0.0);
    CHECK(std::abs(sum - 1.0) <= 1e-12);
    for (int d = 1; d <= 5; ++d) {
        CHECK(out.at(15 + d, 15) == doctest::Approx(out.at(15 - d, 15)).epsilon(1e-14));
        CHECK(out.at(15, 15 + d) == doctest::Approx(out.at(15, 15 - d)).epsilon(1e-14));
        CHECK(out.at(15, 15) > out.at(15, 15 + d));
    }

    const Image flat(19, 23, 0.42);
    const Image blurred = gaussian_blur(flat, 2.56, 11);
    for (double v : blurred.data) CHECK(std::abs(v - 0.42) <= 1e-13);
}

TEST_CASE("successive blurs compose like one blur of summed variance") {
    const Image img = smooth_image(64, 64);
    const Image two = gaussian_blur(gaussian_blur(img, 1.0, gaussian_ksize(1.0)), 1.5,
                                    gaussian_ksize(1.5));
    const Image one = gaussian_blur(img, 2.5, gaussian_ksize(2.5));
    CHECK(max_abs_diff(two, one) <= 1e-3);
}

TEST_CASE("separable apply and adjoint agree by inner product") {
    std::mt19937 rng(99);
    for (int trial = 0; trial < 10; ++trial) {
        const int in_h = 23 + trial, in_w = 29 + 2 * trial;
        const int out_h = 15 + trial, out_w = 37 - trial;
        const LinearOp1D rows = bicubic_op(in_h, out_h, -0.5);
        const LinearOp1D cols = bicubic_op(in_w, out_w, -0.5);
        const Image x = random_image(in_w, in_h, 100 + trial);
        const Image y = random_image(out_w, out_h, 200 + trial);
        const double lhs = dot(apply_separable(rows, cols, x), y);
        const double rhs = dot(x, apply_separable_adjoint(rows, cols, y));
        CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(lhs)));
    }
}

TEST_CASE("blur-then-decimate adjoint identity holds to 1e-10") {
    const int hr_w = 37, hr_h = 29, lr_w = 15, lr_h = 12;
    const LinearOp1D blur_rows = gaussian_op(hr_h, 1.3, gaussian_ksize(1.3));
    const LinearOp1D blur_cols = gaussian_op(hr_w, 1.3, gaussian_ksize(1.3));
    const LinearOp1D down_rows = bicubic_op(hr_h, lr_h, -0.5);
    const LinearOp1D down_cols = bicubic_op(hr_w, lr_w, -0.5);
    const Image x = random_image(hr_w, hr_h, 31);
    const Image y = random_image(lr_w, lr_h, 32);
    const Image dbx = apply_separable(down_rows, down_cols, apply_separable(blur_rows, blur_cols, x));
    const Image bdy =
        apply_separable_adjoint(blur_rows, blur_cols, apply_separable_adjoint(down_rows, down_cols, y));
    const double lhs = dot(dbx, y);
    const double rhs = dot(x, bdy);
    CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, std::abs(lhs)));
}

TEST_CASE("patch origins clamp the last patch to the border") {
    CHECK(patch_origins(10, 7, 5) == std::vector<int>{0, 2, 3});
    CHECK(patch_origins(9, 7, 5) == std::vector<int>{0, 2});
    CHECK(patch_origins(7, 7, 5) == std::vector<int>{0});
    CHECK(patch_origins(8, 7, 5) == std::vector<int>{0, 1});
    CHECK(patch_origins(12, 4, 0) == std::vector<int>{0, 4, 8});
    CHECK(patch_origins(13, 4, 0) == std::vector<int>{0, 4, 8, 9});
    CHECK_THROWS_AS(patch_origins(5, 7, 5), std::invalid_argument);
    CHECK_THROWS_AS(patch_origins(10, 7, 7), std::invalid_argument);
}

TEST_CASE("patch extraction and merging round-trip the image") {
    const Image img = random_image(20, 17, 5);
    const std::vector<Patch> patches = extract_patches(img, 7, 5);
    const std::vector<int> rows = patch_origins(17, 7, 5);
    const std::vector<int> cols = patch_origins(20, 7, 5);
    REQUIRE(patches.size() == rows.size() * cols.size());
    // Grid order: row-major over (row origin, col origin).
    CHECK(patches.front().row == 0);
    CHECK(patches.front().col == 0);
    CHECK(patches.back().row == rows.back());
    CHECK(patches.back().col == cols.back());
    for (int k = 0; k < 7; ++k) CHECK(patches[0].pix[k] == img.at(0, k));

    const Image merged = merge_patches(patches, img.width, img.height);
    CHECK(max_abs_diff(img, merged) <= 1e-15);
}

TEST_CASE("overlap averaging is a plain mean of the contributions") {
    Patch a, b;
    a.row = b.row = 0;
    a.size = b.size = 7;
    a.col = 0;
    b.col = 6;
    a.pix.assign(49, 0.2);
    b.pix.assign(49, 0.6);
    const Image merged = merge_patches({a, b}, 13, 7);
    for (int r = 0; r < 7; ++r) {
        CHECK(merged.at(r, 0) == doctest::Approx(0.2).epsilon(1e-15));
        CHECK(merged.at(r, 6) == doctest::Approx(0.4).epsilon(1e-12));
        CHECK(merged.at(r, 12) == doctest::Approx(0.6).epsilon(1e-15));
    }
}

TEST_CASE("merging rejects uncovered pixels and stray patches") {
    Patch a;
    a.row = a.col = 0;
    a.size = 7;
    a.pix.assign(49, 0.5);
    CHECK_THROWS_AS(merge_patches({a}, 10, 10), std::invalid_argument);
    Patch outside = a;
    outside.col = 5;
    CHECK_THROWS_AS(merge_patches({a, outside}, 10, 7), std::invalid_argument);
}

TEST_CASE("raster files round-trip through pgm, ppm and png") {
    std::mt19937 rng(77);
    std::uniform_int_distribution<int> byte(0, 255);

    RasterImage gray;
    gray.width = 23;
    gray.height = 17;
    gray.channels = 1;
    gray.pix.resize(static_cast<std::size_t>(23) * 17);
    for (auto& v : gray.pix) v = static_cast<unsigned char>(byte(rng));

    RasterImage color;
    color.width = 11;
    color.height = 14;
    color.channels = 3;
    color.pix.resize(static_cast<std::size_t>(11) * 14 * 3);
    for (auto& v : color.pix) v = static_cast<unsigned char>(byte(rng));

    struct Case {
        const RasterImage* img;
        const char* name;
    };
    for (const Case& c : {Case{&gray, "klrsc_t_gray.pgm"}, Case{&gray, "klrsc_t_gray.png"},
                          Case{&color, "klrsc_t_color.ppm"}, Case{&color, "klrsc_t_color.png"}}) {
        const std::string path = temp_path(c.name);
        save_raster(path, *c.img);
        const RasterImage back = load_raster(path);
        CHECK(back.width == c.img->width);
        CHECK(back.height == c.img->height);
        CHECK(back.channels == c.img->channels);
        CHECK(back.pix == c.img->pix);
        std::filesystem::remove(path);
    }
}

TEST_CASE("extension/channel mismatches and missing files raise IoError") {
    RasterImage color;
    color.width = color.height = 2;
    color.channels = 3;
    color.pix.assign(12, 0);
    CHECK_THROWS_AS(save_raster(temp_path("klrsc_t_bad.pgm"), color), IoError);
    CHECK_THROWS_AS(save_raster(temp_path("klrsc_t_bad.xyz"), color), IoError);
    CHECK_THROWS_AS(load_raster(temp_path("klrsc_t_does_not_exist.png")), IoError);
}

TEST_CASE("export clamps and rounds half away from zero, exactly once") {
    LumaChroma lc;
    lc.y = Image(5, 1);
    lc.y.data = {0.5, -0.2, 1.3, 0.25, 127.5 / 255.0};
    const RasterImage out = working_to_raster(lc);
    REQUIRE(out.channels == 1);
    CHECK(out.pix[0] == 128); // 127.5 away from zero
    CHECK(out.pix[1] == 0);
    CHECK(out.pix[2] == 255);
    CHECK(out.pix[3] == 64);  // 63.75 rounds up
    CHECK(out.pix[4] == 128);

    RasterImage in;
    in.width = 3;
    in.height = 1;
    in.channels = 1;
    in.pix = {0, 128, 255};
    const LumaChroma back = raster_to_working(in);
    CHECK(!back.has_chroma);
    CHECK(back.y.data[0] == 0.0);
    CHECK(back.y.data[1] == doctest::Approx(128.0 / 255.0).epsilon(1e-15));
    CHECK(back.y.data[2] == 1.0);
}

TEST_CASE("color rasters split into luma plus chroma and back") {
    RasterImage in;
    in.width = 2;
    in.height = 1;
    in.channels = 3;
    in.pix = {200, 30, 90, 12, 240, 100};
    const LumaChroma lc = raster_to_working(in);
    REQUIRE(lc.has_chroma);
    const RasterImage out = working_to_raster(lc);
    REQUIRE(out.channels == 3);
    CHECK(out.pix == in.pix);
}
