#include "klrsc/imageio.hpp"
#include "klrsc/errors.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>

namespace klrsc {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

RasterImage load_png(std::FILE* fp, const std::string& path) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("png: allocation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("png: allocation failed");
    }
    std::vector<png_bytep> row_ptrs;
    RasterImage out;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("png: failed to decode " + path);
    }
    png_init_io(png, fp);
    png_read_info(png, info);

    const png_byte color = png_get_color_type(png, info);
    const png_byte depth = png_get_bit_depth(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (depth == 16) png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    out.width = static_cast<int>(png_get_image_width(png, info));
    out.height = static_cast<int>(png_get_image_height(png, info));
    out.channels = static_cast<int>(png_get_channels(png, info));
    if (out.channels != 1 && out.channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("png: unsupported channel layout in " + path);
    }
    out.pix.resize(static_cast<std::size_t>(out.width) * out.height * out.channels);
    row_ptrs.resize(out.height);
    const std::size_t stride = static_cast<std::size_t>(out.width) * out.channels;
    for (int r = 0; r < out.height; ++r) row_ptrs[r] = out.pix.data() + r * stride;
    png_read_image(png, row_ptrs.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

void save_png(const std::string& path, const RasterImage& raster) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("cannot open for writing: " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("png: allocation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("png: allocation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("png: failed to encode " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, raster.width, raster.height, 8,
                 raster.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const std::size_t stride = static_cast<std::size_t>(raster.width) * raster.channels;
    for (int r = 0; r < raster.height; ++r)
        png_write_row(png, const_cast<png_bytep>(raster.pix.data() + r * stride));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

int read_pnm_int(std::FILE* fp, const std::string& path) {
    int c = std::fgetc(fp);
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = std::fgetc(fp);
        } else if (!std::isspace(c)) {
            break;
        }
        c = std::fgetc(fp);
    }
    if (c == EOF || !std::isdigit(c)) throw IoError("pnm: malformed header in " + path);
    int v = 0;
    while (c != EOF && std::isdigit(c)) {
        v = v * 10 + (c - '0');
        c = std::fgetc(fp);
    }
    return v;
}

RasterImage load_pnm(std::FILE* fp, const std::string& path, int channels) {
    RasterImage out;
    out.width = read_pnm_int(fp, path);
    out.height = read_pnm_int(fp, path);
    const int maxval = read_pnm_int(fp, path);
    if (out.width < 1 || out.height < 1 || maxval != 255)
        throw IoError("pnm: only 8-bit images are supported: " + path);
    out.channels = channels;
    out.pix.resize(static_cast<std::size_t>(out.width) * out.height * channels);
    if (std::fread(out.pix.data(), 1, out.pix.size(), fp) != out.pix.size())
        throw IoError("pnm: truncated pixel data in " + path);
    return out;
}

void save_pnm(const std::string& path, const RasterImage& raster) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("cannot open for writing: " + path);
    std::fprintf(fp.get(), "%s\n%d %d\n255\n", raster.channels == 1 ? "P5" : "P6",
                 raster.width, raster.height);
    if (std::fwrite(raster.pix.data(), 1, raster.pix.size(), fp.get()) != raster.pix.size())
        throw IoError("pnm: short write to " + path);
}

unsigned char quantize(double v) {
    v = std::clamp(v, 0.0, 1.0);
    return static_cast<unsigned char>(std::lround(v * 255.0));
}

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

} // namespace

RasterImage load_raster(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw IoError("cannot open: " + path);
    unsigned char magic[8] = {0};
    const std::size_t got = std::fread(magic, 1, sizeof(magic), fp.get());
    std::rewind(fp.get());
    if (got >= 8 && png_sig_cmp(magic, 0, 8) == 0) return load_png(fp.get(), path);
    if (got >= 2 && magic[0] == 'P' && magic[1] == '5') {
        std::fseek(fp.get(), 2, SEEK_SET);
        return load_pnm(fp.get(), path, 1);
    }
    if (got >= 2 && magic[0] == 'P' && magic[1] == '6') {
        std::fseek(fp.get(), 2, SEEK_SET);
        return load_pnm(fp.get(), path, 3);
    }
    throw IoError("unrecognized image format: " + path);
}

void save_raster(const std::string& path, const RasterImage& raster) {
    if (raster.width < 1 || raster.height < 1) throw IoError("save_raster: empty image");
    if (raster.channels != 1 && raster.channels != 3) throw IoError("save_raster: bad channel count");
    if (ends_with(path, ".png")) {
        save_png(path, raster);
    } else if (ends_with(path, ".pgm")) {
        if (raster.channels != 1) throw IoError("pgm output requires a single channel: " + path);
        save_pnm(path, raster);
    } else if (ends_with(path, ".ppm")) {
        if (raster.channels != 3) throw IoError("ppm output requires three channels: " + path);
        save_pnm(path, raster);
    } else {
        throw IoError("unsupported output extension: " + path);
    }
}

LumaChroma raster_to_working(const RasterImage& raster) {
    if (raster.channels == 1) {
        LumaChroma lc;
        lc.y = Image(raster.width, raster.height);
        for (std::size_t i = 0; i < lc.y.size(); ++i) lc.y.data[i] = raster.pix[i] / 255.0;
        return lc;
    }
    RgbImage rgb;
    rgb.width = raster.width;
    rgb.height = raster.height;
    const std::size_t n = static_cast<std::size_t>(raster.width) * raster.height;
    rgb.r.resize(n);
    rgb.g.resize(n);
    rgb.b.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        rgb.r[i] = raster.pix[3 * i + 0] / 255.0;
        rgb.g[i] = raster.pix[3 * i + 1] / 255.0;
        rgb.b[i] = raster.pix[3 * i + 2] / 255.0;
    }
    return rgb_to_luma_chroma(rgb);
}

RasterImage working_to_raster(const LumaChroma& lc) {
    RasterImage out;
    out.width = lc.y.width;
    out.height = lc.y.height;
    if (!lc.has_chroma) {
        out.channels = 1;
        out.pix.resize(lc.y.size());
        for (std::size_t i = 0; i < lc.y.size(); ++i) out.pix[i] = quantize(lc.y.data[i]);
        return out;
    }
    const RgbImage rgb = luma_chroma_to_rgb(lc);
    out.channels = 3;
    out.pix.resize(lc.y.size() * 3);
    for (std::size_t i = 0; i < lc.y.size(); ++i) {
        out.pix[3 * i + 0] = quantize(rgb.r[i]);
        out.pix[3 * i + 1] = quantize(rgb.g[i]);
        out.pix[3 * i + 2] = quantize(rgb.b[i]);
    }
    return out;
}

Image load_luma(const std::string& path) {
    return raster_to_working(load_raster(path)).y;
}

void save_luma(const std::string& path, const Image& img) {
    LumaChroma lc;
    lc.y = img;
    save_raster(path, working_to_raster(lc));
}

} // namespace klrsc
