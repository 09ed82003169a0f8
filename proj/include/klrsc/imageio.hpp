#pragma once

#include "klrsc/image.hpp"

#include <string>
#include <vector>

namespace klrsc {

/// 8-bit raster as stored on disk, interleaved, 1 or 3 channels.
struct RasterImage {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<unsigned char> pix;
};

/// Load a PNG, PGM (P5) or PPM (P6) file; format detected from content.
RasterImage load_raster(const std::string& path);

/// Save by extension: .png, .pgm (needs 1 channel), .ppm (needs 3 channels).
void save_raster(const std::string& path, const RasterImage& raster);

/// Raster -> working planes in [0,1]; 3-channel input is split into
/// luma plus chroma, 1-channel input becomes a bare luma plane.
LumaChroma raster_to_working(const RasterImage& raster);

/// Working planes -> 8-bit raster. This is the single place where values
/// are clamped to [0,1] and rounded.
RasterImage working_to_raster(const LumaChroma& lc);

/// Convenience: load as luma only (chroma discarded).
Image load_luma(const std::string& path);

/// Convenience: save a luma plane as an 8-bit gray file.
void save_luma(const std::string& path, const Image& img);

} // namespace klrsc
