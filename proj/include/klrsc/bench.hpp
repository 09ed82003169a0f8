#pragma once

#include "klrsc/pipeline.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace klrsc {

/// Benchmark degradation: 7x7 Gaussian blur (sigma in pixels) followed by
/// bicubic decimation to round(dim / p).
Image degrade(const Image& gt, double p, double blur_sigma = 1.6, int ksize = 7,
              double bicubic_a = -0.5);

/// 10 log10(1 / MSE) on [0,1] data, capped at 99 dB (identical images).
double psnr(const Image& a, const Image& b);

/// Mean local structural similarity, 11x11 Gaussian window sigma 1.5,
/// C1 = 0.01^2, C2 = 0.03^2, windows fully inside the image.
double ssim(const Image& a, const Image& b);

Image center_crop(const Image& img, int w, int h);

double median(std::vector<double> v);

/// Per-patch coding stability: distance between the weights of an LR feature
/// and of its co-located HR feature, both coded against the same atoms.
struct ScnResult {
    std::vector<double> sc;
    std::vector<double> lrsc;
    std::vector<double> klrsc;
};

/// Code up to max_pairs co-located (lr, hr) feature pairs under each mode and
/// collect |w_lr - w_hr|_2. Pair t uses the atoms selected by the LR query so
/// the two codes share a basis; nonlocal neighbors come from each feature's
/// own layer. Pairs flat on either side are skipped; the survivors are
/// stride-subsampled deterministically down to max_pairs.
ScnResult scn_for_pairs(const LayerFeatures& lr, const LayerFeatures& hr,
                        const SelfDictionary& dict, const SrConfig& cfg, int max_pairs);

/// Full stability study on one ground-truth image: the LR counterpart is
/// blur + downsample by s + upscale back, the dictionary is the counterpart's
/// own example set.
ScnResult scn_study(const Image& gt, const SrConfig& cfg, int max_pairs = 2000);

/// Nuclear norm of the kernel-mapped [query | k_nonlocal neighbors] matrix
/// for every non-flat feature of the image.
std::vector<double> nuclear_norm_study(const Image& img, const SrConfig& cfg);

struct BenchRow {
    std::string image;
    std::string mode;
    double p = 0.0;
    double psnr_db = 0.0;
    double ssim = 0.0;
    double seconds = 0.0;
};

struct BenchReport {
    std::vector<BenchRow> rows; // per-image rows, then one "average" row per mode
};

/// Mean over the per-image rows of one mode (the "average" rows are skipped).
double average_psnr(const BenchReport& report, const std::string& mode);
double average_ssim(const BenchReport& report, const std::string& mode);

void write_benchmark_csv(std::ostream& os, const BenchReport& report);
void write_benchmark_table(std::ostream& os, const BenchReport& report);

/// For every ground-truth image: degrade by cfg.p, upscale with the bicubic
/// baseline and with every requested mode, and score PSNR/SSIM against the
/// ground truth (center-cropped to the common dimensions). A failing image is
/// reported on stderr and skipped.
BenchReport run_benchmark(const std::vector<std::string>& image_paths, const SrConfig& cfg,
                          const std::vector<CodingMode>& modes);

} // namespace klrsc
