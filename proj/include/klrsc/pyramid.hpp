#pragma once

#include "klrsc/image.hpp"

#include <Eigen/Core>

#include <string>
#include <vector>

namespace klrsc {

/// Patch descriptor used on both sides of the dictionary: a unit vector plus
/// the scale (norm) and offset (mean) needed to undo the normalization.
struct Feature {
    Eigen::VectorXd v;
    double norm = 0.0;
    double mean = 0.0;
    bool flat = false;
};

/// Gradient feature: first and second difference filters in both directions,
/// responses concatenated and normalized. Patches whose response norm falls
/// below flat_eps are flagged flat and keep a zero vector.
Feature learn_feature(const Patch& patch, double flat_eps);

/// Intensity feature: mean-removed pixels, normalized.
Feature recon_feature(const Patch& patch, double flat_eps);

/// Variance of the blur that sits n downsampling steps of factor s away
/// from the observation on the way to total magnification p.
double blur_variance(int n, double variance, double s, double p);

/// Downsampled layers and their reinterpolated counterparts. down[k] and
/// up[k] have identical dimensions: up[k] is the next-deeper layer scaled
/// back up, so the pair shows what detail one step of degradation removes.
struct PyramidPair {
    std::vector<Image> down;
    std::vector<Image> up;
    std::vector<double> variances;
    double step = 0.0;
};

/// Build `depth` layer pairs from i0. The depth is reduced (with a note on
/// stderr) when the deepest layer could not hold a single patch.
PyramidPair build_pyramids(const Image& i0, int depth, double s, double variance,
                           double p, int patch_size, double bicubic_a = -0.5);

/// Paired example set: column j of `learn` is the gradient feature of a
/// reinterpolated patch, column j of `recon` the intensity feature of the
/// co-located original patch. atom_norm/atom_mean record the normalization
/// removed from the recon column.
struct SelfDictionary {
    Eigen::MatrixXd learn;
    Eigen::MatrixXd recon;
    std::vector<double> atom_norm;
    std::vector<double> atom_mean;
    int patch_size = 0;

    int count() const { return static_cast<int>(learn.cols()); }
};

/// Harvest every non-flat patch location across the layer pairs.
SelfDictionary build_dictionary(const PyramidPair& pair, int patch_size, int overlap,
                                double flat_eps);

/// All patch features of one image, kept in grid order. `f` holds the
/// gradient features used for matching; flat locations get a zero column and
/// `valid` lists the non-flat column indices. `norm` and `mean` are the
/// intensity statistics (norm of the mean-removed patch, patch mean) that
/// reconstruction multiplies back in.
struct LayerFeatures {
    std::vector<Patch> patches;
    Eigen::MatrixXd f;
    std::vector<double> norm;
    std::vector<double> mean;
    std::vector<char> flat;
    std::vector<int> valid;
};

LayerFeatures layer_features(const Image& img, int patch_size, int overlap, double flat_eps);

/// Flat binary dictionary files, versioned so stale caches are rejected.
void save_dictionary(const std::string& path, const SelfDictionary& dict);
SelfDictionary load_dictionary(const std::string& path);

} // namespace klrsc
