#include "klrsc/pyramid.hpp"
#include "klrsc/errors.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace klrsc {

namespace {

// The four high-pass responses of a b x b patch, concatenated row-major into
// a 4b vector. Out-of-patch samples mirror at the border.
void gradient_responses(const Patch& p, Eigen::VectorXd& out) {
    const int b = p.size;
    const int bb = b * b;
    out.resize(4 * bb);
    auto px = [&](int r, int c) {
        return p.pix[static_cast<std::size_t>(mirror_index(r, b)) * b + mirror_index(c, b)];
    };
    for (int r = 0; r < b; ++r) {
        for (int c = 0; c < b; ++c) {
            const int i = r * b + c;
            out[i] = px(r, c + 1) - px(r, c);
            out[bb + i] = px(r + 1, c) - px(r, c);
            out[2 * bb + i] = 2.0 * px(r, c) - px(r, c - 1) - px(r, c + 1);
            out[3 * bb + i] = 2.0 * px(r, c) - px(r - 1, c) - px(r + 1, c);
        }
    }
}

} // namespace

Feature learn_feature(const Patch& patch, double flat_eps) {
    Feature f;
    gradient_responses(patch, f.v);
    double sum = 0.0;
    for (double v : patch.pix) sum += v;
    f.mean = sum / static_cast<double>(patch.pix.size());
    f.norm = f.v.norm();
    if (f.norm < flat_eps) {
        f.flat = true;
        f.v.setZero();
    } else {
        f.v /= f.norm;
    }
    return f;
}

Feature recon_feature(const Patch& patch, double flat_eps) {
    Feature f;
    const int n = static_cast<int>(patch.pix.size());
    double sum = 0.0;
    for (double v : patch.pix) sum += v;
    f.mean = sum / n;
    f.v.resize(n);
    for (int i = 0; i < n; ++i) f.v[i] = patch.pix[i] - f.mean;
    f.norm = f.v.norm();
    if (f.norm < flat_eps) {
        f.flat = true;
        f.v.setZero();
    } else {
        f.v /= f.norm;
    }
    return f;
}

double blur_variance(int n, double variance, double s, double p) {
    if (n < 1) throw std::invalid_argument("blur_variance: layer index must be >= 1");
    if (variance <= 0.0) throw std::invalid_argument("blur_variance: variance must be positive");
    if (s <= 1.0 || p <= 1.0) throw std::invalid_argument("blur_variance: factors must exceed 1");
    return n * variance * std::log(s) / std::log(p);
}

PyramidPair build_pyramids(const Image& i0, int depth, double s, double variance,
                           double p, int patch_size, double bicubic_a) {
    if (i0.empty()) throw std::invalid_argument("build_pyramids: empty image");
    if (depth < 0) throw std::invalid_argument("build_pyramids: negative depth");
    PyramidPair pair;
    pair.step = s;
    if (depth == 0) return pair;

    // Shrink the stack until the deepest stored layer holds a patch and the
    // one below it (the interpolation source) still feeds the cubic kernel.
    int eff = depth;
    auto dims_at = [&](int n) {
        const double f = std::pow(s, -n);
        return std::min(scaled_dim(i0.width, f), scaled_dim(i0.height, f));
    };
    while (eff > 0 && (dims_at(eff) < patch_size || dims_at(eff + 1) < 4)) --eff;
    if (eff < depth)
        std::fprintf(stderr, "pyramid: reduced depth %d -> %d for %dx%d input\n",
                     depth, eff, i0.width, i0.height);
    if (eff == 0) return pair;

    std::vector<Image> down_full(eff + 1);
    for (int n = 1; n <= eff + 1; ++n) {
        const double var = blur_variance(n, variance, s, p);
        const Image blurred = gaussian_blur(i0, var, gaussian_ksize(var));
        const double f = std::pow(s, -n);
        down_full[n - 1] = bicubic_resize(blurred, scaled_dim(i0.width, f),
                                          scaled_dim(i0.height, f), bicubic_a);
        if (n <= eff) pair.variances.push_back(var);
    }
    for (int k = 0; k < eff; ++k) {
        pair.up.push_back(bicubic_resize(down_full[k + 1], down_full[k].width,
                                         down_full[k].height, bicubic_a));
        if (pair.up[k].width != down_full[k].width || pair.up[k].height != down_full[k].height)
            throw PipelineError("build_pyramids: layer pair misaligned");
    }
    pair.down.assign(down_full.begin(), down_full.end() - 1);
    return pair;
}

LayerFeatures layer_features(const Image& img, int patch_size, int overlap, double flat_eps) {
    LayerFeatures lf;
    lf.patches = extract_patches(img, patch_size, overlap);
    const int n = static_cast<int>(lf.patches.size());
    const int dim = 4 * patch_size * patch_size;
    lf.f.setZero(dim, n);
    lf.norm.resize(n);
    lf.mean.resize(n);
    lf.flat.resize(n);
    lf.valid.clear();
    for (int j = 0; j < n; ++j) {
        Feature feat = learn_feature(lf.patches[j], flat_eps);
        lf.flat[j] = feat.flat ? 1 : 0;
        if (!feat.flat) {
            lf.f.col(j) = feat.v;
            lf.valid.push_back(j);
        }
        // Intensity stats: reconstruction rescales by these, not by the
        // gradient-feature norm.
        lf.mean[j] = feat.mean;
        double ssq = 0.0;
        for (double v : lf.patches[j].pix) {
            const double d = v - feat.mean;
            ssq += d * d;
        }
        lf.norm[j] = std::sqrt(ssq);
    }
    return lf;
}

SelfDictionary build_dictionary(const PyramidPair& pair, int patch_size, int overlap,
                                double flat_eps) {
    SelfDictionary dict;
    dict.patch_size = patch_size;
    const int fdim = 4 * patch_size * patch_size;
    const int rdim = patch_size * patch_size;

    std::vector<Eigen::VectorXd> learn_cols, recon_cols;
    for (std::size_t k = 0; k < pair.down.size(); ++k) {
        const std::vector<Patch> lr = extract_patches(pair.up[k], patch_size, overlap);
        const std::vector<Patch> hr = extract_patches(pair.down[k], patch_size, overlap);
        if (lr.size() != hr.size()) throw PipelineError("build_dictionary: grid mismatch");
        for (std::size_t j = 0; j < lr.size(); ++j) {
            Feature lfeat = learn_feature(lr[j], flat_eps);
            if (lfeat.flat) continue;
            Feature rfeat = recon_feature(hr[j], flat_eps);
            if (rfeat.flat) continue;
            learn_cols.push_back(std::move(lfeat.v));
            recon_cols.push_back(std::move(rfeat.v));
            // The normalization undone when an atom reproduces its own patch.
            dict.atom_norm.push_back(rfeat.norm);
            dict.atom_mean.push_back(rfeat.mean);
        }
    }
    const int count = static_cast<int>(learn_cols.size());
    dict.learn.resize(fdim, count);
    dict.recon.resize(rdim, count);
    for (int j = 0; j < count; ++j) {
        dict.learn.col(j) = learn_cols[j];
        dict.recon.col(j) = recon_cols[j];
    }
    return dict;
}

namespace {

constexpr char kDictMagic[8] = {'K', 'L', 'R', 'S', 'C', 'D', 'I', 'C'};
constexpr std::uint32_t kDictVersion = 1;

template <typename T>
void write_pod(std::ofstream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& is, const std::string& path) {
    T v{};
    if (!is.read(reinterpret_cast<char*>(&v), sizeof(T)))
        throw IoError("dictionary file truncated: " + path);
    return v;
}

} // namespace

void save_dictionary(const std::string& path, const SelfDictionary& dict) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);
    os.write(kDictMagic, sizeof(kDictMagic));
    write_pod(os, kDictVersion);
    write_pod(os, static_cast<std::uint32_t>(dict.learn.rows()));
    write_pod(os, static_cast<std::uint32_t>(dict.recon.rows()));
    write_pod(os, static_cast<std::uint32_t>(dict.patch_size));
    write_pod(os, static_cast<std::uint64_t>(dict.count()));
    os.write(reinterpret_cast<const char*>(dict.learn.data()),
             static_cast<std::streamsize>(sizeof(double) * dict.learn.size()));
    os.write(reinterpret_cast<const char*>(dict.recon.data()),
             static_cast<std::streamsize>(sizeof(double) * dict.recon.size()));
    os.write(reinterpret_cast<const char*>(dict.atom_norm.data()),
             static_cast<std::streamsize>(sizeof(double) * dict.atom_norm.size()));
    os.write(reinterpret_cast<const char*>(dict.atom_mean.data()),
             static_cast<std::streamsize>(sizeof(double) * dict.atom_mean.size()));
    if (!os) throw IoError("short write to " + path);
}

SelfDictionary load_dictionary(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    char magic[8];
    if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kDictMagic, sizeof(magic)) != 0)
        throw IoError("not a dictionary file: " + path);
    const auto version = read_pod<std::uint32_t>(is, path);
    if (version != kDictVersion)
        throw IoError("dictionary version " + std::to_string(version) + " unsupported (expected " +
                      std::to_string(kDictVersion) + "): " + path);
    const auto fdim = read_pod<std::uint32_t>(is, path);
    const auto rdim = read_pod<std::uint32_t>(is, path);
    const auto psize = read_pod<std::uint32_t>(is, path);
    const auto count = read_pod<std::uint64_t>(is, path);
    if (fdim == 0 || rdim == 0 || psize == 0 || fdim != 4u * rdim || psize * psize != rdim)
        throw IoError("dictionary header inconsistent: " + path);

    SelfDictionary dict;
    dict.patch_size = static_cast<int>(psize);
    dict.learn.resize(fdim, static_cast<Eigen::Index>(count));
    dict.recon.resize(rdim, static_cast<Eigen::Index>(count));
    dict.atom_norm.resize(count);
    dict.atom_mean.resize(count);
    auto read_block = [&](char* dst, std::size_t bytes) {
        if (!is.read(dst, static_cast<std::streamsize>(bytes)))
            throw IoError("dictionary file truncated: " + path);
    };
    read_block(reinterpret_cast<char*>(dict.learn.data()), sizeof(double) * dict.learn.size());
    read_block(reinterpret_cast<char*>(dict.recon.data()), sizeof(double) * dict.recon.size());
    read_block(reinterpret_cast<char*>(dict.atom_norm.data()), sizeof(double) * count);
    read_block(reinterpret_cast<char*>(dict.atom_mean.data()), sizeof(double) * count);
    return dict;
}

} // namespace klrsc
