#include "klrsc/bench.hpp"

#include "klrsc/errors.hpp"
#include "klrsc/imageio.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <ostream>
#include <stdexcept>

namespace klrsc {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string stem(const std::string& path) {
    const auto slash = path.find_last_of("/\\");
    std::string base = (slash == std::string::npos) ? path : path.substr(slash + 1);
    const auto dot = base.find_last_of('.');
    if (dot != std::string::npos && dot > 0) base.erase(dot);
    return base;
}

} // namespace

Image degrade(const Image& gt, double p, double blur_sigma, int ksize, double bicubic_a) {
    if (!(p > 1.0)) throw std::invalid_argument("degrade: p must exceed 1");
    if (!(blur_sigma > 0.0)) throw std::invalid_argument("degrade: blur_sigma must be positive");
    const Image blurred = gaussian_blur(gt, blur_sigma * blur_sigma, ksize);
    return bicubic_resize(blurred, scaled_dim(gt.width, 1.0 / p), scaled_dim(gt.height, 1.0 / p),
                          bicubic_a);
}

double psnr(const Image& a, const Image& b) {
    if (a.width != b.width || a.height != b.height)
        throw std::invalid_argument("psnr: dimension mismatch");
    if (a.empty()) throw std::invalid_argument("psnr: empty image");
    double se = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        se += d * d;
    }
    const double mse = se / static_cast<double>(a.size());
    if (mse <= 0.0) return 99.0;
    return std::min(99.0, 10.0 * std::log10(1.0 / mse));
}

namespace {

std::array<double, 11> ssim_window() {
    std::array<double, 11> g{};
    double sum = 0.0;
    for (int i = 0; i < 11; ++i) {
        const double d = static_cast<double>(i - 5);
        g[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
        sum += g[static_cast<std::size_t>(i)];
    }
    for (double& v : g) v /= sum;
    return g;
}

// Weighted local mean over fully interior 11x11 windows; separable passes.
Image window_means(const Image& img, const std::array<double, 11>& g) {
    const int oh = img.height - 10;
    const int ow = img.width - 10;
    Image tmp(img.width, oh);
    for (int r = 0; r < oh; ++r)
        for (int c = 0; c < img.width; ++c) {
            double acc = 0.0;
            for (int k = 0; k < 11; ++k) acc += g[static_cast<std::size_t>(k)] * img.at(r + k, c);
            tmp.at(r, c) = acc;
        }
    Image out(ow, oh);
    for (int r = 0; r < oh; ++r)
        for (int c = 0; c < ow; ++c) {
            double acc = 0.0;
            for (int k = 0; k < 11; ++k) acc += g[static_cast<std::size_t>(k)] * tmp.at(r, c + k);
            out.at(r, c) = acc;
        }
    return out;
}

} // namespace

double ssim(const Image& a, const Image& b) {
    if (a.width != b.width || a.height != b.height)
        throw std::invalid_argument("ssim: dimension mismatch");
    if (a.width < 11 || a.height < 11)
        throw std::invalid_argument("ssim: image smaller than the 11x11 window");

    const auto g = ssim_window();
    Image aa(a.width, a.height), bb(a.width, a.height), ab(a.width, a.height);
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        aa.data[i] = a.data[i] * a.data[i];
        bb.data[i] = b.data[i] * b.data[i];
        ab.data[i] = a.data[i] * b.data[i];
    }
    const Image mu_a = window_means(a, g);
    const Image mu_b = window_means(b, g);
    const Image m_aa = window_means(aa, g);
    const Image m_bb = window_means(bb, g);
    const Image m_ab = window_means(ab, g);

    const double c1 = 0.01 * 0.01;
    const double c2 = 0.03 * 0.03;
    double acc = 0.0;
    for (std::size_t i = 0; i < mu_a.data.size(); ++i) {
        const double ma = mu_a.data[i], mb = mu_b.data[i];
        const double va = m_aa.data[i] - ma * ma;
        const double vb = m_bb.data[i] - mb * mb;
        const double cov = m_ab.data[i] - ma * mb;
        acc += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) /
               ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    return acc / static_cast<double>(mu_a.size());
}

Image center_crop(const Image& img, int w, int h) {
    if (w < 1 || h < 1 || w > img.width || h > img.height)
        throw std::invalid_argument("center_crop: target exceeds the image");
    const int r0 = (img.height - h) / 2;
    const int c0 = (img.width - w) / 2;
    Image out(w, h);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) out.at(r, c) = img.at(r0 + r, c0 + c);
    return out;
}

double median(std::vector<double> v) {
    if (v.empty()) throw std::invalid_argument("median: empty sample");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    if (n % 2 == 1) return v[n / 2];
    return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

ScnResult scn_for_pairs(const LayerFeatures& lr, const LayerFeatures& hr,
                        const SelfDictionary& dict, const SrConfig& cfg, int max_pairs) {
    cfg.validate();
    if (max_pairs < 1) throw std::invalid_argument("scn_for_pairs: max_pairs must be positive");
    if (lr.patches.size() != hr.patches.size())
        throw std::invalid_argument("scn_for_pairs: layer grids differ");
    if (dict.count() == 0) throw PipelineError("scn_for_pairs: empty dictionary");

    const int n = static_cast<int>(lr.patches.size());
    std::vector<int> pos_lr(static_cast<std::size_t>(n), -1);
    std::vector<int> pos_hr(static_cast<std::size_t>(n), -1);
    for (std::size_t t = 0; t < lr.valid.size(); ++t)
        pos_lr[static_cast<std::size_t>(lr.valid[t])] = static_cast<int>(t);
    for (std::size_t t = 0; t < hr.valid.size(); ++t)
        pos_hr[static_cast<std::size_t>(hr.valid[t])] = static_cast<int>(t);

    std::vector<int> usable;
    for (int j = 0; j < n; ++j)
        if (pos_lr[static_cast<std::size_t>(j)] >= 0 && pos_hr[static_cast<std::size_t>(j)] >= 0)
            usable.push_back(j);
    if (usable.empty()) return {};

    const auto nn_lr = knn_nonlocal(lr.f, lr.valid, cfg.k_nonlocal);
    const auto nn_hr = knn_nonlocal(hr.f, hr.valid, cfg.k_nonlocal);
    const auto atoms_lr = knn_dictionary(dict.learn, lr.f, lr.valid, cfg.k_dict);

    // Deterministic stride subsample of the usable pairs.
    const int stride = std::max(1, (static_cast<int>(usable.size()) + max_pairs - 1) / max_pairs);

    SolverConfig scfg;
    scfg.lambda1 = cfg.lambda1;
    scfg.lambda2 = cfg.lambda2;
    scfg.rho = cfg.rho;
    scfg.kernel_sigma = cfg.kernel_sigma;
    scfg.tol = cfg.solver_tol;
    scfg.max_iter = cfg.solver_max_iter;
    scfg.sc_iters = cfg.sc_iters;

    ScnResult res;
    for (std::size_t u = 0; u < usable.size(); u += static_cast<std::size_t>(stride)) {
        const int j = usable[u];
        const int tl = pos_lr[static_cast<std::size_t>(j)];
        const int th = pos_hr[static_cast<std::size_t>(j)];
        const CodingProblem cp_lr =
            assemble_problem(lr, j, nn_lr[static_cast<std::size_t>(tl)], dict,
                             atoms_lr[static_cast<std::size_t>(tl)]);
        const CodingProblem cp_hr =
            assemble_problem(hr, j, nn_hr[static_cast<std::size_t>(th)], dict,
                             atoms_lr[static_cast<std::size_t>(tl)]);

        const Eigen::VectorXd sc_a = sc_code(cp_lr.ya.col(0), cp_lr.yd, cfg.lambda1, cfg.sc_iters);
        const Eigen::VectorXd sc_b = sc_code(cp_hr.ya.col(0), cp_hr.yd, cfg.lambda1, cfg.sc_iters);
        res.sc.push_back((sc_a - sc_b).norm());

        const Eigen::VectorXd lr_a = lrsc_solve(cp_lr, scfg);
        const Eigen::VectorXd lr_b = lrsc_solve(cp_hr, scfg);
        res.lrsc.push_back((lr_a - lr_b).norm());

        const Eigen::VectorXd kl_a = klrsc_solve(cp_lr, scfg);
        const Eigen::VectorXd kl_b = klrsc_solve(cp_hr, scfg);
        res.klrsc.push_back((kl_a - kl_b).norm());
    }
    return res;
}

ScnResult scn_study(const Image& gt, const SrConfig& cfg, int max_pairs) {
    cfg.validate();
    const double var = cfg.blur_sigma * cfg.blur_sigma;
    const Image blurred = gaussian_blur(gt, var, 7);
    const Image down = bicubic_resize(blurred, scaled_dim(gt.width, 1.0 / cfg.s),
                                      scaled_dim(gt.height, 1.0 / cfg.s), cfg.bicubic_a);
    const Image lr_img = bicubic_resize(down, gt.width, gt.height, cfg.bicubic_a);

    PyramidPair pyr =
        build_pyramids(lr_img, cfg.n_layers, cfg.s, var, cfg.p, cfg.patch_size, cfg.bicubic_a);
    const SelfDictionary dict = build_dictionary(pyr, cfg.patch_size, cfg.overlap, cfg.flat_eps);

    const LayerFeatures lf_lr = layer_features(lr_img, cfg.patch_size, cfg.overlap, cfg.flat_eps);
    const LayerFeatures lf_hr = layer_features(gt, cfg.patch_size, cfg.overlap, cfg.flat_eps);
    return scn_for_pairs(lf_lr, lf_hr, dict, cfg, max_pairs);
}

std::vector<double> nuclear_norm_study(const Image& img, const SrConfig& cfg) {
    cfg.validate();
    const LayerFeatures lf = layer_features(img, cfg.patch_size, cfg.overlap, cfg.flat_eps);
    const auto nn = knn_nonlocal(lf.f, lf.valid, cfg.k_nonlocal);

    std::vector<double> values;
    values.reserve(lf.valid.size());
    for (std::size_t t = 0; t < lf.valid.size(); ++t) {
        const int j = lf.valid[t];
        const auto& set = nn[t];
        Eigen::MatrixXd m(lf.f.rows(), 1 + static_cast<Eigen::Index>(set.idx.size()));
        m.col(0) = lf.f.col(j);
        for (std::size_t k = 0; k < set.idx.size(); ++k)
            m.col(1 + static_cast<Eigen::Index>(k)) = lf.f.col(set.idx[k]);
        values.push_back(nuclear_norm_mapped(m, cfg.kernel_sigma));
    }
    return values;
}

double average_psnr(const BenchReport& report, const std::string& mode) {
    double sum = 0.0;
    int n = 0;
    for (const BenchRow& r : report.rows)
        if (r.mode == mode && r.image != "average") {
            sum += r.psnr_db;
            ++n;
        }
    if (n == 0) throw std::invalid_argument("average_psnr: no rows for mode " + mode);
    return sum / n;
}

double average_ssim(const BenchReport& report, const std::string& mode) {
    double sum = 0.0;
    int n = 0;
    for (const BenchRow& r : report.rows)
        if (r.mode == mode && r.image != "average") {
            sum += r.ssim;
            ++n;
        }
    if (n == 0) throw std::invalid_argument("average_ssim: no rows for mode " + mode);
    return sum / n;
}

void write_benchmark_csv(std::ostream& os, const BenchReport& report) {
    os << "image,mode,p,psnr_db,ssim,seconds\n";
    for (const BenchRow& r : report.rows) {
        os << r.image << ',' << r.mode << ',';
        os << std::defaultfloat << std::setprecision(6) << r.p << ',';
        os << std::fixed << std::setprecision(4) << r.psnr_db << ',' << std::setprecision(5)
           << r.ssim << ',' << std::setprecision(3) << r.seconds << '\n';
        os << std::defaultfloat << std::setprecision(6);
    }
}

void write_benchmark_table(std::ostream& os, const BenchReport& report) {
    os << std::left << std::setw(14) << "image" << std::setw(10) << "mode" << std::right
       << std::setw(5) << "p" << std::setw(10) << "psnr" << std::setw(9) << "ssim"
       << std::setw(10) << "seconds" << '\n';
    for (const BenchRow& r : report.rows) {
        os << std::left << std::setw(14) << r.image << std::setw(10) << r.mode << std::right
           << std::setw(5) << std::defaultfloat << std::setprecision(4) << r.p << std::setw(10)
           << std::fixed << std::setprecision(4) << r.psnr_db << std::setw(9)
           << std::setprecision(5) << r.ssim << std::setw(10) << std::setprecision(2) << r.seconds
           << '\n';
        os << std::defaultfloat << std::setprecision(6);
    }
}

namespace {

BenchRow score_row(const std::string& name, const std::string& mode, double p, const Image& gt,
                   Image out, double seconds) {
    for (double& v : out.data) v = std::clamp(v, 0.0, 1.0);
    const int w = std::min(gt.width, out.width);
    const int h = std::min(gt.height, out.height);
    const Image gz = center_crop(gt, w, h);
    const Image oz = center_crop(out, w, h);
    BenchRow row;
    row.image = name;
    row.mode = mode;
    row.p = p;
    row.psnr_db = psnr(gz, oz);
    row.ssim = ssim(gz, oz);
    row.seconds = seconds;
    return row;
}

} // namespace

BenchReport run_benchmark(const std::vector<std::string>& image_paths, const SrConfig& cfg,
                          const std::vector<CodingMode>& modes) {
    cfg.validate();
    BenchReport report;
    for (const std::string& path : image_paths) {
        try {
            const Image gt = load_luma(path);
            const Image lr = degrade(gt, cfg.p, cfg.blur_sigma, 7, cfg.bicubic_a);
            const int tw = scaled_dim(lr.width, cfg.p);
            const int th = scaled_dim(lr.height, cfg.p);
            const std::string name = stem(path);

            auto t0 = std::chrono::steady_clock::now();
            Image bic = bicubic_resize(lr, tw, th, cfg.bicubic_a);
            report.rows.push_back(
                score_row(name, "bicubic", cfg.p, gt, std::move(bic), seconds_since(t0)));

            for (CodingMode mode : modes) {
                SrConfig mc = cfg;
                mc.mode = mode;
                std::fprintf(stderr, "bench: %s / %s\n", name.c_str(), mode_name(mode));
                t0 = std::chrono::steady_clock::now();
                Image sr = super_resolve(lr, mc);
                report.rows.push_back(
                    score_row(name, mode_name(mode), cfg.p, gt, std::move(sr),
                              seconds_since(t0)));
            }
        } catch (const std::exception& e) {
            std::fprintf(stderr, "bench: %s failed: %s\n", path.c_str(), e.what());
        }
    }

    // One average row per mode, in first-seen order.
    std::vector<std::string> order;
    for (const BenchRow& r : report.rows)
        if (std::find(order.begin(), order.end(), r.mode) == order.end()) order.push_back(r.mode);
    std::vector<BenchRow> averages;
    for (const std::string& mode : order) {
        BenchRow avg;
        avg.image = "average";
        avg.mode = mode;
        avg.p = cfg.p;
        int n = 0;
        for (const BenchRow& r : report.rows)
            if (r.mode == mode) {
                avg.psnr_db += r.psnr_db;
                avg.ssim += r.ssim;
                avg.seconds += r.seconds;
                ++n;
            }
        if (n > 0) {
            avg.psnr_db /= n;
            avg.ssim /= n;
            avg.seconds /= n;
            averages.push_back(avg);
        }
    }
    report.rows.insert(report.rows.end(), averages.begin(), averages.end());
    return report;
}

} // namespace klrsc
