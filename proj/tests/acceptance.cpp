// Acceptance gate. Runs the full criteria list end to end and prints one
// PASS/FAIL line per criterion; the exit code is the number of failures.
// Tolerances are pinned here on purpose, do not tune them to make a run pass.

#include "klrsc/bench.hpp"
#include "klrsc/image.hpp"
#include "klrsc/imageio.hpp"
#include "klrsc/pipeline.hpp"
#include "klrsc/pyramid.hpp"
#include "klrsc/recon.hpp"
#include "klrsc/search.hpp"
#include "klrsc/solver.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace klrsc;

namespace {

int g_failures = 0;

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double secs() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

void report(int id, const std::string& name, bool ok, const std::string& detail) {
    std::printf("criterion %d (%s): %s | %s\n", id, name.c_str(), ok ? "PASS" : "FAIL",
                detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

std::string asset(const std::string& name) {
    return std::string(KLRSC_ASSETS_DIR) + "/" + name;
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::vector<char> read_bytes(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    return std::vector<char>(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

// Unit-column coding problem with the geometry used throughout: 196-dim
// features, K_D dictionary atoms, K_N nonlocal neighbors.
CodingProblem random_problem(int fdim, int kd, int kn, unsigned seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    CodingProblem cp;
    cp.ya.resize(fdim, 1 + kn);
    cp.yd.resize(fdim, kd);
    cp.xd.resize(49, kd);
    for (Eigen::Index c = 0; c < cp.ya.cols(); ++c) {
        for (Eigen::Index r = 0; r < fdim; ++r) cp.ya(r, c) = nd(rng);
        cp.ya.col(c).normalize();
    }
    for (Eigen::Index c = 0; c < kd; ++c) {
        for (Eigen::Index r = 0; r < fdim; ++r) cp.yd(r, c) = nd(rng);
        cp.yd.col(c).normalize();
        for (Eigen::Index r = 0; r < 49; ++r) cp.xd(r, c) = nd(rng);
    }
    cp.atom_idx.resize(static_cast<std::size_t>(kd));
    for (int i = 0; i < kd; ++i) cp.atom_idx[static_cast<std::size_t>(i)] = i;
    cp.query_norm = 1.0;
    cp.query_mean = 0.5;
    return cp;
}

// Staged grid search for argmin_x 0.5 (x - v)^2 + t |x|. Resolution ends at
// 1e-10, far below the 1e-8 acceptance tolerance. Evaluated in extended
// precision: near the minimum the objective is quadratically flat, so plain
// double comparisons cannot resolve positions below ~1e-8.
double grid_argmin_shrink(double v, double t) {
    auto obj = [&](long double x) {
        return 0.5L * (x - v) * (x - v) + static_cast<long double>(t) * std::abs(x);
    };
    long double lo = -std::abs(v) - 1.0L, hi = std::abs(v) + 1.0L;
    long double best = 0.0L, fbest = obj(0.0L);
    long double step = 1e-2L;
    for (int stage = 0; stage < 5; ++stage) {
        const int n = static_cast<int>((hi - lo) / step) + 1;
        for (int i = 0; i < n; ++i) {
            const long double x = lo + i * step;
            const long double f = obj(x);
            if (f < fbest) {
                fbest = f;
                best = x;
            }
        }
        lo = best - 2.0L * step;
        hi = best + 2.0L * step;
        step *= 1e-2L;
    }
    return static_cast<double>(best);
}

double max_abs(const Image& a, const Image& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

// ---------------------------------------------------------------------------

void criteria_1_2() {
    Timer t;
    SrConfig cfg; // stock settings: p = 3, blur_sigma = 1.6
    const std::vector<std::string> paths = {asset("camera.png"), asset("astronaut.png"),
                                            asset("coffee.png")};
    const std::vector<CodingMode> modes = {CodingMode::sc, CodingMode::lrsc, CodingMode::klrsc,
                                           CodingMode::klrsc_ar};
    BenchReport rep;
    try {
        rep = run_benchmark(paths, cfg, modes);
    } catch (const std::exception& e) {
        report(1, "ablation ordering", false, std::string("benchmark failed: ") + e.what());
        report(2, "gain over bicubic", false, "benchmark failed");
        return;
    }
    const double p_bi = average_psnr(rep, "bicubic");
    const double p_sc = average_psnr(rep, "SC");
    const double p_lr = average_psnr(rep, "LRSC");
    const double p_kl = average_psnr(rep, "KLRSC");
    const double p_ar = average_psnr(rep, "KLRSC+AR");
    const double s_bi = average_ssim(rep, "bicubic");
    const double s_ar = average_ssim(rep, "KLRSC+AR");

    const double slack = 0.05; // dB each step may dip below the weaker mode
    const bool ordered = p_lr >= p_sc - slack && p_kl >= p_lr - slack && p_ar >= p_kl - slack;
    std::ostringstream d1;
    d1 << "avg PSNR dB: bicubic " << fmt("%.3f", p_bi) << ", SC " << fmt("%.3f", p_sc) << ", LRSC "
       << fmt("%.3f", p_lr) << ", KLRSC " << fmt("%.3f", p_kl) << ", KLRSC+AR " << fmt("%.3f", p_ar)
       << ", slack " << slack << ", " << fmt("%.0f", t.secs()) << " s";
    report(1, "ablation ordering", ordered, d1.str());

    const bool gained = (p_ar - p_bi >= 1.0) && (s_ar - s_bi >= 0.02);
    std::ostringstream d2;
    d2 << "KLRSC+AR vs bicubic: " << fmt("%+.3f", p_ar - p_bi) << " dB (need +1.0), "
       << fmt("%+.4f", s_ar - s_bi) << " SSIM (need +0.02)";
    report(2, "gain over bicubic", gained, d2.str());
}

void criterion_3() {
    Timer t;
    SrConfig cfg;
    ScnResult res;
    try {
        const Image gt = load_luma(asset("camera.png"));
        // Ask above the 2000-pair floor: the stride subsample rounds down.
        res = scn_study(gt, cfg, 2400);
    } catch (const std::exception& e) {
        report(3, "coding noise suppression", false, std::string("study failed: ") + e.what());
        return;
    }
    const std::size_t n = res.sc.size();
    const double m_sc = median(res.sc);
    const double m_lr = median(res.lrsc);
    const double m_kl = median(res.klrsc);
    const bool ok = n >= 2000 && m_kl < m_sc && m_kl <= m_lr && m_lr <= m_sc;
    std::ostringstream d;
    d << "median coding noise over " << n << " pairs: SC " << fmt("%.4f", m_sc) << ", LRSC "
      << fmt("%.4f", m_lr) << ", KLRSC " << fmt("%.4f", m_kl) << ", " << fmt("%.0f", t.secs())
      << " s";
    report(3, "coding noise suppression", ok, d.str());
}

void criterion_4() {
    Timer t;
    SrConfig cfg; // k_nonlocal = 20 gives 21 mapped columns
    std::vector<double> vals;
    try {
        vals = nuclear_norm_study(load_luma(asset("camera.png")), cfg);
    } catch (const std::exception& e) {
        report(4, "mapped nuclear norms", false, std::string("study failed: ") + e.what());
        return;
    }
    const double bound = 21.0 + 1e-8;
    std::size_t below20 = 0;
    double vmax = 0.0;
    for (double v : vals) {
        vmax = std::max(vmax, v);
        if (v < 20.0) ++below20;
    }
    const double frac = vals.empty() ? 0.0 : static_cast<double>(below20) / vals.size();
    const bool ok = !vals.empty() && vmax <= bound && frac >= 0.95;
    std::ostringstream d;
    d << vals.size() << " matrices, max " << fmt("%.6f", vmax) << " (bound 21+1e-8), "
      << fmt("%.1f", 100.0 * frac) << "% below 20 (need 95%), " << fmt("%.0f", t.secs()) << " s";
    report(4, "mapped nuclear norms", ok, d.str());
}

void criterion_5() {
    Timer t;
    std::mt19937 rng(505);
    std::uniform_real_distribution<double> uv(-4.0, 4.0);
    std::uniform_real_distribution<double> ut(0.0, 2.0);

    int soft_bad = 0;
    double soft_worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const double v = uv(rng), tau = ut(rng);
        const double got = soft_threshold(v, tau);
        const double want = grid_argmin_shrink(v, tau);
        soft_worst = std::max(soft_worst, std::abs(got - want));
        if (std::abs(got - want) > 1e-8) ++soft_bad;
    }

    // The prox of tau * nuclear norm at M is certified by its subgradient
    // conditions: spectral norm of M - W at most tau, and the Frobenius
    // pairing <M - W, W> equal to tau times the nuclear norm of W.
    std::normal_distribution<double> nd(0.0, 1.0);
    std::uniform_real_distribution<double> utau(0.05, 1.5);
    int svt_bad = 0;
    double svt_worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        Eigen::MatrixXd m(4, 4);
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c) m(r, c) = nd(rng);
        const double tau = utau(rng);
        const Eigen::MatrixXd w = singular_value_threshold(m, tau);
        Eigen::JacobiSVD<Eigen::MatrixXd> sw(w, Eigen::ComputeThinU | Eigen::ComputeThinV);
        Eigen::JacobiSVD<Eigen::MatrixXd> sr(Eigen::MatrixXd(m - w));
        const double spectral = sr.singularValues()(0);
        const double pairing =
            std::abs(((m - w).transpose() * w).trace() - tau * sw.singularValues().sum());
        Eigen::JacobiSVD<Eigen::MatrixXd> sm(m);
        double spec_dev = 0.0;
        for (int k = 0; k < 4; ++k)
            spec_dev = std::max(spec_dev, std::abs(sw.singularValues()(k) -
                                                   std::max(sm.singularValues()(k) - tau, 0.0)));
        const double viol = std::max({spectral - tau, pairing, spec_dev});
        svt_worst = std::max(svt_worst, viol);
        if (viol > 1e-6) ++svt_bad;
    }

    const bool ok = soft_bad == 0 && svt_bad == 0;
    std::ostringstream d;
    d << "soft threshold: 1000 grid cases, worst " << fmt("%.2e", soft_worst)
      << " (tol 1e-8); SVT: 100 certified cases, worst violation " << fmt("%.2e", svt_worst)
      << " (tol 1e-6), " << fmt("%.1f", t.secs()) << " s";
    report(5, "prox operator oracles", ok, d.str());
}

void criterion_6() {
    Timer t;
    SolverConfig cfg; // tol 1e-5, max_iter 100
    int good = 0;
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const CodingProblem cp = random_problem(196, 60, 20, 600 + static_cast<unsigned>(i));
        SolveDiagnostics diag;
        klrsc_solve(cp, cfg, &diag);
        worst = std::max(worst, diag.feasibility);
        if (diag.converged && diag.iterations <= 100 && diag.feasibility < 1e-5) ++good;
    }
    std::ostringstream d;
    d << good << "/100 reached relative feasibility < 1e-5 within 100 iterations (need 99), worst "
      << fmt("%.2e", worst) << ", " << fmt("%.1f", t.secs()) << " s";
    report(6, "solver convergence", good >= 99, d.str());
}

void criterion_7() {
    Timer t;
    const CodingProblem cp = random_problem(196, 60, 20, 700);
    SolverConfig cfg;
    cfg.lambda1 = 0.0;
    cfg.lambda2 = 0.0;
    cfg.rho = 1.005; // gentle growth keeps the smoothed iteration contracting
    cfg.max_iter = 600;
    cfg.tol = 1e-15;
    SolveDiagnostics diag;
    klrsc_solve(cp, cfg, &diag);

    const KernelMatrices km = gaussian_kernel_matrices(cp, cfg.kernel_sigma);
    const Eigen::MatrixXd direct = km.dd.llt().solve(km.da);
    const double err = (diag.w - direct).norm();
    std::ostringstream d;
    d << "zero-penalty limit vs direct kernel least squares: " << fmt("%.2e", err)
      << " Frobenius (tol 1e-4), " << fmt("%.1f", t.secs()) << " s";
    report(7, "corrected update validation", err <= 1e-4, d.str());
}

void criterion_8() {
    Timer t;
    std::mt19937 rng(808);
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::ostringstream d;
    bool all = true;

    { // patch extract / merge round trip
        Image img(23, 17);
        for (double& v : img.data) v = ud(rng);
        const Image back = merge_patches(extract_patches(img, 7, 5), img.width, img.height);
        const double dev = max_abs(img, back);
        const bool ok = dev <= 1e-15;
        all = all && ok;
        d << "round trip " << fmt("%.1e", dev) << (ok ? " ok" : " BAD");
    }

    { // adjoint pairing of the layer degradation
        const LayerDegradation deg = make_layer_degradation(37, 29, 15, 12, 1.3);
        double worst = 0.0;
        for (int k = 0; k < 5; ++k) {
            Image x(37, 29), y(15, 12);
            for (double& v : x.data) v = nd(rng);
            for (double& v : y.data) v = nd(rng);
            const Image dx = degrade_layer(deg, x);
            const Image ay = degrade_layer_adjoint(deg, y);
            double lhs = 0.0, rhs = 0.0;
            for (std::size_t i = 0; i < dx.data.size(); ++i) lhs += dx.data[i] * y.data[i];
            for (std::size_t i = 0; i < x.data.size(); ++i) rhs += x.data[i] * ay.data[i];
            worst = std::max(worst, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
        }
        const bool ok = worst <= 1e-10;
        all = all && ok;
        d << "; adjoint " << fmt("%.1e", worst) << (ok ? " ok" : " BAD");
    }

    { // update direction against a finite-difference gradient
        const int hw = 23, hh = 19, lw = 11, lh = 9;
        const LayerDegradation deg = make_layer_degradation(hw, hh, lw, lh, 0.9);
        Image cur(hw, hh), init(hw, hh), i0(lw, lh), refimg(hw, hh);
        for (double& v : cur.data) v = ud(rng);
        for (double& v : init.data) v = ud(rng);
        for (double& v : i0.data) v = ud(rng);
        for (double& v : refimg.data) v = ud(rng);
        const ArField ar = learn_ar_field(cur, refimg, 6, 0.01, 4);
        RefineConfig rc;
        auto objective = [&](const Image& img) {
            const Image r = degrade_layer(deg, img);
            double f = 0.0;
            for (std::size_t i = 0; i < r.data.size(); ++i) {
                const double e = i0.data[i] - r.data[i];
                f += e * e;
            }
            const Image a = apply_ar(ar, img);
            for (std::size_t i = 0; i < img.data.size(); ++i) {
                const double e = img.data[i] - a.data[i];
                f += rc.alpha * e * e;
                const double b = img.data[i] - init.data[i];
                f += rc.beta * b * b;
            }
            return f;
        };
        const Image upd = refine_step_direction(cur, init, i0, deg, &ar, rc);
        double worst = 0.0;
        const double eps = 1e-4;
        for (int k = 0; k < 4; ++k) {
            Image dir(hw, hh);
            for (double& v : dir.data) v = nd(rng);
            Image plus = cur, minus = cur;
            for (std::size_t i = 0; i < cur.data.size(); ++i) {
                plus.data[i] += eps * dir.data[i];
                minus.data[i] -= eps * dir.data[i];
            }
            const double fd = (objective(plus) - objective(minus)) / (2.0 * eps);
            double dot = 0.0;
            for (std::size_t i = 0; i < cur.data.size(); ++i) dot += upd.data[i] * dir.data[i];
            const double analytic = -(2.0 / rc.tau) * dot;
            worst = std::max(worst, std::abs(fd - analytic) / std::max(1.0, std::abs(fd)));
        }
        const bool ok = worst <= 1e-5;
        all = all && ok;
        d << "; gradient " << fmt("%.1e", worst) << (ok ? " ok" : " BAD");
    }

    { // constant image end to end
        Image flat(30, 30);
        for (double& v : flat.data) v = 0.42;
        SrConfig cfg;
        cfg.mode = CodingMode::klrsc;
        cfg.k_dict = 10;
        cfg.k_nonlocal = 4;
        cfg.sc_iters = 60;
        cfg.solver_max_iter = 40;
        cfg.refine_iters = 25;
        const Image out = super_resolve(flat, cfg);
        double dev = 0.0;
        for (double v : out.data) dev = std::max(dev, std::abs(v - 0.42));
        const bool ok = out.width == 90 && out.height == 90 && dev <= 1e-9;
        all = all && ok;
        d << "; constant " << fmt("%.1e", dev) << (ok ? " ok" : " BAD");
    }

    { // quality metric identities
        Image a(32, 32);
        for (double& v : a.data) v = ud(rng);
        const bool ok = psnr(a, a) == 99.0 && ssim(a, a) == 1.0;
        all = all && ok;
        d << "; metric identities" << (ok ? " ok" : " BAD");
    }

    d << ", " << fmt("%.0f", t.secs()) << " s";
    report(8, "structural invariants", all, d.str());
}

void criterion_9() {
    Timer t;
    std::string detail;
    bool ok = false;
    try {
        const Image gt = center_crop(load_luma(asset("camera.png")), 120, 120);
        const Image lr = degrade(gt, 3.0);
        SrConfig cfg;
        cfg.mode = CodingMode::klrsc_ar;
        cfg.k_dict = 20;
        cfg.k_nonlocal = 8;
        cfg.sc_iters = 100;
        const Image a = super_resolve(lr, cfg);
        const Image b = super_resolve(lr, cfg);
        save_luma("accept_run1.png", a);
        save_luma("accept_run2.png", b);
        const std::vector<char> ba = read_bytes("accept_run1.png");
        const std::vector<char> bb = read_bytes("accept_run2.png");
        ok = !ba.empty() && ba == bb;
        std::ostringstream d;
        d << "two runs, " << ba.size() << " byte PNG, " << (ok ? "bit identical" : "MISMATCH")
          << ", " << fmt("%.0f", t.secs()) << " s";
        detail = d.str();
    } catch (const std::exception& e) {
        detail = std::string("run failed: ") + e.what();
    }
    report(9, "determinism", ok, detail);
}

} // namespace

int main() {
    criteria_1_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    criterion_9();
    std::printf("%s (%d failure%s)\n", g_failures == 0 ? "ALL CRITERIA PASS" : "CRITERIA FAILED",
                g_failures, g_failures == 1 ? "" : "s");
    return g_failures == 0 ? 0 : 1;
}
