#include "klrsc/pipeline.hpp"

#include "klrsc/errors.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace klrsc {

namespace {

std::string trim(const std::string& s) {
    const char* ws = " \t\r\n";
    const auto a = s.find_first_not_of(ws);
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(ws);
    return s.substr(a, b - a + 1);
}

[[noreturn]] void bad_field(const std::string& field, const std::string& need, double got) {
    std::ostringstream os;
    os << field << " must " << need << " (got " << got << ")";
    throw ConfigError(os.str());
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace

const char* mode_name(CodingMode mode) {
    switch (mode) {
    case CodingMode::sc: return "SC";
    case CodingMode::lrsc: return "LRSC";
    case CodingMode::klrsc: return "KLRSC";
    case CodingMode::klrsc_ar: return "KLRSC+AR";
    }
    return "?";
}

CodingMode parse_mode(const std::string& name) {
    if (name == "SC") return CodingMode::sc;
    if (name == "LRSC") return CodingMode::lrsc;
    if (name == "KLRSC") return CodingMode::klrsc;
    if (name == "KLRSC+AR") return CodingMode::klrsc_ar;
    throw ConfigError("unknown mode '" + name + "' (expected SC, LRSC, KLRSC, KLRSC+AR)");
}

void SrConfig::validate() const {
    if (!(p > 1.0)) bad_field("p", "exceed 1", p);
    if (!(s > 1.0)) bad_field("s", "exceed 1", s);
    if (n_layers < 0) bad_field("n_layers", "be non-negative", n_layers);
    if (patch_size < 2) bad_field("patch_size", "be at least 2", patch_size);
    if (overlap < 0 || overlap >= patch_size)
        bad_field("overlap", "lie in [0, patch_size)", overlap);
    if (k_dict < 1) bad_field("k_dict", "be at least 1", k_dict);
    if (k_nonlocal < 0) bad_field("k_nonlocal", "be non-negative", k_nonlocal);
    if (lambda1 < 0.0) bad_field("lambda1", "be non-negative", lambda1);
    if (lambda2 < 0.0) bad_field("lambda2", "be non-negative", lambda2);
    if (!(rho > 1.0)) bad_field("rho", "exceed 1", rho);
    if (!(kernel_sigma > 0.0)) bad_field("kernel_sigma", "be positive", kernel_sigma);
    if (!(solver_tol > 0.0)) bad_field("solver_tol", "be positive", solver_tol);
    if (solver_max_iter < 1) bad_field("solver_max_iter", "be at least 1", solver_max_iter);
    if (sc_iters < 1) bad_field("sc_iters", "be at least 1", sc_iters);
    if (!(blur_sigma > 0.0)) bad_field("blur_sigma", "be positive", blur_sigma);
    if (!(tau > 0.0)) bad_field("tau", "be positive", tau);
    if (alpha < 0.0) bad_field("alpha", "be non-negative", alpha);
    if (beta < 0.0) bad_field("beta", "be non-negative", beta);
    if (refine_tol < 0.0) bad_field("refine_tol", "be non-negative", refine_tol);
    if (refine_iters < 1) bad_field("refine_iters", "be at least 1", refine_iters);
    if (!(ar_eta > 0.0)) bad_field("ar_eta", "be positive", ar_eta);
    if (ar_neighbors < 1) bad_field("ar_neighbors", "be at least 1", ar_neighbors);
    if (ar_window < 1) bad_field("ar_window", "be at least 1", ar_window);
    if (!(flat_eps > 0.0)) bad_field("flat_eps", "be positive", flat_eps);
    if (bicubic_a < -3.0 || bicubic_a > 0.0) bad_field("bicubic_a", "lie in [-3, 0]", bicubic_a);
    if (threads < 0) bad_field("threads", "be non-negative", threads);
}

void set_config_value(SrConfig& cfg, const std::string& key, const std::string& value,
                      const std::string& where) {
    auto bad = [&]() {
        throw ConfigError(where + ": invalid value '" + value + "' for key '" + key + "'");
    };
    auto as_double = [&]() -> double {
        try {
            std::size_t pos = 0;
            const double v = std::stod(value, &pos);
            if (pos != value.size()) bad();
            return v;
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception&) {
            bad();
        }
        return 0.0;
    };
    auto as_int = [&]() -> int {
        try {
            std::size_t pos = 0;
            const long v = std::stol(value, &pos);
            if (pos != value.size() || v < -2147483647L || v > 2147483647L) bad();
            return static_cast<int>(v);
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception&) {
            bad();
        }
        return 0;
    };

    if (key == "p") cfg.p = as_double();
    else if (key == "s") cfg.s = as_double();
    else if (key == "n_layers") cfg.n_layers = as_int();
    else if (key == "patch_size") cfg.patch_size = as_int();
    else if (key == "overlap") cfg.overlap = as_int();
    else if (key == "k_dict") cfg.k_dict = as_int();
    else if (key == "k_nonlocal") cfg.k_nonlocal = as_int();
    else if (key == "lambda1") cfg.lambda1 = as_double();
    else if (key == "lambda2") cfg.lambda2 = as_double();
    else if (key == "rho") cfg.rho = as_double();
    else if (key == "kernel_sigma") cfg.kernel_sigma = as_double();
    else if (key == "solver_tol") cfg.solver_tol = as_double();
    else if (key == "solver_max_iter") cfg.solver_max_iter = as_int();
    else if (key == "sc_iters") cfg.sc_iters = as_int();
    else if (key == "blur_sigma") cfg.blur_sigma = as_double();
    else if (key == "tau") cfg.tau = as_double();
    else if (key == "alpha") cfg.alpha = as_double();
    else if (key == "beta") cfg.beta = as_double();
    else if (key == "refine_tol") cfg.refine_tol = as_double();
    else if (key == "refine_iters") cfg.refine_iters = as_int();
    else if (key == "ar_eta") cfg.ar_eta = as_double();
    else if (key == "ar_neighbors") cfg.ar_neighbors = as_int();
    else if (key == "ar_window") cfg.ar_window = as_int();
    else if (key == "flat_eps") cfg.flat_eps = as_double();
    else if (key == "bicubic_a") cfg.bicubic_a = as_double();
    else if (key == "threads") cfg.threads = as_int();
    else if (key == "mode") {
        try {
            cfg.mode = parse_mode(value);
        } catch (const ConfigError& e) {
            throw ConfigError(where + ": " + e.what());
        }
    } else {
        throw ConfigError(where + ": unknown key '" + key + "'");
    }
}

SrConfig parse_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config: " + path);
    SrConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::string where = path + ":" + std::to_string(lineno);
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
        set_config_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)), where);
    }
    return cfg;
}

void apply_override(SrConfig& cfg, const std::string& keyval) {
    const auto eq = keyval.find('=');
    if (eq == std::string::npos)
        throw ConfigError("--set expects key=value (got '" + keyval + "')");
    set_config_value(cfg, trim(keyval.substr(0, eq)), trim(keyval.substr(eq + 1)), "--set");
}

int num_magnifications(double p, double s) {
    if (!(p > 1.0)) bad_field("p", "exceed 1", p);
    if (!(s > 1.0)) bad_field("s", "exceed 1", s);
    double scale = 1.0;
    int n = 0;
    while (scale * (1.0 + 1e-12) < p) {
        scale *= s;
        ++n;
    }
    return n;
}

std::vector<std::pair<int, int>> layer_dim_chain(int w0, int h0, double s, int n) {
    if (w0 < 1 || h0 < 1) throw std::invalid_argument("layer_dim_chain: bad start dimensions");
    if (!(s > 1.0)) bad_field("s", "exceed 1", s);
    std::vector<std::pair<int, int>> out;
    out.reserve(static_cast<std::size_t>(std::max(0, n)));
    int w = w0, h = h0;
    for (int i = 0; i < n; ++i) {
        w = scaled_dim(w, s);
        h = scaled_dim(h, s);
        out.emplace_back(w, h);
    }
    return out;
}

void write_report_jsonl(std::ostream& os, const RunReport& report) {
    using nlohmann::ordered_json;
    for (const LayerReport& L : report.layers) {
        ordered_json j{
            {"record", "layer"},
            {"index", L.index},
            {"width", L.width},
            {"height", L.height},
            {"patches", L.patches},
            {"flat", L.flat},
            {"coded", L.coded},
            {"fallbacks", L.fallbacks},
            {"converged", L.converged},
            {"iterations_mean", L.iterations_mean},
            {"iterations_max", L.iterations_max},
            {"feasibility_max", L.feasibility_max},
            {"refine_iterations", L.refine_iterations},
            {"refine_diverged", L.refine_diverged},
            {"seconds", L.seconds},
        };
        os << j.dump() << '\n';
    }
    ordered_json s{
        {"record", "summary"},
        {"mode", report.mode},
        {"p", report.p},
        {"layers", report.layers.size()},
        {"dictionary_atoms", report.dict_atoms},
        {"width", report.out_width},
        {"height", report.out_height},
        {"seconds", report.seconds},
    };
    os << s.dump() << '\n';
}

namespace {

// Linear Gram of the selected atoms, gathered from the precomputed full Gram
// when one fits in memory.
Eigen::MatrixXd sub_gram(const CodingProblem& cp, const Eigen::MatrixXd* atom_gram) {
    if (atom_gram == nullptr) return cp.yd.transpose() * cp.yd;
    const int kd = static_cast<int>(cp.atom_idx.size());
    Eigen::MatrixXd g(kd, kd);
    for (int j = 0; j < kd; ++j)
        for (int i = 0; i < kd; ++i) g(i, j) = (*atom_gram)(cp.atom_idx[i], cp.atom_idx[j]);
    return g;
}

} // namespace

Image super_resolve(const Image& i0, const SrConfig& cfg, RunReport* report) {
    cfg.validate();
    if (i0.empty()) throw std::invalid_argument("super_resolve: empty input");
    if (i0.width < cfg.patch_size || i0.height < cfg.patch_size)
        throw PipelineError("super_resolve: input smaller than one patch");
    if (cfg.threads > 0) Eigen::setNbThreads(cfg.threads);

    const auto t_total = std::chrono::steady_clock::now();
    const double var_total = cfg.blur_sigma * cfg.blur_sigma;

    PyramidPair pyr = build_pyramids(i0, cfg.n_layers, cfg.s, var_total, cfg.p, cfg.patch_size,
                                     cfg.bicubic_a);
    SelfDictionary dict = build_dictionary(pyr, cfg.patch_size, cfg.overlap, cfg.flat_eps);

    // Full atom Gram: one big product now saves one small one per patch.
    // Skipped for huge dictionaries (quadratic memory).
    Eigen::MatrixXd atom_gram;
    const Eigen::MatrixXd* gram_ptr = nullptr;
    if (dict.count() > 0 && dict.count() <= 6000) {
        atom_gram.noalias() = dict.learn.transpose() * dict.learn;
        gram_ptr = &atom_gram;
    }

    SolverConfig scfg;
    scfg.lambda1 = cfg.lambda1;
    scfg.lambda2 = cfg.lambda2;
    scfg.rho = cfg.rho;
    scfg.kernel_sigma = cfg.kernel_sigma;
    scfg.tol = cfg.solver_tol;
    scfg.max_iter = cfg.solver_max_iter;
    scfg.sc_iters = cfg.sc_iters;

    const int n_mag = num_magnifications(cfg.p, cfg.s);
    const auto dims = layer_dim_chain(i0.width, i0.height, cfg.s, n_mag);

    if (report) {
        *report = RunReport{};
        report->mode = mode_name(cfg.mode);
        report->p = cfg.p;
        report->dict_atoms = dict.count();
    }

    Image cur = i0;
    for (int i = 1; i <= n_mag; ++i) {
        const auto t_layer = std::chrono::steady_clock::now();
        const auto [w, h] = dims[static_cast<std::size_t>(i - 1)];

        Image up = bicubic_resize(cur, w, h, cfg.bicubic_a);
        LayerFeatures lf = layer_features(up, cfg.patch_size, cfg.overlap, cfg.flat_eps);
        std::vector<Patch> out_patches = lf.patches; // flat locations keep these pixels

        LayerReport lr;
        lr.index = i;
        lr.width = w;
        lr.height = h;
        lr.patches = static_cast<int>(lf.patches.size());
        lr.flat = lr.patches - static_cast<int>(lf.valid.size());

        if (!lf.valid.empty() && dict.count() == 0) {
            std::fprintf(stderr, "note: empty example dictionary, layer %d keeps the "
                                 "interpolated patches\n", i);
        } else if (!lf.valid.empty()) {
            const auto nonlocal = knn_nonlocal(lf.f, lf.valid, cfg.k_nonlocal);
            const auto atoms = knn_dictionary(dict.learn, lf.f, lf.valid, cfg.k_dict);
            long long iter_sum = 0;
            for (std::size_t t = 0; t < lf.valid.size(); ++t) {
                const int j = lf.valid[t];
                CodingProblem cp = assemble_problem(lf, j, nonlocal[t], dict, atoms[t]);
                Eigen::VectorXd wgt;
                SolveDiagnostics diag;
                try {
                    if (cfg.mode == CodingMode::sc) {
                        const Eigen::MatrixXd g = sub_gram(cp, gram_ptr);
                        wgt = sc_code_all(cp.ya.col(0), cp.yd, cfg.lambda1, cfg.sc_iters, &g)
                                  .col(0);
                        diag.converged = true;
                    } else if (cfg.mode == CodingMode::lrsc) {
                        wgt = lrsc_solve(cp, scfg, &diag, gram_ptr);
                    } else {
                        wgt = klrsc_solve(cp, scfg, &diag, gram_ptr);
                    }
                } catch (const PipelineError&) {
                    wgt = sc_code(cp.ya.col(0), cp.yd, cfg.lambda1, cfg.sc_iters);
                    ++lr.fallbacks;
                    diag = SolveDiagnostics{};
                }
                ++lr.coded;
                if (diag.converged) ++lr.converged;
                iter_sum += diag.iterations;
                lr.iterations_max = std::max(lr.iterations_max, diag.iterations);
                lr.feasibility_max = std::max(lr.feasibility_max, diag.feasibility);
                out_patches[static_cast<std::size_t>(j)] =
                    reconstruct_patch(cp, wgt, lf.patches[static_cast<std::size_t>(j)].row,
                                      lf.patches[static_cast<std::size_t>(j)].col);
            }
            if (lr.coded > 0) lr.iterations_mean = static_cast<double>(iter_sum) / lr.coded;
        }

        Image merged = merge_patches(out_patches, w, h);

        const double var_i = blur_variance(i, var_total, cfg.s, cfg.p);
        LayerDegradation deg =
            make_layer_degradation(w, h, i0.width, i0.height, var_i, cfg.bicubic_a);
        RefineConfig rcfg;
        rcfg.tau = cfg.tau;
        rcfg.tol = cfg.refine_tol;
        rcfg.max_iter = cfg.refine_iters;
        RefineResult rres;
        if (cfg.mode == CodingMode::klrsc_ar) {
            rcfg.alpha = cfg.alpha;
            rcfg.beta = cfg.beta;
            // Neighbors come from the previous reconstruction; the first step
            // has none and searches the interpolated layer itself.
            const Image& ref = (i == 1) ? up : cur;
            ArField ar = learn_ar_field(merged, ref, cfg.ar_neighbors, cfg.ar_eta, cfg.ar_window);
            rres = refine_layer(merged, i0, deg, &ar, rcfg);
        } else {
            rcfg.alpha = 0.0;
            rcfg.beta = 0.0;
            rres = refine_layer(merged, i0, deg, nullptr, rcfg);
        }
        cur = std::move(rres.image);

        lr.refine_iterations = rres.iterations;
        lr.refine_diverged = rres.diverged;
        lr.seconds = seconds_since(t_layer);
        std::fprintf(stderr,
                     "layer %d/%d %dx%d: %d patches, %d flat, %d fallbacks, refine %d%s, %.1f s\n",
                     i, n_mag, w, h, lr.patches, lr.flat, lr.fallbacks, lr.refine_iterations,
                     lr.refine_diverged ? " (diverged)" : "", lr.seconds);
        if (report) report->layers.push_back(lr);
    }

    const int tw = scaled_dim(i0.width, cfg.p);
    const int th = scaled_dim(i0.height, cfg.p);
    if (cur.width != tw || cur.height != th) cur = bicubic_resize(cur, tw, th, cfg.bicubic_a);

    if (report) {
        report->out_width = cur.width;
        report->out_height = cur.height;
        report->seconds = seconds_since(t_total);
    }
    return cur;
}

} // namespace klrsc
