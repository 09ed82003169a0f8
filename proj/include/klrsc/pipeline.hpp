#pragma once

#include "klrsc/recon.hpp"

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace klrsc {

/// Patch coding variants, weakest to strongest: plain sparse coding, the
/// low-rank split on linear features, the same split on kernel-mapped
/// features, and the kernel solver followed by autoregressive refinement.
enum class CodingMode { sc, lrsc, klrsc, klrsc_ar };

const char* mode_name(CodingMode mode);
CodingMode parse_mode(const std::string& name); // ConfigError on unknown names

struct SrConfig {
    double p = 3.0;  // total magnification
    double s = 1.25; // per-step magnification

    int n_layers = 4; // example pyramid depth
    int patch_size = 7;
    int overlap = 5;
    int k_dict = 60;     // atoms selected per patch
    int k_nonlocal = 20; // nonlocal neighbors per patch

    double lambda1 = 0.07;
    double lambda2 = 0.07;
    double rho = 1.5;
    double kernel_sigma = 1.0;
    double solver_tol = 1e-5;
    int solver_max_iter = 100;
    int sc_iters = 200;

    double blur_sigma = 1.6; // total degradation blur, spread across layers

    double tau = 0.5;  // refinement step size
    double alpha = 0.05;
    double beta = 0.01;
    double refine_tol = 1e-6;
    int refine_iters = 300;

    double ar_eta = 0.01; // ridge weight of the AR fit
    int ar_neighbors = 10;
    int ar_window = 10;

    double flat_eps = 1e-8;
    double bicubic_a = -0.5;
    CodingMode mode = CodingMode::klrsc_ar;
    int threads = 0; // 0 keeps the library default

    /// ConfigError naming the offending field.
    void validate() const;
};

/// Set one field by its config key. Throws ConfigError for unknown keys or
/// unparseable values; `where` prefixes the message (file:line, "--set", ...).
void set_config_value(SrConfig& cfg, const std::string& key, const std::string& value,
                      const std::string& where);

/// Flat `key = value` file, '#' starts a comment. Unknown keys are errors.
SrConfig parse_config_file(const std::string& path);

/// Apply one "key=value" override on top of an existing config.
void apply_override(SrConfig& cfg, const std::string& keyval);

/// Smallest n with s^n >= p (tolerant of boundary roundoff).
int num_magnifications(double p, double s);

/// Dimensions of the n upscaling layers: each is round(prev * s).
std::vector<std::pair<int, int>> layer_dim_chain(int w0, int h0, double s, int n);

struct LayerReport {
    int index = 0; // 1-based magnification step
    int width = 0, height = 0;
    int patches = 0;
    int flat = 0;
    int coded = 0;
    int fallbacks = 0; // solver failures recoded by plain sparse coding
    int converged = 0;
    double iterations_mean = 0.0;
    int iterations_max = 0;
    double feasibility_max = 0.0;
    int refine_iterations = 0;
    bool refine_diverged = false;
    double seconds = 0.0;
};

struct RunReport {
    std::string mode;
    double p = 0.0;
    int dict_atoms = 0;
    int out_width = 0, out_height = 0;
    double seconds = 0.0;
    std::vector<LayerReport> layers;
};

/// One JSON object per line: the layers in order, then a summary record.
void write_report_jsonl(std::ostream& os, const RunReport& report);

/// Magnify a [0,1] intensity plane by cfg.p. Values are not clamped; that is
/// the exporter's job.
Image super_resolve(const Image& i0, const SrConfig& cfg, RunReport* report = nullptr);

} // namespace klrsc
