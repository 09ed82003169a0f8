#include "klrsc/bench.hpp"
#include "klrsc/errors.hpp"
#include "klrsc/imageio.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace {

using namespace klrsc;

struct CommonArgs {
    std::string config;
    std::vector<std::string> sets;
    int threads = -1; // -1: leave the config value alone
    long long seed = 0;
};

void add_common(CLI::App* sub, CommonArgs& args) {
    sub->add_option("-c,--config", args.config, "Config file (key = value lines)");
    sub->add_option("--set", args.sets, "Override one config key (key=value, repeatable)")
        ->take_all();
    sub->add_option("--threads", args.threads, "Worker threads (0 = auto)");
    sub->add_option("--seed", args.seed, "Reserved; the pipeline is deterministic");
}

SrConfig make_config(const CommonArgs& args) {
    SrConfig cfg;
    std::string path = args.config;
    if (path.empty()) {
        const char* env = std::getenv("KLRSC_CONFIG");
        if (env != nullptr && *env != '\0') path = env;
    }
    if (!path.empty()) cfg = parse_config_file(path);
    for (const std::string& kv : args.sets) apply_override(cfg, kv);
    if (args.threads >= 0) cfg.threads = args.threads;
    cfg.validate();
    return cfg;
}

int cmd_upscale(const std::string& input, const std::string& output, const CommonArgs& args) {
    const SrConfig cfg = make_config(args);
    const RasterImage ras = load_raster(input);
    const LumaChroma in = raster_to_working(ras);

    RunReport report;
    LumaChroma out;
    out.y = super_resolve(in.y, cfg, &report);
    if (in.has_chroma) {
        out.cb = bicubic_resize(in.cb, out.y.width, out.y.height, cfg.bicubic_a);
        out.cr = bicubic_resize(in.cr, out.y.width, out.y.height, cfg.bicubic_a);
        out.has_chroma = true;
    }
    save_raster(output, working_to_raster(out));

    const std::string report_path = output + ".report.jsonl";
    std::ofstream rep(report_path);
    if (!rep) throw IoError("cannot open for writing: " + report_path);
    write_report_jsonl(rep, report);

    std::fprintf(stderr, "%s: %dx%d -> %dx%d (%s, p=%g), %.1f s, report %s\n", output.c_str(),
                 in.y.width, in.y.height, out.y.width, out.y.height, mode_name(cfg.mode), cfg.p,
                 report.seconds, report_path.c_str());
    return 0;
}

std::vector<std::string> list_images(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
    std::vector<std::string> paths;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::string ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if (ext == ".png" || ext == ".pgm" || ext == ".ppm")
            paths.push_back(entry.path().string());
    }
    std::sort(paths.begin(), paths.end());
    if (paths.empty()) throw IoError("no images (.png/.pgm/.ppm) in " + dir);
    return paths;
}

std::vector<CodingMode> parse_modes(const std::string& list) {
    std::vector<CodingMode> modes;
    std::size_t start = 0;
    while (start <= list.size()) {
        const auto comma = list.find(',', start);
        const std::string tok =
            list.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        if (!tok.empty()) modes.push_back(parse_mode(tok));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    if (modes.empty()) throw ConfigError("--modes lists no modes");
    return modes;
}

int cmd_bench(const std::string& dir, const std::string& modes_arg, const std::string& csv_path,
              const CommonArgs& args) {
    const SrConfig cfg = make_config(args);
    const std::vector<CodingMode> modes = parse_modes(modes_arg);
    const BenchReport report = run_benchmark(list_images(dir), cfg, modes);
    if (report.rows.empty()) throw PipelineError("benchmark produced no rows");
    if (!csv_path.empty()) {
        std::ofstream os(csv_path);
        if (!os) throw IoError("cannot open for writing: " + csv_path);
        write_benchmark_csv(os, report);
    }
    write_benchmark_table(std::cout, report);
    return 0;
}

int cmd_scn(const std::string& input, const std::string& csv_path, const CommonArgs& args) {
    const SrConfig cfg = make_config(args);
    const Image gt = load_luma(input);
    const ScnResult res = scn_study(gt, cfg);
    if (res.sc.empty()) throw PipelineError("no usable patch pairs in " + input);

    if (!csv_path.empty()) {
        std::ofstream os(csv_path);
        if (!os) throw IoError("cannot open for writing: " + csv_path);
        os << "mode,scn\n";
        for (double v : res.sc) os << "SC," << v << '\n';
        for (double v : res.lrsc) os << "LRSC," << v << '\n';
        for (double v : res.klrsc) os << "KLRSC," << v << '\n';
    }

    auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    };
    std::printf("mode,samples,median,mean\n");
    std::printf("SC,%zu,%.6f,%.6f\n", res.sc.size(), median(res.sc), mean(res.sc));
    std::printf("LRSC,%zu,%.6f,%.6f\n", res.lrsc.size(), median(res.lrsc), mean(res.lrsc));
    std::printf("KLRSC,%zu,%.6f,%.6f\n", res.klrsc.size(), median(res.klrsc), mean(res.klrsc));
    return 0;
}

int cmd_nucnorm(const std::string& input, const std::string& csv_path, const CommonArgs& args) {
    const SrConfig cfg = make_config(args);
    const Image img = load_luma(input);
    const std::vector<double> values = nuclear_norm_study(img, cfg);
    if (values.empty()) throw PipelineError("no non-flat features in " + input);

    if (!csv_path.empty()) {
        std::ofstream os(csv_path);
        if (!os) throw IoError("cannot open for writing: " + csv_path);
        os << "nuclear_norm\n";
        for (double v : values) os << v << '\n';
    }

    const int max_cols = cfg.k_nonlocal + 1;
    std::vector<long> bins(static_cast<std::size_t>(max_cols), 0);
    long below20 = 0;
    for (double v : values) {
        int b = static_cast<int>(v);
        b = std::clamp(b, 0, max_cols - 1);
        ++bins[static_cast<std::size_t>(b)];
        if (v < 20.0) ++below20;
    }
    std::printf("bin_lo,bin_hi,count\n");
    for (int b = 0; b < max_cols; ++b)
        std::printf("%d,%d,%ld\n", b, b + 1, bins[static_cast<std::size_t>(b)]);
    std::fprintf(stderr, "%zu features, max %d columns, %.1f%% below 20\n", values.size(),
                 max_cols, 100.0 * static_cast<double>(below20) / values.size());
    return 0;
}

int cmd_dict_dump(const std::string& input, const std::string& output, const CommonArgs& args) {
    const SrConfig cfg = make_config(args);
    const Image img = load_luma(input);
    const double var = cfg.blur_sigma * cfg.blur_sigma;
    PyramidPair pyr =
        build_pyramids(img, cfg.n_layers, cfg.s, var, cfg.p, cfg.patch_size, cfg.bicubic_a);
    const SelfDictionary dict = build_dictionary(pyr, cfg.patch_size, cfg.overlap, cfg.flat_eps);
    save_dictionary(output, dict);
    std::printf("atoms,feature_dim,pixel_dim,patch_size\n%d,%d,%d,%d\n", dict.count(),
                static_cast<int>(dict.learn.rows()), static_cast<int>(dict.recon.rows()),
                dict.patch_size);
    std::fprintf(stderr, "wrote %d atoms to %s\n", dict.count(), output.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Self-example super-resolution by kernel low-rank sparse coding"};
    app.require_subcommand(1);

    CommonArgs common;

    std::string up_in, up_out;
    CLI::App* up = app.add_subcommand("upscale", "Magnify one image");
    up->add_option("-i,--input", up_in, "Input image (PNG/PGM/PPM)")->required();
    up->add_option("-o,--output", up_out, "Output image path")->required();
    add_common(up, common);

    std::string bench_dir, bench_modes = "SC,LRSC,KLRSC,KLRSC+AR", bench_csv;
    CLI::App* bench = app.add_subcommand("bench", "Degrade-and-restore benchmark over a directory");
    bench->add_option("-d,--dir", bench_dir, "Directory of ground-truth images")->required();
    bench->add_option("--modes", bench_modes, "Comma-separated modes (default all four)");
    bench->add_option("--csv", bench_csv, "Also write rows to this CSV file");
    add_common(bench, common);

    std::string scn_in, scn_csv;
    CLI::App* scn = app.add_subcommand("scn", "Coding-noise stability study on one image");
    scn->add_option("-i,--input", scn_in, "Ground-truth image")->required();
    scn->add_option("--csv", scn_csv, "Also write raw samples to this CSV file");
    add_common(scn, common);

    std::string nuc_in, nuc_csv;
    CLI::App* nuc = app.add_subcommand("nucnorm", "Nuclear-norm histogram of nonlocal groups");
    nuc->add_option("-i,--input", nuc_in, "Input image")->required();
    nuc->add_option("--csv", nuc_csv, "Also write raw values to this CSV file");
    add_common(nuc, common);

    std::string dd_in, dd_out;
    CLI::App* dd = app.add_subcommand("dict-dump", "Build and serialize the example dictionary");
    dd->add_option("-i,--input", dd_in, "Input image")->required();
    dd->add_option("-o,--output", dd_out, "Dictionary file path")->required();
    add_common(dd, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (up->parsed()) return cmd_upscale(up_in, up_out, common);
        if (bench->parsed()) return cmd_bench(bench_dir, bench_modes, bench_csv, common);
        if (scn->parsed()) return cmd_scn(scn_in, scn_csv, common);
        if (nuc->parsed()) return cmd_nucnorm(nuc_in, nuc_csv, common);
        if (dd->parsed()) return cmd_dict_dump(dd_in, dd_out, common);
    } catch (const IoError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 0;
}
