// rspim: split possibilistic post-selection inference for sparse linear models.
// Subcommands: simulate (Monte Carlo module presets), analyze (CSV data to
// intervals), contour (plausibility contour grids), calibrate (shrink-factor
// search). All randomness flows from --seed; outputs are byte-identical across
// reruns and thread counts (manifest timestamps aside).

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rspim/io.hpp"

namespace fs = std::filesystem;
using namespace rspim;

namespace {

constexpr const char* kVersion = "0.1.0";

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitNotAvailable = 4;

// Tracks files written by a command; anything already written is removed if
// the command fails partway.
struct OutputTracker {
    fs::path dir;
    std::vector<std::string> names;
    bool keep = false;

    explicit OutputTracker(const std::string& out_dir) : dir(out_dir) {
        fs::create_directories(dir);
    }
    fs::path path(const std::string& name) {
        names.push_back(name);
        return dir / name;
    }
    ~OutputTracker() {
        if (keep) return;
        for (const auto& n : names) {
            std::error_code ec;
            fs::remove(dir / n, ec);
        }
    }
};

std::string timestamp_utc() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

void write_manifest(OutputTracker& out, const std::string& command, std::uint64_t seed,
                    const ordered_json& config) {
    ordered_json m;
    m["command"] = command;
    m["version"] = kVersion;
    m["seed"] = seed;
    m["config"] = config;
    m["outputs"] = out.names;   // includes manifest.json itself, added by path()
    m["timestamp"] = timestamp_utc();
    write_json_file(out.path("manifest.json").string(), m);
}

std::vector<double> parse_grid_spec(const std::string& spec, bool count_form) {
    double lo, hi, third;
    char c1, c2;
    std::istringstream ss(spec);
    if (!(ss >> lo >> c1 >> hi >> c2 >> third) || c1 != ':' || c2 != ':' || !ss.eof())
        throw std::invalid_argument("bad grid spec '" + spec + "', expected lo:hi:" +
                                    (count_form ? std::string("npts") : std::string("step")));
    std::vector<double> grid;
    if (count_form) {
        const int npts = static_cast<int>(third);
        if (npts < 2 || hi <= lo) throw std::invalid_argument("grid needs npts >= 2 and hi > lo");
        for (int i = 0; i < npts; ++i) grid.push_back(lo + (hi - lo) * i / (npts - 1));
    } else {
        if (third <= 0.0 || hi < lo) throw std::invalid_argument("grid needs step > 0 and hi >= lo");
        for (double v = lo; v <= hi + 1e-12; v += third) grid.push_back(v);
    }
    return grid;
}

struct AnalyzeArgs {
    std::string x_path, y_path, out_dir = ".";
    std::string selector = "lasso-stability";
    std::string method = "single";
    double alpha = 0.1;
    int splits = 1;
    double frac_inf = 0.5;
    double shrink_c = 1.0;
    bool carved = false;
    std::uint64_t seed = 0;
    int threads = 0;
    int wb_boot = 999;
};

Dataset load_dataset(const std::string& x_path, const std::string& y_path) {
    auto [x, names] = read_matrix_csv(x_path);
    Dataset d;
    d.x = std::move(x);
    d.y = read_vector_csv(y_path);
    d.feature_names = std::move(names);
    d.validate();
    return d;
}

MultiSplitConfig analyze_split_config(const AnalyzeArgs& a, ordered_json* snapshot) {
    MultiSplitConfig cfg;
    cfg.frac_inf = a.frac_inf;
    cfg.selector.kind = selector_from_string(a.selector);
    if (cfg.selector.kind == SelectorKind::random_k && cfg.selector.random_k <= 0)
        cfg.selector.random_k = 5;
    cfg.carved = a.carved;
    if (snapshot) {
        (*snapshot)["x"] = a.x_path;
        (*snapshot)["y"] = a.y_path;
        (*snapshot)["alpha"] = a.alpha;
        (*snapshot)["splits"] = a.splits;
        (*snapshot)["selector"] = a.selector;
        (*snapshot)["method"] = a.method;
        (*snapshot)["frac_inf"] = a.frac_inf;
        (*snapshot)["shrink_c"] = a.shrink_c;
        (*snapshot)["carved"] = a.carved;
        (*snapshot)["wild_boot_n"] = a.wb_boot;
    }
    return cfg;
}

int cmd_simulate(const std::string& module, const std::string& config_path, int reps, double alpha,
                 const std::string& method, double shrink_c, std::uint64_t seed,
                 const std::string& out_dir, int threads) {
    ExperimentConfig cfg = module_preset(module.empty() ? 'B' : module[0]);
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw std::invalid_argument("cannot open " + config_path);
        ordered_json j = ordered_json::parse(in);
        from_json(j, cfg);
    }
    if (reps > 0) cfg.replications = reps;
    if (alpha > 0.0) cfg.alpha = alpha;
    if (!method.empty()) cfg.method = method_from_string(method);
    if (shrink_c > 0.0) cfg.shrink_c = shrink_c;
    cfg.master_seed = seed;
    cfg.threads = resolve_threads(threads);

    ExperimentResult res = run_experiment(cfg);

    OutputTracker out(out_dir);
    write_json_file(out.path("report.json").string(), to_json(res.report));
    write_records_csv(out.path("replications.csv").string(), res.records);
    write_manifest(out, "simulate", seed, to_json(cfg));
    out.keep = true;
    std::cout << "simulate: " << res.records.size() << " coordinate records, "
              << res.no_selection_reps << " empty-selection replications -> " << out.dir.string() << "\n";
    return kExitOk;
}

int cmd_analyze(const AnalyzeArgs& a) {
    Dataset d = load_dataset(a.x_path, a.y_path);
    ordered_json snapshot;
    MultiSplitConfig cfg = analyze_split_config(a, &snapshot);
    MultiSplitResult msr = run_splits(d, a.splits, cfg, a.seed, resolve_threads(a.threads));
    const MethodKind method = method_from_string(a.method);

    ordered_json doc;
    doc["method"] = a.method;
    doc["alpha"] = a.alpha;
    doc["splits"] = a.splits;
    doc["selector"] = a.selector;
    doc["carved"] = a.carved;
    doc["shrink_c"] = a.shrink_c;
    doc["seed"] = a.seed;
    doc["coordinates"] = ordered_json::array();

    std::vector<int> coords;
    for (const auto& run : msr.per_split)
        for (const auto& [j, cf] : run.coord_fits) coords.push_back(j);
    std::sort(coords.begin(), coords.end());
    coords.erase(std::unique(coords.begin(), coords.end()), coords.end());

    const SplitRun& first = msr.per_split.front();
    for (int j : coords) {
        ordered_json cj;
        cj["coord"] = j + 1;
        if (!d.feature_names.empty()) cj["name"] = d.feature_names[static_cast<std::size_t>(j)];
        cj["selection_frequency"] = selection_frequency(msr, j);
        std::vector<Interval> segs;
        if (method == MethodKind::rspim_union) {
            auto u = union_interval(msr, j, a.alpha);
            segs = *u;
            double est = 0.0;
            int cnt = 0;
            for (const auto& run : msr.per_split) {
                auto it = run.coord_fits.find(j);
                if (it != run.coord_fits.end()) { est += it->second.estimate; ++cnt; }
            }
            cj["estimate"] = est / cnt;
        } else {
            auto it = first.coord_fits.find(j);
            if (it == first.coord_fits.end()) continue;   // single-split methods report split 1
            cj["estimate"] = it->second.estimate;
            if (method == MethodKind::rspim_single) {
                PivotSource src = PivotSource::exact_t_pivot(it->second.estimate, it->second.se, first.dof);
                src.stat_scale = a.shrink_c;
                segs = {level_set_interval(src, a.alpha)};
            } else if (method == MethodKind::rspim_wildboot) {
                const Eigen::MatrixXd x_inf = subset_rows(d.x, first.plan.inf_idx);
                const Eigen::VectorXd y_inf = subset_vector(d.y, first.plan.inf_idx);
                RefitFit fit = ols_refit(x_inf, y_inf, first.support);
                WildBootConfig wb;
                wb.n_boot = a.wb_boot;
                wb.seed = derive_seed(derive_seed(a.seed, 0xB00F), static_cast<std::uint64_t>(j));
                WildBootResult boot = wild_boot_t_ecdf(fit, x_inf, y_inf, j, wb);
                PivotSource src = PivotSource::empirical_pivot(boot.ecdf, it->second.estimate, it->second.se);
                src.stat_scale = a.shrink_c;
                segs = {level_set_interval(src, a.alpha)};
            } else {
                throw std::invalid_argument("analyze supports methods single, union, wildboot");
            }
        }
        cj["intervals"] = ordered_json::array();
        for (const auto& s : segs)
            if (!s.none) cj["intervals"].push_back({s.lo, s.hi});
        doc["coordinates"].push_back(std::move(cj));
    }

    OutputTracker out(a.out_dir);
    write_json_file(out.path("intervals.json").string(), doc);
    write_manifest(out, "analyze", a.seed, snapshot);
    out.keep = true;
    std::cout << "analyze: " << coords.size() << " coordinates selected across " << a.splits
              << " splits -> " << out.dir.string() << "\n";
    return kExitOk;
}

int cmd_contour(const AnalyzeArgs& a, int coord_1based, const std::string& grid_spec) {
    Dataset d = load_dataset(a.x_path, a.y_path);
    ordered_json snapshot;
    MultiSplitConfig cfg = analyze_split_config(a, &snapshot);
    snapshot["coord"] = coord_1based;
    snapshot["grid"] = grid_spec;
    if (coord_1based < 1 || coord_1based > d.p())
        throw std::invalid_argument("contour: coordinate out of range");
    const int j = coord_1based - 1;
    const std::vector<double> grid = parse_grid_spec(grid_spec, true);

    MultiSplitResult msr = run_splits(d, a.splits, cfg, a.seed, resolve_threads(a.threads));
    if (!maxitive_contour(msr, j, grid.front()))
        throw NotAvailableError("contour: coordinate " + std::to_string(coord_1based) +
                                " was never selected");

    OutputTracker out(a.out_dir);
    {
        std::ofstream f(out.path("contour.csv"));
        if (!f) throw std::runtime_error("cannot write contour.csv");
        f << "theta,plausibility,series\n";
        for (std::size_t r = 0; r < msr.per_split.size(); ++r) {
            const auto& run = msr.per_split[r];
            auto it = run.coord_fits.find(j);
            if (it == run.coord_fits.end()) continue;
            for (double theta : grid)
                f << format_double(theta) << ','
                  << format_double(split_contour_value(run, it->second, theta)) << ",split_" << (r + 1)
                  << '\n';
        }
        for (double theta : grid)
            f << format_double(theta) << ',' << format_double(*maxitive_contour(msr, j, theta))
              << ",max\n";
    }
    write_manifest(out, "contour", a.seed, snapshot);
    out.keep = true;
    std::cout << "contour: coordinate " << coord_1based << " over " << grid.size()
              << " grid points -> " << out.dir.string() << "\n";
    return kExitOk;
}

int cmd_calibrate(const std::string& module, const std::string& config_path, int reps,
                  const std::string& method, const std::string& c_grid_spec, double target,
                  std::uint64_t seed, const std::string& out_dir, int threads) {
    ExperimentConfig cfg = module_preset(module.empty() ? 'D' : module[0]);
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw std::invalid_argument("cannot open " + config_path);
        from_json(ordered_json::parse(in), cfg);
    }
    if (reps > 0) cfg.replications = reps;
    if (!method.empty()) cfg.method = method_from_string(method);
    cfg.master_seed = seed;
    cfg.threads = resolve_threads(threads);
    const std::vector<double> c_grid = parse_grid_spec(c_grid_spec, false);
    const double tgt = target > 0.0 ? target : 1.0 - cfg.alpha;

    ExperimentResult res = run_experiment(cfg);
    CalibrationResult cal = calibrate_c(res.records, cfg.alpha, c_grid, tgt);

    ordered_json doc;
    doc["method"] = method_name(cfg.method);
    doc["target"] = tgt;
    doc["c_star"] = cal.c_star;
    doc["coverage_at_c_star"] = cal.coverage_at_c_star;
    doc["curve"] = ordered_json::array();
    for (const auto& [c, cov] : cal.curve) doc["curve"].push_back({c, cov});

    OutputTracker out(out_dir);
    write_json_file(out.path("calibration.json").string(), doc);
    write_manifest(out, "calibrate", seed, to_json(cfg));
    out.keep = true;
    std::cout << "calibrate: c_star = " << cal.c_star << " (coverage "
              << cal.coverage_at_c_star << ") -> " << out.dir.string() << "\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Regularized split possibilistic inference for high-dimensional regression"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    // simulate
    std::string sim_module, sim_config, sim_method, sim_out = ".";
    int sim_reps = 0, sim_threads = 0;
    double sim_alpha = 0.0, sim_c = 0.0;
    std::uint64_t sim_seed = 0;
    auto* sim = app.add_subcommand("simulate", "Run a Monte Carlo module preset");
    sim->add_option("--module", sim_module, "Module preset: A, B, C, D or E")
        ->check(CLI::IsMember({"A", "B", "C", "D", "E"}));
    sim->add_option("--config", sim_config, "JSON experiment config (overrides preset)");
    sim->add_option("--reps", sim_reps, "Replication count override");
    sim->add_option("--alpha", sim_alpha, "Miscoverage level override");
    sim->add_option("--method", sim_method, "Method override");
    sim->add_option("--c", sim_c, "Shrink factor (default 1)");
    sim->add_option("--seed", sim_seed, "Master seed")->required();
    sim->add_option("--out", sim_out, "Output directory");
    sim->add_option("--threads", sim_threads, "Worker threads (RSPIM_THREADS fallback)");

    // analyze
    AnalyzeArgs an;
    auto* ana = app.add_subcommand("analyze", "Post-selection intervals for CSV data");
    ana->add_option("--x", an.x_path, "Design matrix CSV")->required();
    ana->add_option("--y", an.y_path, "Response CSV (single column)")->required();
    ana->add_option("--alpha", an.alpha, "Miscoverage level");
    ana->add_option("--splits", an.splits, "Number of random splits R");
    ana->add_option("--selector", an.selector, "lasso-stability | lasso | random | oracle");
    ana->add_option("--method", an.method, "single | union | wildboot");
    ana->add_option("--frac-inf", an.frac_inf, "Inference fraction of the split");
    ana->add_option("--c", an.shrink_c, "Shrink factor (default 1)");
    ana->add_flag("--carved", an.carved, "Mark results as carved (approximate)");
    ana->add_option("--boot", an.wb_boot, "Wild bootstrap draws (wildboot method)");
    ana->add_option("--seed", an.seed, "Master seed")->required();
    ana->add_option("--out", an.out_dir, "Output directory");
    ana->add_option("--threads", an.threads, "Worker threads");

    // contour
    AnalyzeArgs co;
    int co_coord = 0;
    std::string co_grid;
    auto* con = app.add_subcommand("contour", "Export plausibility contour grids");
    con->add_option("--x", co.x_path, "Design matrix CSV")->required();
    con->add_option("--y", co.y_path, "Response CSV (single column)")->required();
    con->add_option("--coord", co_coord, "Coordinate (1-based)")->required();
    con->add_option("--grid", co_grid, "Grid spec lo:hi:npts")->required();
    con->add_option("--splits", co.splits, "Number of random splits R");
    con->add_option("--selector", co.selector, "Selector");
    con->add_option("--frac-inf", co.frac_inf, "Inference fraction");
    con->add_option("--seed", co.seed, "Master seed")->required();
    con->add_option("--out", co.out_dir, "Output directory");
    con->add_option("--threads", co.threads, "Worker threads");

    // calibrate
    std::string cal_module, cal_config, cal_method, cal_grid = "0.5:2.5:0.05", cal_out = ".";
    int cal_reps = 0, cal_threads = 0;
    double cal_target = 0.0;
    std::uint64_t cal_seed = 0;
    auto* cal = app.add_subcommand("calibrate", "Shrink-factor calibration at target coverage");
    cal->add_option("--module", cal_module, "Module preset")->check(CLI::IsMember({"A", "B", "C", "D", "E"}));
    cal->add_option("--config", cal_config, "JSON experiment config");
    cal->add_option("--reps", cal_reps, "Replication count override");
    cal->add_option("--method", cal_method, "Method override");
    cal->add_option("--c-grid", cal_grid, "Grid spec lo:hi:step");
    cal->add_option("--target", cal_target, "Target conditional coverage (default 1 - alpha)");
    cal->add_option("--seed", cal_seed, "Master seed")->required();
    cal->add_option("--out", cal_out, "Output directory");
    cal->add_option("--threads", cal_threads, "Worker threads");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (sim->parsed())
            return cmd_simulate(sim_module, sim_config, sim_reps, sim_alpha, sim_method, sim_c,
                                sim_seed, sim_out, sim_threads);
        if (ana->parsed()) return cmd_analyze(an);
        if (con->parsed()) return cmd_contour(co, co_coord, co_grid);
        if (cal->parsed())
            return cmd_calibrate(cal_module, cal_config, cal_reps, cal_method, cal_grid, cal_target,
                                 cal_seed, cal_out, cal_threads);
    } catch (const NotAvailableError& e) {
        std::cerr << "not available: " << e.what() << "\n";
        return kExitNotAvailable;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    }
    return kExitConfig;
}
