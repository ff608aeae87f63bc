#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "aggdens/bench.hpp"
#include "aggdens/errors.hpp"
#include "aggdens/parallel.hpp"

namespace {

using namespace aggdens;

void write_text(const std::string& path, const std::string& text) {
    if (path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

std::string fmt6e(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6e", v);
    return buf;
}

int cmd_bench(const std::string& config_path, const std::string& out_override,
              bool fast) {
    ExperimentConfig cfg = ExperimentConfig::from_json_file(config_path);
    if (!out_override.empty()) cfg.out_dir = out_override;
    if (fast) cfg.fast = true;
    const BenchReport report = run_experiment(cfg, env_thread_count());
    write_report_files(report);
    for (const auto& c : report.cells) {
        if (c.ok)
            std::printf("%-12s n=%-6d mise=%s stderr=%s\n", c.estimator.c_str(), c.n,
                        fmt6e(c.report.mean_ise).c_str(),
                        fmt6e(c.report.std_error).c_str());
        else
            std::printf("%-12s n=%-6d FAILED: %s\n", c.estimator.c_str(), c.n,
                        c.error.c_str());
    }
    std::printf("report written to %s (%.1fs)\n", cfg.out_dir.c_str(),
                report.wall_seconds);
    return report.all_ok() ? 0 : 1;
}

int cmd_estimate(const std::string& input, const std::string& mode, int splits,
                 const std::string& scheme, const std::string& grid_type, double a0,
                 const std::string& kernel_name, std::uint64_t seed, double xmin,
                 double xmax, int points, const std::string& out_csv,
                 const std::string& out_json) {
    const SamplePoints sample = [&] {
        SamplePoints s = read_sample_file(input);
        s.provenance = SeedPath(seed);
        return s;
    }();
    if (sample.d != 1) throw ConfigError("estimate: expects 1-d samples");

    const KernelSpec kernel = KernelSpec::parse(kernel_name);
    const std::vector<double> grid =
        grid_type == "paper7" ? paper7_grid() : bandwidth_grid(sample.n, 1, a0).h;
    AggregateOptions opts;
    opts.mode = mode == "linear" ? WeightMode::linear : WeightMode::convex;
    const auto agg = averaged_aggregate(
        sample, kde_grid_factory(kernel, grid),
        scheme == "asymptotic" ? SplitScheme::asymptotic : SplitScheme::equal_halves,
        splits, SeedPath(seed).child(0x5051ULL),  // splits stream
        opts);

    if (!(xmax > xmin)) {
        double lo = sample.x1(0), hi = sample.x1(0);
        for (int i = 1; i < sample.n; ++i) {
            lo = std::min(lo, sample.x1(i));
            hi = std::max(hi, sample.x1(i));
        }
        const double pad = 0.1 * (hi - lo) + 1.0;
        xmin = lo - pad;
        xmax = hi + pad;
    }
    std::vector<double> xs(points), vals(points);
    for (int i = 0; i < points; ++i)
        xs[i] = xmin + (xmax - xmin) * i / (points - 1);
    agg.eval_batch(xs, vals);

    std::string csv = "x,density\n";
    for (int i = 0; i < points; ++i) csv += fmt6e(xs[i]) + "," + fmt6e(vals[i]) + "\n";
    write_text(out_csv, csv);

    nlohmann::json j;
    j["version"] = kArtifactVersion;
    j["input"] = input;
    j["mode"] = mode;
    j["kernel"] = kernel_name;
    j["seed"] = seed;
    j["bandwidths"] = grid;
    auto& js = j["splits"];
    js = nlohmann::json::array();
    for (const auto& rec : agg.records()) {
        nlohmann::json r;
        r["train_size"] = rec.split.train.size();
        r["validation_size"] = rec.split.validation.size();
        std::vector<double> lambda(rec.weights.lambda.data(),
                                   rec.weights.lambda.data() + rec.weights.lambda.size());
        r["weights"] = lambda;
        r["objective"] = rec.weights.objective;
        js.push_back(std::move(r));
    }
    write_text(out_json, j.dump(2));
    return 0;
}

int cmd_risk(const std::string& density, const std::string& kernel_name, int n,
             int reps, std::uint64_t seed, const std::string& grid_type, double a0,
             int nodes, const std::string& out) {
    const DensityModel truth = density_by_name(density);
    const KernelSpec kernel = KernelSpec::parse(kernel_name);
    const std::vector<double> grid =
        grid_type == "paper7" ? paper7_grid() : bandwidth_grid(n, 1, a0).h;
    const QuadratureSpec quad = QuadratureSpec::for_model(truth, nodes);
    const OracleRisk r = oracle_risk(grid, kernel, truth, n, reps, quad,
                                     SeedPath(seed), env_thread_count());
    std::string csv = "h,mise,stderr\n";
    for (const auto& p : r.curve)
        csv += fmt6e(p.h) + "," + fmt6e(p.mise) + "," + fmt6e(p.std_error) + "\n";
    write_text(out, csv);
    std::fprintf(stderr, "best h = %g (mise %s)\n", r.best_h,
                 fmt6e(r.best.mean_ise).c_str());
    return 0;
}

int cmd_grid(int n, int d, double a0, const std::string& out) {
    const BandwidthGrid g = bandwidth_grid(n, d, a0);
    std::string csv = "index,h\n";
    for (int i = 0; i < g.M(); ++i)
        csv += std::to_string(i) + "," + fmt6e(g.h[i]) + "\n";
    write_text(out, csv);
    return 0;
}

int cmd_minimax(const MinimaxConfig& cfg, const std::string& out_dir) {
    const MinimaxReport report = minimax_experiment(cfg, env_thread_count());
    std::filesystem::create_directories(out_dir);
    write_text((std::filesystem::path(out_dir) / "minimax.csv").string(),
               minimax_csv(report));
    write_text((std::filesystem::path(out_dir) / "minimax.json").string(),
               minimax_json(report));
    for (const auto& c : report.kde_cells)
        std::printf("kde  n=%-7d h*=%.5f mise=%s bound=%s ratio=%.4f\n", c.n,
                    c.h_star, fmt6e(c.mise).c_str(), fmt6e(c.bound).c_str(), c.ratio);
    for (const auto& c : report.pool_cells)
        std::printf("pool n=%-7d (NM=%d) mise=%s bound=%s ratio=%.4f\n", c.n,
                    c.pool_size, fmt6e(c.mise).c_str(), fmt6e(c.bound).c_str(),
                    c.ratio);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Linear and convex aggregation of kernel density estimators"};
    app.require_subcommand(1);

    // bench
    std::string bench_config, bench_out;
    bool bench_fast = false;
    auto* bench = app.add_subcommand("bench", "run a benchmark config");
    bench->add_option("--config", bench_config, "JSON experiment config")->required();
    bench->add_option("--out", bench_out, "output directory override");
    bench->add_flag("--fast", bench_fast, "reduce to R=50 (labeled in output)");

    // estimate
    std::string est_input, est_mode = "convex", est_scheme = "equal",
                est_grid = "paper7", est_kernel = "gaussian",
                est_csv = "estimate.csv", est_json = "estimate_weights.json";
    int est_splits = 10, est_points = 512;
    double est_a0 = 1.0, est_xmin = 0.0, est_xmax = 0.0;
    std::uint64_t est_seed = 1;
    auto* est = app.add_subcommand("estimate", "aggregate KDE from a sample file");
    est->add_option("--input", est_input, "sample file (one point per line)")->required();
    est->add_option("--mode", est_mode)->check(CLI::IsMember({"linear", "convex"}));
    est->add_option("--splits", est_splits)->check(CLI::PositiveNumber);
    est->add_option("--scheme", est_scheme)->check(CLI::IsMember({"equal", "asymptotic"}));
    est->add_option("--grid", est_grid)->check(CLI::IsMember({"paper7", "section5"}));
    est->add_option("--a0", est_a0)->check(CLI::PositiveNumber);
    est->add_option("--kernel", est_kernel);
    est->add_option("--seed", est_seed)->required();
    est->add_option("--xmin", est_xmin);
    est->add_option("--xmax", est_xmax);
    est->add_option("--points", est_points)->check(CLI::Range(2, 1000000));
    est->add_option("--out-csv", est_csv);
    est->add_option("--out-json", est_json);

    // risk
    std::string risk_density = "gaussian", risk_kernel = "gaussian",
                risk_grid = "paper7", risk_out = "-";
    int risk_n = 100, risk_reps = 200, risk_nodes = 4096;
    double risk_a0 = 1.0;
    std::uint64_t risk_seed = 1;
    auto* risk = app.add_subcommand("risk", "per-bandwidth MISE curve");
    risk->add_option("--density", risk_density);
    risk->add_option("--kernel", risk_kernel);
    risk->add_option("--n", risk_n)->check(CLI::Range(3, 10000000));
    risk->add_option("--reps", risk_reps)->check(CLI::Range(2, 1000000));
    risk->add_option("--seed", risk_seed)->required();
    risk->add_option("--grid", risk_grid)->check(CLI::IsMember({"paper7", "section5"}));
    risk->add_option("--a0", risk_a0)->check(CLI::PositiveNumber);
    risk->add_option("--nodes", risk_nodes)->check(CLI::Range(64, 100000000));
    risk->add_option("--out", risk_out, "output CSV ('-' for stdout)");

    // grid
    int grid_n = 100, grid_d = 1;
    double grid_a0 = 1.0;
    std::string grid_out = "-";
    auto* grid = app.add_subcommand("grid", "print the bandwidth grid as CSV");
    grid->add_option("--n", grid_n)->required()->check(CLI::Range(3, 1000000000));
    grid->add_option("--d", grid_d)->check(CLI::Range(1, 16));
    grid->add_option("--a0", grid_a0)->check(CLI::PositiveNumber);
    grid->add_option("--out", grid_out);

    // minimax
    MinimaxConfig mm;
    double mm_q = -1.0;
    std::string mm_out = "minimax_out";
    auto* mmx = app.add_subcommand("minimax", "Pinsker minimax experiment");
    mmx->add_option("--beta", mm.beta)->check(CLI::PositiveNumber);
    mmx->add_option("--q", mm_q, "Sobolev radius (default: the density's functional)");
    mmx->add_option("--density", mm.density);
    mmx->add_option("--n", mm.sizes, "sample sizes");
    mmx->add_option("--reps", mm.replications)->check(CLI::Range(2, 1000000));
    mmx->add_option("--seed", mm.seed)->required();
    mmx->add_option("--nodes", mm.quadrature_nodes)->check(CLI::Range(64, 100000000));
    mmx->add_flag("--pool", mm.run_pool, "also run the Pinsker-pool aggregate");
    mmx->add_option("--pool-n", mm.pool_sizes);
    mmx->add_option("--pool-family", mm.pool_family)->check(CLI::Range(2, 64));
    mmx->add_option("--pool-splits", mm.pool_splits)->check(CLI::PositiveNumber);
    mmx->add_option("--pool-reps", mm.pool_replications)->check(CLI::Range(2, 100000));
    mmx->add_option("--out", mm_out, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (bench->parsed()) return cmd_bench(bench_config, bench_out, bench_fast);
        if (est->parsed())
            return cmd_estimate(est_input, est_mode, est_splits, est_scheme, est_grid,
                                est_a0, est_kernel, est_seed, est_xmin, est_xmax,
                                est_points, est_csv, est_json);
        if (risk->parsed())
            return cmd_risk(risk_density, risk_kernel, risk_n, risk_reps, risk_seed,
                            risk_grid, risk_a0, risk_nodes, risk_out);
        if (grid->parsed()) return cmd_grid(grid_n, grid_d, grid_a0, grid_out);
        if (mmx->parsed()) {
            if (mm_q > 0.0) mm.Q = mm_q;
            return cmd_minimax(mm, mm_out);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
