#include "aggdens/bench.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "aggdens/errors.hpp"
#include "aggdens/parallel.hpp"

namespace aggdens {
namespace {

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string fmt6e(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6e", v);
    return buf;
}

bool is_kde_estimator(const std::string& name, double* h_out = nullptr) {
    if (name.rfind("kde:", 0) != 0) return false;
    const double h = std::stod(name.substr(4));
    if (!(h > 0.0)) throw ConfigError("kde estimator needs h > 0: " + name);
    if (h_out) *h_out = h;
    return true;
}

std::vector<double> default_ucv_candidates() {
    std::vector<double> hs(40);
    const double lo = std::log(0.01), hi = std::log(1.0);
    for (int i = 0; i < 40; ++i) hs[i] = std::exp(lo + (hi - lo) * i / 39.0);
    return hs;
}

}  // namespace

std::vector<double> paper7_grid() {
    return {0.001, 0.005, 0.01, 0.05, 0.1, 0.5};
}

void ExperimentConfig::validate() const {
    density_by_name(density);  // throws for unknown ids
    if (sizes.empty()) throw ConfigError("config: sizes must be nonempty");
    for (int n : sizes)
        if (n < 3) throw ConfigError("config: sample sizes must be >= 3");
    if (replications < 2) throw ConfigError("config: replications must be >= 2");
    if (estimators.empty()) throw ConfigError("config: estimator roster is empty");
    for (const auto& e : estimators) {
        if (e == "agg_pure" || e == "agg_linear" || e == "oracle" || e == "ucv" ||
            e == "nrd0" || e == "nrd")
            continue;
        if (is_kde_estimator(e)) continue;
        throw ConfigError("config: unknown estimator '" + e + "'");
    }
    if (grid_type != "paper7" && grid_type != "section5")
        throw ConfigError("config: grid must be 'paper7' or 'section5'");
    if (!(grid_a0 > 0.0)) throw ConfigError("config: a0 must be > 0");
    KernelSpec::parse(kernel);
    if (split_scheme != "equal" && split_scheme != "asymptotic")
        throw ConfigError("config: split scheme must be 'equal' or 'asymptotic'");
    if (split_count < 1) throw ConfigError("config: split count must be >= 1");
    if (quadrature_nodes < 64) throw ConfigError("config: quadrature nodes >= 64");
    if (quadrature_rule != "auto" && quadrature_rule != "trapezoid" &&
        quadrature_rule != "gl")
        throw ConfigError("config: quadrature rule must be auto|trapezoid|gl");
    for (double h : ucv_candidates)
        if (!(h > 0.0)) throw ConfigError("config: ucv candidates must be > 0");
}

std::vector<double> ExperimentConfig::grid_for(int n) const {
    if (grid_type == "paper7") return paper7_grid();
    return bandwidth_grid(n, 1, grid_a0).h;
}

QuadratureSpec ExperimentConfig::quadrature_for(const DensityModel& model) const {
    QuadratureSpec q = QuadratureSpec::for_model(model, quadrature_nodes);
    if (quadrature_rule == "trapezoid") q.rule = QuadRule::trapezoid;
    if (quadrature_rule == "gl") q.rule = QuadRule::gauss_legendre_composite;
    return q;
}

std::string ExperimentConfig::to_json_resolved() const {
    nlohmann::json j;
    j["density"] = density;
    j["sizes"] = sizes;
    j["replications"] = fast ? 50 : replications;
    j["estimators"] = estimators;
    j["grid"] = {{"type", grid_type}, {"a0", grid_a0}};
    j["kernel"] = kernel;
    j["splits"] = {{"scheme", split_scheme}, {"count", split_count}};
    j["seed"] = seed;
    j["out_dir"] = out_dir;
    const DensityModel model = density_by_name(density);
    const QuadratureSpec q = quadrature_for(model);
    j["quadrature"] = {
        {"nodes", q.nodes},
        {"rule", q.rule == QuadRule::trapezoid ? "trapezoid" : "gl"},
        {"window", {q.lo, q.hi}},
        {"breakpoints", q.breakpoints.size()}};
    j["ucv_candidates"] =
        ucv_candidates.empty() ? default_ucv_candidates() : ucv_candidates;
    j["fast"] = fast;
    j["qp"] = {{"kkt_tol", 1e-8}, {"max_iterations", 100000}};
    j["linear_rank_tol"] = 1e-10;
    return j.dump(2);
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text, nullptr, true, true);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config: bad JSON: ") + e.what());
    }
    ExperimentConfig cfg;
    cfg.density = j.value("density", cfg.density);
    if (j.contains("sizes")) cfg.sizes = j.at("sizes").get<std::vector<int>>();
    cfg.replications = j.value("replications", cfg.replications);
    if (j.contains("estimators"))
        cfg.estimators = j.at("estimators").get<std::vector<std::string>>();
    if (j.contains("grid")) {
        cfg.grid_type = j["grid"].value("type", cfg.grid_type);
        cfg.grid_a0 = j["grid"].value("a0", cfg.grid_a0);
    }
    cfg.kernel = j.value("kernel", cfg.kernel);
    if (j.contains("splits")) {
        cfg.split_scheme = j["splits"].value("scheme", cfg.split_scheme);
        cfg.split_count = j["splits"].value("count", cfg.split_count);
    }
    if (!j.contains("seed")) throw ConfigError("config: seed is required");
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.out_dir = j.value("out_dir", cfg.out_dir);
    if (j.contains("quadrature")) {
        cfg.quadrature_nodes = j["quadrature"].value("nodes", cfg.quadrature_nodes);
        cfg.quadrature_rule = j["quadrature"].value("rule", cfg.quadrature_rule);
    }
    if (j.contains("ucv_candidates"))
        cfg.ucv_candidates = j.at("ucv_candidates").get<std::vector<double>>();
    cfg.fast = j.value("fast", false);
    cfg.validate();
    return cfg;
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str());
}

namespace {

// One MISE cell. The builders are pure functions of the drawn sample; any
// split randomness is derived from the sample's own provenance.
MiseReport run_cell(const ExperimentConfig& cfg, const DensityModel& truth,
                    const QuadratureSpec& quad, const std::string& estimator,
                    int n, int threads) {
    const int R = cfg.fast ? 50 : cfg.replications;
    const KernelSpec kernel = KernelSpec::parse(cfg.kernel);
    const SeedPath cell_seed = SeedPath(cfg.seed)
                                   .child(fnv1a(cfg.density))
                                   .child(fnv1a(estimator))
                                   .child(static_cast<std::uint64_t>(n));
    const std::string label = estimator;

    if (estimator == "oracle") {
        const auto grid = cfg.grid_for(n);
        OracleRisk orr =
            oracle_risk(grid, kernel, truth, n, R, quad, cell_seed, threads);
        MiseReport rep = std::move(orr.best);
        rep.estimator_label = label;
        rep.density_label = cfg.density;
        return rep;
    }

    EstimatorBuilder builder;
    if (estimator == "agg_pure" || estimator == "agg_linear") {
        const SplitScheme scheme = cfg.split_scheme == "equal"
                                       ? SplitScheme::equal_halves
                                       : SplitScheme::asymptotic;
        AggregateOptions opts;
        opts.mode = estimator == "agg_pure" ? WeightMode::convex : WeightMode::linear;
        const auto factory = kde_grid_factory(kernel, cfg.grid_for(n));
        const int split_count = cfg.split_count;
        builder = [factory, scheme, split_count, opts](const SamplePoints& sample) {
            const auto agg = averaged_aggregate(
                sample, factory, scheme, split_count,
                sample.provenance.child(fnv1a("splits")), opts);
            return batch_of(agg);
        };
    } else if (estimator == "ucv") {
        const std::vector<double> cands = cfg.ucv_candidates.empty()
                                              ? default_ucv_candidates()
                                              : cfg.ucv_candidates;
        builder = [kernel, cands](const SamplePoints& sample) {
            const double h = ucv_select(sample, kernel, cands);
            return batch_of(fit_kde(sample, h, kernel));
        };
    } else if (estimator == "nrd0" || estimator == "nrd") {
        const bool wide = estimator == "nrd";
        builder = [kernel, wide](const SamplePoints& sample) {
            const double h = wide ? nrd(sample.pts) : nrd0(sample.pts);
            return batch_of(fit_kde(sample, h, kernel));
        };
    } else {
        double h = 0.0;
        is_kde_estimator(estimator, &h);
        builder = [kernel, h](const SamplePoints& sample) {
            return batch_of(fit_kde(sample, h, kernel));
        };
    }

    MiseReport rep = mise_mc(builder, truth, n, R, quad, cell_seed, label, threads);
    rep.density_label = cfg.density;
    return rep;
}

}  // namespace

bool BenchReport::all_ok() const {
    for (const auto& c : cells)
        if (!c.ok) return false;
    return true;
}

BenchReport run_experiment(const ExperimentConfig& cfg, int threads) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    BenchReport report;
    report.config = cfg;
    const DensityModel truth = density_by_name(cfg.density);
    const QuadratureSpec quad = cfg.quadrature_for(truth);
    for (const auto& estimator : cfg.estimators) {
        for (int n : cfg.sizes) {
            CellResult cell;
            cell.estimator = estimator;
            cell.n = n;
            try {
                cell.report = run_cell(cfg, truth, quad, estimator, n, threads);
                cell.ok = true;
            } catch (const std::exception& e) {
                cell.ok = false;
                cell.error = e.what();
            }
            report.cells.push_back(std::move(cell));
        }
    }
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

std::string table_csv(const BenchReport& report) {
    std::string out;
    if (report.config.fast) out += "# fast mode: replications reduced to 50\n";
    out += "estimator,n,mise,stderr,seed\n";
    for (const auto& c : report.cells) {
        if (!c.ok) continue;
        out += c.estimator + "," + std::to_string(c.n) + "," +
               fmt6e(c.report.mean_ise) + "," + fmt6e(c.report.std_error) + "," +
               std::to_string(report.config.seed) + "\n";
    }
    return out;
}

std::string report_json(const BenchReport& report) {
    nlohmann::json j;
    j["version"] = report.version;
    j["config"] = nlohmann::json::parse(report.config.to_json_resolved());
    j["wall_seconds"] = report.wall_seconds;
    j["all_ok"] = report.all_ok();
    auto& cells = j["cells"];
    cells = nlohmann::json::array();
    for (const auto& c : report.cells) {
        nlohmann::json jc;
        jc["estimator"] = c.estimator;
        jc["n"] = c.n;
        jc["ok"] = c.ok;
        if (c.ok) {
            jc["mise"] = c.report.mean_ise;
            jc["stderr"] = c.report.std_error;
            jc["replications"] = c.report.replications;
            jc["wall_seconds"] = c.report.wall_seconds;
        } else {
            jc["error"] = c.error;
        }
        cells.push_back(std::move(jc));
    }
    return j.dump(2);
}

void write_report_files(const BenchReport& report) {
    namespace fs = std::filesystem;
    fs::create_directories(report.config.out_dir);
    {
        std::ofstream out(fs::path(report.config.out_dir) / "table.csv",
                          std::ios::binary);
        if (!out) throw std::runtime_error("cannot write table.csv under " +
                                           report.config.out_dir);
        out << table_csv(report);
    }
    {
        std::ofstream out(fs::path(report.config.out_dir) / "report.json",
                          std::ios::binary);
        if (!out) throw std::runtime_error("cannot write report.json under " +
                                           report.config.out_dir);
        out << report_json(report);
    }
}

SweepReport split_sensitivity(const ExperimentConfig& cfg,
                              std::span<const int> split_counts,
                              std::span<const double> train_fractions,
                              int threads) {
    cfg.validate();
    SweepReport sweep;
    sweep.config = cfg;
    sweep.n = cfg.sizes.front();
    const DensityModel truth = density_by_name(cfg.density);
    const QuadratureSpec quad = cfg.quadrature_for(truth);
    const KernelSpec kernel = KernelSpec::parse(cfg.kernel);
    const int n = sweep.n;

    for (int count : split_counts) {
        for (double frac : train_fractions) {
            SweepCell cell;
            cell.split_count = count;
            cell.train_fraction = frac;
            try {
                if (count < 1) throw ConfigError("sweep: split count >= 1");
                const int m = std::clamp(static_cast<int>(std::lround(frac * n)), 1, n - 1);
                AggregateOptions opts;
                opts.mode = WeightMode::convex;
                opts.train_size = m;
                const auto factory = kde_grid_factory(kernel, cfg.grid_for(n));
                // all sweep cells share the agg_pure sample streams (common
                // random numbers across configurations); a single cell at the
                // table's split settings reproduces the table cell exactly
                const SeedPath cell_seed = SeedPath(cfg.seed)
                                               .child(fnv1a(cfg.density))
                                               .child(fnv1a("agg_pure"))
                                               .child(static_cast<std::uint64_t>(n));
                const EstimatorBuilder builder = [factory, count,
                                                  opts](const SamplePoints& sample) {
                    const auto agg = averaged_aggregate(
                        sample, factory, SplitScheme::equal_halves, count,
                        sample.provenance.child(fnv1a("splits")), opts);
                    return batch_of(agg);
                };
                const int R = cfg.fast ? 50 : cfg.replications;
                cell.report = mise_mc(builder, truth, n, R, quad, cell_seed,
                                      "agg_pure", threads);
                cell.ok = true;
            } catch (const std::exception& e) {
                cell.ok = false;
                cell.error = e.what();
            }
            sweep.cells.push_back(std::move(cell));
        }
    }
    return sweep;
}

std::string sweep_csv(const SweepReport& report) {
    std::string out = "splits,train_fraction,mise,stderr\n";
    for (const auto& c : report.cells) {
        if (!c.ok) continue;
        out += std::to_string(c.split_count) + "," + fmt6e(c.train_fraction) + "," +
               fmt6e(c.report.mean_ise) + "," + fmt6e(c.report.std_error) + "\n";
    }
    return out;
}

MinimaxConfig MinimaxConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(ss.str(), nullptr, true, true);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config: bad JSON: ") + e.what());
    }
    MinimaxConfig cfg;
    cfg.beta = j.value("beta", cfg.beta);
    if (j.contains("Q")) cfg.Q = j.at("Q").get<double>();
    cfg.density = j.value("density", cfg.density);
    if (j.contains("sizes")) cfg.sizes = j.at("sizes").get<std::vector<int>>();
    cfg.replications = j.value("replications", cfg.replications);
    if (!j.contains("seed")) throw ConfigError("config: seed is required");
    cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("quadrature"))
        cfg.quadrature_nodes = j["quadrature"].value("nodes", cfg.quadrature_nodes);
    if (j.contains("pool")) {
        const auto& p = j["pool"];
        cfg.run_pool = p.value("run", cfg.run_pool);
        if (p.contains("sizes")) cfg.pool_sizes = p.at("sizes").get<std::vector<int>>();
        cfg.pool_family = p.value("family", cfg.pool_family);
        cfg.pool_splits = p.value("splits", cfg.pool_splits);
        cfg.pool_replications = p.value("replications", cfg.pool_replications);
        cfg.pool_a0 = p.value("a0", cfg.pool_a0);
    }
    return cfg;
}

MinimaxReport minimax_experiment(const MinimaxConfig& cfg, int threads) {
    MinimaxReport report;
    report.config = cfg;
    const DensityModel truth = density_by_name(cfg.density);
    if (truth.dim() != 1)
        throw ConfigError("minimax experiment supports d = 1 densities");
    const double q_truth = sobolev_functional(truth, cfg.beta);
    if (cfg.Q) {
        if (q_truth > *cfg.Q)
            throw ConfigError(
                "density lies outside Theta(beta, Q): Sobolev functional = " +
                std::to_string(q_truth) + " > Q = " + std::to_string(*cfg.Q));
        report.Q = *cfg.Q;
    } else {
        report.Q = q_truth;
    }
    const MinimaxQuantities mm = pinsker_minimax(cfg.beta, report.Q, 1);
    report.c_star = mm.c_star;
    report.d_star = mm.d_star;

    const QuadratureSpec quad = QuadratureSpec::for_model(truth, cfg.quadrature_nodes);
    const KernelSpec pinsker = KernelSpec::pinsker(cfg.beta, 1);

    for (int n : cfg.sizes) {
        const double h_star = mm.h_star(n);
        const SeedPath cell_seed = SeedPath(cfg.seed)
                                       .child(fnv1a("minimax_kde"))
                                       .child(static_cast<std::uint64_t>(n));
        const EstimatorBuilder builder = [&pinsker, h_star](const SamplePoints& s) {
            return batch_of(fit_kde(s, h_star, pinsker));
        };
        const MiseReport rep = mise_mc(builder, truth, n, cfg.replications, quad,
                                       cell_seed, "pinsker_kde", threads);
        MinimaxCell cell;
        cell.n = n;
        cell.h_star = h_star;
        cell.mise = rep.mean_ise;
        cell.std_error = rep.std_error;
        cell.bound = mm.risk_bound(n);
        cell.ratio = rep.mean_ise / cell.bound;
        report.kde_cells.push_back(cell);
    }

    if (cfg.run_pool) {
        const PinskerFamily fam = pinsker_family(cfg.pool_family, 1);
        for (int n : cfg.pool_sizes) {
            const BandwidthGrid grid = bandwidth_grid(n, 1, cfg.pool_a0);
            const auto factory = multi_kernel_pool(fam, grid);
            AggregateOptions opts;
            opts.mode = WeightMode::convex;
            const int splits = cfg.pool_splits;
            const EstimatorBuilder builder = [factory, splits,
                                              opts](const SamplePoints& sample) {
                const auto agg = averaged_aggregate(
                    sample, factory, SplitScheme::asymptotic, splits,
                    sample.provenance.child(fnv1a("splits")), opts);
                return batch_of(agg);
            };
            const SeedPath cell_seed = SeedPath(cfg.seed)
                                           .child(fnv1a("minimax_pool"))
                                           .child(static_cast<std::uint64_t>(n));
            const MiseReport rep = mise_mc(builder, truth, n, cfg.pool_replications,
                                           quad, cell_seed, "pinsker_pool", threads);
            MinimaxPoolCell cell;
            cell.n = n;
            cell.pool_size = fam.N * grid.M();
            cell.mise = rep.mean_ise;
            cell.std_error = rep.std_error;
            cell.bound = mm.risk_bound(n);
            cell.ratio = rep.mean_ise / cell.bound;
            report.pool_cells.push_back(cell);
        }
    }
    return report;
}

std::string minimax_csv(const MinimaxReport& report) {
    std::string out = "kind,n,h_star,mise,stderr,bound,ratio\n";
    for (const auto& c : report.kde_cells)
        out += "kde," + std::to_string(c.n) + "," + fmt6e(c.h_star) + "," +
               fmt6e(c.mise) + "," + fmt6e(c.std_error) + "," + fmt6e(c.bound) +
               "," + fmt6e(c.ratio) + "\n";
    for (const auto& c : report.pool_cells)
        out += "pool," + std::to_string(c.n) + ",," + fmt6e(c.mise) + "," +
               fmt6e(c.std_error) + "," + fmt6e(c.bound) + "," + fmt6e(c.ratio) +
               "\n";
    return out;
}

std::string minimax_json(const MinimaxReport& report) {
    nlohmann::json j;
    j["version"] = kArtifactVersion;
    j["beta"] = report.config.beta;
    j["density"] = report.config.density;
    j["Q"] = report.Q;
    j["c_star"] = report.c_star;
    j["d_star"] = report.d_star;
    j["seed"] = report.config.seed;
    auto& kc = j["kde_cells"];
    kc = nlohmann::json::array();
    for (const auto& c : report.kde_cells)
        kc.push_back({{"n", c.n},
                      {"h_star", c.h_star},
                      {"mise", c.mise},
                      {"stderr", c.std_error},
                      {"bound", c.bound},
                      {"ratio", c.ratio}});
    auto& pc = j["pool_cells"];
    pc = nlohmann::json::array();
    for (const auto& c : report.pool_cells)
        pc.push_back({{"n", c.n},
                      {"pool_size", c.pool_size},
                      {"mise", c.mise},
                      {"stderr", c.std_error},
                      {"bound", c.bound},
                      {"ratio", c.ratio}});
    return j.dump(2);
}

}  // namespace aggdens
