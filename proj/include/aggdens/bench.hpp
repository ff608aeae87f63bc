#pragma once

#include <optional>
#include <string>
#include <vector>

#include "aggdens/risk.hpp"

namespace aggdens {

inline constexpr const char* kArtifactVersion = "0.1.0";

// The fixed six-bandwidth benchmark grid.
std::vector<double> paper7_grid();

struct ExperimentConfig {
    std::string density = "gaussian";
    std::vector<int> sizes{100};
    int replications = 200;
    // "agg_pure", "agg_linear", "oracle", "ucv", "nrd0", "nrd", "kde:<h>"
    std::vector<std::string> estimators{"agg_pure", "oracle"};
    std::string grid_type = "paper7";  // "paper7" | "section5"
    double grid_a0 = 1.0;
    std::string kernel = "gaussian";
    std::string split_scheme = "equal";  // "equal" | "asymptotic"
    int split_count = 10;
    std::uint64_t seed = 1;
    std::string out_dir = ".";
    int quadrature_nodes = 4096;
    std::string quadrature_rule = "auto";  // "auto" | "trapezoid" | "gl"
    std::vector<double> ucv_candidates;    // default: 40 log-spaced in [0.01, 1]
    bool fast = false;                     // R = 50, labeled in the report

    void validate() const;
    std::vector<double> grid_for(int n) const;
    QuadratureSpec quadrature_for(const DensityModel& model) const;

    std::string to_json_resolved() const;  // all defaults made explicit
    static ExperimentConfig from_json_text(const std::string& text);
    static ExperimentConfig from_json_file(const std::string& path);
};

struct CellResult {
    std::string estimator;
    int n = 0;
    bool ok = false;
    std::string error;
    MiseReport report;
};

struct BenchReport {
    ExperimentConfig config;
    std::vector<CellResult> cells;
    double wall_seconds = 0.0;
    std::string version = kArtifactVersion;

    bool all_ok() const;
};

// Runs every (estimator, n) cell; failures are isolated per cell. Fully
// deterministic for a fixed config and seed at any thread count.
BenchReport run_experiment(const ExperimentConfig& cfg, int threads = 1);

// estimator,n,mise,stderr,seed rows, %.6e numerics, LF endings.
std::string table_csv(const BenchReport& report);
std::string report_json(const BenchReport& report);
// Writes table.csv and report.json under cfg.out_dir.
void write_report_files(const BenchReport& report);

struct SweepCell {
    int split_count = 0;
    double train_fraction = 0.0;
    bool ok = false;
    std::string error;
    MiseReport report;
};

struct SweepReport {
    ExperimentConfig config;
    int n = 0;
    std::vector<SweepCell> cells;
};

// MISE of the averaged convex aggregate as a function of the number of
// splits and the training fraction (the Figure-3 style sweep).
SweepReport split_sensitivity(const ExperimentConfig& cfg,
                              std::span<const int> split_counts,
                              std::span<const double> train_fractions,
                              int threads = 1);
// (split_count, train_fraction, mise) triples for surface plotting.
std::string sweep_csv(const SweepReport& report);

struct MinimaxConfig {
    double beta = 2.0;
    std::optional<double> Q;  // default: the truth's Sobolev functional
    std::string density = "gaussian";
    std::vector<int> sizes{1000, 10000};
    int replications = 200;
    std::uint64_t seed = 1;
    int quadrature_nodes = 4096;
    // pool part (the aggregate over the Pinsker kernel family)
    bool run_pool = false;
    std::vector<int> pool_sizes{300};
    int pool_family = 2;
    int pool_splits = 3;
    int pool_replications = 5;
    double pool_a0 = 1.0;

    static MinimaxConfig from_json_file(const std::string& path);
};

struct MinimaxCell {
    int n = 0;
    double h_star = 0.0;
    double mise = 0.0;
    double std_error = 0.0;
    double bound = 0.0;  // C* n^{-2 beta/(2 beta + d)}
    double ratio = 0.0;
};

struct MinimaxPoolCell {
    int n = 0;
    int pool_size = 0;
    double mise = 0.0;
    double std_error = 0.0;
    double bound = 0.0;
    double ratio = 0.0;
};

struct MinimaxReport {
    MinimaxConfig config;
    double Q = 0.0;  // resolved
    double c_star = 0.0;
    double d_star = 0.0;
    std::vector<MinimaxCell> kde_cells;
    std::vector<MinimaxPoolCell> pool_cells;
};

// Pinsker-kernel KDE at h*(n) against the sharp bound C* n^{-2b/(2b+1)},
// plus (optionally) the aggregate over the Pinsker pool at desk scale.
MinimaxReport minimax_experiment(const MinimaxConfig& cfg, int threads = 1);
std::string minimax_csv(const MinimaxReport& report);
std::string minimax_json(const MinimaxReport& report);

}  // namespace aggdens
