#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "aggdens/aggregation.hpp"
#include "aggdens/densities.hpp"
#include "aggdens/kde.hpp"

namespace aggdens {

enum class QuadRule { trapezoid, gauss_legendre_composite };

// Numerical realization of the L2 norm on a finite window (d = 1).
struct QuadratureSpec {
    double lo = 0.0;
    double hi = 1.0;
    int nodes = 4096;  // >= 64
    QuadRule rule = QuadRule::trapezoid;
    // Interior discontinuities of the truth; the composite rule aligns panel
    // edges here so piecewise-smooth integrands converge at full order.
    std::vector<double> breakpoints;

    // Window and breakpoints from the model's documented support window. The
    // composite rule is selected automatically for densities with jumps.
    static QuadratureSpec for_model(const DensityModel& model, int nodes = 4096);
    QuadratureSpec with_nodes(int n) const;
};

struct QuadNodes {
    std::vector<double> x, w;
};
QuadNodes build_quad_nodes(const QuadratureSpec& spec);

// Batch-evaluable density estimate: fills out[i] = p(grid[i]).
using BatchEval = std::function<void(std::span<const double>, std::span<double>)>;

// Sharp local structure of an estimate: spikes of the given width at the
// given centers (a KDE's training points at its bandwidth). The ISE
// quadrature refines panels around them when they are finer than its base
// resolution, which is what keeps the node-doubling gate below 1e-6 even for
// aggregates that put weight on very small bandwidths.
struct SpikeSet {
    double scale = 0.0;
    std::vector<double> centers;
};

struct DensityEstimate {
    BatchEval eval;
    std::vector<SpikeSet> spikes;
};

DensityEstimate batch_of(const KdeEstimator& e);
DensityEstimate batch_of(const AveragedAggregate& a);
DensityEstimate batch_of_scalar(std::function<double(double)> f);

// int (estimate - truth)^2 over the window.
double ise(const DensityEstimate& estimate, const DensityModel& truth,
           const QuadratureSpec& spec);
double ise(const BatchEval& estimate, const DensityModel& truth,
           const QuadratureSpec& spec);

struct MiseReport {
    std::string estimator_label;
    std::string density_label;
    int n = 0;
    int replications = 0;
    double mean_ise = 0.0;
    double std_error = 0.0;  // sample std / sqrt(R)
    std::vector<double> per_replication;
    std::uint64_t master_seed = 0;
    double wall_seconds = 0.0;
};

using EstimatorBuilder = std::function<DensityEstimate(const SamplePoints&)>;

// Monte-Carlo MISE: R independent samples of size n, one ISE each.
// Replication r draws from stream seed.child(r); the reduction is a fixed
// pairwise tree, so the report is identical at any thread count.
MiseReport mise_mc(const EstimatorBuilder& builder, const DensityModel& truth,
                   int n, int R, const QuadratureSpec& spec, const SeedPath& seed,
                   const std::string& label = "", int threads = 1);

struct HCurvePoint {
    double h = 0.0;
    double mise = 0.0;
    double std_error = 0.0;
};

struct OracleRisk {
    double best_h = 0.0;
    MiseReport best;
    std::vector<HCurvePoint> curve;
};

// Minimum-MISE bandwidth over the grid, with the samples shared across
// bandwidths (common random numbers); ties go to the smaller h.
OracleRisk oracle_risk(std::span<const double> h_grid, const KernelSpec& kernel,
                       const DensityModel& truth, int n, int R,
                       const QuadratureSpec& spec, const SeedPath& seed,
                       int threads = 1);

// Unbiased cross-validation: argmin over the candidates of
// ||p_h||^2 - (2/m) sum_i p_{h,-i}(X_i); ties go to the smaller h.
double ucv_select(const SamplePoints& points, const KernelSpec& kernel,
                  std::span<const double> candidates,
                  const InnerProductOptions& ip_opts = {});

// Rules of thumb: 0.9 (nrd0) or 1.06 (nrd) times min(sd, IQR/1.34) m^{-1/5}.
double nrd0(std::span<const double> xs);
double nrd(std::span<const double> xs);

}  // namespace aggdens
