#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "aggdens/densities.hpp"
#include "aggdens/kde.hpp"
#include "aggdens/kernels.hpp"
#include "aggdens/simplex_qp.hpp"

namespace aggdens {

enum class GramBackend {
    automatic,
    gaussian_closed_form,  // exact double sum of Gaussian convolutions
    fourier_quadrature,    // Plancherel with empirical characteristic functions
    spatial_quadrature     // panel quadrature of p1*p2 (d <= 2)
};

struct InnerProductOptions {
    GramBackend backend = GramBackend::automatic;

    // spatial backend: GL panels of width panel_scale * min(h1, h2) over the
    // data hull padded by the kernels' spatial tail radii.
    int spatial_order = 8;
    double spatial_panel_scale = 0.5;
    int spatial_max_panels = 60000;
    std::optional<std::pair<double, double>> spatial_window;

    // fourier backend: GL-16 panels sized so empirical-CF oscillations stay
    // resolved; panel edges align with compact-transform cutoffs.
    double fourier_cycles_per_panel = 8.0;  // max (frequency * width)
    double fourier_ft_floor = 1e-12;        // cutoff for non-compact F[K]

    // Uniform pair-subsampling knob for the closed-form double sum. Off by
    // default and off in every acceptance configuration.
    std::optional<std::uint64_t> pair_cap;
    SeedPath pair_cap_seed;
};

// L2 inner product <p1, p2> of two KDEs.
double inner_product(const KdeEstimator& e1, const KdeEstimator& e2,
                     const InnerProductOptions& opts = {});

// G_jk = <p_j, p_k>, b_j = mean of p_j over the validation sample: the data
// of the aggregation objective lambda^T G lambda - 2 b^T lambda.
struct GramSystem {
    int M = 0;
    Eigen::MatrixXd G;
    Eigen::VectorXd b;
    GramBackend backend_used = GramBackend::automatic;
};

GramSystem gram_system(std::span<const KdeEstimator> components,
                       const SamplePoints& validation,
                       const InnerProductOptions& opts = {});

enum class WeightMode { linear, convex };

struct AggregateWeights {
    Eigen::VectorXd lambda;
    WeightMode constraint = WeightMode::convex;
    double objective = 0.0;
    // solver diagnostics (convex mode)
    double kkt_residual = 0.0;
    int iterations = 0;
    bool converged = true;
};

// Minimum-norm solution of G lambda = b; as a function in the component span
// this equals the orthonormal-basis linear aggregate.
AggregateWeights linear_weights(const GramSystem& sys, double rank_tol = 1e-10);

struct ConvexSolveOptions {
    double kkt_tol = 1e-8;
    int max_iterations = 100000;
};

AggregateWeights convex_weights(const GramSystem& sys,
                                const ConvexSolveOptions& opts = {});

struct Split {
    std::vector<int> train;       // sorted row indices
    std::vector<int> validation;  // sorted row indices
};

// `count` independent uniformly random partitions with sizes from
// split_sizes(n, scheme); split k draws from stream seed.child(k).
std::vector<Split> make_splits(int n, SplitScheme scheme, int count,
                               const SeedPath& seed);
// Same with an explicit training size m (1 <= m < n).
std::vector<Split> make_splits_sized(int n, int m, int count, const SeedPath& seed);

using EstimatorFactory =
    std::function<std::vector<KdeEstimator>(const SamplePoints& training)>;

// KDEs with the fixed kernel over the given bandwidths (one per bandwidth).
EstimatorFactory kde_grid_factory(KernelSpec kernel, std::vector<double> bandwidths);

// One KDE per (kernel, bandwidth) pair, kernel-major / bandwidth-minor.
EstimatorFactory multi_kernel_pool(const PinskerFamily& family,
                                   const BandwidthGrid& grid);
EstimatorFactory multi_kernel_pool(std::vector<KernelSpec> kernels,
                                   std::vector<double> bandwidths);

struct SplitRecord {
    Split split;
    std::vector<KdeEstimator> components;
    AggregateWeights weights;
};

// Pointwise mean over splits of the per-split weighted combinations.
class AveragedAggregate {
public:
    AveragedAggregate() = default;
    explicit AveragedAggregate(std::vector<SplitRecord> records);

    double eval1(double x) const;
    void eval_batch(std::span<const double> grid, std::span<double> out) const;
    // One split's combination only (Jensen-property measurements).
    void eval_batch_split(int split_index, std::span<const double> grid,
                          std::span<double> out) const;

    int split_count() const { return static_cast<int>(records_.size()); }
    const std::vector<SplitRecord>& records() const { return records_; }
    // Smallest bandwidth among components with nonzero weight.
    double min_active_bandwidth() const;

private:
    std::vector<SplitRecord> records_;
};

struct AggregateOptions {
    WeightMode mode = WeightMode::convex;
    InnerProductOptions inner;
    ConvexSolveOptions qp;
    double linear_rank_tol = 1e-10;
    std::optional<int> train_size;  // overrides the scheme's split sizes
};

AveragedAggregate averaged_aggregate(const SamplePoints& sample,
                                     const EstimatorFactory& factory,
                                     SplitScheme scheme, int split_count,
                                     const SeedPath& split_seed,
                                     const AggregateOptions& opts = {});

}  // namespace aggdens
