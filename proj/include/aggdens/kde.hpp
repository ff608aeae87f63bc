#pragma once

#include <complex>
#include <functional>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "aggdens/densities.hpp"
#include "aggdens/kernels.hpp"

namespace aggdens {

// Kernel density estimator p(x) = (m h^d)^{-1} sum_i K((X_i - x)/h).
// Immutable once fitted; training points are shared, not copied.
class KdeEstimator {
public:
    KdeEstimator() = default;

    double eval1(double x) const;
    double eval(std::span<const double> x) const;
    // Performance path: fills out[i] = p(grid[i]) for a d=1 grid. Each value
    // is a fixed pairwise-summation tree, so results do not depend on any
    // external parallelism over grid points.
    void eval_batch(std::span<const double> grid, std::span<double> out) const;

    // Leave-one-out value p_{-i}(X_i); needs m >= 2.
    double loo_eval(int i) const;

    int train_count() const { return m_; }
    int dim() const { return d_; }
    double bandwidth() const { return h_; }
    const KernelSpec& kernel() const { return kernel_; }
    double train1(int i) const { return (*pts_)[static_cast<std::size_t>(i) * d_]; }
    std::span<const double> train_point(int i) const {
        return {pts_->data() + static_cast<std::size_t>(i) * d_,
                static_cast<std::size_t>(d_)};
    }

    friend KdeEstimator fit_kde(std::shared_ptr<const std::vector<double>> pts,
                                int m, int d, double h, KernelSpec kernel);

private:
    std::shared_ptr<const std::vector<double>> pts_;
    int m_ = 0;
    int d_ = 1;
    double h_ = 0.0;
    KernelSpec kernel_;
};

KdeEstimator fit_kde(std::shared_ptr<const std::vector<double>> pts, int m,
                     int d, double h, KernelSpec kernel);
KdeEstimator fit_kde(const SamplePoints& sample, double h, const KernelSpec& kernel);
// Fits on the given subset of sample rows.
KdeEstimator fit_kde(const SamplePoints& sample, std::span<const int> rows,
                     double h, const KernelSpec& kernel);

// Bandwidth grid h_0 = (n log n)^{-1/d}, h_j = (1+a_n)^j h_0 with
// a_n = a_0/log n, last element exactly 1.
struct BandwidthGrid {
    int n = 0;
    int d = 1;
    double a0 = 1.0;
    double h0 = 0.0;
    double a_n = 0.0;
    std::vector<double> h;  // strictly increasing, h.back() == 1
    int M() const { return static_cast<int>(h.size()); }
};

BandwidthGrid bandwidth_grid(int n, int d, double a0 = 1.0);

enum class SplitScheme { asymptotic, equal_halves };

// (m, l) with m + l = n. asymptotic: m = floor(n (1 - 1/log n)), so
// l >= n/log n. equal_halves: the training part gets the extra point when n
// is odd.
std::pair<int, int> split_sizes(int n, SplitScheme scheme);

struct FourierMiseOptions {
    double rel_tol = 1e-9;
    double t_max_cap = 1e4;  // scan cap for slowly decaying |phi|^2 tails
    int max_panels = 4000;
};

// Exact MISE of the n-sample KDE through the Fourier representation
//   (2pi)^{-1} int |1-F[K](ht)|^2 |phi|^2 + n^{-1} (1-|phi|^2) F[K](ht)^2 dt
// (d = 1). phi is the characteristic function of the sampled density.
double fourier_mise(const KernelSpec& kernel, double h, int n,
                    const std::function<std::complex<double>(double)>& phi,
                    const FourierMiseOptions& opts = {});
double fourier_mise(const KernelSpec& kernel, double h, int n,
                    const DensityModel& truth,
                    const FourierMiseOptions& opts = {});

// Sharp minimax quantities for the Pinsker kernel over the Sobolev class
// Theta(beta, Q).
struct MinimaxQuantities {
    double beta = 0.0;
    double Q = 0.0;
    int d = 1;
    double c_star = 0.0;   // risk constant
    double d_star = 0.0;   // bandwidth constant
    double s_d = 0.0;      // unit-sphere surface

    double h_star(double n) const;     // D* n^{-1/(2 beta + d)}
    double risk_bound(double n) const; // C* n^{-2 beta/(2 beta + d)}
};

MinimaxQuantities pinsker_minimax(double beta, double Q, int d);
double pinsker_constant(double beta, double Q, int d);
double pinsker_optimal_bandwidth(double beta, double Q, int d, double n);

// Sobolev functional int |t|^{2 beta} |phi(t)|^2 dt by quadrature (d = 1).
double sobolev_functional(const DensityModel& model, double beta,
                          double rel_tol = 1e-9);

}  // namespace aggdens
