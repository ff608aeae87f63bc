#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace aggdens {

enum class KernelKind { gaussian, pinsker, silverman, sinc };

// Surface area of the unit sphere in R^d, S_d = 2 pi^{d/2} / Gamma(d/2).
double sphere_surface(int d);

// A smoothing kernel with spatial and Fourier-domain evaluation. The Fourier
// convention is F[K](t) = int e^{i x t} K(x) dx, so the standard Gaussian
// kernel has F[K](t) = exp(-|t|^2/2). Instances are immutable; kernels
// defined through their transform (Pinsker) carry an eagerly built spatial
// table, so copies are cheap and sharing across threads is safe.
class KernelSpec {
public:
    KernelSpec() = default;  // Gaussian, d = 1

    static KernelSpec gaussian(int d = 1);
    static KernelSpec pinsker(double beta, int d = 1);
    static KernelSpec silverman();  // d = 1
    static KernelSpec sinc();       // d = 1

    // F[K] as a function of r = |t|; values clamped to [0, 1].
    double ft_radial(double r) const;
    double ft(std::span<const double> t) const;

    double eval1(double x) const;               // spatial value, d = 1
    double eval(std::span<const double> x) const;

    double l2_norm_sq() const;  // ||K||^2 = (2pi)^{-d} int F[K]^2, closed form

    // int_{R^d} F[K](t)^2 dt = (2pi)^d ||K||^2. For the Pinsker kernel this
    // is the quantity S_d Q_d(beta) that the minimax remainder bounds use.
    double ft_sq_integral() const;

    // Radius beyond which F[K] vanishes exactly (Pinsker, sinc);
    // +inf for the others.
    double ft_support_radius() const;

    // Truncation radius for spatial quadratures against this kernel. For the
    // oscillatory kernels (Pinsker, sinc) the spatial tails decay only
    // algebraically and this is a documented knob rather than a guarantee.
    double spatial_tail_radius() const;

    KernelKind kind() const { return kind_; }
    int dim() const { return d_; }
    double beta() const { return beta_; }

    std::string name() const;
    // "gaussian", "pinsker:<beta>", "silverman", "sinc"
    static KernelSpec parse(const std::string& name, int d = 1);

private:
    KernelKind kind_ = KernelKind::gaussian;
    int d_ = 1;
    double beta_ = 0.0;

    struct SpatialTable;
    std::shared_ptr<const SpatialTable> table_;
};

struct AdmissibilityReport {
    bool pass = false;
    double worst_range_violation = 0.0;     // distance of F[K] outside [0,1]
    double worst_monotonicity_violation = 0.0;  // largest radial increase
};

struct AdmissibilityGrid {
    double r_max = 50.0;
    int points = 10000;
    double tol = 1e-12;
};

// Checks the admissibility conditions for aggregation oracle bounds:
// F[K] in [0,1] and radially nonincreasing, on a grid over [0, r_max].
AdmissibilityReport validate_kernel(const KernelSpec& k,
                                    const AdmissibilityGrid& grid = {});
AdmissibilityReport validate_kernel_ft(const std::function<double(double)>& ft_radial,
                                       const AdmissibilityGrid& grid = {});

// Family of Pinsker exponents beta_1 = d/2, beta_j = beta_{j-1} + N^{-1/2}.
struct PinskerFamily {
    int N = 0;
    int d = 1;
    std::vector<double> betas;

    std::vector<KernelSpec> kernels() const;
};

PinskerFamily pinsker_family(int N, int d);

// Q_d(beta) = 1/d - 2/(beta+d) + 1/(2*beta+d); bounded by
// 1/(6d) <= Q_d <= 1/d for beta >= d/2.
double pinsker_q(double beta, int d);

}  // namespace aggdens
