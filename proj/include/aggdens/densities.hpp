#pragma once

#include <complex>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "aggdens/rng.hpp"

namespace aggdens {

// An i.i.d. sample of n points in R^d together with the seed provenance that
// produced it; regeneration from the same provenance is bit-identical.
struct SamplePoints {
    int n = 0;
    int d = 1;
    std::vector<double> pts;  // row-major, n*d
    SeedPath provenance;

    std::span<const double> point(int i) const {
        return {pts.data() + static_cast<std::size_t>(i) * d,
                static_cast<std::size_t>(d)};
    }
    double x1(int i) const { return pts[static_cast<std::size_t>(i) * d]; }
};

// Analytic ground-truth density: evaluable, sampleable, with a closed-form
// characteristic function where one exists. Instances are immutable and safe
// to share across threads.
class DensityModel {
public:
    enum class Kind { gaussian_mixture, exponential, block_oscillator, custom };

    // weights sum to 1; means/variances are k x d (diagonal covariances).
    static DensityModel gaussian_mixture(std::vector<double> weights,
                                         std::vector<std::vector<double>> means,
                                         std::vector<std::vector<double>> variances);
    static DensityModel exponential(double rate);
    // Mixture w * N(0,1) + (1-w) * (T unit-height blocks of length 1/T);
    // block i covers (2(i-1)/T, (2i-1)/T].
    static DensityModel block_oscillator(int blocks, double gaussian_weight = 0.5);

    struct CustomSpec {
        int d = 1;
        std::function<double(std::span<const double>)> evaluator;
        std::function<void(int n, StreamRng&, std::vector<double>& out)> sampler;
        std::function<std::complex<double>(std::span<const double>)> char_fn;  // optional
        double sup_norm_bound = 0.0;
        std::pair<double, double> window{-1.0, 1.0};
        std::vector<double> breakpoints;  // interior discontinuities
        std::function<double(double)> cdf1;  // optional, d=1
    };
    static DensityModel custom(CustomSpec spec);

    double eval(std::span<const double> x) const;
    double eval1(double x) const;  // d must be 1

    SamplePoints sample(int n, const SeedPath& seed) const;

    bool has_char_fn() const;
    std::complex<double> char_fn(std::span<const double> t) const;
    std::complex<double> char_fn1(double t) const;

    double sup_norm_bound() const;

    // Documented window outside which the density mass is negligible
    // (tail mass below 1e-14 for the built-ins).
    std::pair<double, double> support_window(int axis = 0) const;

    // Interior discontinuity locations (block edges, the exponential origin);
    // quadratures align panels here.
    const std::vector<double>& breakpoints() const;

    bool has_cdf1() const;
    double cdf1(double x) const;  // d=1 analytic CDF where available

    int dim() const { return d_; }
    Kind kind() const { return kind_; }

    // Parameter access for serialization/tests.
    const std::vector<double>& mixture_weights() const { return weights_; }
    const std::vector<std::vector<double>>& mixture_means() const { return means_; }
    const std::vector<std::vector<double>>& mixture_variances() const { return vars_; }
    double rate() const { return rate_; }
    int blocks() const { return blocks_; }
    double gaussian_weight() const { return gauss_w_; }

    std::string to_json() const;
    static DensityModel from_json(const std::string& text);

private:
    DensityModel() = default;

    Kind kind_ = Kind::custom;
    int d_ = 1;
    // gaussian_mixture
    std::vector<double> weights_;
    std::vector<std::vector<double>> means_;
    std::vector<std::vector<double>> vars_;
    // exponential
    double rate_ = 0.0;
    // block_oscillator
    int blocks_ = 0;
    double gauss_w_ = 0.5;
    // custom
    std::shared_ptr<const CustomSpec> custom_;

    std::pair<double, double> window_{0.0, 0.0};
    std::vector<double> breakpoints_;
    double sup_bound_ = 0.0;
};

// Built-in catalog used by the experiments ('gaussian', 'exponential',
// 'claw', 'smooth_comb', 'dens1', 'dens2').
DensityModel density_by_name(const std::string& name);
DensityModel standard_gaussian(int d = 1);
// Marron & Wand (1992) mixtures #10 and #14; parameters are recorded in
// configs/marron_wand_densities.json.
DensityModel claw_density();
DensityModel smooth_comb_density();
DensityModel dens1();  // block oscillator, T = 14
DensityModel dens2();  // block oscillator, T = 10

// Plain-text sample files: one point per line, whitespace-separated
// coordinates, '#' starts a comment.
SamplePoints read_sample_file(const std::string& path);
void write_sample_file(const std::string& path, const SamplePoints& sample);

}  // namespace aggdens
