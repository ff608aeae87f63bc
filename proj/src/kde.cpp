#include "aggdens/kde.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "aggdens/errors.hpp"
#include "aggdens/quadrature.hpp"

namespace aggdens {
namespace {

constexpr double kPi = std::numbers::pi;

// Pairwise kernel sum over training points [i0, i1) at a fixed query point.
template <class Term>
double pairwise_terms(int i0, int i1, const Term& term) {
    if (i1 - i0 <= 16) {
        double s = 0.0;
        for (int i = i0; i < i1; ++i) s += term(i);
        return s;
    }
    const int mid = i0 + (i1 - i0) / 2;
    return pairwise_terms(i0, mid, term) + pairwise_terms(mid, i1, term);
}

}  // namespace

KdeEstimator fit_kde(std::shared_ptr<const std::vector<double>> pts, int m,
                     int d, double h, KernelSpec kernel) {
    if (!(h > 0.0)) throw std::invalid_argument("fit_kde: bandwidth must be > 0");
    if (m < 1) throw std::invalid_argument("fit_kde: empty training set");
    if (!pts || static_cast<int>(pts->size()) != m * d)
        throw std::invalid_argument("fit_kde: bad point buffer");
    if (d > 1 && kernel.kind() != KernelKind::gaussian)
        throw UnsupportedCapability("spatial KDE in d >= 2 needs the Gaussian kernel");
    KdeEstimator e;
    e.pts_ = std::move(pts);
    e.m_ = m;
    e.d_ = d;
    e.h_ = h;
    e.kernel_ = std::move(kernel);
    return e;
}

KdeEstimator fit_kde(const SamplePoints& sample, double h, const KernelSpec& kernel) {
    auto buf = std::make_shared<std::vector<double>>(sample.pts);
    return fit_kde(std::move(buf), sample.n, sample.d, h, kernel);
}

KdeEstimator fit_kde(const SamplePoints& sample, std::span<const int> rows,
                     double h, const KernelSpec& kernel) {
    auto buf = std::make_shared<std::vector<double>>();
    buf->reserve(rows.size() * sample.d);
    for (int r : rows) {
        const auto p = sample.point(r);
        buf->insert(buf->end(), p.begin(), p.end());
    }
    return fit_kde(std::move(buf), static_cast<int>(rows.size()), sample.d, h, kernel);
}

double KdeEstimator::eval1(double x) const {
    if (d_ != 1) throw std::invalid_argument("eval1: estimator is not 1-d");
    const auto& xs = *pts_;
    const double inv_h = 1.0 / h_;
    const double s = pairwise_terms(0, m_, [&](int i) {
        return kernel_.eval1((xs[i] - x) * inv_h);
    });
    return s / (m_ * h_);
}

double KdeEstimator::eval(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != d_)
        throw std::invalid_argument("eval: dimension mismatch");
    if (d_ == 1) return eval1(x[0]);
    const auto& xs = *pts_;
    std::vector<double> u(d_);
    const double s = pairwise_terms(0, m_, [&](int i) {
        for (int k = 0; k < d_; ++k) u[k] = (xs[static_cast<std::size_t>(i) * d_ + k] - x[k]) / h_;
        return kernel_.eval(u);
    });
    return s / (m_ * std::pow(h_, d_));
}

void KdeEstimator::eval_batch(std::span<const double> grid,
                              std::span<double> out) const {
    if (grid.size() != out.size())
        throw std::invalid_argument("eval_batch: size mismatch");
    if (d_ != 1) throw std::invalid_argument("eval_batch: estimator is not 1-d");
    const auto& xs = *pts_;
    const double inv_h = 1.0 / h_;
    const double scale = 1.0 / (m_ * h_);
    if (kernel_.kind() == KernelKind::gaussian) {
        const double c = 1.0 / std::sqrt(2.0 * kPi);
        for (std::size_t g = 0; g < grid.size(); ++g) {
            const double x = grid[g];
            const double s = pairwise_terms(0, m_, [&](int i) {
                const double u = (xs[i] - x) * inv_h;
                return u * u < 1400.0 ? std::exp(-0.5 * u * u) : 0.0;
            });
            out[g] = s * c * scale;
        }
        return;
    }
    for (std::size_t g = 0; g < grid.size(); ++g) {
        const double x = grid[g];
        const double s = pairwise_terms(0, m_, [&](int i) {
            return kernel_.eval1((xs[i] - x) * inv_h);
        });
        out[g] = s * scale;
    }
}

double KdeEstimator::loo_eval(int i) const {
    if (m_ < 2) throw std::invalid_argument("loo_eval: needs m >= 2");
    if (i < 0 || i >= m_) throw std::invalid_argument("loo_eval: bad index");
    const auto& xs = *pts_;
    if (d_ == 1) {
        const double x = xs[i];
        const double inv_h = 1.0 / h_;
        const double s = pairwise_terms(0, m_, [&](int j) {
            return j == i ? 0.0 : kernel_.eval1((xs[j] - x) * inv_h);
        });
        return s / ((m_ - 1) * h_);
    }
    const auto x = train_point(i);
    std::vector<double> u(d_);
    const double s = pairwise_terms(0, m_, [&](int j) {
        if (j == i) return 0.0;
        for (int k = 0; k < d_; ++k) u[k] = (xs[static_cast<std::size_t>(j) * d_ + k] - x[k]) / h_;
        return kernel_.eval(u);
    });
    return s / ((m_ - 1) * std::pow(h_, d_));
}

BandwidthGrid bandwidth_grid(int n, int d, double a0) {
    if (n < 3) throw std::invalid_argument("bandwidth_grid: needs n >= 3");
    if (!(a0 > 0.0)) throw std::invalid_argument("bandwidth_grid: a0 must be > 0");
    BandwidthGrid g;
    g.n = n;
    g.d = d;
    g.a0 = a0;
    const double logn = std::log(static_cast<double>(n));
    g.h0 = std::pow(n * logn, -1.0 / d);
    g.a_n = a0 / logn;
    g.h.push_back(g.h0);
    const double step = 1.0 + g.a_n;
    for (int j = 1;; ++j) {
        const double hj = g.h0 * std::pow(step, j);
        if (hj >= 1.0) break;
        g.h.push_back(hj);
    }
    g.h.push_back(1.0);
    return g;
}

std::pair<int, int> split_sizes(int n, SplitScheme scheme) {
    if (n < 3) throw std::invalid_argument("split_sizes: needs n >= 3");
    int m = 0;
    if (scheme == SplitScheme::asymptotic) {
        m = static_cast<int>(std::floor(n * (1.0 - 1.0 / std::log(static_cast<double>(n)))));
    } else {
        m = (n + 1) / 2;  // training part gets the extra point
    }
    return {m, n - m};
}

double fourier_mise(const KernelSpec& kernel, double h, int n,
                    const std::function<std::complex<double>(double)>& phi,
                    const FourierMiseOptions& opts) {
    if (kernel.dim() != 1)
        throw UnsupportedCapability("fourier_mise supports d = 1 kernels");
    if (!(h > 0.0) || n < 1) throw std::invalid_argument("fourier_mise: bad h or n");

    // Kernel factor cutoff: exact support for compact transforms, else the
    // radius where F[K](ht) drops below 1e-12.
    double t_kernel;
    if (std::isfinite(kernel.ft_support_radius())) {
        t_kernel = kernel.ft_support_radius() / h;
    } else {
        double r = 1.0;
        while (kernel.ft_radial(r) > 1e-12 && r < 1e7) r *= 1.25;
        t_kernel = r / h;
    }
    // Bias tail needs |phi|^2 to be negligible as well.
    double t_phi = 1.0;
    while (t_phi < opts.t_max_cap && std::norm(phi(t_phi)) * t_phi > 1e-13)
        t_phi *= 1.25;
    const double t_max = std::min(std::max(t_kernel, t_phi), opts.t_max_cap * 10.0);

    const auto integrand = [&](double t) {
        const double fk = kernel.ft_radial(h * t);
        const double p2 = std::norm(phi(t));
        const double bias = (1.0 - fk) * (1.0 - fk) * p2;
        const double var = (1.0 - p2) * fk * fk / n;
        return bias + var;
    };
    const auto res = adaptive_gk15(integrand, 0.0, t_max, opts.rel_tol, 0.0,
                                   opts.max_panels);
    return std::max(res.value / kPi, 0.0);
}

double fourier_mise(const KernelSpec& kernel, double h, int n,
                    const DensityModel& truth, const FourierMiseOptions& opts) {
    if (truth.dim() != 1)
        throw UnsupportedCapability("fourier_mise supports d = 1 densities");
    if (!truth.has_char_fn())
        throw UnsupportedCapability(
            "fourier_mise needs the characteristic function of the density");
    return fourier_mise(
        kernel, h, n, [&truth](double t) { return truth.char_fn1(t); }, opts);
}

double MinimaxQuantities::h_star(double n) const {
    return d_star * std::pow(n, -1.0 / (2.0 * beta + d));
}

double MinimaxQuantities::risk_bound(double n) const {
    return c_star * std::pow(n, -2.0 * beta / (2.0 * beta + d));
}

MinimaxQuantities pinsker_minimax(double beta, double Q, int d) {
    if (!(beta > d / 2.0))
        throw std::invalid_argument("pinsker_minimax: needs beta > d/2");
    if (!(Q > 0.0)) throw std::invalid_argument("pinsker_minimax: needs Q > 0");
    MinimaxQuantities q;
    q.beta = beta;
    q.Q = Q;
    q.d = d;
    q.s_d = sphere_surface(d);
    const double twob_d = 2.0 * beta + d;
    q.c_star = std::pow(Q * twob_d, d / twob_d) / (d * std::pow(2.0 * kPi, d)) *
               std::pow(beta * q.s_d / (beta + d), 2.0 * beta / twob_d);
    q.d_star = std::pow(beta * q.s_d / (Q * (beta + d) * twob_d), 1.0 / twob_d);
    return q;
}

double pinsker_constant(double beta, double Q, int d) {
    return pinsker_minimax(beta, Q, d).c_star;
}

double pinsker_optimal_bandwidth(double beta, double Q, int d, double n) {
    return pinsker_minimax(beta, Q, d).h_star(n);
}

double sobolev_functional(const DensityModel& model, double beta, double rel_tol) {
    if (model.dim() != 1)
        throw UnsupportedCapability("sobolev_functional supports d = 1");
    if (!model.has_char_fn())
        throw UnsupportedCapability("sobolev_functional needs a characteristic function");
    double t_max = 2.0;
    while (t_max < 1e5 &&
           std::pow(t_max, 2.0 * beta) * std::norm(model.char_fn1(t_max)) * t_max > 1e-14)
        t_max *= 1.25;
    if (t_max >= 1e5)
        throw QuadratureError("sobolev functional does not appear to converge",
                              std::pow(t_max, 2.0 * beta) * std::norm(model.char_fn1(t_max)));
    const auto res = adaptive_gk15(
        [&](double t) { return std::pow(std::abs(t), 2.0 * beta) * std::norm(model.char_fn1(t)); },
        0.0, t_max, rel_tol);
    return 2.0 * res.value;
}

}  // namespace aggdens
