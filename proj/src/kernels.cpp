#include "aggdens/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "aggdens/errors.hpp"
#include "aggdens/quadrature.hpp"

namespace aggdens {
namespace {

constexpr double kPi = std::numbers::pi;

double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace

double sphere_surface(int d) {
    if (d < 1) throw std::invalid_argument("sphere_surface: d >= 1");
    if (d == 1) return 2.0;
    if (d == 2) return 2.0 * kPi;
    return 2.0 * std::pow(kPi, d / 2.0) / std::tgamma(d / 2.0);
}

double pinsker_q(double beta, int d) {
    return 1.0 / d - 2.0 / (beta + d) + 1.0 / (2.0 * beta + d);
}

// Spatial values of the Pinsker kernel K_beta(x) = (1/pi) int_0^1
// (1-t^beta) cos(tx) dt on Chebyshev-spaced abscissae over [0, x_max];
// cubic interpolation in between, two-term oscillatory asymptotic beyond.
struct KernelSpec::SpatialTable {
    double beta = 0.0;
    double x_max = 500.0;
    int n = 4096;
    std::vector<double> xs, vals;

    explicit SpatialTable(double b) : beta(b) {
        xs.resize(n);
        vals.resize(n);
        for (int k = 0; k < n; ++k) {
            const double theta = kPi * k / (n - 1);
            const double x = 0.5 * x_max * (1.0 - std::cos(theta));
            xs[k] = x;
            vals[k] = direct(x);
        }
    }

    double direct(double x) const {
        const int cycles = static_cast<int>(std::ceil(x / (2.0 * kPi)));
        const int panels = std::max(2, cycles / 2 + 2);
        const double b = beta;
        return composite_gl(
                   [b, x](double t) { return (1.0 - std::pow(t, b)) * std::cos(t * x); },
                   0.0, 1.0, panels, 16) /
               kPi;
    }

    double tail(double x) const {
        const double alg = std::tgamma(beta) * std::sin(0.5 * kPi * beta) /
                           std::pow(x, beta + 1.0);
        return (beta / kPi) * (alg - std::cos(x) / (x * x));
    }

    double operator()(double x) const {
        x = std::abs(x);
        if (x >= x_max) return tail(x);
        const double theta = std::acos(std::clamp(1.0 - 2.0 * x / x_max, -1.0, 1.0));
        const double idx = theta / kPi * (n - 1);
        int i0 = static_cast<int>(std::floor(idx)) - 1;
        i0 = std::clamp(i0, 0, n - 4);
        // Lagrange cubic through the 4 surrounding nodes
        double out = 0.0;
        for (int a = 0; a < 4; ++a) {
            double l = vals[i0 + a];
            for (int c = 0; c < 4; ++c) {
                if (c == a) continue;
                l *= (x - xs[i0 + c]) / (xs[i0 + a] - xs[i0 + c]);
            }
            out += l;
        }
        return out;
    }
};

KernelSpec KernelSpec::gaussian(int d) {
    if (d < 1) throw std::invalid_argument("gaussian kernel: d >= 1");
    KernelSpec k;
    k.kind_ = KernelKind::gaussian;
    k.d_ = d;
    return k;
}

KernelSpec KernelSpec::pinsker(double beta, int d) {
    if (!(beta > 0.0)) throw std::invalid_argument("pinsker kernel: beta > 0");
    if (d < 1) throw std::invalid_argument("pinsker kernel: d >= 1");
    KernelSpec k;
    k.kind_ = KernelKind::pinsker;
    k.d_ = d;
    k.beta_ = beta;
    if (d == 1) k.table_ = std::make_shared<const SpatialTable>(beta);
    return k;
}

KernelSpec KernelSpec::silverman() {
    KernelSpec k;
    k.kind_ = KernelKind::silverman;
    k.d_ = 1;
    return k;
}

KernelSpec KernelSpec::sinc() {
    KernelSpec k;
    k.kind_ = KernelKind::sinc;
    k.d_ = 1;
    return k;
}

double KernelSpec::ft_radial(double r) const {
    r = std::abs(r);
    double v = 0.0;
    switch (kind_) {
        case KernelKind::gaussian: v = std::exp(-0.5 * r * r); break;
        case KernelKind::pinsker: v = 1.0 - std::pow(r, beta_); break;
        case KernelKind::silverman: v = 1.0 / (1.0 + r * r * r * r); break;
        case KernelKind::sinc: v = r <= 1.0 ? 1.0 : 0.0; break;
    }
    return std::clamp(v, 0.0, 1.0);
}

double KernelSpec::ft(std::span<const double> t) const {
    if (static_cast<int>(t.size()) != d_)
        throw std::invalid_argument("kernel ft: dimension mismatch");
    return ft_radial(norm2(t));
}

double KernelSpec::eval1(double x) const {
    if (d_ != 1) throw UnsupportedCapability("eval1 needs a d = 1 kernel");
    switch (kind_) {
        case KernelKind::gaussian:
            return std::exp(-0.5 * x * x) / std::sqrt(2.0 * kPi);
        case KernelKind::pinsker:
            return (*table_)(x);
        case KernelKind::silverman: {
            const double u = std::abs(x) / std::numbers::sqrt2;
            return 0.5 * std::exp(-u) * std::sin(u + kPi / 4.0);
        }
        case KernelKind::sinc: {
            const double ax = std::abs(x);
            if (ax < 1e-4) {
                const double x2 = x * x;
                return (1.0 - x2 / 6.0 + x2 * x2 / 120.0) / kPi;
            }
            return std::sin(x) / (kPi * x);
        }
    }
    return 0.0;
}

double KernelSpec::eval(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != d_)
        throw std::invalid_argument("kernel eval: dimension mismatch");
    if (d_ == 1) return eval1(x[0]);
    if (kind_ == KernelKind::gaussian) {
        const double r = norm2(x);
        return std::exp(-0.5 * r * r) / std::pow(2.0 * kPi, d_ / 2.0);
    }
    throw UnsupportedCapability("spatial evaluation for " + name() +
                                " is only supported in d = 1");
}

double KernelSpec::l2_norm_sq() const {
    switch (kind_) {
        case KernelKind::gaussian: return std::pow(4.0 * kPi, -d_ / 2.0);
        case KernelKind::pinsker:
            return sphere_surface(d_) * pinsker_q(beta_, d_) /
                   std::pow(2.0 * kPi, d_);
        case KernelKind::silverman: return 3.0 / (8.0 * std::numbers::sqrt2);
        case KernelKind::sinc: return 1.0 / kPi;
    }
    return 0.0;
}

double KernelSpec::ft_sq_integral() const {
    return l2_norm_sq() * std::pow(2.0 * kPi, d_);
}

double KernelSpec::ft_support_radius() const {
    switch (kind_) {
        case KernelKind::pinsker:
        case KernelKind::sinc: return 1.0;
        default: return std::numeric_limits<double>::infinity();
    }
}

double KernelSpec::spatial_tail_radius() const {
    switch (kind_) {
        case KernelKind::gaussian: return 12.0;
        case KernelKind::silverman: return 45.0;
        // oscillatory 1/x^2 tails; truncation knob, not a sharp cutoff
        case KernelKind::pinsker:
        case KernelKind::sinc: return 400.0;
    }
    return 0.0;
}

std::string KernelSpec::name() const {
    switch (kind_) {
        case KernelKind::gaussian: return "gaussian";
        case KernelKind::pinsker: {
            char buf[48];
            std::snprintf(buf, sizeof buf, "pinsker:%g", beta_);
            return buf;
        }
        case KernelKind::silverman: return "silverman";
        case KernelKind::sinc: return "sinc";
    }
    return "?";
}

KernelSpec KernelSpec::parse(const std::string& name, int d) {
    if (name == "gaussian") return gaussian(d);
    if (name == "silverman") {
        if (d != 1) throw UnsupportedCapability("silverman kernel is d = 1 only");
        return silverman();
    }
    if (name == "sinc") {
        if (d != 1) throw UnsupportedCapability("sinc kernel is d = 1 only");
        return sinc();
    }
    if (name.rfind("pinsker:", 0) == 0) {
        const double beta = std::stod(name.substr(8));
        return pinsker(beta, d);
    }
    throw ConfigError("unknown kernel: " + name);
}

AdmissibilityReport validate_kernel_ft(const std::function<double(double)>& ft_radial,
                                       const AdmissibilityGrid& grid) {
    AdmissibilityReport rep;
    double running_min = ft_radial(0.0);
    rep.worst_range_violation =
        std::max(std::max(running_min - 1.0, -running_min), 0.0);
    for (int i = 1; i < grid.points; ++i) {
        const double r = grid.r_max * i / (grid.points - 1);
        const double v = ft_radial(r);
        rep.worst_range_violation =
            std::max(rep.worst_range_violation, std::max(v - 1.0, -v));
        // rise above the running minimum, not just the one-step increase
        rep.worst_monotonicity_violation =
            std::max(rep.worst_monotonicity_violation, v - running_min);
        running_min = std::min(running_min, v);
    }
    rep.pass = rep.worst_range_violation <= grid.tol &&
               rep.worst_monotonicity_violation <= grid.tol;
    return rep;
}

AdmissibilityReport validate_kernel(const KernelSpec& k,
                                    const AdmissibilityGrid& grid) {
    return validate_kernel_ft([&k](double r) { return k.ft_radial(r); }, grid);
}

std::vector<KernelSpec> PinskerFamily::kernels() const {
    std::vector<KernelSpec> out;
    out.reserve(betas.size());
    for (double b : betas) out.push_back(KernelSpec::pinsker(b, d));
    return out;
}

PinskerFamily pinsker_family(int N, int d) {
    if (N < 2) throw std::invalid_argument("pinsker_family: N >= 2");
    if (d < 1) throw std::invalid_argument("pinsker_family: d >= 1");
    PinskerFamily fam;
    fam.N = N;
    fam.d = d;
    fam.betas.resize(N);
    const double step = 1.0 / std::sqrt(static_cast<double>(N));
    fam.betas[0] = d / 2.0;
    for (int j = 1; j < N; ++j) fam.betas[j] = fam.betas[j - 1] + step;
    return fam;
}

}  // namespace aggdens
