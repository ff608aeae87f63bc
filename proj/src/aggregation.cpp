#include "aggdens/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "aggdens/errors.hpp"
#include "aggdens/quadrature.hpp"

namespace aggdens {
namespace {

constexpr double kPi = std::numbers::pi;

bool is_gaussian_kde(const KdeEstimator& e) {
    return e.kernel().kind() == KernelKind::gaussian;
}

double data_min(const KdeEstimator& e) {
    double lo = e.train1(0);
    for (int i = 1; i < e.train_count(); ++i) lo = std::min(lo, e.train1(i));
    return lo;
}
double data_max(const KdeEstimator& e) {
    double hi = e.train1(0);
    for (int i = 1; i < e.train_count(); ++i) hi = std::max(hi, e.train1(i));
    return hi;
}

// ---- gaussian closed form -------------------------------------------------

double ip_gaussian_closed_form(const KdeEstimator& a, const KdeEstimator& b,
                               const InnerProductOptions& opts) {
    const int d = a.dim();
    const double s2 = a.bandwidth() * a.bandwidth() + b.bandwidth() * b.bandwidth();
    const double norm = std::pow(2.0 * kPi * s2, -0.5 * d);
    const std::size_t total = static_cast<std::size_t>(a.train_count()) *
                              static_cast<std::size_t>(b.train_count());

    const auto term = [&](int i, int j) {
        double q = 0.0;
        const auto xi = a.train_point(i);
        const auto yj = b.train_point(j);
        for (int k = 0; k < d; ++k) {
            const double u = xi[k] - yj[k];
            q += u * u;
        }
        return std::exp(-0.5 * q / s2);
    };

    if (opts.pair_cap && total > *opts.pair_cap) {
        StreamRng rng(opts.pair_cap_seed);
        const std::uint64_t k = *opts.pair_cap;
        double s = 0.0;
        for (std::uint64_t c = 0; c < k; ++c) {
            const int i = static_cast<int>(rng.below(a.train_count()));
            const int j = static_cast<int>(rng.below(b.train_count()));
            s += term(i, j);
        }
        return norm * s / static_cast<double>(k);
    }

    std::vector<double> rows(a.train_count());
    for (int i = 0; i < a.train_count(); ++i) {
        double s = 0.0;
        for (int j = 0; j < b.train_count(); ++j) s += term(i, j);
        rows[i] = s;
    }
    return norm * pairwise_sum(rows) /
           (static_cast<double>(a.train_count()) * b.train_count());
}

// ---- fourier quadrature ---------------------------------------------------

double ft_cutoff(const KdeEstimator& e, double ft_floor) {
    const double support = e.kernel().ft_support_radius();
    if (std::isfinite(support)) return support / e.bandwidth();
    double r = 1.0;
    while (e.kernel().ft_radial(r) > ft_floor && r < 1e7) r *= 1.25;
    return r / e.bandwidth();
}

struct FourierGrid {
    std::vector<double> nodes;    // ascending
    std::vector<double> weights;  // matching GL weights
};

// Panels between every pair of consecutive boundaries, sized so the fastest
// empirical-CF oscillation stays resolved; the first segment is refined
// geometrically toward 0 for transforms with a kink there (Pinsker beta < 1).
FourierGrid build_fourier_grid(std::vector<double> boundaries, double max_freq,
                               double cycles_per_panel) {
    std::sort(boundaries.begin(), boundaries.end());
    boundaries.erase(std::unique(boundaries.begin(), boundaries.end()),
                     boundaries.end());
    const double w = cycles_per_panel / std::max(max_freq, 1e-9);
    std::vector<double> edges;
    edges.push_back(0.0);
    double first = std::min(boundaries.size() > 1 ? boundaries[1] : w, w);
    for (int k = 12; k >= 1; --k) edges.push_back(first * std::pow(0.5, k));
    for (std::size_t s = 0; s + 1 < boundaries.size(); ++s) {
        const double lo = boundaries[s], hi = boundaries[s + 1];
        const int panels = std::max(1, static_cast<int>(std::ceil((hi - lo) / w)));
        for (int p = 1; p <= panels; ++p)
            edges.push_back(lo + (hi - lo) * p / panels);
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

    const auto xs = gl_nodes(16);
    const auto ws = gl_weights(16);
    FourierGrid g;
    g.nodes.reserve((edges.size() - 1) * 16);
    g.weights.reserve((edges.size() - 1) * 16);
    for (std::size_t s = 0; s + 1 < edges.size(); ++s) {
        const double c = 0.5 * (edges[s] + edges[s + 1]);
        const double half = 0.5 * (edges[s + 1] - edges[s]);
        if (half <= 0.0) continue;
        for (int i = 0; i < 16; ++i) {
            g.nodes.push_back(c + half * xs[i]);
            g.weights.push_back(half * ws[i]);
        }
    }
    return g;
}

std::vector<std::complex<double>> empirical_cf(const KdeEstimator& e,
                                               std::span<const double> ts) {
    std::vector<std::complex<double>> out(ts.size());
    const int m = e.train_count();
    for (std::size_t k = 0; k < ts.size(); ++k) {
        const double t = ts[k];
        double re = 0.0, im = 0.0;
        for (int i = 0; i < m; ++i) {
            const double a = t * e.train1(i);
            re += std::cos(a);
            im += std::sin(a);
        }
        out[k] = std::complex<double>(re / m, im / m);
    }
    return out;
}

double ip_fourier_pair(const KdeEstimator& a, const KdeEstimator& b,
                       const InnerProductOptions& opts) {
    if (a.dim() != 1 || b.dim() != 1)
        throw UnsupportedCapability("fourier inner product supports d = 1");
    const double ca = ft_cutoff(a, opts.fourier_ft_floor);
    const double cb = ft_cutoff(b, opts.fourier_ft_floor);
    const double t_max = std::min(ca, cb);
    const double span = std::max(data_max(a), data_max(b)) -
                        std::min(data_min(a), data_min(b));
    FourierGrid grid = build_fourier_grid({0.0, std::min(ca, t_max),
                                           std::min(cb, t_max), t_max},
                                          span, opts.fourier_cycles_per_panel);
    const auto cfa = empirical_cf(a, grid.nodes);
    const auto cfb = empirical_cf(b, grid.nodes);
    std::vector<double> parts(grid.nodes.size());
    for (std::size_t k = 0; k < grid.nodes.size(); ++k) {
        const double t = grid.nodes[k];
        const double f = a.kernel().ft_radial(a.bandwidth() * t) *
                         b.kernel().ft_radial(b.bandwidth() * t);
        parts[k] = grid.weights[k] * f *
                   (cfa[k].real() * cfb[k].real() + cfa[k].imag() * cfb[k].imag());
    }
    return pairwise_sum(parts) / kPi;
}

// ---- spatial quadrature ---------------------------------------------------

double ip_spatial(const KdeEstimator& a, const KdeEstimator& b,
                  const InnerProductOptions& opts) {
    if (a.dim() > 2)
        throw UnsupportedCapability("spatial inner product supports d <= 2");
    if (a.dim() == 2) {
        // tensor-product panels over the joint data hull
        double lo[2], hi[2];
        for (int k = 0; k < 2; ++k) {
            lo[k] = 1e300;
            hi[k] = -1e300;
            for (int i = 0; i < a.train_count(); ++i) {
                lo[k] = std::min(lo[k], a.train_point(i)[k]);
                hi[k] = std::max(hi[k], a.train_point(i)[k]);
            }
            for (int i = 0; i < b.train_count(); ++i) {
                lo[k] = std::min(lo[k], b.train_point(i)[k]);
                hi[k] = std::max(hi[k], b.train_point(i)[k]);
            }
            const double pad = std::max(a.kernel().spatial_tail_radius() * a.bandwidth(),
                                        b.kernel().spatial_tail_radius() * b.bandwidth());
            lo[k] -= pad;
            hi[k] += pad;
        }
        const double hmin = std::min(a.bandwidth(), b.bandwidth());
        const int order = 8;
        int panels[2];
        for (int k = 0; k < 2; ++k) {
            panels[k] = static_cast<int>(
                std::ceil((hi[k] - lo[k]) / (opts.spatial_panel_scale * hmin)));
            panels[k] = std::clamp(panels[k], 8, 600);
        }
        const auto xs = gl_nodes(order);
        const auto ws = gl_weights(order);
        double total = 0.0;
        std::vector<double> pt(2);
        for (int p0 = 0; p0 < panels[0]; ++p0)
            for (int i0 = 0; i0 < order; ++i0) {
                const double w0 = (hi[0] - lo[0]) / panels[0];
                pt[0] = lo[0] + (p0 + 0.5 + 0.5 * xs[i0]) * w0;
                for (int p1 = 0; p1 < panels[1]; ++p1)
                    for (int i1 = 0; i1 < order; ++i1) {
                        const double w1 = (hi[1] - lo[1]) / panels[1];
                        pt[1] = lo[1] + (p1 + 0.5 + 0.5 * xs[i1]) * w1;
                        total += 0.25 * ws[i0] * ws[i1] * w0 * w1 * a.eval(pt) * b.eval(pt);
                    }
            }
        return total;
    }

    double lo, hi;
    if (opts.spatial_window) {
        lo = opts.spatial_window->first;
        hi = opts.spatial_window->second;
    } else {
        const double pad = std::max(a.kernel().spatial_tail_radius() * a.bandwidth(),
                                    b.kernel().spatial_tail_radius() * b.bandwidth());
        lo = std::min(data_min(a), data_min(b)) - pad;
        hi = std::max(data_max(a), data_max(b)) + pad;
    }
    const double hmin = std::min(a.bandwidth(), b.bandwidth());
    int panels = static_cast<int>(
        std::ceil((hi - lo) / (opts.spatial_panel_scale * hmin)));
    panels = std::clamp(panels, 16, opts.spatial_max_panels);

    const auto xs = gl_nodes(opts.spatial_order);
    const auto ws = gl_weights(opts.spatial_order);
    const double w = (hi - lo) / panels;
    std::vector<double> nodes;
    nodes.reserve(static_cast<std::size_t>(panels) * xs.size());
    for (int p = 0; p < panels; ++p) {
        const double c = lo + (p + 0.5) * w;
        for (std::size_t i = 0; i < xs.size(); ++i)
            nodes.push_back(c + 0.5 * w * xs[i]);
    }
    std::vector<double> va(nodes.size()), vb(nodes.size());
    a.eval_batch(nodes, va);
    b.eval_batch(nodes, vb);
    std::vector<double> parts(nodes.size());
    for (std::size_t k = 0; k < nodes.size(); ++k)
        parts[k] = 0.5 * w * ws[k % ws.size()] * va[k] * vb[k];
    return pairwise_sum(parts);
}

GramBackend pick_backend(std::span<const KdeEstimator> comps,
                         const InnerProductOptions& opts) {
    if (opts.backend != GramBackend::automatic) return opts.backend;
    if (std::all_of(comps.begin(), comps.end(), is_gaussian_kde))
        return GramBackend::gaussian_closed_form;
    if (comps.front().dim() == 1) return GramBackend::fourier_quadrature;
    return GramBackend::spatial_quadrature;
}

}  // namespace

double inner_product(const KdeEstimator& e1, const KdeEstimator& e2,
                     const InnerProductOptions& opts) {
    if (e1.dim() != e2.dim())
        throw std::invalid_argument("inner_product: dimension mismatch");
    const KdeEstimator comps[2] = {e1, e2};
    switch (pick_backend(comps, opts)) {
        case GramBackend::gaussian_closed_form:
            if (!is_gaussian_kde(e1) || !is_gaussian_kde(e2))
                throw UnsupportedCapability(
                    "gaussian_closed_form needs Gaussian-kernel KDEs");
            return ip_gaussian_closed_form(e1, e2, opts);
        case GramBackend::fourier_quadrature:
            return ip_fourier_pair(e1, e2, opts);
        case GramBackend::spatial_quadrature:
            return ip_spatial(e1, e2, opts);
        case GramBackend::automatic: break;
    }
    throw std::logic_error("unreachable backend");
}

GramSystem gram_system(std::span<const KdeEstimator> components,
                       const SamplePoints& validation,
                       const InnerProductOptions& opts) {
    if (components.empty()) throw std::invalid_argument("gram_system: no components");
    if (validation.n < 1) throw std::invalid_argument("gram_system: empty validation");
    const int M = static_cast<int>(components.size());
    GramSystem sys;
    sys.M = M;
    sys.G.resize(M, M);
    sys.b.resize(M);
    sys.backend_used = pick_backend(components, opts);

    if (sys.backend_used == GramBackend::fourier_quadrature) {
        // One shared node grid; empirical CFs are cached per distinct
        // training buffer, and each pair integrates only over its own
        // transform support.
        double t_max = 0.0, span_lo = 1e300, span_hi = -1e300;
        std::vector<double> cutoffs(M);
        std::vector<double> boundaries{0.0};
        for (int j = 0; j < M; ++j) {
            cutoffs[j] = ft_cutoff(components[j], opts.fourier_ft_floor);
            t_max = std::max(t_max, cutoffs[j]);
            boundaries.push_back(cutoffs[j]);
            span_lo = std::min(span_lo, data_min(components[j]));
            span_hi = std::max(span_hi, data_max(components[j]));
        }
        FourierGrid grid = build_fourier_grid(std::move(boundaries), span_hi - span_lo,
                                              opts.fourier_cycles_per_panel);
        std::map<const void*, std::vector<std::complex<double>>> cf_cache;
        std::vector<const std::vector<std::complex<double>>*> cf(M);
        std::vector<std::vector<double>> ftv(M);
        for (int j = 0; j < M; ++j) {
            const void* key = components[j].train_point(0).data();
            auto it = cf_cache.find(key);
            if (it == cf_cache.end())
                it = cf_cache.emplace(key, empirical_cf(components[j], grid.nodes)).first;
            cf[j] = &it->second;
            ftv[j].resize(grid.nodes.size());
            for (std::size_t k = 0; k < grid.nodes.size(); ++k)
                ftv[j][k] = components[j].kernel().ft_radial(
                    components[j].bandwidth() * grid.nodes[k]);
        }
        for (int j = 0; j < M; ++j)
            for (int l = j; l < M; ++l) {
                const double cut = std::min(cutoffs[j], cutoffs[l]);
                std::vector<double> parts;
                parts.reserve(grid.nodes.size());
                for (std::size_t k = 0; k < grid.nodes.size(); ++k) {
                    if (grid.nodes[k] > cut) break;
                    const auto pa = (*cf[j])[k];
                    const auto pb = (*cf[l])[k];
                    parts.push_back(grid.weights[k] * ftv[j][k] * ftv[l][k] *
                                    (pa.real() * pb.real() + pa.imag() * pb.imag()));
                }
                const double v = pairwise_sum(parts) / kPi;
                sys.G(j, l) = v;
                sys.G(l, j) = v;
            }
    } else {
        InnerProductOptions pair_opts = opts;
        pair_opts.backend = sys.backend_used;
        for (int j = 0; j < M; ++j)
            for (int l = j; l < M; ++l) {
                const double v = inner_product(components[j], components[l], pair_opts);
                sys.G(j, l) = v;
                sys.G(l, j) = v;
            }
    }

    std::vector<double> grid_x;
    if (validation.d == 1) {
        grid_x.resize(validation.n);
        for (int i = 0; i < validation.n; ++i) grid_x[i] = validation.x1(i);
    }
    std::vector<double> vals(validation.n);
    for (int j = 0; j < M; ++j) {
        if (validation.d == 1) {
            components[j].eval_batch(grid_x, vals);
        } else {
            for (int i = 0; i < validation.n; ++i)
                vals[i] = components[j].eval(validation.point(i));
        }
        sys.b[j] = pairwise_sum(vals) / validation.n;
    }
    return sys;
}

AggregateWeights linear_weights(const GramSystem& sys, double rank_tol) {
    AggregateWeights w;
    w.constraint = WeightMode::linear;
    w.lambda = solve_min_norm(sys.G, sys.b, rank_tol);
    w.objective = w.lambda.dot(sys.G * w.lambda) - 2.0 * sys.b.dot(w.lambda);
    return w;
}

AggregateWeights convex_weights(const GramSystem& sys, const ConvexSolveOptions& opts) {
    QpProblem p;
    p.G = sys.G;
    p.b = sys.b;
    p.kkt_tol = opts.kkt_tol;
    p.max_iterations = opts.max_iterations;
    const QpSolution s = solve_simplex_qp(p);
    if (s.status != QpStatus::converged)
        throw std::runtime_error(
            "convex_weights: QP did not converge (kkt residual " +
            std::to_string(s.kkt_residual) + " after " +
            std::to_string(s.iterations) + " iterations)");
    AggregateWeights w;
    w.constraint = WeightMode::convex;
    w.lambda = s.lambda;
    w.objective = s.objective;
    w.kkt_residual = s.kkt_residual;
    w.iterations = s.iterations;
    w.converged = true;
    return w;
}

std::vector<Split> make_splits(int n, SplitScheme scheme, int count,
                               const SeedPath& seed) {
    const auto [m, l] = split_sizes(n, scheme);
    (void)l;
    return make_splits_sized(n, m, count, seed);
}

std::vector<Split> make_splits_sized(int n, int m, int count, const SeedPath& seed) {
    if (count < 1) throw std::invalid_argument("make_splits: count >= 1");
    if (m < 1 || m >= n) throw std::invalid_argument("make_splits: need 1 <= m < n");
    std::vector<Split> out(static_cast<std::size_t>(count));
    for (int s = 0; s < count; ++s) {
        StreamRng rng(seed.child(static_cast<std::uint64_t>(s)));
        std::vector<int> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        for (int i = n - 1; i > 0; --i) {
            const int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
            std::swap(perm[i], perm[j]);
        }
        out[s].train.assign(perm.begin(), perm.begin() + m);
        out[s].validation.assign(perm.begin() + m, perm.end());
        std::sort(out[s].train.begin(), out[s].train.end());
        std::sort(out[s].validation.begin(), out[s].validation.end());
    }
    return out;
}

EstimatorFactory kde_grid_factory(KernelSpec kernel, std::vector<double> bandwidths) {
    return [kernel = std::move(kernel), bandwidths = std::move(bandwidths)](
               const SamplePoints& training) {
        auto buf = std::make_shared<std::vector<double>>(training.pts);
        std::vector<KdeEstimator> comps;
        comps.reserve(bandwidths.size());
        for (double h : bandwidths)
            comps.push_back(fit_kde(buf, training.n, training.d, h, kernel));
        return comps;
    };
}

EstimatorFactory multi_kernel_pool(std::vector<KernelSpec> kernels,
                                   std::vector<double> bandwidths) {
    return [kernels = std::move(kernels), bandwidths = std::move(bandwidths)](
               const SamplePoints& training) {
        auto buf = std::make_shared<std::vector<double>>(training.pts);
        std::vector<KdeEstimator> comps;
        comps.reserve(kernels.size() * bandwidths.size());
        for (const auto& k : kernels)  // kernel-major, bandwidth-minor
            for (double h : bandwidths)
                comps.push_back(fit_kde(buf, training.n, training.d, h, k));
        return comps;
    };
}

EstimatorFactory multi_kernel_pool(const PinskerFamily& family,
                                   const BandwidthGrid& grid) {
    return multi_kernel_pool(family.kernels(), grid.h);
}

AveragedAggregate::AveragedAggregate(std::vector<SplitRecord> records)
    : records_(std::move(records)) {
    if (records_.empty())
        throw std::invalid_argument("AveragedAggregate: needs at least one split");
}

void AveragedAggregate::eval_batch_split(int split_index,
                                         std::span<const double> grid,
                                         std::span<double> out) const {
    const auto& rec = records_.at(static_cast<std::size_t>(split_index));
    std::fill(out.begin(), out.end(), 0.0);
    std::vector<double> tmp(grid.size());
    for (Eigen::Index j = 0; j < rec.weights.lambda.size(); ++j) {
        const double lam = rec.weights.lambda[j];
        if (lam == 0.0) continue;
        rec.components[static_cast<std::size_t>(j)].eval_batch(grid, tmp);
        for (std::size_t g = 0; g < grid.size(); ++g) out[g] += lam * tmp[g];
    }
}

void AveragedAggregate::eval_batch(std::span<const double> grid,
                                   std::span<double> out) const {
    const int S = split_count();
    std::vector<std::vector<double>> per_split(static_cast<std::size_t>(S));
    for (int s = 0; s < S; ++s) {
        per_split[s].resize(grid.size());
        eval_batch_split(s, grid, per_split[s]);
    }
    std::vector<double> slots(static_cast<std::size_t>(S));
    for (std::size_t g = 0; g < grid.size(); ++g) {
        for (int s = 0; s < S; ++s) slots[s] = per_split[s][g];
        out[g] = pairwise_sum(slots) / S;
    }
}

double AveragedAggregate::eval1(double x) const {
    double out = 0.0;
    eval_batch(std::span(&x, 1), std::span(&out, 1));
    return out;
}

double AveragedAggregate::min_active_bandwidth() const {
    double h = std::numeric_limits<double>::infinity();
    for (const auto& rec : records_)
        for (Eigen::Index j = 0; j < rec.weights.lambda.size(); ++j)
            if (rec.weights.lambda[j] != 0.0)
                h = std::min(h, rec.components[static_cast<std::size_t>(j)].bandwidth());
    return h;
}

namespace {

SamplePoints subsample(const SamplePoints& sample, std::span<const int> rows,
                       std::uint64_t tag) {
    SamplePoints s;
    s.n = static_cast<int>(rows.size());
    s.d = sample.d;
    s.provenance = sample.provenance.child(tag);
    s.pts.reserve(rows.size() * sample.d);
    for (int r : rows) {
        const auto p = sample.point(r);
        s.pts.insert(s.pts.end(), p.begin(), p.end());
    }
    return s;
}

}  // namespace

AveragedAggregate averaged_aggregate(const SamplePoints& sample,
                                     const EstimatorFactory& factory,
                                     SplitScheme scheme, int split_count,
                                     const SeedPath& split_seed,
                                     const AggregateOptions& opts) {
    const auto splits =
        opts.train_size
            ? make_splits_sized(sample.n, *opts.train_size, split_count, split_seed)
            : make_splits(sample.n, scheme, split_count, split_seed);
    std::vector<SplitRecord> records;
    records.reserve(splits.size());
    for (std::size_t s = 0; s < splits.size(); ++s) {
        SplitRecord rec;
        rec.split = splits[s];
        const SamplePoints train = subsample(sample, rec.split.train, 2 * s);
        const SamplePoints val = subsample(sample, rec.split.validation, 2 * s + 1);
        rec.components = factory(train);
        const GramSystem sys = gram_system(rec.components, val, opts.inner);
        rec.weights = opts.mode == WeightMode::convex
                          ? convex_weights(sys, opts.qp)
                          : linear_weights(sys, opts.linear_rank_tol);
        records.push_back(std::move(rec));
    }
    return AveragedAggregate(std::move(records));
}

}  // namespace aggdens
