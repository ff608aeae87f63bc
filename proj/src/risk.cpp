#include "aggdens/risk.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "aggdens/parallel.hpp"
#include "aggdens/quadrature.hpp"

namespace aggdens {
namespace {

double quantile_type7(std::vector<double> sorted, double p) {
    const std::size_t m = sorted.size();
    const double k = (m - 1) * p;
    const std::size_t lo = static_cast<std::size_t>(std::floor(k));
    const double frac = k - lo;
    if (lo + 1 >= m) return sorted[m - 1];
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

double std_error_of(std::span<const double> xs, double mean) {
    if (xs.size() < 2) return 0.0;
    std::vector<double> sq(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double d = xs[i] - mean;
        sq[i] = d * d;
    }
    const double var = pairwise_sum(sq) / (xs.size() - 1);
    return std::sqrt(var / xs.size());
}

}  // namespace

QuadratureSpec QuadratureSpec::for_model(const DensityModel& model, int nodes) {
    QuadratureSpec q;
    const auto [lo, hi] = model.support_window();
    q.lo = lo;
    q.hi = hi;
    q.nodes = nodes;
    for (double b : model.breakpoints())
        if (b > lo && b < hi) q.breakpoints.push_back(b);
    // Smooth densities keep the plain trapezoid default; anything with jumps
    // (including a jump at the window edge, like the exponential at 0) gets
    // breakpoint-aligned composite Gauss-Legendre so the doubling gate holds.
    q.rule = model.breakpoints().empty() ? QuadRule::trapezoid
                                         : QuadRule::gauss_legendre_composite;
    return q;
}

QuadratureSpec QuadratureSpec::with_nodes(int n) const {
    QuadratureSpec q = *this;
    q.nodes = n;
    return q;
}

QuadNodes build_quad_nodes(const QuadratureSpec& spec) {
    if (spec.nodes < 64) throw std::invalid_argument("quadrature needs >= 64 nodes");
    if (!(spec.hi > spec.lo)) throw std::invalid_argument("bad quadrature window");
    QuadNodes out;
    if (spec.rule == QuadRule::trapezoid) {
        const int n = spec.nodes;
        const double h = (spec.hi - spec.lo) / (n - 1);
        out.x.resize(n);
        out.w.assign(n, h);
        for (int i = 0; i < n; ++i) out.x[i] = spec.lo + i * h;
        out.w.front() = 0.5 * h;
        out.w.back() = 0.5 * h;
        return out;
    }
    // composite Gauss-Legendre with panel edges at the truth's breakpoints
    constexpr int kOrder = 16;
    std::vector<double> edges{spec.lo};
    for (double b : spec.breakpoints)
        if (b > spec.lo && b < spec.hi) edges.push_back(b);
    edges.push_back(spec.hi);
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

    const double target_w = (spec.hi - spec.lo) / (spec.nodes / kOrder);
    const auto xs = gl_nodes(kOrder);
    const auto ws = gl_weights(kOrder);
    for (std::size_t s = 0; s + 1 < edges.size(); ++s) {
        const double len = edges[s + 1] - edges[s];
        const int panels = std::max(1, static_cast<int>(std::ceil(len / target_w)));
        const double w = len / panels;
        for (int p = 0; p < panels; ++p) {
            const double c = edges[s] + (p + 0.5) * w;
            for (int i = 0; i < kOrder; ++i) {
                out.x.push_back(c + 0.5 * w * xs[i]);
                out.w.push_back(0.5 * w * ws[i]);
            }
        }
    }
    return out;
}

DensityEstimate batch_of(const KdeEstimator& e) {
    DensityEstimate est;
    est.eval = [e](std::span<const double> xs, std::span<double> out) {
        e.eval_batch(xs, out);
    };
    if (e.dim() == 1) {
        SpikeSet s;
        s.scale = e.bandwidth();
        s.centers.reserve(static_cast<std::size_t>(e.train_count()));
        for (int i = 0; i < e.train_count(); ++i) s.centers.push_back(e.train1(i));
        est.spikes.push_back(std::move(s));
    }
    return est;
}

DensityEstimate batch_of(const AveragedAggregate& a) {
    DensityEstimate est;
    est.eval = [a](std::span<const double> xs, std::span<double> out) {
        a.eval_batch(xs, out);
    };
    for (const auto& rec : a.records()) {
        for (Eigen::Index j = 0; j < rec.weights.lambda.size(); ++j) {
            if (rec.weights.lambda[j] == 0.0) continue;
            const KdeEstimator& c = rec.components[static_cast<std::size_t>(j)];
            if (c.dim() != 1) continue;
            SpikeSet s;
            s.scale = c.bandwidth();
            s.centers.reserve(static_cast<std::size_t>(c.train_count()));
            for (int i = 0; i < c.train_count(); ++i) s.centers.push_back(c.train1(i));
            est.spikes.push_back(std::move(s));
        }
    }
    return est;
}

DensityEstimate batch_of_scalar(std::function<double(double)> f) {
    DensityEstimate est;
    est.eval = [f = std::move(f)](std::span<const double> xs, std::span<double> out) {
        for (std::size_t i = 0; i < xs.size(); ++i) out[i] = f(xs[i]);
    };
    return est;
}

namespace {

// Panel layout for an estimate with sharp features: the base rule from the
// spec, subdivided to the finest feature scale inside the union of small
// windows around spike centers. Panel edges always land on the truth's
// breakpoints.
QuadNodes build_refined_nodes(const QuadratureSpec& spec,
                              std::span<const SpikeSet> spikes) {
    const double w0 = (spec.hi - spec.lo) / std::max(1, spec.nodes / 16);
    double fine = w0;
    std::vector<std::pair<double, double>> intervals;
    for (const auto& s : spikes) {
        if (!(s.scale > 0.0) || s.scale >= 0.25 * w0) continue;
        fine = std::min(fine, s.scale);
        for (double c : s.centers) {
            const double a = std::max(spec.lo, c - 6.0 * s.scale);
            const double b = std::min(spec.hi, c + 6.0 * s.scale);
            if (b > a) intervals.emplace_back(a, b);
        }
    }
    if (intervals.empty()) return build_quad_nodes(spec);

    std::sort(intervals.begin(), intervals.end());
    std::vector<std::pair<double, double>> merged;
    for (const auto& iv : intervals) {
        if (!merged.empty() && iv.first <= merged.back().second)
            merged.back().second = std::max(merged.back().second, iv.second);
        else
            merged.push_back(iv);
    }

    std::vector<double> cuts{spec.lo, spec.hi};
    for (double b : spec.breakpoints)
        if (b > spec.lo && b < spec.hi) cuts.push_back(b);
    for (const auto& iv : merged) {
        cuts.push_back(iv.first);
        cuts.push_back(iv.second);
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    QuadNodes out;
    std::size_t next_iv = 0;
    for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
        const double a = cuts[s], b = cuts[s + 1];
        const double mid = 0.5 * (a + b);
        while (next_iv < merged.size() && merged[next_iv].second < mid) ++next_iv;
        const bool refined = next_iv < merged.size() &&
                             merged[next_iv].first <= mid && mid <= merged[next_iv].second;
        const double w = refined ? fine : w0;
        const int order = refined ? 8 : 16;
        const auto xs = gl_nodes(order);
        const auto ws = gl_weights(order);
        const int panels = std::max(1, static_cast<int>(std::ceil((b - a) / w)));
        const double pw = (b - a) / panels;
        for (int p = 0; p < panels; ++p) {
            const double c = a + (p + 0.5) * pw;
            for (int i = 0; i < order; ++i) {
                out.x.push_back(c + 0.5 * pw * xs[i]);
                out.w.push_back(0.5 * pw * ws[i]);
            }
        }
    }
    return out;
}

double ise_on_nodes(const BatchEval& estimate, const DensityModel& truth,
                    const QuadNodes& q) {
    std::vector<double> est(q.x.size());
    estimate(q.x, est);
    std::vector<double> parts(q.x.size());
    for (std::size_t i = 0; i < q.x.size(); ++i) {
        const double d = est[i] - truth.eval1(q.x[i]);
        parts[i] = q.w[i] * d * d;
    }
    const double v = pairwise_sum(parts);
    return v < 0.0 ? 0.0 : v;
}

}  // namespace

double ise(const DensityEstimate& estimate, const DensityModel& truth,
           const QuadratureSpec& spec) {
    if (truth.dim() != 1)
        throw std::invalid_argument("ise: quadrature ISE supports d = 1 models");
    return ise_on_nodes(estimate.eval, truth, build_refined_nodes(spec, estimate.spikes));
}

double ise(const BatchEval& estimate, const DensityModel& truth,
           const QuadratureSpec& spec) {
    if (truth.dim() != 1)
        throw std::invalid_argument("ise: quadrature ISE supports d = 1 models");
    return ise_on_nodes(estimate, truth, build_quad_nodes(spec));
}

MiseReport mise_mc(const EstimatorBuilder& builder, const DensityModel& truth,
                   int n, int R, const QuadratureSpec& spec, const SeedPath& seed,
                   const std::string& label, int threads) {
    if (R < 2) throw std::invalid_argument("mise_mc: needs R >= 2");
    const auto t0 = std::chrono::steady_clock::now();
    MiseReport rep;
    rep.estimator_label = label;
    rep.n = n;
    rep.replications = R;
    rep.master_seed = seed.master;
    rep.per_replication.assign(static_cast<std::size_t>(R), 0.0);
    parallel_for_index(R, threads, [&](int r) {
        const SamplePoints sample = truth.sample(n, seed.child(static_cast<std::uint64_t>(r)));
        const DensityEstimate est = builder(sample);
        rep.per_replication[static_cast<std::size_t>(r)] = ise(est, truth, spec);
    });
    rep.mean_ise = pairwise_sum(rep.per_replication) / R;
    rep.std_error = std_error_of(rep.per_replication, rep.mean_ise);
    rep.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

OracleRisk oracle_risk(std::span<const double> h_grid, const KernelSpec& kernel,
                       const DensityModel& truth, int n, int R,
                       const QuadratureSpec& spec, const SeedPath& seed,
                       int threads) {
    if (h_grid.empty()) throw std::invalid_argument("oracle_risk: empty grid");
    if (R < 2) throw std::invalid_argument("oracle_risk: needs R >= 2");
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t H = h_grid.size();
    std::vector<std::vector<double>> ises(H);
    for (auto& v : ises) v.assign(static_cast<std::size_t>(R), 0.0);

    parallel_for_index(R, threads, [&](int r) {
        const SamplePoints sample = truth.sample(n, seed.child(static_cast<std::uint64_t>(r)));
        for (std::size_t k = 0; k < H; ++k) {
            const KdeEstimator e = fit_kde(sample, h_grid[k], kernel);
            ises[k][static_cast<std::size_t>(r)] = ise(batch_of(e), truth, spec);
        }
    });

    OracleRisk out;
    out.curve.resize(H);
    std::size_t best = 0;
    for (std::size_t k = 0; k < H; ++k) {
        const double mean = pairwise_sum(ises[k]) / R;
        out.curve[k] = {h_grid[k], mean, std_error_of(ises[k], mean)};
        if (out.curve[k].mise < out.curve[best].mise) best = k;  // ties: smaller h
    }
    out.best_h = h_grid[best];
    out.best.estimator_label = "oracle";
    out.best.n = n;
    out.best.replications = R;
    out.best.mean_ise = out.curve[best].mise;
    out.best.std_error = out.curve[best].std_error;
    out.best.per_replication = ises[best];
    out.best.master_seed = seed.master;
    out.best.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

double ucv_select(const SamplePoints& points, const KernelSpec& kernel,
                  std::span<const double> candidates,
                  const InnerProductOptions& ip_opts) {
    if (points.n < 2) throw std::invalid_argument("ucv_select: needs m >= 2");
    if (candidates.empty()) throw std::invalid_argument("ucv_select: no candidates");
    std::vector<double> hs(candidates.begin(), candidates.end());
    std::sort(hs.begin(), hs.end());
    double best_h = hs.front();
    double best_score = std::numeric_limits<double>::infinity();
    const int m = points.n;
    std::vector<double> xs(m), vals(m);
    for (int i = 0; i < m; ++i) xs[i] = points.x1(i);
    for (double h : hs) {
        if (!(h > 0.0)) throw std::invalid_argument("ucv_select: candidate h <= 0");
        const KdeEstimator e = fit_kde(points, h, kernel);
        const double norm_sq = inner_product(e, e, ip_opts);
        // LOO sum through p_{-i}(X_i) = (m p(X_i) h - K(0)) / ((m-1) h)
        e.eval_batch(xs, vals);
        const double k0 = kernel.eval1(0.0);
        std::vector<double> loo(static_cast<std::size_t>(m));
        for (int i = 0; i < m; ++i)
            loo[static_cast<std::size_t>(i)] = (m * vals[i] * h - k0) / ((m - 1) * h);
        const double score = norm_sq - 2.0 * pairwise_sum(loo) / m;
        if (score < best_score) {
            best_score = score;
            best_h = h;
        }
    }
    return best_h;
}

namespace {

double rot_bandwidth(std::span<const double> xs, double factor) {
    const std::size_t m = xs.size();
    if (m < 2) throw std::invalid_argument("rule-of-thumb bandwidth: needs m >= 2");
    std::vector<double> v(xs.begin(), xs.end());
    const double mean = pairwise_sum(v) / m;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / (m - 1));
    std::sort(v.begin(), v.end());
    const double iqr = quantile_type7(v, 0.75) - quantile_type7(v, 0.25);
    double spread = std::min(sd, iqr / 1.34);
    if (spread == 0.0) spread = sd;  // degenerate IQR, positive sd
    const double scale = std::pow(static_cast<double>(m), -0.2);
    if (spread == 0.0)  // all points equal; documented fallback
        return scale * std::max(std::abs(xs[0]), 1.0) * 1e-3;
    return factor * spread * scale;
}

}  // namespace

double nrd0(std::span<const double> xs) { return rot_bandwidth(xs, 0.9); }
double nrd(std::span<const double> xs) { return rot_bandwidth(xs, 1.06); }

}  // namespace aggdens
