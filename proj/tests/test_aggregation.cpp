#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "aggdens/aggregation.hpp"
#include "aggdens/densities.hpp"
#include "aggdens/quadrature.hpp"
#include "aggdens/risk.hpp"
#include "aggdens/rng.hpp"

using namespace aggdens;
using Catch::Approx;

namespace {

constexpr double kPi = std::numbers::pi;

KdeEstimator kde_from(std::vector<double> xs, double h,
                      KernelSpec k = KernelSpec::gaussian()) {
    const int m = static_cast<int>(xs.size());
    return fit_kde(std::make_shared<std::vector<double>>(std::move(xs)), m, 1, h,
                   std::move(k));
}

std::vector<KdeEstimator> random_gaussian_pool(int M, int m, StreamRng& rng) {
    std::vector<KdeEstimator> pool;
    for (int j = 0; j < M; ++j) {
        std::vector<double> xs(static_cast<std::size_t>(m));
        for (auto& x : xs) x = rng.normal();
        pool.push_back(kde_from(std::move(xs), rng.uniform(0.05, 0.8)));
    }
    return pool;
}

// dense-quadrature L2 inner product, independent of the Gram backends
double ip_quad(const KdeEstimator& a, const KdeEstimator& b) {
    return adaptive_gk15([&](double x) { return a.eval1(x) * b.eval1(x); }, -14.0,
                         14.0, 1e-12, 1e-14, 16000)
        .value;
}

// <p_hat, p> for a Gaussian-kernel KDE against the standard normal density
double ip_with_standard_normal(const KdeEstimator& e) {
    const double s2 = 1.0 + e.bandwidth() * e.bandwidth();
    double acc = 0.0;
    for (int i = 0; i < e.train_count(); ++i)
        acc += std::exp(-0.5 * e.train1(i) * e.train1(i) / s2) /
               std::sqrt(2.0 * kPi * s2);
    return acc / e.train_count();
}

}  // namespace

TEST_CASE("inner product closed form") {
    // identical one-point KDEs, h = 1: N(0; 0, 2) = 1/(2 sqrt(pi))
    const KdeEstimator a = kde_from({0.7}, 1.0);
    CHECK(inner_product(a, a) == Approx(0.28209479177387814).epsilon(1e-14));

    StreamRng rng(SeedPath(41, {1}));
    for (int trial = 0; trial < 20; ++trial) {
        const auto pool = random_gaussian_pool(2, 20, rng);
        InnerProductOptions closed, spatial, fourier;
        closed.backend = GramBackend::gaussian_closed_form;
        spatial.backend = GramBackend::spatial_quadrature;
        fourier.backend = GramBackend::fourier_quadrature;
        const double v = inner_product(pool[0], pool[1], closed);
        // symmetry
        CHECK(inner_product(pool[1], pool[0], closed) == Approx(v).margin(1e-12));
        // cross-backend oracles
        CHECK(inner_product(pool[0], pool[1], spatial) == Approx(v).margin(1e-6));
        CHECK(inner_product(pool[0], pool[1], fourier) == Approx(v).margin(1e-8));
    }
}

TEST_CASE("inner product for compact-transform kernels") {
    // fourier backend against a per-pair adaptive kernel-convolution oracle
    StreamRng rng(SeedPath(42, {1}));
    for (int trial = 0; trial < 6; ++trial) {
        std::vector<double> xs(5), ys(4);
        for (auto& x : xs) x = rng.normal();
        for (auto& y : ys) y = rng.normal();
        const double h1 = rng.uniform(0.1, 0.6), h2 = rng.uniform(0.1, 0.6);
        const double b1 = rng.uniform(0.6, 2.0), b2 = rng.uniform(0.6, 2.0);
        const KdeEstimator e1 = kde_from(xs, h1, KernelSpec::pinsker(b1));
        const KdeEstimator e2 = kde_from(ys, h2, KernelSpec::pinsker(b2));
        double oracle = 0.0;
        for (double x : xs)
            for (double y : ys) {
                const double u = x - y;
                oracle += adaptive_gk15(
                              [&](double t) {
                                  return (1.0 - std::pow(h1 * t, b1)) *
                                         (1.0 - std::pow(h2 * t, b2)) *
                                         std::cos(t * u);
                              },
                              0.0, std::min(1.0 / h1, 1.0 / h2), 1e-11, 1e-13)
                              .value /
                          kPi;
            }
        oracle /= static_cast<double>(xs.size() * ys.size());
        InnerProductOptions fourier;
        fourier.backend = GramBackend::fourier_quadrature;
        CAPTURE(trial, h1, h2, b1, b2);
        CHECK(inner_product(e1, e2, fourier) == Approx(oracle).margin(1e-9));
        CHECK(inner_product(e2, e1, fourier) ==
              Approx(inner_product(e1, e2, fourier)).margin(1e-12));
    }
}

TEST_CASE("gram system") {
    StreamRng rng(SeedPath(43, {1}));
    const DensityModel truth = standard_gaussian();

    SECTION("single component") {
        const SamplePoints train = truth.sample(15, SeedPath(43, {2}));
        const SamplePoints val = truth.sample(10, SeedPath(43, {3}));
        const KdeEstimator e = fit_kde(train, 0.4, KernelSpec::gaussian());
        const std::vector<KdeEstimator> comps{e};
        const GramSystem sys = gram_system(comps, val);
        CHECK(sys.M == 1);
        CHECK(sys.G(0, 0) == Approx(inner_product(e, e)).epsilon(1e-13));
        double mean = 0.0;
        for (int i = 0; i < val.n; ++i) mean += e.eval1(val.x1(i));
        CHECK(sys.b[0] == Approx(mean / val.n).epsilon(1e-13));
    }

    SECTION("duplicated components give equal rows") {
        const SamplePoints train = truth.sample(12, SeedPath(43, {4}));
        const SamplePoints val = truth.sample(9, SeedPath(43, {5}));
        const KdeEstimator e = fit_kde(train, 0.3, KernelSpec::gaussian());
        const std::vector<KdeEstimator> comps{
            e, e, fit_kde(train, 0.7, KernelSpec::gaussian())};
        const GramSystem sys = gram_system(comps, val);
        CHECK((sys.G.row(0) - sys.G.row(1)).cwiseAbs().maxCoeff() <= 1e-14);
        CHECK(sys.b[0] == Approx(sys.b[1]).margin(1e-14));
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sys.G);
        CHECK(es.eigenvalues().minCoeff() >= -1e-12 * sys.G.trace());
    }

    SECTION("PSD up to tolerance on random pools") {
        const SamplePoints val = truth.sample(25, SeedPath(43, {6}));
        for (int trial = 0; trial < 10; ++trial) {
            const auto pool = random_gaussian_pool(6, 15, rng);
            const GramSystem sys = gram_system(pool, val);
            CHECK((sys.G - sys.G.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sys.G);
            CHECK(es.eigenvalues().minCoeff() >= -1e-8 * sys.G.trace());
        }
    }
}

TEST_CASE("objective identity") {
    // |sum lambda_j p_j|^2 by quadrature equals lambda^T G lambda
    StreamRng rng(SeedPath(44, {1}));
    const SamplePoints val = standard_gaussian().sample(10, SeedPath(44, {2}));
    const auto pool = random_gaussian_pool(4, 12, rng);
    const GramSystem sys = gram_system(pool, val);
    for (int trial = 0; trial < 10; ++trial) {
        Eigen::VectorXd lambda(4);
        for (int j = 0; j < 4; ++j) lambda[j] = rng.uniform(-1.0, 1.0);
        const double quad =
            adaptive_gk15(
                [&](double x) {
                    double s = 0.0;
                    for (int j = 0; j < 4; ++j) s += lambda[j] * pool[j].eval1(x);
                    return s * s;
                },
                -14.0, 14.0, 1e-10, 1e-13, 16000)
                .value;
        CHECK(lambda.dot(sys.G * lambda) == Approx(quad).margin(1e-6));
    }
}

TEST_CASE("linear weights") {
    SECTION("identity gram") {
        GramSystem sys;
        sys.M = 3;
        sys.G = Eigen::MatrixXd::Identity(3, 3);
        sys.b.resize(3);
        sys.b << 0.4, -0.1, 0.2;
        const AggregateWeights w = linear_weights(sys);
        CHECK((w.lambda - sys.b).norm() <= 1e-14);
    }
    SECTION("rank-deficient minimum norm") {
        GramSystem sys;
        sys.M = 2;
        sys.G.resize(2, 2);
        sys.G << 1.0, 1.0, 1.0, 1.0;
        sys.b.resize(2);
        sys.b << 1.0, 1.0;
        const AggregateWeights w = linear_weights(sys);
        CHECK(w.lambda[0] == Approx(0.5).margin(1e-12));
        CHECK(w.lambda[1] == Approx(0.5).margin(1e-12));
    }
    SECTION("equals the explicit orthonormal-basis construction") {
        StreamRng rng(SeedPath(45, {1}));
        const DensityModel truth = standard_gaussian();
        for (int trial = 0; trial < 10; ++trial) {
            const int M = 2 + static_cast<int>(rng.below(3));
            auto pool = random_gaussian_pool(M, 8, rng);
            if (trial % 3 == 0) pool.push_back(pool.front());  // exact duplicate
            const int P = static_cast<int>(pool.size());
            const SamplePoints val =
                truth.sample(20, SeedPath(45, {2, static_cast<std::uint64_t>(trial)}));
            const GramSystem sys = gram_system(pool, val);
            const AggregateWeights impl = linear_weights(sys);

            // quadrature Gram for the oracle route
            Eigen::MatrixXd Gq(P, P);
            for (int i = 0; i < P; ++i)
                for (int j = i; j < P; ++j)
                    Gq(i, j) = Gq(j, i) = ip_quad(pool[static_cast<std::size_t>(i)],
                                                  pool[static_cast<std::size_t>(j)]);
            // Gram-Schmidt in function space, coefficients over the pool
            std::vector<Eigen::VectorXd> basis;
            for (int j = 0; j < P; ++j) {
                Eigen::VectorXd c = Eigen::VectorXd::Unit(P, j);
                for (const auto& phi : basis) c -= (phi.dot(Gq * c)) * phi;
                const double nsq = c.dot(Gq * c);
                if (nsq > 1e-12 * Gq(j, j)) basis.push_back(c / std::sqrt(nsq));
            }
            // each coefficient is the validation mean of a basis function
            Eigen::VectorXd oracle = Eigen::VectorXd::Zero(P);
            for (const auto& phi : basis) oracle += (phi.dot(sys.b)) * phi;

            const Eigen::VectorXd diff = oracle - impl.lambda;
            const double dist = std::sqrt(std::max(0.0, diff.dot(sys.G * diff)));
            CAPTURE(trial, P);
            CHECK(dist <= 1e-8);
        }
    }
}

TEST_CASE("convex weights") {
    GramSystem sys;
    sys.M = 2;
    sys.G = Eigen::MatrixXd::Identity(2, 2);
    sys.b.resize(2);
    sys.b << 1.0, 0.0;
    AggregateWeights w = convex_weights(sys);
    CHECK(w.lambda[0] == Approx(1.0).margin(1e-8));
    CHECK(w.lambda[1] == Approx(0.0).margin(1e-8));
    CHECK(w.kkt_residual <= 1e-8);

    sys.b << 2.0, 1.0;
    w = convex_weights(sys);
    CHECK(w.lambda[0] == Approx(1.0).margin(1e-8));
    CHECK(w.lambda[1] == Approx(0.0).margin(1e-8));

    StreamRng rng(SeedPath(46, {1}));
    for (int trial = 0; trial < 20; ++trial) {
        GramSystem s3;
        s3.M = 3;
        Eigen::MatrixXd A(3, 3);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) A(i, j) = rng.normal();
        s3.G = (A * A.transpose()) / 3.0;
        s3.b.resize(3);
        for (int i = 0; i < 3; ++i) s3.b[i] = rng.uniform(-0.5, 1.0);
        const AggregateWeights cw = convex_weights(s3);
        REQUIRE(cw.lambda.minCoeff() >= -1e-9);
        REQUIRE(cw.lambda.sum() <= 1.0 + 1e-9);
        const auto obj = [&](const Eigen::VectorXd& x) {
            return x.dot(s3.G * x) - 2.0 * s3.b.dot(x);
        };
        CHECK(cw.objective <= obj(Eigen::VectorXd::Zero(3)) + 1e-8);
        for (int j = 0; j < 3; ++j)
            CHECK(cw.objective <= obj(Eigen::VectorXd::Unit(3, j)) + 1e-8);
        double worst_gap = -1e300;
        for (int r = 0; r < 10000; ++r) {
            Eigen::VectorXd y(3);
            for (int i = 0; i < 3; ++i) y[i] = rng.exponential(1.0);
            y *= rng.uniform() / y.sum();
            worst_gap = std::max(worst_gap, cw.objective - obj(y));
        }
        CHECK(worst_gap <= 1e-8);
    }
}

TEST_CASE("splits") {
    const SeedPath seed(47, {1});
    const auto splits = make_splits(101, SplitScheme::equal_halves, 5, seed);
    REQUIRE(splits.size() == 5);
    for (const auto& s : splits) {
        CHECK(s.train.size() == 51);
        CHECK(s.validation.size() == 50);
        CHECK(std::is_sorted(s.train.begin(), s.train.end()));
        CHECK(std::is_sorted(s.validation.begin(), s.validation.end()));
        std::vector<int> all(s.train);
        all.insert(all.end(), s.validation.begin(), s.validation.end());
        std::sort(all.begin(), all.end());
        for (int i = 0; i < 101; ++i) REQUIRE(all[static_cast<std::size_t>(i)] == i);
    }
    // same seed, same splits
    const auto again = make_splits(101, SplitScheme::equal_halves, 5, seed);
    for (std::size_t k = 0; k < splits.size(); ++k) {
        CHECK(splits[k].train == again[k].train);
        CHECK(splits[k].validation == again[k].validation);
    }
    // sizes follow split_sizes
    const auto asym = make_splits(100, SplitScheme::asymptotic, 2, seed);
    CHECK(asym[0].train.size() == 78);
    CHECK(asym[0].validation.size() == 22);
}

TEST_CASE("averaged aggregate with one split equals the single-split aggregate") {
    const DensityModel truth = standard_gaussian();
    const SamplePoints sample = truth.sample(60, SeedPath(48, {1}));
    const std::vector<double> grid{0.05, 0.1, 0.5};
    const auto factory = kde_grid_factory(KernelSpec::gaussian(), grid);
    AggregateOptions opts;
    const SeedPath split_seed(48, {2});
    const auto agg = averaged_aggregate(sample, factory, SplitScheme::equal_halves, 1,
                                        split_seed, opts);
    REQUIRE(agg.split_count() == 1);
    std::vector<double> xs{-1.7, -0.3, 0.0, 0.9, 2.4};
    std::vector<double> a(xs.size()), b(xs.size());
    agg.eval_batch(xs, a);
    agg.eval_batch_split(0, xs, b);
    for (std::size_t i = 0; i < xs.size(); ++i)
        CHECK(a[i] == Approx(b[i]).margin(1e-15));
}

TEST_CASE("averaged aggregate satisfies the Jensen property per realization") {
    const DensityModel truth = dens2();
    const QuadratureSpec quad = QuadratureSpec::for_model(truth, 2048);
    const auto factory = kde_grid_factory(KernelSpec::gaussian(),
                                          {0.001, 0.005, 0.01, 0.05, 0.1, 0.5});
    AggregateOptions opts;
    for (int rep = 0; rep < 5; ++rep) {
        const SamplePoints sample =
            truth.sample(80, SeedPath(49, {static_cast<std::uint64_t>(rep)}));
        const auto agg = averaged_aggregate(sample, factory, SplitScheme::equal_halves,
                                            6, sample.provenance.child(99), opts);
        const double ise_avg = ise(batch_of(agg), truth, quad);
        double mean_split_ise = 0.0;
        for (int s = 0; s < agg.split_count(); ++s) {
            mean_split_ise +=
                ise([&](std::span<const double> g,
                        std::span<double> out) { agg.eval_batch_split(s, g, out); },
                    truth, quad);
        }
        mean_split_ise /= agg.split_count();
        CAPTURE(rep);
        CHECK(ise_avg <= mean_split_ise + 1e-12);
    }
}

TEST_CASE("multi kernel pool") {
    const PinskerFamily fam = pinsker_family(2, 1);
    BandwidthGrid grid;
    grid.n = 60;
    grid.d = 1;
    grid.h = {0.1, 0.3, 0.6};
    const auto factory = multi_kernel_pool(fam, grid);
    const DensityModel truth = standard_gaussian();
    const SamplePoints train = truth.sample(40, SeedPath(50, {1}));
    const auto comps = factory(train);
    REQUIRE(comps.size() == 6);  // N * M, kernel-major / bandwidth-minor
    CHECK(comps[0].kernel().beta() == Approx(0.5));
    CHECK(comps[2].kernel().beta() == Approx(0.5));
    CHECK(comps[3].kernel().beta() == Approx(0.5 + 1.0 / std::sqrt(2.0)));
    CHECK(comps[0].bandwidth() == Approx(0.1));
    CHECK(comps[1].bandwidth() == Approx(0.3));
    CHECK(comps[3].bandwidth() == Approx(0.1));

    // end-to-end convex aggregation over the pool (fourier backend)
    const SamplePoints sample = truth.sample(60, SeedPath(50, {2}));
    AggregateOptions opts;
    const auto agg = averaged_aggregate(sample, factory, SplitScheme::equal_halves, 2,
                                        SeedPath(50, {3}), opts);
    for (const auto& rec : agg.records()) {
        CHECK(rec.weights.lambda.minCoeff() >= -1e-9);
        CHECK(rec.weights.lambda.sum() <= 1.0 + 1e-9);
        CHECK(rec.weights.kkt_residual <= 1e-8);
    }
}

TEST_CASE("validation means are unbiased coefficient estimates") {
    // fixed components; the mean of b over regenerated validation samples
    // converges to <p_j, p>
    const DensityModel truth = standard_gaussian();
    const SamplePoints train = truth.sample(30, SeedPath(51, {1}));
    std::vector<KdeEstimator> comps;
    for (double h : {0.1, 0.3, 0.8})
        comps.push_back(fit_kde(train, h, KernelSpec::gaussian()));
    const int R = 2000, ell = 40;
    Eigen::VectorXd mean_b = Eigen::VectorXd::Zero(3);
    Eigen::VectorXd mean_b2 = Eigen::VectorXd::Zero(3);
    for (int r = 0; r < R; ++r) {
        const SamplePoints val =
            truth.sample(ell, SeedPath(51, {2, static_cast<std::uint64_t>(r)}));
        const GramSystem sys = gram_system(comps, val);
        mean_b += sys.b;
        mean_b2 += sys.b.cwiseProduct(sys.b);
    }
    mean_b /= R;
    mean_b2 /= R;
    for (int j = 0; j < 3; ++j) {
        const double target = ip_with_standard_normal(comps[static_cast<std::size_t>(j)]);
        // standard error of the mean of b_j over the R regenerations
        const double se =
            std::sqrt(std::max(0.0, mean_b2[j] - mean_b[j] * mean_b[j]) / R);
        CAPTURE(j);
        CHECK(std::abs(mean_b[j] - target) <= 3.0 * se + 1e-12);
    }
}
