#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "aggdens/densities.hpp"
#include "aggdens/errors.hpp"
#include "aggdens/kde.hpp"
#include "aggdens/quadrature.hpp"
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

}  // namespace

TEST_CASE("kde pointwise values") {
    CHECK(kde_from({0.0}, 1.0).eval1(0.0) == Approx(1.0 / std::sqrt(2.0 * kPi)));
    // m=2, X={-1,1}, h=1: p(0) = phi(1)
    CHECK(kde_from({-1.0, 1.0}, 1.0).eval1(0.0) ==
          Approx(std::exp(-0.5) / std::sqrt(2.0 * kPi)));
    CHECK_THROWS_AS(kde_from({0.0}, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(kde_from({}, 1.0), std::invalid_argument);
}

TEST_CASE("kde mass and symmetry") {
    const DensityModel truth = standard_gaussian();
    const SamplePoints s = truth.sample(60, SeedPath(11, {1}));
    for (double h : {0.05, 0.3, 1.0}) {
        const KdeEstimator e = fit_kde(s, h, KernelSpec::gaussian());
        const double mass = adaptive_gk15([&](double x) { return e.eval1(x); },
                                          -30.0, 30.0, 1e-9, 1e-12, 8000)
                                .value;
        CAPTURE(h);
        CHECK(mass == Approx(1.0).margin(1e-4));
    }
    const KdeEstimator sym = kde_from({-1.3, 1.3}, 0.4);
    for (double x : {0.1, 0.77, 2.5}) CHECK(sym.eval1(x) == Approx(sym.eval1(-x)));
}

TEST_CASE("batch evaluation equals the pointwise loop") {
    const DensityModel truth = dens1();
    const SamplePoints s = truth.sample(80, SeedPath(12, {4}));
    for (const KernelSpec& k :
         {KernelSpec::gaussian(), KernelSpec::pinsker(2.0), KernelSpec::silverman()}) {
        const KdeEstimator e = fit_kde(s, 0.21, k);
        std::vector<double> grid(101), out(101);
        for (int i = 0; i <= 100; ++i) grid[i] = -3.0 + 6.0 * i / 100.0;
        e.eval_batch(grid, out);
        CAPTURE(k.name());
        for (int i = 0; i <= 100; ++i)
            CHECK(out[i] == Approx(e.eval1(grid[i])).margin(1e-13));
    }
}

TEST_CASE("kde spot value against a direct summation oracle") {
    const SamplePoints s = standard_gaussian().sample(35, SeedPath(3, {8}));
    const double h = 0.17;
    const KdeEstimator e = fit_kde(s, h, KernelSpec::gaussian());
    for (double x : {-0.9, 0.04, 1.3}) {
        long double acc = 0.0L;
        for (int i = 0; i < s.n; ++i) {
            const long double u = (s.x1(i) - x) / h;
            acc += std::exp(-0.5L * u * u) / std::sqrt(2.0L * kPi);
        }
        CHECK(e.eval1(x) == Approx(static_cast<double>(acc / (s.n * h))).epsilon(1e-13));
    }
}

TEST_CASE("leave-one-out evaluation") {
    // equal points: p_{-0}(X_0) = K(0)/h
    const KdeEstimator twin = kde_from({0.4, 0.4}, 0.5);
    CHECK(twin.loo_eval(0) == Approx(KernelSpec::gaussian().eval1(0.0) / 0.5));

    const SamplePoints s = DensityModel::exponential(1.0).sample(40, SeedPath(9, {2}));
    const double h = 0.3;
    const KdeEstimator e = fit_kde(s, h, KernelSpec::gaussian());
    for (int i : {0, 7, 39}) {
        // algebraic identity vs the full sum
        const double full = e.eval1(s.x1(i));
        const double identity =
            (s.n * full * h - KernelSpec::gaussian().eval1(0.0)) / ((s.n - 1) * h);
        CHECK(e.loo_eval(i) == Approx(identity).epsilon(1e-12));
        // naive loop oracle
        double acc = 0.0;
        for (int j = 0; j < s.n; ++j)
            if (j != i)
                acc += KernelSpec::gaussian().eval1((s.x1(j) - s.x1(i)) / h);
        CHECK(e.loo_eval(i) == Approx(acc / ((s.n - 1) * h)).epsilon(1e-12));
    }
    CHECK_THROWS_AS(kde_from({1.0}, 1.0).loo_eval(0), std::invalid_argument);
}

TEST_CASE("bandwidth grid") {
    CHECK_THROWS_AS(bandwidth_grid(2, 1), std::invalid_argument);
    const BandwidthGrid g = bandwidth_grid(100, 1, 1.0);
    CHECK(g.h.back() == 1.0);
    CHECK(g.h0 == Approx(1.0 / (100.0 * std::log(100.0))).epsilon(1e-15));
    CHECK(g.a_n == Approx(1.0 / std::log(100.0)).epsilon(1e-15));

    // independent recomputation oracle
    std::vector<double> expect;
    {
        const double h0 = 1.0 / (100.0 * std::log(100.0));
        const double an = 1.0 / std::log(100.0);
        expect.push_back(h0);
        for (int j = 1; h0 * std::pow(1.0 + an, j) < 1.0; ++j)
            expect.push_back(h0 * std::pow(1.0 + an, j));
        expect.push_back(1.0);
    }
    REQUIRE(g.h.size() == expect.size());
    CHECK(g.M() == 33);
    for (std::size_t i = 0; i < expect.size(); ++i)
        CHECK(g.h[i] == Approx(expect[i]).epsilon(1e-14));

    // defining property of M: strictly increasing, h_{M-2} < 1 <= h_{M-2}(1+a_n)
    for (int n : {3, 10, 47, 1000, 20000}) {
        const BandwidthGrid gn = bandwidth_grid(n, 1, 1.0);
        for (std::size_t i = 1; i < gn.h.size(); ++i) CHECK(gn.h[i] > gn.h[i - 1]);
        const double h_m2 = gn.h[gn.h.size() - 2];
        CAPTURE(n);
        CHECK(h_m2 < 1.0);
        CHECK(h_m2 * (1.0 + gn.a_n) >= 1.0);
        CHECK(gn.h.back() == 1.0);
    }
}

TEST_CASE("split sizes") {
    CHECK(split_sizes(100, SplitScheme::asymptotic) == std::pair{78, 22});
    CHECK(split_sizes(100, SplitScheme::equal_halves) == std::pair{50, 50});
    CHECK(split_sizes(101, SplitScheme::equal_halves) == std::pair{51, 50});
    CHECK_THROWS_AS(split_sizes(2, SplitScheme::asymptotic), std::invalid_argument);

    // l >= n / log n over a log-spaced scan plus small-n boundary candidates
    std::vector<int> ns;
    for (int n = 3; n <= 64; ++n) ns.push_back(n);
    for (double x = 2.0; x <= 6.0; x += 0.05) {
        const int n = static_cast<int>(std::pow(10.0, x));
        ns.push_back(n);
        ns.push_back(n + 1);
    }
    for (int n : ns) {
        const auto [m, l] = split_sizes(n, SplitScheme::asymptotic);
        CAPTURE(n);
        CHECK(m + l == n);
        CHECK(l >= n / std::log(static_cast<double>(n)) - 1e-9);
    }
}

TEST_CASE("fourier mise against an independent high-precision oracle") {
    // frozen values from 25-digit quadrature of the Fourier risk formula for
    // the standard Gaussian density and Gaussian kernel
    const DensityModel truth = standard_gaussian();
    const KernelSpec k = KernelSpec::gaussian();
    struct Case {
        int n;
        double h, expect;
    };
    const Case cases[] = {
        {50, 0.1, 0.05081028601},  {50, 0.3, 0.01378667038}, {50, 1.0, 0.02255953904},
        {200, 0.1, 0.01270648937}, {200, 0.3, 0.003734897887}, {200, 1.0, 0.02132018427},
    };
    for (const auto& c : cases) {
        CAPTURE(c.n, c.h);
        CHECK(fourier_mise(k, c.h, c.n, truth) == Approx(c.expect).epsilon(1e-8));
    }
}

TEST_CASE("fourier mise small-h variance floor") {
    // below the grid floor the risk is at least ||K||^2/(n h) - L/n
    const DensityModel truth = standard_gaussian();
    const KernelSpec k = KernelSpec::gaussian();
    const double L = truth.sup_norm_bound();
    for (int n : {50, 500}) {
        const double h = 0.25 * bandwidth_grid(n, 1, 1.0).h0;
        const double risk = fourier_mise(k, h, n, truth);
        CAPTURE(n, h);
        CHECK(risk >= k.l2_norm_sq() / (n * h) - L / n);
    }
}

TEST_CASE("fourier mise with the sinc kernel") {
    // compact transform: variance = (pi n)^{-1} (1/h - int_0^{1/h} e^{-t^2});
    // the bias beyond 1/h = 20 is negligible for the Gaussian density
    const DensityModel truth = standard_gaussian();
    const int n = 100;
    const double h = 0.05;
    const double inv_h = 1.0 / h;
    const double expect =
        (inv_h - 0.5 * std::sqrt(kPi) * std::erf(inv_h)) / (kPi * n);
    CHECK(fourier_mise(KernelSpec::sinc(), h, n, truth) ==
          Approx(expect).epsilon(1e-9));
}

TEST_CASE("fourier mise is unimodal over the bandwidth grid") {
    const DensityModel truth = standard_gaussian();
    const KernelSpec k = KernelSpec::gaussian();
    for (int n : {50, 200}) {
        const BandwidthGrid g = bandwidth_grid(n, 1, 1.0);
        std::vector<double> risk(g.h.size());
        for (std::size_t i = 0; i < g.h.size(); ++i)
            risk[i] = fourier_mise(k, g.h[i], n, truth);
        const auto it = std::min_element(risk.begin(), risk.end());
        CAPTURE(n);
        CHECK(it != risk.begin());
        CHECK(it != risk.end() - 1);
        // decreasing then increasing
        for (auto j = risk.begin(); j != it; ++j) CHECK(*j > *(j + 1));
        for (auto j = it; j + 1 != risk.end(); ++j) CHECK(*j < *(j + 1));
    }
}

TEST_CASE("fourier mise requires a characteristic function") {
    DensityModel::CustomSpec spec;
    spec.d = 1;
    spec.evaluator = [](std::span<const double>) { return 0.5; };
    spec.sampler = [](int n, StreamRng& r, std::vector<double>& out) {
        out.resize(static_cast<std::size_t>(n));
        for (auto& x : out) x = r.uniform(-1.0, 1.0);
    };
    spec.window = {-1.0, 1.0};
    spec.sup_norm_bound = 0.5;
    CHECK_THROWS_AS(
        fourier_mise(KernelSpec::gaussian(), 0.3, 100, DensityModel::custom(spec)),
        UnsupportedCapability);
}

TEST_CASE("pinsker minimax constants") {
    // high-precision oracle values for d=1, beta=2, Q=1
    const MinimaxQuantities mm = pinsker_minimax(2.0, 1.0, 1);
    CHECK(mm.c_star == Approx(0.27641723715310552).epsilon(1e-12));
    CHECK(mm.d_star == Approx(0.76770389927475498).epsilon(1e-12));
    CHECK(mm.s_d == 2.0);

    // scaling identity C*(beta, 4Q, d) = 4^{d/(2 beta + d)} C*(beta, Q, d)
    for (double beta : {1.0, 2.0, 3.5}) {
        for (int d : {1, 2}) {
            if (!(beta > d / 2.0)) continue;
            const double r = pinsker_constant(beta, 4.0, d) / pinsker_constant(beta, 1.0, d);
            CAPTURE(beta, d);
            CHECK(r == Approx(std::pow(4.0, d / (2.0 * beta + d))).epsilon(1e-12));
        }
    }
    CHECK_THROWS_AS(pinsker_minimax(0.5, 1.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(pinsker_minimax(2.0, -1.0, 1), std::invalid_argument);
}

TEST_CASE("the bandwidth equation holds at h*") {
    // int |t|^b F[K_b](h t) dt = Q n h^b, checked by quadrature
    for (const auto& [beta, Q, n] : {std::tuple{2.0, 1.0, 500.0},
                                     std::tuple{1.5, 2.5, 2000.0},
                                     std::tuple{0.75, 0.9, 100.0}}) {
        const double h = pinsker_optimal_bandwidth(beta, Q, 1, n);
        const double lhs =
            2.0 * adaptive_gk15(
                      [&, b = beta](double t) {
                          return std::pow(t, b) * std::max(0.0, 1.0 - std::pow(h * t, b));
                      },
                      0.0, 1.0 / h, 1e-11, 1e-14)
                      .value;
        const double rhs = Q * n * std::pow(h, beta);
        CAPTURE(beta, Q, n);
        CHECK(std::abs(lhs - rhs) / rhs <= 1e-8);
    }
}

TEST_CASE("risk bound identity at h*") {
    // (2 pi)^{-1} (n h*)^{-1} int F[K_b] = C* n^{-2b/(2b+1)} exactly
    const double beta = 2.0, Q = 1.3293403881791370;
    const MinimaxQuantities mm = pinsker_minimax(beta, Q, 1);
    for (double n : {1e3, 1e4}) {
        const double h = mm.h_star(n);
        const double int_f = 2.0 * beta / (beta + 1.0);  // 2 int_0^1 (1 - t^b) dt
        const double lhs = int_f / (2.0 * kPi * n * h);
        CHECK(lhs == Approx(mm.risk_bound(n)).epsilon(1e-6));
    }
}

TEST_CASE("sobolev functional") {
    CHECK(sobolev_functional(standard_gaussian(), 2.0) ==
          Approx(1.3293403881791370).epsilon(1e-8));
    // block densities have only 1/t^2 spectral decay: divergent for beta = 2
    CHECK_THROWS_AS(sobolev_functional(dens1(), 2.0), QuadratureError);
}
