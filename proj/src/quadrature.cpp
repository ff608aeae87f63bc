#include "aggdens/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "aggdens/errors.hpp"

namespace aggdens {
namespace {

// 15-point Kronrod abscissae/weights with the embedded 7-point Gauss rule
// (QUADPACK values).
constexpr double kXgk[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};
constexpr double kWgk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct PanelEstimate {
    double a, b;
    double integral;
    double error;
};

PanelEstimate gk15_panel(const std::function<double(double)>& f, double a,
                         double b) {
    const double c = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    const double fc = f(c);
    double resg = fc * kWg[3];
    double resk = fc * kWgk[7];
    for (int j = 0; j < 7; ++j) {
        const double x = half * kXgk[j];
        const double fsum = f(c - x) + f(c + x);
        if (j % 2 == 1) resg += kWg[j / 2] * fsum;
        resk += kWgk[j] * fsum;
    }
    const double integral = resk * half;
    const double err = std::abs((resk - resg) * half);
    return {a, b, integral, err};
}

// Gauss-Legendre nodes on [-1,1] via Newton iteration on P_n; the classic
// cosine initial guess converges in a handful of steps to full precision.
void legendre_rule(int n, std::vector<double>& nodes,
                   std::vector<double>& weights) {
    nodes.assign(n, 0.0);
    weights.assign(n, 0.0);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            pp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / pp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        const double w = 2.0 / ((1.0 - x * x) * pp * pp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
}

struct GlTable {
    std::vector<double> nodes, weights;
    GlTable(int n) { legendre_rule(n, nodes, weights); }
};

const GlTable& gl_table(int order) {
    static const GlTable t4(4), t8(8), t16(16);
    switch (order) {
        case 4: return t4;
        case 8: return t8;
        case 16: return t16;
        default: throw std::invalid_argument("unsupported Gauss-Legendre order");
    }
}

}  // namespace

QuadResult adaptive_gk15(const std::function<double(double)>& f, double a,
                         double b, double rel_tol, double abs_tol,
                         int max_panels, bool throw_on_failure) {
    QuadResult out;
    if (a == b) {
        out.converged = true;
        return out;
    }
    std::vector<PanelEstimate> panels;
    panels.push_back(gk15_panel(f, a, b));
    out.evaluations = 15;
    while (static_cast<int>(panels.size()) < max_panels) {
        double total = 0.0, err = 0.0;
        std::size_t worst = 0;
        for (std::size_t i = 0; i < panels.size(); ++i) {
            total += panels[i].integral;
            err += panels[i].error;
            if (panels[i].error > panels[worst].error) worst = i;
        }
        const double tol = std::max(abs_tol, rel_tol * std::abs(total));
        if (err <= tol || panels[worst].error == 0.0) {
            out.value = total;
            out.abs_error = err;
            out.converged = true;
            return out;
        }
        const PanelEstimate p = panels[worst];
        const double mid = 0.5 * (p.a + p.b);
        panels[worst] = gk15_panel(f, p.a, mid);
        panels.push_back(gk15_panel(f, mid, p.b));
        out.evaluations += 30;
    }
    double total = 0.0, err = 0.0;
    for (const auto& p : panels) {
        total += p.integral;
        err += p.error;
    }
    out.value = total;
    out.abs_error = err;
    out.converged = err <= std::max(abs_tol, rel_tol * std::abs(total));
    if (!out.converged && throw_on_failure)
        throw QuadratureError("adaptive quadrature did not converge", err);
    return out;
}

std::span<const double> gl_nodes(int order) { return gl_table(order).nodes; }
std::span<const double> gl_weights(int order) { return gl_table(order).weights; }

double composite_gl(const std::function<double(double)>& f, double a, double b,
                    int panels, int order) {
    const auto& t = gl_table(order);
    const double w = (b - a) / panels;
    std::vector<double> parts(static_cast<std::size_t>(panels));
    for (int p = 0; p < panels; ++p) {
        const double lo = a + p * w;
        const double c = lo + 0.5 * w;
        double s = 0.0;
        for (int i = 0; i < order; ++i) s += t.weights[i] * f(c + 0.5 * w * t.nodes[i]);
        parts[p] = s * 0.5 * w;
    }
    return pairwise_sum(parts);
}

double trapezoid_uniform(const std::function<double(double)>& f, double a,
                         double b, int nodes) {
    if (nodes < 2) throw std::invalid_argument("trapezoid needs >= 2 nodes");
    const double h = (b - a) / (nodes - 1);
    std::vector<double> parts(static_cast<std::size_t>(nodes));
    parts[0] = 0.5 * f(a);
    parts[nodes - 1] = 0.5 * f(b);
    for (int i = 1; i < nodes - 1; ++i) parts[i] = f(a + i * h);
    return pairwise_sum(parts) * h;
}

double pairwise_sum(std::span<const double> xs) {
    if (xs.size() <= 8) {
        double s = 0.0;
        for (double x : xs) s += x;
        return s;
    }
    const std::size_t half = xs.size() / 2;
    return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

}  // namespace aggdens
