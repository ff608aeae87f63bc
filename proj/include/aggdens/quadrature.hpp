#pragma once

#include <functional>
#include <span>
#include <vector>

namespace aggdens {

struct QuadResult {
    double value = 0.0;
    double abs_error = 0.0;  // error estimate of the returned value
    int evaluations = 0;
    bool converged = false;
};

// Adaptive Gauss-Kronrod 15(7) panel integration on [a, b]. Worst panel is
// bisected until the summed error estimate meets tol = max(abs_tol,
// rel_tol*|I|) or the panel budget runs out. Throws QuadratureError when
// throw_on_failure is set and the tolerance is not met.
QuadResult adaptive_gk15(const std::function<double(double)>& f, double a,
                         double b, double rel_tol = 1e-9, double abs_tol = 0.0,
                         int max_panels = 4000, bool throw_on_failure = true);

// Fixed Gauss-Legendre rule of the given order (supported: 4, 8, 16) applied
// on `panels` equal panels of [a, b].
double composite_gl(const std::function<double(double)>& f, double a, double b,
                    int panels, int order = 16);

// Nodes/weights of the order-point Gauss-Legendre rule on [-1, 1].
std::span<const double> gl_nodes(int order);
std::span<const double> gl_weights(int order);

// Uniform trapezoid rule with `nodes` points including both endpoints.
double trapezoid_uniform(const std::function<double(double)>& f, double a,
                         double b, int nodes);

// Order-independent summation (fixed pairwise tree), so reductions give
// bit-identical results no matter how the terms were produced.
double pairwise_sum(std::span<const double> xs);

}  // namespace aggdens
