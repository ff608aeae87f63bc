#pragma once

#include <Eigen/Dense>
#include <vector>

namespace aggdens {

// minimize  lambda^T G lambda - 2 b^T lambda  over the simplex
// Lambda^M = { lambda >= 0, sum lambda <= 1 }.
struct QpProblem {
    Eigen::MatrixXd G;  // symmetric, PSD up to tolerance
    Eigen::VectorXd b;
    double kkt_tol = 1e-8;
    int max_iterations = 100000;
    bool record_trace = false;  // keep accepted objective values (diagnostics)
};

enum class QpStatus { converged, max_iter };

struct QpSolution {
    Eigen::VectorXd lambda;
    double objective = 0.0;
    double kkt_residual = 0.0;
    int iterations = 0;
    QpStatus status = QpStatus::converged;
    std::vector<double> trace;  // filled when record_trace is set
};

// Euclidean projection onto Lambda^M. Clamps to the nonnegative orthant; if
// the clamped sum exceeds 1 the sum constraint is active and the point is
// projected onto the probability simplex by the exact sort-based rule.
Eigen::VectorXd simplex_project(const Eigen::VectorXd& v);

// Largest eigenvalue estimate of symmetric G (50 power iterations).
double sigma_max_estimate(const Eigen::MatrixXd& G, int iterations = 50);

// || lambda - P(lambda - eta (2 G lambda - 2 b)) || with the fixed step
// eta = 1/(2 sigma_max + eps); zero exactly at minimizers. lambda must be
// feasible within 1e-9.
double kkt_residual(const Eigen::MatrixXd& G, const Eigen::VectorXd& b,
                    const Eigen::VectorXd& lambda);

// Projected gradient with Barzilai-Borwein steps and a monotone backtracking
// safeguard; stops when the fixed-step KKT residual reaches kkt_tol.
QpSolution solve_simplex_qp(const QpProblem& problem);

// Minimum-norm least-squares solution of G lambda = b through the symmetric
// eigendecomposition; eigendirections below rank_tol * sigma_max are zeroed.
Eigen::VectorXd solve_min_norm(const Eigen::MatrixXd& G, const Eigen::VectorXd& b,
                               double rank_tol = 1e-10);

}  // namespace aggdens
