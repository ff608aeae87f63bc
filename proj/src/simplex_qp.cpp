#include "aggdens/simplex_qp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace aggdens {
namespace {

void check_problem(const Eigen::MatrixXd& G, const Eigen::VectorXd& b) {
    if (G.rows() != G.cols() || G.rows() != b.size() || b.size() < 1)
        throw std::invalid_argument("qp: dimension mismatch");
    if (!G.allFinite() || !b.allFinite())
        throw std::invalid_argument("qp: non-finite input");
    const double scale = std::max(1.0, G.cwiseAbs().maxCoeff());
    if ((G - G.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
        throw std::invalid_argument("qp: G is not symmetric");
}

bool feasible(const Eigen::VectorXd& v, double tol = 1e-9) {
    return v.minCoeff() >= -tol && v.sum() <= 1.0 + tol;
}

double objective(const Eigen::MatrixXd& G, const Eigen::VectorXd& b,
                 const Eigen::VectorXd& x) {
    return x.dot(G * x) - 2.0 * b.dot(x);
}

}  // namespace

Eigen::VectorXd simplex_project(const Eigen::VectorXd& v) {
    if (!v.allFinite()) throw std::invalid_argument("simplex_project: non-finite input");
    Eigen::VectorXd w = v.cwiseMax(0.0);
    if (w.sum() <= 1.0) return w;
    // sum constraint active: project v onto { lambda >= 0, sum lambda = 1 }
    std::vector<double> u(v.data(), v.data() + v.size());
    std::sort(u.begin(), u.end(), std::greater<>());
    double cum = 0.0, tau = 0.0;
    int rho = 0;
    for (std::size_t j = 0; j < u.size(); ++j) {
        cum += u[j];
        const double t = (cum - 1.0) / static_cast<double>(j + 1);
        if (u[j] - t > 0.0) {
            rho = static_cast<int>(j + 1);
            tau = t;
        }
    }
    (void)rho;
    return (v.array() - tau).cwiseMax(0.0).matrix();
}

double sigma_max_estimate(const Eigen::MatrixXd& G, int iterations) {
    const Eigen::Index n = G.rows();
    Eigen::VectorXd v = Eigen::VectorXd::Ones(n) / std::sqrt(static_cast<double>(n));
    double lam = 0.0;
    for (int it = 0; it < iterations; ++it) {
        Eigen::VectorXd w = G * v;
        const double nw = w.norm();
        if (nw == 0.0) {
            // ones is in the null space; nudge along the first axis
            v.setZero();
            v[it % n] = 1.0;
            w = G * v;
            if (w.norm() == 0.0 && it > static_cast<int>(n)) return 0.0;
            continue;
        }
        v = w / nw;
        lam = std::abs(v.dot(G * v));
    }
    return lam;
}

double kkt_residual(const Eigen::MatrixXd& G, const Eigen::VectorXd& b,
                    const Eigen::VectorXd& lambda) {
    check_problem(G, b);
    if (!feasible(lambda))
        throw std::invalid_argument("kkt_residual: lambda is not feasible");
    const double eta = 1.0 / (2.0 * sigma_max_estimate(G) + 1e-12);
    const Eigen::VectorXd grad = 2.0 * (G * lambda - b);
    return (lambda - simplex_project(lambda - eta * grad)).norm();
}

QpSolution solve_simplex_qp(const QpProblem& problem) {
    const Eigen::MatrixXd& G = problem.G;
    const Eigen::VectorXd& b = problem.b;
    check_problem(G, b);

    QpSolution sol;
    const double sigma = sigma_max_estimate(G);
    if (sigma <= 1e-300 || G.cwiseAbs().maxCoeff() == 0.0) {
        // Degenerate quadratic part: minimize -2 b^T lambda directly. The
        // optimum is the vertex of the largest positive b entry (ties go to
        // the lowest index), or 0 when no entry is positive.
        Eigen::Index jmax = 0;
        b.maxCoeff(&jmax);
        sol.lambda = Eigen::VectorXd::Zero(b.size());
        if (b[jmax] > 0.0) sol.lambda[jmax] = 1.0;
        sol.objective = objective(G, b, sol.lambda);
        sol.kkt_residual = 0.0;
        sol.status = QpStatus::converged;
        return sol;
    }

    const double eta0 = 1.0 / (2.0 * sigma + 1e-12);
    Eigen::VectorXd x = simplex_project(b);
    Eigen::VectorXd grad = 2.0 * (G * x - b);
    double fx = objective(G, b, x);
    if (problem.record_trace) sol.trace.push_back(fx);

    Eigen::VectorXd x_prev = x, grad_prev = grad;
    double eta_bb = eta0;
    int it = 0;
    for (; it < problem.max_iterations; ++it) {
        const double kkt = (x - simplex_project(x - eta0 * grad)).norm();
        if (kkt <= problem.kkt_tol) {
            sol.kkt_residual = kkt;
            sol.status = QpStatus::converged;
            break;
        }

        double eta = eta_bb;
        Eigen::VectorXd y;
        double fy = 0.0;
        bool accepted = false;
        for (int bt = 0; bt < 60; ++bt) {
            y = simplex_project(x - eta * grad);
            fy = objective(G, b, y);
            if (fy <= fx) {
                accepted = true;
                break;
            }
            eta *= 0.5;
        }
        if (!accepted) {
            // 1/L step; cannot increase a convex quadratic beyond fp noise
            y = simplex_project(x - eta0 * grad);
            fy = objective(G, b, y);
        }

        x_prev = x;
        grad_prev = grad;
        x = y;
        fx = fy;
        grad = 2.0 * (G * x - b);
        if (problem.record_trace) sol.trace.push_back(fx);

        // Barzilai-Borwein step for the next round
        const Eigen::VectorXd s = x - x_prev;
        const Eigen::VectorXd dg = grad - grad_prev;
        const double sy = s.dot(dg);
        eta_bb = sy > 0.0 ? std::clamp(s.squaredNorm() / sy, 1e-4 * eta0, 1e6 * eta0)
                          : eta0;
        if (s.norm() == 0.0) {
            // projection returned the same point; fixed-step residual decides
            const double k2 = (x - simplex_project(x - eta0 * grad)).norm();
            sol.kkt_residual = k2;
            sol.status = k2 <= problem.kkt_tol ? QpStatus::converged : QpStatus::max_iter;
            ++it;
            break;
        }
    }
    if (it >= problem.max_iterations) {
        sol.kkt_residual = (x - simplex_project(x - eta0 * grad)).norm();
        sol.status = QpStatus::max_iter;
    }
    sol.lambda = x;
    sol.objective = fx;
    sol.iterations = it;
    return sol;
}

Eigen::VectorXd solve_min_norm(const Eigen::MatrixXd& G, const Eigen::VectorXd& b,
                               double rank_tol) {
    check_problem(G, b);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
    const Eigen::VectorXd evals = es.eigenvalues();
    const double sigma_max = evals.cwiseAbs().maxCoeff();
    Eigen::VectorXd lambda = Eigen::VectorXd::Zero(b.size());
    if (sigma_max == 0.0) return lambda;
    const Eigen::VectorXd proj = es.eigenvectors().transpose() * b;
    for (Eigen::Index i = 0; i < evals.size(); ++i) {
        if (std::abs(evals[i]) > rank_tol * sigma_max)
            lambda += es.eigenvectors().col(i) * (proj[i] / evals[i]);
    }
    return lambda;
}

}  // namespace aggdens
