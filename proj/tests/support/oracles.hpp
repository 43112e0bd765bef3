#pragma once

// Reference implementations used only by tests. They share no code with the
// library so that agreement means something.

#include "dkpc/metrics.hpp"
#include "dkpc/qp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

namespace oracle {

using dkpc::Index;
using dkpc::Matrix;
using dkpc::Vector;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Augmented Lagrangian outer loop around an accelerated projected-gradient
/// inner solve. Slow but simple; run to tight tolerance.
inline Vector solve_qp(const dkpc::qp::QpProblem& p, double tol = 1e-12) {
    const Index n = p.P.rows();
    auto project = [&](Vector x) { return x.cwiseMax(p.lower).cwiseMin(p.upper); };

    Vector x = project(Vector::Zero(n));
    Vector y = Vector::Zero(p.A_eq.rows());
    double rho = 10.0;
    double last_r = kInf;
    for (int outer = 0; outer < 2000; ++outer) {
        const Matrix H = p.P + rho * p.A_eq.transpose() * p.A_eq;
        const double lip = std::max(Eigen::SelfAdjointEigenSolver<Matrix>(H).eigenvalues().maxCoeff(), 1e-12);
        Vector z = x, x_prev = x;
        double t = 1.0;
        for (int it = 0; it < 200000; ++it) {
            const Vector grad = p.P * z + p.q + p.A_eq.transpose() * (y + rho * (p.A_eq * z - p.b_eq));
            const Vector x_next = project(z - grad / lip);
            const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
            z = x_next + ((t - 1.0) / t_next) * (x_next - x_prev);
            const double step = (x_next - x_prev).lpNorm<Eigen::Infinity>();
            x_prev = x_next;
            t = t_next;
            if (step < tol) break;
        }
        x = x_prev;
        const Vector r = p.A_eq * x - p.b_eq;
        const double rn = r.size() ? r.lpNorm<Eigen::Infinity>() : 0.0;
        if (rn < tol * 10) break;
        y += rho * r;
        // Classic penalty schedule: grow rho when the residual stalls.
        if (rn > 0.25 * last_r) rho = std::min(rho * 4.0, 1e6);
        last_r = rn;
    }
    return x;
}

struct Kkt {
    double stationarity = 0.0;
    double primal = 0.0;
    double complementarity = 0.0;
    double worst() const { return std::max({stationarity, primal, complementarity}); }
};

/// Residuals of a candidate primal/dual pair, in the sign convention
/// P x + q + A' y_eq + y_box = 0 with y_box > 0 on active upper bounds.
inline Kkt kkt(const dkpc::qp::QpProblem& p, const Vector& x, const Vector& y_eq, const Vector& y_box) {
    Kkt k;
    k.stationarity = (p.P * x + p.q + p.A_eq.transpose() * y_eq + y_box).lpNorm<Eigen::Infinity>();
    k.primal = p.A_eq.rows() ? (p.A_eq * x - p.b_eq).lpNorm<Eigen::Infinity>() : 0.0;
    for (Index i = 0; i < x.size(); ++i) {
        k.primal = std::max({k.primal, p.lower(i) - x(i), x(i) - p.upper(i)});
        const double yi = y_box(i);
        double c = 0.0;
        if (yi > 0) c = std::isfinite(p.upper(i)) ? yi * std::abs(p.upper(i) - x(i)) : yi;
        if (yi < 0) c = std::isfinite(p.lower(i)) ? -yi * std::abs(x(i) - p.lower(i)) : -yi;
        k.complementarity = std::max(k.complementarity, c);
    }
    return k;
}

/// Random feasible, bounded convex QP with n <= 30 and m <= 10. Variables are
/// left unbounded only when P is positive definite.
inline dkpc::qp::QpProblem random_qp(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> dn(2, 30);
    std::uniform_real_distribution<double> unit(-1.0, 1.0), coin(0.0, 1.0);
    const Index n = dn(rng);
    const Index m = std::uniform_int_distribution<int>(0, static_cast<int>(std::min<Index>(10, n - 1)))(rng);
    const Index rank = std::uniform_int_distribution<int>(1, static_cast<int>(n))(rng);
    auto rnd = [&](Index r, Index c) {
        Matrix M(r, c);
        for (Index i = 0; i < r; ++i)
            for (Index j = 0; j < c; ++j) M(i, j) = unit(rng);
        return M;
    };
    const Matrix M = rnd(n, rank);
    dkpc::qp::QpProblem p;
    p.P = M * M.transpose();
    const bool definite = rank == n;
    p.q = 2.0 * rnd(n, 1);
    p.A_eq = rnd(m, n);
    const Vector feasible = 0.5 * rnd(n, 1);
    p.b_eq = p.A_eq * feasible;
    p.lower.resize(n);
    p.upper.resize(n);
    for (Index i = 0; i < n; ++i) {
        p.lower(i) = feasible(i) - 0.1 - coin(rng);
        p.upper(i) = feasible(i) + 0.1 + coin(rng);
        if (definite && coin(rng) < 0.3) p.lower(i) = -kInf;
        if (definite && coin(rng) < 0.3) p.upper(i) = kInf;
    }
    return p;
}

inline bool dominates(const dkpc::metrics::FrontierPoint& a, const dkpc::metrics::FrontierPoint& b) {
    return a.epsilon <= b.epsilon && a.j_u <= b.j_u && (a.epsilon < b.epsilon || a.j_u < b.j_u);
}

/// All-pairs non-dominated filter, returned sorted by (j_u, epsilon).
inline std::vector<dkpc::metrics::FrontierPoint> frontier(const std::vector<dkpc::metrics::FrontierPoint>& pts) {
    std::vector<dkpc::metrics::FrontierPoint> out;
    for (const auto& a : pts) {
        bool dominated = false;
        for (const auto& b : pts) dominated = dominated || dominates(b, a);
        if (!dominated) out.push_back(a);
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        return a.j_u != b.j_u ? a.j_u < b.j_u : a.epsilon < b.epsilon;
    });
    return out;
}

/// Integer-valued points so ties and duplicates actually occur.
inline std::vector<dkpc::metrics::FrontierPoint> random_points(std::mt19937_64& rng, std::size_t count) {
    std::uniform_int_distribution<int> v(0, 20);
    std::vector<dkpc::metrics::FrontierPoint> pts(count);
    for (std::size_t i = 0; i < count; ++i) {
        pts[i].j_u = v(rng);
        pts[i].epsilon = v(rng);
        pts[i].config.q = static_cast<double>(i);
    }
    return pts;
}

} // namespace oracle
