#pragma once

#include "dkpc/trajectory.hpp"

#include <Eigen/Cholesky>

#include <optional>
#include <string>
#include <vector>

namespace dkpc::qp {

/// minimize 1/2 x'Px + q'x  subject to  A_eq x = b_eq,  lower <= x <= upper.
/// Infinite bounds encode absent constraints.
struct QpProblem {
    Matrix P;
    Vector q;
    Matrix A_eq;
    Vector b_eq;
    Vector lower;
    Vector upper;

    Index n() const { return P.rows(); }
    Index m() const { return A_eq.rows(); }

    /// Checks dimensions, symmetry of P (1e-10) and lower <= upper.
    void validate() const;
    double objective(const Vector& x) const;

    /// All-free problem of dimension n with m equality rows, zero filled.
    static QpProblem zeros(Index n, Index m);
};

enum class QpStatus { Solved, MaxIterations, PrimalInfeasible };

std::string to_string(QpStatus status);

struct QpSettings {
    double eps_abs = 1e-6;
    double eps_rel = 1e-6;
    int max_iter = 20000;
    std::optional<Vector> warm_start;
    std::optional<Vector> warm_start_dual; ///< [y_eq; y_box] in the layout of QpSolution

    double rho = 0.1;
    double sigma = 1e-6;
    double alpha = 1.6; ///< over-relaxation
    bool adaptive_rho = true;
    int adaptive_rho_interval = 50;
    double adaptive_rho_tolerance = 5.0;
    int scaling_iterations = 10;
    int check_interval = 10;
    double eps_primal_infeasible = 1e-6;

    /// After convergence, guess the active set from the multipliers and solve
    /// the resulting equality-constrained KKT system directly. The polished
    /// point is kept only when its KKT residual is no worse. Costs one dense
    /// LU of size n + m_eq + active per solve.
    bool polish = true;
    double polish_delta = 1e-7;
    int polish_refine_iterations = 5;
};

struct QpSolution {
    Vector x;
    double objective = 0.0;
    QpStatus status = QpStatus::MaxIterations;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    int iterations = 0;
    bool polished = false;
    /// Multipliers: stationarity reads P x + q + A_eq' y_eq + y_box = 0.
    /// y_box_i > 0 marks an active upper bound, < 0 an active lower bound.
    Vector y_eq;
    Vector y_box;
};

/// ADMM solver over a fixed (P, A_eq, bounds) structure. Scaling and the
/// factorization of the reduced KKT matrix are computed once and reused
/// while q and b_eq change, which is the receding-horizon use case. Each
/// solve warm starts from the previous iterate unless told otherwise.
class QpSolver {
public:
    explicit QpSolver(QpProblem problem, QpSettings settings = {});

    void update_linear_cost(const Vector& q);
    void update_equality_rhs(const Vector& b_eq);
    void set_warm_start(const Vector& x, const Vector* dual = nullptr);
    void clear_warm_start();

    QpSolution solve();

    const QpProblem& problem() const { return problem_; }
    const QpSettings& settings() const { return settings_; }
    int factorizations() const { return factorizations_; }
    double rho() const { return rho_; }

private:
    void scale();
    void set_rho_vector();
    void factorize();
    void scale_q();
    void scale_bounds();

    QpProblem problem_;
    QpSettings settings_;

    // Constraint rows: A_eq rows first, then one identity row per bounded variable.
    std::vector<Index> boxed_;
    Index m_eq_ = 0;
    Index m_ = 0;

    Vector D_;
    Vector E_;
    double c_ = 1.0;
    Matrix Ps_;
    Matrix Cs_;
    Vector qs_;
    Vector ls_;
    Vector us_;
    Vector rho_vec_;
    double rho_ = 0.1;
    Eigen::LLT<Matrix> kkt_;
    int factorizations_ = 0;

    bool have_warm_ = false;
    Vector xs_;
    Vector zs_;
    Vector ys_;
};

/// One-shot solve.
QpSolution solve(const QpProblem& problem, const QpSettings& settings = {});

} // namespace dkpc::qp
