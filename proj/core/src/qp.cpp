#include "dkpc/qp.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dkpc::qp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMinScaling = 1e-4;
constexpr double kMaxScaling = 1e4;
constexpr double kRhoMin = 1e-6;
constexpr double kRhoMax = 1e6;
constexpr double kRhoEqFactor = 1e3;
constexpr double kDivTol = 1e-10;

double inf_norm(const Vector& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

double limit_scaling(double norm) {
    if (norm < kMinScaling) return 1.0;
    return std::min(norm, kMaxScaling);
}

} // namespace

void QpProblem::validate() const {
    const Index n = P.rows();
    if (P.cols() != n || q.size() != n || lower.size() != n || upper.size() != n)
        throw std::invalid_argument("qp: inconsistent dimensions of P, q or bounds");
    if (A_eq.cols() != n && A_eq.rows() > 0) throw std::invalid_argument("qp: A_eq column count != n");
    if (b_eq.size() != A_eq.rows()) throw std::invalid_argument("qp: b_eq length != rows of A_eq");
    if (!P.allFinite() || !q.allFinite() || !A_eq.allFinite() || !b_eq.allFinite())
        throw std::invalid_argument("qp: problem data must be finite");
    if (n > 0 && (P - P.transpose()).cwiseAbs().maxCoeff() > 1e-10)
        throw std::invalid_argument("qp: P is not symmetric");
    for (Index i = 0; i < n; ++i)
        if (!(lower(i) <= upper(i)) || std::isnan(lower(i)) || std::isnan(upper(i)))
            throw std::invalid_argument("qp: lower bound exceeds upper bound at index " + std::to_string(i));
}

double QpProblem::objective(const Vector& x) const { return 0.5 * x.dot(P * x) + q.dot(x); }

QpProblem QpProblem::zeros(Index n, Index m) {
    QpProblem p;
    p.P = Matrix::Zero(n, n);
    p.q = Vector::Zero(n);
    p.A_eq = Matrix::Zero(m, n);
    p.b_eq = Vector::Zero(m);
    p.lower = Vector::Constant(n, -kInf);
    p.upper = Vector::Constant(n, kInf);
    return p;
}

std::string to_string(QpStatus status) {
    switch (status) {
    case QpStatus::Solved: return "solved";
    case QpStatus::MaxIterations: return "max-iterations";
    case QpStatus::PrimalInfeasible: return "infeasible-detected";
    }
    return "unknown";
}

QpSolver::QpSolver(QpProblem problem, QpSettings settings)
    : problem_(std::move(problem)), settings_(std::move(settings)) {
    if (problem_.A_eq.rows() == 0) problem_.A_eq.resize(0, problem_.P.rows());
    problem_.validate();
    if (settings_.max_iter < 1 || settings_.check_interval < 1)
        throw std::invalid_argument("qp: max_iter and check_interval must be positive");
    if (!(settings_.alpha > 0.0 && settings_.alpha < 2.0))
        throw std::invalid_argument("qp: relaxation alpha must be in (0, 2)");

    const Index n = problem_.n();
    m_eq_ = problem_.m();
    for (Index j = 0; j < n; ++j)
        if (std::isfinite(problem_.lower(j)) || std::isfinite(problem_.upper(j))) boxed_.push_back(j);
    m_ = m_eq_ + static_cast<Index>(boxed_.size());

    scale();
    rho_ = std::clamp(settings_.rho, kRhoMin, kRhoMax);
    set_rho_vector();
    factorize();

    if (settings_.warm_start) set_warm_start(*settings_.warm_start, settings_.warm_start_dual ? &*settings_.warm_start_dual : nullptr);
}

void QpSolver::scale() {
    const Index n = problem_.n();
    Ps_ = problem_.P;
    Cs_ = Matrix::Zero(m_, n);
    if (m_eq_ > 0) Cs_.topRows(m_eq_) = problem_.A_eq;
    for (std::size_t k = 0; k < boxed_.size(); ++k) Cs_(m_eq_ + static_cast<Index>(k), boxed_[k]) = 1.0;
    qs_ = problem_.q;
    D_ = Vector::Ones(n);
    E_ = Vector::Ones(m_);
    c_ = 1.0;

    for (int it = 0; it < settings_.scaling_iterations; ++it) {
        Vector d(n);
        for (Index j = 0; j < n; ++j) {
            double norm = Ps_.col(j).cwiseAbs().maxCoeff();
            if (m_ > 0) norm = std::max(norm, Cs_.col(j).cwiseAbs().maxCoeff());
            d(j) = 1.0 / std::sqrt(limit_scaling(norm));
        }
        Vector e(m_);
        for (Index i = 0; i < m_; ++i) e(i) = 1.0 / std::sqrt(limit_scaling(Cs_.row(i).cwiseAbs().maxCoeff()));

        Ps_ = d.asDiagonal() * Ps_ * d.asDiagonal();
        Cs_ = e.asDiagonal() * Cs_ * d.asDiagonal();
        qs_ = d.cwiseProduct(qs_);
        D_ = D_.cwiseProduct(d);
        E_ = E_.cwiseProduct(e);

        double mean_col = 0.0;
        for (Index j = 0; j < n; ++j) mean_col += Ps_.col(j).cwiseAbs().maxCoeff();
        mean_col = n ? mean_col / static_cast<double>(n) : 0.0;
        const double cost = 1.0 / limit_scaling(std::max(mean_col, inf_norm(qs_)));
        Ps_ *= cost;
        qs_ *= cost;
        c_ *= cost;
    }
    scale_bounds();
}

void QpSolver::scale_q() { qs_ = c_ * D_.cwiseProduct(problem_.q); }

void QpSolver::scale_bounds() {
    ls_.resize(m_);
    us_.resize(m_);
    for (Index i = 0; i < m_eq_; ++i) ls_(i) = us_(i) = E_(i) * problem_.b_eq(i);
    for (std::size_t k = 0; k < boxed_.size(); ++k) {
        const Index r = m_eq_ + static_cast<Index>(k);
        const Index j = boxed_[k];
        ls_(r) = std::isfinite(problem_.lower(j)) ? E_(r) * problem_.lower(j) : -kInf;
        us_(r) = std::isfinite(problem_.upper(j)) ? E_(r) * problem_.upper(j) : kInf;
    }
}

void QpSolver::set_rho_vector() {
    rho_vec_.resize(m_);
    for (Index i = 0; i < m_; ++i) {
        const bool equality = i < m_eq_ || problem_.lower(boxed_[static_cast<std::size_t>(i - m_eq_)]) ==
                                               problem_.upper(boxed_[static_cast<std::size_t>(i - m_eq_)]);
        rho_vec_(i) = equality ? std::min(kRhoEqFactor * rho_, kRhoMax) : rho_;
    }
}

void QpSolver::factorize() {
    Matrix kkt = Ps_;
    kkt.diagonal().array() += settings_.sigma;
    if (m_ > 0) kkt.noalias() += Cs_.transpose() * rho_vec_.asDiagonal() * Cs_;
    kkt_.compute(kkt);
    if (kkt_.info() != Eigen::Success) throw std::runtime_error("qp: KKT factorization failed (P not PSD?)");
    ++factorizations_;
}

void QpSolver::update_linear_cost(const Vector& q) {
    if (q.size() != problem_.n()) throw std::invalid_argument("qp: q length mismatch");
    if (!q.allFinite()) throw std::invalid_argument("qp: q must be finite");
    problem_.q = q;
    scale_q();
}

void QpSolver::update_equality_rhs(const Vector& b_eq) {
    if (b_eq.size() != m_eq_) throw std::invalid_argument("qp: b_eq length mismatch");
    if (!b_eq.allFinite()) throw std::invalid_argument("qp: b_eq must be finite");
    problem_.b_eq = b_eq;
    scale_bounds();
}

void QpSolver::set_warm_start(const Vector& x, const Vector* dual) {
    if (x.size() != problem_.n()) throw std::invalid_argument("qp: warm start length mismatch");
    xs_ = x.cwiseQuotient(D_);
    zs_ = (Cs_ * xs_).cwiseMax(ls_).cwiseMin(us_);
    ys_ = Vector::Zero(m_);
    if (dual) {
        if (dual->size() != m_eq_ + problem_.n()) throw std::invalid_argument("qp: dual warm start length mismatch");
        for (Index i = 0; i < m_eq_; ++i) ys_(i) = c_ * (*dual)(i) / E_(i);
        for (std::size_t k = 0; k < boxed_.size(); ++k) {
            const Index r = m_eq_ + static_cast<Index>(k);
            ys_(r) = c_ * (*dual)(m_eq_ + boxed_[k]) / E_(r);
        }
    }
    have_warm_ = true;
}

void QpSolver::clear_warm_start() { have_warm_ = false; }

namespace {

struct Residuals {
    double primal = 0.0;
    double dual = 0.0;
    double worst() const { return std::max(primal, dual); }
};

// Unscaled KKT residuals; a bound multiplier of the wrong sign counts as a
// dual violation.
Residuals kkt_residuals(const QpProblem& p, const Vector& x, const Vector& y_eq, const Vector& y_box) {
    Residuals r;
    if (p.m() > 0) r.primal = inf_norm(p.A_eq * x - p.b_eq);
    r.primal = std::max({r.primal, (p.lower - x).maxCoeff(), (x - p.upper).maxCoeff(), 0.0});
    Vector stat = p.P * x + p.q + y_box;
    if (p.m() > 0) stat.noalias() += p.A_eq.transpose() * y_eq;
    r.dual = inf_norm(stat);
    for (Index i = 0; i < x.size(); ++i) {
        if (y_box(i) > 0.0 && !std::isfinite(p.upper(i))) r.dual = std::max(r.dual, y_box(i));
        if (y_box(i) < 0.0 && !std::isfinite(p.lower(i))) r.dual = std::max(r.dual, -y_box(i));
    }
    return r;
}

void polish(const QpProblem& p, const QpSettings& settings, QpSolution& sol) {
    const Index n = p.n();
    const Index m_eq = p.m();
    std::vector<Index> active;
    std::vector<double> bound;
    for (Index i = 0; i < n; ++i) {
        if (std::isfinite(p.lower(i)) && sol.x(i) - p.lower(i) < -sol.y_box(i)) {
            active.push_back(i);
            bound.push_back(p.lower(i));
        } else if (std::isfinite(p.upper(i)) && p.upper(i) - sol.x(i) < sol.y_box(i)) {
            active.push_back(i);
            bound.push_back(p.upper(i));
        }
    }
    const auto k = static_cast<Index>(active.size());
    const Index dim = n + m_eq + k;

    Matrix K = Matrix::Zero(dim, dim);
    K.topLeftCorner(n, n) = p.P;
    if (m_eq > 0) {
        K.block(n, 0, m_eq, n) = p.A_eq;
        K.block(0, n, n, m_eq) = p.A_eq.transpose();
    }
    for (Index j = 0; j < k; ++j) {
        K(n + m_eq + j, active[static_cast<std::size_t>(j)]) = 1.0;
        K(active[static_cast<std::size_t>(j)], n + m_eq + j) = 1.0;
    }
    Vector rhs(dim);
    rhs.head(n) = -p.q;
    rhs.segment(n, m_eq) = p.b_eq;
    for (Index j = 0; j < k; ++j) rhs(n + m_eq + j) = bound[static_cast<std::size_t>(j)];

    // Quasi-definite regularization keeps the factorization well posed when
    // P is singular or constraint rows are dependent; refinement removes its bias.
    Matrix K_reg = K;
    K_reg.diagonal().head(n).array() += settings.polish_delta;
    K_reg.diagonal().tail(m_eq + k).array() -= settings.polish_delta;
    const Eigen::PartialPivLU<Matrix> lu(K_reg);
    Vector sol_kkt = lu.solve(rhs);
    for (int it = 0; it < settings.polish_refine_iterations; ++it) sol_kkt += lu.solve(rhs - K * sol_kkt);
    if (!sol_kkt.allFinite()) return;

    const Vector x = sol_kkt.head(n);
    const Vector y_eq = sol_kkt.segment(n, m_eq);
    Vector y_box = Vector::Zero(n);
    for (Index j = 0; j < k; ++j) y_box(active[static_cast<std::size_t>(j)]) = sol_kkt(n + m_eq + j);
    // Multipliers must point the right way for the bound they sit on.
    for (Index j = 0; j < k; ++j) {
        const Index i = active[static_cast<std::size_t>(j)];
        const bool at_lower = bound[static_cast<std::size_t>(j)] == p.lower(i) && p.lower(i) != p.upper(i);
        const bool at_upper = bound[static_cast<std::size_t>(j)] == p.upper(i) && p.lower(i) != p.upper(i);
        if ((at_lower && y_box(i) > 0.0) || (at_upper && y_box(i) < 0.0)) return;
    }

    const Residuals before = kkt_residuals(p, sol.x, sol.y_eq, sol.y_box);
    const Residuals after = kkt_residuals(p, x, y_eq, y_box);
    if (after.worst() > before.worst()) return;
    sol.x = x;
    sol.y_eq = y_eq;
    sol.y_box = y_box;
    sol.objective = p.objective(x);
    sol.primal_residual = after.primal;
    sol.dual_residual = after.dual;
    sol.polished = true;
}

} // namespace

QpSolution QpSolver::solve() {
    const Index n = problem_.n();
    const double sigma = settings_.sigma;
    const double alpha = settings_.alpha;
    if (!have_warm_) {
        xs_ = Vector::Zero(n);
        zs_ = Vector::Zero(m_).cwiseMax(ls_).cwiseMin(us_);
        ys_ = Vector::Zero(m_);
    } else {
        // Bounds may have moved since the previous solve.
        zs_ = zs_.cwiseMax(ls_).cwiseMin(us_);
    }

    Vector x = xs_;
    Vector z = zs_;
    Vector y = ys_;
    Vector x_tilde(n);
    Vector z_tilde(m_);
    Vector z_relaxed(m_);
    Vector y_prev(m_);
    Vector Px(n);
    Vector Cty(n);
    Vector Cx(m_);

    const Vector D_inv = D_.cwiseInverse();
    const Vector E_inv = E_.cwiseInverse();

    QpSolution sol;
    sol.status = QpStatus::MaxIterations;
    double prim = 0.0;
    double dual = 0.0;
    int iter = 0;
    // Penalty updates that flip direction mean the estimate is cycling
    // between two stalled regimes; each reversal doubles the wait.
    int adapt_interval = settings_.adaptive_rho_interval;
    int next_adapt = adapt_interval;
    int last_direction = 0;

    for (iter = 1; iter <= settings_.max_iter; ++iter) {
        y_prev = y;

        x_tilde = sigma * x - qs_;
        if (m_ > 0) x_tilde.noalias() += Cs_.transpose() * (rho_vec_.cwiseProduct(z) - y);
        kkt_.solveInPlace(x_tilde);
        if (m_ > 0) z_tilde.noalias() = Cs_ * x_tilde;

        x = alpha * x_tilde + (1.0 - alpha) * x;
        z_relaxed = alpha * z_tilde + (1.0 - alpha) * z;
        z = (z_relaxed + y.cwiseQuotient(rho_vec_)).cwiseMax(ls_).cwiseMin(us_);
        y += rho_vec_.cwiseProduct(z_relaxed - z);

        const bool check = iter == 1 || iter % settings_.check_interval == 0 || iter == settings_.max_iter;
        const bool adapt = settings_.adaptive_rho && iter == next_adapt;
        if (!check && !adapt) continue;

        Px.noalias() = Ps_ * x;
        if (m_ > 0) {
            Cx.noalias() = Cs_ * x;
            Cty.noalias() = Cs_.transpose() * y;
        } else {
            Cty.setZero();
        }
        const Vector dual_vec = Px + qs_ + Cty;

        if (check) {
            prim = m_ > 0 ? inf_norm(E_inv.cwiseProduct(Cx - z)) : 0.0;
            dual = inf_norm(D_inv.cwiseProduct(dual_vec)) / c_;
            const double eps_prim =
                settings_.eps_abs +
                settings_.eps_rel * (m_ > 0 ? std::max(inf_norm(E_inv.cwiseProduct(Cx)), inf_norm(E_inv.cwiseProduct(z))) : 0.0);
            const double eps_dual =
                settings_.eps_abs + settings_.eps_rel / c_ *
                                        std::max({inf_norm(D_inv.cwiseProduct(Px)), inf_norm(D_inv.cwiseProduct(Cty)),
                                                  inf_norm(D_inv.cwiseProduct(qs_))});
            if (prim <= eps_prim && dual <= eps_dual) {
                sol.status = QpStatus::Solved;
                break;
            }

            // Primal infeasibility certificate from the dual increment.
            if (m_ > 0) {
                Vector dy = E_.cwiseProduct(y - y_prev);
                const double norm_dy = inf_norm(dy);
                if (norm_dy > settings_.eps_primal_infeasible) {
                    dy /= norm_dy;
                    double support = 0.0;
                    bool bounded = true;
                    for (Index i = 0; i < m_; ++i) {
                        const double up = i < m_eq_ ? problem_.b_eq(i) : problem_.upper(boxed_[static_cast<std::size_t>(i - m_eq_)]);
                        const double lo = i < m_eq_ ? problem_.b_eq(i) : problem_.lower(boxed_[static_cast<std::size_t>(i - m_eq_)]);
                        if (dy(i) > settings_.eps_primal_infeasible) {
                            if (!std::isfinite(up)) { bounded = false; break; }
                            support += up * dy(i);
                        } else if (dy(i) < -settings_.eps_primal_infeasible) {
                            if (!std::isfinite(lo)) { bounded = false; break; }
                            support += lo * dy(i);
                        }
                    }
                    if (bounded && support < -settings_.eps_primal_infeasible) {
                        const Vector cty = D_inv.cwiseProduct(Cs_.transpose() * E_inv.cwiseProduct(dy));
                        if (inf_norm(cty) < settings_.eps_primal_infeasible) {
                            sol.status = QpStatus::PrimalInfeasible;
                            break;
                        }
                    }
                }
            }
        }

        if (adapt && m_ > 0) {
            const double prim_s = inf_norm(Cx - z) / (std::max(inf_norm(Cx), inf_norm(z)) + kDivTol);
            const double dual_s = inf_norm(dual_vec) / (std::max({inf_norm(Px), inf_norm(Cty), inf_norm(qs_)}) + kDivTol);
            const double rho_new = std::clamp(rho_ * std::sqrt(prim_s / (dual_s + kDivTol)), kRhoMin, kRhoMax);
            if (rho_new > settings_.adaptive_rho_tolerance * rho_ || rho_new < rho_ / settings_.adaptive_rho_tolerance) {
                const int direction = rho_new > rho_ ? 1 : -1;
                if (last_direction != 0 && direction != last_direction) adapt_interval *= 2;
                last_direction = direction;
                rho_ = rho_new;
                set_rho_vector();
                factorize();
            }
        }
        if (adapt) next_adapt = iter + adapt_interval;
    }
    if (iter > settings_.max_iter) iter = settings_.max_iter;

    xs_ = x;
    zs_ = z;
    ys_ = y;
    have_warm_ = true;

    sol.iterations = iter;
    sol.x = D_.cwiseProduct(x);
    sol.objective = problem_.objective(sol.x);
    sol.primal_residual = prim;
    sol.dual_residual = dual;
    sol.y_eq.resize(m_eq_);
    for (Index i = 0; i < m_eq_; ++i) sol.y_eq(i) = E_(i) * y(i) / c_;
    sol.y_box = Vector::Zero(n);
    for (std::size_t k = 0; k < boxed_.size(); ++k) {
        const Index r = m_eq_ + static_cast<Index>(k);
        sol.y_box(boxed_[k]) = E_(r) * y(r) / c_;
    }
    if (settings_.polish && sol.status == QpStatus::Solved) polish(problem_, settings_, sol);
    return sol;
}

QpSolution solve(const QpProblem& problem, const QpSettings& settings) {
    QpSolver solver(problem, settings);
    return solver.solve();
}

} // namespace dkpc::qp
