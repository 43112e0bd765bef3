#include "dkpc/control.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "dkpc/netsim.hpp"

namespace dkpc::control {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Vector stack(const std::deque<Vector>& window) {
    if (window.empty()) return {};
    const Index d = window.front().size();
    Vector out(d * static_cast<Index>(window.size()));
    for (std::size_t k = 0; k < window.size(); ++k) out.segment(static_cast<Index>(k) * d, d) = window[k];
    return out;
}

Matrix cost_matrix(const QpLayout& lay, const PredictiveConfig& cfg, double lambda_sigma) {
    const Index n = lay.size();
    Matrix P = Matrix::Zero(n, n);
    P.topLeftCorner(lay.n_g, lay.n_g).diagonal().setConstant(2.0 * cfg.lambda_g);
    for (Index k = 0; k < lay.horizon; ++k) {
        const Index ui = lay.u_offset() + k * lay.n_u;
        const Index yi = lay.y_offset() + k * lay.n_y;
        P.block(ui, ui, lay.n_u, lay.n_u) = 2.0 * cfg.R;
        P.block(yi, yi, lay.n_y, lay.n_y) = 2.0 * cfg.Q;
    }
    if (lay.n_sigma > 0)
        P.bottomRightCorner(lay.n_sigma, lay.n_sigma).diagonal().setConstant(2.0 * lambda_sigma);
    // Exact symmetry for the solver's check.
    return 0.5 * (P + P.transpose());
}

Vector cost_vector(const QpLayout& lay, const PredictiveConfig& cfg, Index t) {
    Vector q = Vector::Zero(lay.size());
    for (Index k = 0; k < lay.horizon; ++k) {
        q.segment(lay.u_offset() + k * lay.n_u, lay.n_u) = -2.0 * cfg.R * cfg.u_nominal.at(t + k);
        q.segment(lay.y_offset() + k * lay.n_y, lay.n_y) = -2.0 * cfg.Q * cfg.reference.at(t + k + 1);
    }
    return q;
}

double cost_constant(const QpLayout& lay, const PredictiveConfig& cfg, Index t) {
    double c = 0.0;
    for (Index k = 0; k < lay.horizon; ++k) {
        const Vector us = cfg.u_nominal.at(t + k);
        const Vector r = cfg.reference.at(t + k + 1);
        c += us.dot(cfg.R * us) + r.dot(cfg.Q * r);
    }
    return c;
}

void fill_bounds(const QpLayout& lay, const PredictiveConfig& cfg, Vector& lower, Vector& upper) {
    lower = Vector::Constant(lay.size(), -kInf);
    upper = Vector::Constant(lay.size(), kInf);
    for (Index k = 0; k < lay.horizon; ++k) {
        lower.segment(lay.u_offset() + k * lay.n_u, lay.n_u) = cfg.u_bounds.lower;
        upper.segment(lay.u_offset() + k * lay.n_u, lay.n_u) = cfg.u_bounds.upper;
        lower.segment(lay.y_offset() + k * lay.n_y, lay.n_y) = cfg.y_bounds.lower;
        upper.segment(lay.y_offset() + k * lay.n_y, lay.n_y) = cfg.y_bounds.upper;
    }
}

// Rows: U_past, Y_past, Z_past (if any), U_future, Y_future; sigma enters the
// Y_past rows with coefficient -1 when present.
Matrix equality_matrix(const QpLayout& lay, const Eigen::Ref<const Matrix>& up, const Eigen::Ref<const Matrix>& yp,
                       const Eigen::Ref<const Matrix>& zp, const Eigen::Ref<const Matrix>& uf,
                       const Eigen::Ref<const Matrix>& yf) {
    const Index rows = up.rows() + yp.rows() + zp.rows() + uf.rows() + yf.rows();
    Matrix A = Matrix::Zero(rows, lay.size());
    Index r = 0;
    A.block(r, 0, up.rows(), lay.n_g) = up;
    r += up.rows();
    A.block(r, 0, yp.rows(), lay.n_g) = yp;
    if (lay.n_sigma > 0) A.block(r, lay.sigma_offset(), yp.rows(), lay.n_sigma) = -Matrix::Identity(yp.rows(), lay.n_sigma);
    r += yp.rows();
    if (zp.rows() > 0) A.block(r, 0, zp.rows(), lay.n_g) = zp;
    r += zp.rows();
    A.block(r, 0, uf.rows(), lay.n_g) = uf;
    A.block(r, lay.u_offset(), uf.rows(), uf.rows()) = -Matrix::Identity(uf.rows(), uf.rows());
    r += uf.rows();
    A.block(r, 0, yf.rows(), lay.n_g) = yf;
    A.block(r, lay.y_offset(), yf.rows(), yf.rows()) = -Matrix::Identity(yf.rows(), yf.rows());
    return A;
}

Vector equality_rhs_for(const ControllerState& cs, const RbfBank* bank, Index rows) {
    if (!cs.primed()) throw std::logic_error("controller state is not primed: need T_ini measurements");
    Vector b = Vector::Zero(rows);
    const Vector u = cs.stacked_u();
    const Vector y = cs.stacked_y();
    b.head(u.size()) = u;
    b.segment(u.size(), y.size()) = y;
    if (bank) {
        Index r = u.size() + y.size();
        for (const auto& yk : cs.y_ini()) {
            const Vector z = lift(yk, *bank);
            b.segment(r, z.size()) = z;
            r += z.size();
        }
    }
    return b;
}

void check_psd(const Matrix& m, const char* what, bool strict) {
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw std::invalid_argument(std::string(what) + " must be symmetric");
    const Vector ev = Eigen::SelfAdjointEigenSolver<Matrix>(m, Eigen::EigenvaluesOnly).eigenvalues();
    const double tol = 1e-12 * std::max(1.0, ev.cwiseAbs().maxCoeff());
    if (strict ? ev.minCoeff() <= tol : ev.minCoeff() < -tol)
        throw std::invalid_argument(std::string(what) + (strict ? " must be positive definite" : " must be PSD"));
}

} // namespace

BoxBounds BoxBounds::unbounded(Index n) { return {Vector::Constant(n, -kInf), Vector::Constant(n, kInf)}; }

BoxBounds BoxBounds::uniform(Index n, double lo, double hi) {
    if (!(lo <= hi)) throw std::invalid_argument("bounds: lower > upper");
    return {Vector::Constant(n, lo), Vector::Constant(n, hi)};
}

bool BoxBounds::contains(const Vector& v, double tol) const {
    return v.size() == size() && (v.array() >= lower.array() - tol).all() && (v.array() <= upper.array() + tol).all();
}

Vector BoxBounds::clamp(const Vector& v) const { return v.cwiseMax(lower).cwiseMin(upper); }

Schedule Schedule::constant(const Vector& v) {
    Schedule s;
    s.values = v;
    return s;
}

Vector Schedule::at(Index k) const {
    if (values.cols() == 0) throw std::logic_error("schedule is empty");
    return values.col(std::clamp<Index>(k, 0, values.cols() - 1));
}

Fallback parse_fallback(const std::string& text) {
    if (text == "hold") return Fallback::HoldLast;
    if (text == "zero") return Fallback::Zero;
    throw std::invalid_argument("unknown fallback: " + text);
}

std::string to_string(Fallback f) { return f == Fallback::HoldLast ? "hold" : "zero"; }

PredictiveConfig PredictiveConfig::defaults(Index n_u, Index n_y) {
    PredictiveConfig c;
    c.Q = 300.0 * Matrix::Identity(n_y, n_y);
    c.R = 0.01 * Matrix::Identity(n_u, n_u);
    c.u_bounds = BoxBounds::uniform(n_u, -1.0, 1.0);
    c.y_bounds = BoxBounds::unbounded(n_y);
    c.reference = Schedule::zeros(n_y);
    c.u_nominal = Schedule::zeros(n_u);
    return c;
}

void PredictiveConfig::validate(Index n_u, Index n_y) const {
    if (t_ini < 1 || horizon < 1) throw std::invalid_argument("controller: T_ini and N must be >= 1");
    if (!(lambda_g >= 0.0)) throw std::invalid_argument("controller: lambda_g must be >= 0");
    if (Q.rows() != n_y || Q.cols() != n_y) throw std::invalid_argument("controller: Q must be n_y x n_y");
    if (R.rows() != n_u || R.cols() != n_u) throw std::invalid_argument("controller: R must be n_u x n_u");
    check_psd(Q, "Q", false);
    check_psd(R, "R", true);
    if (u_bounds.size() != n_u || y_bounds.size() != n_y)
        throw std::invalid_argument("controller: bound dimensions do not match the data");
    for (Index i = 0; i < n_u; ++i)
        if (!(u_bounds.lower(i) <= u_bounds.upper(i))) throw std::invalid_argument("controller: empty input box");
    for (Index i = 0; i < n_y; ++i)
        if (!(y_bounds.lower(i) <= y_bounds.upper(i))) throw std::invalid_argument("controller: empty output box");
    if (reference.dim() != n_y || u_nominal.dim() != n_u || reference.values.cols() == 0 || u_nominal.values.cols() == 0)
        throw std::invalid_argument("controller: reference/nominal input dimensions do not match the data");
}

ControllerState::ControllerState(Index t_ini, Index n_u) : t_ini_(t_ini), last_input_(Vector::Zero(n_u)) {
    if (t_ini < 1) throw std::invalid_argument("controller state: T_ini must be >= 1");
}

void ControllerState::observe(const Vector& y) {
    u_ini_.push_back(last_input_);
    y_ini_.push_back(y);
    while (static_cast<Index>(y_ini_.size()) > t_ini_) {
        u_ini_.pop_front();
        y_ini_.pop_front();
    }
}

Vector ControllerState::stacked_u() const { return stack(u_ini_); }
Vector ControllerState::stacked_y() const { return stack(y_ini_); }

ControllerState ControllerState::from_history(const Matrix& u_ini, const Matrix& y_ini, const Vector& last_input) {
    if (u_ini.cols() != y_ini.cols()) throw std::invalid_argument("controller state: history lengths differ");
    ControllerState cs(u_ini.cols(), u_ini.rows());
    for (Index k = 0; k < u_ini.cols(); ++k) {
        cs.u_ini_.push_back(u_ini.col(k));
        cs.y_ini_.push_back(y_ini.col(k));
    }
    cs.last_input_ = last_input;
    return cs;
}

qp::QpProblem build_dkpc_qp(const HankelSystem& hs, const RbfBank& bank, const DkpcConfig& cfg,
                            const ControllerState& cs, Index t) {
    cfg.validate(hs.n_u, hs.n_y);
    if (bank.n_basis() != hs.n_z || bank.n_y() != hs.n_y)
        throw std::invalid_argument("build_dkpc_qp: bank does not match the lifted Hankel block");
    if (hs.t_ini != cfg.t_ini || hs.horizon != cfg.horizon || cs.t_ini() != cfg.t_ini)
        throw std::invalid_argument("build_dkpc_qp: T_ini/N differ between data, config and state");
    QpLayout lay{hs.n_cols(), hs.n_u, hs.n_y, hs.horizon, 0};
    qp::QpProblem p;
    p.P = cost_matrix(lay, cfg, 0.0);
    p.q = cost_vector(lay, cfg, t);
    p.A_eq = equality_matrix(lay, hs.U_past(), hs.Y_past(), hs.Z_past(), hs.U_future(), hs.Y_future());
    p.b_eq = equality_rhs_for(cs, &bank, p.A_eq.rows());
    fill_bounds(lay, cfg, p.lower, p.upper);
    return p;
}

qp::QpProblem build_deepc_qp(const Eigen::Ref<const Matrix>& up, const Eigen::Ref<const Matrix>& yp,
                             const Eigen::Ref<const Matrix>& uf, const Eigen::Ref<const Matrix>& yf,
                             const DeepcConfig& cfg, const ControllerState& cs, Index t) {
    const Index n_u = up.rows() / std::max<Index>(cfg.t_ini, 1);
    const Index n_y = yp.rows() / std::max<Index>(cfg.t_ini, 1);
    cfg.validate(n_u, n_y);
    if (up.rows() != n_u * cfg.t_ini || yp.rows() != n_y * cfg.t_ini || uf.rows() != n_u * cfg.horizon ||
        yf.rows() != n_y * cfg.horizon || up.cols() != yp.cols() || up.cols() != uf.cols() || up.cols() != yf.cols())
        throw std::invalid_argument("build_deepc_qp: Hankel partitions have inconsistent shapes");
    if (!cfg.slack_fixed_zero && !(cfg.lambda_sigma > 0.0))
        throw std::invalid_argument("build_deepc_qp: lambda_sigma must be positive");
    if (cs.t_ini() != cfg.t_ini) throw std::invalid_argument("build_deepc_qp: state T_ini differs from config");
    QpLayout lay{up.cols(), n_u, n_y, cfg.horizon, cfg.slack_fixed_zero ? 0 : n_y * cfg.t_ini};
    const Matrix none(0, up.cols());
    qp::QpProblem p;
    p.P = cost_matrix(lay, cfg, cfg.lambda_sigma);
    p.q = cost_vector(lay, cfg, t);
    p.A_eq = equality_matrix(lay, up, yp, none, uf, yf);
    p.b_eq = equality_rhs_for(cs, nullptr, p.A_eq.rows());
    fill_bounds(lay, cfg, p.lower, p.upper);
    return p;
}

std::string to_string(ControllerKind kind) { return kind == ControllerKind::Dkpc ? "dkpc" : "deepc"; }

ControllerKind parse_controller_kind(const std::string& text) {
    if (text == "dkpc" || text == "DKPC") return ControllerKind::Dkpc;
    if (text == "deepc" || text == "DeePC") return ControllerKind::Deepc;
    throw std::invalid_argument("unknown controller kind: " + text);
}

PredictiveController PredictiveController::dkpc(HankelSystem hs, RbfBank bank, DkpcConfig cfg) {
    if (bank.n_basis() != hs.n_z || bank.n_y() != hs.n_y)
        throw std::invalid_argument("dkpc: bank does not match the lifted Hankel block");
    return PredictiveController(ControllerKind::Dkpc, std::move(hs), std::move(bank), std::move(cfg), 0.0, true);
}

PredictiveController PredictiveController::deepc(HankelSystem hs, DeepcConfig cfg) {
    if (!cfg.slack_fixed_zero && !(cfg.lambda_sigma > 0.0))
        throw std::invalid_argument("deepc: lambda_sigma must be positive");
    const double ls = cfg.lambda_sigma;
    const bool fixed = cfg.slack_fixed_zero;
    hs.Z.resize(0, hs.U.cols());
    hs.n_z = 0;
    return PredictiveController(ControllerKind::Deepc, std::move(hs), RbfBank{}, std::move(cfg), ls, fixed);
}

PredictiveController::PredictiveController(ControllerKind kind, HankelSystem hs, RbfBank bank, PredictiveConfig cfg,
                                           double lambda_sigma, bool slack_fixed_zero)
    : kind_(kind), hs_(std::move(hs)), bank_(std::move(bank)), cfg_(std::move(cfg)), lambda_sigma_(lambda_sigma) {
    cfg_.validate(hs_.n_u, hs_.n_y);
    if (hs_.t_ini != cfg_.t_ini || hs_.horizon != cfg_.horizon)
        throw std::invalid_argument("controller: Hankel depth does not match T_ini + N of the config");
    // Data must at least excite every depth-L input window.
    const RankReport pe = row_rank(hs_.U);
    if (!pe.full_row_rank)
        throw std::invalid_argument("controller: input data not persistently exciting of order T_ini + N (" +
                                    pe.reason + ")");

    const Index n_sigma = (kind_ == ControllerKind::Deepc && !slack_fixed_zero) ? hs_.n_y * hs_.t_ini : 0;
    layout_ = QpLayout{hs_.n_cols(), hs_.n_u, hs_.n_y, hs_.horizon, n_sigma};
    structure_.P = cost_matrix(layout_, cfg_, lambda_sigma_);
    structure_.q = Vector::Zero(layout_.size());
    structure_.A_eq = equality_matrix(layout_, hs_.U_past(), hs_.Y_past(), hs_.Z_past(), hs_.U_future(), hs_.Y_future());
    structure_.b_eq = Vector::Zero(structure_.A_eq.rows());
    fill_bounds(layout_, cfg_, structure_.lower, structure_.upper);
    solver_ = std::make_unique<qp::QpSolver>(structure_, cfg_.solver);
    state_ = ControllerState(cfg_.t_ini, hs_.n_u);
}

Vector PredictiveController::equality_rhs() const {
    return equality_rhs_for(state_, kind_ == ControllerKind::Dkpc ? &bank_ : nullptr, structure_.A_eq.rows());
}

Vector PredictiveController::linear_cost(Index t) const { return cost_vector(layout_, cfg_, t); }

qp::QpProblem PredictiveController::current_problem() const {
    qp::QpProblem p = structure_;
    p.q = linear_cost(time_);
    p.b_eq = equality_rhs();
    return p;
}

double PredictiveController::stage_cost(const Vector& y, const Vector& u, Index t) const {
    const Vector ey = y - cfg_.reference.at(t);
    const Vector eu = u - cfg_.u_nominal.at(t);
    return ey.dot(cfg_.Q * ey) + eu.dot(cfg_.R * eu);
}

void PredictiveController::observe(const Vector& y, const Vector& u_applied) {
    if (y.size() != hs_.n_y || u_applied.size() != hs_.n_u) throw std::invalid_argument("controller: observe size mismatch");
    ++time_;
    state_.observe(y);
    state_.apply(u_applied);
}

StepResult PredictiveController::solve_step(const Vector& y) {
    if (y.size() != hs_.n_y) throw std::invalid_argument("controller: measurement size mismatch");
    ++time_;
    state_.observe(y);
    if (!state_.primed()) throw std::logic_error("controller: not primed, need T_ini measurements before solving");

    solver_->update_equality_rhs(equality_rhs());
    solver_->update_linear_cost(linear_cost(time_));
    const qp::QpSolution sol = solver_->solve();

    StepResult res;
    res.status = sol.status;
    res.iterations = sol.iterations;
    res.primal_residual = sol.primal_residual;
    res.dual_residual = sol.dual_residual;
    res.optimal_cost = sol.objective + cost_constant(layout_, cfg_, time_);
    res.u_future = sol.x.segment(layout_.u_offset(), layout_.n_u * layout_.horizon);
    res.predicted_y = sol.x.segment(layout_.y_offset(), layout_.n_y * layout_.horizon);
    res.slack = sol.x.tail(layout_.n_sigma);

    if (sol.status == qp::QpStatus::Solved) {
        res.u = cfg_.u_bounds.clamp(res.u_future.head(layout_.n_u));
    } else {
        res.fallback_used = true;
        res.u = cfg_.fallback == Fallback::HoldLast ? state_.last_input() : Vector::Zero(hs_.n_u);
        res.u = cfg_.u_bounds.clamp(res.u);
        solver_->clear_warm_start();
    }
    state_.apply(res.u);
    return res;
}

Matrix ClosedLoopTrace::outputs() const {
    if (steps.empty()) return {};
    Matrix m(steps.front().y.size(), static_cast<Index>(steps.size()));
    for (std::size_t k = 0; k < steps.size(); ++k) m.col(static_cast<Index>(k)) = steps[k].y;
    return m;
}

Matrix ClosedLoopTrace::inputs() const {
    if (steps.empty()) return {};
    Matrix m(steps.front().u.size(), static_cast<Index>(steps.size()));
    for (std::size_t k = 0; k < steps.size(); ++k) m.col(static_cast<Index>(k)) = steps[k].u;
    return m;
}

Index ClosedLoopTrace::solver_failures() const {
    return std::count_if(steps.begin(), steps.end(), [](const TraceStep& s) { return s.fallback_used; });
}

ClosedLoopTrace run_closed_loop(Plant& plant, PredictiveController& controller, const Scenario& scenario) {
    if (scenario.t_sim < 1) throw std::invalid_argument("closed loop: T_sim must be >= 1");
    if (scenario.activation_step < 0) throw std::invalid_argument("closed loop: activation step must be >= 0");
    if (scenario.activation_step < scenario.t_sim && scenario.activation_step + 1 < controller.config().t_ini)
        throw std::invalid_argument("closed loop: activation before T_ini measurements are available");

    ClosedLoopTrace trace;
    trace.dt = plant.dt();
    trace.activation_step = scenario.activation_step;
    trace.steps.reserve(static_cast<std::size_t>(scenario.t_sim));

    Vector y = plant.output();
    for (Index k = 0; k < scenario.t_sim; ++k) {
        TraceStep rec;
        rec.k = k;
        rec.t = static_cast<double>(k) * plant.dt();
        rec.y = y;
        rec.active = k >= scenario.activation_step;
        if (rec.active) {
            StepResult res = controller.solve_step(y);
            rec.u = std::move(res.u);
            rec.predicted_y = std::move(res.predicted_y);
            rec.status = res.status;
            rec.iterations = res.iterations;
            rec.primal_residual = res.primal_residual;
            rec.dual_residual = res.dual_residual;
            rec.fallback_used = res.fallback_used;
        } else {
            rec.u = Vector::Zero(plant.n_inputs());
            controller.observe(y, rec.u);
        }
        rec.cost = controller.stage_cost(rec.y, rec.u, k);
        const Vector u = rec.u;
        trace.steps.push_back(std::move(rec));
        try {
            y = plant.step(u);
        } catch (const netsim::SimulationError& e) {
            trace.aborted = true;
            trace.error = e.what();
            break;
        }
    }
    return trace;
}

} // namespace dkpc::control
