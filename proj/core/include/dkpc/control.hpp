#pragma once

#include "dkpc/behavior.hpp"
#include "dkpc/lifting.hpp"
#include "dkpc/qp.hpp"
#include "dkpc/trajectory.hpp"

#include <deque>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace dkpc::control {

struct BoxBounds {
    Vector lower;
    Vector upper;

    static BoxBounds unbounded(Index n);
    static BoxBounds uniform(Index n, double lo, double hi);
    Index size() const { return lower.size(); }
    bool contains(const Vector& v, double tol = 0.0) const;
    Vector clamp(const Vector& v) const;
};

/// Time-varying vector signal. One column means constant; past the last
/// column the final value is held.
struct Schedule {
    Matrix values;

    static Schedule constant(const Vector& v);
    static Schedule zeros(Index n) { return constant(Vector::Zero(n)); }
    Index dim() const { return values.rows(); }
    Vector at(Index k) const;
};

enum class Fallback { HoldLast, Zero };

Fallback parse_fallback(const std::string& text);
std::string to_string(Fallback f);

/// Settings shared by the lifted and unlifted controllers.
struct PredictiveConfig {
    Index t_ini = 5;
    Index horizon = 10;
    Matrix Q;
    Matrix R;
    double lambda_g = 500.0;
    BoxBounds u_bounds;
    BoxBounds y_bounds;
    Schedule reference;
    Schedule u_nominal;
    Fallback fallback = Fallback::HoldLast;
    /// Polishing is off: a dense KKT factorization per step would dominate
    /// the closed-loop runtime at these sizes.
    qp::QpSettings solver = [] {
        qp::QpSettings s;
        s.polish = false;
        return s;
    }();

    /// Q = 300 I, R = 0.01 I, lambda_g = 500, inputs in [-1, 1], outputs
    /// unbounded, zero reference and nominal input.
    static PredictiveConfig defaults(Index n_u, Index n_y);
    void validate(Index n_u, Index n_y) const;
};

struct DkpcConfig : PredictiveConfig {};

struct DeepcConfig : PredictiveConfig {
    double lambda_sigma = 1e5;
    /// Drops the slack variables, i.e. sigma = 0 (the lambda_sigma -> inf limit).
    bool slack_fixed_zero = false;
};

/// Sliding initialization window. Each entry pairs the input applied at a
/// step with the output it produced, matching the Hankel column convention.
class ControllerState {
public:
    ControllerState() = default;
    ControllerState(Index t_ini, Index n_u);

    /// Records a new measurement together with the input that preceded it.
    void observe(const Vector& y);
    /// Sets the input that will be paired with the next measurement.
    void apply(const Vector& u) { last_input_ = u; }

    bool primed() const { return static_cast<Index>(y_ini_.size()) == t_ini_; }
    Index t_ini() const { return t_ini_; }
    const std::deque<Vector>& u_ini() const { return u_ini_; }
    const std::deque<Vector>& y_ini() const { return y_ini_; }
    const Vector& last_input() const { return last_input_; }
    Vector stacked_u() const;
    Vector stacked_y() const;

    /// Primes both windows directly (oldest sample first).
    static ControllerState from_history(const Matrix& u_ini, const Matrix& y_ini, const Vector& last_input);

private:
    Index t_ini_ = 0;
    std::deque<Vector> u_ini_;
    std::deque<Vector> y_ini_;
    Vector last_input_;
};

/// Offsets of the blocks of the decision vector (g, u_future, y_future, sigma).
struct QpLayout {
    Index n_g = 0;
    Index n_u = 0;
    Index n_y = 0;
    Index horizon = 0;
    Index n_sigma = 0;

    Index u_offset() const { return n_g; }
    Index y_offset() const { return n_g + n_u * horizon; }
    Index sigma_offset() const { return y_offset() + n_y * horizon; }
    Index size() const { return sigma_offset() + n_sigma; }
};

/// Lifted behavioral program. Equality rows, in order: U_past g = u_ini,
/// Y_past g = y_ini, Z_past g = lift(y_ini), U_future g = u, Y_future g = y.
/// `t` is the current step, used to sample the reference schedules.
qp::QpProblem build_dkpc_qp(const HankelSystem& hs, const RbfBank& bank, const DkpcConfig& cfg,
                            const ControllerState& cs, Index t = 0);

/// Unlifted program with slack on the y_ini rows: U_p g = u_ini,
/// Y_p g - sigma = y_ini, U_f g = u, Y_f g = y.
qp::QpProblem build_deepc_qp(const Eigen::Ref<const Matrix>& up, const Eigen::Ref<const Matrix>& yp,
                             const Eigen::Ref<const Matrix>& uf, const Eigen::Ref<const Matrix>& yf,
                             const DeepcConfig& cfg, const ControllerState& cs, Index t = 0);

enum class ControllerKind { Dkpc, Deepc };

std::string to_string(ControllerKind kind);
ControllerKind parse_controller_kind(const std::string& text);

struct StepResult {
    Vector u;
    qp::QpStatus status = qp::QpStatus::MaxIterations;
    int iterations = 0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double optimal_cost = 0.0;
    Vector u_future;
    Vector predicted_y;
    Vector slack;
    bool fallback_used = false;
};

/// Receding-horizon controller over fixed offline Hankel data. The QP
/// structure is built once; each step only rewrites b_eq and q.
class PredictiveController {
public:
    static PredictiveController dkpc(HankelSystem hs, RbfBank bank, DkpcConfig cfg);
    static PredictiveController deepc(HankelSystem hs, DeepcConfig cfg);

    ControllerKind kind() const { return kind_; }
    const ControllerState& state() const { return state_; }
    const QpLayout& layout() const { return layout_; }
    const PredictiveConfig& config() const { return cfg_; }
    Index time() const { return time_; }

    /// Passive step before activation: records y and the applied input.
    void observe(const Vector& y, const Vector& u_applied);

    /// Records y, solves the current program and returns the first input.
    StepResult solve_step(const Vector& y);

    /// The program that the next solve would see, for inspection.
    qp::QpProblem current_problem() const;

    double stage_cost(const Vector& y, const Vector& u, Index t) const;

private:
    PredictiveController(ControllerKind kind, HankelSystem hs, RbfBank bank, PredictiveConfig cfg,
                         double lambda_sigma, bool slack_fixed_zero);

    Vector equality_rhs() const;
    Vector linear_cost(Index t) const;

    ControllerKind kind_;
    HankelSystem hs_;
    RbfBank bank_;
    PredictiveConfig cfg_;
    double lambda_sigma_ = 0.0;
    QpLayout layout_;
    qp::QpProblem structure_;
    std::unique_ptr<qp::QpSolver> solver_;
    ControllerState state_;
    Index time_ = -1;
};

struct Scenario {
    Index t_sim = 150;
    Index activation_step = 40;
};

struct TraceStep {
    Index k = 0;
    double t = 0.0;
    bool active = false;
    Vector y;
    Vector u;
    Vector predicted_y;
    std::optional<qp::QpStatus> status;
    int iterations = 0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double cost = 0.0;
    bool fallback_used = false;
};

struct ClosedLoopTrace {
    std::vector<TraceStep> steps;
    double dt = 0.01;
    Index activation_step = 0;
    bool aborted = false;
    std::string error;

    Matrix outputs() const;
    Matrix inputs() const;
    Index solver_failures() const;
};

/// measure -> (solve if active, else zero input) -> plant step -> record.
/// A plant divergence stops the loop and returns the partial trace.
ClosedLoopTrace run_closed_loop(Plant& plant, PredictiveController& controller, const Scenario& scenario);

} // namespace dkpc::control
