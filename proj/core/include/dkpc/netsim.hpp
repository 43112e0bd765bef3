#pragma once

#include "dkpc/trajectory.hpp"

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace dkpc::netsim {

/// Lossless network: symmetric susceptance matrix with zero diagonal, plus a
/// constant-power demand at every bus (zero when the bus carries no load).
struct NetworkGraph {
    Matrix susceptance;
    Vector load;

    Index n_bus() const { return susceptance.rows(); }
    void validate() const;
};

struct Line {
    Index from; // 0-based
    Index to;
    double susceptance;
};

NetworkGraph make_network(Index n_bus, const std::vector<Line>& lines, const Vector& load);

/// Ten-bus ring with three chords, B_ij = 5 p.u. on every line and a 1 p.u.
/// load per bus, matching the default inverter setpoint.
NetworkGraph default_network();

/// Text format, one record per line, '#' starts a comment:
///   n_bus <n>
///   <i> <j> <B_ij>        (1-based bus indices)
///   load <i> <p>          (optional, defaults to 0)
NetworkGraph read_network(std::istream& in);
NetworkGraph load_network(const std::string& path);
void write_network(std::ostream& out, const NetworkGraph& net);

struct InverterParams {
    double p_star = 1.0;
    double k_p = 0.07;
    double omega_pc = 332.8;
    double omega_b = 1.0;

    void validate() const;
    friend bool operator==(const InverterParams&, const InverterParams&) = default;
};

enum class FilterMode { ExactExponential, ForwardEuler };

FilterMode parse_filter_mode(const std::string& text);
std::string to_string(FilterMode mode);

struct SimConfig {
    double dt = 0.01;
    FilterMode filter_mode = FilterMode::ExactExponential;
    std::uint64_t seed = 0;

    void validate() const;
    double filter_gain(double omega_pc) const;
};

struct SimState {
    Vector theta;
    Vector omega;
    Vector p_filt;
    Vector u_filt;

    static SimState zeros(Index n_bus);
    Index n_bus() const { return theta.size(); }
    bool finite() const;
};

class SimulationError : public std::runtime_error {
public:
    SimulationError(const std::string& what, Index step)
        : std::runtime_error(what), step_(step) {}
    Index step() const { return step_; }

private:
    Index step_;
};

/// p_i = sum_{j != i} B_ij sin(theta_i - theta_j).
Vector power_injections(const Vector& theta, const NetworkGraph& net);

/// One discrete step of the droop dynamics. Filters are advanced first, the
/// droop law uses the filtered values of the new step, and the angle update
/// uses the frequency of the old step.
SimState step(const SimState& state, const Vector& u, const std::vector<InverterParams>& params,
              const NetworkGraph& net, const SimConfig& cfg);

/// Runs the inputs column by column. y_k is the frequency deviation after the
/// step driven by u_k.
Trajectory simulate(const SimState& initial, const Matrix& inputs,
                    const std::vector<InverterParams>& params, const NetworkGraph& net,
                    const SimConfig& cfg);

/// theta = 0, omega = 0, filters at their steady values for zero input. This is
/// a fixed point iff every bus load equals its setpoint.
SimState nominal_state(const std::vector<InverterParams>& params, const NetworkGraph& net);

/// Initial perturbation of the state, optionally with a load step that
/// persists for the whole run. Per-bus amounts are drawn uniformly: state
/// offsets from [-amplitude, amplitude], load steps from
/// [load_step_min, load_step_max]. A load step shifts sum_i omega_i by a
/// constant that no lossless, load-free data record contains, so controllers
/// with hard past-window constraints become infeasible under it.
struct Disturbance {
    double omega = 0.0;
    double p_filt = 0.0;
    double theta = 0.0;
    double load_step_min = 0.0;
    double load_step_max = 0.0;

    friend bool operator==(const Disturbance&, const Disturbance&) = default;
};

struct DisturbedStart {
    SimState state;
    NetworkGraph net;
};

DisturbedStart apply_disturbance(const SimState& nominal, const NetworkGraph& net,
                                 const Disturbance& disturbance, std::uint64_t seed);

std::vector<InverterParams> uniform_params(Index n_bus, const InverterParams& p = {});

class NetworkPlant final : public Plant {
public:
    NetworkPlant(NetworkGraph net, std::vector<InverterParams> params, SimConfig cfg,
                 SimState initial);

    Index n_inputs() const override { return net_.n_bus(); }
    Index n_outputs() const override { return net_.n_bus(); }
    double dt() const override { return cfg_.dt; }
    Vector output() const override { return state_.omega; }
    Vector step(const Vector& u) override;

    const SimState& state() const { return state_; }
    Index steps_taken() const { return steps_; }

private:
    NetworkGraph net_;
    std::vector<InverterParams> params_;
    SimConfig cfg_;
    SimState state_;
    Index steps_ = 0;
};

} // namespace dkpc::netsim
