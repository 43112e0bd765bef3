#include "dkpc/netsim.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

namespace dkpc::netsim {

namespace {

bool connected(const Matrix& b) {
    const Index n = b.rows();
    if (n == 0) return false;
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    std::vector<Index> stack{0};
    seen[0] = true;
    Index count = 1;
    while (!stack.empty()) {
        const Index i = stack.back();
        stack.pop_back();
        for (Index j = 0; j < n; ++j) {
            if (b(i, j) != 0.0 && !seen[static_cast<std::size_t>(j)]) {
                seen[static_cast<std::size_t>(j)] = true;
                ++count;
                stack.push_back(j);
            }
        }
    }
    return count == n;
}

} // namespace

void NetworkGraph::validate() const {
    const Index n = susceptance.rows();
    if (n < 1 || susceptance.cols() != n)
        throw std::invalid_argument("network: susceptance matrix must be square and non-empty");
    if (load.size() != n)
        throw std::invalid_argument("network: load vector length must equal n_bus");
    for (Index i = 0; i < n; ++i) {
        if (susceptance(i, i) != 0.0)
            throw std::invalid_argument("network: susceptance diagonal must be zero");
        for (Index j = 0; j < n; ++j) {
            if (susceptance(i, j) != susceptance(j, i))
                throw std::invalid_argument("network: susceptance must be symmetric");
            if (susceptance(i, j) < 0.0 || !std::isfinite(susceptance(i, j)))
                throw std::invalid_argument("network: susceptance entries must be finite and >= 0");
        }
    }
    if (!load.allFinite()) throw std::invalid_argument("network: loads must be finite");
    if (!connected(susceptance)) throw std::invalid_argument("network: graph is not connected");
}

NetworkGraph make_network(Index n_bus, const std::vector<Line>& lines, const Vector& load) {
    NetworkGraph net;
    net.susceptance = Matrix::Zero(n_bus, n_bus);
    net.load = load;
    for (const auto& line : lines) {
        if (line.from < 0 || line.to < 0 || line.from >= n_bus || line.to >= n_bus || line.from == line.to)
            throw std::invalid_argument("network: invalid line endpoints");
        net.susceptance(line.from, line.to) = line.susceptance;
        net.susceptance(line.to, line.from) = line.susceptance;
    }
    net.validate();
    return net;
}

NetworkGraph default_network() {
    constexpr Index n = 10;
    constexpr double b = 5.0;
    std::vector<Line> lines;
    for (Index i = 0; i < n; ++i) lines.push_back({i, (i + 1) % n, b});
    lines.push_back({0, 5, b});
    lines.push_back({2, 7, b});
    lines.push_back({4, 9, b});
    return make_network(n, lines, Vector::Ones(n));
}

NetworkGraph read_network(std::istream& in) {
    Index n_bus = -1;
    std::vector<Line> lines;
    std::vector<std::pair<Index, double>> loads;
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
        std::istringstream ls(raw);
        std::string head;
        if (!(ls >> head)) continue;
        auto fail = [&](const std::string& msg) {
            throw std::invalid_argument("network file line " + std::to_string(lineno) + ": " + msg);
        };
        if (head == "n_bus") {
            if (!(ls >> n_bus) || n_bus < 1) fail("expected positive bus count");
        } else if (head == "load") {
            Index i = 0;
            double p = 0.0;
            if (!(ls >> i >> p)) fail("expected 'load <bus> <p>'");
            loads.emplace_back(i - 1, p);
        } else {
            Index i = 0;
            Index j = 0;
            double b = 0.0;
            std::istringstream triple(raw);
            if (!(triple >> i >> j >> b)) fail("expected '<i> <j> <B_ij>'");
            lines.push_back({i - 1, j - 1, b});
        }
    }
    if (n_bus < 1) throw std::invalid_argument("network file: missing n_bus record");
    Vector load = Vector::Zero(n_bus);
    for (const auto& [i, p] : loads) {
        if (i < 0 || i >= n_bus) throw std::invalid_argument("network file: load bus out of range");
        load(i) = p;
    }
    return make_network(n_bus, lines, load);
}

NetworkGraph load_network(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open network file: " + path);
    return read_network(in);
}

void write_network(std::ostream& out, const NetworkGraph& net) {
    out << std::setprecision(17);
    out << "n_bus " << net.n_bus() << '\n';
    for (Index i = 0; i < net.n_bus(); ++i)
        for (Index j = i + 1; j < net.n_bus(); ++j)
            if (net.susceptance(i, j) != 0.0)
                out << i + 1 << ' ' << j + 1 << ' ' << net.susceptance(i, j) << '\n';
    for (Index i = 0; i < net.n_bus(); ++i)
        if (net.load(i) != 0.0) out << "load " << i + 1 << ' ' << net.load(i) << '\n';
}

void InverterParams::validate() const {
    if (!(k_p > 0.0)) throw std::invalid_argument("inverter: k_p must be positive");
    if (!(omega_pc > 0.0)) throw std::invalid_argument("inverter: omega_pc must be positive");
    if (!std::isfinite(p_star) || !std::isfinite(omega_b))
        throw std::invalid_argument("inverter: parameters must be finite");
}

FilterMode parse_filter_mode(const std::string& text) {
    if (text == "exact-exponential") return FilterMode::ExactExponential;
    if (text == "forward-euler") return FilterMode::ForwardEuler;
    throw std::invalid_argument("unknown filter mode: " + text);
}

std::string to_string(FilterMode mode) {
    return mode == FilterMode::ExactExponential ? "exact-exponential" : "forward-euler";
}

void SimConfig::validate() const {
    if (!(dt > 0.0)) throw std::invalid_argument("sim config: dt must be positive");
}

double SimConfig::filter_gain(double omega_pc) const {
    if (filter_mode == FilterMode::ExactExponential) return -std::expm1(-omega_pc * dt);
    return dt * omega_pc;
}

SimState SimState::zeros(Index n_bus) {
    return {Vector::Zero(n_bus), Vector::Zero(n_bus), Vector::Zero(n_bus), Vector::Zero(n_bus)};
}

bool SimState::finite() const {
    return theta.allFinite() && omega.allFinite() && p_filt.allFinite() && u_filt.allFinite();
}

Vector power_injections(const Vector& theta, const NetworkGraph& net) {
    const Index n = net.n_bus();
    if (theta.size() != n) throw std::invalid_argument("power_injections: theta length != n_bus");
    Vector p = Vector::Zero(n);
    for (Index i = 0; i < n; ++i) {
        for (Index j = i + 1; j < n; ++j) {
            const double b = net.susceptance(i, j);
            if (b == 0.0) continue;
            const double flow = b * std::sin(theta(i) - theta(j));
            p(i) += flow;
            p(j) -= flow;
        }
    }
    return p;
}

SimState step(const SimState& state, const Vector& u, const std::vector<InverterParams>& params,
              const NetworkGraph& net, const SimConfig& cfg) {
    const Index n = net.n_bus();
    if (state.n_bus() != n || u.size() != n || static_cast<Index>(params.size()) != n)
        throw std::invalid_argument("step: dimension mismatch");
    if (!u.allFinite()) throw std::invalid_argument("step: input is not finite");

    const Vector p = power_injections(state.theta, net) + net.load;

    SimState next;
    next.u_filt.resize(n);
    next.p_filt.resize(n);
    next.omega.resize(n);
    next.theta.resize(n);
    for (Index i = 0; i < n; ++i) {
        const auto& par = params[static_cast<std::size_t>(i)];
        const double alpha = cfg.filter_gain(par.omega_pc);
        next.u_filt(i) = state.u_filt(i) + alpha * (u(i) - state.u_filt(i));
        next.p_filt(i) = state.p_filt(i) + alpha * (p(i) - state.p_filt(i));
        next.omega(i) = par.k_p * (par.p_star + next.u_filt(i) - next.p_filt(i));
        next.theta(i) = state.theta(i) + cfg.dt * par.omega_b * state.omega(i);
    }
    return next;
}

Trajectory simulate(const SimState& initial, const Matrix& inputs,
                    const std::vector<InverterParams>& params, const NetworkGraph& net,
                    const SimConfig& cfg) {
    if (inputs.cols() < 1) throw std::invalid_argument("simulate: need at least one input sample");
    NetworkPlant plant(net, params, cfg, initial);
    return collect(plant, inputs);
}

SimState nominal_state(const std::vector<InverterParams>& params, const NetworkGraph& net) {
    const Index n = net.n_bus();
    if (static_cast<Index>(params.size()) != n)
        throw std::invalid_argument("nominal_state: params length != n_bus");
    SimState s = SimState::zeros(n);
    s.p_filt = power_injections(s.theta, net) + net.load;
    for (Index i = 0; i < n; ++i) {
        const auto& par = params[static_cast<std::size_t>(i)];
        s.omega(i) = par.k_p * (par.p_star - s.p_filt(i));
    }
    return s;
}

DisturbedStart apply_disturbance(const SimState& nominal, const NetworkGraph& net,
                                 const Disturbance& d, std::uint64_t seed) {
    if (d.load_step_min > d.load_step_max)
        throw std::invalid_argument("disturbance: load_step_min > load_step_max");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::uniform_real_distribution<double> load(d.load_step_min, d.load_step_max);
    DisturbedStart out{nominal, net};
    const Index n = net.n_bus();
    // Fixed draw order keeps scenarios reproducible when amplitudes change.
    for (Index i = 0; i < n; ++i) {
        out.state.omega(i) += d.omega * unit(rng);
        out.state.p_filt(i) += d.p_filt * unit(rng);
        out.state.theta(i) += d.theta * unit(rng);
        const double step = load(rng);
        out.net.load(i) += d.load_step_min == d.load_step_max ? d.load_step_min : step;
    }
    return out;
}

std::vector<InverterParams> uniform_params(Index n_bus, const InverterParams& p) {
    return std::vector<InverterParams>(static_cast<std::size_t>(n_bus), p);
}

NetworkPlant::NetworkPlant(NetworkGraph net, std::vector<InverterParams> params, SimConfig cfg,
                           SimState initial)
    : net_(std::move(net)), params_(std::move(params)), cfg_(cfg), state_(std::move(initial)) {
    net_.validate();
    cfg_.validate();
    for (const auto& p : params_) p.validate();
    if (static_cast<Index>(params_.size()) != net_.n_bus() || state_.n_bus() != net_.n_bus())
        throw std::invalid_argument("plant: dimension mismatch");
    if (!state_.finite()) throw std::invalid_argument("plant: initial state is not finite");
}

Vector NetworkPlant::step(const Vector& u) {
    SimState next = netsim::step(state_, u, params_, net_, cfg_);
    if (!next.finite()) {
        std::ostringstream msg;
        msg << "simulation diverged at step " << steps_ << " (filter gain "
            << cfg_.filter_gain(params_.front().omega_pc) << ", mode " << to_string(cfg_.filter_mode)
            << ")";
        throw SimulationError(msg.str(), steps_);
    }
    state_ = std::move(next);
    ++steps_;
    return state_.omega;
}

} // namespace dkpc::netsim
