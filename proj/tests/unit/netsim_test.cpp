#include "dkpc/lti.hpp"
#include "dkpc/netsim.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace dkpc;
using namespace dkpc::netsim;

namespace {

NetworkGraph two_bus(double b = 5.0) { return make_network(2, {{0, 1, b}}, Vector::Zero(2)); }

} // namespace

TEST_CASE("injections vanish for equal angles") {
    const Vector p = power_injections(Vector::Zero(2), two_bus());
    CHECK(p.isZero(0.0));
}

TEST_CASE("two-bus injection against a scalar evaluation") {
    Vector theta(2);
    theta << 0.1, 0.0;
    const Vector p = power_injections(theta, two_bus());
    const double expected = 5.0 * std::sin(0.1 - 0.0);
    CHECK(p(0) == doctest::Approx(expected).epsilon(1e-15));
    CHECK(p(0) == doctest::Approx(0.499167).epsilon(1e-6));
    CHECK(p(1) == doctest::Approx(-expected).epsilon(1e-15));
}

TEST_CASE("no lines means no injections") {
    NetworkGraph net;
    net.susceptance = Matrix::Zero(3, 3);
    net.load = Vector::Zero(3);
    Vector theta(3);
    theta << 0.3, -1.0, 2.0;
    CHECK(power_injections(theta, net).isZero(0.0));
    CHECK_THROWS_AS(power_injections(Vector::Zero(2), net), std::invalid_argument);
}

TEST_CASE("droop output is zero at the setpoint") {
    // u_filt' = 0 and p_filt' = 1: start both filters at their targets.
    NetworkGraph net = two_bus();
    net.load = Vector::Ones(2);
    SimState s = SimState::zeros(2);
    s.p_filt = Vector::Ones(2);
    const auto next = step(s, Vector::Zero(2), uniform_params(2), net, SimConfig{});
    CHECK(next.u_filt.isZero(0.0));
    CHECK(next.p_filt.isApproxToConstant(1.0));
    CHECK(next.omega.isZero(0.0));
}

TEST_CASE("exact-exponential filter gain for one step") {
    NetworkGraph net = two_bus(1e-300);
    net.load = Vector::Ones(2);
    SimState s = SimState::zeros(2); // p_filt = 0, measured p = 1 (angles equal)
    const SimConfig cfg{0.01, FilterMode::ExactExponential, 0};
    const auto next = step(s, Vector::Zero(2), uniform_params(2), net, cfg);
    const double expected = 1.0 - std::exp(-332.8 * 0.01);
    CHECK(next.p_filt(0) == doctest::Approx(expected).epsilon(1e-14));
    CHECK(next.p_filt(0) == doctest::Approx(0.964135).epsilon(1e-6));
    CHECK(cfg.filter_gain(332.8) == doctest::Approx(expected).epsilon(1e-14));
    CHECK(SimConfig{0.01, FilterMode::ForwardEuler, 0}.filter_gain(332.8) == doctest::Approx(3.328));
}

TEST_CASE("zero frequency freezes the angles") {
    SimState s = SimState::zeros(2);
    s.theta << 0.4, -0.2;
    s.p_filt << 7.0, 3.0;
    const auto next = step(s, Vector::Zero(2), uniform_params(2), two_bus(), SimConfig{});
    CHECK(next.theta == s.theta);
}

TEST_CASE("update order: filters first, droop on new filters, angles on old frequency") {
    NetworkGraph net = make_network(2, {{0, 1, 2.0}}, Vector::Constant(2, 0.5));
    InverterParams par;
    par.omega_b = 3.0;
    SimState s = SimState::zeros(2);
    s.theta << 0.2, 0.0;
    s.omega << 0.01, -0.02;
    s.p_filt << 0.3, 0.4;
    s.u_filt << 0.1, -0.1;
    Vector u(2);
    u << 0.5, -0.25;
    const SimConfig cfg{0.01, FilterMode::ExactExponential, 0};
    const auto next = step(s, u, uniform_params(2, par), net, cfg);

    const double a = -std::expm1(-par.omega_pc * cfg.dt);
    const double p0 = 2.0 * std::sin(0.2) + 0.5, p1 = -2.0 * std::sin(0.2) + 0.5;
    const double pf0 = 0.3 + a * (p0 - 0.3), pf1 = 0.4 + a * (p1 - 0.4);
    const double uf0 = 0.1 + a * (0.5 - 0.1), uf1 = -0.1 + a * (-0.25 + 0.1);
    CHECK(next.p_filt(0) == doctest::Approx(pf0).epsilon(1e-14));
    CHECK(next.p_filt(1) == doctest::Approx(pf1).epsilon(1e-14));
    CHECK(next.u_filt(0) == doctest::Approx(uf0).epsilon(1e-14));
    CHECK(next.u_filt(1) == doctest::Approx(uf1).epsilon(1e-14));
    CHECK(next.omega(0) == doctest::Approx(0.07 * (1.0 + uf0 - pf0)).epsilon(1e-14));
    CHECK(next.omega(1) == doctest::Approx(0.07 * (1.0 + uf1 - pf1)).epsilon(1e-14));
    CHECK(next.theta(0) == doctest::Approx(0.2 + 0.01 * 3.0 * 0.01).epsilon(1e-14));
    CHECK(next.theta(1) == doctest::Approx(0.01 * 3.0 * -0.02).epsilon(1e-14));
}

TEST_CASE("nominal state of the default network is a fixed point") {
    const NetworkGraph net = default_network();
    const auto params = uniform_params(net.n_bus());
    const SimState x0 = nominal_state(params, net);
    CHECK(x0.omega.isZero(0.0));
    const Trajectory tr = simulate(x0, Matrix::Zero(net.n_bus(), 500), params, net, SimConfig{});
    CHECK(tr.y.cwiseAbs().maxCoeff() <= 1e-15);

    NetworkPlant plant(net, params, SimConfig{}, x0);
    for (int k = 0; k < 200; ++k) plant.step(Vector::Zero(net.n_bus()));
    CHECK((plant.state().theta - x0.theta).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK((plant.state().p_filt - x0.p_filt).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("lossless network: injections sum to zero") {
    const NetworkGraph net = default_network();
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> ang(-3.0, 3.0);
    for (int trial = 0; trial < 200; ++trial) {
        Vector theta(net.n_bus());
        for (Index i = 0; i < theta.size(); ++i) theta(i) = ang(rng);
        CHECK(std::abs(power_injections(theta, net).sum()) <= 1e-12);
    }
}

TEST_CASE("exact-exponential filter contracts toward a constant target") {
    // Negligible coupling keeps the measured power pinned to the load.
    NetworkGraph net = two_bus(1e-300);
    net.load = Vector::Constant(2, 0.8);
    SimState s = SimState::zeros(2);
    s.p_filt << -3.0, 5.0;
    s.u_filt << 2.0, -2.0;
    const auto params = uniform_params(2);
    const Vector u = Vector::Constant(2, 0.3);
    for (int k = 0; k < 20; ++k) {
        const auto next = step(s, u, params, net, SimConfig{});
        for (Index i = 0; i < 2; ++i) {
            CHECK(std::abs(next.u_filt(i) - u(i)) <= std::abs(s.u_filt(i) - u(i)));
            CHECK(std::abs(next.p_filt(i) - 0.8) <= std::abs(s.p_filt(i) - 0.8));
        }
        s = next;
    }
}

TEST_CASE("simulation is deterministic and bounded under random inputs") {
    const NetworkGraph net = default_network();
    const auto params = uniform_params(net.n_bus());
    const SimState x0 = nominal_state(params, net);
    const Matrix u = uniform_inputs(net.n_bus(), 1000, -1.0, 1.0, 42);
    const Trajectory a = simulate(x0, u, params, net, SimConfig{});
    const Trajectory b = simulate(x0, u, params, net, SimConfig{});
    CHECK(a.y == b.y);
    CHECK(a.y.allFinite());
    CHECK(a.y.cwiseAbs().maxCoeff() < 0.5);
    CHECK(a.length() == 1000);
    CHECK(a.u == u);
}

TEST_CASE("single-sample simulation") {
    const NetworkGraph net = default_network();
    const auto params = uniform_params(net.n_bus());
    const Trajectory t = simulate(nominal_state(params, net), Matrix::Zero(net.n_bus(), 1), params, net, SimConfig{});
    CHECK(t.length() == 1);
    CHECK_THROWS_AS(simulate(nominal_state(params, net), Matrix::Zero(net.n_bus(), 0), params, net, SimConfig{}),
                    std::invalid_argument);
}

TEST_CASE("forward-euler filter with dt * omega_pc > 2 diverges with a diagnostic") {
    const NetworkGraph net = default_network();
    const auto params = uniform_params(net.n_bus());
    const SimConfig cfg{0.01, FilterMode::ForwardEuler, 0};
    const Matrix u = uniform_inputs(net.n_bus(), 3000, -1.0, 1.0, 1);
    try {
        simulate(nominal_state(params, net), u, params, net, cfg);
        FAIL("expected divergence");
    } catch (const SimulationError& e) {
        CHECK(e.step() > 0);
        CHECK(std::string(e.what()).find("forward-euler") != std::string::npos);
    }
}

TEST_CASE("forward-euler with a stable gain stays finite") {
    const NetworkGraph net = default_network();
    const auto params = uniform_params(net.n_bus());
    const SimConfig cfg{0.001, FilterMode::ForwardEuler, 0};
    const Trajectory t = simulate(nominal_state(params, net), uniform_inputs(net.n_bus(), 500, -1, 1, 2), params, net, cfg);
    CHECK(t.y.allFinite());
}

TEST_CASE("network validation") {
    Matrix b = Matrix::Zero(3, 3);
    b(0, 1) = b(1, 0) = 1.0;
    b(1, 2) = b(2, 1) = 1.0;
    NetworkGraph ok{b, Vector::Zero(3)};
    CHECK_NOTHROW(ok.validate());

    NetworkGraph asym = ok;
    asym.susceptance(0, 1) = 2.0;
    CHECK_THROWS_AS(asym.validate(), std::invalid_argument);

    NetworkGraph neg = ok;
    neg.susceptance(0, 1) = neg.susceptance(1, 0) = -1.0;
    CHECK_THROWS_AS(neg.validate(), std::invalid_argument);

    NetworkGraph diag = ok;
    diag.susceptance(2, 2) = 1.0;
    CHECK_THROWS_AS(diag.validate(), std::invalid_argument);

    NetworkGraph split = ok;
    split.susceptance(1, 2) = split.susceptance(2, 1) = 0.0;
    CHECK_THROWS_AS(split.validate(), std::invalid_argument);

    CHECK_THROWS_AS(make_network(3, {{0, 3, 1.0}}, Vector::Zero(3)), std::invalid_argument);
    CHECK_THROWS_AS(make_network(3, {{1, 1, 1.0}}, Vector::Zero(3)), std::invalid_argument);
}

TEST_CASE("default network shape") {
    const NetworkGraph net = default_network();
    CHECK(net.n_bus() == 10);
    CHECK_NOTHROW(net.validate());
    CHECK(net.load.isApproxToConstant(1.0));
    Index lines = 0;
    for (Index i = 0; i < 10; ++i)
        for (Index j = i + 1; j < 10; ++j)
            if (net.susceptance(i, j) > 0) {
                CHECK(net.susceptance(i, j) == 5.0);
                ++lines;
            }
    CHECK(lines == 13);
}

TEST_CASE("network file round trip and errors") {
    std::istringstream in("# three buses\nn_bus 3\n1 2 4.5\n2 3 1.25  # tail comment\nload 2 0.75\n");
    const NetworkGraph net = read_network(in);
    CHECK(net.n_bus() == 3);
    CHECK(net.susceptance(0, 1) == 4.5);
    CHECK(net.susceptance(2, 1) == 1.25);
    CHECK(net.load(1) == 0.75);
    CHECK(net.load(0) == 0.0);

    std::stringstream buf;
    write_network(buf, net);
    const NetworkGraph back = read_network(buf);
    CHECK(back.susceptance == net.susceptance);
    CHECK(back.load == net.load);

    std::istringstream bad1("1 2 3\n");
    CHECK_THROWS_AS(read_network(bad1), std::invalid_argument);
    std::istringstream bad2("n_bus 2\n1 2 x\n");
    CHECK_THROWS_AS(read_network(bad2), std::invalid_argument);
    std::istringstream bad3("n_bus 3\n1 2 1\n");
    CHECK_THROWS_AS(read_network(bad3), std::invalid_argument); // bus 3 isolated
    CHECK_THROWS_AS(load_network("/nonexistent/network.txt"), std::runtime_error);
}

TEST_CASE("filter mode names") {
    CHECK(parse_filter_mode("exact-exponential") == FilterMode::ExactExponential);
    CHECK(parse_filter_mode("forward-euler") == FilterMode::ForwardEuler);
    CHECK(to_string(FilterMode::ForwardEuler) == "forward-euler");
    CHECK_THROWS_AS(parse_filter_mode("rk4"), std::invalid_argument);
}

TEST_CASE("configuration checks") {
    CHECK_THROWS_AS((SimConfig{0.0, FilterMode::ExactExponential, 0}.validate()), std::invalid_argument);
    InverterParams p;
    p.k_p = 0.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = InverterParams{};
    p.omega_pc = -1.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    const NetworkGraph net = default_network();
    CHECK_THROWS_AS(step(SimState::zeros(3), Vector::Zero(10), uniform_params(10), net, SimConfig{}),
                    std::invalid_argument);
    Vector u = Vector::Zero(10);
    u(0) = std::nan("");
    CHECK_THROWS_AS(step(SimState::zeros(10), u, uniform_params(10), net, SimConfig{}), std::invalid_argument);
}

TEST_CASE("disturbance is seeded and zero amplitude leaves the state alone") {
    const NetworkGraph net = default_network();
    const auto params = uniform_params(10);
    const SimState x0 = nominal_state(params, net);
    const auto same = apply_disturbance(x0, net, Disturbance{}, 1);
    CHECK(same.state.omega == x0.omega);
    CHECK(same.state.theta == x0.theta);
    CHECK(same.net.load == net.load);

    Disturbance d{2.0, 0.05, 0.01, 0.0, 0.0};
    const auto a = apply_disturbance(x0, net, d, 3);
    const auto b = apply_disturbance(x0, net, d, 3);
    const auto c = apply_disturbance(x0, net, d, 4);
    CHECK(a.state.omega == b.state.omega);
    CHECK(a.state.omega != c.state.omega);
    CHECK(a.state.omega.cwiseAbs().maxCoeff() <= 2.0);
    CHECK((a.state.theta - x0.theta).cwiseAbs().maxCoeff() <= 0.01);

    Disturbance load{0.0, 0.0, 0.0, 0.1, 0.5};
    const auto l = apply_disturbance(x0, net, load, 3);
    CHECK((l.net.load - net.load).minCoeff() >= 0.1);
    CHECK((l.net.load - net.load).maxCoeff() <= 0.5);
    CHECK_THROWS_AS(apply_disturbance(x0, net, Disturbance{0, 0, 0, 0.5, 0.1}, 1), std::invalid_argument);
}
