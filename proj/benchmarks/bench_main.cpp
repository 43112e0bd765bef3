#include "dkpc/behavior.hpp"
#include "dkpc/control.hpp"
#include "dkpc/experiment.hpp"
#include "dkpc/lifting.hpp"
#include "dkpc/netsim.hpp"
#include "dkpc/qp.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace dkpc;

namespace {

// Built once; gen-data at default size takes a moment.
const experiment::Prepared& prepared() {
    static const experiment::Prepared prep = [] {
        const experiment::ExperimentConfig cfg;
        return experiment::prepare(cfg, experiment::generate_dataset(cfg));
    }();
    return prep;
}

control::PredictiveController primed_dkpc() {
    const experiment::ExperimentConfig cfg;
    const auto& prep = prepared();
    const Index n = prep.dataset.data.n_y();
    auto ctrl = control::PredictiveController::dkpc(prep.lifted, prep.dataset.bank, experiment::dkpc_config(cfg, n));
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> small(-0.01, 0.01);
    for (Index k = 0; k < cfg.t_ini; ++k) {
        Vector y(n);
        for (Index i = 0; i < n; ++i) y(i) = small(rng);
        ctrl.observe(y, Vector::Zero(n));
    }
    return ctrl;
}

void BM_NetsimStep(benchmark::State& st) {
    const auto net = netsim::default_network();
    const auto params = netsim::uniform_params(net.n_bus());
    const netsim::SimConfig cfg;
    auto s = netsim::apply_disturbance(netsim::nominal_state(params, net), net, {0.5, 0.05, 0.0, 0.0, 0.0}, 1);
    const Vector u = Vector::Constant(net.n_bus(), 0.1);
    for (auto _ : st) {
        s.state = netsim::step(s.state, u, params, s.net, cfg);
        benchmark::DoNotOptimize(s.state.omega.data());
    }
}
BENCHMARK(BM_NetsimStep);

void BM_LiftTrajectory(benchmark::State& st) {
    const auto& ds = prepared().dataset;
    for (auto _ : st) benchmark::DoNotOptimize(lift_trajectory(ds.data.y, ds.bank));
}
BENCHMARK(BM_LiftTrajectory)->Unit(benchmark::kMillisecond);

void BM_HankelAssemble(benchmark::State& st) {
    const experiment::ExperimentConfig cfg;
    const auto& ds = prepared().dataset;
    for (auto _ : st) benchmark::DoNotOptimize(assemble(ds.data, ds.bank, cfg.t_ini, cfg.horizon));
}
BENCHMARK(BM_HankelAssemble)->Unit(benchmark::kMillisecond);

// Cold solve of one DKPC-size program, including Ruiz scaling and the first factorisation.
void BM_DkpcQpCold(benchmark::State& st) {
    const auto ctrl = primed_dkpc();
    const qp::QpProblem p = ctrl.current_problem();
    for (auto _ : st) {
        qp::QpSolver solver(p, ctrl.config().solver);
        benchmark::DoNotOptimize(solver.solve().x.data());
    }
    st.counters["n"] = static_cast<double>(p.n());
}
BENCHMARK(BM_DkpcQpCold)->Unit(benchmark::kMillisecond);

// Receding-horizon step with cached factorisation and warm start.
void BM_DkpcStep(benchmark::State& st) {
    auto ctrl = primed_dkpc();
    const Index n = prepared().dataset.data.n_y();
    for (auto _ : st) benchmark::DoNotOptimize(ctrl.solve_step(Vector::Zero(n)).u.data());
}
BENCHMARK(BM_DkpcStep)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
