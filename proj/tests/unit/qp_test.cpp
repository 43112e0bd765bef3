#include "dkpc/qp.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <random>

using namespace dkpc;
using qp::QpProblem;
using qp::QpStatus;

namespace {

constexpr double kInf = oracle::kInf;

QpProblem box_problem(Index n) {
    QpProblem p = QpProblem::zeros(n, 0);
    p.lower = Vector::Constant(n, -kInf);
    p.upper = Vector::Constant(n, kInf);
    return p;
}

} // namespace

TEST_CASE("scalar problem with an active lower bound") {
    QpProblem p = box_problem(1);
    p.P(0, 0) = 1.0;
    p.lower(0) = 1.0;
    const auto s = qp::solve(p);
    CHECK(s.status == QpStatus::Solved);
    CHECK(s.x(0) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(s.y_box(0) == doctest::Approx(-1.0).epsilon(1e-5));
}

TEST_CASE("unconstrained problem returns -P^{-1} q") {
    QpProblem p = box_problem(2);
    p.P = Matrix::Identity(2, 2);
    p.q << -1.0, -2.0;
    const auto s = qp::solve(p);
    CHECK(s.status == QpStatus::Solved);
    CHECK(std::abs(s.x(0) - 1.0) <= 1e-6);
    CHECK(std::abs(s.x(1) - 2.0) <= 1e-6);
}

TEST_CASE("equality plus box: projection onto the simplex edge") {
    // (x1-1)^2 + (x2-1)^2 = 1/2 x'(2I)x - 2*1'x + 2.
    QpProblem p = QpProblem::zeros(2, 1);
    p.P = 2.0 * Matrix::Identity(2, 2);
    p.q << -2.0, -2.0;
    p.A_eq << 1.0, 1.0;
    p.b_eq << 1.0;
    p.lower = Vector::Zero(2);
    p.upper = Vector::Ones(2);
    const auto s = qp::solve(p);
    REQUIRE(s.status == QpStatus::Solved);

    // Grid search over the feasible segment x1 in [0, 1], x2 = 1 - x1.
    double best = 0.0, best_f = kInf;
    for (int i = 0; i <= 100000; ++i) {
        const double x1 = i / 100000.0;
        const double f = (x1 - 1) * (x1 - 1) + (1 - x1 - 1) * (1 - x1 - 1);
        if (f < best_f) best_f = f, best = x1;
    }
    CHECK(std::abs(s.x(0) - best) <= 1e-5);
    CHECK(std::abs(s.x(0) - 0.5) <= 1e-6);
    CHECK(std::abs(s.x(1) - 0.5) <= 1e-6);
}

TEST_CASE("random convex problems satisfy KKT and agree with the reference solver") {
    std::mt19937_64 rng(20240611);
    for (int trial = 0; trial < 100; ++trial) {
        CAPTURE(trial);
        const QpProblem p = oracle::random_qp(rng);
        const auto s = qp::solve(p);
        REQUIRE(s.status == QpStatus::Solved);
        const auto k = oracle::kkt(p, s.x, s.y_eq, s.y_box);
        CHECK(k.stationarity <= 1e-5);
        CHECK(k.primal <= 1e-5);
        CHECK(k.complementarity <= 1e-5);

        // KKT residuals of 1e-5 bound the objective gap only to about that
        // size times |x| and |y|, hence the looser comparison.
        const Vector ref = oracle::solve_qp(p);
        REQUIRE((p.A_eq * ref - p.b_eq).lpNorm<Eigen::Infinity>() <= 1e-9);
        const double f = p.objective(s.x), f_ref = p.objective(ref);
        CHECK(std::abs(f - f_ref) <= 1e-4 * std::max(1.0, std::abs(f_ref)));
    }
}

TEST_CASE("status solved implies residuals within tolerance") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const QpProblem p = oracle::random_qp(rng);
        qp::QpSettings set;
        const auto s = qp::solve(p, set);
        if (s.status != QpStatus::Solved) continue;
        CHECK(std::isfinite(s.primal_residual));
        CHECK(std::isfinite(s.dual_residual));
        CHECK(s.primal_residual <= 1e-4);
    }
}

TEST_CASE("warm start reproduces the solution in no more iterations") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 10; ++trial) {
        const QpProblem p = oracle::random_qp(rng);
        const auto cold = qp::solve(p);
        REQUIRE(cold.status == QpStatus::Solved);
        qp::QpSettings set;
        set.warm_start = cold.x;
        Vector dual(cold.y_eq.size() + cold.y_box.size());
        dual << cold.y_eq, cold.y_box;
        set.warm_start_dual = dual;
        const auto warm = qp::solve(p, set);
        REQUIRE(warm.status == QpStatus::Solved);
        CHECK(warm.iterations <= cold.iterations);
        CHECK((warm.x - cold.x).lpNorm<Eigen::Infinity>() <= 1e-5);
    }
}

TEST_CASE("solver instance re-solves after a right-hand-side change") {
    QpProblem p = QpProblem::zeros(2, 1);
    p.P = 2.0 * Matrix::Identity(2, 2);
    p.q << -2.0, -2.0;
    p.A_eq << 1.0, 1.0;
    p.b_eq << 1.0;
    p.lower = Vector::Zero(2);
    p.upper = Vector::Ones(2);
    qp::QpSolver solver(p);
    auto s1 = solver.solve();
    const int factorizations = solver.factorizations();
    Vector b(1);
    b << 1.5;
    solver.update_equality_rhs(b);
    auto s2 = solver.solve();
    CHECK(s1.status == QpStatus::Solved);
    REQUIRE(s2.status == QpStatus::Solved);
    CHECK(std::abs(s2.x(0) - 0.75) <= 1e-6);
    CHECK(std::abs(s2.x(1) - 0.75) <= 1e-6);
    CHECK(solver.factorizations() >= factorizations);

    Vector q(2);
    q << -4.0, 0.0; // minimizer of (x1-2)^2 + x2^2 on x1 + x2 = 1.5 within the box
    solver.update_linear_cost(q);
    auto s3 = solver.solve();
    REQUIRE(s3.status == QpStatus::Solved);
    CHECK(std::abs(s3.x(0) - 1.0) <= 1e-6);
    CHECK(std::abs(s3.x(1) - 0.5) <= 1e-6);
}

TEST_CASE("infeasible equality and box is detected") {
    QpProblem p = QpProblem::zeros(2, 1);
    p.P = Matrix::Identity(2, 2);
    p.A_eq << 1.0, 1.0;
    p.b_eq << 3.0;
    p.lower = Vector::Zero(2);
    p.upper = Vector::Ones(2);
    const auto s = qp::solve(p);
    CHECK(s.status == QpStatus::PrimalInfeasible);
    CHECK(qp::to_string(s.status) == "infeasible-detected");
}

TEST_CASE("iteration cap returns the current iterate") {
    std::mt19937_64 rng(3);
    const QpProblem p = oracle::random_qp(rng);
    qp::QpSettings set;
    set.max_iter = 1;
    set.check_interval = 1;
    const auto s = qp::solve(p, set);
    CHECK(s.iterations <= 1);
    CHECK(s.x.size() == p.n());
    if (s.status != QpStatus::Solved) CHECK(s.status == QpStatus::MaxIterations);
}

TEST_CASE("identical inputs give bit-identical output") {
    std::mt19937_64 rng(5);
    const QpProblem p = oracle::random_qp(rng);
    const auto a = qp::solve(p);
    const auto b = qp::solve(p);
    CHECK(a.x == b.x);
    CHECK(a.iterations == b.iterations);
}

TEST_CASE("problem validation") {
    QpProblem p = box_problem(2);
    p.P(0, 1) = 1.0; // asymmetric
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = box_problem(2);
    p.lower(0) = 1.0;
    p.upper(0) = 0.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = box_problem(2);
    p.q.resize(3);
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = box_problem(2);
    p.A_eq = Matrix::Ones(1, 3);
    p.b_eq = Vector::Ones(1);
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("status names") {
    CHECK(qp::to_string(QpStatus::Solved) == "solved");
    CHECK(qp::to_string(QpStatus::MaxIterations) == "max-iterations");
}

TEST_CASE("polishing lands exactly on the pinned solutions") {
    QpProblem p = QpProblem::zeros(2, 1);
    p.P = 2.0 * Matrix::Identity(2, 2);
    p.q << -2.0, -2.0;
    p.A_eq << 1.0, 1.0;
    p.b_eq << 1.0;
    p.lower = Vector::Zero(2);
    p.upper = Vector::Ones(2);
    const auto s = qp::solve(p);
    CHECK(s.polished);
    CHECK(std::abs(s.x(0) - 0.5) <= 1e-12);
    CHECK(std::abs(s.x(1) - 0.5) <= 1e-12);

    QpProblem b = box_problem(1);
    b.P(0, 0) = 1.0;
    b.lower(0) = 1.0;
    const auto sb = qp::solve(b);
    CHECK(sb.polished);
    CHECK(sb.x(0) == 1.0);
    CHECK(sb.y_box(0) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("ADMM alone meets the KKT tolerance") {
    std::mt19937_64 rng(31337);
    qp::QpSettings set;
    set.polish = false;
    for (int trial = 0; trial < 100; ++trial) {
        const QpProblem p = oracle::random_qp(rng);
        const auto s = qp::solve(p, set);
        REQUIRE(s.status == QpStatus::Solved);
        CHECK_FALSE(s.polished);
        CHECK(oracle::kkt(p, s.x, s.y_eq, s.y_box).worst() <= 1e-5);
    }
}

TEST_CASE("polishing never worsens the KKT residual") {
    std::mt19937_64 rng(4242);
    qp::QpSettings raw;
    raw.polish = false;
    for (int trial = 0; trial < 50; ++trial) {
        const QpProblem p = oracle::random_qp(rng);
        const auto a = qp::solve(p, raw);
        const auto b = qp::solve(p);
        CHECK(oracle::kkt(p, b.x, b.y_eq, b.y_box).worst() <= oracle::kkt(p, a.x, a.y_eq, a.y_box).worst() + 1e-15);
    }
}
