#include "dkpc/lti.hpp"

#include <Eigen/Eigenvalues>

#include <random>
#include <stdexcept>

namespace dkpc {

void LtiSystem::validate() const {
    const Index n = A.rows();
    if (A.cols() != n || B.rows() != n || C.cols() != n || D.rows() != C.rows() || D.cols() != B.cols())
        throw std::invalid_argument("lti: inconsistent system matrices");
}

Trajectory LtiSystem::simulate(const Vector& x0, const Matrix& inputs, double dt) const {
    validate();
    if (x0.size() != n_x() || inputs.rows() != n_u())
        throw std::invalid_argument("lti: simulate dimension mismatch");
    Trajectory traj;
    traj.dt = dt;
    traj.u = inputs;
    traj.y.resize(n_y(), inputs.cols());
    Vector x = x0;
    for (Index k = 0; k < inputs.cols(); ++k) {
        traj.y.col(k) = C * x + D * inputs.col(k);
        x = A * x + B * inputs.col(k);
    }
    return traj;
}

LtiSystem random_stable_system(Index n_x, Index n_u, Index n_y, std::uint64_t seed,
                               double spectral_radius, bool feedthrough) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto draw = [&](Index r, Index c) {
        Matrix m(r, c);
        for (Index j = 0; j < c; ++j)
            for (Index i = 0; i < r; ++i) m(i, j) = normal(rng);
        return m;
    };
    LtiSystem sys;
    sys.A = draw(n_x, n_x);
    const double rho = sys.A.eigenvalues().cwiseAbs().maxCoeff();
    sys.A *= spectral_radius / rho;
    sys.B = draw(n_x, n_u);
    sys.C = draw(n_y, n_x);
    sys.D = feedthrough ? draw(n_y, n_u) : Matrix::Zero(n_y, n_u);
    return sys;
}

Matrix uniform_inputs(Index n, Index T, double lo, double hi, std::uint64_t seed) {
    if (!(lo <= hi)) throw std::invalid_argument("uniform_inputs: lo > hi");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(lo, hi);
    Matrix u(n, T);
    for (Index k = 0; k < T; ++k)
        for (Index i = 0; i < n; ++i) u(i, k) = dist(rng);
    return u;
}

LtiPlant::LtiPlant(LtiSystem sys, Vector x0, double dt) : sys_(std::move(sys)), x_(std::move(x0)), dt_(dt) {
    sys_.validate();
    if (x_.size() != sys_.n_x()) throw std::invalid_argument("lti plant: state size mismatch");
}

Vector LtiPlant::step(const Vector& u) {
    if (u.size() != sys_.n_u()) throw std::invalid_argument("lti plant: input size mismatch");
    x_ = sys_.A * x_ + sys_.B * u;
    return sys_.C * x_;
}

} // namespace dkpc
