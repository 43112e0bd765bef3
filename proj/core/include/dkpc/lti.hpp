#pragma once

#include "dkpc/trajectory.hpp"

#include <cstdint>

namespace dkpc {

/// x_{k+1} = A x_k + B u_k,  y_k = C x_k + D u_k.
struct LtiSystem {
    Matrix A;
    Matrix B;
    Matrix C;
    Matrix D;

    Index n_x() const { return A.rows(); }
    Index n_u() const { return B.cols(); }
    Index n_y() const { return C.rows(); }

    void validate() const;
    Trajectory simulate(const Vector& x0, const Matrix& inputs, double dt = 1.0) const;
};

/// Gaussian (A, B, C, D) with A rescaled to the given spectral radius.
LtiSystem random_stable_system(Index n_x, Index n_u, Index n_y, std::uint64_t seed,
                               double spectral_radius = 0.9, bool feedthrough = true);

/// Uniform i.i.d. samples in [lo, hi], n rows by T columns.
Matrix uniform_inputs(Index n, Index T, double lo, double hi, std::uint64_t seed);

/// LTI plant whose measurement is taken after each step (y = C x_{k+1}), the
/// same convention as the network plant. D is not used.
class LtiPlant final : public Plant {
public:
    LtiPlant(LtiSystem sys, Vector x0, double dt = 0.01);

    Index n_inputs() const override { return sys_.n_u(); }
    Index n_outputs() const override { return sys_.n_y(); }
    double dt() const override { return dt_; }
    Vector output() const override { return sys_.C * x_; }
    Vector step(const Vector& u) override;

    const Vector& state() const { return x_; }
    const LtiSystem& system() const { return sys_; }

private:
    LtiSystem sys_;
    Vector x_;
    double dt_;
};

} // namespace dkpc
