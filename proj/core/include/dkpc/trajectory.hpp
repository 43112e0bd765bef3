#pragma once

#include <Eigen/Dense>

#include <stdexcept>

namespace dkpc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Time-indexed input/output record. Samples are stored column-wise: column k
/// of `u` is the input applied at step k and column k of `y` the output it
/// produced, so (u_k, y_k) is always a causal pair.
struct Trajectory {
    Matrix u; // n_u x T
    Matrix y; // n_y x T
    double dt = 0.01;

    Index length() const { return u.cols(); }
    Index n_u() const { return u.rows(); }
    Index n_y() const { return y.rows(); }

    void validate() const {
        if (u.cols() != y.cols())
            throw std::invalid_argument("trajectory: input and output lengths differ");
        if (!(dt > 0.0))
            throw std::invalid_argument("trajectory: dt must be positive");
    }
};

/// Black-box plant seen by the closed loop. `step` applies one input and
/// returns the output measured afterwards; `output` repeats the last measurement.
class Plant {
public:
    virtual ~Plant() = default;
    virtual Index n_inputs() const = 0;
    virtual Index n_outputs() const = 0;
    virtual double dt() const = 0;
    virtual Vector output() const = 0;
    virtual Vector step(const Vector& u) = 0;
};

/// Drives `plant` with the columns of `inputs` and records the resulting
/// (u_k, y_k) pairs.
inline Trajectory collect(Plant& plant, const Matrix& inputs) {
    Trajectory traj;
    traj.dt = plant.dt();
    traj.u = inputs;
    traj.y.resize(plant.n_outputs(), inputs.cols());
    for (Index k = 0; k < inputs.cols(); ++k)
        traj.y.col(k) = plant.step(inputs.col(k));
    return traj;
}

} // namespace dkpc
