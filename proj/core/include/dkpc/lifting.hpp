#pragma once

#include "dkpc/trajectory.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>

namespace dkpc {

/// Evaluation rule of an observable bank.
enum class ObservableKind {
    ThinPlateLog10, ///< psi_i(y) = r^2 log10(r), r = |y - c_i|
    Identity,       ///< psi(y) = y; used to compare against the unlifted controller
};

/// Finite set of output observables. Centers are stored column-wise
/// (n_y x n_basis) so the lifting is fully determined after construction.
struct RbfBank {
    Matrix centers;
    std::uint64_t seed = 0;
    ObservableKind kind = ObservableKind::ThinPlateLog10;

    Index n_basis() const { return kind == ObservableKind::Identity ? centers.rows() : centers.cols(); }
    Index n_y() const { return centers.rows(); }

    friend bool operator==(const RbfBank& a, const RbfBank& b);
};

/// Draws `n_basis` centers uniformly from the component-wise bounding box of
/// the columns of `outputs`.
RbfBank build_bank(const Matrix& outputs, Index n_basis, std::uint64_t seed);

/// z = y. Centers are an n_y x 0 placeholder.
RbfBank identity_bank(Index n_y);

/// r^2 log10(r), continuous at r = 0.
double thin_plate_log10(double r);

Vector lift(const Vector& y, const RbfBank& bank);

/// Column-wise `lift`; errors report the offending column.
Matrix lift_trajectory(const Matrix& ys, const RbfBank& bank);

void write_bank(std::ostream& out, const RbfBank& bank);
RbfBank read_bank(std::istream& in);
void save_bank(const std::string& path, const RbfBank& bank);
RbfBank load_bank(const std::string& path);

} // namespace dkpc
