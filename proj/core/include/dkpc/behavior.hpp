#pragma once

#include "dkpc/lifting.hpp"
#include "dkpc/lti.hpp"
#include "dkpc/trajectory.hpp"

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>

namespace dkpc {

/// Block Hankel matrix of depth `depth` over the columns of `seq`. Column j
/// stacks samples j..j+depth-1, sample-major, giving (d*depth) x (T-depth+1).
Matrix hankel(const Matrix& seq, Index depth);

struct RankSettings {
    /// Singular values below sigma_max * max(rows, cols) * unit_roundoff count as zero.
    double unit_roundoff = std::numeric_limits<double>::epsilon();
};

struct RankReport {
    bool full_row_rank = false;
    Index rank = 0;
    Index rows = 0;
    Index cols = 0;
    double sigma_max = 0.0;
    double sigma_min = 0.0;
    double threshold = 0.0;
    std::string reason;
};

/// Numerical rank of `m` by SVD.
RankReport row_rank(const Matrix& m, const RankSettings& settings = {});

/// Persistency of excitation: hankel(u, order) has full row rank.
RankReport is_persistently_exciting(const Matrix& u, Index order, const RankSettings& settings = {});

struct MembershipResult {
    double residual = 0.0;
    Vector g;
};

/// Minimum-norm least-squares fit of a window trajectory against the depth-L
/// Hankel matrices of `data`, where L is the window length.
MembershipResult behavior_residual(const Trajectory& data, const Trajectory& window);

struct LemmaCheck {
    double residual = 0.0;
    Vector g;
    RankReport excitation;
};

/// Generates PE data of length T and a fresh length-L trajectory from `sys`,
/// and returns how well the data Hankel matrices reproduce the fresh window.
/// Throws if the generated input is not persistently exciting of order L + n_x.
LemmaCheck verify_fundamental_lemma(const LtiSystem& sys, Index T, Index L, std::uint64_t seed);

/// Stacked depth-L Hankel blocks for the lifted, input and output data.
/// Past rows are the first t_ini block rows, future rows the last `horizon`.
struct HankelSystem {
    Matrix Z;
    Matrix U;
    Matrix Y;
    Index t_ini = 0;
    Index horizon = 0;
    Index n_u = 0;
    Index n_y = 0;
    Index n_z = 0;
    RankReport input_excitation;

    Index depth() const { return t_ini + horizon; }
    Index n_cols() const { return U.cols(); }

    auto U_past() const { return U.topRows(n_u * t_ini); }
    auto U_future() const { return U.bottomRows(n_u * horizon); }
    auto Y_past() const { return Y.topRows(n_y * t_ini); }
    auto Y_future() const { return Y.bottomRows(n_y * horizon); }
    auto Z_past() const { return Z.topRows(n_z * t_ini); }
    auto Z_future() const { return Z.bottomRows(n_z * horizon); }
};

/// Builds the Hankel system for `data` lifted through `bank`. The recorded
/// excitation report checks order n_basis + L; a failure does not throw.
HankelSystem assemble(const Trajectory& data, const RbfBank& bank, Index t_ini, Index horizon,
                      const RankSettings& settings = {});

/// Same without a lifted block (n_z = 0), as used by the unlifted controller.
HankelSystem assemble_unlifted(const Trajectory& data, Index t_ini, Index horizon,
                               const RankSettings& settings = {});

/// Plain-text dump of the three blocks for debugging. Not a stable format.
void dump(std::ostream& out, const HankelSystem& hs);

} // namespace dkpc
