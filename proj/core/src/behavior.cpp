#include "dkpc/behavior.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <iomanip>
#include <ostream>
#include <random>
#include <stdexcept>

namespace dkpc {

Matrix hankel(const Matrix& seq, Index depth) {
    const Index d = seq.rows();
    const Index T = seq.cols();
    if (depth < 1) throw std::invalid_argument("hankel: depth must be >= 1");
    if (depth > T)
        throw std::invalid_argument("hankel: depth " + std::to_string(depth) + " exceeds sequence length " +
                                    std::to_string(T));
    const Index cols = T - depth + 1;
    Matrix h(d * depth, cols);
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < depth; ++i) h.block(i * d, j, d, 1) = seq.col(j + i);
    return h;
}

RankReport row_rank(const Matrix& m, const RankSettings& settings) {
    RankReport r;
    r.rows = m.rows();
    r.cols = m.cols();
    if (m.size() == 0) {
        r.reason = "empty matrix";
        return r;
    }
    Eigen::BDCSVD<Matrix> svd(m);
    const Vector& s = svd.singularValues();
    r.sigma_max = s.size() ? s(0) : 0.0;
    r.threshold = r.sigma_max * static_cast<double>(std::max(r.rows, r.cols)) * settings.unit_roundoff;
    r.rank = 0;
    for (Index i = 0; i < s.size(); ++i)
        if (s(i) > r.threshold && s(i) > 0.0) ++r.rank;
    r.sigma_min = s.size() ? s(s.size() - 1) : 0.0;
    r.full_row_rank = r.rank == r.rows;
    if (!r.full_row_rank)
        r.reason = "numerical rank " + std::to_string(r.rank) + " < " + std::to_string(r.rows) + " rows";
    return r;
}

RankReport is_persistently_exciting(const Matrix& u, Index order, const RankSettings& settings) {
    RankReport r;
    const Index n_u = u.rows();
    const Index T = u.cols();
    r.rows = n_u * order;
    if (order < 1 || n_u < 1) {
        r.reason = "order and input dimension must be positive";
        return r;
    }
    if (T - order + 1 < n_u * order) {
        r.cols = std::max<Index>(T - order + 1, 0);
        r.reason = "too few samples: " + std::to_string(r.cols) + " Hankel columns < " +
                   std::to_string(n_u * order) + " rows";
        return r;
    }
    return row_rank(hankel(u, order), settings);
}

MembershipResult behavior_residual(const Trajectory& data, const Trajectory& window) {
    data.validate();
    window.validate();
    if (data.n_u() != window.n_u() || data.n_y() != window.n_y())
        throw std::invalid_argument("behavior_residual: channel dimensions differ");
    const Index L = window.length();
    Matrix H(data.n_u() * L + data.n_y() * L, data.length() - L + 1);
    H << hankel(data.u, L), hankel(data.y, L);
    Vector w(H.rows());
    w << Eigen::Map<const Vector>(window.u.data(), window.u.size()),
        Eigen::Map<const Vector>(window.y.data(), window.y.size());
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(H);
    MembershipResult out;
    out.g = cod.solve(w);
    out.residual = (H * out.g - w).norm();
    return out;
}

LemmaCheck verify_fundamental_lemma(const LtiSystem& sys, Index T, Index L, std::uint64_t seed) {
    sys.validate();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    auto draw = [&](Index r, Index c) {
        Matrix m(r, c);
        for (Index j = 0; j < c; ++j)
            for (Index i = 0; i < r; ++i) m(i, j) = unit(rng);
        return m;
    };

    const Trajectory data = sys.simulate(draw(sys.n_x(), 1).col(0), draw(sys.n_u(), T));
    LemmaCheck check;
    check.excitation = is_persistently_exciting(data.u, L + sys.n_x());
    if (!check.excitation.full_row_rank)
        throw std::runtime_error("verify_fundamental_lemma: data not persistently exciting of order L + n: " +
                                 check.excitation.reason);
    const Trajectory window = sys.simulate(draw(sys.n_x(), 1).col(0), draw(sys.n_u(), L));
    auto fit = behavior_residual(data, window);
    check.residual = fit.residual;
    check.g = std::move(fit.g);
    return check;
}

namespace {

HankelSystem assemble_blocks(const Trajectory& data, const Matrix* lifted, Index t_ini, Index horizon,
                             Index pe_order, const RankSettings& settings) {
    data.validate();
    if (t_ini < 1 || horizon < 1) throw std::invalid_argument("assemble: t_ini and horizon must be >= 1");
    const Index L = t_ini + horizon;
    if (data.length() < L)
        throw std::invalid_argument("assemble: data length " + std::to_string(data.length()) +
                                    " shorter than depth T_ini + N = " + std::to_string(L));
    HankelSystem hs;
    hs.t_ini = t_ini;
    hs.horizon = horizon;
    hs.n_u = data.n_u();
    hs.n_y = data.n_y();
    hs.U = hankel(data.u, L);
    hs.Y = hankel(data.y, L);
    if (lifted) {
        hs.n_z = lifted->rows();
        hs.Z = hankel(*lifted, L);
    } else {
        hs.n_z = 0;
        hs.Z = Matrix::Zero(0, hs.U.cols());
    }
    hs.input_excitation = is_persistently_exciting(data.u, pe_order, settings);
    return hs;
}

} // namespace

HankelSystem assemble(const Trajectory& data, const RbfBank& bank, Index t_ini, Index horizon,
                      const RankSettings& settings) {
    if (bank.n_y() != data.n_y()) throw std::invalid_argument("assemble: bank output dimension mismatch");
    const Matrix z = lift_trajectory(data.y, bank);
    return assemble_blocks(data, &z, t_ini, horizon, bank.n_basis() + t_ini + horizon, settings);
}

HankelSystem assemble_unlifted(const Trajectory& data, Index t_ini, Index horizon, const RankSettings& settings) {
    return assemble_blocks(data, nullptr, t_ini, horizon, t_ini + horizon, settings);
}

void dump(std::ostream& out, const HankelSystem& hs) {
    const Eigen::IOFormat fmt(Eigen::FullPrecision, Eigen::DontAlignCols, " ", "\n");
    out << "# t_ini " << hs.t_ini << " horizon " << hs.horizon << " n_u " << hs.n_u << " n_y " << hs.n_y
        << " n_z " << hs.n_z << " n_cols " << hs.n_cols() << '\n';
    out << "# Z\n" << hs.Z.format(fmt) << "\n# U\n" << hs.U.format(fmt) << "\n# Y\n" << hs.Y.format(fmt) << '\n';
}

} // namespace dkpc
