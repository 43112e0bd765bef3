#include "dkpc/lifting.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace dkpc {

bool operator==(const RbfBank& a, const RbfBank& b) {
    return a.kind == b.kind && a.seed == b.seed && a.centers.rows() == b.centers.rows() &&
           a.centers.cols() == b.centers.cols() && a.centers == b.centers;
}

RbfBank build_bank(const Matrix& outputs, Index n_basis, std::uint64_t seed) {
    if (n_basis < 1) throw std::invalid_argument("build_bank: n_basis must be >= 1");
    if (outputs.rows() < 1 || outputs.cols() < 1) throw std::invalid_argument("build_bank: empty data");
    if (!outputs.allFinite()) throw std::invalid_argument("build_bank: data is not finite");

    const Vector lo = outputs.rowwise().minCoeff();
    const Vector hi = outputs.rowwise().maxCoeff();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    RbfBank bank;
    bank.seed = seed;
    bank.kind = ObservableKind::ThinPlateLog10;
    bank.centers.resize(outputs.rows(), n_basis);
    for (Index j = 0; j < n_basis; ++j)
        for (Index i = 0; i < outputs.rows(); ++i)
            bank.centers(i, j) = lo(i) + (hi(i) - lo(i)) * unit(rng);
    return bank;
}

RbfBank identity_bank(Index n_y) {
    if (n_y < 1) throw std::invalid_argument("identity_bank: n_y must be >= 1");
    RbfBank bank;
    bank.kind = ObservableKind::Identity;
    bank.centers = Matrix::Zero(n_y, 0);
    return bank;
}

double thin_plate_log10(double r) {
    if (r == 0.0) return 0.0;
    return r * r * std::log10(r);
}

Vector lift(const Vector& y, const RbfBank& bank) {
    if (y.size() != bank.n_y()) throw std::invalid_argument("lift: output dimension does not match bank");
    if (!y.allFinite()) throw std::invalid_argument("lift: output is not finite");
    if (bank.kind == ObservableKind::Identity) return y;
    Vector z(bank.centers.cols());
    for (Index i = 0; i < z.size(); ++i) z(i) = thin_plate_log10((y - bank.centers.col(i)).norm());
    return z;
}

Matrix lift_trajectory(const Matrix& ys, const RbfBank& bank) {
    Matrix z(bank.n_basis(), ys.cols());
    for (Index k = 0; k < ys.cols(); ++k) {
        try {
            z.col(k) = lift(ys.col(k), bank);
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument("lift_trajectory: sample " + std::to_string(k) + ": " + e.what());
        }
    }
    return z;
}

void write_bank(std::ostream& out, const RbfBank& bank) {
    out << "# observable bank\n";
    out << "kind " << (bank.kind == ObservableKind::Identity ? "identity" : "thin-plate-log10") << '\n';
    out << "seed " << bank.seed << '\n';
    out << "n_y " << bank.n_y() << '\n';
    out << "n_basis " << bank.n_basis() << '\n';
    if (bank.kind == ObservableKind::Identity) return;
    out << std::setprecision(17);
    for (Index j = 0; j < bank.centers.cols(); ++j) {
        out << "center";
        for (Index i = 0; i < bank.centers.rows(); ++i) out << ' ' << bank.centers(i, j);
        out << '\n';
    }
}

RbfBank read_bank(std::istream& in) {
    std::string kind = "thin-plate-log10";
    std::uint64_t seed = 0;
    Index n_y = -1;
    Index n_basis = -1;
    std::vector<Vector> centers;
    std::string raw;
    while (std::getline(in, raw)) {
        if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
        std::istringstream ls(raw);
        std::string key;
        if (!(ls >> key)) continue;
        if (key == "kind") {
            ls >> kind;
        } else if (key == "seed") {
            ls >> seed;
        } else if (key == "n_y") {
            ls >> n_y;
        } else if (key == "n_basis") {
            ls >> n_basis;
        } else if (key == "center") {
            if (n_y < 1) throw std::invalid_argument("bank file: center before n_y");
            Vector c(n_y);
            for (Index i = 0; i < n_y; ++i)
                if (!(ls >> c(i))) throw std::invalid_argument("bank file: short center record");
            centers.push_back(std::move(c));
        } else {
            throw std::invalid_argument("bank file: unknown key '" + key + "'");
        }
    }
    if (n_y < 1 || n_basis < 1) throw std::invalid_argument("bank file: missing n_y or n_basis");
    if (kind == "identity") {
        RbfBank bank = identity_bank(n_y);
        bank.seed = seed;
        return bank;
    }
    if (kind != "thin-plate-log10") throw std::invalid_argument("bank file: unknown kind " + kind);
    if (static_cast<Index>(centers.size()) != n_basis)
        throw std::invalid_argument("bank file: center count does not match n_basis");
    RbfBank bank;
    bank.seed = seed;
    bank.centers.resize(n_y, n_basis);
    for (Index j = 0; j < n_basis; ++j) bank.centers.col(j) = centers[static_cast<std::size_t>(j)];
    return bank;
}

void save_bank(const std::string& path, const RbfBank& bank) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write bank file: " + path);
    write_bank(out, bank);
}

RbfBank load_bank(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open bank file: " + path);
    return read_bank(in);
}

} // namespace dkpc
