#include "ntklab/linalg.hpp"

#include "ntklab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <utility>
#include <vector>

namespace ntklab {

namespace {

using Pair = std::pair<Eigen::Index, Eigen::Index>;

// Circle-method tournament: n players (n even) play n-1 rounds, every pair
// meets exactly once. A dummy player is added for odd orders and its games
// are dropped.
std::vector<std::vector<Pair>> round_robin_schedule(Eigen::Index order) {
    const Eigen::Index players = order + (order % 2);
    std::vector<Eigen::Index> ring(static_cast<std::size_t>(players));
    std::iota(ring.begin(), ring.end(), Eigen::Index{0});

    std::vector<std::vector<Pair>> rounds;
    rounds.reserve(static_cast<std::size_t>(players - 1));
    for (Eigen::Index r = 0; r + 1 < players; ++r) {
        std::vector<Pair> round;
        for (Eigen::Index i = 0; i < players / 2; ++i) {
            Eigen::Index a = ring[static_cast<std::size_t>(i)];
            Eigen::Index b = ring[static_cast<std::size_t>(players - 1 - i)];
            if (a >= order || b >= order) continue;
            if (a > b) std::swap(a, b);
            round.emplace_back(a, b);
        }
        rounds.push_back(std::move(round));
        std::rotate(ring.begin() + 1, ring.end() - 1, ring.end());
    }
    return rounds;
}

struct Rotation {
    Eigen::Index p;
    Eigen::Index q;
    double c;
    double s;
};

// M <- M J for every rotation; the pairs are disjoint so order is irrelevant.
void rotate_columns(Matrix& m, const std::vector<Rotation>& rotations) {
    const Eigen::Index rows = m.rows();
    for (const Rotation& r : rotations) {
        double* cp = m.col(r.p).data();
        double* cq = m.col(r.q).data();
        for (Eigen::Index i = 0; i < rows; ++i) {
            const double a = cp[i];
            const double b = cq[i];
            cp[i] = r.c * a - r.s * b;
            cq[i] = r.s * a + r.c * b;
        }
    }
}

// M <- Jᵀ M, walking one contiguous column at a time.
void rotate_rows(Matrix& m, const std::vector<Rotation>& rotations) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        double* col = m.col(j).data();
        for (const Rotation& r : rotations) {
            const double a = col[r.p];
            const double b = col[r.q];
            col[r.p] = r.c * a - r.s * b;
            col[r.q] = r.s * a + r.c * b;
        }
    }
}

double off_diagonal_norm(const Matrix& a) {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
        for (Eigen::Index i = 0; i < a.rows(); ++i) {
            if (i != j) sum += a(i, j) * a(i, j);
        }
    }
    return std::sqrt(sum);
}

}  // namespace

double max_abs(const Matrix& m) {
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

void require_square_finite(const Matrix& m, const char* what) {
    if (m.rows() != m.cols()) {
        throw DimensionError(std::string(what) + ": matrix must be square, got " +
                             std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    }
    if (!m.allFinite()) {
        throw NumericError(std::string(what) + ": matrix has non-finite entries");
    }
}

Spectrum sym_eig(const Matrix& k, const JacobiOptions& options) {
    require_square_finite(k, "sym_eig");
    const Eigen::Index n = k.rows();
    const double scale = max_abs(k);
    if ((k - k.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
        throw DomainError("sym_eig: matrix is not symmetric");
    }

    Matrix a = 0.5 * (k + k.transpose());
    Matrix v = Matrix::Identity(n, n);

    const double frob = a.norm();
    const double target = options.tolerance * frob;
    // Entries this small cannot move the off-diagonal norm above `target`.
    const double negligible = n > 0 ? 1e-2 * target / static_cast<double>(n) : 0.0;

    const auto schedule = round_robin_schedule(n);
    std::vector<Rotation> rotations;
    bool converged = frob == 0.0;
    for (int sweep = 0; sweep < options.max_sweeps && !converged; ++sweep) {
        if (off_diagonal_norm(a) <= target) {
            converged = true;
            break;
        }
        for (const auto& round : schedule) {
            rotations.clear();
            for (const auto& [p, q] : round) {
                const double apq = a(p, q);
                if (std::abs(apq) <= negligible) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                rotations.push_back({p, q, c, t * c});
            }
            if (rotations.empty()) continue;
            rotate_columns(a, rotations);
            rotate_rows(a, rotations);
            for (const Rotation& r : rotations) {
                a(r.p, r.q) = 0.0;
                a(r.q, r.p) = 0.0;
            }
            rotate_columns(v, rotations);
        }
        a = 0.5 * (a + a.transpose()).eval();
    }
    if (!converged && off_diagonal_norm(a) > target) {
        throw NumericError("sym_eig: Jacobi iteration did not converge in " +
                           std::to_string(options.max_sweeps) + " sweeps");
    }

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index x, Eigen::Index y) { return a(x, x) > a(y, y); });

    Spectrum out;
    out.eigenvalues.resize(n);
    out.eigenvectors.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Index src = order[static_cast<std::size_t>(i)];
        out.eigenvalues[i] = a(src, src);
        out.eigenvectors.row(i) = v.col(src).transpose();
    }
    return out;
}

Matrix gram_from_jacobians(const Matrix& jacobians) {
    if (jacobians.rows() < 1 || jacobians.cols() < 1) {
        throw DimensionError("gram_from_jacobians: Jacobian stack must be at least 1x1");
    }
    if (!jacobians.allFinite()) {
        throw NumericError("gram_from_jacobians: non-finite Jacobian entries");
    }
    const Eigen::Index n = jacobians.rows();
    Matrix gram = Matrix::Zero(n, n);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(jacobians);
    gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();
    return gram;
}

Vector matrix_exp_action(const Spectrum& spectrum, double t, const Vector& v) {
    if (!(t >= 0.0)) throw DomainError("matrix_exp_action: t must be non-negative");
    if (v.size() != spectrum.order()) {
        throw DimensionError("matrix_exp_action: vector length " + std::to_string(v.size()) +
                             " does not match spectrum order " +
                             std::to_string(spectrum.order()));
    }
    const Vector projected = spectrum.eigenvectors * v;
    const Vector decay = (-spectrum.eigenvalues.array() * t).exp();
    return spectrum.eigenvectors.transpose() * (decay.array() * projected.array()).matrix();
}

Matrix reconstruct(const Spectrum& spectrum) {
    return spectrum.eigenvectors.transpose() * spectrum.eigenvalues.asDiagonal() *
           spectrum.eigenvectors;
}

Vector clamped_eigenvalues(const Vector& eigenvalues, double floor) {
    return eigenvalues.cwiseMax(floor);
}

void write_spectrum_csv(std::ostream& out, const Vector& eigenvalues, double floor) {
    out << "index,eigenvalue\n";
    out << std::setprecision(17);
    const Vector clamped = clamped_eigenvalues(eigenvalues, floor);
    for (Eigen::Index i = 0; i < clamped.size(); ++i) {
        out << i << ',' << clamped[i] << '\n';
    }
}

void write_spectrum_csv(const std::string& path, const Vector& eigenvalues, double floor) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    write_spectrum_csv(out, eigenvalues, floor);
}

}  // namespace ntklab
