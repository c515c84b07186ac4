#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <iosfwd>
#include <string>

namespace ntklab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Eigendecomposition K = Qᵀ diag(λ) Q of a symmetric matrix.
///
/// Eigenvalues are sorted non-increasing. Row i of `eigenvectors` is the unit
/// eigenvector belonging to `eigenvalues[i]`. Small negative eigenvalues that
/// come from round-off are kept as computed; use `clamped_eigenvalues` when a
/// log-scale friendly view is needed.
struct Spectrum {
    Vector eigenvalues;
    Matrix eigenvectors;

    [[nodiscard]] Eigen::Index order() const { return eigenvalues.size(); }
};

struct JacobiOptions {
    /// Converged once the off-diagonal Frobenius norm drops below
    /// `tolerance * ||K||_F`.
    double tolerance = 1e-12;
    int max_sweeps = 100;
};

/// Largest absolute entry.
double max_abs(const Matrix& m);

/// Throws DimensionError unless square, NumericError on non-finite entries.
void require_square_finite(const Matrix& m, const char* what);

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Rotations are applied in round-robin (tournament) order: each round is a
/// set of N/2 disjoint index pairs, so every rotation in a round is computed
/// from the same matrix and the whole round is applied as two contiguous
/// column passes. The schedule depends only on N, so results are bitwise
/// reproducible.
///
/// The input is symmetrized as (K + Kᵀ)/2 first; asymmetry above
/// 1e-9·||K||_max is rejected with DomainError.
Spectrum sym_eig(const Matrix& k, const JacobiOptions& options = {});

/// Returns J Jᵀ for an N×P Jacobian stack. The lower triangle is computed
/// and mirrored, so the result is exactly symmetric.
Matrix gram_from_jacobians(const Matrix& jacobians);

/// Qᵀ diag(exp(-λ t)) Q v.
Vector matrix_exp_action(const Spectrum& spectrum, double t, const Vector& v);

/// Qᵀ diag(λ) Q, mainly for reconstruction checks.
Matrix reconstruct(const Spectrum& spectrum);

inline constexpr double kEigenvalueFloor = 1e-12;

/// Eigenvalues with every entry below `floor` replaced by `floor`.
Vector clamped_eigenvalues(const Vector& eigenvalues, double floor = kEigenvalueFloor);

/// Writes `index,eigenvalue` rows (descending, clamped to `floor`) with
/// 17 significant digits.
void write_spectrum_csv(std::ostream& out, const Vector& eigenvalues,
                        double floor = kEigenvalueFloor);
void write_spectrum_csv(const std::string& path, const Vector& eigenvalues,
                        double floor = kEigenvalueFloor);

}  // namespace ntklab
