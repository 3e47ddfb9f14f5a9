#pragma once

#include <Eigen/Dense>

namespace chernoff {

/// Eigen-decomposition of a symmetric matrix. Eigenvalues ascending;
/// column k of `vectors` is the unit eigenvector of `values[k]`.
struct SymmetricEigen {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
  int sweeps = 0;
};

/// Cyclic Jacobi rotations until the off-diagonal Frobenius norm drops
/// below `tol` times the matrix norm. Input must be symmetric.
SymmetricEigen jacobi_eigen(const Eigen::MatrixXd& a, double tol = 1e-12, int max_sweeps = 100);

/// Eigenvalues only (same iteration, skips accumulating rotations).
Eigen::VectorXd jacobi_eigenvalues(const Eigen::MatrixXd& a, double tol = 1e-12,
                                   int max_sweeps = 100);

/// Smallest eigenvalue of a symmetric matrix.
double min_eigenvalue(const Eigen::MatrixXd& a);

/// Rank of the row set of `rows` (n x d), judged on the Gram matrix spectrum.
int numerical_rank(const Eigen::MatrixXd& rows, double rel_tol = 1e-10);

}  // namespace chernoff
