#include "chernoff/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "chernoff/core.hpp"

namespace chernoff {

namespace {

double off_diagonal_norm(const Eigen::MatrixXd& a) {
  double s = 0.0;
  const Eigen::Index n = a.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) s += 2.0 * a(i, j) * a(i, j);
  }
  return std::sqrt(s);
}

// Runs cyclic Jacobi in place on `a`; accumulates rotations into `v` when non-null.
int jacobi_sweeps(Eigen::MatrixXd& a, Eigen::MatrixXd* v, double tol, int max_sweeps) {
  const Eigen::Index n = a.rows();
  const double scale = std::max(a.norm(), 1e-300);
  int sweep = 0;
  for (; sweep < max_sweeps; ++sweep) {
    if (off_diagonal_norm(a) <= tol * scale) break;
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double app = a(p, p);
        const double aqq = a(q, q);
        // Classical stable rotation (Golub & Van Loan, Alg. 8.4.1).
        const double tau = (aqq - app) / (2.0 * apq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        if (v != nullptr) {
          for (Eigen::Index k = 0; k < n; ++k) {
            const double vkp = (*v)(k, p);
            const double vkq = (*v)(k, q);
            (*v)(k, p) = c * vkp - s * vkq;
            (*v)(k, q) = s * vkp + c * vkq;
          }
        }
      }
    }
  }
  return sweep;
}

}  // namespace

SymmetricEigen jacobi_eigen(const Eigen::MatrixXd& a, double tol, int max_sweeps) {
  if (a.rows() != a.cols()) throw InvalidArgument("jacobi_eigen: matrix not square");
  const Eigen::Index n = a.rows();
  Eigen::MatrixXd work = 0.5 * (a + a.transpose());
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  SymmetricEigen out;
  out.sweeps = jacobi_sweeps(work, &v, tol, max_sweeps);

  // Stable sort by eigenvalue keeps the ordering deterministic for ties.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index x, Eigen::Index y) { return work(x, x) < work(y, y); });
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    out.values(k) = work(order[k], order[k]);
    out.vectors.col(k) = v.col(order[k]);
  }
  return out;
}

Eigen::VectorXd jacobi_eigenvalues(const Eigen::MatrixXd& a, double tol, int max_sweeps) {
  if (a.rows() != a.cols()) throw InvalidArgument("jacobi_eigenvalues: matrix not square");
  Eigen::MatrixXd work = 0.5 * (a + a.transpose());
  jacobi_sweeps(work, nullptr, tol, max_sweeps);
  Eigen::VectorXd values = work.diagonal();
  std::sort(values.data(), values.data() + values.size());
  return values;
}

double min_eigenvalue(const Eigen::MatrixXd& a) {
  if (a.rows() == 1) return a(0, 0);
  if (a.rows() == 2) {
    const double m = 0.5 * (a(0, 0) + a(1, 1));
    const double h = 0.5 * (a(0, 0) - a(1, 1));
    const double off = 0.5 * (a(0, 1) + a(1, 0));
    return m - std::hypot(h, off);
  }
  return jacobi_eigenvalues(a)(0);
}

int numerical_rank(const Eigen::MatrixXd& rows, double rel_tol) {
  if (rows.rows() == 0 || rows.cols() == 0) return 0;
  const Eigen::MatrixXd gram = rows.transpose() * rows;
  const Eigen::VectorXd ev = jacobi_eigenvalues(gram);
  const double top = ev.maxCoeff();
  if (top <= 0.0) return 0;
  int r = 0;
  for (Eigen::Index k = 0; k < ev.size(); ++k) {
    if (ev(k) > rel_tol * top) ++r;
  }
  return r;
}

}  // namespace chernoff
