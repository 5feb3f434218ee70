#include "sgmcmc/numerics.hpp"

#include "sgmcmc/error.hpp"

#include <Eigen/Jacobi>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <vector>

namespace sgmcmc {

SymMatrix::SymMatrix(const Matrix& m) {
  if (m.rows() != m.cols()) {
    throw InvalidInput("SymMatrix: matrix is not square");
  }
  if (m.rows() < 1) {
    throw InvalidInput("SymMatrix: dimension must be at least 1");
  }
  m_ = 0.5 * (m + m.transpose());
}

SymMatrix SymMatrix::identity(std::size_t dim) {
  const auto n = static_cast<Eigen::Index>(dim);
  return SymMatrix(Matrix::Identity(n, n));
}

SymMatrix SymMatrix::diagonal(const Vector& diag) {
  return SymMatrix(Matrix(diag.asDiagonal()));
}

SymMatrix SymMatrix::zero(std::size_t dim) {
  const auto n = static_cast<Eigen::Index>(dim);
  return SymMatrix(Matrix::Zero(n, n));
}

SymEig sym_eig(const SymMatrix& input) {
  if (!input.all_finite()) {
    throw InvalidInput("sym_eig: matrix has non-finite entries");
  }
  Matrix a = input.matrix();
  const Eigen::Index n = a.rows();
  Matrix q = Matrix::Identity(n, n);

  // An entry is treated as zero once it is negligible next to its diagonal
  // pair (relative accuracy) or next to the whole matrix (absolute floor).
  const double eps = std::numeric_limits<double>::epsilon();
  const double floor = 1e-3 * eps * a.norm();
  constexpr int kMaxSweeps = 100;

  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index r = p + 1; r < n; ++r) {
        const double apr = std::abs(a(p, r));
        if (apr <= floor || apr <= eps * std::sqrt(std::abs(a(p, p) * a(r, r)))) {
          a(p, r) = 0.0;
          a(r, p) = 0.0;
          continue;
        }
        Eigen::JacobiRotation<double> rot;
        rot.makeJacobi(a, p, r);
        a.applyOnTheLeft(p, r, rot.adjoint());
        a.applyOnTheRight(p, r, rot);
        q.applyOnTheRight(p, r, rot);
        a(p, r) = 0.0;
        a(r, p) = 0.0;
        rotated = true;
      }
    }
    if (!rotated) break;
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index x, Eigen::Index y) { return a(x, x) < a(y, y); });

  SymEig out{Vector(n), Matrix(n, n)};
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto src = order[static_cast<std::size_t>(k)];
    out.values(k) = a(src, src);
    out.vectors.col(k) = q.col(src);
  }
  return out;
}

SymMatrix from_eig(const SymEig& eig) {
  return SymMatrix(eig.vectors * eig.values.asDiagonal() * eig.vectors.transpose());
}

SymMatrix psd_sqrt(const SymMatrix& a) {
  SymEig eig = sym_eig(a);
  const double scale = eig.values.cwiseAbs().maxCoeff();
  const double tol = kPsdRelativeTolerance * scale;
  for (Eigen::Index k = 0; k < eig.values.size(); ++k) {
    double& lambda = eig.values(k);
    if (lambda < -tol) {
      std::ostringstream msg;
      msg << "psd_sqrt: eigenvalue " << lambda << " below -" << tol;
      throw NotPsd(msg.str(), lambda);
    }
    lambda = std::sqrt(std::max(lambda, 0.0));
  }
  return from_eig(eig);
}

}  // namespace sgmcmc
