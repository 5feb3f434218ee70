#pragma once

#include <Eigen/Dense>

#include <cstddef>

namespace sgmcmc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Dense symmetric matrix. The input is symmetrized on construction by
// averaging with its transpose, so entries(i, j) == entries(j, i) exactly.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(const Matrix& m);

  static SymMatrix identity(std::size_t dim);
  static SymMatrix diagonal(const Vector& diag);
  static SymMatrix zero(std::size_t dim);

  std::size_t dim() const { return static_cast<std::size_t>(m_.rows()); }
  const Matrix& matrix() const { return m_; }
  double operator()(std::size_t i, std::size_t j) const {
    return m_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  double trace() const { return m_.trace(); }
  bool all_finite() const { return m_.allFinite(); }

 private:
  Matrix m_;
};

struct SymEig {
  Vector values;   // ascending
  Matrix vectors;  // column k pairs with values(k)
};

// Cyclic Jacobi eigensolver. Throws InvalidInput on non-finite entries.
SymEig sym_eig(const SymMatrix& a);

// Largest |eigenvalue| times this factor is the tolerance below which
// negative eigenvalues are clamped to zero instead of rejected.
inline constexpr double kPsdRelativeTolerance = 1e-10;

// Symmetric PSD square root via the eigendecomposition. Negative eigenvalues
// within tolerance are clamped; anything lower raises NotPsd.
SymMatrix psd_sqrt(const SymMatrix& a);

// Rebuilds Q diag(values) Q^T.
SymMatrix from_eig(const SymEig& eig);

}  // namespace sgmcmc
