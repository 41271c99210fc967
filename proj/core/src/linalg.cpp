#include "eem/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <unsupported/Eigen/KroneckerProduct>

#include "eem/errors.hpp"

namespace eem {

MatrixXd kron(const MatrixXd& a, const MatrixXd& b) {
  return Eigen::kroneckerProduct(a, b).eval();
}

VectorXd ones(std::size_t n) { return VectorXd::Ones(static_cast<Eigen::Index>(n)); }

MatrixXd lift2(const MatrixXd& m) { return kron(MatrixXd::Identity(2, 2), m); }

std::size_t numerical_rank(const MatrixXd& m) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<MatrixXd> svd(m);
  const auto& s = svd.singularValues();
  const double max_dim = static_cast<double>(std::max(m.rows(), m.cols()));
  const double threshold = max_dim * std::numeric_limits<double>::epsilon() * s(0);
  std::size_t rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > threshold) ++rank;
  }
  return rank;
}

double spectral_radius(const MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::EigenSolver<MatrixXd> es(m, /*computeEigenvectors=*/false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

MatrixXd psd_cholesky(const MatrixXd& m) {
  const Eigen::Index n = m.rows();
  if (m.cols() != n) throw InvalidArgument("psd_cholesky: matrix is not square");
  MatrixXd l = MatrixXd::Zero(n, n);
  if (n == 0) return l;
  const double scale = m.diagonal().cwiseAbs().maxCoeff();
  const double zero_tol = 64.0 * std::numeric_limits<double>::epsilon() * scale;
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = m(j, j) - l.row(j).head(j).squaredNorm();
    if (d < -zero_tol) {
      throw NumericalError("psd_cholesky: matrix is not positive semidefinite");
    }
    if (d <= zero_tol) continue;  // zero column
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      l(i, j) = (m(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / ljj;
    }
  }
  return l;
}

bool is_symmetric_positive_definite(const MatrixXd& m, double tol) {
  if (m.rows() != m.cols() || m.size() == 0) return false;
  const double norm = m.norm();
  if ((m - m.transpose()).norm() > tol * norm) return false;
  Eigen::LLT<MatrixXd> llt(symmetrize(m));
  return llt.info() == Eigen::Success;
}

double relative_difference(const MatrixXd& a, const MatrixXd& b) {
  const double denom = std::max({a.norm(), b.norm(), std::numeric_limits<double>::min()});
  return (a - b).norm() / denom;
}

}  // namespace eem
