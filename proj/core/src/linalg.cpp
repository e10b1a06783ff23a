#include "dbest/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace dbest {

PinvResult pinv(const Mat& a, double rtol) {
  PinvResult out;
  out.inverse = Mat::Zero(a.cols(), a.rows());
  if (a.size() == 0) return out;
  Eigen::BDCSVD<Mat> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vec& s = svd.singularValues();
  const double smax = s.size() > 0 ? s(0) : 0.0;
  const double cut = rtol * smax;
  Vec sinv = Vec::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cut && s(i) > 0.0) {
      sinv(i) = 1.0 / s(i);
      ++out.rank;
    }
  }
  out.inverse = svd.matrixV() * sinv.asDiagonal() * svd.matrixU().transpose();
  out.rank_deficient = out.rank < std::min(a.rows(), a.cols());
  return out;
}

Vec symmetric_eigenvalues(const Mat& a) {
  if (a.size() == 0) return Vec();
  Eigen::SelfAdjointEigenSolver<Mat> es(a, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("eigenvalue computation failed");
  return es.eigenvalues();
}

bool is_symmetric(const Mat& a, double tol) {
  if (a.rows() != a.cols()) return false;
  if (a.size() == 0) return true;
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  return (a - a.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

double column_space_residual(const Mat& a, const Vec& b) {
  const double nb = b.norm();
  if (nb == 0.0) return 0.0;
  if (a.cols() == 0) return 1.0;
  Eigen::CompleteOrthogonalDecomposition<Mat> cod(a);
  cod.setThreshold(1e-10);
  const Vec coef = cod.solve(b);
  return (a * coef - b).norm() / nb;
}

}  // namespace dbest
