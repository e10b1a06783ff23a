#include "dbest/bounds.hpp"

#include "dbest/linalg.hpp"

#include <cmath>

namespace dbest {

Mat divide_by_joint(const Mat& a, const Mat& p) {
  if (a.rows() != p.rows() || a.cols() != p.cols()) throw std::invalid_argument("divide_by_joint: dimension mismatch");
  Mat out = Mat::Zero(a.rows(), a.cols());
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      if (p(i, j) > 0.0) out(i, j) = a(i, j) / p(i, j);
  return out;
}

namespace {

BoolMat minus_one_cells(const DesignMoments& m, double tol_m1) {
  const Eigen::Index kn = m.pi.size();
  BoolMat mask = BoolMat::Constant(kn, kn, false);
  for (Eigen::Index j = 0; j < kn; ++j) {
    if (m.pi(j) <= 0.0) continue;
    for (Eigen::Index i = 0; i < kn; ++i) {
      if (m.pi(i) <= 0.0) continue;
      mask(i, j) = m.method == MomentMethod::monte_carlo ? m.p(i, j) == 0.0 : std::abs(m.D(i, j) + 1.0) <= tol_m1;
    }
  }
  return mask;
}

void require_flagged_zeros(const DesignMoments& m) {
  for (Eigen::Index i = 0; i < m.pi.size(); ++i)
    if (m.pi(i) <= 0.0 && !m.zero_mask(i) && !m.possibly_zero(i))
      throw std::invalid_argument("bound: zero inclusion probability at index " + std::to_string(i) + " is not flagged");
}

}  // namespace

VarianceBound aronow_samii_bound(const DesignMoments& m, double tol_m1) {
  require_flagged_zeros(m);
  VarianceBound b;
  b.kind = "aronow_samii";
  b.mask_minus1 = minus_one_cells(m, tol_m1);
  const Mat ind = b.mask_minus1.cast<double>().matrix();
  b.Dt = m.D + ind;
  b.Dt.diagonal() += ind.rowwise().sum();
  // masked cells are exactly zero: D = -1 there and the indicator adds 1
  for (Eigen::Index j = 0; j < b.Dt.cols(); ++j)
    for (Eigen::Index i = 0; i < b.Dt.rows(); ++i)
      if (b.mask_minus1(i, j)) b.Dt(i, j) = 0.0;
  b.Dt_over_p = divide_by_joint(b.Dt, m.p);
  return b;
}

VarianceBound neyman_bound_crd(int n, int n_t) {
  if (n < 2 || n_t <= 0 || n_t >= n) throw std::invalid_argument("neyman bound: need 0 < n_t < n");
  const int n_c = n - n_t;
  if (n_t < 2 || n_c < 2)
    throw NotIdentified("neyman bound: each arm needs at least two units (within-arm joint inclusion probability is 0)");
  const Mat A = (double(n) / (n - 1)) * (Mat::Identity(n, n) - Mat::Constant(n, n, 1.0 / n));
  VarianceBound b;
  b.kind = "neyman";
  b.Dt = Mat::Zero(2 * n, 2 * n);
  b.Dt.topLeftCorner(n, n) = (double(n) / n_t) * A;
  b.Dt.bottomRightCorner(n, n) = (double(n) / n_c) * A;
  const Mat p = crd_joint_inclusion(n, n_t);
  b.mask_minus1 = (p.array() == 0.0);
  b.Dt_over_p = divide_by_joint(b.Dt, p);
  return b;
}

VarianceBound custom_bound(const DesignMoments& m, const Mat& dt, const std::string& kind) {
  if (dt.rows() != m.pi.size() || dt.cols() != m.pi.size()) throw std::invalid_argument("custom bound: dimension mismatch");
  if (!is_symmetric(dt)) throw std::invalid_argument("custom bound: matrix is not symmetric");
  VarianceBound b;
  b.kind = kind;
  b.Dt = dt;
  b.mask_minus1 = minus_one_cells(m, 1e-12);
  b.Dt_over_p = divide_by_joint(dt, m.p);
  return b;
}

BoundCertificate certify_bound(const DesignMoments& m, const VarianceBound& b, double tol) {
  const Eigen::Index kn = m.pi.size();
  if (b.Dt.rows() != kn || b.Dt.cols() != kn) throw std::invalid_argument("certify_bound: dimension mismatch");
  BoundCertificate c;
  const Vec ev = symmetric_eigenvalues(b.Dt - m.D);
  c.min_eigenvalue = ev.size() ? ev(0) : 0.0;
  c.psd = c.min_eigenvalue >= -tol;
  for (Eigen::Index j = 0; j < kn; ++j)
    for (Eigen::Index i = 0; i < kn; ++i)
      if (m.p(i, j) == 0.0 && m.pi(i) > 0.0 && m.pi(j) > 0.0 && std::abs(b.Dt(i, j)) > tol) ++c.mask_violations;
  c.identified = c.mask_violations == 0;
  return c;
}

CrdBoundComparison compare_neyman_aronow_samii(int n, int n_t) {
  DesignMoments m;
  m.n = n;
  m.k = 2;
  m.p = crd_joint_inclusion(n, n_t);
  m.pi = m.p.diagonal();
  m.D = crd_first_order_matrix(n, n_t);
  m.zero_mask = BoolVec::Constant(2 * n, false);
  m.possibly_zero = m.zero_mask;
  const Mat diff = neyman_bound_crd(n, n_t).Dt - aronow_samii_bound(m).Dt;
  Mat ones = Mat::Zero(2 * n, 2);
  ones.col(0).head(n).setOnes();
  ones.col(1).tail(n).setOnes();
  const Mat resid = Mat::Identity(2 * n, 2 * n) - ones * (ones.transpose() * ones).inverse() * ones.transpose();
  return {symmetric_eigenvalues(diff), symmetric_eigenvalues(resid * diff * resid)};
}

VarianceBound psd_clip(const VarianceBound& b) {
  Eigen::SelfAdjointEigenSolver<Mat> es(b.Dt_over_p);
  if (es.info() != Eigen::Success) throw NumericalError("psd_clip: eigendecomposition failed");
  const Vec lam = es.eigenvalues().cwiseMax(0.0);
  VarianceBound out = b;
  out.Dt_over_p = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
  out.psd_clipped = true;
  return out;
}

}  // namespace dbest
