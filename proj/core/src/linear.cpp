#include "dbest/linear.hpp"

#include "dbest/linalg.hpp"

#include <boost/math/distributions/normal.hpp>

#include <cmath>

namespace dbest {

Vec ExperimentData::r() const {
  Vec out = Vec::Zero(kn());
  for (int i = 0; i < n; ++i) out(static_cast<Eigen::Index>(arm_of[i]) * n + i) = 1.0;
  return out;
}

Vec ExperimentData::y_stacked() const {
  Vec out = Vec::Zero(kn());
  for (int i = 0; i < n; ++i) out(static_cast<Eigen::Index>(arm_of[i]) * n + i) = y_obs(i);
  return out;
}

Mat ExperimentData::x_aug() const {
  Mat x = Mat::Zero(kn(), k + p());
  for (int a = 0; a < k; ++a) {
    x.block(static_cast<Eigen::Index>(a) * n, a, n, 1).setOnes();
    if (p() > 0) x.block(static_cast<Eigen::Index>(a) * n, k, n, p()) = X;
  }
  return x;
}

ExperimentData make_data(const AssignmentRealization& z, const Vec& y_obs, const Mat& X, const Vec& pi) {
  if (y_obs.size() != z.n) throw std::invalid_argument("data: outcome length differs from unit count");
  if (X.rows() != z.n && X.size() != 0) throw std::invalid_argument("data: covariate rows differ from unit count");
  if (pi.size() != static_cast<Eigen::Index>(z.n) * z.k) throw std::invalid_argument("data: pi has wrong length");
  ExperimentData d;
  d.n = z.n;
  d.k = z.k;
  d.arm_of = z.arm_of;
  d.y_obs = y_obs;
  d.X = X.size() == 0 ? Mat(z.n, 0) : X;
  d.pi = pi;
  for (int i = 0; i < d.n; ++i)
    if (pi(static_cast<Eigen::Index>(d.arm_of[i]) * d.n + i) <= 0.0)
      throw std::invalid_argument("data: unit " + std::to_string(i) + " observed in a zero-probability cell");
  return d;
}

ExperimentData observe(const AssignmentRealization& z, const Vec& y_full, const Mat& X, const Vec& pi) {
  if (y_full.size() != static_cast<Eigen::Index>(z.n) * z.k) throw std::invalid_argument("data: y_full has wrong length");
  Vec y(z.n);
  for (int i = 0; i < z.n; ++i) y(i) = y_full(static_cast<Eigen::Index>(z.arm_of[i]) * z.n + i);
  ExperimentData d = make_data(z, y, X, pi);
  d.y_full = y_full;
  return d;
}

Vec center_columns(Mat& X) {
  if (X.rows() == 0) return Vec::Zero(X.cols());
  const Vec means = X.colwise().mean();
  X.rowwise() -= means.transpose();
  return means;
}

const char* to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::HT: return "HT";
    case EstimatorKind::Hajek: return "Hajek";
    case EstimatorKind::OLS: return "OLS";
    case EstimatorKind::WLS: return "WLS";
    case EstimatorKind::MI: return "MI";
    case EstimatorKind::GR: return "GR";
  }
  return "unknown";
}

Vec weight_vector(const ExperimentData& d, WeightChoice m) {
  if (m == WeightChoice::identity) return Vec::Ones(d.kn());
  Vec w = Vec::Zero(d.kn());
  for (Eigen::Index i = 0; i < w.size(); ++i)
    if (d.pi(i) > 0.0) w(i) = 1.0 / d.pi(i);
  return w;
}

namespace {

WeightChoice effective_weights(EstimatorKind kind, WeightChoice m) {
  return kind == EstimatorKind::OLS ? WeightChoice::identity : m;
}

bool regression_kind(EstimatorKind kind) {
  return kind == EstimatorKind::OLS || kind == EstimatorKind::WLS || kind == EstimatorKind::MI ||
         kind == EstimatorKind::GR;
}

Vec arm_sums(const Vec& v, int n, int k) {
  Vec s(k);
  for (int a = 0; a < k; ++a) s(a) = v.segment(static_cast<Eigen::Index>(a) * n, n).sum();
  return s;
}

// Places column vector v (kn) into arm columns: row a*n+i goes to column a.
Mat by_arm(const Vec& v, int n, int k) {
  Mat z = Mat::Zero(v.size(), k);
  for (int a = 0; a < k; ++a) z.block(static_cast<Eigen::Index>(a) * n, a, n, 1) = v.segment(static_cast<Eigen::Index>(a) * n, n);
  return z;
}

Vec inverse_pi(const ExperimentData& d) {
  Vec w = Vec::Zero(d.kn());
  for (Eigen::Index i = 0; i < w.size(); ++i)
    if (d.pi(i) > 0.0) w(i) = 1.0 / d.pi(i);
  return w;
}

}  // namespace

Vec population_coefficients(const ExperimentData& d, WeightChoice m) {
  if (!d.y_full) throw std::invalid_argument("population coefficients need full potential outcomes");
  const Mat x = d.x_aug();
  const Vec w = weight_vector(d, m).cwiseProduct(d.pi);
  const Mat A = x.transpose() * w.asDiagonal() * x;
  return pinv(A).inverse * (x.transpose() * w.cwiseProduct(*d.y_full));
}

LinearFit estimate_linear(EstimatorKind kind, const ExperimentData& d, WeightChoice m) {
  LinearFit fit;
  fit.kind = kind;
  fit.m = effective_weights(kind, m);
  const Vec r = d.r();
  const Vec y = d.y_stacked();
  const Vec ipw = inverse_pi(d);
  switch (kind) {
    case EstimatorKind::HT:
      fit.mu_hat = arm_sums(r.cwiseProduct(ipw).cwiseProduct(y), d.n, d.k) / d.n;
      break;
    case EstimatorKind::Hajek: {
      const Vec num = arm_sums(r.cwiseProduct(ipw).cwiseProduct(y), d.n, d.k);
      const Vec den = arm_sums(r.cwiseProduct(ipw), d.n, d.k);
      fit.mu_hat.resize(d.k);
      for (int a = 0; a < d.k; ++a) {
        if (den(a) == 0.0) throw std::runtime_error("Hajek: no observed units in arm " + std::to_string(a + 1));
        fit.mu_hat(a) = num(a) / den(a);
      }
      break;
    }
    default: {
      const Mat x = d.x_aug();
      const Vec w = weight_vector(d, fit.m).cwiseProduct(r);
      const Mat A = x.transpose() * w.asDiagonal() * x;
      const auto inv = pinv(A);
      fit.rank_deficient = inv.rank_deficient;
      const Vec b = inv.inverse * (x.transpose() * w.cwiseProduct(y));
      fit.b_hat = b;
      const Vec xb = x * b;
      if (kind == EstimatorKind::MI)
        fit.mu_hat = arm_sums(r.cwiseProduct(y) + (Vec::Ones(d.kn()) - r).cwiseProduct(xb), d.n, d.k) / d.n;
      else if (kind == EstimatorKind::GR)
        fit.mu_hat = arm_sums(xb + r.cwiseProduct(ipw).cwiseProduct(y - xb), d.n, d.k) / d.n;
      else
        fit.mu_hat = arm_sums(xb, d.n, d.k) / d.n;
      break;
    }
  }
  fit.z_hat = z_vector(kind, d, fit.m, false, &fit);
  return fit;
}

Mat z_vector(EstimatorKind kind, const ExperimentData& d, WeightChoice m, bool population, const LinearFit* fit) {
  m = effective_weights(kind, m);
  if (population && !d.y_full) throw std::invalid_argument("z_vector: population mode needs full potential outcomes");
  if (!population && !fit) throw std::invalid_argument("z_vector: plug-in mode needs a fit");
  const Vec y = population ? *d.y_full : d.y_stacked();
  const Vec design_w = population ? d.pi : d.r();
  switch (kind) {
    case EstimatorKind::HT:
      return by_arm(y, d.n, d.k);
    case EstimatorKind::Hajek: {
      Vec mu = population ? Vec(arm_sums(y, d.n, d.k) / d.n) : fit->mu_hat;
      Vec e = y;
      for (int a = 0; a < d.k; ++a) e.segment(static_cast<Eigen::Index>(a) * d.n, d.n).array() -= mu(a);
      if (!population) e = e.cwiseProduct(design_w);
      return by_arm(e, d.n, d.k);
    }
    default:
      break;
  }
  if (!regression_kind(kind)) throw std::logic_error("z_vector: unhandled kind");
  const Mat x = d.x_aug();
  const Vec b = population ? population_coefficients(d, m) : *fit->b_hat;
  Vec e = y - x * b;
  if (!population) e = e.cwiseProduct(design_w);  // unobserved rows carry no residual
  if (kind == EstimatorKind::GR) return by_arm(e, d.n, d.k);

  const Vec mv = weight_vector(d, m);
  const Mat G = x.transpose() * mv.cwiseProduct(design_w).asDiagonal() * x;
  const Mat Ginv = pinv(G).inverse;
  const Mat left = e.cwiseProduct(d.pi).cwiseProduct(mv).asDiagonal() * x;  // kn x (k+p)
  if (kind == EstimatorKind::OLS || kind == EstimatorKind::WLS) {
    return left * (Ginv * double(d.n)).leftCols(d.k);
  }
  // MI
  const Mat one_minus_pi = by_arm(Vec::Ones(d.kn()) - d.pi, d.n, d.k);
  return left * Ginv * (x.transpose() * one_minus_pi) + by_arm(e.cwiseProduct(d.pi), d.n, d.k);
}

VarianceEstimate plugin_varbound(const Mat& z_hat, const Vec& r, const VarianceBound& b, const Vec& c) {
  if (z_hat.cols() != c.size()) throw std::invalid_argument("plugin_varbound: contrast length differs from arm count");
  if (z_hat.rows() != r.size() || b.Dt_over_p.rows() != r.size())
    throw std::invalid_argument("plugin_varbound: dimension mismatch");
  const Vec zc = z_hat * c;
  std::vector<Eigen::Index> idx;
  for (Eigen::Index i = 0; i < r.size(); ++i)
    if (r(i) != 0.0 && zc(i) != 0.0) idx.push_back(i);
  double q = 0.0;
  for (Eigen::Index i : idx) {
    double row = 0.0;
    for (Eigen::Index j : idx) row += b.Dt_over_p(i, j) * zc(j);
    q += zc(i) * row;
  }
  const double n = static_cast<double>(r.size()) / static_cast<double>(c.size());
  VarianceEstimate v;
  v.raw = q / (n * n);
  v.scaled = v.raw * n;
  v.negative = v.raw < 0.0;
  return v;
}

double normal_quantile(double level) {
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("confidence level must lie in (0,1)");
  return boost::math::quantile(boost::math::normal_distribution<>(), 0.5 + level / 2.0);
}

Interval normal_ci(double value, double varbound_raw, double level) {
  if (varbound_raw < 0.0) throw std::invalid_argument("normal_ci: negative variance");
  const double half = normal_quantile(level) * std::sqrt(varbound_raw);
  return {value - half, value + half};
}

EstimateReport make_report(const std::string& name, const Vec& mu_hat, const Mat& z_hat, const ExperimentData& d,
                           const VarianceBound& b, const Vec& c, double level) {
  if (c.size() != d.k) throw std::invalid_argument("contrast length differs from arm count");
  EstimateReport rep;
  rep.estimator = name;
  rep.mu_hat = mu_hat;
  rep.level = level;
  rep.contrast_value = c.dot(mu_hat);
  const auto v = plugin_varbound(z_hat, d.r(), b, c);
  rep.varbound_raw = v.raw;
  rep.varbound_scaled = v.scaled;
  if (v.negative) {
    rep.diagnostics.push_back("negative variance-bound estimate; interval uses zero width");
    rep.ci_low = rep.ci_high = rep.contrast_value;
  } else {
    const auto ci = normal_ci(rep.contrast_value, v.raw, level);
    rep.ci_low = ci.lo;
    rep.ci_high = ci.hi;
  }
  return rep;
}

InterpretationReport check_interpretation(const ExperimentData& d, WeightChoice m, double tol) {
  const Mat x = d.x_aug();
  const Vec mv = weight_vector(d, m);
  InterpretationReport rep;
  for (int a = 0; a < d.k; ++a) {
    Vec ci = Vec::Zero(d.kn()), mi = Vec::Zero(d.kn());
    for (int i = 0; i < d.n; ++i) {
      const Eigen::Index idx = static_cast<Eigen::Index>(a) * d.n + i;
      if (d.pi(idx) <= 0.0 || mv(idx) <= 0.0) {
        ci(idx) = mi(idx) = std::numeric_limits<double>::infinity();
        continue;
      }
      ci(idx) = 1.0 / (mv(idx) * d.pi(idx));
      mi(idx) = (1.0 - 1.0 / d.pi(idx)) / mv(idx);
    }
    if (!ci.allFinite()) {
      rep.ci_residual = rep.mi_residual = std::numeric_limits<double>::infinity();
      continue;
    }
    rep.ci_residual = std::max(rep.ci_residual, column_space_residual(x, ci));
    rep.mi_residual = std::max(rep.mi_residual, column_space_residual(x, mi));
  }
  rep.ci_condition = rep.ci_residual <= tol;
  rep.mi_condition = rep.mi_residual <= tol;
  return rep;
}

}  // namespace dbest
