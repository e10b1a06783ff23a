#include "dbest/model_assisted.hpp"

#include "dbest/linalg.hpp"

#include <cmath>

namespace dbest {

Mat ImputationModel::features(const Mat& X) const {
  const Eigen::Index n = X.rows();
  if (X.cols() != p) throw std::invalid_argument("imputation model: covariate count differs from model");
  Mat F = Mat::Zero(n * k, param_count());
  for (int a = 0; a < k; ++a) {
    F.block(a * n, a, n, 1).setOnes();
    if (p == 0) continue;
    const Eigen::Index col = sharing == SlopeSharing::same ? k : k + static_cast<Eigen::Index>(a) * p;
    F.block(a * n, col, n, p) = X;
  }
  return F;
}

namespace {

double sigmoid(double eta) {
  if (eta >= 0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

double softplus(double eta) { return std::max(eta, 0.0) + std::log1p(std::exp(-std::abs(eta))); }

Vec apply_link(Family family, const Vec& eta) {
  if (family == Family::linear) return eta;
  return eta.unaryExpr([](double v) { return sigmoid(v); });
}

}  // namespace

Vec ImputationModel::predict(const Mat& X, const Vec& theta) const {
  if (theta.size() != param_count()) throw std::invalid_argument("imputation model: theta has wrong length");
  return apply_link(family, features(X) * theta);
}

Mat ImputationModel::gradient(const Mat& X, const Vec& theta) const {
  const Mat F = features(X);
  if (family == Family::linear) return F;
  const Vec f = apply_link(family, F * theta);
  return f.cwiseProduct(Vec::Ones(f.size()) - f).asDiagonal() * F;
}

ObjectiveValue qmle_objective(const ImputationModel& model, const Mat& X, const Vec& y, const Vec& w,
                              const Vec& theta) {
  const Mat F = model.features(X);
  const Vec eta = F * theta;
  ObjectiveValue out;
  if (model.family == Family::linear) {
    const Vec res = y - eta;
    out.value = w.dot(res.cwiseAbs2());
    out.gradient = -2.0 * F.transpose() * w.cwiseProduct(res);
    return out;
  }
  Vec f(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    if (w(i) != 0.0) out.value += w(i) * (softplus(eta(i)) - y(i) * eta(i));
    f(i) = sigmoid(eta(i));
  }
  out.gradient = F.transpose() * w.cwiseProduct(f - y);
  return out;
}

QmleFit fit_weighted(const ImputationModel& model, const Mat& X, const Vec& y, const Vec& w) {
  const Mat F = model.features(X);
  if (y.size() != F.rows() || w.size() != F.rows()) throw std::invalid_argument("qmle: dimension mismatch");
  for (Eigen::Index i = 0; i < w.size(); ++i)
    if (w(i) < 0.0 || !std::isfinite(w(i))) throw std::invalid_argument("qmle: weights must be finite and nonnegative");
  QmleFit fit;
  const int s = model.param_count();
  if (model.family == Family::linear) {
    const Mat A = F.transpose() * w.asDiagonal() * F;
    const auto inv = pinv(A);
    fit.theta = inv.inverse * (F.transpose() * w.cwiseProduct(y));
    if (inv.rank_deficient) fit.message = "rank-deficient design; minimum-norm solution";
    return fit;
  }
  fit.theta = Vec::Zero(s);
  double obj = qmle_objective(model, X, y, w, fit.theta).value;
  fit.converged = false;
  for (int it = 1; it <= kQmleMaxIterations; ++it) {
    fit.iterations = it;
    const Vec eta = F * fit.theta;
    Vec f(eta.size()), h(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      f(i) = sigmoid(eta(i));
      h(i) = w(i) * f(i) * (1.0 - f(i));
    }
    const Vec grad = F.transpose() * w.cwiseProduct(f - y);
    const Mat H = F.transpose() * h.asDiagonal() * F;
    const Vec step = pinv(H, 1e-12).inverse * grad;
    double t = 1.0;
    Vec next = fit.theta - step;
    double next_obj = qmle_objective(model, X, y, w, next).value;
    while (next_obj > obj + 1e-12 * std::abs(obj) && t > 1e-10) {
      t *= 0.5;
      next = fit.theta - t * step;
      next_obj = qmle_objective(model, X, y, w, next).value;
    }
    const double change = (next - fit.theta).cwiseAbs().maxCoeff();
    fit.theta = next;
    const double prev = obj;
    obj = next_obj;
    if (change < 1e-10 || std::abs(prev - obj) <= 1e-15 * std::max(1.0, std::abs(obj))) {
      fit.converged = true;
      break;
    }
  }
  if (!fit.converged) fit.message = "logistic fit reached the iteration cap";
  if (fit.theta.cwiseAbs().maxCoeff() > 20.0) {
    fit.separation_warning = true;
    fit.message = "coefficients diverging; data may be separated";
  }
  return fit;
}

QmleFit fit_qmle(const ImputationModel& model, const ExperimentData& d, const Vec& omega) {
  if (omega.size() != d.kn()) throw std::invalid_argument("qmle: omega has wrong length");
  const Vec r = d.r();
  Vec w = Vec::Zero(d.kn());
  for (Eigen::Index i = 0; i < w.size(); ++i)
    if (r(i) != 0.0) w(i) = omega(i) / d.pi(i);
  return fit_weighted(model, d.X, d.y_stacked(), w);
}

QmleFit fit_qmle_population(const ImputationModel& model, const ExperimentData& d, const Vec& omega) {
  if (!d.y_full) throw std::invalid_argument("qmle: population fit needs full potential outcomes");
  return fit_weighted(model, d.X, *d.y_full, omega);
}

namespace {

Vec arm_sums(const Vec& v, int n, int k) {
  Vec s(k);
  for (int a = 0; a < k; ++a) s(a) = v.segment(static_cast<Eigen::Index>(a) * n, n).sum();
  return s;
}

Mat by_arm(const Vec& v, int n, int k) {
  Mat z = Mat::Zero(v.size(), k);
  for (int a = 0; a < k; ++a)
    z.block(static_cast<Eigen::Index>(a) * n, a, n, 1) = v.segment(static_cast<Eigen::Index>(a) * n, n);
  return z;
}

Vec ipw_observed(const ExperimentData& d) {
  const Vec r = d.r();
  const Vec y = d.y_stacked();
  Vec out = Vec::Zero(d.kn());
  for (Eigen::Index i = 0; i < out.size(); ++i)
    if (r(i) != 0.0) out(i) = y(i) / d.pi(i);
  return out;
}

}  // namespace

Vec contrast_weight(const Vec& v, const Vec& c, int n) {
  Vec out = v;
  for (Eigen::Index a = 0; a < c.size(); ++a) out.segment(a * n, n) *= c(a);
  return out;
}

Vec gr_arm_means(const Vec& f, const ExperimentData& d) {
  if (f.size() != d.kn()) throw std::invalid_argument("GR: imputations have wrong length");
  const Vec r = d.r();
  const Vec y = d.y_stacked();
  Vec corr = Vec::Zero(d.kn());
  for (Eigen::Index i = 0; i < corr.size(); ++i)
    if (r(i) != 0.0) corr(i) = (y(i) - f(i)) / d.pi(i);
  return (arm_sums(f, d.n, d.k) + arm_sums(corr, d.n, d.k)) / d.n;
}

EstimateReport gr_report(const std::string& name, const Vec& f, const ExperimentData& d, const VarianceBound& b,
                         const Vec& c, double level) {
  const Vec mu = gr_arm_means(f, d);
  const Mat z = by_arm(d.r().cwiseProduct(d.y_stacked() - f), d.n, d.k);
  return make_report(name, mu, z, d, b, c, level);
}

EstimateReport qmle_gr(const ImputationModel& model, const Vec& theta, const ExperimentData& d, const VarianceBound& b,
                       const Vec& c, double level) {
  return gr_report("QMLE-GR", model.predict(d.X, theta), d, b, c, level);
}

double no_harm_alpha(const Vec& f, const ExperimentData& d, const Mat& D, const Vec& c) {
  const Vec u = contrast_weight(ipw_observed(d), c, d.n);
  const Vec fc = contrast_weight(f, c, d.n);
  const Vec Dfc = D * fc;
  const double den = fc.dot(Dfc);
  if (std::abs(den) / d.n < kNoHarmDenominatorFloor)
    throw NotIdentified("no-harm: denominator is numerically zero; the imputations carry no variance-reducing signal");
  return u.dot(Dfc) / den;
}

double population_no_harm_alpha(const Vec& f, const Vec& y_full, const Mat& D, const Vec& c, int n) {
  const Vec u = contrast_weight(y_full, c, n);
  const Vec fc = contrast_weight(f, c, n);
  const Vec Dfc = D * fc;
  const double den = fc.dot(Dfc);
  if (std::abs(den) / n < kNoHarmDenominatorFloor)
    throw NotIdentified("no-harm: denominator is numerically zero");
  return u.dot(Dfc) / den;
}

OptLinearResult opt_linear_coefficients(const Mat& x, const Mat& omega, const Vec& c, const Vec& u, int n) {
  if (omega.rows() != x.rows() || omega.cols() != x.rows()) throw std::invalid_argument("opt-gr: omega dimension mismatch");
  Mat xt = x;
  for (Eigen::Index a = 0; a < c.size(); ++a) xt.middleRows(a * n, n) *= c(a);
  const Mat Ox = omega * xt;
  const Mat A = xt.transpose() * Ox;
  OptLinearResult out;
  out.eigenvalues = symmetric_eigenvalues(A / n);
  const double top = out.eigenvalues.size() ? out.eigenvalues.cwiseAbs().maxCoeff() : 0.0;
  if (top == 0.0) throw NotIdentified("opt-gr: x~' Omega x~ is zero");
  out.weak_identification = out.eigenvalues.minCoeff() < 1e-8 * top;
  out.theta = pinv(A).inverse * (Ox.transpose() * u);
  return out;
}

namespace {

void require_nondegenerate(const Mat& omega) {
  if (omega.size() == 0 || omega.cwiseAbs().maxCoeff() < 1e-12)
    throw std::invalid_argument("opt-gr: Omega is numerically zero");
}

}  // namespace

OptLinearResult opt_gr_linear(const ImputationModel& model, const ExperimentData& d, const Mat& omega, const Vec& c) {
  require_nondegenerate(omega);
  return opt_linear_coefficients(model.features(d.X), omega, c, contrast_weight(ipw_observed(d), c, d.n), d.n);
}

OptLinearResult population_opt_gr_linear(const ImputationModel& model, const ExperimentData& d, const Mat& omega,
                                         const Vec& c) {
  if (!d.y_full) throw std::invalid_argument("opt-gr: population version needs full potential outcomes");
  require_nondegenerate(omega);
  return opt_linear_coefficients(model.features(d.X), omega, c, contrast_weight(*d.y_full, c, d.n), d.n);
}

void OptimizerConfig::validate() const {
  if (!(initial_step > 0.0)) throw std::invalid_argument("optimizer: step must be positive");
  if (!(backtrack > 0.0 && backtrack < 1.0)) throw std::invalid_argument("optimizer: backtrack must lie in (0,1)");
  if (!(armijo > 0.0 && armijo < 0.5)) throw std::invalid_argument("optimizer: armijo fraction must lie in (0,0.5)");
  if (!(grad_tol > 0.0)) throw std::invalid_argument("optimizer: grad_tol must be positive");
  if (!(box > 0.0) || box_increment < 0.0) throw std::invalid_argument("optimizer: invalid box");
  if (restarts < 1 || cycles < 1 || max_iterations < 1) throw std::invalid_argument("optimizer: counts must be positive");
  if (restart_sd < 0.0) throw std::invalid_argument("optimizer: restart_sd must be nonnegative");
}

MomentEvaluation opt_moments(const ImputationModel& model, const Mat& X, const Vec& theta, const Mat& omega,
                             const Vec& c, const Vec& u, int n, bool with_jacobian) {
  const Mat F = model.features(X);
  const Vec eta = F * theta;
  const Vec f = apply_link(model.family, eta);
  Vec dlink = Vec::Ones(f.size());
  if (model.family == Family::logistic) dlink = f.cwiseProduct(Vec::Ones(f.size()) - f);
  Vec cvec(f.size());
  for (Eigen::Index a = 0; a < c.size(); ++a) cvec.segment(a * n, n).setConstant(c(a));

  const Mat Gc = cvec.cwiseProduct(dlink).asDiagonal() * F;
  const Vec resid = u - cvec.cwiseProduct(f);
  const Vec Oa = omega * resid;
  MomentEvaluation out;
  out.g = Gc.transpose() * Oa / n;
  if (!with_jacobian) return out;
  out.jacobian = -(Gc.transpose() * (omega * Gc)) / n;
  if (model.family == Family::logistic) {
    const Vec second = dlink.cwiseProduct(Vec::Ones(f.size()) - 2.0 * f);
    const Vec weight = Oa.cwiseProduct(cvec).cwiseProduct(second);
    out.jacobian += F.transpose() * weight.asDiagonal() * F / n;
  }
  return out;
}

ObjectiveValue opt_criterion(const ImputationModel& model, const Mat& X, const Vec& theta, const Mat& omega,
                             const Vec& c, const Vec& u, int n) {
  const auto m = opt_moments(model, X, theta, omega, c, u, n, true);
  return {m.g.squaredNorm(), 2.0 * m.jacobian.transpose() * m.g};
}

namespace {

double criterion_only(const ImputationModel& model, const Mat& X, const Vec& theta, const Mat& omega, const Vec& c,
                      const Vec& u, int n) {
  return opt_moments(model, X, theta, omega, c, u, n, false).g.squaredNorm();
}

}  // namespace

OptLogitResult minimize_opt_criterion(const ImputationModel& model, const Mat& X, const Mat& omega, const Vec& c,
                                      const Vec& u, int n, const Vec& start, const OptimizerConfig& cfg) {
  cfg.validate();
  require_nondegenerate(omega);
  const int s = model.param_count();
  if (start.size() != s) throw std::invalid_argument("opt-gr: start has wrong length");

  for (int cycle = 0; cycle < cfg.cycles; ++cycle) {
    const double half = cfg.box + cycle * cfg.box_increment;
    OptLogitResult best;
    bool found = false;
    for (int r = 0; r < cfg.restarts; ++r) {
      const int index = cycle * cfg.restarts + r;
      Vec theta = start;
      if (index > 0) {
        Rng rng = make_stream(cfg.seed, static_cast<std::uint64_t>(index));
        std::normal_distribution<double> normal(0.0, cfg.restart_sd);
        for (int j = 0; j < s; ++j) theta(j) += normal(rng);
      }
      bool converged = false, escaped = false;
      ObjectiveValue cur = opt_criterion(model, X, theta, omega, c, u, n);
      for (int it = 0; it < cfg.max_iterations; ++it) {
        const double gn2 = cur.gradient.squaredNorm();
        if (std::sqrt(gn2) < cfg.grad_tol) {
          converged = true;
          break;
        }
        double t = cfg.initial_step;
        Vec next = theta - t * cur.gradient;
        double val = criterion_only(model, X, next, omega, c, u, n);
        while (val > cur.value - cfg.armijo * t * gn2 && t > 1e-16) {
          t *= cfg.backtrack;
          next = theta - t * cur.gradient;
          val = criterion_only(model, X, next, omega, c, u, n);
        }
        if (t <= 1e-16) break;
        theta = next;
        if (theta.cwiseAbs().maxCoeff() > half) {
          escaped = true;
          break;
        }
        cur = opt_criterion(model, X, theta, omega, c, u, n);
      }
      if (!converged || escaped) continue;
      if (!found || cur.value < best.criterion) {
        found = true;
        best.theta = theta;
        best.criterion = cur.value;
        best.gradient_norm = cur.gradient.norm();
        best.restart_index = index;
      }
    }
    if (!found) continue;
    best.cycles_used = cycle + 1;
    best.moment_norm = std::sqrt(best.criterion);
    // finite-difference Hessian of the criterion from the analytic gradient
    Mat H(s, s);
    const double h = 1e-5;
    for (int j = 0; j < s; ++j) {
      Vec tp = best.theta, tm = best.theta;
      tp(j) += h;
      tm(j) -= h;
      H.col(j) = (opt_criterion(model, X, tp, omega, c, u, n).gradient -
                  opt_criterion(model, X, tm, omega, c, u, n).gradient) / (2 * h);
    }
    best.hessian_min_eigenvalue = symmetric_eigenvalues(0.5 * (H + H.transpose()))(0);
    return best;
  }
  throw NumericalError("opt-gr: no interior solution found within the restart budget");
}

OptLogitResult opt_gr_logit(const ImputationModel& model, const ExperimentData& d, const Mat& omega, const Vec& c,
                            const Vec& start, const OptimizerConfig& cfg) {
  return minimize_opt_criterion(model, d.X, omega, c, contrast_weight(ipw_observed(d), c, d.n), d.n, start, cfg);
}

OptIResult opt_i_coefficients(const Vec& f, const Mat& D, const Vec& c, const Vec& u, int n, int k) {
  Mat xh = Mat::Zero(f.size(), k + 1);
  for (int a = 0; a < k; ++a) xh.block(static_cast<Eigen::Index>(a) * n, a, n, 1).setOnes();
  xh.col(k) = f;
  const auto lin = opt_linear_coefficients(xh, D, c, u, n);
  OptIResult out;
  out.beta = lin.theta;
  out.eigenvalues = lin.eigenvalues;
  out.weak_identification = lin.weak_identification;
  out.imputations = xh * lin.theta;
  return out;
}

OptIResult opt_i_gr(const Vec& f, const ExperimentData& d, const Mat& D, const Vec& c) {
  return opt_i_coefficients(f, D, c, contrast_weight(ipw_observed(d), c, d.n), d.n, d.k);
}

OptIResult population_opt_i(const Vec& f, const ExperimentData& d, const Mat& D, const Vec& c) {
  if (!d.y_full) throw std::invalid_argument("opt-i: population version needs full potential outcomes");
  return opt_i_coefficients(f, D, c, contrast_weight(*d.y_full, c, d.n), d.n, d.k);
}

double theoretical_asy_variance(const Vec& zc, const Mat& M, int n) {
  if (M.rows() != zc.size()) throw std::invalid_argument("asymptotic variance: dimension mismatch");
  return zc.dot(M * zc) / n;
}

double theoretical_asy_variance(const Vec& f, const Vec& y_full, const Mat& M, const Vec& c, int n) {
  return theoretical_asy_variance(contrast_weight(y_full - f, c, n), M, n);
}

}  // namespace dbest
