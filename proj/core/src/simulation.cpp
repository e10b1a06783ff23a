#include "dbest/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <thread>

namespace dbest {

Vec impute_potential_outcomes(const Mat& X, const Vec& beta, const Vec& intercepts, std::uint64_t seed) {
  if (X.cols() != beta.size()) throw std::invalid_argument("impute: coefficient length differs from covariate count");
  if (intercepts.size() < 1) throw std::invalid_argument("impute: need at least one arm intercept");
  const Eigen::Index n = X.rows(), k = intercepts.size();
  Rng rng = make_stream(seed, 0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Vec eps(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double u = unif(rng);
    while (u <= 0.0) u = unif(rng);
    eps(i) = std::log(u / (1.0 - u));
  }
  const Vec xb = X.cols() > 0 ? Vec(X * beta) : Vec(Vec::Zero(n));
  Vec y(n * k);
  for (Eigen::Index a = 0; a < k; ++a)
    for (Eigen::Index i = 0; i < n; ++i) y(a * n + i) = intercepts(a) + xb(i) > eps(i) ? 1.0 : 0.0;
  return y;
}

Mat preprocess_covariates(const Mat& raw, const CovariateOptions& options) {
  Mat X = raw;
  const Eigen::Index n = X.rows();
  if (n < 2) throw std::invalid_argument("covariates: need at least two rows");
  for (int j : options.topcode_columns)
    if (j < 0 || j >= X.cols()) throw std::invalid_argument("covariates: top-code column out of range");
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    double sum = 0.0;
    Eigen::Index seen = 0;
    for (Eigen::Index i = 0; i < n; ++i)
      if (!std::isnan(X(i, j))) {
        sum += X(i, j);
        ++seen;
      }
    if (seen == 0) throw std::invalid_argument("covariates: column " + std::to_string(j + 1) + " is entirely missing");
    const double mean = sum / seen;
    for (Eigen::Index i = 0; i < n; ++i)
      if (std::isnan(X(i, j))) X(i, j) = mean;
    const double m2 = (X.col(j).array() - mean).square().sum();
    const double sd = std::sqrt(m2 / (n - 1));
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mean))))
      throw std::invalid_argument("covariates: column " + std::to_string(j + 1) + " is constant");
    X.col(j) = (X.col(j).array() - mean) / sd;
    if (std::find(options.topcode_columns.begin(), options.topcode_columns.end(), j) != options.topcode_columns.end())
      X.col(j) = X.col(j).cwiseMin(options.topcode);
  }
  center_columns(X);
  return X;
}

const std::vector<std::string>& estimator_names() {
  static const std::vector<std::string> names{"HT",        "HAJEK",      "OLS",        "WLS",        "MI",
                                              "LINEAR",    "LOGIT",      "NH_LINEAR",  "NH_LOGIT",   "OPT_LINEAR",
                                              "OPT_LOGIT", "OPTI_LINEAR", "OPTI_LOGIT"};
  return names;
}

namespace {

struct LinearSpec {
  EstimatorKind kind;
  WeightChoice m;
};

std::optional<LinearSpec> linear_spec(const std::string& name) {
  if (name == "HT") return LinearSpec{EstimatorKind::HT, WeightChoice::identity};
  if (name == "HAJEK") return LinearSpec{EstimatorKind::Hajek, WeightChoice::identity};
  if (name == "OLS") return LinearSpec{EstimatorKind::OLS, WeightChoice::identity};
  if (name == "WLS") return LinearSpec{EstimatorKind::WLS, WeightChoice::inverse_probability};
  if (name == "MI") return LinearSpec{EstimatorKind::MI, WeightChoice::identity};
  return std::nullopt;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

ImputationModel model_for(const std::string& name, const ExperimentData& d, SlopeSharing sharing) {
  ImputationModel model;
  model.family = ends_with(name, "LOGIT") ? Family::logistic : Family::linear;
  model.sharing = sharing;
  model.k = d.k;
  model.p = d.p();
  return model;
}

const Mat& omega_of(const EstimationContext& ctx) { return ctx.omega ? *ctx.omega : ctx.moments->D; }

void require_context(const EstimationContext& ctx) {
  if (!ctx.moments || !ctx.bound) throw std::invalid_argument("estimation context needs moments and a bound");
}

}  // namespace

EstimateReport run_estimator(const std::string& name, const ExperimentData& d, const EstimationContext& ctx,
                             const Vec& c) {
  require_context(ctx);
  const VarianceBound& b = *ctx.bound;
  if (auto spec = linear_spec(name)) {
    const LinearFit fit = estimate_linear(spec->kind, d, spec->m);
    auto rep = make_report(name, fit.mu_hat, fit.z_hat, d, b, c, ctx.level);
    if (fit.rank_deficient) rep.diagnostics.push_back("rank-deficient regression; pseudoinverse used");
    return rep;
  }
  const ImputationModel model = model_for(name, d, ctx.sharing);
  const Mat& omega = omega_of(ctx);
  std::vector<std::string> notes;
  auto qmle_imputations = [&]() {
    const QmleFit fit = fit_qmle(model, d, d.pi);
    if (!fit.message.empty()) notes.push_back(fit.message);
    return std::make_pair(fit.theta, model.predict(d.X, fit.theta));
  };
  Vec f;
  if (name == "LINEAR" || name == "LOGIT") {
    f = qmle_imputations().second;
  } else if (name == "NH_LINEAR" || name == "NH_LOGIT") {
    const Vec base = qmle_imputations().second;
    const double alpha = no_harm_alpha(base, d, ctx.moments->D, c);
    notes.push_back("alpha=" + std::to_string(alpha));
    f = alpha * base;
  } else if (name == "OPT_LINEAR") {
    const auto opt = opt_gr_linear(model, d, omega, c);
    if (opt.weak_identification) notes.push_back("near-singular x~'Omega x~; some coefficients not identified");
    f = model.predict(d.X, opt.theta);
  } else if (name == "OPT_LOGIT") {
    const Vec start = qmle_imputations().first;
    const auto opt = opt_gr_logit(model, d, omega, c, start, ctx.optimizer);
    notes.push_back("gradient_norm=" + std::to_string(opt.gradient_norm));
    if (opt.hessian_min_eigenvalue < 0.0)
      notes.push_back("criterion Hessian has a negative eigenvalue " + std::to_string(opt.hessian_min_eigenvalue));
    f = model.predict(d.X, opt.theta);
  } else if (name == "OPTI_LINEAR" || name == "OPTI_LOGIT") {
    const auto opt = opt_i_gr(qmle_imputations().second, d, omega, c);
    if (opt.weak_identification) notes.push_back("near-singular Opt-I design; some coefficients not identified");
    f = opt.imputations;
  } else {
    throw std::invalid_argument("unknown estimator '" + name + "'");
  }
  auto rep = gr_report(name, f, d, b, c, ctx.level);
  rep.diagnostics.insert(rep.diagnostics.end(), notes.begin(), notes.end());
  return rep;
}

Vec population_contrast_z(const std::string& name, const ExperimentData& d, const EstimationContext& ctx,
                          const Vec& c) {
  require_context(ctx);
  if (!d.y_full) throw std::invalid_argument("population quantities need full potential outcomes");
  const Vec& y = *d.y_full;
  if (auto spec = linear_spec(name)) return z_vector(spec->kind, d, spec->m, true) * c;
  const ImputationModel model = model_for(name, d, ctx.sharing);
  const Mat& omega = omega_of(ctx);
  auto qmle_theta = [&]() { return fit_qmle_population(model, d, d.pi).theta; };
  Vec f;
  if (name == "LINEAR" || name == "LOGIT") {
    f = model.predict(d.X, qmle_theta());
  } else if (name == "NH_LINEAR" || name == "NH_LOGIT") {
    const Vec base = model.predict(d.X, qmle_theta());
    f = population_no_harm_alpha(base, y, ctx.moments->D, c, d.n) * base;
  } else if (name == "OPT_LINEAR") {
    f = model.predict(d.X, population_opt_gr_linear(model, d, omega, c).theta);
  } else if (name == "OPT_LOGIT") {
    const auto opt = minimize_opt_criterion(model, d.X, omega, c, contrast_weight(y, c, d.n), d.n, qmle_theta(),
                                            ctx.optimizer);
    f = model.predict(d.X, opt.theta);
  } else if (name == "OPTI_LINEAR" || name == "OPTI_LOGIT") {
    f = population_opt_i(model.predict(d.X, qmle_theta()), d, omega, c).imputations;
  } else {
    throw std::invalid_argument("unknown estimator '" + name + "'");
  }
  return contrast_weight(y - f, c, d.n);
}

void SimConfig::validate() const {
  if (replications < 1) throw std::invalid_argument("simulation: replications must be at least 1");
  if (contrast.size() != design.k) throw std::invalid_argument("simulation: contrast length differs from arm count");
  if (y_full.size() != static_cast<Eigen::Index>(design.n) * design.k)
    throw std::invalid_argument("simulation: potential outcomes have wrong length");
  if (X.rows() != design.n) throw std::invalid_argument("simulation: covariate rows differ from unit count");
  if (workers < 1) throw std::invalid_argument("simulation: workers must be positive");
  if (estimators.empty()) throw std::invalid_argument("simulation: no estimators configured");
  const auto& known = estimator_names();
  for (const auto& e : estimators)
    if (std::find(known.begin(), known.end(), e) == known.end())
      throw std::invalid_argument("simulation: unknown estimator '" + e + "'");
  if (bound != "aronow_samii" && bound != "neyman") throw std::invalid_argument("simulation: unknown bound '" + bound + "'");
  if (omega != "D" && omega != "bound") throw std::invalid_argument("simulation: omega must be 'D' or 'bound'");
  optimizer.validate();
}

DesignMoments compute_moments(const DesignSpec& design, const std::string& method, std::int64_t mc_reps,
                              std::uint64_t mc_seed, int workers) {
  if (method == "exact") return exact_moments(design);
  if (method == "mc") return mc_moments(design, mc_reps, mc_seed, workers);
  if (method == "auto") {
    try {
      return exact_moments(design);
    } catch (const SupportTooLarge&) {
    } catch (const NotEnumerable&) {
    }
    return mc_moments(design, mc_reps, mc_seed, workers);
  }
  throw std::invalid_argument("unknown moments method '" + method + "'");
}

VarianceBound make_bound(const DesignSpec& design, const DesignMoments& m, const std::string& kind, bool clip) {
  VarianceBound b;
  if (kind == "aronow_samii") {
    b = aronow_samii_bound(m);
  } else if (kind == "neyman") {
    if (design.kind != DesignKind::completely_randomized || design.k != 2)
      throw std::invalid_argument("the Neyman bound is available only for two-arm completely randomized designs");
    b = neyman_bound_crd(design.n, design.counts[0]);
  } else {
    throw std::invalid_argument("unknown bound '" + kind + "'");
  }
  return clip ? psd_clip(b) : b;
}

namespace {

struct Cell {
  bool ok = false;
  double estimate = 0.0;
  double varbound = 0.0;
};

std::string fmt15(double v) {
  std::ostringstream os;
  os << std::setprecision(15) << v;
  return os.str();
}

}  // namespace

MetricsTable run_simulation(const SimConfig& cfg, const DesignMoments* given) {
  cfg.validate();
  const DesignSpec& design = cfg.design;
  const int n = design.n;
  DesignMoments owned;
  if (!given) owned = compute_moments(design, cfg.moments, cfg.mc_reps, cfg.mc_seed, cfg.workers);
  const DesignMoments& m = given ? *given : owned;
  if (m.n != n || m.k != design.k) throw std::invalid_argument("simulation: moments do not match the design");
  const VarianceBound bound = make_bound(design, m, cfg.bound, cfg.psd_clip);
  EstimationContext ctx;
  ctx.moments = &m;
  ctx.bound = &bound;
  ctx.omega = cfg.omega == "bound" ? &bound.Dt : &m.D;
  ctx.sharing = cfg.sharing;
  ctx.optimizer = cfg.optimizer;
  ctx.level = cfg.level;

  const Vec& c = cfg.contrast;
  double truth = 0.0;
  for (int a = 0; a < design.k; ++a) truth += c(a) * cfg.y_full.segment(static_cast<Eigen::Index>(a) * n, n).mean();

  const std::size_t E = cfg.estimators.size();
  const std::int64_t R = cfg.replications;
  std::vector<Cell> cells(static_cast<std::size_t>(R) * E);
  auto work = [&](std::int64_t begin, std::int64_t end) {
    for (std::int64_t r = begin; r < end; ++r) {
      Rng rng = make_stream(cfg.seed, static_cast<std::uint64_t>(r));
      const auto z = sample_assignment(design, rng);
      ExperimentData d;
      try {
        d = observe(z, cfg.y_full, cfg.X, m.pi);
      } catch (const std::exception&) {
        continue;
      }
      for (std::size_t e = 0; e < E; ++e) {
        Cell& cell = cells[static_cast<std::size_t>(r) * E + e];
        try {
          const auto rep = run_estimator(cfg.estimators[e], d, ctx, c);
          if (!std::isfinite(rep.contrast_value) || !std::isfinite(rep.varbound_raw)) continue;
          cell = {true, rep.contrast_value, rep.varbound_raw};
        } catch (const std::exception&) {
        }
      }
    }
  };
  const int workers = static_cast<int>(std::min<std::int64_t>(cfg.workers, R));
  if (workers <= 1) {
    work(0, R);
  } else {
    std::vector<std::thread> pool;
    const std::int64_t chunk = (R + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work, std::min(R, w * chunk), std::min(R, (w + 1) * chunk));
    for (auto& t : pool) t.join();
  }

  MetricsTable table;
  table.replications = R;
  table.truth = truth;
  table.n = n;
  table.moments_provenance = m.method == MomentMethod::exact
                                 ? "exact"
                                 : "monte_carlo reps=" + std::to_string(m.reps) + " seed=" + std::to_string(m.seed);
  const double zq = normal_quantile(cfg.level);

  ExperimentData pop;
  pop.n = n;
  pop.k = design.k;
  pop.arm_of.assign(n, 0);
  pop.y_obs = Vec::Zero(n);
  pop.X = cfg.X;
  pop.pi = m.pi;
  pop.y_full = cfg.y_full;

  for (std::size_t e = 0; e < E; ++e) {
    MetricsRow row;
    row.estimator = cfg.estimators[e];
    double sum = 0.0, bsum = 0.0;
    for (std::int64_t r = 0; r < R; ++r) {
      const Cell& cell = cells[static_cast<std::size_t>(r) * E + e];
      if (!cell.ok) {
        ++row.failed;
        continue;
      }
      ++row.used;
      sum += cell.estimate;
      bsum += cell.varbound;
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    if (row.used > 0) {
      const double U = static_cast<double>(row.used);
      const double mean = sum / U, bmean = bsum / U;
      double var = 0.0, mse = 0.0, bvar = 0.0, dev4 = 0.0, covered = 0.0;
      for (std::int64_t r = 0; r < R; ++r) {
        const Cell& cell = cells[static_cast<std::size_t>(r) * E + e];
        if (!cell.ok) continue;
        const double dev2 = (cell.estimate - mean) * (cell.estimate - mean);
        var += dev2;
        dev4 += dev2 * dev2;
        mse += (cell.estimate - truth) * (cell.estimate - truth);
        bvar += (cell.varbound - bmean) * (cell.varbound - bmean);
        const double half = zq * std::sqrt(std::max(cell.varbound, 0.0));
        const double slack = 1e-10 * (1.0 + std::abs(truth));
        if (half <= slack) ++row.zero_width;
        const bool hit = std::abs(cell.estimate - truth) <= half + slack;
        covered += hit ? 1.0 : 0.0;
        if (cfg.keep_records)
          table.records.push_back({r, row.estimator, true, cell.estimate, cell.varbound, hit});
      }
      var /= U;
      mse /= U;
      bvar /= U;
      row.bias2_xN = n * (mean - truth) * (mean - truth);
      row.variance_xN = n * var;
      row.mse_xN = n * mse;
      row.mean_bound_xN = n * bmean;
      row.coverage = covered / U;
      row.variance_se_xN = n * std::sqrt(std::max(0.0, dev4 / U - var * var) / U);
      row.bound_se_xN = n * std::sqrt(bvar / U);
    } else {
      row.bias2_xN = row.variance_xN = row.mse_xN = row.mean_bound_xN = row.coverage = nan;
    }
    try {
      const Vec zc = population_contrast_z(row.estimator, pop, ctx, c);
      row.theo_var_xN = theoretical_asy_variance(zc, m.D, n);
      row.theo_bound_xN = theoretical_asy_variance(zc, bound.Dt, n);
    } catch (const std::exception&) {
      row.theo_var_xN = row.theo_bound_xN = nan;
    }
    table.rows.push_back(row);
  }
  if (cfg.keep_records) {
    std::stable_sort(table.records.begin(), table.records.end(),
                     [](const ReplicationRecord& a, const ReplicationRecord& b) { return a.rep < b.rep; });
  }
  return table;
}

std::string MetricsTable::to_csv() const {
  std::ostringstream os;
  os << "estimator,bias2_xN,variance_xN,mse_xN,mean_bound_xN,coverage,theo_var_xN,theo_bound_xN,"
        "variance_se_xN,bound_se_xN,reps_used,reps_failed,zero_width_intervals\n";
  for (const auto& r : rows) {
    os << r.estimator << ',' << fmt15(r.bias2_xN) << ',' << fmt15(r.variance_xN) << ',' << fmt15(r.mse_xN) << ','
       << fmt15(r.mean_bound_xN) << ',' << fmt15(r.coverage) << ',' << fmt15(r.theo_var_xN) << ','
       << fmt15(r.theo_bound_xN) << ',' << fmt15(r.variance_se_xN) << ',' << fmt15(r.bound_se_xN) << ',' << r.used
       << ',' << r.failed << ',' << r.zero_width << '\n';
  }
  return os.str();
}

std::string MetricsTable::records_csv() const {
  std::ostringstream os;
  os << "rep,estimator,estimate,varbound_raw,covered\n";
  for (const auto& r : records)
    os << r.rep << ',' << r.estimator << ',' << fmt15(r.estimate) << ',' << fmt15(r.varbound_raw) << ','
       << int(r.covered) << '\n';
  return os.str();
}

std::string MetricsTable::to_text() const {
  std::ostringstream os;
  os << std::left << std::setw(26) << "";
  for (const auto& r : rows) os << std::right << std::setw(12) << r.estimator;
  os << '\n' << std::fixed << std::setprecision(2);
  auto line = [&](const char* label, auto get) {
    os << std::left << std::setw(26) << label;
    for (const auto& r : rows) os << std::right << std::setw(12) << get(r);
    os << '\n';
  };
  line("Bias^2 x N", [](const MetricsRow& r) { return r.bias2_xN; });
  line("Variance x N", [](const MetricsRow& r) { return r.variance_xN; });
  line("MSE x N", [](const MetricsRow& r) { return r.mse_xN; });
  line("Est. Var. Bound x N", [](const MetricsRow& r) { return r.mean_bound_xN; });
  line("95% Normal CI Coverage", [](const MetricsRow& r) { return r.coverage; });
  line("Theo. Asy. Var. x N", [](const MetricsRow& r) { return r.theo_var_xN; });
  line("Theo. Asy. Var. Bound x N", [](const MetricsRow& r) { return r.theo_bound_xN; });
  os << "reps=" << replications << " truth=" << std::setprecision(6) << truth << " moments=" << moments_provenance
     << '\n';
  return os.str();
}

}  // namespace dbest
