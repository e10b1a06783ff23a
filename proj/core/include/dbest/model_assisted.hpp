#pragma once

#include "dbest/bounds.hpp"
#include "dbest/common.hpp"
#include "dbest/linear.hpp"

#include <string>
#include <vector>

namespace dbest {

enum class Family { linear, logistic };
enum class SlopeSharing { same, separate };

// Parameters: arm intercepts, then slopes (one block shared by all arms, or
// one block per arm).
struct ImputationModel {
  Family family = Family::linear;
  SlopeSharing sharing = SlopeSharing::same;
  int k = 2;
  int p = 0;

  int param_count() const { return sharing == SlopeSharing::same ? k + p : k + k * p; }
  Mat features(const Mat& X) const;                          // kn x s
  Vec predict(const Mat& X, const Vec& theta) const;         // kn
  Mat gradient(const Mat& X, const Vec& theta) const;        // kn x s, d f / d theta
};

struct QmleFit {
  Vec theta;
  int iterations = 0;
  bool converged = true;
  bool separation_warning = false;
  std::string message;
};

constexpr int kQmleMaxIterations = 500;

// Minimizes sum_{ai} w_ai * loss(y_ai, f_ai(theta)), squared loss for linear
// and negative Bernoulli log-likelihood for logistic. Rows with w = 0 are ignored.
QmleFit fit_weighted(const ImputationModel& model, const Mat& X, const Vec& y, const Vec& w);

struct ObjectiveValue {
  double value = 0.0;
  Vec gradient;
};

// The weighted loss and its gradient in theta.
ObjectiveValue qmle_objective(const ImputationModel& model, const Mat& X, const Vec& y, const Vec& w, const Vec& theta);

// Sample criterion with weights (R / pi) * omega.
QmleFit fit_qmle(const ImputationModel& model, const ExperimentData& d, const Vec& omega);
// Population criterion on full y with weights omega.
QmleFit fit_qmle_population(const ImputationModel& model, const ExperimentData& d, const Vec& omega);

// GR estimate from imputations f (kn); plug-in z = diag(y - f) 1.
EstimateReport gr_report(const std::string& name, const Vec& f, const ExperimentData& d, const VarianceBound& b,
                         const Vec& c, double level = 0.95);
Vec gr_arm_means(const Vec& f, const ExperimentData& d);

EstimateReport qmle_gr(const ImputationModel& model, const Vec& theta, const ExperimentData& d, const VarianceBound& b,
                       const Vec& c, double level = 0.95);

constexpr double kNoHarmDenominatorFloor = 1e-6;

double no_harm_alpha(const Vec& f, const ExperimentData& d, const Mat& D, const Vec& c);
double population_no_harm_alpha(const Vec& f, const Vec& y_full, const Mat& D, const Vec& c, int n);

struct OptLinearResult {
  Vec theta;
  Vec eigenvalues;            // of x~' Omega x~ / n
  bool weak_identification = false;
};

// Closed-form minimizer of the estimated asymptotic variance over linear
// imputations. u is the contrast-side outcome: diag(c'1') pi^-1 R y for the
// feasible version, diag(c'1') y for the population version.
OptLinearResult opt_linear_coefficients(const Mat& x, const Mat& omega, const Vec& c, const Vec& u, int n);
OptLinearResult opt_gr_linear(const ImputationModel& model, const ExperimentData& d, const Mat& omega, const Vec& c);
OptLinearResult population_opt_gr_linear(const ImputationModel& model, const ExperimentData& d, const Mat& omega,
                                         const Vec& c);

struct OptimizerConfig {
  double initial_step = 1.0;
  double armijo = 0.1;
  double backtrack = 0.5;
  double grad_tol = 0.01;
  double box = 10.0;
  double box_increment = 0.2;
  int restarts = 4;
  int cycles = 5;
  double restart_sd = 0.1;
  int max_iterations = 20000;
  std::uint64_t seed = 1;

  void validate() const;
};

// Moment vector g(theta) = (1/n) [diag(c'1') grad f]' Omega (u - diag(c'1') f).
struct MomentEvaluation {
  Vec g;       // s
  Mat jacobian;  // s x s
};
MomentEvaluation opt_moments(const ImputationModel& model, const Mat& X, const Vec& theta, const Mat& omega,
                             const Vec& c, const Vec& u, int n, bool with_jacobian = true);

struct OptLogitResult {
  Vec theta;
  double criterion = 0.0;
  double gradient_norm = 0.0;
  double moment_norm = 0.0;
  double hessian_min_eigenvalue = 0.0;
  int restart_index = -1;
  int cycles_used = 0;
};

// g'g and its gradient 2 J'g.
ObjectiveValue opt_criterion(const ImputationModel& model, const Mat& X, const Vec& theta, const Mat& omega,
                             const Vec& c, const Vec& u, int n);

// Gradient descent with backtracking on g'g, random restarts around start,
// and a parameter box that widens each cycle.
OptLogitResult minimize_opt_criterion(const ImputationModel& model, const Mat& X, const Mat& omega, const Vec& c,
                                      const Vec& u, int n, const Vec& start, const OptimizerConfig& cfg);
OptLogitResult opt_gr_logit(const ImputationModel& model, const ExperimentData& d, const Mat& omega, const Vec& c,
                            const Vec& start, const OptimizerConfig& cfg);

struct OptIResult {
  Vec beta;  // k intercepts then the slope on the imputed outcome
  Vec imputations;
  Vec eigenvalues;
  bool weak_identification = false;
};

OptIResult opt_i_coefficients(const Vec& f, const Mat& D, const Vec& c, const Vec& u, int n, int k);
OptIResult opt_i_gr(const Vec& f, const ExperimentData& d, const Mat& D, const Vec& c);
OptIResult population_opt_i(const Vec& f, const ExperimentData& d, const Mat& D, const Vec& c);

// diag(c'1') v for a stacked kn vector.
Vec contrast_weight(const Vec& v, const Vec& c, int n);

// (1/n) (zc)' M (zc); equals n times the asymptotic variance of the contrast.
double theoretical_asy_variance(const Vec& zc, const Mat& M, int n);
// Residual form with z = diag(y - f) 1.
double theoretical_asy_variance(const Vec& f, const Vec& y_full, const Mat& M, const Vec& c, int n);

}  // namespace dbest
