#pragma once

#include "dbest/bounds.hpp"
#include "dbest/common.hpp"
#include "dbest/design.hpp"

#include <optional>
#include <string>
#include <vector>

namespace dbest {

struct ExperimentData {
  int n = 0;
  int k = 0;
  std::vector<int> arm_of;  // observed arm per unit
  Vec y_obs;                // n
  Mat X;                    // n x p, centered columns
  Vec pi;                   // kn
  std::optional<Vec> y_full;  // kn stacked potential outcomes, simulation only

  int p() const { return static_cast<int>(X.cols()); }
  Eigen::Index kn() const { return static_cast<Eigen::Index>(n) * k; }
  Vec r() const;             // kn indicator
  Vec y_stacked() const;     // kn, observed outcome at observed rows, 0 elsewhere
  Mat x_aug() const;         // kn x (k+p): arm intercepts then shared X
};

ExperimentData make_data(const AssignmentRealization& z, const Vec& y_obs, const Mat& X, const Vec& pi);
// Observes y_full under z and keeps y_full for simulation-mode quantities.
ExperimentData observe(const AssignmentRealization& z, const Vec& y_full, const Mat& X, const Vec& pi);

// Centers columns in place; returns the removed means.
Vec center_columns(Mat& X);

enum class EstimatorKind { HT, Hajek, OLS, WLS, MI, GR };
enum class WeightChoice { identity, inverse_probability };

const char* to_string(EstimatorKind kind);
Vec weight_vector(const ExperimentData& d, WeightChoice m);

struct LinearFit {
  EstimatorKind kind = EstimatorKind::HT;
  WeightChoice m = WeightChoice::identity;
  Vec mu_hat;                 // k
  std::optional<Vec> b_hat;   // k+p
  Mat z_hat;                  // kn x k plug-in linearization
  bool rank_deficient = false;
};

// OLS is WLS with identity weights; the WLS arm estimates are the completely
// imputed estimates 1'x b / n.
LinearFit estimate_linear(EstimatorKind kind, const ExperimentData& d, WeightChoice m = WeightChoice::inverse_probability);

// Linearization matrix. With population = true, uses y_full and the design
// probabilities in place of the realized assignment (theoretical quantities);
// otherwise the plug-in version from the fit.
Mat z_vector(EstimatorKind kind, const ExperimentData& d, WeightChoice m, bool population,
             const LinearFit* fit = nullptr);

// Population regression coefficients (x'm pi x)^+ x'm pi y.
Vec population_coefficients(const ExperimentData& d, WeightChoice m);

struct VarianceEstimate {
  double raw = 0.0;     // estimate of (1/n^2)(zc)'Dt(zc)
  double scaled = 0.0;  // raw * n
  bool negative = false;
};

VarianceEstimate plugin_varbound(const Mat& z_hat, const Vec& r, const VarianceBound& b, const Vec& c);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

Interval normal_ci(double value, double varbound_raw, double level = 0.95);
double normal_quantile(double level);

struct EstimateReport {
  std::string estimator;
  Vec mu_hat;
  double contrast_value = 0.0;
  double varbound_raw = 0.0;
  double varbound_scaled = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double level = 0.95;
  std::vector<std::string> diagnostics;
};

EstimateReport make_report(const std::string& name, const Vec& mu_hat, const Mat& z_hat, const ExperimentData& d,
                           const VarianceBound& b, const Vec& c, double level = 0.95);

struct InterpretationReport {
  bool ci_condition = false;
  bool mi_condition = false;
  double ci_residual = 0.0;
  double mi_residual = 0.0;
};

// Whether the columns of m^-1 pi^-1 1 (CI) and m^-1 (1 - pi^-1) 1 (MI) lie in col(x).
InterpretationReport check_interpretation(const ExperimentData& d, WeightChoice m, double tol = 1e-8);

}  // namespace dbest
