#pragma once

#include "dbest/bounds.hpp"
#include "dbest/common.hpp"
#include "dbest/design.hpp"
#include "dbest/linear.hpp"
#include "dbest/model_assisted.hpp"
#include "dbest/moments.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dbest {

// Binary outcomes y_ai = 1{intercept_a + x_i' beta > eps_i} with one fixed
// logistic shock per unit drawn from seed.
Vec impute_potential_outcomes(const Mat& X, const Vec& beta, const Vec& intercepts, std::uint64_t seed);

struct CovariateOptions {
  std::vector<int> topcode_columns;
  double topcode = 5.0;
};

// NaN marks a missing value. Mean-impute, standardize, top-code, center.
Mat preprocess_covariates(const Mat& raw, const CovariateOptions& options = {});

// Estimator names understood by run_estimator.
const std::vector<std::string>& estimator_names();

struct EstimationContext {
  const DesignMoments* moments = nullptr;
  const VarianceBound* bound = nullptr;
  const Mat* omega = nullptr;  // defaults to moments->D
  SlopeSharing sharing = SlopeSharing::same;
  OptimizerConfig optimizer;
  double level = 0.95;
};

EstimateReport run_estimator(const std::string& name, const ExperimentData& d, const EstimationContext& ctx,
                             const Vec& c);

// Population linearization of the named estimator, contrast-weighted (kn).
Vec population_contrast_z(const std::string& name, const ExperimentData& d, const EstimationContext& ctx,
                          const Vec& c);

struct SimConfig {
  DesignSpec design;
  Mat X;
  Vec y_full;
  std::vector<std::string> estimators{"HT"};
  Vec contrast;
  std::int64_t replications = 1000;
  std::uint64_t seed = 1;
  std::string bound = "aronow_samii";  // or "neyman" for two-arm CRD
  bool psd_clip = false;
  std::string moments = "exact";       // or "mc", "auto"
  std::int64_t mc_reps = kDefaultMonteCarloReps;
  std::uint64_t mc_seed = 1;
  std::string omega = "D";             // or "bound"
  SlopeSharing sharing = SlopeSharing::same;
  OptimizerConfig optimizer;
  double level = 0.95;
  int workers = 1;
  bool keep_records = false;

  void validate() const;
};

struct MetricsRow {
  std::string estimator;
  double bias2_xN = 0.0;
  double variance_xN = 0.0;
  double mse_xN = 0.0;
  double mean_bound_xN = 0.0;
  double coverage = 0.0;
  double theo_var_xN = 0.0;
  double theo_bound_xN = 0.0;
  double variance_se_xN = 0.0;
  double bound_se_xN = 0.0;
  std::int64_t used = 0;
  std::int64_t failed = 0;
  std::int64_t zero_width = 0;  // replications whose interval width was numerically zero
};

struct ReplicationRecord {
  std::int64_t rep = 0;
  std::string estimator;
  bool ok = false;
  double estimate = 0.0;
  double varbound_raw = 0.0;
  bool covered = false;
};

struct MetricsTable {
  std::vector<MetricsRow> rows;
  std::vector<ReplicationRecord> records;
  std::int64_t replications = 0;
  double truth = 0.0;
  int n = 0;
  std::string moments_provenance;

  std::string to_csv() const;
  std::string records_csv() const;
  // Two-decimal display table.
  std::string to_text() const;
};

DesignMoments compute_moments(const DesignSpec& design, const std::string& method, std::int64_t mc_reps,
                              std::uint64_t mc_seed, int workers);

VarianceBound make_bound(const DesignSpec& design, const DesignMoments& m, const std::string& kind, bool clip);

MetricsTable run_simulation(const SimConfig& cfg, const DesignMoments* moments = nullptr);

}  // namespace dbest
