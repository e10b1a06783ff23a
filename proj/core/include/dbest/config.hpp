#pragma once

#include "dbest/bounds.hpp"
#include "dbest/design.hpp"
#include "dbest/linear.hpp"
#include "dbest/moments.hpp"
#include "dbest/simulation.hpp"

#include <string>
#include <vector>

namespace dbest {

// Design configs are JSON objects with a "type" of bernoulli, crd,
// stratified, clustered or exposure. File paths inside a config resolve
// against base_dir.
DesignSpec parse_design(const std::string& json_text, const std::string& base_dir = ".");
DesignSpec load_design(const std::string& path);

struct SimSetup {
  SimConfig config;
  std::string metrics_csv;  // empty means stdout
  std::string records_csv;
  std::string table_txt;
};

SimSetup parse_sim_config(const std::string& json_text, const std::string& base_dir = ".");
SimSetup load_sim_config(const std::string& path);

// Reads an OptimizerConfig from a JSON object; missing keys keep defaults.
OptimizerConfig parse_optimizer(const std::string& json_text);

std::string report_json(const EstimateReport& report);
std::string reports_json(const std::vector<EstimateReport>& reports);
std::string certificate_json(const BoundCertificate& cert, const VarianceBound& b);
std::string complexity_json(const std::vector<PairComplexity>& pairs, const DesignMoments& m);
std::string metrics_json(const MetricsTable& table);
std::string theta_json(const std::string& estimator, const Vec& theta);

std::string read_text_file(const std::string& path);

}  // namespace dbest
