#include "dbest/config.hpp"

#include "dbest/io.hpp"
#include "dbest/network.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

namespace dbest {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

namespace {

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(what + ": " + e.what());
  }
}

std::string resolve(const std::string& base_dir, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? p : (fs::path(base_dir) / path).string();
}

std::string dir_of(const std::string& path) {
  const auto parent = fs::path(path).parent_path();
  return parent.empty() ? std::string(".") : parent.string();
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

const json& require(const json& j, const char* key, const std::string& ctx) {
  if (!j.contains(key)) throw std::invalid_argument(ctx + ": missing '" + key + "'");
  return j.at(key);
}

Vec to_vec(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<int> one_based_to_zero(const std::vector<int>& v, const std::string& ctx) {
  std::vector<int> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] < 1) throw std::invalid_argument(ctx + ": labels are 1-based");
    out[i] = v[i] - 1;
  }
  return out;
}

// Group labels are relabeled densely in order of first appearance.
std::vector<int> dense_labels(const std::vector<int>& raw) {
  std::map<int, int> label;
  std::vector<int> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = label.emplace(raw[i], static_cast<int>(label.size())).first->second;
  return out;
}

std::vector<int> read_groups(const json& j, const std::string& base_dir, const char* inline_key, const char* csv_key,
                             const std::string& ctx) {
  if (j.contains(csv_key)) return read_group_csv(resolve(base_dir, j.at(csv_key).get<std::string>()));
  if (j.contains(inline_key)) return dense_labels(j.at(inline_key).get<std::vector<int>>());
  throw std::invalid_argument(ctx + ": need '" + inline_key + "' or '" + csv_key + "'");
}

NeighborMode parse_mode(const json& j) {
  const auto s = get_or<std::string>(j, "neighbors", "out");
  if (s == "out") return NeighborMode::out;
  if (s == "undirected") return NeighborMode::undirected;
  throw std::invalid_argument("exposure: neighbors must be 'out' or 'undirected'");
}

ExposureRules parse_rules(const json& j, NeighborMode mode) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "four") return four_exposure_rules(mode);
    if (s == "twelve") return twelve_exposure_rules(mode);
    throw std::invalid_argument("exposure: unknown rule set '" + s + "'");
  }
  ExposureRules rules;
  rules.mode = mode;
  rules.base_arms = require(j, "base_arms", "rules").get<int>();
  for (const auto& e : require(j, "exposures", "rules")) {
    ExposureDefinition def;
    def.name = get_or<std::string>(e, "name", "E" + std::to_string(rules.exposures.size() + 1));
    def.own_arms = one_based_to_zero(require(e, "own_arms", "exposure").get<std::vector<int>>(), "own_arms");
    if (e.contains("counts")) {
      for (const auto& c : e.at("counts")) {
        CountInterval iv;
        if (c.is_null()) {
        } else if (c.is_array() && c.size() == 2) {
          iv.lo = c[0].get<int>();
          if (!c[1].is_null()) iv.hi = c[1].get<int>();
        } else {
          throw std::invalid_argument("exposure counts must be [lo, hi] with hi possibly null");
        }
        def.counts.push_back(iv);
      }
      if (static_cast<int>(def.counts.size()) != rules.base_arms)
        throw std::invalid_argument("exposure '" + def.name + "': one count interval per base arm");
    }
    rules.exposures.push_back(std::move(def));
  }
  return rules;
}

std::shared_ptr<const InterferenceGraph> parse_graph(const json& j, int n, const std::string& base_dir) {
  if (j.contains("edges_csv"))
    return std::make_shared<InterferenceGraph>(n, read_edges_csv(resolve(base_dir, j.at("edges_csv").get<std::string>())));
  if (j.contains("edges")) {
    std::vector<std::pair<int, int>> edges;
    for (const auto& e : j.at("edges")) {
      const int s = e.at(0).get<int>(), d = e.at(1).get<int>();
      if (s < 1 || d < 1) throw std::invalid_argument("graph: unit ids are 1-based");
      edges.emplace_back(s - 1, d - 1);
    }
    return std::make_shared<InterferenceGraph>(n, edges);
  }
  if (j.contains("random")) {
    const auto& r = j.at("random");
    return std::make_shared<InterferenceGraph>(random_bounded_graph(n, get_or<int>(r, "min_out", 1),
                                                                    get_or<int>(r, "max_out", 3),
                                                                    get_or<std::uint64_t>(r, "seed", 1)));
  }
  throw std::invalid_argument("graph: need 'edges_csv', 'edges' or 'random'");
}

DesignSpec design_from_json(const json& j, const std::string& base_dir) {
  const auto type = require(j, "type", "design").get<std::string>();
  if (type == "bernoulli") {
    if (j.contains("unit_probs")) {
      const auto rows = j.at("unit_probs").get<std::vector<std::vector<double>>>();
      if (rows.empty()) throw std::invalid_argument("bernoulli: empty unit_probs");
      Mat probs(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows[0].size()) throw std::invalid_argument("bernoulli: ragged unit_probs");
        for (std::size_t a = 0; a < rows[i].size(); ++a)
          probs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(a)) = rows[i][a];
      }
      return bernoulli_design(probs);
    }
    return bernoulli_design(require(j, "n", "bernoulli").get<int>(),
                            require(j, "probs", "bernoulli").get<std::vector<double>>());
  }
  if (type == "crd") return crd_design(require(j, "counts", "crd").get<std::vector<int>>());
  if (type == "stratified") {
    const int k = require(j, "k", "stratified").get<int>();
    const auto group_of = read_groups(j, base_dir, "groups", "groups_csv", "stratified");
    if (j.contains("stratum_counts")) {
      const auto per = j.at("stratum_counts").get<std::vector<std::vector<int>>>();
      int g = 0;
      for (int v : group_of) g = std::max(g, v + 1);
      if (static_cast<int>(per.size()) != g)
        throw std::invalid_argument("stratified: stratum_counts needs one row per group");
      std::vector<Stratum> strata(g);
      for (int i = 0; i < static_cast<int>(group_of.size()); ++i) strata[group_of[i]].units.push_back(i);
      for (int s = 0; s < g; ++s) strata[s].counts = per[s];
      return stratified_design(static_cast<int>(group_of.size()), k, std::move(strata));
    }
    if (j.contains("pattern")) {
      const auto pattern = j.at("pattern").get<std::vector<int>>();
      return stratified_from_groups(k, group_of, [&](int size) { return pattern_counts(size, pattern, k); });
    }
    return stratified_from_groups(k, group_of, [k](int size) { return equal_allocation_counts(size, k); });
  }
  if (type == "clustered") {
    const auto cluster_of = read_groups(j, base_dir, "clusters", "clusters_csv", "clustered");
    return clustered_design(cluster_of, design_from_json(require(j, "cluster_design", "clustered"), base_dir));
  }
  if (type == "exposure") {
    const DesignSpec base = design_from_json(require(j, "base", "exposure"), base_dir);
    const NeighborMode mode = parse_mode(j);
    auto graph = parse_graph(require(j, "graph", "exposure"), base.n, base_dir);
    auto rules = std::make_shared<const ExposureRules>(parse_rules(require(j, "rules", "exposure"), mode));
    return derive_exposure_design(base, graph, rules);
  }
  throw std::invalid_argument("design: unknown type '" + type + "'");
}

Mat synthetic_covariates(int n, int p, std::uint64_t seed) {
  Rng rng = make_stream(seed, 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  Mat X(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) X(i, j) = normal(rng);
  center_columns(X);
  return X;
}

SlopeSharing parse_sharing(const std::string& s) {
  if (s == "same") return SlopeSharing::same;
  if (s == "separate") return SlopeSharing::separate;
  throw std::invalid_argument("sharing must be 'same' or 'separate'");
}

OptimizerConfig optimizer_from_json(const json& j) {
  OptimizerConfig o;
  o.initial_step = get_or(j, "initial_step", o.initial_step);
  o.armijo = get_or(j, "armijo", o.armijo);
  o.backtrack = get_or(j, "backtrack", o.backtrack);
  o.grad_tol = get_or(j, "grad_tol", o.grad_tol);
  o.box = get_or(j, "box", o.box);
  o.box_increment = get_or(j, "box_increment", o.box_increment);
  o.restarts = get_or(j, "restarts", o.restarts);
  o.cycles = get_or(j, "cycles", o.cycles);
  o.restart_sd = get_or(j, "restart_sd", o.restart_sd);
  o.max_iterations = get_or(j, "max_iterations", o.max_iterations);
  o.seed = get_or(j, "seed", o.seed);
  o.validate();
  return o;
}

// Non-finite values are written as null.
json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json vec_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(num(v(i)));
  return a;
}

json report_object(const EstimateReport& r) {
  return json{{"estimator", r.estimator},
              {"mu_hat", vec_json(r.mu_hat)},
              {"contrast_value", num(r.contrast_value)},
              {"varbound_raw", num(r.varbound_raw)},
              {"varbound_scaled", num(r.varbound_scaled)},
              {"ci_low", num(r.ci_low)},
              {"ci_high", num(r.ci_high)},
              {"level", r.level},
              {"diagnostics", r.diagnostics}};
}

json eigen_object(const EigenResult& e) {
  return json{{"value", e.infinite ? json("inf") : num(e.value)},
              {"converged", e.converged},
              {"matvecs", e.matvecs},
              {"warning", e.warning}};
}

}  // namespace

DesignSpec parse_design(const std::string& json_text, const std::string& base_dir) {
  return design_from_json(parse_json(json_text, "design config"), base_dir);
}

DesignSpec load_design(const std::string& path) {
  const json j = parse_json(read_text_file(path), path);
  return design_from_json(j.contains("design") ? j.at("design") : j, dir_of(path));
}

OptimizerConfig parse_optimizer(const std::string& json_text) {
  return optimizer_from_json(parse_json(json_text, "optimizer config"));
}

SimSetup parse_sim_config(const std::string& json_text, const std::string& base_dir) {
  const json j = parse_json(json_text, "simulation config");
  SimSetup setup;
  SimConfig& cfg = setup.config;
  if (j.contains("design_file")) {
    cfg.design = load_design(resolve(base_dir, j.at("design_file").get<std::string>()));
  } else {
    cfg.design = design_from_json(require(j, "design", "simulation"), base_dir);
  }
  const int n = cfg.design.n, k = cfg.design.k;

  const json cov = get_or<json>(j, "covariates", json::object());
  if (cov.contains("csv")) {
    CovariateOptions opts;
    if (cov.contains("topcode_columns"))
      opts.topcode_columns = one_based_to_zero(cov.at("topcode_columns").get<std::vector<int>>(), "topcode_columns");
    opts.topcode = get_or(cov, "topcode", opts.topcode);
    cfg.X = preprocess_covariates(read_covariates_csv(resolve(base_dir, cov.at("csv").get<std::string>())), opts);
  } else if (cov.contains("synthetic")) {
    const auto& s = cov.at("synthetic");
    cfg.X = synthetic_covariates(n, get_or(s, "p", 1), get_or<std::uint64_t>(s, "seed", 1));
  } else {
    cfg.X = Mat(n, 0);
  }

  const json& out = require(j, "outcomes", "simulation");
  if (out.contains("csv")) {
    const Mat y = read_covariates_csv(resolve(base_dir, out.at("csv").get<std::string>()));
    if (y.cols() != k || y.rows() != n) throw std::invalid_argument("outcomes csv must have one column per arm");
    if (!y.allFinite()) throw std::invalid_argument("outcomes csv has missing values");
    cfg.y_full.resize(static_cast<Eigen::Index>(n) * k);
    for (int a = 0; a < k; ++a) cfg.y_full.segment(static_cast<Eigen::Index>(a) * n, n) = y.col(a);
  } else if (out.contains("logistic")) {
    const auto& l = out.at("logistic");
    const Vec beta = l.contains("beta") ? to_vec(l.at("beta")) : Vec(Vec::Zero(cfg.X.cols()));
    cfg.y_full = impute_potential_outcomes(cfg.X, beta, to_vec(require(l, "intercepts", "logistic outcomes")),
                                           get_or<std::uint64_t>(l, "seed", 1));
  } else {
    throw std::invalid_argument("outcomes: need 'csv' or 'logistic'");
  }

  cfg.estimators = get_or(j, "estimators", cfg.estimators);
  cfg.contrast = to_vec(require(j, "contrast", "simulation"));
  cfg.replications = get_or(j, "replications", cfg.replications);
  cfg.seed = get_or(j, "seed", cfg.seed);
  cfg.bound = get_or(j, "bound", cfg.bound);
  cfg.psd_clip = get_or(j, "psd_clip", cfg.psd_clip);
  cfg.moments = get_or(j, "moments", cfg.moments);
  cfg.mc_reps = get_or(j, "mc_reps", cfg.mc_reps);
  cfg.mc_seed = get_or(j, "mc_seed", cfg.mc_seed);
  cfg.omega = get_or(j, "omega", cfg.omega);
  cfg.sharing = parse_sharing(get_or<std::string>(j, "sharing", "same"));
  if (j.contains("optimizer")) cfg.optimizer = optimizer_from_json(j.at("optimizer"));
  cfg.level = get_or(j, "level", cfg.level);
  cfg.workers = get_or(j, "workers", cfg.workers);
  cfg.keep_records = j.contains("outputs") && j.at("outputs").contains("records_csv");
  if (j.contains("outputs")) {
    const auto& o = j.at("outputs");
    if (o.contains("metrics_csv")) setup.metrics_csv = resolve(base_dir, o.at("metrics_csv").get<std::string>());
    if (o.contains("records_csv")) setup.records_csv = resolve(base_dir, o.at("records_csv").get<std::string>());
    if (o.contains("table_txt")) setup.table_txt = resolve(base_dir, o.at("table_txt").get<std::string>());
  }
  cfg.validate();
  return setup;
}

SimSetup load_sim_config(const std::string& path) { return parse_sim_config(read_text_file(path), dir_of(path)); }

std::string report_json(const EstimateReport& report) { return report_object(report).dump(2); }

std::string reports_json(const std::vector<EstimateReport>& reports) {
  json a = json::array();
  for (const auto& r : reports) a.push_back(report_object(r));
  return a.dump(2);
}

std::string certificate_json(const BoundCertificate& cert, const VarianceBound& b) {
  return json{{"bound", b.kind},
              {"psd_clipped", b.psd_clipped},
              {"min_eigenvalue", num(cert.min_eigenvalue)},
              {"psd", cert.psd},
              {"mask_violations", cert.mask_violations},
              {"identified", cert.identified},
              {"passed", cert.passed()}}
      .dump(2);
}

std::string complexity_json(const std::vector<PairComplexity>& pairs, const DesignMoments& m) {
  json a = json::array();
  for (const auto& p : pairs)
    a.push_back(json{{"arm_a", p.arm_a + 1},
                     {"arm_b", p.arm_b + 1},
                     {"norm", eigen_object(p.full)},
                     {"norm_zero_diag", eigen_object(p.zero_diag)}});
  return json{{"n", m.n},
              {"k", m.k},
              {"moments", m.method == MomentMethod::exact ? "exact" : "monte_carlo"},
              {"reps", m.reps},
              {"pairs", a}}
      .dump(2);
}

std::string metrics_json(const MetricsTable& table) {
  json rows = json::array();
  for (const auto& r : table.rows)
    rows.push_back(json{{"estimator", r.estimator},
                        {"bias2_xN", num(r.bias2_xN)},
                        {"variance_xN", num(r.variance_xN)},
                        {"mse_xN", num(r.mse_xN)},
                        {"mean_bound_xN", num(r.mean_bound_xN)},
                        {"coverage", num(r.coverage)},
                        {"theo_var_xN", num(r.theo_var_xN)},
                        {"theo_bound_xN", num(r.theo_bound_xN)},
                        {"variance_se_xN", num(r.variance_se_xN)},
                        {"bound_se_xN", num(r.bound_se_xN)},
                        {"reps_used", r.used},
                        {"reps_failed", r.failed},
                        {"zero_width_intervals", r.zero_width}});
  return json{{"replications", table.replications},
              {"truth", num(table.truth)},
              {"n", table.n},
              {"moments", table.moments_provenance},
              {"rows", rows}}
      .dump(2);
}

std::string theta_json(const std::string& estimator, const Vec& theta) {
  return json{{"estimator", estimator}, {"theta", vec_json(theta)}}.dump(2);
}

}  // namespace dbest
