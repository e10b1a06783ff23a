#include "test_util.hpp"

#include <dbest/config.hpp>
#include <dbest/io.hpp>
#include <dbest/network.hpp>
#include <dbest/simulation.hpp>

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

using namespace dbest;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("dbest_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string write(const std::string& name, const std::string& text) const {
    const auto p = (path / name).string();
    std::ofstream(p) << text;
    return p;
  }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

SimConfig ht_config(int n, std::int64_t reps) {
  SimConfig cfg;
  cfg.design = bernoulli_design(n, {0.5, 0.5});
  std::mt19937_64 rng(1);
  cfg.X = Mat(n, 0);
  cfg.y_full = testutil::normal_vec(rng, 2 * n);
  cfg.y_full.tail(n).array() += 1.0;
  cfg.contrast = Vec(2);
  cfg.contrast << -1, 1;
  cfg.replications = reps;
  cfg.seed = 17;
  return cfg;
}

}  // namespace

TEST_CASE("potential outcome imputation") {
  std::mt19937_64 rng(2);
  const Mat X = testutil::normal_mat(rng, 10000, 2);
  Vec beta = Vec::Zero(2);
  Vec low(2), mid(2);
  low << -1000, -1000;
  mid << 0.0, 1.0;
  const Vec y0 = impute_potential_outcomes(X, beta, low, 3);
  CHECK(y0.sum() == 0.0);
  const Vec y = impute_potential_outcomes(X, beta, mid, 3);
  CHECK(std::abs(y.head(10000).mean() - 0.5) <= 0.02);
  CHECK(std::abs(y.tail(10000).mean() - 1.0 / (1.0 + std::exp(-1.0))) <= 0.02);
  // One shock per unit is shared across arms: a higher intercept never lowers the outcome.
  CHECK((y.tail(10000).array() >= y.head(10000).array()).all());
  CHECK_THROWS_AS(impute_potential_outcomes(X, Vec::Zero(3), mid, 3), std::invalid_argument);
}

TEST_CASE("covariate preprocessing") {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  Mat raw(3, 1);
  raw << 1, nan, 3;
  const Mat X = preprocess_covariates(raw);
  CHECK(X(1, 0) == doctest::Approx(0.0));
  CHECK(X(0, 0) == doctest::Approx(-1.0));

  Mat big(50, 2);
  for (int i = 0; i < 50; ++i) {
    big(i, 0) = i == 0 ? 1000.0 : (i % 2 ? 1.0 : -1.0);
    big(i, 1) = i;
  }
  const Mat Y = preprocess_covariates(big, {{0}, 5.0});
  const double mean0 = big.col(0).mean();
  const double sd0 = std::sqrt((big.col(0).array() - mean0).square().sum() / 49);
  CHECK((big(0, 0) - mean0) / sd0 > 5.0);
  // Top-coded at 5 before centering.
  const double centered_shift = Y(1, 0) - (big(1, 0) - mean0) / sd0;
  CHECK(Y(0, 0) - centered_shift == doctest::Approx(5.0));
  CHECK(std::abs(Y.col(0).mean()) <= 1e-12);
  CHECK(std::abs(Y.col(1).mean()) <= 1e-12);

  Mat constant = Mat::Ones(4, 1);
  CHECK_THROWS_AS(preprocess_covariates(constant), std::invalid_argument);
}

TEST_CASE("HT simulation on two-arm bernoulli(0.5), n = 500") {
  const auto table = run_simulation(ht_config(500, 3000));
  REQUIRE(table.rows.size() == 1);
  const auto& r = table.rows[0];
  CHECK(r.bias2_xN < 0.05 * r.variance_xN);
  CHECK(std::abs(r.mse_xN - r.bias2_xN - r.variance_xN) <= 1e-8);
  CHECK(r.coverage >= 0.93);
  CHECK(r.coverage <= 1.0);
  CHECK(r.used == 3000);
  CHECK(r.failed == 0);
  CHECK(std::abs(r.variance_xN - r.theo_var_xN) <= 4 * r.variance_se_xN);
  CHECK(table.moments_provenance == "exact");
}

TEST_CASE("perfect linear model gives zero variance and zero-width intervals") {
  const int n = 60;
  SimConfig cfg = ht_config(n, 50);
  std::mt19937_64 rng(3);
  cfg.X = testutil::normal_mat(rng, n, 1);
  center_columns(cfg.X);
  for (int i = 0; i < n; ++i) {
    cfg.y_full(i) = 1 + 2 * cfg.X(i, 0);
    cfg.y_full(n + i) = 3 + 2 * cfg.X(i, 0);
  }
  cfg.estimators = {"LINEAR", "HT"};
  const auto table = run_simulation(cfg);
  CHECK(table.rows[0].variance_xN <= 1e-16);
  CHECK(table.rows[0].zero_width == 50);
  CHECK(table.rows[0].coverage == 1.0);
  CHECK(table.rows[1].variance_xN > 0.1);
}

TEST_CASE("single replication aggregates trivially") {
  SimConfig cfg = ht_config(20, 1);
  cfg.keep_records = true;
  const auto table = run_simulation(cfg);
  REQUIRE(table.records.size() == 1);
  const auto& rec = table.records[0];
  const auto& row = table.rows[0];
  CHECK(row.variance_xN == 0.0);
  CHECK(row.bias2_xN == doctest::Approx(20 * std::pow(rec.estimate - table.truth, 2)));
  CHECK(row.mean_bound_xN == doctest::Approx(20 * rec.varbound_raw));
  CHECK(row.coverage == (rec.covered ? 1.0 : 0.0));
}

TEST_CASE("simulation output does not depend on worker count") {
  SimConfig cfg = ht_config(40, 200);
  cfg.estimators = {"HT", "HAJEK", "WLS"};
  std::mt19937_64 rng(4);
  cfg.X = testutil::normal_mat(rng, 40, 2);
  center_columns(cfg.X);
  cfg.workers = 1;
  const auto a = run_simulation(cfg).to_csv();
  cfg.workers = 3;
  const auto b = run_simulation(cfg).to_csv();
  CHECK(a == b);
}

TEST_CASE("every estimator runs on a small crd") {
  const int n = 12;
  SimConfig cfg;
  cfg.design = crd_design({5, 7});
  std::mt19937_64 rng(5);
  cfg.X = testutil::normal_mat(rng, n, 2);
  center_columns(cfg.X);
  Vec intercepts(2);
  intercepts << -0.3, 0.4;
  Vec beta(2);
  beta << 0.8, -0.5;
  cfg.y_full = impute_potential_outcomes(cfg.X, beta, intercepts, 6);
  cfg.contrast = Vec(2);
  cfg.contrast << -1, 1;
  cfg.estimators = estimator_names();
  cfg.replications = 20;
  const auto table = run_simulation(cfg);
  REQUIRE(table.rows.size() == estimator_names().size());
  for (const auto& r : table.rows) {
    CAPTURE(r.estimator);
    CHECK(r.used + r.failed == 20);
    CHECK(r.used > 0);
    if (r.used > 0) CHECK(std::abs(r.mse_xN - r.bias2_xN - r.variance_xN) <= 1e-8);
  }
  CHECK(table.to_text().find("Bias^2 x N") != std::string::npos);
}

TEST_CASE("simulation config validation") {
  SimConfig cfg = ht_config(10, 5);
  cfg.replications = 0;
  CHECK_THROWS_AS(run_simulation(cfg), std::invalid_argument);
  cfg = ht_config(10, 5);
  cfg.contrast = Vec::Ones(3);
  CHECK_THROWS_AS(run_simulation(cfg), std::invalid_argument);
  cfg = ht_config(10, 5);
  cfg.estimators = {"NOPE"};
  CHECK_THROWS_AS(run_simulation(cfg), std::invalid_argument);
  cfg = ht_config(10, 5);
  cfg.bound = "neyman";
  CHECK_THROWS_AS(run_simulation(cfg), std::invalid_argument);
}

TEST_CASE("csv readers") {
  TempDir dir;
  const auto obs = dir.write("obs.csv", "unit_id,arm,y\n2,1,0.5\n1,2,1.5\n3,1,-2\n");
  const auto t = read_observed_csv(obs);
  CHECK(t.arm_of == std::vector<int>{1, 0, 0});
  CHECK(t.y(0) == 1.5);
  const auto cov = dir.write("cov.csv", "unit_id,x1,x2\n1,1.0,NA\n2,,3\n3,4,5\n");
  std::vector<std::string> names;
  const Mat X = read_covariates_csv(cov, &names);
  CHECK(names == std::vector<std::string>{"x1", "x2"});
  CHECK(std::isnan(X(0, 1)));
  CHECK(std::isnan(X(1, 0)));
  CHECK(X(2, 1) == 5.0);
  const auto groups = dir.write("g.csv", "unit_id,group_id\n1,a\n2,b\n3,a\n");
  CHECK(read_group_csv(groups) == std::vector<int>{0, 1, 0});
  const auto edges = dir.write("e.csv", "src_id,dst_id\n1,2\n3,1\n");
  CHECK(read_edges_csv(edges) == std::vector<std::pair<int, int>>{{0, 1}, {2, 0}});
  CHECK_THROWS(read_observed_csv(dir.write("bad.csv", "unit_id,arm,y\n1,1,0\n1,2,1\n")));
  CHECK_THROWS(read_observed_csv(dir.write("bad2.csv", "unit_id,arm,y\n1,1,abc\n")));
  CHECK_THROWS(read_observed_csv((dir.path / "missing.csv").string()));
}

TEST_CASE("design configs") {
  CHECK(parse_design(R"({"type":"crd","counts":[4,6]})").n == 10);
  const auto b = parse_design(R"({"type":"bernoulli","n":3,"probs":[0.25,0.25,0.25,0.25]})");
  CHECK(b.k == 4);
  const auto s = parse_design(R"({"type":"stratified","k":4,"groups":[1,1,1,1,1,1,1,2,2,2]})");
  CHECK(s.strata.size() == 2);
  CHECK(s.strata[0].counts == std::vector<int>{1, 2, 2, 2});
  const auto sp = parse_design(R"({"type":"stratified","k":4,"groups":[1,1,1,1,1,1,1,1,1,1],
                                   "pattern":[4,3,2,1,4,3,4,3,4,3]})");
  CHECK(sp.strata[0].counts == std::vector<int>{1, 1, 4, 4});
  const auto c = parse_design(R"({"type":"clustered","clusters":[1,1,2,2],
                                  "cluster_design":{"type":"crd","counts":[1,1]}})");
  CHECK(c.n == 4);
  const auto e = parse_design(R"({"type":"exposure","base":{"type":"bernoulli","n":4,"probs":[0.5,0.5]},
                                  "graph":{"edges":[[1,2],[2,3]]},"rules":"four"})");
  CHECK(e.k == 4);
  CHECK(e.kind == DesignKind::exposure_derived);
  const auto custom = parse_design(R"({"type":"exposure","neighbors":"undirected",
      "base":{"type":"bernoulli","n":3,"probs":[0.5,0.5]},"graph":{"random":{"min_out":1,"max_out":2,"seed":3}},
      "rules":{"base_arms":2,"exposures":[{"name":"t","own_arms":[2]},{"name":"c","own_arms":[1]}]}})");
  CHECK(custom.k == 2);
  CHECK_THROWS(parse_design(R"({"type":"nope"})"));
  CHECK_THROWS(parse_design(R"({"type":"crd"})"));
  CHECK_THROWS(parse_design("{not json"));
}

TEST_CASE("simulation config with relative paths") {
  TempDir dir;
  dir.write("cov.csv", "unit_id,x1\n1,0.5\n2,-1\n3,2\n4,NA\n");
  dir.write("design.json", R"({"type":"crd","counts":[2,2]})");
  const auto cfg_path = dir.write("sim.json", R"({
    "design_file": "design.json",
    "covariates": {"csv": "cov.csv", "topcode_columns": [1]},
    "outcomes": {"logistic": {"beta": [1.0], "intercepts": [0.0, 0.5], "seed": 2}},
    "estimators": ["HT", "LINEAR"],
    "contrast": [-1, 1],
    "replications": 7,
    "seed": 3,
    "outputs": {"metrics_csv": "out/metrics.csv", "records_csv": "records.csv"}
  })");
  const auto setup = load_sim_config(cfg_path);
  CHECK(setup.config.replications == 7);
  CHECK(setup.config.X.rows() == 4);
  CHECK(setup.config.keep_records);
  CHECK(setup.metrics_csv == (dir.path / "out/metrics.csv").string());
  CHECK(setup.config.estimators == std::vector<std::string>{"HT", "LINEAR"});
}

TEST_CASE("json serializers") {
  EstimateReport r;
  r.estimator = "HT";
  r.mu_hat = Vec::Ones(2);
  r.ci_low = -std::numeric_limits<double>::infinity();
  const auto text = report_json(r);
  CHECK(text.find("\"estimator\": \"HT\"") != std::string::npos);
  CHECK(text.find("null") != std::string::npos);
  CHECK(theta_json("LOGIT", Vec::Zero(3)).find("theta") != std::string::npos);
}
