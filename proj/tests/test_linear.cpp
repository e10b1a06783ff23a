#include "test_util.hpp"

#include <dbest/bounds.hpp>
#include <dbest/linear.hpp>
#include <dbest/moments.hpp>

#include <doctest.h>

using namespace dbest;
using testutil::max_abs;

namespace {

AssignmentRealization realization(int k, std::vector<int> arm_of) {
  return {static_cast<int>(arm_of.size()), k, std::move(arm_of)};
}

}  // namespace

TEST_CASE("HT on crd(2,[1,1]) by hand") {
  const auto m = exact_moments(crd_design({1, 1}));
  Vec y(4);
  y << 0, 2, 2, 4;
  const auto d1 = observe(realization(2, {1, 0}), y, Mat(), m.pi);
  const auto f1 = estimate_linear(EstimatorKind::HT, d1);
  CHECK(f1.mu_hat(0) == doctest::Approx(2.0));
  CHECK(f1.mu_hat(1) == doctest::Approx(2.0));
  const auto d2 = observe(realization(2, {0, 1}), y, Mat(), m.pi);
  const Vec avg = 0.5 * (f1.mu_hat + estimate_linear(EstimatorKind::HT, d2).mu_hat);
  CHECK(avg(0) == doctest::Approx(1.0));
  CHECK(avg(1) == doctest::Approx(3.0));
}

TEST_CASE("Hajek with equal probabilities is the sample mean") {
  const auto m = exact_moments(crd_design({3, 2}));
  Vec y(10);
  y << 1, 2, 3, 4, 5, 6, 7, 8, 9, 10;
  const auto d = observe(realization(2, {0, 1, 0, 1, 0}), y, Mat(), m.pi);
  const auto f = estimate_linear(EstimatorKind::Hajek, d);
  CHECK(f.mu_hat(0) == doctest::Approx((1 + 3 + 5) / 3.0));
  CHECK(f.mu_hat(1) == doctest::Approx((7 + 9) / 2.0));
}

TEST_CASE("WLS with inverse-probability weights equals GR") {
  std::mt19937_64 rng(21);
  Mat probs(12, 3);
  std::uniform_real_distribution<double> u(0.2, 1.0);
  for (int i = 0; i < 12; ++i) {
    for (int a = 0; a < 3; ++a) probs(i, a) = u(rng);
    probs.row(i) /= probs.row(i).sum();
  }
  const auto design = bernoulli_design(probs);
  const auto m = exact_moments(design);
  for (int t = 0; t < 20; ++t) {
    Rng r = make_stream(5, t);
    const auto z = sample_assignment(design, r);
    Mat X = testutil::normal_mat(rng, 12, 2);
    center_columns(X);
    const auto d = observe(z, testutil::normal_vec(rng, 36), X, m.pi);
    const auto wls = estimate_linear(EstimatorKind::WLS, d, WeightChoice::inverse_probability);
    const auto gr = estimate_linear(EstimatorKind::GR, d, WeightChoice::inverse_probability);
    CHECK(max_abs(wls.mu_hat - gr.mu_hat) <= 1e-10);
  }
}

TEST_CASE("linearization vanishes in degenerate cases") {
  const auto m = exact_moments(crd_design({3, 3}));
  const auto z = realization(2, {0, 1, 0, 1, 1, 0});
  auto d = observe(z, Vec::Zero(12), Mat(), m.pi);
  CHECK(max_abs(estimate_linear(EstimatorKind::HT, d).z_hat) == 0.0);
  CHECK(max_abs(z_vector(EstimatorKind::HT, d, WeightChoice::identity, true)) == 0.0);

  Vec y(12);
  y << 1, 1, 1, 1, 1, 1, 5, 5, 5, 5, 5, 5;
  d = observe(z, y, Mat(), m.pi);
  CHECK(max_abs(estimate_linear(EstimatorKind::Hajek, d).z_hat) <= 1e-12);
  CHECK(max_abs(z_vector(EstimatorKind::Hajek, d, WeightChoice::identity, true)) <= 1e-12);

  Mat X(6, 1);
  X << -2.5, -1.5, -0.5, 0.5, 1.5, 2.5;
  Vec yl(12);
  for (int i = 0; i < 6; ++i) {
    yl(i) = 1 + 2 * X(i, 0);
    yl(6 + i) = -1 + 2 * X(i, 0);
  }
  d = observe(z, yl, X, m.pi);
  for (auto kind : {EstimatorKind::GR, EstimatorKind::WLS, EstimatorKind::OLS, EstimatorKind::MI}) {
    const auto f = estimate_linear(kind, d);
    CHECK(max_abs(f.z_hat) <= 1e-10);
    CHECK(max_abs(z_vector(kind, d, WeightChoice::inverse_probability, true)) <= 1e-10);
    CHECK(f.mu_hat(0) == doctest::Approx(1.0));
    CHECK(f.mu_hat(1) == doctest::Approx(-1.0));
  }
}

TEST_CASE("population linearization predicts the estimator error") {
  const int n = 3000;
  const auto design = bernoulli_design(n, {0.3, 0.7});
  const auto m = exact_moments(design);
  std::mt19937_64 rng(9);
  Mat X = testutil::normal_mat(rng, n, 2);
  center_columns(X);
  Vec y(2 * n);
  const Vec noise = testutil::normal_vec(rng, 2 * n);
  for (int i = 0; i < n; ++i) {
    y(i) = 1 + X(i, 0) + 0.5 * X(i, 0) * X(i, 0) + noise(i);
    y(n + i) = 2 - X(i, 1) + std::sin(X(i, 0)) + noise(n + i);
  }
  Vec mu(2);
  mu << y.head(n).mean(), y.tail(n).mean();
  for (auto kind : {EstimatorKind::Hajek, EstimatorKind::OLS, EstimatorKind::WLS, EstimatorKind::MI}) {
    double rem2 = 0.0, lin2 = 0.0;
    for (int t = 0; t < 20; ++t) {
      Rng r = make_stream(4, t);
      const auto d = observe(sample_assignment(design, r), y, X, m.pi);
      const auto fit = estimate_linear(kind, d, WeightChoice::inverse_probability);
      const Mat zp = z_vector(kind, d, WeightChoice::inverse_probability, true);
      const Vec w = d.r().cwiseQuotient(d.pi) - Vec::Ones(2 * n);
      const Vec lin = zp.transpose() * w / n;
      rem2 += (fit.mu_hat - mu - lin).squaredNorm();
      lin2 += lin.squaredNorm();
    }
    CAPTURE(to_string(kind));
    CHECK(std::sqrt(rem2 / lin2) < 0.1);
  }
}

TEST_CASE("plug-in variance bound on two-arm bernoulli(0.5), n = 2") {
  const auto m = exact_moments(bernoulli_design(2, {0.5, 0.5}));
  const auto b = aronow_samii_bound(m);
  Mat z = Mat::Zero(4, 2);
  z.col(0) << 0, -2, 2, 4;
  Vec c(2);
  c << 1, 0;
  const auto support = enumerate_support(bernoulli_design(2, {0.5, 0.5}));
  std::vector<double> values;
  double mean = 0.0;
  for (std::size_t s = 0; s < support.size(); ++s) {
    const auto v = plugin_varbound(z, support.realizations[s].indicator(), b, c);
    values.push_back(v.raw);
    mean += support.probabilities[s] * v.raw;
  }
  std::sort(values.begin(), values.end());
  CHECK(values == std::vector<double>{4, 8, 16, 20});
  CHECK(mean == doctest::Approx(12.0).epsilon(1e-12));
  const Vec zc = z * c;
  CHECK(mean == doctest::Approx(zc.dot(b.Dt * zc) / 4));
  CHECK(plugin_varbound(Mat::Zero(4, 2), support.realizations[0].indicator(), b, c).raw == 0.0);
}

TEST_CASE("plug-in bound is unbiased for HT under the neyman bound") {
  const int n = 4;
  const auto design = crd_design({2, 2});
  const auto m = exact_moments(design);
  const auto b = neyman_bound_crd(n, 2);
  std::mt19937_64 rng(4);
  const Vec y = testutil::normal_vec(rng, 2 * n);
  Vec c(2);
  c << -1, 1;
  const auto support = enumerate_support(design);
  double mean = 0.0;
  for (std::size_t s = 0; s < support.size(); ++s) {
    const auto d = observe(support.realizations[s], y, Mat(), m.pi);
    mean += support.probabilities[s] * plugin_varbound(estimate_linear(EstimatorKind::HT, d).z_hat, d.r(), b, c).raw;
  }
  Mat zfull = Mat::Zero(2 * n, 2);
  zfull.block(0, 0, n, 1) = y.head(n);
  zfull.block(n, 1, n, 1) = y.tail(n);
  const Vec zc = zfull * c;
  CHECK(std::abs(mean - zc.dot(b.Dt * zc) / (n * n)) <= 1e-10);
}

TEST_CASE("normal intervals") {
  const auto ci = normal_ci(2.0, 1.0, 0.95);
  CHECK(ci.lo == doctest::Approx(0.040036).epsilon(1e-5));
  CHECK(ci.hi == doctest::Approx(3.959964).epsilon(1e-6));
  const auto zero = normal_ci(0.0, 0.0);
  CHECK(zero.lo == 0.0);
  CHECK(zero.hi == 0.0);
  CHECK(normal_quantile(0.95) == doctest::Approx(1.959963985).epsilon(1e-9));
  CHECK_THROWS_AS(normal_ci(0.0, -1.0), std::invalid_argument);
}

TEST_CASE("interpretation conditions") {
  Mat probs(4, 2);
  probs << 0.2, 0.8, 0.5, 0.5, 0.7, 0.3, 0.4, 0.6;
  const auto unequal = exact_moments(bernoulli_design(probs));
  Mat X(4, 1);
  X << 1, -1, 0.5, -0.5;
  const auto d = make_data(realization(2, {0, 1, 0, 1}), Vec::Ones(4), X, unequal.pi);
  CHECK(check_interpretation(d, WeightChoice::inverse_probability).ci_condition);
  CHECK(!check_interpretation(d, WeightChoice::identity).ci_condition);
  const auto equal = exact_moments(bernoulli_design(4, {0.5, 0.5}));
  const auto de = make_data(realization(2, {0, 1, 0, 1}), Vec::Ones(4), X, equal.pi);
  CHECK(check_interpretation(de, WeightChoice::identity).ci_condition);
  CHECK(check_interpretation(de, WeightChoice::identity).mi_condition);
}

TEST_CASE("observed zero-probability cell is rejected") {
  Mat probs(2, 2);
  probs << 1.0, 0.0, 0.5, 0.5;
  const auto m = exact_moments(bernoulli_design(probs));
  CHECK_THROWS_AS(make_data(realization(2, {1, 0}), Vec::Ones(2), Mat(), m.pi), std::invalid_argument);
}
