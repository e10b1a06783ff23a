#include "checks.hpp"

#include <dbest/bounds.hpp>
#include <dbest/design.hpp>
#include <dbest/linear.hpp>
#include <dbest/moments.hpp>

#include <cmath>
#include <functional>
#include <iomanip>
#include <random>
#include <sstream>
#include <string>

namespace dbest::cli {

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;
};

void report(std::ostream& os, int& failures, const std::string& name, const std::function<Outcome()>& fn) {
  Outcome out;
  try {
    out = fn();
  } catch (const std::exception& e) {
    out = {false, std::string("exception: ") + e.what()};
  }
  if (!out.ok) ++failures;
  os << (out.ok ? "PASS " : "FAIL ") << name;
  if (!out.detail.empty()) os << "  (" << out.detail << ")";
  os << '\n';
}

std::string sci(double v) {
  std::ostringstream os;
  os << std::setprecision(3) << v;
  return os.str();
}

Outcome crd_matrix_oracle() {
  double worst = 0.0;
  for (int n = 2; n <= 8; ++n)
    for (int nt = 1; nt < n; ++nt) {
      const auto m = exact_moments(crd_design({nt, n - nt}));
      worst = std::max(worst, (m.D - crd_first_order_matrix(n, nt)).cwiseAbs().maxCoeff());
    }
  return {worst <= 1e-12, "max abs error " + sci(worst)};
}

Outcome ht_unbiased() {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal;
  double worst = 0.0;
  for (const DesignSpec& design : {crd_design({3, 5}), bernoulli_design(6, {0.5, 0.5})}) {
    const auto support = enumerate_support(design);
    const auto m = exact_moments(design);
    const int n = design.n, k = design.k;
    Vec y(n * k);
    for (auto& v : y) v = normal(rng);
    Vec expect = Vec::Zero(k);
    for (std::size_t s = 0; s < support.size(); ++s) {
      const auto d = observe(support.realizations[s], y, Mat(n, 0), m.pi);
      expect += support.probabilities[s] * estimate_linear(EstimatorKind::HT, d).mu_hat;
    }
    for (int a = 0; a < k; ++a)
      worst = std::max(worst, std::abs(expect(a) - y.segment(a * n, n).mean()));
  }
  return {worst <= 1e-12, "max abs error " + sci(worst)};
}

Outcome as_certified() {
  int failed = 0;
  for (const DesignSpec& design :
       {crd_design({2, 2}), crd_design({3, 5}), bernoulli_design(4, {0.3, 0.7}), bernoulli_design(5, {0.2, 0.3, 0.5}),
        stratified_from_groups(2, {0, 0, 0, 1, 1, 1, 1}, [](int s) { return equal_allocation_counts(s, 2); }),
        clustered_design({0, 0, 1, 1, 2, 2, 3, 3}, crd_design({2, 2}))}) {
    const auto m = exact_moments(design);
    if (!certify_bound(m, aronow_samii_bound(m)).passed()) ++failed;
  }
  return {failed == 0, std::to_string(failed) + " designs failed"};
}

Outcome exact_vs_mc() {
  const auto design = crd_design({4, 6});
  const auto ex = exact_moments(design);
  const std::int64_t reps = 200000;
  const auto mc = mc_moments(design, reps, 7);
  int outside = 0;
  for (Eigen::Index i = 0; i < ex.p.rows(); ++i)
    for (Eigen::Index j = 0; j < ex.p.cols(); ++j) {
      const double p = ex.p(i, j);
      const double se = std::sqrt(p * (1 - p) / reps) / (ex.pi(i) * ex.pi(j));
      if (std::abs(mc.D(i, j) - ex.D(i, j)) > 3 * se + 1e-12) ++outside;
    }
  // About 0.3% of entries may fall outside three standard errors by chance.
  const double frac = double(outside) / double(ex.p.size());
  return {frac <= 0.02, std::to_string(outside) + " of " + std::to_string(ex.p.size()) + " entries beyond 3 SE"};
}

Outcome neyman_spectrum() {
  const int n = 6;
  const auto cmp = compare_neyman_aronow_samii(n, n / 2);
  int zeros = 0, pos = 0;
  for (double v : cmp.projected) {
    if (std::abs(v) <= 1e-8) ++zeros;
    else if (std::abs(v - 2.0 / (n - 1)) <= 1e-8) ++pos;
  }
  return {zeros == n + 1 && pos == n - 1, std::to_string(zeros) + " zero and " + std::to_string(pos) + " positive"};
}

Outcome bernoulli_complexity() {
  const auto m = exact_moments(bernoulli_design(6, {0.5, 0.5}));
  const auto e = largest_eigenvalue(m.D);
  return {!e.infinite && std::abs(e.value - 2.0) <= 1e-8, "value " + sci(e.value)};
}

}  // namespace

int run_checks(std::ostream& os) {
  int failures = 0;
  report(os, failures, "crd design matrix matches closed form (n <= 8)", crd_matrix_oracle);
  report(os, failures, "HT unbiased over the exact support", ht_unbiased);
  report(os, failures, "Aronow-Samii bound certified on small designs", as_certified);
  report(os, failures, "exact and Monte Carlo moments agree within 3 SE", exact_vs_mc);
  report(os, failures, "Neyman minus Aronow-Samii projected spectrum", neyman_spectrum);
  report(os, failures, "two-arm Bernoulli(0.5) complexity equals 2", bernoulli_complexity);
  return failures;
}

}  // namespace dbest::cli
