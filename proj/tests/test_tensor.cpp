#include "test_util.hpp"

#include <dbest/bounds.hpp>
#include <dbest/moments.hpp>
#include <dbest/tensor.hpp>

#include <doctest.h>

#include <sstream>

using namespace dbest;

namespace {

Tensor4 random_tensor(std::mt19937_64& rng, int dim) {
  std::normal_distribution<double> normal;
  Tensor4 t(dim);
  for (auto& v : t.data()) v = normal(rng);
  return t;
}

}  // namespace

TEST_CASE("degenerate design has a zero tensor") {
  const Tensor4 s = second_order_tensor(bernoulli_design(1, {1.0, 0.0}));
  for (double v : s.data()) CHECK(v == 0.0);
}

TEST_CASE("second-order tensor symmetries") {
  const Tensor4 s = second_order_tensor(crd_design({2, 2}));
  const int m = s.dim();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      for (int k = 0; k < m; ++k)
        for (int l = 0; l < m; ++l) {
          const double v = s(i, j, k, l);
          CHECK(s(j, i, k, l) == v);
          CHECK(s(i, j, l, k) == v);
          CHECK(s(k, l, i, j) == v);
        }
}

TEST_CASE("neyman-weighted tensor matches the closed form for i=j=k=l") {
  const int n = 4, nt = 2, nc = 2;
  const Tensor4 s = second_order_tensor(crd_design({nt, nc}));
  const Tensor4 q = weighted_tensor(s, neyman_bound_crd(n, nt).Dt);
  const double expected = double(n * n * nc) / (nt * nt * nt);
  CHECK(expected == doctest::Approx(4.0));
  for (int i = 0; i < n; ++i) CHECK(q(i, i, i, i) == doctest::Approx(expected).epsilon(1e-12));
  // Cross-arm entry from the same table: COV(R1i R1i, R0i R0i) weighting.
  CHECK(q(0, 0, n, n) == doctest::Approx(-double(n * n) / (nt * nc)).epsilon(1e-12));
}

TEST_CASE("slice-sum bound") {
  CHECK(tensor_slice_norm_bound(Tensor4(3)) == 0.0);
  Tensor4 t(3);
  t(0, 0, 0, 0) = 5;
  CHECK(tensor_slice_norm_bound(t) == 5.0);
  CHECK(tensor_sigma_max_oracle(t) == doctest::Approx(5.0).epsilon(1e-12));
  std::mt19937_64 rng(3);
  for (int r = 0; r < 10; ++r) {
    const Tensor4 x = random_tensor(rng, 3);
    CHECK(tensor_sigma_max_oracle(x) <= tensor_slice_norm_bound(x) + 1e-12);
  }
}

TEST_CASE("sigma max oracle") {
  CHECK(tensor_sigma_max_oracle(Tensor4(3)) == 0.0);
  Tensor4 id(3);
  for (int i = 0; i < 3; ++i) id(i, i, i, i) = 1.0;
  CHECK(tensor_sigma_max_oracle(id) == doctest::Approx(1.0).epsilon(1e-10));

  // Rank-one tensor with a coordinate vector attains 1.
  Tensor4 e1(3);
  e1(0, 0, 0, 0) = 1.0;
  CHECK(tensor_sigma_max_oracle(e1) == doctest::Approx(1.0).epsilon(1e-12));

  // General rank-one w(x)w(x)w(x)w with ||w||_4 = 1: the optimum is ||w||_{4/3}^4.
  Vec w(3);
  w << 1.0, 1.0, 1.0;
  w /= std::pow(w.array().pow(4).sum(), 0.25);
  Tensor4 r1(3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l) r1(i, j, k, l) = w(i) * w(j) * w(k) * w(l);
  const double norm43 = std::pow(w.array().abs().pow(4.0 / 3.0).sum(), 0.75);
  CHECK(tensor_sigma_max_oracle(r1) == doctest::Approx(std::pow(norm43, 4)).epsilon(1e-8));
  CHECK_THROWS_AS(tensor_sigma_max_oracle(Tensor4(5)), std::invalid_argument);
}

TEST_CASE("tensor cap and export") {
  CHECK_THROWS_AS(second_order_tensor(bernoulli_design(40, {0.5, 0.5})), SupportTooLarge);
  std::ostringstream os;
  write_tensor_csv(os, second_order_tensor(crd_design({1, 1})));
  CHECK(os.str().rfind("i,j,k,l,value", 0) == 0);
}
