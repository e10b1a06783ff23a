#include "dbest/tensor.hpp"

#include <array>
#include <cmath>
#include <iomanip>
#include <ostream>

namespace dbest {

Tensor4 second_order_tensor(const DesignSpec& design, int cap) {
  const int n = design.n;
  const int kn = n * design.k;
  if (kn > cap) throw SupportTooLarge("tensor dimension " + std::to_string(kn) + " exceeds cap " + std::to_string(cap));
  const auto support = enumerate_support(design, kDefaultEnumerationCap);
  Tensor4 e4(kn);
  Mat p = Mat::Zero(kn, kn);
  std::vector<int> act(n);
  for (std::size_t s = 0; s < support.size(); ++s) {
    const double w = support.probabilities[s];
    for (int i = 0; i < n; ++i) act[i] = support.realizations[s].arm_of[i] * n + i;
    for (int a : act)
      for (int b : act) {
        p(a, b) += w;
        for (int c : act)
          for (int d : act) e4(a, b, c, d) += w;
      }
  }
  Tensor4 out(kn);
  for (int a = 0; a < kn; ++a)
    for (int b = 0; b < kn; ++b) {
      if (p(a, b) == 0.0) continue;
      for (int c = 0; c < kn; ++c)
        for (int d = 0; d < kn; ++d) {
          const double den = p(a, b) * p(c, d);
          if (den != 0.0) out(a, b, c, d) = (e4(a, b, c, d) - den) / den;
        }
    }
  return out;
}

Tensor4 weighted_tensor(const Tensor4& s, const Mat& dt) {
  const int m = s.dim();
  if (dt.rows() != m || dt.cols() != m) throw std::invalid_argument("weighted_tensor: dimension mismatch");
  Tensor4 out(m);
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b)
      for (int c = 0; c < m; ++c)
        for (int d = 0; d < m; ++d) out(a, b, c, d) = dt(a, b) * dt(c, d) * s(a, b, c, d);
  return out;
}

double tensor_slice_norm_bound(const Tensor4& t) {
  const int m = t.dim();
  std::array<std::vector<double>, 4> sums;
  for (auto& s : sums) s.assign(m, 0.0);
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b)
      for (int c = 0; c < m; ++c)
        for (int d = 0; d < m; ++d) {
          const double v = std::abs(t(a, b, c, d));
          sums[0][a] += v;
          sums[1][b] += v;
          sums[2][c] += v;
          sums[3][d] += v;
        }
  double best = 0.0;
  for (const auto& s : sums)
    for (double v : s) best = std::max(best, v);
  return best;
}

namespace {

// Contract t with three of the four vectors, leaving mode `free` open.
Vec contract(const Tensor4& t, const std::array<Vec, 4>& v, int free) {
  const int m = t.dim();
  Vec g = Vec::Zero(m);
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b)
      for (int c = 0; c < m; ++c)
        for (int d = 0; d < m; ++d) {
          const int idx[4] = {a, b, c, d};
          double w = t(a, b, c, d);
          for (int q = 0; q < 4; ++q)
            if (q != free) w *= v[q](idx[q]);
          g(idx[free]) += w;
        }
  return g;
}

double evaluate(const Tensor4& t, const std::array<Vec, 4>& v) {
  return contract(t, v, 0).dot(v[0]);
}

// argmax of g'x subject to ||x||_4 = 1 (Hoelder equality case).
Vec l4_maximizer(const Vec& g) {
  Vec x = g.array().sign() * g.array().abs().pow(1.0 / 3.0);
  const double norm = std::pow(x.array().pow(4).sum(), 0.25);
  if (norm == 0.0) return x;
  return x / norm;
}

Vec l4_normalize(Vec x) {
  const double norm = std::pow(x.array().pow(4).sum(), 0.25);
  return norm == 0.0 ? x : Vec(x / norm);
}

}  // namespace

double tensor_sigma_max_oracle(const Tensor4& t, int restarts, std::uint64_t seed) {
  const int m = t.dim();
  if (m > 4) throw std::invalid_argument("tensor_sigma_max_oracle: dimension must be at most 4");
  if (m == 0) return 0.0;
  Rng rng = make_stream(seed, 0);
  std::normal_distribution<double> normal;
  double best = 0.0;
  const int coordinate_starts = m;
  for (int r = 0; r < restarts + coordinate_starts; ++r) {
    std::array<Vec, 4> v;
    for (auto& x : v) {
      x = Vec::Zero(m);
      if (r < coordinate_starts)
        x(r) = 1.0;
      else
        for (int i = 0; i < m; ++i) x(i) = normal(rng);
      x = l4_normalize(x);
    }
    double value = evaluate(t, v);
    for (int it = 0; it < 1000; ++it) {
      for (int q = 0; q < 4; ++q) {
        const Vec g = contract(t, v, q);
        if (g.squaredNorm() > 0.0) v[q] = l4_maximizer(g);
      }
      const double next = evaluate(t, v);
      const bool stalled = next - value <= 1e-14 * std::max(1.0, std::abs(next));
      value = next;
      if (stalled) break;
    }
    best = std::max(best, value);
  }
  return best;
}

void write_tensor_csv(std::ostream& os, const Tensor4& t) {
  os << "i,j,k,l,value\n" << std::setprecision(15);
  const int m = t.dim();
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b)
      for (int c = 0; c < m; ++c)
        for (int d = 0; d < m; ++d)
          if (t(a, b, c, d) != 0.0) os << a + 1 << ',' << b + 1 << ',' << c + 1 << ',' << d + 1 << ',' << t(a, b, c, d) << '\n';
}

}  // namespace dbest
