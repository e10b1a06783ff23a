#pragma once

#include "dbest/common.hpp"
#include "dbest/design.hpp"

#include <iosfwd>
#include <vector>

namespace dbest {

// Dense order-4 tensor with equal mode sizes.
class Tensor4 {
 public:
  Tensor4() = default;
  explicit Tensor4(int dim) : dim_(dim), data_(static_cast<std::size_t>(dim) * dim * dim * dim, 0.0) {}

  int dim() const { return dim_; }
  double& operator()(int i, int j, int k, int l) { return data_[offset(i, j, k, l)]; }
  double operator()(int i, int j, int k, int l) const { return data_[offset(i, j, k, l)]; }
  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

 private:
  std::size_t offset(int i, int j, int k, int l) const {
    return ((static_cast<std::size_t>(i) * dim_ + j) * dim_ + k) * dim_ + l;
  }
  int dim_ = 0;
  std::vector<double> data_;
};

constexpr int kDefaultTensorCap = 64;

// S = (E[(R11'R) (x) (R11'R)] - p (x) p) / (p (x) p), with 0/0 resolved to 0.
Tensor4 second_order_tensor(const DesignSpec& design, int cap = kDefaultTensorCap);

// (Dt (x) Dt) o S.
Tensor4 weighted_tensor(const Tensor4& s, const Mat& dt);

// Largest absolute slice sum over the four modes; an upper bound on sigma_max.
double tensor_slice_norm_bound(const Tensor4& t);

// Multi-start block ascent for max T(v1,v2,v3,v4) over unit l4 spheres.
// Returns the best value found, a lower bound on sigma_max.
double tensor_sigma_max_oracle(const Tensor4& t, int restarts = 100, std::uint64_t seed = 1);

void write_tensor_csv(std::ostream& os, const Tensor4& t);

}  // namespace dbest
