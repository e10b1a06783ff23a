#pragma once

#include "dbest/common.hpp"

namespace dbest {

struct PinvResult {
  Mat inverse;
  int rank = 0;
  bool rank_deficient = false;
};

// Moore-Penrose inverse; singular values below rtol * sigma_max are dropped.
PinvResult pinv(const Mat& a, double rtol = 1e-10);

// Eigenvalues of a symmetric matrix in ascending order.
Vec symmetric_eigenvalues(const Mat& a);

bool is_symmetric(const Mat& a, double tol = 1e-10);

// Least-squares residual of projecting b onto col(a), relative to ||b||.
double column_space_residual(const Mat& a, const Vec& b);

}  // namespace dbest
