#pragma once

#include "dbest/common.hpp"
#include "dbest/moments.hpp"

#include <string>

namespace dbest {

struct VarianceBound {
  std::string kind;
  Mat Dt;
  BoolMat mask_minus1;  // cells where D = -1 (joint inclusion impossible)
  Mat Dt_over_p;        // elementwise Dt / p with 0/0 = 0
  bool psd_clipped = false;
};

// Elementwise a / p where p > 0, zero elsewhere.
Mat divide_by_joint(const Mat& a, const Mat& p);

// D + I(D = -1) + diag(I(D = -1) 1). Exact moments detect -1 cells by
// |D + 1| <= tol_m1; Monte Carlo moments by zero joint hits.
VarianceBound aronow_samii_bound(const DesignMoments& m, double tol_m1 = 1e-12);

// blockdiag((n/n_t) A_n, (n/n_c) A_n) for the two-arm CRD.
VarianceBound neyman_bound_crd(int n, int n_t);

// User-supplied bound matrix; identification is checked against m.
VarianceBound custom_bound(const DesignMoments& m, const Mat& dt, const std::string& kind = "custom");

struct BoundCertificate {
  double min_eigenvalue = 0.0;  // of Dt - D
  bool psd = false;
  long mask_violations = 0;     // cells with p = 0 but Dt != 0
  bool identified = false;
  bool passed() const { return psd && identified; }
};

BoundCertificate certify_bound(const DesignMoments& m, const VarianceBound& b, double tol = 1e-8);

// Spectrum of the Neyman bound minus the Aronow-Samii bound for the
// two-arm CRD, raw and after projecting out the arm intercepts.
struct CrdBoundComparison {
  Vec raw;
  Vec projected;
};
CrdBoundComparison compare_neyman_aronow_samii(int n, int n_t);

// Zeroes the negative spectrum of Dt / p.
VarianceBound psd_clip(const VarianceBound& b);

}  // namespace dbest
