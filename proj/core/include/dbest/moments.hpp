#pragma once

#include "dbest/common.hpp"
#include "dbest/design.hpp"

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>

namespace dbest {

enum class MomentMethod { exact, monte_carlo };

struct DesignMoments {
  int n = 0;
  int k = 0;
  Vec pi;   // kn
  Mat p;    // kn x kn joint inclusion, diagonal = pi
  Mat D;    // kn x kn, entries touching a zero-probability cell are set to 0
  MomentMethod method = MomentMethod::exact;
  std::int64_t reps = 0;
  std::uint64_t seed = 0;
  BoolVec zero_mask;      // pi proven to be 0
  BoolVec possibly_zero;  // never hit in Monte Carlo but not proven impossible

  int kn() const { return n * k; }
};

// Assembles D from pi and p; zero-probability cells get zero rows.
Mat first_order_from_joint(const Vec& pi, const Mat& p);

// Exact moments. Bernoulli designs and exposure designs built on a
// Bernoulli base use closed-form or neighborhood-local computation; other
// designs enumerate the support.
DesignMoments exact_moments(const DesignSpec& design, double cap = kDefaultEnumerationCap);

// Exact moments from an explicit support table.
DesignMoments moments_from_support(const SupportTable& support, int n, int k);

constexpr std::int64_t kDefaultMonteCarloReps = 100000;

DesignMoments mc_moments(const DesignSpec& design, std::int64_t reps, std::uint64_t seed, int workers = 1);

// Analytic D for the two-arm completely randomized design (arm 0 has n_t units).
Mat crd_first_order_matrix(int n, int n_t);
// Analytic joint inclusion matrix for the same design.
Mat crd_joint_inclusion(int n, int n_t);

struct EigenResult {
  double value = 0.0;
  bool infinite = false;
  bool converged = true;
  int matvecs = 0;
  std::string warning;
};

// Largest algebraic eigenvalue via restarted Lanczos. zero_diag drops the
// diagonal first. Any flagged zero-probability index yields infinity.
EigenResult largest_eigenvalue(const Mat& m, bool zero_diag = false, const BoolVec& zero_mask = BoolVec(),
                               double tol = 1e-8, int max_matvecs = 100000,
                               const BoolVec& possibly_zero = BoolVec());

// Principal submatrix of D for the stacked blocks of the listed arms.
Mat arm_block(const Mat& m, int n, const std::vector<int>& arms);
BoolVec arm_block(const BoolVec& v, int n, const std::vector<int>& arms);

struct PairComplexity {
  int arm_a = 0;
  int arm_b = 0;
  EigenResult full;       // |||D|||_2
  EigenResult zero_diag;  // |||D°|||_2
};

std::vector<PairComplexity> pairwise_complexity(const DesignMoments& m, double tol = 1e-8);

// CSV: "arm,unit,pi" rows (1-based arm and unit) and "i,j,value" triplets.
void write_pi_csv(std::ostream& os, const DesignMoments& m);
void write_matrix_triplets(std::ostream& os, const Mat& a, double drop_below = 0.0);

void save_moments(const std::string& path, const DesignMoments& m);
DesignMoments load_moments(const std::string& path);

}  // namespace dbest
