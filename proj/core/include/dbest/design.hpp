#pragma once

#include "dbest/common.hpp"

#include <functional>
#include <memory>
#include <vector>

namespace dbest {

class InterferenceGraph;
struct ExposureRules;

// One draw of the assignment mechanism. Arms are 0-based in the API; the
// stacked kn indicator is arm-major, entry a*n + i holds R_{ai}.
struct AssignmentRealization {
  int n = 0;
  int k = 0;
  std::vector<int> arm_of;

  Vec indicator() const;
  int stacked(int arm, int unit) const { return arm * n + unit; }
  bool operator==(const AssignmentRealization&) const = default;
};

enum class DesignKind { bernoulli, completely_randomized, stratified, clustered, exposure_derived, custom };

const char* to_string(DesignKind kind);

struct Stratum {
  std::vector<int> units;
  std::vector<int> counts;  // per arm, sums to units.size()
};

using Sampler = std::function<void(Rng&, std::vector<int>& arm_of)>;

// Immutable once built; copies share the nested designs.
struct DesignSpec {
  DesignKind kind = DesignKind::custom;
  int n = 0;
  int k = 0;
  Mat unit_probs;                       // bernoulli: n x k
  std::vector<int> counts;              // completely_randomized
  std::vector<Stratum> strata;          // stratified
  std::vector<int> cluster_of;          // clustered: unit -> cluster
  std::shared_ptr<const DesignSpec> base;  // clustered: cluster-level design; exposure: unit design
  std::shared_ptr<const InterferenceGraph> graph;
  std::shared_ptr<const ExposureRules> rules;
  Sampler sampler;
};

DesignSpec bernoulli_design(int n, const std::vector<double>& arm_probs);
DesignSpec bernoulli_design(const Mat& unit_probs);
DesignSpec crd_design(const std::vector<int>& counts);
DesignSpec stratified_design(int n, int k, std::vector<Stratum> strata);
DesignSpec clustered_design(const std::vector<int>& cluster_of, const DesignSpec& cluster_design);
DesignSpec custom_design(int n, int k, Sampler sampler);

// Equal allocation inside each group; remainder units go to the highest arm
// first, then the next highest, and so on.
std::vector<int> equal_allocation_counts(int size, int k);
// Counts from cycling through a label pattern (1-based labels) size times.
std::vector<int> pattern_counts(int size, const std::vector<int>& pattern, int k);

// Builds strata from a unit -> group map. counts_for(size) yields per-arm counts.
DesignSpec stratified_from_groups(int k, const std::vector<int>& group_of,
                                  const std::function<std::vector<int>(int)>& counts_for);

// Merges strata smaller than min_size into the stratum of the same type in
// the lowest-indexed other village (restricted to the same component when
// component_of_village is non-empty). Returns the new unit -> group map.
struct StratumKey {
  int village = 0;
  int type = 0;
};
std::vector<int> merge_small_strata(const std::vector<StratumKey>& unit_keys, int min_size,
                                    const std::vector<int>& component_of_village = {});

AssignmentRealization sample_assignment(const DesignSpec& design, Rng& rng);

// Marginal P(unit i in arm a) for designs where it is available in closed
// form (everything except custom). n x k.
Mat marginal_probabilities(const DesignSpec& design);

struct SupportTable {
  std::vector<AssignmentRealization> realizations;
  std::vector<double> probabilities;
  std::size_t size() const { return probabilities.size(); }
};

constexpr double kDefaultEnumerationCap = 1e6;

// Number of support points (as a double; may exceed integer range).
double support_size(const DesignSpec& design);

SupportTable enumerate_support(const DesignSpec& design, double cap = kDefaultEnumerationCap);

}  // namespace dbest
