#pragma once

#include "dbest/common.hpp"
#include "dbest/design.hpp"

#include <climits>
#include <string>
#include <utility>
#include <vector>

namespace dbest {

enum class NeighborMode { out, undirected };

// Directed graph (nominator -> nominee). Self-loops and repeated edges are
// dropped on construction and counted.
class InterferenceGraph {
 public:
  InterferenceGraph() = default;
  InterferenceGraph(int n, const std::vector<std::pair<int, int>>& edges);

  int n() const { return n_; }
  std::size_t edge_count() const { return edges_; }
  const std::vector<int>& out_neighbors(int i) const { return out_[i]; }
  const std::vector<int>& in_neighbors(int i) const { return in_[i]; }
  const std::vector<int>& neighbors(int i, NeighborMode mode) const {
    return mode == NeighborMode::out ? out_[i] : undirected_[i];
  }
  int max_degree(NeighborMode mode) const;
  int dropped_self_loops() const { return dropped_self_loops_; }
  int dropped_duplicates() const { return dropped_duplicates_; }

  InterferenceGraph relabeled(const std::vector<int>& perm) const;

 private:
  int n_ = 0;
  std::size_t edges_ = 0;
  std::vector<std::vector<int>> out_, in_, undirected_;
  int dropped_self_loops_ = 0;
  int dropped_duplicates_ = 0;
};

// Each unit out-nominates between min_out and max_out distinct others.
InterferenceGraph random_bounded_graph(int n, int min_out, int max_out, std::uint64_t seed);

struct CountInterval {
  int lo = 0;
  int hi = INT_MAX;
  bool contains(int v) const { return v >= lo && v <= hi; }
};

struct ExposureDefinition {
  std::string name;
  std::vector<int> own_arms;            // base arms allowed for the unit itself
  std::vector<CountInterval> counts;    // per base arm; empty means unrestricted
  bool matches(int own_arm, const std::vector<int>& neighbor_counts) const;
};

struct ExposureRules {
  int base_arms = 2;
  NeighborMode mode = NeighborMode::out;
  std::vector<ExposureDefinition> exposures;

  int size() const { return static_cast<int>(exposures.size()); }
  // Index of the unique matching exposure; throws when none or several match.
  int label(int own_arm, const std::vector<int>& neighbor_counts) const;
  // Checks exhaustiveness and exclusivity over every own arm and every
  // neighbor-count profile with total degree up to max_degree.
  void validate(int max_degree) const;
};

// Treated/untreated crossed with "at least one treated neighbor":
// d11, d10, d01, d00 in that order. Base arm 1 is treatment.
ExposureRules four_exposure_rules(NeighborMode mode = NeighborMode::out);

// Twelve exposures over base arms FRS, FRI, SRS, SRI (0..3).
ExposureRules twelve_exposure_rules(NeighborMode mode = NeighborMode::out);

std::vector<int> exposure_map(const std::vector<int>& base_arm_of, const InterferenceGraph& graph,
                              const ExposureRules& rules);

DesignSpec derive_exposure_design(const DesignSpec& base, std::shared_ptr<const InterferenceGraph> graph,
                                  std::shared_ptr<const ExposureRules> rules);

struct DesignMoments;

struct PositivityEntry {
  int unit = 0;
  int arm = 0;
  double pi = 0.0;
  bool zero = false;           // proven impossible
  bool possibly_zero = false;  // never observed in Monte Carlo
};

std::vector<PositivityEntry> positivity_report(const DesignMoments& moments, double threshold = 0.01);

}  // namespace dbest
