#include "dbest/network.hpp"

#include "dbest/moments.hpp"

#include <algorithm>
#include <functional>
#include <set>

namespace dbest {

InterferenceGraph::InterferenceGraph(int n, const std::vector<std::pair<int, int>>& edges)
    : n_(n), out_(n), in_(n), undirected_(n) {
  if (n < 0) throw std::invalid_argument("graph: negative node count");
  std::set<std::pair<int, int>> seen;
  for (const auto& [s, d] : edges) {
    if (s < 0 || s >= n || d < 0 || d >= n) throw std::invalid_argument("graph: edge endpoint out of range");
    if (s == d) {
      ++dropped_self_loops_;
      continue;
    }
    if (!seen.insert({s, d}).second) {
      ++dropped_duplicates_;
      continue;
    }
    out_[s].push_back(d);
    in_[d].push_back(s);
  }
  edges_ = seen.size();
  for (int i = 0; i < n; ++i) {
    std::sort(out_[i].begin(), out_[i].end());
    std::sort(in_[i].begin(), in_[i].end());
    std::set_union(out_[i].begin(), out_[i].end(), in_[i].begin(), in_[i].end(),
                   std::back_inserter(undirected_[i]));
  }
}

int InterferenceGraph::max_degree(NeighborMode mode) const {
  std::size_t m = 0;
  for (int i = 0; i < n_; ++i) m = std::max(m, neighbors(i, mode).size());
  return static_cast<int>(m);
}

InterferenceGraph InterferenceGraph::relabeled(const std::vector<int>& perm) const {
  std::vector<std::pair<int, int>> edges;
  for (int s = 0; s < n_; ++s)
    for (int d : out_[s]) edges.emplace_back(perm[s], perm[d]);
  return InterferenceGraph(n_, edges);
}

InterferenceGraph random_bounded_graph(int n, int min_out, int max_out, std::uint64_t seed) {
  if (n < 2 || min_out < 0 || max_out < min_out || max_out > n - 1)
    throw std::invalid_argument("random graph: need 0 <= min_out <= max_out <= n-1");
  Rng rng = make_stream(seed, 0);
  std::uniform_int_distribution<int> deg(min_out, max_out);
  std::uniform_int_distribution<int> node(0, n - 1);
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i) {
    const int d = deg(rng);
    std::set<int> picked;
    while (static_cast<int>(picked.size()) < d) {
      const int j = node(rng);
      if (j != i) picked.insert(j);
    }
    for (int j : picked) edges.emplace_back(i, j);
  }
  return InterferenceGraph(n, edges);
}

bool ExposureDefinition::matches(int own_arm, const std::vector<int>& neighbor_counts) const {
  if (std::find(own_arms.begin(), own_arms.end(), own_arm) == own_arms.end()) return false;
  for (std::size_t a = 0; a < counts.size() && a < neighbor_counts.size(); ++a)
    if (!counts[a].contains(neighbor_counts[a])) return false;
  return true;
}

int ExposureRules::label(int own_arm, const std::vector<int>& neighbor_counts) const {
  int found = -1;
  for (int e = 0; e < size(); ++e) {
    if (!exposures[e].matches(own_arm, neighbor_counts)) continue;
    if (found >= 0)
      throw std::runtime_error("exposure rules overlap: '" + exposures[found].name + "' and '" + exposures[e].name + "'");
    found = e;
  }
  if (found < 0) throw std::runtime_error("exposure rules are not exhaustive: no exposure matches");
  return found;
}

void ExposureRules::validate(int max_degree) const {
  if (base_arms < 1) throw std::invalid_argument("exposure rules: base_arms must be positive");
  if (exposures.empty()) throw std::invalid_argument("exposure rules: no exposures defined");
  for (const auto& e : exposures)
    if (static_cast<int>(e.counts.size()) > base_arms)
      throw std::invalid_argument("exposure rules: '" + e.name + "' has more count intervals than base arms");
  std::vector<int> counts(base_arms, 0);
  // enumerate count profiles with total <= max_degree
  std::function<void(int, int)> rec = [&](int arm, int left) {
    if (arm == base_arms - 1) {
      for (int c = 0; c <= left; ++c) {
        counts[arm] = c;
        for (int own = 0; own < base_arms; ++own) label(own, counts);
      }
      return;
    }
    for (int c = 0; c <= left; ++c) {
      counts[arm] = c;
      rec(arm + 1, left - c);
    }
  };
  rec(0, std::max(0, max_degree));
}

ExposureRules four_exposure_rules(NeighborMode mode) {
  const CountInterval any{}, none{0, 0}, some{1, INT_MAX};
  ExposureRules r;
  r.base_arms = 2;
  r.mode = mode;
  r.exposures = {
      {"d11", {1}, {any, some}},
      {"d10", {1}, {any, none}},
      {"d01", {0}, {any, some}},
      {"d00", {0}, {any, none}},
  };
  return r;
}

ExposureRules twelve_exposure_rules(NeighborMode mode) {
  const CountInterval any{}, none{0, 0}, some{1, INT_MAX};
  ExposureRules r;
  r.base_arms = 4;
  r.mode = mode;
  r.exposures.push_back({"FRS", {0}, {}});
  r.exposures.push_back({"FRI", {1}, {}});
  for (int own : {2, 3}) {
    const std::string p = own == 2 ? "SRS" : "SRI";
    r.exposures.push_back({p + "_no_first_round", {own}, {none, none}});
    r.exposures.push_back({p + "_FRS_only", {own}, {some, none}});
    r.exposures.push_back({p + "_FRI_1", {own}, {any, {1, 1}}});
    r.exposures.push_back({p + "_FRI_2", {own}, {any, {2, 2}}});
    r.exposures.push_back({p + "_FRI_3plus", {own}, {any, {3, INT_MAX}}});
  }
  return r;
}

std::vector<int> exposure_map(const std::vector<int>& base_arm_of, const InterferenceGraph& graph,
                              const ExposureRules& rules) {
  const int n = graph.n();
  if (static_cast<int>(base_arm_of.size()) != n) throw std::invalid_argument("exposure_map: assignment length differs from graph size");
  std::vector<int> labels(n);
  std::vector<int> counts(rules.base_arms);
  for (int i = 0; i < n; ++i) {
    std::fill(counts.begin(), counts.end(), 0);
    for (int j : graph.neighbors(i, rules.mode)) ++counts.at(base_arm_of[j]);
    labels[i] = rules.label(base_arm_of[i], counts);
  }
  return labels;
}

DesignSpec derive_exposure_design(const DesignSpec& base, std::shared_ptr<const InterferenceGraph> graph,
                                  std::shared_ptr<const ExposureRules> rules) {
  if (!graph || !rules) throw std::invalid_argument("exposure design: graph and rules are required");
  if (graph->n() != base.n) throw std::invalid_argument("exposure design: graph size differs from base design");
  if (base.k != rules->base_arms) throw std::invalid_argument("exposure design: base arm count differs from rules");
  rules->validate(graph->max_degree(rules->mode));
  DesignSpec d;
  d.kind = DesignKind::exposure_derived;
  d.n = base.n;
  d.k = rules->size();
  d.base = std::make_shared<const DesignSpec>(base);
  d.graph = std::move(graph);
  d.rules = std::move(rules);
  return d;
}

std::vector<PositivityEntry> positivity_report(const DesignMoments& m, double threshold) {
  std::vector<PositivityEntry> out;
  for (int a = 0; a < m.k; ++a) {
    for (int i = 0; i < m.n; ++i) {
      const int idx = a * m.n + i;
      const bool zero = m.zero_mask(idx);
      const bool maybe = m.possibly_zero(idx);
      if (zero || maybe || m.pi(idx) < threshold) out.push_back({i, a, m.pi(idx), zero, maybe});
    }
  }
  return out;
}

}  // namespace dbest
