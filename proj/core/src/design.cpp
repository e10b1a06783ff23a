#include "dbest/design.hpp"

#include "dbest/network.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace dbest {

Vec AssignmentRealization::indicator() const {
  Vec r = Vec::Zero(static_cast<Eigen::Index>(k) * n);
  for (int i = 0; i < n; ++i) r(stacked(arm_of[i], i)) = 1.0;
  return r;
}

const char* to_string(DesignKind kind) {
  switch (kind) {
    case DesignKind::bernoulli: return "bernoulli";
    case DesignKind::completely_randomized: return "completely_randomized";
    case DesignKind::stratified: return "stratified";
    case DesignKind::clustered: return "clustered";
    case DesignKind::exposure_derived: return "exposure_derived";
    case DesignKind::custom: return "custom";
  }
  return "unknown";
}

namespace {

void check_counts(const std::vector<int>& counts, int size, const char* what) {
  if (counts.empty()) throw std::invalid_argument(std::string(what) + ": no arms");
  long total = 0;
  for (int c : counts) {
    if (c < 0) throw std::invalid_argument(std::string(what) + ": negative arm count");
    total += c;
  }
  if (total != size)
    throw std::invalid_argument(std::string(what) + ": arm counts sum to " + std::to_string(total) +
                                ", expected " + std::to_string(size));
}

std::vector<int> labels_from_counts(const std::vector<int>& counts) {
  std::vector<int> labels;
  for (std::size_t a = 0; a < counts.size(); ++a) labels.insert(labels.end(), counts[a], static_cast<int>(a));
  return labels;
}

double log_multinomial(const std::vector<int>& counts) {
  double total = 0.0, out = 0.0;
  for (int c : counts) {
    total += c;
    out -= std::lgamma(c + 1.0);
  }
  return out + std::lgamma(total + 1.0);
}

}  // namespace

DesignSpec bernoulli_design(int n, const std::vector<double>& arm_probs) {
  if (n < 1) throw std::invalid_argument("bernoulli: n must be positive");
  Mat probs(n, static_cast<Eigen::Index>(arm_probs.size()));
  for (int i = 0; i < n; ++i)
    for (std::size_t a = 0; a < arm_probs.size(); ++a) probs(i, a) = arm_probs[a];
  return bernoulli_design(probs);
}

DesignSpec bernoulli_design(const Mat& unit_probs) {
  if (unit_probs.rows() < 1 || unit_probs.cols() < 1) throw std::invalid_argument("bernoulli: empty probability table");
  for (Eigen::Index i = 0; i < unit_probs.rows(); ++i) {
    double s = 0.0;
    for (Eigen::Index a = 0; a < unit_probs.cols(); ++a) {
      const double q = unit_probs(i, a);
      if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("bernoulli: probability outside [0,1]");
      s += q;
    }
    if (std::abs(s - 1.0) > 1e-9) throw std::invalid_argument("bernoulli: unit probabilities do not sum to 1");
  }
  DesignSpec d;
  d.kind = DesignKind::bernoulli;
  d.n = static_cast<int>(unit_probs.rows());
  d.k = static_cast<int>(unit_probs.cols());
  d.unit_probs = unit_probs;
  return d;
}

DesignSpec crd_design(const std::vector<int>& counts) {
  const int n = std::accumulate(counts.begin(), counts.end(), 0);
  if (n < 1) throw std::invalid_argument("completely_randomized: no units");
  check_counts(counts, n, "completely_randomized");
  DesignSpec d;
  d.kind = DesignKind::completely_randomized;
  d.n = n;
  d.k = static_cast<int>(counts.size());
  d.counts = counts;
  return d;
}

DesignSpec stratified_design(int n, int k, std::vector<Stratum> strata) {
  if (n < 1 || k < 1) throw std::invalid_argument("stratified: n and k must be positive");
  std::vector<int> seen(n, 0);
  for (const auto& s : strata) {
    if (s.units.empty()) throw std::invalid_argument("stratified: empty stratum");
    if (static_cast<int>(s.counts.size()) != k) throw std::invalid_argument("stratified: counts length differs from k");
    check_counts(s.counts, static_cast<int>(s.units.size()), "stratified");
    for (int u : s.units) {
      if (u < 0 || u >= n) throw std::invalid_argument("stratified: unit id out of range");
      if (seen[u]++) throw std::invalid_argument("stratified: unit in more than one stratum");
    }
  }
  for (int i = 0; i < n; ++i)
    if (!seen[i]) throw std::invalid_argument("stratified: unit " + std::to_string(i) + " is in no stratum");
  DesignSpec d;
  d.kind = DesignKind::stratified;
  d.n = n;
  d.k = k;
  d.strata = std::move(strata);
  return d;
}

DesignSpec clustered_design(const std::vector<int>& cluster_of, const DesignSpec& cluster_design) {
  if (cluster_of.empty()) throw std::invalid_argument("clustered: empty cluster map");
  std::vector<int> used(cluster_design.n, 0);
  for (int c : cluster_of) {
    if (c < 0 || c >= cluster_design.n) throw std::invalid_argument("clustered: cluster id out of range");
    used[c] = 1;
  }
  if (std::find(used.begin(), used.end(), 0) != used.end())
    throw std::invalid_argument("clustered: cluster without units");
  DesignSpec d;
  d.kind = DesignKind::clustered;
  d.n = static_cast<int>(cluster_of.size());
  d.k = cluster_design.k;
  d.cluster_of = cluster_of;
  d.base = std::make_shared<const DesignSpec>(cluster_design);
  return d;
}

DesignSpec custom_design(int n, int k, Sampler sampler) {
  if (n < 1 || k < 1) throw std::invalid_argument("custom: n and k must be positive");
  if (!sampler) throw std::invalid_argument("custom: missing sampler");
  DesignSpec d;
  d.kind = DesignKind::custom;
  d.n = n;
  d.k = k;
  d.sampler = std::move(sampler);
  return d;
}

std::vector<int> equal_allocation_counts(int size, int k) {
  if (size < 1 || k < 1) throw std::invalid_argument("equal allocation: size and k must be positive");
  std::vector<int> counts(k, size / k);
  int rem = size % k;
  for (int a = k - 1; rem > 0; --a, --rem) ++counts[a];
  return counts;
}

std::vector<int> pattern_counts(int size, const std::vector<int>& pattern, int k) {
  if (pattern.empty()) throw std::invalid_argument("pattern: empty label pattern");
  std::vector<int> counts(k, 0);
  for (int i = 0; i < size; ++i) {
    const int label = pattern[i % pattern.size()];
    if (label < 1 || label > k) throw std::invalid_argument("pattern: label outside 1..k");
    ++counts[label - 1];
  }
  return counts;
}

DesignSpec stratified_from_groups(int k, const std::vector<int>& group_of,
                                  const std::function<std::vector<int>(int)>& counts_for) {
  std::map<int, std::vector<int>> groups;
  for (int i = 0; i < static_cast<int>(group_of.size()); ++i) groups[group_of[i]].push_back(i);
  std::vector<Stratum> strata;
  for (auto& [g, units] : groups) {
    Stratum s;
    s.units = units;
    s.counts = counts_for(static_cast<int>(units.size()));
    strata.push_back(std::move(s));
  }
  return stratified_design(static_cast<int>(group_of.size()), k, std::move(strata));
}

std::vector<int> merge_small_strata(const std::vector<StratumKey>& unit_keys, int min_size,
                                    const std::vector<int>& component_of_village) {
  std::map<std::pair<int, int>, int> id_of;  // (village, type) -> group
  for (const auto& key : unit_keys) id_of.emplace(std::make_pair(key.village, key.type), 0);
  std::vector<std::pair<int, int>> keys;
  for (auto& [key, id] : id_of) {
    id = static_cast<int>(keys.size());
    keys.push_back(key);
  }
  std::vector<int> size(keys.size(), 0);
  for (const auto& key : unit_keys) ++size[id_of[{key.village, key.type}]];

  std::vector<int> target(keys.size());
  std::iota(target.begin(), target.end(), 0);
  auto root = [&](int g) {
    while (target[g] != g) g = target[g];
    return g;
  };
  auto component = [&](int village) {
    return component_of_village.empty() ? 0 : component_of_village.at(village);
  };
  for (std::size_t g = 0; g < keys.size(); ++g) {
    if (size[root(static_cast<int>(g))] >= min_size || root(static_cast<int>(g)) != static_cast<int>(g)) continue;
    const auto [village, type] = keys[g];
    for (std::size_t h = 0; h < keys.size(); ++h) {
      if (keys[h].second != type || keys[h].first == village) continue;
      if (component(keys[h].first) != component(village)) continue;
      const int r = root(static_cast<int>(h));
      if (r == static_cast<int>(g)) continue;
      target[g] = r;
      size[r] += size[g];
      break;
    }
  }
  std::vector<int> group_of(unit_keys.size());
  for (std::size_t i = 0; i < unit_keys.size(); ++i)
    group_of[i] = root(id_of[{unit_keys[i].village, unit_keys[i].type}]);
  return group_of;
}

AssignmentRealization sample_assignment(const DesignSpec& design, Rng& rng) {
  AssignmentRealization r;
  r.n = design.n;
  r.k = design.k;
  r.arm_of.assign(design.n, 0);
  switch (design.kind) {
    case DesignKind::bernoulli: {
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      for (int i = 0; i < design.n; ++i) {
        const double u = unif(rng);
        double acc = 0.0;
        int arm = design.k - 1;
        for (int a = 0; a < design.k; ++a) {
          acc += design.unit_probs(i, a);
          if (u < acc) {
            arm = a;
            break;
          }
        }
        while (design.unit_probs(i, arm) == 0.0 && arm > 0) --arm;
        r.arm_of[i] = arm;
      }
      break;
    }
    case DesignKind::completely_randomized: {
      auto labels = labels_from_counts(design.counts);
      std::shuffle(labels.begin(), labels.end(), rng);
      r.arm_of = std::move(labels);
      break;
    }
    case DesignKind::stratified: {
      for (const auto& s : design.strata) {
        auto labels = labels_from_counts(s.counts);
        std::shuffle(labels.begin(), labels.end(), rng);
        for (std::size_t j = 0; j < s.units.size(); ++j) r.arm_of[s.units[j]] = labels[j];
      }
      break;
    }
    case DesignKind::clustered: {
      const auto c = sample_assignment(*design.base, rng);
      for (int i = 0; i < design.n; ++i) r.arm_of[i] = c.arm_of[design.cluster_of[i]];
      break;
    }
    case DesignKind::exposure_derived: {
      const auto z = sample_assignment(*design.base, rng);
      r.arm_of = exposure_map(z.arm_of, *design.graph, *design.rules);
      break;
    }
    case DesignKind::custom: {
      design.sampler(rng, r.arm_of);
      if (static_cast<int>(r.arm_of.size()) != design.n) throw std::runtime_error("custom sampler: wrong length");
      for (int a : r.arm_of)
        if (a < 0 || a >= design.k) throw std::runtime_error("custom sampler: arm out of range");
      break;
    }
  }
  return r;
}

Mat marginal_probabilities(const DesignSpec& design) {
  Mat m = Mat::Zero(design.n, design.k);
  switch (design.kind) {
    case DesignKind::bernoulli:
      return design.unit_probs;
    case DesignKind::completely_randomized:
      for (int a = 0; a < design.k; ++a) m.col(a).setConstant(double(design.counts[a]) / design.n);
      return m;
    case DesignKind::stratified:
      for (const auto& s : design.strata)
        for (int u : s.units)
          for (int a = 0; a < design.k; ++a) m(u, a) = double(s.counts[a]) / s.units.size();
      return m;
    case DesignKind::clustered: {
      const Mat c = marginal_probabilities(*design.base);
      for (int i = 0; i < design.n; ++i) m.row(i) = c.row(design.cluster_of[i]);
      return m;
    }
    default:
      throw NotEnumerable(std::string("no closed-form marginals for ") + to_string(design.kind) + " designs");
  }
}

namespace {

// A block of units whose joint assignment is independent of other blocks.
struct Factor {
  std::vector<int> units;
  std::vector<std::vector<int>> labels;
  std::vector<double> probs;
};

Factor permutation_factor(const std::vector<int>& units, const std::vector<int>& counts) {
  Factor f;
  f.units = units;
  auto labels = labels_from_counts(counts);
  const double p = std::exp(-log_multinomial(counts));
  do {
    f.labels.push_back(labels);
    f.probs.push_back(p);
  } while (std::next_permutation(labels.begin(), labels.end()));
  const double w = 1.0 / static_cast<double>(f.probs.size());
  std::fill(f.probs.begin(), f.probs.end(), w);
  return f;
}

SupportTable product_support(int n, int k, const std::vector<Factor>& factors) {
  SupportTable table;
  std::vector<std::size_t> idx(factors.size(), 0);
  for (const auto& f : factors)
    if (f.probs.empty()) return table;
  while (true) {
    AssignmentRealization r;
    r.n = n;
    r.k = k;
    r.arm_of.assign(n, 0);
    double p = 1.0;
    for (std::size_t f = 0; f < factors.size(); ++f) {
      const auto& lab = factors[f].labels[idx[f]];
      for (std::size_t j = 0; j < factors[f].units.size(); ++j) r.arm_of[factors[f].units[j]] = lab[j];
      p *= factors[f].probs[idx[f]];
    }
    table.realizations.push_back(std::move(r));
    table.probabilities.push_back(p);
    std::size_t f = factors.size();
    while (f > 0) {
      --f;
      if (++idx[f] < factors[f].probs.size()) break;
      idx[f] = 0;
      if (f == 0) return table;
    }
    if (factors.empty()) return table;
  }
}

}  // namespace

double support_size(const DesignSpec& design) {
  switch (design.kind) {
    case DesignKind::bernoulli: {
      double s = 1.0;
      for (int i = 0; i < design.n; ++i) s *= static_cast<double>((design.unit_probs.row(i).array() > 0.0).count());
      return s;
    }
    case DesignKind::completely_randomized:
      return std::round(std::exp(log_multinomial(design.counts)));
    case DesignKind::stratified: {
      double s = 1.0;
      for (const auto& st : design.strata) s *= std::round(std::exp(log_multinomial(st.counts)));
      return s;
    }
    case DesignKind::clustered:
    case DesignKind::exposure_derived:
      return support_size(*design.base);
    case DesignKind::custom:
      throw NotEnumerable("custom designs are not enumerable");
  }
  return 0.0;
}

SupportTable enumerate_support(const DesignSpec& design, double cap) {
  const double size = support_size(design);
  if (size > cap)
    throw SupportTooLarge("support has " + std::to_string(size) + " points, cap is " + std::to_string(cap));
  switch (design.kind) {
    case DesignKind::bernoulli: {
      std::vector<Factor> factors;
      for (int i = 0; i < design.n; ++i) {
        Factor f;
        f.units = {i};
        for (int a = 0; a < design.k; ++a) {
          if (design.unit_probs(i, a) > 0.0) {
            f.labels.push_back({a});
            f.probs.push_back(design.unit_probs(i, a));
          }
        }
        factors.push_back(std::move(f));
      }
      return product_support(design.n, design.k, factors);
    }
    case DesignKind::completely_randomized: {
      std::vector<int> units(design.n);
      std::iota(units.begin(), units.end(), 0);
      return product_support(design.n, design.k, {permutation_factor(units, design.counts)});
    }
    case DesignKind::stratified: {
      std::vector<Factor> factors;
      for (const auto& s : design.strata) factors.push_back(permutation_factor(s.units, s.counts));
      return product_support(design.n, design.k, factors);
    }
    case DesignKind::clustered: {
      auto base = enumerate_support(*design.base, cap);
      SupportTable t;
      t.probabilities = base.probabilities;
      for (const auto& c : base.realizations) {
        AssignmentRealization r;
        r.n = design.n;
        r.k = design.k;
        r.arm_of.resize(design.n);
        for (int i = 0; i < design.n; ++i) r.arm_of[i] = c.arm_of[design.cluster_of[i]];
        t.realizations.push_back(std::move(r));
      }
      return t;
    }
    case DesignKind::exposure_derived: {
      auto base = enumerate_support(*design.base, cap);
      std::map<std::vector<int>, double> merged;
      for (std::size_t s = 0; s < base.size(); ++s)
        merged[exposure_map(base.realizations[s].arm_of, *design.graph, *design.rules)] += base.probabilities[s];
      SupportTable t;
      for (auto& [labels, p] : merged) {
        t.realizations.push_back(AssignmentRealization{design.n, design.k, labels});
        t.probabilities.push_back(p);
      }
      return t;
    }
    case DesignKind::custom:
      throw NotEnumerable("custom designs are not enumerable");
  }
  return {};
}

}  // namespace dbest
