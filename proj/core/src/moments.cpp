#include "dbest/moments.hpp"

#include "dbest/linalg.hpp"
#include "dbest/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <iomanip>
#include <ostream>
#include <thread>
#include <unordered_map>

namespace dbest {

Mat first_order_from_joint(const Vec& pi, const Mat& p) {
  const Eigen::Index kn = pi.size();
  Mat D = Mat::Zero(kn, kn);
  for (Eigen::Index j = 0; j < kn; ++j) {
    if (pi(j) <= 0.0) continue;
    for (Eigen::Index i = 0; i < kn; ++i) {
      if (pi(i) <= 0.0) continue;
      D(i, j) = p(i, j) / (pi(i) * pi(j)) - 1.0;
    }
  }
  return D;
}

namespace {

DesignMoments finish(int n, int k, Vec pi, Mat p, MomentMethod method) {
  DesignMoments m;
  m.n = n;
  m.k = k;
  m.method = method;
  m.zero_mask = (pi.array() <= 0.0);
  m.possibly_zero = BoolVec::Constant(pi.size(), false);
  m.D = first_order_from_joint(pi, p);
  m.pi = std::move(pi);
  m.p = std::move(p);
  return m;
}

DesignMoments bernoulli_moments(const DesignSpec& d) {
  const int n = d.n, k = d.k;
  Vec pi(static_cast<Eigen::Index>(n) * k);
  for (int a = 0; a < k; ++a)
    for (int i = 0; i < n; ++i) pi(a * n + i) = d.unit_probs(i, a);
  Mat p = pi * pi.transpose();
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b) p(a * n + i, b * n + i) = a == b ? pi(a * n + i) : 0.0;
  return finish(n, k, std::move(pi), std::move(p), MomentMethod::exact);
}

constexpr double kLocalEnumerationCap = 4194304.0;  // 2^22 neighborhood assignments

// Enumerates base assignments on a node set and tallies the exposures of the
// listed units. visit(prob, labels) is called once per assignment.
void enumerate_neighborhood(const std::vector<int>& nodes, const std::vector<int>& units, const Mat& base_probs,
                            const InterferenceGraph& graph, const ExposureRules& rules,
                            const std::function<void(double, const std::vector<int>&)>& visit) {
  std::vector<std::vector<int>> options(nodes.size());
  double combos = 1.0;
  for (std::size_t s = 0; s < nodes.size(); ++s) {
    for (int a = 0; a < base_probs.cols(); ++a)
      if (base_probs(nodes[s], a) > 0.0) options[s].push_back(a);
    combos *= static_cast<double>(options[s].size());
  }
  if (combos > kLocalEnumerationCap)
    throw SupportTooLarge("neighborhood enumeration needs " + std::to_string(combos) + " assignments");
  if (combos == 0.0) return;
  std::unordered_map<int, std::size_t> pos;
  for (std::size_t s = 0; s < nodes.size(); ++s) pos[nodes[s]] = s;
  std::vector<std::vector<std::size_t>> nbr_pos(units.size());
  std::vector<std::size_t> own_pos(units.size());
  for (std::size_t u = 0; u < units.size(); ++u) {
    own_pos[u] = pos.at(units[u]);
    for (int j : graph.neighbors(units[u], rules.mode)) nbr_pos[u].push_back(pos.at(j));
  }
  std::vector<std::size_t> idx(nodes.size(), 0);
  std::vector<int> arm(nodes.size()), labels(units.size()), counts(rules.base_arms);
  while (true) {
    double w = 1.0;
    for (std::size_t s = 0; s < nodes.size(); ++s) {
      arm[s] = options[s][idx[s]];
      w *= base_probs(nodes[s], arm[s]);
    }
    for (std::size_t u = 0; u < units.size(); ++u) {
      std::fill(counts.begin(), counts.end(), 0);
      for (std::size_t q : nbr_pos[u]) ++counts[arm[q]];
      labels[u] = rules.label(arm[own_pos[u]], counts);
    }
    visit(w, labels);
    std::size_t s = nodes.size();
    bool done = true;
    while (s > 0) {
      --s;
      if (++idx[s] < options[s].size()) {
        done = false;
        break;
      }
      idx[s] = 0;
    }
    if (done) return;
  }
}

std::vector<int> closed_neighborhood(const InterferenceGraph& g, NeighborMode mode, int i) {
  std::vector<int> c = g.neighbors(i, mode);
  c.insert(std::lower_bound(c.begin(), c.end(), i), i);
  return c;
}

// Exposure designs over an independent (Bernoulli) base: unit i's exposure
// depends only on its closed neighborhood, so pairs with disjoint
// neighborhoods are independent and the rest are enumerated locally.
DesignMoments local_exposure_moments(const DesignSpec& d) {
  const auto& g = *d.graph;
  const auto& rules = *d.rules;
  const Mat& bp = d.base->unit_probs;
  const int n = d.n, k = d.k;
  std::vector<std::vector<int>> hood(n);
  for (int i = 0; i < n; ++i) hood[i] = closed_neighborhood(g, rules.mode, i);

  Vec pi = Vec::Zero(static_cast<Eigen::Index>(n) * k);
  for (int i = 0; i < n; ++i)
    enumerate_neighborhood(hood[i], {i}, bp, g, rules,
                           [&](double w, const std::vector<int>& lab) { pi(lab[0] * n + i) += w; });

  Mat p = pi * pi.transpose();
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b) p(a * n + i, b * n + i) = a == b ? pi(a * n + i) : 0.0;

  std::vector<std::vector<int>> containing(n);
  for (int i = 0; i < n; ++i)
    for (int v : hood[i]) containing[v].push_back(i);
  std::vector<std::pair<int, int>> pairs;
  for (int v = 0; v < n; ++v)
    for (std::size_t x = 0; x < containing[v].size(); ++x)
      for (std::size_t y = x + 1; y < containing[v].size(); ++y) {
        int i = containing[v][x], j = containing[v][y];
        if (i > j) std::swap(i, j);
        pairs.emplace_back(i, j);
      }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());

  Mat table(k, k);
  for (const auto& [i, j] : pairs) {
    std::vector<int> nodes;
    std::set_union(hood[i].begin(), hood[i].end(), hood[j].begin(), hood[j].end(), std::back_inserter(nodes));
    table.setZero();
    enumerate_neighborhood(nodes, {i, j}, bp, g, rules,
                           [&](double w, const std::vector<int>& lab) { table(lab[0], lab[1]) += w; });
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b) {
        p(a * n + i, b * n + j) = table(a, b);
        p(b * n + j, a * n + i) = table(a, b);
      }
  }
  return finish(n, k, std::move(pi), std::move(p), MomentMethod::exact);
}

// Whether (unit, arm) has zero probability by construction of the design.
bool proven_impossible(const DesignSpec& d, int unit, int arm) {
  switch (d.kind) {
    case DesignKind::custom:
      return false;
    case DesignKind::exposure_derived: {
      Mat base_probs;
      try {
        base_probs = marginal_probabilities(*d.base);
      } catch (const NotEnumerable&) {
        return false;
      }
      // treat nodes as independent over their possible base arms
      const auto nodes = closed_neighborhood(*d.graph, d.rules->mode, unit);
      bool possible = false;
      try {
        enumerate_neighborhood(nodes, {unit}, base_probs, *d.graph, *d.rules,
                               [&](double, const std::vector<int>& lab) { possible = possible || lab[0] == arm; });
      } catch (const SupportTooLarge&) {
        return false;
      }
      return !possible;
    }
    default:
      return marginal_probabilities(d)(unit, arm) <= 0.0;
  }
}

struct CoCounts {
  std::vector<std::int64_t> hits;
  std::vector<std::int64_t> joint;  // upper triangle of kn x kn, row-major
};

}  // namespace

DesignMoments moments_from_support(const SupportTable& support, int n, int k) {
  const Eigen::Index kn = static_cast<Eigen::Index>(n) * k;
  Vec pi = Vec::Zero(kn);
  Mat p = Mat::Zero(kn, kn);
  std::vector<int> active(n);
  for (std::size_t s = 0; s < support.size(); ++s) {
    const auto& r = support.realizations[s];
    const double w = support.probabilities[s];
    for (int i = 0; i < n; ++i) active[i] = r.arm_of[i] * n + i;
    for (int x : active) {
      pi(x) += w;
      for (int y : active) p(x, y) += w;
    }
  }
  return finish(n, k, std::move(pi), std::move(p), MomentMethod::exact);
}

DesignMoments exact_moments(const DesignSpec& design, double cap) {
  if (design.kind == DesignKind::bernoulli) return bernoulli_moments(design);
  if (design.kind == DesignKind::exposure_derived && design.base->kind == DesignKind::bernoulli)
    return local_exposure_moments(design);
  return moments_from_support(enumerate_support(design, cap), design.n, design.k);
}

DesignMoments mc_moments(const DesignSpec& design, std::int64_t reps, std::uint64_t seed, int workers) {
  if (reps < 2) throw std::invalid_argument("mc_moments: reps must be at least 2");
  workers = std::max(1, workers);
  const int n = design.n, k = design.k;
  const std::size_t kn = static_cast<std::size_t>(n) * k;

  std::vector<CoCounts> acc(workers);
  auto run = [&](int w, std::int64_t begin, std::int64_t end) {
    auto& c = acc[w];
    c.hits.assign(kn, 0);
    c.joint.assign(kn * kn, 0);
    std::vector<int> active(n);
    for (std::int64_t r = begin; r < end; ++r) {
      Rng rng = make_stream(seed, static_cast<std::uint64_t>(r));
      const auto z = sample_assignment(design, rng);
      for (int i = 0; i < n; ++i) active[i] = z.arm_of[i] * n + i;
      std::sort(active.begin(), active.end());
      for (int x = 0; x < n; ++x) {
        const std::size_t ax = active[x];
        ++c.hits[ax];
        std::int64_t* row = c.joint.data() + ax * kn;
        for (int y = x; y < n; ++y) ++row[active[y]];
      }
    }
  };
  std::vector<std::thread> threads;
  const std::int64_t chunk = (reps + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const std::int64_t b = std::min(reps, w * chunk), e = std::min(reps, (w + 1) * chunk);
    if (workers == 1)
      run(w, b, e);
    else
      threads.emplace_back(run, w, b, e);
  }
  for (auto& t : threads) t.join();
  // merge in worker order
  for (int w = 1; w < workers; ++w) {
    for (std::size_t i = 0; i < kn; ++i) acc[0].hits[i] += acc[w].hits[i];
    for (std::size_t i = 0; i < kn * kn; ++i) acc[0].joint[i] += acc[w].joint[i];
  }
  const double R = static_cast<double>(reps);
  Vec pi(kn);
  Mat p(kn, kn);
  for (std::size_t i = 0; i < kn; ++i) {
    pi(i) = acc[0].hits[i] / R;
    for (std::size_t j = i; j < kn; ++j) p(i, j) = p(j, i) = acc[0].joint[i * kn + j] / R;
  }
  DesignMoments m = finish(n, k, std::move(pi), std::move(p), MomentMethod::monte_carlo);
  m.reps = reps;
  m.seed = seed;
  for (std::size_t idx = 0; idx < kn; ++idx) {
    if (acc[0].hits[idx] > 0) continue;
    const int arm = static_cast<int>(idx) / n, unit = static_cast<int>(idx) % n;
    const bool proven = proven_impossible(design, unit, arm);
    m.zero_mask(idx) = proven;
    m.possibly_zero(idx) = !proven;
  }
  return m;
}

namespace {

Mat demeaning(int n) {
  return (double(n) / (n - 1)) * (Mat::Identity(n, n) - Mat::Constant(n, n, 1.0 / n));
}

void check_crd_args(int n, int n_t) {
  if (n < 2 || n_t <= 0 || n_t >= n) throw std::invalid_argument("two-arm CRD needs 0 < n_t < n");
}

}  // namespace

Mat crd_first_order_matrix(int n, int n_t) {
  check_crd_args(n, n_t);
  const int n_c = n - n_t;
  const Mat A = demeaning(n);
  Mat D(2 * n, 2 * n);
  D.topLeftCorner(n, n) = (double(n_c) / n_t) * A;
  D.topRightCorner(n, n) = -A;
  D.bottomLeftCorner(n, n) = -A;
  D.bottomRightCorner(n, n) = (double(n_t) / n_c) * A;
  return D;
}

Mat crd_joint_inclusion(int n, int n_t) {
  check_crd_args(n, n_t);
  const int n_c = n - n_t;
  const double nn = double(n) * (n - 1);
  Mat p(2 * n, 2 * n);
  p.topLeftCorner(n, n).setConstant(n_t * (n_t - 1.0) / nn);
  p.bottomRightCorner(n, n).setConstant(n_c * (n_c - 1.0) / nn);
  p.topRightCorner(n, n).setConstant(double(n_t) * n_c / nn);
  p.bottomLeftCorner(n, n).setConstant(double(n_t) * n_c / nn);
  for (int i = 0; i < n; ++i) {
    p(i, i) = double(n_t) / n;
    p(n + i, n + i) = double(n_c) / n;
    p(i, n + i) = p(n + i, i) = 0.0;
  }
  return p;
}

EigenResult largest_eigenvalue(const Mat& m, bool zero_diag, const BoolVec& zero_mask, double tol, int max_matvecs,
                               const BoolVec& possibly_zero) {
  if (m.rows() != m.cols()) throw std::invalid_argument("largest_eigenvalue: matrix is not square");
  if (!is_symmetric(m)) throw std::invalid_argument("largest_eigenvalue: matrix is not symmetric");
  EigenResult out;
  if (zero_mask.size() > 0 && zero_mask.any()) {
    out.infinite = true;
    out.value = std::numeric_limits<double>::infinity();
    return out;
  }
  if (possibly_zero.size() > 0 && possibly_zero.any())
    out.warning = "some cells were never observed in Monte Carlo; value computed with their rows set to zero";
  const Eigen::Index N = m.rows();
  if (N == 0) return out;
  Mat a = m;
  if (zero_diag) a.diagonal().setZero();
  const double anorm = a.cwiseAbs().rowwise().sum().maxCoeff();
  if (anorm == 0.0) return out;
  if (N == 1) {
    out.value = a(0, 0);
    return out;
  }

  const Eigen::Index steps_max = std::min<Eigen::Index>(N, 60);
  Rng rng(20240607);
  std::normal_distribution<double> normal;
  Vec v(N);
  for (Eigen::Index i = 0; i < N; ++i) v(i) = normal(rng);
  v.normalize();

  Mat V(N, steps_max + 1);
  Vec alpha(steps_max), beta(steps_max);
  double theta = 0.0;
  while (true) {
    V.col(0) = v;
    Eigen::Index steps = 0;
    bool invariant = false;
    for (Eigen::Index j = 0; j < steps_max; ++j) {
      Vec w = a * V.col(j);
      ++out.matvecs;
      alpha(j) = V.col(j).dot(w);
      for (int pass = 0; pass < 2; ++pass) w -= V.leftCols(j + 1) * (V.leftCols(j + 1).transpose() * w);
      beta(j) = w.norm();
      steps = j + 1;
      if (beta(j) <= 1e-12 * anorm) {
        invariant = true;
        break;
      }
      V.col(j + 1) = w / beta(j);
    }
    Mat T = Mat::Zero(steps, steps);
    for (Eigen::Index j = 0; j < steps; ++j) {
      T(j, j) = alpha(j);
      if (j + 1 < steps) T(j, j + 1) = T(j + 1, j) = beta(j);
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(T);
    theta = es.eigenvalues()(steps - 1);
    const Vec s = es.eigenvectors().col(steps - 1);
    const double resid = invariant ? 0.0 : std::abs(beta(steps - 1) * s(steps - 1));
    if (resid <= tol * std::max(std::abs(theta), 1e-12 * anorm)) break;
    if (out.matvecs >= max_matvecs) {
      out.converged = false;
      out.warning = "eigenvalue iteration cap reached; returning best estimate";
      break;
    }
    v = V.leftCols(steps) * s;
    v.normalize();
  }
  out.value = theta;
  return out;
}

Mat arm_block(const Mat& m, int n, const std::vector<int>& arms) {
  const Eigen::Index s = static_cast<Eigen::Index>(arms.size()) * n;
  Mat out(s, s);
  for (std::size_t x = 0; x < arms.size(); ++x)
    for (std::size_t y = 0; y < arms.size(); ++y)
      out.block(x * n, y * n, n, n) = m.block(static_cast<Eigen::Index>(arms[x]) * n, static_cast<Eigen::Index>(arms[y]) * n, n, n);
  return out;
}

BoolVec arm_block(const BoolVec& v, int n, const std::vector<int>& arms) {
  BoolVec out(static_cast<Eigen::Index>(arms.size()) * n);
  for (std::size_t x = 0; x < arms.size(); ++x) out.segment(x * n, n) = v.segment(static_cast<Eigen::Index>(arms[x]) * n, n);
  return out;
}

std::vector<PairComplexity> pairwise_complexity(const DesignMoments& m, double tol) {
  std::vector<PairComplexity> out;
  for (int a = 0; a < m.k; ++a)
    for (int b = a + 1; b < m.k; ++b) {
      const std::vector<int> arms{a, b};
      const Mat block = arm_block(m.D, m.n, arms);
      const BoolVec zm = arm_block(m.zero_mask, m.n, arms);
      const BoolVec pz = arm_block(m.possibly_zero, m.n, arms);
      out.push_back({a, b, largest_eigenvalue(block, false, zm, tol, 100000, pz),
                     largest_eigenvalue(block, true, zm, tol, 100000, pz)});
    }
  return out;
}

void write_pi_csv(std::ostream& os, const DesignMoments& m) {
  os << "arm,unit,pi,zero,possibly_zero\n" << std::setprecision(15);
  for (int a = 0; a < m.k; ++a)
    for (int i = 0; i < m.n; ++i) {
      const int idx = a * m.n + i;
      os << a + 1 << ',' << i + 1 << ',' << m.pi(idx) << ',' << int(m.zero_mask(idx)) << ','
         << int(m.possibly_zero(idx)) << '\n';
    }
}

void write_matrix_triplets(std::ostream& os, const Mat& a, double drop_below) {
  os << "i,j,value\n" << std::setprecision(15);
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      if (a(i, j) != 0.0 && std::abs(a(i, j)) >= drop_below) os << i + 1 << ',' << j + 1 << ',' << a(i, j) << '\n';
}

namespace {

constexpr char kMagic[8] = {'D', 'B', 'E', 'S', 'T', 'M', 'O', '1'};

template <class T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("moments file is truncated");
  return v;
}

}  // namespace

void save_moments(const std::string& path, const DesignMoments& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  os.write(kMagic, sizeof(kMagic));
  put<std::int32_t>(os, m.n);
  put<std::int32_t>(os, m.k);
  put<std::int32_t>(os, m.method == MomentMethod::exact ? 0 : 1);
  put<std::int64_t>(os, m.reps);
  put<std::uint64_t>(os, m.seed);
  const Eigen::Index kn = m.pi.size();
  os.write(reinterpret_cast<const char*>(m.pi.data()), kn * sizeof(double));
  for (Eigen::Index i = 0; i < kn; ++i) put<std::uint8_t>(os, m.zero_mask(i) | (m.possibly_zero(i) << 1));
  os.write(reinterpret_cast<const char*>(m.p.data()), kn * kn * sizeof(double));
  os.write(reinterpret_cast<const char*>(m.D.data()), kn * kn * sizeof(double));
}

DesignMoments load_moments(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw std::runtime_error(path + " is not a moments file");
  DesignMoments m;
  m.n = get<std::int32_t>(is);
  m.k = get<std::int32_t>(is);
  m.method = get<std::int32_t>(is) == 0 ? MomentMethod::exact : MomentMethod::monte_carlo;
  m.reps = get<std::int64_t>(is);
  m.seed = get<std::uint64_t>(is);
  const Eigen::Index kn = static_cast<Eigen::Index>(m.n) * m.k;
  m.pi.resize(kn);
  is.read(reinterpret_cast<char*>(m.pi.data()), kn * sizeof(double));
  m.zero_mask.resize(kn);
  m.possibly_zero.resize(kn);
  for (Eigen::Index i = 0; i < kn; ++i) {
    const auto f = get<std::uint8_t>(is);
    m.zero_mask(i) = f & 1;
    m.possibly_zero(i) = (f >> 1) & 1;
  }
  m.p.resize(kn, kn);
  m.D.resize(kn, kn);
  is.read(reinterpret_cast<char*>(m.p.data()), kn * kn * sizeof(double));
  is.read(reinterpret_cast<char*>(m.D.data()), kn * kn * sizeof(double));
  if (!is) throw std::runtime_error("moments file is truncated");
  return m;
}

}  // namespace dbest
