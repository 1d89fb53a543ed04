#pragma once

// Independent reference implementations used as test oracles. They favour
// obviousness over speed and share no code with the library.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <vivecap/hdbscan.hpp>

namespace vt_oracle {

using vivecap::cluster::DistanceMatrix;
using vivecap::cluster::Edge;
using vivecap::cluster::EmbeddingMatrix;

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool join(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[b] = a;
    return true;
  }
};

// Sum in ascending order: every MST of a graph has the same sorted weight
// list, so the totals compare exactly.
inline double sorted_sum(std::vector<double> w) {
  std::sort(w.begin(), w.end());
  double s = 0.0;
  for (double x : w) s += x;
  return s;
}

inline double total(const std::vector<Edge>& edges) {
  std::vector<double> w;
  for (const auto& e : edges) w.push_back(e.weight);
  return sorted_sum(w);
}

inline bool spans(const std::vector<Edge>& edges, std::size_t n) {
  UnionFind uf(n);
  std::size_t joins = 0;
  for (const auto& e : edges) joins += uf.join(e.a, e.b);
  return joins == n - 1;
}

inline double prim_total(const DistanceMatrix& d) {
  const std::size_t n = d.size();
  std::vector<bool> in(n, false);
  std::vector<double> best(n, INFINITY);
  std::vector<double> w;
  best[0] = 0.0;
  for (std::size_t step = 0; step < n; ++step) {
    std::size_t u = n;
    for (std::size_t v = 0; v < n; ++v)
      if (!in[v] && (u == n || best[v] < best[u])) u = v;
    in[u] = true;
    if (step > 0) w.push_back(best[u]);
    for (std::size_t v = 0; v < n; ++v)
      if (!in[v] && d(u, v) < best[v]) best[v] = d(u, v);
  }
  return sorted_sum(w);
}

inline std::vector<std::pair<double, std::pair<std::size_t, std::size_t>>> all_edges(const DistanceMatrix& d) {
  std::vector<std::pair<double, std::pair<std::size_t, std::size_t>>> edges;
  for (std::size_t a = 0; a < d.size(); ++a)
    for (std::size_t b = a + 1; b < d.size(); ++b) edges.push_back({d(a, b), {a, b}});
  std::sort(edges.begin(), edges.end());
  return edges;
}

inline double kruskal_total(const DistanceMatrix& d) {
  UnionFind uf(d.size());
  std::vector<double> w;
  for (const auto& [weight, ab] : all_edges(d))
    if (uf.join(ab.first, ab.second)) w.push_back(weight);
  return sorted_sum(w);
}

// Totals of every spanning tree, by trying each (n-1)-edge subset.
inline std::vector<double> all_spanning_tree_weights(const DistanceMatrix& d) {
  auto edges = all_edges(d);
  const std::size_t m = edges.size(), n = d.size();
  std::vector<double> out;
  for (std::uint32_t mask = 0; mask < (1u << m); ++mask) {
    if (static_cast<std::size_t>(std::popcount(mask)) != n - 1) continue;
    UnionFind uf(n);
    std::vector<double> w;
    bool acyclic = true;
    for (std::size_t i = 0; i < m; ++i)
      if (mask >> i & 1u) {
        acyclic = acyclic && uf.join(edges[i].second.first, edges[i].second.second);
        w.push_back(edges[i].first);
      }
    if (acyclic) out.push_back(sorted_sum(w));
  }
  return out;
}

inline std::vector<double> core_distances(const DistanceMatrix& d, std::size_t k) {
  std::vector<double> core;
  for (std::size_t a = 0; a < d.size(); ++a) {
    std::vector<double> row;
    for (std::size_t b = 0; b < d.size(); ++b)
      if (b != a) row.push_back(d(a, b));
    std::sort(row.begin(), row.end());
    core.push_back(row[k - 1]);
  }
  return core;
}

// Single linkage cut into `k` groups: drop the k-1 heaviest MST edges.
inline std::vector<int> single_linkage_cut(const DistanceMatrix& d, std::size_t k) {
  UnionFind uf(d.size());
  std::vector<std::pair<std::size_t, std::size_t>> tree;
  for (const auto& [w, ab] : all_edges(d))
    if (uf.join(ab.first, ab.second)) tree.push_back(ab);
  UnionFind cut(d.size());
  for (std::size_t i = 0; i + (k - 1) < tree.size(); ++i) cut.join(tree[i].first, tree[i].second);
  std::map<std::size_t, int> ids;
  std::vector<int> labels;
  for (std::size_t i = 0; i < d.size(); ++i) labels.push_back(ids.emplace(cut.find(i), int(ids.size())).first->second);
  return labels;
}

// Equal as partitions: same noise points, clusters related by a bijection.
inline bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) return false;
  std::map<int, int> ab, ba;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if ((a[i] < 0) != (b[i] < 0)) return false;
    if (a[i] < 0) continue;
    auto [x, newx] = ab.emplace(a[i], b[i]);
    auto [y, newy] = ba.emplace(b[i], a[i]);
    if (x->second != b[i] || y->second != a[i]) return false;
  }
  return true;
}

template <typename Gen>
EmbeddingMatrix random_points(Gen& g, std::size_t n, std::size_t dim) {
  std::vector<std::string> ids;
  std::vector<float> v;
  for (std::size_t i = 0; i < n; ++i) {
    ids.push_back("p" + std::to_string(i));
    for (std::size_t k = 0; k < dim; ++k) v.push_back(static_cast<float>(g.normal() * 3.0));
  }
  return EmbeddingMatrix(ids, v, dim);
}

template <typename Gen>
EmbeddingMatrix clustered_points(Gen& g, std::size_t k, std::size_t per, std::size_t dim) {
  std::vector<std::string> ids;
  std::vector<float> v;
  std::vector<std::vector<double>> centres(k, std::vector<double>(dim));
  for (auto& c : centres)
    for (auto& x : c) x = g.uniform(-20.0, 20.0);
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t i = 0; i < per; ++i) {
      ids.push_back("c" + std::to_string(c) + "_" + std::to_string(i));
      for (std::size_t j = 0; j < dim; ++j) v.push_back(static_cast<float>(centres[c][j] + g.normal()));
    }
  return EmbeddingMatrix(ids, v, dim);
}

struct Blobs {
  EmbeddingMatrix points;
  std::vector<int> truth;
};

// Two isotropic unit-variance 2-D blobs whose centres are `sep` sigma apart,
// interleaved so membership is not a prefix.
template <typename Gen>
Blobs two_blobs(Gen& g, std::size_t per, double sep) {
  std::vector<std::string> ids;
  std::vector<float> v;
  std::vector<int> truth;
  for (std::size_t i = 0; i < 2 * per; ++i) {
    const int blob = static_cast<int>(i % 2);
    ids.push_back("b" + std::to_string(i));
    v.push_back(static_cast<float>(blob * sep + g.normal()));
    v.push_back(static_cast<float>(g.normal()));
    truth.push_back(blob);
  }
  return {EmbeddingMatrix(ids, v, 2), truth};
}

inline EmbeddingMatrix permute(const EmbeddingMatrix& e, const std::vector<std::size_t>& perm) {
  std::vector<std::string> ids;
  std::vector<float> v;
  for (std::size_t i : perm) {
    ids.push_back(e.ids()[i]);
    auto row = e.row(i);
    v.insert(v.end(), row.begin(), row.end());
  }
  return EmbeddingMatrix(ids, v, e.dim());
}

// Grounded metrics by bit counting over roster-index masks.
struct BruteMetrics {
  double precision, recall, f1;
  std::size_t mistakes, fp, fn;
};

inline BruteMetrics brute_metrics(unsigned gold, unsigned pred) {
  const std::size_t tp = std::popcount(gold & pred);
  const std::size_t fp = std::popcount(pred & ~gold);
  const std::size_t fn = std::popcount(gold & ~pred);
  BruteMetrics m{};
  m.fp = fp;
  m.fn = fn;
  m.mistakes = fp + fn;
  if (gold == 0 && pred == 0) {
    m.precision = m.recall = m.f1 = 1.0;
    return m;
  }
  m.precision = tp + fp ? double(tp) / double(tp + fp) : 0.0;
  m.recall = tp + fn ? double(tp) / double(tp + fn) : 0.0;
  m.f1 = m.precision + m.recall > 0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

// P(T > t) from mpmath quad of the Student t density at 30 digits.
struct TailValue {
  int df;
  double t;
  double sf;
};

inline const std::vector<TailValue>& student_t_tail_table() {
  static const std::vector<TailValue> table = {
      {3, 0.5, 0.32572398242407549722},  {3, 1, 0.19550110947788532096},   {3, 2, 0.069662984279421588424},
      {3, 3, 0.028834442811218654289},   {3, 4, 0.014004228005073083484},  {5, 0.5, 0.31914943582046450335},
      {5, 1, 0.1816087338245613128},     {5, 2, 0.050969739414929178123},  {5, 3, 0.015049623948731286924},
      {5, 4, 0.0051617077404157269022},  {10, 0.5, 0.31394680287148647135}, {10, 1, 0.17044656615102993634},
      {10, 2, 0.036694017385370182809},  {10, 3, 0.0066718275112847886034}, {10, 4, 0.0012591663123683461319},
      {30, 0.5, 0.31036150244256364298}, {30, 1, 0.16265430771301494562},  {30, 2, 0.02731252248149155196},
      {30, 3, 0.0026949820328259733064}, {30, 4, 0.00019092281804187842162},
  };
  return table;
}

// Closed forms for one and two degrees of freedom.
inline double cauchy_sf(double t) { return 0.5 - std::atan(t) / M_PI; }
inline double t2_sf(double t) { return 0.5 * (1.0 - t / std::sqrt(2.0 + t * t)); }
inline double normal_sf(double t) { return 0.5 * std::erfc(t / std::sqrt(2.0)); }

}  // namespace vt_oracle
