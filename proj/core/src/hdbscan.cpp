#include "vivecap/hdbscan.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

#include <nlohmann/json.hpp>

namespace vivecap::cluster {
namespace {

using Kind = ClusteringError::Kind;

constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

std::vector<double> core_distances(const DistanceMatrix& d, std::size_t k) {
  const std::size_t n = d.size();
  std::vector<double> core(n, 0.0);
  std::vector<double> row;
  for (std::size_t i = 0; i < n; ++i) {
    row.clear();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) row.push_back(d(i, j));
    std::nth_element(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(k - 1), row.end());
    core[i] = row[k - 1];
  }
  return core;
}

bool edge_less(const Edge& x, const Edge& y) {
  if (x.weight != y.weight) return x.weight < y.weight;
  if (x.a != y.a) return x.a < y.a;
  return x.b < y.b;
}

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::size_t keep, std::size_t other) { parent_[find(other)] = find(keep); }

 private:
  std::vector<std::size_t> parent_;
};

// Single-linkage dendrogram: nodes 0..n-1 are points, n..2n-2 merges.
struct Dendrogram {
  std::size_t n = 0;
  std::vector<std::size_t> left, right, size;
  std::vector<double> dist;

  bool is_point(std::size_t node) const { return node < n; }
  std::size_t root() const { return 2 * n - 2; }
  std::size_t node_size(std::size_t node) const { return is_point(node) ? 1 : size[node - n]; }

  template <typename Fn>
  void for_each_point(std::size_t node, Fn&& fn) const {
    std::vector<std::size_t> stack{node};
    while (!stack.empty()) {
      std::size_t x = stack.back();
      stack.pop_back();
      if (is_point(x)) {
        fn(x);
      } else {
        stack.push_back(right[x - n]);
        stack.push_back(left[x - n]);
      }
    }
  }
};

Dendrogram single_linkage(std::size_t n, const std::vector<Edge>& mst) {
  Dendrogram t;
  t.n = n;
  UnionFind uf(2 * n - 1);
  std::vector<std::size_t> node_of(2 * n - 1);
  std::iota(node_of.begin(), node_of.end(), 0);
  for (std::size_t i = 0; i < mst.size(); ++i) {
    const Edge& e = mst[i];
    std::size_t ra = uf.find(e.a), rb = uf.find(e.b);
    std::size_t na = node_of[ra], nb = node_of[rb];
    std::size_t id = n + i;
    t.left.push_back(na);
    t.right.push_back(nb);
    t.dist.push_back(e.weight);
    t.size.push_back(t.node_size(na) + t.node_size(nb));
    uf.unite(ra, rb);
    node_of[uf.find(ra)] = id;
  }
  return t;
}

// Condensed hierarchy: cluster 0 is the root, children carry larger ids.
struct Condensed {
  std::vector<std::size_t> parent;        // per cluster, kNone for the root
  std::vector<double> birth;              // lambda at which the cluster appears
  std::vector<double> stability;
  std::vector<std::vector<std::size_t>> children;
  std::vector<std::size_t> point_cluster;  // cluster each point falls out of
};

Condensed condense(const Dendrogram& t, std::size_t min_cluster_size) {
  const std::size_t n = t.n;
  double min_positive = std::numeric_limits<double>::infinity();
  for (double d : t.dist)
    if (d > 0.0) min_positive = std::min(min_positive, d);
  // Merges at distance zero happen "after" every real split.
  const double lambda_cap = std::isfinite(min_positive) ? 2.0 / min_positive : 1.0;

  Condensed c;
  auto new_cluster = [&](std::size_t parent, double lambda) {
    c.parent.push_back(parent);
    c.birth.push_back(lambda);
    c.stability.push_back(0.0);
    c.children.emplace_back();
    if (parent != kNone) c.children[parent].push_back(c.parent.size() - 1);
    return c.parent.size() - 1;
  };
  c.point_cluster.assign(n, kNone);
  auto fall_out = [&](std::size_t node, std::size_t cluster, double lambda) {
    t.for_each_point(node, [&](std::size_t p) {
      c.point_cluster[p] = cluster;
      c.stability[cluster] += lambda - c.birth[cluster];
    });
  };

  new_cluster(kNone, 0.0);
  if (n == 1) {
    c.point_cluster[0] = 0;
    return c;
  }

  // (dendrogram node, owning condensed cluster), processed top-down.
  std::vector<std::pair<std::size_t, std::size_t>> work{{t.root(), 0}};
  while (!work.empty()) {
    auto [node, cluster] = work.back();
    work.pop_back();
    if (t.is_point(node)) {
      // Only reachable for a lone point inherited by a continuing cluster.
      fall_out(node, cluster, lambda_cap);
      continue;
    }
    const std::size_t i = node - n;
    const double d = t.dist[i];
    if (d <= 0.0) {
      fall_out(node, cluster, lambda_cap);
      continue;
    }
    const double lambda = 1.0 / d;
    const std::size_t l = t.left[i], r = t.right[i];
    const bool big_l = t.node_size(l) >= min_cluster_size;
    const bool big_r = t.node_size(r) >= min_cluster_size;
    if (big_l && big_r) {
      c.stability[cluster] += (lambda - c.birth[cluster]) * static_cast<double>(t.node_size(l) + t.node_size(r));
      std::size_t cl = new_cluster(cluster, lambda);
      std::size_t cr = new_cluster(cluster, lambda);
      work.emplace_back(r, cr);
      work.emplace_back(l, cl);
    } else if (big_l) {
      fall_out(r, cluster, lambda);
      work.emplace_back(l, cluster);
    } else if (big_r) {
      fall_out(l, cluster, lambda);
      work.emplace_back(r, cluster);
    } else {
      fall_out(l, cluster, lambda);
      fall_out(r, cluster, lambda);
    }
  }
  return c;
}

std::vector<bool> select_clusters(const Condensed& c, Selection selection) {
  const std::size_t m = c.parent.size();
  std::vector<bool> selected(m, false);
  if (c.children[0].empty()) {
    selected[0] = true;
    return selected;
  }
  if (selection == Selection::Leaf) {
    for (std::size_t k = 1; k < m; ++k) selected[k] = c.children[k].empty();
    return selected;
  }
  std::vector<double> best(c.stability);
  for (std::size_t k = m; k-- > 1;) {
    double subtree = 0.0;
    for (std::size_t ch : c.children[k]) subtree += best[ch];
    if (!c.children[k].empty() && subtree > c.stability[k]) {
      best[k] = subtree;
    } else {
      selected[k] = true;
    }
  }
  // Keep only the topmost selected cluster on every root-to-leaf path.
  for (std::size_t k = 1; k < m; ++k)
    for (std::size_t up = c.parent[k]; up != kNone && up != 0; up = c.parent[up])
      if (selected[up]) {
        selected[k] = false;
        break;
      }
  return selected;
}

ClusterAssignment all_singletons(std::size_t n) {
  ClusterAssignment a;
  a.labels.resize(n);
  std::iota(a.labels.begin(), a.labels.end(), 0);
  a.n_clusters = n;
  for (std::size_t i = 0; i < n; ++i) a.stabilities[static_cast<int>(i)] = 0.0;
  return a;
}

ClusterAssignment cluster_distances(const DistanceMatrix& d, const ClusteringParams& p) {
  p.validate();
  const std::size_t n = d.size();
  if (n < p.min_cluster_size || n < 2) {
    if (p.noise_policy == NoisePolicy::SingletonClusters && n > 0) return all_singletons(n);
    throw ClusteringError(Kind::TooFewPoints, "hdbscan needs at least min_cluster_size=" +
                                                  std::to_string(p.min_cluster_size) + " points, got " +
                                                  std::to_string(n));
  }
  const std::size_t k = std::min(p.min_samples, n - 1);
  MutualReachability mr = mutual_reachability(d, k);
  Dendrogram tree = single_linkage(n, minimum_spanning_tree(mr));
  Condensed cond = condense(tree, p.min_cluster_size);
  std::vector<bool> selected = select_clusters(cond, p.selection);

  std::vector<std::size_t> owner(n, kNone);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k2 = cond.point_cluster[i]; k2 != kNone; k2 = cond.parent[k2])
      if (selected[k2]) {
        owner[i] = k2;
        break;
      }
  }

  // Compact ids in order of each cluster's smallest member.
  std::unordered_map<std::size_t, int> compact;
  ClusterAssignment a;
  a.labels.assign(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    if (owner[i] == kNone) continue;
    auto [it, inserted] = compact.emplace(owner[i], static_cast<int>(compact.size()));
    if (inserted) a.stabilities[it->second] = cond.stability[owner[i]];
    a.labels[i] = it->second;
  }
  a.n_clusters = compact.size();
  if (p.noise_policy == NoisePolicy::SingletonClusters) {
    for (std::size_t i = 0; i < n; ++i)
      if (a.labels[i] < 0) {
        int id = static_cast<int>(a.n_clusters++);
        a.labels[i] = id;
        a.stabilities[id] = 0.0;
      }
  }
  return a;
}

std::vector<float> normalized_rows(const EmbeddingMatrix& e) {
  std::vector<float> out(e.values().begin(), e.values().end());
  for (std::size_t i = 0; i < e.rows(); ++i) {
    double norm = 0.0;
    for (float v : e.row(i)) norm += static_cast<double>(v) * v;
    norm = std::sqrt(norm);
    if (norm == 0.0)
      throw ClusteringError(Kind::DegenerateData, "zero vector cannot be L2-normalised: " + e.ids()[i]);
    for (std::size_t j = 0; j < e.dim(); ++j)
      out[i * e.dim() + j] = static_cast<float>(e.row(i)[j] / norm);
  }
  return out;
}

}  // namespace

MutualReachability mutual_reachability(DistanceMatrix d, std::size_t min_samples) {
  if (min_samples < 1) throw ClusteringError(Kind::InvalidParams, "min_samples must be at least 1");
  const std::size_t n = d.size();
  if (n < min_samples + 1) throw ClusteringError(Kind::TooFewPoints, "mutual reachability needs n >= min_samples + 1");
  MutualReachability m;
  m.core_ = core_distances(d, min_samples);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) d.set(a, b, std::max({m.core_[a], m.core_[b], d(a, b)}));
  m.matrix_ = std::move(d);
  return m;
}

MutualReachability mutual_reachability(const EmbeddingMatrix& e, std::size_t min_samples, Metric metric) {
  return mutual_reachability(pairwise_distances(e, metric), min_samples);
}

void ClusteringParams::validate() const {
  if (min_cluster_size < 2) throw ClusteringError(Kind::InvalidParams, "min_cluster_size must be at least 2");
  if (min_samples < 1) throw ClusteringError(Kind::InvalidParams, "min_samples must be at least 1");
  if (min_samples > min_cluster_size)
    throw ClusteringError(Kind::InvalidParams, "min_samples must not exceed min_cluster_size");
}

const char* to_string(Metric m) {
  return m == Metric::EuclideanRaw ? "euclidean_raw" : "euclidean_on_l2_normalized";
}
const char* to_string(Selection s) { return s == Selection::Leaf ? "leaf" : "excess_of_mass"; }
const char* to_string(NoisePolicy p) { return p == NoisePolicy::SingletonClusters ? "singleton_clusters" : "exclude"; }

Metric parse_metric(const std::string& s) {
  if (s == "euclidean_on_l2_normalized") return Metric::EuclideanOnL2Normalized;
  if (s == "euclidean_raw") return Metric::EuclideanRaw;
  throw ClusteringError(Kind::InvalidParams, "unknown metric: " + s);
}
Selection parse_selection(const std::string& s) {
  if (s == "excess_of_mass") return Selection::ExcessOfMass;
  if (s == "leaf") return Selection::Leaf;
  throw ClusteringError(Kind::InvalidParams, "unknown selection: " + s);
}
NoisePolicy parse_noise_policy(const std::string& s) {
  if (s == "exclude") return NoisePolicy::Exclude;
  if (s == "singleton_clusters") return NoisePolicy::SingletonClusters;
  throw ClusteringError(Kind::InvalidParams, "unknown noise policy: " + s);
}

DistanceMatrix pairwise_distances(const EmbeddingMatrix& e, Metric metric) {
  std::vector<float> normalized;
  const float* base = e.values().data();
  if (metric == Metric::EuclideanOnL2Normalized) {
    normalized = normalized_rows(e);
    base = normalized.data();
  }
  const std::size_t n = e.rows(), dim = e.dim();
  DistanceMatrix d(n);
  for (std::size_t a = 0; a < n; ++a) {
    const float* ra = base + a * dim;
    for (std::size_t b = a + 1; b < n; ++b) {
      const float* rb = base + b * dim;
      double s = 0.0;
      for (std::size_t j = 0; j < dim; ++j) {
        double diff = static_cast<double>(ra[j]) - rb[j];
        s += diff * diff;
      }
      d.set(a, b, std::sqrt(s));
    }
  }
  return d;
}

std::vector<Edge> minimum_spanning_tree(const DistanceMatrix& d) {
  const std::size_t n = d.size();
  if (n < 2) throw ClusteringError(Kind::TooFewPoints, "a spanning tree needs at least 2 points");
  std::vector<bool> in_tree(n, false);
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> from(n, 0);
  std::vector<Edge> edges;
  edges.reserve(n - 1);
  std::size_t current = 0;
  in_tree[0] = true;
  for (std::size_t step = 1; step < n; ++step) {
    std::size_t next = kNone;
    for (std::size_t v = 0; v < n; ++v) {
      if (in_tree[v]) continue;
      double w = d(current, v);
      if (w < best[v]) {
        best[v] = w;
        from[v] = current;
      }
      if (next == kNone || best[v] < best[next]) next = v;
    }
    in_tree[next] = true;
    edges.push_back({std::min(from[next], next), std::max(from[next], next), best[next]});
    current = next;
  }
  std::sort(edges.begin(), edges.end(), edge_less);
  return edges;
}

std::vector<Edge> minimum_spanning_tree(const MutualReachability& mreach) {
  return minimum_spanning_tree(mreach.matrix());
}

ClusterAssignment hdbscan_cluster(const DistanceMatrix& distances, const ClusteringParams& p) {
  return cluster_distances(distances, p);
}

ClusterAssignment hdbscan_cluster(const EmbeddingMatrix& e, const ClusteringParams& p) {
  p.validate();
  if (e.rows() < p.min_cluster_size && p.noise_policy == NoisePolicy::SingletonClusters)
    return all_singletons(e.rows());
  return cluster_distances(pairwise_distances(e, p.metric), p);
}

std::string assignment_to_json(const ClusterAssignment& a, const std::vector<std::string>& ids,
                               const ClusteringParams& p) {
  if (ids.size() != a.labels.size()) throw Error("assignment has " + std::to_string(a.labels.size()) +
                                                 " labels but " + std::to_string(ids.size()) + " ids");
  nlohmann::ordered_json j;
  j["params"] = {{"min_cluster_size", p.min_cluster_size},
                 {"min_samples", p.min_samples},
                 {"metric", to_string(p.metric)},
                 {"selection", to_string(p.selection)},
                 {"noise_policy", to_string(p.noise_policy)}};
  j["n_clusters"] = a.n_clusters;
  auto& rows = j["assignments"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < ids.size(); ++i) rows.push_back({{"id", ids[i]}, {"cluster", a.labels[i]}});
  auto& stab = j["stabilities"] = nlohmann::ordered_json::array();
  for (const auto& [cl, s] : a.stabilities) stab.push_back({{"cluster", cl}, {"stability", s}});
  return j.dump(2) + "\n";
}

ClusterAssignment assignment_from_json(const std::string& text, const std::vector<std::string>& ids) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("invalid cluster assignment JSON: ") + e.what());
  }
  try {
    std::unordered_map<std::string, int> by_id;
    for (const auto& row : j.at("assignments")) by_id[row.at("id").get<std::string>()] = row.at("cluster").get<int>();
    ClusterAssignment a;
    a.n_clusters = j.at("n_clusters").get<std::size_t>();
    for (const auto& id : ids) {
      auto it = by_id.find(id);
      if (it == by_id.end()) throw Error("cluster assignment has no entry for frame " + id);
      if (it->second >= static_cast<int>(a.n_clusters) || it->second < -1)
        throw Error("cluster id out of range for frame " + id);
      a.labels.push_back(it->second);
    }
    if (j.contains("stabilities"))
      for (const auto& row : j.at("stabilities"))
        a.stabilities[row.at("cluster").get<int>()] = row.at("stability").get<double>();
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed cluster assignment: ") + e.what());
  }
}

}  // namespace vivecap::cluster
