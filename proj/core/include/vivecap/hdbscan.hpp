#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "vivecap/embeddings.hpp"
#include "vivecap/error.hpp"

namespace vivecap::cluster {

enum class Metric { EuclideanOnL2Normalized, EuclideanRaw };
enum class Selection { ExcessOfMass, Leaf };
enum class NoisePolicy { Exclude, SingletonClusters };

struct ClusteringParams {
  std::size_t min_cluster_size = 5;
  std::size_t min_samples = 5;
  Metric metric = Metric::EuclideanOnL2Normalized;
  Selection selection = Selection::ExcessOfMass;
  NoisePolicy noise_policy = NoisePolicy::Exclude;

  /// Throws ClusteringError(InvalidParams).
  void validate() const;
};

const char* to_string(Metric m);
const char* to_string(Selection s);
const char* to_string(NoisePolicy p);
Metric parse_metric(const std::string& s);
Selection parse_selection(const std::string& s);
NoisePolicy parse_noise_policy(const std::string& s);

class ClusteringError : public Error {
 public:
  enum class Kind { InvalidParams, TooFewPoints, DegenerateData };
  ClusteringError(Kind kind, const std::string& detail) : Error(detail), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Dense symmetric n x n distance table with a zero diagonal.
class DistanceMatrix {
 public:
  DistanceMatrix() = default;
  explicit DistanceMatrix(std::size_t n) : n_(n), d_(n * n, 0.0) {}

  std::size_t size() const noexcept { return n_; }
  double operator()(std::size_t a, std::size_t b) const { return d_[a * n_ + b]; }
  void set(std::size_t a, std::size_t b, double v) {
    d_[a * n_ + b] = v;
    d_[b * n_ + a] = v;
  }

 private:
  std::size_t n_ = 0;
  std::vector<double> d_;
};

DistanceMatrix pairwise_distances(const EmbeddingMatrix& e, Metric metric);

/// d_mreach(a,b) = max(core(a), core(b), d(a,b)) where core(x) is the
/// distance from x to its min_samples-th nearest neighbour, x itself excluded.
/// The diagonal stays 0.
class MutualReachability {
 public:
  std::size_t size() const noexcept { return matrix_.size(); }
  double operator()(std::size_t a, std::size_t b) const { return matrix_(a, b); }
  const std::vector<double>& core_distances() const noexcept { return core_; }
  const DistanceMatrix& matrix() const noexcept { return matrix_; }

 private:
  friend MutualReachability mutual_reachability(DistanceMatrix distances, std::size_t min_samples);
  DistanceMatrix matrix_;
  std::vector<double> core_;
};

/// Throws ClusteringError(TooFewPoints) unless n >= min_samples + 1.
MutualReachability mutual_reachability(DistanceMatrix distances, std::size_t min_samples);
MutualReachability mutual_reachability(const EmbeddingMatrix& e, std::size_t min_samples,
                                       Metric metric = Metric::EuclideanRaw);

struct Edge {
  std::size_t a;
  std::size_t b;
  double weight;
};

/// Prim's algorithm on the dense graph. Returns n-1 edges sorted by ascending
/// weight (ties by endpoints).
std::vector<Edge> minimum_spanning_tree(const DistanceMatrix& distances);
std::vector<Edge> minimum_spanning_tree(const MutualReachability& mreach);

struct ClusterAssignment {
  std::vector<int> labels;  // cluster id, or -1 for noise
  std::size_t n_clusters = 0;
  std::map<int, double> stabilities;
};

/// HDBSCAN: mutual reachability, MST, single-linkage hierarchy, condensation
/// by min_cluster_size, stability-based selection. Cluster ids are ordered by
/// their smallest member index. Under NoisePolicy::SingletonClusters every
/// noise point becomes its own cluster, appended after the density clusters.
///
/// Throws ClusteringError(TooFewPoints) when n < min_cluster_size, except
/// under SingletonClusters where every point becomes a singleton.
ClusterAssignment hdbscan_cluster(const EmbeddingMatrix& e, const ClusteringParams& p);
ClusterAssignment hdbscan_cluster(const DistanceMatrix& distances, const ClusteringParams& p);

/// {"params": {...}, "n_clusters": k, "assignments": [{"id", "cluster"}],
///  "stabilities": [{"cluster", "stability"}]}
std::string assignment_to_json(const ClusterAssignment& a, const std::vector<std::string>& ids,
                               const ClusteringParams& p);
/// Reorders labels to follow `ids`; throws Error when an id is missing.
ClusterAssignment assignment_from_json(const std::string& text, const std::vector<std::string>& ids);

}  // namespace vivecap::cluster
