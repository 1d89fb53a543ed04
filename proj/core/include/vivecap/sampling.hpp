#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vivecap/dataset.hpp"
#include "vivecap/embeddings.hpp"
#include "vivecap/hdbscan.hpp"

namespace vivecap::cluster {

enum class SampleStrategy { SeededRandom, Medoid };

const char* to_string(SampleStrategy s);
SampleStrategy parse_sample_strategy(const std::string& s);

struct SampleManifest {
  std::map<int, std::string> chosen;  // cluster id -> frame id
  std::uint64_t seed = 0;
  SampleStrategy strategy = SampleStrategy::SeededRandom;
  std::size_t n_frames = 0;  // corpus size the sample was drawn from

  /// Sample size as a percentage of the corpus.
  double share_percent() const;
};

/// One frame per cluster. SeededRandom draws uniformly within each cluster
/// from a generator keyed on (seed, cluster id); Medoid takes the member with
/// the smallest summed distance to the rest of its cluster, ties broken by
/// the lexicographically smallest frame id.
SampleManifest stratified_sample(const EmbeddingMatrix& e, const ClusterAssignment& assignment,
                                 SampleStrategy strategy, std::uint64_t seed,
                                 Metric metric = Metric::EuclideanOnL2Normalized);

std::string sample_manifest_to_json(const SampleManifest& m);
SampleManifest sample_manifest_from_json(const std::string& text);

class MissingLabelError : public Error {
 public:
  explicit MissingLabelError(std::string frame_id)
      : Error("sampled frame has no gold label: " + frame_id), frame_id_(std::move(frame_id)) {}
  const std::string& frame_id() const noexcept { return frame_id_; }

 private:
  std::string frame_id_;
};

/// Occurrences of each character across the sampled frames, at most one per
/// frame. Characters absent from every sampled frame are not listed.
std::map<std::string, std::size_t> character_distribution(const std::map<std::string, GoldLabel>& labels,
                                                          const SampleManifest& sample);

struct Projection2d {
  std::vector<std::array<double, 2>> points;
  std::array<double, 2> variances{};  // per column, non-increasing
};

/// Mean-centred projection onto the two leading principal directions. Each
/// direction's sign is fixed so its largest-magnitude component is positive.
/// Throws ClusteringError(DegenerateData) when every point is identical.
Projection2d pca_project_2d(const EmbeddingMatrix& e);

}  // namespace vivecap::cluster
