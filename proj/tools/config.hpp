#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <vivecap/caption.hpp>
#include <vivecap/embeddings.hpp>
#include <vivecap/gateway.hpp>
#include <vivecap/grounded_metrics.hpp>
#include <vivecap/hdbscan.hpp>
#include <vivecap/sampling.hpp>
#include <vivecap/sft_export.hpp>

namespace vivecap::cli {

class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class FrameScope { All, Sample };

struct ReportVariant {
  std::string label;
  std::optional<std::filesystem::path> grounded;    // grounded.json
  std::optional<std::filesystem::path> scorecards;  // scorecards.jsonl
};

// Input paths are absolute once loaded: relative entries resolve against the
// config file's directory. Paths to stage outputs (stats.before/after and
// report variants) stay as written and resolve against output_dir at use.
struct RunConfig {
  std::filesystem::path manifest_path;
  std::filesystem::path roster_path;
  std::filesystem::path sheet_path;
  std::optional<std::filesystem::path> labels_path;
  std::optional<std::filesystem::path> embeddings_path;
  cluster::EmbeddingFormat embeddings_format = cluster::EmbeddingFormat::Jsonl;
  std::optional<std::filesystem::path> templates_dir;
  std::filesystem::path output_dir;

  vlm::EndpointConfig detector;
  vlm::EndpointConfig captioner;
  vlm::EndpointConfig judge;

  cluster::ClusteringParams clustering;
  cluster::SampleStrategy sample_strategy = cluster::SampleStrategy::SeededRandom;
  std::uint64_t sample_seed = 0;
  FrameScope frames = FrameScope::All;

  sft::SplitSpec split;
  bool inline_images = false;
  UniversalCheckConfig checks;

  metrics::FpFnConvention convention = metrics::FpFnConvention::Standard;
  std::optional<std::filesystem::path> predictions_path;

  double alpha = 0.05;
  std::optional<std::filesystem::path> stats_before;
  std::optional<std::filesystem::path> stats_after;

  std::vector<ReportVariant> variants;
};

// Throws ConfigError on unreadable TOML, unknown enum values or bad ranges.
RunConfig load_config(const std::filesystem::path& path);

}  // namespace vivecap::cli
