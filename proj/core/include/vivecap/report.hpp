#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vivecap/gateway.hpp"
#include "vivecap/grounded_metrics.hpp"

namespace vivecap::report {

/// Per-section means of judge scores. overall() is recomputed from them.
struct JudgedMeans {
  double scene = 0.0;
  double background = 0.0;
  double characters = 0.0;
  double salient_objects = 0.0;
  std::size_t n = 0;

  double overall() const { return (scene + background + characters + salient_objects) / 4.0; }
};

/// Throws Error on an empty list.
JudgedMeans mean_scorecards(const std::vector<vlm::Scorecard>& cards);

struct Variant {
  std::string label;
  std::optional<metrics::AggregateGroundedMetrics> grounded;
  std::optional<JudgedMeans> judged;
};

struct Tables {
  std::string markdown;
  std::string grounded_csv;  // metric x variant
  std::string judged_csv;    // metric x variant, Overall first
};

/// Instance-grounded grid (precision, recall, macro F1, mistakes) and judge
/// grid (overall, salient objects, characters, background, scene). Variants
/// missing a section show "-" there. Throws Error when `variants` is empty.
Tables emit_aggregate_tables(const std::vector<Variant>& variants);

inline constexpr std::array<std::string_view, 4> kRadarAxes = {"scene", "background", "characters",
                                                               "salient_objects"};

struct RadarSeries {
  std::string label;
  std::map<std::string, double> scores;  // keyed by kRadarAxes
};

struct RadarData {
  std::vector<RadarSeries> series;

  /// Throws Error when a series misses an axis or a score is outside [1, 10].
  void validate() const;
};

inline constexpr double kRadarRadius = 200.0;

/// Standalone SVG, one <polygon> per series. A score s sits at radius
/// kRadarRadius * (s - 1) / 9 from the centre along its axis.
std::string render_radar_svg(const RadarData& data);
void emit_radar_svg(const RadarData& data, const std::filesystem::path& path);

/// {"total": N, "series": [{"name", "count", "share"}]} with shares in
/// percent, sorted by name.
std::string distribution_chart_json(const std::map<std::string, std::size_t>& dist);
void emit_distribution_chart_data(const std::map<std::string, std::size_t>& dist,
                                  const std::filesystem::path& path);

/// Writes `content` to `path`, replacing any existing file. Throws IoError.
void write_text_file(const std::filesystem::path& path, std::string_view content);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace vivecap::report
