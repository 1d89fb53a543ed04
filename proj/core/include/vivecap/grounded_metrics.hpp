#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vivecap/character_set.hpp"
#include "vivecap/dataset.hpp"
#include "vivecap/roster.hpp"

namespace vivecap::metrics {

/// Which set difference counts as a false positive.
///  - Standard: fp = |pred \ gold|, fn = |gold \ pred|.
///  - Swapped: fp = |gold \ pred|, fn = |pred \ gold| (the reversed
///    reading some write-ups print). Mistakes and F1 do not change.
enum class FpFnConvention { Standard, Swapped };

const char* to_string(FpFnConvention c);
FpFnConvention parse_convention(const std::string& s);

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  bool operator==(const ConfusionCounts&) const = default;
};

struct GroundedMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t mistakes = 0;

  bool operator==(const GroundedMetrics&) const = default;
};

struct AggregateGroundedMetrics {
  double mean_precision = 0.0;
  double mean_recall = 0.0;
  double macro_f1 = 0.0;
  double mean_mistakes = 0.0;
  std::size_t n_examples = 0;
};

class MetricsError : public Error {
 public:
  enum class Kind { EmptyList, MissingPrediction };
  MetricsError(Kind kind, std::string frame_id, const std::string& detail)
      : Error(detail), kind_(kind), frame_id_(std::move(frame_id)) {}
  Kind kind() const noexcept { return kind_; }
  const std::string& frame_id() const noexcept { return frame_id_; }

 private:
  Kind kind_;
  std::string frame_id_;
};

/// Throws NonRosterNameError when either set holds a non-member.
ConfusionCounts confusion_counts(const CharacterSet& gold, const CharacterSet& pred, const Roster& roster,
                                 FpFnConvention convention = FpFnConvention::Standard);

/// Precision, recall, F1 and mistakes for one example. When gold and
/// prediction are both empty every ratio is 1; any other zero denominator
/// gives 0 for that ratio.
GroundedMetrics per_example_metrics(const ConfusionCounts& c);

/// Field-wise arithmetic mean (macro F1 is the mean of per-example F1).
/// Throws MetricsError(EmptyList).
AggregateGroundedMetrics aggregate(const std::vector<GroundedMetrics>& metrics);

struct FrameEvaluation {
  std::string frame_id;
  bool scored = false;  // false when the frame has a prediction but no label
  ConfusionCounts counts;
  GroundedMetrics metrics;
  bool both_empty = false;
};

struct DatasetEvaluation {
  AggregateGroundedMetrics aggregate;
  std::vector<FrameEvaluation> per_frame;  // manifest order
  std::size_t n_both_empty = 0;
  FpFnConvention convention = FpFnConvention::Standard;
};

/// Scores every labelled frame. Frames with a prediction but no label are
/// listed as unscored. Throws MetricsError(MissingPrediction) for a labelled
/// frame without a prediction, MetricsError(EmptyList) when nothing is scored.
DatasetEvaluation evaluate_dataset(const DatasetManifest& manifest,
                                   const std::map<std::string, CharacterSet>& predictions,
                                   const Roster& roster,
                                   FpFnConvention convention = FpFnConvention::Standard);

/// {"aggregate": {...}, "per_frame": [...]}.
std::string evaluation_to_json(const DatasetEvaluation& ev);
/// frame_id,scored,tp,fp,fn,precision,recall,f1,mistakes
std::string evaluation_to_csv(const DatasetEvaluation& ev);
AggregateGroundedMetrics aggregate_from_json(const std::string& text);

/// Predictions JSONL: {"frame_id", "characters": [...]}. Names resolve to
/// roster spelling; unknown names throw NonRosterNameError.
std::map<std::string, CharacterSet> read_predictions_jsonl(const std::string& path, const Roster& roster);

}  // namespace vivecap::metrics
