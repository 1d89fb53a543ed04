#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vivecap/caption.hpp"
#include "vivecap/dataset.hpp"
#include "vivecap/gateway.hpp"
#include "vivecap/prompts.hpp"

namespace vivecap::vlm {

struct ErrorRecord {
  std::string frame_id;
  std::string stage;  // "detect", "caption" or "judge"
  std::string error;
  std::optional<std::string> raw;
};

struct FrameResult {
  std::string frame_id;
  std::optional<CharacterSet> detected;
  std::vector<std::string> warnings;
  std::optional<CaptionedFrame> captioned;
  std::optional<ErrorRecord> error;
};

struct JudgeResult {
  std::string frame_id;
  std::optional<Scorecard> scorecard;
  std::optional<ErrorRecord> error;
};

/// Detected: captioner sees only the detector's characters.
/// AllCharacters: no detection stage, captioner sees the whole sheet.
enum class ContextMode { Detected, AllCharacters };

struct PipelineOptions {
  ContextMode context = ContextMode::Detected;
  RequestLog* log = nullptr;
  const PromptTemplates* templates = nullptr;  // null: builtin
  std::function<void(const std::string&)> on_progress;
};

class BatchEmptyError : public Error {
 public:
  BatchEmptyError() : Error("batch is empty") {}
};

/// Per frame: detect, parse, caption with the detected subset, parse.
/// Results come back in input order; a failing frame yields an error record
/// and the batch carries on. Each endpoint sees at most its max_in_flight
/// concurrent requests.
std::vector<FrameResult> run_two_stage(const EndpointConfig& detector, const EndpointConfig& captioner,
                                       const CharacterSheet& sheet, const Roster& roster,
                                       const std::vector<Frame>& frames, const PipelineOptions& options = {});

/// Detection stage alone.
std::vector<FrameResult> run_detection(const EndpointConfig& detector, const CharacterSheet& sheet,
                                       const Roster& roster, const std::vector<Frame>& frames,
                                       const PipelineOptions& options = {});

/// Captioning stage alone. Under ContextMode::Detected a frame missing from
/// `detected` becomes an error record.
std::vector<FrameResult> run_captioning(const EndpointConfig& captioner, const CharacterSheet& sheet,
                                        const std::vector<Frame>& frames,
                                        const std::map<std::string, CharacterSet>& detected,
                                        const PipelineOptions& options = {});

std::vector<JudgeResult> run_judge(const EndpointConfig& judge, const CharacterSheet& sheet,
                                   const std::vector<std::pair<Frame, StructuredCaption>>& pairs,
                                   const PipelineOptions& options = {});

// JSON Lines records for batch outputs.
std::string error_record_to_json(const ErrorRecord& e);
std::string detection_to_json(const FrameResult& r);
std::string scorecard_to_json(const std::string& frame_id, const Scorecard& s);

/// Reads {"frame_id", "scene_score", ..., "rationale"} lines.
std::vector<std::pair<std::string, Scorecard>> read_scorecards_jsonl(const std::string& path);

}  // namespace vivecap::vlm
