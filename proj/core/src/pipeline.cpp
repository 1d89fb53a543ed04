#include "vivecap/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <semaphore>
#include <thread>

#include <nlohmann/json.hpp>

#include "jsonl.hpp"

namespace vivecap::vlm {
namespace {

// Bounds concurrent requests to one endpoint.
class Gate {
 public:
  explicit Gate(int n) : sem_(n) {}
  template <typename Fn>
  auto run(Fn&& fn) {
    sem_.acquire();
    struct Release {
      std::counting_semaphore<>& s;
      ~Release() { s.release(); }
    } release{sem_};
    return fn();
  }

 private:
  std::counting_semaphore<> sem_;
};

// Runs job(i) for i in [0, n) on `workers` threads; job must not throw.
template <typename Job>
void parallel_for(std::size_t n, int workers, Job&& job) {
  const std::size_t threads = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, workers)));
  std::atomic<std::size_t> next{0};
  auto loop = [&] {
    for (std::size_t i = next++; i < n; i = next++) job(i);
  };
  std::vector<std::jthread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(loop);
  loop();
}

class Progress {
 public:
  explicit Progress(const PipelineOptions& o) : fn_(o.on_progress) {}
  void operator()(const std::string& id) {
    if (!fn_) return;
    std::lock_guard lock(mu_);
    fn_(id);
  }

 private:
  std::function<void(const std::string&)> fn_;
  std::mutex mu_;
};

const PromptTemplates& templates_of(const PipelineOptions& o) {
  return o.templates ? *o.templates : PromptTemplates::builtin();
}

ErrorRecord record(const std::string& frame_id, const std::string& stage, const std::exception& e) {
  ErrorRecord r{frame_id, stage, e.what(), std::nullopt};
  if (auto* p = dynamic_cast<const OutputParseError*>(&e)) r.raw = p->raw();
  if (auto* p = dynamic_cast<const CaptionParseError*>(&e)) r.raw = p->raw();
  if (auto* p = dynamic_cast<const GatewayError*>(&e); p && !p->body().empty()) r.raw = p->body();
  return r;
}

// Detection for one frame; fills detected/warnings or error.
void detect_frame(FrameResult& out, const Frame& frame, const EndpointConfig& cfg, Gate& gate,
                  const CharacterSheet& sheet, const Roster& roster, const PipelineOptions& o) {
  try {
    PromptBundle bundle = build_detect_prompt(sheet, roster, frame, templates_of(o));
    std::string raw = gate.run([&] { return complete(cfg, bundle, o.log, "detect:" + frame.id); });
    DetectionResult det = parse_detection(raw, roster);
    for (const auto& name : det.dropped) out.warnings.push_back("DroppedName(" + name + ")");
    out.detected = std::move(det.characters);
  } catch (const std::exception& e) {
    out.error = record(frame.id, "detect", e);
  }
}

void caption_frame(FrameResult& out, const Frame& frame, const CharacterSheet& context, const EndpointConfig& cfg,
                   Gate& gate, const PipelineOptions& o) {
  std::string raw;
  try {
    PromptBundle bundle = build_caption_prompt(context, frame, templates_of(o));
    raw = gate.run([&] { return complete(cfg, bundle, o.log, "caption:" + frame.id); });
    CaptionedFrame cf;
    cf.frame = frame;
    cf.caption = parse_structured_caption(raw);
    cf.raw_model_output = raw;
    out.captioned = std::move(cf);
  } catch (const std::exception& e) {
    out.error = record(frame.id, "caption", e);
  }
}

void require_frames(std::size_t n) {
  if (n == 0) throw BatchEmptyError();
}

}  // namespace

std::vector<FrameResult> run_two_stage(const EndpointConfig& detector, const EndpointConfig& captioner,
                                       const CharacterSheet& sheet, const Roster& roster,
                                       const std::vector<Frame>& frames, const PipelineOptions& options) {
  require_frames(frames.size());
  captioner.validate();
  if (options.context == ContextMode::Detected) detector.validate();
  Gate detect_gate(detector.max_in_flight > 0 ? detector.max_in_flight : 1);
  Gate caption_gate(captioner.max_in_flight);
  Progress progress(options);
  std::vector<FrameResult> results(frames.size());
  const int workers = std::max(detector.max_in_flight, captioner.max_in_flight);
  parallel_for(frames.size(), workers, [&](std::size_t i) {
    const Frame& frame = frames[i];
    FrameResult& out = results[i];
    out.frame_id = frame.id;
    if (options.context == ContextMode::AllCharacters) {
      caption_frame(out, frame, sheet, captioner, caption_gate, options);
    } else {
      detect_frame(out, frame, detector, detect_gate, sheet, roster, options);
      if (out.detected) caption_frame(out, frame, sheet.subset(*out.detected), captioner, caption_gate, options);
    }
    progress(frame.id);
  });
  return results;
}

std::vector<FrameResult> run_detection(const EndpointConfig& detector, const CharacterSheet& sheet,
                                       const Roster& roster, const std::vector<Frame>& frames,
                                       const PipelineOptions& options) {
  require_frames(frames.size());
  detector.validate();
  Gate gate(detector.max_in_flight);
  Progress progress(options);
  std::vector<FrameResult> results(frames.size());
  parallel_for(frames.size(), detector.max_in_flight, [&](std::size_t i) {
    results[i].frame_id = frames[i].id;
    detect_frame(results[i], frames[i], detector, gate, sheet, roster, options);
    progress(frames[i].id);
  });
  return results;
}

std::vector<FrameResult> run_captioning(const EndpointConfig& captioner, const CharacterSheet& sheet,
                                        const std::vector<Frame>& frames,
                                        const std::map<std::string, CharacterSet>& detected,
                                        const PipelineOptions& options) {
  require_frames(frames.size());
  captioner.validate();
  Gate gate(captioner.max_in_flight);
  Progress progress(options);
  std::vector<FrameResult> results(frames.size());
  parallel_for(frames.size(), captioner.max_in_flight, [&](std::size_t i) {
    const Frame& frame = frames[i];
    FrameResult& out = results[i];
    out.frame_id = frame.id;
    if (options.context == ContextMode::AllCharacters) {
      caption_frame(out, frame, sheet, captioner, gate, options);
    } else if (auto it = detected.find(frame.id); it != detected.end()) {
      out.detected = it->second;
      caption_frame(out, frame, sheet.subset(it->second), captioner, gate, options);
    } else {
      out.error = ErrorRecord{frame.id, "caption", "no detection result for frame " + frame.id, std::nullopt};
    }
    progress(frame.id);
  });
  return results;
}

std::vector<JudgeResult> run_judge(const EndpointConfig& judge, const CharacterSheet& sheet,
                                   const std::vector<std::pair<Frame, StructuredCaption>>& pairs,
                                   const PipelineOptions& options) {
  require_frames(pairs.size());
  judge.validate();
  Gate gate(judge.max_in_flight);
  Progress progress(options);
  std::vector<JudgeResult> results(pairs.size());
  parallel_for(pairs.size(), judge.max_in_flight, [&](std::size_t i) {
    const auto& [frame, caption] = pairs[i];
    JudgeResult& out = results[i];
    out.frame_id = frame.id;
    try {
      PromptBundle bundle = build_judge_prompt(sheet, frame, caption, templates_of(options));
      std::string raw = gate.run([&] { return complete(judge, bundle, options.log, "judge:" + frame.id); });
      out.scorecard = parse_scorecard(raw);
    } catch (const std::exception& e) {
      out.error = record(frame.id, "judge", e);
    }
    progress(frame.id);
  });
  return results;
}

std::string error_record_to_json(const ErrorRecord& e) {
  nlohmann::ordered_json j;
  j["frame_id"] = e.frame_id;
  j["stage"] = e.stage;
  j["error"] = e.error;
  if (e.raw) j["raw"] = *e.raw;
  return j.dump();
}

std::string detection_to_json(const FrameResult& r) {
  nlohmann::ordered_json j;
  j["frame_id"] = r.frame_id;
  j["characters"] = r.detected ? std::vector<std::string>(r.detected->begin(), r.detected->end())
                               : std::vector<std::string>{};
  if (!r.warnings.empty()) j["warnings"] = r.warnings;
  return j.dump();
}

std::string scorecard_to_json(const std::string& frame_id, const Scorecard& s) {
  nlohmann::ordered_json j;
  j["frame_id"] = frame_id;
  j["scene_score"] = s.scene;
  j["background_score"] = s.background;
  j["characters_score"] = s.characters;
  j["salient_objects_score"] = s.salient_objects;
  j["overall"] = s.overall();
  j["rationale"] = s.rationale;
  return j.dump();
}

std::vector<std::pair<std::string, Scorecard>> read_scorecards_jsonl(const std::string& path) {
  std::vector<std::pair<std::string, Scorecard>> out;
  detail::for_each_jsonl(
      path,
      [&](std::size_t line, const nlohmann::json& j) {
        if (!j.is_object() || !j.contains("frame_id") || !j.at("frame_id").is_string())
          throw Error(path + ":" + std::to_string(line) + ": scorecard needs a string frame_id");
        try {
          out.emplace_back(j.at("frame_id").get<std::string>(), parse_scorecard(j.dump()));
        } catch (const OutputParseError& e) {
          throw Error(path + ":" + std::to_string(line) + ": " + e.what());
        }
      },
      [&](std::size_t line, const std::string& msg) { throw Error(path + ":" + std::to_string(line) + ": " + msg); });
  return out;
}

}  // namespace vivecap::vlm
