#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vivecap/caption.hpp"
#include "vivecap/character_set.hpp"
#include "vivecap/error.hpp"
#include "vivecap/roster.hpp"

namespace vivecap {

struct Frame {
  std::string id;
  std::string image_path;
  std::optional<double> timestamp_s;

  bool operator==(const Frame&) const = default;
};

struct GoldLabel {
  std::string frame_id;
  CharacterSet characters;

  bool operator==(const GoldLabel&) const = default;
};

struct CaptionedFrame {
  Frame frame;
  StructuredCaption caption;
  std::optional<std::string> raw_model_output;
};

class DatasetError : public Error {
 public:
  enum class Kind { Parse, DuplicateId, EmptyImagePath, UnresolvedKey, NonRosterName };

  DatasetError(Kind kind, std::string source, std::size_t line, const std::string& detail);

  Kind kind() const noexcept { return kind_; }
  const std::string& source() const noexcept { return source_; }
  /// 1-based line in the source file, 0 when not applicable.
  std::size_t line() const noexcept { return line_; }

 private:
  Kind kind_;
  std::string source_;
  std::size_t line_;
};

/// Frames plus optional gold labels and captions keyed by frame id.
class DatasetManifest {
 public:
  DatasetManifest() = default;
  /// Throws DatasetError on duplicate ids or empty image paths.
  explicit DatasetManifest(std::vector<Frame> frames);

  const std::vector<Frame>& frames() const noexcept { return frames_; }
  const Frame* find(const std::string& id) const;

  const std::map<std::string, GoldLabel>& labels() const noexcept { return labels_; }
  const std::map<std::string, CaptionedFrame>& captions() const noexcept { return captions_; }

  /// Both setters throw DatasetError(UnresolvedKey) when a key names no frame.
  void set_labels(std::map<std::string, GoldLabel> labels);
  void set_captions(std::map<std::string, CaptionedFrame> captions);

 private:
  std::vector<Frame> frames_;
  std::map<std::string, std::size_t> index_;
  std::map<std::string, GoldLabel> labels_;
  std::map<std::string, CaptionedFrame> captions_;
};

// JSON Lines readers and writers. Relative image paths are kept as written.
std::vector<Frame> read_frames_jsonl(const std::filesystem::path& path);
void write_frames_jsonl(const std::vector<Frame>& frames, const std::filesystem::path& path);

/// Names are resolved to roster spelling; unknown names throw
/// DatasetError(NonRosterName).
std::map<std::string, GoldLabel> read_labels_jsonl(const std::filesystem::path& path, const Roster& roster);
void write_labels_jsonl(const std::map<std::string, GoldLabel>& labels, const std::filesystem::path& path);

/// `frames` supplies the Frame record for each caption; captions whose
/// frame_id is not among them throw DatasetError(UnresolvedKey).
std::vector<CaptionedFrame> read_captions_jsonl(const std::filesystem::path& path,
                                                const std::vector<Frame>& frames);
void write_captions_jsonl(const std::vector<CaptionedFrame>& captions, const std::filesystem::path& path);

}  // namespace vivecap
