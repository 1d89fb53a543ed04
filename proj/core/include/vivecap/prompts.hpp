#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "vivecap/caption.hpp"
#include "vivecap/character_set.hpp"
#include "vivecap/dataset.hpp"
#include "vivecap/roster.hpp"

namespace vivecap::vlm {

struct SheetEntry {
  std::string name;
  std::string image_path;
  std::string description;

  bool operator==(const SheetEntry&) const = default;
};

/// Reference image and description per character, used as in-context
/// grounding for the detector, captioner and judge.
class CharacterSheet {
 public:
  CharacterSheet() = default;
  /// Names must be roster members (exact spelling) and unique.
  CharacterSheet(std::vector<SheetEntry> entries, const Roster& roster);

  const std::vector<SheetEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  /// Entries whose name is in `names`, in sheet order.
  CharacterSheet subset(const CharacterSet& names) const;

 private:
  std::vector<SheetEntry> entries_;
};

/// JSON array of {"name", "image_path", "description"?}. Relative image
/// paths resolve against the sheet file's directory.
CharacterSheet load_character_sheet(const std::filesystem::path& path, const Roster& roster);

enum class PromptKind { Detect, Caption, Judge };
const char* to_string(PromptKind k);

struct ContentPart {
  enum class Type { Text, Image };
  Type type = Type::Text;
  std::string value;  // text, or image path

  static ContentPart text(std::string t) { return {Type::Text, std::move(t)}; }
  static ContentPart image(std::string path) { return {Type::Image, std::move(path)}; }
  bool operator==(const ContentPart&) const = default;
};

struct Message {
  std::string role;
  std::vector<ContentPart> parts;
  bool operator==(const Message&) const = default;
};

struct PromptBundle {
  PromptKind kind = PromptKind::Detect;
  std::vector<Message> messages;

  std::vector<std::string> image_paths() const;
  std::size_t image_count() const { return image_paths().size(); }
};

/// Deterministic JSON form with images referenced by path.
std::string bundle_to_json(const PromptBundle& bundle);

class PromptError : public Error {
 public:
  enum class Kind { MissingImage, EmptySheet, Template };
  PromptError(Kind kind, std::string path, const std::string& detail)
      : Error(detail), kind_(kind), path_(std::move(path)) {}
  Kind kind() const noexcept { return kind_; }
  const std::string& path() const noexcept { return path_; }

 private:
  Kind kind_;
  std::string path_;
};

/// Prompt texts with named placeholders: {{ROSTER}} in detect_user;
/// {{CHARACTER_CONTEXT}} and {{TARGET_IMAGE}} in caption and judge;
/// {{CANDIDATE_CAPTION}} in judge.
struct PromptTemplates {
  std::string detect_system;
  std::string detect_user;
  std::string caption;
  std::string judge;

  /// Templates compiled into the library.
  static const PromptTemplates& builtin();
  /// Reads detect_system.txt, detect_user.txt, caption.txt and judge.txt.
  static PromptTemplates load(const std::filesystem::path& dir);
};

/// Roster as the prompt lists it: `["Ellie", "Jay", ...]` in roster order.
std::string roster_literal(const Roster& roster);

/// System message, character block between "===POTENTIAL CHARACTERS HERE==="
/// sentinels, target block between "===TARGET IMAGE HERE===" sentinels, then
/// the instruction. Throws PromptError(EmptySheet) for an empty sheet and
/// PromptError(MissingImage) when an image file does not exist.
PromptBundle build_detect_prompt(const CharacterSheet& sheet, const Roster& roster, const Frame& target,
                                 const PromptTemplates& templates = PromptTemplates::builtin());

/// Caption instruction with the character context limited to `sheet_subset`
/// (possibly empty).
PromptBundle build_caption_prompt(const CharacterSheet& sheet_subset, const Frame& target,
                                  const PromptTemplates& templates = PromptTemplates::builtin());

/// Judge rubric with full character context; the candidate caption,
/// pretty-printed, closes the request.
PromptBundle build_judge_prompt(const CharacterSheet& sheet, const Frame& target,
                                const StructuredCaption& candidate,
                                const PromptTemplates& templates = PromptTemplates::builtin());

}  // namespace vivecap::vlm
