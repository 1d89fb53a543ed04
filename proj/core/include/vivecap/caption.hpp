#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vivecap/character_set.hpp"
#include "vivecap/error.hpp"
#include "vivecap/roster.hpp"

namespace vivecap {

/// Reserved identity used by captioners and judges when unsure. It is never a
/// roster member and never counted as a character claim.
inline constexpr std::string_view kUnknownCharacter = "Unknown Character";

/// Per-character block of a structured caption. Fields are optional so that a
/// caption missing one still parses; validation reports the gap.
struct CharacterEntry {
  std::optional<std::string> description;
  std::optional<std::string> location;
  std::optional<std::string> expression;
  std::optional<std::string> pose;

  bool operator==(const CharacterEntry&) const = default;
};

struct StructuredCaption {
  std::string scene;
  std::string background;
  std::map<std::string, CharacterEntry> characters;
  std::map<std::string, std::string> salient_objects;

  bool operator==(const StructuredCaption&) const = default;
};

class CaptionParseError : public Error {
 public:
  enum class Kind { MalformedJson, MissingKey, UnexpectedKey, DuplicateKey, WrongShape };

  CaptionParseError(Kind kind, std::string path, std::size_t offset, std::string raw,
                    const std::string& detail);

  Kind kind() const noexcept { return kind_; }
  /// JSON-pointer-like location of the problem ("/characters/Ellie/pose").
  const std::string& path() const noexcept { return path_; }
  /// Byte offset into the raw input where parsing failed.
  std::size_t offset() const noexcept { return offset_; }
  const std::string& raw() const noexcept { return raw_; }

 private:
  Kind kind_;
  std::string path_;
  std::size_t offset_;
  std::string raw_;
};

const char* to_string(CaptionParseError::Kind kind);

/// Parses a captioner response. Markdown code fences around the object are
/// tolerated. `characters` or `salient_objects` given as the empty string are
/// read as empty maps. Any other deviation from the four-key schema throws.
StructuredCaption parse_structured_caption(std::string_view raw);

/// Canonical JSON text: keys in schema order (scene, background, characters,
/// salient_objects; description, location, expression, pose), map entries in
/// byte order. `indent < 0` gives the compact single-line form.
std::string serialize_caption(const StructuredCaption& caption, int indent = -1);

enum class ViolationKind { UnknownCharacter, MissingField, DuplicateName };

struct Violation {
  ViolationKind kind;
  std::string subject;  // character key as written in the caption
  std::string detail;   // missing field name, or the colliding key

  bool operator==(const Violation&) const = default;
};

std::string describe(const Violation& v);

struct ValidationReport {
  std::vector<Violation> violations;
  bool adherent() const noexcept { return violations.empty(); }
};

/// Structured-output adherence check against the roster.
ValidationReport validate_structured_caption(const StructuredCaption& caption, const Roster& roster);

enum class TokenRule { Whitespace, Bytes };
enum class LengthTarget { Serialized, Dense };

struct UniversalCheckConfig {
  std::size_t max_caption_tokens = 1024;
  TokenRule tokenization_rule = TokenRule::Whitespace;
  LengthTarget target = LengthTarget::Serialized;

  /// Throws Error when max_caption_tokens is zero.
  void validate() const;
};

struct TokenCount {
  std::size_t count = 0;
  bool too_long = false;
};

/// Length check; too_long is inclusive at the limit.
TokenCount caption_token_count(const StructuredCaption& caption, const UniversalCheckConfig& cfg = {});

std::size_t count_tokens(std::string_view text, TokenRule rule);

/// Single-paragraph rendering: scene, background, characters by name, then
/// salient objects by name. Empty fields are skipped.
std::string collapse_to_dense(const StructuredCaption& caption);

/// Character keys resolved to roster spelling. "Unknown Character" and
/// non-roster keys are left out.
CharacterSet extract_characters(const StructuredCaption& caption, const Roster& roster);

}  // namespace vivecap
