#include "vivecap/prompts.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "builtin_templates.hpp"

namespace vivecap::vlm {
namespace {

using Kind = PromptError::Kind;

constexpr std::string_view kRoster = "{{ROSTER}}";
constexpr std::string_view kContext = "{{CHARACTER_CONTEXT}}";
constexpr std::string_view kTarget = "{{TARGET_IMAGE}}";
constexpr std::string_view kCandidate = "{{CANDIDATE_CAPTION}}";

// Template files end with a newline that is not part of the prompt.
std::string strip_final_newline(std::string s) {
  if (!s.empty() && s.back() == '\n') s.pop_back();
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

void require_placeholder(const std::string& text, std::string_view placeholder, const std::string& name) {
  if (text.find(placeholder) == std::string::npos)
    throw PromptError(Kind::Template, name, "template " + name + " lacks placeholder " + std::string(placeholder));
}

void require_image(const std::string& path) {
  std::error_code ec;
  if (path.empty() || !std::filesystem::is_regular_file(path, ec))
    throw PromptError(Kind::MissingImage, path, "image file not found: " + path);
}

std::string entry_text(const SheetEntry& e) {
  return e.description.empty() ? e.name : e.name + ": " + e.description;
}

std::vector<ContentPart> context_parts(const CharacterSheet& sheet) {
  std::vector<ContentPart> parts;
  for (const auto& e : sheet.entries()) {
    require_image(e.image_path);
    parts.push_back(ContentPart::image(e.image_path));
    parts.push_back(ContentPart::text(entry_text(e)));
  }
  return parts;
}

// Splits `text` at block placeholders. A placeholder on a line of its own
// takes the surrounding line breaks with it.
std::vector<ContentPart> expand(const std::string& text,
                                const std::vector<std::pair<std::string_view, std::vector<ContentPart>>>& blocks) {
  std::vector<ContentPart> out;
  std::size_t pos = 0;
  auto flush = [&](std::string segment) {
    if (!segment.empty()) out.push_back(ContentPart::text(std::move(segment)));
  };
  while (pos <= text.size()) {
    std::size_t best = std::string::npos;
    const std::pair<std::string_view, std::vector<ContentPart>>* hit = nullptr;
    for (const auto& b : blocks) {
      std::size_t at = text.find(b.first, pos);
      if (at < best) {
        best = at;
        hit = &b;
      }
    }
    if (!hit) {
      flush(text.substr(pos));
      break;
    }
    std::size_t seg_end = best;
    if (seg_end > pos && text[seg_end - 1] == '\n') --seg_end;
    flush(text.substr(pos, seg_end - pos));
    out.insert(out.end(), hit->second.begin(), hit->second.end());
    pos = best + hit->first.size();
    if (pos < text.size() && text[pos] == '\n') ++pos;
  }
  return out;
}

std::string read_template(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PromptError(Kind::Template, path.string(), "cannot read template " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return strip_final_newline(ss.str());
}

void validate(const PromptTemplates& t) {
  require_placeholder(t.detect_user, kRoster, "detect_user");
  require_placeholder(t.caption, kContext, "caption");
  require_placeholder(t.caption, kTarget, "caption");
  require_placeholder(t.judge, kContext, "judge");
  require_placeholder(t.judge, kTarget, "judge");
  require_placeholder(t.judge, kCandidate, "judge");
}

nlohmann::ordered_json part_json(const ContentPart& p) {
  if (p.type == ContentPart::Type::Text) return {{"type", "text"}, {"text", p.value}};
  return {{"type", "image"}, {"image", p.value}};
}

}  // namespace

CharacterSheet::CharacterSheet(std::vector<SheetEntry> entries, const Roster& roster) : entries_(std::move(entries)) {
  std::set<std::string> seen;
  for (const auto& e : entries_) {
    auto c = roster.canonical(e.name);
    if (!c || *c != e.name) throw NonRosterNameError(e.name);
    if (!seen.insert(e.name).second) throw Error("character sheet lists " + e.name + " twice");
  }
}

CharacterSheet CharacterSheet::subset(const CharacterSet& names) const {
  CharacterSheet out;
  for (const auto& e : entries_)
    if (names.contains(e.name)) out.entries_.push_back(e);
  return out;
}

CharacterSheet load_character_sheet(const std::filesystem::path& path, const Roster& roster) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string(), "cannot open character sheet");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error("character sheet " + path.string() + " is not valid JSON: " + e.what());
  }
  if (!j.is_array()) throw Error("character sheet " + path.string() + " must be a JSON array");
  const auto base = path.parent_path();
  std::vector<SheetEntry> entries;
  for (const auto& row : j) {
    if (!row.is_object() || !row.contains("name") || !row.at("name").is_string() || !row.contains("image_path") ||
        !row.at("image_path").is_string())
      throw Error("character sheet " + path.string() + ": entries need string name and image_path");
    SheetEntry e;
    auto name = roster.canonical(row.at("name").get<std::string>());
    if (!name) throw NonRosterNameError(row.at("name").get<std::string>());
    e.name = *name;
    std::filesystem::path img = row.at("image_path").get<std::string>();
    e.image_path = (img.is_relative() ? base / img : img).lexically_normal().string();
    if (row.contains("description") && row.at("description").is_string())
      e.description = row.at("description").get<std::string>();
    entries.push_back(std::move(e));
  }
  return CharacterSheet(std::move(entries), roster);
}

const char* to_string(PromptKind k) {
  switch (k) {
    case PromptKind::Detect: return "detect";
    case PromptKind::Caption: return "caption";
    case PromptKind::Judge: return "judge";
  }
  return "unknown";
}

std::vector<std::string> PromptBundle::image_paths() const {
  std::vector<std::string> out;
  for (const auto& m : messages)
    for (const auto& p : m.parts)
      if (p.type == ContentPart::Type::Image) out.push_back(p.value);
  return out;
}

std::string bundle_to_json(const PromptBundle& bundle) {
  nlohmann::ordered_json j;
  j["kind"] = to_string(bundle.kind);
  auto& msgs = j["messages"] = nlohmann::ordered_json::array();
  for (const auto& m : bundle.messages) {
    nlohmann::ordered_json content = nlohmann::ordered_json::array();
    for (const auto& p : m.parts) content.push_back(part_json(p));
    msgs.push_back({{"role", m.role}, {"content", std::move(content)}});
  }
  return j.dump();
}

const PromptTemplates& PromptTemplates::builtin() {
  static const PromptTemplates t = [] {
    PromptTemplates out;
    out.detect_system = strip_final_newline(std::string(detail::kDetectSystemTemplate));
    out.detect_user = strip_final_newline(std::string(detail::kDetectUserTemplate));
    out.caption = strip_final_newline(std::string(detail::kCaptionTemplate));
    out.judge = strip_final_newline(std::string(detail::kJudgeTemplate));
    validate(out);
    return out;
  }();
  return t;
}

PromptTemplates PromptTemplates::load(const std::filesystem::path& dir) {
  PromptTemplates t;
  t.detect_system = read_template(dir / "detect_system.txt");
  t.detect_user = read_template(dir / "detect_user.txt");
  t.caption = read_template(dir / "caption.txt");
  t.judge = read_template(dir / "judge.txt");
  validate(t);
  return t;
}

std::string roster_literal(const Roster& roster) {
  std::string out = "[";
  for (std::size_t i = 0; i < roster.names().size(); ++i) {
    if (i) out += ", ";
    out += nlohmann::json(roster.names()[i]).dump();
  }
  return out + "]";
}

PromptBundle build_detect_prompt(const CharacterSheet& sheet, const Roster& roster, const Frame& target,
                                 const PromptTemplates& templates) {
  if (sheet.empty()) throw PromptError(Kind::EmptySheet, {}, "detection needs a non-empty character sheet");
  require_image(target.image_path);
  PromptBundle b;
  b.kind = PromptKind::Detect;
  b.messages.push_back({"system", {ContentPart::text(templates.detect_system)}});

  Message characters{"user", {ContentPart::text("===POTENTIAL CHARACTERS HERE===")}};
  for (auto& p : context_parts(sheet)) characters.parts.push_back(std::move(p));
  characters.parts.push_back(ContentPart::text("===POTENTIAL CHARACTERS HERE==="));
  b.messages.push_back(std::move(characters));

  b.messages.push_back({"user",
                        {ContentPart::text("===TARGET IMAGE HERE==="), ContentPart::image(target.image_path),
                         ContentPart::text("===TARGET IMAGE HERE===")}});

  std::string instruction = templates.detect_user;
  const std::string literal = roster_literal(roster);
  for (std::size_t at = instruction.find(kRoster); at != std::string::npos;
       at = instruction.find(kRoster, at + literal.size()))
    instruction.replace(at, kRoster.size(), literal);
  b.messages.push_back({"user", {ContentPart::text(std::move(instruction))}});
  return b;
}

PromptBundle build_caption_prompt(const CharacterSheet& sheet_subset, const Frame& target,
                                  const PromptTemplates& templates) {
  require_image(target.image_path);
  PromptBundle b;
  b.kind = PromptKind::Caption;
  b.messages.push_back({"user", expand(templates.caption, {{kContext, context_parts(sheet_subset)},
                                                           {kTarget, {ContentPart::image(target.image_path)}}})});
  return b;
}

PromptBundle build_judge_prompt(const CharacterSheet& sheet, const Frame& target, const StructuredCaption& candidate,
                                const PromptTemplates& templates) {
  require_image(target.image_path);
  PromptBundle b;
  b.kind = PromptKind::Judge;
  b.messages.push_back({"user", expand(templates.judge, {{kContext, context_parts(sheet)},
                                                         {kTarget, {ContentPart::image(target.image_path)}},
                                                         {kCandidate, {ContentPart::text(serialize_caption(candidate, 4))}}})});
  return b;
}

}  // namespace vivecap::vlm
