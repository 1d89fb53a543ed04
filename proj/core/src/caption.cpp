#include "vivecap/caption.hpp"

#include <array>
#include <map>

#include <nlohmann/json.hpp>

#include "json_text.hpp"

namespace vivecap {
namespace {

using nlohmann::json;
using Kind = CaptionParseError::Kind;

constexpr std::array<const char*, 4> kTopKeys = {"scene", "background", "characters", "salient_objects"};
constexpr std::array<const char*, 4> kEntryKeys = {"description", "location", "expression", "pose"};

std::optional<std::string>* entry_field(CharacterEntry& e, std::string_view key) {
  if (key == "description") return &e.description;
  if (key == "location") return &e.location;
  if (key == "expression") return &e.expression;
  if (key == "pose") return &e.pose;
  return nullptr;
}

const std::optional<std::string>& entry_field(const CharacterEntry& e, std::size_t i) {
  switch (i) {
    case 0: return e.description;
    case 1: return e.location;
    case 2: return e.expression;
    default: return e.pose;
  }
}

std::string join_path(const std::vector<std::string>& path) {
  if (path.empty()) return "/";
  std::string out;
  for (const auto& p : path) out += "/" + p;
  return out;
}

class CaptionReader {
 public:
  CaptionReader(std::string_view raw, detail::Unfenced body) : raw_(raw), body_(body) {}

  [[noreturn]] void fail(Kind kind, const std::vector<std::string>& path, const std::string& detail) const {
    std::size_t offset = body_.offset + detail::value_offset(body_.body, path);
    throw CaptionParseError(kind, join_path(path), offset, std::string(raw_), detail);
  }

  void reject_duplicates(const std::vector<std::string>& path) const {
    if (auto dup = detail::duplicate_key(body_.body, path)) {
      auto p = path;
      p.push_back(dup->first);
      throw CaptionParseError(Kind::DuplicateKey, join_path(p), body_.offset + dup->second, std::string(raw_),
                              "duplicate key \"" + dup->first + "\"");
    }
  }

  // An object, or the empty string standing in for an empty object.
  bool is_empty_placeholder(const json& v) const { return v.is_string() && v.get_ref<const std::string&>().empty(); }

  StructuredCaption read(const json& j) const {
    if (!j.is_object()) fail(Kind::WrongShape, {}, "caption must be a JSON object");
    reject_duplicates({});
    for (auto it = j.begin(); it != j.end(); ++it) {
      bool known = false;
      for (const char* k : kTopKeys) known = known || it.key() == k;
      if (!known) fail(Kind::UnexpectedKey, {it.key()}, "unexpected key \"" + it.key() + "\"");
    }
    for (const char* k : kTopKeys)
      if (!j.contains(k)) fail(Kind::MissingKey, {}, std::string("missing key \"") + k + "\"");

    StructuredCaption c;
    c.scene = read_string(j.at("scene"), {"scene"});
    c.background = read_string(j.at("background"), {"background"});

    const json& chars = j.at("characters");
    if (!is_empty_placeholder(chars)) {
      if (!chars.is_object()) fail(Kind::WrongShape, {"characters"}, "characters must be an object");
      reject_duplicates({"characters"});
      for (auto it = chars.begin(); it != chars.end(); ++it)
        c.characters.emplace(it.key(), read_entry(it.value(), {"characters", it.key()}));
    }

    const json& objects = j.at("salient_objects");
    if (!is_empty_placeholder(objects)) {
      if (!objects.is_object()) fail(Kind::WrongShape, {"salient_objects"}, "salient_objects must be an object");
      reject_duplicates({"salient_objects"});
      for (auto it = objects.begin(); it != objects.end(); ++it)
        c.salient_objects.emplace(it.key(), read_string(it.value(), {"salient_objects", it.key()}));
    }
    return c;
  }

 private:
  std::string read_string(const json& v, const std::vector<std::string>& path) const {
    if (!v.is_string()) fail(Kind::WrongShape, path, "expected a string at " + join_path(path));
    return v.get<std::string>();
  }

  CharacterEntry read_entry(const json& v, const std::vector<std::string>& path) const {
    if (!v.is_object()) fail(Kind::WrongShape, path, "character entry must be an object");
    reject_duplicates(path);
    CharacterEntry e;
    for (auto it = v.begin(); it != v.end(); ++it) {
      auto p = path;
      p.push_back(it.key());
      auto* field = entry_field(e, it.key());
      if (!field) fail(Kind::UnexpectedKey, p, "unexpected character field \"" + it.key() + "\"");
      *field = read_string(it.value(), p);
    }
    return e;
  }

  std::string_view raw_;
  detail::Unfenced body_;
};

bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\v' || c == '\f' || c == '\r'; }

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

// Trimmed text closed with a full stop unless it already ends a sentence.
std::string sentence(std::string_view s) {
  std::string t = trim(s);
  if (t.empty()) return t;
  char last = t.back();
  if (last != '.' && last != '!' && last != '?') t += '.';
  return t;
}

void append_sentence(std::string& out, const std::string& s) {
  if (s.empty()) return;
  if (!out.empty()) out += ' ';
  out += s;
}

}  // namespace

CaptionParseError::CaptionParseError(Kind kind, std::string path, std::size_t offset, std::string raw,
                                     const std::string& detail)
    : Error(std::string(to_string(kind)) + " at byte " + std::to_string(offset) + ": " + detail),
      kind_(kind),
      path_(std::move(path)),
      offset_(offset),
      raw_(std::move(raw)) {}

const char* to_string(CaptionParseError::Kind kind) {
  switch (kind) {
    case Kind::MalformedJson: return "MalformedJson";
    case Kind::MissingKey: return "MissingKey";
    case Kind::UnexpectedKey: return "UnexpectedKey";
    case Kind::DuplicateKey: return "DuplicateKey";
    case Kind::WrongShape: return "WrongShape";
  }
  return "Unknown";
}

StructuredCaption parse_structured_caption(std::string_view raw) {
  detail::Unfenced body = detail::strip_code_fences(raw);
  json j;
  try {
    j = json::parse(body.body);
  } catch (const json::parse_error& e) {
    std::size_t at = e.byte > 0 ? e.byte - 1 : 0;
    throw CaptionParseError(Kind::MalformedJson, "/", body.offset + at, std::string(raw), e.what());
  }
  return CaptionReader(raw, body).read(j);
}

std::string serialize_caption(const StructuredCaption& c, int indent) {
  nlohmann::ordered_json j;
  j["scene"] = c.scene;
  j["background"] = c.background;
  nlohmann::ordered_json chars = nlohmann::ordered_json::object();
  for (const auto& [name, entry] : c.characters) {
    nlohmann::ordered_json e = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < kEntryKeys.size(); ++i)
      if (const auto& f = entry_field(entry, i)) e[kEntryKeys[i]] = *f;
    chars[name] = std::move(e);
  }
  j["characters"] = std::move(chars);
  nlohmann::ordered_json objects = nlohmann::ordered_json::object();
  for (const auto& [name, desc] : c.salient_objects) objects[name] = desc;
  j["salient_objects"] = std::move(objects);
  return j.dump(indent);
}

std::string describe(const Violation& v) {
  switch (v.kind) {
    case ViolationKind::UnknownCharacter: return "UnknownCharacter(" + v.subject + ")";
    case ViolationKind::MissingField: return "MissingField(" + v.subject + "." + v.detail + ")";
    case ViolationKind::DuplicateName: return "DuplicateName(" + v.subject + ", " + v.detail + ")";
  }
  return "Violation";
}

ValidationReport validate_structured_caption(const StructuredCaption& caption, const Roster& roster) {
  ValidationReport report;
  const std::string unknown = fold_case(kUnknownCharacter);
  std::map<std::string, std::string> first_by_fold;
  std::vector<Violation> duplicates;

  for (const auto& [name, entry] : caption.characters) {
    std::string folded = fold_case(name);
    if (folded != unknown && !roster.contains(name))
      report.violations.push_back({ViolationKind::UnknownCharacter, name, {}});
    for (std::size_t i = 0; i < kEntryKeys.size(); ++i)
      if (!entry_field(entry, i)) report.violations.push_back({ViolationKind::MissingField, name, kEntryKeys[i]});
    auto [it, inserted] = first_by_fold.emplace(folded, name);
    if (!inserted) duplicates.push_back({ViolationKind::DuplicateName, it->second, name});
  }
  report.violations.insert(report.violations.end(), duplicates.begin(), duplicates.end());
  return report;
}

void UniversalCheckConfig::validate() const {
  if (max_caption_tokens < 1) throw Error("max_caption_tokens must be at least 1");
}

std::size_t count_tokens(std::string_view text, TokenRule rule) {
  if (rule == TokenRule::Bytes) return text.size();
  std::size_t n = 0;
  bool in_token = false;
  for (char ch : text) {
    bool space = is_space(static_cast<unsigned char>(ch));
    if (!space && !in_token) ++n;
    in_token = !space;
  }
  return n;
}

TokenCount caption_token_count(const StructuredCaption& caption, const UniversalCheckConfig& cfg) {
  cfg.validate();
  std::string text = cfg.target == LengthTarget::Serialized ? serialize_caption(caption) : collapse_to_dense(caption);
  TokenCount tc;
  tc.count = count_tokens(text, cfg.tokenization_rule);
  tc.too_long = tc.count >= cfg.max_caption_tokens;
  return tc;
}

std::string collapse_to_dense(const StructuredCaption& c) {
  std::string out;
  append_sentence(out, sentence(c.scene));
  append_sentence(out, sentence(c.background));
  for (const auto& [name, e] : c.characters) {
    std::string body;
    if (e.description) append_sentence(body, sentence(*e.description));
    if (e.location && !trim(*e.location).empty()) append_sentence(body, sentence("Location: " + trim(*e.location)));
    if (e.expression && !trim(*e.expression).empty())
      append_sentence(body, sentence("Expression: " + trim(*e.expression)));
    if (e.pose && !trim(*e.pose).empty()) append_sentence(body, sentence("Pose: " + trim(*e.pose)));
    append_sentence(out, body.empty() ? sentence(name) : name + ": " + body);
  }
  for (const auto& [name, desc] : c.salient_objects) {
    std::string d = sentence(desc);
    append_sentence(out, d.empty() ? sentence(name) : name + ": " + d);
  }
  return out;
}

CharacterSet extract_characters(const StructuredCaption& caption, const Roster& roster) {
  const std::string unknown = fold_case(kUnknownCharacter);
  CharacterSet out;
  for (const auto& [name, entry] : caption.characters) {
    if (fold_case(name) == unknown) continue;
    if (auto c = roster.canonical(name)) out.insert(*c);
  }
  return out;
}

}  // namespace vivecap
