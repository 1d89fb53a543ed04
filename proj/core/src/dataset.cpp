#include "vivecap/dataset.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "jsonl.hpp"

namespace vivecap {
namespace {

using nlohmann::json;
using Kind = DatasetError::Kind;

const char* kind_name(Kind k) {
  switch (k) {
    case Kind::Parse: return "Parse";
    case Kind::DuplicateId: return "DuplicateId";
    case Kind::EmptyImagePath: return "EmptyImagePath";
    case Kind::UnresolvedKey: return "UnresolvedKey";
    case Kind::NonRosterName: return "NonRosterName";
  }
  return "Unknown";
}

std::string require_string(const json& j, const char* key, const std::string& src, std::size_t line) {
  if (!j.is_object() || !j.contains(key) || !j.at(key).is_string())
    throw DatasetError(Kind::Parse, src, line, std::string("missing string field \"") + key + "\"");
  return j.at(key).get<std::string>();
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot write file");
  return out;
}

}  // namespace

DatasetError::DatasetError(Kind kind, std::string source, std::size_t line, const std::string& detail)
    : Error(std::string(kind_name(kind)) + " (" + source + (line ? ":" + std::to_string(line) : std::string()) +
            "): " + detail),
      kind_(kind),
      source_(std::move(source)),
      line_(line) {}

DatasetManifest::DatasetManifest(std::vector<Frame> frames) : frames_(std::move(frames)) {
  for (std::size_t i = 0; i < frames_.size(); ++i) {
    const Frame& f = frames_[i];
    if (f.image_path.empty()) throw DatasetError(Kind::EmptyImagePath, "manifest", i + 1, "frame " + f.id);
    if (!index_.emplace(f.id, i).second) throw DatasetError(Kind::DuplicateId, "manifest", i + 1, "frame " + f.id);
  }
}

const Frame* DatasetManifest::find(const std::string& id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &frames_[it->second];
}

void DatasetManifest::set_labels(std::map<std::string, GoldLabel> labels) {
  for (const auto& [id, label] : labels)
    if (!index_.count(id)) throw DatasetError(Kind::UnresolvedKey, "labels", 0, "no frame with id " + id);
  labels_ = std::move(labels);
}

void DatasetManifest::set_captions(std::map<std::string, CaptionedFrame> captions) {
  for (const auto& [id, c] : captions)
    if (!index_.count(id)) throw DatasetError(Kind::UnresolvedKey, "captions", 0, "no frame with id " + id);
  captions_ = std::move(captions);
}

std::vector<Frame> read_frames_jsonl(const std::filesystem::path& path) {
  const std::string src = path.string();
  std::vector<Frame> frames;
  detail::for_each_jsonl(
      path,
      [&](std::size_t line, const json& j) {
        Frame f;
        f.id = require_string(j, "id", src, line);
        f.image_path = require_string(j, "image_path", src, line);
        if (j.contains("timestamp_s") && !j.at("timestamp_s").is_null()) {
          if (!j.at("timestamp_s").is_number()) throw DatasetError(Kind::Parse, src, line, "timestamp_s must be a number");
          f.timestamp_s = j.at("timestamp_s").get<double>();
        }
        if (f.image_path.empty()) throw DatasetError(Kind::EmptyImagePath, src, line, "frame " + f.id);
        frames.push_back(std::move(f));
      },
      [&](std::size_t line, const std::string& msg) { throw DatasetError(Kind::Parse, src, line, msg); });
  DatasetManifest check(frames);  // duplicate ids
  return frames;
}

void write_frames_jsonl(const std::vector<Frame>& frames, const std::filesystem::path& path) {
  auto out = open_out(path);
  for (const auto& f : frames) {
    nlohmann::ordered_json j;
    j["id"] = f.id;
    j["image_path"] = f.image_path;
    if (f.timestamp_s) j["timestamp_s"] = *f.timestamp_s;
    out << j.dump() << '\n';
  }
}

std::map<std::string, GoldLabel> read_labels_jsonl(const std::filesystem::path& path, const Roster& roster) {
  const std::string src = path.string();
  std::map<std::string, GoldLabel> labels;
  detail::for_each_jsonl(
      path,
      [&](std::size_t line, const json& j) {
        GoldLabel label;
        label.frame_id = require_string(j, "frame_id", src, line);
        if (!j.contains("characters") || !j.at("characters").is_array())
          throw DatasetError(Kind::Parse, src, line, "characters must be an array");
        for (const auto& n : j.at("characters")) {
          if (!n.is_string()) throw DatasetError(Kind::Parse, src, line, "character names must be strings");
          auto c = roster.canonical(n.get<std::string>());
          if (!c) throw DatasetError(Kind::NonRosterName, src, line, n.get<std::string>());
          label.characters.insert(*c);
        }
        std::string id = label.frame_id;
        if (!labels.emplace(id, std::move(label)).second)
          throw DatasetError(Kind::DuplicateId, src, line, "label for " + id + " repeats");
      },
      [&](std::size_t line, const std::string& msg) { throw DatasetError(Kind::Parse, src, line, msg); });
  return labels;
}

void write_labels_jsonl(const std::map<std::string, GoldLabel>& labels, const std::filesystem::path& path) {
  auto out = open_out(path);
  for (const auto& [id, label] : labels) {
    nlohmann::ordered_json j;
    j["frame_id"] = id;
    j["characters"] = std::vector<std::string>(label.characters.begin(), label.characters.end());
    out << j.dump() << '\n';
  }
}

std::vector<CaptionedFrame> read_captions_jsonl(const std::filesystem::path& path, const std::vector<Frame>& frames) {
  const std::string src = path.string();
  std::map<std::string, const Frame*> by_id;
  for (const auto& f : frames) by_id.emplace(f.id, &f);
  std::vector<CaptionedFrame> out;
  detail::for_each_jsonl(
      path,
      [&](std::size_t line, const json& j) {
        std::string id = require_string(j, "frame_id", src, line);
        auto it = by_id.find(id);
        if (it == by_id.end()) throw DatasetError(Kind::UnresolvedKey, src, line, "no frame with id " + id);
        if (!j.contains("caption")) throw DatasetError(Kind::Parse, src, line, "missing caption");
        CaptionedFrame cf;
        cf.frame = *it->second;
        try {
          cf.caption = parse_structured_caption(j.at("caption").dump());
        } catch (const CaptionParseError& e) {
          throw DatasetError(Kind::Parse, src, line, e.what());
        }
        if (j.contains("raw") && j.at("raw").is_string()) cf.raw_model_output = j.at("raw").get<std::string>();
        out.push_back(std::move(cf));
      },
      [&](std::size_t line, const std::string& msg) { throw DatasetError(Kind::Parse, src, line, msg); });
  return out;
}

void write_captions_jsonl(const std::vector<CaptionedFrame>& captions, const std::filesystem::path& path) {
  auto out = open_out(path);
  for (const auto& c : captions) {
    nlohmann::ordered_json j;
    j["frame_id"] = c.frame.id;
    j["caption"] = nlohmann::ordered_json::parse(serialize_caption(c.caption));
    if (c.raw_model_output) j["raw"] = *c.raw_model_output;
    out << j.dump() << '\n';
  }
}

}  // namespace vivecap
