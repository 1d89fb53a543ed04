#include "vivecap/sft_export.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "image_data.hpp"
#include "jsonl.hpp"
#include "random.hpp"

namespace vivecap::sft {
namespace {

using Kind = SftError::Kind;

// Stream id for the split generator, so it never shares draws with sampling.
constexpr std::uint64_t kSplitStream = 0x53504c4954ULL;  // "SPLIT"

std::string frame_id_from_image(const std::string& image) {
  std::string name = image;
  if (auto q = name.find_first_of("?#"); q != std::string::npos) name.resize(q);
  return std::filesystem::path(name).stem().string();
}

std::string task_label(const nlohmann::json& task, std::size_t index) {
  if (task.contains("id") && (task.at("id").is_number() || task.at("id").is_string()))
    return "task " + task.at("id").dump();
  return "task #" + std::to_string(index);
}

}  // namespace

Split split_dataset(const std::vector<std::string>& ids, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
    throw SftError(Kind::InvalidSpec, "train_fraction must lie strictly between 0 and 1");
  if (ids.size() < 2) throw SftError(Kind::TooFew, "a split needs at least 2 ids");
  if (std::set<std::string>(ids.begin(), ids.end()).size() != ids.size())
    throw SftError(Kind::InvalidSpec, "ids to split must be unique");

  std::vector<std::string> shuffled = ids;
  auto rng = detail::make_rng(spec.seed, kSplitStream);
  for (std::size_t i = shuffled.size() - 1; i > 0; --i) std::swap(shuffled[i], shuffled[detail::uniform_below(rng, i + 1)]);

  const auto n_train = static_cast<std::size_t>(std::floor(spec.train_fraction * static_cast<double>(ids.size()) + 0.5));
  Split s;
  s.train.assign(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.test.assign(shuffled.begin() + static_cast<std::ptrdiff_t>(n_train), shuffled.end());
  return s;
}

SftExample build_sft_example(const Frame& frame, const GoldLabel& label, const vlm::CharacterSheet& sheet,
                             const Roster& roster, const vlm::PromptTemplates& templates) {
  require_roster_members(label.characters, roster);
  return {vlm::build_detect_prompt(sheet, roster, frame, templates), to_list_literal(label.characters)};
}

void export_sft_jsonl(const std::vector<SftExample>& examples, const std::filesystem::path& path,
                      const ExportOptions& options) {
  if (examples.empty()) throw SftError(Kind::EmptyExport, "nothing to export");
  std::string buf;
  for (const auto& ex : examples) {
    nlohmann::ordered_json line;
    auto& msgs = line["messages"] = nlohmann::ordered_json::array();
    for (const auto& m : ex.messages.messages) {
      nlohmann::ordered_json content = nlohmann::ordered_json::array();
      for (const auto& p : m.parts) {
        if (p.type == vlm::ContentPart::Type::Text)
          content.push_back({{"type", "text"}, {"text", p.value}});
        else
          content.push_back({{"type", "image"},
                             {"image", options.inline_images ? detail::image_data_url(p.value) : p.value}});
      }
      msgs.push_back({{"role", m.role}, {"content", std::move(content)}});
    }
    line["target"] = ex.target;
    buf += line.dump();
    buf += '\n';
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot write SFT export");
  out << buf;
  if (!out) throw IoError(path.string(), "failed writing SFT export");
}

std::vector<SftRecord> read_sft_jsonl(const std::filesystem::path& path) {
  std::vector<SftRecord> out;
  const std::string src = path.string();
  detail::for_each_jsonl(
      path,
      [&](std::size_t line, const nlohmann::json& j) {
        try {
          SftRecord r;
          r.target = j.at("target").get<std::string>();
          for (const auto& m : j.at("messages")) {
            vlm::Message msg;
            msg.role = m.at("role").get<std::string>();
            for (const auto& p : m.at("content")) {
              const auto type = p.at("type").get<std::string>();
              if (type == "text")
                msg.parts.push_back(vlm::ContentPart::text(p.at("text").get<std::string>()));
              else if (type == "image")
                msg.parts.push_back(vlm::ContentPart::image(p.at("image").get<std::string>()));
              else
                throw SftError(Kind::UnparseableExport, src + ":" + std::to_string(line) + ": unknown part " + type);
            }
            r.messages.push_back(std::move(msg));
          }
          out.push_back(std::move(r));
        } catch (const nlohmann::json::exception& e) {
          throw SftError(Kind::UnparseableExport, src + ":" + std::to_string(line) + ": " + e.what());
        }
      },
      [&](std::size_t line, const std::string& msg) {
        throw SftError(Kind::UnparseableExport, src + ":" + std::to_string(line) + ": " + msg);
      });
  return out;
}

LabelStudioImport import_labelstudio(const std::filesystem::path& path, const Roster& roster) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string(), "cannot open Label Studio export");
  nlohmann::json tasks;
  try {
    tasks = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw SftError(Kind::UnparseableExport, path.string() + ": " + e.what());
  }
  if (!tasks.is_array()) throw SftError(Kind::UnparseableExport, path.string() + ": expected a JSON array of tasks");

  LabelStudioImport out;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const auto& task = tasks[t];
    const std::string where = task_label(task, t);
    if (!task.is_object() || !task.contains("data") || !task.at("data").is_object() ||
        !task.at("data").contains("image") || !task.at("data").at("image").is_string())
      throw SftError(Kind::UnparseableExport, where + ": missing data.image");
    const std::string frame_id = frame_id_from_image(task.at("data").at("image").get<std::string>());
    if (frame_id.empty()) throw SftError(Kind::UnparseableExport, where + ": image path has no file name");

    const nlohmann::json* chosen = nullptr;
    if (task.contains("annotations")) {
      if (!task.at("annotations").is_array()) throw SftError(Kind::UnparseableExport, where + ": annotations must be a list");
      for (const auto& a : task.at("annotations"))
        if (!a.value("was_cancelled", false)) chosen = &a;
    }
    if (!chosen) {
      out.warnings.push_back(where + " (" + frame_id + "): no annotation, skipped");
      continue;
    }
    if (!chosen->contains("result") || !chosen->at("result").is_array())
      throw SftError(Kind::UnparseableExport, where + ": annotation has no result list");

    GoldLabel label;
    label.frame_id = frame_id;
    for (const auto& r : chosen->at("result")) {
      if (!r.is_object() || r.value("type", "") != "choices")
        throw SftError(Kind::UnparseableExport,
                       where + ": only \"choices\" results are supported, got " + (r.is_object() ? r.value("type", "?") : r.dump()));
      if (!r.contains("value") || !r.at("value").contains("choices") || !r.at("value").at("choices").is_array())
        throw SftError(Kind::UnparseableExport, where + ": choices result lacks value.choices");
      for (const auto& c : r.at("value").at("choices")) {
        if (!c.is_string()) throw SftError(Kind::UnparseableExport, where + ": choice values must be strings");
        auto name = roster.canonical(c.get<std::string>());
        if (!name)
          throw SftError(Kind::NonRosterChoice, where + ": choice \"" + c.get<std::string>() + "\" is not in the roster");
        label.characters.insert(*name);
      }
    }
    if (!out.labels.emplace(frame_id, std::move(label)).second)
      throw SftError(Kind::UnparseableExport, where + ": frame " + frame_id + " appears in more than one task");
  }
  return out;
}

}  // namespace vivecap::sft
