#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "vivecap/dataset.hpp"
#include "vivecap/prompts.hpp"
#include "vivecap/roster.hpp"

namespace vivecap::sft {

class SftError : public Error {
 public:
  enum class Kind { TooFew, InvalidSpec, EmptyExport, UnparseableExport, NonRosterChoice };
  SftError(Kind kind, const std::string& detail) : Error(detail), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

struct SplitSpec {
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
};

struct Split {
  std::vector<std::string> train;
  std::vector<std::string> test;
};

/// Seeded Fisher-Yates shuffle, then the first round(train_fraction * n)
/// ids (half rounds up) form the training set.
Split split_dataset(const std::vector<std::string>& ids, const SplitSpec& spec);

struct SftExample {
  vlm::PromptBundle messages;
  std::string target;  // e.g. ["Ellie", "Victoria"]
};

/// Detection prompt for the frame with the alphabetised gold list as target.
SftExample build_sft_example(const Frame& frame, const GoldLabel& label, const vlm::CharacterSheet& sheet,
                             const Roster& roster,
                             const vlm::PromptTemplates& templates = vlm::PromptTemplates::builtin());

struct ExportOptions {
  bool inline_images = false;  // base64 data URLs instead of paths
};

/// One {"messages": [...], "target": "..."} object per line. Throws
/// SftError(EmptyExport) for no examples and IoError when the file cannot be
/// written.
void export_sft_jsonl(const std::vector<SftExample>& examples, const std::filesystem::path& path,
                      const ExportOptions& options = {});

struct SftRecord {
  std::vector<vlm::Message> messages;
  std::string target;
};

std::vector<SftRecord> read_sft_jsonl(const std::filesystem::path& path);

struct LabelStudioImport {
  std::map<std::string, GoldLabel> labels;
  std::vector<std::string> warnings;
};

/// Reads a Label Studio JSON export whose annotations are "choices" results.
/// frame_id is the image basename without extension; tasks without any
/// annotation are skipped with a warning.
LabelStudioImport import_labelstudio(const std::filesystem::path& path, const Roster& roster);

}  // namespace vivecap::sft
