#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <functional>

#include <nlohmann/json.hpp>

#include <vivecap/prompts.hpp>

#include "test_util.hpp"

using namespace vivecap;
using namespace vivecap::vlm;
using vivecap::testing::TempDir;

namespace {

CharacterSheet mini_sheet() { return load_character_sheet(vt::mini() / "sheet.json", vt::roster()); }

Frame mini_frame(int i) {
  char id[8];
  std::snprintf(id, sizeof id, "f%02d", i);
  return {id, (vt::mini() / "frames" / (std::string(id) + ".png")).string(), {}};
}

std::string all_text(const PromptBundle& b) {
  std::string out;
  for (const auto& m : b.messages)
    for (const auto& p : m.parts)
      if (p.type == ContentPart::Type::Text) out += p.value + "\n";
  return out;
}

PromptError::Kind prompt_error(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const PromptError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no PromptError";
  return PromptError::Kind::Template;
}

}  // namespace

TEST(CharacterSheet, LoadsFixtureWithResolvedPaths) {
  auto sheet = mini_sheet();
  ASSERT_EQ(sheet.size(), 7u);
  EXPECT_EQ(sheet.entries()[0].name, "Ellie");
  EXPECT_TRUE(std::filesystem::exists(sheet.entries()[0].image_path));
  EXPECT_EQ(sheet.entries()[0].description, "girl with a yellow raincoat");
  auto sub = sheet.subset({"Rex", "Ellie"});
  ASSERT_EQ(sub.size(), 2u);
  EXPECT_EQ(sub.entries()[0].name, "Ellie");
  EXPECT_EQ(sub.entries()[1].name, "Rex");
  EXPECT_TRUE(sheet.subset({}).empty());
}

TEST(CharacterSheet, RejectsStrangersAndRepeats) {
  EXPECT_THROW(CharacterSheet({{"Bob", "b.png", ""}}, vt::roster()), NonRosterNameError);
  EXPECT_THROW(CharacterSheet({{"Rex", "a.png", ""}, {"Rex", "b.png", ""}}, vt::roster()), Error);
}

TEST(RosterLiteral, MatchesDetectionOutputShape) {
  EXPECT_EQ(roster_literal(vt::roster()), R"(["Ellie", "Jay", "Phil", "Rex", "Victoria", "Sprite", "Elder_Sprite"])");
}

TEST(DetectPrompt, LayoutAndSentinels) {
  auto b = build_detect_prompt(mini_sheet(), vt::roster(), mini_frame(3));
  EXPECT_EQ(b.kind, PromptKind::Detect);
  ASSERT_EQ(b.messages.size(), 4u);
  EXPECT_EQ(b.messages[0].role, "system");
  EXPECT_EQ(b.messages[0].parts, std::vector<ContentPart>{ContentPart::text(PromptTemplates::builtin().detect_system)});

  const auto& ctx = b.messages[1].parts;
  ASSERT_EQ(ctx.size(), 2u + 2u * 7u);
  EXPECT_EQ(ctx.front(), ContentPart::text("===POTENTIAL CHARACTERS HERE==="));
  EXPECT_EQ(ctx.back(), ContentPart::text("===POTENTIAL CHARACTERS HERE==="));
  EXPECT_EQ(ctx[1].type, ContentPart::Type::Image);
  EXPECT_EQ(ctx[2], ContentPart::text("Ellie: girl with a yellow raincoat"));

  EXPECT_EQ(b.messages[2].parts,
            (std::vector<ContentPart>{ContentPart::text("===TARGET IMAGE HERE==="), ContentPart::image(mini_frame(3).image_path),
                                      ContentPart::text("===TARGET IMAGE HERE===")}));
  const auto& instruction = b.messages[3].parts.at(0).value;
  EXPECT_NE(instruction.find(roster_literal(vt::roster())), std::string::npos);
  EXPECT_EQ(instruction.find("{{ROSTER}}"), std::string::npos);
  EXPECT_NE(instruction.find(R"(["character1", "character2", "character3"])"), std::string::npos);
  EXPECT_EQ(b.image_count(), 8u);
  EXPECT_EQ(b.image_paths().back(), mini_frame(3).image_path);
}

TEST(DetectPrompt, Errors) {
  EXPECT_EQ(prompt_error([] { build_detect_prompt({}, vt::roster(), mini_frame(0)); }), PromptError::Kind::EmptySheet);
  EXPECT_EQ(prompt_error([] { build_detect_prompt(mini_sheet(), vt::roster(), {"x", "/no/such.png", {}}); }),
            PromptError::Kind::MissingImage);
}

TEST(CaptionPrompt, ContextLimitedToSubset) {
  auto sheet = mini_sheet();
  vt::Gen g(51);
  for (int i = 0; i < 40; ++i) {
    auto names = g.roster_subset();
    auto b = build_caption_prompt(sheet.subset(names), mini_frame(i % 24));
    ASSERT_EQ(b.kind, PromptKind::Caption);
    ASSERT_EQ(b.image_count(), names.size() + 1);
    ASSERT_EQ(b.image_paths().back(), mini_frame(i % 24).image_path);
    auto text = all_text(b);
    ASSERT_EQ(text.find("{{"), std::string::npos);
    for (const auto& e : sheet.entries())
      ASSERT_EQ(text.find(e.name + ": " + e.description) != std::string::npos, names.contains(e.name)) << e.name;
  }
}

TEST(CaptionPrompt, EmptyContextStillNamesTheSchema) {
  auto b = build_caption_prompt({}, mini_frame(0));
  EXPECT_EQ(b.image_count(), 1u);
  auto text = all_text(b);
  EXPECT_NE(text.find("CHARACTER CONTEXT"), std::string::npos);
  EXPECT_NE(text.find("\"salient_objects\""), std::string::npos);
}

TEST(JudgePrompt, CandidateClosesTheRequest) {
  auto cap = parse_structured_caption(vt::victoria_caption_text());
  auto b = build_judge_prompt(mini_sheet(), mini_frame(5), cap);
  EXPECT_EQ(b.kind, PromptKind::Judge);
  EXPECT_EQ(b.image_count(), 8u);
  const auto& parts = b.messages.back().parts;
  bool found = false;
  for (const auto& p : parts) found = found || p == ContentPart::text(serialize_caption(cap, 4));
  EXPECT_TRUE(found);
  EXPECT_EQ(all_text(b).find("{{"), std::string::npos);
}

TEST(PromptBundle, JsonIsDeterministic) {
  auto a = bundle_to_json(build_detect_prompt(mini_sheet(), vt::roster(), mini_frame(1)));
  auto b = bundle_to_json(build_detect_prompt(mini_sheet(), vt::roster(), mini_frame(1)));
  EXPECT_EQ(a, b);
  auto j = nlohmann::json::parse(a);
  EXPECT_EQ(j["kind"], "detect");
  EXPECT_EQ(j["messages"][2]["content"][1]["type"], "image");
}

TEST(Templates, LoadFromDirectoryAndValidate) {
  TempDir tmp("templates");
  auto write = [&](const char* name, const std::string& body) { std::ofstream(tmp.path() / name) << body << "\n"; };
  write("detect_system.txt", "sys");
  write("detect_user.txt", "pick from {{ROSTER}} please");
  write("caption.txt", "ctx:\n{{CHARACTER_CONTEXT}}\ntarget:\n{{TARGET_IMAGE}}\ndone");
  write("judge.txt", "{{CHARACTER_CONTEXT}} {{TARGET_IMAGE}} {{CANDIDATE_CAPTION}}");
  auto t = PromptTemplates::load(tmp.path());
  EXPECT_EQ(t.detect_system, "sys");

  auto d = build_detect_prompt(mini_sheet(), vt::roster(), mini_frame(0), t);
  EXPECT_EQ(d.messages.back().parts[0].value, "pick from " + roster_literal(vt::roster()) + " please");

  auto c = build_caption_prompt(mini_sheet().subset({"Jay"}), mini_frame(0), t);
  const auto& parts = c.messages[0].parts;
  ASSERT_EQ(parts.size(), 6u);
  EXPECT_EQ(parts[0], ContentPart::text("ctx:"));
  EXPECT_EQ(parts[1].type, ContentPart::Type::Image);
  EXPECT_EQ(parts[2], ContentPart::text("Jay: tall boy with a green cap"));
  EXPECT_EQ(parts[3], ContentPart::text("target:"));
  EXPECT_EQ(parts[5], ContentPart::text("done"));

  write("judge.txt", "{{CHARACTER_CONTEXT}} {{TARGET_IMAGE}}");
  EXPECT_EQ(prompt_error([&] { PromptTemplates::load(tmp.path()); }), PromptError::Kind::Template);
  std::filesystem::remove(tmp.path() / "caption.txt");
  EXPECT_EQ(prompt_error([&] { PromptTemplates::load(tmp.path()); }), PromptError::Kind::Template);
}
