#include <gtest/gtest.h>

#include <fstream>

#include <vivecap/character_set.hpp>
#include <vivecap/roster.hpp>

#include "test_util.hpp"

using namespace vivecap;

TEST(Roster, KeepsSpellingAndFoldsCase) {
  const auto& r = vt::roster();
  EXPECT_EQ(r.size(), 7u);
  EXPECT_EQ(r.canonical("elder_sprite"), "Elder_Sprite");
  EXPECT_EQ(r.canonical("VICTORIA"), "Victoria");
  EXPECT_FALSE(r.canonical("Elder Sprite"));
  EXPECT_FALSE(r.canonical("ElderSprite"));
  EXPECT_FALSE(r.contains("Unknown Character"));
}

TEST(Roster, RejectsEmptyBlankAndColliding) {
  EXPECT_THROW(Roster({}), RosterError);
  EXPECT_THROW(Roster({"Ellie", "  "}), RosterError);
  EXPECT_THROW(Roster({"Ellie", "ELLIE"}), RosterError);
}

TEST(Roster, LoadsFromJsonArray) {
  auto r = load_roster(vt::mini() / "roster.json");
  EXPECT_EQ(r.names(), vt::roster_names());
  vivecap::testing::TempDir tmp("roster");
  std::ofstream(tmp.path() / "bad.json") << R"({"names": []})";
  EXPECT_THROW(load_roster(tmp.path() / "bad.json"), RosterError);
  EXPECT_THROW(load_roster(tmp.path() / "missing.json"), IoError);
}

TEST(CharacterSet, ListLiteralIsSortedAndSpaced) {
  CharacterSet s{"Victoria", "Ellie", "Elder_Sprite", "Ellie"};
  EXPECT_EQ(s.size(), 3u);
  EXPECT_EQ(to_list_literal(s), R"(["Elder_Sprite", "Ellie", "Victoria"])");
  EXPECT_EQ(to_list_literal({}), "[]");
}

TEST(CharacterSet, MembershipNeedsExactSpelling) {
  EXPECT_NO_THROW(require_roster_members({"Ellie", "Rex"}, vt::roster()));
  EXPECT_THROW(require_roster_members({"ellie"}, vt::roster()), NonRosterNameError);
  try {
    require_roster_members({"Bob"}, vt::roster());
    FAIL();
  } catch (const NonRosterNameError& e) {
    EXPECT_EQ(e.name(), "Bob");
  }
}
