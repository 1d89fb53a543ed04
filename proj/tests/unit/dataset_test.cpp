#include <gtest/gtest.h>

#include <fstream>

#include <vivecap/dataset.hpp>

#include "test_util.hpp"

using namespace vivecap;
using vivecap::testing::TempDir;

TEST(Dataset, ReadsFixtureManifestAndLabels) {
  auto frames = read_frames_jsonl(vt::mini() / "manifest.jsonl");
  ASSERT_EQ(frames.size(), 24u);
  EXPECT_EQ(frames[0].id, "f00");
  EXPECT_EQ(frames[0].image_path, "frames/f00.png");
  EXPECT_EQ(frames[3].timestamp_s, 3.0);
  auto labels = read_labels_jsonl(vt::mini() / "labels.jsonl", vt::roster());
  EXPECT_EQ(labels.size(), 24u);
  DatasetManifest m(frames);
  EXPECT_NO_THROW(m.set_labels(labels));
  EXPECT_EQ(m.find("f07")->image_path, "frames/f07.png");
  EXPECT_EQ(m.find("nope"), nullptr);
}

TEST(Dataset, ManifestInvariants) {
  EXPECT_THROW(DatasetManifest(std::vector<Frame>{{"a", "x.png", {}}, {"a", "y.png", {}}}), DatasetError);
  EXPECT_THROW(DatasetManifest(std::vector<Frame>{{"a", "", {}}}), DatasetError);
  DatasetManifest m(std::vector<Frame>{{"a", "x.png", {}}});
  try {
    m.set_labels({{"b", GoldLabel{"b", {"Rex"}}}});
    FAIL();
  } catch (const DatasetError& e) {
    EXPECT_EQ(e.kind(), DatasetError::Kind::UnresolvedKey);
  }
  EXPECT_THROW(m.set_captions({{"b", CaptionedFrame{}}}), DatasetError);
}

TEST(Dataset, ErrorsCarryLineNumbers) {
  TempDir tmp("dataset");
  std::ofstream(tmp.path() / "m.jsonl") << "{\"id\":\"a\",\"image_path\":\"a.png\"}\n\n{\"id\":\"b\"}\n";
  try {
    read_frames_jsonl(tmp.path() / "m.jsonl");
    FAIL();
  } catch (const DatasetError& e) {
    EXPECT_EQ(e.kind(), DatasetError::Kind::Parse);
    EXPECT_EQ(e.line(), 3u);
  }
  std::ofstream(tmp.path() / "l.jsonl") << "{\"frame_id\":\"a\",\"characters\":[\"Bob\"]}\n";
  try {
    read_labels_jsonl(tmp.path() / "l.jsonl", vt::roster());
    FAIL();
  } catch (const DatasetError& e) {
    EXPECT_EQ(e.kind(), DatasetError::Kind::NonRosterName);
    EXPECT_EQ(e.line(), 1u);
  }
  std::ofstream(tmp.path() / "d.jsonl") << "{\"id\":\"a\",\"image_path\":\"a.png\"}\n{\"id\":\"a\",\"image_path\":\"b.png\"}\n";
  EXPECT_THROW(read_frames_jsonl(tmp.path() / "d.jsonl"), DatasetError);
}

TEST(Dataset, RoundTripsThroughFiles) {
  TempDir tmp("dataset-rt");
  std::vector<Frame> frames = {{"a", "img/a.png", 1.5}, {"b", "img/b.png", std::nullopt}};
  write_frames_jsonl(frames, tmp.path() / "m.jsonl");
  EXPECT_EQ(read_frames_jsonl(tmp.path() / "m.jsonl"), frames);

  std::map<std::string, GoldLabel> labels = {{"a", {"a", {"Ellie", "Rex"}}}, {"b", {"b", {}}}};
  write_labels_jsonl(labels, tmp.path() / "l.jsonl");
  EXPECT_EQ(read_labels_jsonl(tmp.path() / "l.jsonl", vt::roster()), labels);

  CaptionedFrame cf{frames[0], parse_structured_caption(vt::victoria_caption_text()), std::string("raw text")};
  write_captions_jsonl({cf}, tmp.path() / "c.jsonl");
  auto back = read_captions_jsonl(tmp.path() / "c.jsonl", frames);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].frame, frames[0]);
  EXPECT_EQ(back[0].caption, cf.caption);
  EXPECT_EQ(back[0].raw_model_output, "raw text");
  EXPECT_THROW(read_captions_jsonl(tmp.path() / "c.jsonl", {frames[1]}), DatasetError);
}

TEST(Dataset, LabelNamesResolveToRosterSpelling) {
  TempDir tmp("dataset-case");
  std::ofstream(tmp.path() / "l.jsonl") << "{\"frame_id\":\"a\",\"characters\":[\"elder_sprite\",\"ELLIE\"]}\n";
  auto labels = read_labels_jsonl(tmp.path() / "l.jsonl", vt::roster());
  EXPECT_EQ(labels.at("a").characters, (CharacterSet{"Elder_Sprite", "Ellie"}));
}
