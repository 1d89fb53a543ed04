#include <gtest/gtest.h>

#include <fstream>
#include <functional>

#include <vivecap/grounded_metrics.hpp>

#include "oracles.hpp"
#include "test_util.hpp"

using namespace vivecap;
using namespace vivecap::metrics;
using vivecap::testing::TempDir;

namespace {

MetricsError::Kind metrics_error(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const MetricsError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no MetricsError";
  return MetricsError::Kind::EmptyList;
}

}  // namespace

TEST(GroundedMetrics, EveryPairMatchesBitCountOracle) {
  for (unsigned gold = 0; gold < 128; ++gold)
    for (unsigned pred = 0; pred < 128; ++pred) {
      auto c = confusion_counts(vt::subset(gold), vt::subset(pred), vt::roster());
      auto m = per_example_metrics(c);
      auto o = vt_oracle::brute_metrics(gold, pred);
      ASSERT_EQ(m.precision, o.precision) << gold << " " << pred;
      ASSERT_EQ(m.recall, o.recall);
      ASSERT_EQ(m.f1, o.f1);
      ASSERT_EQ(m.mistakes, o.mistakes);
      ASSERT_EQ(c.fp, o.fp);
      ASSERT_EQ(c.fn, o.fn);
    }
}

TEST(GroundedMetrics, FormulaIdentities) {
  vt::Gen g(31);
  for (int i = 0; i < 2000; ++i) {
    auto gold = g.roster_subset(), pred = g.roster_subset();
    auto c = confusion_counts(gold, pred, vt::roster());
    auto m = per_example_metrics(c);
    ASSERT_EQ(m.mistakes, c.fp + c.fn);
    ASSERT_EQ(c.tp + c.fn, gold.size());
    ASSERT_EQ(c.tp + c.fp, pred.size());
    if (gold.empty() && pred.empty()) continue;
    if (m.precision + m.recall > 0) {
      ASSERT_EQ(m.f1, 2 * m.precision * m.recall / (m.precision + m.recall));
    }
    ASSERT_GE(m.f1, 0.0);
    ASSERT_LE(m.f1, 1.0);
  }
}

TEST(GroundedMetrics, HandWorkedExamples) {
  auto m = per_example_metrics(confusion_counts({"Ellie", "Rex"}, {"Rex", "Jay", "Phil"}, vt::roster()));
  EXPECT_DOUBLE_EQ(m.precision, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.recall, 0.5);
  EXPECT_DOUBLE_EQ(m.f1, 0.4);
  EXPECT_EQ(m.mistakes, 3u);

  EXPECT_EQ(per_example_metrics(confusion_counts({}, {}, vt::roster())), (GroundedMetrics{1, 1, 1, 0}));
  EXPECT_EQ(per_example_metrics(confusion_counts({}, {"Jay"}, vt::roster())), (GroundedMetrics{0, 0, 0, 1}));
  EXPECT_EQ(per_example_metrics(confusion_counts({"Jay"}, {}, vt::roster())), (GroundedMetrics{0, 0, 0, 1}));
}

TEST(GroundedMetrics, SwappedSwapsOnlyFpAndFn) {
  vt::Gen g(32);
  for (int i = 0; i < 500; ++i) {
    auto gold = g.roster_subset(), pred = g.roster_subset();
    auto s = confusion_counts(gold, pred, vt::roster(), FpFnConvention::Standard);
    auto p = confusion_counts(gold, pred, vt::roster(), FpFnConvention::Swapped);
    ASSERT_EQ(s.tp, p.tp);
    ASSERT_EQ(s.fp, p.fn);
    ASSERT_EQ(s.fn, p.fp);
    ASSERT_EQ(per_example_metrics(s).mistakes, per_example_metrics(p).mistakes);
    ASSERT_EQ(per_example_metrics(s).f1, per_example_metrics(p).f1);
  }
  EXPECT_EQ(parse_convention("swapped"), FpFnConvention::Swapped);
  EXPECT_STREQ(to_string(FpFnConvention::Standard), "standard");
  EXPECT_THROW(parse_convention("reversed"), Error);
}

TEST(GroundedMetrics, NonRosterNamesRejected) {
  EXPECT_THROW(confusion_counts({"Bob"}, {}, vt::roster()), NonRosterNameError);
  EXPECT_THROW(confusion_counts({}, {"Bob"}, vt::roster()), NonRosterNameError);
}

TEST(Aggregate, FieldwiseMeans) {
  std::vector<GroundedMetrics> ms = {{1, 0.5, 2.0 / 3.0, 1}, {0, 0, 0, 3}, {1, 1, 1, 0}};
  auto a = aggregate(ms);
  EXPECT_DOUBLE_EQ(a.mean_precision, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(a.mean_recall, 0.5);
  EXPECT_DOUBLE_EQ(a.macro_f1, (2.0 / 3.0 + 1.0) / 3.0);
  EXPECT_DOUBLE_EQ(a.mean_mistakes, 4.0 / 3.0);
  EXPECT_EQ(a.n_examples, 3u);
  EXPECT_EQ(metrics_error([] { aggregate({}); }), MetricsError::Kind::EmptyList);
}

TEST(Aggregate, MeanLiesBetweenExtremes) {
  vt::Gen g(33);
  for (int inst = 0; inst < 200; ++inst) {
    std::vector<GroundedMetrics> ms;
    double lo = 1, hi = 0;
    for (std::size_t i = 1 + g.below(40); i > 0; --i) {
      ms.push_back(per_example_metrics(confusion_counts(g.roster_subset(), g.roster_subset(), vt::roster())));
      lo = std::min(lo, ms.back().f1);
      hi = std::max(hi, ms.back().f1);
    }
    auto a = aggregate(ms);
    ASSERT_GE(a.macro_f1, lo - 1e-15);
    ASSERT_LE(a.macro_f1, hi + 1e-15);
  }
}

TEST(EvaluateDataset, ScoresLabelledFramesInManifestOrder) {
  DatasetManifest m(std::vector<Frame>{{"c", "c.png", {}}, {"a", "a.png", {}}, {"b", "b.png", {}}});
  m.set_labels({{"c", {"c", {"Rex"}}}, {"a", {"a", {}}}});
  std::map<std::string, CharacterSet> pred = {{"c", {"Rex", "Jay"}}, {"a", {}}, {"b", {"Phil"}}};
  auto ev = evaluate_dataset(m, pred, vt::roster());
  ASSERT_EQ(ev.per_frame.size(), 3u);
  EXPECT_EQ(ev.per_frame[0].frame_id, "c");
  EXPECT_TRUE(ev.per_frame[0].scored);
  EXPECT_EQ(ev.per_frame[0].counts, (ConfusionCounts{1, 1, 0}));
  EXPECT_TRUE(ev.per_frame[1].both_empty);
  EXPECT_FALSE(ev.per_frame[2].scored);
  EXPECT_EQ(ev.n_both_empty, 1u);
  EXPECT_EQ(ev.aggregate.n_examples, 2u);
  EXPECT_DOUBLE_EQ(ev.aggregate.macro_f1, (2.0 / 3.0 + 1.0) / 2.0);
  EXPECT_DOUBLE_EQ(ev.aggregate.mean_mistakes, 0.5);

  auto back = aggregate_from_json(evaluation_to_json(ev));
  EXPECT_EQ(back.macro_f1, ev.aggregate.macro_f1);
  EXPECT_EQ(back.mean_mistakes, ev.aggregate.mean_mistakes);
  EXPECT_EQ(back.n_examples, 2u);

  auto csv = evaluation_to_csv(ev);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "frame_id,scored,tp,fp,fn,precision,recall,f1,mistakes");
  EXPECT_NE(csv.find("\nb,false,"), std::string::npos);
}

TEST(EvaluateDataset, MissingPredictionAndNothingScored) {
  DatasetManifest m(std::vector<Frame>{{"a", "a.png", {}}});
  m.set_labels({{"a", {"a", {"Rex"}}}});
  EXPECT_EQ(metrics_error([&] { evaluate_dataset(m, {}, vt::roster()); }), MetricsError::Kind::MissingPrediction);
  DatasetManifest unlabelled(std::vector<Frame>{{"a", "a.png", {}}});
  EXPECT_EQ(metrics_error([&] { evaluate_dataset(unlabelled, {{"a", {}}}, vt::roster()); }),
            MetricsError::Kind::EmptyList);
}

TEST(Predictions, ReaderResolvesSpellingAndRejectsStrangers) {
  TempDir tmp("pred");
  auto p = tmp.path() / "p.jsonl";
  std::ofstream(p) << "{\"frame_id\":\"a\",\"characters\":[\"rex\",\"ELLIE\"]}\n{\"frame_id\":\"b\",\"characters\":[]}\n";
  auto pred = read_predictions_jsonl(p.string(), vt::roster());
  EXPECT_EQ(pred.at("a"), (CharacterSet{"Ellie", "Rex"}));
  EXPECT_TRUE(pred.at("b").empty());
  std::ofstream(p) << "{\"frame_id\":\"a\",\"characters\":[\"Bob\"]}\n";
  EXPECT_THROW(read_predictions_jsonl(p.string(), vt::roster()), NonRosterNameError);
  std::ofstream(p) << "{\"frame_id\":\"a\",\"characters\":[]}\n{\"frame_id\":\"a\",\"characters\":[]}\n";
  EXPECT_THROW(read_predictions_jsonl(p.string(), vt::roster()), Error);
}
