#include "vivecap/grounded_metrics.hpp"

#include <algorithm>
#include <iterator>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "jsonl.hpp"

namespace vivecap::metrics {
namespace {

using Kind = MetricsError::Kind;

std::size_t difference_size(const CharacterSet& a, const CharacterSet& b) {
  std::size_t n = 0;
  for (const auto& name : a)
    if (!b.contains(name)) ++n;
  return n;
}

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

nlohmann::ordered_json aggregate_json(const AggregateGroundedMetrics& a) {
  return {{"mean_precision", a.mean_precision},
          {"mean_recall", a.mean_recall},
          {"macro_f1", a.macro_f1},
          {"mean_mistakes", a.mean_mistakes},
          {"n_examples", a.n_examples}};
}

}  // namespace

const char* to_string(FpFnConvention c) { return c == FpFnConvention::Swapped ? "swapped" : "standard"; }

FpFnConvention parse_convention(const std::string& s) {
  if (s == "standard") return FpFnConvention::Standard;
  if (s == "swapped") return FpFnConvention::Swapped;
  throw Error("unknown fp/fn convention: " + s + " (expected standard or swapped)");
}

ConfusionCounts confusion_counts(const CharacterSet& gold, const CharacterSet& pred, const Roster& roster,
                                 FpFnConvention convention) {
  require_roster_members(gold, roster);
  require_roster_members(pred, roster);
  ConfusionCounts c;
  c.tp = gold.size() - difference_size(gold, pred);
  c.fp = difference_size(pred, gold);
  c.fn = difference_size(gold, pred);
  if (convention == FpFnConvention::Swapped) std::swap(c.fp, c.fn);
  return c;
}

GroundedMetrics per_example_metrics(const ConfusionCounts& c) {
  GroundedMetrics m;
  m.mistakes = c.fp + c.fn;
  if (c.tp == 0 && c.fp == 0 && c.fn == 0) {
    m.precision = m.recall = m.f1 = 1.0;
    return m;
  }
  m.precision = ratio(c.tp, c.tp + c.fp);
  m.recall = ratio(c.tp, c.tp + c.fn);
  const double sum = m.precision + m.recall;
  m.f1 = sum == 0.0 ? 0.0 : 2.0 * m.precision * m.recall / sum;
  return m;
}

AggregateGroundedMetrics aggregate(const std::vector<GroundedMetrics>& metrics) {
  if (metrics.empty()) throw MetricsError(Kind::EmptyList, {}, "cannot aggregate an empty list of metrics");
  AggregateGroundedMetrics a;
  for (const auto& m : metrics) {
    a.mean_precision += m.precision;
    a.mean_recall += m.recall;
    a.macro_f1 += m.f1;
    a.mean_mistakes += static_cast<double>(m.mistakes);
  }
  const double n = static_cast<double>(metrics.size());
  a.mean_precision /= n;
  a.mean_recall /= n;
  a.macro_f1 /= n;
  a.mean_mistakes /= n;
  a.n_examples = metrics.size();
  return a;
}

DatasetEvaluation evaluate_dataset(const DatasetManifest& manifest,
                                   const std::map<std::string, CharacterSet>& predictions, const Roster& roster,
                                   FpFnConvention convention) {
  DatasetEvaluation ev;
  ev.convention = convention;
  std::vector<GroundedMetrics> scored;
  std::set<std::string> seen;
  for (const auto& frame : manifest.frames()) {
    auto label = manifest.labels().find(frame.id);
    auto pred = predictions.find(frame.id);
    if (label == manifest.labels().end()) {
      if (pred != predictions.end()) ev.per_frame.push_back({frame.id, false, {}, {}, false});
      seen.insert(frame.id);
      continue;
    }
    if (pred == predictions.end())
      throw MetricsError(Kind::MissingPrediction, frame.id, "labelled frame has no prediction: " + frame.id);
    seen.insert(frame.id);
    FrameEvaluation fe;
    fe.frame_id = frame.id;
    fe.scored = true;
    fe.counts = confusion_counts(label->second.characters, pred->second, roster, convention);
    fe.metrics = per_example_metrics(fe.counts);
    fe.both_empty = label->second.characters.empty() && pred->second.empty();
    if (fe.both_empty) ++ev.n_both_empty;
    scored.push_back(fe.metrics);
    ev.per_frame.push_back(std::move(fe));
  }
  // Predictions for frames the manifest does not know are reported, not scored.
  for (const auto& [id, set] : predictions)
    if (!seen.count(id)) ev.per_frame.push_back({id, false, {}, {}, false});
  if (scored.empty()) throw MetricsError(Kind::EmptyList, {}, "no labelled frame to score");
  ev.aggregate = aggregate(scored);
  return ev;
}

std::string evaluation_to_json(const DatasetEvaluation& ev) {
  nlohmann::ordered_json j;
  j["aggregate"] = aggregate_json(ev.aggregate);
  j["n_both_empty"] = ev.n_both_empty;
  j["convention"] = to_string(ev.convention);
  auto& rows = j["per_frame"] = nlohmann::ordered_json::array();
  for (const auto& f : ev.per_frame) {
    nlohmann::ordered_json r;
    r["frame_id"] = f.frame_id;
    r["scored"] = f.scored;
    if (f.scored) {
      r["tp"] = f.counts.tp;
      r["fp"] = f.counts.fp;
      r["fn"] = f.counts.fn;
      r["precision"] = f.metrics.precision;
      r["recall"] = f.metrics.recall;
      r["f1"] = f.metrics.f1;
      r["mistakes"] = f.metrics.mistakes;
    }
    rows.push_back(std::move(r));
  }
  return j.dump(2) + "\n";
}

std::string evaluation_to_csv(const DatasetEvaluation& ev) {
  std::string out = "frame_id,scored,tp,fp,fn,precision,recall,f1,mistakes\n";
  for (const auto& f : ev.per_frame) {
    if (!f.scored) {
      out += fmt::format("{},false,,,,,,,\n", f.frame_id);
      continue;
    }
    out += fmt::format("{},true,{},{},{},{:.4f},{:.4f},{:.4f},{}\n", f.frame_id, f.counts.tp, f.counts.fp,
                       f.counts.fn, f.metrics.precision, f.metrics.recall, f.metrics.f1, f.metrics.mistakes);
  }
  return out;
}

AggregateGroundedMetrics aggregate_from_json(const std::string& text) {
  try {
    auto j = nlohmann::json::parse(text);
    const auto& a = j.contains("aggregate") ? j.at("aggregate") : j;
    AggregateGroundedMetrics m;
    m.mean_precision = a.at("mean_precision").get<double>();
    m.mean_recall = a.at("mean_recall").get<double>();
    m.macro_f1 = a.at("macro_f1").get<double>();
    m.mean_mistakes = a.at("mean_mistakes").get<double>();
    m.n_examples = a.at("n_examples").get<std::size_t>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed grounded metrics JSON: ") + e.what());
  }
}

std::map<std::string, CharacterSet> read_predictions_jsonl(const std::string& path, const Roster& roster) {
  std::map<std::string, CharacterSet> out;
  detail::for_each_jsonl(
      path,
      [&](std::size_t line, const nlohmann::json& j) {
        if (!j.is_object() || !j.contains("frame_id") || !j.at("frame_id").is_string() ||
            !j.contains("characters") || !j.at("characters").is_array())
          throw Error(path + ":" + std::to_string(line) + ": expected {\"frame_id\", \"characters\": [...]}");
        CharacterSet set;
        for (const auto& n : j.at("characters")) {
          if (!n.is_string()) throw Error(path + ":" + std::to_string(line) + ": character names must be strings");
          auto c = roster.canonical(n.get<std::string>());
          if (!c) throw NonRosterNameError(n.get<std::string>());
          set.insert(*c);
        }
        std::string id = j.at("frame_id").get<std::string>();
        if (!out.emplace(id, std::move(set)).second)
          throw Error(path + ":" + std::to_string(line) + ": duplicate prediction for " + id);
      },
      [&](std::size_t line, const std::string& msg) {
        throw Error(path + ":" + std::to_string(line) + ": " + msg);
      });
  return out;
}

}  // namespace vivecap::metrics
