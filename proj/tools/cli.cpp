#include "cli.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <set>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <vivecap/caption.hpp>
#include <vivecap/dataset.hpp>
#include <vivecap/embeddings.hpp>
#include <vivecap/grounded_metrics.hpp>
#include <vivecap/hdbscan.hpp>
#include <vivecap/pipeline.hpp>
#include <vivecap/report.hpp>
#include <vivecap/sampling.hpp>
#include <vivecap/sft_export.hpp>
#include <vivecap/statistics.hpp>

#include "config.hpp"

namespace vivecap::cli {
namespace {

namespace fs = std::filesystem;

struct Overrides {
  fs::path config;
  std::optional<std::uint64_t> seed;
  std::optional<fs::path> output_dir;
  std::optional<std::string> mock_endpoint;
  bool no_detection = false;
  std::optional<fs::path> input;
  std::optional<fs::path> predictions;
  std::optional<fs::path> before;
  std::optional<fs::path> after;
};

// Raised for problems found before a stage starts doing work.
class StartupError : public Error {
 public:
  using Error::Error;
};

class Context {
 public:
  Context(RunConfig cfg, std::ostream& err) : cfg_(std::move(cfg)), err_(err) {}

  const RunConfig& cfg() const { return cfg_; }
  fs::path out(const fs::path& name) const { return (cfg_.output_dir / name).lexically_normal(); }

  const Roster& roster() {
    if (!roster_) roster_ = load_roster(cfg_.roster_path);
    return *roster_;
  }

  // Frames with image paths resolved against the manifest's directory.
  const std::vector<Frame>& frames() {
    if (!frames_) {
      auto frames = read_frames_jsonl(cfg_.manifest_path);
      const fs::path base = cfg_.manifest_path.parent_path();
      for (auto& f : frames) {
        fs::path p(f.image_path);
        if (p.is_relative()) f.image_path = (base / p).lexically_normal().string();
      }
      frames_ = std::move(frames);
    }
    return *frames_;
  }

  DatasetManifest manifest_with_labels() {
    // Labels outside the frame scope (e.g. frames not sampled) are ignored.
    DatasetManifest m(stage_frames());
    std::map<std::string, GoldLabel> in_scope;
    for (auto& [id, label] : labels())
      if (m.find(id)) in_scope.emplace(id, std::move(label));
    m.set_labels(in_scope);
    return m;
  }

  std::map<std::string, GoldLabel> labels() {
    if (!cfg_.labels_path) throw StartupError("paths.labels is required for this command");
    return read_labels_jsonl(*cfg_.labels_path, roster());
  }

  const vlm::CharacterSheet& sheet() {
    if (!sheet_) sheet_ = vlm::load_character_sheet(cfg_.sheet_path, roster());
    return *sheet_;
  }

  const vlm::PromptTemplates& templates() {
    if (!cfg_.templates_dir) return vlm::PromptTemplates::builtin();
    if (!templates_) templates_ = vlm::PromptTemplates::load(*cfg_.templates_dir);
    return *templates_;
  }

  cluster::EmbeddingMatrix embeddings() {
    if (!cfg_.embeddings_path) throw StartupError("paths.embeddings is required for this command");
    return cluster::load_embeddings(*cfg_.embeddings_path, cfg_.embeddings_format);
  }

  // Frames the VLM stages run on, in manifest order.
  std::vector<Frame> stage_frames() {
    if (cfg_.frames == FrameScope::All) return frames();
    auto sample = cluster::sample_manifest_from_json(report::read_text_file(out("sample.json")));
    std::set<std::string> chosen;
    for (const auto& [cluster, id] : sample.chosen) chosen.insert(id);
    std::vector<Frame> picked;
    for (const auto& f : frames())
      if (chosen.erase(f.id)) picked.push_back(f);
    if (!chosen.empty()) throw Error("sampled frame " + *chosen.begin() + " is not in the manifest");
    return picked;
  }

  vlm::PipelineOptions pipeline_options(vlm::ContextMode mode, const char* stage) {
    vlm::PipelineOptions o;
    o.context = mode;
    o.templates = &templates();
    o.on_progress = [this, stage](const std::string& id) { err_ << stage << ' ' << id << '\n'; };
    return o;
  }

  std::ostream& err() { return err_; }

 private:
  RunConfig cfg_;
  std::ostream& err_;
  std::optional<Roster> roster_;
  std::optional<std::vector<Frame>> frames_;
  std::optional<vlm::CharacterSheet> sheet_;
  std::optional<vlm::PromptTemplates> templates_;
};

void write_lines(const fs::path& path, const std::vector<std::string>& lines) {
  std::string buf;
  for (const auto& l : lines) buf += l + '\n';
  report::write_text_file(path, buf);
}

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void cmd_cluster(Context& ctx) {
  auto e = ctx.embeddings();
  auto a = cluster::hdbscan_cluster(e, ctx.cfg().clustering);
  report::write_text_file(ctx.out("cluster.json"), cluster::assignment_to_json(a, e.ids(), ctx.cfg().clustering));

  auto proj = cluster::pca_project_2d(e);
  std::string csv = "id,cluster,x,y\n";
  for (std::size_t i = 0; i < e.rows(); ++i)
    csv += fmt::format("{},{},{:.6f},{:.6f}\n", csv_cell(e.ids()[i]), a.labels[i], proj.points[i][0], proj.points[i][1]);
  report::write_text_file(ctx.out("projection.csv"), csv);
  ctx.err() << "cluster: " << a.n_clusters << " clusters over " << e.rows() << " frames\n";
}

void cmd_sample(Context& ctx) {
  auto e = ctx.embeddings();
  auto a = cluster::assignment_from_json(report::read_text_file(ctx.out("cluster.json")), e.ids());
  auto m = cluster::stratified_sample(e, a, ctx.cfg().sample_strategy, ctx.cfg().sample_seed,
                                      ctx.cfg().clustering.metric);
  report::write_text_file(ctx.out("sample.json"), cluster::sample_manifest_to_json(m));
  if (ctx.cfg().labels_path)
    report::emit_distribution_chart_data(cluster::character_distribution(ctx.labels(), m), ctx.out("distribution.json"));
  ctx.err() << fmt::format("sample: {} frames ({:.2f}% of {})\n", m.chosen.size(), m.share_percent(), m.n_frames);
}

void cmd_detect(Context& ctx) {
  auto frames = ctx.stage_frames();
  auto opts = ctx.pipeline_options(vlm::ContextMode::Detected, "detect");
  auto results = vlm::run_detection(ctx.cfg().detector, ctx.sheet(), ctx.roster(), frames, opts);
  std::vector<std::string> ok, errors;
  for (const auto& r : results) {
    if (r.error)
      errors.push_back(vlm::error_record_to_json(*r.error));
    else
      ok.push_back(vlm::detection_to_json(r));
  }
  write_lines(ctx.out("detections.jsonl"), ok);
  write_lines(ctx.out("detect_errors.jsonl"), errors);
  ctx.err() << "detect: " << ok.size() << " ok, " << errors.size() << " failed\n";
}

void cmd_caption(Context& ctx, bool no_detection) {
  auto frames = ctx.stage_frames();
  const auto mode = no_detection ? vlm::ContextMode::AllCharacters : vlm::ContextMode::Detected;
  std::map<std::string, CharacterSet> detected;
  if (!no_detection) detected = metrics::read_predictions_jsonl(ctx.out("detections.jsonl").string(), ctx.roster());
  auto opts = ctx.pipeline_options(mode, "caption");
  auto results = vlm::run_captioning(ctx.cfg().captioner, ctx.sheet(), frames, detected, opts);

  std::vector<CaptionedFrame> captions;
  std::vector<std::string> errors;
  std::string checks = "frame_id,adherent,violations,tokens,too_long\n";
  for (auto& r : results) {
    if (r.error) {
      errors.push_back(vlm::error_record_to_json(*r.error));
      continue;
    }
    const auto& cap = r.captioned->caption;
    auto report = validate_structured_caption(cap, ctx.roster());
    auto tokens = caption_token_count(cap, ctx.cfg().checks);
    std::string violations;
    for (const auto& v : report.violations) violations += (violations.empty() ? "" : "; ") + describe(v);
    checks += fmt::format("{},{},{},{},{}\n", csv_cell(r.frame_id), report.adherent(), csv_cell(violations),
                          tokens.count, tokens.too_long);
    captions.push_back(std::move(*r.captioned));
  }
  write_captions_jsonl(captions, ctx.out("captions.jsonl"));
  write_lines(ctx.out("caption_errors.jsonl"), errors);
  report::write_text_file(ctx.out("checks.csv"), checks);
  ctx.err() << "caption: " << captions.size() << " ok, " << errors.size() << " failed\n";
}

void cmd_judge(Context& ctx) {
  auto captions = read_captions_jsonl(ctx.out("captions.jsonl"), ctx.frames());
  std::vector<std::pair<Frame, StructuredCaption>> pairs;
  for (auto& c : captions) pairs.emplace_back(std::move(c.frame), std::move(c.caption));
  auto opts = ctx.pipeline_options(vlm::ContextMode::AllCharacters, "judge");
  auto results = vlm::run_judge(ctx.cfg().judge, ctx.sheet(), pairs, opts);
  std::vector<std::string> ok, errors;
  for (const auto& r : results) {
    if (r.error)
      errors.push_back(vlm::error_record_to_json(*r.error));
    else
      ok.push_back(vlm::scorecard_to_json(r.frame_id, *r.scorecard));
  }
  write_lines(ctx.out("scorecards.jsonl"), ok);
  write_lines(ctx.out("judge_errors.jsonl"), errors);
  ctx.err() << "judge: " << ok.size() << " ok, " << errors.size() << " failed\n";
}

void cmd_metrics(Context& ctx, const std::optional<fs::path>& predictions) {
  const fs::path pred = predictions ? *predictions : ctx.cfg().predictions_path.value_or(ctx.out("detections.jsonl"));
  auto manifest = ctx.manifest_with_labels();
  auto preds = metrics::read_predictions_jsonl(pred.string(), ctx.roster());
  auto ev = metrics::evaluate_dataset(manifest, preds, ctx.roster(), ctx.cfg().convention);
  report::write_text_file(ctx.out("grounded.json"), metrics::evaluation_to_json(ev));
  report::write_text_file(ctx.out("grounded.csv"), metrics::evaluation_to_csv(ev));
  ctx.err() << fmt::format("metrics: macro F1 {:.4f} over {} frames\n", ev.aggregate.macro_f1, ev.aggregate.n_examples);
}

void cmd_stats(Context& ctx, const std::optional<fs::path>& before_arg, const std::optional<fs::path>& after_arg) {
  std::optional<fs::path> before_path = before_arg;
  if (!before_path && ctx.cfg().stats_before) before_path = ctx.out(*ctx.cfg().stats_before);
  if (!before_path) throw StartupError("stats needs a baseline: set stats.before or pass --before");
  const fs::path after_path = after_arg ? *after_arg : ctx.out(ctx.cfg().stats_after.value_or("scorecards.jsonl"));

  auto before = vlm::read_scorecards_jsonl(before_path->string());
  std::map<std::string, vlm::Scorecard> after;
  for (auto& [id, s] : vlm::read_scorecards_jsonl(after_path.string())) after.emplace(id, s);

  // Pair by frame id; frames scored on only one side are left out.
  static const std::array<const char*, 5> names = {"overall", "salient_objects", "characters", "background", "scene"};
  std::array<stats::PairedSamples, 5> samples;
  for (const auto& [id, b] : before) {
    auto it = after.find(id);
    if (it == after.end()) continue;
    const auto& a = it->second;
    const std::array<double, 5> bv = {b.overall(), double(b.salient_objects), double(b.characters),
                                      double(b.background), double(b.scene)};
    const std::array<double, 5> av = {a.overall(), double(a.salient_objects), double(a.characters),
                                      double(a.background), double(a.scene)};
    for (std::size_t k = 0; k < 5; ++k) {
      samples[k].before.push_back(bv[k]);
      samples[k].after.push_back(av[k]);
    }
  }
  std::vector<std::pair<std::string, stats::TTestResult>> results;
  for (std::size_t k = 0; k < 5; ++k) {
    samples[k].label = names[k];
    results.emplace_back(names[k], stats::paired_t_test(samples[k]));
  }
  stats::CorrectionPolicy policy{ctx.cfg().alpha, static_cast<int>(results.size())};
  auto rows = stats::significance_report(results, policy);
  report::write_text_file(ctx.out("stats.json"), stats::significance_to_json(rows, policy));
  report::write_text_file(ctx.out("stats.csv"), stats::significance_to_csv(rows));
  ctx.err() << "stats: " << samples[0].before.size() << " paired frames\n";
}

void cmd_report(Context& ctx) {
  std::vector<ReportVariant> variants = ctx.cfg().variants;
  if (variants.empty()) {
    ReportVariant v{"run", std::nullopt, std::nullopt};
    if (fs::exists(ctx.out("grounded.json"))) v.grounded = ctx.out("grounded.json");
    if (fs::exists(ctx.out("scorecards.jsonl"))) v.scorecards = ctx.out("scorecards.jsonl");
    variants.push_back(v);
  }
  std::vector<report::Variant> rows;
  report::RadarData radar;
  for (const auto& v : variants) {
    report::Variant r{v.label, std::nullopt, std::nullopt};
    if (v.grounded) r.grounded = metrics::aggregate_from_json(report::read_text_file(ctx.out(*v.grounded)));
    if (v.scorecards) {
      std::vector<vlm::Scorecard> cards;
      for (auto& [id, s] : vlm::read_scorecards_jsonl(ctx.out(*v.scorecards).string())) cards.push_back(std::move(s));
      r.judged = report::mean_scorecards(cards);
      radar.series.push_back({v.label,
                              {{"scene", r.judged->scene},
                               {"background", r.judged->background},
                               {"characters", r.judged->characters},
                               {"salient_objects", r.judged->salient_objects}}});
    }
    rows.push_back(std::move(r));
  }
  auto tables = report::emit_aggregate_tables(rows);
  report::write_text_file(ctx.out("tables.md"), tables.markdown);
  report::write_text_file(ctx.out("grounded_table.csv"), tables.grounded_csv);
  report::write_text_file(ctx.out("judged.csv"), tables.judged_csv);
  report::emit_radar_svg(radar, ctx.out("radar.svg"));
  ctx.err() << "report: " << rows.size() << " variants\n";
}

void cmd_export_sft(Context& ctx) {
  auto manifest = ctx.manifest_with_labels();
  std::vector<std::string> ids;
  for (const auto& [id, label] : manifest.labels()) ids.push_back(id);
  auto split = sft::split_dataset(ids, ctx.cfg().split);
  auto build = [&](const std::vector<std::string>& part) {
    std::vector<sft::SftExample> out;
    for (const auto& id : part)
      out.push_back(sft::build_sft_example(*manifest.find(id), manifest.labels().at(id), ctx.sheet(), ctx.roster(),
                                           ctx.templates()));
    return out;
  };
  sft::ExportOptions opts{ctx.cfg().inline_images};
  sft::export_sft_jsonl(build(split.train), ctx.out("sft_train.jsonl"), opts);
  sft::export_sft_jsonl(build(split.test), ctx.out("sft_test.jsonl"), opts);
  nlohmann::ordered_json j;
  j["seed"] = ctx.cfg().split.seed;
  j["train_fraction"] = ctx.cfg().split.train_fraction;
  j["train"] = split.train;
  j["test"] = split.test;
  report::write_text_file(ctx.out("split.json"), j.dump(2) + "\n");
  ctx.err() << "export-sft: " << split.train.size() << " train, " << split.test.size() << " test\n";
}

void cmd_import_labelstudio(Context& ctx, const std::optional<fs::path>& input) {
  if (!input) throw StartupError("import-labelstudio needs --input");
  auto imported = sft::import_labelstudio(*input, ctx.roster());
  for (const auto& w : imported.warnings) ctx.err() << "warning: " << w << '\n';
  write_labels_jsonl(imported.labels, ctx.out("labels.jsonl"));
  ctx.err() << "import-labelstudio: " << imported.labels.size() << " labelled frames\n";
}

// Checks that only need the config, so a bad setup fails with exit 2 before
// any work is done.
void preflight(const std::string& command, const RunConfig& cfg, bool no_detection) {
  auto require = [](const fs::path& p, const char* what) {
    if (!fs::exists(p)) throw StartupError(std::string(what) + " not found: " + p.string());
  };
  require(cfg.manifest_path, "paths.manifest");
  require(cfg.roster_path, "paths.roster");
  require(cfg.sheet_path, "paths.sheet");
  if (cfg.labels_path) require(*cfg.labels_path, "paths.labels");
  if (cfg.embeddings_path) require(*cfg.embeddings_path, "paths.embeddings");
  if (cfg.templates_dir) require(*cfg.templates_dir, "paths.templates");
  try {
    cfg.clustering.validate();
    cfg.checks.validate();
    if (command == "detect" || (command == "caption" && !no_detection)) cfg.detector.validate();
    if (command == "caption") cfg.captioner.validate();
    if (command == "judge") cfg.judge.validate();
  } catch (const Error& e) {
    throw StartupError(e.what());
  }
  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (ec || !fs::is_directory(cfg.output_dir))
    throw StartupError("output_dir is not writable: " + cfg.output_dir.string());
}

void report_failure(std::ostream& err, const std::string& command, int code, const std::string& message) {
  nlohmann::ordered_json j;
  j["error"] = {{"command", command}, {"kind", code == kExitConfig ? "config" : "stage"}, {"exit_code", code},
                {"message", message}};
  err << j.dump() << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Character-aware captioning pipeline", "vivecap"};
  app.require_subcommand(1, 1);
  Overrides o;
  app.add_option("--config", o.config, "TOML run configuration")->required();
  app.add_option("--seed", o.seed, "Override sampling and split seeds");
  app.add_option("--output-dir", o.output_dir, "Override output_dir");
  app.add_option("--mock-endpoint", o.mock_endpoint, "Send every VLM request to this base URL");

  struct Command {
    const char* name;
    const char* help;
  };
  static const Command commands[] = {
      {"cluster", "HDBSCAN over frame embeddings"},
      {"sample", "One frame per cluster"},
      {"detect", "Character detection"},
      {"caption", "Structured captions"},
      {"judge", "Judge captions"},
      {"metrics", "Instance-grounded metrics against gold labels"},
      {"stats", "Paired t-tests with Bonferroni correction"},
      {"report", "Tables and radar chart"},
      {"export-sft", "Detector fine-tuning data"},
      {"import-labelstudio", "Gold labels from a Label Studio export"},
  };
  std::map<std::string, CLI::App*> subs;
  for (const auto& c : commands) subs[c.name] = app.add_subcommand(c.name, c.help)->fallthrough();
  subs["caption"]->add_flag("--no-detection", o.no_detection, "Give the captioner the whole character sheet");
  subs["import-labelstudio"]->add_option("--input", o.input, "Label Studio JSON export")->required();
  subs["metrics"]->add_option("--predictions", o.predictions, "Predictions JSONL (default: detections.jsonl)");
  subs["stats"]->add_option("--before", o.before, "Baseline scorecards JSONL");
  subs["stats"]->add_option("--after", o.after, "Improved scorecards JSONL");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    report_failure(err, "", kExitConfig, e.what());
    return kExitConfig;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  RunConfig cfg;
  try {
    cfg = load_config(o.config);
    if (o.seed) cfg.sample_seed = cfg.split.seed = *o.seed;
    if (o.output_dir) cfg.output_dir = fs::absolute(*o.output_dir).lexically_normal();
    if (o.mock_endpoint) {
      for (auto* ep : {&cfg.detector, &cfg.captioner, &cfg.judge}) {
        ep->base_url = *o.mock_endpoint;
        ep->api_key_env.clear();
      }
    }
    preflight(command, cfg, o.no_detection);
  } catch (const std::exception& e) {
    report_failure(err, command, kExitConfig, e.what());
    return kExitConfig;
  }

  Context ctx(std::move(cfg), err);
  try {
    if (command == "cluster") cmd_cluster(ctx);
    else if (command == "sample") cmd_sample(ctx);
    else if (command == "detect") cmd_detect(ctx);
    else if (command == "caption") cmd_caption(ctx, o.no_detection);
    else if (command == "judge") cmd_judge(ctx);
    else if (command == "metrics") cmd_metrics(ctx, o.predictions);
    else if (command == "stats") cmd_stats(ctx, o.before, o.after);
    else if (command == "report") cmd_report(ctx);
    else if (command == "export-sft") cmd_export_sft(ctx);
    else if (command == "import-labelstudio") cmd_import_labelstudio(ctx, o.input);
  } catch (const StartupError& e) {
    report_failure(err, command, kExitConfig, e.what());
    return kExitConfig;
  } catch (const vlm::GatewayError& e) {
    const int code = e.kind() == vlm::GatewayError::Kind::Config ? kExitConfig : kExitStage;
    report_failure(err, command, code, e.what());
    return code;
  } catch (const std::exception& e) {
    report_failure(err, command, kExitStage, e.what());
    return kExitStage;
  }
  return kExitOk;
}

}  // namespace vivecap::cli
