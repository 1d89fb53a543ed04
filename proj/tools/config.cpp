#include "config.hpp"

#include <set>

#include <toml.hpp>

namespace vivecap::cli {
namespace {

namespace fs = std::filesystem;

class Table {
 public:
  Table(const toml::table* t, std::string name, fs::path base) : t_(t), name_(std::move(name)), base_(std::move(base)) {}

  void known(const char* key) { read_.insert(key); }

  std::optional<std::string> str(const char* key) {
    auto* n = node(key);
    if (!n) return std::nullopt;
    if (auto v = n->value<std::string>()) return *v;
    throw ConfigError(where(key) + " must be a string");
  }

  std::optional<std::int64_t> integer(const char* key) {
    auto* n = node(key);
    if (!n) return std::nullopt;
    if (!n->is_integer()) throw ConfigError(where(key) + " must be an integer");
    return *n->value<std::int64_t>();
  }

  std::optional<double> number(const char* key) {
    auto* n = node(key);
    if (!n) return std::nullopt;
    if (auto v = n->value<double>()) return *v;
    throw ConfigError(where(key) + " must be a number");
  }

  std::optional<bool> boolean(const char* key) {
    auto* n = node(key);
    if (!n) return std::nullopt;
    if (auto v = n->value<bool>()) return *v;
    throw ConfigError(where(key) + " must be true or false");
  }

  std::optional<fs::path> path(const char* key) {
    auto p = raw_path(key);
    if (!p) return std::nullopt;
    return (p->is_relative() ? base_ / *p : *p).lexically_normal();
  }

  // Left as written; the caller decides what a relative path is relative to.
  std::optional<fs::path> raw_path(const char* key) {
    auto s = str(key);
    if (!s) return std::nullopt;
    if (s->empty()) throw ConfigError(where(key) + " is empty");
    return fs::path(*s);
  }

  fs::path required_path(const char* key) {
    auto p = path(key);
    if (!p) throw ConfigError(where(key) + " is required");
    return *p;
  }

  std::size_t count(const char* key, std::int64_t min) {
    auto v = integer(key);
    if (*v < min) throw ConfigError(where(key) + " must be >= " + std::to_string(min));
    return static_cast<std::size_t>(*v);
  }

  // Rejects keys that were never read, so typos do not pass silently.
  void finish() const {
    if (!t_) return;
    for (const auto& [k, v] : *t_)
      if (!read_.contains(std::string(k.str())))
        throw ConfigError("unknown key " + (name_.empty() ? "" : name_ + ".") + std::string(k.str()));
  }

  std::string where(const char* key) const { return (name_.empty() ? "" : name_ + ".") + key; }

 private:
  const toml::node* node(const char* key) {
    read_.insert(key);
    return t_ ? t_->get(key) : nullptr;
  }

  const toml::table* t_;
  std::string name_;
  fs::path base_;
  std::set<std::string> read_;
};

template <typename Fn>
auto parse_enum(Table& t, const char* key, Fn fn) -> std::optional<decltype(fn(std::string()))> {
  auto s = t.str(key);
  if (!s) return std::nullopt;
  try {
    return fn(*s);
  } catch (const std::exception& e) {
    throw ConfigError(t.where(key) + ": " + e.what());
  }
}

Table sub(const toml::table& root, const char* name, const fs::path& base) {
  auto* n = root.get(name);
  if (n && !n->is_table()) throw ConfigError(std::string(name) + " must be a table");
  return Table(n ? n->as_table() : nullptr, name, base);
}

vlm::EndpointConfig endpoint(const toml::table& endpoints, const char* name, const fs::path& base) {
  auto* n = endpoints.get(name);
  if (n && !n->is_table()) throw ConfigError(std::string("endpoints.") + name + " must be a table");
  Table t(n ? n->as_table() : nullptr, std::string("endpoints.") + name, base);
  vlm::EndpointConfig c;
  if (auto v = t.str("base_url")) c.base_url = *v;
  if (auto v = t.str("model")) c.model_name = *v;
  if (auto v = t.str("api_key_env")) c.api_key_env = *v;
  c.temperature = t.number("temperature");
  if (auto v = t.integer("max_output_tokens")) c.max_output_tokens = static_cast<int>(*v);
  if (auto v = t.number("timeout_s")) c.timeout_s = *v;
  if (auto v = t.integer("max_retries")) c.max_retries = static_cast<int>(*v);
  if (auto v = t.integer("max_in_flight")) c.max_in_flight = static_cast<int>(*v);
  if (auto v = t.number("retry_base_s")) c.retry_base_s = *v;
  if (auto v = t.integer("max_image_side")) c.max_image_side = static_cast<int>(*v);
  t.finish();
  return c;
}

}  // namespace

RunConfig load_config(const fs::path& path) {
  toml::table root;
  try {
    root = toml::parse_file(path.string());
  } catch (const toml::parse_error& e) {
    std::string msg = "cannot parse " + path.string() + ": " + std::string(e.description());
    if (e.source().begin) msg += " (line " + std::to_string(e.source().begin.line) + ")";
    throw ConfigError(msg);
  }
  const fs::path base = fs::absolute(path).parent_path();
  RunConfig c;

  Table top(&root, "", base);
  c.output_dir = top.path("output_dir").value_or(base / "out");

  Table paths = sub(root, "paths", base);
  c.manifest_path = paths.required_path("manifest");
  c.roster_path = paths.required_path("roster");
  c.sheet_path = paths.required_path("sheet");
  c.labels_path = paths.path("labels");
  c.embeddings_path = paths.path("embeddings");
  if (auto f = parse_enum(paths, "embeddings_format", cluster::parse_embedding_format)) c.embeddings_format = *f;
  c.templates_dir = paths.path("templates");
  c.predictions_path = paths.path("predictions");
  paths.finish();

  Table cl = sub(root, "clustering", base);
  if (cl.integer("min_cluster_size")) c.clustering.min_cluster_size = cl.count("min_cluster_size", 2);
  if (cl.integer("min_samples")) c.clustering.min_samples = cl.count("min_samples", 1);
  if (auto v = parse_enum(cl, "metric", cluster::parse_metric)) c.clustering.metric = *v;
  if (auto v = parse_enum(cl, "selection", cluster::parse_selection)) c.clustering.selection = *v;
  if (auto v = parse_enum(cl, "noise_policy", cluster::parse_noise_policy)) c.clustering.noise_policy = *v;
  cl.finish();

  Table sa = sub(root, "sampling", base);
  if (auto v = parse_enum(sa, "strategy", cluster::parse_sample_strategy)) c.sample_strategy = *v;
  if (sa.integer("seed")) c.sample_seed = sa.count("seed", 0);
  if (auto v = sa.str("frames")) {
    if (*v == "all")
      c.frames = FrameScope::All;
    else if (*v == "sample")
      c.frames = FrameScope::Sample;
    else
      throw ConfigError("sampling.frames must be \"all\" or \"sample\"");
  }
  sa.finish();

  Table sp = sub(root, "split", base);
  if (auto v = sp.number("train_fraction")) c.split.train_fraction = *v;
  if (sp.integer("seed")) c.split.seed = sp.count("seed", 0);
  if (auto v = sp.boolean("inline_images")) c.inline_images = *v;
  sp.finish();
  if (!(c.split.train_fraction > 0.0 && c.split.train_fraction < 1.0))
    throw ConfigError("split.train_fraction must lie strictly between 0 and 1");

  Table ch = sub(root, "checks", base);
  if (ch.integer("max_caption_tokens")) c.checks.max_caption_tokens = ch.count("max_caption_tokens", 1);
  if (auto v = ch.str("tokenization_rule")) {
    if (*v == "whitespace")
      c.checks.tokenization_rule = TokenRule::Whitespace;
    else if (*v == "bytes")
      c.checks.tokenization_rule = TokenRule::Bytes;
    else
      throw ConfigError("checks.tokenization_rule must be \"whitespace\" or \"bytes\"");
  }
  if (auto v = ch.str("length_target")) {
    if (*v == "serialized")
      c.checks.target = LengthTarget::Serialized;
    else if (*v == "dense")
      c.checks.target = LengthTarget::Dense;
    else
      throw ConfigError("checks.length_target must be \"serialized\" or \"dense\"");
  }
  ch.finish();

  Table me = sub(root, "metrics", base);
  if (auto v = parse_enum(me, "convention", metrics::parse_convention)) c.convention = *v;
  me.finish();

  Table st = sub(root, "stats", base);
  if (auto v = st.number("alpha")) c.alpha = *v;
  c.stats_before = st.raw_path("before");
  c.stats_after = st.raw_path("after");
  st.finish();
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw ConfigError("stats.alpha must lie strictly between 0 and 1");

  auto* eps = root.get("endpoints");
  if (eps && !eps->is_table()) throw ConfigError("endpoints must be a table");
  static const toml::table empty;
  const toml::table& ep = eps ? *eps->as_table() : empty;
  for (const auto& [k, v] : ep)
    if (k != "detector" && k != "captioner" && k != "judge")
      throw ConfigError("unknown endpoint " + std::string(k.str()));
  c.detector = endpoint(ep, "detector", base);
  c.captioner = endpoint(ep, "captioner", base);
  c.judge = endpoint(ep, "judge", base);

  if (auto* rep = root.get("report")) {
    if (!rep->is_table()) throw ConfigError("report must be a table");
    Table rt(rep->as_table(), "report", base);
    rt.known("variants");
    auto* arr = rep->as_table()->get("variants");
    if (arr) {
      if (!arr->is_array()) throw ConfigError("report.variants must be an array of tables");
      std::size_t i = 0;
      for (const auto& item : *arr->as_array()) {
        if (!item.is_table()) throw ConfigError("report.variants must be an array of tables");
        Table vt(item.as_table(), "report.variants[" + std::to_string(i++) + "]", base);
        ReportVariant v;
        auto label = vt.str("label");
        if (!label || label->empty()) throw ConfigError(vt.where("label") + " is required");
        v.label = *label;
        v.grounded = vt.raw_path("grounded");
        v.scorecards = vt.raw_path("scorecards");
        vt.finish();
        c.variants.push_back(std::move(v));
      }
    }
    rt.finish();
  }

  for (const char* k : {"paths", "clustering", "sampling", "split", "checks", "metrics", "stats", "endpoints", "report"})
    top.known(k);
  top.finish();
  return c;
}

}  // namespace vivecap::cli
