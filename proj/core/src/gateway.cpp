#include "vivecap/gateway.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <random>
#include <regex>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "image_data.hpp"
#include "json_text.hpp"

namespace vivecap::vlm {
namespace {

using Kind = GatewayError::Kind;
using ParseKind = OutputParseError::Kind;

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // without trailing slash
};

std::optional<ParsedUrl> parse_url(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/\s?#]+)(/[^\s?#]*)?$)", std::regex::icase);
  std::smatch m;
  if (!std::regex_match(url, m, re)) return std::nullopt;
  ParsedUrl out{m[1].str(), m[2].matched ? m[2].str() : std::string()};
  while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
  return out;
}

double jitter_unit() {
  thread_local std::mt19937_64 rng{std::random_device{}()};
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::string extract_content(const std::string& body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
    const auto& content = j.at("choices").at(0).at("message").at("content");
    if (content.is_string()) return content.get<std::string>();
    if (content.is_array()) {
      std::string out;
      for (const auto& part : content)
        if (part.value("type", "") == "text") out += part.value("text", "");
      return out;
    }
  } catch (const nlohmann::json::exception&) {
  }
  throw GatewayError(Kind::Transport, "response carries no choices[0].message.content", 200, body);
}

bool retryable_status(int status) { return status == 429 || (status >= 500 && status <= 599); }

std::string clip(const std::string& s, std::size_t n = 200) { return s.size() <= n ? s : s.substr(0, n) + "..."; }

bool is_integral(const nlohmann::json& v) {
  if (v.is_number_integer()) return true;
  if (v.is_number_float()) {
    double d = v.get<double>();
    return std::isfinite(d) && d == std::floor(d);
  }
  return false;
}

}  // namespace

const char* to_string(GatewayError::Kind k) {
  switch (k) {
    case Kind::Config: return "Config";
    case Kind::Transport: return "Transport";
    case Kind::HttpStatus: return "HttpStatus";
    case Kind::Timeout: return "Timeout";
    case Kind::RetriesExhausted: return "RetriesExhausted";
    case Kind::Image: return "Image";
  }
  return "Unknown";
}

void EndpointConfig::validate() const {
  if (!parse_url(base_url)) throw GatewayError(Kind::Config, "base_url is not an http(s) URL: " + base_url);
  if (model_name.empty()) throw GatewayError(Kind::Config, "model_name is empty");
  if (temperature && !(*temperature >= 0.0)) throw GatewayError(Kind::Config, "temperature must be >= 0");
  if (max_output_tokens < 1) throw GatewayError(Kind::Config, "max_output_tokens must be positive");
  if (!(timeout_s > 0.0)) throw GatewayError(Kind::Config, "timeout_s must be positive");
  if (max_retries < 0 || max_retries > 10) throw GatewayError(Kind::Config, "max_retries must be in [0, 10]");
  if (max_in_flight < 1) throw GatewayError(Kind::Config, "max_in_flight must be positive");
  if (!(retry_base_s >= 0.0)) throw GatewayError(Kind::Config, "retry_base_s must be >= 0");
  if (max_image_side < 0) throw GatewayError(Kind::Config, "max_image_side must be >= 0");
}

void RequestLog::append(RequestRecord r) {
  std::lock_guard lock(mu_);
  records_.push_back(std::move(r));
}

std::vector<RequestRecord> RequestLog::snapshot() const {
  std::lock_guard lock(mu_);
  return records_;
}

std::string build_request_body(const EndpointConfig& cfg, const PromptBundle& bundle) {
  nlohmann::ordered_json j;
  j["model"] = cfg.model_name;
  auto& msgs = j["messages"] = nlohmann::ordered_json::array();
  for (const auto& m : bundle.messages) {
    nlohmann::ordered_json content = nlohmann::ordered_json::array();
    for (const auto& p : m.parts) {
      if (p.type == ContentPart::Type::Text)
        content.push_back({{"type", "text"}, {"text", p.value}});
      else
        content.push_back({{"type", "image_url"}, {"image_url", 
                               {{"url", detail::image_data_url(p.value, cfg.max_image_side)}}}});
    }
    msgs.push_back({{"role", m.role}, {"content", std::move(content)}});
  }
  if (cfg.temperature) j["temperature"] = *cfg.temperature;
  j["max_tokens"] = cfg.max_output_tokens;
  return j.dump();
}

std::string complete(const EndpointConfig& cfg, const PromptBundle& bundle, RequestLog* log, std::string_view tag) {
  cfg.validate();
  const ParsedUrl url = *parse_url(cfg.base_url);
  std::string token;
  if (!cfg.api_key_env.empty()) {
    const char* v = std::getenv(cfg.api_key_env.c_str());
    if (!v || !*v) throw GatewayError(Kind::Config, "environment variable " + cfg.api_key_env + " is not set");
    token = v;
  }
  const std::string body = build_request_body(cfg, bundle);
  const std::string path = url.path + "/chat/completions";
  const auto timeout = std::chrono::duration<double>(cfg.timeout_s);
  const auto timeout_us = std::chrono::duration_cast<std::chrono::microseconds>(timeout);

  std::string last_error;
  int last_status = 0;
  std::string last_body;
  Kind last_kind = Kind::Transport;
  const int attempts = cfg.max_retries + 1;
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    if (attempt > 1) {
      double delay = cfg.retry_base_s * std::ldexp(1.0, attempt - 2) * (0.5 + 0.5 * jitter_unit());
      std::this_thread::sleep_for(std::chrono::duration<double>(delay));
    }
    httplib::Client client(url.origin);
    client.set_connection_timeout(timeout_us);
    client.set_read_timeout(timeout_us);
    client.set_write_timeout(timeout_us);
    if (!token.empty()) client.set_bearer_token_auth(token);

    const auto started = std::chrono::steady_clock::now();
    auto res = client.Post(path, body, "application/json");
    const auto elapsed = std::chrono::steady_clock::now() - started;
    const int status = res ? res->status : 0;
    if (log) log->append({std::string(tag), attempt, status, bundle.image_paths()});

    if (!res) {
      const bool timed_out = res.error() == httplib::Error::ConnectionTimeout || elapsed >= timeout * 0.95;
      last_kind = timed_out ? Kind::Timeout : Kind::Transport;
      last_error = timed_out ? "request timed out after " + std::to_string(cfg.timeout_s) + "s"
                             : "transport error: " + httplib::to_string(res.error());
      last_status = 0;
      last_body.clear();
      continue;
    }
    if (status >= 200 && status < 300) return extract_content(res->body);
    if (!retryable_status(status))
      throw GatewayError(Kind::HttpStatus, "HTTP " + std::to_string(status) + ": " + clip(res->body), status,
                         res->body);
    last_kind = Kind::HttpStatus;
    last_error = "HTTP " + std::to_string(status) + ": " + clip(res->body);
    last_status = status;
    last_body = res->body;
  }
  if (attempts == 1 && last_kind != Kind::HttpStatus) throw GatewayError(last_kind, last_error, last_status, last_body);
  throw GatewayError(Kind::RetriesExhausted,
                     "gave up after " + std::to_string(attempts) + " attempts; last error: " + last_error, last_status,
                     last_body);
}

DetectionResult parse_detection(std::string_view raw, const Roster& roster) {
  const auto unfenced = detail::strip_code_fences(raw);
  const std::string_view text = unfenced.body;
  for (std::size_t open = text.find('['); open != std::string_view::npos; open = text.find('[', open + 1)) {
    auto close = detail::matching_bracket(text, open);
    if (!close) continue;
    nlohmann::json arr;
    try {
      arr = nlohmann::json::parse(text.substr(open, *close - open));
    } catch (const nlohmann::json::parse_error&) {
      continue;
    }
    if (!arr.is_array() || !std::all_of(arr.begin(), arr.end(), [](const auto& v) { return v.is_string(); }))
      continue;
    DetectionResult r;
    for (const auto& v : arr) {
      const std::string name = v.get<std::string>();
      if (auto c = roster.canonical(name))
        r.characters.insert(*c);
      else if (std::find(r.dropped.begin(), r.dropped.end(), name) == r.dropped.end())
        r.dropped.push_back(name);
    }
    return r;
  }
  throw OutputParseError(ParseKind::NoListFound, {}, std::string(raw), "no JSON list of names in detector output");
}

Scorecard parse_scorecard(std::string_view raw) {
  static constexpr std::array<const char*, 4> keys = {"scene_score", "background_score", "characters_score",
                                                      "salient_objects_score"};
  const auto unfenced = detail::strip_code_fences(raw);
  const std::string_view text = unfenced.body;
  std::optional<nlohmann::json> first_object;
  for (std::size_t open = text.find('{'); open != std::string_view::npos; open = text.find('{', open + 1)) {
    auto close = detail::matching_bracket(text, open);
    if (!close) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(text.substr(open, *close - open));
    } catch (const nlohmann::json::parse_error&) {
      continue;
    }
    if (!obj.is_object()) continue;
    if (!first_object) first_object = obj;
    if (!std::all_of(keys.begin(), keys.end(), [&](const char* k) { return obj.contains(k); })) continue;

    std::array<int, 4> scores{};
    for (std::size_t i = 0; i < keys.size(); ++i) {
      const auto& v = obj.at(keys[i]);
      if (!is_integral(v))
        throw OutputParseError(ParseKind::WrongType, keys[i], std::string(raw),
                               std::string(keys[i]) + " must be an integer, got " + v.dump());
      const double d = v.get<double>();
      if (d < 1 || d > 10)
        throw OutputParseError(ParseKind::OutOfRange, keys[i], std::string(raw),
                               std::string(keys[i]) + " = " + v.dump() + " is outside [1, 10]");
      scores[i] = static_cast<int>(d);
    }
    Scorecard s{scores[0], scores[1], scores[2], scores[3], {}};
    if (obj.contains("rationale")) {
      if (!obj.at("rationale").is_string())
        throw OutputParseError(ParseKind::WrongType, "rationale", std::string(raw), "rationale must be a string");
      s.rationale = obj.at("rationale").get<std::string>();
    }
    return s;
  }
  if (!first_object)
    throw OutputParseError(ParseKind::MalformedJson, {}, std::string(raw), "no JSON object in judge output");
  for (const char* k : keys)
    if (!first_object->contains(k))
      throw OutputParseError(ParseKind::MissingField, k, std::string(raw), std::string("judge output lacks ") + k);
  throw OutputParseError(ParseKind::MalformedJson, {}, std::string(raw), "no usable scorecard in judge output");
}

}  // namespace vivecap::vlm
