#pragma once

#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vivecap/character_set.hpp"
#include "vivecap/error.hpp"
#include "vivecap/prompts.hpp"
#include "vivecap/roster.hpp"

namespace vivecap::vlm {

struct EndpointConfig {
  std::string base_url;  // e.g. http://127.0.0.1:8000/v1; "/chat/completions" is appended
  std::string model_name;
  std::string api_key_env;             // empty: no Authorization header
  std::optional<double> temperature;   // unset: endpoint default, omitted on the wire
  int max_output_tokens = 1024;
  double timeout_s = 120.0;
  int max_retries = 3;
  int max_in_flight = 4;
  double retry_base_s = 1.0;  // first backoff delay, doubled per retry
  int max_image_side = 0;     // >0: downscale images whose longer side exceeds this

  /// Throws GatewayError(Config).
  void validate() const;
};

class GatewayError : public Error {
 public:
  enum class Kind { Config, Transport, HttpStatus, Timeout, RetriesExhausted, Image };

  GatewayError(Kind kind, const std::string& detail, int status = 0, std::string body = {})
      : Error(detail), kind_(kind), status_(status), body_(std::move(body)) {}

  Kind kind() const noexcept { return kind_; }
  int status() const noexcept { return status_; }
  const std::string& body() const noexcept { return body_; }

 private:
  Kind kind_;
  int status_;
  std::string body_;
};

const char* to_string(GatewayError::Kind k);

struct RequestRecord {
  std::string tag;  // caller-supplied, e.g. "detect:frame_0001"
  int attempt = 0;  // 1-based
  int status = 0;   // HTTP status, 0 on transport failure
  std::vector<std::string> images;
};

/// Append-only, thread-safe log of every HTTP attempt.
class RequestLog {
 public:
  void append(RequestRecord r);
  std::vector<RequestRecord> snapshot() const;

 private:
  mutable std::mutex mu_;
  std::vector<RequestRecord> records_;
};

/// Chat-completions JSON body with images embedded as base64 data URLs.
std::string build_request_body(const EndpointConfig& cfg, const PromptBundle& bundle);

/// POSTs the bundle and returns the assistant text. Transport failures,
/// timeouts, 429 and 5xx are retried with exponential backoff and jitter up to
/// cfg.max_retries times; other statuses fail immediately with
/// GatewayError(HttpStatus).
std::string complete(const EndpointConfig& cfg, const PromptBundle& bundle, RequestLog* log = nullptr,
                     std::string_view tag = {});

class OutputParseError : public Error {
 public:
  enum class Kind { NoListFound, MalformedJson, MissingField, OutOfRange, WrongType };

  OutputParseError(Kind kind, std::string field, std::string raw, const std::string& detail)
      : Error(detail), kind_(kind), field_(std::move(field)), raw_(std::move(raw)) {}

  Kind kind() const noexcept { return kind_; }
  const std::string& field() const noexcept { return field_; }
  const std::string& raw() const noexcept { return raw_; }

 private:
  Kind kind_;
  std::string field_;
  std::string raw_;
};

struct DetectionResult {
  CharacterSet characters;
  std::vector<std::string> dropped;  // names not in the roster, as written
};

/// Takes the first JSON array of strings in `raw` (code fences and prose
/// around it are ignored), maps names to roster spelling and drops the rest.
DetectionResult parse_detection(std::string_view raw, const Roster& roster);

struct Scorecard {
  int scene = 1;
  int background = 1;
  int characters = 1;
  int salient_objects = 1;
  std::string rationale;

  double overall() const { return (scene + background + characters + salient_objects) / 4.0; }
  bool operator==(const Scorecard&) const = default;
};

/// Takes the first JSON object in `raw` that carries the four *_score keys.
/// Scores must be integers in [1, 10].
Scorecard parse_scorecard(std::string_view raw);

}  // namespace vivecap::vlm
