#include <gtest/gtest.h>

#include <cstdlib>
#include <functional>

#include <nlohmann/json.hpp>

#include <vivecap/gateway.hpp>

#include "mock_endpoint.hpp"
#include "test_util.hpp"

using namespace vivecap;
using namespace vivecap::vlm;
using vivecap::testing::MockEndpoint;
using vivecap::testing::MockRule;
using vivecap::testing::reply_rule;

namespace {

std::string frame_path(int i) {
  char name[16];
  std::snprintf(name, sizeof name, "f%02d.png", i);
  return (vt::mini() / "frames" / name).string();
}

PromptBundle tiny_bundle(int frame = 0) {
  PromptBundle b;
  b.kind = PromptKind::Caption;
  b.messages.push_back({"user", {ContentPart::text("describe"), ContentPart::image(frame_path(frame))}});
  return b;
}

EndpointConfig config_for(const MockEndpoint& mock, int retries = 3) {
  EndpointConfig c;
  c.base_url = mock.base_url();
  c.model_name = "m";
  c.max_retries = retries;
  c.retry_base_s = 0.001;
  c.timeout_s = 5;
  return c;
}

MockRule failing(int status, int times) {
  MockRule r;
  r.status = status;
  r.raw_body = R"({"error":"scripted"})";
  r.times = times;
  return r;
}

GatewayError::Kind gateway_error(const std::function<void()>& fn, int* status = nullptr) {
  try {
    fn();
  } catch (const GatewayError& e) {
    if (status) *status = e.status();
    return e.kind();
  }
  ADD_FAILURE() << "no GatewayError";
  return GatewayError::Kind::Config;
}

OutputParseError::Kind parse_error(const std::function<void()>& fn, std::string* field = nullptr) {
  try {
    fn();
  } catch (const OutputParseError& e) {
    if (field) *field = e.field();
    return e.kind();
  }
  ADD_FAILURE() << "no OutputParseError";
  return OutputParseError::Kind::MalformedJson;
}

std::string list_literal(const CharacterSet& names) {
  std::string out = "[";
  bool first = true;
  for (const auto& n : names) {
    out += (first ? "\"" : ", \"") + n + "\"";
    first = false;
  }
  return out + "]";
}

}  // namespace

TEST(RequestBody, ChatCompletionsShape) {
  EndpointConfig c;
  c.base_url = "http://127.0.0.1:1/v1";
  c.model_name = "captioner";
  c.max_output_tokens = 77;
  auto j = nlohmann::json::parse(build_request_body(c, tiny_bundle(4)));
  EXPECT_EQ(j["model"], "captioner");
  EXPECT_EQ(j["max_tokens"], 77);
  EXPECT_FALSE(j.contains("temperature"));
  const auto& content = j["messages"][0]["content"];
  EXPECT_EQ(j["messages"][0]["role"], "user");
  EXPECT_EQ(content[0], (nlohmann::json{{"type", "text"}, {"text", "describe"}}));
  EXPECT_EQ(content[1]["type"], "image_url");
  EXPECT_EQ(content[1]["image_url"]["url"], vivecap::testing::file_data_url(frame_path(4)));

  c.temperature = 0.0;
  EXPECT_EQ(nlohmann::json::parse(build_request_body(c, tiny_bundle()))["temperature"], 0.0);
}

TEST(RequestBody, DownscalesLargeImages) {
  EndpointConfig c;
  c.base_url = "http://127.0.0.1:1/v1";
  c.model_name = "m";
  c.max_image_side = 4;
  auto url = nlohmann::json::parse(build_request_body(c, tiny_bundle()))["messages"][0]["content"][1]["image_url"]["url"]
                 .get<std::string>();
  EXPECT_EQ(url.rfind("data:image/png;base64,", 0), 0u);
  EXPECT_NE(url, vivecap::testing::file_data_url(frame_path(0)));
  c.max_image_side = 8;
  url = nlohmann::json::parse(build_request_body(c, tiny_bundle()))["messages"][0]["content"][1]["image_url"]["url"];
  EXPECT_EQ(url, vivecap::testing::file_data_url(frame_path(0)));
}

TEST(EndpointConfig, Validation) {
  EndpointConfig c;
  c.base_url = "http://h/v1";
  c.model_name = "m";
  EXPECT_NO_THROW(c.validate());
  auto bad = [&](auto mutate) {
    EndpointConfig d = c;
    mutate(d);
    return gateway_error([&] { d.validate(); });
  };
  using K = GatewayError::Kind;
  EXPECT_EQ(bad([](auto& d) { d.base_url = "ftp://h"; }), K::Config);
  EXPECT_EQ(bad([](auto& d) { d.model_name.clear(); }), K::Config);
  EXPECT_EQ(bad([](auto& d) { d.temperature = -1.0; }), K::Config);
  EXPECT_EQ(bad([](auto& d) { d.max_output_tokens = 0; }), K::Config);
  EXPECT_EQ(bad([](auto& d) { d.timeout_s = 0; }), K::Config);
  EXPECT_EQ(bad([](auto& d) { d.max_retries = -1; }), K::Config);
  EXPECT_EQ(bad([](auto& d) { d.max_in_flight = 0; }), K::Config);
}

TEST(Complete, ReturnsAssistantText) {
  MockEndpoint mock;
  mock.add(reply_rule("m", "hello there"));
  RequestLog log;
  EXPECT_EQ(complete(config_for(mock), tiny_bundle(), &log, "cap:f00"), "hello there");
  auto recs = log.snapshot();
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].tag, "cap:f00");
  EXPECT_EQ(recs[0].attempt, 1);
  EXPECT_EQ(recs[0].status, 200);
  EXPECT_EQ(recs[0].images, std::vector<std::string>{frame_path(0)});
  ASSERT_EQ(mock.requests().size(), 1u);
  EXPECT_EQ(mock.requests()[0].text, "describe\n");
  EXPECT_TRUE(mock.requests()[0].authorization.empty());
}

TEST(Complete, RetriesServerErrorsThenSucceeds) {
  MockEndpoint mock;
  mock.add(failing(500, 2));
  mock.add(reply_rule("m", "ok"));
  RequestLog log;
  EXPECT_EQ(complete(config_for(mock, 3), tiny_bundle(), &log, "x"), "ok");
  auto recs = log.snapshot();
  ASSERT_EQ(recs.size(), 3u);
  EXPECT_EQ(recs[0].status, 500);
  EXPECT_EQ(recs[1].status, 500);
  EXPECT_EQ(recs[2].status, 200);
  EXPECT_EQ(recs[2].attempt, 3);
}

TEST(Complete, RateLimitIsRetried) {
  MockEndpoint mock;
  mock.add(failing(429, 1));
  mock.add(reply_rule("m", "ok"));
  RequestLog log;
  EXPECT_EQ(complete(config_for(mock, 1), tiny_bundle(), &log), "ok");
  EXPECT_EQ(log.snapshot().size(), 2u);
}

TEST(Complete, GivesUpAfterConfiguredAttempts) {
  MockEndpoint mock;
  mock.add(failing(503, -1));
  RequestLog log;
  int status = 0;
  EXPECT_EQ(gateway_error([&] { complete(config_for(mock, 2), tiny_bundle(), &log); }, &status),
            GatewayError::Kind::RetriesExhausted);
  EXPECT_EQ(status, 503);
  EXPECT_EQ(log.snapshot().size(), 3u);
  EXPECT_EQ(mock.requests().size(), 3u);
}

TEST(Complete, ClientErrorsAreNotRetried) {
  MockEndpoint mock;
  mock.add(failing(400, -1));
  RequestLog log;
  int status = 0;
  EXPECT_EQ(gateway_error([&] { complete(config_for(mock, 3), tiny_bundle(), &log); }, &status),
            GatewayError::Kind::HttpStatus);
  EXPECT_EQ(status, 400);
  EXPECT_EQ(log.snapshot().size(), 1u);
}

TEST(Complete, TransportFailures) {
  EndpointConfig c;
  c.base_url = "http://127.0.0.1:9/v1";
  c.model_name = "m";
  c.retry_base_s = 0.001;
  c.timeout_s = 2;
  c.max_retries = 0;
  RequestLog log;
  EXPECT_EQ(gateway_error([&] { complete(c, tiny_bundle(), &log); }), GatewayError::Kind::Transport);
  c.max_retries = 1;
  EXPECT_EQ(gateway_error([&] { complete(c, tiny_bundle(), &log); }), GatewayError::Kind::RetriesExhausted);
  auto recs = log.snapshot();
  ASSERT_EQ(recs.size(), 3u);
  EXPECT_EQ(recs[2].status, 0);
}

TEST(Complete, SlowServerTimesOut) {
  MockEndpoint mock;
  auto slow = reply_rule("m", "late");
  slow.delay_s = 1.0;
  mock.add(slow);
  auto c = config_for(mock, 0);
  c.timeout_s = 0.2;
  EXPECT_EQ(gateway_error([&] { complete(c, tiny_bundle()); }), GatewayError::Kind::Timeout);
}

TEST(Complete, BearerTokenFromEnvironment) {
  MockEndpoint mock;
  mock.add(reply_rule("m", "ok"));
  auto c = config_for(mock);
  c.api_key_env = "VIVECAP_TEST_KEY";
  ::unsetenv("VIVECAP_TEST_KEY");
  EXPECT_EQ(gateway_error([&] { complete(c, tiny_bundle()); }), GatewayError::Kind::Config);
  ::setenv("VIVECAP_TEST_KEY", "sekret", 1);
  EXPECT_EQ(complete(c, tiny_bundle()), "ok");
  EXPECT_EQ(mock.requests().back().authorization, "Bearer sekret");
  ::unsetenv("VIVECAP_TEST_KEY");
}

TEST(Complete, MalformedSuccessBody) {
  MockEndpoint mock;
  MockRule r;
  r.raw_body = "not json";
  mock.add(r);
  EXPECT_THROW(complete(config_for(mock), tiny_bundle()), Error);
}

TEST(ParseDetection, ExactShapeRoundTripsForEverySubset) {
  for (unsigned mask = 0; mask < 128; ++mask) {
    auto names = vt::subset(mask);
    auto r = parse_detection(list_literal(names), vt::roster());
    ASSERT_EQ(r.characters, names) << list_literal(names);
    ASSERT_TRUE(r.dropped.empty());
  }
}

TEST(ParseDetection, FencesProseAndStrangers) {
  auto r = parse_detection("Sure! Here you go:\n```json\n[\"rex\", \"Bob\", \"Ellie\", \"Bob\"]\n```\nDone.", vt::roster());
  EXPECT_EQ(r.characters, (CharacterSet{"Ellie", "Rex"}));
  EXPECT_EQ(r.dropped, std::vector<std::string>{"Bob"});
  // Non-string arrays are skipped in favour of the first list of names.
  EXPECT_EQ(parse_detection("scores [1, 2] then [\"Jay\"]", vt::roster()).characters, CharacterSet{"Jay"});
  EXPECT_TRUE(parse_detection("[]", vt::roster()).characters.empty());
  EXPECT_EQ(parse_error([] { parse_detection("nobody here", vt::roster()); }), OutputParseError::Kind::NoListFound);
  EXPECT_EQ(parse_error([] { parse_detection("[\"Jay\"", vt::roster()); }), OutputParseError::Kind::NoListFound);
}

TEST(ParseScorecard, AcceptsWellFormedOutput) {
  auto s = parse_scorecard(
      "```json\n{\"scene_score\": 8, \"background_score\": 5, \"characters_score\": 10, \"salient_objects_score\": 7, "
      "\"rationale\": \"fine\"}\n```");
  EXPECT_EQ(s, (Scorecard{8, 5, 10, 7, "fine"}));
  EXPECT_DOUBLE_EQ(s.overall(), 7.5);
  auto t = parse_scorecard(
      "preamble {\"note\": 1} {\"scene_score\": 1.0, \"background_score\": 10, \"characters_score\": 2, "
      "\"salient_objects_score\": 3}");
  EXPECT_EQ(t, (Scorecard{1, 10, 2, 3, ""}));
}

TEST(ParseScorecard, RejectsBadScores) {
  using K = OutputParseError::Kind;
  std::string field;
  const std::string rest = R"(, "background_score": 5, "characters_score": 5, "salient_objects_score": 5})";
  EXPECT_EQ(parse_error([&] { parse_scorecard(R"({"scene_score": 11)" + rest); }, &field), K::OutOfRange);
  EXPECT_EQ(field, "scene_score");
  EXPECT_EQ(parse_error([&] { parse_scorecard(R"({"scene_score": 0)" + rest); }), K::OutOfRange);
  EXPECT_EQ(parse_error([&] { parse_scorecard(R"({"scene_score": 7.5)" + rest); }), K::WrongType);
  EXPECT_EQ(parse_error([&] { parse_scorecard(R"({"scene_score": "8")" + rest); }), K::WrongType);
  EXPECT_EQ(parse_error([&] { parse_scorecard(R"({"scene_score": 8, "background_score": 5})"); }, &field),
            K::MissingField);
  EXPECT_EQ(field, "characters_score");
  EXPECT_EQ(parse_error([&] { parse_scorecard("no json at all"); }), K::MalformedJson);
  EXPECT_EQ(parse_error([&] { parse_scorecard(R"({"scene_score": 8)" + rest.substr(0, rest.size() - 1) + R"(, "rationale": 3})"); }),
            K::WrongType);
}
