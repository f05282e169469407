// Copyright 2026 The lenctl Authors
// SPDX-License-Identifier: Apache-2.0

// HttpBackend against the in-process SSE mock server.

#include <gtest/gtest.h>

#include <chrono>
#include <string>

#include "lenctl/decode.hpp"
#include "lenctl/http_backend.hpp"
#include "lenctl/mock_backend.hpp"
#include "lenctl/mock_server.hpp"

namespace {

using namespace lenctl;
using namespace std::chrono_literals;

HttpBackendConfig config_for(const MockServer& server, std::chrono::milliseconds idle = 5000ms) {
  HttpBackendConfig c;
  c.base_url = server.base_url();
  c.model = "mock-model";
  c.idle_timeout = idle;
  c.connect_timeout = 2000ms;
  return c;
}

GenerationRequest request(std::int64_t hint = 20) {
  GenerationRequest r;
  r.context = {{"system", "Be brief."}, {"user", "Describe a lake."}};
  r.sampling.max_units_hint = hint;
  return r;
}

std::pair<std::string, StreamEvent> drain(TextStream& s) {
  std::string text;
  for (;;) {
    StreamEvent ev = s.next();
    if (ev.terminal()) return {text, ev};
    text += ev.text;
  }
}

TEST(Http, RequestBodyShape) {
  HttpBackendConfig c;
  c.model = "m";
  auto req = request(40);
  auto fresh = chat_request_body(c, req, {}, false);
  EXPECT_EQ(fresh["model"], "m");
  EXPECT_EQ(fresh["stream"], true);
  EXPECT_EQ(fresh["max_tokens"], 2 * 40 + 64);
  EXPECT_EQ(fresh["messages"].size(), 2u);
  EXPECT_EQ(fresh["stop"][0], "###end");
  EXPECT_FALSE(fresh.contains("continue_final_message"));
  auto cont = chat_request_body(c, req, "w1 w2 [2 words]", true);
  ASSERT_EQ(cont["messages"].size(), 3u);
  EXPECT_EQ(cont["messages"][2]["role"], "assistant");
  EXPECT_EQ(cont["messages"][2]["content"], "w1 w2 [2 words]");
  EXPECT_EQ(cont["continue_final_message"], true);
}

TEST(Http, EndpointUrl) {
  auto u = EndpointUrl::parse("http://localhost:8000/v1/");
  EXPECT_EQ(u.origin, "http://localhost:8000");
  EXPECT_EQ(u.path, "/v1");
  EXPECT_THROW(EndpointUrl::parse("localhost:8000"), DomainError);
  EXPECT_THROW(EndpointUrl::parse("ftp://host"), DomainError);
}

TEST(Http, ScriptedStreamThroughServer) {
  MockBackend mock(MockScript::scripted({"hello ", "wide ", "world ###end tail"}));
  MockServer server(mock);
  HttpBackend http(config_for(server));
  auto [text, end] = drain(*http.generate_stream(request()));
  EXPECT_EQ(text, "hello wide world ");
  EXPECT_EQ(end.kind, StreamEventKind::Done);
  EXPECT_EQ(end.text, "stop");
}

TEST(Http, FullSessionWithContinuations) {
  MockBackend mock(MockScript::compliant(6));
  MockServer server(mock);
  HttpBackend http(config_for(server));
  auto r = run_session({{"user", "Describe a lake."}}, LengthConstraint::exact(40), InsertionSchedule::decaying(40), {},
                       http);
  EXPECT_EQ(r.status, SessionStatus::StoppedAtTarget);
  EXPECT_EQ(r.final_count, 40);
  EXPECT_EQ(count_units(r.clean), 40u);
  const auto bodies = server.requests();
  ASSERT_EQ(bodies.size(), decaying_positions(40).size() + 1);
  EXPECT_EQ(bodies[0]["messages"].size(), 1u);
  // Each continuation carries the committed text verbatim, ending in the marker just spliced.
  for (std::size_t i = 1; i < bodies.size(); ++i) {
    const std::string committed = bodies[i]["messages"].back()["content"];
    const std::string marker = render({}, decaying_positions(40)[i - 1], 0);
    EXPECT_EQ(committed.substr(committed.size() - marker.size()), marker);
    EXPECT_EQ(r.raw.substr(0, committed.size()), committed);
  }
}

TEST(Http, ServerErrorStatus) {
  MockBackend mock(MockScript::compliant());
  MockServerOptions o;
  o.fail_status = 500;
  MockServer server(mock, o);
  HttpBackend http(config_for(server));
  auto [text, end] = drain(*http.generate_stream(request()));
  EXPECT_TRUE(text.empty());
  EXPECT_EQ(end.kind, StreamEventKind::BackendError);
  EXPECT_EQ(end.text.rfind("HTTP 500", 0), 0u) << end.text;
}

TEST(Http, MalformedFrame) {
  MockBackend mock(MockScript::compliant());
  MockServerOptions o;
  o.malformed_frame = true;
  MockServer server(mock, o);
  HttpBackend http(config_for(server));
  auto [text, end] = drain(*http.generate_stream(request()));
  EXPECT_EQ(end.kind, StreamEventKind::BackendError);
  EXPECT_NE(end.text.find("malformed"), std::string::npos) << end.text;
}

TEST(Http, IdleTimeout) {
  MockBackend mock(MockScript::compliant());
  MockServerOptions o;
  o.stall_after_frames = 2;
  o.stall_for = 1500ms;
  MockServer server(mock, o);
  HttpBackend http(config_for(server, 200ms));
  const auto t0 = std::chrono::steady_clock::now();
  auto [text, end] = drain(*http.generate_stream(request()));
  EXPECT_LT(std::chrono::steady_clock::now() - t0, 1400ms);
  EXPECT_EQ(end.kind, StreamEventKind::BackendError);
  EXPECT_NE(end.text.find("idle timeout"), std::string::npos) << end.text;
  EXPECT_FALSE(text.empty());
}

TEST(Http, CancelSurfacesNoFurtherChunks) {
  MockBackend mock(MockScript::compliant());
  MockServer server(mock);
  HttpBackend http(config_for(server));
  auto s = http.generate_stream(request(100000));
  ASSERT_EQ(s->next().kind, StreamEventKind::TextChunk);
  s->cancel();
  auto ev = s->next();
  EXPECT_EQ(ev.kind, StreamEventKind::Done);
  EXPECT_EQ(ev.text, "cancelled");
  EXPECT_TRUE(s->next().terminal());
}

TEST(Http, ConnectionRefused) {
  int port = 0;
  {
    MockBackend mock(MockScript::compliant());
    MockServer server(mock);
    port = server.port();
  }
  HttpBackendConfig c;
  c.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
  c.model = "m";
  c.connect_timeout = 500ms;
  HttpBackend http(c);
  auto [text, end] = drain(*http.generate_stream(request()));
  EXPECT_EQ(end.kind, StreamEventKind::BackendError);
  EXPECT_NE(end.text.find("transport error"), std::string::npos) << end.text;
}

TEST(Http, ConfigValidation) {
  HttpBackendConfig c;
  c.base_url = "http://127.0.0.1:1/v1";
  EXPECT_THROW(HttpBackend{c}, DomainError);
}

}  // namespace
