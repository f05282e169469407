// Copyright 2026 The lenctl Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <string>
#include <vector>

#include "lenctl/backend_uri.hpp"
#include "lenctl/mock_backend.hpp"
#include "lenctl/segmenter.hpp"
#include "lenctl/sse.hpp"

namespace {

using namespace lenctl;

GenerationRequest request(std::int64_t hint = 8) {
  GenerationRequest r;
  r.context = {{"user", "Write something."}};
  r.sampling.max_units_hint = hint;
  return r;
}

struct Drained {
  std::vector<std::string> chunks;
  StreamEvent terminal;
  std::string text() const {
    std::string s;
    for (const auto& c : chunks) s += c;
    return s;
  }
};

Drained drain(TextStream& s, std::size_t cancel_after = SIZE_MAX) {
  Drained d;
  for (;;) {
    StreamEvent ev = s.next();
    if (ev.terminal()) {
      d.terminal = ev;
      // Well-formedness: terminal is sticky.
      EXPECT_TRUE(s.next().terminal());
      return d;
    }
    d.chunks.push_back(ev.text);
    if (d.chunks.size() == cancel_after) s.cancel();
  }
}

TEST(StopScanner, CutsAtFirstStopAcrossChunks) {
  StopScanner sc({"###end"});
  std::string out;
  EXPECT_FALSE(sc.feed("hello ##", out));
  EXPECT_EQ(out, "hello ");
  EXPECT_TRUE(sc.feed("#end trailing", out));
  EXPECT_EQ(out, "hello ");
  EXPECT_TRUE(sc.feed("more", out));
  EXPECT_EQ(out, "hello ");
}

TEST(StopScanner, ReleasesHeldPrefixAtEnd) {
  StopScanner sc({"###end"});
  std::string out;
  sc.feed("a ###", out);
  sc.finish(out);
  EXPECT_EQ(out, "a ###");
}

TEST(MockBackend, CompliantRunsUntilCancelled) {
  MockBackend b(MockScript::compliant(3));
  auto s = b.generate_stream(request(8));
  auto d = drain(*s, 40);
  EXPECT_EQ(d.terminal.kind, StreamEventKind::Done);
  EXPECT_EQ(d.terminal.text, "cancelled");
  EXPECT_GE(count_units(d.text()), 8u);
}

TEST(MockBackend, ScriptedHonorsStop) {
  MockBackend b(MockScript::scripted({"hello ", "world ###end", " ignored"}));
  auto s = b.generate_stream(request());
  auto d = drain(*s);
  EXPECT_EQ(d.text(), "hello world ");
  EXPECT_EQ(d.terminal.kind, StreamEventKind::Done);
  EXPECT_EQ(d.terminal.text, "stop");
}

TEST(MockBackend, DeterministicForSameSeedAndRequest) {
  for (const char* spec : {"compliant:5", "noisy:5", "mixed:9", "undershoot=3:2"}) {
    MockBackend a(MockScript::parse(spec));
    MockBackend b(MockScript::parse(spec));
    auto da = drain(*a.generate_stream(request(50)), 200);
    auto db = drain(*b.generate_stream(request(50)), 200);
    EXPECT_EQ(da.chunks, db.chunks) << spec;
  }
}

TEST(MockBackend, ContinuationPicksUpAfterCommittedUnits) {
  MockBackend b(MockScript::compliant(1));
  auto s = b.continue_from(request(), "w1 w2 w3 w4 [4 words]");
  auto d = drain(*s, 3);
  EXPECT_EQ(d.text().rfind(" w5", 0), 0u) << d.text();
  auto calls = b.calls();
  ASSERT_EQ(calls.size(), 1u);
  EXPECT_TRUE(calls[0].continuation);
  EXPECT_EQ(calls[0].committed, "w1 w2 w3 w4 [4 words]");
}

TEST(MockBackend, CancelStopsChunksImmediately) {
  MockBackend b(MockScript::compliant());
  auto s = b.generate_stream(request());
  ASSERT_FALSE(s->next().terminal());
  s->cancel();
  EXPECT_TRUE(s->next().terminal());
}

TEST(MockBackend, UndershootEndsWithSentinel) {
  MockBackend b(MockScript::undershoot(3));
  auto d = drain(*b.generate_stream(request(10)));
  EXPECT_EQ(count_units(d.text()), 7u);
  EXPECT_EQ(d.terminal.text, "stop");
}

TEST(MockBackend, OverrunIgnoresStops) {
  MockBackend b(MockScript::overrun(5));
  auto req = request(10);
  req.sampling.stop_sequences = {"w3"};
  auto d = drain(*b.generate_stream(req));
  EXPECT_EQ(count_units(d.text()), 15u);
}

TEST(MockBackend, InjectedFailure) {
  auto script = MockScript::compliant();
  script.fail_after_chunks = 2;
  MockBackend b(script);
  auto d = drain(*b.generate_stream(request()));
  EXPECT_EQ(d.chunks.size(), 2u);
  EXPECT_EQ(d.terminal.kind, StreamEventKind::BackendError);
}

TEST(MockBackend, SequenceAdvancesPerFreshCall) {
  MockBackend b(std::vector<MockScript>{MockScript::scripted({"one ###end"}), MockScript::scripted({"two ###end"})});
  EXPECT_EQ(drain(*b.generate_stream(request())).text(), "one ");
  EXPECT_EQ(drain(*b.generate_stream(request(9))).text(), "two ");
  EXPECT_EQ(drain(*b.generate_stream(request(10))).text(), "two ");
}

TEST(MockBackend, RejectsEmptyContext) {
  MockBackend b(MockScript::compliant());
  GenerationRequest r;
  EXPECT_THROW(b.generate_stream(r), DomainError);
}

TEST(MockScript, Parse) {
  EXPECT_EQ(MockScript::parse("overrun=40:7").describe(), "overrun=40:7");
  EXPECT_EQ(MockScript::parse("compliant").describe(), "compliant:0");
  EXPECT_THROW(MockScript::parse("chatty"), DomainError);
  EXPECT_EQ(parse_mock_uri("mock:undershoot=5,compliant:3").size(), 2u);
  EXPECT_THROW(parse_mock_uri("mock:"), DomainError);
  EXPECT_THROW(open_backend("ftp://x"), DomainError);
  EXPECT_EQ(open_backend("mock:noisy:2")->describe(), "mock:noisy:2");
}

TEST(Sse, ParserHandlesSplitFramesAndComments) {
  sse::Parser p;
  std::vector<std::string> out;
  p.feed(": keepalive\n\ndata: {\"a\"", out);
  EXPECT_TRUE(out.empty());
  p.feed(":1}\r\n\r\ndata: line1\ndata: line2\n\n", out);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0], "{\"a\":1}");
  EXPECT_EQ(out[1], "line1\nline2");
  p.feed("data: [DONE]", out);
  p.finish(out);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[2], sse::kDone);
}

TEST(Sse, DeltaRoundTrip) {
  const std::string frame = sse::delta_frame("hi there", "m", "stop");
  sse::Parser p;
  std::vector<std::string> out;
  p.feed(frame, out);
  ASSERT_EQ(out.size(), 1u);
  auto d = sse::parse_delta(out[0]);
  EXPECT_EQ(d.content, "hi there");
  EXPECT_EQ(d.finish_reason, "stop");
}

TEST(Sse, MalformedAndErrorFrames) {
  EXPECT_THROW(sse::parse_delta("{not json"), ParseError);
  EXPECT_THROW(sse::parse_delta("[1,2]"), ParseError);
  EXPECT_THROW(sse::parse_delta(R"({"error":{"message":"overloaded"}})"), BackendError);
  EXPECT_EQ(sse::parse_delta(R"({"choices":[]})").content, "");
}

}  // namespace
