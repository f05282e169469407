// Copyright 2026 The lenctl Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "lenctl/mock_backend.hpp"
#include "lenctl/pipeline.hpp"

namespace {

using namespace lenctl;

const std::string kQuery = "Why do rivers meander?";

std::string words(int n, const std::string& stem = "v") {
  std::string s;
  for (int i = 1; i <= n; ++i) {
    if (i > 1) s += ' ';
    s += stem + std::to_string(i);
  }
  return s;
}

MockScript plan_script() { return MockScript::scripted({"1. Cause (40 words)\n2. Effect (60 words)\n", "###end"}); }

std::vector<std::int64_t> counts(const StageOutputs& s) {
  std::vector<std::int64_t> out;
  for (const auto& a : s.rewrite_attempts) out.push_back(a.final_count);
  return out;
}

TEST(Pipeline, CompliantRewriteExitsAfterOneAttempt) {
  MockBackend b(MockScript::compliant(1));
  auto s = stage_rewrite(kQuery, words(80), LengthConstraint::exact(100), b);
  EXPECT_EQ(counts(s), (std::vector<std::int64_t>{100}));
  EXPECT_EQ(s.chosen, 0u);
}

TEST(Pipeline, UndershootThenCompliant) {
  MockBackend b(std::vector<MockScript>{MockScript::undershoot(10), MockScript::compliant()});
  auto s = stage_rewrite(kQuery, words(80), LengthConstraint::exact(100), b);
  EXPECT_EQ(counts(s), (std::vector<std::int64_t>{90, 100}));
  EXPECT_EQ(s.chosen, 1u);
}

TEST(Pipeline, AllUndershootPicksClosest) {
  MockBackend b(std::vector<MockScript>{MockScript::undershoot(10), MockScript::undershoot(5), MockScript::undershoot(7)});
  auto s = stage_rewrite(kQuery, words(80), LengthConstraint::exact(100), b);
  EXPECT_EQ(counts(s), (std::vector<std::int64_t>{90, 95, 93}));
  EXPECT_EQ(s.chosen, 1u);
  EXPECT_EQ(s.final_attempt().final_count, 95);
}

TEST(Pipeline, AttemptCapIsRespected) {
  for (int t : {1, 2, 5}) {
    MockBackend b(MockScript::undershoot(20));
    PipelineConfig cfg;
    cfg.max_attempts = t;
    auto s = stage_rewrite(kQuery, words(80), LengthConstraint::exact(100), b, cfg);
    EXPECT_EQ(s.rewrite_attempts.size(), static_cast<std::size_t>(t));
    const auto calls = b.calls();
    EXPECT_EQ(std::count_if(calls.begin(), calls.end(), [](const auto& c) { return !c.continuation; }), t);
  }
  PipelineConfig bad;
  bad.max_attempts = 0;
  MockBackend b(MockScript::compliant());
  EXPECT_THROW(stage_rewrite(kQuery, "x", LengthConstraint::exact(10), b, bad), DomainError);
}

TEST(Pipeline, RetryRewritesTheBestAttemptWithItsFeedback) {
  MockBackend b(std::vector<MockScript>{MockScript::undershoot(10), MockScript::undershoot(30), MockScript::compliant()});
  auto s = stage_rewrite(kQuery, words(70), LengthConstraint::exact(100), b);
  ASSERT_EQ(counts(s), (std::vector<std::int64_t>{90, 70, 100}));
  std::vector<MockBackend::Call> calls;
  for (auto& c : b.calls()) {
    if (!c.continuation) calls.push_back(c);
  }
  ASSERT_EQ(calls.size(), 3u);
  auto prompt = [&](std::size_t i) { return calls[i].request.context.back().content; };
  EXPECT_NE(prompt(0).find("contains 70 words"), std::string::npos);
  // Attempt 3 rewrites attempt 1 (90 units), the better of the two so far.
  EXPECT_NE(prompt(1).find("contains 90 words"), std::string::npos);
  EXPECT_NE(prompt(2).find("contains 90 words"), std::string::npos);
  EXPECT_NE(prompt(2).find(s.rewrite_attempts[0].clean), std::string::npos);
}

TEST(Pipeline, SelectionTiesGoToEarliest) {
  EXPECT_EQ(select_best({110, 90, 95}, LengthConstraint::exact(100)), 2u);
  EXPECT_EQ(select_best({110, 90}, LengthConstraint::exact(100)), 0u);
  EXPECT_EQ(select_best({160, 120, 99}, LengthConstraint::range(100, 150)), 1u);
  EXPECT_THROW(select_best({}, LengthConstraint::exact(1)), DomainError);
}

TEST(Pipeline, StagePlanReturnsScriptVerbatim) {
  MockBackend b(plan_script());
  auto p = stage_plan(kQuery, LengthConstraint::exact(100), b);
  EXPECT_EQ(p.plan, "1. Cause (40 words)\n2. Effect (60 words)\n");
  const auto prompt = b.calls().at(0).request.context.back().content;
  EXPECT_NE(prompt.find("approximately 100 words"), std::string::npos);
  EXPECT_THROW(stage_plan("", LengthConstraint::exact(100), b), DomainError);
}

TEST(Pipeline, DraftIsFreeRunningAndMayMissTheTarget) {
  MockBackend b(MockScript::scripted({words(230), " ###end"}));
  auto d = stage_draft(kQuery, "plan", LengthConstraint::exact(150), b);
  EXPECT_EQ(d.count, 230);
  EXPECT_TRUE(d.session.injected.empty());
  EXPECT_EQ(d.draft, words(230));
}

TEST(Pipeline, MarkerGenEndToEnd) {
  MockBackend b(std::vector<MockScript>{plan_script(), MockScript::scripted({words(70), " ###end"}),
                                        MockScript::compliant(3)});
  auto r = run_markergen(kQuery, LengthConstraint::exact(50), b);
  EXPECT_EQ(r.final.final_count, 50);
  EXPECT_EQ(count_units(r.final.clean), 50u);
  EXPECT_EQ(r.final.clean.find('['), std::string::npos);
  std::vector<std::string> stages;
  for (const auto& e : r.transcript.events()) {
    if (e.kind == "stage") stages.push_back(e.payload["name"]);
  }
  EXPECT_EQ(stages, (std::vector<std::string>{"plan", "draft", "rewrite"}));
  EXPECT_EQ(r.cost.units_generated, r.plan_session.final_count + 70 + 50);
  EXPECT_EQ(r.cost.backend_calls, static_cast<std::int64_t>(b.call_count()));
}

TEST(Pipeline, MarkerGenRange) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    MockBackend b(std::vector<MockScript>{plan_script(), MockScript::compliant(seed), MockScript::overrun(90, seed)});
    auto r = run_markergen(kQuery, LengthConstraint::range(100, 150), b);
    EXPECT_GE(r.final.final_count, 100);
    EXPECT_LE(r.final.final_count, 150);
  }
}

TEST(Pipeline, StageErrorsCarryTheStage) {
  auto failing = MockScript::compliant();
  failing.fail_after_chunks = 0;
  MockBackend b(failing);
  try {
    run_markergen(kQuery, LengthConstraint::exact(20), b);
    FAIL() << "expected PipelineError";
  } catch (const PipelineError& e) {
    EXPECT_EQ(e.stage(), "plan");
  }
}

TEST(Pipeline, ImplicitBaselineSelectsClosest) {
  MockBackend b(std::vector<MockScript>{plan_script(), MockScript::scripted({words(130), " ###end"}), plan_script(),
                                        MockScript::scripted({words(104), " ###end"}), plan_script(),
                                        MockScript::scripted({words(97), " ###end"})});
  auto r = run_implicit_baseline(kQuery, LengthConstraint::exact(100), 3, b);
  ASSERT_EQ(r.candidates.size(), 3u);
  // argmin |N - 100| over {130, 104, 97} is 97.
  EXPECT_EQ(r.chosen, 2u);
  EXPECT_EQ(r.best().answer.final_count, 97);
  EXPECT_DOUBLE_EQ(std::abs(r.best().answer.final_count - 100) / 100.0, 0.03);
  // Spend equals the sum of units recorded in every session's transcript.
  std::int64_t from_transcripts = 0;
  for (const auto& c : r.candidates) {
    for (const auto& e : c.answer.transcript.events()) {
      if (e.kind == "stop") from_transcripts += e.payload["count"].get<std::int64_t>();
    }
    from_transcripts += c.plan_units;
  }
  EXPECT_EQ(r.cost.units_generated, from_transcripts);
  EXPECT_EQ(r.cost.units_generated, 3 * static_cast<std::int64_t>(count_units("1. Cause (40 words)\n2. Effect (60 words)\n")) + 130 + 104 + 97);
  EXPECT_EQ(r.cost.backend_calls, 6);
}

TEST(Pipeline, ImplicitWithOneCandidate) {
  MockBackend b(std::vector<MockScript>{plan_script(), MockScript::scripted({words(61), " ###end"})});
  auto r = run_implicit_baseline(kQuery, LengthConstraint::exact(60), 1, b);
  EXPECT_EQ(r.candidates.size(), 1u);
  EXPECT_EQ(r.best().answer.final_count, 61);
  EXPECT_THROW(run_implicit_baseline(kQuery, LengthConstraint::exact(60), 0, b), DomainError);
}

}  // namespace
