// Copyright 2026 The lenctl Authors
// SPDX-License-Identifier: Apache-2.0

/// \file
/// Plan, draft, rewrite. The plan fixes content and word allocation, the draft
/// is written freely for quality, and the rewrite runs marker-inserting decoding
/// up to T times, stopping at the first compliant attempt. Also the implicit
/// best-of-k baseline the pipeline is compared against.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lenctl/backend.hpp"
#include "lenctl/decode.hpp"
#include "lenctl/error.hpp"
#include "lenctl/marker.hpp"
#include "lenctl/schedule.hpp"
#include "lenctl/segmenter.hpp"
#include "lenctl/templates.hpp"

namespace lenctl {

/// A failure inside one pipeline stage.
class PipelineError : public Error {
 public:
  PipelineError(std::string stage, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}
  [[nodiscard]] const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

inline constexpr std::string_view kAnswerPrefix = "Answer generation task:";

struct PipelineConfig {
  ScheduleSpec schedule;  // decaying
  MarkerFormat format;
  SegmentationRule rule = SegmentationRule::words();
  SamplingParams sampling;
  int max_attempts = 3;  // T
  double tolerance = 0.0;
  double draft_budget_factor = 2.5;
  double plan_budget_factor = 1.0;
  std::int64_t min_plan_budget = 64;
  std::string assistant_prefix{kAnswerPrefix};
  PromptTemplateSet templates;
  SessionLimits limits;

  void validate() const {
    if (max_attempts < 1) throw DomainError("attempt count T must be >= 1");
    if (tolerance < 0.0) throw DomainError("tolerance must be >= 0");
    if (draft_budget_factor <= 0.0 || plan_budget_factor <= 0.0) throw DomainError("budget factors must be positive");
  }
};

/// Text for the `{target_length}` slot: "150" or "100 to 150".
inline std::string target_length_text(const LengthConstraint& c) {
  if (c.is_exact()) return std::to_string(c.target());
  return std::to_string(c.min) + " to " + std::to_string(c.max);
}

/// Length feedback sentence for the rewrite prompt.
inline std::string compose_length_feedback(std::int64_t actual, std::int64_t target) {
  if (actual < 0 || target < 0) throw DomainError("length feedback needs non-negative counts");
  std::string out = "The high-quality answer contains " + std::to_string(actual) + " words. ";
  if (actual == target) return out + "It matches the target length.";
  const std::int64_t d = actual > target ? actual - target : target - actual;
  out += actual > target ? "It exceeds the target length by " : "It falls short of the target length by ";
  return out + std::to_string(d) + " words.";
}

/// Range form: compared against the nearest bound; inside the range it matches.
inline std::string compose_length_feedback(std::int64_t actual, const LengthConstraint& c) {
  if (c.is_exact()) return compose_length_feedback(actual, c.target());
  if (actual < c.min) return compose_length_feedback(actual, c.min);
  if (actual > c.max) return compose_length_feedback(actual, c.max);
  return "The high-quality answer contains " + std::to_string(actual) + " words. It is within the target range.";
}

inline std::vector<Message> user_turn(std::string content) { return {{"user", std::move(content)}}; }

namespace pipeline_detail {

inline std::int64_t budget(double factor, std::int64_t cap, std::int64_t floor) {
  return std::max<std::int64_t>(floor, static_cast<std::int64_t>(std::ceil(factor * static_cast<double>(cap))));
}

/// Free-running generation: no markers, stopped by sentinel or at `budget` units.
inline SessionResult free_run(const std::vector<Message>& context, std::int64_t budget_units,
                              const PipelineConfig& cfg, const std::string& prefix, Backend& backend) {
  SessionOptions opt;
  opt.rule = cfg.rule;
  opt.limits = cfg.limits;
  opt.terminal_marker = false;
  opt.assistant_prefix = prefix;
  const auto c = LengthConstraint::exact(budget_units);
  return run_session(context, c, InsertionSchedule::none(budget_units), cfg.format, backend, cfg.sampling, opt);
}

inline void require_ok(const SessionResult& r, const char* stage) {
  if (r.status == SessionStatus::Exhausted && r.reason.rfind("backend error", 0) == 0) {
    throw PipelineError(stage, r.reason);
  }
}

}  // namespace pipeline_detail

/// Stage one output: the plan and the session that produced it.
struct PlanOutput {
  std::string plan;
  SessionResult session;
};

inline PlanOutput stage_plan(const std::string& query, const LengthConstraint& constraint, Backend& backend,
                             const PipelineConfig& cfg = {}) {
  if (query.empty()) throw DomainError("query must be non-empty");
  cfg.validate();
  const std::string prompt =
      render_template(cfg.templates.stage1, {{"target_length", target_length_text(constraint)}, {"prompt", query}});
  auto r = pipeline_detail::free_run(
      user_turn(prompt), pipeline_detail::budget(cfg.plan_budget_factor, constraint.cap(), cfg.min_plan_budget), cfg,
      "", backend);
  pipeline_detail::require_ok(r, "plan");
  PlanOutput out{r.clean, std::move(r)};
  return out;
}

struct DraftOutput {
  std::string draft;
  std::int64_t count = 0;
  SessionResult session;
};

inline DraftOutput stage_draft(const std::string& query, const std::string& plan, const LengthConstraint& constraint,
                               Backend& backend, const PipelineConfig& cfg = {}) {
  cfg.validate();
  const std::string prompt = render_template(
      cfg.templates.stage2, {{"target_length", target_length_text(constraint)}, {"prompt", query}, {"plan", plan}});
  auto r = pipeline_detail::free_run(user_turn(prompt),
                                     pipeline_detail::budget(cfg.draft_budget_factor, constraint.cap(), 1), cfg,
                                     cfg.assistant_prefix, backend);
  pipeline_detail::require_ok(r, "draft");
  // Whitespace left before a sentinel is not part of the answer.
  std::string draft = r.clean;
  draft.erase(draft.find_last_not_of(" \t\r\n") + 1);
  DraftOutput out{std::move(draft), r.final_count, std::move(r)};
  return out;
}

struct StageOutputs {
  std::string plan;
  std::string draft;
  std::vector<SessionResult> rewrite_attempts;
  std::size_t chosen = 0;
  /// Every attempt ended in a backend failure.
  bool exhausted = false;

  [[nodiscard]] const SessionResult& final_attempt() const {
    if (rewrite_attempts.empty()) throw StateError("no rewrite attempts");
    return rewrite_attempts[chosen];
  }
};

/// Index of the attempt closest to the constraint; ties go to the earliest.
inline std::size_t select_best(const std::vector<std::int64_t>& counts, const LengthConstraint& c) {
  if (counts.empty()) throw DomainError("nothing to select from");
  std::size_t best = 0;
  for (std::size_t i = 1; i < counts.size(); ++i) {
    if (c.violation(counts[i]) < c.violation(counts[best])) best = i;
  }
  return best;
}

/// Renders the stage-three prompt for one attempt.
inline std::string rewrite_prompt(const std::string& query, const std::string& answer, std::int64_t answer_count,
                                  const LengthConstraint& constraint, const PipelineConfig& cfg) {
  return render_template(cfg.templates.stage3, {{"target_length", target_length_text(constraint)},
                                                {"prompt", query},
                                                {"generated_answer", answer},
                                                {"length_feedback", compose_length_feedback(answer_count, constraint)},
                                                {"few_shots", cfg.templates.joined_few_shots()}});
}

/// Up to T marker-decoded rewrites of the draft. Attempt i + 1 rewrites the best
/// attempt so far, with that attempt's length feedback.
inline StageOutputs stage_rewrite(const std::string& query, const std::string& draft, const LengthConstraint& constraint,
                                  Backend& backend, const PipelineConfig& cfg = {}) {
  cfg.validate();
  StageOutputs out;
  out.draft = draft;
  SessionOptions opt;
  opt.rule = cfg.rule;
  opt.limits = cfg.limits;
  opt.assistant_prefix = cfg.assistant_prefix;
  const InsertionSchedule schedule = cfg.schedule.build(constraint.cap());

  std::string answer = draft;
  std::int64_t answer_count = static_cast<std::int64_t>(count_units(draft, cfg.rule));
  std::vector<std::int64_t> counts;
  std::size_t failures = 0;
  for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    const std::string prompt = rewrite_prompt(query, answer, answer_count, constraint, cfg);
    SessionResult r = run_session(user_turn(prompt), constraint, schedule, cfg.format, backend, cfg.sampling, opt);
    if (r.status == SessionStatus::Exhausted && r.reason.rfind("backend error", 0) == 0) ++failures;
    counts.push_back(r.final_count);
    const bool compliant = constraint.satisfied(r.final_count, cfg.tolerance);
    out.rewrite_attempts.push_back(std::move(r));
    if (compliant) break;
    const std::size_t best = select_best(counts, constraint);
    answer = out.rewrite_attempts[best].clean;
    answer_count = counts[best];
  }
  out.chosen = select_best(counts, constraint);
  out.exhausted = failures == out.rewrite_attempts.size();
  return out;
}

struct CostLedger {
  std::int64_t units_generated = 0;
  std::int64_t backend_calls = 0;
  double relative_cost = 1.0;

  void add(const SessionResult& r) {
    units_generated += r.final_count;
    backend_calls += r.backend_calls;
  }
};

struct MarkerGenResult {
  SessionResult final;
  StageOutputs stages;
  SessionResult plan_session;
  SessionResult draft_session;
  Transcript transcript;
  CostLedger cost;
};

/// Plan, draft and rewrite for one query.
inline MarkerGenResult run_markergen(const std::string& query, const LengthConstraint& constraint, Backend& backend,
                                     const PipelineConfig& cfg = {}) {
  MarkerGenResult out;
  auto stage_event = [&](const char* name) {
    out.transcript.set_stage(name);
    out.transcript.add("stage", {{"name", name}});
  };

  stage_event("plan");
  PlanOutput plan = stage_plan(query, constraint, backend, cfg);
  out.transcript.append(plan.session.transcript, "plan");

  stage_event("draft");
  DraftOutput draft = stage_draft(query, plan.plan, constraint, backend, cfg);
  out.transcript.append(draft.session.transcript, "draft");

  stage_event("rewrite");
  out.stages = stage_rewrite(query, draft.draft, constraint, backend, cfg);
  out.stages.plan = plan.plan;
  for (const auto& a : out.stages.rewrite_attempts) out.transcript.append(a.transcript, "rewrite");
  if (out.stages.exhausted) {
    throw PipelineError("rewrite", "every attempt failed: " + out.stages.rewrite_attempts.back().reason);
  }

  out.cost.add(plan.session);
  out.cost.add(draft.session);
  for (const auto& a : out.stages.rewrite_attempts) out.cost.add(a);
  out.final = out.stages.final_attempt();
  out.plan_session = std::move(plan.session);
  out.draft_session = std::move(draft.session);
  return out;
}

struct ImplicitCandidate {
  std::string plan;
  SessionResult answer;
  std::int64_t plan_units = 0;
};

struct ImplicitResult {
  std::vector<ImplicitCandidate> candidates;
  std::size_t chosen = 0;
  CostLedger cost;

  [[nodiscard]] const ImplicitCandidate& best() const { return candidates.at(chosen); }
};

/// k independent plan-then-generate runs without markers; the candidate closest
/// to the constraint wins.
inline ImplicitResult run_implicit_baseline(const std::string& query, const LengthConstraint& constraint, int k,
                                            Backend& backend, const PipelineConfig& cfg = {}) {
  if (k < 1) throw DomainError("implicit baseline needs k >= 1");
  ImplicitResult out;
  std::vector<std::int64_t> counts;
  for (int i = 0; i < k; ++i) {
    PlanOutput plan = stage_plan(query, constraint, backend, cfg);
    DraftOutput answer = stage_draft(query, plan.plan, constraint, backend, cfg);
    out.cost.add(plan.session);
    out.cost.add(answer.session);
    counts.push_back(answer.count);
    out.candidates.push_back({plan.plan, std::move(answer.session), plan.session.final_count});
  }
  out.chosen = select_best(counts, constraint);
  return out;
}

}  // namespace lenctl
