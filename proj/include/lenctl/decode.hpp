// Copyright 2026 The lenctl Authors
// SPDX-License-Identifier: Apache-2.0

/// \file
/// Marker-insertion decoding. Backend text is streamed through a stop scanner,
/// the marker stripper and the incremental segmenter. When the clean unit count
/// reaches a scheduled position, the raw text is cut at that unit's end, a
/// marker is appended and the backend is asked to continue the same turn. At
/// the stop count the session closes itself with a terminal marker and the
/// sentinel.
///
/// Truncation restores the pipeline state exactly: checkpoints of the stripper
/// and segmenter are taken every few hundred raw bytes and the bytes between
/// the nearest checkpoint and the cut are replayed.

#pragma once

#include <algorithm>
#include <cstdint>
#include <exception>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "lenctl/backend.hpp"
#include "lenctl/error.hpp"
#include "lenctl/marker.hpp"
#include "lenctl/schedule.hpp"
#include "lenctl/segmenter.hpp"
#include "lenctl/unicode.hpp"

namespace lenctl {

struct LengthConstraint {
  enum class Kind : std::uint8_t { Exact, Range };

  Kind kind = Kind::Exact;
  std::int64_t min = 1;  // Exact: min == max == target
  std::int64_t max = 1;

  static LengthConstraint exact(std::int64_t target) {
    if (target < 1) throw DomainError("exact length target must be >= 1");
    return {Kind::Exact, target, target};
  }
  static LengthConstraint range(std::int64_t lo, std::int64_t hi) {
    if (lo < 1) throw DomainError("range minimum must be >= 1");
    if (lo > hi) throw DomainError("range minimum exceeds maximum");
    return {Kind::Range, lo, hi};
  }

  [[nodiscard]] bool is_exact() const { return kind == Kind::Exact; }
  [[nodiscard]] std::int64_t target() const { return max; }
  /// Hard cap, and the target the schedule is built for.
  [[nodiscard]] std::int64_t cap() const { return max; }

  /// Exact: |count - N| <= tolerance * N. Range: min <= count <= max.
  [[nodiscard]] bool satisfied(std::int64_t count, double tolerance = 0.0) const {
    if (kind == Kind::Range) return count >= min && count <= max;
    const auto diff = static_cast<double>(count > max ? count - max : max - count);
    return diff <= tolerance * static_cast<double>(max);
  }

  /// Relative distance to the constraint; 0 when satisfied exactly.
  [[nodiscard]] double violation(std::int64_t count) const {
    if (count < min) return static_cast<double>(min - count) / static_cast<double>(min);
    if (count > max) return static_cast<double>(count - max) / static_cast<double>(max);
    return 0.0;
  }

  [[nodiscard]] std::string describe() const {
    if (kind == Kind::Exact) return std::to_string(max);
    return std::to_string(min) + ":" + std::to_string(max);
  }

  /// "N" or "MIN:MAX".
  static LengthConstraint parse(std::string_view text) {
    auto num = [&](std::string_view s) {
      if (s.empty() || s.size() > 12 || s.find_first_not_of("0123456789") != std::string_view::npos) {
        throw DomainError("bad length constraint '" + std::string(text) + "'");
      }
      return std::stoll(std::string(s));
    };
    auto colon = text.find(':');
    if (colon == std::string_view::npos) return exact(num(text));
    return range(num(text.substr(0, colon)), num(text.substr(colon + 1)));
  }

  friend bool operator==(const LengthConstraint&, const LengthConstraint&) = default;
};

enum class SessionStatus : std::uint8_t { Running, StoppedAtTarget, StoppedBySentinel, Exhausted };

inline std::string_view status_name(SessionStatus s) {
  switch (s) {
    case SessionStatus::Running: return "running";
    case SessionStatus::StoppedAtTarget: return "stopped_at_target";
    case SessionStatus::StoppedBySentinel: return "stopped_by_sentinel";
    case SessionStatus::Exhausted: return "exhausted";
  }
  return "unknown";
}

struct TranscriptEvent {
  std::int64_t ts = 0;  // logical ordinal, not wall time
  std::string kind;     // chunk | inject | truncate | stop | stage
  std::string stage;    // empty inside a bare session
  nlohmann::json payload;
};

/// Append-only event log, serialized as JSON lines.
class Transcript {
 public:
  void add(std::string kind, nlohmann::json payload) {
    events_.push_back({next_ts_++, std::move(kind), stage_, std::move(payload)});
  }

  /// Re-stamps another log's events under `stage` and appends them.
  void append(const Transcript& other, const std::string& stage) {
    for (const auto& e : other.events_) events_.push_back({next_ts_++, e.kind, stage, e.payload});
  }

  void set_stage(std::string stage) { stage_ = std::move(stage); }

  [[nodiscard]] const std::vector<TranscriptEvent>& events() const { return events_; }

  [[nodiscard]] std::string to_jsonl() const {
    std::string out;
    for (const auto& e : events_) {
      nlohmann::ordered_json line;
      line["ts"] = e.ts;
      line["kind"] = e.kind;
      if (!e.stage.empty()) line["stage"] = e.stage;
      line["payload"] = e.payload;
      out += line.dump();
      out += '\n';
    }
    return out;
  }

 private:
  std::vector<TranscriptEvent> events_;
  std::int64_t next_ts_ = 0;
  std::string stage_;
};

struct SessionLimits {
  /// Raw bytes accepted from the backend; 0 derives 8 x 6 bytes per unit of the cap (min 4096).
  std::size_t max_raw_bytes = 0;
  /// Continuation requests; 0 derives (scheduled markers + 4).
  std::int64_t max_continuations = 0;
  std::size_t checkpoint_every = 256;
  bool record_chunks = true;
};

struct SessionOptions {
  SegmentationRule rule = SegmentationRule::words();
  SessionLimits limits;
  std::string sentinel{kDefaultSentinel};
  /// Close a session that reaches the stop count with "[N words]".
  bool terminal_marker = true;
  /// Sent ahead of the assistant turn; never counted.
  std::string assistant_prefix;
};

struct SessionResult {
  std::string raw;
  std::string clean;
  std::int64_t final_count = 0;
  std::vector<MarkerOccurrence> injected;
  std::vector<MarkerOccurrence> found;  // well-formed markers the backend wrote itself
  std::vector<MarkerDiagnostic> diagnostics;
  SessionStatus status = SessionStatus::Running;
  std::string reason;
  std::int64_t backend_calls = 0;
  std::int64_t continuations = 0;
  std::size_t raw_bytes_received = 0;
  Transcript transcript;
};

/// The decoding state machine, driven by run_session() or by hand.
class DecodeSession {
 public:
  enum class Action : std::uint8_t { Continue, Resume, Stop };

  DecodeSession(LengthConstraint constraint, InsertionSchedule schedule, MarkerFormat format = {},
                SessionOptions options = {})
      : constraint_(constraint),
        schedule_(std::move(schedule)),
        format_(std::move(format)),
        options_(std::move(options)),
        stripper_(format_),
        segmenter_(options_.rule),
        scanner_(std::vector<std::string>{options_.sentinel}) {
    if (schedule_.target() != constraint_.cap()) {
      throw DomainError("schedule target " + std::to_string(schedule_.target()) +
                        " does not match the constraint cap " + std::to_string(constraint_.cap()));
    }
    if (options_.limits.checkpoint_every == 0) throw DomainError("checkpoint interval must be positive");
    max_raw_bytes_ = options_.limits.max_raw_bytes;
    if (max_raw_bytes_ == 0) {
      max_raw_bytes_ = std::max<std::size_t>(4096, 8 * 6 * static_cast<std::size_t>(constraint_.cap()));
    }
    max_continuations_ = options_.limits.max_continuations;
    if (max_continuations_ == 0) max_continuations_ = static_cast<std::int64_t>(schedule_.positions().size()) + 4;
    checkpoints_.push_back(snapshot());
  }

  /// Consumes one backend chunk.
  Action feed(std::string_view chunk) {
    require_running("feed");
    raw_bytes_received_ += chunk.size();
    if (options_.limits.record_chunks) transcript_.add("chunk", {{"text", std::string(chunk)}});
    if (raw_bytes_received_ > max_raw_bytes_) {
      exhaust("max raw bytes exceeded (" + std::to_string(max_raw_bytes_) + ")");
      return Action::Stop;
    }
    std::string text;
    const bool sentinel = scanner_.feed(chunk, text);
    Action a = process(text);
    if (a != Action::Continue) return a;
    if (sentinel) return end_of_stream("sentinel");
    return Action::Continue;
  }

  /// The backend stream ended (Done) without a pending action.
  Action finish_stream(std::string_view reason = "done") {
    require_running("finish_stream");
    std::string tail;
    scanner_.finish(tail);
    Action a = process(tail);
    if (a != Action::Continue) return a;
    return end_of_stream(std::string(reason));
  }

  void fail(const std::string& reason) {
    require_running("fail");
    exhaust(reason);
  }

  /// Called by the driver before issuing a continuation; false once over budget.
  bool note_continuation() {
    require_running("note_continuation");
    if (++continuations_ > max_continuations_) {
      exhaust("continuation limit reached (" + std::to_string(max_continuations_) + ")");
      return false;
    }
    scanner_.reset();
    return true;
  }

  /// Hard stop at an already reported boundary: cut, close, mark stopped.
  void force_stop_at(const UnitBoundary& boundary) {
    require_running("force_stop_at");
    if (boundary.unit_index == 0 || boundary.unit_index > boundaries_.size() ||
        boundaries_[boundary.unit_index - 1].byte_offset_end != boundary.byte_offset_end) {
      throw StateError("force_stop_at needs a boundary the session has reported");
    }
    terminate_at(boundary, "forced");
    if (!constraint_.satisfied(static_cast<std::int64_t>(boundary.unit_index))) {
      status_ = SessionStatus::Exhausted;
      reason_ = "forced stop outside the constraint";
    }
  }

  [[nodiscard]] SessionStatus status() const { return status_; }
  [[nodiscard]] const std::string& reason() const { return reason_; }
  [[nodiscard]] const std::string& raw() const { return raw_; }
  [[nodiscard]] const std::vector<UnitBoundary>& boundaries() const { return boundaries_; }
  [[nodiscard]] const std::vector<MarkerOccurrence>& injected() const { return injected_; }
  [[nodiscard]] const LengthConstraint& constraint() const { return constraint_; }
  [[nodiscard]] const InsertionSchedule& schedule() const { return schedule_; }
  [[nodiscard]] const Transcript& transcript() const { return transcript_; }
  [[nodiscard]] std::int64_t continuations() const { return continuations_; }
  [[nodiscard]] std::size_t raw_bytes_received() const { return raw_bytes_received_; }

  /// Units in strip(raw), as if the stream ended now.
  [[nodiscard]] std::int64_t clean_count() const {
    MarkerStripper s = stripper_;
    IncrementalSegmenter g = segmenter_;
    StripEvents ev;
    s.finalize(ev);
    std::vector<UnitBoundary> sink;
    g.feed(ev.clean, sink);
    return static_cast<std::int64_t>(g.count());
  }

  /// Clean text, as if the stream ended now. Excludes a trailing sentinel.
  [[nodiscard]] std::string clean() const {
    MarkerStripper s = stripper_;
    StripEvents ev;
    s.finalize(ev);
    return clean_ + ev.clean;
  }

  [[nodiscard]] SessionResult result() const {
    SessionResult r;
    r.raw = raw_;
    r.clean = clean();
    r.final_count = clean_count();
    r.injected = injected_;
    for (const auto& o : occurrences_) {
      const bool ours = std::any_of(injected_.begin(), injected_.end(),
                                    [&](const MarkerOccurrence& i) { return i.span_begin == o.span_begin; });
      if (!ours) r.found.push_back(o);
    }
    r.diagnostics = diagnostics_;
    r.status = status_;
    r.reason = reason_;
    r.continuations = continuations_;
    r.raw_bytes_received = raw_bytes_received_;
    r.transcript = transcript_;
    return r;
  }

 private:
  struct Checkpoint {
    std::size_t raw_size;
    std::size_t clean_size;
    std::size_t removals;
    std::size_t occurrences;
    std::size_t diagnostics;
    MarkerStripper stripper;
    IncrementalSegmenter segmenter;
  };

  Checkpoint snapshot() const {
    return {raw_.size(), clean_.size(), removals_.size(), occurrences_.size(), diagnostics_.size(),
            stripper_, segmenter_};
  }

  void require_running(const char* op) const {
    if (status_ != SessionStatus::Running) {
      throw StateError(std::string(op) + " on a session that is " + std::string(status_name(status_)));
    }
  }

  // Pushes raw bytes through stripper and segmenter; boundaries go to `out`.
  void pump(std::string_view raw, std::vector<UnitBoundary>& out) {
    raw_.append(raw);
    ev_.clean.clear();
    ev_.occurrences.clear();
    ev_.removals.clear();
    ev_.diagnostics.clear();
    stripper_.feed(raw, ev_);
    collect(out);
  }

  void collect(std::vector<UnitBoundary>& out) {
    clean_ += ev_.clean;
    removals_.insert(removals_.end(), ev_.removals.begin(), ev_.removals.end());
    occurrences_.insert(occurrences_.end(), ev_.occurrences.begin(), ev_.occurrences.end());
    diagnostics_.insert(diagnostics_.end(), ev_.diagnostics.begin(), ev_.diagnostics.end());
    segmenter_.feed(ev_.clean, out);
  }

  Action process(std::string_view text) {
    const std::size_t step = options_.limits.checkpoint_every;
    std::size_t pos = 0;
    while (pos < text.size()) {
      if (raw_.size() - checkpoints_.back().raw_size >= step) checkpoints_.push_back(snapshot());
      const std::size_t n = std::min(step, text.size() - pos);
      bounds_.clear();
      pump(text.substr(pos, n), bounds_);
      pos += n;
      for (const auto& b : bounds_) {
        Action a = on_boundary(b);
        if (a != Action::Continue) return a;
      }
    }
    return Action::Continue;
  }

  Action on_boundary(const UnitBoundary b) {  // by value: cutting clears bounds_
    if (b.unit_index <= processed_) return Action::Continue;  // replayed or rejoined unit
    processed_ = b.unit_index;
    boundaries_.push_back(b);
    const auto count = static_cast<std::int64_t>(b.unit_index);
    if (count >= constraint_.cap()) {
      terminate_at(b, "cap");
      return Action::Stop;
    }
    if (!constraint_.is_exact() && count >= constraint_.min && unicode::is_sentence_final(b.last_codepoint)) {
      terminate_at(b, "sentence_end");
      return Action::Stop;
    }
    const auto& positions = schedule_.positions();
    while (cursor_ < positions.size() && positions[cursor_] < count) ++cursor_;
    if (cursor_ < positions.size() && positions[cursor_] == count) {
      ++cursor_;
      inject_at(b);
      return Action::Resume;
    }
    return Action::Continue;
  }

  /// Stream ended: settle the last open unit, then stop (or inject once on a collision).
  Action end_of_stream(const std::string& reason) {
    MarkerStripper s = stripper_;
    IncrementalSegmenter g = segmenter_;
    StripEvents ev;
    s.finalize(ev);
    std::vector<UnitBoundary> tail;
    g.feed(ev.clean, tail);
    try {
      g.finalize(tail);
    } catch (const EncodingError&) {
      // a cut multibyte character is not a unit
    }
    for (const auto& b : tail) {
      if (b.unit_index <= processed_) continue;
      Action a = on_boundary(b);
      if (a == Action::Stop) return a;
      if (a == Action::Resume) {
        if (collision_retry_used_) break;
        collision_retry_used_ = true;
        return Action::Resume;
      }
    }
    settle();
    status_ = SessionStatus::StoppedBySentinel;
    reason_ = reason;
    transcript_.add("stop", {{"status", std::string(status_name(status_))},
                             {"reason", reason_},
                             {"count", clean_count()}});
    return Action::Stop;
  }

  // Flushes the stripper into the live pipeline once the stream is over.
  void settle() {
    ev_.clean.clear();
    ev_.occurrences.clear();
    ev_.removals.clear();
    ev_.diagnostics.clear();
    stripper_.finalize(ev_);
    bounds_.clear();
    collect(bounds_);
  }

  std::size_t raw_offset_of(std::size_t clean_offset) const {
    std::size_t raw = clean_offset;
    for (const auto& r : removals_) {
      if (r.clean_offset >= clean_offset) break;
      raw += r.length;
    }
    return raw;
  }

  /// Cuts raw at `cut` and rebuilds the pipeline state for exactly raw[0, cut).
  void truncate_raw(std::size_t cut) {
    while (checkpoints_.size() > 1 && checkpoints_.back().raw_size > cut) checkpoints_.pop_back();
    const Checkpoint& c = checkpoints_.back();
    std::string replay = raw_.substr(c.raw_size, cut - c.raw_size);
    const std::size_t dropped = raw_.size() - cut;
    raw_.resize(c.raw_size);
    clean_.resize(c.clean_size);
    removals_.resize(c.removals);
    occurrences_.resize(c.occurrences);
    diagnostics_.resize(c.diagnostics);
    stripper_ = c.stripper;
    segmenter_ = c.segmenter;
    bounds_.clear();
    pump(replay, bounds_);
    std::erase_if(injected_, [cut](const MarkerOccurrence& m) { return m.span_begin >= cut; });
    if (dropped > 0) {
      transcript_.add("truncate", {{"raw_offset", cut}, {"dropped_bytes", dropped}});
    }
  }

  void cut_at(const UnitBoundary b) {
    truncate_raw(raw_offset_of(b.byte_offset_end));
    processed_ = b.unit_index;
    while (!boundaries_.empty() && boundaries_.back().unit_index > b.unit_index) boundaries_.pop_back();
    const auto& positions = schedule_.positions();
    cursor_ = static_cast<std::size_t>(
        std::upper_bound(positions.begin(), positions.end(), static_cast<std::int64_t>(b.unit_index)) -
        positions.begin());
  }

  /// Appends " <marker>" through the pipeline; returns the occurrence it produced.
  MarkerOccurrence append_marker(std::int64_t count) {
    const std::string text = " " + render(format_, count, constraint_.cap());
    const std::size_t before = occurrences_.size();
    bounds_.clear();
    pump(text, bounds_);
    if (occurrences_.size() != before + 1) throw StateError("injected marker was not recognized by the stripper");
    return occurrences_.back();
  }

  void inject_at(const UnitBoundary b) {
    cut_at(b);
    const auto count = static_cast<std::int64_t>(b.unit_index);
    MarkerOccurrence m = append_marker(count);
    injected_.push_back(m);
    transcript_.add("inject", {{"count", count},
                               {"marker", raw_.substr(m.span_begin, m.span_end - m.span_begin)},
                               {"raw_offset", m.span_begin}});
  }

  void terminate_at(const UnitBoundary b, const char* why) {
    cut_at(b);
    const auto count = static_cast<std::int64_t>(b.unit_index);
    if (options_.terminal_marker && !(format_.kind == MarkerKind::RemainingCount && count > constraint_.cap())) {
      injected_.push_back(append_marker(count));
    }
    settle();
    raw_ += ' ';
    raw_ += options_.sentinel;
    status_ = SessionStatus::StoppedAtTarget;
    reason_ = why;
    transcript_.add("stop", {{"status", std::string(status_name(status_))}, {"reason", reason_}, {"count", count}});
  }

  void exhaust(const std::string& why) {
    settle();
    status_ = SessionStatus::Exhausted;
    reason_ = why;
    transcript_.add("stop", {{"status", std::string(status_name(status_))},
                             {"reason", reason_},
                             {"count", clean_count()}});
  }

  LengthConstraint constraint_;
  InsertionSchedule schedule_;
  MarkerFormat format_;
  SessionOptions options_;

  MarkerStripper stripper_;
  IncrementalSegmenter segmenter_;
  StopScanner scanner_;
  StripEvents ev_;
  std::vector<UnitBoundary> bounds_;

  std::string raw_;
  std::string clean_;
  std::vector<Removal> removals_;
  std::vector<MarkerOccurrence> occurrences_;
  std::vector<MarkerDiagnostic> diagnostics_;
  std::vector<Checkpoint> checkpoints_;

  std::vector<UnitBoundary> boundaries_;
  std::vector<MarkerOccurrence> injected_;
  std::size_t processed_ = 0;
  std::size_t cursor_ = 0;
  bool collision_retry_used_ = false;

  SessionStatus status_ = SessionStatus::Running;
  std::string reason_;
  std::int64_t continuations_ = 0;
  std::int64_t max_continuations_ = 0;
  std::size_t raw_bytes_received_ = 0;
  std::size_t max_raw_bytes_ = 0;
  Transcript transcript_;
};

/// Builds the request a session sends: the prompt context, the cap as a hint,
/// and the sentinel as a stop sequence.
inline GenerationRequest session_request(const std::vector<Message>& context, const LengthConstraint& constraint,
                                         SamplingParams sampling, const SessionOptions& options) {
  GenerationRequest req;
  req.context = context;
  if (sampling.max_units_hint <= 0) sampling.max_units_hint = constraint.cap();
  if (std::find(sampling.stop_sequences.begin(), sampling.stop_sequences.end(), options.sentinel) ==
      sampling.stop_sequences.end()) {
    sampling.stop_sequences.push_back(options.sentinel);
  }
  req.sampling = std::move(sampling);
  req.assistant_prefix = options.assistant_prefix;
  return req;
}

/// Runs one marker-inserting generation to completion.
inline SessionResult run_session(const std::vector<Message>& context, const LengthConstraint& constraint,
                                 const InsertionSchedule& schedule, const MarkerFormat& format, Backend& backend,
                                 const SamplingParams& sampling = {}, const SessionOptions& options = {}) {
  DecodeSession session(constraint, schedule, format, options);
  const GenerationRequest req = session_request(context, constraint, sampling, options);
  std::int64_t calls = 0;
  std::unique_ptr<TextStream> stream;
  try {
    ++calls;
    stream = backend.generate_stream(req);
    while (session.status() == SessionStatus::Running) {
      StreamEvent ev = stream->next();
      DecodeSession::Action action = DecodeSession::Action::Continue;
      switch (ev.kind) {
        case StreamEventKind::TextChunk:
          action = session.feed(ev.text);
          break;
        case StreamEventKind::Done:
          action = session.finish_stream(ev.text);
          break;
        case StreamEventKind::BackendError:
          session.fail("backend error: " + ev.text);
          action = DecodeSession::Action::Stop;
          break;
      }
      if (action == DecodeSession::Action::Resume) {
        stream->cancel();
        stream.reset();
        if (!session.note_continuation()) break;
        ++calls;
        stream = backend.continue_from(req, session.raw());
      } else if (action == DecodeSession::Action::Stop) {
        if (!ev.terminal()) stream->cancel();
        break;
      }
    }
  } catch (const BackendError& e) {
    if (session.status() == SessionStatus::Running) session.fail(std::string("backend error: ") + e.what());
  } catch (const DomainError& e) {
    if (session.status() == SessionStatus::Running) session.fail(std::string("request rejected: ") + e.what());
  }
  SessionResult r = session.result();
  r.backend_calls = calls;
  return r;
}

}  // namespace lenctl
