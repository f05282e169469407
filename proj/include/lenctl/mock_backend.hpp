// Copyright 2026 The lenctl Authors
// SPDX-License-Identifier: Apache-2.0

/// \file
/// Deterministic in-process backend. Every behavior is a pure function of
/// (script, seed, request), so whole pipelines can be replayed byte for byte.
///
/// Filler text is "w1 w2 w3 ..." with an occasional "." unit glued to the
/// preceding word. Continuations pick up after the last "wK" in the committed
/// text, so injected markers never disturb the numbering.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lenctl/backend.hpp"
#include "lenctl/error.hpp"
#include "lenctl/marker.hpp"
#include "lenctl/segmenter.hpp"

namespace lenctl {

namespace mock_detail {

inline std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix(std::uint64_t seed, std::uint64_t k) {
  return splitmix(splitmix(seed) ^ (k * 0xD6E8FEB86659FD93ULL));
}

/// Byte offset in `doc` just past its k-th unit after marker removal (0 for k = 0,
/// doc.size() when the document has fewer units).
inline std::size_t raw_offset_after_units(std::string_view doc, std::size_t k, const MarkerFormat& fmt,
                                          SegmentationRule rule) {
  if (k == 0) return 0;
  MarkerStripper stripper(fmt);
  StripEvents ev;
  stripper.feed(doc, ev);
  stripper.finalize(ev);
  auto bounds = segment_boundaries(ev.clean, rule);
  if (k > bounds.size()) return doc.size();
  const std::size_t c = bounds[k - 1].byte_offset_end;
  std::size_t raw = c;
  for (const auto& r : ev.removals) {
    if (r.clean_offset < c) raw += r.length;
  }
  return raw;
}

}  // namespace mock_detail

/// Options for the probe-answering behavior.
struct ProbeResponderOptions {
  /// When counting, silently skip every k-th unit of real text (0: never).
  std::int64_t drop_every = 0;
  /// Interval n -> factor applied to the final declared count.
  std::map<std::int64_t, double> count_scale;
  /// Factor on the implicit-count answer.
  double implicit_scale = 1.0;
  /// Factor on the total of a produced plan.
  double plan_scale = 1.0;
  /// Interval n -> factor on how many units an aligned generation actually writes.
  std::map<std::int64_t, double> align_scale;
};

struct MockScript {
  enum class Behavior : std::uint8_t { Compliant, Overrun, Undershoot, Scripted, Noisy, ProbeResponder, Mixed };

  Behavior behavior = Behavior::Compliant;
  std::int64_t amount = 0;          // Overrun: excess units; Undershoot: deficit units
  std::vector<std::string> chunks;  // Scripted
  ProbeResponderOptions probe;
  std::uint64_t seed = 0;
  /// Emit a BackendError after this many chunks (-1: never).
  std::int64_t fail_after_chunks = -1;

  static MockScript compliant(std::uint64_t seed = 0) { return make(Behavior::Compliant, 0, seed); }
  static MockScript overrun(std::int64_t excess, std::uint64_t seed = 0) {
    if (excess < 0) throw DomainError("overrun excess must be >= 0");
    return make(Behavior::Overrun, excess, seed);
  }
  static MockScript undershoot(std::int64_t deficit, std::uint64_t seed = 0) {
    if (deficit < 0) throw DomainError("undershoot deficit must be >= 0");
    return make(Behavior::Undershoot, deficit, seed);
  }
  static MockScript scripted(std::vector<std::string> chunks) {
    MockScript s = make(Behavior::Scripted, 0, 0);
    s.chunks = std::move(chunks);
    return s;
  }
  static MockScript noisy(std::uint64_t seed = 0) { return make(Behavior::Noisy, 0, seed); }
  static MockScript probe_responder(ProbeResponderOptions opts = {}, std::uint64_t seed = 0) {
    MockScript s = make(Behavior::ProbeResponder, 0, seed);
    s.probe = std::move(opts);
    return s;
  }
  static MockScript mixed(std::uint64_t seed = 0) { return make(Behavior::Mixed, 0, seed); }

  [[nodiscard]] std::string describe() const {
    std::string out;
    switch (behavior) {
      case Behavior::Compliant: out = "compliant"; break;
      case Behavior::Overrun: out = "overrun=" + std::to_string(amount); break;
      case Behavior::Undershoot: out = "undershoot=" + std::to_string(amount); break;
      case Behavior::Scripted: return "scripted(" + std::to_string(chunks.size()) + ")";
      case Behavior::Noisy: out = "noisy"; break;
      case Behavior::ProbeResponder: out = "probe"; break;
      case Behavior::Mixed: out = "mixed"; break;
    }
    return out + ":" + std::to_string(seed);
  }

  /// Parses "<behavior>[=<amount>][:<seed>]", e.g. "compliant", "overrun=40:7".
  static MockScript parse(std::string_view spec) {
    std::string name(spec);
    std::uint64_t seed = 0;
    if (auto colon = name.find(':'); colon != std::string::npos) {
      seed = parse_uint(name.substr(colon + 1), spec);
      name.resize(colon);
    }
    std::optional<std::int64_t> amount;
    if (auto eq = name.find('='); eq != std::string::npos) {
      amount = static_cast<std::int64_t>(parse_uint(name.substr(eq + 1), spec));
      name.resize(eq);
    }
    if (name == "compliant") return compliant(seed);
    if (name == "overrun") return overrun(amount.value_or(50), seed);
    if (name == "undershoot") return undershoot(amount.value_or(5), seed);
    if (name == "noisy") return noisy(seed);
    if (name == "probe") return probe_responder({}, seed);
    if (name == "mixed") return mixed(seed);
    throw DomainError("unknown mock behavior '" + std::string(spec) + "'");
  }

 private:
  static MockScript make(Behavior b, std::int64_t amount, std::uint64_t seed) {
    MockScript s;
    s.behavior = b;
    s.amount = amount;
    s.seed = seed;
    return s;
  }

  static std::uint64_t parse_uint(const std::string& text, std::string_view spec) {
    if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos) {
      throw DomainError("bad number in mock spec '" + std::string(spec) + "'");
    }
    return std::stoull(text);
  }
};

namespace mock_detail {

/// Produces text fragments in order; returns false when exhausted.
class Source {
 public:
  virtual ~Source() = default;
  virtual bool next(std::string& out) = 0;
  /// Done reason when the source runs dry without hitting a stop sequence.
  [[nodiscard]] virtual std::string end_reason() const { return "end"; }
};

/// "w{k}" filler with sentence ends; optionally bounded and sentinel-terminated.
class FillerSource : public Source {
 public:
  FillerSource(std::uint64_t seed, std::int64_t first, std::int64_t last, bool sentinel)
      : seed_(seed), k_(first), last_(last), sentinel_(sentinel) {}

  static bool is_period(std::uint64_t seed, std::int64_t k) {
    auto raw_hit = [seed](std::int64_t i) {
      return i >= 7 && mix(seed, static_cast<std::uint64_t>(i)) % 10 == 0;
    };
    return raw_hit(k) && !raw_hit(k - 1);
  }

  bool next(std::string& out) override {
    if (last_ >= 0 && k_ > last_) {
      if (sentinel_ && !sentinel_sent_) {
        sentinel_sent_ = true;
        out += " ";
        out += kDefaultSentinel;
        return true;
      }
      return false;
    }
    if (is_period(seed_, k_)) {
      out += '.';
    } else {
      if (k_ > 1) out += ' ';
      out += 'w';
      out += std::to_string(k_);
    }
    ++k_;
    return true;
  }

  [[nodiscard]] std::string end_reason() const override { return "length"; }

 private:
  std::uint64_t seed_;
  std::int64_t k_;
  std::int64_t last_;  // -1: unbounded
  bool sentinel_;
  bool sentinel_sent_ = false;
};

/// Fixed fragments, emitted as given.
class ListSource : public Source {
 public:
  explicit ListSource(std::vector<std::string> parts) : parts_(std::move(parts)) {}
  bool next(std::string& out) override {
    if (i_ >= parts_.size()) return false;
    out += parts_[i_++];
    return true;
  }

 private:
  std::vector<std::string> parts_;
  std::size_t i_ = 0;
};

/// Hard text for the decoder: multibyte letters, apostrophes, model-authored and
/// malformed markers, partial sentinels.
class NoisySource : public Source {
 public:
  NoisySource(std::uint64_t seed, std::size_t first_fragment, std::int64_t unit_budget)
      : seed_(seed), j_(first_fragment), budget_(unit_budget) {}

  static std::string fragment(std::uint64_t seed, std::size_t j) {
    const std::uint64_t h = mix(seed ^ 0xA5A5A5A5ULL, j);
    const auto r = static_cast<unsigned>(h % 100);
    const std::string lead = j == 0 ? "" : " ";
    if (r < 58) return lead + "w" + std::to_string(j + 1);
    if (r < 62) return lead + (h & 0x100 ? "caf\xC3\xA9" : "na\xC3\xAFve");
    if (r < 64) return lead + "Stra\xC3\x9F" "e";
    if (r < 66) return lead + "\xE4\xBD\xA0\xE5\xA5\xBD";  // two Han characters
    if (r < 68) return lead + "don't";
    if (r < 70) return lead + "state-of-the-art";
    if (r < 72) return lead + "1,000";
    if (r < 76) return j == 0 ? "w0" : std::string(h & 0x200 ? "." : (h & 0x400 ? "," : "!"));
    if (r < 79) return " [" + std::to_string(j) + " words]";
    if (r < 80) return "[3 words]";
    if (r < 82) return lead + "[12 wrds]";
    if (r < 84) return lead + (h & 0x800 ? "##en" : "#");
    if (r < 85) return lead + "\xF0\x9F\x99\x82";  // emoji
    if (r < 86) return lead + "e\xCC\x81";         // e + combining acute
    if (r < 88) return lead + "(aside)";
    if (r < 90) return lead + "\"quoted\"";
    if (r < 92) return lead + "x_y";
    return lead + "w" + std::to_string(j + 1);
  }

  static std::int64_t fragment_units(std::uint64_t seed, std::size_t j) {
    return static_cast<std::int64_t>(count_units(strip(fragment(seed, j)).clean));
  }

  bool next(std::string& out) override {
    if (budget_ >= 0 && produced_ >= budget_) return false;
    std::string f = fragment(seed_, j_++);
    produced_ += static_cast<std::int64_t>(count_units(strip(f).clean));
    out += f;
    return true;
  }

  [[nodiscard]] std::string end_reason() const override { return "length"; }

 private:
  std::uint64_t seed_;
  std::size_t j_;
  std::int64_t budget_;
  std::int64_t produced_ = 0;
};

inline std::string last_user_message(const GenerationRequest& r) {
  for (auto it = r.context.rbegin(); it != r.context.rend(); ++it) {
    if (it->role == "user") return it->content;
  }
  return r.context.empty() ? std::string() : r.context.back().content;
}

inline std::optional<std::int64_t> find_int(const std::string& text, const std::regex& re) {
  std::smatch m;
  if (!std::regex_search(text, m, re)) return std::nullopt;
  return std::stoll(m[1].str());
}

inline std::int64_t scaled(std::int64_t v, double f) {
  return static_cast<std::int64_t>(std::llround(static_cast<double>(v) * f));
}

inline double lookup(const std::map<std::int64_t, double>& m, std::int64_t n) {
  auto it = m.find(n);
  return it == m.end() ? 1.0 : it->second;
}

/// Answers the probe prompts built by the probes module, and the stage-one
/// planning prompt, like a model with configurable counting defects.
inline std::string probe_answer(const GenerationRequest& req, const ProbeResponderOptions& opt) {
  const std::string prompt = last_user_message(req);
  const std::string sentinel = " " + std::string(kDefaultSentinel);
  static const std::regex every_re(R"(every (\d+) words?)");
  static const std::regex approx_re(R"(approximately (\d+))");
  static const std::regex exactly_re(R"(exactly (\d+) words)");

  // The instructions may mention the tags; the passage is in the last pair.
  auto open = prompt.rfind("<text>");
  auto close = open == std::string::npos ? std::string::npos : prompt.find("</text>", open);
  if (open != std::string::npos && close != std::string::npos && close > open) {
    const std::string text = prompt.substr(open + 6, close - open - 6);
    const auto units = segment(text);
    const auto n_true = static_cast<std::int64_t>(units.size());
    auto every = find_int(prompt, every_re);
    if (!every) {
      return "The text contains " + std::to_string(scaled(n_true, opt.implicit_scale)) + " words." + sentinel;
    }
    const bool control = std::all_of(units.begin(), units.end(), [](const std::string& u) {
      return u == "A" || unicode::classify(static_cast<unsigned char>(u[0])) != unicode::CharClass::Word;
    });
    const std::int64_t n = *every;
    std::string out;
    for (std::int64_t i = 1; i <= n_true; ++i) {
      if (i > 1) out += ' ';
      out += units[static_cast<std::size_t>(i - 1)];
      std::int64_t counted = i;
      if (opt.drop_every > 0 && !control) counted -= i / opt.drop_every;
      if (i == n_true) {
        out += " " + render({}, std::max<std::int64_t>(0, scaled(counted, lookup(opt.count_scale, n))), 0);
      } else if (i % n == 0) {
        out += " " + render({}, counted, 0);
      }
    }
    return out + sentinel;
  }

  if (prompt.find("Planning Task") != std::string::npos) {
    const std::int64_t target = find_int(prompt, approx_re).value_or(100);
    const std::int64_t total = std::max<std::int64_t>(1, scaled(target, opt.plan_scale));
    const std::int64_t a = total * 3 / 10;
    const std::int64_t b = total / 2;
    const std::int64_t c = total - a - b;
    return "1. Introduction: set the context (" + std::to_string(a) + " words)\n" +
           "2. Main points: explain the details (" + std::to_string(b) + " words)\n" +
           "3. Conclusion: summarize (" + std::to_string(c) + " words)\n" + "Total: " + std::to_string(total) +
           " words" + sentinel;
  }

  if (prompt.find("while writing") != std::string::npos) {
    const std::int64_t target = find_int(prompt, exactly_re).value_or(100);
    const std::int64_t n = find_int(prompt, every_re).value_or(1);
    const std::int64_t actual = std::max<std::int64_t>(1, scaled(target, lookup(opt.align_scale, n)));
    std::string out;
    for (std::int64_t i = 1; i <= actual; ++i) {
      if (i > 1) out += ' ';
      out += "w" + std::to_string(i);
      if (i % n == 0 || i == actual) out += " " + render({}, i, 0);
    }
    return out + sentinel;
  }
  return {};
}

/// Chunks a source, applies stop sequences, honors cancellation.
class MockStream : public TextStream {
 public:
  MockStream(std::unique_ptr<Source> source, std::vector<std::string> stops, std::uint64_t seed,
             std::size_t min_chunk, std::size_t max_chunk, std::int64_t fail_after)
      : source_(std::move(source)),
        scanner_(std::move(stops)),
        rng_(seed),
        min_chunk_(min_chunk),
        max_chunk_(max_chunk),
        fail_after_(fail_after) {}

  /// Emits the given pieces as chunks, unchanged.
  MockStream(std::vector<std::string> pieces, std::vector<std::string> stops, std::int64_t fail_after)
      : source_(std::make_unique<ListSource>(std::move(pieces))),
        scanner_(std::move(stops)),
        whole_fragments_(true),
        fail_after_(fail_after) {}

  StreamEvent next() override {
    while (!terminal_) {
      if (cancelled_) {
        terminal_ = StreamEvent::done("cancelled");
        break;
      }
      if (fail_after_ >= 0 && emitted_ >= fail_after_) {
        terminal_ = StreamEvent::error("injected mock failure");
        break;
      }
      std::string piece;
      if (!take(piece)) {
        std::string tail;
        scanner_.finish(tail);
        terminal_ = StreamEvent::done(source_->end_reason());
        if (!tail.empty()) return emit(std::move(tail));
        break;
      }
      std::string out;
      const bool stopped = scanner_.feed(piece, out);
      if (stopped) terminal_ = StreamEvent::done("stop");
      if (!out.empty()) return emit(std::move(out));
    }
    return *terminal_;
  }

  void cancel() override { cancelled_ = true; }

 private:
  StreamEvent emit(std::string text) {
    ++emitted_;
    return StreamEvent::chunk(std::move(text));
  }

  bool take(std::string& piece) {
    if (whole_fragments_) return source_->next(piece);
    rng_ = splitmix(rng_);
    const std::size_t want = min_chunk_ + static_cast<std::size_t>(rng_ % (max_chunk_ - min_chunk_ + 1));
    while (buffer_.size() < want && !exhausted_) {
      if (!source_->next(buffer_)) exhausted_ = true;
    }
    if (buffer_.empty()) return false;
    const std::size_t n = std::min(want, buffer_.size());
    piece.assign(buffer_, 0, n);
    buffer_.erase(0, n);
    return true;
  }

  std::unique_ptr<Source> source_;
  StopScanner scanner_;
  bool whole_fragments_ = false;
  std::uint64_t rng_ = 0;
  std::size_t min_chunk_ = 1;
  std::size_t max_chunk_ = 1;
  std::int64_t fail_after_ = -1;
  std::int64_t emitted_ = 0;
  std::string buffer_;
  bool exhausted_ = false;
  bool cancelled_ = false;
  std::optional<StreamEvent> terminal_;
};

/// Index of the last filler unit "wK" in `text`, with the byte offset just past it.
inline std::optional<std::pair<std::int64_t, std::size_t>> last_filler_anchor(std::string_view text) {
  auto digit = [](char c) { return c >= '0' && c <= '9'; };
  std::size_t i = text.size();
  while (i > 0) {
    if (!digit(text[i - 1])) {
      --i;
      continue;
    }
    const std::size_t end = i;
    while (i > 0 && digit(text[i - 1])) --i;
    if (i >= 1 && text[i - 1] == 'w' && (i == 1 || text[i - 2] == ' ' || text[i - 2] == ':') &&
        end - i <= 18) {
      return std::make_pair(std::stoll(std::string(text.substr(i, end - i))), end);
    }
  }
  return std::nullopt;
}

}  // namespace mock_detail

/// Scripted stand-in for a model server.
///
/// With a script sequence, fresh call i uses script min(i, size - 1); a
/// continuation reuses the script of the fresh call with the same request.
class MockBackend : public Backend {
 public:
  struct Call {
    bool continuation = false;
    GenerationRequest request;
    std::string committed;  // empty when larger than kMaxLoggedCommitted
    std::size_t committed_size = 0;
    std::size_t script_index = 0;
  };

  static constexpr std::size_t kMaxLoggedCommitted = 1 << 20;

  explicit MockBackend(MockScript script) : MockBackend(std::vector<MockScript>{std::move(script)}) {}
  explicit MockBackend(std::vector<MockScript> sequence) : sequence_(std::move(sequence)) {
    if (sequence_.empty()) throw DomainError("mock backend needs at least one script");
  }

  std::unique_ptr<TextStream> generate_stream(const GenerationRequest& request) override {
    request.validate();
    std::size_t idx = 0;
    {
      std::lock_guard<std::mutex> lock(mu_);
      idx = std::min(fresh_calls_++, sequence_.size() - 1);
      assigned_[request_fingerprint(request)] = idx;
      log(false, request, {}, idx);
    }
    return open(sequence_[idx], request, {});
  }

  std::unique_ptr<TextStream> continue_from(const GenerationRequest& request, std::string_view committed) override {
    request.validate();
    std::size_t idx = 0;
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto it = assigned_.find(request_fingerprint(request));
      if (it != assigned_.end()) {
        idx = it->second;
      } else if (fresh_calls_ > 0) {
        idx = std::min(fresh_calls_, sequence_.size()) - 1;
      }
      log(true, request, committed, idx);
    }
    std::string_view body = committed;
    if (!request.assistant_prefix.empty() && body.substr(0, request.assistant_prefix.size()) == request.assistant_prefix) {
      body.remove_prefix(request.assistant_prefix.size());
    }
    return open(sequence_[idx], request, body);
  }

  [[nodiscard]] std::string describe() const override {
    if (sequence_.size() == 1) return "mock:" + sequence_.front().describe();
    std::string out = "mock:[";
    for (std::size_t i = 0; i < sequence_.size(); ++i) {
      if (i) out += ",";
      out += sequence_[i].describe();
    }
    return out + "]";
  }

  [[nodiscard]] std::vector<Call> calls() const {
    std::lock_guard<std::mutex> lock(mu_);
    return calls_;
  }
  [[nodiscard]] std::size_t call_count() const {
    std::lock_guard<std::mutex> lock(mu_);
    return calls_.size();
  }

 private:
  using Behavior = MockScript::Behavior;

  void log(bool cont, const GenerationRequest& r, std::string_view committed, std::size_t idx) {
    Call c;
    c.continuation = cont;
    c.request = r;
    c.committed_size = committed.size();
    if (committed.size() <= kMaxLoggedCommitted) c.committed = std::string(committed);
    c.script_index = idx;
    calls_.push_back(std::move(c));
  }

  static std::int64_t hint_or(const GenerationRequest& r, std::int64_t fallback) {
    return r.sampling.max_units_hint > 0 ? r.sampling.max_units_hint : fallback;
  }

  /// First filler index still to be produced after `committed`.
  static std::int64_t filler_start(std::string_view committed) {
    if (committed.empty()) return 1;
    auto anchor = mock_detail::last_filler_anchor(committed);
    if (!anchor) return 1 + static_cast<std::int64_t>(count_units(strip(committed).clean));
    const auto tail = committed.substr(anchor->second);
    return anchor->first + 1 + static_cast<std::int64_t>(count_units(strip(tail).clean));
  }

  static std::unique_ptr<TextStream> filler(const MockScript& s, const GenerationRequest& r, std::string_view committed,
                                            std::int64_t last, bool sentinel, bool honor_stops, std::size_t lo,
                                            std::size_t hi) {
    const std::int64_t first = filler_start(committed);
    const std::uint64_t stream_seed = mock_detail::mix(s.seed, static_cast<std::uint64_t>(first));
    auto src = std::make_unique<mock_detail::FillerSource>(s.seed, first, last, sentinel);
    return std::make_unique<mock_detail::MockStream>(
        std::move(src), honor_stops ? r.sampling.stop_sequences : std::vector<std::string>{}, stream_seed, lo, hi,
        s.fail_after_chunks);
  }

  /// Emits `doc` from just past the units already committed.
  static std::unique_ptr<TextStream> document(const MockScript& s, const GenerationRequest& r,
                                              std::string_view committed, std::vector<std::string> pieces) {
    if (!committed.empty()) {
      std::string doc;
      for (const auto& p : pieces) doc += p;
      const std::size_t k = count_units(strip(committed).clean);
      const std::size_t at = mock_detail::raw_offset_after_units(doc, k, {}, {});
      std::vector<std::string> rest;
      std::size_t pos = 0;
      for (auto& p : pieces) {
        const std::size_t end = pos + p.size();
        if (end > at) rest.push_back(p.substr(at > pos ? at - pos : 0));
        pos = end;
      }
      pieces = std::move(rest);
    }
    return std::make_unique<mock_detail::MockStream>(std::move(pieces), r.sampling.stop_sequences,
                                                     s.fail_after_chunks);
  }

  static std::unique_ptr<TextStream> open(const MockScript& s, const GenerationRequest& r,
                                          std::string_view committed) {
    switch (s.behavior) {
      case Behavior::Compliant:
        return filler(s, r, committed, -1, false, true, 1, 12);
      case Behavior::Overrun:
        return filler(s, r, committed, hint_or(r, 100) + s.amount, false, false, 64, 512);
      case Behavior::Undershoot:
        return filler(s, r, committed, std::max<std::int64_t>(0, hint_or(r, 100) - s.amount), true, true, 1, 12);
      case Behavior::Scripted:
        return document(s, r, committed, s.chunks);
      case Behavior::Noisy: {
        std::size_t j = 0;
        std::int64_t have = 0;
        if (!committed.empty()) {
          const auto want = static_cast<std::int64_t>(count_units(strip(committed).clean));
          while (have < want) have += mock_detail::NoisySource::fragment_units(s.seed, j++);
        }
        const std::int64_t budget = hint_or(r, 100) + 40 - have;
        auto src = std::make_unique<mock_detail::NoisySource>(s.seed, j, std::max<std::int64_t>(0, budget));
        return std::make_unique<mock_detail::MockStream>(std::move(src), r.sampling.stop_sequences,
                                                         mock_detail::mix(s.seed, j + 77), 1, 24,
                                                         s.fail_after_chunks);
      }
      case Behavior::ProbeResponder: {
        std::string answer = mock_detail::probe_answer(r, s.probe);
        if (answer.empty()) return filler(s, r, committed, -1, false, true, 1, 16);
        std::vector<std::string> pieces;
        std::uint64_t h = mock_detail::mix(s.seed, request_fingerprint(r));
        for (std::size_t pos = 0; pos < answer.size();) {
          h = mock_detail::splitmix(h);
          const std::size_t n = 1 + static_cast<std::size_t>(h % 16);
          pieces.push_back(answer.substr(pos, n));
          pos += n;
        }
        return document(s, r, committed, std::move(pieces));
      }
      case Behavior::Mixed: {
        const std::uint64_t h = mock_detail::mix(s.seed, request_fingerprint(r));
        const std::uint64_t sub = mock_detail::splitmix(h);
        const std::int64_t hint = hint_or(r, 100);
        MockScript pick;
        switch (h % 4) {
          case 0: pick = MockScript::compliant(sub); break;
          case 1: pick = MockScript::overrun(1 + static_cast<std::int64_t>((h >> 8) % 60), sub); break;
          case 2:
            pick = MockScript::undershoot(1 + static_cast<std::int64_t>((h >> 16) % std::max<std::int64_t>(1, hint / 4)),
                                          sub);
            break;
          default: pick = MockScript::noisy(sub); break;
        }
        pick.fail_after_chunks = s.fail_after_chunks;
        return open(pick, r, committed);
      }
    }
    throw StateError("unhandled mock behavior");
  }

  std::vector<MockScript> sequence_;
  mutable std::mutex mu_;
  std::size_t fresh_calls_ = 0;
  std::unordered_map<std::uint64_t, std::size_t> assigned_;
  std::vector<Call> calls_;
};

}  // namespace lenctl
