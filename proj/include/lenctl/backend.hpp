// Copyright 2026 The lenctl Authors
// SPDX-License-Identifier: Apache-2.0

/// \file
/// The generation source seen by the decoder: an interruptible text stream that
/// can be resumed from a committed assistant prefix.

#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lenctl/error.hpp"

namespace lenctl {

inline constexpr std::string_view kDefaultSentinel = "###end";
inline constexpr double kDefaultTemperature = 0.5;

struct Message {
  std::string role;
  std::string content;

  friend bool operator==(const Message&, const Message&) = default;
};

struct SamplingParams {
  double temperature = kDefaultTemperature;
  std::int64_t max_units_hint = 0;  // 0: no hint
  std::vector<std::string> stop_sequences{std::string(kDefaultSentinel)};
};

struct GenerationRequest {
  std::vector<Message> context;
  SamplingParams sampling;
  /// Text the assistant turn is forced to start with. Sent to the backend ahead of
  /// any committed text but never part of what the caller counts.
  std::string assistant_prefix;
  bool stream = true;

  void validate() const {
    if (context.empty()) throw DomainError("generation request needs a non-empty context");
    if (sampling.temperature < 0.0) throw DomainError("temperature must be >= 0");
    if (!stream) throw DomainError("only streaming requests are supported");
  }
};

enum class StreamEventKind : std::uint8_t { TextChunk, Done, BackendError };

struct StreamEvent {
  StreamEventKind kind = StreamEventKind::Done;
  std::string text;  // chunk text, done reason, or error message

  static StreamEvent chunk(std::string t) { return {StreamEventKind::TextChunk, std::move(t)}; }
  static StreamEvent done(std::string reason) { return {StreamEventKind::Done, std::move(reason)}; }
  static StreamEvent error(std::string msg) { return {StreamEventKind::BackendError, std::move(msg)}; }

  [[nodiscard]] bool terminal() const { return kind != StreamEventKind::TextChunk; }
};

/// One in-flight generation. Ends with exactly one Done or BackendError; keeps
/// returning that terminal event if polled again. After cancel() no TextChunk is
/// returned.
class TextStream {
 public:
  virtual ~TextStream() = default;
  virtual StreamEvent next() = 0;
  virtual void cancel() = 0;
};

/// Shareable across threads; each returned stream belongs to one consumer.
class Backend {
 public:
  virtual ~Backend() = default;

  virtual std::unique_ptr<TextStream> generate_stream(const GenerationRequest& request) = 0;

  /// Continues the same assistant turn after `committed` (markers included).
  virtual std::unique_ptr<TextStream> continue_from(const GenerationRequest& request,
                                                    std::string_view committed) = 0;

  /// Short identifier echoed into reports, e.g. "mock:compliant:7".
  [[nodiscard]] virtual std::string describe() const = 0;
};

/// Cuts a text stream at the first complete stop sequence, holding back any
/// tail that could still grow into one.
class StopScanner {
 public:
  StopScanner() = default;
  explicit StopScanner(std::vector<std::string> stops) : stops_(std::move(stops)) {
    std::erase_if(stops_, [](const std::string& s) { return s.empty(); });
  }

  /// Appends to `out` the text that is certainly before any stop sequence.
  /// Returns true once a stop sequence completed; later input is ignored.
  bool feed(std::string_view chunk, std::string& out) {
    if (stopped_) return true;
    if (stops_.empty()) {
      out.append(chunk);
      return false;
    }
    pending_.append(chunk);
    std::size_t first = std::string::npos;
    for (const auto& s : stops_) {
      std::size_t at = pending_.find(s);
      if (at < first) first = at;
    }
    if (first != std::string::npos) {
      out.append(pending_, 0, first);
      pending_.clear();
      stopped_ = true;
      return true;
    }
    std::size_t keep = 0;
    for (const auto& s : stops_) {
      for (std::size_t len = std::min(s.size() - 1, pending_.size()); len > keep; --len) {
        if (pending_.compare(pending_.size() - len, len, s, 0, len) == 0) {
          keep = len;
          break;
        }
      }
    }
    out.append(pending_, 0, pending_.size() - keep);
    pending_.erase(0, pending_.size() - keep);
    return false;
  }

  /// Releases a held partial match at end of stream.
  void finish(std::string& out) {
    if (!stopped_) out.append(pending_);
    pending_.clear();
  }

  void reset() {
    pending_.clear();
    stopped_ = false;
  }

  [[nodiscard]] bool stopped() const { return stopped_; }

 private:
  std::vector<std::string> stops_;
  std::string pending_;
  bool stopped_ = false;
};

/// Stable 64-bit FNV-1a, used for deterministic seeding.
inline std::uint64_t fnv1a(std::string_view data, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Fingerprint of everything in a request that influences generation.
inline std::uint64_t request_fingerprint(const GenerationRequest& r) {
  std::uint64_t h = fnv1a("req");
  for (const auto& m : r.context) {
    h = fnv1a(m.role, h);
    h = fnv1a(std::string_view("\x1f", 1), h);
    h = fnv1a(m.content, h);
    h = fnv1a(std::string_view("\x1e", 1), h);
  }
  h = fnv1a(r.assistant_prefix, h);
  h = fnv1a(std::to_string(r.sampling.max_units_hint), h);
  return h;
}

}  // namespace lenctl
