// Copyright 2026 The lenctl Authors
// SPDX-License-Identifier: Apache-2.0

/// \file
/// Length markers: rendering ("[20 words]"), and removing them again from a
/// transcript so lengths are always measured on marker-free text.
///
/// Marker grammar (delimiters and label configurable, defaults shown):
///
///     "[" DIGITS " words]"  |  "[" DIGITS " word]"  |  "[" DIGITS "]"
///
/// Injected markers are written with one leading space and no trailing space.
/// Stripping removes a marker together with the space in front of it. A marker
/// with no space in front is removed alone, except at the very start of the
/// text, where the space after it goes instead.

#pragma once

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lenctl/error.hpp"

namespace lenctl {

enum class MarkerKind : std::uint8_t {
  CountWithWordsLabel,  // "[k words]"
  BareCount,            // "[k]"
  RemainingCount,       // "[target - k]"
};

struct MarkerFormat {
  MarkerKind kind = MarkerKind::CountWithWordsLabel;
  std::string open_delim = "[";
  std::string close_delim = "]";
  std::string singular_label = "word";
  std::string plural_label = "words";

  static MarkerFormat with_kind(MarkerKind k) {
    MarkerFormat f;
    f.kind = k;
    return f;
  }
};

inline std::string_view marker_kind_name(MarkerKind k) {
  switch (k) {
    case MarkerKind::BareCount: return "bare";
    case MarkerKind::RemainingCount: return "remaining";
    case MarkerKind::CountWithWordsLabel: break;
  }
  return "words";
}

inline MarkerKind marker_kind_from_name(std::string_view name) {
  if (name == "words") return MarkerKind::CountWithWordsLabel;
  if (name == "bare") return MarkerKind::BareCount;
  if (name == "remaining") return MarkerKind::RemainingCount;
  throw DomainError("unknown marker format '" + std::string(name) + "'");
}

/// Renders the marker for `counted` units produced so far out of `target`.
inline std::string render(const MarkerFormat& format, std::int64_t counted, std::int64_t target) {
  if (counted < 0) throw DomainError("marker count must be non-negative");
  std::int64_t shown = counted;
  if (format.kind == MarkerKind::RemainingCount) {
    if (counted > target) {
      throw DomainError("remaining-count marker with counted " + std::to_string(counted) +
                        " > target " + std::to_string(target));
    }
    shown = target - counted;
  }
  std::string out = format.open_delim;
  out += std::to_string(shown);
  if (format.kind == MarkerKind::CountWithWordsLabel) {
    out += ' ';
    out += (shown == 1 ? format.singular_label : format.plural_label);
  }
  out += format.close_delim;
  return out;
}

/// One marker found in raw text.
struct MarkerOccurrence {
  std::int64_t declared_count = 0;
  std::size_t span_begin = 0;  // marker text only, raw byte offsets
  std::size_t span_end = 0;
  std::size_t clean_offset = 0;  // where the marker sat in the stripped text

  friend bool operator==(const MarkerOccurrence&, const MarkerOccurrence&) = default;
};

/// A contiguous run of raw bytes dropped from the clean text.
struct Removal {
  std::size_t clean_offset = 0;
  std::size_t raw_begin = 0;
  std::size_t length = 0;
};

/// Bracketed text that starts like a marker but does not parse as one; left in place.
struct MarkerDiagnostic {
  std::size_t raw_offset = 0;
  std::string text;
};

struct StripEvents {
  std::string clean;
  std::vector<MarkerOccurrence> occurrences;
  std::vector<Removal> removals;
  std::vector<MarkerDiagnostic> diagnostics;

  void clear() {
    clean.clear();
    occurrences.clear();
    removals.clear();
    diagnostics.clear();
  }
};

/// Streaming marker remover. Output depends only on the concatenated input,
/// never on how it was chunked. Copyable for checkpointing.
class MarkerStripper {
 public:
  explicit MarkerStripper(MarkerFormat format = {}) : format_(std::move(format)) {
    if (format_.open_delim.empty() || format_.close_delim.empty()) {
      throw DomainError("marker delimiters must be non-empty");
    }
    suffixes_ = {format_.close_delim, " " + format_.singular_label + format_.close_delim,
                 " " + format_.plural_label + format_.close_delim};
  }

  void feed(std::string_view raw, StripEvents& ev) {
    for (char c : raw) {
      process(c, offset_++, ev);
    }
  }

  void finalize(StripEvents& ev) {
    while (state_ != State::Normal) {
      switch (state_) {
        case State::HeldSpace:
          emit(' ', ev);
          state_ = State::Normal;
          break;
        case State::AfterStartMarker:
          state_ = State::Normal;
          break;
        case State::Matching:
          fail(ev);  // re-feeds the buffer; may leave a new partial match
          break;
        case State::Normal:
          break;
      }
    }
  }

  [[nodiscard]] std::size_t raw_consumed() const { return offset_; }
  [[nodiscard]] std::size_t clean_emitted() const { return clean_emitted_; }
  [[nodiscard]] const MarkerFormat& format() const { return format_; }

 private:
  enum class State : std::uint8_t { Normal, HeldSpace, Matching, AfterStartMarker };
  enum class Phase : std::uint8_t { Open, Digits, Suffix };

  static constexpr std::size_t kMaxDigits = 18;

  void process(char c, std::size_t at, StripEvents& ev) {
    switch (state_) {
      case State::AfterStartMarker:
        state_ = State::Normal;
        if (c == ' ') {
          ev.removals.push_back({clean_emitted_, at, 1});
          return;
        }
        [[fallthrough]];
      case State::Normal:
        if (c == ' ') {
          state_ = State::HeldSpace;
          held_at_ = at;
        } else if (c == format_.open_delim[0]) {
          begin_match(false, at, c);
        } else {
          emit(c, ev);
        }
        return;
      case State::HeldSpace:
        if (c == format_.open_delim[0]) {
          buffer_ = " ";
          begin_match(true, held_at_, c);
          return;
        }
        emit(' ', ev);
        state_ = State::Normal;
        process(c, at, ev);
        return;
      case State::Matching:
        match(c, at, ev);
        return;
    }
  }

  void begin_match(bool lead_space, std::size_t start, char c) {
    state_ = State::Matching;
    lead_space_ = lead_space;
    match_start_ = start;
    if (!lead_space) buffer_.clear();
    buffer_ += c;
    open_matched_ = 1;
    digits_ = 0;
    suffix_.clear();
    phase_ = open_matched_ == format_.open_delim.size() ? Phase::Digits : Phase::Open;
  }

  void match(char c, std::size_t at, StripEvents& ev) {
    switch (phase_) {
      case Phase::Open:
        if (c != format_.open_delim[open_matched_]) return fail_then(c, at, ev);
        buffer_ += c;
        if (++open_matched_ == format_.open_delim.size()) phase_ = Phase::Digits;
        return;
      case Phase::Digits:
        if (c >= '0' && c <= '9') {
          if (digits_ == kMaxDigits) return fail_then(c, at, ev);
          buffer_ += c;
          ++digits_;
          return;
        }
        if (digits_ == 0) return fail_then(c, at, ev);
        phase_ = Phase::Suffix;
        [[fallthrough]];
      case Phase::Suffix: {
        std::string next = suffix_ + c;
        bool prefix = false;
        for (const auto& s : suffixes_) {
          if (s == next) {
            buffer_ += c;
            suffix_ = std::move(next);
            return complete(ev);
          }
          if (s.compare(0, next.size(), next) == 0) prefix = true;
        }
        if (!prefix) return fail_then(c, at, ev);
        buffer_ += c;
        suffix_ = std::move(next);
        return;
      }
    }
  }

  void complete(StripEvents& ev) {
    const std::size_t digits_begin = (lead_space_ ? 1 : 0) + format_.open_delim.size();
    std::int64_t value = 0;
    std::from_chars(buffer_.data() + digits_begin, buffer_.data() + digits_begin + digits_, value);
    const std::size_t marker_begin = match_start_ + (lead_space_ ? 1 : 0);
    const std::size_t marker_end = match_start_ + buffer_.size();
    ev.occurrences.push_back({value, marker_begin, marker_end, clean_emitted_});
    ev.removals.push_back({clean_emitted_, match_start_, buffer_.size()});
    const bool at_start = !lead_space_ && clean_emitted_ == 0;
    buffer_.clear();
    state_ = at_start ? State::AfterStartMarker : State::Normal;
  }

  // The buffered bytes are ordinary text: emit the first, re-scan the rest.
  // With a leading space the re-scan reaches the same failure from the
  // bracket, so only that pass reports it.
  void fail(StripEvents& ev) {
    if (!lead_space_ && open_matched_ == format_.open_delim.size() && digits_ > 0) {
      ev.diagnostics.push_back({match_start_, buffer_});
    }
    std::string pending = std::move(buffer_);
    std::size_t start = match_start_;
    buffer_.clear();
    state_ = State::Normal;
    emit(pending[0], ev);
    for (std::size_t i = 1; i < pending.size(); ++i) process(pending[i], start + i, ev);
  }

  void fail_then(char c, std::size_t at, StripEvents& ev) {
    fail(ev);
    process(c, at, ev);
  }

  void emit(char c, StripEvents& ev) {
    ev.clean.push_back(c);
    ++clean_emitted_;
  }

  MarkerFormat format_;
  std::vector<std::string> suffixes_;
  State state_ = State::Normal;
  Phase phase_ = Phase::Open;
  std::size_t offset_ = 0;
  std::size_t clean_emitted_ = 0;
  std::size_t held_at_ = 0;
  bool lead_space_ = false;
  std::size_t match_start_ = 0;
  std::size_t open_matched_ = 0;
  std::size_t digits_ = 0;
  std::string buffer_;
  std::string suffix_;
};

struct StripResult {
  std::string clean;
  std::vector<MarkerOccurrence> occurrences;
  std::vector<MarkerDiagnostic> diagnostics;
};

/// Removes every well-formed marker from `raw`.
inline StripResult strip(std::string_view raw, const MarkerFormat& format = {}) {
  MarkerStripper stripper(format);
  StripEvents ev;
  ev.clean.reserve(raw.size());
  stripper.feed(raw, ev);
  stripper.finalize(ev);
  return {std::move(ev.clean), std::move(ev.occurrences), std::move(ev.diagnostics)};
}

/// A marker to splice into clean text at a byte offset.
struct MarkerPlacement {
  std::size_t clean_offset = 0;
  std::int64_t counted = 0;
};

/// Inserts " <marker>" at each placement (offsets ascending, into the clean text).
inline std::string insert_markers(std::string_view clean, const std::vector<MarkerPlacement>& placements,
                                  const MarkerFormat& format = {}, std::int64_t target = 0) {
  std::string raw;
  std::size_t pos = 0;
  for (const auto& p : placements) {
    if (p.clean_offset < pos || p.clean_offset > clean.size()) {
      throw DomainError("marker placements must be ascending and inside the text");
    }
    raw.append(clean.substr(pos, p.clean_offset - pos));
    raw += ' ';
    raw += render(format, p.counted, target);
    pos = p.clean_offset;
  }
  raw.append(clean.substr(pos));
  return raw;
}

}  // namespace lenctl
