// Copyright 2026 The lenctl Authors
// SPDX-License-Identifier: Apache-2.0

/// \file
/// Length units: what counts as one "word" and how to find unit boundaries in a
/// byte stream that arrives in arbitrary chunks.
///
/// WordsAndSymbols (default): a maximal run of letters/digits is one unit, an
/// apostrophe between two word characters stays inside the run ("don't"), and
/// every other punctuation or symbol codepoint is a unit by itself. Hyphens and
/// digit separators split: "state-of-the-art" is 7 units, "1,000" is 3.
/// Combining marks attach to the unit before them.
///
/// CjkCharacters: as above, plus every Han/Kana/Hangul character is its own unit.
///
/// WhitespaceOnly: a unit is a maximal run of non-whitespace.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "lenctl/error.hpp"
#include "lenctl/unicode.hpp"

namespace lenctl {

enum class SegmentationMode : std::uint8_t { WordsAndSymbols, WhitespaceOnly, CjkCharacters };

struct SegmentationRule {
  SegmentationMode mode = SegmentationMode::WordsAndSymbols;
  /// Only consulted in WordsAndSymbols mode; CjkCharacters always splits CJK.
  bool treat_cjk_char_as_unit = false;

  static constexpr SegmentationRule words() { return {}; }
  static constexpr SegmentationRule cjk() { return {SegmentationMode::CjkCharacters, true}; }
  static constexpr SegmentationRule whitespace() { return {SegmentationMode::WhitespaceOnly, false}; }

  [[nodiscard]] constexpr bool cjk_units() const {
    return mode == SegmentationMode::CjkCharacters ||
           (mode == SegmentationMode::WordsAndSymbols && treat_cjk_char_as_unit);
  }

  [[nodiscard]] constexpr unicode::CharClass classify(char32_t cp) const {
    using unicode::CharClass;
    if (mode == SegmentationMode::WhitespaceOnly) {
      return unicode::is_whitespace(cp) ? CharClass::Whitespace : CharClass::Word;
    }
    CharClass c = unicode::classify(cp);
    if (c == CharClass::Cjk && !cjk_units()) return CharClass::Word;
    return c;
  }

  [[nodiscard]] std::string name() const {
    switch (mode) {
      case SegmentationMode::WhitespaceOnly: return "whitespace";
      case SegmentationMode::CjkCharacters: return "cjk";
      case SegmentationMode::WordsAndSymbols: break;
    }
    return treat_cjk_char_as_unit ? "words+cjk" : "words";
  }

  static SegmentationRule from_name(std::string_view name) {
    if (name == "words") return words();
    if (name == "words+cjk") return {SegmentationMode::WordsAndSymbols, true};
    if (name == "cjk") return cjk();
    if (name == "whitespace") return whitespace();
    throw DomainError("unknown segmentation rule '" + std::string(name) + "'");
  }

  friend constexpr bool operator==(const SegmentationRule&, const SegmentationRule&) = default;
};

/// End of one unit in the segmenter's input stream.
struct UnitBoundary {
  std::size_t unit_index = 0;         // 1-based
  std::size_t byte_offset_begin = 0;  // first byte of the unit
  std::size_t byte_offset_end = 0;    // one past the last byte; always on a character boundary
  char32_t last_codepoint = 0;        // last non-extending codepoint of the unit

  friend bool operator==(const UnitBoundary&, const UnitBoundary&) = default;
};

/// Streaming segmenter. A boundary is reported only once the unit can no longer
/// grow, i.e. after the following character was seen or the stream was finalized.
/// Copyable, so callers can checkpoint and restore it.
class IncrementalSegmenter {
 public:
  explicit IncrementalSegmenter(SegmentationRule rule = {}) : rule_(rule) {}

  void feed(std::string_view chunk, std::vector<UnitBoundary>& out) {
    std::size_t i = 0;
    while (i < chunk.size()) {
      auto byte = static_cast<unsigned char>(chunk[i]);
      if (byte < 0x80 && !decoder_.mid_character()) {
        on_codepoint(byte, offset_, 1, out);
        ++offset_;
        ++i;
        continue;
      }
      if (!decoder_.mid_character()) cp_start_ = offset_;
      unicode::Utf8Decoder::Decoded d{};
      bool refeed = false;
      if (decoder_.push(byte, d, refeed)) {
        if (refeed) {
          on_codepoint(d.cp, cp_start_, d.length, out);
          continue;  // same byte again, offset unchanged
        }
        on_codepoint(d.cp, cp_start_, d.length, out);
      }
      ++offset_;
      ++i;
    }
  }

  std::vector<UnitBoundary> feed(std::string_view chunk) {
    std::vector<UnitBoundary> out;
    feed(chunk, out);
    return out;
  }

  /// Closes the open unit. Throws EncodingError if the stream stops inside a character.
  void finalize(std::vector<UnitBoundary>& out) {
    if (decoder_.mid_character()) {
      throw EncodingError("stream ended inside a UTF-8 sequence at byte " +
                          std::to_string(offset_ - decoder_.pending_bytes()));
    }
    close(out);
    state_ = State::Idle;
  }

  std::vector<UnitBoundary> finalize() {
    std::vector<UnitBoundary> out;
    finalize(out);
    return out;
  }

  /// Units already reported.
  [[nodiscard]] std::size_t completed_units() const { return emitted_; }
  /// Units reported plus units that would be reported by finalize().
  [[nodiscard]] std::size_t count() const {
    switch (state_) {
      case State::Idle: return emitted_;
      case State::PendingJoin: return emitted_ + 2;
      default: return emitted_ + 1;
    }
  }
  [[nodiscard]] std::size_t bytes_consumed() const { return offset_; }
  [[nodiscard]] const SegmentationRule& rule() const { return rule_; }

 private:
  enum class State : std::uint8_t { Idle, Word, PendingJoin, Symbol };

  void on_codepoint(char32_t cp, std::size_t at, std::size_t len, std::vector<UnitBoundary>& out) {
    using unicode::CharClass;
    const std::size_t end = at + len;
    switch (rule_.classify(cp)) {
      case CharClass::Whitespace:
        close(out);
        state_ = State::Idle;
        break;
      case CharClass::Word:
        if (state_ == State::Word || state_ == State::PendingJoin) {
          state_ = State::Word;
        } else {
          close(out);
          begin_unit(State::Word, at);
        }
        unit_end_ = end;
        last_cp_ = cp;
        break;
      case CharClass::Apostrophe:
        if (state_ == State::Word) {
          state_ = State::PendingJoin;
          join_begin_ = at;
          join_end_ = end;
          join_cp_ = cp;
        } else {
          close(out);
          begin_symbol(at, end, cp);
        }
        break;
      case CharClass::Extend:
        if (state_ == State::Word || state_ == State::Symbol) {
          unit_end_ = end;
        } else if (state_ == State::PendingJoin) {
          emit(unit_begin_, unit_end_, last_cp_, out);
          begin_symbol(join_begin_, end, join_cp_);
        } else {
          begin_symbol(at, end, cp);
        }
        break;
      case CharClass::Symbol:
      case CharClass::Cjk:
        close(out);
        begin_symbol(at, end, cp);
        break;
    }
  }

  void begin_unit(State s, std::size_t at) {
    state_ = s;
    unit_begin_ = at;
  }

  void begin_symbol(std::size_t at, std::size_t end, char32_t cp) {
    begin_unit(State::Symbol, at);
    unit_end_ = end;
    last_cp_ = cp;
  }

  void close(std::vector<UnitBoundary>& out) {
    switch (state_) {
      case State::Idle:
        return;
      case State::PendingJoin:
        emit(unit_begin_, unit_end_, last_cp_, out);
        emit(join_begin_, join_end_, join_cp_, out);
        break;
      case State::Word:
      case State::Symbol:
        emit(unit_begin_, unit_end_, last_cp_, out);
        break;
    }
    state_ = State::Idle;
  }

  void emit(std::size_t begin, std::size_t end, char32_t cp, std::vector<UnitBoundary>& out) {
    out.push_back(UnitBoundary{++emitted_, begin, end, cp});
  }

  SegmentationRule rule_;
  unicode::Utf8Decoder decoder_;
  State state_ = State::Idle;
  std::size_t offset_ = 0;
  std::size_t cp_start_ = 0;
  std::size_t emitted_ = 0;
  std::size_t unit_begin_ = 0;
  std::size_t unit_end_ = 0;
  char32_t last_cp_ = 0;
  std::size_t join_begin_ = 0;
  std::size_t join_end_ = 0;
  char32_t join_cp_ = 0;
};

/// Unit boundaries of a complete text.
inline std::vector<UnitBoundary> segment_boundaries(std::string_view text, SegmentationRule rule = {}) {
  IncrementalSegmenter seg(rule);
  std::vector<UnitBoundary> out;
  seg.feed(text, out);
  seg.finalize(out);
  return out;
}

inline std::vector<std::string> segment(std::string_view text, SegmentationRule rule = {}) {
  std::vector<std::string> units;
  for (const auto& b : segment_boundaries(text, rule)) {
    units.emplace_back(text.substr(b.byte_offset_begin, b.byte_offset_end - b.byte_offset_begin));
  }
  return units;
}

inline std::size_t count_units(std::string_view text, SegmentationRule rule = {}) {
  IncrementalSegmenter seg(rule);
  std::vector<UnitBoundary> sink;
  seg.feed(text, sink);
  return seg.count();
}

}  // namespace lenctl
