// Copyright 2026 The lenctl Authors
// SPDX-License-Identifier: Apache-2.0

/// \file
/// UTF-8 decoding and the codepoint classes the segmenter is defined over.
///
/// The classes approximate Unicode word-break properties with a compact range
/// table: everything not listed as whitespace, punctuation/symbol, extending
/// mark or CJK is treated as a word character (letter or digit).

#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

namespace lenctl::unicode {

inline constexpr char32_t kReplacement = 0xFFFD;

enum class CharClass : std::uint8_t {
  Whitespace,
  Word,        // letters, digits, other numbers
  Apostrophe,  // joins two word characters
  Symbol,      // punctuation and symbols; one unit per codepoint
  Extend,      // combining marks, joiners, variation selectors; attach to the previous unit
  Cjk,         // Han, Kana, Hangul
};

namespace detail {

struct Range {
  char32_t lo;
  char32_t hi;
};

template <std::size_t N>
constexpr bool in_ranges(const std::array<Range, N>& table, char32_t cp) {
  auto it = std::upper_bound(table.begin(), table.end(), cp,
                             [](char32_t v, const Range& r) { return v < r.lo; });
  if (it == table.begin()) return false;
  --it;
  return cp <= it->hi;
}

// Sorted, non-overlapping.
inline constexpr std::array<Range, 10> kSpace{{
    {0x0009, 0x000D}, {0x0020, 0x0020}, {0x0085, 0x0085}, {0x00A0, 0x00A0},
    {0x1680, 0x1680}, {0x2000, 0x200A}, {0x2028, 0x2029}, {0x202F, 0x202F},
    {0x205F, 0x205F}, {0x3000, 0x3000},
}};

inline constexpr std::array<Range, 19> kExtend{{
    {0x00AD, 0x00AD}, {0x0300, 0x036F}, {0x0483, 0x0489}, {0x0591, 0x05BD},
    {0x0610, 0x061A}, {0x064B, 0x065F}, {0x1AB0, 0x1AFF}, {0x1DC0, 0x1DFF},
    {0x200B, 0x200D}, {0x2060, 0x2064}, {0x20D0, 0x20FF}, {0x302A, 0x302F},
    {0x3099, 0x309A}, {0xFE00, 0xFE0F}, {0xFE20, 0xFE2F}, {0xFEFF, 0xFEFF},
    {0x1F3FB, 0x1F3FF}, {0xE0000, 0xE007F}, {0xE0100, 0xE01EF},
}};

inline constexpr std::array<Range, 20> kCjk{{
    {0x1100, 0x11FF},   {0x3005, 0x3007},   {0x3021, 0x3029},   {0x3031, 0x3035},
    {0x3038, 0x303C},   {0x3041, 0x3098},   {0x309B, 0x30FA},   {0x30FC, 0x30FF},
    {0x3130, 0x318F},   {0x31F0, 0x31FF},   {0x3400, 0x4DBF},   {0x4E00, 0x9FFF},
    {0xA960, 0xA97F},   {0xAC00, 0xD7AF},   {0xD7B0, 0xD7FF},   {0xF900, 0xFAFF},
    {0xFF66, 0xFF9F},   {0xFFA0, 0xFFDC},   {0x20000, 0x2FA1F}, {0x30000, 0x323AF},
}};

// Non-ASCII punctuation and symbols.
inline constexpr std::array<Range, 58> kSymbol{{
    {0x0080, 0x0084}, {0x0086, 0x009F}, {0x00A1, 0x00A9}, {0x00AB, 0x00AC},
    {0x00AE, 0x00B1}, {0x00B4, 0x00B4}, {0x00B6, 0x00B8}, {0x00BB, 0x00BB},
    {0x00BF, 0x00BF}, {0x00D7, 0x00D7}, {0x00F7, 0x00F7}, {0x02C2, 0x02C5},
    {0x02D2, 0x02DF}, {0x037E, 0x037E}, {0x0387, 0x0387}, {0x055A, 0x055F},
    {0x0589, 0x058A}, {0x05BE, 0x05BE}, {0x05C0, 0x05C0}, {0x05C3, 0x05C3},
    {0x05F3, 0x05F4}, {0x0600, 0x060F}, {0x061B, 0x061F}, {0x066A, 0x066D},
    {0x06D4, 0x06D4}, {0x0964, 0x0965}, {0x0970, 0x0970}, {0x0E3F, 0x0E3F},
    {0x0E4F, 0x0E4F}, {0x0E5A, 0x0E5B}, {0x10FB, 0x10FB}, {0x1360, 0x1368},
    {0x2010, 0x2018}, {0x201A, 0x2027}, {0x2030, 0x205E}, {0x20A0, 0x20CF},
    {0x2100, 0x214F}, {0x2190, 0x2BFF}, {0x2E00, 0x2E7F}, {0x3001, 0x3004},
    {0x3008, 0x3020}, {0x3030, 0x3030}, {0x303D, 0x303F}, {0x30FB, 0x30FB},
    {0xFD3E, 0xFD3F}, {0xFE10, 0xFE19}, {0xFE30, 0xFE6B}, {0xFF01, 0xFF0F},
    {0xFF1A, 0xFF20}, {0xFF3B, 0xFF40}, {0xFF5B, 0xFF65}, {0xFFE0, 0xFFEE},
    {0xFFF9, 0xFFFD}, {0x1F000, 0x1F1E5}, {0x1F1E6, 0x1F1FF}, {0x1F200, 0x1F3FA},
    {0x1F400, 0x1FAFF}, {0x1FB00, 0x1FBFF},
}};

}  // namespace detail

constexpr bool is_whitespace(char32_t cp) {
  if (cp < 0x80) return cp == ' ' || (cp >= 0x09 && cp <= 0x0D);
  return detail::in_ranges(detail::kSpace, cp);
}

constexpr bool is_cjk(char32_t cp) { return cp >= 0x1100 && detail::in_ranges(detail::kCjk, cp); }

/// Rule-independent class of a codepoint.
constexpr CharClass classify(char32_t cp) {
  if (cp < 0x80) {
    if (cp == ' ' || (cp >= 0x09 && cp <= 0x0D)) return CharClass::Whitespace;
    if ((cp >= '0' && cp <= '9') || (cp >= 'A' && cp <= 'Z') || (cp >= 'a' && cp <= 'z')) {
      return CharClass::Word;
    }
    if (cp == '\'') return CharClass::Apostrophe;
    return CharClass::Symbol;
  }
  if (cp == 0x2019) return CharClass::Apostrophe;
  if (detail::in_ranges(detail::kSpace, cp)) return CharClass::Whitespace;
  if (detail::in_ranges(detail::kExtend, cp)) return CharClass::Extend;
  if (detail::in_ranges(detail::kCjk, cp)) return CharClass::Cjk;
  if (detail::in_ranges(detail::kSymbol, cp)) return CharClass::Symbol;
  // Surrogates and noncharacters never decode; the rest are letters/digits/marks.
  return CharClass::Word;
}

/// Sentence-final punctuation used for range-constrained stopping.
constexpr bool is_sentence_final(char32_t cp) {
  switch (cp) {
    case '.': case '!': case '?':
    case 0x3002: case 0xFF01: case 0xFF1F: case 0xFF0E: case 0x2026: case 0x203C:
    case 0x203D: case 0x0964: case 0x06D4: case 0x061F:
      return true;
    default:
      return false;
  }
}

/// Incremental UTF-8 decoder. Invalid bytes decode to U+FFFD one byte at a time;
/// a sequence cut by the end of a chunk is held until the next chunk.
class Utf8Decoder {
 public:
  struct Decoded {
    char32_t cp;
    std::uint8_t length;  // bytes consumed from the stream for this codepoint
  };

  /// Feeds one byte; returns true and fills `out` when a codepoint completes.
  /// When a byte breaks a pending sequence, `out` is a replacement covering the
  /// pending bytes and `refeed` asks the caller to push the same byte again.
  bool push(unsigned char byte, Decoded& out, bool& refeed) {
    refeed = false;
    if (need_ == 0) {
      if (byte < 0x80) {
        out = {byte, 1};
        return true;
      }
      if (byte >= 0xC2 && byte <= 0xDF) {
        start(byte & 0x1F, 1, 0x80, 0xBF);
      } else if (byte >= 0xE0 && byte <= 0xEF) {
        start(byte & 0x0F, 2, byte == 0xE0 ? 0xA0 : 0x80, byte == 0xED ? 0x9F : 0xBF);
      } else if (byte >= 0xF0 && byte <= 0xF4) {
        start(byte & 0x07, 3, byte == 0xF0 ? 0x90 : 0x80, byte == 0xF4 ? 0x8F : 0xBF);
      } else {
        out = {kReplacement, 1};
        return true;
      }
      return false;
    }
    if (byte < lo_ || byte > hi_) {
      // Truncated sequence: emit a replacement for the bytes seen so far and re-feed this byte.
      out = {kReplacement, have_};
      reset();
      refeed = true;
      return true;
    }
    cp_ = (cp_ << 6) | (byte & 0x3F);
    ++have_;
    lo_ = 0x80;
    hi_ = 0xBF;
    if (--need_ == 0) {
      out = {cp_, have_};
      reset();
      return true;
    }
    return false;
  }

  [[nodiscard]] bool mid_character() const { return need_ != 0; }
  [[nodiscard]] std::uint8_t pending_bytes() const { return need_ ? have_ : 0; }

 private:
  void start(char32_t bits, std::uint8_t need, unsigned char lo, unsigned char hi) {
    cp_ = bits;
    need_ = need;
    have_ = 1;
    lo_ = lo;
    hi_ = hi;
  }
  void reset() {
    cp_ = 0;
    need_ = 0;
    have_ = 0;
  }

  char32_t cp_ = 0;
  std::uint8_t need_ = 0;
  std::uint8_t have_ = 0;
  unsigned char lo_ = 0x80;
  unsigned char hi_ = 0xBF;
};

inline void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

/// True when `text` is well-formed UTF-8.
inline bool is_valid_utf8(std::string_view text) {
  Utf8Decoder dec;
  Utf8Decoder::Decoded d{};
  bool refeed = false;
  for (unsigned char b : text) {
    if (dec.push(b, d, refeed) && d.cp == kReplacement) {
      // U+FFFD itself is three bytes; anything shorter came from an invalid sequence.
      if (d.length != 3 || refeed) return false;
    }
  }
  return !dec.mid_character();
}

}  // namespace lenctl::unicode
