// Copyright 2026 The lenctl Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>
#include <string>
#include <vector>

#include "lenctl/marker.hpp"
#include "lenctl/segmenter.hpp"
#include "oracles/oracles.hpp"
#include "oracles/textgen.hpp"

namespace {

using lenctl::MarkerFormat;
using lenctl::MarkerKind;

TEST(Marker, RenderWordsLabel) {
  EXPECT_EQ(lenctl::render({}, 20, 0), "[20 words]");
  EXPECT_EQ(lenctl::render({}, 1, 0), "[1 word]");
  EXPECT_EQ(lenctl::render({}, 0, 0), "[0 words]");
}

TEST(Marker, RenderBareAndRemaining) {
  EXPECT_EQ(lenctl::render(MarkerFormat::with_kind(MarkerKind::BareCount), 7, 0), "[7]");
  EXPECT_EQ(lenctl::render(MarkerFormat::with_kind(MarkerKind::RemainingCount), 150, 200), "[50]");
  EXPECT_THROW(lenctl::render(MarkerFormat::with_kind(MarkerKind::RemainingCount), 201, 200), lenctl::DomainError);
  EXPECT_THROW(lenctl::render({}, -1, 0), lenctl::DomainError);
}

TEST(Marker, StripRemovesMarkerAndItsSpace) {
  auto r = lenctl::strip("alpha beta [2 words] gamma");
  EXPECT_EQ(r.clean, "alpha beta gamma");
  ASSERT_EQ(r.occurrences.size(), 1u);
  EXPECT_EQ(r.occurrences[0].declared_count, 2);
  EXPECT_EQ(r.occurrences[0].span_begin, 11u);
  EXPECT_EQ(r.occurrences[0].span_end, 20u);
}

TEST(Marker, StripIdentityWithoutMarkers) {
  auto r = lenctl::strip("no markers here");
  EXPECT_EQ(r.clean, "no markers here");
  EXPECT_TRUE(r.occurrences.empty());
  EXPECT_TRUE(r.diagnostics.empty());
}

TEST(Marker, AllAcceptedForms) {
  EXPECT_EQ(lenctl::strip("a [1 word] b [2] c [3 words]").clean, "a b c");
  EXPECT_EQ(lenctl::strip("[5 words] start").clean, "start");
}

TEST(Marker, MalformedBracketsStayAndAreReported) {
  auto r = lenctl::strip("see [3 wordz] and [x] and [12");
  EXPECT_EQ(r.clean, "see [3 wordz] and [x] and [12");
  EXPECT_TRUE(r.occurrences.empty());
  ASSERT_EQ(r.diagnostics.size(), 2u);
  EXPECT_EQ(r.diagnostics[0].text, "[3 word");
  EXPECT_EQ(r.diagnostics[1].text, "[12");
}

TEST(Marker, StrippedCountUnaffectedByMarkerText) {
  // "[20 words]" would be 4 units if counted.
  EXPECT_EQ(lenctl::count_units(lenctl::strip("one two [2 words] three").clean), 3u);
}

// Inserts markers at random unit boundaries and checks the round trip.
TEST(Marker, InsertStripRoundTrip) {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 500; ++i) {
    std::string clean = oracle::random_text(rng, 1 + rng() % 80);
    // Bracketed digits in the clean text would be markers themselves.
    if (lenctl::strip(clean).clean != clean) continue;
    const auto b = lenctl::segment_boundaries(clean);
    std::vector<lenctl::MarkerPlacement> placements;
    for (const auto& u : b) {
      if (rng() % 3 == 0) placements.push_back({u.byte_offset_end, static_cast<std::int64_t>(u.unit_index)});
    }
    const std::string raw = lenctl::insert_markers(clean, placements);
    auto r = lenctl::strip(raw);
    ASSERT_EQ(r.clean, clean) << raw;
    ASSERT_EQ(r.occurrences.size(), placements.size());
    for (std::size_t k = 0; k < placements.size(); ++k) {
      EXPECT_EQ(r.occurrences[k].clean_offset, placements[k].clean_offset);
      EXPECT_EQ(r.occurrences[k].declared_count, placements[k].counted);
      EXPECT_EQ(raw.substr(r.occurrences[k].span_begin, r.occurrences[k].span_end - r.occurrences[k].span_begin),
                lenctl::render({}, placements[k].counted, 0));
    }
    EXPECT_EQ(lenctl::count_units(r.clean), b.size());
  }
}

TEST(Marker, StripIsIdempotent) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 500; ++i) {
    std::string raw = oracle::random_text(rng, 60);
    raw.insert(rng() % (raw.size() + 1), " [" + std::to_string(rng() % 1000) + " words]");
    const auto once = lenctl::strip(raw).clean;
    // A first pass can assemble a new marker from pieces around a removed one, so
    // iterate to the fixed point and require that stripping it changes nothing.
    std::string fixed = once;
    for (int k = 0; k < 8; ++k) fixed = lenctl::strip(fixed).clean;
    EXPECT_EQ(lenctl::strip(fixed).clean, fixed);
  }
}

TEST(Marker, MatchesRegexOracle) {
  std::mt19937_64 rng(21);
  const std::vector<std::string> pieces = {"word", " ", "  ", "[", "]", "12", "3", " words]", " word]", " wor",
                                           "[7]", " [4 words]", "[0 word]", "x", "’", "é", "[[", "]]", "\n"};
  for (int i = 0; i < 3000; ++i) {
    std::string raw;
    const int n = static_cast<int>(rng() % 14);
    for (int k = 0; k < n; ++k) raw += pieces[rng() % pieces.size()];
    auto got = lenctl::strip(raw);
    auto want = oracle::strip(raw);
    ASSERT_EQ(got.clean, want.clean) << "raw: '" << raw << "'";
    std::vector<std::int64_t> declared;
    for (const auto& o : got.occurrences) declared.push_back(o.declared_count);
    ASSERT_EQ(declared, want.declared) << "raw: '" << raw << "'";
  }
}

TEST(Marker, ChunkingInvariance) {
  std::mt19937_64 rng(33);
  for (int i = 0; i < 500; ++i) {
    std::string raw = "lead [1 word] " + oracle::random_text(rng, 40) + " [12 words] tail [3] x [4 wor";
    auto batch = lenctl::strip(raw);
    lenctl::MarkerStripper s;
    lenctl::StripEvents ev;
    for (const auto& c : oracle::random_chunks(rng, raw, 5)) s.feed(c, ev);
    s.finalize(ev);
    ASSERT_EQ(ev.clean, batch.clean);
    ASSERT_EQ(ev.occurrences, batch.occurrences);
  }
}

TEST(Marker, KindNames) {
  for (auto k : {MarkerKind::CountWithWordsLabel, MarkerKind::BareCount, MarkerKind::RemainingCount}) {
    EXPECT_EQ(lenctl::marker_kind_from_name(lenctl::marker_kind_name(k)), k);
  }
  EXPECT_THROW(lenctl::marker_kind_from_name("tokens"), lenctl::DomainError);
}

}  // namespace
