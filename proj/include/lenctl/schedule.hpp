// Copyright 2026 The lenctl Authors
// SPDX-License-Identifier: Apache-2.0

/// \file
/// Where markers go: after fixed multiples of n (uniform), or at
/// N - floor(N / 2^i) for i = 1, 2, ... (decaying), which is sparse early and
/// dense close to the target.

#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lenctl/error.hpp"

namespace lenctl {

/// Decaying positions for target `n`: {N - floor(N * 2^-i) : i >= 1}, keeping only p < N.
inline std::vector<std::int64_t> decaying_positions(std::int64_t n) {
  if (n <= 0) throw DomainError("decaying schedule needs a positive target");
  std::vector<std::int64_t> out;
  for (int i = 1; i < 63; ++i) {
    const std::int64_t offset = n >> i;
    if (offset == 0) break;
    const std::int64_t p = n - offset;
    if (out.empty() || out.back() != p) out.push_back(p);
  }
  return out;
}

/// Uniform positions n, 2n, 3n, ... strictly below `target`.
inline std::vector<std::int64_t> uniform_positions(std::int64_t target, std::int64_t interval) {
  if (target <= 0) throw DomainError("uniform schedule needs a positive target");
  if (interval <= 0) throw DomainError("uniform schedule needs a positive interval");
  std::vector<std::int64_t> out;
  for (std::int64_t p = interval; p < target; p += interval) out.push_back(p);
  return out;
}

enum class ScheduleKind : std::uint8_t { Uniform, Decaying };

/// Immutable insertion plan for one target length.
class InsertionSchedule {
 public:
  static InsertionSchedule decaying(std::int64_t target) {
    return InsertionSchedule(ScheduleKind::Decaying, target, 0, decaying_positions(target));
  }
  static InsertionSchedule uniform(std::int64_t target, std::int64_t interval) {
    return InsertionSchedule(ScheduleKind::Uniform, target, interval, uniform_positions(target, interval));
  }
  /// No markers at all; the decode loop still enforces the stop count.
  static InsertionSchedule none(std::int64_t target) {
    if (target <= 0) throw DomainError("schedule needs a positive target");
    return InsertionSchedule(ScheduleKind::Uniform, target, 0, {});
  }

  [[nodiscard]] ScheduleKind kind() const { return kind_; }
  [[nodiscard]] std::int64_t target() const { return target_; }
  /// Uniform interval; 0 for decaying or marker-free schedules.
  [[nodiscard]] std::int64_t interval() const { return interval_; }
  [[nodiscard]] const std::vector<std::int64_t>& positions() const { return positions_; }

  /// Smallest scheduled position >= current_count, if any.
  [[nodiscard]] std::optional<std::int64_t> next_position(std::int64_t current_count) const {
    auto it = std::lower_bound(positions_.begin(), positions_.end(), current_count);
    if (it == positions_.end()) return std::nullopt;
    return *it;
  }

  [[nodiscard]] std::string describe() const {
    if (kind_ == ScheduleKind::Decaying) return "decaying";
    if (interval_ == 0) return "none";
    return "uniform:" + std::to_string(interval_);
  }

 private:
  InsertionSchedule(ScheduleKind kind, std::int64_t target, std::int64_t interval,
                    std::vector<std::int64_t> positions)
      : kind_(kind), target_(target), interval_(interval), positions_(std::move(positions)) {}

  ScheduleKind kind_;
  std::int64_t target_;
  std::int64_t interval_;
  std::vector<std::int64_t> positions_;
};

/// Schedule kind as configured, before the target is known.
struct ScheduleSpec {
  ScheduleKind kind = ScheduleKind::Decaying;
  std::int64_t interval = 0;  // uniform only; 0 means no markers

  [[nodiscard]] InsertionSchedule build(std::int64_t target) const {
    if (kind == ScheduleKind::Decaying) return InsertionSchedule::decaying(target);
    if (interval == 0) return InsertionSchedule::none(target);
    return InsertionSchedule::uniform(target, interval);
  }

  [[nodiscard]] std::string describe() const {
    if (kind == ScheduleKind::Decaying) return "decaying";
    if (interval == 0) return "none";
    return "uniform:" + std::to_string(interval);
  }

  /// Parses "decaying", "none" or "uniform:<n>".
  static ScheduleSpec parse(const std::string& text) {
    if (text == "decaying") return {ScheduleKind::Decaying, 0};
    if (text == "none") return {ScheduleKind::Uniform, 0};
    const std::string prefix = "uniform:";
    if (text.rfind(prefix, 0) == 0) {
      std::int64_t n = 0;
      try {
        n = std::stoll(text.substr(prefix.size()));
      } catch (const std::exception&) {
        n = 0;
      }
      if (n <= 0) throw DomainError("uniform schedule needs a positive interval: '" + text + "'");
      return {ScheduleKind::Uniform, n};
    }
    throw DomainError("unknown schedule '" + text + "'");
  }
};

}  // namespace lenctl
