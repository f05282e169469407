// Copyright 2026 The lenctl Authors
// SPDX-License-Identifier: Apache-2.0

// Decodes one answer of exactly 60 units against the offline mock and prints
// the raw stream (markers included), the clean text and the counts.

#include <iostream>

#include "lenctl/lenctl.hpp"

int main() {
  lenctl::MockBackend backend(lenctl::MockScript::compliant(7));
  const auto constraint = lenctl::LengthConstraint::exact(60);
  const auto schedule = lenctl::InsertionSchedule::decaying(constraint.target());
  std::cout << "schedule: " << schedule.describe() << "\n";

  const auto r = lenctl::run_session({{"user", "Describe a rainy train ride."}}, constraint, schedule,
                                     lenctl::MarkerFormat{}, backend);
  std::cout << "raw:   " << r.raw << "\n";
  std::cout << "clean: " << r.clean << "\n";
  std::cout << "count: " << r.final_count << " (recount " << lenctl::count_units(r.clean) << ")\n";
  std::cout << "status: " << lenctl::status_name(r.status) << "\n";
  return r.final_count == constraint.target() ? 0 : 1;
}
