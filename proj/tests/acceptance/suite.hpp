#pragma once

// Acceptance criteria 1-9 as one runnable suite, shared by the acceptance
// binary and the `selftest` command.

#include <iosfwd>
#include <string>
#include <vector>

namespace acceptance {

struct Criterion {
  int id = 0;
  std::string title;
  bool passed = false;
  /// Measured values, e.g. "cric=1.1e-15 h=3.0e-16".
  std::string summary;
  double seconds = 0.0;
};

/// Runs criteria 1-8 in order, then checks the total time (criterion 9).
/// Progress lines go to `log` when given.
std::vector<Criterion> run_all(std::ostream* log = nullptr);

/// One "criterion N: PASS|FAIL ..." line per entry.
void print(std::ostream& out, const std::vector<Criterion>& results);

bool all_passed(const std::vector<Criterion>& results);

}  // namespace acceptance
