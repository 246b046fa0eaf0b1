#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mimohmc::selftest {

enum class Scope {
  Quick,  // criteria that finish in about a minute each
  All,
};

struct CriterionResult {
  int id = 0;
  std::string title;
  bool passed = false;
  bool skipped = false;
  std::string detail;
  double seconds = 0.0;
};

/// Number of acceptance criteria (ids 1..kCriterionCount).
inline constexpr int kCriterionCount = 12;

/// True for the criteria included in Scope::Quick.
bool is_quick(int id);

/// Runs one criterion.
CriterionResult run_criterion(int id);

/// Runs the selected criteria (all in scope when `only` is empty) and prints
/// one `PASS`/`FAIL`/`SKIP` line per criterion. Returns the failure count.
int run_criteria(std::ostream& out, const std::vector<int>& only, Scope scope);

}  // namespace mimohmc::selftest
