#pragma once

#include <algorithm>

namespace evfleet {

// Contiguous set of admissible charge counts {lo, ..., hi}.
struct ActionRange {
  int lo = 0;
  int hi = 0;

  bool contains(int a) const { return a >= lo && a <= hi; }
  int size() const { return hi - lo + 1; }
  int clamp(int a) const { return std::clamp(a, lo, hi); }

  friend bool operator==(const ActionRange&, const ActionRange&) = default;
};

// {n_min..n_max} when anything can charge, {0} otherwise.
inline ActionRange feasible_actions(int n_min, int n_max) {
  if (n_max <= 0) return {0, 0};
  return {n_min, n_max};
}

}  // namespace evfleet
