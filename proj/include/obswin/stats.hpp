#pragma once

#include "obswin/common.hpp"

namespace obswin {

struct ConfidenceInterval {
  double lo = 0.0;
  double hi = 0.0;
  double level = 0.95;

  bool contains(double x) const { return lo <= x && x <= hi; }
};

struct SignificanceDecision {
  bool significant = false;
  ConfidenceInterval interval;
};

// Fisher z interval for one correlation.
ConfidenceInterval fisher_ci(double r, long n, double level = 0.95);

// Difference r1 - r2 of two correlations sharing one variable (x with y1, x
// with y2), where r_y correlates y1 and y2; Zou's modified asymptotic interval.
SignificanceDecision zou_dependent_overlapping_ci(double r1, double r2, double r_y, long n,
                                                  double level = 0.95);

// Difference r1 - r2 of correlations from independent samples.
SignificanceDecision zou_independent_ci(double r1, long n1, double r2, long n2, double level = 0.95);

}  // namespace obswin
