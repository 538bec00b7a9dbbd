#include "obswin/stats.hpp"

#include <boost/math/distributions/normal.hpp>

#include <cmath>
#include <string>

namespace obswin {

namespace {

void check_level(double level) {
  if (!(level > 0.0 && level < 1.0)) throw Error(ErrorKind::InvalidArgument, "confidence level must lie in (0, 1)");
}

void check_r(double r, const char* name) {
  if (!std::isfinite(r)) throw Error(ErrorKind::DegenerateInput, std::string(name) + " is not finite");
  if (std::abs(r) >= 1.0) throw Error(ErrorKind::PerfectCorrelation, std::string(name) + " has |r| >= 1");
}

SignificanceDecision decide(double lo, double hi, double level) {
  return {!(lo <= 0.0 && 0.0 <= hi), {lo, hi, level}};
}

}  // namespace

ConfidenceInterval fisher_ci(double r, long n, double level) {
  check_level(level);
  if (n < 4) throw Error(ErrorKind::TooFewSamples, "fisher_ci needs n >= 4, got " + std::to_string(n));
  check_r(r, "r");
  const double z = std::atanh(r);
  const double crit = boost::math::quantile(boost::math::normal(), 0.5 * (1.0 + level));
  const double half = crit / std::sqrt(static_cast<double>(n - 3));
  return {std::tanh(z - half), std::tanh(z + half), level};
}

SignificanceDecision zou_dependent_overlapping_ci(double r1, double r2, double r_y, long n, double level) {
  check_r(r_y, "r_y");
  const auto ci1 = fisher_ci(r1, n, level);
  const auto ci2 = fisher_ci(r2, n, level);
  const double s1 = r1 * r1;
  const double s2 = r2 * r2;
  // Symmetric in (r1, r2) term by term so swapping them negates the interval exactly.
  const double s12 = s1 + s2;
  const double c = (r_y * (1.0 - s12) - 0.5 * (r1 * r2) * (1.0 - s12 - r_y * r_y)) /
                   ((1.0 - s1) * (1.0 - s2));
  const double a_lo = r1 - ci1.lo;
  const double b_hi = ci2.hi - r2;
  const double a_hi = ci1.hi - r1;
  const double b_lo = r2 - ci2.lo;
  const double var_lo = a_lo * a_lo + b_hi * b_hi - 2.0 * c * (a_lo * b_hi);
  const double var_hi = a_hi * a_hi + b_lo * b_lo - 2.0 * c * (a_hi * b_lo);
  if (!(var_lo >= 0.0 && var_hi >= 0.0)) {
    throw Error(ErrorKind::DegenerateInput, "correlations r1, r2, r_y cannot come from one joint distribution");
  }
  const double diff = r1 - r2;
  return decide(diff - std::sqrt(var_lo), diff + std::sqrt(var_hi), level);
}

SignificanceDecision zou_independent_ci(double r1, long n1, double r2, long n2, double level) {
  const auto ci1 = fisher_ci(r1, n1, level);
  const auto ci2 = fisher_ci(r2, n2, level);
  const double diff = r1 - r2;
  const double a_lo = r1 - ci1.lo;
  const double b_hi = ci2.hi - r2;
  const double a_hi = ci1.hi - r1;
  const double b_lo = r2 - ci2.lo;
  const double lo = diff - std::sqrt(a_lo * a_lo + b_hi * b_hi);
  const double hi = diff + std::sqrt(a_hi * a_hi + b_lo * b_lo);
  return decide(lo, hi, level);
}

}  // namespace obswin
