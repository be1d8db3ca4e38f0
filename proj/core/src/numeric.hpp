#pragma once

// Small 1-D numerical helpers shared by the core translation units.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

namespace cwnd::detail {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct Maximum {
  double arg;
  double value;
};

/// Golden-section search for the maximum of a concave f on [lo, hi].
template <class F>
Maximum golden_max(F&& f, double lo, double hi, double width) {
  constexpr double kInvPhi = 0.6180339887498949;
  double a = lo;
  double b = hi;
  double x1 = b - kInvPhi * (b - a);
  double x2 = a + kInvPhi * (b - a);
  double f1 = f(x1);
  double f2 = f(x2);
  while (b - a > width) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + kInvPhi * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - kInvPhi * (b - a);
      f1 = f(x1);
    }
    // Stalled interval (width below representable spacing).
    if (!(x1 < x2)) break;
  }
  Maximum best{a, f(a)};
  for (double x : {x1, x2, b, 0.5 * (a + b)}) {
    double v = f(x);
    if (v > best.value) best = {x, v};
  }
  return best;
}

/// Maximum of a concave f over [lower, upper] starting from x0. Expands a
/// bracket geometrically from x0, then refines with golden-section search.
template <class F>
Maximum concave_max(F&& f, double x0, double step, double lower, double upper, double width) {
  x0 = std::clamp(x0, lower, upper);
  double f0 = f(x0);
  double right = std::min(x0 + step, upper);
  double left = std::max(x0 - step, lower);
  double fr = f(right);
  double fl = f(left);
  if (fr > f0) {
    // Increasing to the right: walk until the function drops.
    double prev = x0;
    double cur = right;
    double fc = fr;
    double s = step;
    while (cur < upper) {
      s *= 2.0;
      double next = std::min(cur + s, upper);
      double fn = f(next);
      if (fn <= fc) {
        return golden_max(f, prev, next, width);
      }
      prev = cur;
      cur = next;
      fc = fn;
    }
    return golden_max(f, prev, upper, width);
  }
  if (fl > f0) {
    double prev = x0;
    double cur = left;
    double fc = fl;
    double s = step;
    while (cur > lower) {
      s *= 2.0;
      double next = std::max(cur - s, lower);
      double fn = f(next);
      if (fn <= fc) {
        return golden_max(f, next, prev, width);
      }
      prev = cur;
      cur = next;
      fc = fn;
    }
    return golden_max(f, lower, prev, width);
  }
  return golden_max(f, left, right, width);
}

/// log(sum exp(v)) with max shift; -inf for an empty or all -inf input.
inline double log_sum_exp(std::span<const double> v) {
  double mx = -kInf;
  for (double x : v) mx = std::max(mx, x);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

/// log(exp(a) + exp(b)).
inline double log_add(double a, double b) {
  if (a < b) std::swap(a, b);
  if (b == -kInf) return a;
  return a + std::log1p(std::exp(b - a));
}

/// x log x with 0 log 0 = 0.
inline double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

}  // namespace cwnd::detail
