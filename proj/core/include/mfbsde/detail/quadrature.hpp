#pragma once

#include <array>
#include <cmath>
#include <utility>

namespace mfbsde::detail {

// Adaptive Simpson with the usual Richardson stopping rule. `tol` is an
// absolute tolerance for the whole interval; each recursion level splits it.
template <typename F>
double adaptive_simpson_rec(const F& f, double a, double fa, double m, double fm,
                            double b, double fb, double whole, double tol, int depth) {
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double h = b - a;
  const double left = (h / 12.0) * (fa + 4.0 * flm + fm);
  const double right = (h / 12.0) * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
    return left + right + delta / 15.0;
  }
  return adaptive_simpson_rec(f, a, fa, lm, flm, m, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson_rec(f, m, fm, rm, frm, b, fb, right, 0.5 * tol, depth - 1);
}

template <typename F>
double adaptive_simpson(const F& f, double a, double b, double tol, int max_depth = 40) {
  if (!(b > a)) return 0.0;
  const double m = 0.5 * (a + b);
  const double fa = f(a);
  const double fm = f(m);
  const double fb = f(b);
  const double whole = ((b - a) / 6.0) * (fa + 4.0 * fm + fb);
  return adaptive_simpson_rec(f, a, fa, m, fm, b, fb, whole, tol, max_depth);
}

// 5-point Gauss-Legendre on [a, b]; exact through degree 9, used where the
// integrand is smooth on the whole interval.
template <typename F>
double gauss5(const F& f, double a, double b) {
  static constexpr std::array<double, 5> xs = {
      -0.9061798459386640, -0.5384693101056831, 0.0,
      0.5384693101056831, 0.9061798459386640};
  static constexpr std::array<double, 5> ws = {
      0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
      0.4786286704993665, 0.2369268850561891};
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  double acc = 0.0;
  for (int k = 0; k < 5; ++k) acc += ws[k] * f(c + h * xs[k]);
  return acc * h;
}

}  // namespace mfbsde::detail
