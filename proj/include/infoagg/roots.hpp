#pragma once

// Bracketed scalar root finding (Brent's method). Used as the independent
// numerical check on closed-form equilibrium coefficients, never as the
// source of truth.

#include <algorithm>
#include <cmath>
#include <limits>

#include "infoagg/errors.hpp"

namespace infoagg {

template <typename Scalar = double>
struct RootResult {
  Scalar root{0};
  Scalar f_at_root{0};
  int iterations{0};
  bool converged{false};
};

// Finds x in [lo, hi] with f(x) = 0. f(lo) and f(hi) must have opposite
// signs. xtol is an absolute tolerance on the bracket width.
template <typename Scalar, typename F>
RootResult<Scalar> find_root_bracketed(F&& f, Scalar lo, Scalar hi, Scalar xtol = Scalar(1e-13),
                                       int max_iterations = 200) {
  Scalar a = lo, b = hi;
  Scalar fa = f(a), fb = f(b);
  if (fa == Scalar(0)) return {a, fa, 0, true};
  if (fb == Scalar(0)) return {b, fb, 0, true};
  if ((fa > 0) == (fb > 0))
    throw Error(ErrorCode::NoConvergence, "root bracket does not enclose a sign change");

  Scalar c = a, fc = fa;
  Scalar d = b - a, e = d;
  RootResult<Scalar> result;
  for (int iter = 1; iter <= max_iterations; ++iter) {
    result.iterations = iter;
    if ((fb > 0) == (fc > 0)) {
      c = a;
      fc = fa;
      d = e = b - a;
    }
    if (std::abs(fc) < std::abs(fb)) {
      a = b;
      b = c;
      c = a;
      fa = fb;
      fb = fc;
      fc = fa;
    }
    const Scalar eps = std::numeric_limits<Scalar>::epsilon();
    Scalar tol = 2 * eps * std::abs(b) + xtol / 2;
    Scalar m = (c - b) / 2;
    if (std::abs(m) <= tol || fb == Scalar(0)) {
      result.root = b;
      result.f_at_root = fb;
      result.converged = true;
      return result;
    }
    if (std::abs(e) < tol || std::abs(fa) <= std::abs(fb)) {
      d = e = m;  // bisection
    } else {
      Scalar s = fb / fa, p, q;
      if (a == c) {
        p = 2 * m * s;  // secant
        q = 1 - s;
      } else {
        q = fa / fc;  // inverse quadratic interpolation
        Scalar r = fb / fc;
        p = s * (2 * m * q * (q - r) - (b - a) * (r - 1));
        q = (q - 1) * (r - 1) * (s - 1);
      }
      if (p > 0)
        q = -q;
      else
        p = -p;
      if (2 * p < std::min(3 * m * q - std::abs(tol * q), std::abs(e * q))) {
        e = d;
        d = p / q;
      } else {
        d = e = m;
      }
    }
    a = b;
    fa = fb;
    b += std::abs(d) > tol ? d : (m > 0 ? tol : -tol);
    fb = f(b);
  }
  result.root = b;
  result.f_at_root = fb;
  result.converged = false;
  return result;
}

}  // namespace infoagg
