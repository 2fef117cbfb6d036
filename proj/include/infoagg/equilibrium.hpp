#pragma once

// Analytic and numerical equilibrium solving: baseline price, two-root
// report economy, equilibrium selection, instability probe, price precision,
// publisher theta-recovery and the m-publisher sweep.
//
// Closed forms are primary everywhere; the bracketed root finder and the
// unreduced-stack weight computation run as independent checks.

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "infoagg/errors.hpp"
#include "infoagg/gaussian.hpp"
#include "infoagg/model.hpp"
#include "infoagg/roots.hpp"

namespace infoagg {

template <typename Scalar = double>
struct FixedPointDiagnostics {
  std::vector<Scalar> roots;  // all fixed points of the loading map; contains 0 when m >= 1
  Scalar selected{0};         // the equilibrium chosen by the selection rule
  Scalar residual{0};         // |T(selected) - selected|
  int iterations{0};          // iterations spent by the confirming root finder
  bool degenerate{false};     // sigma_eps == 0: only the zero root exists
};

template <typename Scalar = double>
struct ReportEquilibrium {
  EquilibriumCoefficients<Scalar> coefficients;
  FixedPointDiagnostics<Scalar> diagnostics;
};

template <typename Scalar = double>
struct PrecisionCurve {
  struct Point {
    int m{0};
    Precision<Scalar> alpha_z{Precision<Scalar>::infinite()};
    Scalar b{0};
  };
  std::vector<Point> points;
  int argmin_m{0};  // m minimizing the finite alpha_z entries
};

template <typename Scalar = double>
struct StabilityReport {
  Scalar delta{0};
  Scalar t_delta{0};
  Scalar expansion{0};              // T(delta) - delta; positive at an unstable root
  std::vector<Scalar> trajectory;   // plain iteration b_{k+1} = T(b_k) from b_0 = delta
  Scalar limit{0};
  int iterations{0};
  bool converged{false};
  Scalar damped_limit{0};           // same probe under b <- b/2 + T(b)/2
  int damped_iterations{0};
  bool damped_converged{false};
};

template <typename Scalar = double>
struct RecoveredFundamental {
  Scalar theta{0};
  Scalar epsilon{0};
};

template <typename Scalar = double>
struct VectorFixedPointResult {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> loadings;
  int iterations{0};
  bool converged{false};
  Scalar price_weight{0};  // GLS weight on the price signal at the limit; 1 at equilibrium
};

// Baseline economy (m = 0): the price fully reveals the fundamental and
// P = theta - gamma*sigma_eta^2*K.
template <typename Scalar>
EquilibriumCoefficients<Scalar> solve_baseline(const ModelParams<Scalar>& params) {
  validate(params);
  if (params.publishers != 0)
    throw Error(ErrorCode::WrongScenario, "solve_baseline requires zero publishers");
  EquilibriumCoefficients<Scalar> coeffs;
  coeffs.a = Scalar(1);
  coeffs.b = Scalar(0);
  coeffs.posterior_variance = params.var_eta();
  coeffs.c = -params.gamma * params.var_eta() * params.supply;
  return coeffs;
}

// The report-loading map T(b) = (1/alpha(b)) * (sigma_y^2 + sigma_eps^2 -
// b*sigma_eps) * b * sigma_x^2, with a = 1. Its fixed points are the
// equilibrium loadings of the single-report economy.
template <typename Scalar>
Scalar fixed_point_map(const ModelParams<Scalar>& params, Scalar b_in) {
  using W = detail::wide_t<Scalar>;
  const W sx2 = W(params.sigma_x) * W(params.sigma_x);
  const W se = params.sigma_eps;
  const W sy2 = W(params.sigma_y) * W(params.sigma_y);
  const W b = b_in;
  const W alpha = (sx2 + se * se + sy2) * (sx2 + b * b) - (sx2 + se * b) * (sx2 + se * b);
  if (!(alpha > W(0)))
    throw Error(ErrorCode::NonPositiveDeterminant, "signal covariance determinant is not positive");
  return static_cast<Scalar>((sy2 + se * se - b * se) * b * sx2 / alpha);
}

namespace detail {

// Symmetric equilibrium of the m-report economy via the sufficiency
// reduction. Shared by solve_report (m = 1) and solve_multi (m >= 1).
template <typename Scalar>
ReportEquilibrium<Scalar> solve_symmetric(const ModelParams<Scalar>& params) {
  validate(params);
  const int m = params.publishers;

  ReportEquilibrium<Scalar> result;
  result.coefficients.a = Scalar(1);

  if (params.fully_revealing_report()) {
    // No common error to load on: only the zero root exists and the price
    // reveals theta, as in the baseline economy.
    result.coefficients.b = Scalar(0);
    result.coefficients.posterior_variance = params.var_eta();
    result.coefficients.c = -params.gamma * params.var_eta() * params.supply;
    result.diagnostics.roots = {Scalar(0)};
    result.diagnostics.degenerate = true;
    return result;
  }
  if (params.sigma_y == Scalar(0))
    throw Error(ErrorCode::NonPositiveDeterminant,
                "zero reading noise: the price signal duplicates the report and the "
                "signal stack is singular at the nonzero root");

  const Scalar root_m = std::sqrt(Scalar(m));
  ModelParams<Scalar> reduced = params;
  reduced.sigma_eps = params.sigma_eps / root_m;
  reduced.sigma_y = params.sigma_y / root_m;
  reduced.publishers = 1;

  // Per-report loading; equals the reduced-economy loading divided by
  // sqrt(m). Evaluated wide and rounded once: the fixed-point residual is
  // amplified by |T'(b*)-1|, which reaches ~5e3 at the corners of the
  // supported parameter range, so every spare ulp in b matters.
  using W = detail::wide_t<Scalar>;
  const Scalar sx2 = params.var_x();
  const W sx2_w = W(params.sigma_x) * W(params.sigma_x);
  const W sy2_w = W(params.sigma_y) * W(params.sigma_y);
  const W b_wide = sx2_w * W(params.sigma_eps) / (W(m) * sx2_w + sy2_w);
  const Scalar b = static_cast<Scalar>(b_wide);
  const Scalar b_reduced = static_cast<Scalar>(b_wide * std::sqrt(W(m)));

  // Independent confirmation: bracketed root of T(b') - b' over (0, sigma_eps'].
  auto gap = [&](Scalar v) { return fixed_point_map(reduced, v) - v; };
  const Scalar lo = std::min(Scalar(1e-9), b_reduced / 2);
  auto numeric = find_root_bracketed<Scalar>(gap, lo, reduced.sigma_eps, Scalar(1e-13), 200);
  if (!numeric.converged || std::abs(numeric.root - b_reduced) > Scalar(1e-12))
    throw Error(ErrorCode::NoConvergence, "numerical root disagrees with the closed form");

  result.coefficients.b = b;
  result.coefficients.posterior_variance =
      detail::report_posterior_kernel(params.var_eta(), sx2, reduced.sigma_eps, reduced.sigma_y,
                                      b_reduced, Scalar(0), Scalar(0), Scalar(0))
          .variance_return;
  result.coefficients.c = -params.gamma * params.supply * result.coefficients.posterior_variance;

  result.diagnostics.roots = {Scalar(0), b};
  result.diagnostics.selected = b;
  result.diagnostics.residual = std::abs(fixed_point_map(reduced, b_reduced) - b_reduced);
  result.diagnostics.iterations = numeric.iterations;
  return result;
}

// GLS weight on the price signal given the full (2+m)-signal stack
// (x, y_1..y_m, Z) with per-report price loadings b. Computed directly on
// the unreduced economy; used by the vector fixed point and its root check.
template <typename Scalar>
Scalar price_signal_weight(const ModelParams<Scalar>& params,
                           const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& loadings) {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const auto m = loadings.size();
  const auto n = m + 2;
  Matrix cov = Matrix::Zero(n, n);
  cov(0, 0) = params.var_x();
  for (Eigen::Index k = 0; k < m; ++k) {
    cov(1 + k, 1 + k) = params.var_eps() + params.var_y();
    cov(1 + k, n - 1) = cov(n - 1, 1 + k) = loadings(k) * params.sigma_eps;
  }
  cov(n - 1, n - 1) = loadings.squaredNorm();
  Vector ones = Vector::Ones(n);
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success)
    throw Error(ErrorCode::SingularCovariance, "stacked signal covariance is singular");
  Vector weighted = llt.solve(ones);
  return weighted(n - 1) / ones.dot(weighted);
}

}  // namespace detail

// Single-report economy (m = 1). Returns both equilibrium roots and the
// selected nonzero loading; at sigma_eps = 0 the degenerate fully-revealing
// equilibrium is returned flagged, not as an error.
template <typename Scalar>
ReportEquilibrium<Scalar> solve_report(const ModelParams<Scalar>& params) {
  if (params.publishers != 1)
    throw Error(ErrorCode::WrongScenario, "solve_report requires exactly one publisher");
  return detail::solve_symmetric(params);
}

// Symmetric m-report economy, m >= 1. The m = 1 path coincides with
// solve_report exactly.
template <typename Scalar>
ReportEquilibrium<Scalar> solve_multi(const ModelParams<Scalar>& params) {
  if (params.publishers < 1)
    throw Error(ErrorCode::WrongScenario, "solve_multi requires at least one publisher");
  return detail::solve_symmetric(params);
}

// Probes the instability of the ignore-the-report equilibrium: T expands
// away from b = 0 and the iteration climbs to the nonzero root. Escaping
// the unstable root is slow (the step near 0 is quadratic in b, so leaving
// a delta-neighborhood costs on the order of 1/delta iterations); the
// default cap accommodates delta down to ~1e-5 * b*.
template <typename Scalar>
StabilityReport<Scalar> stability_probe(const ModelParams<Scalar>& params, Scalar delta,
                                        int max_iterations = 250000) {
  if (params.publishers != 1)
    throw Error(ErrorCode::WrongScenario, "stability_probe requires exactly one publisher");
  if (params.fully_revealing_report())
    throw Error(ErrorCode::WrongScenario, "stability_probe requires sigma_eps > 0");
  const auto equilibrium = solve_report(params);
  const Scalar b_star = equilibrium.diagnostics.selected;
  if (!(delta > Scalar(0)) || !(delta < b_star / 2))
    throw Error(ErrorCode::WrongScenario, "delta must lie in (0, b*/2)");

  StabilityReport<Scalar> report;
  report.delta = delta;
  report.t_delta = fixed_point_map(params, delta);
  report.expansion = report.t_delta - delta;

  constexpr Scalar kTolerance = Scalar(1e-12);

  Scalar b = delta;
  report.trajectory.push_back(b);
  while (std::abs(b - b_star) > kTolerance && report.iterations < max_iterations) {
    b = fixed_point_map(params, b);
    report.trajectory.push_back(b);
    ++report.iterations;
  }
  report.limit = b;
  report.converged = std::abs(b - b_star) <= kTolerance;

  b = delta;
  while (std::abs(b - b_star) > kTolerance && report.damped_iterations < max_iterations) {
    b = (b + fixed_point_map(params, b)) / 2;
    ++report.damped_iterations;
  }
  report.damped_limit = b;
  report.damped_converged = std::abs(b - b_star) <= kTolerance;
  return report;
}

// Precision of the price as a signal of theta: infinite when the price
// carries no common noise, else 1/(m*b^2) for the symmetric price
// P = theta + b*sum_k eps_k + c.
template <typename Scalar>
Precision<Scalar> price_precision(const ModelParams<Scalar>& params,
                                  const EquilibriumCoefficients<Scalar>& coeffs) {
  if (params.publishers == 0 || coeffs.b == Scalar(0)) return Precision<Scalar>::infinite();
  const Scalar beta = coeffs.b / coeffs.a;
  return Precision<Scalar>::finite(Scalar(1) / (Scalar(params.publishers) * beta * beta));
}

// The same quantity for the single-report economy via the precision route
// alpha_eps * (1 + alpha_x/alpha_y)^2. Both routes must agree for m = 1.
template <typename Scalar>
Precision<Scalar> price_precision_formula(const ModelParams<Scalar>& params) {
  if (params.publishers != 1)
    throw Error(ErrorCode::WrongScenario, "precision formula applies to the one-report economy");
  if (params.fully_revealing_report()) return Precision<Scalar>::infinite();
  const Scalar ratio = params.var_y() / params.var_x();  // alpha_x / alpha_y
  const Scalar one_plus = Scalar(1) + ratio;
  return Precision<Scalar>::finite(one_plus * one_plus / params.var_eps());
}

// The publisher's exact recovery of (theta, eps) from his own signal and the
// price: solves {Z = theta + (b/a)*eps, x_j = theta + sigma_eps*eps}.
template <typename Scalar>
RecoveredFundamental<Scalar> recover_theta(const ModelParams<Scalar>& params,
                                           const EquilibriumCoefficients<Scalar>& coeffs,
                                           Scalar x_j, Scalar price) {
  if (params.publishers != 1)
    throw Error(ErrorCode::WrongScenario, "recovery requires exactly one publisher");
  if (params.fully_revealing_report())
    throw Error(ErrorCode::WrongScenario, "recovery requires sigma_eps > 0");
  if (params.sigma_y == Scalar(0))
    throw Error(ErrorCode::DegenerateRecovery,
                "zero reading noise: the price signal coincides with the publisher's "
                "signal and the system is rank-deficient");
  const Scalar z = price_signal(coeffs, price);
  const Scalar ratio = coeffs.b / coeffs.a / params.sigma_eps;
  const Scalar denom = Scalar(1) - ratio;
  if (std::abs(denom) < Scalar(1e-12))
    throw Error(ErrorCode::DegenerateRecovery, "price signal coincides with the publisher's signal");
  RecoveredFundamental<Scalar> recovered;
  recovered.theta = (z - ratio * x_j) / denom;
  recovered.epsilon = (x_j - recovered.theta) / params.sigma_eps;
  return recovered;
}

// Damped iteration on the per-report loading vector of the unreduced
// m-economy. One step applies the market-clearing best response (every
// loading is scaled by the GLS weight on the price signal) followed by
// averaging over the exchangeable reports; the unique attractor is the
// symmetric equilibrium, reached from asymmetric starts.
template <typename Scalar>
VectorFixedPointResult<Scalar> vector_fixed_point(const ModelParams<Scalar>& params,
                                                  Scalar omega = Scalar(0.5),
                                                  Scalar tolerance = Scalar(1e-12),
                                                  int max_iterations = 10000) {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const int m = params.publishers;
  if (m < 1)
    throw Error(ErrorCode::WrongScenario, "vector fixed point requires at least one publisher");
  if (params.fully_revealing_report() || params.sigma_y == Scalar(0))
    throw Error(ErrorCode::WrongScenario, "vector fixed point requires sigma_eps > 0, sigma_y > 0");

  const Scalar b_sym =
      params.var_x() * params.sigma_eps / (Scalar(m) * params.var_x() + params.var_y());

  VectorFixedPointResult<Scalar> result;
  result.loadings = Vector(m);
  for (int k = 0; k < m; ++k)
    result.loadings(k) = b_sym * (Scalar(1) + Scalar(0.1) * Scalar(k + 1) / Scalar(m));

  for (result.iterations = 0; result.iterations < max_iterations; ++result.iterations) {
    const Scalar weight = detail::price_signal_weight(params, result.loadings);
    Vector next = (Scalar(1) - omega) * result.loadings +
                  omega * weight * result.loadings.mean() * Vector::Ones(m);
    const Scalar step = (next - result.loadings).template lpNorm<Eigen::Infinity>();
    result.loadings = next;
    if (step <= tolerance) {
      result.converged = true;
      break;
    }
  }
  result.price_weight = detail::price_signal_weight(params, result.loadings);
  return result;
}

// Direct confirmation of the symmetric loading on the unreduced stack:
// bracketed root of (weight on Z at loadings t*1) - 1 = 0. Independent of
// the sufficiency-reduction algebra.
template <typename Scalar>
Scalar symmetric_loading_root(const ModelParams<Scalar>& params) {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const int m = params.publishers;
  if (m < 1 || params.fully_revealing_report() || params.sigma_y == Scalar(0))
    throw Error(ErrorCode::WrongScenario, "symmetric loading root requires a noisy report economy");
  const Scalar b_sym =
      params.var_x() * params.sigma_eps / (Scalar(m) * params.var_x() + params.var_y());
  auto gap = [&](Scalar t) {
    return detail::price_signal_weight<Scalar>(params, Vector::Constant(m, t)) - Scalar(1);
  };
  const Scalar lo = std::min(Scalar(1e-9), b_sym / 2);
  auto numeric = find_root_bracketed<Scalar>(gap, lo, params.sigma_eps, Scalar(1e-14), 200);
  if (!numeric.converged)
    throw Error(ErrorCode::NoConvergence, "symmetric loading root did not converge");
  return numeric.root;
}

// Price informativeness across m = 0..m_max. The m = 0 entry is the fully
// revealing baseline; argmin_m minimizes the finite entries.
template <typename Scalar>
PrecisionCurve<Scalar> precision_sweep(const ModelParams<Scalar>& params, int m_max) {
  if (m_max < 1) throw Error(ErrorCode::WrongScenario, "m_max must be >= 1");
  if (params.fully_revealing_report())
    throw Error(ErrorCode::WrongScenario, "precision sweep requires sigma_eps > 0");

  PrecisionCurve<Scalar> curve;
  ModelParams<Scalar> scenario = params;

  scenario.publishers = 0;
  auto baseline = solve_baseline(scenario);
  curve.points.push_back({0, price_precision(scenario, baseline), baseline.b});

  bool have_min = false;
  Scalar best = Scalar(0);
  for (int m = 1; m <= m_max; ++m) {
    scenario.publishers = m;
    auto equilibrium = solve_multi(scenario);
    auto alpha_z = price_precision(scenario, equilibrium.coefficients);
    curve.points.push_back({m, alpha_z, equilibrium.coefficients.b});
    if (!alpha_z.is_infinite() && (!have_min || alpha_z.value() < best)) {
      best = alpha_z.value();
      curve.argmin_m = m;
      have_min = true;
    }
  }
  return curve;
}

}  // namespace infoagg
