#pragma once

// Linear-Gaussian conditioning for the trader's inference problem.
//
// Two routes are provided on purpose:
//  - condition_generic: a dense generalized-least-squares conditioner for an
//    arbitrary signal stack. This is the oracle; it knows nothing about the
//    model's closed forms.
//  - posterior_theta_report / posterior_theta_multi: the model's closed-form
//    posterior for the information set (x_i, y_i, Z), verbatim.
// The two must agree to 1e-10 on random draws; the oracle is ground truth.

#include <Eigen/Dense>
#include <cmath>
#include <type_traits>

#include "infoagg/errors.hpp"
#include "infoagg/model.hpp"

namespace infoagg {

// A stack of signals, each loading on one diffuse latent (the target) plus a
// set of proper-prior latent shocks:
//
//   observed = target_loading * theta + shock_loadings * u + noise,
//   u ~ N(0, shock_cov),  noise ~ N(0, noise_cov),  theta diffuse.
//
// The posterior of theta is the GLS estimate of the signal vector on the
// target loading with the shocks folded into the noise covariance.
// return_noise_variance is added to the posterior variance to produce the
// return variance (the unlearnable component never enters any signal).
template <typename Scalar = double>
struct JointGaussianObservation {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Vector target_loading;
  Matrix shock_loadings;
  Matrix shock_cov;
  Matrix noise_cov;
  Vector observed;
  Scalar return_noise_variance{0};
};

// One trader's information set: the private signal x, the m report readings
// y, and the price signal Z = (P - c)/a.
template <typename Scalar = double>
struct SignalSet {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Scalar x{0};
  Vector y;
  Scalar z{0};
};

// The informational content of the price: Z = (P - c)/a.
template <typename Scalar>
Scalar price_signal(const EquilibriumCoefficients<Scalar>& coeffs, Scalar price) {
  if (coeffs.a == Scalar(0))
    throw Error(ErrorCode::ZeroPriceLoading, "price function has zero loading on theta");
  return (price - coeffs.c) / coeffs.a;
}

// Exact conditional mean and variance of the diffuse target given all
// observed signals, by dense solve of the normal equations. Rejects stacked
// covariances with condition number above max_condition.
template <typename Scalar>
PosteriorBelief<Scalar> condition_generic(const JointGaussianObservation<Scalar>& obs,
                                          Scalar max_condition = Scalar(1e12)) {
  using Matrix = typename JointGaussianObservation<Scalar>::Matrix;
  using Vector = typename JointGaussianObservation<Scalar>::Vector;

  const auto n = obs.observed.size();
  if (obs.target_loading.size() != n || obs.noise_cov.rows() != n || obs.noise_cov.cols() != n)
    throw Error(ErrorCode::DimensionMismatch, "signal dimensions are inconsistent");
  if (obs.shock_loadings.rows() != n || obs.shock_loadings.cols() != obs.shock_cov.rows() ||
      obs.shock_cov.rows() != obs.shock_cov.cols())
    throw Error(ErrorCode::DimensionMismatch, "shock dimensions are inconsistent");
  if (!obs.noise_cov.isApprox(obs.noise_cov.transpose()) ||
      !obs.shock_cov.isApprox(obs.shock_cov.transpose()))
    throw Error(ErrorCode::DimensionMismatch, "covariance matrices must be symmetric");

  Matrix cov = obs.shock_loadings * obs.shock_cov * obs.shock_loadings.transpose() + obs.noise_cov;

  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  const auto& ev = eig.eigenvalues();
  Scalar lo = ev(0), hi = ev(n - 1);
  if (!(lo > Scalar(0)) || hi / lo > max_condition)
    throw Error(ErrorCode::SingularCovariance, "stacked signal covariance is singular");

  Eigen::LLT<Matrix> llt(cov);
  Vector weighted = llt.solve(obs.target_loading);
  // One step of iterative refinement keeps the solve accurate up against
  // the condition-number bound.
  weighted += llt.solve(obs.target_loading - cov * weighted);
  Scalar total_precision = obs.target_loading.dot(weighted);
  if (!(total_precision > Scalar(0)))
    throw Error(ErrorCode::SingularCovariance, "target loading carries no information");

  PosteriorBelief<Scalar> belief;
  belief.mean = weighted.dot(obs.observed) / total_precision;
  belief.variance_return = Scalar(1) / total_precision + obs.return_noise_variance;
  belief.determinant_alpha = ev.prod();
  return belief;
}

namespace detail {

// Scalar kernels run in extended precision when the scalar type allows it:
// the determinant alpha is a difference of same-order products and loses up
// to four digits near the parameter-range corners otherwise.
template <typename Scalar>
using wide_t = std::conditional_t<std::is_floating_point_v<Scalar>, long double, Scalar>;

// Shared kernel of the closed-form posterior (mean, return variance and the
// determinant alpha) for one report reading. beta = b/a is the price
// signal's loading on the common error; sigma_eps/sigma_y may already be the
// reduced (rescaled) values when m reports were averaged.
template <typename Scalar>
PosteriorBelief<Scalar> report_posterior_kernel(Scalar var_eta, Scalar sx2_in, Scalar sigma_eps,
                                                Scalar sigma_y, Scalar beta_in, Scalar x_in,
                                                Scalar y_in, Scalar z_in) {
  using W = wide_t<Scalar>;
  const W sx2 = sx2_in, se = sigma_eps, sy = sigma_y, beta = beta_in;
  const W x = x_in, y = y_in, z = z_in;
  const W se2 = se * se;
  const W sy2 = sy * sy;
  const W alpha = (sx2 + se2 + sy2) * (sx2 + beta * beta) - (sx2 + se * beta) * (sx2 + se * beta);
  if (!(alpha > W(0)))
    throw Error(ErrorCode::NonPositiveDeterminant, "signal covariance determinant is not positive");

  PosteriorBelief<Scalar> belief;
  belief.mean = static_cast<Scalar>(x + (beta * beta - beta * se) * (y - x) * sx2 / alpha +
                                    (sy2 + se2 - beta * se) * (z - x) * sx2 / alpha);
  belief.variance_return = static_cast<Scalar>(
      sx2 + W(var_eta) - sx2 * sx2 / alpha * (beta * beta - 2 * beta * se + se2 + sy2));
  belief.determinant_alpha = static_cast<Scalar>(alpha);
  return belief;
}

}  // namespace detail

// Closed-form posterior for the single-report economy, information set
// (x_i, y_i, Z).
template <typename Scalar>
PosteriorBelief<Scalar> posterior_theta_report(const ModelParams<Scalar>& params,
                                               const EquilibriumCoefficients<Scalar>& coeffs,
                                               const SignalSet<Scalar>& signals) {
  if (params.publishers != 1)
    throw Error(ErrorCode::WrongScenario, "posterior_theta_report requires exactly one publisher");
  if (coeffs.a == Scalar(0))
    throw Error(ErrorCode::ZeroPriceLoading, "price function has zero loading on theta");
  if (signals.y.size() != 1)
    throw Error(ErrorCode::DimensionMismatch, "signal set must carry one report reading");
  const Scalar beta = coeffs.b / coeffs.a;
  return detail::report_posterior_kernel(params.var_eta(), params.var_x(), params.sigma_eps,
                                         params.sigma_y, beta, signals.x, signals.y(0), signals.z);
}

// Closed-form posterior for m >= 1 reports via the sufficiency reduction:
// the m exchangeable readings enter only through their mean, with
// sigma_eps' = sigma_eps/sqrt(m), sigma_y' = sigma_y/sqrt(m) and the price
// signal's loading on the normalized common shock equal to b*sqrt(m).
template <typename Scalar>
PosteriorBelief<Scalar> posterior_theta_multi(const ModelParams<Scalar>& params,
                                              const EquilibriumCoefficients<Scalar>& coeffs,
                                              const SignalSet<Scalar>& signals) {
  const int m = params.publishers;
  if (m < 1)
    throw Error(ErrorCode::WrongScenario, "posterior_theta_multi requires at least one publisher");
  if (coeffs.a == Scalar(0))
    throw Error(ErrorCode::ZeroPriceLoading, "price function has zero loading on theta");
  if (signals.y.size() != m)
    throw Error(ErrorCode::DimensionMismatch, "signal set must carry one reading per publisher");
  const Scalar root_m = std::sqrt(Scalar(m));
  const Scalar beta = coeffs.b / coeffs.a * root_m;
  return detail::report_posterior_kernel(params.var_eta(), params.var_x(),
                                         params.sigma_eps / root_m, params.sigma_y / root_m, beta,
                                         signals.x, signals.y.mean(), signals.z);
}

// Posterior of a trader who ignores the report and conditions on (x_i, Z)
// only. Requires a noisy price signal (b != 0); the fully revealing case is
// degenerate and handled by the caller.
template <typename Scalar>
PosteriorBelief<Scalar> posterior_theta_price_only(const ModelParams<Scalar>& params,
                                                   const EquilibriumCoefficients<Scalar>& coeffs,
                                                   Scalar x, Scalar z) {
  if (coeffs.a == Scalar(0))
    throw Error(ErrorCode::ZeroPriceLoading, "price function has zero loading on theta");
  const Scalar beta = coeffs.b / coeffs.a;
  const int m = params.publishers < 1 ? 1 : params.publishers;
  const Scalar var_z = Scalar(m) * beta * beta;
  if (!(var_z > Scalar(0)))
    throw Error(ErrorCode::WrongScenario, "price signal is noiseless; posterior is degenerate");
  const Scalar prec = Scalar(1) / params.var_x() + Scalar(1) / var_z;
  PosteriorBelief<Scalar> belief;
  belief.mean = (x / params.var_x() + z / var_z) / prec;
  belief.variance_return = Scalar(1) / prec + params.var_eta();
  belief.determinant_alpha = params.var_x() * var_z;
  return belief;
}

}  // namespace infoagg
