#pragma once

// Exogenous parameters and the shared value types of the asset-market model.
// Everything here is immutable after construction and safe to share across
// threads; the only computation is validation and precision/variance
// conversion.

#include <cmath>
#include <string>

#include "infoagg/errors.hpp"

namespace infoagg {

// All exogenous scalars of the economy. Sigmas are standard deviations.
template <typename Scalar = double>
struct ModelParams {
  Scalar sigma_eta{1};   // std dev of the unlearnable return component eta
  Scalar sigma_x{1};     // std dev of the private-signal noise xi_i
  Scalar sigma_eps{1};   // std dev of the common report error eps
  Scalar sigma_y{1};     // std dev of the idiosyncratic reading noise tau_i
  Scalar gamma{1};       // absolute risk aversion
  Scalar supply{1};      // aggregate share supply K (per capita)
  int publishers{0};     // number of published reports m; 0 = baseline economy

  Scalar var_eta() const { return sigma_eta * sigma_eta; }
  Scalar var_x() const { return sigma_x * sigma_x; }
  Scalar var_eps() const { return sigma_eps * sigma_eps; }
  Scalar var_y() const { return sigma_y * sigma_y; }

  // A report with no common error: the equilibrium price carries no common
  // noise and reveals the fundamental exactly.
  bool fully_revealing_report() const { return sigma_eps == Scalar(0); }

  // Both error components vanish: every reading of the report equals the
  // fundamental itself.
  bool exact_report() const { return sigma_eps == Scalar(0) && sigma_y == Scalar(0); }
};

template <typename Scalar>
ModelParams<Scalar> validate(const ModelParams<Scalar>& params) {
  if (!(params.sigma_eta > Scalar(0)))
    throw Error(ErrorCode::NonPositiveStdDev, "sigma_eta must be > 0");
  if (!(params.sigma_x > Scalar(0)))
    throw Error(ErrorCode::NonPositiveStdDev, "sigma_x must be > 0");
  if (!(params.gamma > Scalar(0)))
    throw Error(ErrorCode::NonPositiveStdDev, "gamma must be > 0");
  if (params.sigma_eps < Scalar(0))
    throw Error(ErrorCode::NegativeStdDev, "sigma_eps must be >= 0");
  if (params.sigma_y < Scalar(0))
    throw Error(ErrorCode::NegativeStdDev, "sigma_y must be >= 0");
  if (params.publishers < 0)
    throw Error(ErrorCode::NegativePublishers, "publishers must be >= 0");
  return params;
}

// Informativeness of a signal: either a finite positive precision or the
// fully revealing state. Kept as a tagged value so sweeps that include the
// baseline economy never push IEEE infinities through arithmetic.
template <typename Scalar = double>
class Precision {
 public:
  static Precision infinite() { return Precision(true, Scalar(0)); }

  static Precision finite(Scalar value) {
    if (!(value > Scalar(0)))
      throw Error(ErrorCode::NonPositiveStdDev, "finite precision must be > 0");
    return Precision(false, value);
  }

  bool is_infinite() const { return infinite_; }

  // Finite value; calling this on the fully revealing state is a logic error.
  Scalar value() const {
    if (infinite_)
      throw Error(ErrorCode::WrongScenario, "precision is infinite (fully revealing)");
    return value_;
  }

  friend bool operator==(const Precision& a, const Precision& b) {
    return a.infinite_ == b.infinite_ && (a.infinite_ || a.value_ == b.value_);
  }

 private:
  Precision(bool infinite, Scalar value) : infinite_(infinite), value_(value) {}

  bool infinite_;
  Scalar value_;
};

// 1/sigma^2, with sigma = 0 mapping to the fully revealing state.
template <typename Scalar>
Precision<Scalar> precision_of(Scalar sigma) {
  if (sigma < Scalar(0)) throw Error(ErrorCode::NegativeStdDev, "sigma must be >= 0");
  if (sigma == Scalar(0)) return Precision<Scalar>::infinite();
  return Precision<Scalar>::finite(Scalar(1) / (sigma * sigma));
}

// Coefficients of the affine price function P = a*theta + b*sum_k eps_k + c.
// b is the loading on each common error; by symmetry one scalar covers all
// publishers. posterior_variance is Var(theta~ | x_i, y_i, Z) at equilibrium.
template <typename Scalar = double>
struct EquilibriumCoefficients {
  Scalar a{1};
  Scalar b{0};
  Scalar c{0};
  Scalar posterior_variance{0};
};

// Conditional moments of the return given an information set.
// variance_return includes the unlearnable component's variance, so
// var_eta <= variance_return always. determinant_alpha is the determinant of
// the (positive definite) stacked signal covariance used in the solve.
template <typename Scalar = double>
struct PosteriorBelief {
  Scalar mean{0};
  Scalar variance_return{0};
  Scalar determinant_alpha{0};
};

}  // namespace infoagg
