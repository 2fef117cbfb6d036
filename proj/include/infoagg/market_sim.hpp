#pragma once

// Finite-agent Monte Carlo: draws shocks, computes each agent's demand from
// the closed-form posteriors, checks market clearing against the analytic
// price, estimates the price-signal precision empirically and verifies the
// strong-law aggregation endpoint.
//
// Replications are pure functions of (config, rep_index); see rng.hpp for
// the determinism contract.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <thread>
#include <vector>

#include "infoagg/equilibrium.hpp"
#include "infoagg/errors.hpp"
#include "infoagg/gaussian.hpp"
#include "infoagg/model.hpp"
#include "infoagg/rng.hpp"

namespace infoagg {

// The fundamental for a run: a fixed value or a normal sampling spec.
struct ThetaSpec {
  enum class Kind { Fixed, Normal };

  Kind kind{Kind::Fixed};
  double value{0};
  double mean{0};
  double std{1};

  static ThetaSpec fixed(double v) { return {Kind::Fixed, v, 0, 1}; }
  static ThetaSpec normal(double mean, double std) { return {Kind::Normal, 0, mean, std}; }
};

struct ScenarioConfig {
  ModelParams<double> params;
  ThetaSpec theta;
  int n_agents{1000};
  int n_reps{1};
  std::uint64_t seed{0};
  // Fraction of agents forced to ignore the report. lambda = 1 reduces to
  // the baseline economy; interior values keep the report equilibrium's
  // price function and only blend the agents' conditioning rules.
  double lambda{0};
};

struct RepOutcome {
  double theta{0};
  Eigen::VectorXd eps;           // common report errors eps_1..eps_m
  double price_analytic{0};
  double clearing_residual{0};   // mean demand - K at the analytic price
  double price_root{0};          // price solving mean demand = K for this sample
  double z_residual{0};          // Z - theta; identically 0 for m = 0
};

struct PrecisionEstimate {
  Precision<double> alpha_hat{Precision<double>::infinite()};
  double std_error{0};
  int n_reps_used{0};
};

inline ScenarioConfig validate(const ScenarioConfig& config) {
  validate(config.params);
  if (config.n_agents < 100)
    throw Error(ErrorCode::WrongScenario, "n_agents must be >= 100");
  if (config.n_reps < 1) throw Error(ErrorCode::WrongScenario, "n_reps must be >= 1");
  if (config.lambda < 0 || config.lambda > 1)
    throw Error(ErrorCode::WrongScenario, "lambda must lie in [0, 1]");
  if (config.theta.kind == ThetaSpec::Kind::Normal && !(config.theta.std >= 0))
    throw Error(ErrorCode::WrongScenario, "theta sampling std must be >= 0");
  return config;
}

namespace detail {

inline double draw_theta(const ScenarioConfig& config, std::uint64_t rep) {
  if (config.theta.kind == ThetaSpec::Kind::Fixed) return config.theta.value;
  return config.theta.mean +
         config.theta.std * rng::keyed_normal(config.seed, rep, rng::kGlobalAgent,
                                              rng::Stream::Theta, 0);
}

// The price function the replication runs under. lambda = 1 means every
// agent ignores the report, which is the baseline economy again.
inline EquilibriumCoefficients<double> scenario_coefficients(const ScenarioConfig& config) {
  const int m = config.params.publishers;
  if (m == 0 || config.lambda >= 1.0) {
    EquilibriumCoefficients<double> coeffs;
    coeffs.a = 1;
    coeffs.b = 0;
    coeffs.posterior_variance = config.params.var_eta();
    coeffs.c = -config.params.gamma * config.params.var_eta() * config.params.supply;
    return coeffs;
  }
  return solve_multi(config.params).coefficients;
}

}  // namespace detail

// One replication: draw the fundamental, the common errors and the agents'
// idiosyncratic shocks; evaluate demands at the analytic price and solve the
// sample's own clearing price (demand is affine in the price, with the
// posterior means frozen at the analytic price signal).
inline RepOutcome run_replication(const ScenarioConfig& config, int rep_index) {
  validate(config);
  const auto& params = config.params;
  const int m = params.publishers;
  const auto rep = static_cast<std::uint64_t>(rep_index);
  const auto coeffs = detail::scenario_coefficients(config);

  RepOutcome outcome;
  outcome.theta = detail::draw_theta(config, rep);
  outcome.eps = Eigen::VectorXd(m);
  double eps_sum = 0;  // plain left-to-right sum, shared with the lean estimator
  for (int k = 0; k < m; ++k) {
    outcome.eps(k) =
        rng::keyed_normal(config.seed, rep, rng::kGlobalAgent, rng::Stream::CommonError, k);
    eps_sum += outcome.eps(k);
  }

  outcome.price_analytic = coeffs.a * outcome.theta + coeffs.b * eps_sum + coeffs.c;
  const double z = price_signal(coeffs, outcome.price_analytic);
  outcome.z_residual = z - outcome.theta;

  if (coeffs.b == 0.0) {
    // Fully revealing price: every posterior equals theta and demand has no
    // idiosyncratic term, so the sample clears exactly.
    const double variance = params.var_eta();
    const double demand = (outcome.theta - outcome.price_analytic) / (params.gamma * variance);
    outcome.clearing_residual = demand - params.supply;
    outcome.price_root = outcome.theta - params.gamma * variance * params.supply;
    return outcome;
  }

  const int n = config.n_agents;
  double sum_demand = 0;
  double sum_mean_over_var = 0;
  double sum_inv_var = 0;
  SignalSet<double> signals;
  signals.y = Eigen::VectorXd(m);
  signals.z = z;
  for (int i = 0; i < n; ++i) {
    const auto agent = static_cast<std::uint64_t>(i);
    const double xi =
        rng::keyed_normal(config.seed, rep, agent, rng::Stream::PrivateSignal, 0);
    signals.x = outcome.theta + params.sigma_x * xi;

    PosteriorBelief<double> belief;
    if (static_cast<double>(i) < config.lambda * n) {
      belief = posterior_theta_price_only(params, coeffs, signals.x, z);
    } else {
      for (int k = 0; k < m; ++k) {
        const double tau =
            rng::keyed_normal(config.seed, rep, agent, rng::Stream::ReadingNoise, k);
        signals.y(k) = outcome.theta + params.sigma_eps * outcome.eps(k) + params.sigma_y * tau;
      }
      belief = posterior_theta_multi(params, coeffs, signals);
    }

    const double gv = params.gamma * belief.variance_return;
    sum_demand += (belief.mean - outcome.price_analytic) / gv;
    sum_mean_over_var += belief.mean / gv;
    sum_inv_var += 1.0 / gv;
  }
  outcome.clearing_residual = sum_demand / n - params.supply;
  // mean demand = K  <=>  P = (mean(E/(gamma V)) - K) / mean(1/(gamma V))
  outcome.price_root = (sum_mean_over_var / n - params.supply) / (sum_inv_var / n);
  return outcome;
}

// Runs all replications on the requested number of workers. Outcomes are
// stored by rep index, so the result is identical for any worker count.
inline std::vector<RepOutcome> run_scenario(const ScenarioConfig& config, int workers = 1) {
  validate(config);
  std::vector<RepOutcome> outcomes(static_cast<std::size_t>(config.n_reps));
  if (workers < 1) workers = 1;
  if (workers == 1) {
    for (int rep = 0; rep < config.n_reps; ++rep) outcomes[rep] = run_replication(config, rep);
    return outcomes;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (int rep = w; rep < config.n_reps; rep += workers)
        outcomes[rep] = run_replication(config, rep);
    });
  }
  for (auto& t : pool) t.join();
  return outcomes;
}

// Empirical counterpart of the price precision: 1 / sample variance of the
// residual Z - theta across replications. Requires a fixed fundamental so
// the residual is pure common noise, and enough replications for the
// chi-square standard error to be meaningful.
inline PrecisionEstimate estimate_price_precision(const ScenarioConfig& config) {
  validate(config);
  const auto& params = config.params;
  if (params.publishers < 1 || params.fully_revealing_report())
    throw Error(ErrorCode::WrongScenario,
                "precision estimation requires m >= 1 and sigma_eps > 0");
  if (config.theta.kind != ThetaSpec::Kind::Fixed)
    throw Error(ErrorCode::WrongScenario, "precision estimation requires a fixed theta");
  if (config.lambda >= 1.0)
    throw Error(ErrorCode::WrongScenario,
                "lambda = 1 is the baseline economy; its price is fully revealing");
  if (config.n_reps < 1000)
    throw Error(ErrorCode::InsufficientReps, "precision estimation requires n_reps >= 1000");

  const auto coeffs = detail::scenario_coefficients(config);
  const int m = params.publishers;
  double sum_sq = 0;
  for (int rep = 0; rep < config.n_reps; ++rep) {
    double eps_sum = 0;
    for (int k = 0; k < m; ++k)
      eps_sum += rng::keyed_normal(config.seed, static_cast<std::uint64_t>(rep),
                                   rng::kGlobalAgent, rng::Stream::CommonError, k);
    const double price = coeffs.a * config.theta.value + coeffs.b * eps_sum + coeffs.c;
    const double residual = price_signal(coeffs, price) - config.theta.value;
    sum_sq += residual * residual;
  }
  const double variance = sum_sq / config.n_reps;  // residual has known zero mean
  PrecisionEstimate estimate;
  estimate.n_reps_used = config.n_reps;
  estimate.alpha_hat = Precision<double>::finite(1.0 / variance);
  estimate.std_error = estimate.alpha_hat.value() * std::sqrt(2.0 / config.n_reps);
  return estimate;
}

struct LlnResult {
  double estimate{0};
  double abs_error{0};
};

// Mean of n published signals y_i = theta + sigma_x*xi_i + sigma_y*tau_i:
// the strong-law route to the fundamental.
inline LlnResult lln_aggregate(const ModelParams<double>& params, double theta,
                               std::int64_t n_reports, std::uint64_t seed) {
  if (n_reports < 1) throw Error(ErrorCode::WrongScenario, "n_reports must be >= 1");
  double sum = 0;
  for (std::int64_t i = 0; i < n_reports; ++i) {
    const auto idx = static_cast<std::uint64_t>(i);
    sum += theta +
           params.sigma_x * rng::keyed_normal(seed, 0, rng::kGlobalAgent,
                                              rng::Stream::LlnSignal, idx) +
           params.sigma_y * rng::keyed_normal(seed, 0, rng::kGlobalAgent,
                                              rng::Stream::LlnReading, idx);
  }
  LlnResult result;
  result.estimate = sum / static_cast<double>(n_reports);
  result.abs_error = std::abs(result.estimate - theta);
  return result;
}

struct RecoveryRep {
  double theta{0};
  double theta_hat{0};
  double eps{0};
  double eps_hat{0};
};

struct PublisherAdvantageReport {
  double max_recovery_error{0};       // max |theta_hat - theta| across reps
  double max_epsilon_error{0};
  double publisher_variance{0};       // var_eta: theta recovered exactly
  double nonpublisher_variance{0};    // the report economy's posterior variance
  double variance_gap{0};             // strictly positive when sigma_y > 0
  int n_reps{0};
  std::vector<RecoveryRep> reps;
};

// The publisher inverts {price, own signal} and recovers theta exactly; the
// other traders carry the report economy's noisy posterior.
inline PublisherAdvantageReport publisher_advantage_demo(const ScenarioConfig& config) {
  validate(config);
  const auto& params = config.params;
  if (params.publishers != 1)
    throw Error(ErrorCode::WrongScenario, "publisher demo requires exactly one publisher");
  if (params.sigma_y == 0.0)
    throw Error(ErrorCode::DegenerateRecovery,
                "zero reading noise: the publisher's two equations coincide");
  const auto equilibrium = solve_report(params);
  const auto& coeffs = equilibrium.coefficients;

  PublisherAdvantageReport report;
  report.n_reps = config.n_reps;
  report.publisher_variance = params.var_eta();
  report.nonpublisher_variance = coeffs.posterior_variance;
  report.variance_gap = report.nonpublisher_variance - report.publisher_variance;

  for (int rep = 0; rep < config.n_reps; ++rep) {
    const auto r = static_cast<std::uint64_t>(rep);
    const double theta = detail::draw_theta(config, r);
    const double eps =
        rng::keyed_normal(config.seed, r, rng::kGlobalAgent, rng::Stream::CommonError, 0);
    const double x_j = theta + params.sigma_eps * eps;  // the published signal itself
    const double price = coeffs.a * theta + coeffs.b * eps + coeffs.c;
    const auto recovered = recover_theta(params, coeffs, x_j, price);
    report.max_recovery_error = std::max(report.max_recovery_error,
                                         std::abs(recovered.theta - theta));
    report.max_epsilon_error =
        std::max(report.max_epsilon_error, std::abs(recovered.epsilon - eps));
    report.reps.push_back({theta, recovered.theta, eps, recovered.epsilon});
  }
  return report;
}

}  // namespace infoagg
