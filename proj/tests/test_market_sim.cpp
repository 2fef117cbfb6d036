#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "infoagg/market_sim.hpp"

using namespace infoagg;

namespace {

ScenarioConfig unit_scenario(int m, double theta, int n_agents = 1000, int n_reps = 1,
                             std::uint64_t seed = 7) {
  ScenarioConfig config;
  config.params.sigma_eta = 1;
  config.params.sigma_x = 1;
  config.params.sigma_eps = 1;
  config.params.sigma_y = 1;
  config.params.gamma = 2;
  config.params.supply = 1;
  config.params.publishers = m;
  config.theta = ThetaSpec::fixed(theta);
  config.n_agents = n_agents;
  config.n_reps = n_reps;
  config.seed = seed;
  return config;
}

// Weights of the report-economy posterior on (y - x) and (Z - x); the
// aggregate posterior mean is theta + (w_y*sigma_eps + w_z*b)*eps.
struct AggregateWeights {
  double w_y;
  double w_z;
  double agent_std;  // std of the idiosyncratic part of an agent's posterior mean
};

AggregateWeights report_weights(const ModelParams<double>& p, double b) {
  const double sx2 = p.var_x();
  const double alpha =
      (sx2 + p.var_eps() + p.var_y()) * (sx2 + b * b) - (sx2 + p.sigma_eps * b) * (sx2 + p.sigma_eps * b);
  AggregateWeights w;
  w.w_y = (b * b - b * p.sigma_eps) * sx2 / alpha;
  w.w_z = (p.var_y() + p.var_eps() - b * p.sigma_eps) * sx2 / alpha;
  const double w_x = 1.0 - w.w_y - w.w_z;
  w.agent_std = std::sqrt(w_x * w_x * sx2 + w.w_y * w.w_y * p.var_y());
  return w;
}

}  // namespace

TEST_CASE("baseline replication clears exactly") {
  auto config = unit_scenario(0, 3.0);
  config.params.sigma_eta = std::sqrt(0.5);
  auto outcome = run_replication(config, 0);
  CHECK(std::abs(outcome.clearing_residual) <= 1e-14);
  CHECK(outcome.price_analytic == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(std::abs(outcome.price_root - outcome.price_analytic) <= 1e-14);
  CHECK(outcome.z_residual == 0.0);
}

TEST_CASE("config validation") {
  auto config = unit_scenario(1, 1.0);
  SUBCASE("too few agents") {
    config.n_agents = 50;
    CHECK_THROWS_AS(validate(config), Error);
  }
  SUBCASE("no reps") {
    config.n_reps = 0;
    CHECK_THROWS_AS(validate(config), Error);
  }
  SUBCASE("lambda outside [0,1]") {
    config.lambda = 1.5;
    CHECK_THROWS_AS(validate(config), Error);
  }
}

// The sample clearing price converges to the aggregate of the exact
// posteriors, theta + (w_y*sigma_eps + w_z*b)*eps + c. Note this limit is
// NOT the analytic price: the report term w_y*sigma_eps*eps survives
// aggregation, so the analytic equilibrium misses clearing by that amount.
TEST_CASE("report-economy clearing matches the exact aggregation limit") {
  auto config = unit_scenario(1, 1.0, 10000, 50);
  auto equilibrium = solve_report(config.params);
  const double b = equilibrium.coefficients.b;
  const double c = equilibrium.coefficients.c;
  auto weights = report_weights(config.params, b);
  const double tol = 5.0 * weights.agent_std / std::sqrt(static_cast<double>(config.n_agents));

  auto outcomes = run_scenario(config, 2);
  double max_gap_vs_analytic = 0;
  for (const auto& outcome : outcomes) {
    const double eps = outcome.eps(0);
    const double limit = outcome.theta + (weights.w_y * config.params.sigma_eps + weights.w_z * b) * eps + c;
    CHECK(std::abs(outcome.price_root - limit) < tol);
    max_gap_vs_analytic =
        std::max(max_gap_vs_analytic, std::abs(outcome.price_root - outcome.price_analytic));

    // The clearing residual at the analytic price is the same gap in demand
    // units: (limit - price_analytic)/(gamma*Var).
    const double gv = config.params.gamma * equilibrium.coefficients.posterior_variance;
    CHECK(std::abs(outcome.clearing_residual - (limit - outcome.price_analytic) / gv) <
          5 * tol / gv);
  }
  // The gap is systematic: w_y*sigma_eps*eps is order eps, far beyond the
  // sampling band, so the analytic price does not clear the finite sample.
  CHECK(max_gap_vs_analytic > 10 * tol);
}

TEST_CASE("multi-report clearing matches the exact aggregation limit") {
  const int m = 4;
  auto config = unit_scenario(m, 0.7, 10000, 20);
  auto equilibrium = solve_multi(config.params);
  const double b = equilibrium.coefficients.b;
  const double c = equilibrium.coefficients.c;

  // Weights of the reduced posterior on (x, y-bar, Z), read off by linearity.
  EquilibriumCoefficients<double> coeffs = equilibrium.coefficients;
  SignalSet<double> probe;
  probe.y = Eigen::VectorXd::Zero(m);
  probe.x = 1;
  const double w_x = posterior_theta_multi(config.params, coeffs, probe).mean;
  probe.x = 0;
  probe.y = Eigen::VectorXd::Ones(m);
  const double w_ybar = posterior_theta_multi(config.params, coeffs, probe).mean;
  probe.y = Eigen::VectorXd::Zero(m);
  probe.z = 1;
  const double w_z = posterior_theta_multi(config.params, coeffs, probe).mean;
  CHECK(w_x + w_ybar + w_z == doctest::Approx(1.0).epsilon(1e-12));

  const double agent_std =
      std::sqrt(w_x * w_x * config.params.var_x() + w_ybar * w_ybar * config.params.var_y() / m);
  const double tol = 5.0 * agent_std / std::sqrt(static_cast<double>(config.n_agents));

  auto outcomes = run_scenario(config, 4);
  for (const auto& outcome : outcomes) {
    const double eps_sum = outcome.eps.sum();
    const double limit = outcome.theta +
                         (w_ybar * config.params.sigma_eps / m + w_z * b) * eps_sum + c;
    CHECK(std::abs(outcome.price_root - limit) < tol);
  }
}

TEST_CASE("lambda = 1 reduces to the baseline economy") {
  auto config = unit_scenario(1, 2.0);
  config.lambda = 1.0;
  auto outcome = run_replication(config, 3);
  CHECK(outcome.z_residual == 0.0);
  const double expected = 2.0 - config.params.gamma * config.params.var_eta() * config.params.supply;
  CHECK(outcome.price_root == doctest::Approx(expected).epsilon(1e-14));
  CHECK(std::abs(outcome.clearing_residual) <= 1e-14);
}

TEST_CASE("partial report adoption keeps the price noisy") {
  auto config = unit_scenario(1, 1.0, 400, 40);
  config.lambda = 0.5;
  auto outcomes = run_scenario(config);
  double var = 0;
  for (const auto& outcome : outcomes) var += outcome.z_residual * outcome.z_residual;
  var /= static_cast<double>(outcomes.size());
  CHECK(var > 0.01);  // b = 1/2 gives Var(z_residual) = 1/4

  config.lambda = 1.0;
  auto revealed = run_scenario(config);
  for (const auto& outcome : revealed) CHECK(outcome.z_residual == 0.0);
}

TEST_CASE("identical config gives bit-identical outcomes for any worker count") {
  auto config = unit_scenario(2, 0.5, 200, 25);
  config.theta = ThetaSpec::normal(0.0, 1.0);
  auto serial = run_scenario(config, 1);
  auto parallel = run_scenario(config, 8);
  REQUIRE(serial.size() == parallel.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    CHECK(serial[i].theta == parallel[i].theta);
    CHECK(serial[i].price_analytic == parallel[i].price_analytic);
    CHECK(serial[i].price_root == parallel[i].price_root);
    CHECK(serial[i].clearing_residual == parallel[i].clearing_residual);
    CHECK(serial[i].z_residual == parallel[i].z_residual);
    REQUIRE(serial[i].eps.size() == parallel[i].eps.size());
    for (Eigen::Index k = 0; k < serial[i].eps.size(); ++k)
      CHECK(serial[i].eps(k) == parallel[i].eps(k));
  }
}

TEST_CASE("precision estimate recovers alpha_z within its chi-square band") {
  auto config = unit_scenario(1, 1.0, 100, 10000);
  auto estimate = estimate_price_precision(config);
  REQUIRE_FALSE(estimate.alpha_hat.is_infinite());
  const double band = 3.0 * std::sqrt(2.0 / config.n_reps);
  CHECK(std::abs(estimate.alpha_hat.value() - 4.0) / 4.0 < band);
  CHECK(estimate.std_error == doctest::Approx(estimate.alpha_hat.value() * std::sqrt(2.0 / 10000)));

  SUBCASE("second parameter set, alpha_z = 100") {
    auto c2 = unit_scenario(1, 0.3, 100, 10000, 21);
    c2.params.sigma_y = 2;
    c2.params.sigma_eps = 0.5;
    auto e2 = estimate_price_precision(c2);
    CHECK(std::abs(e2.alpha_hat.value() - 100.0) / 100.0 < band);
  }
  SUBCASE("baseline has nothing to estimate") {
    auto c3 = unit_scenario(0, 1.0, 100, 10000);
    try {
      estimate_price_precision(c3);
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::WrongScenario);
    }
  }
  SUBCASE("too few replications") {
    auto c4 = unit_scenario(1, 1.0, 100, 500);
    try {
      estimate_price_precision(c4);
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::InsufficientReps);
    }
  }
  SUBCASE("sampled theta is rejected") {
    auto c5 = unit_scenario(1, 0.0, 100, 10000);
    c5.theta = ThetaSpec::normal(0, 1);
    CHECK_THROWS_AS(estimate_price_precision(c5), Error);
  }
}

TEST_CASE("full replications and the lean estimator share the residual stream") {
  auto config = unit_scenario(1, 1.0, 100, 1000);
  auto outcomes = run_scenario(config);
  double sum_sq = 0;
  for (const auto& outcome : outcomes) sum_sq += outcome.z_residual * outcome.z_residual;
  const double variance = sum_sq / static_cast<double>(outcomes.size());
  auto estimate = estimate_price_precision(config);
  CHECK(estimate.alpha_hat.value() == doctest::Approx(1.0 / variance).epsilon(1e-14));
}

TEST_CASE("strong-law aggregation") {
  ModelParams<double> params;
  params.sigma_x = 1;
  params.sigma_y = 1;
  SUBCASE("no noise recovers theta exactly") {
    params.sigma_x = 0;
    params.sigma_y = 0;
    auto result = lln_aggregate(params, 2.0, 1000, 5);
    CHECK(result.estimate == 2.0);
    CHECK(result.abs_error == 0.0);
  }
  SUBCASE("a million reports pin theta to 1e-2") {
    auto result = lln_aggregate(params, 2.0, 1000000, 5);
    CHECK(result.abs_error < 0.01);
  }
  SUBCASE("root-n error decay") {
    // Slope of log RMSE against log n over three decades, 30 seeds per n.
    std::vector<double> log_n, log_rmse;
    for (std::int64_t n : {100, 10000, 1000000}) {
      double mse = 0;
      for (std::uint64_t s = 0; s < 30; ++s) {
        auto result = lln_aggregate(params, 1.0, n, 1000 + s);
        mse += result.abs_error * result.abs_error;
      }
      log_n.push_back(std::log(static_cast<double>(n)));
      log_rmse.push_back(0.5 * std::log(mse / 30));
    }
    double mean_x = 0, mean_y = 0;
    for (std::size_t i = 0; i < log_n.size(); ++i) {
      mean_x += log_n[i];
      mean_y += log_rmse[i];
    }
    mean_x /= log_n.size();
    mean_y /= log_n.size();
    double num = 0, den = 0;
    for (std::size_t i = 0; i < log_n.size(); ++i) {
      num += (log_n[i] - mean_x) * (log_rmse[i] - mean_y);
      den += (log_n[i] - mean_x) * (log_n[i] - mean_x);
    }
    CHECK(num / den == doctest::Approx(-0.5).epsilon(0.2));
  }
}

TEST_CASE("publisher advantage: exact recovery against a noisy market") {
  auto config = unit_scenario(1, 0.0, 100, 1000);
  config.theta = ThetaSpec::normal(0.0, 2.0);
  auto report = publisher_advantage_demo(config);
  CHECK(report.max_recovery_error < 1e-10);
  CHECK(report.max_epsilon_error < 1e-10);
  CHECK(report.publisher_variance == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(report.nonpublisher_variance == doctest::Approx(7.0 / 6.0).epsilon(1e-14));
  CHECK(report.variance_gap > 0);

  SUBCASE("huge reading noise makes the price revealing and closes the gap") {
    auto c2 = unit_scenario(1, 0.0, 100, 100);
    c2.params.sigma_y = 100;
    auto r2 = publisher_advantage_demo(c2);
    CHECK(r2.variance_gap > 0);
    CHECK(r2.variance_gap < 1e-3);
  }
  SUBCASE("tiny reading noise: recovery degrades and the gap approaches its cap") {
    auto c3 = unit_scenario(1, 0.0, 100, 100);
    c3.params.sigma_y = 1e-4;
    auto r3 = publisher_advantage_demo(c3);
    // Conditioning of the 2x2 system blows up like 1/(1 - b/sigma_eps);
    // recovered theta is only ~1e-8 accurate here.
    CHECK(r3.max_recovery_error < 1e-6);
    // The non-publisher keeps the two-signal floor 1/(1/sx^2 + 1/se^2).
    CHECK(r3.variance_gap == doctest::Approx(0.5).epsilon(1e-3));
  }
  SUBCASE("zero reading noise is degenerate") {
    auto c4 = unit_scenario(1, 0.0, 100, 10);
    c4.params.sigma_y = 0;
    try {
      publisher_advantage_demo(c4);
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::DegenerateRecovery);
    }
  }
}
