#pragma once

// The chatbot variation: agents submit queries q_i = f(x_i); an invertible f
// lets the bot recover every private signal, average them and learn the
// fundamental, while its answers play the role of the published report. The
// affine/logistic choices of f are artifact decisions.

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "infoagg/equilibrium.hpp"
#include "infoagg/errors.hpp"
#include "infoagg/model.hpp"
#include "infoagg/rng.hpp"

namespace infoagg {

struct QueryMap {
  enum class Kind { Affine, Logistic };

  Kind kind{Kind::Affine};
  double p{1};      // affine: q = p*x + q0
  double q0{0};
  double scale{1};  // logistic: q = 1/(1 + exp(-x/scale))

  static QueryMap affine(double p, double q0) {
    QueryMap map;
    map.kind = Kind::Affine;
    map.p = p;
    map.q0 = q0;
    return map;
  }

  static QueryMap logistic(double scale) {
    QueryMap map;
    map.kind = Kind::Logistic;
    map.scale = scale;
    return map;
  }
};

inline void validate(const QueryMap& map) {
  if (map.kind == QueryMap::Kind::Affine && map.p == 0)
    throw Error(ErrorCode::NonInvertibleQueryMap, "affine query map requires p != 0");
  if (map.kind == QueryMap::Kind::Logistic && !(map.scale > 0))
    throw Error(ErrorCode::NonInvertibleQueryMap, "logistic query map requires scale > 0");
}

inline double map_query(const QueryMap& map, double x) {
  validate(map);
  if (map.kind == QueryMap::Kind::Affine) return map.p * x + map.q0;
  if (std::abs(x) > 30 * map.scale)
    throw Error(ErrorCode::IllConditionedInversion,
                "logistic query saturates beyond |x| > 30*scale");
  return 1.0 / (1.0 + std::exp(-x / map.scale));
}

inline double invert_query(const QueryMap& map, double q) {
  validate(map);
  if (map.kind == QueryMap::Kind::Affine) return (q - map.q0) / map.p;
  if (!(q > 0) || !(q < 1))
    throw Error(ErrorCode::IllConditionedInversion, "logistic query outside (0, 1)");
  return map.scale * std::log(q / (1.0 - q));
}

struct ChatbotConfig {
  int n_agents{1000};
  QueryMap query_map;
  double sigma_tau_answer{1};  // idiosyncratic noise in the bot's answers
  ModelParams<double> params;
  double theta{0};
  std::uint64_t seed{0};
};

struct ChatbotReport {
  int n_agents{0};
  double max_inversion_error{0};       // max |f^-1(f(x_i)) - x_i|
  double theta_hat{0};                 // mean of the inverted queries
  double abs_error{0};                 // |theta_hat - theta|
  double clt_band{0};                  // 3*sigma_x/sqrt(n)
  double chatbot_variance{0};          // var_eta: theta known, floored by eta
  double trader_variance{0};           // posterior variance given (x_i, AI_i, Z)
  double free_riding_gap{0};           // trader_variance - chatbot_variance
};

inline ChatbotConfig validate(const ChatbotConfig& config) {
  validate(config.params);
  validate(config.query_map);
  if (config.n_agents < 1) throw Error(ErrorCode::WrongScenario, "n_agents must be >= 1");
  if (config.sigma_tau_answer < 0)
    throw Error(ErrorCode::NegativeStdDev, "sigma_tau_answer must be >= 0");
  return config;
}

inline ChatbotReport chatbot_demo(const ChatbotConfig& config) {
  validate(config);
  const auto& params = config.params;

  ChatbotReport report;
  report.n_agents = config.n_agents;

  double sum = 0;
  for (int i = 0; i < config.n_agents; ++i) {
    const auto agent = static_cast<std::uint64_t>(i);
    const double x = config.theta + params.sigma_x * rng::keyed_normal(config.seed, 0, agent,
                                                                       rng::Stream::QueryNoise, 0);
    const double recovered = invert_query(config.query_map, map_query(config.query_map, x));
    report.max_inversion_error = std::max(report.max_inversion_error, std::abs(recovered - x));
    sum += recovered;
  }
  report.theta_hat = sum / config.n_agents;
  report.abs_error = std::abs(report.theta_hat - config.theta);
  report.clt_band = 3.0 * params.sigma_x / std::sqrt(static_cast<double>(config.n_agents));

  // The answers AI_i = theta + sigma_eps*eps + sigma_tau*tau_i are the
  // published report of a one-publisher economy with reading noise
  // sigma_tau; an answer-receiving trader carries that economy's posterior,
  // while the bot itself knows theta and is floored only by eta.
  ModelParams<double> answer_economy = params;
  answer_economy.sigma_y = config.sigma_tau_answer;
  answer_economy.publishers = 1;
  report.chatbot_variance = params.var_eta();
  report.trader_variance = solve_report(answer_economy).coefficients.posterior_variance;
  report.free_riding_gap = report.trader_variance - report.chatbot_variance;
  return report;
}

}  // namespace infoagg
