#pragma once

// Command-line front end plumbing: config ingestion, the named experiments,
// CSV/summary/SVG emission and exit-code mapping. Kept out of the header-only
// core; everything here is double precision and file-system aware.

#include <cstdint>
#include <string>
#include <vector>

#include "infoagg/chatbot.hpp"
#include "infoagg/market_sim.hpp"

namespace infoagg {

enum class ExperimentKind {
  Baseline,
  Report,
  Sweep,
  Recover,
  Stability,
  Lln,
  Chatbot,
  OracleCheck,
};

// Process exit codes, documented in --help.
enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitNumeric = 3,
  kExitAcceptance = 4,
  kExitIo = 5,
};

struct ExperimentSpec {
  ExperimentKind kind{ExperimentKind::Baseline};
  ScenarioConfig scenario;

  int sweep_m_max{30};

  QueryMap query_map{QueryMap::affine(1, 0)};
  double sigma_tau_answer{1};
  int chatbot_trials{1};

  int lln_max_exponent{6};
  int lln_seeds{100};

  int oracle_draws{1000};

  std::vector<double> stability_delta_fractions{1e-4, 1e-3, 1e-2};

  std::string output_stem{"experiment"};
  bool emit_svg{false};
  int workers{1};
};

const char* experiment_name(ExperimentKind kind);

// Name -> kind; throws ConfigParse for unknown names.
ExperimentKind experiment_from_name(const std::string& name);

// Parses the JSON config text for the given experiment. Unknown keys are a
// hard error. The output stem, svg flag and worker count are not config
// keys; they come from the command line.
ExperimentSpec parse_experiment_config(ExperimentKind kind, const std::string& config_text);

// Convenience wrapper reading the config from a file.
ExperimentSpec load_experiment_config(ExperimentKind kind, const std::string& config_path);

// Runs the experiment, writes <stem>.csv, <stem>.summary.txt and optionally
// <stem>.svg, echoes the summary to stdout, and returns the process exit
// code (0 only if every in-run check passed).
int run_experiment(const ExperimentSpec& spec);

// Shortest round-trip decimal rendering; infinities render as "inf".
std::string format_double(double value);
std::string format_precision(const Precision<double>& precision);

// Reusable experiment cores, also driven directly by the acceptance suite.

struct OracleCheckResult {
  double max_mean_diff{0};
  double max_var_diff{0};
  int draws{0};
};

// Random report-economy draws (parameters log-uniform in [0.1, 10], loading
// at its equilibrium value): closed-form posterior against the dense
// conditioner.
OracleCheckResult run_oracle_check(int draws, std::uint64_t seed);

struct LlnSweepRow {
  std::int64_t n_reports{0};
  double rmse{0};
};

struct LlnSweepResult {
  std::vector<LlnSweepRow> rows;
  double slope{0};  // OLS slope of log RMSE on log n
};

LlnSweepResult run_lln_sweep(const ModelParams<double>& params, double theta, int max_exponent,
                             int seeds, std::uint64_t seed_base);

struct ChatbotTrialsResult {
  int trials{0};
  int within_band{0};
  double max_inversion_error{0};
  ChatbotReport first;
  std::vector<ChatbotReport> reports;
};

ChatbotTrialsResult run_chatbot_trials(const ChatbotConfig& base, int trials);

}  // namespace infoagg
