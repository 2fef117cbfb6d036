// infoagg: experiments on information aggregation in CARA-Gaussian asset
// markets with published research reports.

#include <CLI11.hpp>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "infoagg/experiments.hpp"

namespace {

constexpr const char* kFooter = R"(experiments:
  baseline     fully revealing benchmark economy (publishers = 0)
  report       single-report economy: two equilibria, precision checks
  sweep        price informativeness across m = 0..m_max publishers
  recover      publisher's exact recovery of the fundamental from the price
  stability    instability probe of the ignore-the-report equilibrium
  lln          strong-law aggregation of published signals
  chatbot      query-inversion demo: the bot free-rides on traders' signals
  oracle-check closed-form posteriors against dense Gaussian conditioning

config file (JSON object; unknown keys are an error):
  params     object with sigma_eta, sigma_x, sigma_eps, sigma_y, gamma,
             supply, publishers  (required)
  theta      number, {"fixed": v} or {"normal": {"mean": m, "std": s}}
  n_agents   int (default 1000)     n_reps  int (default 10000)
  seed       nonnegative int (default 42)
  lambda     fraction of agents ignoring the report (default 0)
  sweep      {"m_max": int}                      (sweep only)
  chatbot    {"query_map": {"affine": {"p","q"}} or {"logistic": {"scale"}},
              "sigma_tau_answer": num, "trials": int}   (chatbot only)
  lln        {"max_exponent": int, "seeds": int}  (lln only)
  oracle     {"draws": int}                       (oracle-check only)
  stability  {"delta_fractions": [num,...]}       (stability only)

outputs: <out>.csv, <out>.summary.txt and, with --svg, <out>.svg.
Fully revealing precisions render as the literal token `inf`, never as an
empty cell. CSV columns per experiment:
  baseline/report  rep,theta,price_analytic,price_root,clearing_residual,
                   z_residual
  sweep            m,b,alpha_z,alpha_hat,stderr
  recover          rep,theta,theta_hat,eps,eps_hat,recovery_error
  stability        delta,t_delta,expansion,iterations,limit,converged,
                   damped_iterations,damped_limit
  lln              n_reports,rmse,rmse_predicted
  chatbot          trial,theta_hat,abs_error,clt_band,within_band
  oracle-check     draws,max_mean_diff,max_var_diff

exit codes:
  0  all in-run checks passed          3  numeric/convergence error
  2  config error                      4  an in-run check failed
                                       5  I/O error
)";

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"noisy rational-expectations market experiments"};
  app.footer(kFooter);
  app.require_subcommand(1);

  std::string config_path;
  std::string out_stem;
  bool emit_svg = false;
  int workers = 1;
  std::optional<std::uint64_t> seed_override;
  std::optional<int> reps_override;
  std::optional<int> agents_override;

  for (const char* name : {"baseline", "report", "sweep", "recover", "stability", "lln",
                           "chatbot", "oracle-check"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "path to the JSON config file")->required();
    sub->add_option("--out", out_stem, "output stem (default: the experiment name)");
    sub->add_option("--seed", seed_override, "override the config seed");
    sub->add_option("--reps", reps_override, "override the replication count");
    sub->add_option("--agents", agents_override, "override the agent count");
    sub->add_flag("--svg", emit_svg, "also emit a static SVG chart");
    sub->add_option("--workers", workers, "worker threads for replications (default 1)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return infoagg::kExitConfig;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    auto kind = infoagg::experiment_from_name(name);
    auto spec = infoagg::load_experiment_config(kind, config_path);
    if (seed_override) spec.scenario.seed = *seed_override;
    if (reps_override) spec.scenario.n_reps = *reps_override;
    if (agents_override) spec.scenario.n_agents = *agents_override;
    spec.output_stem = out_stem.empty() ? name : out_stem;
    spec.emit_svg = emit_svg;
    spec.workers = workers;
    return infoagg::run_experiment(spec);
  } catch (const infoagg::Error& e) {
    std::cerr << "error (" << infoagg::error_code_name(e.code()) << "): " << e.what() << '\n';
    return e.code() == infoagg::ErrorCode::IoError ? infoagg::kExitIo : infoagg::kExitConfig;
  }
}
