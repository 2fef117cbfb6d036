#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "infoagg/experiments.hpp"

using namespace infoagg;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream stream(path, std::ios::binary);
  REQUIRE(stream.good());
  std::ostringstream buffer;
  buffer << stream.rdbuf();
  return buffer.str();
}

const char* kReportConfig = R"({
  "params": {"sigma_eta": 1.0, "sigma_x": 1.0, "sigma_eps": 1.0, "sigma_y": 1.0,
             "gamma": 2.0, "supply": 1.0, "publishers": 1},
  "theta": 1.0,
  "n_agents": 200,
  "n_reps": 1200,
  "seed": 7
})";

std::string out_dir() {
  auto dir = std::filesystem::path("experiment_test_output");
  std::filesystem::create_directories(dir);
  return dir.string();
}

}  // namespace

TEST_CASE("config parsing honors defaults and overrides") {
  auto spec = parse_experiment_config(ExperimentKind::Report, kReportConfig);
  CHECK(spec.scenario.params.gamma == 2.0);
  CHECK(spec.scenario.params.publishers == 1);
  CHECK(spec.scenario.n_agents == 200);
  CHECK(spec.scenario.n_reps == 1200);
  CHECK(spec.scenario.seed == 7);
  CHECK(spec.scenario.lambda == 0.0);
  CHECK(spec.scenario.theta.kind == ThetaSpec::Kind::Fixed);
  CHECK(spec.scenario.theta.value == 1.0);
}

TEST_CASE("unknown keys are a hard error") {
  SUBCASE("top level") {
    try {
      parse_experiment_config(ExperimentKind::Report,
                              R"({"params": {"sigma_eta":1,"sigma_x":1,"sigma_eps":1,
                                  "sigma_y":1,"gamma":1,"supply":1,"publishers":1},
                                  "n_repz": 10})");
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ConfigParse);
    }
  }
  SUBCASE("inside params") {
    CHECK_THROWS_AS(parse_experiment_config(
                        ExperimentKind::Report,
                        R"({"params": {"sigma_eta":1,"sigma_x":1,"sigma_eps":1,"sigma_y":1,
                            "gamma":1,"supply":1,"publishers":1,"sigma_q":2}})"),
                    Error);
  }
  SUBCASE("experiment section on the wrong experiment") {
    CHECK_THROWS_AS(parse_experiment_config(
                        ExperimentKind::Baseline,
                        R"({"params": {"sigma_eta":1,"sigma_x":1,"sigma_eps":1,"sigma_y":1,
                            "gamma":1,"supply":1,"publishers":0},
                            "sweep": {"m_max": 5}})"),
                    Error);
  }
  SUBCASE("malformed JSON") {
    CHECK_THROWS_AS(parse_experiment_config(ExperimentKind::Report, "{not json"), Error);
  }
  SUBCASE("missing params") {
    CHECK_THROWS_AS(parse_experiment_config(ExperimentKind::Report, R"({"theta": 1.0})"), Error);
  }
}

TEST_CASE("experiment names round-trip") {
  for (auto kind : {ExperimentKind::Baseline, ExperimentKind::Report, ExperimentKind::Sweep,
                    ExperimentKind::Recover, ExperimentKind::Stability, ExperimentKind::Lln,
                    ExperimentKind::Chatbot, ExperimentKind::OracleCheck})
    CHECK(experiment_from_name(experiment_name(kind)) == kind);
  CHECK_THROWS_AS(experiment_from_name("warp-drive"), Error);
}

TEST_CASE("baseline experiment passes and writes machine-greppable artifacts") {
  ExperimentSpec spec = parse_experiment_config(ExperimentKind::Baseline, R"({
    "params": {"sigma_eta": 0.7071067811865476, "sigma_x": 1.0, "sigma_eps": 1.0,
               "sigma_y": 1.0, "gamma": 2.0, "supply": 1.0, "publishers": 0},
    "theta": 3.0, "n_agents": 500, "n_reps": 20, "seed": 3
  })");
  spec.kind = ExperimentKind::Baseline;
  spec.output_stem = out_dir() + "/baseline";
  spec.emit_svg = true;
  CHECK(run_experiment(spec) == kExitOk);

  auto summary = read_file(spec.output_stem + ".summary.txt");
  CHECK(summary.find("analytic=") != std::string::npos);
  CHECK(summary.find("empirical=") != std::string::npos);
  CHECK(summary.find("tolerance=") != std::string::npos);
  CHECK(summary.find("PASS") != std::string::npos);
  CHECK(summary.find("overall: PASS") != std::string::npos);

  auto csv = read_file(spec.output_stem + ".csv");
  CHECK(csv.rfind("rep,theta,price_analytic,price_root,clearing_residual,z_residual\n", 0) == 0);

  auto svg = read_file(spec.output_stem + ".svg");
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("polyline") != std::string::npos);
}

TEST_CASE("report experiment is byte-identical across runs and worker counts") {
  auto spec = parse_experiment_config(ExperimentKind::Report, kReportConfig);
  spec.kind = ExperimentKind::Report;

  spec.output_stem = out_dir() + "/report_w1";
  spec.workers = 1;
  CHECK(run_experiment(spec) == kExitOk);

  spec.output_stem = out_dir() + "/report_w8";
  spec.workers = 8;
  CHECK(run_experiment(spec) == kExitOk);

  spec.output_stem = out_dir() + "/report_again";
  spec.workers = 1;
  CHECK(run_experiment(spec) == kExitOk);

  const auto csv1 = read_file(out_dir() + "/report_w1.csv");
  const auto csv8 = read_file(out_dir() + "/report_w8.csv");
  const auto csv_again = read_file(out_dir() + "/report_again.csv");
  CHECK(csv1 == csv8);
  CHECK(csv1 == csv_again);
}

TEST_CASE("report CSV matches the committed golden file") {
  auto spec = parse_experiment_config(ExperimentKind::Report, kReportConfig);
  spec.kind = ExperimentKind::Report;
  spec.output_stem = out_dir() + "/report_golden_check";
  CHECK(run_experiment(spec) == kExitOk);
  const auto produced = read_file(spec.output_stem + ".csv");
  const auto golden = read_file(std::string(GOLDEN_DIR) + "/report_golden.csv");
  CHECK(produced == golden);
}

TEST_CASE("sweep emits the inf token for the fully revealing entry") {
  ExperimentSpec spec = parse_experiment_config(ExperimentKind::Sweep, R"({
    "params": {"sigma_eta": 1.0, "sigma_x": 1.0, "sigma_eps": 1.0, "sigma_y": 1.0,
               "gamma": 2.0, "supply": 1.0, "publishers": 1},
    "theta": 1.0, "n_reps": 2000, "seed": 5,
    "sweep": {"m_max": 4}
  })");
  spec.output_stem = out_dir() + "/sweep_small";
  CHECK(run_experiment(spec) == kExitOk);
  auto csv = read_file(spec.output_stem + ".csv");
  CHECK(csv.rfind("m,b,alpha_z,alpha_hat,stderr\n", 0) == 0);
  CHECK(csv.find("0,0,inf,inf,0") != std::string::npos);
}

TEST_CASE("failure paths map to the documented exit codes") {
  SUBCASE("config errors exit with 2") {
    auto spec = parse_experiment_config(ExperimentKind::Report, kReportConfig);
    spec.kind = ExperimentKind::Report;
    spec.scenario.params.publishers = 0;  // wrong scenario for the report experiment
    spec.output_stem = out_dir() + "/report_bad";
    CHECK(run_experiment(spec) == kExitConfig);
  }
  SUBCASE("numeric degeneracies exit with 3") {
    auto spec = parse_experiment_config(ExperimentKind::Recover, kReportConfig);
    spec.kind = ExperimentKind::Recover;
    spec.scenario.params.sigma_y = 0;  // DegenerateRecovery
    spec.scenario.n_reps = 10;
    spec.output_stem = out_dir() + "/recover_degenerate";
    CHECK(run_experiment(spec) == kExitNumeric);
  }
  SUBCASE("unwritable output exits with 5") {
    auto spec = parse_experiment_config(ExperimentKind::Report, kReportConfig);
    spec.kind = ExperimentKind::Report;
    spec.scenario.n_reps = 1;
    spec.scenario.n_agents = 100;
    spec.output_stem = "/proc/definitely/not/writable/report";
    CHECK(run_experiment(spec) == kExitIo);
  }
  SUBCASE("missing config file") {
    try {
      load_experiment_config(ExperimentKind::Report, "/nonexistent/config.json");
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::IoError);
    }
  }
}

TEST_CASE("format_double renders shortest round-trip decimals") {
  CHECK(format_double(0.5) == "0.5");
  CHECK(format_double(1.0 / 3.0) == "0.3333333333333333");
  CHECK(format_double(-2.0) == "-2");
  CHECK(format_precision(Precision<double>::infinite()) == "inf");
  CHECK(format_precision(Precision<double>::finite(4.0)) == "4");
}
