// solitonlab command line: train a variational lattice-soliton circuit,
// analyze or sample stored Gaussian states, and cross-validate the engine
// against the Fock oracle.

#include <exception>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "solitonlab/solitonlab.hpp"

int main(int argc, char** argv) {
  CLI::App app{
      "solitonlab: phase-space simulation of Gaussian lattice solitons\n"
      "(set SOLITONLAB_THREADS to cap finite-difference gradient workers)"};
  app.require_subcommand(1);

  std::string config_path;
  auto* train_cmd =
      app.add_subcommand("train", "run a training experiment from a config");
  train_cmd->add_option("--config", config_path, "key=value config file")
      ->required();

  std::string analyze_state;
  int alice_site = -1;
  std::string analyze_out;
  auto* analyze_cmd = app.add_subcommand(
      "analyze", "site profile and log negativity of a stored state");
  analyze_cmd->add_option("--state", analyze_state, "state JSON file")
      ->required();
  analyze_cmd->add_option("--alice", alice_site,
                          "Alice site for the bipartition (default: center)");
  analyze_cmd->add_option("--out", analyze_out,
                          "artifact directory (default: beside the state)");

  std::string sample_state;
  int sample_total = 0;
  std::string sample_out;
  auto* sample_cmd = app.add_subcommand(
      "sample", "two-site photon-pattern probabilities of a stored state");
  sample_cmd->add_option("--state", sample_state, "state JSON file")->required();
  sample_cmd->add_option("--total", sample_total, "total photons: 2 or 4")
      ->required();
  sample_cmd->add_option("--out", sample_out,
                         "artifact directory (default: beside the state)");

  bool quick = false;
  std::string validate_out = ".";
  auto* validate_cmd = app.add_subcommand(
      "validate", "cross-check closed forms against the Fock oracle");
  validate_cmd->add_flag("--quick", quick, "smaller circuit sample");
  validate_cmd->add_option("--out", validate_out,
                           "directory for validate_report.txt");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) {
      return solitonlab::run_experiment(
          solitonlab::parse_config_file(config_path));
    }
    if (*analyze_cmd) {
      return solitonlab::run_analyze(analyze_state, alice_site, analyze_out);
    }
    if (*sample_cmd) {
      return solitonlab::run_sample(sample_state, sample_total, sample_out);
    }
    if (*validate_cmd) {
      return solitonlab::run_validate(quick, validate_out);
    }
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}
