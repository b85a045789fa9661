#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "solitonlab/ansatz.hpp"
#include "solitonlab/detail/numeric.hpp"
#include "solitonlab/entanglement.hpp"
#include "solitonlab/fock_oracle.hpp"
#include "solitonlab/observables.hpp"
#include "solitonlab/sampling.hpp"
#include "solitonlab/solver.hpp"

namespace solitonlab {

inline const char* to_string(LossVariant v) {
  return v == LossVariant::single ? "single" : "bound";
}

inline LossVariant loss_variant_from_string(const std::string& s) {
  if (s == "single") return LossVariant::single;
  if (s == "bound") return LossVariant::bound;
  throw std::invalid_argument(fmt::format(
      "loss_variant must be 'single' or 'bound', got '{}'", s));
}

inline const char* to_string(GradMode m) {
  return m == GradMode::finite_difference ? "finite_difference" : "analytic";
}

inline GradMode grad_mode_from_string(const std::string& s) {
  if (s == "finite_difference") return GradMode::finite_difference;
  if (s == "analytic") return GradMode::analytic;
  throw std::invalid_argument(fmt::format(
      "grad_mode must be 'finite_difference' or 'analytic', got '{}'", s));
}

/// Everything one training run needs, readable from a key=value file with
/// '#' comments. n_sites, gamma and n_target are required; the rest default.
struct ExperimentConfig {
  int n_sites = 0;
  double gamma = 0.0;
  double n_target = 0.0;
  LossVariant loss_variant = LossVariant::single;
  int site_a = -1;
  int site_b = -1;
  int epochs = 30000;
  double learning_rate = 0.01;
  std::uint64_t seed = 1;
  GradMode grad_mode = GradMode::finite_difference;
  double weight_number = 1.0;
  double weight_peak = 1.0;
  double weight_balance = 1.0;
  double fd_step = 1e-5;
  int history_stride = 10;
  std::string output_dir = "out";
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline double parse_double(const std::string& value, const std::string& key) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument(
        fmt::format("config: {} = '{}' is not a number", key, value));
  }
  if (used != value.size()) {
    throw std::invalid_argument(
        fmt::format("config: {} = '{}' has trailing characters", key, value));
  }
  return v;
}

inline long long parse_int(const std::string& value, const std::string& key) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(value, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument(
        fmt::format("config: {} = '{}' is not an integer", key, value));
  }
  if (used != value.size()) {
    throw std::invalid_argument(
        fmt::format("config: {} = '{}' has trailing characters", key, value));
  }
  return v;
}

}  // namespace detail

inline ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig cfg;
  std::set<std::string> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(fmt::format(
          "config line {}: expected key=value, got '{}'", line_no, line));
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (!seen.insert(key).second) {
      throw std::invalid_argument(
          fmt::format("config line {}: duplicate key '{}'", line_no, key));
    }
    if (key == "n_sites") {
      cfg.n_sites = static_cast<int>(detail::parse_int(value, key));
    } else if (key == "gamma") {
      cfg.gamma = detail::parse_double(value, key);
    } else if (key == "n_target") {
      cfg.n_target = detail::parse_double(value, key);
    } else if (key == "loss_variant") {
      cfg.loss_variant = loss_variant_from_string(value);
    } else if (key == "site_a") {
      cfg.site_a = static_cast<int>(detail::parse_int(value, key));
    } else if (key == "site_b") {
      cfg.site_b = static_cast<int>(detail::parse_int(value, key));
    } else if (key == "epochs") {
      cfg.epochs = static_cast<int>(detail::parse_int(value, key));
    } else if (key == "learning_rate") {
      cfg.learning_rate = detail::parse_double(value, key);
    } else if (key == "seed") {
      cfg.seed = static_cast<std::uint64_t>(detail::parse_int(value, key));
    } else if (key == "grad_mode") {
      cfg.grad_mode = grad_mode_from_string(value);
    } else if (key == "weight_number") {
      cfg.weight_number = detail::parse_double(value, key);
    } else if (key == "weight_peak") {
      cfg.weight_peak = detail::parse_double(value, key);
    } else if (key == "weight_balance") {
      cfg.weight_balance = detail::parse_double(value, key);
    } else if (key == "fd_step") {
      cfg.fd_step = detail::parse_double(value, key);
    } else if (key == "history_stride") {
      cfg.history_stride = static_cast<int>(detail::parse_int(value, key));
    } else if (key == "output_dir") {
      cfg.output_dir = value;
    } else {
      throw std::invalid_argument(
          fmt::format("config line {}: unknown key '{}'", line_no, key));
    }
  }
  for (const char* required : {"n_sites", "gamma", "n_target"}) {
    if (!seen.count(required)) {
      throw std::invalid_argument(
          fmt::format("config: missing required key '{}'", required));
    }
  }
  return cfg;
}

inline ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::invalid_argument(
        fmt::format("cannot open config file '{}'", path));
  }
  return parse_config(in);
}

/// Inverse of parse_config: emits every key, parse(serialize(c)) == c.
inline std::string serialize_config(const ExperimentConfig& cfg) {
  std::string out;
  out += fmt::format("n_sites={}\n", cfg.n_sites);
  out += fmt::format("gamma={:.17g}\n", cfg.gamma);
  out += fmt::format("n_target={:.17g}\n", cfg.n_target);
  out += fmt::format("loss_variant={}\n", to_string(cfg.loss_variant));
  out += fmt::format("site_a={}\n", cfg.site_a);
  out += fmt::format("site_b={}\n", cfg.site_b);
  out += fmt::format("epochs={}\n", cfg.epochs);
  out += fmt::format("learning_rate={:.17g}\n", cfg.learning_rate);
  out += fmt::format("seed={}\n", cfg.seed);
  out += fmt::format("grad_mode={}\n", to_string(cfg.grad_mode));
  out += fmt::format("weight_number={:.17g}\n", cfg.weight_number);
  out += fmt::format("weight_peak={:.17g}\n", cfg.weight_peak);
  out += fmt::format("weight_balance={:.17g}\n", cfg.weight_balance);
  out += fmt::format("fd_step={:.17g}\n", cfg.fd_step);
  out += fmt::format("history_stride={}\n", cfg.history_stride);
  out += fmt::format("output_dir={}\n", cfg.output_dir);
  return out;
}

inline LossSpec loss_spec_from(const ExperimentConfig& cfg) {
  LossSpec spec;
  spec.variant = cfg.loss_variant;
  spec.n_target = cfg.n_target;
  spec.weight_number = cfg.weight_number;
  spec.site_a = cfg.site_a;
  spec.site_b = cfg.site_b;
  spec.weight_peak = cfg.weight_peak;
  spec.weight_balance = cfg.weight_balance;
  return spec;
}

inline TrainConfig train_config_from(const ExperimentConfig& cfg) {
  TrainConfig tc;
  tc.epochs = cfg.epochs;
  tc.learning_rate = cfg.learning_rate;
  tc.seed = cfg.seed;
  tc.grad_mode = cfg.grad_mode;
  tc.fd_step = cfg.fd_step;
  tc.history_stride = cfg.history_stride;
  return tc;
}

namespace detail {

inline void write_text_artifact(const std::filesystem::path& path,
                                const std::string& content) {
  write_file_atomic(path, content);
}

inline nlohmann::json entanglement_report(const GaussianState& state,
                                          const std::vector<int>& alice) {
  nlohmann::json j;
  j["alice"] = alice;
  if (alice.empty()) {
    j["log_negativity"] = 0.0;
  } else {
    j["log_negativity"] =
        log_negativity(state, Bipartition(alice, state.n_modes()));
  }
  return j;
}

}  // namespace detail

/// Trains per the config and writes history.csv, final_params.json,
/// final_state.json, site_profile.csv and entanglement.json into output_dir
/// (atomically), checkpointing the parameters at every recorded epoch.
/// Returns 0, or 2 when the run diverged (artifacts then hold the last
/// finite state).
inline int run_experiment(const ExperimentConfig& cfg) {
  const LatticeHamiltonian lattice =
      LatticeHamiltonian::open_chain(cfg.n_sites, cfg.gamma);
  const LossSpec spec = loss_spec_from(cfg);
  const TrainConfig tc = train_config_from(cfg);
  const std::filesystem::path out_dir(cfg.output_dir);
  std::filesystem::create_directories(out_dir);

  const AnsatzParams init = initial_params(cfg.n_sites, tc);
  const auto checkpoint = [&](const HistoryRow&, const AnsatzParams& params) {
    detail::write_text_artifact(out_dir / "checkpoint_params.json",
                                params_to_json(params).dump(2) + "\n");
  };
  const TrainResult result = train(init, spec, lattice, tc, checkpoint);

  {
    std::ostringstream csv;
    result.history.write_csv(csv);
    detail::write_text_artifact(out_dir / "history.csv", csv.str());
  }
  detail::write_text_artifact(out_dir / "final_params.json",
                              params_to_json(result.params).dump(2) + "\n");
  const GaussianState state = prepare_state(result.params);
  detail::write_text_artifact(out_dir / "final_state.json",
                              state_to_json(state).dump(2) + "\n");
  {
    std::ostringstream csv;
    write_site_profile_csv(csv, state);
    detail::write_text_artifact(out_dir / "site_profile.csv", csv.str());
  }
  std::vector<int> alice;
  if (cfg.n_sites >= 2) {
    alice.push_back(spec.variant == LossVariant::bound ? spec.site_a
                                                       : cfg.n_sites / 2);
  }
  detail::write_text_artifact(
      out_dir / "entanglement.json",
      detail::entanglement_report(state, alice).dump(2) + "\n");

  const HistoryRow& last = result.history.rows.back();
  fmt::print("trained {} epochs ({}): loss {:.6g}, <H> {:.6g}, <N> {:.6g}, "
             "E_N {:.6g}\n",
             result.epochs_run, to_string(cfg.grad_mode), last.loss,
             last.mean_h, last.mean_n, last.log_negativity);
  fmt::print("artifacts in {}\n", out_dir.string());
  if (result.diverged) {
    fmt::print("training diverged; artifacts hold the last finite state\n");
    return 2;
  }
  return 0;
}

namespace detail {

inline GaussianState load_state(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::invalid_argument(fmt::format("cannot open state file '{}'", path));
  }
  nlohmann::json j;
  in >> j;
  return state_from_json(j);
}

inline std::filesystem::path artifact_dir(const std::string& state_path,
                                          const std::string& out_dir) {
  if (!out_dir.empty()) return std::filesystem::path(out_dir);
  const auto parent = std::filesystem::path(state_path).parent_path();
  return parent.empty() ? std::filesystem::path(".") : parent;
}

}  // namespace detail

/// Site profile and negativity for a stored state. alice_site < 0 picks the
/// central site.
inline int run_analyze(const std::string& state_path, int alice_site,
                       const std::string& out_dir = "") {
  const GaussianState state = detail::load_state(state_path);
  const auto dir = detail::artifact_dir(state_path, out_dir);
  std::filesystem::create_directories(dir);

  std::vector<int> alice;
  if (state.n_modes() >= 2) {
    alice.push_back(alice_site >= 0 ? alice_site : state.n_modes() / 2);
  }
  const nlohmann::json report = detail::entanglement_report(state, alice);
  {
    std::ostringstream csv;
    write_site_profile_csv(csv, state);
    detail::write_text_artifact(dir / "site_profile.csv", csv.str());
  }
  detail::write_text_artifact(dir / "entanglement.json", report.dump(2) + "\n");

  fmt::print("site  mean_photon  displacement_intensity\n");
  for (int j = 0; j < state.n_modes(); ++j) {
    fmt::print("{:>4}  {:>11.6g}  {:>22.6g}\n", j, mean_photon(state, j),
               displacement_intensity(state, j));
  }
  fmt::print("total photons: {:.6g}\n", total_photon(state));
  if (!alice.empty()) {
    fmt::print("log negativity (alice = site {}): {:.6g}\n", alice[0],
               report.at("log_negativity").get<double>());
  }
  fmt::print("artifacts in {}\n", dir.string());
  return 0;
}

/// Two-site photon-pattern scan of a stored state; writes pair_scan.csv.
inline int run_sample(const std::string& state_path, int total,
                      const std::string& out_dir = "") {
  const GaussianState state = detail::load_state(state_path);
  const auto dir = detail::artifact_dir(state_path, out_dir);
  std::filesystem::create_directories(dir);

  const Eigen::MatrixXd scan = pair_probability_scan(state, total);
  {
    std::ostringstream csv;
    write_pair_scan_csv(csv, scan);
    detail::write_text_artifact(dir / "pair_scan.csv", csv.str());
  }

  std::vector<std::tuple<double, int, int>> entries;
  for (int a = 0; a < scan.rows(); ++a) {
    for (int b = a; b < scan.cols(); ++b) entries.emplace_back(scan(a, b), a, b);
  }
  std::sort(entries.rbegin(), entries.rend());
  fmt::print("top pair probabilities for total = {}:\n", total);
  for (std::size_t i = 0; i < entries.size() && i < 5; ++i) {
    fmt::print("  ({}, {}): {:.6g}\n", std::get<1>(entries[i]),
               std::get<2>(entries[i]), std::get<0>(entries[i]));
  }
  fmt::print("artifacts in {}\n", dir.string());
  return 0;
}

namespace detail {

struct ValidationCheck {
  std::string name;
  double tolerance;
  double worst = 0.0;
  long count = 0;

  void add(double err) {
    worst = std::max(worst, err);
    ++count;
  }
  bool ok() const { return worst <= tolerance; }
};

inline void enumerate_patterns(int n_modes, int max_total,
                               std::vector<std::vector<int>>& out) {
  std::vector<int> counts(n_modes, 0);
  std::function<void(int, int)> rec = [&](int mode, int left) {
    if (mode == n_modes) {
      out.push_back(counts);
      return;
    }
    for (int c = 0; c <= left; ++c) {
      counts[mode] = c;
      rec(mode + 1, left - c);
    }
    counts[mode] = 0;
  };
  rec(0, max_total);
}

}  // namespace detail

/// Cross-certifies the closed-form engine against the Fock oracle on random
/// small circuits and writes a pass/fail report. Exit status 0 only if every
/// check passes.
inline int run_validate(bool quick, const std::string& out_dir = ".") {
  constexpr double kTol = 1e-6;
  const int circuits = quick ? 6 : 25;
  const int max_pattern_total = quick ? 3 : 4;
  const int cutoff = 40;

  detail::ValidationCheck mean_check{"mean_photon", kTol};
  detail::ValidationCheck quad_check{"quadratic_expectation", kTol};
  detail::ValidationCheck quartic_check{"quartic_expectation", kTol};
  detail::ValidationCheck energy_check{"hamiltonian_expectation", kTol};
  detail::ValidationCheck pattern_check{"pattern_probability", kTol};
  double worst_leakage = 0.0;

  std::mt19937_64 rng(987654321ULL);
  for (int i = 0; i < circuits; ++i) {
    const int n = 2 + (i % 2);
    AnsatzParams params = AnsatzParams::zero(n);
    for (int j = 0; j < n; ++j) {
      params.deltas[j] = Complex(detail::uniform(rng, -0.7, 0.7),
                                 detail::uniform(rng, -0.7, 0.7));
      // |r| stays at 0.65 so the cutoff-40 reference's own truncation tail
      // (weighted by n(n-1) in the quartic term) sits well below the 1e-6
      // agreement tolerance; at |r|=0.75 that tail alone is ~3e-6.
      params.zetas[j].r = detail::uniform(rng, -0.65, 0.65);
      params.zetas[j].theta = detail::uniform(rng, -3.14159, 3.14159);
    }
    for (auto& h : params.mixer) h = detail::uniform(rng, -0.4, 0.4);

    const GaussianState state = prepare_state(params);
    const FockVector fock = oracle_prepare(params, cutoff);
    worst_leakage = std::max(worst_leakage, fock.leakage());

    for (int j = 0; j < n; ++j) {
      mean_check.add(std::abs(mean_photon(state, j) - oracle_mean_photon(fock, j)));
      quartic_check.add(
          std::abs(quartic_expectation(state, j) - oracle_quartic(fock, j)));
      for (int k = 0; k < n; ++k) {
        quad_check.add(std::abs(quadratic_expectation(state, j, k) -
                                oracle_quadratic(fock, j, k)));
      }
    }
    const LatticeHamiltonian lattice = LatticeHamiltonian::open_chain(n, -1.0);
    energy_check.add(std::abs(hamiltonian_expectation(state, lattice) -
                              oracle_expectation(fock, lattice)));

    std::vector<std::vector<int>> patterns;
    detail::enumerate_patterns(n, max_pattern_total, patterns);
    for (const auto& counts : patterns) {
      const PhotonPattern pattern(counts);
      pattern_check.add(std::abs(pattern_probability(state, pattern) -
                                 oracle_pattern_probability(fock, pattern)));
    }
  }

  std::string report;
  report += fmt::format("oracle cross-certification: {} circuits (2-3 modes, "
                        "cutoff {}, worst leakage {:.3e})\n",
                        circuits, cutoff, worst_leakage);
  bool all_ok = true;
  for (const auto& check : {mean_check, quad_check, quartic_check, energy_check,
                            pattern_check}) {
    all_ok = all_ok && check.ok();
    report += fmt::format("[{}] {}: max|engine - oracle| = {:.3e} over {} "
                          "comparisons (tol {:.0e})\n",
                          check.ok() ? "ok" : "FAIL", check.name, check.worst,
                          check.count, check.tolerance);
  }
  report += fmt::format("validation {}\n", all_ok ? "PASSED" : "FAILED");

  const std::filesystem::path dir(out_dir.empty() ? "." : out_dir);
  std::filesystem::create_directories(dir);
  detail::write_text_artifact(dir / "validate_report.txt", report);
  fmt::print("{}", report);
  return all_ok ? 0 : 1;
}

}  // namespace solitonlab
