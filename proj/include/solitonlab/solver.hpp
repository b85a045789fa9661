#pragma once

#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include "solitonlab/ansatz.hpp"
#include "solitonlab/detail/numeric.hpp"
#include "solitonlab/entanglement.hpp"
#include "solitonlab/observables.hpp"
#include "solitonlab/phase_space.hpp"

namespace solitonlab {

enum class GradMode { finite_difference, analytic };
enum class LossVariant { single, bound };

/// Loss = exp(<H>/n) + weight_number (<N> - n_target)^2, plus, for the
/// two-soliton variant, weight_peak exp(-<n_A>) + weight_balance
/// exp(<n_A> - <n_B>) pinning population onto sites A and B.
struct LossSpec {
  LossVariant variant = LossVariant::single;
  double n_target = 0.0;
  double weight_number = 1.0;
  int site_a = -1;
  int site_b = -1;
  double weight_peak = 1.0;
  double weight_balance = 1.0;
};

struct TrainConfig {
  int epochs = 30000;
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 1;
  GradMode grad_mode = GradMode::finite_difference;
  double fd_step = 1e-5;
  int history_stride = 10;
};

struct HistoryRow {
  int epoch = 0;
  double loss = 0.0;
  double mean_h = 0.0;
  double mean_n = 0.0;
  double log_negativity = 0.0;
};

struct TrainHistory {
  std::vector<HistoryRow> rows;

  void write_csv(std::ostream& out) const {
    out << "epoch,loss,mean_H,mean_N,log_negativity\n";
    for (const auto& r : rows) {
      out << fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g}\n", r.epoch, r.loss,
                         r.mean_h, r.mean_n, r.log_negativity);
    }
  }
};

struct TrainResult {
  AnsatzParams params;  // last parameters with a finite loss
  TrainHistory history;
  bool diverged = false;
  int epochs_run = 0;
};

/// Raised when a loss or gradient evaluation stops being finite; the index is
/// the parameter coordinate being probed (-1 when not attributable).
struct DivergenceError : std::runtime_error {
  DivergenceError(const std::string& what, int index)
      : std::runtime_error(what), param_index(index) {}
  int param_index;
};

namespace detail {

inline void validate_loss_spec(const LossSpec& spec, int n_modes,
                               const char* who) {
  if (!std::isfinite(spec.n_target) || spec.n_target < 0.0) {
    throw std::invalid_argument(fmt::format(
        "{}: n_target must be finite and >= 0, got {}", who, spec.n_target));
  }
  if (!(spec.weight_number > 0.0)) {
    throw std::invalid_argument(fmt::format(
        "{}: weight_number must be > 0, got {}", who, spec.weight_number));
  }
  if (spec.variant == LossVariant::bound) {
    if (spec.site_a < 0 || spec.site_a >= n_modes || spec.site_b < 0 ||
        spec.site_b >= n_modes) {
      throw std::invalid_argument(fmt::format(
          "{}: bound variant needs sites in [0, {}), got A={} B={}", who,
          n_modes, spec.site_a, spec.site_b));
    }
    if (spec.site_a == spec.site_b) {
      throw std::invalid_argument(
          fmt::format("{}: site_a and site_b must differ, both are {}", who,
                      spec.site_a));
    }
    if (!(spec.weight_peak > 0.0) || !(spec.weight_balance > 0.0)) {
      throw std::invalid_argument(fmt::format(
          "{}: weight_peak and weight_balance must be > 0, got {} and {}", who,
          spec.weight_peak, spec.weight_balance));
    }
  }
}

}  // namespace detail

/// Loss evaluated on an already prepared state.
inline double loss_value(const GaussianState& state, const LossSpec& spec,
                         const LatticeHamiltonian& lattice) {
  const int n = state.n_modes();
  if (lattice.n_sites() != n) {
    throw std::invalid_argument(
        fmt::format("loss_value: lattice has {} sites but state has {} modes",
                    lattice.n_sites(), n));
  }
  detail::validate_loss_spec(spec, n, "loss_value");
  const double energy = hamiltonian_expectation(state, lattice);
  const double number = total_photon(state);
  double loss = std::exp(energy / n) +
                spec.weight_number * (number - spec.n_target) *
                    (number - spec.n_target);
  if (spec.variant == LossVariant::bound) {
    const double na = mean_photon(state, spec.site_a);
    const double nb = mean_photon(state, spec.site_b);
    loss += spec.weight_peak * std::exp(-na) +
            spec.weight_balance * std::exp(na - nb);
  }
  return loss;
}

inline double loss_of_params(const AnsatzParams& params, const LossSpec& spec,
                             const LatticeHamiltonian& lattice) {
  return loss_value(prepare_state(params), spec, lattice);
}

/// Central finite differences on the packed parameter vector. Evaluations are
/// spread over min(SOLITONLAB_THREADS, hardware) workers; the result is
/// assembled by index, so it is bit-deterministic for any worker count.
inline Eigen::VectorXd finite_difference_gradient(
    const AnsatzParams& params, const LossSpec& spec,
    const LatticeHamiltonian& lattice, double fd_step) {
  if (!(fd_step > 0.0) || !std::isfinite(fd_step)) {
    throw std::invalid_argument(
        fmt::format("finite_difference_gradient: bad step {}", fd_step));
  }
  const int n = params.n_modes();
  const Eigen::VectorXd p0 = params.pack();
  const int count = static_cast<int>(p0.size());
  Eigen::VectorXd grad(count);

  const int workers = std::min(detail::thread_cap(), count);
  std::atomic<int> cursor{0};
  std::vector<std::exception_ptr> errors(workers);
  auto work = [&](int w) {
    try {
      Eigen::VectorXd p = p0;
      for (int i = cursor.fetch_add(1); i < count; i = cursor.fetch_add(1)) {
        p(i) = p0(i) + fd_step;
        const double up = loss_of_params(AnsatzParams::unpack(n, p), spec, lattice);
        p(i) = p0(i) - fd_step;
        const double down =
            loss_of_params(AnsatzParams::unpack(n, p), spec, lattice);
        p(i) = p0(i);
        if (!std::isfinite(up) || !std::isfinite(down)) {
          throw DivergenceError(
              fmt::format("finite_difference_gradient: non-finite loss while "
                          "probing parameter {}",
                          i),
              i);
        }
        grad(i) = (up - down) / (2.0 * fd_step);
      }
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  if (workers <= 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return grad;
}

namespace detail {

/// Forward pass of the circuit with every intermediate the reverse sweep
/// needs. The products are ordered exactly as in prepare_state, so losses
/// match the finite-difference path bit for bit.
struct CircuitForward {
  int n = 0;
  Eigen::VectorXd lambda;    // mixer generator eigenvalues
  Eigen::MatrixXcd vectors;  // mixer generator eigenvectors
  Eigen::MatrixXcd u;        // exp(i H)
  Eigen::MatrixXd mu;        // realified U
  Eigen::MatrixXd ms;        // block-diagonal squeeze matrix
  Eigen::VectorXd dd;        // displacement shift
  Eigen::MatrixXd m;         // mu * ms
  Eigen::VectorXd d;         // mu * dd
  Eigen::MatrixXd g;         // m * m^T
};

inline CircuitForward circuit_forward(const AnsatzParams& params) {
  validate_params(params, "circuit_forward");
  CircuitForward f;
  f.n = params.n_modes();
  const int big = 2 * f.n;

  const Eigen::MatrixXcd hgen = generator_from_params(params.mixer);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(hgen);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("circuit_forward: eigendecomposition failed");
  }
  f.lambda = es.eigenvalues();
  f.vectors = es.eigenvectors();
  Eigen::VectorXcd phases(f.n);
  for (int i = 0; i < f.n; ++i) {
    phases(i) = Complex(std::cos(f.lambda(i)), std::sin(f.lambda(i)));
  }
  f.u = f.vectors * phases.asDiagonal() * f.vectors.adjoint();

  f.mu.resize(big, big);
  for (int j = 0; j < f.n; ++j) {
    for (int k = 0; k < f.n; ++k) {
      const double re = f.u(j, k).real(), im = f.u(j, k).imag();
      f.mu(2 * j, 2 * k) = re;
      f.mu(2 * j + 1, 2 * k + 1) = re;
      f.mu(2 * j + 1, 2 * k) = im;
      f.mu(2 * j, 2 * k + 1) = -im;
    }
  }

  f.ms = Eigen::MatrixXd::Identity(big, big);
  for (int j = 0; j < f.n; ++j) {
    f.ms.block<2, 2>(2 * j, 2 * j) =
        squeeze_block(params.zetas[j].r, params.zetas[j].theta);
  }
  f.dd.resize(big);
  for (int j = 0; j < f.n; ++j) {
    f.dd(2 * j) = std::sqrt(2.0) * params.deltas[j].real();
    f.dd(2 * j + 1) = std::sqrt(2.0) * params.deltas[j].imag();
  }

  f.m = f.mu * f.ms;
  f.d = f.mu * f.dd;
  f.g = f.m * f.m.transpose();
  return f;
}

/// Divided-difference kernel of z -> e^{iz} in its exact form
/// i e^{i(a+b)/2} sinc((a-b)/2); smooth through degeneracies.
inline Complex exp_divided_difference(double a, double b) {
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (a - b);
  double s;
  if (std::abs(half) < 1e-4) {
    const double x2 = half * half;
    s = 1.0 - x2 / 6.0 + x2 * x2 / 120.0;
  } else {
    s = std::sin(half) / half;
  }
  return Complex(0.0, 1.0) * Complex(std::cos(mid), std::sin(mid)) * s;
}

}  // namespace detail

/// Reverse-mode gradient of the loss, written out by hand. Certified against
/// finite_difference_gradient (tests hold them to 1e-5 relative).
inline Eigen::VectorXd analytic_gradient(const AnsatzParams& params,
                                         const LossSpec& spec,
                                         const LatticeHamiltonian& lattice) {
  const int n = params.n_modes();
  if (lattice.n_sites() != n) {
    throw std::invalid_argument(fmt::format(
        "analytic_gradient: lattice has {} sites but the ansatz has {} modes",
        lattice.n_sites(), n));
  }
  detail::validate_loss_spec(spec, n, "analytic_gradient");
  const detail::CircuitForward f = detail::circuit_forward(params);
  const Eigen::MatrixXd& g = f.g;
  const Eigen::VectorXd& d = f.d;

  // Forward observables (same closed forms as the observables module).
  auto site_mean = [&](int j) {
    return 0.25 * (g(2 * j, 2 * j) + g(2 * j + 1, 2 * j + 1)) +
           0.5 * (d(2 * j) * d(2 * j) + d(2 * j + 1) * d(2 * j + 1)) - 0.5;
  };
  auto site_quartic_parts = [&](int j, double out[5]) {
    const int q = 2 * j, p = 2 * j + 1;
    out[0] = g(q, q);
    out[1] = g(p, p);
    out[2] = g(q, p);
    out[3] = d(q);
    out[4] = d(p);
  };

  double energy = 0.0;
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < n; ++k) {
      const double w = lattice.omega()(j, k);
      if (w == 0.0) continue;
      const double re =
          0.25 * (g(2 * j, 2 * k) + g(2 * j + 1, 2 * k + 1)) +
          0.5 * (d(2 * j) * d(2 * k) + d(2 * j + 1) * d(2 * k + 1)) -
          (j == k ? 0.5 : 0.0);
      energy += w * re;
    }
  }
  double quartic_sum = 0.0;
  for (int j = 0; j < n; ++j) {
    double pr[5];
    site_quartic_parts(j, pr);
    const double a = pr[0], b = pr[1], c = pr[2], u = pr[3], v = pr[4];
    const double u2 = u * u, v2 = v * v;
    quartic_sum += (3.0 / 16.0) * (a * a + b * b) + 0.125 * a * b +
                   0.25 * c * c + 0.75 * (a * u2 + b * v2) +
                   0.25 * (b * u2 + a * v2) + c * u * v +
                   0.25 * (u2 + v2) * (u2 + v2) - 0.5 * (a + b) - (u2 + v2) +
                   0.5;
  }
  energy += 0.5 * lattice.gamma() * quartic_sum;
  double number = 0.0;
  for (int j = 0; j < n; ++j) number += site_mean(j);

  // Loss partials with respect to the scalar observables.
  const double w_energy = std::exp(energy / n) / n;
  const double w_number_all =
      2.0 * spec.weight_number * (number - spec.n_target);
  double w_site_a = 0.0, w_site_b = 0.0;
  if (spec.variant == LossVariant::bound) {
    const double na = site_mean(spec.site_a);
    const double nb = site_mean(spec.site_b);
    const double balance = spec.weight_balance * std::exp(na - nb);
    w_site_a = -spec.weight_peak * std::exp(-na) + balance;
    w_site_b = -balance;
  }

  // Accumulate d(loss)/d(g entries as read) and d(loss)/d(d).
  const int big = 2 * n;
  Eigen::MatrixXd gbar = Eigen::MatrixXd::Zero(big, big);
  Eigen::VectorXd dbar = Eigen::VectorXd::Zero(big);

  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < n; ++k) {
      const double w = lattice.omega()(j, k);
      if (w == 0.0) continue;
      const double ww = w_energy * w;
      gbar(2 * j, 2 * k) += 0.25 * ww;
      gbar(2 * j + 1, 2 * k + 1) += 0.25 * ww;
      dbar(2 * j) += 0.5 * ww * d(2 * k);
      dbar(2 * k) += 0.5 * ww * d(2 * j);
      dbar(2 * j + 1) += 0.5 * ww * d(2 * k + 1);
      dbar(2 * k + 1) += 0.5 * ww * d(2 * j + 1);
    }
  }
  const double wq = w_energy * 0.5 * lattice.gamma();
  for (int j = 0; j < n; ++j) {
    double pr[5];
    site_quartic_parts(j, pr);
    const double a = pr[0], b = pr[1], c = pr[2], u = pr[3], v = pr[4];
    const double u2 = u * u, v2 = v * v;
    const int q = 2 * j, p = 2 * j + 1;
    gbar(q, q) += wq * (0.375 * a + 0.125 * b + 0.75 * u2 + 0.25 * v2 - 0.5);
    gbar(p, p) += wq * (0.375 * b + 0.125 * a + 0.75 * v2 + 0.25 * u2 - 0.5);
    gbar(q, p) += wq * (0.5 * c + u * v);
    dbar(q) += wq * (1.5 * a * u + 0.5 * b * u + c * v + (u2 + v2) * u - 2.0 * u);
    dbar(p) += wq * (1.5 * b * v + 0.5 * a * v + c * u + (u2 + v2) * v - 2.0 * v);
  }
  for (int j = 0; j < n; ++j) {
    double w = w_number_all;
    if (spec.variant == LossVariant::bound) {
      if (j == spec.site_a) w += w_site_a;
      if (j == spec.site_b) w += w_site_b;
    }
    if (w == 0.0) continue;
    const int q = 2 * j, p = 2 * j + 1;
    gbar(q, q) += 0.25 * w;
    gbar(p, p) += 0.25 * w;
    dbar(q) += w * d(q);
    dbar(p) += w * d(p);
  }

  // Pull back through g = M M^T, M = MU MS, d = MU dd.
  const Eigen::MatrixXd mbar = (gbar + gbar.transpose()) * f.m;
  const Eigen::MatrixXd mu_bar =
      mbar * f.ms.transpose() + dbar * f.dd.transpose();
  const Eigen::MatrixXd ms_bar = f.mu.transpose() * mbar;
  const Eigen::VectorXd dd_bar = f.mu.transpose() * dbar;

  Eigen::VectorXd grad(AnsatzParams::parameter_count(n));
  int at = 0;
  for (int j = 0; j < n; ++j) {
    grad(at++) = std::sqrt(2.0) * dd_bar(2 * j);
    grad(at++) = std::sqrt(2.0) * dd_bar(2 * j + 1);
  }
  for (int j = 0; j < n; ++j) {
    const double r = params.zetas[j].r, theta = params.zetas[j].theta;
    const double ch = std::cosh(r), sh = std::sinh(r);
    const double cs = std::cos(theta), sn = std::sin(theta);
    const auto blk = ms_bar.block<2, 2>(2 * j, 2 * j);
    grad(at++) = blk(0, 0) * (sh - cs * ch) + blk(0, 1) * (-sn * ch) +
                 blk(1, 0) * (-sn * ch) + blk(1, 1) * (sh + cs * ch);
    grad(at++) = blk(0, 0) * (sn * sh) + blk(0, 1) * (-cs * sh) +
                 blk(1, 0) * (-cs * sh) + blk(1, 1) * (-sn * sh);
  }

  // Adjoint of U = exp(i H) in the eigenbasis of H.
  Eigen::MatrixXcd ubar(n, n);
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < n; ++k) {
      const double re = mu_bar(2 * j, 2 * k) + mu_bar(2 * j + 1, 2 * k + 1);
      const double im = mu_bar(2 * j + 1, 2 * k) - mu_bar(2 * j, 2 * k + 1);
      ubar(j, k) = Complex(re, im);
    }
  }
  Eigen::MatrixXcd core = f.vectors.adjoint() * ubar * f.vectors;
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      core(a, b) *= std::conj(detail::exp_divided_difference(f.lambda(a),
                                                             f.lambda(b)));
    }
  }
  const Eigen::MatrixXcd hbar = f.vectors * core * f.vectors.adjoint();

  for (int j = 0; j < n; ++j) grad(at++) = hbar(j, j).real();
  for (int j = 0; j < n; ++j) {
    for (int k = j + 1; k < n; ++k) {
      grad(at++) = hbar(j, k).real() + hbar(k, j).real();
      grad(at++) = hbar(j, k).imag() - hbar(k, j).imag();
    }
  }
  return grad;
}

/// Gradient in the mode the config asks for.
inline Eigen::VectorXd gradient(const AnsatzParams& params, const LossSpec& spec,
                                const LatticeHamiltonian& lattice,
                                const TrainConfig& config) {
  if (config.grad_mode == GradMode::analytic) {
    return analytic_gradient(params, spec, lattice);
  }
  return finite_difference_gradient(params, spec, lattice, config.fd_step);
}

/// Fresh parameters for a run: every coordinate uniform in (-0.1, 0.1) from
/// the seeded generator.
inline AnsatzParams initial_params(int n_modes, const TrainConfig& config) {
  std::mt19937_64 rng(config.seed);
  return AnsatzParams::random(n_modes, rng, 0.1);
}

/// Adam descent on the packed parameters. History rows are recorded at epoch
/// 0, every history_stride epochs, and at the final epoch; the negativity
/// column uses Alice = {site_a} for the bound variant and the central site
/// otherwise. A non-finite loss or gradient aborts the run and returns the
/// last finite parameters with `diverged` set.
inline TrainResult train(
    const AnsatzParams& init, const LossSpec& spec,
    const LatticeHamiltonian& lattice, const TrainConfig& config,
    const std::function<void(const HistoryRow&, const AnsatzParams&)>&
        on_record = nullptr) {
  const int n = init.n_modes();
  if (lattice.n_sites() != n) {
    throw std::invalid_argument(
        fmt::format("train: lattice has {} sites but the ansatz has {} modes",
                    lattice.n_sites(), n));
  }
  detail::validate_loss_spec(spec, n, "train");
  if (config.epochs < 1 || config.history_stride < 1 ||
      !(config.learning_rate > 0.0)) {
    throw std::invalid_argument(
        fmt::format("train: bad config (epochs {}, stride {}, lr {})",
                    config.epochs, config.history_stride, config.learning_rate));
  }
  // The negativity column needs a cut; a single mode has none and logs 0.
  std::optional<Bipartition> cut;
  if (n >= 2) {
    cut = spec.variant == LossVariant::bound
              ? Bipartition::single_site(spec.site_a, n)
              : Bipartition::center_site(n);
  }

  TrainResult result;
  Eigen::VectorXd p = init.pack();
  Eigen::VectorXd good = p;
  Eigen::VectorXd m = Eigen::VectorXd::Zero(p.size());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(p.size());

  auto record = [&](int epoch, const AnsatzParams& params,
                    const GaussianState& state, double loss) {
    HistoryRow row;
    row.epoch = epoch;
    row.loss = loss;
    row.mean_h = hamiltonian_expectation(state, lattice);
    row.mean_n = total_photon(state);
    row.log_negativity = cut ? log_negativity(state, *cut) : 0.0;
    result.history.rows.push_back(row);
    if (on_record) on_record(row, params);
  };

  {
    const GaussianState state = prepare_state(init);
    const double loss = loss_value(state, spec, lattice);
    if (!std::isfinite(loss)) {
      throw std::invalid_argument("train: loss is not finite at the start");
    }
    record(0, init, state, loss);
  }

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    AnsatzParams current = AnsatzParams::unpack(n, p);
    Eigen::VectorXd grad;
    try {
      grad = gradient(current, spec, lattice, config);
    } catch (const DivergenceError&) {
      result.diverged = true;
      break;
    } catch (const std::invalid_argument&) {
      // Overflowed parameters make the circuit builder reject its own
      // matrices; that is a divergence, not an API error (the configuration
      // was validated before the loop).
      result.diverged = true;
      break;
    }
    if (!grad.allFinite()) {
      result.diverged = true;
      break;
    }

    const double bc1 = 1.0 - std::pow(config.beta1, epoch);
    const double bc2 = 1.0 - std::pow(config.beta2, epoch);
    for (int i = 0; i < p.size(); ++i) {
      m(i) = config.beta1 * m(i) + (1.0 - config.beta1) * grad(i);
      v(i) = config.beta2 * v(i) + (1.0 - config.beta2) * grad(i) * grad(i);
      p(i) -= config.learning_rate * (m(i) / bc1) /
              (std::sqrt(v(i) / bc2) + config.epsilon);
    }

    const AnsatzParams stepped = AnsatzParams::unpack(n, p);
    double loss = std::numeric_limits<double>::quiet_NaN();
    std::optional<GaussianState> state;
    if (p.allFinite()) {
      try {
        state.emplace(prepare_state(stepped));
        loss = loss_value(*state, spec, lattice);
      } catch (const std::invalid_argument&) {
        // Same as above: a blown-up step, surfaced by the matrix validators.
      }
    }
    if (!std::isfinite(loss)) {
      result.diverged = true;
      p = good;
      break;
    }
    good = p;
    result.epochs_run = epoch;
    if (epoch % config.history_stride == 0 || epoch == config.epochs) {
      record(epoch, stepped, *state, loss);
    }
  }

  result.params = AnsatzParams::unpack(n, good);
  return result;
}

}  // namespace solitonlab
