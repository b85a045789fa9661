#pragma once

#include <cmath>
#include <complex>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "solitonlab/detail/numeric.hpp"
#include "solitonlab/gates.hpp"
#include "solitonlab/phase_space.hpp"

namespace solitonlab {

/// Single-mode squeezing zeta = r e^{i theta} in polar form; theta enters
/// only through cos/sin, so it is meaningful modulo 2 pi.
struct Squeezing {
  double r = 0.0;
  double theta = 0.0;
};

/// Variational circuit parameters: per-mode displacements delta_j, per-mode
/// squeezings zeta_j, and n^2 reals generating the mixing interferometer.
/// Total parameter count: n^2 + 4n.
///
/// Mixer packing: the first n entries are the diagonal of a Hermitian H;
/// then, for each pair j < k in row-major order, (Re H_jk, Im H_jk). The
/// interferometer is U = exp(i H).
///
/// Flat packing (pack/unpack, also the optimizer's coordinate order):
/// (Re delta_j, Im delta_j) pairs, then (r_j, theta_j) pairs, then the mixer.
struct AnsatzParams {
  std::vector<Complex> deltas;
  std::vector<Squeezing> zetas;
  std::vector<double> mixer;

  int n_modes() const { return static_cast<int>(deltas.size()); }

  static int parameter_count(int n_modes) {
    return n_modes * n_modes + 4 * n_modes;
  }

  static AnsatzParams zero(int n_modes) {
    if (n_modes < 1) {
      throw std::invalid_argument(fmt::format(
          "AnsatzParams::zero: n_modes must be >= 1, got {}", n_modes));
    }
    AnsatzParams p;
    p.deltas.assign(n_modes, Complex(0.0, 0.0));
    p.zetas.assign(n_modes, Squeezing{});
    p.mixer.assign(static_cast<std::size_t>(n_modes) * n_modes, 0.0);
    return p;
  }

  /// Every coordinate uniform in (-scale, scale), drawn in flat-packing order.
  static AnsatzParams random(int n_modes, std::mt19937_64& rng,
                             double scale = 0.1) {
    AnsatzParams p = zero(n_modes);
    for (int j = 0; j < n_modes; ++j) {
      const double re = detail::uniform(rng, -scale, scale);
      const double im = detail::uniform(rng, -scale, scale);
      p.deltas[j] = Complex(re, im);
    }
    for (int j = 0; j < n_modes; ++j) {
      p.zetas[j].r = detail::uniform(rng, -scale, scale);
      p.zetas[j].theta = detail::uniform(rng, -scale, scale);
    }
    for (auto& h : p.mixer) h = detail::uniform(rng, -scale, scale);
    return p;
  }

  Eigen::VectorXd pack() const {
    const int n = n_modes();
    Eigen::VectorXd v(parameter_count(n));
    int at = 0;
    for (int j = 0; j < n; ++j) {
      v(at++) = deltas[j].real();
      v(at++) = deltas[j].imag();
    }
    for (int j = 0; j < n; ++j) {
      v(at++) = zetas[j].r;
      v(at++) = zetas[j].theta;
    }
    for (double h : mixer) v(at++) = h;
    return v;
  }

  static AnsatzParams unpack(int n_modes, const Eigen::VectorXd& v) {
    if (v.size() != parameter_count(n_modes)) {
      throw std::invalid_argument(
          fmt::format("AnsatzParams::unpack: expected {} values for {} modes, "
                      "got {}",
                      parameter_count(n_modes), n_modes, v.size()));
    }
    AnsatzParams p = zero(n_modes);
    int at = 0;
    for (int j = 0; j < n_modes; ++j) {
      const double re = v(at++);
      const double im = v(at++);
      p.deltas[j] = Complex(re, im);
    }
    for (int j = 0; j < n_modes; ++j) {
      p.zetas[j].r = v(at++);
      p.zetas[j].theta = v(at++);
    }
    for (auto& h : p.mixer) h = v(at++);
    return p;
  }
};

namespace detail {

inline void validate_params(const AnsatzParams& p, const char* who) {
  const int n = p.n_modes();
  if (n < 1) {
    throw std::invalid_argument(fmt::format("{}: empty parameter set", who));
  }
  if (p.zetas.size() != static_cast<std::size_t>(n) ||
      p.mixer.size() != static_cast<std::size_t>(n) * n) {
    throw std::invalid_argument(fmt::format(
        "{}: inconsistent sizes (deltas {}, zetas {}, mixer {}; expected n, n, "
        "n^2)",
        who, p.deltas.size(), p.zetas.size(), p.mixer.size()));
  }
  for (int j = 0; j < n; ++j) {
    if (!std::isfinite(p.deltas[j].real()) || !std::isfinite(p.deltas[j].imag()) ||
        !std::isfinite(p.zetas[j].r) || !std::isfinite(p.zetas[j].theta)) {
      throw std::invalid_argument(
          fmt::format("{}: non-finite parameter at mode {}", who, j));
    }
  }
  for (double h : p.mixer) {
    if (!std::isfinite(h)) {
      throw std::invalid_argument(fmt::format("{}: non-finite mixer entry", who));
    }
  }
}

}  // namespace detail

/// Hermitian generator H assembled from the n^2 packed mixer reals.
inline Eigen::MatrixXcd generator_from_params(const std::vector<double>& mixer) {
  const int n = static_cast<int>(std::llround(std::sqrt(
      static_cast<double>(mixer.size()))));
  if (n < 1 || static_cast<std::size_t>(n) * n != mixer.size()) {
    throw std::invalid_argument(fmt::format(
        "generator_from_params: length {} is not a positive perfect square",
        mixer.size()));
  }
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(n, n);
  for (int j = 0; j < n; ++j) h(j, j) = mixer[j];
  int at = n;
  for (int j = 0; j < n; ++j) {
    for (int k = j + 1; k < n; ++k) {
      const double re = mixer[at++];
      const double im = mixer[at++];
      h(j, k) = Complex(re, im);
      h(k, j) = Complex(re, -im);
    }
  }
  return h;
}

/// U = exp(i H) via the Hermitian eigendecomposition of the generator;
/// unitary to machine precision.
inline Eigen::MatrixXcd unitary_from_params(const std::vector<double>& mixer) {
  const Eigen::MatrixXcd h = generator_from_params(mixer);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("unitary_from_params: eigendecomposition failed");
  }
  const Eigen::VectorXd lambda = es.eigenvalues();
  Eigen::VectorXcd phases(lambda.size());
  for (int i = 0; i < lambda.size(); ++i) {
    phases(i) = Complex(std::cos(lambda(i)), std::sin(lambda(i)));
  }
  return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

/// Full circuit as one affine-symplectic map: squeeze every mode, displace,
/// then mix. Equal to the compose chain of the individual gates.
inline AffineSymplectic circuit_transform(const AnsatzParams& params) {
  detail::validate_params(params, "circuit_transform");
  const int n = params.n_modes();
  Eigen::MatrixXd ms = Eigen::MatrixXd::Identity(2 * n, 2 * n);
  for (int j = 0; j < n; ++j) {
    ms.block<2, 2>(2 * j, 2 * j) =
        squeeze_block(params.zetas[j].r, params.zetas[j].theta);
  }
  const AffineSymplectic squeeze(std::move(ms), Eigen::VectorXd::Zero(2 * n));
  const AffineSymplectic displace = displacement_gate(params.deltas);
  const AffineSymplectic mix =
      interferometer_gate(unitary_from_params(params.mixer));
  return compose(compose(squeeze, displace), mix);
}

/// The ansatz state: the circuit applied to the vacuum.
inline GaussianState prepare_state(const AnsatzParams& params) {
  return apply(GaussianState::vacuum(params.n_modes()),
               circuit_transform(params));
}

/// JSON layout: {"deltas": [[re, im] * n], "zetas": [[r, theta] * n],
/// "h": [n^2 mixer reals]}.
inline nlohmann::json params_to_json(const AnsatzParams& params) {
  detail::validate_params(params, "params_to_json");
  nlohmann::json j;
  auto deltas = nlohmann::json::array();
  for (const auto& d : params.deltas) {
    deltas.push_back({d.real(), d.imag()});
  }
  auto zetas = nlohmann::json::array();
  for (const auto& z : params.zetas) {
    zetas.push_back({z.r, z.theta});
  }
  j["deltas"] = deltas;
  j["zetas"] = zetas;
  j["h"] = params.mixer;
  return j;
}

inline AnsatzParams params_from_json(const nlohmann::json& j) {
  if (!j.contains("deltas") || !j.contains("zetas") || !j.contains("h")) {
    throw std::invalid_argument("params_from_json: expected keys deltas, zetas, h");
  }
  AnsatzParams p;
  for (const auto& d : j.at("deltas")) {
    if (!d.is_array() || d.size() != 2) {
      throw std::invalid_argument("params_from_json: each delta is [re, im]");
    }
    p.deltas.emplace_back(d[0].get<double>(), d[1].get<double>());
  }
  for (const auto& z : j.at("zetas")) {
    if (!z.is_array() || z.size() != 2) {
      throw std::invalid_argument("params_from_json: each zeta is [r, theta]");
    }
    p.zetas.push_back(Squeezing{z[0].get<double>(), z[1].get<double>()});
  }
  p.mixer = j.at("h").get<std::vector<double>>();
  detail::validate_params(p, "params_from_json");
  return p;
}

}  // namespace solitonlab
