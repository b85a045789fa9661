#pragma once

#include <cmath>
#include <complex>
#include <ostream>
#include <stdexcept>

#include <Eigen/Dense>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "solitonlab/phase_space.hpp"

namespace solitonlab {

/// H = sum_jk omega_jk a_j^dag a_k + (gamma/2) sum_j a_j^dag a_j^dag a_j a_j
/// with a real symmetric hopping matrix omega.
class LatticeHamiltonian {
 public:
  LatticeHamiltonian(Eigen::MatrixXd omega, double gamma)
      : omega_(std::move(omega)), gamma_(gamma) {
    if (omega_.rows() != omega_.cols() || omega_.rows() < 1) {
      throw std::invalid_argument(
          fmt::format("LatticeHamiltonian: omega must be square, got {}x{}",
                      omega_.rows(), omega_.cols()));
    }
    if (!omega_.allFinite() || !std::isfinite(gamma_)) {
      throw std::invalid_argument("LatticeHamiltonian: non-finite entries");
    }
    const double asym = (omega_ - omega_.transpose()).cwiseAbs().maxCoeff();
    if (!(asym <= 1e-12)) {
      throw std::invalid_argument(fmt::format(
          "LatticeHamiltonian: omega is not symmetric (max|w - w^T| = {:.3e})",
          asym));
    }
  }

  /// Nearest-neighbour chain with open ends: omega_jk = -1 iff |j-k| = 1.
  static LatticeHamiltonian open_chain(int n_sites, double gamma) {
    if (n_sites < 1) {
      throw std::invalid_argument(fmt::format(
          "LatticeHamiltonian::open_chain: n_sites must be >= 1, got {}",
          n_sites));
    }
    Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(n_sites, n_sites);
    for (int j = 0; j + 1 < n_sites; ++j) {
      omega(j, j + 1) = -1.0;
      omega(j + 1, j) = -1.0;
    }
    return LatticeHamiltonian(std::move(omega), gamma);
  }

  int n_sites() const { return static_cast<int>(omega_.rows()); }
  double gamma() const { return gamma_; }
  const Eigen::MatrixXd& omega() const { return omega_; }

 private:
  Eigen::MatrixXd omega_;
  double gamma_;
};

namespace detail {

inline void require_mode(const GaussianState& state, int mode, const char* who) {
  if (mode < 0 || mode >= state.n_modes()) {
    throw std::invalid_argument(fmt::format(
        "{}: mode {} out of range for {} modes", who, mode, state.n_modes()));
  }
}

}  // namespace detail

/// <a_j^dag a_j> (normal ordered), i.e. photon number at one site.
inline double mean_photon(const GaussianState& state, int mode) {
  detail::require_mode(state, mode, "mean_photon");
  const auto& g = state.covariance();
  const auto& d = state.displacement();
  const int q = 2 * mode, p = 2 * mode + 1;
  return 0.25 * (g(q, q) + g(p, p)) + 0.5 * (d(q) * d(q) + d(p) * d(p)) - 0.5;
}

/// <N> = sum_j <a_j^dag a_j>.
inline double total_photon(const GaussianState& state) {
  double total = 0.0;
  for (int j = 0; j < state.n_modes(); ++j) total += mean_photon(state, j);
  return total;
}

/// |<a_j>|^2, the coherent-amplitude intensity at one site.
inline double displacement_intensity(const GaussianState& state, int mode) {
  detail::require_mode(state, mode, "displacement_intensity");
  const auto& d = state.displacement();
  return 0.5 * (d(2 * mode) * d(2 * mode) + d(2 * mode + 1) * d(2 * mode + 1));
}

/// <a_j^dag a_k> (normal ordered). Hermitian in (j, k); the diagonal
/// reproduces mean_photon exactly.
inline Complex quadratic_expectation(const GaussianState& state, int j, int k) {
  detail::require_mode(state, j, "quadratic_expectation");
  detail::require_mode(state, k, "quadratic_expectation");
  const auto& g = state.covariance();
  const auto& d = state.displacement();
  const int qj = 2 * j, pj = 2 * j + 1, qk = 2 * k, pk = 2 * k + 1;
  const double re = 0.25 * (g(qj, qk) + g(pj, pk)) +
                    0.5 * (d(qj) * d(qk) + d(pj) * d(pk)) -
                    (j == k ? 0.5 : 0.0);
  const double im = 0.25 * (g(qj, pk) - g(pj, qk)) +
                    0.5 * (d(qj) * d(pk) - d(pj) * d(qk));
  return Complex(re, im);
}

/// <a_j^dag a_j^dag a_j a_j> (normal ordered on-site quartic moment). With
/// a = g_qq, b = g_pp, c = g_qp, u = d_q, v = d_p at the site:
///   3/16 (a^2 + b^2) + ab/8 + c^2/4 + 3/4 (a u^2 + b v^2)
///   + 1/4 (b u^2 + a v^2) + c u v + (u^2 + v^2)^2 / 4
///   - (a + b)/2 - (u^2 + v^2) + 1/2.
/// Vacuum gives 0, a coherent state |alpha|^4, squeezed vacuum 3s^2 + s with
/// s = sinh^2 r.
inline double quartic_expectation(const GaussianState& state, int mode) {
  detail::require_mode(state, mode, "quartic_expectation");
  const auto& g = state.covariance();
  const auto& d = state.displacement();
  const int q = 2 * mode, p = 2 * mode + 1;
  const double a = g(q, q), b = g(p, p), c = g(q, p);
  const double u = d(q), v = d(p);
  const double u2 = u * u, v2 = v * v;
  return (3.0 / 16.0) * (a * a + b * b) + 0.125 * a * b + 0.25 * c * c +
         0.75 * (a * u2 + b * v2) + 0.25 * (b * u2 + a * v2) + c * u * v +
         0.25 * (u2 + v2) * (u2 + v2) - 0.5 * (a + b) - (u2 + v2) + 0.5;
}

/// <sum_jk omega_jk a_j^dag a_k> for a Hermitian (possibly complex) hopping
/// matrix; the result is real for Hermitian omega.
inline double kinetic_expectation(const GaussianState& state,
                                  const Eigen::MatrixXcd& omega) {
  const int n = state.n_modes();
  if (omega.rows() != n || omega.cols() != n) {
    throw std::invalid_argument(
        fmt::format("kinetic_expectation: omega is {}x{} but state has {} modes",
                    omega.rows(), omega.cols(), n));
  }
  const double herm =
      (omega - omega.adjoint()).cwiseAbs().maxCoeff();
  if (!(herm <= 1e-9)) {
    throw std::invalid_argument(fmt::format(
        "kinetic_expectation: omega is not Hermitian (max|w - w^dag| = {:.3e})",
        herm));
  }
  double total = 0.0;
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < n; ++k) {
      const Complex w = omega(j, k);
      if (w == Complex(0.0, 0.0)) continue;
      const Complex q = quadratic_expectation(state, j, k);
      total += w.real() * q.real() - w.imag() * q.imag();
    }
  }
  return total;
}

/// <H> = <K> + (gamma/2) sum_j <a_j^dag a_j^dag a_j a_j>.
inline double hamiltonian_expectation(const GaussianState& state,
                                      const LatticeHamiltonian& h) {
  const int n = state.n_modes();
  if (h.n_sites() != n) {
    throw std::invalid_argument(fmt::format(
        "hamiltonian_expectation: lattice has {} sites but state has {} modes",
        h.n_sites(), n));
  }
  double kinetic = 0.0;
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < n; ++k) {
      const double w = h.omega()(j, k);
      if (w == 0.0) continue;
      kinetic += w * quadratic_expectation(state, j, k).real();
    }
  }
  double quartic = 0.0;
  for (int j = 0; j < n; ++j) quartic += quartic_expectation(state, j);
  return kinetic + 0.5 * h.gamma() * quartic;
}

/// CSV rows `site,mean_photon,displacement_intensity`, one per mode.
inline void write_site_profile_csv(std::ostream& out,
                                   const GaussianState& state) {
  out << "site,mean_photon,displacement_intensity\n";
  for (int j = 0; j < state.n_modes(); ++j) {
    out << fmt::format("{},{:.17g},{:.17g}\n", j, mean_photon(state, j),
                       displacement_intensity(state, j));
  }
}

}  // namespace solitonlab
