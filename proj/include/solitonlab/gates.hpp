#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "solitonlab/phase_space.hpp"

namespace solitonlab {

/// Tolerance on max|U^dag U - I| for matrices fed to the passive-gate
/// builders; rejects bad inputs before the symplectic output check can fire.
inline constexpr double kUnitarityTol = 1e-8;

/// Rectangular 0/1 matrices that embed the n mode axes into the 2n phase
/// space: (Rq)_{2j,j} = 1 selects positions, (Rp)_{2j+1,j} = 1 momenta.
/// They satisfy Rq^T Rq = Rp^T Rp = I, Rq^T Rp = 0, Rq Rq^T + Rp Rp^T = I,
/// and J = Rp Rq^T - Rq Rp^T.
struct EmbeddingMatrices {
  Eigen::MatrixXd rq;
  Eigen::MatrixXd rp;
};

inline EmbeddingMatrices embedding_matrices(int n_modes) {
  if (n_modes < 1) {
    throw std::invalid_argument(fmt::format(
        "embedding_matrices: n_modes must be >= 1, got {}", n_modes));
  }
  EmbeddingMatrices e;
  e.rq = Eigen::MatrixXd::Zero(2 * n_modes, n_modes);
  e.rp = Eigen::MatrixXd::Zero(2 * n_modes, n_modes);
  for (int j = 0; j < n_modes; ++j) {
    e.rq(2 * j, j) = 1.0;
    e.rp(2 * j + 1, j) = 1.0;
  }
  return e;
}

/// Phase-space displacement by alpha_j per mode: identity matrix part and
/// shift (sqrt(2) Re alpha_j, sqrt(2) Im alpha_j) interleaved.
inline AffineSymplectic displacement_gate(const std::vector<Complex>& alphas) {
  if (alphas.empty()) {
    throw std::invalid_argument("displacement_gate: need at least one mode");
  }
  const int n = static_cast<int>(alphas.size());
  Eigen::VectorXd shift(2 * n);
  for (int j = 0; j < n; ++j) {
    if (!std::isfinite(alphas[j].real()) || !std::isfinite(alphas[j].imag())) {
      throw std::invalid_argument(
          fmt::format("displacement_gate: alpha[{}] is not finite", j));
    }
    shift(2 * j) = std::sqrt(2.0) * alphas[j].real();
    shift(2 * j + 1) = std::sqrt(2.0) * alphas[j].imag();
  }
  return AffineSymplectic(Eigen::MatrixXd::Identity(2 * n, 2 * n),
                          std::move(shift));
}

/// 2x2 phase-space matrix of a single-mode squeezer with zeta = r e^{i theta}:
///   [[cosh r - cos(theta) sinh r,  -sin(theta) sinh r],
///    [-sin(theta) sinh r,          cosh r + cos(theta) sinh r]],
/// which at theta = 0 is diag(e^-r, e^r).
inline Eigen::Matrix2d squeeze_block(double r, double theta) {
  if (!std::isfinite(r) || !std::isfinite(theta)) {
    throw std::invalid_argument("squeeze_block: parameters must be finite");
  }
  const double ch = std::cosh(r), sh = std::sinh(r);
  const double c = std::cos(theta), s = std::sin(theta);
  Eigen::Matrix2d m;
  m << ch - c * sh, -s * sh, -s * sh, ch + c * sh;
  return m;
}

/// Squeezer on one mode of an n-mode register; identity elsewhere.
inline AffineSymplectic squeeze_gate(int n_modes, int mode, double r,
                                     double theta) {
  if (n_modes < 1) {
    throw std::invalid_argument(
        fmt::format("squeeze_gate: n_modes must be >= 1, got {}", n_modes));
  }
  if (mode < 0 || mode >= n_modes) {
    throw std::invalid_argument(fmt::format(
        "squeeze_gate: mode {} out of range for {} modes", mode, n_modes));
  }
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(2 * n_modes, 2 * n_modes);
  m.block<2, 2>(2 * mode, 2 * mode) = squeeze_block(r, theta);
  return AffineSymplectic(std::move(m), Eigen::VectorXd::Zero(2 * n_modes));
}

namespace detail {

inline void require_unitary(const Eigen::MatrixXcd& u, const char* who) {
  if (u.rows() != u.cols() || u.rows() < 1) {
    throw std::invalid_argument(fmt::format(
        "{}: expected a square matrix, got {}x{}", who, u.rows(), u.cols()));
  }
  const double res =
      (u.adjoint() * u -
       Eigen::MatrixXcd::Identity(u.rows(), u.cols()))
          .cwiseAbs()
          .maxCoeff();
  if (!(res <= kUnitarityTol)) {
    throw std::invalid_argument(fmt::format(
        "{}: matrix is not unitary (max|U^dag U - I| = {:.3e})", who, res));
  }
}

}  // namespace detail

/// Passive interferometer: for unitary U acting on the mode operators, the
/// phase-space matrix is
///   M = Rq U_R Rq^T + Rp U_R Rp^T + Rp U_I Rq^T - Rq U_I Rp^T.
inline AffineSymplectic interferometer_gate(const Eigen::MatrixXcd& u) {
  detail::require_unitary(u, "interferometer_gate");
  const int n = static_cast<int>(u.rows());
  const EmbeddingMatrices e = embedding_matrices(n);
  const Eigen::MatrixXd ur = u.real(), ui = u.imag();
  Eigen::MatrixXd m = e.rq * ur * e.rq.transpose() +
                      e.rp * ur * e.rp.transpose() +
                      e.rp * ui * e.rq.transpose() -
                      e.rq * ui * e.rp.transpose();
  return AffineSymplectic(std::move(m), Eigen::VectorXd::Zero(2 * n));
}

/// General linear (Bogoliubov) transformation a~_j = sum_k U_jk a_k +
/// W_jk a_k^dag, as the phase-space matrix M = M1 + M2 with
///   M1 = Rq (U_R + W_R) Rq^T + Rp (U_R - W_R) Rp^T,
///   M2 = Rp (U_I + W_I) Rq^T + Rq (-U_I + W_I) Rp^T.
/// The pair must define a canonical map; non-symplectic (U, W) is rejected.
inline AffineSymplectic bogoliubov_gate(const Eigen::MatrixXcd& u,
                                        const Eigen::MatrixXcd& w) {
  if (u.rows() != u.cols() || u.rows() < 1 || w.rows() != u.rows() ||
      w.cols() != u.cols()) {
    throw std::invalid_argument(
        fmt::format("bogoliubov_gate: expected equal square matrices, got "
                    "{}x{} and {}x{}",
                    u.rows(), u.cols(), w.rows(), w.cols()));
  }
  const int n = static_cast<int>(u.rows());
  const EmbeddingMatrices e = embedding_matrices(n);
  const Eigen::MatrixXd ur = u.real(), ui = u.imag();
  const Eigen::MatrixXd wr = w.real(), wi = w.imag();
  Eigen::MatrixXd m = e.rq * (ur + wr) * e.rq.transpose() +
                      e.rp * (ur - wr) * e.rp.transpose() +
                      e.rp * (ui + wi) * e.rq.transpose() +
                      e.rq * (wi - ui) * e.rp.transpose();
  const Eigen::MatrixXd j = symplectic_form(n);
  const double res = (m * j * m.transpose() - j).cwiseAbs().maxCoeff();
  if (!(res <= kSymplecticTol)) {
    throw std::invalid_argument(fmt::format(
        "bogoliubov_gate: (U, W) do not define a canonical transformation "
        "(max|MJM^T - J| = {:.3e})",
        res));
  }
  return AffineSymplectic(std::move(m), Eigen::VectorXd::Zero(2 * n));
}

}  // namespace solitonlab
