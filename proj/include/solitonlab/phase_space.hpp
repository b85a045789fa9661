#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace solitonlab {

using Complex = std::complex<double>;

/// Tolerance on max|M J M^T - J| for a transform to count as symplectic.
inline constexpr double kSymplecticTol = 1e-10;
/// Allowed slack below 1 for the doubled symplectic eigenvalues 2c_j of an
/// admissible covariance.
inline constexpr double kAdmissibilityTol = 1e-9;

/// Symplectic form J = diag_blocks([[0,1],[-1,0]]) in the interleaved
/// (q_0, p_0, q_1, p_1, ...) phase-space ordering.
inline Eigen::MatrixXd symplectic_form(int n_modes) {
  if (n_modes < 1) {
    throw std::invalid_argument(
        fmt::format("symplectic_form: n_modes must be >= 1, got {}", n_modes));
  }
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(2 * n_modes, 2 * n_modes);
  for (int m = 0; m < n_modes; ++m) {
    j(2 * m, 2 * m + 1) = 1.0;
    j(2 * m + 1, 2 * m) = -1.0;
  }
  return j;
}

namespace detail {

/// Relative gap above which the two copies of a symplectic eigenvalue are
/// considered distinct (pairing failure).
inline constexpr double kSymplecticPairTol = 1e-8;

inline void require_even_square(const Eigen::MatrixXd& m, const char* who) {
  if (m.rows() != m.cols() || m.rows() < 2 || m.rows() % 2 != 0) {
    throw std::invalid_argument(fmt::format(
        "{}: expected an even square matrix, got {}x{}", who, m.rows(), m.cols()));
  }
}

inline void require_symmetric(const Eigen::MatrixXd& m, double tol, const char* who) {
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (!(asym <= tol)) {
    throw std::invalid_argument(
        fmt::format("{}: matrix is not symmetric (max|m - m^T| = {:.3e})", who, asym));
  }
}

/// Collapses the 2n moduli coming from an eigendecomposition into n doubly
/// degenerate symplectic eigenvalues, checking the pairing.
inline std::vector<double> collapse_pairs(std::vector<double> c, const char* who) {
  std::sort(c.begin(), c.end());
  std::vector<double> out;
  out.reserve(c.size() / 2);
  for (std::size_t i = 0; i + 1 < c.size(); i += 2) {
    const double lo = c[i], hi = c[i + 1];
    if (hi - lo > kSymplecticPairTol * std::max(1.0, hi)) {
      throw std::runtime_error(fmt::format(
          "{}: symplectic eigenvalues failed to pair up ({:.12g} vs {:.12g})",
          who, lo, hi));
    }
    out.push_back(0.5 * (lo + hi));
  }
  return out;
}

/// Symplectic spectrum of a symmetric covariance g: moduli of the eigenvalues
/// of J^T g / 2, obtained from the squared map (whose spectrum is -c_j^2, each
/// value twice). Returns the n values in ascending order.
inline std::vector<double> symplectic_spectrum(const Eigen::MatrixXd& g) {
  require_even_square(g, "symplectic_spectrum");
  const int n = static_cast<int>(g.rows()) / 2;
  const Eigen::MatrixXd k = 0.5 * symplectic_form(n).transpose() * g;
  const Eigen::MatrixXd b = k * k;
  Eigen::EigenSolver<Eigen::MatrixXd> es(b, /*computeEigenvectors=*/false);
  std::vector<double> c;
  c.reserve(2 * n);
  for (int i = 0; i < 2 * n; ++i) c.push_back(std::sqrt(std::abs(es.eigenvalues()(i))));
  return collapse_pairs(std::move(c), "symplectic_spectrum");
}

/// Alternative route: eigenvalues of J^T g / 2 directly (they come in +-i c_j
/// pairs); kept as an independent cross-check of symplectic_spectrum.
inline std::vector<double> symplectic_spectrum_direct(const Eigen::MatrixXd& g) {
  require_even_square(g, "symplectic_spectrum_direct");
  const int n = static_cast<int>(g.rows()) / 2;
  const Eigen::MatrixXd k = 0.5 * symplectic_form(n).transpose() * g;
  Eigen::EigenSolver<Eigen::MatrixXd> es(k, /*computeEigenvectors=*/false);
  std::vector<double> c;
  c.reserve(2 * n);
  for (int i = 0; i < 2 * n; ++i) c.push_back(std::abs(es.eigenvalues()(i)));
  return collapse_pairs(std::move(c), "symplectic_spectrum_direct");
}

}  // namespace detail

/// Affine map x -> M x + shift with M symplectic (M J M^T = J within
/// kSymplecticTol, checked at construction).
class AffineSymplectic {
 public:
  AffineSymplectic(Eigen::MatrixXd m, Eigen::VectorXd shift)
      : m_(std::move(m)), shift_(std::move(shift)) {
    detail::require_even_square(m_, "AffineSymplectic");
    if (shift_.size() != m_.rows()) {
      throw std::invalid_argument(
          fmt::format("AffineSymplectic: shift has length {} but M is {}x{}",
                      shift_.size(), m_.rows(), m_.cols()));
    }
    if (!m_.allFinite() || !shift_.allFinite()) {
      throw std::invalid_argument("AffineSymplectic: non-finite entries");
    }
    const Eigen::MatrixXd j = symplectic_form(n_modes());
    const double res = (m_ * j * m_.transpose() - j).cwiseAbs().maxCoeff();
    if (!(res <= kSymplecticTol)) {
      throw std::invalid_argument(fmt::format(
          "AffineSymplectic: matrix is not symplectic (max|MJM^T - J| = {:.3e})",
          res));
    }
  }

  static AffineSymplectic identity(int n_modes) {
    if (n_modes < 1) {
      throw std::invalid_argument(fmt::format(
          "AffineSymplectic::identity: n_modes must be >= 1, got {}", n_modes));
    }
    return AffineSymplectic(Eigen::MatrixXd::Identity(2 * n_modes, 2 * n_modes),
                            Eigen::VectorXd::Zero(2 * n_modes));
  }

  int n_modes() const { return static_cast<int>(m_.rows()) / 2; }
  int dim() const { return static_cast<int>(m_.rows()); }
  const Eigen::MatrixXd& matrix() const { return m_; }
  const Eigen::VectorXd& shift() const { return shift_; }

 private:
  Eigen::MatrixXd m_;
  Eigen::VectorXd shift_;
};

/// Transform that acts as `first`, then `second`: M = M2 M1,
/// shift = M2 d1 + d2.
inline AffineSymplectic compose(const AffineSymplectic& first,
                                const AffineSymplectic& second) {
  if (first.dim() != second.dim()) {
    throw std::invalid_argument(
        fmt::format("compose: dimension mismatch ({} vs {})", first.dim(),
                    second.dim()));
  }
  return AffineSymplectic(second.matrix() * first.matrix(),
                          second.matrix() * first.shift() + second.shift());
}

/// Inverse transform; uses M^{-1} = J M^T J^T, exact for symplectic M.
inline AffineSymplectic invert(const AffineSymplectic& t) {
  const Eigen::MatrixXd j = symplectic_form(t.n_modes());
  const Eigen::MatrixXd minv = j * t.matrix().transpose() * j.transpose();
  return AffineSymplectic(minv, -(minv * t.shift()));
}

/// Gaussian state over n modes in the interleaved (q_0, p_0, ...) layout,
/// determined by its characteristic function
///   chi(x) = exp(-x g x^T / 4 + i x . d).
/// The vacuum has g = I, d = 0. Construction validates symmetry and
/// admissibility (all symplectic eigenvalues >= (1 - kAdmissibilityTol)/2).
class GaussianState {
 public:
  GaussianState(int n_modes, Eigen::MatrixXd g, Eigen::VectorXd d)
      : GaussianState(Unchecked{}, n_modes, validated_symmetric(std::move(g)),
                      std::move(d)) {
    const auto spectrum = detail::symplectic_spectrum(g_);
    const double lowest = 2.0 * spectrum.front();
    if (!(lowest >= 1.0 - kAdmissibilityTol)) {
      throw std::invalid_argument(fmt::format(
          "GaussianState: covariance is not admissible (min 2c_j = {:.12g} < 1)",
          lowest));
    }
  }

  static GaussianState vacuum(int n_modes) {
    if (n_modes < 1) {
      throw std::invalid_argument(fmt::format(
          "GaussianState::vacuum: n_modes must be >= 1, got {}", n_modes));
    }
    return GaussianState(Unchecked{}, n_modes,
                         Eigen::MatrixXd::Identity(2 * n_modes, 2 * n_modes),
                         Eigen::VectorXd::Zero(2 * n_modes));
  }

  int n_modes() const { return n_modes_; }
  int dim() const { return 2 * n_modes_; }
  const Eigen::MatrixXd& covariance() const { return g_; }
  const Eigen::VectorXd& displacement() const { return d_; }

 private:
  // Tag for states whose admissibility is guaranteed structurally (vacuum,
  // or the image of an admissible state under a validated symplectic map),
  // so the O(N^3) spectral check can be skipped.
  struct Unchecked {};

  // Raw covariances must be symmetric within tolerance; products M g M^T are
  // symmetric by construction and skip this gate.
  static Eigen::MatrixXd validated_symmetric(Eigen::MatrixXd g) {
    detail::require_even_square(g, "GaussianState");
    detail::require_symmetric(g, kAdmissibilityTol, "GaussianState");
    return g;
  }

  GaussianState(Unchecked, int n_modes, Eigen::MatrixXd g, Eigen::VectorXd d)
      : n_modes_(n_modes), g_(std::move(g)), d_(std::move(d)) {
    if (n_modes_ < 1) {
      throw std::invalid_argument(
          fmt::format("GaussianState: n_modes must be >= 1, got {}", n_modes_));
    }
    const int n = 2 * n_modes_;
    if (g_.rows() != n || g_.cols() != n || d_.size() != n) {
      throw std::invalid_argument(fmt::format(
          "GaussianState: expected {}x{} covariance and length-{} displacement, "
          "got {}x{} and {}",
          n, n, n, g_.rows(), g_.cols(), d_.size()));
    }
    if (!g_.allFinite() || !d_.allFinite()) {
      throw std::invalid_argument("GaussianState: non-finite entries");
    }
    g_ = (0.5 * (g_ + g_.transpose())).eval();  // exact symmetry from here on
  }

  friend GaussianState apply(const GaussianState& state,
                             const AffineSymplectic& t);

  int n_modes_;
  Eigen::MatrixXd g_;
  Eigen::VectorXd d_;
};

/// Image of a Gaussian state under an affine-symplectic map:
/// g -> M g M^T, d -> M d + shift. Admissibility is preserved exactly, so the
/// result skips the spectral re-check.
inline GaussianState apply(const GaussianState& state, const AffineSymplectic& t) {
  if (state.dim() != t.dim()) {
    throw std::invalid_argument(
        fmt::format("apply: state has {} modes but transform has {}",
                    state.n_modes(), t.n_modes()));
  }
  Eigen::MatrixXd g = t.matrix() * state.covariance() * t.matrix().transpose();
  Eigen::VectorXd d = t.matrix() * state.displacement() + t.shift();
  return GaussianState(GaussianState::Unchecked{}, state.n_modes(),
                       std::move(g), std::move(d));
}

/// Characteristic function chi(x) = exp(-x g x^T / 4 + i x . d).
inline Complex char_fn(const GaussianState& state, const Eigen::VectorXd& x) {
  if (x.size() != state.dim()) {
    throw std::invalid_argument(
        fmt::format("char_fn: argument has length {}, expected {}", x.size(),
                    state.dim()));
  }
  const double quad = x.dot(state.covariance() * x);
  const double phase = x.dot(state.displacement());
  return std::exp(-0.25 * quad) * Complex(std::cos(phase), std::sin(phase));
}

struct Moments {
  Eigen::VectorXd d;
  Eigen::MatrixXd g;
};

/// Recovers (d, g) from central finite differences of the characteristic
/// function only — the independent check that the closed-form moments mean
/// what they claim. d_q = dchi_I/dx_q at 0; g_pq = -2 d2chi_R - 2 d_p d_q.
inline Moments numeric_moments(const GaussianState& state) {
  const int n = state.dim();
  const double h = 1e-3;
  const auto chi = [&state](const Eigen::VectorXd& x) { return char_fn(state, x); };

  Moments out;
  out.d = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  for (int q = 0; q < n; ++q) {
    x(q) = h;
    const double plus = chi(x).imag();
    x(q) = -h;
    const double minus = chi(x).imag();
    x(q) = 0.0;
    out.d(q) = (plus - minus) / (2.0 * h);
  }

  out.g = Eigen::MatrixXd::Zero(n, n);
  for (int p = 0; p < n; ++p) {
    for (int q = p; q < n; ++q) {
      double d2;
      if (p == q) {
        x(p) = h;
        const double fp = chi(x).real();
        x(p) = -h;
        const double fm = chi(x).real();
        x(p) = 0.0;
        d2 = (fp - 2.0 + fm) / (h * h);  // chi(0) = 1 exactly
      } else {
        x(p) = h;
        x(q) = h;
        const double fpp = chi(x).real();
        x(q) = -h;
        const double fpm = chi(x).real();
        x(p) = -h;
        const double fmm = chi(x).real();
        x(q) = h;
        const double fmp = chi(x).real();
        x(p) = 0.0;
        x(q) = 0.0;
        d2 = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
      }
      const double val = -2.0 * d2 - 2.0 * out.d(p) * out.d(q);
      out.g(p, q) = val;
      out.g(q, p) = val;
    }
  }
  return out;
}

/// JSON layout: {"n_modes": n, "g": [row-major 2n*2n], "d": [2n]}.
inline nlohmann::json state_to_json(const GaussianState& state) {
  nlohmann::json j;
  j["n_modes"] = state.n_modes();
  std::vector<double> g;
  g.reserve(static_cast<std::size_t>(state.dim()) * state.dim());
  for (int r = 0; r < state.dim(); ++r) {
    for (int c = 0; c < state.dim(); ++c) g.push_back(state.covariance()(r, c));
  }
  j["g"] = g;
  std::vector<double> d(state.displacement().data(),
                        state.displacement().data() + state.dim());
  j["d"] = d;
  return j;
}

inline GaussianState state_from_json(const nlohmann::json& j) {
  if (!j.contains("n_modes") || !j.contains("g") || !j.contains("d")) {
    throw std::invalid_argument(
        "state_from_json: expected keys n_modes, g, d");
  }
  const int n_modes = j.at("n_modes").get<int>();
  if (n_modes < 1) {
    throw std::invalid_argument(
        fmt::format("state_from_json: n_modes must be >= 1, got {}", n_modes));
  }
  const int n = 2 * n_modes;
  const auto g_flat = j.at("g").get<std::vector<double>>();
  const auto d_flat = j.at("d").get<std::vector<double>>();
  if (g_flat.size() != static_cast<std::size_t>(n) * n ||
      d_flat.size() != static_cast<std::size_t>(n)) {
    throw std::invalid_argument(fmt::format(
        "state_from_json: expected {} covariance entries and {} displacement "
        "entries, got {} and {}",
        n * n, n, g_flat.size(), d_flat.size()));
  }
  Eigen::MatrixXd g(n, n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) g(r, c) = g_flat[static_cast<std::size_t>(r) * n + c];
  }
  Eigen::VectorXd d = Eigen::Map<const Eigen::VectorXd>(d_flat.data(), n);
  return GaussianState(n_modes, std::move(g), std::move(d));
}

}  // namespace solitonlab
