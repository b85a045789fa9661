#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "solitonlab/phase_space.hpp"

namespace solitonlab {

/// Symplectic eigenvalues c_j treated as exactly 1/2 when within this slack
/// (pure-state roundoff must not leak into the negativity).
inline constexpr double kNegativityFloor = 1e-12;

/// Alice's side of a mode bipartition; the complement is Bob's.
class Bipartition {
 public:
  Bipartition(std::vector<int> alice_sites, int n_modes)
      : alice_(std::move(alice_sites)), n_modes_(n_modes) {
    if (n_modes_ < 2) {
      throw std::invalid_argument(fmt::format(
          "Bipartition: need at least 2 modes to bipartition, got {}", n_modes_));
    }
    if (alice_.empty() || alice_.size() >= static_cast<std::size_t>(n_modes_)) {
      throw std::invalid_argument(fmt::format(
          "Bipartition: alice must be a non-empty proper subset ({} of {} modes)",
          alice_.size(), n_modes_));
    }
    std::set<int> seen;
    for (int site : alice_) {
      if (site < 0 || site >= n_modes_) {
        throw std::invalid_argument(fmt::format(
            "Bipartition: site {} out of range for {} modes", site, n_modes_));
      }
      if (!seen.insert(site).second) {
        throw std::invalid_argument(
            fmt::format("Bipartition: duplicate site {}", site));
      }
    }
    std::sort(alice_.begin(), alice_.end());
  }

  static Bipartition single_site(int site, int n_modes) {
    return Bipartition(std::vector<int>{site}, n_modes);
  }

  /// The central site (floor(n/2) in 0-based labels).
  static Bipartition center_site(int n_modes) {
    return single_site(n_modes / 2, n_modes);
  }

  const std::vector<int>& alice() const { return alice_; }
  int n_modes() const { return n_modes_; }

 private:
  std::vector<int> alice_;
  int n_modes_;
};

/// Covariance of the partially transposed state: momentum rows and columns of
/// Alice's modes flip sign. Not necessarily admissible — that failure is the
/// entanglement signal — so a plain matrix is returned.
inline Eigen::MatrixXd partial_transpose(const GaussianState& state,
                                         const Bipartition& cut) {
  if (cut.n_modes() != state.n_modes()) {
    throw std::invalid_argument(
        fmt::format("partial_transpose: bipartition is over {} modes but state "
                    "has {}",
                    cut.n_modes(), state.n_modes()));
  }
  Eigen::MatrixXd g = state.covariance();
  for (int site : cut.alice()) {
    g.row(2 * site + 1) *= -1.0;
    g.col(2 * site + 1) *= -1.0;
  }
  return g;
}

/// Symplectic spectrum of a symmetric (not necessarily admissible) covariance:
/// the moduli of the eigenvalues of J^T g / 2, ascending. Admissible states
/// have all values >= 1/2; the vacuum sits exactly at 1/2.
inline std::vector<double> symplectic_eigenvalues(const Eigen::MatrixXd& g) {
  detail::require_even_square(g, "symplectic_eigenvalues");
  detail::require_symmetric(g, 1e-9, "symplectic_eigenvalues");
  return detail::symplectic_spectrum(g);
}

/// Logarithmic negativity across the cut:
///   E_N = -sum_j log2(min(1, 2 c~_j))
/// over the symplectic eigenvalues c~_j of the partially transposed
/// covariance. Values within kNegativityFloor of 1/2 count as exactly 1/2.
inline double log_negativity(const GaussianState& state, const Bipartition& cut) {
  const Eigen::MatrixXd gt = partial_transpose(state, cut);
  const std::vector<double> c = detail::symplectic_spectrum(gt);
  double total = 0.0;
  for (double cj : c) {
    if (std::abs(cj - 0.5) <= kNegativityFloor) continue;
    if (2.0 * cj < 1.0) total -= std::log2(2.0 * cj);
  }
  return total;
}

}  // namespace solitonlab
