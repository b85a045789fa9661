#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include "solitonlab/ansatz.hpp"
#include "solitonlab/observables.hpp"
#include "solitonlab/sampling.hpp"

// Truncated Fock-space cross-check of the phase-space engine. Everything here
// is computed from ladder-operator matrices and state vectors; no numeric
// kernel is shared with the closed forms it certifies.

namespace solitonlab {

/// Truncation leakage above this fraction of the norm aborts preparation.
inline constexpr double kLeakageTol = 1e-4;

struct CutoffError : std::runtime_error {
  CutoffError(const std::string& what, int suggested)
      : std::runtime_error(what), suggested_cutoff(suggested) {}
  int suggested_cutoff;
};

/// State vector over n modes with `cutoff` levels each, mode 0 slowest:
/// flat index = ((c_0 * D + c_1) * D + c_2) ...
class FockVector {
 public:
  FockVector(int n_modes, int cutoff, Eigen::VectorXcd amplitudes,
             double leakage)
      : n_modes_(n_modes),
        cutoff_(cutoff),
        amplitudes_(std::move(amplitudes)),
        leakage_(leakage) {
    if (n_modes_ < 1 || cutoff_ < 2) {
      throw std::invalid_argument(
          fmt::format("FockVector: need n_modes >= 1 and cutoff >= 2, got {} "
                      "and {}",
                      n_modes_, cutoff_));
    }
    std::int64_t dim = 1;
    for (int j = 0; j < n_modes_; ++j) dim *= cutoff_;
    if (amplitudes_.size() != dim) {
      throw std::invalid_argument(
          fmt::format("FockVector: expected {} amplitudes, got {}", dim,
                      amplitudes_.size()));
    }
  }

  int n_modes() const { return n_modes_; }
  int cutoff() const { return cutoff_; }
  double leakage() const { return leakage_; }
  const Eigen::VectorXcd& amplitudes() const { return amplitudes_; }

  std::int64_t stride(int mode) const {
    std::int64_t s = 1;
    for (int j = mode + 1; j < n_modes_; ++j) s *= cutoff_;
    return s;
  }

  std::int64_t index(const std::vector<int>& counts) const {
    if (counts.size() != static_cast<std::size_t>(n_modes_)) {
      throw std::invalid_argument(
          fmt::format("FockVector::index: expected {} counts, got {}", n_modes_,
                      counts.size()));
    }
    std::int64_t idx = 0;
    for (int j = 0; j < n_modes_; ++j) {
      if (counts[j] < 0 || counts[j] >= cutoff_) {
        throw std::invalid_argument(fmt::format(
            "FockVector::index: count {} at mode {} outside cutoff {}",
            counts[j], j, cutoff_));
      }
      idx = idx * cutoff_ + counts[j];
    }
    return idx;
  }

 private:
  int n_modes_;
  int cutoff_;
  Eigen::VectorXcd amplitudes_;
  double leakage_;
};

namespace detail {

inline Eigen::MatrixXcd fock_ladder(int dim) {
  Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(dim, dim);
  for (int k = 1; k < dim; ++k) a(k - 1, k) = std::sqrt(static_cast<double>(k));
  return a;
}

/// exp of an anti-Hermitian generator computed at the generator's own
/// (working) dimension, then cropped. Taking the working dimension larger
/// than the crop turns truncation error into a measurable norm drop instead
/// of silently rotating weight inside the kept block.
inline Eigen::MatrixXcd fock_cropped_exp(const Eigen::MatrixXcd& gen,
                                         int cutoff) {
  const Eigen::MatrixXcd herm = Complex(0.0, 1.0) * gen;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(herm);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("fock_cropped_exp: eigendecomposition failed");
  }
  Eigen::VectorXcd phases(es.eigenvalues().size());
  for (int i = 0; i < phases.size(); ++i) {
    const double lam = es.eigenvalues()(i);
    phases(i) = Complex(std::cos(lam), -std::sin(lam));  // exp(-i lambda)
  }
  const Eigen::MatrixXcd full =
      es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
  return full.topLeftCorner(cutoff, cutoff);
}

inline Eigen::MatrixXcd fock_displacement_matrix(Complex alpha, int cutoff) {
  const int work = cutoff + 64;
  const Eigen::MatrixXcd a = fock_ladder(work);
  const Eigen::MatrixXcd gen = alpha * a.adjoint() - std::conj(alpha) * a;
  return fock_cropped_exp(gen, cutoff);
}

inline Eigen::MatrixXcd fock_squeeze_matrix(Complex zeta, int cutoff) {
  const int work = cutoff + 64;
  const Eigen::MatrixXcd a = fock_ladder(work);
  const Eigen::MatrixXcd gen =
      0.5 * (std::conj(zeta) * a * a - zeta * (a * a).adjoint());
  return fock_cropped_exp(gen, cutoff);
}

inline void fock_apply_single_mode(Eigen::VectorXcd& v,
                                   const Eigen::MatrixXcd& gate, int n_modes,
                                   int cutoff, int mode) {
  std::int64_t stride = 1;
  for (int j = mode + 1; j < n_modes; ++j) stride *= cutoff;
  const std::int64_t group = stride * cutoff;
  const std::int64_t blocks = v.size() / group;
  Eigen::VectorXcd x(cutoff);
  for (std::int64_t b = 0; b < blocks; ++b) {
    const std::int64_t base = b * group;
    for (std::int64_t s = 0; s < stride; ++s) {
      for (int k = 0; k < cutoff; ++k) x(k) = v(base + k * stride + s);
      const Eigen::VectorXcd y = gate * x;
      for (int k = 0; k < cutoff; ++k) v(base + k * stride + s) = y(k);
    }
  }
}

/// Offsets of all count combinations over the modes *not* in {skip_a, skip_b}.
inline std::vector<std::int64_t> fock_rest_offsets(int n_modes, int cutoff,
                                                   int skip_a, int skip_b) {
  std::vector<std::int64_t> offsets{0};
  std::int64_t stride = 1;
  for (int mode = n_modes - 1; mode >= 0; --mode) {
    if (mode != skip_a && mode != skip_b) {
      std::vector<std::int64_t> grown;
      grown.reserve(offsets.size() * cutoff);
      for (int c = 0; c < cutoff; ++c) {
        for (std::int64_t o : offsets) grown.push_back(o + c * stride);
      }
      offsets.swap(grown);
    }
    stride *= cutoff;
  }
  return offsets;
}

/// w = i sum_jk h_jk adag_j a_k v, the generator of the interferometer.
inline Eigen::VectorXcd fock_apply_mixing_generator(
    const Eigen::VectorXcd& v, const Eigen::MatrixXcd& hgen, int n_modes,
    int cutoff, const std::vector<double>& sqrt_table) {
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(v.size());
  const Complex iunit(0.0, 1.0);
  for (int j = 0; j < n_modes; ++j) {
    for (int k = 0; k < n_modes; ++k) {
      const Complex h = hgen(j, k);
      if (h == Complex(0.0, 0.0)) continue;
      const Complex w = iunit * h;
      if (j == k) {
        std::int64_t stride = 1;
        for (int m = j + 1; m < n_modes; ++m) stride *= cutoff;
        const std::int64_t group = stride * cutoff;
        for (std::int64_t base = 0; base < v.size(); base += group) {
          for (int c = 0; c < cutoff; ++c) {
            for (std::int64_t s = 0; s < stride; ++s) {
              const std::int64_t idx = base + c * stride + s;
              out(idx) += w * static_cast<double>(c) * v(idx);
            }
          }
        }
      } else {
        std::int64_t sj = 1, sk = 1;
        for (int m = j + 1; m < n_modes; ++m) sj *= cutoff;
        for (int m = k + 1; m < n_modes; ++m) sk *= cutoff;
        const auto rests = fock_rest_offsets(n_modes, cutoff, j, k);
        for (const std::int64_t base : rests) {
          for (int cj = 0; cj + 1 < cutoff; ++cj) {
            for (int ck = 1; ck < cutoff; ++ck) {
              const std::int64_t src = base + cj * sj + ck * sk;
              const std::int64_t dst = base + (cj + 1) * sj + (ck - 1) * sk;
              out(dst) += w * (sqrt_table[cj + 1] * sqrt_table[ck]) * v(src);
            }
          }
        }
      }
    }
  }
  return out;
}

/// v <- exp(i sum h_jk adag_j a_k) v by a scaled Taylor series: photon-number
/// conserving and unitary in the truncated space, so passive mixing adds no
/// leakage.
inline void fock_apply_interferometer(Eigen::VectorXcd& v,
                                      const Eigen::MatrixXcd& hgen,
                                      int n_modes, int cutoff) {
  double hsum = 0.0;
  for (int j = 0; j < n_modes; ++j) {
    for (int k = 0; k < n_modes; ++k) hsum += std::abs(hgen(j, k));
  }
  if (hsum == 0.0) return;
  std::vector<double> sqrt_table(cutoff + 1);
  for (int k = 0; k <= cutoff; ++k) sqrt_table[k] = std::sqrt(k);
  const int steps = 1 + static_cast<int>(cutoff * hsum / 4.0);
  for (int step = 0; step < steps; ++step) {
    Eigen::VectorXcd acc = v;
    Eigen::VectorXcd term = v;
    for (int k = 1; k <= 200; ++k) {
      term = fock_apply_mixing_generator(term, hgen, n_modes, cutoff,
                                         sqrt_table) /
             (static_cast<double>(steps) * k);
      acc += term;
      if (term.norm() <= 1e-17 * acc.norm()) break;
    }
    v = acc;
  }
}

/// a_mode applied to the vector (counts drop by one, amplitude sqrt(c)).
inline Eigen::VectorXcd fock_lower(const Eigen::VectorXcd& v, int n_modes,
                                   int cutoff, int mode) {
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(v.size());
  std::int64_t stride = 1;
  for (int j = mode + 1; j < n_modes; ++j) stride *= cutoff;
  const std::int64_t group = stride * cutoff;
  for (std::int64_t base = 0; base < v.size(); base += group) {
    for (int c = 1; c < cutoff; ++c) {
      const double amp = std::sqrt(static_cast<double>(c));
      for (std::int64_t s = 0; s < stride; ++s) {
        out(base + (c - 1) * stride + s) += amp * v(base + c * stride + s);
      }
    }
  }
  return out;
}

}  // namespace detail

/// Prepares the ansatz state in the truncated Fock space: squeeze every mode,
/// displace, then mix. The returned vector is normalized; the norm lost to
/// truncation is reported as leakage() and must stay below kLeakageTol.
inline FockVector oracle_prepare(const AnsatzParams& params, int cutoff) {
  detail::validate_params(params, "oracle_prepare");
  const int n = params.n_modes();
  if (n > 4) {
    throw std::invalid_argument(
        fmt::format("oracle_prepare: at most 4 modes, got {}", n));
  }
  if (cutoff < 2 || cutoff > 64) {
    throw std::invalid_argument(fmt::format(
        "oracle_prepare: cutoff must be in [2, 64], got {}", cutoff));
  }
  std::int64_t dim = 1;
  for (int j = 0; j < n; ++j) {
    dim *= cutoff;
    if (dim > (std::int64_t{1} << 21)) {
      throw std::invalid_argument(fmt::format(
          "oracle_prepare: cutoff^n = {}^{} exceeds the 2^21 state-vector "
          "budget",
          cutoff, n));
    }
  }

  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(dim);
  v(0) = Complex(1.0, 0.0);

  for (int j = 0; j < n; ++j) {
    const auto& z = params.zetas[j];
    if (z.r == 0.0) continue;
    const Complex zeta = z.r * Complex(std::cos(z.theta), std::sin(z.theta));
    detail::fock_apply_single_mode(v, detail::fock_squeeze_matrix(zeta, cutoff),
                                   n, cutoff, j);
  }
  for (int j = 0; j < n; ++j) {
    if (params.deltas[j] == Complex(0.0, 0.0)) continue;
    detail::fock_apply_single_mode(
        v, detail::fock_displacement_matrix(params.deltas[j], cutoff), n,
        cutoff, j);
  }
  detail::fock_apply_interferometer(v, generator_from_params(params.mixer), n,
                                    cutoff);

  const double norm2 = v.squaredNorm();
  const double leakage = std::max(0.0, 1.0 - norm2);
  if (leakage > kLeakageTol) {
    double heaviest = 0.0;
    for (int j = 0; j < n; ++j) {
      const double sh = std::sinh(params.zetas[j].r);
      heaviest = std::max(heaviest, sh * sh + std::norm(params.deltas[j]));
    }
    const int suggested =
        std::min(64, std::max(cutoff + 16,
                              static_cast<int>(std::ceil(8.0 * heaviest + 16.0))));
    throw CutoffError(
        fmt::format("oracle_prepare: truncation leakage {:.3e} exceeds {:.0e} "
                    "at cutoff {}; retry with cutoff >= {}",
                    leakage, kLeakageTol, cutoff, suggested),
        suggested);
  }
  v /= std::sqrt(norm2);
  return FockVector(n, cutoff, std::move(v), leakage);
}

/// <a_j^dag a_j> summed directly over basis occupations.
inline double oracle_mean_photon(const FockVector& state, int mode) {
  if (mode < 0 || mode >= state.n_modes()) {
    throw std::invalid_argument(
        fmt::format("oracle_mean_photon: mode {} out of range for {} modes",
                    mode, state.n_modes()));
  }
  const auto& v = state.amplitudes();
  const int cutoff = state.cutoff();
  const std::int64_t stride = state.stride(mode);
  const std::int64_t group = stride * cutoff;
  double total = 0.0;
  for (std::int64_t base = 0; base < v.size(); base += group) {
    for (int c = 1; c < cutoff; ++c) {
      for (std::int64_t s = 0; s < stride; ++s) {
        total += c * std::norm(v(base + c * stride + s));
      }
    }
  }
  return total;
}

/// <a_j^dag a_k> via the lowered vectors <a_j v, a_k v>.
inline Complex oracle_quadratic(const FockVector& state, int j, int k) {
  if (j < 0 || j >= state.n_modes() || k < 0 || k >= state.n_modes()) {
    throw std::invalid_argument(
        fmt::format("oracle_quadratic: modes ({}, {}) out of range for {}",
                    j, k, state.n_modes()));
  }
  const Eigen::VectorXcd down_j =
      detail::fock_lower(state.amplitudes(), state.n_modes(), state.cutoff(), j);
  const Eigen::VectorXcd down_k =
      detail::fock_lower(state.amplitudes(), state.n_modes(), state.cutoff(), k);
  return down_j.dot(down_k);  // conjugates the first argument
}

/// <a_j^dag a_j^dag a_j a_j> = sum over occupations of c_j (c_j - 1).
inline double oracle_quartic(const FockVector& state, int mode) {
  if (mode < 0 || mode >= state.n_modes()) {
    throw std::invalid_argument(
        fmt::format("oracle_quartic: mode {} out of range for {} modes", mode,
                    state.n_modes()));
  }
  const auto& v = state.amplitudes();
  const int cutoff = state.cutoff();
  const std::int64_t stride = state.stride(mode);
  const std::int64_t group = stride * cutoff;
  double total = 0.0;
  for (std::int64_t base = 0; base < v.size(); base += group) {
    for (int c = 2; c < cutoff; ++c) {
      const double w = static_cast<double>(c) * (c - 1);
      for (std::int64_t s = 0; s < stride; ++s) {
        total += w * std::norm(v(base + c * stride + s));
      }
    }
  }
  return total;
}

/// <H> assembled from ladder operators only.
inline double oracle_expectation(const FockVector& state,
                                 const LatticeHamiltonian& lattice) {
  const int n = state.n_modes();
  if (lattice.n_sites() != n) {
    throw std::invalid_argument(fmt::format(
        "oracle_expectation: lattice has {} sites but state has {} modes",
        lattice.n_sites(), n));
  }
  std::vector<Eigen::VectorXcd> lowered;
  lowered.reserve(n);
  for (int j = 0; j < n; ++j) {
    lowered.push_back(
        detail::fock_lower(state.amplitudes(), n, state.cutoff(), j));
  }
  Complex kinetic(0.0, 0.0);
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < n; ++k) {
      const double w = lattice.omega()(j, k);
      if (w == 0.0) continue;
      kinetic += w * lowered[j].dot(lowered[k]);
    }
  }
  double quartic = 0.0;
  for (int j = 0; j < n; ++j) quartic += oracle_quartic(state, j);
  return kinetic.real() + 0.5 * lattice.gamma() * quartic;
}

/// |<pattern|state>|^2 read straight off the amplitude table.
inline double oracle_pattern_probability(const FockVector& state,
                                         const PhotonPattern& pattern) {
  if (pattern.n_modes() != state.n_modes()) {
    throw std::invalid_argument(fmt::format(
        "oracle_pattern_probability: pattern has {} modes but state has {}",
        pattern.n_modes(), state.n_modes()));
  }
  for (int j = 0; j < state.n_modes(); ++j) {
    if (pattern.counts()[j] >= state.cutoff()) {
      throw std::invalid_argument(fmt::format(
          "oracle_pattern_probability: count {} at mode {} is outside the "
          "cutoff {}",
          pattern.counts()[j], j, state.cutoff()));
    }
  }
  return std::norm(state.amplitudes()(state.index(pattern.counts())));
}

}  // namespace solitonlab
