#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <fmt/format.h>

#include "solitonlab/phase_space.hpp"

namespace solitonlab {

/// Largest total photon count a pattern may request by default; the dense
/// coefficient table is bounded by prod_j (counts_j + 1)^2 <= 4^budget.
inline constexpr int kDefaultPatternBudget = 6;

/// Target photon counts per mode for a joint number measurement.
class PhotonPattern {
 public:
  explicit PhotonPattern(std::vector<int> counts) : counts_(std::move(counts)) {
    if (counts_.empty()) {
      throw std::invalid_argument("PhotonPattern: need at least one mode");
    }
    for (std::size_t j = 0; j < counts_.size(); ++j) {
      if (counts_[j] < 0) {
        throw std::invalid_argument(fmt::format(
            "PhotonPattern: negative count {} at mode {}", counts_[j], j));
      }
    }
  }

  const std::vector<int>& counts() const { return counts_; }
  int n_modes() const { return static_cast<int>(counts_.size()); }
  int total() const {
    int t = 0;
    for (int c : counts_) t += c;
    return t;
  }

 private:
  std::vector<int> counts_;
};

namespace detail {

// One monomial of the quadratic-plus-linear exponent polynomial: coefficient
// on v_va * v_vb (vb = -1 for a linear term). `offset` is the flat index
// shift the monomial causes in the mixed-radix coefficient table.
struct ExponentTerm {
  std::int64_t offset;
  int va;
  int vb;  // -1 for linear terms
  Complex coeff;
};

}  // namespace detail

/// Probability of measuring exactly `pattern` photons on a Gaussian state.
///
/// The coherent-basis generating function of the state,
///   F(v) = C exp(1/2 y^T S y + t^T y),   y = y(v),
/// with S = I - 2 (g + I)^{-1}, t = 2 (g + I)^{-1} d and
/// C = 2^n det(g + I)^{-1/2} exp(-d^T (g + I)^{-1} d), has the property that
/// the coefficient of prod_j alpha_j^{c_j} conj(alpha_j)^{c_j} times
/// prod_j c_j! is Pr(pattern). Only modes with c_j > 0 enter the polynomial
/// algebra; exponents are capped at the pattern, which is exact because
/// exponents never decrease under multiplication.
inline double pattern_probability(const GaussianState& state,
                                  const PhotonPattern& pattern,
                                  int budget = kDefaultPatternBudget) {
  const int n = state.n_modes();
  if (pattern.n_modes() != n) {
    throw std::invalid_argument(
        fmt::format("pattern_probability: pattern has {} modes but state has {}",
                    pattern.n_modes(), n));
  }
  if (pattern.total() > budget) {
    throw std::invalid_argument(fmt::format(
        "pattern_probability: pattern asks for {} photons, budget is {}",
        pattern.total(), budget));
  }

  const int big = 2 * n;
  Eigen::MatrixXd a = state.covariance() + Eigen::MatrixXd::Identity(big, big);
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error(
        "pattern_probability: covariance + I is not positive definite");
  }
  double logdet = 0.0;
  for (int i = 0; i < big; ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
  const Eigen::VectorXd ainv_d = llt.solve(state.displacement());
  const double c_log =
      n * std::log(2.0) - 0.5 * logdet - state.displacement().dot(ainv_d);

  std::vector<int> active;
  for (int j = 0; j < n; ++j) {
    if (pattern.counts()[j] > 0) active.push_back(j);
  }
  if (active.empty()) {
    const double p = std::exp(c_log);
    return std::min(1.0, std::max(0.0, p));
  }

  const int m = static_cast<int>(active.size());
  const int vars = 2 * m;

  // Restrict S and t to the active phase-space rows/columns.
  std::vector<int> idx(vars);
  for (int i = 0; i < m; ++i) {
    idx[2 * i] = 2 * active[i];
    idx[2 * i + 1] = 2 * active[i] + 1;
  }
  const Eigen::MatrixXd ainv = llt.solve(Eigen::MatrixXd::Identity(big, big));
  Eigen::MatrixXd s_sub(vars, vars);
  Eigen::VectorXd t_sub(vars);
  for (int r = 0; r < vars; ++r) {
    t_sub(r) = 2.0 * ainv_d(idx[r]);
    for (int c = 0; c < vars; ++c) {
      s_sub(r, c) = (r == c ? 1.0 : 0.0) - 2.0 * ainv(idx[r], idx[c]);
    }
  }

  // Substitute y_q = (v0 + v1)/sqrt2, y_p = -i (v0 - v1)/sqrt2 per active
  // mode, where v0 = alpha and v1 = conj-alpha count as independent
  // variables. Plain transpose below: this is a variable substitution.
  Eigen::MatrixXcd t_map = Eigen::MatrixXcd::Zero(vars, vars);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  for (int i = 0; i < m; ++i) {
    t_map(2 * i, 2 * i) = inv_sqrt2;
    t_map(2 * i, 2 * i + 1) = inv_sqrt2;
    t_map(2 * i + 1, 2 * i) = Complex(0.0, -inv_sqrt2);
    t_map(2 * i + 1, 2 * i + 1) = Complex(0.0, inv_sqrt2);
  }
  const Eigen::MatrixXcd s_v =
      t_map.transpose() * s_sub.cast<Complex>() * t_map;
  const Eigen::VectorXcd t_v = t_map.transpose() * t_sub.cast<Complex>();

  // Mixed-radix dense coefficient table capped at the pattern counts.
  std::vector<int> cap(vars), radix(vars);
  std::vector<std::int64_t> stride(vars);
  std::int64_t size = 1;
  for (int v = 0; v < vars; ++v) {
    cap[v] = pattern.counts()[active[v / 2]];
    radix[v] = cap[v] + 1;
  }
  for (int v = vars - 1; v >= 0; --v) {
    stride[v] = size;
    size *= radix[v];
  }
  std::vector<int> digits(static_cast<std::size_t>(size) * vars);
  for (std::int64_t i = 0; i < size; ++i) {
    std::int64_t rest = i;
    for (int v = vars - 1; v >= 0; --v) {
      digits[static_cast<std::size_t>(i) * vars + v] =
          static_cast<int>(rest % radix[v]);
      rest /= radix[v];
    }
  }

  std::vector<detail::ExponentTerm> terms;
  for (int va = 0; va < vars; ++va) {
    if (t_v(va) != Complex(0.0, 0.0) && cap[va] >= 1) {
      terms.push_back({stride[va], va, -1, t_v(va)});
    }
    for (int vb = va; vb < vars; ++vb) {
      const Complex c = (va == vb) ? 0.5 * s_v(va, va) : s_v(va, vb);
      if (c == Complex(0.0, 0.0)) continue;
      if (va == vb && cap[va] < 2) continue;
      if (va != vb && (cap[va] < 1 || cap[vb] < 1)) continue;
      terms.push_back({stride[va] + stride[vb], va, vb, c});
    }
  }

  // exp of the polynomial by its Taylor series; every term raises total
  // degree, so the series is exact after sum(caps) rounds.
  std::vector<Complex> result(size, Complex(0.0, 0.0));
  std::vector<Complex> term(size, Complex(0.0, 0.0));
  std::vector<Complex> next(size);
  result[0] = Complex(1.0, 0.0);
  term[0] = Complex(1.0, 0.0);
  std::int64_t max_rounds = 0;
  for (int v = 0; v < vars; ++v) max_rounds += cap[v];
  for (std::int64_t k = 1; k <= max_rounds; ++k) {
    std::fill(next.begin(), next.end(), Complex(0.0, 0.0));
    bool any = false;
    for (std::int64_t i = 0; i < size; ++i) {
      const Complex c_src = term[i];
      if (c_src == Complex(0.0, 0.0)) continue;
      const int* dig = &digits[static_cast<std::size_t>(i) * vars];
      for (const auto& t : terms) {
        const int bump_a = 1 + (t.vb == t.va ? 1 : 0);
        if (dig[t.va] + bump_a > cap[t.va]) continue;
        if (t.vb >= 0 && t.vb != t.va && dig[t.vb] + 1 > cap[t.vb]) continue;
        next[i + t.offset] += c_src * t.coeff;
        any = true;
      }
    }
    if (!any) break;
    const double inv_k = 1.0 / static_cast<double>(k);
    for (std::int64_t i = 0; i < size; ++i) {
      term[i] = next[i] * inv_k;
      result[i] += term[i];
    }
  }

  double fact = 1.0;
  for (int j = 0; j < n; ++j) {
    for (int c = 2; c <= pattern.counts()[j]; ++c) fact *= c;
  }
  const Complex top = result[size - 1];
  const double scale = fact * std::exp(c_log);
  const double value = scale * top.real();
  const double ghost = scale * top.imag();
  if (std::abs(ghost) > 1e-9) {
    throw std::runtime_error(fmt::format(
        "pattern_probability: lost precision (imaginary residue {:.3e})", ghost));
  }
  if (value < -1e-12 || value > 1.0 + 1e-12) {
    throw std::runtime_error(fmt::format(
        "pattern_probability: value {:.17g} outside [0, 1]", value));
  }
  return std::min(1.0, std::max(0.0, value));
}

/// Symmetric n x n table: entry (a, b) is the probability of seeing
/// total/2 photons at each of two distinct sites a != b, and (a, a) that of
/// all `total` photons at site a. `total` must be 2 or 4.
inline Eigen::MatrixXd pair_probability_scan(const GaussianState& state,
                                             int total) {
  if (total != 2 && total != 4) {
    throw std::invalid_argument(fmt::format(
        "pair_probability_scan: total must be 2 or 4, got {}", total));
  }
  const int n = state.n_modes();
  Eigen::MatrixXd scan = Eigen::MatrixXd::Zero(n, n);
  for (int a = 0; a < n; ++a) {
    for (int b = a; b < n; ++b) {
      std::vector<int> counts(n, 0);
      if (a == b) {
        counts[a] = total;
      } else {
        counts[a] = total / 2;
        counts[b] = total / 2;
      }
      const double p = pattern_probability(state, PhotonPattern(counts));
      scan(a, b) = p;
      scan(b, a) = p;
    }
  }
  return scan;
}

/// CSV rows `site_a,site_b,probability` over the upper triangle (a <= b).
inline void write_pair_scan_csv(std::ostream& out, const Eigen::MatrixXd& scan) {
  out << "site_a,site_b,probability\n";
  for (int a = 0; a < scan.rows(); ++a) {
    for (int b = a; b < scan.cols(); ++b) {
      out << fmt::format("{},{},{:.17g}\n", a, b, scan(a, b));
    }
  }
}

}  // namespace solitonlab
