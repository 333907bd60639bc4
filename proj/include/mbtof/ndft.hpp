#pragma once

// Non-uniform DFT between a delay grid and a set of scattered frequencies:
// F(i, k) = exp(-j 2 pi f_i tau_k).

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <span>
#include <vector>

#include "mbtof/core.hpp"

namespace mbtof {

struct DelayGrid {
  double tau_min = 0.0;
  double tau_max = 200e-9;
  double step = 0.05e-9;

  std::size_t size() const {
    return static_cast<std::size_t>(std::floor((tau_max - tau_min) / step + 1e-9)) + 1;
  }
  double at(std::size_t i) const { return tau_min + static_cast<double>(i) * step; }

  // Nearest grid index for a delay, clamped to the grid.
  std::size_t index_of(double tau) const {
    const double i = std::round((tau - tau_min) / step);
    if (i <= 0.0) return 0;
    return std::min(static_cast<std::size_t>(i), size() - 1);
  }
};

inline void validate(const DelayGrid& grid) {
  if (!(grid.step > 0.0) || !(grid.tau_max >= grid.tau_min)) {
    throw Error(ErrorCode::InvalidArgument, "delay grid needs step > 0 and tau_max >= tau_min");
  }
}

class NdftOperator {
 public:
  NdftOperator(std::span<const double> frequencies, const DelayGrid& grid)
      : frequencies_(frequencies.begin(), frequencies.end()), grid_(grid) {
    validate(grid);
    const auto n = static_cast<Eigen::Index>(frequencies_.size());
    const auto m = static_cast<Eigen::Index>(grid.size());
    matrix_.resize(n, m);
    for (Eigen::Index k = 0; k < m; ++k) {
      const double tau = grid.at(static_cast<std::size_t>(k));
      for (Eigen::Index i = 0; i < n; ++i) {
        matrix_(i, k) = std::polar(1.0, -kTwoPi * frequencies_[static_cast<std::size_t>(i)] * tau);
      }
    }
    adjoint_ = matrix_.adjoint();

    // (F^H F)(k, l) depends on k - l only: kernel_[d + m - 1] = sum_i exp(j 2 pi f_i d step).
    kernel_.resize(2 * static_cast<std::size_t>(m) - 1);
    for (Eigen::Index d = -(m - 1); d <= m - 1; ++d) {
      Complex acc{0.0, 0.0};
      for (double f : frequencies_) acc += std::polar(1.0, kTwoPi * f * static_cast<double>(d) * grid.step);
      kernel_[static_cast<std::size_t>(d + m - 1)] = acc;
    }
  }

  std::size_t rows() const { return frequencies_.size(); }
  std::size_t cols() const { return grid_.size(); }
  const DelayGrid& grid() const { return grid_; }
  const std::vector<double>& frequencies() const { return frequencies_; }
  const Eigen::MatrixXcd& matrix() const { return matrix_; }

  // h_i = sum_k p_k exp(-j 2 pi f_i tau_k); skips zero entries of p.
  Eigen::VectorXcd apply(const Eigen::VectorXcd& p) const {
    Eigen::VectorXcd h = Eigen::VectorXcd::Zero(matrix_.rows());
    for (Eigen::Index k = 0; k < p.size(); ++k) {
      if (p[k] != Complex(0.0, 0.0)) h.noalias() += p[k] * matrix_.col(k);
    }
    return h;
  }

  Eigen::VectorXcd adjoint(const Eigen::VectorXcd& r) const { return adjoint_ * r; }

  // F^H F p, touching only the nonzero entries of p. Cheaper than
  // adjoint(apply(p)) while p has fewer nonzeros than F has rows.
  Eigen::VectorXcd gram_apply(const Eigen::VectorXcd& p) const {
    const auto m = static_cast<Eigen::Index>(cols());
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(m);
    for (Eigen::Index l = 0; l < m; ++l) {
      if (p[l] == Complex(0.0, 0.0)) continue;
      // column[k] = kernel(k - l)
      const Eigen::Map<const Eigen::VectorXcd> column(kernel_.data() + (m - 1 - l), m);
      out.noalias() += p[l] * column;
    }
    return out;
  }

 private:
  std::vector<double> frequencies_;
  DelayGrid grid_;
  Eigen::MatrixXcd matrix_;
  Eigen::MatrixXcd adjoint_;
  std::vector<Complex> kernel_;
};

// Largest singular value of F by power iteration on F F^H.
inline double spectral_norm(const NdftOperator& op, double rel_tol = 1e-6, int max_iters = 10000) {
  const Eigen::MatrixXcd gram = op.matrix() * op.matrix().adjoint();
  std::mt19937_64 rng(0x5eed);
  std::normal_distribution<double> gauss;
  Eigen::VectorXcd v(gram.rows());
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = Complex(gauss(rng), gauss(rng));
  v.normalize();

  double lambda = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    Eigen::VectorXcd w = gram * v;
    const double next = w.norm();
    if (next == 0.0) return 0.0;
    v = w / next;
    if (std::abs(next - lambda) <= rel_tol * next) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return std::sqrt(lambda);
}

inline double spectral_norm(std::span<const double> frequencies, const DelayGrid& grid) {
  return spectral_norm(NdftOperator(frequencies, grid));
}

}  // namespace mbtof
