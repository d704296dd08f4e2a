#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "levyspec/errors.hpp"
#include "levyspec/philox.hpp"
#include "levyspec/stable.hpp"

namespace levyspec::ensemble {

using Matrix = Eigen::MatrixXd;

/// What a matrix is, carried alongside its data so downstream code and report
/// files can label things without guessing.
enum class MatrixTag {
  levy_D,         // N x N heavy-tailed block
  symmetrized_H,  // 2N x 2N [[0, D^T], [D, 0]]
  big_part_X,     // entries at/above the split threshold
  small_part_A,   // entries below the split threshold
  gaussian_L,     // N x N iid N(0, 1/N)
  gaussian_sym_W, // symmetrization of gaussian_L
  interpolated,   // X + gamma A + sqrt(t (1 - gamma^2)) W
};

inline std::string tag_name(MatrixTag t) {
  switch (t) {
    case MatrixTag::levy_D: return "levy_D";
    case MatrixTag::symmetrized_H: return "symmetrized_H";
    case MatrixTag::big_part_X: return "big_part_X";
    case MatrixTag::small_part_A: return "small_part_A";
    case MatrixTag::gaussian_L: return "gaussian_L";
    case MatrixTag::gaussian_sym_W: return "gaussian_sym_W";
    case MatrixTag::interpolated: return "interpolated";
  }
  return "?";
}

struct TaggedMatrix {
  Matrix mat;
  MatrixTag tag;
};

/// N x N matrix of iid heavy-tailed entries N^{-1/a}(J + Z).
inline Matrix build_levy(const stable::EnsembleParams& p, Rng& rng) {
  Matrix D(p.N, p.N);
  for (int i = 0; i < p.N; ++i)
    for (int j = 0; j < p.N; ++j) D(i, j) = stable::sample_entry(p, rng);
  return D;
}

/// Hermitization [[0, D^T], [D, 0]] of a square block D. The eigenvalues of
/// the result are plus/minus the singular values of D.
template <typename Derived>
Matrix symmetrize(const Eigen::MatrixBase<Derived>& D) {
  const Eigen::Index n = D.rows();
  if (D.cols() != n) {
    throw ValidationError("symmetrize: block must be square",
                          {"got " + std::to_string(D.rows()) + " x " +
                           std::to_string(D.cols())});
  }
  Matrix H = Matrix::Zero(2 * n, 2 * n);
  H.topRightCorner(n, n) = D.transpose();
  H.bottomLeftCorner(n, n) = D;
  return H;
}

struct SplitResult {
  Matrix big;        // X: entries with |h| >= threshold, zeros elsewhere
  Matrix small;      // A: entries with |h| <  threshold, zeros elsewhere
  double threshold;  // N^{-nu}
  std::int64_t big_count = 0;  // nonzero slots routed to the big part
};

/// Bit-exact partition of a symmetrized matrix at magnitude N^{-nu}: each slot
/// lands in exactly one of the two parts, so big + small == H with no
/// floating-point drift.
inline SplitResult split_by_threshold(const Matrix& H,
                                      const stable::EnsembleParams& p) {
  const double thr = p.split_threshold();
  SplitResult out;
  out.threshold = thr;
  out.big = Matrix::Zero(H.rows(), H.cols());
  out.small = Matrix::Zero(H.rows(), H.cols());
  for (Eigen::Index j = 0; j < H.cols(); ++j) {
    for (Eigen::Index i = 0; i < H.rows(); ++i) {
      const double h = H(i, j);
      if (std::abs(h) >= thr) {
        out.big(i, j) = h;
        if (h != 0.0) ++out.big_count;
      } else {
        out.small(i, j) = h;
      }
    }
  }
  return out;
}

/// N x N iid N(0, 1/N) comparison block.
inline Matrix gaussian_iid(int N, Rng& rng) {
  const double scale = 1.0 / std::sqrt(double(N));
  Matrix L(N, N);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) L(i, j) = scale * rng.normal();
  return L;
}

inline Matrix gaussian_sym(int N, Rng& rng) {
  return symmetrize(gaussian_iid(N, rng));
}

enum class CouplingMethod { monte_carlo, quadrature };

struct CouplingEstimate {
  double t = 0.0;
  double std_error = 0.0;  // zero for the quadrature route
  std::size_t draws = 0;
  CouplingMethod method = CouplingMethod::monte_carlo;
};

/// Variance-matching time t = N * Var(entry restricted below the split
/// threshold). The interpolating family X + gamma A + sqrt(t (1 - gamma^2)) W
/// keeps the small-entry variance budget constant in gamma.
///
/// The Monte Carlo route estimates E[d^2 1{|d| < N^{-nu}}] by sampling,
/// growing the sample until the requested relative precision or the draw
/// budget is hit (BudgetError carries the best estimate). The quadrature
/// route is the closed form for the Cauchy case a = 1 with no deformation:
///   E[d^2 1{|d| <= R}] = (2 sigma / (pi N^2)) (M - sigma atan(M / sigma)),
/// with M = N R, so t = N * that.
inline CouplingEstimate coupling_time(const stable::EnsembleParams& p,
                                      double rel_precision, Rng& rng,
                                      CouplingMethod method =
                                          CouplingMethod::monte_carlo,
                                      std::size_t max_draws = 1000000) {
  const double thr = p.split_threshold();
  if (method == CouplingMethod::quadrature) {
    if (p.a != 1.0 || p.deformation.kind != stable::Deformation::Kind::none) {
      throw ValidationError(
          "coupling_time: closed-form route needs a = 1 and no deformation",
          {"a = " + std::to_string(p.a),
           "deformation = " + p.deformation.name()});
    }
    const double sigma = stable::sigma_for(1.0);  // pi/2
    const double M = double(p.N) * thr;
    const double m2 = (2.0 * sigma / (std::numbers::pi * double(p.N) * double(p.N))) *
                      (M - sigma * std::atan(M / sigma));
    return {double(p.N) * m2, 0.0, 0, CouplingMethod::quadrature};
  }

  if (!(rel_precision > 0.0)) {
    throw ValidationError("coupling_time: rel_precision must be positive", {});
  }
  double sum = 0.0, sumsq = 0.0;
  std::size_t n = 0;
  std::size_t block = 4096;
  while (n < max_draws) {
    const std::size_t todo = std::min(block, max_draws - n);
    for (std::size_t i = 0; i < todo; ++i) {
      const double d = stable::sample_entry(p, rng);
      const double x = (std::abs(d) < thr) ? d * d : 0.0;
      sum += x;
      sumsq += x * x;
    }
    n += todo;
    block = std::min<std::size_t>(block * 2, 262144);
    const double mean = sum / double(n);
    const double var = std::max(0.0, sumsq / double(n) - mean * mean);
    const double se = std::sqrt(var / double(n));
    if (mean > 0.0 && se <= rel_precision * mean && n >= 8192) {
      return {double(p.N) * mean, double(p.N) * se, n,
              CouplingMethod::monte_carlo};
    }
  }
  const double mean = sum / double(n);
  const double var = std::max(0.0, sumsq / double(n) - mean * mean);
  const double se = std::sqrt(var / double(n));
  throw BudgetError("coupling_time: draw budget exhausted before precision",
                    double(p.N) * mean,
                    mean > 0.0 ? se / mean : std::numeric_limits<double>::infinity());
}

/// Interpolating matrix H(gamma) = X + gamma A + sqrt(t (1 - gamma^2)) W.
/// At gamma = 1 this is the heavy-tailed matrix; at gamma = 0 the small part
/// is replaced by a Gaussian of matched variance.
inline Matrix interpolate(const Matrix& X, const Matrix& A, const Matrix& W,
                          double t, double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw ValidationError("interpolate: gamma must lie in [0, 1]",
                          {"gamma = " + std::to_string(gamma)});
  }
  if (!(t >= 0.0)) {
    throw ValidationError("interpolate: coupling time must be >= 0",
                          {"t = " + std::to_string(t)});
  }
  if (X.rows() != A.rows() || X.rows() != W.rows() || X.cols() != A.cols() ||
      X.cols() != W.cols()) {
    throw ValidationError("interpolate: shape mismatch", {});
  }
  return X + gamma * A + std::sqrt(t * (1.0 - gamma * gamma)) * W;
}

}  // namespace levyspec::ensemble
