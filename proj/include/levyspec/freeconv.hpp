#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "levyspec/errors.hpp"
#include "levyspec/spectral.hpp"

namespace levyspec::freeconv {

using complexd = std::complex<double>;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using CVector = Eigen::VectorXcd;

/// Free additive convolution of an empirical spectrum with a semicircle of
/// variance s: the subordinated Stieltjes transform solves
///   m = (1/dim) sum_i 1/(lambda_i - z - s m),  Im m > 0.
/// `g` holds the summands 1/(lambda_i - z - s m) at the solution, i.e. the
/// deterministic approximation to the resolvent diagonal in the eigenbasis.
struct Solution {
  complexd z;
  double s = 0.0;
  complexd m;
  CVector g;
  int iterations = 0;
  double residual = 0.0;
};

inline Solution solve_mfc(const Vector& lambdas, double s, complexd z,
                          double tol = 1e-11, int max_iter = 20000,
                          std::optional<complexd> m0 = std::nullopt) {
  if (!(z.imag() > 0.0)) {
    throw ValidationError("solve_mfc: need Im z > 0", {});
  }
  if (!(s >= 0.0)) {
    throw ValidationError("solve_mfc: need s >= 0",
                          {"s = " + std::to_string(s)});
  }
  if (lambdas.size() == 0) {
    throw ValidationError("solve_mfc: empty spectrum", {});
  }
  const double dim = double(lambdas.size());
  auto F = [&](complexd m) {
    complexd acc = 0.0;
    for (Eigen::Index i = 0; i < lambdas.size(); ++i)
      acc += 1.0 / (complexd(lambdas(i)) - z - s * m);
    return acc / dim;
  };
  auto fill_g = [&](Solution& sol) {
    sol.g.resize(lambdas.size());
    for (Eigen::Index i = 0; i < lambdas.size(); ++i)
      sol.g(i) = 1.0 / (complexd(lambdas(i)) - z - s * sol.m);
  };

  Solution sol;
  sol.z = z;
  sol.s = s;
  if (s == 0.0) {
    sol.m = F(0.0);  // plain empirical Stieltjes transform, no self-consistency
    sol.iterations = 0;
    sol.residual = 0.0;
    fill_g(sol);
    return sol;
  }

  // Damped Picard core at a given spectral parameter. Returns true on
  // convergence; `trail` and the in/out iterate describe the last attempt.
  bool collapsed = false;
  std::vector<double> trail;
  auto attempt = [&](complexd zc, complexd& m, int& used) {
    auto Fc = [&](complexd mm) {
      complexd acc = 0.0;
      for (Eigen::Index i = 0; i < lambdas.size(); ++i)
        acc += 1.0 / (complexd(lambdas(i)) - zc - s * mm);
      return acc / dim;
    };
    if (!(m.imag() > 0.0)) m = complexd(m.real(), tol);
    double res = std::abs(Fc(m) - m);
    double omega = 0.5;
    trail.assign(1, res);
    collapsed = false;
    used = 0;
    for (int k = 0; k < max_iter; ++k) {
      ++used;
      if (res <= tol) break;
      if (omega < 1e-6) {
        collapsed = true;
        return false;
      }
      const complexd mn = (1.0 - omega) * m + omega * Fc(m);
      if (!(mn.imag() > 0.0)) {
        omega /= 2.0;  // keep the iterate in the upper half plane
        continue;
      }
      const double rn = std::abs(Fc(mn) - mn);
      if (rn > res) {
        omega /= 2.0;
        continue;
      }
      m = mn;
      res = rn;
      trail.push_back(res);
      omega = std::min(1.0, 1.5 * omega);  // recover after accepted steps
    }
    return res <= tol;
  };

  // Point-mass start: the root of s m^2 + z m + 1 = 0 in the upper half
  // plane, exact when the spectrum is concentrated at 0 and at the right
  // scale in general.
  auto quad_start = [&](complexd zc) {
    const complexd disc = std::sqrt(zc * zc - 4.0 * s);
    const complexd r1 = (-zc + disc) / (2.0 * s);
    const complexd r2 = (-zc - disc) / (2.0 * s);
    if (r1.imag() > 0.0) return r1;
    if (r2.imag() > 0.0) return r2;
    return complexd(0.0, 1.0 / std::sqrt(s));
  };

  complexd m;
  int used = 0;
  bool ok = false;
  std::vector<complexd> guesses;
  if (m0) guesses.push_back(*m0);
  guesses.push_back(quad_start(z));
  guesses.push_back(F(0.0));
  for (const complexd& g0 : guesses) {
    m = g0;
    if (attempt(z, m, used)) {
      ok = true;
      break;
    }
  }
  if (!ok) {
    // Continuation: solve at progressively smaller imaginary parts, walking
    // the iterate down from a regime where the map contracts globally.
    m = quad_start(complexd(z.real(), 8.0 * z.imag()));
    ok = true;
    for (double f : {8.0, 4.0, 2.0, 1.0}) {
      const complexd zc(z.real(), f * z.imag());
      if (!attempt(zc, m, used)) {
        ok = false;
        break;
      }
    }
  }
  if (!ok) {
    throw ConvergenceError(collapsed ? "solve_mfc: step size collapsed"
                                     : "solve_mfc: iteration budget exhausted",
                           trail);
  }
  sol.m = m;
  sol.iterations = used;
  sol.residual = trail.back();
  fill_g(sol);
  return sol;
}

struct FcDensity {
  double value = 0.0;       // Neville extrapolation to eta = 0
  double last_delta = 0.0;  // final tableau increment
  bool flagged = false;     // increment grew vs the previous level
  std::vector<double> raw;  // (1/pi) Im m at each ladder point
};

/// Free-convolution density at energy E via the same descending-eta ladder and
/// Neville extrapolation used for the limit law.
inline FcDensity rho_fc(const Vector& lambdas, double s, double E,
                        const std::vector<double>& etas) {
  if (etas.size() < 2) {
    throw ValidationError("rho_fc: need at least 2 ladder points", {});
  }
  FcDensity out;
  out.raw.reserve(etas.size());
  std::optional<complexd> warm;  // continue from the previous ladder level
  for (double eta : etas) {
    if (!(eta > 0.0)) {
      throw ValidationError("rho_fc: ladder values must be > 0", {});
    }
    const auto sol = solve_mfc(lambdas, s, complexd(E, eta), 1e-11, 20000, warm);
    warm = sol.m;
    out.raw.push_back(sol.m.imag() / std::numbers::pi);
  }
  const std::size_t n = etas.size();
  std::vector<std::vector<double>> T{out.raw};
  for (std::size_t k = 1; k < n; ++k) {
    std::vector<double> row(n - k);
    for (std::size_t i = 0; i < n - k; ++i) {
      row[i] = (T[k - 1][i + 1] * etas[i] - T[k - 1][i] * etas[i + k]) /
               (etas[i] - etas[i + k]);
    }
    T.push_back(std::move(row));
  }
  out.value = T[n - 1][0];
  out.last_delta = std::abs(T[n - 1][0] - T[n - 2][0]);
  if (n >= 3) {
    const double prev_delta = std::abs(T[n - 2][0] - T[n - 3][0]);
    out.flagged = out.last_delta > 10.0 * prev_delta && out.last_delta > 1e-12;
  }
  return out;
}

struct Approximant {
  complexd value;      // full quadratic-form approximant <q, G q>
  complexd diag_part;  // same sum without the +/- cross terms
  complexd m;          // subordinated Stieltjes transform used
};

/// Deterministic approximant for <q, (H + sqrt(s) W - z)^{-1} q> built from
/// the spectral data of H alone. In the joint eigenbasis (columns of d.U,
/// p = U^T q) the eigenpairs (+s_k, -s_k) mix p_k and p_{N+k}:
///   sum_k [ (g_k^+ + g_k^-)/2 (p_k^2 + p_{N+k}^2) + (g_k^+ - g_k^-) p_k p_{N+k} ],
/// with g_k^{+-} = 1/(+-s_k - z - s m). At s = 0 this is exactly <q, G_H q>.
inline Approximant isotropic_approximant(const spectral::Decomposition& d,
                                         double s, complexd z,
                                         const Vector& q) {
  if (q.size() != 2 * d.N) {
    throw ValidationError("isotropic_approximant: direction has wrong length",
                          {"need 2N = " + std::to_string(2 * d.N) +
                           ", got " + std::to_string(q.size())});
  }
  const Solution mfc = solve_mfc(d.lambdas(), s, z);
  const Vector p = d.U.transpose() * q;
  Approximant out;
  out.m = mfc.m;
  complexd full = 0.0, diag = 0.0;
  for (int k = 0; k < d.N; ++k) {
    const complexd gp = 1.0 / (complexd(d.sing(k)) - z - s * mfc.m);
    const complexd gm = 1.0 / (complexd(-d.sing(k)) - z - s * mfc.m);
    const double pp = p(k) * p(k) + p(d.N + k) * p(d.N + k);
    diag += 0.5 * (gp + gm) * pp;
    full += 0.5 * (gp + gm) * pp + (gp - gm) * p(k) * p(d.N + k);
  }
  out.value = full;
  out.diag_part = diag;
  return out;
}

struct IsotropicCheck {
  complexd quadratic_form;  // <q, (H + sqrt(s) W - z)^{-1} q>, solved exactly
  complexd approximant;
  double residual = 0.0;  // |quadratic_form - approximant|
  double scale = 0.0;     // N^{2c} (N Im z)^{-1/2} Im(diagonal approximant)
  complexd m;
};

/// Compare the exact quadratic form of the perturbed resolvent against the
/// spectral approximant. `scale` is the natural fluctuation yardstick: the
/// diagonal approximant's imaginary part, damped by (N eta)^{-1/2} and
/// inflated by a slowly growing safety factor N^{2c}; N is the block size.
inline IsotropicCheck isotropic_check(const Matrix& H,
                                      const spectral::Decomposition& d,
                                      const Matrix& W, double s, complexd z,
                                      const Vector& q,
                                      double c_exponent = 0.05) {
  if (H.rows() != 2 * d.N || H.cols() != 2 * d.N || W.rows() != 2 * d.N ||
      W.cols() != 2 * d.N) {
    throw ValidationError("isotropic_check: matrix shape mismatch", {});
  }
  if (!(z.imag() > 0.0)) {
    throw ValidationError("isotropic_check: need Im z > 0", {});
  }
  Eigen::MatrixXcd Mz = (H + std::sqrt(s) * W).cast<complexd>();
  Mz.diagonal().array() -= z;
  const CVector x = Mz.partialPivLu().solve(q.cast<complexd>().eval());
  IsotropicCheck out;
  out.quadratic_form = q.cast<complexd>().dot(x);  // real q, plain inner product
  const Approximant ap = isotropic_approximant(d, s, z, q);
  out.approximant = ap.value;
  out.m = ap.m;
  out.residual = std::abs(out.quadratic_form - out.approximant);
  out.scale = std::pow(double(d.N), 2.0 * c_exponent) /
              std::sqrt(double(d.N) * z.imag()) * ap.diag_part.imag();
  return out;
}

}  // namespace levyspec::freeconv
