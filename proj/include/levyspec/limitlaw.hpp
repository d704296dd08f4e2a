#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "levyspec/errors.hpp"
#include "levyspec/quadrature.hpp"

namespace levyspec::limitlaw {

using complexd = std::complex<double>;

namespace detail {
inline void check_a(double a) {
  if (!(a > 0.0) || !(a < 2.0)) {
    throw ValidationError("limit law: tail index must lie in (0, 2)",
                          {"a = " + std::to_string(a)});
  }
}
inline void check_domain(complexd z, complexd x) {
  if (!(z.imag() > 0.0)) {
    throw ValidationError("limit law: need Im z > 0",
                          {"Im z = " + std::to_string(z.imag())});
  }
  if (!(x.real() >= 0.0)) {
    throw ValidationError("limit law: need Re x >= 0",
                          {"Re x = " + std::to_string(x.real())});
  }
}
}  // namespace detail

/// phi_{a,z}(x) = (1/Gamma(a/2)) int_0^inf t^{a/2-1} e^{itz} e^{-Gamma(1-a/2) t^{a/2} x} dt,
/// computed after the substitution t = u^{2/a}, which absorbs the t^{a/2-1}
/// singularity and leaves a smooth integrand:
///   (2/(a Gamma(a/2))) int_0^inf exp(i u^{2/a} z - Gamma(1-a/2) u x) du.
/// The e^{i u^{2/a} z} factor decays like exp(-u^{2/a} Im z), so truncating at
/// u = (45/Im z)^{a/2} leaves a tail below e^{-45}.
inline complexd phi(double a, complexd z, complexd x) {
  detail::check_a(a);
  detail::check_domain(z, x);
  const double c = std::tgamma(1.0 - a / 2.0);
  const double T = std::max(std::pow(45.0 / z.imag(), a / 2.0), 5.0);
  const double p = 2.0 / a;
  auto f = [&](double u) {
    return std::exp(complexd(0.0, 1.0) * std::pow(u, p) * z - c * u * x);
  };
  const auto q = integrate(f, 0.0, T);
  return (2.0 / (a * std::tgamma(a / 2.0))) * q.value;
}

/// psi_{a,z}(x) = int_0^inf e^{itz} e^{-Gamma(1-a/2) t^{a/2} x} dt, integrated
/// directly in t (the integrand is already smooth); |e^{itz}| = e^{-t Im z}
/// caps the integral at t = 45/Im z.
inline complexd psi(double a, complexd z, complexd x) {
  detail::check_a(a);
  detail::check_domain(z, x);
  const double c = std::tgamma(1.0 - a / 2.0);
  const double T = 45.0 / z.imag();
  auto f = [&](double t) {
    return std::exp(complexd(0.0, 1.0) * t * z - c * std::pow(t, a / 2.0) * x);
  };
  return integrate(f, 0.0, T).value;
}

/// Fixed point y = phi_{a,z}(y) and the Stieltjes transform m = i psi_{a,z}(y)
/// of the heavy-tailed limit measure at spectral parameter z.
struct Solution {
  double a = 0.0;
  complexd z;
  complexd y;
  complexd m;
  int iterations = 0;
  double residual = 0.0;
};

/// Damped fixed-point iteration for y = phi_{a,z}(y). Step size starts at 1/2,
/// halves whenever a candidate leaves the right half plane or fails to shrink
/// the residual, recovers after accepted steps, and must not drop below 1e-4.
/// Default first guess is the exact fixed point of the x = 0 problem,
/// y0 = (-iz)^{-a/2}. If the direct solve stalls, the spectral parameter is
/// continued down from larger imaginary parts, where the map contracts.
inline Solution solve(double a, complexd z, double tol = 1e-11,
                      int max_iter = 500,
                      std::optional<complexd> y0 = std::nullopt) {
  detail::check_a(a);
  if (!(z.imag() > 0.0)) {
    throw ValidationError("limit law solve: need Im z > 0", {});
  }

  bool collapsed = false;
  std::vector<double> trail;
  auto attempt = [&](complexd zc, complexd& y, int& used) {
    if (y.real() < 0.0) y = -y;  // guess in the wrong half plane
    double res = std::abs(y - phi(a, zc, y));
    double omega = 0.5;
    trail.assign(1, res);
    collapsed = false;
    used = 0;
    std::vector<complexd> hist{y};  // accepted iterates, for acceleration
    auto accept = [&](complexd yn, double rn) {
      y = yn;
      res = rn;
      trail.push_back(res);
      hist.push_back(y);
      if (hist.size() > 3) hist.erase(hist.begin());
    };
    for (int k = 0; k < max_iter; ++k) {
      ++used;
      if (res <= tol) break;
      if (omega < 1e-4) {
        collapsed = true;
        return false;
      }
      const complexd yn = (1.0 - omega) * y + omega * phi(a, zc, y);
      if (yn.real() < 0.0) {
        omega /= 2.0;
        continue;
      }
      const double rn = std::abs(yn - phi(a, zc, yn));
      if (rn > res) {
        omega /= 2.0;
        continue;
      }
      accept(yn, rn);
      omega = std::min(1.0, 1.2 * omega);
      // Aitken extrapolation through the last three accepted iterates; taken
      // only when it strictly improves the residual, so it can never hurt.
      if (hist.size() == 3 && res > tol) {
        const complexd d1 = hist[1] - hist[0];
        const complexd d2 = hist[2] - hist[1];
        const complexd den = d2 - d1;
        if (std::abs(den) > 1e-300) {
          const complexd cand = hist[2] - d2 * d2 / den;
          if (std::isfinite(cand.real()) && std::isfinite(cand.imag()) &&
              cand.real() > 0.0) {
            const double rc = std::abs(cand - phi(a, zc, cand));
            if (rc < res) {
              accept(cand, rc);
              hist.assign(1, y);  // restart the difference stencil
            }
          }
        }
      }
    }
    return res <= tol;
  };
  auto cold_start = [&](complexd zc) {
    return std::pow(-complexd(0.0, 1.0) * zc, -a / 2.0);
  };

  complexd y = y0.value_or(cold_start(z));
  int used = 0;
  bool ok = attempt(z, y, used);
  if (!ok && y0) {  // caller guess failed; retry from the canonical start
    y = cold_start(z);
    ok = attempt(z, y, used);
  }
  if (!ok) {
    y = cold_start(complexd(z.real(), 8.0 * z.imag()));
    ok = true;
    for (double f : {8.0, 4.0, 2.0, 1.0}) {
      if (!attempt(complexd(z.real(), f * z.imag()), y, used)) {
        ok = false;
        break;
      }
    }
  }
  if (!ok) {
    throw ConvergenceError(collapsed
                               ? "limit law solve: step size collapsed"
                               : "limit law solve: iteration budget exhausted",
                           trail);
  }
  Solution s;
  s.a = a;
  s.z = z;
  s.y = y;
  s.m = complexd(0.0, 1.0) * psi(a, z, y);
  s.iterations = used;
  s.residual = trail.back();
  return s;
}

/// Solve along a path of spectral parameters, warm-starting each point from
/// the previous fixed point. Intended use: points sharing a real part with
/// decreasing imaginary part (continuation toward the real axis).
inline std::vector<Solution> solve_grid(double a,
                                        const std::vector<complexd>& zs,
                                        double tol = 1e-11,
                                        int max_iter = 500) {
  std::vector<Solution> out;
  out.reserve(zs.size());
  std::optional<complexd> warm;
  for (const complexd& z : zs) {
    out.push_back(solve(a, z, tol, max_iter, warm));
    warm = out.back().y;
  }
  return out;
}

/// Density of the limit measure at the origin, in closed form:
///   rho_a(0) = (1/pi) Gamma(1 + 2/a) (Gamma(1 + a/2) / Gamma(1 - a/2))^{1/a}.
/// At a = 1 this is exactly 1/pi, matching the Cauchy-entry ensemble whose
/// bulk spectral density at 0 the a -> limit reproduces.
inline double rho_zero(double a) {
  detail::check_a(a);
  return std::tgamma(1.0 + 2.0 / a) / std::numbers::pi *
         std::pow(std::tgamma(1.0 + a / 2.0) / std::tgamma(1.0 - a / 2.0),
                  1.0 / a);
}

/// Spacing normalizer xi(a) = pi rho_a(0); xi(1) = 1.
inline double xi(double a) { return std::numbers::pi * rho_zero(a); }

/// Semicircle density on [-2, 2] (variance-one normalization).
inline double rho_sc(double E) {
  const double d = 4.0 - E * E;
  return d > 0.0 ? std::sqrt(d) / (2.0 * std::numbers::pi) : 0.0;
}

/// Stieltjes transform of the semicircle law, branch with Im m > 0 in the
/// upper half plane: m(z) = (-z + sqrt(z^2 - 4)) / 2.
inline complexd m_sc(complexd z) {
  if (!(z.imag() > 0.0)) {
    throw ValidationError("m_sc: need Im z > 0", {});
  }
  const complexd s = std::sqrt(z * z - 4.0);
  const complexd m1 = (-z + s) / 2.0;
  return m1.imag() > 0.0 ? m1 : (-z - s) / 2.0;
}

/// Geometric ladder of spectral scales for extrapolation to the real axis.
inline std::vector<double> density_eta_ladder(int levels = 5,
                                              double eta0 = 0.05) {
  if (levels < 2 || !(eta0 > 0.0)) {
    throw ValidationError("density_eta_ladder: need levels >= 2, eta0 > 0", {});
  }
  std::vector<double> etas(levels);
  for (int k = 0; k < levels; ++k) etas[k] = eta0 / double(1 << k);
  return etas;
}

struct DensityExtrapolation {
  double value = 0.0;       // polynomial extrapolation to eta = 0
  double last_delta = 0.0;  // change from the previous Neville level
  std::vector<double> raw;  // (1/pi) Im m at each ladder point
};

/// Neville tableau evaluated at eta = 0 over the supplied ladder (descending
/// eta). Each level of the ladder is solved with continuation from the level
/// above, then the raw densities (1/pi) Im m(E + i eta) are extrapolated.
inline DensityExtrapolation extrapolate_density(
    double a, double E, const std::vector<double>& etas = density_eta_ladder(),
    double tol = 1e-12) {
  if (etas.size() < 2) {
    throw ValidationError("extrapolate_density: need at least 2 ladder points",
                          {});
  }
  std::vector<complexd> zs;
  zs.reserve(etas.size());
  for (double eta : etas) {
    if (!(eta > 0.0)) {
      throw ValidationError("extrapolate_density: ladder values must be > 0",
                            {});
    }
    zs.emplace_back(E, eta);
  }
  const auto sols = solve_grid(a, zs, tol);
  DensityExtrapolation out;
  out.raw.reserve(etas.size());
  for (const auto& s : sols) out.raw.push_back(s.m.imag() / std::numbers::pi);

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
  return out;
}

}  // namespace levyspec::limitlaw
