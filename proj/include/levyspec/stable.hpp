#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "levyspec/errors.hpp"
#include "levyspec/philox.hpp"
#include "levyspec/quadrature.hpp"

namespace levyspec::stable {

/// Scale that pins the tail of a symmetric a-stable variable Z to
/// P(|Z| > t) -> t^{-a}:  sigma = (pi / (2 sin(pi a / 2) Gamma(a)))^{1/a}.
/// Defined for a in (0, 2); the normalization degenerates at a = 2.
inline double sigma_for(double a) {
  if (!(a > 0.0) || !(a < 2.0)) {
    throw ValidationError("sigma_for: tail index must lie in (0, 2)",
                          {"a in (0, 2) violated, got a = " + std::to_string(a)});
  }
  const double pi = std::numbers::pi;
  return std::pow(pi / (2.0 * std::sin(pi * a / 2.0) * std::tgamma(a)), 1.0 / a);
}

/// Symmetric a-stable law with characteristic function exp(-sigma^a |t|^a).
struct StableLaw {
  double a;
  double sigma;

  static StableLaw tail_normalized(double a) { return {a, sigma_for(a)}; }
};

/// Chambers-Mallows-Stuck sampler for the symmetric case. One uniform angle,
/// one exponential. The a = 1 branch of the general formula collapses to
/// tan(U), so a single expression covers all of (0, 2).
inline double sample_stable(const StableLaw& law, Rng& rng) {
  const double a = law.a;
  const double u = rng.uniform(-std::numbers::pi / 2.0, std::numbers::pi / 2.0);
  const double e = rng.exponential();
  const double core = std::sin(a * u) / std::pow(std::cos(u), 1.0 / a);
  const double tail = std::pow(std::cos((1.0 - a) * u) / e, (1.0 - a) / a);
  return law.sigma * core * tail;
}

/// Bounded symmetric deformation added to each entry before scaling.
/// The default (Rademacher) keeps the entry law symmetric while giving it a
/// nondegenerate finite-variance component.
struct Deformation {
  enum class Kind { none, rademacher, uniform, table };

  Kind kind = Kind::rademacher;
  double half_width = 1.0;            // uniform on [-half_width, half_width]
  std::vector<double> values;         // table atoms
  std::vector<double> probs;          // matching probabilities

  void validate() const {
    std::vector<std::string> bad;
    if (kind == Kind::uniform && !(half_width > 0.0)) {
      bad.push_back("uniform deformation needs half_width > 0");
    }
    if (kind == Kind::table) {
      if (values.size() != probs.size() || values.empty()) {
        bad.push_back("table deformation needs matching nonempty values/probs");
      } else {
        double total = 0.0;
        for (double p : probs) {
          if (!(p >= 0.0)) bad.push_back("table probabilities must be >= 0");
          total += p;
        }
        if (std::abs(total - 1.0) > 1e-12) {
          bad.push_back("table probabilities must sum to 1");
        }
        // Symmetry: every atom needs a mirror atom of equal mass.
        for (std::size_t i = 0; i < values.size(); ++i) {
          bool mirrored = false;
          for (std::size_t j = 0; j < values.size(); ++j) {
            if (std::abs(values[j] + values[i]) < 1e-12 &&
                std::abs(probs[j] - probs[i]) < 1e-12) {
              mirrored = true;
              break;
            }
          }
          if (!mirrored) {
            std::ostringstream os;
            os << "table deformation is not symmetric: atom " << values[i]
               << " has no mirror of equal probability";
            bad.push_back(os.str());
            break;
          }
        }
      }
    }
    if (!bad.empty()) throw ValidationError("invalid deformation", bad);
  }

  double sample(Rng& rng) const {
    switch (kind) {
      case Kind::none:
        return 0.0;
      case Kind::rademacher:
        return rng.sign();
      case Kind::uniform:
        return rng.uniform(-half_width, half_width);
      case Kind::table: {
        double u = rng.uniform01();
        for (std::size_t i = 0; i < values.size(); ++i) {
          u -= probs[i];
          if (u <= 0.0) return values[i];
        }
        return values.back();
      }
    }
    return 0.0;
  }

  double variance() const {
    switch (kind) {
      case Kind::none:
        return 0.0;
      case Kind::rademacher:
        return 1.0;
      case Kind::uniform:
        return half_width * half_width / 3.0;
      case Kind::table: {
        double m2 = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i)
          m2 += probs[i] * values[i] * values[i];
        return m2;  // symmetric, so mean is zero
      }
    }
    return 0.0;
  }

  std::string name() const {
    switch (kind) {
      case Kind::none:
        return "none";
      case Kind::rademacher:
        return "rademacher";
      case Kind::uniform:
        return "uniform";
      case Kind::table:
        return "table";
    }
    return "?";
  }
};

/// One line of a parameter-constraint check.
struct ConstraintReport {
  struct Item {
    std::string name;
    bool ok;
    double margin;  // how far inside (positive) or outside (negative)
  };
  std::vector<Item> items;
  bool all_ok = true;

  std::string summary() const {
    std::ostringstream os;
    for (const auto& it : items) {
      os << (it.ok ? "  ok   " : "  FAIL ") << it.name << " (margin "
         << it.margin << ")\n";
    }
    return os.str();
  }
};

/// Exponent constraints for the heavy-tailed ensemble:
///   nu = 1/a - b > 0,   0 < rho < nu,
///   1/(4-a) < nu < 1/(4-2a),   a rho < (2-a) nu.
inline ConstraintReport check_exponents(double a, double b, double rho,
                                        double nu) {
  ConstraintReport rep;
  auto add = [&](const std::string& name, bool ok, double margin) {
    rep.items.push_back({name, ok, margin});
    rep.all_ok = rep.all_ok && ok;
  };
  add("a in (0, 2)", a > 0.0 && a < 2.0, std::min(a, 2.0 - a));
  if (!(a > 0.0 && a < 2.0)) return rep;  // everything below divides by a
  add("nu == 1/a - b", std::abs(nu - (1.0 / a - b)) < 1e-12,
      -std::abs(nu - (1.0 / a - b)));
  add("nu > 0", nu > 0.0, nu);
  add("rho > 0", rho > 0.0, rho);
  add("rho < nu", rho < nu, nu - rho);
  add("nu > 1/(4-a)", nu > 1.0 / (4.0 - a), nu - 1.0 / (4.0 - a));
  add("nu < 1/(4-2a)", nu < 1.0 / (4.0 - 2.0 * a), 1.0 / (4.0 - 2.0 * a) - nu);
  add("a rho < (2-a) nu", a * rho < (2.0 - a) * nu, (2.0 - a) * nu - a * rho);
  return rep;
}

/// A feasible (nu, rho, b) choice for a given tail index. nu sits midway
/// between its lower bound and the smaller of its upper bound and 1/a (keeping
/// the split threshold exponent b nonnegative), rho at half its own ceiling.
struct FeasibleDefaults {
  double nu, rho, b;
};

inline FeasibleDefaults feasible_defaults(double a) {
  if (!(a > 0.0) || !(a < 2.0)) {
    throw ValidationError("feasible_defaults: tail index must lie in (0, 2)",
                          {"a in (0, 2) violated"});
  }
  const double lo = 1.0 / (4.0 - a);
  const double hi = std::min(1.0 / (4.0 - 2.0 * a), 1.0 / a);
  const double nu = (hi > lo) ? 0.5 * (lo + hi) : 0.5 * (lo + 1.0 / (4.0 - 2.0 * a));
  const double rho = 0.5 * nu * std::min(1.0, (2.0 - a) / a);
  return {nu, rho, 1.0 / a - nu};
}

/// Parameters of one heavy-tailed matrix ensemble. `b` and `nu` are stored
/// redundantly (nu = 1/a - b) because both show up constantly; construction
/// keeps them consistent.
struct EnsembleParams {
  int N = 0;
  double a = 1.0;
  double b = 0.0;
  double nu = 0.0;
  double rho = 0.0;
  Deformation deformation{};
  std::uint64_t seed = 0;

  static EnsembleParams from_exponents(int N, double a, double nu, double rho,
                                       Deformation def = {},
                                       std::uint64_t seed = 0) {
    EnsembleParams p;
    p.N = N;
    p.a = a;
    p.nu = nu;
    p.b = 1.0 / a - nu;
    p.rho = rho;
    p.deformation = def;
    p.seed = seed;
    p.validate();
    return p;
  }

  static EnsembleParams with_defaults(int N, double a, Deformation def = {},
                                      std::uint64_t seed = 0) {
    const auto d = feasible_defaults(a);
    return from_exponents(N, a, d.nu, d.rho, def, seed);
  }

  double entry_scale() const { return std::pow(double(N), -1.0 / a); }

  /// Entry magnitudes at or above this value go to the heavy part of the
  /// split; below it they stay in the small part. Equals N^{-nu}.
  double split_threshold() const { return std::pow(double(N), -nu); }

  void validate() const {
    std::vector<std::string> bad;
    if (N < 2) bad.push_back("N >= 2 required");
    const auto rep = check_exponents(a, b, rho, nu);
    for (const auto& it : rep.items) {
      if (!it.ok) bad.push_back("exponent constraint failed: " + it.name);
    }
    if (!bad.empty()) throw ValidationError("invalid ensemble parameters", bad);
    deformation.validate();
  }
};

inline ConstraintReport validate_params(const EnsembleParams& p) {
  return check_exponents(p.a, p.b, p.rho, p.nu);
}

/// One matrix entry before symmetrization: N^{-1/a} (J + Z) with J the
/// deformation and Z tail-normalized stable.
inline double sample_entry(const EnsembleParams& p, Rng& rng) {
  const StableLaw law = StableLaw::tail_normalized(p.a);
  return p.entry_scale() * (p.deformation.sample(rng) + sample_stable(law, rng));
}

/// CDF of the symmetric stable law by characteristic-function inversion:
///   F(x) = 1/2 + (1/pi) int_0^inf sin(x t)/t exp(-(sigma t)^a) dt.
/// The damping factor caps the integral at (sigma t)^a = 45.
inline double stable_cdf(const StableLaw& law, double x) {
  const double T = std::pow(45.0, 1.0 / law.a) / law.sigma;
  auto f = [&](double t) {
    const double damp = std::exp(-std::pow(law.sigma * t, law.a));
    return t > 1e-300 ? std::sin(x * t) / t * damp : x * damp;
  };
  return 0.5 + integrate_real(f, 0.0, T) / std::numbers::pi;
}

inline double stable_tail(const StableLaw& law, double x) {
  if (!(x >= 0.0)) {
    throw ValidationError("stable_tail: threshold must be >= 0", {});
  }
  return 2.0 * (1.0 - stable_cdf(law, x));  // P(|Z| > x), symmetric law
}

/// P(|J + Z| >= T) for the unscaled entry core J + Z. Atomic deformations
/// reduce to shifted stable CDFs; the uniform one averages over the shift.
/// Matrix entries are N^{-1/a}(J+Z), so a threshold x on |entry| corresponds
/// to T = N^{1/a} x here.
inline double entry_tail_probability(const EnsembleParams& p, double T) {
  if (!(T >= 0.0)) {
    throw ValidationError("entry_tail_probability: threshold must be >= 0", {});
  }
  const StableLaw law = StableLaw::tail_normalized(p.a);
  auto shifted = [&](double v) {
    // P(|v + Z| >= T) = 1 - F(T - v) + F(-T - v)
    return 1.0 - stable_cdf(law, T - v) + stable_cdf(law, -T - v);
  };
  switch (p.deformation.kind) {
    case Deformation::Kind::none:
      return shifted(0.0);
    case Deformation::Kind::rademacher:
      return shifted(1.0);  // symmetric in the sign of the shift
    case Deformation::Kind::table: {
      double acc = 0.0;
      for (std::size_t i = 0; i < p.deformation.values.size(); ++i)
        acc += p.deformation.probs[i] * shifted(p.deformation.values[i]);
      return acc;
    }
    case Deformation::Kind::uniform: {
      const double h = p.deformation.half_width;
      return integrate_real(shifted, -h, h, 1e-10, 1e-8, 200) / (2.0 * h);
    }
  }
  return 0.0;
}

struct MomentEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t draws = 0;
};

/// Monte Carlo estimate of E |d|^p 1{|d| <= R} for the entry law d.
/// Requires p > a (otherwise the untruncated moment diverges and the estimate
/// is meaningless as a moment) and R >= N^{-1/a} (the natural entry scale).
inline MomentEstimate truncated_moment(const EnsembleParams& p, double R,
                                       double power, std::size_t draws,
                                       Rng& rng) {
  std::vector<std::string> bad;
  if (!(power > p.a)) bad.push_back("moment order p must exceed tail index a");
  if (!(R >= p.entry_scale())) bad.push_back("cutoff R must be >= N^{-1/a}");
  if (draws == 0) bad.push_back("draws must be positive");
  if (!bad.empty()) throw ValidationError("truncated_moment: bad arguments", bad);

  double sum = 0.0, sumsq = 0.0;
  for (std::size_t i = 0; i < draws; ++i) {
    const double d = std::abs(sample_entry(p, rng));
    const double x = (d <= R) ? std::pow(d, power) : 0.0;
    sum += x;
    sumsq += x * x;
  }
  const double mean = sum / double(draws);
  const double var = std::max(0.0, sumsq / double(draws) - mean * mean);
  return {mean, std::sqrt(var / double(draws)), draws};
}

}  // namespace levyspec::stable
