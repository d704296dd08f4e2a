#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "levyspec/errors.hpp"
#include "levyspec/spectral.hpp"

namespace levyspec::stats {

using Vector = Eigen::VectorXd;

/// Limiting law of the scaled least singular value: F(r) = 1 - exp(-r^2/2 - r)
/// for r >= 0. Covers both the Gaussian block ensemble (scale N s_1) and the
/// heavy-tailed one (scale N xi(a) s_1).
inline double lsv_limit_cdf(double r) {
  if (!(r >= 0.0)) {
    throw ValidationError("lsv_limit_cdf: argument must be >= 0",
                          {"r = " + std::to_string(r)});
  }
  return 1.0 - std::exp(-r * r / 2.0 - r);
}

/// One-sample Kolmogorov-Smirnov statistic against a CDF.
inline double ks_statistic(std::vector<double> samples,
                           const std::function<double(double)>& cdf) {
  if (samples.empty()) {
    throw ValidationError("ks_statistic: no samples", {});
  }
  std::sort(samples.begin(), samples.end());
  const double n = double(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double F = cdf(samples[i]);
    d = std::max(d, std::abs(double(i + 1) / n - F));
    d = std::max(d, std::abs(double(i) / n - F));
  }
  return d;
}

/// Two-sample Kolmogorov-Smirnov statistic.
inline double ks_two_sample(std::vector<double> xs, std::vector<double> ys) {
  if (xs.empty() || ys.empty()) {
    throw ValidationError("ks_two_sample: empty sample", {});
  }
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end());
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < xs.size() && j < ys.size()) {
    // compare the ECDFs just past the next distinct value, so ties across
    // the two samples are consumed together
    const double v = std::min(xs[i], ys[j]);
    while (i < xs.size() && xs[i] == v) ++i;
    while (j < ys.size() && ys[j] == v) ++j;
    d = std::max(d, std::abs(double(i) / double(xs.size()) -
                             double(j) / double(ys.size())));
  }
  return d;
}

/// The k smallest singular values on the microscopic scale, N * s_{(1..k)}.
inline std::vector<double> bottom_k(const spectral::Decomposition& d, int k) {
  if (k < 1 || k > d.N) {
    throw ValidationError("bottom_k: need 1 <= k <= N",
                          {"k = " + std::to_string(k)});
  }
  std::vector<double> out(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) out[std::size_t(i)] = double(d.N) * d.sing(i);
  return out;
}

/// Largest eigenvector sup-norm over the spectral window |lambda| <= c.
/// The +/- partners of one singular triple share entry magnitudes, so only the
/// positive side is scanned. Returns nothing when the window is empty.
inline std::optional<double> delocalization_sup(const spectral::Decomposition& d,
                                                double c) {
  std::optional<double> sup;
  for (int i = 1; i <= d.N; ++i) {
    if (d.sing(i - 1) > c) break;  // sing is increasing
    const double m = d.eigenvector(i).cwiseAbs().maxCoeff();
    sup = std::max(sup.value_or(0.0), m);
  }
  return sup;
}

/// Eigenvalues strictly inside the open interval (E1, E2).
inline int eig_count(const Vector& lambdas, double E1, double E2) {
  if (!(E1 < E2)) {
    throw ValidationError("eig_count: need E1 < E2", {});
  }
  int n = 0;
  for (Eigen::Index i = 0; i < lambdas.size(); ++i)
    if (lambdas(i) > E1 && lambdas(i) < E2) ++n;
  return n;
}

/// Smoothed count of eigenvalues in (-w, w): each indicator is replaced by its
/// convolution with the Cauchy kernel at scale eta,
///   (1/pi) [arctan((w - lambda)/eta) + arctan((w + lambda)/eta)].
inline double smoothed_count(const Vector& lambdas, double w, double eta) {
  if (!(w > 0.0) || !(eta > 0.0)) {
    throw ValidationError("smoothed_count: need w > 0 and eta > 0", {});
  }
  double acc = 0.0;
  for (Eigen::Index i = 0; i < lambdas.size(); ++i) {
    acc += std::atan((w - lambdas(i)) / eta) + std::atan((w + lambdas(i)) / eta);
  }
  return acc / std::numbers::pi;
}

/// Smooth bump used to turn a (smoothed) count into a gap indicator:
/// identically 1 for |x| <= 1/9, identically 0 for |x| >= 2/9, glued by the
/// standard exp(-1/t) smoothstep in between.
inline double smoothing_q(double x) {
  const double ax = std::abs(x);
  if (ax <= 1.0 / 9.0) return 1.0;
  if (ax >= 2.0 / 9.0) return 0.0;
  const double s = (2.0 / 9.0 - ax) * 9.0;  // 0 at outer edge, 1 at inner
  auto f = [](double u) { return u > 1e-12 ? std::exp(-1.0 / u) : 0.0; };
  return f(s) / (f(s) + f(1.0 - s));
}

/// Window and smoothing scales for gap counting around the origin.
/// `eta1` is the smoothing scale, `l1` the bracket offset; the two smoothed
/// counts at eta1 -+ l1 sandwich the exact count.
struct CountingConfig {
  double w = 0.0;
  double eta1 = 0.0;
  double l1 = 0.0;

  /// Exponent ladder tied to the matrix size: eta1 = N^{-1-eps},
  /// l1 = N^{-1-97 eps}, window half-width w = r/(2N).
  static CountingConfig from_exponent(int N, double r, double eps) {
    if (N < 2 || !(r > 0.0) || !(eps > 0.0)) {
      throw ValidationError(
          "CountingConfig::from_exponent: need N >= 2, r > 0, eps > 0", {});
    }
    CountingConfig c;
    c.w = r / (2.0 * double(N));
    c.eta1 = std::pow(double(N), -1.0 - eps);
    c.l1 = std::pow(double(N), -1.0 - 97.0 * eps);
    return c;
  }

  /// Ladder tied to the local mean spacing instead of exponents: smoothing a
  /// fixed fraction of the spacing, offset a quarter of that.
  static CountingConfig from_spacing(double w, double spacing,
                                     double divisor = 400.0) {
    if (!(w > 0.0) || !(spacing > 0.0) || !(divisor > 1.0)) {
      throw ValidationError(
          "CountingConfig::from_spacing: need w, spacing > 0, divisor > 1", {});
    }
    CountingConfig c;
    c.w = w;
    c.eta1 = spacing / divisor;
    c.l1 = c.eta1 / 4.0;
    return c;
  }

  void validate() const {
    std::vector<std::string> bad;
    if (!(w > 0.0)) bad.push_back("w > 0");
    if (!(eta1 > 0.0)) bad.push_back("eta1 > 0");
    if (!(l1 > 0.0)) bad.push_back("l1 > 0");
    if (!(l1 < eta1)) bad.push_back("l1 < eta1 (bracket must stay positive)");
    if (!bad.empty()) throw ValidationError("invalid counting config", bad);
  }
};

/// Exact count vs the two smoothed counts bracketing it:
///   smoothed(eta1 - l1) - slack <= exact <= smoothed(eta1 + l1) + slack.
/// Slacks report by how much each inequality fails at zero allowance.
/// `edge_case` marks an eigenvalue sitting (numerically) on a window edge,
/// where the smoothed counts straddle a 1/2 contribution and the exact count
/// is knife-edge.
struct GapSandwich {
  int exact = 0;
  double smoothed_narrow = 0.0;  // eta1 - l1
  double smoothed_wide = 0.0;    // eta1 + l1
  double slack_narrow = 0.0;     // max(0, smoothed_narrow - exact)
  double slack_wide = 0.0;       // max(0, exact - smoothed_wide)
  bool edge_case = false;
};

inline GapSandwich gap_sandwich(const Vector& lambdas,
                                const CountingConfig& cfg) {
  cfg.validate();
  GapSandwich out;
  out.exact = eig_count(lambdas, -cfg.w, cfg.w);
  out.smoothed_narrow = smoothed_count(lambdas, cfg.w, cfg.eta1 - cfg.l1);
  out.smoothed_wide = smoothed_count(lambdas, cfg.w, cfg.eta1 + cfg.l1);
  out.slack_narrow = std::max(0.0, out.smoothed_narrow - double(out.exact));
  out.slack_wide = std::max(0.0, double(out.exact) - out.smoothed_wide);
  const double edge_tol = cfg.l1 * 1e-6;
  for (Eigen::Index i = 0; i < lambdas.size(); ++i) {
    if (std::abs(std::abs(lambdas(i)) - cfg.w) <= edge_tol) {
      out.edge_case = true;
      break;
    }
  }
  return out;
}

/// One trial of the smoothed gap-probability bracket: the bump of the wider
/// smoothing underestimates the gap indicator, the narrower one overestimates,
///   E[q_lo] <= P(no eigenvalue in (-w, w)) <= E[q_hi].
struct GapBracketSample {
  int count = 0;       // exact eigenvalue count in the window
  double q_lo = 0.0;   // smoothing_q of smoothed count at eta1 + l1
  double q_hi = 0.0;   // smoothing_q of smoothed count at eta1 - l1
};

inline GapBracketSample gap_bracket_sample(const Vector& lambdas,
                                           const CountingConfig& cfg) {
  cfg.validate();
  GapBracketSample out;
  out.count = eig_count(lambdas, -cfg.w, cfg.w);
  out.q_lo = smoothing_q(smoothed_count(lambdas, cfg.w, cfg.eta1 + cfg.l1));
  out.q_hi = smoothing_q(smoothed_count(lambdas, cfg.w, cfg.eta1 - cfg.l1));
  return out;
}

/// Coupled monotonicity probe: smallest singular value of X + sqrt(s) W along
/// an increasing list of s values, with the SAME (X, W) pair throughout.
/// Records every adjacent increase beyond the tolerance (the hypothesis under
/// test says the curve is nonincreasing).
struct WeylCurve {
  std::vector<double> s;         // increasing
  std::vector<double> smallest;  // s_1(X + sqrt(s) W) per s
  int violations = 0;
  double worst_increase = 0.0;
};

inline WeylCurve weyl_coupled_curve(const Eigen::MatrixXd& X,
                                    const Eigen::MatrixXd& W,
                                    std::vector<double> s_values,
                                    double tol = 1e-12) {
  if (X.rows() != X.cols() || W.rows() != X.rows() || W.cols() != X.cols()) {
    throw ValidationError("weyl_coupled_curve: need matching square blocks",
                          {});
  }
  if (s_values.size() < 2) {
    throw ValidationError("weyl_coupled_curve: need at least 2 s values", {});
  }
  std::sort(s_values.begin(), s_values.end());
  if (!(s_values.front() >= 0.0)) {
    throw ValidationError("weyl_coupled_curve: s values must be >= 0", {});
  }
  WeylCurve out;
  out.s = std::move(s_values);
  out.smallest.reserve(out.s.size());
  for (double s : out.s) {
    const Eigen::MatrixXd M = X + std::sqrt(s) * W;
    Eigen::BDCSVD<Eigen::MatrixXd> svd(M);
    out.smallest.push_back(svd.singularValues()(M.rows() - 1));
  }
  for (std::size_t i = 1; i < out.smallest.size(); ++i) {
    const double inc = out.smallest[i] - out.smallest[i - 1];
    if (inc > tol) {
      ++out.violations;
      out.worst_increase = std::max(out.worst_increase, inc);
    }
  }
  return out;
}

}  // namespace levyspec::stats
