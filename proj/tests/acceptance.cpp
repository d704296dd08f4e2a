// Acceptance gate for the laboratory: ten end-to-end criteria, each printed as
// a single [PASS]/[FAIL] line with the measured values and the tolerance
// pinned here in code. The process exit code is the number of failed
// criteria, so a fully green run exits 0.
//
// Criteria that measure asymptotic claims at desk scale are statistical; their
// seeds are fixed constants below so every run reproduces the same verdict.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdarg>
#include <cstdio>
#include <numbers>
#include <string>
#include <vector>

#include "levyspec/ensemble.hpp"
#include "levyspec/errors.hpp"
#include "levyspec/experiment.hpp"
#include "levyspec/freeconv.hpp"
#include "levyspec/limitlaw.hpp"
#include "levyspec/philox.hpp"
#include "levyspec/spectral.hpp"
#include "levyspec/stable.hpp"
#include "levyspec/stats.hpp"

using namespace levyspec;
using complexd = std::complex<double>;

namespace {

int g_failures = 0;

void verdict(int idx, const char* name, bool pass, const std::string& detail) {
  std::printf("[%s] C%d: %s -- %s\n", pass ? "PASS" : "FAIL", idx, name,
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return std::string(buf);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

double smallest_singular(const Eigen::MatrixXd& M) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(M);
  return svd.singularValues()(M.rows() - 1);
}

Eigen::VectorXd plus_minus_lambdas(const Eigen::MatrixXd& block) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(block);
  const auto& s = svd.singularValues();
  Eigen::VectorXd l(2 * s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    l(2 * i) = s(i);
    l(2 * i + 1) = -s(i);
  }
  return l;
}

// ---------------------------------------------------------------------------
// C1: exact identities on randomized instances. The resolvent and partition
// identities are algebraic and must hold to 1e-9. The coupled-monotonicity
// hypothesis (smallest singular value nonincreasing along a shared noise
// path) is checked per sample exactly as stated; see the note printed if it
// fails.
void criterion1() {
  const double tol = 1e-9;
  const auto t0 = std::chrono::steady_clock::now();
  double ward = 0.0, resdiff = 0.0, schur = 0.0, partition = 0.0;
  long overlap = 0;
  int weyl_bad = 0;
  double weyl_worst = 0.0;
  const std::vector<double> s_path{0.19, 0.30, 0.45, 0.66};

  for (int i = 0; i < 100; ++i) {
    Rng rng(4001, std::uint64_t(i + 1));
    const int N = 8 + (i * 7) % 57;  // spread through 8..64
    const auto prm = stable::EnsembleParams::with_defaults(N, 1.5, {}, 4001);
    const Eigen::MatrixXd D = ensemble::build_levy(prm, rng);
    const Eigen::MatrixXd H = ensemble::symmetrize(D);
    const complexd z(rng.uniform(-1.0, 1.0), rng.uniform(0.05, 0.5));

    const auto G = spectral::resolvent(H, z);
    for (Eigen::Index r = 0; r < G.rows(); ++r)
      ward = std::max(ward, spectral::ward_residual(G, z, r));

    const Eigen::MatrixXd P = 0.1 * ensemble::gaussian_sym(N, rng);
    const Eigen::MatrixXd H2 = H + P;
    const auto G2 = spectral::resolvent(H2, z);
    resdiff = std::max(
        resdiff,
        (G - G2 - G * P.cast<complexd>() * G2).cwiseAbs().maxCoeff());

    schur = std::max(schur, spectral::schur_diag_residual(D, z));

    const auto sp = ensemble::split_by_threshold(H, prm);
    partition =
        std::max(partition, (sp.big + sp.small - H).cwiseAbs().maxCoeff());
    overlap +=
        ((sp.big.array() != 0.0) && (sp.small.array() != 0.0)).count();

    const auto wc =
        stats::weyl_coupled_curve(D, ensemble::gaussian_iid(N, rng), s_path);
    if (wc.violations > 0) {
      ++weyl_bad;
      weyl_worst = std::max(weyl_worst, wc.worst_increase);
    }
  }
  const double secs = seconds_since(t0);
  const bool identities_ok = ward <= tol && resdiff <= tol && schur <= tol &&
                             partition == 0.0 && overlap == 0;
  const bool pass = identities_ok && weyl_bad == 0 && secs < 60.0;
  verdict(1, "exact identity suite (100 instances, N <= 64)", pass,
          fmt("ward %.2e, resolvent-diff %.2e, schur %.2e, partition %.1g, "
              "overlap %ld (tol 1e-09); coupled-monotonicity violated in "
              "%d/100 instances (worst increase %.3g); %.1fs",
              ward, resdiff, schur, partition, overlap, weyl_bad, weyl_worst,
              secs));
  if (weyl_bad > 0) {
    std::printf(
        "        note: per-sample monotonicity of s_1(X + sqrt(s) W) in s is "
        "not an identity; adding noise can push the smallest singular value "
        "up. It holds only distributionally, so this sub-check fails by "
        "construction while all exact identities above hold.\n");
  }
}

// ---------------------------------------------------------------------------
// C2: closed-form constants against their pinned values.
void criterion2() {
  const double tol = 1e-12;
  struct Pin {
    const char* name;
    double measured;
    double pinned;
  };
  const Pin pins[] = {
      {"density_at_zero(1)", limitlaw::rho_zero(1.0),
       4.0 / std::numbers::pi},
      {"scale_xi(1)", limitlaw::xi(1.0), 4.0},
      {"semicircle_rho(0)", limitlaw::rho_sc(0.0), 1.0 / std::numbers::pi},
      {"lsv_cdf(1)", stats::lsv_limit_cdf(1.0), 1.0 - std::exp(-1.5)},
  };
  bool pass = true;
  std::string detail;
  for (const auto& p : pins) {
    const bool ok = std::abs(p.measured - p.pinned) <= tol;
    pass = pass && ok;
    detail += fmt("%s%s = %.12g vs pinned %.12g%s", detail.empty() ? "" : "; ",
                  p.name, p.measured, p.pinned, ok ? " OK" : " MISMATCH");
  }
  verdict(2, "closed-form constants (tol 1e-12)", pass, detail);
  if (!pass) {
    std::printf(
        "        note: the implemented density at zero is (1/pi) "
        "Gamma(1+2/a) (Gamma(1+a/2)/Gamma(1-a/2))^{1/a}, which a dual "
        "quadrature/Monte Carlo derivation confirms (1/pi at a = 1, so the "
        "scale factor is 1). The pinned values 4/pi and 4 are inconsistent "
        "with that closed form; the implementation keeps the derived "
        "constants rather than doctoring them to match the pins.\n");
  }
}

// ---------------------------------------------------------------------------
// C3: the spectral-scale extrapolation of the limit-law solver against the
// closed form, and the free-convolution solver against the semicircle.
void criterion3() {
  const double tol_density = 1e-3, tol_semi = 1e-6;
  double worst_density = 0.0;
  for (double a : {0.8, 1.2, 1.5}) {
    const auto ext = limitlaw::extrapolate_density(a, 0.0);
    worst_density =
        std::max(worst_density, std::abs(ext.value - limitlaw::rho_zero(a)));
  }
  double worst_semi = 0.0;
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(3);
  const auto etas = limitlaw::density_eta_ladder();
  for (double E : {0.0, 0.5, -0.5, 1.0, -1.0, 1.5, -1.5}) {
    const auto d = freeconv::rho_fc(zero, 1.0, E, etas);
    worst_semi = std::max(worst_semi, std::abs(d.value - limitlaw::rho_sc(E)));
  }
  const bool pass = worst_density <= tol_density && worst_semi <= tol_semi;
  verdict(3, "solver cross-validation", pass,
          fmt("density-at-zero error %.2e (tol 1e-03) over a in "
              "{0.8,1.2,1.5}; semicircle reconstruction error %.2e (tol "
              "1e-06)",
              worst_density, worst_semi));
}

// ---------------------------------------------------------------------------
// C4: the stable sampler against the exact Cauchy law, and the entry-tail
// envelope across sizes.
void criterion4() {
  const double ks_tol = 0.02, ratio_tol = 2.0;
  Rng rng(4004, 1);
  const auto law = stable::StableLaw::tail_normalized(1.0);
  std::vector<double> samples(100000);
  for (auto& x : samples) x = stable::sample_stable(law, rng);
  const double sigma = law.sigma;
  const double ks = stats::ks_statistic(samples, [sigma](double x) {
    return 0.5 + std::atan(x / sigma) / std::numbers::pi;
  });

  // envelope: empirical P(|entry| >= t) * (N t^a + 1) should be a stable
  // constant across the t-grid and both sizes
  const double a = 1.5;
  double c1 = 1e300, c2 = 0.0;
  for (int N : {128, 512}) {
    const auto prm = stable::EnsembleParams::with_defaults(N, a, {}, 4004);
    Rng erng(4004, std::uint64_t(10 + N));
    const int n = 200000;
    std::vector<double> entries(n);
    for (auto& e : entries) e = stable::sample_entry(prm, erng);
    for (double t : {0.5, 1.0, 2.0, 4.0}) {
      double hits = 0.0;
      for (double e : entries) hits += (std::abs(e) >= t) ? 1.0 : 0.0;
      const double env =
          (hits / n) * (double(N) * std::pow(t, a) + 1.0);
      c1 = std::min(c1, env);
      c2 = std::max(c2, env);
    }
  }
  const double ratio = c2 / c1;
  const bool pass = ks <= ks_tol && ratio <= ratio_tol;
  verdict(4, "stable sampler and entry tails", pass,
          fmt("Cauchy KS %.4f at n = 1e5 (tol 0.02); tail envelope fitted "
              "[%.3f, %.3f] across N in {128,512}, ratio %.3f (tol 2.0)",
              ks, c1, c2, ratio));
}

// ---------------------------------------------------------------------------
// C5: scaled least-singular-value samples against the limit CDF.
void criterion5() {
  const int N = 256, trials = 1000;
  const double xi = limitlaw::xi(1.5);

  std::vector<double> gauss, levy;
  gauss.reserve(trials);
  levy.reserve(trials);
  const auto prm = stable::EnsembleParams::with_defaults(N, 1.5, {}, 4005);
  for (int i = 0; i < trials; ++i) {
    Rng rng(4005, std::uint64_t(i + 1));
    gauss.push_back(double(N) * smallest_singular(ensemble::gaussian_iid(N, rng)));
    levy.push_back(double(N) * xi *
                   smallest_singular(ensemble::build_levy(prm, rng)));
  }
  auto cdf = [](double r) { return stats::lsv_limit_cdf(std::max(0.0, r)); };
  const double ks_g = stats::ks_statistic(gauss, cdf);
  const double ks_l = stats::ks_statistic(levy, cdf);
  const bool pass = ks_g <= 0.06 && ks_l <= 0.10;
  verdict(5, "least-singular-value law at N = 256, 1000 trials", pass,
          fmt("gaussian KS %.4f (tol 0.06); heavy-tailed a = 1.5 KS %.4f "
              "(tol 0.10)",
              ks_g, ks_l));
}

// ---------------------------------------------------------------------------
// C6: eigenvector sup-norms in the central window against the stated bound.
void criterion6() {
  const int N = 512, trials = 100;
  const double c = 0.05, delta = 0.15;
  const double bound = std::pow(double(N), delta - 0.5);
  const auto prm = stable::EnsembleParams::with_defaults(N, 1.5, {}, 4006);
  int within = 0, empty = 0;
  double worst = 0.0, best = 1.0;
  for (int i = 0; i < trials; ++i) {
    Rng rng(4006, std::uint64_t(i + 1));
    const auto d = spectral::decompose(ensemble::build_levy(prm, rng));
    const auto sup = stats::delocalization_sup(d, c);
    if (!sup) {
      ++empty;
      ++within;  // no vector in the window: the bound holds vacuously
      continue;
    }
    worst = std::max(worst, *sup);
    best = std::min(best, *sup);
    if (*sup <= bound) ++within;
  }
  const double frac = double(within) / double(trials);
  const bool pass = frac >= 0.95;
  verdict(6, "eigenvector delocalization at N = 512", pass,
          fmt("sup-norm <= N^{-0.35} = %.4f in %.0f%% of %d trials (need >= "
              "95%%); observed sup range [%.4f, %.4f], %d empty windows",
              bound, 100.0 * frac, trials, best, worst, empty));
  if (!pass) {
    std::printf(
        "        note: a fully delocalized unit vector on 2N = 1024 "
        "coordinates already has typical sup-norm ~sqrt(2 ln(2N) / (2N)) = "
        "0.116 > 0.113, so the pinned exponent delta = 0.15 is below the "
        "floor any orthogonal basis can reach at this size. The bound is "
        "asymptotic; at desk scale the criterion fails even for ideal "
        "delocalization, and the observed sup-norms sit just above the "
        "floor.\n");
  }
}

// ---------------------------------------------------------------------------
// C7: empirical Stieltjes transform of one large sample against the limit
// law on a grid.
void criterion7() {
  const int N = 1024;
  const double a = 1.5;
  const double eta = std::pow(double(N), -0.4);
  const auto prm = stable::EnsembleParams::with_defaults(N, a, {}, 4007);
  Rng rng(4007, 1);
  const Eigen::VectorXd lambdas =
      plus_minus_lambdas(ensemble::build_levy(prm, rng));
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const double E = -0.2 + 0.4 * double(i) / 19.0;
    const complexd z(E, eta);
    const complexd mX = spectral::stieltjes(lambdas, z);
    const complexd ma = limitlaw::solve(a, z, 1e-9).m;
    worst = std::max(worst, std::abs(mX - ma));
  }
  const bool pass = worst <= 0.1;
  verdict(7, "local spectral law at N = 1024", pass,
          fmt("max |m_X - m_a| = %.4f over 20-point grid, E in [-0.2,0.2], "
              "eta = N^{-0.4} (tol 0.1)",
              worst));
}

// ---------------------------------------------------------------------------
// C8: isotropic resolvent approximation: the residual/scale ratio should
// shrink with N, and the noiseless case is exact.
void criterion8() {
  const double a = 1.5;
  auto median_ratio = [&](int N, std::uint64_t seed) {
    const auto prm = stable::EnsembleParams::with_defaults(N, a, {}, seed);
    Rng setup(seed, 0);
    const double t =
        ensemble::coupling_time(prm, 0.02, setup,
                                ensemble::CouplingMethod::monte_carlo, 2000000)
            .t;
    const complexd z(0.05, std::pow(double(N), -0.6));
    std::vector<double> ratios;
    for (int i = 0; i < 50; ++i) {
      Rng rng(seed, std::uint64_t(i + 1));
      const auto sp =
          ensemble::split_by_threshold(ensemble::symmetrize(
                                           ensemble::build_levy(prm, rng)),
                                       prm);
      // the heavy part X enters as a 2N x 2N matrix; recover its block
      const Eigen::MatrixXd X = sp.big.bottomLeftCorner(N, N);
      const auto d = spectral::decompose(X);
      const Eigen::MatrixXd W = ensemble::gaussian_sym(N, rng);
      Eigen::VectorXd q(2 * N);
      for (int k = 0; k < 2 * N; ++k) q(k) = rng.normal();
      q.normalize();
      const auto chk =
          freeconv::isotropic_check(sp.big, d, W, t, z, q, 0.05);
      ratios.push_back(chk.residual / chk.scale);
    }
    std::nth_element(ratios.begin(), ratios.begin() + 25, ratios.end());
    return ratios[25];
  };
  const double m100 = median_ratio(100, 4108);
  const double m400 = median_ratio(400, 4408);

  // degenerate exactness
  Rng rng(4008, 1);
  const int n0 = 48;
  const auto B = ensemble::gaussian_iid(n0, rng);
  const auto d0 = spectral::decompose(B);
  Eigen::VectorXd q0(2 * n0);
  for (int k = 0; k < 2 * n0; ++k) q0(k) = rng.normal();
  q0.normalize();
  const auto exact0 =
      freeconv::isotropic_check(ensemble::symmetrize(B), d0,
                                ensemble::gaussian_sym(n0, rng), 0.0,
                                complexd(0.05, 0.2), q0);

  const bool pass = m400 < m100 && exact0.residual <= 1e-9;
  verdict(8, "isotropic approximant scaling", pass,
          fmt("median residual/scale: %.4f at N = 100 vs %.4f at N = 400 "
              "(must decrease); noiseless residual %.2e (tol 1e-09)",
              m100, m400, exact0.residual));
}

// ---------------------------------------------------------------------------
// C9: smoothed-count sandwich, gap-probability bracket, and the rescaled
// heavy-tailed vs Gaussian gap comparison.
void criterion9() {
  const int N = 256;
  const double a = 1.5, r = 1.0;

  // sandwich on interpolated spectra, exponent ladder
  const auto prm = stable::EnsembleParams::with_defaults(N, a, {}, 4009);
  Rng setup(4009, 0);
  const double t =
      ensemble::coupling_time(prm, 0.02, setup,
                              ensemble::CouplingMethod::monte_carlo, 2000000)
          .t;
  const double eps = 0.01, gamma = 0.5;
  const auto cfg_sand = stats::CountingConfig::from_exponent(N, r, eps);
  const double unit = std::pow(double(N), -eps);
  int sand_ok = 0;
  double worst_c = 0.0;
  for (int i = 0; i < 200; ++i) {
    Rng rng(4009, std::uint64_t(i + 1));
    const auto sp = ensemble::split_by_threshold(
        ensemble::symmetrize(ensemble::build_levy(prm, rng)), prm);
    const Eigen::MatrixXd X = sp.big.bottomLeftCorner(N, N);
    const Eigen::MatrixXd A = sp.small.bottomLeftCorner(N, N);
    const Eigen::MatrixXd Hg = ensemble::interpolate(
        X, A, ensemble::gaussian_iid(N, rng), t, gamma);
    const auto gs = stats::gap_sandwich(plus_minus_lambdas(Hg), cfg_sand);
    const double C = std::max(gs.slack_narrow, gs.slack_wide) / unit;
    worst_c = std::max(worst_c, C);
    if (C <= 5.0) ++sand_ok;
  }
  const double sand_frac = sand_ok / 200.0;

  // bracket and cross-ensemble comparison on the spacing ladder
  const double xi = limitlaw::xi(a), rho0 = limitlaw::rho_zero(a);
  const auto cfg_levy = stats::CountingConfig::from_spacing(
      r / (2.0 * N * xi), 1.0 / (2.0 * N * rho0));
  const auto cfg_gauss = stats::CountingConfig::from_spacing(
      r / (2.0 * N), std::numbers::pi / (2.0 * N));
  int empty_l = 0, empty_g = 0;
  double qlo_sum = 0.0, qhi_sum = 0.0;
  for (int i = 0; i < 500; ++i) {
    Rng rng(4009, std::uint64_t(1001 + i));
    const auto bl = stats::gap_bracket_sample(
        plus_minus_lambdas(ensemble::build_levy(prm, rng)), cfg_levy);
    if (bl.count == 0) ++empty_l;
    qlo_sum += bl.q_lo;
    qhi_sum += bl.q_hi;
    const auto bg = stats::gap_bracket_sample(
        plus_minus_lambdas(ensemble::gaussian_iid(N, rng)), cfg_gauss);
    if (bg.count == 0) ++empty_g;
  }
  const double p_levy = empty_l / 500.0, p_gauss = empty_g / 500.0;
  const double slack_lo = std::max(0.0, qlo_sum / 500.0 - p_levy);
  const double slack_hi = std::max(0.0, p_levy - qhi_sum / 500.0);
  const double cross = std::abs(p_levy - p_gauss);

  const bool pass = sand_frac >= 0.99 && slack_lo <= 0.02 &&
                    slack_hi <= 0.02 && cross <= 0.08;
  verdict(9, "gap sandwich and bracket at N = 256", pass,
          fmt("sandwich fitted C <= 5 in %.1f%% of 200 trials (worst C "
              "%.3f, need >= 99%%); bracket slack lo %.4f hi %.4f (tol "
              "0.02); |p_levy - p_gauss| = |%.3f - %.3f| = %.3f (tol 0.08)",
              100.0 * sand_frac, worst_c, slack_lo, slack_hi, p_levy,
              p_gauss, cross));
}

// ---------------------------------------------------------------------------
// C10: byte-identical reports for every experiment kind across worker counts.
void criterion10() {
  using namespace levyspec::experiment;
  std::vector<Config> cfgs;
  {
    Config c;
    c.kind = Kind::lsv;
    c.N = 16;
    c.trials = 4;
    cfgs.push_back(c);
  }
  {
    Config c;
    c.kind = Kind::bottomk;
    c.N = 16;
    c.k = 2;
    c.trials = 3;
    cfgs.push_back(c);
  }
  {
    Config c;
    c.kind = Kind::deloc;
    c.N = 16;
    c.trials = 3;
    c.c = 0.5;
    cfgs.push_back(c);
  }
  {
    Config c;
    c.kind = Kind::locallaw;
    c.N = 32;
    c.trials = 2;
    c.grid.points = 3;
    cfgs.push_back(c);
  }
  {
    Config c;
    c.kind = Kind::isotropic;
    c.N = 16;
    c.trials = 2;
    c.s = 0.3;
    cfgs.push_back(c);
  }
  {
    Config c;
    c.kind = Kind::gap;
    c.N = 32;
    c.trials = 4;
    cfgs.push_back(c);
  }
  {
    Config c;
    c.kind = Kind::density;
    c.grid.points = 3;
    c.eta_levels = 3;
    cfgs.push_back(c);
  }
  {
    Config c;
    c.kind = Kind::tailcheck;
    c.Ns = {32};
    c.ts = {1.0, 2.0};
    c.samples = 1000;
    cfgs.push_back(c);
  }
  int identical = 0;
  std::string bad;
  for (auto& c : cfgs) {
    c.seed = 4010;
    c.workers = 1;
    const std::string ref = run(c).to_json().dump(2);
    bool same = true;
    for (int w : {4, 8}) {
      c.workers = w;
      same = same && run(c).to_json().dump(2) == ref;
    }
    if (same) {
      ++identical;
    } else {
      bad += (bad.empty() ? "" : ",") + kind_to_string(c.kind);
    }
  }
  const bool pass = identical == int(cfgs.size());
  verdict(10, "deterministic reports across 1/4/8 workers", pass,
          pass ? fmt("all %d experiment kinds byte-identical", identical)
               : fmt("%d/%d kinds byte-identical; mismatched: %s", identical,
                     int(cfgs.size()), bad.c_str()));
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  struct Entry {
    int idx;
    void (*fn)();
  };
  const Entry entries[] = {
      {1, criterion1}, {2, criterion2}, {3, criterion3}, {4, criterion4},
      {5, criterion5}, {6, criterion6}, {7, criterion7}, {8, criterion8},
      {9, criterion9}, {10, criterion10},
  };
  for (const auto& e : entries) {
    try {
      e.fn();
    } catch (const std::exception& ex) {
      verdict(e.idx, "criterion threw", false,
              fmt("unexpected exception: %s", ex.what()));
    }
  }
  std::printf("acceptance: %d/10 criteria passed, %d failed (%.0fs)\n",
              10 - g_failures, g_failures, seconds_since(t0));
  return g_failures;
}
