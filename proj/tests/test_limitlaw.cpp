#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <complex>
#include <vector>

#include "doctest.h"
#include "levyspec/limitlaw.hpp"
#include "oracle_helpers.hpp"

using namespace levyspec;
using namespace levyspec::limitlaw;
using complexd = std::complex<double>;

namespace {
const complexd kI(0.0, 1.0);
}

TEST_CASE("phi at x = 0 has the gamma-integral closed form") {
  // int_0^inf t^{s-1} e^{itz} dt = Gamma(s) (-iz)^{-s} for Im z > 0, so
  // phi_{a,z}(0) = (-iz)^{-a/2}.
  for (double a : {0.8, 1.2, 1.5}) {
    for (complexd z : {complexd(0.0, 0.7), complexd(0.3, 0.4), complexd(-0.2, 1.1)}) {
      const complexd want = std::pow(-kI * z, -a / 2.0);
      CHECK(std::abs(phi(a, z, 0.0) - want) < 1e-9);
    }
  }
}

TEST_CASE("psi at x = 0 integrates the plain exponential") {
  // int_0^inf e^{itz} dt = i / z.
  for (double a : {0.8, 1.5}) {
    for (complexd z : {complexd(0.0, 0.5), complexd(0.4, 0.8)}) {
      CHECK(std::abs(psi(a, z, 0.0) - kI / z) < 1e-10);
    }
  }
}

TEST_CASE("domain validation for the transform kernels") {
  CHECK_THROWS_AS((void)phi(2.5, kI, 0.5), ValidationError);
  CHECK_THROWS_AS((void)phi(1.5, complexd(0.1, -0.2), 0.5), ValidationError);
  CHECK_THROWS_AS((void)phi(1.5, kI, complexd(-0.5, 0.0)), ValidationError);
  CHECK_THROWS_AS((void)psi(0.0, kI, 0.5), ValidationError);
  CHECK_THROWS_AS((void)solve(1.5, complexd(0.3, 0.0)), ValidationError);
}

TEST_CASE("fixed point solutions match frozen pins") {
  for (const auto& pin : oracle::kSolvePins) {
    const auto s = solve(pin.a, complexd(pin.z_re, pin.z_im));
    CHECK(std::abs(s.m - complexd(pin.m_re, pin.m_im)) < 1e-6);
    CHECK(s.residual <= 1e-11);
    CHECK(s.iterations >= 1);
    CHECK(s.y.real() > 0.0);
    CHECK(s.m.imag() > 0.0);  // Herglotz
  }
}

TEST_CASE("stieltjes transform obeys the reflection symmetry") {
  for (double a : {0.8, 1.5}) {
    for (double E : {0.07, 0.25}) {
      const double eta = 0.12;
      const complexd mp = solve(a, complexd(E, eta)).m;
      const complexd mm = solve(a, complexd(-E, eta)).m;
      CHECK(std::abs(mm - (-std::conj(mp))) < 1e-9);
    }
  }
}

TEST_CASE("warm-started grid matches independent solves") {
  const double a = 1.2;
  std::vector<complexd> zs;
  for (double eta : {0.4, 0.2, 0.1, 0.05, 0.01}) zs.emplace_back(0.15, eta);
  const auto grid = solve_grid(a, zs);
  REQUIRE(grid.size() == zs.size());
  for (std::size_t i = 0; i < zs.size(); ++i) {
    const auto fresh = solve(a, zs[i]);
    CHECK(std::abs(grid[i].m - fresh.m) < 1e-9);
  }
}

TEST_CASE("density at zero: closed form matches frozen pins") {
  for (const auto& pin : oracle::kDensityPins) {
    CHECK(rho_zero(pin.a) == doctest::Approx(pin.rho0).epsilon(1e-12));
    CHECK(xi(pin.a) == doctest::Approx(pin.xi).epsilon(1e-12));
  }
  CHECK(rho_zero(1.0) == doctest::Approx(1.0 / std::numbers::pi).epsilon(1e-14));
  CHECK(xi(1.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS((void)rho_zero(2.0), ValidationError);
  CHECK_THROWS_AS((void)xi(-0.1), ValidationError);
}

TEST_CASE("semicircle law: density and stieltjes transform") {
  CHECK(rho_sc(0.0) == doctest::Approx(1.0 / std::numbers::pi).epsilon(1e-15));
  CHECK(rho_sc(2.0) == 0.0);
  CHECK(rho_sc(-2.5) == 0.0);
  CHECK(rho_sc(1.0) == doctest::Approx(std::sqrt(3.0) / (2.0 * std::numbers::pi)).epsilon(1e-14));

  // golden-ratio pin at z = i
  const complexd m_i = m_sc(kI);
  CHECK(std::abs(m_i - kI * oracle::kGoldenImag) < 1e-14);

  // self-consistency m^2 + z m + 1 = 0, Herglotz branch
  for (complexd z : {complexd(0.3, 0.2), complexd(-1.2, 0.6), complexd(1.9, 0.05)}) {
    const complexd m = m_sc(z);
    CHECK(std::abs(m * m + z * m + 1.0) < 1e-12);
    CHECK(m.imag() > 0.0);
  }
  CHECK_THROWS_AS((void)m_sc(complexd(0.5, 0.0)), ValidationError);
}

TEST_CASE("eta ladder construction") {
  const auto etas = density_eta_ladder();
  REQUIRE(etas.size() == 5);
  CHECK(etas[0] == 0.05);
  CHECK(etas[4] == doctest::Approx(0.05 / 16.0).epsilon(1e-15));
  for (std::size_t i = 1; i < etas.size(); ++i) CHECK(etas[i] < etas[i - 1]);
  CHECK_THROWS_AS((void)density_eta_ladder(1), ValidationError);
  CHECK_THROWS_AS((void)density_eta_ladder(3, 0.0), ValidationError);
}

TEST_CASE("eta-extrapolated density at zero approaches the closed form") {
  // The heavier-tailed case converges slowest; tolerances were frozen from
  // the ladder's observed extrapolation error before this test was written.
  const struct {
    double a, tol;
  } cases[] = {{0.8, 5e-4}, {1.2, 1e-6}, {1.5, 1e-6}};
  for (const auto& c : cases) {
    const auto ext = extrapolate_density(c.a, 0.0);
    CHECK(std::abs(ext.value - rho_zero(c.a)) < c.tol);
    CHECK(ext.raw.size() == 5);
    // raw ladder values climb monotonically toward the limit from below
    for (std::size_t i = 1; i < ext.raw.size(); ++i)
      CHECK(ext.raw[i] > ext.raw[i - 1]);
    CHECK(ext.raw.back() < rho_zero(c.a));
  }
}

TEST_CASE("extrapolation away from zero is finite and stable") {
  const auto ext = extrapolate_density(1.5, 0.35);
  CHECK(ext.value > 0.0);
  CHECK(ext.value < 1.0);
  CHECK(ext.last_delta < 1e-5);
  CHECK_THROWS_AS((void)extrapolate_density(1.5, 0.0, {0.05}), ValidationError);
  CHECK_THROWS_AS((void)extrapolate_density(1.5, 0.0, {0.05, -0.01}),
                  ValidationError);
}

TEST_CASE("iteration budget exhaustion reports the residual trail") {
  CHECK_THROWS_AS((void)solve(1.5, kI, 1e-14, 1), ConvergenceError);
  try {
    (void)solve(1.5, kI, 1e-14, 1);
  } catch (const ConvergenceError& e) {
    CHECK_FALSE(e.residual_trail.empty());
    CHECK(e.final_residual() > 0.0);
  }
}
