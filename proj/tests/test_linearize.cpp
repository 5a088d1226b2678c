#include "opsd/linearize.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace opsd;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// Max |fit - 1/conj(V)| over an n x n grid of the region.
double held_out_error(const InvConjFit& f, const VoltageRegion& r, int n) {
  double e = 0.0;
  for (const auto& v : sample_region(r, n, n)) e = std::max(e, std::abs(f.eval(v) - 1.0 / std::conj(v)));
  return e;
}

// Feasible z interval of the four product rows at fixed (x, y): intersect the half-lines.
std::pair<double, double> z_interval(const std::array<ProductRow, 4>& rows, double x, double y) {
  double lo = -1e300, hi = 1e300;
  for (const auto& r : rows) {
    const double rest = r.rhs - r.a_x * x - r.a_y * y;  // a_z z <= rest
    if (r.a_z > 0) hi = std::min(hi, rest / r.a_z);
    if (r.a_z < 0) lo = std::max(lo, rest / r.a_z);
  }
  return {lo, hi};
}

}  // namespace

TEST_CASE("sample_region") {
  const VoltageRegion a{0.9, 1.1, 0.0, 3.0 * kDeg};
  const auto corners = sample_region(a, 2, 2);
  REQUIRE(corners.size() == 4);
  CHECK(std::abs(corners[0] - std::polar(0.9, -3.0 * kDeg)) <= 1e-15);
  CHECK(std::abs(corners[1] - std::polar(0.9, 3.0 * kDeg)) <= 1e-15);
  CHECK(std::abs(corners[2] - std::polar(1.1, -3.0 * kDeg)) <= 1e-15);
  CHECK(std::abs(corners[3] - std::polar(1.1, 3.0 * kDeg)) <= 1e-15);
  CHECK_THROWS_AS((void)sample_region(a, 1, 5), LinearizeError);
  CHECK_THROWS_AS((void)sample_region({1.0, 1.0, 0.0, 0.05}, 3, 3), LinearizeError);

  const auto b = sample_region(phase_region(Phase::b, 0.9, 1.1, 3.0 * kDeg), 5, 5);
  CHECK(b.size() == 25);
  for (const auto& v : b) {
    CHECK(angle(v) >= -123.0 * kDeg - 1e-12);
    CHECK(angle(v) <= -117.0 * kDeg + 1e-12);
  }
}

TEST_CASE("inverse-conjugate fit") {
  const VoltageRegion a{0.9, 1.1, 0.0, 3.0 * kDeg};
  const InvConjFit f = fit_inverse_conjugate(sample_region(a, 10, 10));
  // least-squares residual of 1/r over [0.9, 1.1] is 0.01216 on this grid (independent numpy lstsq)
  CHECK(f.max_err == doctest::Approx(0.0121628).epsilon(1e-5));
  CHECK(held_out_error(f, a, 50) <= 0.0125);
  CHECK(std::abs(f.eval(1.0) - 1.0) <= f.max_err);
  for (const auto& v : sample_region(a, 10, 10)) CHECK(std::abs(f.eval(v) - 1.0 / std::conj(v)) <= f.max_err + 1e-15);

  CHECK_THROWS_AS((void)fit_inverse_conjugate(std::vector<Complex>(10, Complex(1.0, 0.0))), LinearizeError);
  CHECK_THROWS_AS((void)fit_inverse_conjugate(std::vector<Complex>(5, Complex(1.0, 0.1))), LinearizeError);
  // collinear samples
  std::vector<Complex> line;
  for (int k = 0; k < 10; ++k) line.emplace_back(0.9 + 0.02 * k, 0.0);
  CHECK_THROWS_AS((void)fit_inverse_conjugate(line), LinearizeError);
}

TEST_CASE("fit quality holds for every phase and half width up to 5 degrees") {
  for (double hw : {1.0, 3.0, 5.0}) {
    for (int p = 0; p < 3; ++p) {
      const auto r = phase_region(Phase(p), 0.9, 1.1, hw * kDeg);
      const auto f = fit_inverse_conjugate(sample_region(r, 15, 15));
      CHECK(held_out_error(f, r, 50) <= 0.02);
    }
  }
}

TEST_CASE("lower voltage-magnitude cut") {
  const auto c0 = lower_vm_cut({0.9, 1.1, 0.0, 3.0 * kDeg}, 0.9);
  CHECK(c0.cx == doctest::Approx(1.0));
  CHECK(c0.cy == doctest::Approx(0.0));
  CHECK(c0.rhs == 0.9);
  const auto rb = phase_region(Phase::b, 0.9, 1.1, 3.0 * kDeg);
  const auto cb = lower_vm_cut(rb, 0.9);
  CHECK(cb.cx == doctest::Approx(-0.5));
  CHECK(cb.cy == doctest::Approx(-std::sqrt(3.0) / 2.0));
  // boundary point at the sector edge: slack vm_min (1 - cos dd)
  for (double s : {-1.0, 1.0}) {
    const Complex v = std::polar(0.9, rb.center_angle + s * rb.half_width);
    const double value = cb.cx * v.real() + cb.cy * v.imag() - cb.rhs;
    CHECK(value == doctest::Approx(-0.9 * (1.0 - std::cos(rb.half_width))).epsilon(1e-12));
  }
  // soundness: random phasors in the sector that satisfy the cut have |V| >= vm_min
  std::mt19937 rng(17);
  for (int p = 0; p < 3; ++p) {
    const auto r = phase_region(Phase(p), 0.9, 1.1, 3.0 * kDeg);
    const auto cut = lower_vm_cut(r, 0.9);
    std::uniform_real_distribution<double> mag(0.8, 1.2);
    std::uniform_real_distribution<double> ang(r.center_angle - r.half_width, r.center_angle + r.half_width);
    int violations = 0;
    for (int k = 0; k < 10000; ++k) {
      const Complex v = std::polar(mag(rng), ang(rng));
      if (cut.cx * v.real() + cut.cy * v.imag() >= cut.rhs && std::abs(v) < 0.9) ++violations;
    }
    CHECK(violations == 0);
  }
}

TEST_CASE("binary-continuous product rows") {
  const auto rows = bind_product({-1.0, 1.0});
  auto [lo0, hi0] = z_interval(rows, 0.0, 0.7);
  CHECK(lo0 == doctest::Approx(0.0));
  CHECK(hi0 == doctest::Approx(0.0));
  auto [lo1, hi1] = z_interval(rows, 1.0, 0.7);
  CHECK(lo1 == doctest::Approx(0.7));
  CHECK(hi1 == doctest::Approx(0.7));
  // relaxed x = 0.5: [-0.5, 0.5] from the first pair, [0.2, 1.2] from the second
  auto [lo, hi] = z_interval(rows, 0.5, 0.7);
  CHECK(lo == doctest::Approx(0.2));
  CHECK(hi == doctest::Approx(0.5));

  std::mt19937 rng(23);
  for (int k = 0; k < 100; ++k) {
    std::uniform_real_distribution<double> b(-2.0, 2.0);
    double y0 = b(rng), y1 = b(rng);
    if (y0 > y1) std::swap(y0, y1);
    const auto r = bind_product({y0, y1});
    std::uniform_real_distribution<double> yd(y0, y1);
    const double y = yd(rng);
    for (double x : {0.0, 1.0}) {
      auto [l, h] = z_interval(r, x, y);
      CHECK(std::abs(l - x * y) <= 1e-12);
      CHECK(std::abs(h - x * y) <= 1e-12);
    }
  }
}
