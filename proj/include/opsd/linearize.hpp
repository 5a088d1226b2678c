#pragma once

#include "opsd/netmodel.hpp"

#include <array>
#include <vector>

namespace opsd {

struct VoltageRegion {
  double vm_min = 0.9;
  double vm_max = 1.1;
  double center_angle = 0.0;  // radians
  double half_width = 0.0;    // radians
};

/// Region for phase p with centers 0, -120, +120 degrees.
[[nodiscard]] VoltageRegion phase_region(Phase p, double vm_min, double vm_max, double half_width_rad);

/// 1/conj(V) ~ (kx X + ky Y + bx) + j (hx X + hy Y + by)
struct InvConjFit {
  double kx = 0.0, ky = 0.0, bx = 0.0;
  double hx = 0.0, hy = 0.0, by = 0.0;
  double max_err = 0.0;

  [[nodiscard]] Complex eval(Complex v) const {
    return {kx * v.real() + ky * v.imag() + bx, hx * v.real() + hy * v.imag() + by};
  }
};

struct LinearizeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// n_mag x n_ang polar grid over the region (magnitude-major), returned rectangular.
[[nodiscard]] std::vector<Complex> sample_region(const VoltageRegion& r, int n_mag, int n_ang);

/// Least-squares fit of 1/conj(V) over the samples; throws LinearizeError when
/// the normal equations are rank deficient (condition estimate above 1e12).
[[nodiscard]] InvConjFit fit_inverse_conjugate(const std::vector<Complex>& samples);

/// Fit for each phase over its default region sampled on an n x n grid.
[[nodiscard]] std::array<InvConjFit, 3> fit_phases(double vm_min, double vm_max, double half_width_rad, int n = 15);

/// cx X + cy Y >= rhs
struct HalfPlane {
  double cx = 0.0;
  double cy = 0.0;
  double rhs = 0.0;
};

[[nodiscard]] HalfPlane lower_vm_cut(const VoltageRegion& region, double vm_min);

struct ProductBounds {
  double y_min = 0.0;
  double y_max = 0.0;
};

/// a_x x + a_y y + a_z z <= rhs
struct ProductRow {
  double a_x = 0.0;
  double a_y = 0.0;
  double a_z = 0.0;
  double rhs = 0.0;
};

/// Rows whose feasible set at binary x is exactly z = x y for y in the bounds:
///   x y_min <= z <= x y_max,  (x - 1) y_max <= z - y <= (x - 1) y_min.
[[nodiscard]] std::array<ProductRow, 4> bind_product(const ProductBounds& bounds);

}  // namespace opsd
