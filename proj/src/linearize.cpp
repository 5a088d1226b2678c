#include "opsd/linearize.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <numbers>

namespace opsd {

VoltageRegion phase_region(Phase p, double vm_min, double vm_max, double half_width_rad) {
  static constexpr double kCenters[3] = {0.0, -2.0 * std::numbers::pi / 3.0, 2.0 * std::numbers::pi / 3.0};
  return {vm_min, vm_max, kCenters[static_cast<int>(p)], half_width_rad};
}

std::vector<Complex> sample_region(const VoltageRegion& r, int n_mag, int n_ang) {
  if (n_mag < 2 || n_ang < 2) throw LinearizeError("sample_region: need at least 2 points per axis");
  if (!(r.vm_min < r.vm_max)) throw LinearizeError("sample_region: degenerate magnitude range");
  if (!(r.half_width > 0.0)) throw LinearizeError("sample_region: degenerate angle range");
  std::vector<Complex> out;
  out.reserve(static_cast<std::size_t>(n_mag) * n_ang);
  for (int i = 0; i < n_mag; ++i) {
    const double m = r.vm_min + (r.vm_max - r.vm_min) * i / (n_mag - 1);
    for (int k = 0; k < n_ang; ++k) {
      const double a = r.center_angle - r.half_width + 2.0 * r.half_width * k / (n_ang - 1);
      out.push_back(std::polar(m, a));
    }
  }
  return out;
}

InvConjFit fit_inverse_conjugate(const std::vector<Complex>& samples) {
  if (samples.size() < 6) throw LinearizeError("fit_inverse_conjugate: need at least 6 samples");
  // Both parts share the design matrix [X Y 1]; center it for conditioning.
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const auto& v : samples) mean += Eigen::Vector2d(v.real(), v.imag());
  mean /= static_cast<double>(samples.size());

  Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
  Eigen::Vector3d atu = Eigen::Vector3d::Zero();
  Eigen::Vector3d atw = Eigen::Vector3d::Zero();
  for (const auto& v : samples) {
    const Eigen::Vector3d row(v.real() - mean[0], v.imag() - mean[1], 1.0);
    const Complex target = 1.0 / std::conj(v);
    ata += row * row.transpose();
    atu += row * target.real();
    atw += row * target.imag();
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(ata, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > 1e12) throw LinearizeError("fit_inverse_conjugate: rank-deficient normal equations");
  const Eigen::LLT<Eigen::Matrix3d> llt(ata);
  const Eigen::Vector3d cu = llt.solve(atu);
  const Eigen::Vector3d cw = llt.solve(atw);

  InvConjFit f;
  f.kx = cu[0];
  f.ky = cu[1];
  f.bx = cu[2] - cu[0] * mean[0] - cu[1] * mean[1];
  f.hx = cw[0];
  f.hy = cw[1];
  f.by = cw[2] - cw[0] * mean[0] - cw[1] * mean[1];
  for (const auto& v : samples) f.max_err = std::max(f.max_err, std::abs(f.eval(v) - 1.0 / std::conj(v)));
  return f;
}

std::array<InvConjFit, 3> fit_phases(double vm_min, double vm_max, double half_width_rad, int n) {
  std::array<InvConjFit, 3> out;
  for (int p = 0; p < 3; ++p) {
    out[p] = fit_inverse_conjugate(sample_region(phase_region(Phase(p), vm_min, vm_max, half_width_rad), n, n));
  }
  return out;
}

HalfPlane lower_vm_cut(const VoltageRegion& region, double vm_min) {
  return {std::cos(region.center_angle), std::sin(region.center_angle), vm_min};
}

std::array<ProductRow, 4> bind_product(const ProductBounds& b) {
  return {{
      {b.y_min, 0.0, -1.0, 0.0},        // x y_min - z <= 0
      {-b.y_max, 0.0, 1.0, 0.0},        // z - x y_max <= 0
      {b.y_max, 1.0, -1.0, b.y_max},    // (x - 1) y_max <= z - y
      {-b.y_min, -1.0, 1.0, -b.y_min},  // z - y <= (x - 1) y_min
  }};
}

}  // namespace opsd
