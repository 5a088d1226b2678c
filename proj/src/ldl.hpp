#pragma once

// Sparse LDL' for quasi-definite KKT matrices with dynamic pivot regularization.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <vector>

namespace opsd::cone::detail {

class QuasiDefiniteLdl {
 public:
  using Matrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

  /// `pattern` must hold both triangles; `signs` is +1 / -1 per row (expected pivot sign).
  void analyze(const Matrix& pattern, std::vector<int> signs);

  /// Factorizes a matrix with the analyzed pattern. Pivots whose signed value drops
  /// below `eps` are replaced by sign * delta. Returns the number of replaced pivots.
  int factorize(const Matrix& m, double eps = 1e-13, double delta = 2e-7);

  [[nodiscard]] Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;

 private:
  int n_ = 0;
  std::vector<int> perm_;   // new -> old
  std::vector<int> iperm_;  // old -> new
  std::vector<int> signs_;  // by new index
  std::vector<int> parent_;
  std::vector<int> lp_;
  std::vector<int> li_;
  std::vector<double> lx_;
  std::vector<double> d_;
  // workspace
  std::vector<int> lnz_, flag_, pattern_;
  std::vector<double> y_;
};

}  // namespace opsd::cone::detail
