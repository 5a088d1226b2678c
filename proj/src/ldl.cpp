#include "ldl.hpp"

#include <Eigen/OrderingMethods>

namespace opsd::cone::detail {

void QuasiDefiniteLdl::analyze(const Matrix& pattern, std::vector<int> signs) {
  n_ = static_cast<int>(pattern.cols());
  Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> p;
  Eigen::AMDOrdering<int> amd;
  amd(pattern, p);
  perm_.assign(p.indices().data(), p.indices().data() + n_);
  iperm_.assign(n_, 0);
  for (int k = 0; k < n_; ++k) iperm_[perm_[k]] = k;
  signs_.assign(n_, 1);
  for (int k = 0; k < n_; ++k) signs_[k] = signs[perm_[k]];

  parent_.assign(n_, -1);
  lnz_.assign(n_, 0);
  flag_.assign(n_, 0);
  const int* ap = pattern.outerIndexPtr();
  const int* ai = pattern.innerIndexPtr();
  for (int k = 0; k < n_; ++k) {
    parent_[k] = -1;
    flag_[k] = k;
    lnz_[k] = 0;
    const int kk = perm_[k];
    for (int q = ap[kk]; q < ap[kk + 1]; ++q) {
      int i = iperm_[ai[q]];
      if (i < k) {
        for (; flag_[i] != k; i = parent_[i]) {
          if (parent_[i] == -1) parent_[i] = k;
          ++lnz_[i];
          flag_[i] = k;
        }
      }
    }
  }
  lp_.assign(n_ + 1, 0);
  for (int k = 0; k < n_; ++k) lp_[k + 1] = lp_[k] + lnz_[k];
  li_.assign(lp_[n_], 0);
  lx_.assign(lp_[n_], 0.0);
  d_.assign(n_, 0.0);
  y_.assign(n_, 0.0);
  pattern_.assign(n_, 0);
}

int QuasiDefiniteLdl::factorize(const Matrix& m, double eps, double delta) {
  const int* ap = m.outerIndexPtr();
  const int* ai = m.innerIndexPtr();
  const double* ax = m.valuePtr();
  int replaced = 0;
  for (int k = 0; k < n_; ++k) {
    y_[k] = 0.0;
    int top = n_;
    flag_[k] = k;
    lnz_[k] = 0;
    const int kk = perm_[k];
    for (int q = ap[kk]; q < ap[kk + 1]; ++q) {
      int i = iperm_[ai[q]];
      if (i <= k) {
        y_[i] += ax[q];
        int len = 0;
        for (; flag_[i] != k; i = parent_[i]) {
          pattern_[len++] = i;
          flag_[i] = k;
        }
        while (len > 0) pattern_[--top] = pattern_[--len];
      }
    }
    d_[k] = y_[k];
    y_[k] = 0.0;
    for (; top < n_; ++top) {
      const int i = pattern_[top];
      const double yi = y_[i];
      y_[i] = 0.0;
      const int p2 = lp_[i] + lnz_[i];
      int q = lp_[i];
      for (; q < p2; ++q) y_[li_[q]] -= lx_[q] * yi;
      const double lki = yi / d_[i];
      d_[k] -= lki * yi;
      li_[q] = k;
      lx_[q] = lki;
      ++lnz_[i];
    }
    if (signs_[k] * d_[k] <= eps) {
      d_[k] = signs_[k] * delta;
      ++replaced;
    }
  }
  return replaced;
}

Eigen::VectorXd QuasiDefiniteLdl::solve(const Eigen::VectorXd& rhs) const {
  Eigen::VectorXd x(n_);
  for (int k = 0; k < n_; ++k) x[k] = rhs[perm_[k]];
  for (int j = 0; j < n_; ++j) {
    const double xj = x[j];
    for (int q = lp_[j]; q < lp_[j + 1]; ++q) x[li_[q]] -= lx_[q] * xj;
  }
  for (int j = 0; j < n_; ++j) x[j] /= d_[j];
  for (int j = n_ - 1; j >= 0; --j) {
    double xj = x[j];
    for (int q = lp_[j]; q < lp_[j + 1]; ++q) xj -= lx_[q] * x[li_[q]];
    x[j] = xj;
  }
  Eigen::VectorXd out(n_);
  for (int k = 0; k < n_; ++k) out[perm_[k]] = x[k];
  return out;
}

}  // namespace opsd::cone::detail
