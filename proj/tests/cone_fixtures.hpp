#pragma once
// Small cone programs and a slow first-order reference solver shared by the
// cone tests and the acceptance suite.

#include "opsd/conesolver.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace cone_fixtures {

using opsd::cone::SparseMatrix;
using opsd::cone::StandardConeProblem;
using Eigen::MatrixXd;
using Eigen::VectorXd;

inline SparseMatrix sparse(const MatrixXd& m) { return m.sparseView(); }

// Projection onto the product cone (LP block then SOC blocks).
inline VectorXd project(const VectorXd& v, int num_lp, const std::vector<int>& socs) {
  VectorXd p = v;
  for (int i = 0; i < num_lp; ++i) p[i] = std::max(0.0, v[i]);
  int o = num_lp;
  for (int d : socs) {
    const double t = v[o];
    const VectorXd u = v.segment(o + 1, d - 1);
    const double un = u.norm();
    if (un <= t) {
      // inside
    } else if (un <= -t) {
      p.segment(o, d).setZero();
    } else {
      const double a = 0.5 * (t + un);
      p[o] = a;
      p.segment(o + 1, d - 1) = a * u / un;
    }
    o += d;
  }
  return p;
}

// First-order reference: ADMM on  min c'x  s.t. Ax = b, Gx + s = h, s in K,
// using dense linear algebra only. Slow but independent of the interior point path.
inline double admm_reference(const MatrixXd& A, const VectorXd& b, const MatrixXd& G, const VectorXd& h, const VectorXd& c,
                      int num_lp, const std::vector<int>& socs, int iters) {
  const int n = static_cast<int>(c.size());
  const int p = static_cast<int>(b.size());
  const int m = static_cast<int>(h.size());
  const double rho = 1.0;
  MatrixXd kkt = MatrixXd::Zero(n + p, n + p);
  kkt.topLeftCorner(n, n) = rho * G.transpose() * G;
  kkt.topRightCorner(n, p) = A.transpose();
  kkt.bottomLeftCorner(p, n) = A;
  const Eigen::FullPivLU<MatrixXd> lu(kkt);
  VectorXd x = VectorXd::Zero(n), s = VectorXd::Zero(m), u = VectorXd::Zero(m);
  for (int k = 0; k < iters; ++k) {
    VectorXd rhs(n + p);
    rhs.head(n) = -c - rho * G.transpose() * (s - h + u);
    rhs.tail(p) = b;
    x = lu.solve(rhs).head(n);
    s = project(h - G * x - u, num_lp, socs);
    u += G * x + s - h;
  }
  return c.dot(x);
}

struct RandomSocp {
  StandardConeProblem problem;
  MatrixXd A, G;
};

inline RandomSocp random_socp(std::mt19937& rng, int n) {
  std::normal_distribution<double> N(0.0, 1.0);
  std::uniform_int_distribution<int> pick(2, 4);
  const int num_lp = 3;
  std::vector<int> socs;
  int m = num_lp;
  while (m < 2 * n) {
    socs.push_back(pick(rng));
    m += socs.back();
  }
  const int p = 2;
  MatrixXd A(p, n), G(m, n);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = N(rng);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) G(i, j) = N(rng);
  VectorXd x0(n);
  for (int j = 0; j < n; ++j) x0[j] = N(rng);
  auto interior = [&](VectorXd& v) {
    for (int i = 0; i < num_lp; ++i) v[i] = 0.5 + std::abs(N(rng));
    int o = num_lp;
    for (int d : socs) {
      for (int i = 1; i < d; ++i) v[o + i] = N(rng);
      v[o] = v.segment(o + 1, d - 1).norm() + 0.5 + std::abs(N(rng));
      o += d;
    }
  };
  VectorXd s0(m), z0(m);
  interior(s0);
  interior(z0);
  VectorXd y0(p);
  for (int i = 0; i < p; ++i) y0[i] = N(rng);
  RandomSocp out;
  out.A = A;
  out.G = G;
  out.problem.A = sparse(A);
  out.problem.b = A * x0;
  out.problem.G = sparse(G);
  out.problem.h = G * x0 + s0;
  out.problem.c = -A.transpose() * y0 - G.transpose() * z0;
  out.problem.num_nonneg = num_lp;
  out.problem.soc_dims = socs;
  return out;
}

inline StandardConeProblem pythagoras() {
  // variables (z, x, y): min z  s.t. x = 3, y = 4, (z, x, y) in SOC
  StandardConeProblem p;
  p.c = VectorXd::Zero(3);
  p.c[0] = 1.0;
  MatrixXd A = MatrixXd::Zero(2, 3);
  A(0, 1) = 1.0;
  A(1, 2) = 1.0;
  p.A = sparse(A);
  p.b = VectorXd(2);
  p.b << 3.0, 4.0;
  p.G = sparse(-MatrixXd::Identity(3, 3));
  p.h = VectorXd::Zero(3);
  p.soc_dims = {3};
  return p;
}

}  // namespace cone_fixtures
