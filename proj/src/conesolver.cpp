#include "opsd/conesolver.hpp"

#include "ldl.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>

namespace opsd::cone {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using Eigen::VectorXd;

double inf_norm(const VectorXd& v) { return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>(); }

struct Block {
  int offset;
  int dim;
};

// Layout of a product cone: nonnegative orthant first, then SOC blocks.
struct ConeLayout {
  int num_lp = 0;
  std::vector<Block> socs;

  [[nodiscard]] int size() const {
    int n = num_lp;
    for (const auto& b : socs) n += b.dim;
    return n;
  }
  [[nodiscard]] int degree() const { return num_lp + static_cast<int>(socs.size()); }
};

// Smallest "eigenvalue" of v with respect to the cone; v in int K iff > 0.
double min_eig(const ConeLayout& k, const VectorXd& v) {
  double m = kInf;
  for (int i = 0; i < k.num_lp; ++i) m = std::min(m, v[i]);
  for (const auto& b : k.socs) {
    m = std::min(m, v[b.offset] - v.segment(b.offset + 1, b.dim - 1).norm());
  }
  return m;
}

VectorXd identity_element(const ConeLayout& k, int size) {
  VectorXd e = VectorXd::Zero(size);
  e.head(k.num_lp).setOnes();
  for (const auto& b : k.socs) e[b.offset] = 1.0;
  return e;
}

// Euclidean distance (infinity norm over blocks) from v to the cone.
double cone_distance(const ConeLayout& k, const VectorXd& v) {
  double d = 0.0;
  for (int i = 0; i < k.num_lp; ++i) d = std::max(d, -v[i]);
  for (const auto& b : k.socs) {
    const double t = v[b.offset];
    const double u = v.segment(b.offset + 1, b.dim - 1).norm();
    if (u <= t) continue;
    if (u <= -t) {
      d = std::max(d, std::hypot(t, u));
    } else {
      // projection onto the cone boundary
      const double a = 0.5 * (t + u);
      d = std::max(d, std::hypot(t - a, u - a));
    }
  }
  return d;
}

VectorXd jordan_product(const ConeLayout& k, const VectorXd& u, const VectorXd& v) {
  VectorXd w(u.size());
  w.head(k.num_lp) = u.head(k.num_lp).cwiseProduct(v.head(k.num_lp));
  for (const auto& b : k.socs) {
    const int o = b.offset;
    const int q = b.dim - 1;
    w[o] = u.segment(o, b.dim).dot(v.segment(o, b.dim));
    w.segment(o + 1, q) = u[o] * v.segment(o + 1, q) + v[o] * u.segment(o + 1, q);
  }
  return w;
}

// Solves lambda o u = d for u.
// (u0 - |u1|)(u0 + |u1|), less cancellation than u0^2 - |u1|^2.
double soc_det(double u0, double n1) { return (u0 - n1) * (u0 + n1); }

VectorXd jordan_divide(const ConeLayout& k, const VectorXd& lambda, const VectorXd& d) {
  VectorXd u(d.size());
  u.head(k.num_lp) = d.head(k.num_lp).cwiseQuotient(lambda.head(k.num_lp));
  for (const auto& b : k.socs) {
    const int o = b.offset;
    const int q = b.dim - 1;
    const double l0 = lambda[o];
    const auto l1 = lambda.segment(o + 1, q);
    const double det = soc_det(l0, l1.norm());
    const double u0 = (l0 * d[o] - l1.dot(d.segment(o + 1, q))) / det;
    u[o] = u0;
    u.segment(o + 1, q) = (d.segment(o + 1, q) - u0 * l1) / l0;
  }
  return u;
}

// Largest step a with u + a*d in K (u strictly interior); +inf if unbounded.
double max_step(const ConeLayout& k, const VectorXd& u, const VectorXd& d) {
  double step = kInf;
  for (int i = 0; i < k.num_lp; ++i) {
    if (d[i] < 0.0) step = std::min(step, -u[i] / d[i]);
  }
  for (const auto& b : k.socs) {
    const int o = b.offset;
    const int q = b.dim - 1;
    const double norm2 = soc_det(u[o], u.segment(o + 1, q).norm());
    if (norm2 <= 0.0) return 0.0;
    const double norm = std::sqrt(norm2);
    const double inv = 1.0 / norm;
    const double ub0 = u[o] * inv;
    const VectorXd ub1 = u.segment(o + 1, q) * inv;
    const double rho0 = (ub0 * d[o] - ub1.dot(d.segment(o + 1, q))) * inv;
    const double factor = (rho0 + d[o] * inv) / (ub0 + 1.0);
    const VectorXd rho1 = inv * d.segment(o + 1, q) - factor * ub1;
    const double denom = rho1.norm() - rho0;
    if (denom > 0.0) step = std::min(step, 1.0 / denom);
  }
  return step;
}

// Nesterov-Todd scaling W with W z = W^{-1} s = lambda.
struct NtScaling {
  VectorXd lp_w;                   // sqrt(s/z)
  std::vector<double> eta;         // per SOC
  std::vector<VectorXd> wbar;      // per SOC, wbar' J wbar = 1
  VectorXd lambda;

  static NtScaling identity(const ConeLayout& k) {
    NtScaling w;
    w.lp_w = VectorXd::Ones(k.num_lp);
    for (const auto& b : k.socs) {
      w.eta.push_back(1.0);
      VectorXd e = VectorXd::Zero(b.dim);
      e[0] = 1.0;
      w.wbar.push_back(e);
    }
    return w;
  }

  // Returns false when s or z left the cone interior numerically.
  bool update(const ConeLayout& k, const VectorXd& s, const VectorXd& z) {
    for (int i = 0; i < k.num_lp; ++i) {
      if (!(s[i] > 0.0 && z[i] > 0.0)) return false;
      lp_w[i] = std::sqrt(s[i] / z[i]);
    }
    for (std::size_t c = 0; c < k.socs.size(); ++c) {
      const auto& b = k.socs[c];
      const int o = b.offset;
      const int q = b.dim - 1;
      const double sres = soc_det(s[o], s.segment(o + 1, q).norm());
      const double zres = soc_det(z[o], z.segment(o + 1, q).norm());
      if (!(sres > 0.0 && zres > 0.0 && s[o] > 0.0 && z[o] > 0.0)) return false;
      const double sn = std::sqrt(sres);
      const double zn = std::sqrt(zres);
      const VectorXd sb = s.segment(o, b.dim) / sn;
      const VectorXd zb = z.segment(o, b.dim) / zn;
      const double gamma = std::sqrt(0.5 * (1.0 + sb.dot(zb)));
      VectorXd w(b.dim);
      w[0] = (sb[0] + zb[0]) / (2.0 * gamma);
      w.tail(q) = (sb.tail(q) - zb.tail(q)) / (2.0 * gamma);
      // renormalize against rounding so that w0^2 - |w1|^2 = 1
      w[0] = std::sqrt(1.0 + w.tail(q).squaredNorm());
      eta[c] = std::sqrt(sn / zn);
      wbar[c] = std::move(w);
    }
    lambda = apply(k, z);
    return true;
  }

  [[nodiscard]] VectorXd apply(const ConeLayout& k, const VectorXd& v) const {
    VectorXd r(v.size());
    r.head(k.num_lp) = lp_w.cwiseProduct(v.head(k.num_lp));
    for (std::size_t c = 0; c < k.socs.size(); ++c) {
      const auto& b = k.socs[c];
      const int o = b.offset;
      const int q = b.dim - 1;
      const auto& w = wbar[c];
      const double w1v1 = w.tail(q).dot(v.segment(o + 1, q));
      r[o] = eta[c] * (w[0] * v[o] + w1v1);
      r.segment(o + 1, q) = eta[c] * (v.segment(o + 1, q) + (v[o] + w1v1 / (1.0 + w[0])) * w.tail(q));
    }
    return r;
  }

  [[nodiscard]] VectorXd apply_inverse(const ConeLayout& k, const VectorXd& v) const {
    VectorXd r(v.size());
    r.head(k.num_lp) = v.head(k.num_lp).cwiseQuotient(lp_w);
    for (std::size_t c = 0; c < k.socs.size(); ++c) {
      const auto& b = k.socs[c];
      const int o = b.offset;
      const int q = b.dim - 1;
      const auto& w = wbar[c];
      const double w1v1 = w.tail(q).dot(v.segment(o + 1, q));
      r[o] = (w[0] * v[o] - w1v1) / eta[c];
      r.segment(o + 1, q) = (v.segment(o + 1, q) - (v[o] - w1v1 / (1.0 + w[0])) * w.tail(q)) / eta[c];
    }
    return r;
  }
};

// Problem after bound expansion and elimination of fixed variables.
struct Reduced {
  VectorXd c;
  SparseMatrix A;
  VectorXd b;
  SparseMatrix G;
  VectorXd h;
  ConeLayout cones;
  double objective_offset = 0.0;
  double cost_scale = 1.0;  // original c = cost_scale * c

  std::vector<int> free_vars;        // reduced column -> original column
  std::vector<int> eq_rows;          // reduced equality row -> original row
  std::vector<int> cone_rows;        // reduced conic row -> expanded row
};

// Expanded conic data: G rows with bound rows spliced into the LP block.
struct Expanded {
  SparseMatrix G;
  VectorXd h;
  ConeLayout cones;
  std::vector<int> lower_row;  // per variable, expanded row index or -1
  std::vector<int> upper_row;
};

Expanded expand(const StandardConeProblem& p) {
  const int n = p.num_vars();
  Expanded e;
  e.lower_row.assign(n, -1);
  e.upper_row.assign(n, -1);
  std::vector<Eigen::Triplet<double>> trip;
  std::vector<double> h;
  int row = 0;
  const SparseMatrix gr = SparseMatrix(p.G.transpose());  // row access via columns
  auto copy_row = [&](int src) {
    for (SparseMatrix::InnerIterator it(gr, src); it; ++it) trip.emplace_back(row, it.row(), it.value());
    h.push_back(p.h[src]);
    ++row;
  };
  for (int i = 0; i < p.num_nonneg; ++i) copy_row(i);
  if (p.has_bounds()) {
    for (int j = 0; j < n; ++j) {
      if (p.lower.size() > 0 && std::isfinite(p.lower[j])) {
        trip.emplace_back(row, j, -1.0);
        h.push_back(-p.lower[j]);
        e.lower_row[j] = row++;
      }
    }
    for (int j = 0; j < n; ++j) {
      if (p.upper.size() > 0 && std::isfinite(p.upper[j])) {
        trip.emplace_back(row, j, 1.0);
        h.push_back(p.upper[j]);
        e.upper_row[j] = row++;
      }
    }
  }
  e.cones.num_lp = row;
  int src = p.num_nonneg;
  for (int d : p.soc_dims) {
    e.cones.socs.push_back({row, d});
    for (int i = 0; i < d; ++i) copy_row(src++);
  }
  e.G.resize(row, n);
  e.G.setFromTriplets(trip.begin(), trip.end());
  e.h = Eigen::Map<VectorXd>(h.data(), static_cast<Eigen::Index>(h.size()));
  return e;
}

bool is_fixed(const StandardConeProblem& p, int j) {
  return p.lower.size() > 0 && p.upper.size() > 0 && std::isfinite(p.lower[j]) && p.lower[j] == p.upper[j];
}

// Row selection helper: keeps rows `keep` (in order) and columns `cols`.
SparseMatrix select(const SparseMatrix& m, const std::vector<int>& rows, const std::vector<int>& cols) {
  std::vector<int> row_map(m.rows(), -1);
  for (std::size_t i = 0; i < rows.size(); ++i) row_map[rows[i]] = static_cast<int>(i);
  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t jc = 0; jc < cols.size(); ++jc) {
    for (SparseMatrix::InnerIterator it(m, cols[jc]); it; ++it) {
      const int r = row_map[it.row()];
      if (r >= 0) trip.emplace_back(r, static_cast<int>(jc), it.value());
    }
  }
  SparseMatrix out(static_cast<int>(rows.size()), static_cast<int>(cols.size()));
  out.setFromTriplets(trip.begin(), trip.end());
  return out;
}

struct PresolveFailure {
  bool infeasible = false;
  int eq_row = -1;      // offending equality row (original)
  int cone_row = -1;    // offending expanded LP row
  int cone_block = -1;  // offending SOC block index
};

std::optional<PresolveFailure> reduce(const StandardConeProblem& p, const Expanded& e, Reduced& r) {
  const int n = p.num_vars();
  VectorXd fixed_x = VectorXd::Zero(n);
  std::vector<int> fixed_vars;
  for (int j = 0; j < n; ++j) {
    if (is_fixed(p, j)) {
      fixed_x[j] = p.lower[j];
      fixed_vars.push_back(j);
    } else {
      r.free_vars.push_back(j);
    }
  }
  r.objective_offset = p.c.dot(fixed_x);
  r.c.resize(static_cast<Eigen::Index>(r.free_vars.size()));
  for (std::size_t i = 0; i < r.free_vars.size(); ++i) r.c[i] = p.c[r.free_vars[i]];

  const VectorXd b_shift = p.b - p.A * fixed_x;
  const VectorXd h_shift = e.h - e.G * fixed_x;

  // Row occupancy over free columns.
  std::vector<int> eq_count(p.A.rows(), 0);
  std::vector<int> g_count(e.G.rows(), 0);
  for (int j : r.free_vars) {
    for (SparseMatrix::InnerIterator it(p.A, j); it; ++it)
      if (it.value() != 0.0) ++eq_count[it.row()];
    for (SparseMatrix::InnerIterator it(e.G, j); it; ++it)
      if (it.value() != 0.0) ++g_count[it.row()];
  }
  // Bound rows of fixed variables are dropped outright.
  std::vector<bool> drop(e.G.rows(), false);
  for (int j : fixed_vars) {
    if (e.lower_row[j] >= 0) drop[e.lower_row[j]] = true;
    if (e.upper_row[j] >= 0) drop[e.upper_row[j]] = true;
  }

  const double feas_tol = 1e-9 * (1.0 + inf_norm(p.b));
  for (int i = 0; i < p.A.rows(); ++i) {
    if (eq_count[i] > 0) {
      r.eq_rows.push_back(i);
    } else if (std::abs(b_shift[i]) > feas_tol) {
      return PresolveFailure{true, i, -1, -1};
    }
  }
  const double cone_tol = 1e-9 * (1.0 + inf_norm(e.h));
  for (int i = 0; i < e.cones.num_lp; ++i) {
    if (drop[i]) continue;
    if (g_count[i] > 0) {
      r.cone_rows.push_back(i);
    } else if (h_shift[i] < -cone_tol) {
      return PresolveFailure{true, -1, i, -1};
    }
  }
  r.cones.num_lp = static_cast<int>(r.cone_rows.size());
  for (std::size_t c = 0; c < e.cones.socs.size(); ++c) {
    const auto& blk = e.cones.socs[c];
    int used = 0;
    for (int i = 0; i < blk.dim; ++i) used += g_count[blk.offset + i];
    if (used == 0) {
      const double t = h_shift[blk.offset];
      const double u = h_shift.segment(blk.offset + 1, blk.dim - 1).norm();
      if (u > t + cone_tol) return PresolveFailure{true, -1, -1, static_cast<int>(c)};
      continue;
    }
    r.cones.socs.push_back({static_cast<int>(r.cone_rows.size()), blk.dim});
    for (int i = 0; i < blk.dim; ++i) r.cone_rows.push_back(blk.offset + i);
  }
  r.A = select(p.A, r.eq_rows, r.free_vars);
  r.G = select(e.G, r.cone_rows, r.free_vars);
  r.b.resize(static_cast<Eigen::Index>(r.eq_rows.size()));
  for (std::size_t i = 0; i < r.eq_rows.size(); ++i) r.b[i] = b_shift[r.eq_rows[i]];
  r.h.resize(static_cast<Eigen::Index>(r.cone_rows.size()));
  for (std::size_t i = 0; i < r.cone_rows.size(); ++i) r.h[i] = h_shift[r.cone_rows[i]];
  return std::nullopt;
}

struct Iterate {
  VectorXd x, y, z, s;
  double tau = 1.0;
  double kappa = 1.0;
};

struct Measures {
  double pres = kInf;
  double dres = kInf;
  double gap = kInf;
  double pcost = 0.0;
  [[nodiscard]] double worst() const { return std::max({pres, dres, gap}); }
};

class InteriorPoint {
 public:
  InteriorPoint(const Reduced& r, const SolverSettings& settings)
      : r_(r), settings_(settings), n_(static_cast<int>(r.c.size())), p_(static_cast<int>(r.b.size())),
        m_(static_cast<int>(r.h.size())) {
    assemble_pattern();
  }

  ConeSolution run();

 private:
  void assemble_pattern();
  bool factor(const NtScaling& w);
  VectorXd multiply(const VectorXd& v) const;
  VectorXd solve_kkt(const VectorXd& rhs) const;
  Measures measure(const Iterate& it) const;
  void initialize(Iterate& it);

  struct Direction {
    VectorXd dx, dy, dz, ds;
    double dtau = 0.0;
    double dkappa = 0.0;
  };
  Direction direction(const Iterate& it, const NtScaling& w, const VectorXd& u1, const VectorXd& d_x,
                      const VectorXd& d_y, const VectorXd& d_z, double d_tau, const VectorXd& d_s,
                      double d_kappa) const;
  double step_length(const Iterate& it, const Direction& d) const;

  const Reduced& r_;
  const SolverSettings& settings_;
  int n_, p_, m_;
  SparseMatrix kkt_;
  struct SocPositions {
    std::vector<int> u, v;  // value indices of the extra columns, both triangles
  };
  std::vector<int> diag_pos_;  // value index of (i, i) for the x, y, z rows
  std::vector<SocPositions> soc_pos_;
  detail::QuasiDefiniteLdl ldl_;
};

// The SOC blocks of -W^2 are stored in expanded form: per cone the diagonal
// -eta^2 D plus two extra rows holding eta*u (pivot +1) and eta*v (pivot -1),
// whose Schur complement is -eta^2 (D + uu' - vv') = -W^2. This keeps the
// factorization sparse and avoids the cancellation of the dense block near the
// cone boundary.
void InteriorPoint::assemble_pattern() {
  const int base = n_ + p_ + m_;
  const int dim = base + 2 * static_cast<int>(r_.cones.socs.size());
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(2 * (r_.A.nonZeros() + r_.G.nonZeros()) + 5 * dim));
  for (int j = 0; j < n_; ++j) trip.emplace_back(j, j, 0.0);
  for (int j = 0; j < n_; ++j) {
    for (SparseMatrix::InnerIterator it(r_.A, j); it; ++it) {
      trip.emplace_back(n_ + it.row(), j, it.value());
      trip.emplace_back(j, n_ + it.row(), it.value());
    }
    for (SparseMatrix::InnerIterator it(r_.G, j); it; ++it) {
      trip.emplace_back(n_ + p_ + it.row(), j, it.value());
      trip.emplace_back(j, n_ + p_ + it.row(), it.value());
    }
  }
  for (int i = 0; i < p_ + m_; ++i) trip.emplace_back(n_ + i, n_ + i, 0.0);
  std::vector<int> signs(dim, -1);
  for (int j = 0; j < n_; ++j) signs[j] = 1;
  for (std::size_t c = 0; c < r_.cones.socs.size(); ++c) {
    const auto& b = r_.cones.socs[c];
    const int urow = base + 2 * static_cast<int>(c);
    const int vrow = urow + 1;
    for (int k = 0; k < b.dim; ++k) {
      const int zr = n_ + p_ + b.offset + k;
      trip.emplace_back(urow, zr, 0.0);
      trip.emplace_back(zr, urow, 0.0);
      trip.emplace_back(vrow, zr, 0.0);
      trip.emplace_back(zr, vrow, 0.0);
    }
    trip.emplace_back(urow, urow, 1.0);
    trip.emplace_back(vrow, vrow, -1.0);
    signs[urow] = 1;
  }
  kkt_.resize(dim, dim);
  kkt_.setFromTriplets(trip.begin(), trip.end());
  kkt_.makeCompressed();

  auto position = [&](int row, int col) {
    const int* inner = kkt_.innerIndexPtr();
    const int begin = kkt_.outerIndexPtr()[col];
    const int end = kkt_.outerIndexPtr()[col + 1];
    const int* hit = std::lower_bound(inner + begin, inner + end, row);
    return static_cast<int>(hit - inner);
  };
  diag_pos_.resize(n_ + p_ + m_);
  for (int i = 0; i < n_ + p_ + m_; ++i) diag_pos_[i] = position(i, i);
  for (std::size_t c = 0; c < r_.cones.socs.size(); ++c) {
    const auto& b = r_.cones.socs[c];
    const int urow = base + 2 * static_cast<int>(c);
    SocPositions pos;
    for (int k = 0; k < b.dim; ++k) {
      const int zr = n_ + p_ + b.offset + k;
      pos.u.push_back(position(urow, zr));
      pos.u.push_back(position(zr, urow));
      pos.v.push_back(position(urow + 1, zr));
      pos.v.push_back(position(zr, urow + 1));
    }
    soc_pos_.push_back(std::move(pos));
  }
  ldl_.analyze(kkt_, std::move(signs));
}

bool InteriorPoint::factor(const NtScaling& w) {
  double* values = kkt_.valuePtr();
  const double reg = settings_.static_regularization;
  for (int j = 0; j < n_; ++j) values[diag_pos_[j]] = reg;
  for (int i = 0; i < p_; ++i) values[diag_pos_[n_ + i]] = -reg;
  for (int i = 0; i < r_.cones.num_lp; ++i) values[diag_pos_[n_ + p_ + i]] = -w.lp_w[i] * w.lp_w[i] - reg;
  for (std::size_t c = 0; c < r_.cones.socs.size(); ++c) {
    const auto& b = r_.cones.socs[c];
    const auto& wb = w.wbar[c];
    const double eta = w.eta[c];
    const double w0 = wb[0];
    // W^2 / eta^2 = D + uu' - vv' with D = diag(d1, 1, ..., 1), u = (u0, u1 q), v = (0, v1 q)
    const double d1 = 0.5;
    const double u0 = std::sqrt(2.0 * w0 * w0 - 1.0 - d1);
    const double u1 = 2.0 * w0 / u0;
    const double v1 = std::sqrt(u1 * u1 - 2.0);
    const int zr = n_ + p_ + b.offset;
    values[diag_pos_[zr]] = -eta * eta * d1 - reg;
    for (int k = 1; k < b.dim; ++k) values[diag_pos_[zr + k]] = -eta * eta - reg;
    const auto& pos = soc_pos_[c];
    for (int k = 0; k < b.dim; ++k) {
      const double uk = eta * (k == 0 ? u0 : u1 * wb[k]);
      const double vk = k == 0 ? 0.0 : eta * v1 * wb[k];
      values[pos.u[2 * k]] = uk;
      values[pos.u[2 * k + 1]] = uk;
      values[pos.v[2 * k]] = vk;
      values[pos.v[2 * k + 1]] = vk;
    }
  }
  ldl_.factorize(kkt_);
  return true;
}

// Unregularized expanded KKT operator; its Schur complement is [0 A' G'; A 0 0; G 0 -W^2].
VectorXd InteriorPoint::multiply(const VectorXd& v) const {
  VectorXd out = kkt_ * v;
  const double reg = settings_.static_regularization;
  out.head(n_) -= reg * v.head(n_);
  out.segment(n_, p_ + m_) += reg * v.segment(n_, p_ + m_);
  return out;
}

VectorXd InteriorPoint::solve_kkt(const VectorXd& rhs) const {
  const int base = n_ + p_ + m_;
  VectorXd full = VectorXd::Zero(kkt_.rows());
  full.head(base) = rhs;
  VectorXd v = ldl_.solve(full);
  const double target = 1e-14 * (1.0 + inf_norm(rhs));
  double err = kInf;
  for (int k = 0; k < settings_.refinement_steps; ++k) {
    const VectorXd e = full - multiply(v);
    const double en = inf_norm(e);
    if (!(en < err)) break;  // refinement stopped helping
    err = en;
    if (en <= target) break;
    v += ldl_.solve(e);
  }
  return v.head(base);
}

// Measures are taken on the normalized cost (unit infinity norm) so that the
// iteration path does not depend on the scale of c; the dual residual and gap
// must also hold in original units.
Measures InteriorPoint::measure(const Iterate& it) const {
  Measures m;
  const double tau = it.tau;
  const VectorXd x = it.x / tau;
  const VectorXd y = it.y / tau;
  const VectorXd z = it.z / tau;
  const VectorXd s = it.s / tau;
  const double bnorm = std::max(inf_norm(r_.b), inf_norm(r_.h));
  const double pr1 = inf_norm(r_.A * x - r_.b);
  const double pr2 = inf_norm(r_.G * x + s - r_.h);
  m.pres = std::max(pr1, pr2) / (1.0 + bnorm);
  const double cs = r_.cost_scale;
  const double draw = inf_norm(r_.A.transpose() * y + r_.G.transpose() * z + r_.c);
  m.dres = std::max(draw / std::max(1.0, inf_norm(r_.c)), cs * draw / (1.0 + cs * inf_norm(r_.c)));
  const double pcost = r_.c.dot(x) + r_.objective_offset;
  const double dcost = -r_.b.dot(y) - r_.h.dot(z) + r_.objective_offset;
  const double gnum = std::max(std::abs(pcost - dcost), std::abs(s.dot(z)));
  m.gap = std::max(gnum / std::max(1.0, std::abs(pcost)), cs * gnum / std::max(1.0, cs * std::abs(pcost)));
  m.pcost = cs * pcost;
  return m;
}

void InteriorPoint::initialize(Iterate& it) {
  const NtScaling w = NtScaling::identity(r_.cones);
  factor(w);
  const int dim = n_ + p_ + m_;
  VectorXd rhs = VectorXd::Zero(dim);
  rhs.segment(n_, p_) = r_.b;
  rhs.tail(m_) = r_.h;
  VectorXd sol = solve_kkt(rhs);
  it.x = sol.head(n_);
  const VectorXd e = identity_element(r_.cones, m_);
  VectorXd s = -sol.tail(m_);
  if (m_ > 0) {
    const double alpha = -min_eig(r_.cones, s);
    if (alpha >= 0.0) s += (1.0 + alpha) * e;
  }
  it.s = s;

  rhs.setZero();
  rhs.head(n_) = -r_.c;
  sol = solve_kkt(rhs);
  it.y = sol.segment(n_, p_);
  VectorXd z = sol.tail(m_);
  if (m_ > 0) {
    const double alpha = -min_eig(r_.cones, z);
    if (alpha >= 0.0) z += (1.0 + alpha) * e;
  }
  it.z = z;
  it.tau = 1.0;
  it.kappa = 1.0;
}

InteriorPoint::Direction InteriorPoint::direction(const Iterate& it, const NtScaling& w, const VectorXd& u1,
                                                  const VectorXd& d_x, const VectorXd& d_y, const VectorXd& d_z,
                                                  double d_tau, const VectorXd& d_s, double d_kappa) const {
  const VectorXd ld = m_ > 0 ? jordan_divide(r_.cones, w.lambda, d_s) : VectorXd();
  VectorXd rhs(n_ + p_ + m_);
  rhs.head(n_) = -d_x;
  rhs.segment(n_, p_) = d_y;
  if (m_ > 0) rhs.tail(m_) = -d_z + w.apply(r_.cones, ld);
  const VectorXd u2 = solve_kkt(rhs);

  const auto x1 = u1.head(n_), y1 = u1.segment(n_, p_), z1 = u1.tail(m_);
  const auto x2 = u2.head(n_), y2 = u2.segment(n_, p_), z2 = u2.tail(m_);
  const double denom = r_.c.dot(x1) + r_.b.dot(y1) + r_.h.dot(z1) - it.kappa / it.tau;
  const double numer = -d_tau + d_kappa / it.tau - (r_.c.dot(x2) + r_.b.dot(y2) + r_.h.dot(z2));

  Direction d;
  d.dtau = numer / denom;
  d.dx = x2 + d.dtau * x1;
  d.dy = y2 + d.dtau * y1;
  d.dz = z2 + d.dtau * z1;
  if (m_ > 0) {
    d.ds = -w.apply(r_.cones, ld + w.apply(r_.cones, d.dz));
  } else {
    d.ds = VectorXd();
  }
  d.dkappa = -(d_kappa + it.kappa * d.dtau) / it.tau;
  return d;
}

double InteriorPoint::step_length(const Iterate& it, const Direction& d) const {
  double step = kInf;
  if (m_ > 0) {
    step = std::min(max_step(r_.cones, it.s, d.ds), max_step(r_.cones, it.z, d.dz));
  }
  if (d.dtau < 0.0) step = std::min(step, -it.tau / d.dtau);
  if (d.dkappa < 0.0) step = std::min(step, -it.kappa / d.dkappa);
  return step;
}

ConeSolution InteriorPoint::run() {
  ConeSolution out;
  Iterate it;
  initialize(it);
  const VectorXd e = identity_element(r_.cones, m_);
  const double degree = r_.cones.degree() + 1.0;
  NtScaling w = NtScaling::identity(r_.cones);

  Iterate best = it;
  Measures best_m;

  const int dim = n_ + p_ + m_;
  for (int iter = 0; iter <= settings_.max_iter; ++iter) {
    out.iterations = iter;
    const Measures m = measure(it);
    if (settings_.verbose) {
      std::fprintf(stderr, "%3d pcost %+.9e pres %.2e dres %.2e gap %.2e tau %.2e kap %.2e\n", iter, m.pcost, m.pres,
                   m.dres, m.gap, it.tau, it.kappa);
    }
    if (m.worst() < best_m.worst()) {
      best = it;
      best_m = m;
    }
    if (m.pres <= settings_.tol && m.dres <= settings_.tol && m.gap <= settings_.tol) {
      out.status = SolveStatus::optimal;
      best = it;
      break;
    }
    // Infeasibility certificates from the embedding.
    const double hz_by = r_.h.dot(it.z) + r_.b.dot(it.y);
    if (hz_by < 0.0 && it.tau < it.kappa) {
      const double pinf = inf_norm(r_.A.transpose() * it.y + r_.G.transpose() * it.z) / -hz_by;
      if (settings_.verbose) std::fprintf(stderr, "    pinf %.3e\n", pinf);
      if (pinf <= settings_.infeasibility_tol) {
        out.status = SolveStatus::infeasible;
        best = it;
        break;
      }
    }
    const double cx = r_.c.dot(it.x);
    if (cx < 0.0 && it.tau < it.kappa) {
      const double dinf = std::max(inf_norm(r_.A * it.x), inf_norm(r_.G * it.x + it.s)) / -cx;
      if (dinf <= settings_.infeasibility_tol) {
        out.status = SolveStatus::unbounded;
        best = it;
        break;
      }
    }
    if (iter == settings_.max_iter) break;

    if (m_ > 0 && !w.update(r_.cones, it.s, it.z)) {
      if (settings_.verbose) std::fprintf(stderr, "    scaling failed\n");
      break;
    }
    if (!factor(w)) {
      if (settings_.verbose) {
        std::fprintf(stderr, "    factorization failed\n");
        for (int i = 0; i < m_; ++i) std::fprintf(stderr, "      s %.3e z %.3e\n", it.s[i], it.z[i]);
      }
      break;
    }

    VectorXd rhs1(dim);
    rhs1.head(n_) = -r_.c;
    rhs1.segment(n_, p_) = r_.b;
    rhs1.tail(m_) = r_.h;
    const VectorXd u1 = solve_kkt(rhs1);

    const VectorXd rx = r_.A.transpose() * it.y + r_.G.transpose() * it.z + r_.c * it.tau;
    const VectorXd ry = -(r_.A * it.x) + r_.b * it.tau;
    const VectorXd rz = it.s + r_.G * it.x - r_.h * it.tau;
    const double rt = it.kappa + r_.c.dot(it.x) + r_.b.dot(it.y) + r_.h.dot(it.z);
    const double mu = (it.s.dot(it.z) + it.tau * it.kappa) / degree;

    // Predictor.
    const VectorXd ll = m_ > 0 ? jordan_product(r_.cones, w.lambda, w.lambda) : VectorXd();
    const Direction aff = direction(it, w, u1, rx, ry, rz, rt, ll, it.kappa * it.tau);
    const double a_aff = std::min(1.0, step_length(it, aff));
    double sigma = std::pow(1.0 - a_aff, 3);
    sigma = std::clamp(sigma, 1e-4, 1.0);

    // Corrector.
    VectorXd ds_c;
    if (m_ > 0) {
      const VectorXd ws = w.apply_inverse(r_.cones, aff.ds);
      const VectorXd wz = w.apply(r_.cones, aff.dz);
      ds_c = ll + jordan_product(r_.cones, ws, wz) - sigma * mu * e;
    }
    const double dk_c = it.kappa * it.tau + aff.dkappa * aff.dtau - sigma * mu;
    const double f = 1.0 - sigma;
    const Direction d = direction(it, w, u1, f * rx, f * ry, f * rz, f * rt, ds_c, dk_c);
    const double step = std::min(1.0, settings_.step_fraction * step_length(it, d));
    if (!(step > 1e-12)) {
      if (settings_.verbose) std::fprintf(stderr, "    step %.3e too short\n", step);
      break;
    }

    it.x += step * d.dx;
    it.y += step * d.dy;
    it.z += step * d.dz;
    if (m_ > 0) it.s += step * d.ds;
    it.tau += step * d.dtau;
    it.kappa += step * d.dkappa;
    if (settings_.verbose) std::fprintf(stderr, "    step %.3e sigma %.2e dtau %.3e\n", step, sigma, d.dtau);
    if (!std::isfinite(it.tau) || !std::isfinite(it.kappa)) {
      if (settings_.verbose) std::fprintf(stderr, "    non-finite iterate\n");
      break;
    }
  }

  it = best;
  if (out.status == SolveStatus::infeasible) {
    const double scale = -(r_.h.dot(it.z) + r_.b.dot(it.y));
    out.x = VectorXd::Zero(n_);
    out.y = it.y / scale;
    out.z = it.z / scale;
  } else if (out.status == SolveStatus::unbounded) {
    const double scale = -r_.c.dot(it.x);
    out.x = it.x / scale;
    out.y = VectorXd::Zero(p_);
    out.z = VectorXd::Zero(m_);
  } else {
    out.x = it.x / it.tau;
    out.y = it.y / it.tau;
    out.z = it.z / it.tau;
  }
  return out;
}

// Multipliers on the bound rows of eliminated variables, chosen to cancel the
// remaining dual residual of those columns.
void fill_fixed_bound_duals(const StandardConeProblem& p, const Expanded& e, const Reduced& r, bool include_cost,
                            ConeSolution& sol) {
  const int n = p.num_vars();
  std::vector<bool> is_free(n, false);
  for (int j : r.free_vars) is_free[j] = true;
  const VectorXd ATy = p.A.transpose() * sol.y;
  const VectorXd GTz = e.G.transpose() * sol.z;
  for (int j = 0; j < n; ++j) {
    if (is_free[j]) continue;
    const double rj = (include_cost ? p.c[j] : 0.0) + ATy[j] + GTz[j];
    // bound rows contribute (-z_lower + z_upper) to column j
    const int lo = e.lower_row[j];
    const int up = e.upper_row[j];
    if (lo >= 0 && up >= 0) {
      sol.z[lo] += std::max(0.0, rj);
      sol.z[up] += std::max(0.0, -rj);
    }
  }
}

}  // namespace

const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unbounded: return "unbounded";
    case SolveStatus::iteration_limit: return "iteration-limit";
  }
  return "unknown";
}

void StandardConeProblem::check() const {
  const int n = num_vars();
  auto fail = [](const std::string& what) { throw std::invalid_argument("cone problem: " + what); };
  if (A.cols() != n && !(A.rows() == 0 && A.cols() == 0)) fail("A has " + std::to_string(A.cols()) + " columns, expected " + std::to_string(n));
  if (A.rows() != b.size()) fail("A rows and b size differ");
  if (G.cols() != n && !(G.rows() == 0 && G.cols() == 0)) fail("G has " + std::to_string(G.cols()) + " columns, expected " + std::to_string(n));
  if (G.rows() != h.size()) fail("G rows and h size differ");
  if (num_nonneg < 0 || num_nonneg > G.rows()) fail("num_nonneg out of range");
  long total = num_nonneg;
  for (int d : soc_dims) {
    if (d < 2) fail("SOC block of dimension " + std::to_string(d));
    total += d;
  }
  if (total != G.rows()) fail("cone dimensions sum to " + std::to_string(total) + ", G has " + std::to_string(G.rows()) + " rows");
  if (lower.size() != 0 && lower.size() != n) fail("lower bound size");
  if (upper.size() != 0 && upper.size() != n) fail("upper bound size");
  if (lower.size() == n && upper.size() == n) {
    for (int j = 0; j < n; ++j)
      if (lower[j] > upper[j]) fail("variable " + std::to_string(j) + " has lower > upper");
  }
  if (!c.allFinite() || !b.allFinite() || !h.allFinite()) fail("non-finite data");
}

ConeSolution solve(const StandardConeProblem& problem, const SolverSettings& settings) {
  if (!(settings.tol > 0.0)) throw std::invalid_argument("cone problem: tolerance must be positive");
  problem.check();

  // Normalize empty A / G to the right column count.
  StandardConeProblem p = problem;
  if (p.A.cols() != p.num_vars()) p.A.resize(0, p.num_vars());
  if (p.G.cols() != p.num_vars()) p.G.resize(0, p.num_vars());
  const int n = p.num_vars();

  const Expanded e = expand(p);
  Reduced r;
  ConeSolution out;
  out.x = VectorXd::Zero(n);
  out.y = VectorXd::Zero(p.A.rows());
  out.z = VectorXd::Zero(e.G.rows());

  if (auto fail = reduce(p, e, r)) {
    out.status = SolveStatus::infeasible;
    const VectorXd fixed = [&] {
      VectorXd f = VectorXd::Zero(n);
      for (int j = 0; j < n; ++j)
        if (is_fixed(p, j)) f[j] = p.lower[j];
      return f;
    }();
    if (fail->eq_row >= 0) {
      const double rb = p.b[fail->eq_row] - p.A.row(fail->eq_row).dot(fixed);
      out.y[fail->eq_row] = -1.0 / rb;
    } else if (fail->cone_row >= 0) {
      const double rh = e.h[fail->cone_row] - e.G.row(fail->cone_row).dot(fixed);
      out.z[fail->cone_row] = -1.0 / rh;
    } else {
      const auto& blk = e.cones.socs[fail->cone_block];
      const VectorXd hv = e.h.segment(blk.offset, blk.dim) - e.G.middleRows(blk.offset, blk.dim) * fixed;
      // z = (1, -u/|u|) separates the constant point from the cone
      const double un = hv.tail(blk.dim - 1).norm();
      VectorXd zc(blk.dim);
      zc[0] = 1.0;
      zc.tail(blk.dim - 1) = -hv.tail(blk.dim - 1) / un;
      const double val = hv.dot(zc);
      out.z.segment(blk.offset, blk.dim) = zc / -val;
    }
    fill_fixed_bound_duals(p, e, r, false, out);
    const Residuals res = residuals(problem, out);
    out.primal_residual = res.primal_norm;
    out.dual_residual = res.dual_norm;
    out.gap = res.gap;
    return out;
  }

  ConeSolution core;
  if (r.c.size() == 0) {
    core.status = SolveStatus::optimal;
    core.x = VectorXd();
    core.y = VectorXd::Zero(r.b.size());
    core.z = VectorXd::Zero(r.h.size());
    // every remaining row is constant; reduce() already verified them
  } else {
    const double cs = inf_norm(r.c);
    if (cs > 0.0) {
      r.c /= cs;
      r.objective_offset /= cs;
      r.cost_scale = cs;
    }
    InteriorPoint ipm(r, settings);
    core = ipm.run();
    if (core.status == SolveStatus::unbounded) {
      core.x /= r.cost_scale;
    } else if (core.status != SolveStatus::infeasible) {
      core.y *= r.cost_scale;
      core.z *= r.cost_scale;
    }
  }

  out.status = core.status;
  out.iterations = core.iterations;
  for (int j = 0; j < n; ++j)
    if (is_fixed(p, j)) out.x[j] = (core.status == SolveStatus::unbounded) ? 0.0 : p.lower[j];
  for (std::size_t i = 0; i < r.free_vars.size(); ++i) out.x[r.free_vars[i]] = core.x[i];
  for (std::size_t i = 0; i < r.eq_rows.size(); ++i) out.y[r.eq_rows[i]] = core.y[i];
  for (std::size_t i = 0; i < r.cone_rows.size(); ++i) out.z[r.cone_rows[i]] = core.z[i];
  if (core.status != SolveStatus::unbounded) {
    fill_fixed_bound_duals(p, e, r, core.status != SolveStatus::infeasible, out);
  }
  out.objective = p.c.dot(out.x);
  const Residuals res = residuals(problem, out);
  out.primal_residual = res.primal_norm;
  out.dual_residual = res.dual_norm;
  out.gap = res.gap;
  return out;
}

Residuals residuals(const StandardConeProblem& problem, const ConeSolution& sol) {
  StandardConeProblem p = problem;
  const int n = p.num_vars();
  if (p.A.cols() != n) p.A.resize(0, n);
  if (p.G.cols() != n) p.G.resize(0, n);
  const Expanded e = expand(p);
  if (sol.x.size() != n || sol.y.size() != p.A.rows() || sol.z.size() != e.G.rows()) {
    throw std::invalid_argument("residuals: solution dimensions do not match the problem");
  }
  Residuals r;
  if (n == 0 && e.G.rows() == 0 && p.A.rows() == 0) return r;
  const double bnorm = std::max(inf_norm(p.b), inf_norm(e.h));
  const double pr_eq = p.A.rows() > 0 ? inf_norm(p.A * sol.x - p.b) : 0.0;
  const double pr_cone = e.G.rows() > 0 ? cone_distance(e.cones, e.h - e.G * sol.x) : 0.0;
  r.primal_norm = std::max(pr_eq, pr_cone) / (1.0 + bnorm);
  VectorXd dual = p.c;
  if (p.A.rows() > 0) dual += p.A.transpose() * sol.y;
  if (e.G.rows() > 0) dual += e.G.transpose() * sol.z;
  const double dz = e.G.rows() > 0 ? cone_distance(e.cones, sol.z) : 0.0;
  r.dual_norm = std::max(inf_norm(dual), dz) / (1.0 + inf_norm(p.c));
  const double pcost = p.c.dot(sol.x);
  const double dcost = -p.b.dot(sol.y) - e.h.dot(sol.z);
  r.gap = std::abs(pcost - dcost) / std::max(1.0, std::abs(pcost));
  return r;
}

namespace {

void write_vector(std::ostream& out, const char* name, const VectorXd& v) {
  out << name << ' ' << v.size() << '\n';
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::isinf(v[i])) {
      out << (v[i] > 0 ? "inf" : "-inf");
    } else {
      out << v[i];
    }
    out << (i + 1 == v.size() ? "\n" : " ");
  }
  if (v.size() == 0) out << '\n';
}

void write_matrix(std::ostream& out, const char* name, const SparseMatrix& m) {
  out << name << ' ' << m.rows() << ' ' << m.cols() << ' ' << m.nonZeros() << '\n';
  for (int j = 0; j < m.outerSize(); ++j)
    for (SparseMatrix::InnerIterator it(m, j); it; ++it) out << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
}

void expect(std::istream& in, const std::string& token) {
  std::string got;
  if (!(in >> got) || got != token) throw std::runtime_error("cone dump: expected '" + token + "', got '" + got + "'");
}

double read_number(std::istream& in) {
  std::string tok;
  if (!(in >> tok)) throw std::runtime_error("cone dump: truncated input");
  if (tok == "inf") return kInf;
  if (tok == "-inf") return -kInf;
  return std::stod(tok);
}

VectorXd read_vector(std::istream& in, const char* name) {
  expect(in, name);
  long size = 0;
  if (!(in >> size) || size < 0) throw std::runtime_error(std::string("cone dump: bad size for ") + name);
  VectorXd v(size);
  for (long i = 0; i < size; ++i) v[i] = read_number(in);
  return v;
}

SparseMatrix read_matrix(std::istream& in, const char* name) {
  expect(in, name);
  long rows = 0, cols = 0, nnz = 0;
  if (!(in >> rows >> cols >> nnz)) throw std::runtime_error(std::string("cone dump: bad header for ") + name);
  std::vector<Eigen::Triplet<double>> trip;
  for (long k = 0; k < nnz; ++k) {
    long i = 0, j = 0;
    if (!(in >> i >> j)) throw std::runtime_error("cone dump: truncated matrix");
    trip.emplace_back(static_cast<int>(i), static_cast<int>(j), read_number(in));
  }
  SparseMatrix m(static_cast<int>(rows), static_cast<int>(cols));
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

}  // namespace

void write_problem(std::ostream& out, const StandardConeProblem& p) {
  const auto old_precision = out.precision(17);
  out << "opsd-cone 1\n";
  out << "nonneg " << p.num_nonneg << '\n';
  out << "soc " << p.soc_dims.size();
  for (int d : p.soc_dims) out << ' ' << d;
  out << '\n';
  write_vector(out, "c", p.c);
  write_matrix(out, "A", p.A);
  write_vector(out, "b", p.b);
  write_matrix(out, "G", p.G);
  write_vector(out, "h", p.h);
  write_vector(out, "lower", p.lower);
  write_vector(out, "upper", p.upper);
  out << "end\n";
  out.precision(old_precision);
}

StandardConeProblem read_problem(std::istream& in) {
  expect(in, "opsd-cone");
  int version = 0;
  in >> version;
  if (version != 1) throw std::runtime_error("cone dump: unsupported version " + std::to_string(version));
  StandardConeProblem p;
  expect(in, "nonneg");
  in >> p.num_nonneg;
  expect(in, "soc");
  std::size_t count = 0;
  in >> count;
  p.soc_dims.resize(count);
  for (auto& d : p.soc_dims) in >> d;
  p.c = read_vector(in, "c");
  p.A = read_matrix(in, "A");
  p.b = read_vector(in, "b");
  p.G = read_matrix(in, "G");
  p.h = read_vector(in, "h");
  p.lower = read_vector(in, "lower");
  p.upper = read_vector(in, "upper");
  expect(in, "end");
  p.check();
  return p;
}

}  // namespace opsd::cone
