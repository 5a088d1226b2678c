#include "opsd/formulation.hpp"

#include "opsd/seqcomp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

namespace opsd {

namespace {

constexpr const char* kPairName[3] = {"ab", "bc", "ca"};

std::string idx(const std::string& a, int t) { return "[" + a + ",t" + std::to_string(t) + "]"; }
std::string idx(const std::string& a, Phase p, int t) {
  return "[" + a + "," + std::string(1, phase_name(p)) + ",t" + std::to_string(t) + "]";
}

CVar add_cvar(VarSpace& vars, const std::string& base, const std::string& suffix, double bound = kInf) {
  CVar v;
  v.re = vars.add(base + ".re" + suffix, -bound, bound);
  v.im = vars.add(base + ".im" + suffix, -bound, bound);
  return v;
}

PeriodLayout& period(MISOCPModel& m, int t) {
  for (auto& p : m.layout.per_period)
    if (p.t == t) return p;
  PeriodLayout fresh;
  fresh.t = t;
  m.layout.per_period.push_back(std::move(fresh));
  return m.layout.per_period.back();
}

// Emits the four rows of z = x y for binary x and y in [lo, hi].
void product_rows(MISOCPModel& m, int x, int y, int z, double lo, double hi, const std::string& tag) {
  for (const auto& r : bind_product({lo, hi})) {
    LinExpr e;
    e.add(x, r.a_x).add(y, r.a_y).add(z, r.a_z);
    m.add_row(e, Sense::le, r.rhs, tag);
  }
}

// z = x y where y lies in `on` whenever x = 1 and in `any` otherwise.
void product_rows(MISOCPModel& m, int x, int y, int z, ProductBounds on, ProductBounds any, const std::string& tag) {
  const auto a = bind_product(on);
  const auto b = bind_product(any);
  for (const auto& r : {a[0], a[1], b[2], b[3]}) {
    LinExpr e;
    e.add(x, r.a_x).add(y, r.a_y).add(z, r.a_z);
    m.add_row(e, Sense::le, r.rhs, tag);
  }
}

struct Box {
  ProductBounds x{kInf, -kInf};
  ProductBounds y{kInf, -kInf};
};

// Bounding box of {V : |V| <= vmax, Re(V conj(e^{j center})) >= vmin}, the set the
// lower-magnitude cut and the upper-magnitude cone leave for a phase voltage.
Box sector_box(double center, double vmin, double vmax) {
  const double half = std::acos(std::clamp(vmin / vmax, -1.0, 1.0));
  Box b;
  auto take = [&](double ang) {
    const Complex v = std::polar(vmax, ang);
    b.x = {std::min(b.x.y_min, v.real()), std::max(b.x.y_max, v.real())};
    b.y = {std::min(b.y.y_min, v.imag()), std::max(b.y.y_max, v.imag())};
  };
  take(center - half);
  take(center + half);
  for (int k = 0; k < 4; ++k) {
    const double ang = k * std::numbers::pi / 2.0;
    if (std::abs(std::remainder(ang - center, 2.0 * std::numbers::pi)) <= half) take(ang);
  }
  const double pad = 1e-9 * vmax;
  b.x = {b.x.y_min - pad, b.x.y_max + pad};
  b.y = {b.y.y_min - pad, b.y.y_max + pad};
  return b;
}

// Range of a X + b Y + c over the sector set of sector_box.
ProductBounds sector_range(double center, double vmin, double vmax, double a, double b, double c) {
  const double half = std::acos(std::clamp(vmin / vmax, -1.0, 1.0));
  ProductBounds r{kInf, -kInf};
  auto take = [&](double ang) {
    const double v = a * vmax * std::cos(ang) + b * vmax * std::sin(ang) + c;
    r = {std::min(r.y_min, v), std::max(r.y_max, v)};
  };
  take(center - half);
  take(center + half);
  const double peak = std::atan2(b, a);
  for (double ang : {peak, peak + std::numbers::pi})
    if (std::abs(std::remainder(ang - center, 2.0 * std::numbers::pi)) <= half) take(ang);
  const double pad = 1e-9 * (1.0 + std::abs(r.y_min) + std::abs(r.y_max));
  return {r.y_min - pad, r.y_max + pad};
}

bool customer_switchable(const MISOCPModel& m, int j) { return m.layout.alpha[j][0] >= 0; }

}  // namespace

LinExpr& LinExpr::add(const LinExpr& e, double scale) {
  for (auto [v, c] : e.terms) add(v, scale * c);
  constant += scale * e.constant;
  return *this;
}

double LinExpr::eval(const Eigen::VectorXd& x) const {
  double s = constant;
  for (auto [v, c] : terms) s += c * x[v];
  return s;
}

int VarSpace::add(std::string name, double lower, double upper, VarKind kind) {
  if (index_.count(name)) throw FormulationError("duplicate variable " + name);
  const int i = size();
  index_.emplace(name, i);
  vars_.push_back({std::move(name), lower, upper, kind});
  return i;
}

int VarSpace::find(const std::string& name) const {
  const auto it = index_.find(name);
  return it == index_.end() ? -1 : it->second;
}

void MISOCPModel::add_row(const LinExpr& lhs, Sense sense, double rhs, const std::string& tag) {
  rows.push_back({lhs.terms, sense, rhs - lhs.constant, tag});
}

int MISOCPModel::count_rows(const std::string& tag) const {
  return static_cast<int>(std::count_if(rows.begin(), rows.end(), [&](const LinearRow& r) { return r.tag == tag; }));
}

void MISOCPModel::check() const {
  const int n = vars.size();
  auto valid = [&](const std::vector<std::pair<int, double>>& terms) {
    return std::all_of(terms.begin(), terms.end(), [&](auto& t) { return t.first >= 0 && t.first < n; });
  };
  for (const auto& r : rows)
    if (!valid(r.terms)) throw FormulationError("row '" + r.tag + "' references an invalid variable");
  for (const auto& c : cones) {
    if (c.members.empty()) throw FormulationError("cone '" + c.tag + "' has no members");
    if (!valid(c.bound.terms)) throw FormulationError("cone '" + c.tag + "' references an invalid variable");
    for (const auto& e : c.members)
      if (!valid(e.terms)) throw FormulationError("cone '" + c.tag + "' references an invalid variable");
  }
  if (!valid(objective.terms)) throw FormulationError("objective references an invalid variable");
  for (auto [v, c] : objective.terms)
    if (c < 0.0) throw FormulationError("negative objective coefficient on " + vars[v].name);
  for (int b : binaries)
    if (b < 0 || b >= n || vars[b].kind != VarKind::binary) throw FormulationError("invalid binary index");
}

StrategyFlags StrategyFlags::from_number(int strategy) {
  if (strategy < 1 || strategy > 4) throw FormulationError("strategy must be 1..4, got " + std::to_string(strategy));
  return {strategy == 2 || strategy == 4, strategy >= 3};
}

double phase_center(Phase p) {
  constexpr double third = 2.0 * std::numbers::pi / 3.0;
  switch (p) {
    case Phase::a: return 0.0;
    case Phase::b: return -third;
    case Phase::c: return third;
  }
  return 0.0;
}

PhaseFits network_fits(const Network& net, double half_width_rad, int grid) {
  double lo = kInf, hi = 0.0;
  for (const auto& nd : net.nodes)
    for (int p = 0; p < 3; ++p) {
      lo = std::min(lo, nd.vm_min[p]);
      hi = std::max(hi, nd.vm_max[p]);
    }
  for (const auto& c : net.customers) {
    lo = std::min(lo, c.vm_min);
    hi = std::max(hi, c.vm_max);
  }
  return fit_phases(lo, hi, half_width_rad, grid);
}

std::array<double, 3> root_pair_angles(const Network& net, int t) {
  const auto& v = net.horizon.root_voltage.at(t);
  return {angle(v[0] - v[1]), angle(v[1] - v[2]), angle(v[2] - v[0])};
}

void declare_phase_variables(MISOCPModel& m, const Network& net, StrategyFlags strategy) {
  m.layout.alpha.assign(net.customers.size(), {-1, -1, -1});
  if (!strategy.use_psd) return;
  for (std::size_t j = 0; j < net.customers.size(); ++j) {
    const auto& c = net.customers[j];
    if (!c.adjustable()) continue;
    BinaryGroup g;
    LinExpr one;
    for (int p = 0; p < 3; ++p) {
      const int a = m.vars.add("alpha" + idx(c.id, Phase(p), m.layout.periods.front()), 0.0, 1.0, VarKind::binary);
      m.layout.alpha[j][p] = a;
      g.vars[p] = a;
      m.binaries.push_back(a);
      m.branch_priority.push_back(1);
      one.add(a, 1.0);
    }
    m.groups.push_back(g);
    m.add_row(one, Sense::eq, 1.0, "psd-one-phase");
  }
}

void add_svc(MISOCPModel& m, const Network& net, int t) {
  auto& L = period(m, t);
  if (!net.svc) throw FormulationError("strategy uses the SVC but the network has none");
  const auto& s = *net.svc;
  // capacities as current limits; v_rated is phase-to-phase
  const double denom = 3.0 * s.v_rated;
  const double cap = s.s_cap / denom;
  const double ind = s.s_ind / denom;
  const double top = std::max(cap, ind);
  const auto beta = root_pair_angles(net, t);
  for (int p = 0; p < 3; ++p) {
    const std::string pn = kPairName[p];
    const int mag = m.vars.add("svc.mag" + idx(pn, t), 0.0, top);
    const int kap = m.vars.add("kappa" + idx(pn, t), 0.0, 1.0, VarKind::binary);
    const int prod = m.vars.add("svc.zk" + idx(pn, t), 0.0, top);
    const CVar cur = add_cvar(m.vars, "svc.i", idx(pn, t));
    L.svc_mag[p] = mag;
    L.kappa[p] = kap;
    L.svc_pair[p] = cur;
    m.binaries.push_back(kap);
    m.branch_priority.push_back(0);
    product_rows(m, kap, mag, prod, 0.0, top, "svc-product");

    // signed magnitude: mag (1 - 2 kappa), inductive along (sin, -cos) of the pair angle
    LinExpr sgn;
    sgn.add(mag, 1.0).add(prod, -2.0);
    LinExpr re;
    re.add(cur.re, 1.0).add(sgn, -std::sin(beta[p]));
    m.add_row(re, Sense::eq, 0.0, "svc-direction");
    LinExpr im;
    im.add(cur.im, 1.0).add(sgn, std::cos(beta[p]));
    m.add_row(im, Sense::eq, 0.0, "svc-direction");

    LinExpr capacity;
    capacity.add(mag, 1.0).add(kap, -(cap - ind));
    m.add_row(capacity, Sense::le, ind, "svc-capacity");
    // hull of the signed magnitude: -kappa cap <= sgn <= (1 - kappa) ind
    LinExpr lower = sgn;
    lower.add(kap, cap);
    m.add_row(lower, Sense::ge, 0.0, "svc-hull");
    LinExpr upper = sgn;
    upper.add(kap, ind);
    m.add_row(upper, Sense::le, ind, "svc-hull");

    LinExpr score;
    score.add(prod, 1.0).add(mag, -0.5);
    m.rounding.push_back({kap, score});
  }
  // phase currents drawn by the delta connection
  for (int p = 0; p < 3; ++p) {
    const CVar out = L.svc_pair[p];
    const CVar in = L.svc_pair[(p + 2) % 3];
    L.svc_phase[p][0] = LinExpr().add(out.re, 1.0).add(in.re, -1.0);
    L.svc_phase[p][1] = LinExpr().add(out.im, 1.0).add(in.im, -1.0);
  }
}

void add_feeder(MISOCPModel& m, const Network& net, int t, const PhaseFits& fits) {
  auto& L = period(m, t);
  const Topology topo = topology(net);
  const int nn = static_cast<int>(net.nodes.size());
  const int nl = static_cast<int>(net.lines.size());
  const int nc = static_cast<int>(net.customers.size());
  const int sec = net.secondary();

  L.node_v.resize(nn);
  for (int i = 0; i < nn; ++i) {
    for (int p = 0; p < 3; ++p) {
      const CVar v = add_cvar(m.vars, "v", idx(net.nodes[i].id, Phase(p), t));
      L.node_v[i][p] = v;
      if (i == topo.order.front()) continue;
      // implied by the magnitude limits of add_limits
      const Box b = sector_box(phase_center(Phase(p)), net.nodes[i].vm_min[p], net.nodes[i].vm_max[p]);
      m.vars.at(v.re).lower = b.x.y_min;
      m.vars.at(v.re).upper = b.x.y_max;
      m.vars.at(v.im).lower = b.y.y_min;
      m.vars.at(v.im).upper = b.y.y_max;
    }
  }
  L.line_i.resize(nl);
  for (int l = 0; l < nl; ++l)
    for (int p = 0; p < 3; ++p)
      L.line_i[l][p] = add_cvar(m.vars, "i", idx(net.lines[l].from + "-" + net.lines[l].to, Phase(p), t));

  // Ohm's law along each line
  for (int l = 0; l < nl; ++l) {
    const auto& ln = net.lines[l];
    const int a = net.node_index(ln.from);
    const int b = net.node_index(ln.to);
    for (int p = 0; p < 3; ++p) {
      LinExpr re, im;
      re.add(L.node_v[a][p].re, 1.0).add(L.node_v[b][p].re, -1.0);
      im.add(L.node_v[a][p].im, 1.0).add(L.node_v[b][p].im, -1.0);
      for (int q = 0; q < 3; ++q) {
        const Complex z = ln.z(p, q);
        re.add(L.line_i[l][q].re, -z.real()).add(L.line_i[l][q].im, z.imag());
        im.add(L.line_i[l][q].re, -z.imag()).add(L.line_i[l][q].im, -z.real());
      }
      m.add_row(re, Sense::eq, 0.0, "ohm-line");
      m.add_row(im, Sense::eq, 0.0, "ohm-line");
    }
  }

  // customer currents per phase, as expressions
  std::vector<std::array<std::array<LinExpr, 2>, 3>> cust_phase(nc);
  L.cust_v.resize(nc);
  L.cust_i.resize(nc);
  for (int j = 0; j < nc; ++j) {
    const auto& c = net.customers[j];
    const int node = net.node_index(c.node);
    const Complex s = c.demand.at(t);
    const double P = s.real(), Q = s.imag();
    const CVar V = add_cvar(m.vars, "vc", idx(c.id, t));
    const CVar I = add_cvar(m.vars, "ic", idx(c.id, t));
    L.cust_v[j] = V;
    L.cust_i[j] = I;

    LinExpr u_re, u_im;    // PSD terminal voltage
    LinExpr lin_re, lin_im;  // linearized 1/conj(V)
    if (!customer_switchable(m, j)) {
      const int p = static_cast<int>(c.initial_phase);
      u_re.add(L.node_v[node][p].re, 1.0);
      u_im.add(L.node_v[node][p].im, 1.0);
      const auto& f = fits[p];
      lin_re.add(V.re, f.kx).add(V.im, f.ky);
      lin_re.constant = f.bx;
      lin_im.add(V.re, f.hx).add(V.im, f.hy);
      lin_im.constant = f.by;
      cust_phase[j][p][0].add(I.re, 1.0);
      cust_phase[j][p][1].add(I.im, 1.0);
    } else {
      LinExpr sum_i_re, sum_i_im, sum_c, sum_d;
      // demand current on each phase under the linearized balance, and over all phases
      std::array<ProductBounds, 3> ire, iim;
      ProductBounds ire_any{kInf, -kInf}, iim_any{kInf, -kInf};
      for (int p = 0; p < 3; ++p) {
        const auto& f = fits[p];
        const double d = phase_center(Phase(p));
        ire[p] = sector_range(d, c.vm_min, c.vm_max, P * f.kx + Q * f.hx, P * f.ky + Q * f.hy, P * f.bx + Q * f.by);
        iim[p] = sector_range(d, c.vm_min, c.vm_max, P * f.hx - Q * f.kx, P * f.hy - Q * f.ky, P * f.by - Q * f.bx);
        ire_any = {std::min(ire_any.y_min, ire[p].y_min), std::max(ire_any.y_max, ire[p].y_max)};
        iim_any = {std::min(iim_any.y_min, iim[p].y_min), std::max(iim_any.y_max, iim[p].y_max)};
      }
      for (int p = 0; p < 3; ++p) {
        const int a = m.layout.alpha[j][p];
        const std::string key = idx(c.id, Phase(p), t);
        const double vmax = net.nodes[node].vm_max[p];
        const CVar iph = add_cvar(m.vars, "iph", key);
        const CVar zv = add_cvar(m.vars, "zv", key, vmax);
        const int zc = m.vars.add("zc" + key, -c.vm_max, c.vm_max);
        const int zd = m.vars.add("zd" + key, -c.vm_max, c.vm_max);
        product_rows(m, a, I.re, iph.re, ire[p], ire_any, "psd-current");
        product_rows(m, a, I.im, iph.im, iim[p], iim_any, "psd-current");
        const Box nb = sector_box(phase_center(Phase(p)), net.nodes[node].vm_min[p], vmax);
        product_rows(m, a, L.node_v[node][p].re, zv.re, nb.x.y_min, nb.x.y_max, "psd-voltage");
        product_rows(m, a, L.node_v[node][p].im, zv.im, nb.y.y_min, nb.y.y_max, "psd-voltage");
        // on phase p the terminal voltage sits in that phase's sector
        const Box cb = sector_box(phase_center(Phase(p)), c.vm_min, c.vm_max);
        product_rows(m, a, V.re, zc, cb.x, {-c.vm_max, c.vm_max}, "psd-terminal");
        product_rows(m, a, V.im, zd, cb.y, {-c.vm_max, c.vm_max}, "psd-terminal");
        cust_phase[j][p][0].add(iph.re, 1.0);
        cust_phase[j][p][1].add(iph.im, 1.0);
        u_re.add(zv.re, 1.0);
        u_im.add(zv.im, 1.0);
        const auto& f = fits[p];
        lin_re.add(zc, f.kx).add(zd, f.ky).add(a, f.bx);
        lin_im.add(zc, f.hx).add(zd, f.hy).add(a, f.by);
        sum_i_re.add(iph.re, 1.0);
        sum_i_im.add(iph.im, 1.0);
        sum_c.add(zc, 1.0);
        sum_d.add(zd, 1.0);
      }
      // sums of the products over phases equal the factors since the alphas sum to one
      m.add_row(sum_i_re.add(I.re, -1.0), Sense::eq, 0.0, "psd-sum");
      m.add_row(sum_i_im.add(I.im, -1.0), Sense::eq, 0.0, "psd-sum");
      m.add_row(sum_c.add(V.re, -1.0), Sense::eq, 0.0, "psd-sum");
      m.add_row(sum_d.add(V.im, -1.0), Sense::eq, 0.0, "psd-sum");
    }

    // service line: U - V = Zs I
    const Complex zs = c.service_z;
    LinExpr sre = u_re, sim = u_im;
    sre.add(V.re, -1.0).add(I.re, -zs.real()).add(I.im, zs.imag());
    sim.add(V.im, -1.0).add(I.re, -zs.imag()).add(I.im, -zs.real());
    m.add_row(sre, Sense::eq, 0.0, "ohm-service");
    m.add_row(sim, Sense::eq, 0.0, "ohm-service");

    // power balance: I = (P - jQ)(lin_re + j lin_im)
    LinExpr pre, pim;
    pre.add(I.re, 1.0).add(lin_re, -P).add(lin_im, -Q);
    pim.add(I.im, 1.0).add(lin_im, -P).add(lin_re, Q);
    m.add_row(pre, Sense::eq, 0.0, "power-balance");
    m.add_row(pim, Sense::eq, 0.0, "power-balance");
  }

  // KCL at every node but the root
  for (int i = 0; i < nn; ++i) {
    if (i == topo.order.front()) continue;
    for (int p = 0; p < 3; ++p) {
      for (int part = 0; part < 2; ++part) {
        LinExpr e;
        auto comp = [&](const CVar& v) { return part == 0 ? v.re : v.im; };
        e.add(comp(L.line_i[topo.parent_line[i]][p]), 1.0);
        for (int l : topo.child_lines[i]) e.add(comp(L.line_i[l][p]), -1.0);
        if (i == sec && L.svc_mag[0] >= 0) e.add(L.svc_phase[p][part], -1.0);
        for (int j : topo.customers[i]) e.add(cust_phase[j][p][part], -1.0);
        m.add_row(e, Sense::eq, 0.0, "kcl");
      }
    }
  }
}

void add_limits(MISOCPModel& m, const Network& net, int t) {
  auto& L = period(m, t);
  const int root = net.root();
  const auto& v0 = net.horizon.root_voltage.at(t);
  const Topology topo = topology(net);
  const auto neg = neg_seq_coefficients();
  const auto zero = zero_seq_coefficients();

  for (int i = 0; i < static_cast<int>(net.nodes.size()); ++i) {
    const auto& nd = net.nodes[i];
    if (i == root) {
      for (int p = 0; p < 3; ++p) {
        m.add_row(LinExpr().add(L.node_v[i][p].re, 1.0), Sense::eq, v0[p].real(), "root-voltage");
        m.add_row(LinExpr().add(L.node_v[i][p].im, 1.0), Sense::eq, v0[p].imag(), "root-voltage");
      }
      continue;
    }
    for (int p = 0; p < 3; ++p) {
      const CVar v = L.node_v[i][p];
      m.cones.push_back({LinExpr(nd.vm_max[p]), {LinExpr().add(v.re, 1.0), LinExpr().add(v.im, 1.0)}, "vm-max-node"});
      const double d = phase_center(Phase(p));
      m.add_row(LinExpr().add(v.re, std::cos(d)).add(v.im, std::sin(d)), Sense::ge, nd.vm_min[p], "vm-min-node");
    }
    // sequence voltages
    for (int kind = 0; kind < 2; ++kind) {
      const auto& coef = kind == 0 ? neg : zero;
      LinExpr re, im;
      for (int p = 0; p < 3; ++p) {
        const CVar v = L.node_v[i][p];
        re.add(v.re, coef[p].real()).add(v.im, -coef[p].imag());
        im.add(v.re, coef[p].imag()).add(v.im, coef[p].real());
      }
      const double limit = (kind == 0 ? net.nu_neg : net.nu_zero) * net.nominal_vm;
      m.cones.push_back({LinExpr(limit), {re, im}, kind == 0 ? "nsv" : "zsv"});
    }
  }

  for (int j = 0; j < static_cast<int>(net.customers.size()); ++j) {
    const auto& c = net.customers[j];
    const CVar v = L.cust_v[j];
    m.cones.push_back({LinExpr(c.vm_max), {LinExpr().add(v.re, 1.0), LinExpr().add(v.im, 1.0)}, "vm-max-customer"});
    LinExpr cut;
    if (!customer_switchable(m, j)) {
      const double d = phase_center(c.initial_phase);
      cut.add(v.re, std::cos(d)).add(v.im, std::sin(d));
    } else {
      for (int p = 0; p < 3; ++p) {
        const double d = phase_center(Phase(p));
        const std::string key = idx(c.id, Phase(p), t);
        cut.add(m.vars.find("zc" + key), std::cos(d)).add(m.vars.find("zd" + key), std::sin(d));
      }
    }
    m.add_row(cut, Sense::ge, c.vm_min, "vm-min-customer");
  }

  if (topo.dt_line >= 0 && net.lines[topo.dt_line].ampacity > 0.0) {
    for (int p = 0; p < 3; ++p) {
      const CVar i = L.line_i[topo.dt_line][p];
      m.cones.push_back({LinExpr(net.lines[topo.dt_line].ampacity),
                         {LinExpr().add(i.re, 1.0), LinExpr().add(i.im, 1.0)},
                         "dt-ampacity"});
    }
  }
}

void add_objective(MISOCPModel& m, const Network& net, int t) {
  auto& L = period(m, t);
  const Topology topo = topology(net);
  if (topo.dt_line < 0) throw FormulationError("no transformer line between the root and the secondary node");
  const auto neg = neg_seq_coefficients();
  const auto zero = zero_seq_coefficients();
  L.z_neg = m.vars.add("z.neg" + idx("dt", t), 0.0, kInf);
  L.z_zero = m.vars.add("z.zero" + idx("dt", t), 0.0, kInf);
  for (int kind = 0; kind < 2; ++kind) {
    const auto& coef = kind == 0 ? neg : zero;
    LinExpr re, im;
    for (int p = 0; p < 3; ++p) {
      const CVar i = L.line_i[topo.dt_line][p];
      re.add(i.re, coef[p].real()).add(i.im, -coef[p].imag());
      im.add(i.re, coef[p].imag()).add(i.im, coef[p].real());
    }
    const int z = kind == 0 ? L.z_neg : L.z_zero;
    m.cones.push_back({LinExpr().add(z, 1.0), {re, im}, kind == 0 ? "objective-neg" : "objective-zero"});
    m.objective.add(z, 1.0);
  }
}

MISOCPModel build_window(const Network& net, const std::vector<int>& periods, StrategyFlags strategy,
                         const PhaseFits& fits) {
  if (periods.empty()) throw FormulationError("empty period subset");
  if (strategy.use_svc && !net.svc) throw FormulationError("strategy uses the SVC but the network has none");
  for (int t : periods)
    if (t < 0 || t >= net.horizon.periods) throw FormulationError("period " + std::to_string(t) + " out of range");
  MISOCPModel m;
  m.layout.periods = periods;
  declare_phase_variables(m, net, strategy);
  for (int t : periods) {
    if (strategy.use_svc) add_svc(m, net, t);
    add_feeder(m, net, t, fits);
    add_limits(m, net, t);
    add_objective(m, net, t);
  }
  m.check();
  return m;
}

MISOCPModel build_subproblem(const Network& net, int k, StrategyFlags strategy, const PhaseFits& fits) {
  const auto& subsets = net.horizon.subsets;
  if (k < 0 || k >= static_cast<int>(subsets.size())) throw FormulationError("subset index out of range");
  return build_window(net, subsets[k], strategy, fits);
}

cone::StandardConeProblem to_standard(const MISOCPModel& m) {
  using Triplet = Eigen::Triplet<double>;
  const int n = m.vars.size();
  cone::StandardConeProblem p;
  p.c = Eigen::VectorXd::Zero(n);
  for (auto [v, c] : m.objective.terms) p.c[v] += c;

  std::vector<Triplet> at, gt;
  std::vector<double> b, h;
  for (const auto& r : m.rows) {
    if (r.sense != Sense::eq) continue;
    const int row = static_cast<int>(b.size());
    for (auto [v, c] : r.terms) at.emplace_back(row, v, c);
    b.push_back(r.rhs);
  }
  for (const auto& r : m.rows) {
    if (r.sense == Sense::eq) continue;
    // h - G x >= 0 with G = a, h = rhs for <=; negated for >=
    const double s = r.sense == Sense::le ? 1.0 : -1.0;
    const int row = static_cast<int>(h.size());
    for (auto [v, c] : r.terms) gt.emplace_back(row, v, s * c);
    h.push_back(s * r.rhs);
  }
  p.num_nonneg = static_cast<int>(h.size());
  auto push_expr = [&](const LinExpr& e) {
    // h - G x = e  =>  G = -coef, h = constant
    const int row = static_cast<int>(h.size());
    for (auto [v, c] : e.terms) gt.emplace_back(row, v, -c);
    h.push_back(e.constant);
  };
  for (const auto& c : m.cones) {
    push_expr(c.bound);
    for (const auto& e : c.members) push_expr(e);
    p.soc_dims.push_back(1 + static_cast<int>(c.members.size()));
  }
  p.A.resize(static_cast<int>(b.size()), n);
  p.A.setFromTriplets(at.begin(), at.end());
  p.b = Eigen::Map<Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
  p.G.resize(static_cast<int>(h.size()), n);
  p.G.setFromTriplets(gt.begin(), gt.end());
  p.h = Eigen::Map<Eigen::VectorXd>(h.data(), static_cast<Eigen::Index>(h.size()));
  p.lower.resize(n);
  p.upper.resize(n);
  for (int i = 0; i < n; ++i) {
    const auto& v = m.vars[i];
    p.lower[i] = v.kind == VarKind::binary ? std::max(0.0, v.lower) : v.lower;
    p.upper[i] = v.kind == VarKind::binary ? std::min(1.0, v.upper) : v.upper;
  }
  return p;
}

DispatchSolution extract_solution(const MISOCPModel& m, const Network& net, const Eigen::VectorXd& x) {
  if (x.size() != m.vars.size()) throw FormulationError("solution length does not match the variable space");
  auto binary = [&](int v) {
    const double r = std::round(x[v]);
    if (std::abs(x[v] - r) > 1e-6 || (r != 0.0 && r != 1.0))
      throw FormulationError("fractional binary " + m.vars[v].name + " = " + std::to_string(x[v]));
    return static_cast<int>(r);
  };
  const int nc = static_cast<int>(net.customers.size());
  std::vector<Phase> assignment(nc);
  for (int j = 0; j < nc; ++j) {
    assignment[j] = net.customers[j].initial_phase;
    if (!customer_switchable(m, j)) continue;
    int ones = 0;
    for (int p = 0; p < 3; ++p) {
      if (binary(m.layout.alpha[j][p]) == 1) {
        assignment[j] = Phase(p);
        ++ones;
      }
    }
    if (ones != 1) throw FormulationError("customer " + net.customers[j].id + " is not on exactly one phase");
  }
  auto cval = [&](const CVar& v) { return Complex(x[v.re], x[v.im]); };
  DispatchSolution out;
  for (const auto& L : m.layout.per_period) {
    PeriodDispatch d;
    d.t = L.t;
    d.assignment = assignment;
    for (const auto& node : L.node_v) d.node_v.push_back({cval(node[0]), cval(node[1]), cval(node[2])});
    for (const auto& line : L.line_i) d.line_i.push_back({cval(line[0]), cval(line[1]), cval(line[2])});
    for (const auto& v : L.cust_v) d.cust_v.push_back(cval(v));
    for (const auto& i : L.cust_i) d.cust_i.push_back(cval(i));
    if (L.svc_mag[0] >= 0) {
      for (int p = 0; p < 3; ++p) {
        d.svc_pair[p] = cval(L.svc_pair[p]);
        d.kappa[p] = binary(L.kappa[p]);
      }
      for (int p = 0; p < 3; ++p) d.svc_phase[p] = d.svc_pair[p] - d.svc_pair[(p + 2) % 3];
    }
    d.z_neg = x[L.z_neg];
    d.z_zero = x[L.z_zero];
    out.objective += d.z_neg + d.z_zero;
    out.periods.push_back(std::move(d));
  }
  return out;
}

void write_model(std::ostream& out, const MISOCPModel& m) {
  const auto old = out.precision(17);
  auto terms = [&](const std::vector<std::pair<int, double>>& ts) {
    out << ts.size();
    for (auto [v, c] : ts) out << ' ' << v << ':' << c;
  };
  auto expr = [&](const LinExpr& e) {
    out << e.constant << ' ';
    terms(e.terms);
    out << '\n';
  };
  out << "opsd-model 1\n";
  out << "vars " << m.vars.size() << '\n';
  for (int i = 0; i < m.vars.size(); ++i) {
    const auto& v = m.vars[i];
    out << i << ' ' << v.name << ' ' << v.lower << ' ' << v.upper << ' '
        << (v.kind == VarKind::binary ? 'B' : 'C') << '\n';
  }
  out << "rows " << m.rows.size() << '\n';
  for (const auto& r : m.rows) {
    out << r.tag << ' ' << (r.sense == Sense::eq ? "=" : r.sense == Sense::le ? "<=" : ">=") << ' ' << r.rhs << ' ';
    terms(r.terms);
    out << '\n';
  }
  out << "cones " << m.cones.size() << '\n';
  for (const auto& c : m.cones) {
    out << c.tag << ' ' << c.members.size() << '\n';
    expr(c.bound);
    for (const auto& e : c.members) expr(e);
  }
  out << "objective ";
  expr(m.objective);
  out.precision(old);
}

}  // namespace opsd
