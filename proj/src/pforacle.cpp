#include "opsd/pforacle.hpp"

#include "opsd/bnb.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace opsd {

namespace {

constexpr double kLimitTol = 1e-9;

Complex phase_current(const std::array<Complex, 3>& pair, int p) { return pair[p] - pair[(p + 2) % 3]; }

bool rel_better(double a, double b) { return a < b - 1e-12 * std::max(1.0, std::abs(b)); }

long ipow(long b, int e) {
  long r = 1;
  while (e-- > 0) r *= b;
  return r;
}

}  // namespace

void screen_demands(const Network& net, const std::vector<Phase>& assignment, int t) {
  const Topology topo = topology(net);
  for (std::size_t j = 0; j < net.customers.size(); ++j) {
    const auto& c = net.customers[j];
    const int p = static_cast<int>(assignment[j]);
    double zpath = std::abs(c.service_z);
    for (int l : topo.path_lines[net.node_index(c.node)]) zpath += std::abs(net.lines[l].z(p, p));
    const double limit = 0.25 * c.vm_min * c.vm_min / std::max(zpath, 1e-12);
    if (std::abs(c.demand.at(t)) > limit)
      throw PFError("customer " + c.id + ": demand beyond the loadability estimate of its supply path");
  }
}

PFState solve_power_flow(const Network& net, const std::vector<Phase>& assignment,
                         const std::array<Complex, 3>& svc_pair, int t, const PFSettings& settings) {
  const int nn = static_cast<int>(net.nodes.size());
  const int nl = static_cast<int>(net.lines.size());
  const int nc = static_cast<int>(net.customers.size());
  if (static_cast<int>(assignment.size()) != nc) throw PFError("assignment does not cover every customer");
  if (t < 0 || t >= static_cast<int>(net.horizon.root_voltage.size())) throw PFError("period out of range");
  if (settings.screen) screen_demands(net, assignment, t);

  const Topology topo = topology(net);
  const int root = topo.order.front();
  const int sec = net.secondary();
  std::vector<int> cust_node(nc);
  for (int j = 0; j < nc; ++j) cust_node[j] = net.node_index(net.customers[j].node);

  PFState s;
  s.t = t;
  s.node_v.assign(nn, net.horizon.root_voltage[t]);
  s.line_i.assign(nl, {});
  s.cust_v.resize(nc);
  s.cust_i.assign(nc, Complex{});
  for (int j = 0; j < nc; ++j) s.cust_v[j] = s.node_v[cust_node[j]][static_cast<int>(assignment[j])];
  for (int p = 0; p < 3; ++p) s.svc_phase[p] = phase_current(svc_pair, p);

  std::vector<std::array<Complex, 3>> inject(nn);
  // demand currents at the present terminal voltages, summed towards the root
  auto backward = [&] {
    for (auto& a : inject) a = {};
    for (int j = 0; j < nc; ++j) {
      if (std::abs(s.cust_v[j]) < 1e-9) throw PFError("zero terminal voltage at customer " + net.customers[j].id, s);
      s.cust_i[j] = std::conj(net.customers[j].demand[t] / s.cust_v[j]);
      inject[cust_node[j]][static_cast<int>(assignment[j])] += s.cust_i[j];
    }
    if (sec >= 0)
      for (int p = 0; p < 3; ++p) inject[sec][p] += s.svc_phase[p];
    for (auto it = topo.order.rbegin(); it != topo.order.rend(); ++it) {
      const int i = *it;
      if (i == root) continue;
      auto& cur = s.line_i[topo.parent_line[i]];
      cur = inject[i];
      for (int l : topo.child_lines[i])
        for (int p = 0; p < 3; ++p) cur[p] += s.line_i[l][p];
    }
  };

  for (int sweep = 1; sweep <= settings.max_sweeps; ++sweep) {
    backward();
    // forward: voltage drops with the full coupled impedance
    double change = 0.0;
    for (int i : topo.order) {
      if (i == root) continue;
      const int l = topo.parent_line[i];
      const auto& vp = s.node_v[topo.parent_node[i]];
      for (int p = 0; p < 3; ++p) {
        Complex drop{};
        for (int q = 0; q < 3; ++q) drop += net.lines[l].z(p, q) * s.line_i[l][q];
        const Complex v = vp[p] - drop;
        change = std::max(change, std::abs(v - s.node_v[i][p]));
        s.node_v[i][p] = v;
      }
    }
    for (int j = 0; j < nc; ++j) {
      const Complex v = s.node_v[cust_node[j]][static_cast<int>(assignment[j])] - net.customers[j].service_z * s.cust_i[j];
      change = std::max(change, std::abs(v - s.cust_v[j]));
      s.cust_v[j] = v;
    }
    s.sweeps = sweep;
    s.last_change = change;
    s.changes.push_back(change);
    if (!std::isfinite(change)) throw PFError("power flow diverged (non-finite voltage)", s);
    if (change <= settings.tolerance) {
      // currents consistent with the final voltages
      backward();
      if (topo.dt_line >= 0) s.dt_seq = decompose(s.line_i[topo.dt_line]);
      return s;
    }
  }
  throw PFError("power flow did not converge in " + std::to_string(settings.max_sweeps) + " sweeps (last change " +
                    std::to_string(s.last_change) + ")",
                s);
}

LimitViolations check_limits(const Network& net, const PFState& s) {
  LimitViolations v;
  const int root = net.root();
  for (int i = 0; i < static_cast<int>(net.nodes.size()); ++i) {
    if (i == root) continue;
    const auto& nd = net.nodes[i];
    for (int p = 0; p < 3; ++p) {
      const double m = std::abs(s.node_v[i][p]);
      v.vm_upper = std::max(v.vm_upper, m - nd.vm_max[p]);
      v.vm_lower = std::max(v.vm_lower, nd.vm_min[p] - m);
    }
    v.nsv_ratio = std::max(v.nsv_ratio, std::abs(neg_seq(s.node_v[i])) / (net.nu_neg * net.nominal_vm));
    v.zsv_ratio = std::max(v.zsv_ratio, std::abs(zero_seq(s.node_v[i])) / (net.nu_zero * net.nominal_vm));
  }
  for (std::size_t j = 0; j < net.customers.size(); ++j) {
    const double m = std::abs(s.cust_v[j]);
    v.vm_upper = std::max(v.vm_upper, m - net.customers[j].vm_max);
    v.vm_lower = std::max(v.vm_lower, net.customers[j].vm_min - m);
  }
  for (std::size_t l = 0; l < net.lines.size(); ++l) {
    if (net.lines[l].ampacity <= 0.0) continue;
    for (int p = 0; p < 3; ++p) v.ampacity = std::max(v.ampacity, std::abs(s.line_i[l][p]) - net.lines[l].ampacity);
  }
  v.vm_upper = std::max(v.vm_upper, 0.0);
  v.vm_lower = std::max(v.vm_lower, 0.0);
  v.ampacity = std::max(v.ampacity, 0.0);
  return v;
}

ValidationMetrics validate_solution(const Network& net, const DispatchSolution& sol, const PFSettings& settings) {
  ValidationMetrics m;
  m.objective_model = sol.objective;
  for (const auto& d : sol.periods) {
    PFState s;
    try {
      s = solve_power_flow(net, d.assignment, d.svc_pair, d.t, settings);
    } catch (const PFError& e) {
      throw PFError("period " + std::to_string(d.t + 1) + ": " + e.what(), e.last_iterate);
    }
    m.objective_exact += std::abs(s.dt_seq.neg) + std::abs(s.dt_seq.zero);
    const auto lim = check_limits(net, s);
    m.max_vm_violation = std::max({m.max_vm_violation, lim.vm_upper, lim.vm_lower});
    m.max_lower_vm_violation = std::max(m.max_lower_vm_violation, lim.vm_lower);
    m.max_ampacity_violation = std::max(m.max_ampacity_violation, lim.ampacity);
    m.max_nsv_ratio = std::max(m.max_nsv_ratio, lim.nsv_ratio);
    m.max_zsv_ratio = std::max(m.max_zsv_ratio, lim.zsv_ratio);

    if (net.svc) {
      const auto& svc = *net.svc;
      const double cap = svc.s_cap / (3.0 * svc.v_rated);
      const double ind = svc.s_ind / (3.0 * svc.v_rated);
      const auto beta = root_pair_angles(net, d.t);
      for (int p = 0; p < 3; ++p) {
        const Complex i = d.svc_pair[p];
        // components along the inductive axis (sin, -cos) and across it
        const double along = i.real() * std::sin(beta[p]) - i.imag() * std::cos(beta[p]);
        const double across = i.real() * std::cos(beta[p]) + i.imag() * std::sin(beta[p]);
        m.max_svc_violation = std::max({m.max_svc_violation, along - ind, -along - cap, std::abs(across)});
      }
    }

    for (std::size_t i = 0; i < d.node_v.size() && i < s.node_v.size(); ++i)
      for (int p = 0; p < 3; ++p)
        m.max_linearization_error = std::max(m.max_linearization_error, std::abs(d.node_v[i][p] - s.node_v[i][p]));
    for (std::size_t j = 0; j < d.cust_v.size() && j < s.cust_v.size(); ++j)
      m.max_linearization_error = std::max(m.max_linearization_error, std::abs(d.cust_v[j] - s.cust_v[j]));
    m.states.push_back(std::move(s));
  }
  m.max_svc_violation = std::max(m.max_svc_violation, 0.0);
  m.objective_deviation = std::abs(m.objective_exact - m.objective_model) /
                          std::max({std::abs(m.objective_exact), std::abs(m.objective_model), 1e-6});
  return m;
}

std::vector<double> svc_grid(const Network& net, int n) {
  if (n < 1) throw PFError("SVC grid needs at least one point");
  if (!net.svc || n == 1) return {0.0};
  const double cap = net.svc->s_cap / (3.0 * net.svc->v_rated);
  const double ind = net.svc->s_ind / (3.0 * net.svc->v_rated);
  std::vector<double> g(n);
  for (int k = 0; k < n; ++k) g[k] = -cap + (cap + ind) * k / (n - 1);
  return g;
}

std::array<Complex, 3> svc_currents(const Network& net, int t, const std::array<double, 3>& signed_mag) {
  const auto beta = root_pair_angles(net, t);
  std::array<Complex, 3> out;
  for (int p = 0; p < 3; ++p) out[p] = signed_mag[p] * Complex(std::sin(beta[p]), -std::cos(beta[p]));
  return out;
}

namespace {

struct PeriodBest {
  bool feasible = false;
  double objective = kInf;
  std::array<Complex, 3> svc{};
  long evaluated = 0;
};

// Best SVC setting for one period under a fixed assignment.
PeriodBest best_period(const Network& net, const std::vector<Phase>& assignment, int t, const std::vector<double>& grid,
                       bool use_svc) {
  PeriodBest best;
  const int g = use_svc ? static_cast<int>(grid.size()) : 1;
  for (int a = 0; a < g; ++a)
    for (int b = 0; b < g; ++b)
      for (int c = 0; c < g; ++c) {
        const std::array<Complex, 3> svc =
            use_svc ? svc_currents(net, t, {grid[a], grid[b], grid[c]}) : std::array<Complex, 3>{};
        ++best.evaluated;
        PFState s;
        try {
          s = solve_power_flow(net, assignment, svc, t);
        } catch (const PFError&) {
          continue;
        }
        if (!check_limits(net, s).within(kLimitTol)) continue;
        const double obj = std::abs(s.dt_seq.neg) + std::abs(s.dt_seq.zero);
        if (!best.feasible || rel_better(obj, best.objective)) {
          best.feasible = true;
          best.objective = obj;
          best.svc = svc;
        }
      }
  return best;
}

}  // namespace

EnumerationResult enumerate_assignments(const Network& net, int k, StrategyFlags strategy, int grid, int workers) {
  const auto& subsets = net.horizon.subsets;
  if (k < 0 || k >= static_cast<int>(subsets.size())) throw PFError("subset index out of range");
  if (strategy.use_svc && !net.svc) throw PFError("strategy uses the SVC but the network has none");
  const auto& periods = subsets[k];
  const int nc = static_cast<int>(net.customers.size());
  std::vector<int> free;
  if (strategy.use_psd)
    for (int j = 0; j < nc; ++j)
      if (net.customers[j].adjustable()) free.push_back(j);
  if (static_cast<int>(free.size()) > kMaxEnumerated)
    throw PFError("instance too large: " + std::to_string(free.size()) + " adjustable customers (at most " +
                  std::to_string(kMaxEnumerated) + ")");
  const std::vector<double> g = svc_grid(net, strategy.use_svc ? grid : 1);
  const long combos = ipow(3, static_cast<int>(free.size()));

  auto assignment_of = [&](long code) {
    std::vector<Phase> a(nc);
    for (int j = 0; j < nc; ++j) a[j] = net.customers[j].initial_phase;
    for (int f = static_cast<int>(free.size()) - 1; f >= 0; --f) {
      a[free[f]] = Phase(code % 3);
      code /= 3;
    }
    return a;
  };

  struct Eval {
    bool feasible = true;
    double objective = 0.0;
    std::vector<std::array<Complex, 3>> svc;
    long evaluated = 0;
  };
  std::vector<Eval> evals(combos);
  auto run = [&](long code) {
    const auto a = assignment_of(code);
    Eval& e = evals[code];
    for (int t : periods) {
      const auto best = best_period(net, a, t, g, strategy.use_svc);
      e.evaluated += best.evaluated;
      if (!best.feasible) {
        e.feasible = false;
        return;
      }
      e.objective += best.objective;
      e.svc.push_back(best.svc);
    }
  };
  if (workers > 1) {
#pragma omp parallel for schedule(dynamic) num_threads(workers)
    for (long code = 0; code < combos; ++code) run(code);
  } else {
    for (long code = 0; code < combos; ++code) run(code);
  }

  EnumerationResult r;
  for (long code = 0; code < combos; ++code) {
    r.evaluated += evals[code].evaluated;
    if (!evals[code].feasible) continue;
    if (!r.feasible || rel_better(evals[code].objective, r.objective)) {
      r.feasible = true;
      r.objective = evals[code].objective;
      r.assignment = assignment_of(code);
      r.svc_pair = evals[code].svc;
    }
  }
  return r;
}

FixedEnumerationResult enumerate_fixed(const MISOCPModel& model, int workers, const cone::SolverSettings& settings) {
  const int nb = model.num_binaries();
  // grouped binaries take one of three one-hot patterns, the rest 0 or 1
  std::vector<int> pos(model.vars.size(), -1);
  for (int k = 0; k < nb; ++k) pos[model.binaries[k]] = k;
  std::vector<bool> grouped(nb, false);
  for (const auto& g : model.groups)
    for (int v : g.vars) grouped[pos[v]] = true;
  std::vector<int> loose;
  for (int k = 0; k < nb; ++k)
    if (!grouped[k]) loose.push_back(k);
  const int ng = static_cast<int>(model.groups.size());
  const double count = std::pow(3.0, ng) * std::pow(2.0, static_cast<double>(loose.size()));
  if (count > std::pow(3.0, kMaxEnumerated)) throw BnbError("too many binary patterns to enumerate");
  const long combos = static_cast<long>(count);

  auto values_of = [&](long code) {
    std::vector<int> v(nb, 0);
    for (int i = static_cast<int>(loose.size()) - 1; i >= 0; --i) {
      v[loose[i]] = static_cast<int>(code % 2);
      code /= 2;
    }
    for (int g = ng - 1; g >= 0; --g) {
      v[pos[model.groups[g].vars[code % 3]]] = 1;
      code /= 3;
    }
    return v;
  };

  std::vector<double> obj(combos, kInf);
  auto run = [&](long code) {
    const auto sol = solve_fixed(model, values_of(code), settings);
    if (sol.status == cone::SolveStatus::optimal) obj[code] = sol.objective;
  };
  if (workers > 1) {
#pragma omp parallel for schedule(dynamic) num_threads(workers)
    for (long code = 0; code < combos; ++code) run(code);
  } else {
    for (long code = 0; code < combos; ++code) run(code);
  }

  FixedEnumerationResult r;
  r.evaluated = combos;
  for (long code = 0; code < combos; ++code) {
    if (!std::isfinite(obj[code])) continue;
    if (!r.feasible || rel_better(obj[code], r.objective)) {
      r.feasible = true;
      r.objective = obj[code];
      r.values = values_of(code);
    }
  }
  return r;
}

}  // namespace opsd
