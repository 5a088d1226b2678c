#include "opsd/bnb.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <queue>
#include <unordered_map>

namespace opsd {

namespace {

using Clock = std::chrono::steady_clock;

double fractionality(double v) { return std::abs(v - std::round(v)); }

std::uint64_t fixings_hash(const std::vector<std::int8_t>& f) {
  std::uint64_t h = 1469598103934665603ULL;
  for (auto v : f) {
    h ^= static_cast<std::uint8_t>(v + 1);
    h *= 1099511628211ULL;
  }
  return h;
}

struct Index {
  std::unordered_map<int, int> position;  // variable -> position in binaries
  std::vector<int> group_of;              // per position, -1 when ungrouped
};

Index make_index(const MISOCPModel& m) {
  Index ix;
  ix.group_of.assign(m.binaries.size(), -1);
  for (int k = 0; k < m.num_binaries(); ++k) ix.position.emplace(m.binaries[k], k);
  for (std::size_t g = 0; g < m.groups.size(); ++g)
    for (int v : m.groups[g].vars) ix.group_of[ix.position.at(v)] = static_cast<int>(g);
  return ix;
}

// Applies the implications of a group whose members are fixed.
void propagate_group(const MISOCPModel& m, const Index& ix, int g, std::vector<std::int8_t>& f) {
  int ones = 0, free = 0, last_free = -1;
  for (int v : m.groups[g].vars) {
    const int k = ix.position.at(v);
    if (f[k] == 1) ++ones;
    if (f[k] < 0) {
      ++free;
      last_free = k;
    }
  }
  if (ones == 1) {
    for (int v : m.groups[g].vars) {
      const int k = ix.position.at(v);
      if (f[k] < 0) f[k] = 0;
    }
  } else if (ones == 0 && free == 1) {
    f[last_free] = 1;
  }
}

cone::StandardConeProblem with_fixings(const cone::StandardConeProblem& base, const MISOCPModel& m,
                                       const std::vector<std::int8_t>& f) {
  cone::StandardConeProblem p = base;
  for (int k = 0; k < m.num_binaries(); ++k) {
    if (f[k] < 0) continue;
    p.lower[m.binaries[k]] = f[k];
    p.upper[m.binaries[k]] = f[k];
  }
  return p;
}

bool usable(const cone::ConeSolution& s) {
  if (s.status == cone::SolveStatus::optimal) return true;
  // near-optimal iterate from a stalled run
  return s.status == cone::SolveStatus::iteration_limit && s.primal_residual <= 1e-6 && s.dual_residual <= 1e-6 &&
         s.gap <= 1e-5;
}

// Rounds a relaxation point: groups to their largest member, rules by score sign, others to nearest.
std::vector<int> round_binaries(const MISOCPModel& m, const Index& ix, const Eigen::VectorXd& x,
                                const std::vector<std::int8_t>& f) {
  std::vector<int> out(m.binaries.size());
  for (int k = 0; k < m.num_binaries(); ++k) out[k] = x[m.binaries[k]] >= 0.5 ? 1 : 0;
  for (const auto& r : m.rounding) out[ix.position.at(r.var)] = r.score.eval(x) > 0.0 ? 1 : 0;
  for (const auto& g : m.groups) {
    int best = g.vars[0];
    for (int v : g.vars)
      if (x[v] > x[best]) best = v;
    for (int v : g.vars) out[ix.position.at(v)] = v == best ? 1 : 0;
  }
  for (int k = 0; k < m.num_binaries(); ++k)
    if (f[k] >= 0) out[k] = f[k];
  return out;
}

struct NodeResult {
  bool feasible = false;
  bool resolved = false;  // relaxation bound is trustworthy
  double bound = -kInf;
  double relaxation = kInf;  // raw relaxation objective; inf when infeasible, nan when not trusted
  Eigen::VectorXd x;
  bool integral = false;
  bool has_candidate = false;
  double candidate_obj = kInf;
  Eigen::VectorXd candidate;
};

}  // namespace

const char* to_string(MipStatus s) {
  switch (s) {
    case MipStatus::optimal: return "optimal";
    case MipStatus::gap_limit: return "gap-limit";
    case MipStatus::infeasible: return "infeasible";
    case MipStatus::time_limit: return "time-limit";
  }
  return "?";
}

std::pair<BnbNode, BnbNode> branch(const MISOCPModel& m, const BnbNode& node, const Eigen::VectorXd& x) {
  const Index ix = make_index(m);
  int chosen = -1;
  for (int k = 0; k < m.num_binaries(); ++k) {
    if (node.fixings[k] >= 0) continue;
    const double fk = fractionality(x[m.binaries[k]]);
    if (fk <= kIntegralityTol) continue;
    if (chosen < 0) {
      chosen = k;
      continue;
    }
    const int pk = m.branch_priority[k], pc = m.branch_priority[chosen];
    const double fc = fractionality(x[m.binaries[chosen]]);
    const bool better = pk != pc                       ? pk > pc
                        : std::abs(fk - fc) > 1e-12    ? fk > fc
                                                       : m.binaries[k] < m.binaries[chosen];
    if (better) chosen = k;
  }
  if (chosen < 0) throw BnbError("branch called on a node whose relaxation is integral");

  std::pair<BnbNode, BnbNode> kids;
  for (int side = 0; side < 2; ++side) {
    BnbNode& c = side == 0 ? kids.first : kids.second;
    c.fixings = node.fixings;
    c.fixings[chosen] = static_cast<std::int8_t>(side);
    if (ix.group_of[chosen] >= 0) propagate_group(m, ix, ix.group_of[chosen], c.fixings);
    c.bound = node.bound;
    c.depth = node.depth + 1;
    c.parent = node.id;
  }
  return kids;
}

cone::ConeSolution solve_fixed(const MISOCPModel& m, const std::vector<int>& values,
                               const cone::SolverSettings& settings) {
  std::vector<std::int8_t> f(values.begin(), values.end());
  return cone::solve(with_fixings(to_standard(m), m, f), settings);
}

MIPSolution solve_misocp(const MISOCPModel& m, const BnbSettings& settings) {
  const auto start = Clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(Clock::now() - start).count(); };
  const cone::StandardConeProblem base = to_standard(m);
  const Index ix = make_index(m);
  const int nb = m.num_binaries();

  MIPSolution out;
  auto log = [&](const BnbNode& n, double relaxation, double bound, const char* action) {
    if (!settings.node_log) return;
    char line[320];
    std::snprintf(line, sizeof line,
                  "node %ld parent %ld depth %d hash %016llx relaxation %.17g bound %.17g action %s incumbent %.17g\n",
                  n.id, n.parent, n.depth, static_cast<unsigned long long>(fixings_hash(n.fixings)), relaxation, bound,
                  action, out.objective);
    *settings.node_log << line;
  };

  auto evaluate = [&](const BnbNode& n) {
    NodeResult r;
    const auto sol = cone::solve(with_fixings(base, m, n.fixings), settings.cone);
    if (sol.status == cone::SolveStatus::infeasible) return r;
    r.feasible = true;
    r.resolved = usable(sol);
    r.bound = r.resolved ? std::max(sol.objective, n.bound) : n.bound;
    r.relaxation = r.resolved ? sol.objective : std::numeric_limits<double>::quiet_NaN();
    r.x = sol.x;
    bool all = true, high = true;
    int top = 0;
    for (int k = 0; k < nb; ++k) top = std::max(top, m.branch_priority[k]);
    for (int k = 0; k < nb; ++k) {
      if (fractionality(sol.x[m.binaries[k]]) > kIntegralityTol) {
        all = false;
        if (m.branch_priority[k] == top) high = false;
      }
    }
    r.integral = all && r.resolved;
    // repair solve for integral points; rounding heuristic at the root and once the top-priority binaries settle
    if (r.integral || n.id == 0 || high) {
      const auto values = round_binaries(m, ix, sol.x, n.fixings);
      std::vector<std::int8_t> f(values.begin(), values.end());
      const auto fixed = cone::solve(with_fixings(base, m, f), settings.cone);
      if (usable(fixed)) {
        r.has_candidate = true;
        r.candidate_obj = fixed.objective;
        r.candidate = fixed.x;
      }
    }
    return r;
  };

  auto cmp = [](const BnbNode& a, const BnbNode& b) { return a.bound != b.bound ? a.bound > b.bound : a.id > b.id; };
  std::priority_queue<BnbNode, std::vector<BnbNode>, decltype(cmp)> open(cmp);
  BnbNode root;
  root.fixings.assign(nb, -1);
  open.push(root);
  long next_id = 1;
  bool stopped_time = false, stopped_nodes = false;

  auto prune_limit = [&] { return out.objective - settings.gap_tol * std::max(1.0, std::abs(out.objective)); };

  while (!open.empty()) {
    const double lower = open.top().bound;
    if (std::isfinite(out.objective) && lower >= prune_limit()) break;
    if (elapsed() > settings.time_limit) {
      stopped_time = true;
      break;
    }
    if (out.nodes_explored >= settings.node_limit) {
      stopped_nodes = true;
      break;
    }
    std::vector<BnbNode> batch;
    while (!open.empty() && static_cast<int>(batch.size()) < std::max(1, settings.workers)) {
      batch.push_back(open.top());
      open.pop();
    }
    std::vector<NodeResult> results(batch.size());
#pragma omp parallel for schedule(dynamic) num_threads(std::max(1, settings.workers)) if (batch.size() > 1)
    for (int b = 0; b < static_cast<int>(batch.size()); ++b) results[b] = evaluate(batch[b]);

    for (std::size_t b = 0; b < batch.size(); ++b) {
      BnbNode& n = batch[b];
      NodeResult& r = results[b];
      ++out.nodes_explored;
      if (!r.feasible) {
        log(n, r.relaxation, n.bound, "infeasible");
        continue;
      }
      if (r.has_candidate && r.candidate_obj < out.objective) {
        out.objective = r.candidate_obj;
        out.x = r.candidate;
      }
      n.bound = r.bound;
      if (std::isfinite(out.objective) && r.bound >= prune_limit()) {
        log(n, r.relaxation, r.bound, r.integral ? "incumbent" : "pruned");
        continue;
      }
      if (r.integral) {
        // the repair solve did not improve on the incumbent
        log(n, r.relaxation, r.bound, "integral");
        continue;
      }
      std::pair<BnbNode, BnbNode> kids;
      try {
        kids = branch(m, n, r.x);
      } catch (const BnbError&) {
        // relaxation not trusted but integral: nothing left to split
        log(n, r.relaxation, r.bound, "unresolved");
        continue;
      }
      kids.first.id = next_id++;
      kids.second.id = next_id++;
      open.push(kids.first);
      open.push(kids.second);
      log(n, r.relaxation, r.bound, "branched");
    }
  }

  const bool has = std::isfinite(out.objective);
  out.bound = open.empty() ? (has ? out.objective : kInf) : std::min(open.top().bound, has ? out.objective : kInf);
  out.seconds = elapsed();
  if (!has) {
    // a node limit without an incumbent proves nothing about feasibility
    out.status = stopped_time ? MipStatus::time_limit : stopped_nodes ? MipStatus::gap_limit : MipStatus::infeasible;
    return out;
  }
  out.gap = std::max(0.0, out.objective - out.bound) / std::max(1.0, std::abs(out.objective));
  if (stopped_time) {
    out.status = MipStatus::time_limit;
  } else if (stopped_nodes && out.gap > settings.gap_tol) {
    out.status = MipStatus::gap_limit;
  } else {
    out.status = MipStatus::optimal;
  }
  return out;
}

}  // namespace opsd
