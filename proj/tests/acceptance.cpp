// Acceptance suite: one PASS/FAIL line per criterion, tolerances fixed below.
// Usage: acceptance [criterion ...]   (default: all). Exit status 1 if any fails.
// Run from the repository root (fixtures are read from data/).

#include "opsd/bnb.hpp"
#include "opsd/conesolver.hpp"
#include "opsd/pforacle.hpp"
#include "opsd/scenario.hpp"
#include "opsd/seqcomp.hpp"

#include "cone_fixtures.hpp"
#include "feeders.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

using namespace opsd;

namespace {

// Tolerances and budgets.
constexpr double kSeqTol = 1e-12;
constexpr double kSeqSeconds = 1.0;
constexpr double kOracleRel = 1e-6;
constexpr double kOracleSeconds = 60.0;
constexpr double kLinErrPu = 0.02;
constexpr double kObjDev = 0.02;
constexpr double kFidelitySeconds = 120.0;
constexpr int kRandomInstances = 1000;
constexpr double kLowerVmTol = 1e-9;  // pu
constexpr double kSlack = 1e-6;
constexpr double kDominanceSeconds = 600.0;
constexpr double kConeTol = 1e-5;
constexpr double kKktTol = 1e-8;
constexpr double kEndToEndSeconds = 600.0;
constexpr double kEndToEndGap = 1e-4;

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

int workers() { return std::getenv("OPSD_WORKERS") ? workers_from_env() : 4; }

ScenarioConfig config(const std::string& path, int strategy) {
  ScenarioConfig cfg;
  cfg.network_path = path;
  cfg.strategy = strategy;
  cfg.workers = workers();
  return cfg;
}

// Shipped-fixture runs, shared between criteria.
std::map<std::pair<std::string, int>, RunReport> g_runs;
std::set<std::pair<std::string, int>> g_not_applicable;

const RunReport* fixture_run(const std::string& name, int strategy) {
  const auto key = std::make_pair(name, strategy);
  if (g_not_applicable.contains(key)) return nullptr;
  if (auto it = g_runs.find(key); it != g_runs.end()) return &it->second;
  try {
    auto cfg = config("data/" + name + ".json", strategy);
    cfg.n_o = 1;
    return &g_runs.emplace(key, run_scenario(cfg)).first->second;
  } catch (const FormulationError&) {
    // strategy needs a device the fixture lacks
    g_not_applicable.insert(key);
    return nullptr;
  }
}

double rel_diff(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

// 1. reconstruction, linearity, rotation invariance of the sequence maps
Outcome sequence_math() {
  std::mt19937 rng(1);
  std::normal_distribution<double> N(0.0, 1.0);
  std::uniform_real_distribution<double> U(-std::numbers::pi, std::numbers::pi);
  const Complex r = std::polar(1.0, 2.0 * std::numbers::pi / 3.0);
  Eigen::Matrix3cd f;  // independent inverse transform on (zero, pos, neg)
  f << 1.0, 1.0, 1.0, 1.0, r * r, r, 1.0, r, r * r;
  auto triple = [&] {
    return PhaseTriple{Complex(N(rng), N(rng)), Complex(N(rng), N(rng)), Complex(N(rng), N(rng))};
  };
  double worst = 0.0;
  const auto t0 = Clock::now();
  for (int k = 0; k < 10000; ++k) {
    const auto x = triple();
    const auto y = triple();
    const auto s = decompose(x);
    const auto back = reconstruct(s);
    const Eigen::Vector3cd v = f * Eigen::Vector3cd(s.zero, s.pos, s.neg);
    const double lambda = N(rng);
    const Complex rot = std::polar(1.0, U(rng));
    PhaseTriple sum, scaled, turned;
    for (int p = 0; p < 3; ++p) {
      worst = std::max({worst, std::abs(back[p] - x[p]), std::abs(v[p] - x[p])});
      sum[p] = x[p] + y[p];
      scaled[p] = lambda * x[p];
      turned[p] = rot * x[p];
    }
    worst = std::max({worst, std::abs(neg_seq(sum) - neg_seq(x) - neg_seq(y)),
                      std::abs(zero_seq(sum) - zero_seq(x) - zero_seq(y)),
                      std::abs(neg_seq(scaled) - lambda * neg_seq(x)),
                      std::abs(zero_seq(scaled) - lambda * zero_seq(x)),
                      std::abs(std::abs(neg_seq(turned)) - std::abs(neg_seq(x))),
                      std::abs(std::abs(zero_seq(turned)) - std::abs(zero_seq(x)))});
  }
  const double secs = since(t0);
  return {worst <= kSeqTol && secs < kSeqSeconds,
          fmt("10000 triples, max error %.2e (tol %.0e), %.3f s (limit %.0f s)", worst, kSeqTol, secs, kSeqSeconds)};
}

// 2. branch and bound against exhaustive enumeration of the binaries
Outcome oracle_equivalence() {
  const auto t0 = Clock::now();
  const double half = 3.0 * std::numbers::pi / 180.0;
  int fixtures = 0, agree = 0;
  double worst = 0.0;
  for (int n : {1, 2, 3})
    for (int seed = 0; seed < 3; ++seed) {
      const Network net = feeders::small_feeder(n, seed);
      const auto m = build_subproblem(net, 0, StrategyFlags::from_number(3), network_fits(net, half));
      const auto r = solve_misocp(m);
      const auto e = enumerate_fixed(m, workers());
      ++fixtures;
      if (r.status != MipStatus::optimal || !e.feasible) continue;
      const double d = rel_diff(r.objective, e.objective);
      worst = std::max(worst, d);
      if (d <= kOracleRel) ++agree;
    }
  const double secs = since(t0);
  return {fixtures >= 5 && agree == fixtures && secs < kOracleSeconds,
          fmt("%d/%d fixtures (<=3 adjustable, 1 period, no SVC) agree, max rel diff %.2e (tol %.0e), %.1f s "
              "(limit %.0f s)",
              agree, fixtures, worst, kOracleRel, secs, kOracleSeconds)};
}

const std::vector<std::string> kFixtures{"balanced", "ieee13-like", "high-pv"};

// 3. linear model against the exact power flow on every solved shipped fixture
Outcome linearization_fidelity() {
  int solved = 0, bad = 0;
  double lin = 0.0, dev = 0.0, secs = 0.0;
  for (const auto& name : kFixtures)
    for (int s = 1; s <= 4; ++s) {
      const auto* r = fixture_run(name, s);
      if (!r) continue;
      secs += r->seconds;
      if (r->status != RunStatus::ok) continue;
      ++solved;
      if (!r->validation) {
        ++bad;
        continue;
      }
      lin = std::max(lin, r->validation->max_linearization_error);
      dev = std::max(dev, r->validation->objective_deviation);
      if (r->validation->max_linearization_error > kLinErrPu || r->validation->objective_deviation > kObjDev) ++bad;
    }
  return {solved > 0 && bad == 0 && secs < kFidelitySeconds,
          fmt("%d solved fixture runs, max |V_lin - V_exact| %.2e pu (tol %.2f), max objective deviation %.2f%% "
              "(tol %.0f%%), %.1f s (limit %.0f s)",
              solved, lin, kLinErrPu, 100.0 * dev, 100.0 * kObjDev, secs, kFidelitySeconds)};
}

// Random radial feeder, one period, loaded towards the lower voltage limit.
Network random_feeder(std::mt19937& rng, int& strategy) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  auto u = [&](double a, double b) { return a + (b - a) * U(rng); };
  auto pick = [&](int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng); };
  Network net = feeders::two_bus({u(0.002, 0.008), u(0.006, 0.02)}, 1, u(0.97, 1.05));
  std::vector<std::string> buses{"y"};
  const int extra = 1 + pick(3);
  for (int i = 0; i < extra; ++i) {
    const Complex self(u(0.01, 0.05), u(0.008, 0.04));
    const std::string id = "n" + std::to_string(i);
    feeders::add_node(net, id, buses[pick(static_cast<int>(buses.size()))], feeders::diag_z(self, self * u(0.1, 0.35)));
    buses.push_back(id);
  }
  const int customers = 2 + pick(4);
  const int adjustable = pick(std::min(2, customers) + 1);
  for (int j = 0; j < customers; ++j) {
    const double p = u(0.05, 1.0);
    feeders::add_customer(net, "c" + std::to_string(j), buses[pick(static_cast<int>(buses.size()))], Phase(pick(3)),
                          {p, p * u(0.0, 0.4)}, j < adjustable);
  }
  // scale the demand so the lowest exact voltage at the initial phases sits
  // within 1e-2 pu of the limit, on either side
  std::vector<Phase> initial;
  for (const auto& c : net.customers) initial.push_back(c.initial_phase);
  const double target = 0.9 + u(-0.01, 0.01);
  auto lowest = [&](double k) {
    Network scaled = net;
    for (auto& c : scaled.customers) c.demand[0] *= k;
    try {
      const auto st = solve_power_flow(scaled, initial, {}, 0);
      double v = kInf;
      for (size_t i = 1; i < st.node_v.size(); ++i)
        for (const auto& x : st.node_v[i]) v = std::min(v, std::abs(x));
      for (const auto& x : st.cust_v) v = std::min(v, std::abs(x));
      return v;
    } catch (const PFError&) {
      return 0.0;
    }
  };
  double lo = 0.0, hi = 1.0;
  while (lowest(hi) > target && hi < 64.0) hi *= 2.0;
  for (int it = 0; it < 40; ++it) {
    const double mid = 0.5 * (lo + hi);
    (lowest(mid) > target ? lo : hi) = mid;
  }
  for (auto& c : net.customers) c.demand[0] *= lo;
  const bool svc = U(rng) < 0.5;
  if (svc) feeders::add_svc(net, u(0.1, 0.6), u(0.1, 0.6));
  std::vector<int> options{1};
  if (svc) options.push_back(2);
  if (adjustable > 0) options.push_back(3);
  if (svc && adjustable > 0) options.push_back(4);
  strategy = options[pick(static_cast<int>(options.size()))];
  return net;
}

// 4. the lower-voltage cut is an inner approximation: optimizer voltages meet
// the original |V| >= vmin. Exact power-flow voltages are reported alongside;
// they differ from the model by the linearization error of criterion 3.
Outcome lower_vm_guarantee() {
  std::mt19937 rng(4242);
  const double half = 3.0 * std::numbers::pi / 180.0;
  int solved = 0, attempts = 0, violated = 0, near = 0, pf_failures = 0, exact_violated = 0, unexplained = 0;
  double worst = 0.0, exact_worst = 0.0, lin_worst = 0.0;
  std::array<int, 4> per_strategy{};
  const auto t0 = Clock::now();
  while (solved < kRandomInstances && attempts < 20 * kRandomInstances) {
    ++attempts;
    int strategy = 1;
    const Network net = random_feeder(rng, strategy);
    const auto m = build_subproblem(net, 0, StrategyFlags::from_number(strategy), network_fits(net, half));
    const auto r = solve_misocp(m);
    if (r.status != MipStatus::optimal) continue;
    ++solved;
    ++per_strategy[strategy - 1];
    const auto d = extract_solution(m, net, r.x);
    double margin = kInf;  // lowest |V| over its limit, model voltages
    for (const auto& pd : d.periods) {
      for (size_t i = 0; i < net.nodes.size(); ++i) {
        if (net.nodes[i].is_root) continue;
        for (int p = 0; p < 3; ++p) margin = std::min(margin, std::abs(pd.node_v[i][p]) - net.nodes[i].vm_min[p]);
      }
      for (size_t j = 0; j < net.customers.size(); ++j)
        margin = std::min(margin, std::abs(pd.cust_v[j]) - net.customers[j].vm_min);
    }
    if (margin <= 5e-3) ++near;
    worst = std::max(worst, -margin);
    if (-margin > kLowerVmTol) ++violated;
    try {
      const auto v = validate_solution(net, d);
      exact_worst = std::max(exact_worst, v.max_lower_vm_violation);
      lin_worst = std::max(lin_worst, v.max_linearization_error);
      if (v.max_lower_vm_violation > kLowerVmTol) {
        ++exact_violated;
        if (v.max_lower_vm_violation > v.max_linearization_error + kLowerVmTol) ++unexplained;
      }
    } catch (const PFError&) {
      ++pf_failures;
    }
  }
  const double secs = since(t0);
  return {solved == kRandomInstances && violated == 0 && unexplained == 0 && pf_failures == 0,
          fmt("%d solved of %d random instances (STR-1..4: %d/%d/%d/%d), %d within 5e-3 pu of a lower limit; "
              "optimizer |V| below vmin by > %.0e pu: %d (max %.2e); exact power flow: %d below vmin (max %.2e, "
              "max linearization error %.2e, %d not covered by it), %d power-flow failures; %.1f s",
              solved, attempts, per_strategy[0], per_strategy[1], per_strategy[2], per_strategy[3], near, kLowerVmTol,
              violated, worst, exact_violated, exact_worst, lin_worst, unexplained, pf_failures, secs)};
}

// 5. feasible-set inclusions between the strategies
Outcome dominance() {
  std::array<double, 5> f{};
  double secs = 0.0;
  for (int s = 1; s <= 4; ++s) {
    const auto* r = fixture_run("ieee13-like", s);
    if (!r || r->status != RunStatus::ok) return {false, fmt("STR-%d did not solve", s)};
    f[s] = r->objective;
    secs += r->seconds;
  }
  const bool ok = f[4] <= f[3] + kSlack && f[3] <= f[1] + kSlack && f[4] <= f[2] + kSlack && f[2] <= f[1] + kSlack;
  return {ok && secs < kDominanceSeconds,
          fmt("ieee13-like F: STR-1 %.6f, STR-2 %.6f, STR-3 %.6f, STR-4 %.6f (slack %.0e), %.1f s (limit %.0f s)", f[1],
              f[2], f[3], f[4], kSlack, secs, kDominanceSeconds)};
}

// 6. nested window partitions
Outcome nested_no() {
  const auto rows = sweep_no(config("data/ieee13-like.json", 4), {1, 2, 3, 4, 6});
  std::map<int, double> f;
  for (const auto& row : rows) {
    if (row.run.status != RunStatus::ok) return {false, fmt("N_o=%g did not solve", row.key)};
    f[static_cast<int>(row.key)] = row.run.objective;
  }
  const bool ok = f[2] <= f[1] + kSlack && f[4] <= f[2] + kSlack && f[6] <= f[3] + kSlack;
  return {ok, fmt("ieee13-like STR-4 F: N_o=1 %.6f, 2 %.6f, 3 %.6f, 4 %.6f, 6 %.6f; checked 2<=1, 4<=2, 6<=3 "
                  "(slack %.0e)",
                  f[1], f[2], f[3], f[4], f[6], kSlack)};
}

// 7. SVC capacity sweep
Outcome svc_monotone() {
  const std::vector<double> caps{0.0, 3.0, 6.0, 9.0, 12.0, 15.0};
  auto cfg = config("data/ieee13-like.json", 4);
  cfg.n_o = 1;
  const auto rows = sweep_svc(cfg, caps);
  const auto* str3 = fixture_run("ieee13-like", 3);
  if (!str3 || str3->status != RunStatus::ok) return {false, "STR-3 did not solve"};
  bool ok = rows.size() >= 5;
  std::string fs;
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].run.status != RunStatus::ok) return {false, fmt("capacity %g kVA did not solve", rows[i].key)};
    if (i > 0 && rows[i].run.objective > rows[i - 1].run.objective + kSlack) ok = false;
    fs += fmt("%s%g:%.6f", i ? ", " : "", rows[i].key, rows[i].run.objective);
  }
  const double d0 = std::abs(rows.front().run.objective - str3->objective);
  ok = ok && d0 <= kSlack;
  return {ok, fmt("ieee13-like STR-4 F by kVA {%s}; |F(0) - F(STR-3)| %.2e (tol %.0e)", fs.c_str(), d0, kSlack)};
}

// 8. PV fixture that the SVC alone cannot balance
Outcome infeasibility() {
  const auto* r2 = fixture_run("high-pv", 2);
  const auto* r3 = fixture_run("high-pv", 3);
  const auto* r4 = fixture_run("high-pv", 4);
  if (!r2 || !r3 || !r4) return {false, "a strategy is not applicable to high-pv"};
  const bool ok = r2->status == RunStatus::infeasible && r3->status == RunStatus::ok && r4->status == RunStatus::ok;
  return {ok, fmt("high-pv: STR-2 %s, STR-3 %s (F %.6f), STR-4 %s (F %.6f)", to_string(r2->status),
                  to_string(r3->status), r3->objective, to_string(r4->status), r4->objective)};
}

// 9. cone solver against closed forms and a first-order reference
Outcome cone_suite() {
  using namespace cone_fixtures;
  using cone::SolveStatus;
  int checks = 0, failed = 0;
  double kkt = 0.0, obj_err = 0.0;
  auto check = [&](bool c) {
    ++checks;
    if (!c) ++failed;
  };
  auto optimal = [&](const StandardConeProblem& p, const cone::ConeSolution& s) {
    check(s.status == SolveStatus::optimal);
    const auto r = cone::residuals(p, s);
    kkt = std::max({kkt, r.primal_norm, r.dual_norm, r.gap});
    check(r.primal_norm <= kKktTol && r.dual_norm <= kKktTol && r.gap <= kKktTol);
  };
  auto close = [&](double got, double want) {
    const double e = rel_diff(got, want);
    obj_err = std::max(obj_err, e);
    check(e <= kConeTol);
  };
  {
    const auto p = pythagoras();
    const auto s = cone::solve(p);
    optimal(p, s);
    close(s.objective, 5.0);
  }
  {  // vertex (1.6, 1.2) of x + 2y <= 4, 3x + y <= 6, x, y >= 0
    StandardConeProblem p;
    p.c = VectorXd::Constant(2, -1.0);
    MatrixXd G(4, 2);
    G << 1, 2, 3, 1, -1, 0, 0, -1;
    p.G = sparse(G);
    p.h = VectorXd(4);
    p.h << 4, 6, 0, 0;
    p.num_nonneg = 4;
    const auto s = cone::solve(p);
    optimal(p, s);
    close(s.x[0], 1.6);
    close(s.x[1], 1.2);
  }
  {  // whole optimal face
    StandardConeProblem p;
    p.c = VectorXd::Constant(2, -1.0);
    MatrixXd G(3, 2);
    G << 1, 1, -1, 0, 0, -1;
    p.G = sparse(G);
    p.h = VectorXd(3);
    p.h << 2, 0, 0;
    p.num_nonneg = 3;
    const auto s = cone::solve(p);
    optimal(p, s);
    close(s.objective, -2.0);
  }
  {  // x <= 1 and x >= 2
    StandardConeProblem p;
    p.c = VectorXd::Ones(1);
    MatrixXd G(2, 1);
    G << 1, -1;
    p.G = sparse(G);
    p.h = VectorXd(2);
    p.h << 1, -2;
    p.num_nonneg = 2;
    check(cone::solve(p).status == SolveStatus::infeasible);
  }
  {  // max x, x >= 0
    StandardConeProblem p;
    p.c = VectorXd::Constant(1, -1.0);
    p.G = sparse(-MatrixXd::Ones(1, 1));
    p.h = VectorXd::Zero(1);
    p.num_nonneg = 1;
    check(cone::solve(p).status == SolveStatus::unbounded);
  }
  std::mt19937 rng(20191);
  int random_ok = 0;
  for (int k = 0; k < 50; ++k) {
    const auto inst = random_socp(rng, 10);
    const auto s = cone::solve(inst.problem);
    optimal(inst.problem, s);
    const double ref = admm_reference(inst.A, inst.problem.b, inst.G, inst.problem.h, inst.problem.c,
                                      inst.problem.num_nonneg, inst.problem.soc_dims, 20000);
    const int before = failed;
    close(s.objective, ref);
    if (failed == before && s.status == SolveStatus::optimal) ++random_ok;
  }
  return {failed == 0, fmt("%d/%d checks; 3-4-5 cone, 5 LP corner cases, %d/50 random SOCPs match the reference; max "
                           "rel error %.2e (tol %.0e), max KKT residual %.2e (tol %.0e)",
                           checks - failed, checks, random_ok, obj_err, kConeTol, kkt, kKktTol)};
}

// 10. desk-scale run
Outcome end_to_end() {
  const auto* r = fixture_run("ieee13-like", 4);
  if (!r) return {false, "STR-4 not applicable"};
  double gap = 0.0;
  for (const auto& s : r->subsets) gap = std::max(gap, s.gap);
  const int periods = static_cast<int>(r->periods.size());
  const bool ok = r->status == RunStatus::ok && periods == 24 && r->n_o == 1 && gap <= kEndToEndGap &&
                  r->seconds < kEndToEndSeconds;
  return {ok, fmt("ieee13-like STR-4, T=%d, N_o=%d, %d workers: %s, F %.6f, gap %.2e (tol %.0e), %.1f s (limit %.0f s)",
                  periods, r->n_o, workers(), to_string(r->status), r->objective, gap, kEndToEndGap, r->seconds,
                  kEndToEndSeconds)};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "sequence math", sequence_math},
      {2, "oracle equivalence", oracle_equivalence},
      {3, "linearization fidelity", linearization_fidelity},
      {4, "lower voltage guarantee", lower_vm_guarantee},
      {5, "strategy dominance", dominance},
      {6, "nested N_o", nested_no},
      {7, "SVC capacity sweep", svc_monotone},
      {8, "infeasibility detection", infeasibility},
      {9, "cone solver suite", cone_suite},
      {10, "end-to-end run", end_to_end},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  int failures = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.contains(c.id)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("criterion %2d %s  %-24s %s\n", c.id, o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
