#include "opsd/bnb.hpp"
#include "opsd/pforacle.hpp"

#include "feeders.hpp"

#include <doctest.h>

#include <numbers>

using namespace opsd;
using feeders::add_customer;
using feeders::add_node;

namespace {

std::vector<Phase> initial(const Network& net) {
  std::vector<Phase> a;
  for (const auto& c : net.customers) a.push_back(c.initial_phase);
  return a;
}

// Two adjustable customers and one fixed one on a short lateral.
Network lateral() {
  Network net = feeders::two_bus({0.005, 0.015});
  add_node(net, "b1", "y", feeders::diag_z({0.04, 0.03}, {0.01, 0.015}));
  add_customer(net, "f1", "b1", Phase::a, {0.30, 0.10});
  add_customer(net, "s1", "b1", Phase::a, {0.20, 0.05}, true);
  add_customer(net, "s2", "b1", Phase::a, {0.25, 0.08}, true);
  return net;
}

}  // namespace

TEST_CASE("zero demand gives a flat profile") {
  Network net = lateral();
  for (auto& c : net.customers) c.demand.assign(1, Complex{});
  const auto s = solve_power_flow(net, initial(net), {}, 0);
  for (const auto& v : s.node_v)
    for (int p = 0; p < 3; ++p) CHECK(std::abs(v[p] - net.horizon.root_voltage[0][p]) == 0.0);
  for (const auto& l : s.line_i)
    for (int p = 0; p < 3; ++p) CHECK(std::abs(l[p]) == 0.0);
  for (const auto& i : s.cust_i) CHECK(std::abs(i) == 0.0);
}

TEST_CASE("single customer matches the scalar fixed point") {
  Network net = feeders::two_bus({0.01, 0.01});
  add_customer(net, "c", "y", Phase::a, {0.1, 0.0}, false, {0.01, 0.01});
  // V = 1 - 0.02 (1 + j) * 0.1 / conj(V), iterated by hand
  Complex v = 1.0;
  for (int k = 0; k < 200; ++k) v = 1.0 - Complex(0.02, 0.02) * (0.1 / std::conj(v));
  const auto s = solve_power_flow(net, initial(net), {}, 0);
  CHECK(std::abs(s.cust_v[0] - v) <= 1e-10);
  CHECK(s.cust_v[0].real() == doctest::Approx(0.9979919678067107).epsilon(1e-12));
  CHECK(s.cust_v[0].imag() == doctest::Approx(-0.002).epsilon(1e-12));
  // the other phases carry nothing
  CHECK(std::abs(s.line_i[0][1]) == 0.0);
  CHECK(std::abs(s.node_v[1][2] - net.horizon.root_voltage[0][2]) == 0.0);
}

TEST_CASE("balanced loading gives equal magnitudes and no sequence current") {
  Network net = feeders::two_bus({0.01, 0.03});
  add_node(net, "b1", "y", feeders::diag_z({0.04, 0.03}));
  for (int p = 0; p < 3; ++p) add_customer(net, std::to_string(p), "b1", Phase(p), {0.4, 0.1});
  const auto s = solve_power_flow(net, initial(net), {}, 0);
  for (const auto& v : s.node_v) {
    CHECK(std::abs(v[0]) == doctest::Approx(std::abs(v[1])).epsilon(1e-12));
    CHECK(std::abs(v[0]) == doctest::Approx(std::abs(v[2])).epsilon(1e-12));
  }
  CHECK(std::abs(s.dt_seq.neg) <= 1e-12);
  CHECK(std::abs(s.dt_seq.zero) <= 1e-12);
  CHECK(std::abs(s.dt_seq.pos) > 0.1);
}

TEST_CASE("converged state satisfies KCL, Ohm's law and constant power") {
  const Network net = load_network("data/ieee13-like.json");
  const Topology topo = topology(net);
  const int t = 18;
  const auto svc = svc_currents(net, t, {0.3, -0.2, 0.1});
  const auto s = solve_power_flow(net, initial(net), svc, t);
  const int sec = net.secondary();
  for (int i = 0; i < static_cast<int>(net.nodes.size()); ++i) {
    if (i == net.root()) continue;
    for (int p = 0; p < 3; ++p) {
      Complex r = s.line_i[topo.parent_line[i]][p];
      for (int l : topo.child_lines[i]) r -= s.line_i[l][p];
      for (int j : topo.customers[i])
        if (static_cast<int>(net.customers[j].initial_phase) == p) r -= s.cust_i[j];
      if (i == sec) r -= s.svc_phase[p];
      CHECK(std::abs(r) <= 1e-10);
    }
  }
  for (std::size_t l = 0; l < net.lines.size(); ++l) {
    const int a = net.node_index(net.lines[l].from), b = net.node_index(net.lines[l].to);
    for (int p = 0; p < 3; ++p) {
      Complex drop{};
      for (int q = 0; q < 3; ++q) drop += net.lines[l].z(p, q) * s.line_i[l][q];
      CHECK(std::abs(s.node_v[a][p] - s.node_v[b][p] - drop) <= 1e-10);
    }
  }
  for (std::size_t j = 0; j < net.customers.size(); ++j) {
    CHECK(std::abs(s.cust_v[j] * std::conj(s.cust_i[j]) - net.customers[j].demand[t]) <= 1e-8);
    const int p = static_cast<int>(net.customers[j].initial_phase);
    const Complex drop = net.customers[j].service_z * s.cust_i[j];
    CHECK(std::abs(s.node_v[net.node_index(net.customers[j].node)][p] - s.cust_v[j] - drop) <= 1e-10);
  }
  // sequence components recombine to the transformer currents
  const auto back = reconstruct(s.dt_seq);
  for (int p = 0; p < 3; ++p) CHECK(std::abs(back[p] - s.line_i[topo.dt_line][p]) <= 1e-12);
}

TEST_CASE("sweep updates shrink monotonically after the third sweep on the shipped fixtures") {
  for (const char* path : {"data/ieee13-like.json", "data/high-pv.json", "data/balanced.json"}) {
    const Network net = load_network(path);
    for (int t = 0; t < net.horizon.periods; ++t) {
      const auto s = solve_power_flow(net, initial(net), {}, t);
      for (std::size_t k = 3; k + 1 < s.changes.size(); ++k) CHECK(s.changes[k + 1] <= s.changes[k] + 1e-15);
      CHECK(s.sweeps < 200);
    }
  }
}

TEST_CASE("excessive demand is screened or diverges with the last iterate") {
  Network net = feeders::two_bus({0.05, 0.05});
  add_customer(net, "c", "y", Phase::a, {5.0, 1.0}, false, {0.05, 0.05});
  try {
    (void)solve_power_flow(net, initial(net), {}, 0);
    FAIL("expected the screen to reject the demand");
  } catch (const PFError& e) {
    CHECK(std::string(e.what()).find("customer c") != std::string::npos);
  }
  PFSettings raw;
  raw.screen = false;
  try {
    (void)solve_power_flow(net, initial(net), {}, 0, raw);
    FAIL("expected divergence");
  } catch (const PFError& e) {
    REQUIRE(e.last_iterate.has_value());
    CHECK(e.last_iterate->sweeps >= 1);
  }
}

TEST_CASE("balanced fixture under STR-1 validates with zero objective and no violations") {
  const Network net = load_network("data/balanced.json");
  const auto fits = network_fits(net, 3.0 * std::numbers::pi / 180.0);
  const auto model = build_subproblem(net, 0, StrategyFlags::from_number(1), fits);
  const auto r = solve_misocp(model);
  REQUIRE(r.status == MipStatus::optimal);
  const auto m = validate_solution(net, extract_solution(model, net, r.x));
  CHECK(m.objective_exact <= 1e-9);
  CHECK(std::abs(m.objective_model) <= 1e-8);
  CHECK(m.max_vm_violation == 0.0);
  CHECK(m.max_ampacity_violation == 0.0);
  CHECK(m.max_svc_violation == 0.0);
  CHECK(m.max_nsv_ratio <= 1e-9);
  CHECK(m.max_linearization_error <= 0.02);
}

TEST_CASE("an SVC current beyond its capacity is flagged") {
  Network net = lateral();
  feeders::add_svc(net, 0.3, 0.3);
  const double cap = 0.3 / (3.0 * net.svc->v_rated);
  DispatchSolution sol;
  PeriodDispatch d;
  d.assignment = initial(net);
  d.svc_pair = svc_currents(net, 0, {0.5 * cap, -0.9 * cap, 0.0});
  sol.periods = {d};
  CHECK(validate_solution(net, sol).max_svc_violation <= 1e-15);
  sol.periods[0].svc_pair = svc_currents(net, 0, {2.0 * cap, 0.0, 0.0});
  CHECK(validate_solution(net, sol).max_svc_violation == doctest::Approx(cap));
  // a component across the allowed axis is also a violation
  sol.periods[0].svc_pair[1] += std::polar(0.01, angle(net.horizon.root_voltage[0][1] - net.horizon.root_voltage[0][2]));
  CHECK(validate_solution(net, sol).max_svc_violation == doctest::Approx(cap));
  sol.periods[0].svc_pair[0] = 0.0;
  CHECK(validate_solution(net, sol).max_svc_violation == doctest::Approx(0.01));
}

TEST_CASE("enumeration without adjustable customers returns the initial phases") {
  const Network net = load_network("data/balanced.json");
  const auto r = enumerate_assignments(net, 0, StrategyFlags::from_number(3));
  REQUIRE(r.feasible);
  CHECK(r.assignment == initial(net));
  double exact = 0.0;
  for (int t = 0; t < net.horizon.periods; ++t) {
    const auto s = solve_power_flow(net, initial(net), {}, t);
    exact += std::abs(s.dt_seq.neg) + std::abs(s.dt_seq.zero);
  }
  CHECK(r.objective == doctest::Approx(exact).epsilon(1e-14));
  CHECK(r.evaluated == net.horizon.periods);
}

TEST_CASE("two adjustable customers: minimum over the nine assignments") {
  const Network net = lateral();
  double best = kInf;
  std::vector<Phase> arg;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      std::vector<Phase> asg{Phase::a, Phase(a), Phase(b)};
      const auto s = solve_power_flow(net, asg, {}, 0);
      if (!check_limits(net, s).within(1e-9)) continue;
      const double f = std::abs(s.dt_seq.neg) + std::abs(s.dt_seq.zero);
      if (f < best) {
        best = f;
        arg = asg;
      }
    }
  const auto r = enumerate_assignments(net, 0, StrategyFlags::from_number(3));
  REQUIRE(r.feasible);
  CHECK(r.objective == best);
  CHECK(r.assignment == arg);
  CHECK(r.evaluated == 9);
  // the fixed customer stays on a, so the two switchable ones go to b and c
  CHECK(r.assignment[0] == Phase::a);
  CHECK(r.assignment[1] != Phase::a);
  CHECK(r.assignment[2] != Phase::a);
  CHECK(r.assignment[1] != r.assignment[2]);
}

TEST_CASE("ties go to the lexicographically first assignment") {
  Network net = feeders::two_bus({0.01, 0.02});
  add_node(net, "b1", "y", feeders::diag_z({0.03, 0.02}));
  add_customer(net, "f", "b1", Phase::c, {0.3, 0.1});
  add_customer(net, "s1", "b1", Phase::c, {0.3, 0.1}, true);
  add_customer(net, "s2", "b1", Phase::c, {0.3, 0.1}, true);
  const auto r = enumerate_assignments(net, 0, StrategyFlags::from_number(3));
  REQUIRE(r.feasible);
  // (a, b) and (b, a) balance the feeder equally
  CHECK(r.assignment == std::vector<Phase>{Phase::c, Phase::a, Phase::b});
  CHECK(r.objective <= 1e-9);
}

TEST_CASE("SVC grid search: parallel and serial agree, and the grid helps") {
  Network net = lateral();
  feeders::add_svc(net, 0.3, 0.3);
  const auto serial = enumerate_assignments(net, 0, StrategyFlags::from_number(4), 3, 1);
  const auto parallel = enumerate_assignments(net, 0, StrategyFlags::from_number(4), 3, 4);
  REQUIRE(serial.feasible);
  CHECK(parallel.objective == serial.objective);
  CHECK(parallel.assignment == serial.assignment);
  CHECK(parallel.svc_pair == serial.svc_pair);
  CHECK(serial.evaluated == 9 * 27);
  const auto psd_only = enumerate_assignments(net, 0, StrategyFlags::from_number(3));
  CHECK(serial.objective <= psd_only.objective);
  const auto g = svc_grid(net, 3);
  const double cap = 0.3 / (3.0 * net.svc->v_rated);
  CHECK(g == std::vector<double>{-cap, 0.0, cap});
}

TEST_CASE("enumeration limits") {
  Network net = lateral();
  for (int j = 0; j < 5; ++j) add_customer(net, "x" + std::to_string(j), "b1", Phase::b, {0.01, 0.0}, true);
  CHECK_THROWS_AS((void)enumerate_assignments(net, 0, StrategyFlags::from_number(3)), PFError);
  // without the PSD the adjustable customers stay put
  CHECK(enumerate_assignments(net, 0, StrategyFlags::from_number(1)).evaluated == 1);
  CHECK_THROWS_AS((void)enumerate_assignments(net, 0, StrategyFlags::from_number(2)), PFError);
  CHECK_THROWS_AS((void)svc_grid(net, 0), PFError);
}
