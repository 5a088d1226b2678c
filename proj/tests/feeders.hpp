#pragma once

// In-memory per-unit feeders for tests.

#include "opsd/netmodel.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

namespace feeders {

using opsd::Complex;

inline std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline opsd::Matrix3c diag_z(Complex self, Complex mutual = {}) {
  opsd::Matrix3c z;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) z(r, c) = r == c ? self : mutual;
  return z;
}

inline std::array<Complex, 3> balanced_root(double vm = 1.0) {
  const double third = 2.0 * std::numbers::pi / 3.0;
  return {std::polar(vm, 0.0), std::polar(vm, -third), std::polar(vm, third)};
}

/// Root x and secondary y joined by the transformer line; T periods at a balanced root.
inline opsd::Network two_bus(Complex z_dt = {0.01, 0.01}, int periods = 1, double vm_root = 1.0) {
  opsd::Network net;
  net.units = opsd::Units::per_unit;
  net.base = {10.0, 230.0};
  opsd::Node x{"x", {0.9, 0.9, 0.9}, {1.1, 1.1, 1.1}, true, false};
  opsd::Node y{"y", {0.9, 0.9, 0.9}, {1.1, 1.1, 1.1}, false, true};
  net.nodes = {x, y};
  net.lines.push_back({"x", "y", diag_z(z_dt), 0.0});
  net.horizon.periods = periods;
  net.horizon.n_o = 1;
  net.horizon.subsets = opsd::partition_periods(periods, 1);
  net.horizon.root_voltage.assign(periods, balanced_root(vm_root));
  return net;
}

inline void add_node(opsd::Network& net, const std::string& id, const std::string& parent, const opsd::Matrix3c& z) {
  net.nodes.push_back({id, {0.9, 0.9, 0.9}, {1.1, 1.1, 1.1}, false, false});
  net.lines.push_back({parent, id, z, 0.0});
}

inline void add_customer(opsd::Network& net, const std::string& id, const std::string& node, opsd::Phase phase,
                         Complex demand, bool adjustable = false, Complex service_z = {0.01, 0.005}) {
  opsd::Customer c;
  c.id = id;
  c.node = node;
  c.service_z = service_z;
  c.kind = adjustable ? opsd::CustomerKind::adjustable : opsd::CustomerKind::fixed;
  c.initial_phase = phase;
  c.demand.assign(net.horizon.periods, demand);
  c.vm_min = 0.9;
  c.vm_max = 1.1;
  net.customers.push_back(c);
}

// Per-unit capacities; the current limits are s / (3 v_rated).
inline void add_svc(opsd::Network& net, double s_cap, double s_ind, double v_rated = 400.0 / 230.0) {
  net.svc = opsd::SvcSpec{"y", s_cap, s_ind, v_rated};
}

// n adjustable customers with distinct demands on a two-level feeder, one period, no SVC.
inline opsd::Network small_feeder(int n, int seed) {
  opsd::Network net = feeders::two_bus({0.004, 0.012});
  add_node(net, "b1", "y", feeders::diag_z({0.03, 0.02}, {0.008, 0.01}));
  add_node(net, "b2", "b1", feeders::diag_z({0.02, 0.015}, {0.005, 0.008}));
  add_customer(net, "f1", "b1", opsd::Phase(seed % 3), {0.35, 0.1});
  add_customer(net, "f2", "b2", opsd::Phase((seed + 1) % 3), {0.15 + 0.05 * seed, 0.03});
  for (int j = 0; j < n; ++j) {
    const double p = 0.1 + 0.07 * ((j * 5 + seed * 3) % 7);
    const double q = 0.02 + 0.01 * ((j + seed) % 4);
    add_customer(net, "s" + std::to_string(j), j % 2 ? "b2" : "b1", opsd::Phase((j + seed) % 3), {p, q}, true);
  }
  return net;
}

}  // namespace feeders
