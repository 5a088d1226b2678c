#include "opsd/netmodel.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <numbers>
#include <queue>
#include <set>
#include <sstream>

namespace opsd {

using json = nlohmann::json;

double angle(Complex v) {
  const double a = std::arg(v);
  return a <= -std::numbers::pi ? std::numbers::pi : a;
}

char phase_name(Phase p) { return static_cast<char>('a' + static_cast<int>(p)); }

Phase parse_phase(const std::string& s) {
  if (s == "a" || s == "A") return Phase::a;
  if (s == "b" || s == "B") return Phase::b;
  if (s == "c" || s == "C") return Phase::c;
  throw NetworkError("unknown phase '" + s + "'");
}

std::vector<std::vector<int>> partition_periods(int periods, int n_o) {
  if (periods <= 0 || n_o <= 0 || n_o > periods) {
    throw NetworkError("horizon partition: cannot split " + std::to_string(periods) + " periods into " +
                       std::to_string(n_o) + " subsets");
  }
  std::vector<std::vector<int>> out(n_o);
  const int small = periods / n_o;
  const int longer = periods % n_o;
  int t = 0;
  for (int k = 0; k < n_o; ++k) {
    const int len = small + (k < longer ? 1 : 0);
    for (int i = 0; i < len; ++i) out[k].push_back(t++);
  }
  return out;
}

int Network::node_index(const std::string& id) const {
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].id == id) return static_cast<int>(i);
  return -1;
}

int Network::root() const {
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].is_root) return static_cast<int>(i);
  return -1;
}

int Network::secondary() const {
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].is_secondary) return static_cast<int>(i);
  return -1;
}

int Network::num_adjustable() const {
  int n = 0;
  for (const auto& c : customers) n += c.adjustable() ? 1 : 0;
  return n;
}

Topology topology(const Network& net) {
  const int n = static_cast<int>(net.nodes.size());
  const int root = net.root();
  if (root < 0) throw NetworkError("topology: no root node");
  if (net.lines.size() + 1 != net.nodes.size()) {
    throw NetworkError("topology: non-radial network (" + std::to_string(net.lines.size()) + " lines for " +
                       std::to_string(n) + " nodes)");
  }
  std::vector<std::vector<std::pair<int, int>>> adj(n);  // (neighbor, line)
  for (std::size_t l = 0; l < net.lines.size(); ++l) {
    const int a = net.node_index(net.lines[l].from);
    const int b = net.node_index(net.lines[l].to);
    if (a < 0 || b < 0) throw NetworkError("line " + std::to_string(l) + ": unknown end node");
    adj[a].emplace_back(b, static_cast<int>(l));
    adj[b].emplace_back(a, static_cast<int>(l));
  }
  Topology t;
  t.parent_line.assign(n, -1);
  t.parent_node.assign(n, -1);
  t.child_lines.assign(n, {});
  t.customers.assign(n, {});
  t.path_lines.assign(n, {});
  std::vector<bool> seen(n, false);
  std::queue<int> q;
  q.push(root);
  seen[root] = true;
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    t.order.push_back(u);
    for (auto [v, l] : adj[u]) {
      if (v == t.parent_node[u] && l == t.parent_line[u]) continue;
      if (seen[v]) throw NetworkError("topology: non-radial network, cycle through line " + std::to_string(l));
      seen[v] = true;
      t.parent_node[v] = u;
      t.parent_line[v] = l;
      t.child_lines[u].push_back(l);
      t.path_lines[v] = t.path_lines[u];
      t.path_lines[v].push_back(l);
      q.push(v);
    }
  }
  if (static_cast<int>(t.order.size()) != n) throw NetworkError("topology: non-radial network, graph not connected");
  for (std::size_t j = 0; j < net.customers.size(); ++j) {
    const int i = net.node_index(net.customers[j].node);
    if (i < 0) throw NetworkError("customer " + net.customers[j].id + ": unknown node " + net.customers[j].node);
    t.customers[i].push_back(static_cast<int>(j));
  }
  const int sec = net.secondary();
  if (sec >= 0 && t.parent_node[sec] == root) t.dt_line = t.parent_line[sec];
  return t;
}

std::string ValidationReport::summary() const {
  std::ostringstream out;
  for (std::size_t i = 0; i < findings.size(); ++i) {
    if (i) out << "; ";
    out << findings[i].element << ": " << findings[i].message;
  }
  return out.str();
}

ValidationReport validate(const Network& net) {
  ValidationReport r;
  auto add = [&](std::string element, std::string message) { r.findings.push_back({std::move(element), std::move(message)}); };

  int roots = 0, secondaries = 0;
  std::set<std::string> ids;
  for (const auto& nd : net.nodes) {
    if (!ids.insert(nd.id).second) add("node " + nd.id, "duplicate id");
    roots += nd.is_root ? 1 : 0;
    secondaries += nd.is_secondary ? 1 : 0;
    for (int p = 0; p < 3; ++p) {
      if (!(nd.vm_min[p] > 0.0 && nd.vm_min[p] < nd.vm_max[p])) {
        add("node " + nd.id, "voltage bounds must satisfy 0 < vm_min < vm_max");
        break;
      }
    }
  }
  if (roots != 1) add("nodes", "exactly one root node required, found " + std::to_string(roots));
  if (secondaries != 1) add("nodes", "exactly one secondary node required, found " + std::to_string(secondaries));

  bool lines_ok = true;
  for (std::size_t l = 0; l < net.lines.size(); ++l) {
    const auto& ln = net.lines[l];
    const std::string name = "line " + ln.from + "-" + ln.to;
    if (net.node_index(ln.from) < 0) {
      add(name, "unknown node " + ln.from);
      lines_ok = false;
    }
    if (net.node_index(ln.to) < 0) {
      add(name, "unknown node " + ln.to);
      lines_ok = false;
    }
    if ((ln.z - ln.z.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + ln.z.cwiseAbs().maxCoeff())) {
      add(name, "impedance matrix not symmetric");
    }
    if (ln.ampacity < 0.0) add(name, "negative ampacity");
  }
  if (lines_ok && roots == 1) {
    try {
      Network lines_only;
      lines_only.nodes = net.nodes;
      lines_only.lines = net.lines;
      const Topology t = topology(lines_only);
      if (secondaries == 1 && t.dt_line < 0) add("nodes", "root and secondary node are not joined by a line");
      // currents are oriented away from the root
      for (std::size_t i = 0; i < net.nodes.size(); ++i) {
        const int l = t.parent_line[i];
        if (l >= 0 && net.node_index(net.lines[l].to) != static_cast<int>(i))
          add("line " + net.lines[l].from + "-" + net.lines[l].to, "'from' must be the end nearer the root");
      }
    } catch (const NetworkError& e) {
      std::string msg = e.what();
      if (msg.rfind("topology: ", 0) == 0) msg.erase(0, 10);
      add("topology", msg);
    }
  }

  const int periods = net.horizon.periods;
  for (const auto& c : net.customers) {
    const std::string name = "customer " + c.id;
    if (net.node_index(c.node) < 0) add(name, "unknown node " + c.node);
    if (static_cast<int>(c.demand.size()) != periods) {
      add(name, "demand has " + std::to_string(c.demand.size()) + " periods, horizon has " + std::to_string(periods));
    }
    if (!(c.vm_min > 0.0 && c.vm_min < c.vm_max)) add(name, "voltage bounds must satisfy 0 < vmin < vmax");
  }

  if (net.svc) {
    const auto& s = *net.svc;
    const int at = net.node_index(s.node);
    if (at < 0) {
      add("svc", "unknown node " + s.node);
    } else if (!net.nodes[at].is_secondary) {
      add("svc", "must be placed at the secondary node, found " + s.node);
    }
    if (s.s_cap < 0.0 || s.s_ind < 0.0) add("svc", "capacities must be nonnegative");
    if (!(s.v_rated > 0.0)) add("svc", "rated voltage must be positive");
  }

  // horizon
  if (periods <= 0) add("horizon", "no periods");
  if (net.horizon.n_o < 1 || net.horizon.n_o > std::max(periods, 1)) add("horizon", "n_o out of range");
  {
    std::vector<int> hits(std::max(periods, 0), 0);
    bool bad = static_cast<int>(net.horizon.subsets.size()) != net.horizon.n_o;
    std::size_t lo = SIZE_MAX, hi = 0;
    for (const auto& s : net.horizon.subsets) {
      if (s.empty()) bad = true;
      lo = std::min(lo, s.size());
      hi = std::max(hi, s.size());
      for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] < 0 || s[i] >= periods) {
          bad = true;
          continue;
        }
        ++hits[s[i]];
        if (i > 0 && s[i] != s[i - 1] + 1) bad = true;
      }
    }
    for (int h : hits) bad = bad || h != 1;
    if (!net.horizon.subsets.empty() && hi - lo > 1) bad = true;
    if (bad) add("horizon partition", "subsets must be contiguous, of near-equal size and partition the periods");
  }
  if (static_cast<int>(net.horizon.root_voltage.size()) != periods) {
    add("horizon", "root voltage given for " + std::to_string(net.horizon.root_voltage.size()) + " periods, expected " +
                       std::to_string(periods));
  } else if (const int root = net.root(); root >= 0 && roots == 1) {
    const auto& nd = net.nodes[root];
    for (int t = 0; t < periods; ++t) {
      for (int p = 0; p < 3; ++p) {
        const double m = std::abs(net.horizon.root_voltage[t][p]);
        if (m < nd.vm_min[p] - 1e-12 || m > nd.vm_max[p] + 1e-12) {
          add("horizon", "root voltage of period " + std::to_string(t + 1) + " phase " + phase_name(Phase(p)) +
                             " outside the root node bounds");
        }
      }
    }
  }
  if (!(net.nu_neg > 0.0) || !(net.nu_zero > 0.0)) add("limits", "unbalance coefficients must be positive");
  return r;
}

namespace {

// Scales every electrical quantity: voltages by kv, currents by ki, impedances
// by kz, powers by ks.
Network rescale(const Network& in, double kv, double ki, double kz, double ks) {
  Network out = in;
  for (auto& nd : out.nodes) {
    for (int p = 0; p < 3; ++p) {
      nd.vm_min[p] *= kv;
      nd.vm_max[p] *= kv;
    }
  }
  for (auto& ln : out.lines) {
    ln.z *= kz;
    ln.ampacity *= ki;
  }
  for (auto& c : out.customers) {
    c.service_z *= kz;
    for (auto& d : c.demand) d *= ks;
    c.vm_min *= kv;
    c.vm_max *= kv;
  }
  if (out.svc) {
    out.svc->s_cap *= ks;
    out.svc->s_ind *= ks;
    out.svc->v_rated *= kv;
  }
  for (auto& rv : out.horizon.root_voltage)
    for (auto& v : rv) v *= kv;
  out.nominal_vm *= kv;
  return out;
}

}  // namespace

Network to_per_unit(const Network& si, double base_kva, double base_v) {
  if (!(base_kva > 0.0) || !(base_v > 0.0)) throw NetworkError("base: kva and volts must be positive");
  if (si.units != Units::si) throw NetworkError("to_per_unit: network is already per-unit");
  Network pu;
  Base b{base_kva, base_v};
  pu = rescale(si, 1.0 / b.volts, 1.0 / b.amps(), 1.0 / b.ohms(), 1.0 / b.va());
  pu.base = b;
  pu.units = Units::per_unit;
  return pu;
}

Network from_per_unit(const Network& pu) {
  if (pu.units != Units::per_unit) throw NetworkError("from_per_unit: network is not per-unit");
  const Base& b = pu.base;
  if (!(b.kva > 0.0) || !(b.volts > 0.0)) throw NetworkError("base: kva and volts must be positive");
  Network si = rescale(pu, b.volts, b.amps(), b.ohms(), b.va());
  si.units = Units::si;
  return si;
}

namespace {

Complex read_complex(const json& j, const std::string& where) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (!j.is_object() || !j.contains("re")) throw NetworkError(where + ": expected {re, im}");
  return {j.at("re").get<double>(), j.value("im", 0.0)};
}

json write_complex(Complex v) { return json{{"re", v.real()}, {"im", v.imag()}}; }

std::array<double, 3> read_triple_or_scalar(const json& j, const std::string& where) {
  if (j.is_number()) {
    const double v = j.get<double>();
    return {v, v, v};
  }
  if (j.is_array() && j.size() == 3) return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
  throw NetworkError(where + ": expected a number or an array of 3 numbers");
}

template <class F>
auto with_context(const std::string& where, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const NetworkError&) {
    throw;
  } catch (const std::exception& e) {
    throw NetworkError(where + ": " + e.what());
  }
}

}  // namespace

Network parse_network(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const std::exception& e) {
    throw NetworkError(std::string("document: ") + e.what());
  }
  Network si;
  si.units = Units::si;
  const double kva = with_context("base", [&] { return doc.at("base").at("kva").get<double>(); });
  const double volts = with_context("base", [&] { return doc.at("base").at("volts").get<double>(); });

  with_context("nodes", [&] {
    for (const auto& jn : doc.at("nodes")) {
      Node nd;
      nd.id = jn.at("id").is_string() ? jn.at("id").get<std::string>() : jn.at("id").dump();
      const std::string where = "node " + nd.id;
      with_context(where, [&] {
        nd.vm_min = read_triple_or_scalar(jn.at("vmin"), where + " vmin");
        nd.vm_max = read_triple_or_scalar(jn.at("vmax"), where + " vmax");
        nd.is_root = jn.value("root", false);
        nd.is_secondary = jn.value("secondary", false);
      });
      si.nodes.push_back(nd);
    }
  });
  with_context("lines", [&] {
    for (const auto& jl : doc.at("lines")) {
      Line ln;
      ln.from = jl.at("from").get<std::string>();
      ln.to = jl.at("to").get<std::string>();
      const std::string where = "line " + ln.from + "-" + ln.to;
      with_context(where, [&] {
        const auto& z = jl.at("z");
        if (!z.is_array() || z.size() != 3) throw NetworkError(where + ": z must be 3x3");
        for (int r = 0; r < 3; ++r) {
          if (!z[r].is_array() || z[r].size() != 3) throw NetworkError(where + ": z must be 3x3");
          for (int c = 0; c < 3; ++c) ln.z(r, c) = read_complex(z[r][c], where + " z");
        }
        ln.ampacity = jl.value("ampacity", 0.0);
      });
      si.lines.push_back(ln);
    }
  });
  with_context("customers", [&] {
    int k = 0;
    for (const auto& jc : doc.at("customers")) {
      ++k;
      Customer c;
      c.id = jc.contains("id") ? (jc.at("id").is_string() ? jc.at("id").get<std::string>() : jc.at("id").dump())
                               : std::to_string(k);
      const std::string where = "customer " + c.id;
      with_context(where, [&] {
        c.node = jc.at("node").get<std::string>();
        const std::string kind = jc.at("kind").get<std::string>();
        if (kind == "fixed") {
          c.kind = CustomerKind::fixed;
        } else if (kind == "adjustable") {
          c.kind = CustomerKind::adjustable;
        } else {
          throw NetworkError(where + ": kind must be fixed or adjustable");
        }
        c.initial_phase = parse_phase(jc.at("initial_phase").get<std::string>());
        c.service_z = read_complex(jc.at("service_z"), where + " service_z");
        for (const auto& d : jc.at("demand")) c.demand.emplace_back(d.at("p").get<double>(), d.at("q").get<double>());
        c.vm_min = jc.at("vmin").get<double>();
        c.vm_max = jc.at("vmax").get<double>();
      });
      si.customers.push_back(c);
    }
  });
  if (doc.contains("svc") && !doc.at("svc").is_null()) {
    with_context("svc", [&] {
      const auto& js = doc.at("svc");
      SvcSpec s;
      s.node = js.at("node").get<std::string>();
      s.s_cap = js.at("s_cap").get<double>();
      s.s_ind = js.at("s_ind").get<double>();
      s.v_rated = js.at("v_rated").get<double>();
      si.svc = s;
    });
  }
  with_context("horizon", [&] {
    const auto& jh = doc.at("horizon");
    si.horizon.periods = jh.at("T").get<int>();
    si.horizon.n_o = jh.value("n_o", 1);
    for (const auto& jt : jh.at("root_voltage")) {
      if (!jt.is_array() || jt.size() != 3) throw NetworkError("horizon: root_voltage entries must hold 3 phases");
      std::array<Complex, 3> v;
      for (int p = 0; p < 3; ++p) v[p] = read_complex(jt[p], "horizon root_voltage");
      si.horizon.root_voltage.push_back(v);
    }
    if (jh.contains("subsets")) {
      for (const auto& js : jh.at("subsets")) {
        std::vector<int> s;
        for (const auto& t : js) s.push_back(t.get<int>() - 1);
        si.horizon.subsets.push_back(s);
      }
    } else if (si.horizon.n_o >= 1 && si.horizon.n_o <= si.horizon.periods) {
      si.horizon.subsets = partition_periods(si.horizon.periods, si.horizon.n_o);
    }
  });
  if (doc.contains("limits")) {
    with_context("limits", [&] {
      si.nu_neg = doc.at("limits").value("nu_neg", si.nu_neg);
      si.nu_zero = doc.at("limits").value("nu_zero", si.nu_zero);
    });
  }
  si.nominal_vm = volts;

  Network pu = to_per_unit(si, kva, volts);
  const ValidationReport report = validate(pu);
  if (!report.ok()) throw NetworkError(report.summary());
  return pu;
}

Network load_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NetworkError("cannot open network file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_network(ss.str());
}

std::string to_json(const Network& net) {
  const Network si = net.units == Units::si ? net : from_per_unit(net);
  json doc;
  doc["base"] = {{"kva", si.base.kva}, {"volts", si.base.volts}};
  doc["nodes"] = json::array();
  for (const auto& nd : si.nodes) {
    json jn{{"id", nd.id},
            {"vmin", {nd.vm_min[0], nd.vm_min[1], nd.vm_min[2]}},
            {"vmax", {nd.vm_max[0], nd.vm_max[1], nd.vm_max[2]}}};
    if (nd.is_root) jn["root"] = true;
    if (nd.is_secondary) jn["secondary"] = true;
    doc["nodes"].push_back(jn);
  }
  doc["lines"] = json::array();
  for (const auto& ln : si.lines) {
    json z = json::array();
    for (int r = 0; r < 3; ++r) {
      json row = json::array();
      for (int c = 0; c < 3; ++c) row.push_back(write_complex(ln.z(r, c)));
      z.push_back(row);
    }
    json jl{{"from", ln.from}, {"to", ln.to}, {"z", z}};
    if (ln.ampacity > 0.0) jl["ampacity"] = ln.ampacity;
    doc["lines"].push_back(jl);
  }
  doc["customers"] = json::array();
  for (const auto& c : si.customers) {
    json d = json::array();
    for (const auto& v : c.demand) d.push_back({{"p", v.real()}, {"q", v.imag()}});
    doc["customers"].push_back({{"id", c.id},
                                {"node", c.node},
                                {"kind", c.adjustable() ? "adjustable" : "fixed"},
                                {"initial_phase", std::string(1, phase_name(c.initial_phase))},
                                {"service_z", write_complex(c.service_z)},
                                {"demand", d},
                                {"vmin", c.vm_min},
                                {"vmax", c.vm_max}});
  }
  if (si.svc) {
    doc["svc"] = {{"node", si.svc->node}, {"s_cap", si.svc->s_cap}, {"s_ind", si.svc->s_ind}, {"v_rated", si.svc->v_rated}};
  }
  json rv = json::array();
  for (const auto& t : si.horizon.root_voltage) rv.push_back({write_complex(t[0]), write_complex(t[1]), write_complex(t[2])});
  json subsets = json::array();
  for (const auto& s : si.horizon.subsets) {
    json js = json::array();
    for (int t : s) js.push_back(t + 1);
    subsets.push_back(js);
  }
  doc["horizon"] = {{"T", si.horizon.periods}, {"n_o", si.horizon.n_o}, {"root_voltage", rv}, {"subsets", subsets}};
  doc["limits"] = {{"nu_neg", si.nu_neg}, {"nu_zero", si.nu_zero}};
  return doc.dump(1);
}

}  // namespace opsd
