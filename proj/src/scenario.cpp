#include "opsd/scenario.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

namespace opsd {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

constexpr const char* kPairs[3] = {"ab", "bc", "ca"};

json cjson(Complex z) { return json::array({z.real(), z.imag()}); }
Complex from_cjson(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string period_span(const std::vector<int>& periods) {
  if (periods.empty()) return "";
  return std::to_string(periods.front() + 1) + "-" + std::to_string(periods.back() + 1);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string periods_csv(const RunReport& r) {
  std::ostringstream o;
  o << "t,subset,z_neg,z_zero,z,i_a,i_b,i_c,nsv_ratio,zsv_ratio\n";
  for (const auto& p : r.periods) {
    o << p.t + 1 << ',' << p.k + 1 << ',' << num(p.z_neg) << ',' << num(p.z_zero) << ',' << num(p.z);
    for (int q = 0; q < 3; ++q) o << ',' << num(std::abs(p.dt_current[q]));
    o << ',' << num(p.nsv_ratio) << ',' << num(p.zsv_ratio) << '\n';
  }
  return o.str();
}

std::string assignments_csv(const Network& net, const RunReport& r) {
  std::ostringstream o;
  o << "subset,periods,customer,initial,assigned\n";
  for (const auto& s : r.subsets) {
    if (s.assignment.empty()) continue;
    for (std::size_t j = 0; j < net.customers.size(); ++j) {
      if (!net.customers[j].adjustable()) continue;
      o << s.k + 1 << ',' << period_span(s.periods) << ',' << net.customers[j].id << ','
        << phase_name(net.customers[j].initial_phase) << ',' << phase_name(s.assignment[j]) << '\n';
    }
  }
  return o.str();
}

std::string timings_csv(const RunReport& r) {
  std::ostringstream o;
  o << "subset,periods,status,nodes,seconds\n";
  for (const auto& s : r.subsets)
    o << s.k + 1 << ',' << period_span(s.periods) << ',' << to_string(s.status) << ',' << s.nodes << ','
      << num(s.seconds) << '\n';
  o << "total,,,," << num(r.seconds) << '\n';
  return o.str();
}

}  // namespace

const char* to_string(RunStatus s) {
  switch (s) {
    case RunStatus::ok: return "ok";
    case RunStatus::infeasible: return "infeasible";
    case RunStatus::limit: return "limit";
  }
  return "?";
}

int workers_from_env() {
  const char* v = std::getenv("OPSD_WORKERS");
  if (!v || !*v) return 1;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 1 || n > 1024) throw std::invalid_argument(std::string("OPSD_WORKERS must be 1..1024, got ") + v);
  return static_cast<int>(n);
}

Network prepare_network(const ScenarioConfig& cfg) {
  Network net = load_network(cfg.network_path);
  if (cfg.n_o != 0) {
    net.horizon.n_o = cfg.n_o;
    net.horizon.subsets = partition_periods(net.horizon.periods, cfg.n_o);
  }
  if (cfg.svc_cap_kva) {
    if (!net.svc) throw NetworkError("svc: capacity override given but the network has no SVC");
    if (*cfg.svc_cap_kva < 0.0) throw NetworkError("svc: capacity must be nonnegative");
    const double s = *cfg.svc_cap_kva * 1000.0 / net.base.va();
    net.svc->s_cap = s;
    net.svc->s_ind = s;
  }
  return net;
}

RunReport run_network(const Network& net, const ScenarioConfig& cfg) {
  const auto start = Clock::now();
  const StrategyFlags flags = StrategyFlags::from_number(cfg.strategy);
  if (flags.use_svc && !net.svc) throw FormulationError("strategy " + std::to_string(cfg.strategy) + " needs an SVC");
  if (!(cfg.delta_deg > 0.0 && cfg.delta_deg < 30.0)) throw FormulationError("delta-deg must lie in (0, 30)");
  const PhaseFits fits = network_fits(net, cfg.delta_deg * std::numbers::pi / 180.0);
  const auto& subsets = net.horizon.subsets;
  const int nsub = static_cast<int>(subsets.size());
  const int workers = std::max(1, cfg.workers);
  if (!cfg.out_dir.empty()) fs::create_directories(cfg.out_dir);

  RunReport r;
  r.network = cfg.network_path;
  r.strategy = cfg.strategy;
  r.n_o = nsub;
  r.delta_deg = cfg.delta_deg;
  r.subsets.resize(nsub);
  std::vector<MISOCPModel> models(nsub);
  std::vector<MIPSolution> sols(nsub);
  std::vector<std::exception_ptr> errors(nsub);

#pragma omp parallel for schedule(dynamic) num_threads(std::min(workers, std::max(nsub, 1)))
  for (int k = 0; k < nsub; ++k) {
    try {
      models[k] = build_window(net, subsets[k], flags, fits);
      BnbSettings s;
      s.gap_tol = cfg.gap_tol;
      s.time_limit = cfg.time_limit;
      s.workers = std::max(1, workers / nsub);
      s.cone.tol = cfg.cone_tol;
      std::ofstream log;
      if (cfg.node_logs && !cfg.out_dir.empty()) {
        log.open(fs::path(cfg.out_dir) / ("nodes_" + std::to_string(k + 1) + ".log"));
        s.node_log = &log;
      }
      if (cfg.dump_models && !cfg.out_dir.empty()) {
        std::ofstream dump(fs::path(cfg.out_dir) / ("model_" + std::to_string(k + 1) + ".txt"));
        write_model(dump, models[k]);
      }
      sols[k] = solve_misocp(models[k], s);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  bool complete = true;
  for (int k = 0; k < nsub; ++k) {
    auto& sr = r.subsets[k];
    const auto& sol = sols[k];
    sr.k = k;
    sr.periods = subsets[k];
    sr.status = sol.status;
    sr.objective = sol.objective;
    sr.bound = sol.bound;
    sr.gap = sol.gap;
    sr.nodes = sol.nodes_explored;
    sr.seconds = sol.seconds;
    const std::string name = "subproblem " + std::to_string(k + 1) + " (periods " + period_span(subsets[k]) + ")";
    if (sol.status == MipStatus::infeasible) {
      if (r.status != RunStatus::infeasible) r.message = name + " is infeasible";
      r.status = RunStatus::infeasible;
    } else if (sol.status != MipStatus::optimal && r.status == RunStatus::ok) {
      r.status = RunStatus::limit;
      r.message = name + " stopped at the " + (sol.status == MipStatus::time_limit ? "time" : "node") + " limit";
    }
    if (sol.x.size() == 0) {
      complete = false;
      continue;
    }
    auto d = extract_solution(models[k], net, sol.x);
    sr.assignment = d.periods.front().assignment;
    for (auto& p : d.periods) r.solution.periods.push_back(std::move(p));
  }

  if (complete) {
    std::sort(r.solution.periods.begin(), r.solution.periods.end(),
              [](const PeriodDispatch& a, const PeriodDispatch& b) { return a.t < b.t; });
    const Topology topo = topology(net);
    std::vector<int> subset_of(net.horizon.periods, 0);
    for (int k = 0; k < nsub; ++k)
      for (int t : subsets[k]) subset_of[t] = k;
    for (const auto& d : r.solution.periods) {
      PeriodReport p;
      p.t = d.t;
      p.k = subset_of[d.t];
      p.z_neg = d.z_neg;
      p.z_zero = d.z_zero;
      p.z = d.z_neg + d.z_zero;
      p.dt_current = d.line_i[topo.dt_line];
      r.solution.objective += p.z;
      r.periods.push_back(p);
    }
    r.objective = r.solution.objective;
    try {
      r.validation = validate_solution(net, r.solution);
      for (std::size_t i = 0; i < r.periods.size(); ++i) {
        const auto lim = check_limits(net, r.validation->states[i]);
        r.periods[i].nsv_ratio = lim.nsv_ratio;
        r.periods[i].zsv_ratio = lim.zsv_ratio;
      }
    } catch (const PFError& e) {
      r.validation_error = e.what();
    }
  } else {
    r.objective = kInf;
  }
  r.seconds = std::chrono::duration<double>(Clock::now() - start).count();

  if (!cfg.out_dir.empty()) {
    const fs::path dir(cfg.out_dir);
    write_text(dir / "report.json", report_json(net, r));
    write_text(dir / "periods.csv", periods_csv(r));
    write_text(dir / "assignments.csv", assignments_csv(net, r));
    write_text(dir / "timings.csv", timings_csv(r));
  }
  return r;
}

RunReport run_scenario(const ScenarioConfig& cfg) { return run_network(prepare_network(cfg), cfg); }

int exit_code(const RunReport& r) {
  switch (r.status) {
    case RunStatus::ok: return 0;
    case RunStatus::infeasible: return 2;
    case RunStatus::limit: return 3;
  }
  return 1;
}

std::string report_json(const Network& net, const RunReport& r) {
  json j;
  j["network"] = fs::path(r.network).filename().string();
  j["units"] = "per-unit";
  j["strategy"] = r.strategy;
  j["n_o"] = r.n_o;
  j["delta_deg"] = r.delta_deg;
  j["status"] = to_string(r.status);
  j["message"] = r.message;
  j["objective"] = r.objective;

  json subsets = json::array();
  for (const auto& s : r.subsets) {
    json a = json::object();
    for (std::size_t c = 0; c < s.assignment.size(); ++c)
      if (net.customers[c].adjustable()) a[net.customers[c].id] = std::string(1, phase_name(s.assignment[c]));
    std::vector<int> periods;
    for (int t : s.periods) periods.push_back(t + 1);
    subsets.push_back({{"subset", s.k + 1},
                       {"periods", periods},
                       {"status", to_string(s.status)},
                       {"objective", s.objective},
                       {"bound", s.bound},
                       {"gap", s.gap},
                       {"nodes", s.nodes},
                       {"assignment", a}});
  }
  j["subsets"] = subsets;

  json periods = json::array();
  for (std::size_t i = 0; i < r.periods.size(); ++i) {
    const auto& p = r.periods[i];
    const auto& d = r.solution.periods[i];
    const auto seq = decompose(p.dt_current);
    json svc = json::object();
    if (net.svc)
      for (int q = 0; q < 3; ++q) svc[kPairs[q]] = {{"current", cjson(d.svc_pair[q])}, {"kappa", d.kappa[q]}};
    periods.push_back({{"t", p.t + 1},
                       {"subset", p.k + 1},
                       {"z_neg", p.z_neg},
                       {"z_zero", p.z_zero},
                       {"z", p.z},
                       {"dt_current", {cjson(p.dt_current[0]), cjson(p.dt_current[1]), cjson(p.dt_current[2])}},
                       {"dt_sequence", {{"pos", cjson(seq.pos)}, {"neg", cjson(seq.neg)}, {"zero", cjson(seq.zero)}}},
                       {"nsv_ratio", p.nsv_ratio},
                       {"zsv_ratio", p.zsv_ratio},
                       {"svc", svc}});
  }
  j["periods"] = periods;

  if (r.validation) {
    const auto& v = *r.validation;
    j["validation"] = {{"objective_exact", v.objective_exact},
                       {"objective_model", v.objective_model},
                       {"objective_deviation", v.objective_deviation},
                       {"max_vm_violation", v.max_vm_violation},
                       {"max_lower_vm_violation", v.max_lower_vm_violation},
                       {"max_ampacity_violation", v.max_ampacity_violation},
                       {"max_svc_violation", v.max_svc_violation},
                       {"max_nsv_ratio", v.max_nsv_ratio},
                       {"max_zsv_ratio", v.max_zsv_ratio},
                       {"max_linearization_error", v.max_linearization_error}};
  } else if (!r.validation_error.empty()) {
    j["validation"] = {{"error", r.validation_error}};
  }

  json sol = json::array();
  for (const auto& d : r.solution.periods) {
    json a = json::array(), nv = json::object(), li = json::array(), cv = json::object(), ci = json::object();
    for (auto p : d.assignment) a.push_back(std::string(1, phase_name(p)));
    for (std::size_t i = 0; i < d.node_v.size(); ++i)
      nv[net.nodes[i].id] = {cjson(d.node_v[i][0]), cjson(d.node_v[i][1]), cjson(d.node_v[i][2])};
    for (const auto& l : d.line_i) li.push_back({cjson(l[0]), cjson(l[1]), cjson(l[2])});
    for (std::size_t c = 0; c < d.cust_v.size(); ++c) {
      cv[net.customers[c].id] = cjson(d.cust_v[c]);
      ci[net.customers[c].id] = cjson(d.cust_i[c]);
    }
    sol.push_back({{"t", d.t + 1},
                   {"assignment", a},
                   {"node_v", nv},
                   {"line_i", li},
                   {"cust_v", cv},
                   {"cust_i", ci},
                   {"svc_pair", {cjson(d.svc_pair[0]), cjson(d.svc_pair[1]), cjson(d.svc_pair[2])}},
                   {"kappa", d.kappa},
                   {"z_neg", d.z_neg},
                   {"z_zero", d.z_zero}});
  }
  j["solution"] = sol;
  return j.dump(1) + "\n";
}

DispatchSolution solution_from_json(const Network& net, const std::string& json_text) {
  DispatchSolution out;
  try {
    const json j = json::parse(json_text);
    for (const auto& p : j.at("solution")) {
      PeriodDispatch d;
      d.t = p.at("t").get<int>() - 1;
      if (d.t < 0 || d.t >= net.horizon.periods) throw NetworkError("report: period out of range");
      for (const auto& a : p.at("assignment")) d.assignment.push_back(parse_phase(a.get<std::string>()));
      if (d.assignment.size() != net.customers.size()) throw NetworkError("report: assignment does not match the network");
      for (const auto& nd : net.nodes) {
        const auto& v = p.at("node_v").at(nd.id);
        d.node_v.push_back({from_cjson(v.at(0)), from_cjson(v.at(1)), from_cjson(v.at(2))});
      }
      for (const auto& l : p.at("line_i")) d.line_i.push_back({from_cjson(l.at(0)), from_cjson(l.at(1)), from_cjson(l.at(2))});
      for (const auto& c : net.customers) {
        d.cust_v.push_back(from_cjson(p.at("cust_v").at(c.id)));
        d.cust_i.push_back(from_cjson(p.at("cust_i").at(c.id)));
      }
      for (int q = 0; q < 3; ++q) {
        d.svc_pair[q] = from_cjson(p.at("svc_pair").at(q));
        d.kappa[q] = p.at("kappa").at(q).get<int>();
        d.svc_phase[q] = d.svc_pair[q] - d.svc_pair[(q + 2) % 3];
      }
      d.z_neg = p.at("z_neg").get<double>();
      d.z_zero = p.at("z_zero").get<double>();
      out.objective += d.z_neg + d.z_zero;
      out.periods.push_back(std::move(d));
    }
  } catch (const json::exception& e) {
    throw NetworkError(std::string("report: ") + e.what());
  }
  return out;
}

namespace {

std::vector<SweepRow> sweep(const ScenarioConfig& cfg, const std::vector<double>& keys, bool by_no,
                            const std::string& file) {
  std::vector<SweepRow> rows;
  for (double key : keys) {
    ScenarioConfig c = cfg;
    if (by_no)
      c.n_o = static_cast<int>(key);
    else
      c.svc_cap_kva = key;
    if (!cfg.out_dir.empty()) c.out_dir = (fs::path(cfg.out_dir) / ((by_no ? "no_" : "svc_") + num(key))).string();
    SweepRow row;
    row.key = key;
    row.run = run_scenario(c);
    row.delta = rows.empty() ? 0.0 : row.run.objective - rows.back().run.objective;
    rows.push_back(std::move(row));
  }
  if (!cfg.out_dir.empty()) {
    std::ostringstream o;
    const int T = rows.empty() ? 0 : static_cast<int>(rows.front().run.periods.size());
    o << (by_no ? "n_o,subsets" : "capacity_kva") << ",status,F,delta_F";
    if (!by_no)
      for (int t = 1; t <= T; ++t) o << ",z_t" << t;
    o << '\n';
    for (const auto& row : rows) {
      o << num(row.key);
      if (by_no) {
        o << ',';
        for (std::size_t k = 0; k < row.run.subsets.size(); ++k)
          o << (k ? " " : "") << period_span(row.run.subsets[k].periods);
      }
      o << ',' << to_string(row.run.status) << ',' << num(row.run.objective) << ',' << num(row.delta);
      if (!by_no)
        for (int t = 0; t < T; ++t)
          o << ',' << (t < static_cast<int>(row.run.periods.size()) ? num(row.run.periods[t].z) : "");
      o << '\n';
    }
    fs::create_directories(cfg.out_dir);
    write_text(fs::path(cfg.out_dir) / file, o.str());
  }
  return rows;
}

}  // namespace

std::vector<SweepRow> sweep_no(const ScenarioConfig& cfg, const std::vector<int>& values) {
  return sweep(cfg, std::vector<double>(values.begin(), values.end()), true, "sweep_no.csv");
}

std::vector<SweepRow> sweep_svc(const ScenarioConfig& cfg, const std::vector<double>& capacities) {
  return sweep(cfg, capacities, false, "sweep_svc.csv");
}

}  // namespace opsd
