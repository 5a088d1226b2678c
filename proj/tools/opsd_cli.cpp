// Command-line driver: run, sweep-no, sweep-svc, validate.

#include "opsd/scenario.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

constexpr int kInputError = 4;

void add_common(CLI::App* cmd, opsd::ScenarioConfig& cfg) {
  cmd->add_option("--network", cfg.network_path, "Network JSON document")->required()->check(CLI::ExistingFile);
  cmd->add_option("--strategy", cfg.strategy, "1 none, 2 SVC, 3 PSD, 4 PSD + SVC")
      ->capture_default_str()
      ->check(CLI::Range(1, 4));
  cmd->add_option("--delta-deg", cfg.delta_deg, "Half width of the voltage-angle regions in degrees")
      ->capture_default_str();
  cmd->add_option("--gap", cfg.gap_tol, "Relative optimality gap")->capture_default_str();
  cmd->add_option("--time-limit", cfg.time_limit, "Seconds per subproblem")->capture_default_str();
  cmd->add_option("--out", cfg.out_dir, "Output directory for reports")->required();
  cmd->add_flag("--dump-model", cfg.dump_models, "Write model_K.txt per subproblem");
  cmd->add_flag("--node-log", cfg.node_logs, "Write nodes_K.log per subproblem");
}

void print_run(const opsd::RunReport& r) {
  std::printf("status %s  F %.9g  subproblems %zu  seconds %.3f\n", opsd::to_string(r.status), r.objective,
              r.subsets.size(), r.seconds);
  if (!r.message.empty()) std::printf("%s\n", r.message.c_str());
  if (r.validation)
    std::printf("exact F %.9g  deviation %.3g  max |V_lin - V_exact| %.3g pu\n", r.validation->objective_exact,
                r.validation->objective_deviation, r.validation->max_linearization_error);
  if (!r.validation_error.empty()) std::printf("validation failed: %s\n", r.validation_error.c_str());
}

std::string read_all(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw opsd::NetworkError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Phase-switching and SVC dispatch for unbalanced LV feeders.\n"
               "Worker threads come from OPSD_WORKERS (default 1).\n"
               "Exit codes: 0 solved, 2 infeasible, 3 time or node limit, 4 input error."};
  app.require_subcommand(1);

  opsd::ScenarioConfig cfg;
  std::vector<int> no_values{1, 2, 3, 4, 6};
  std::vector<double> capacities{0.0, 3.0, 6.0, 9.0, 12.0, 15.0};
  std::string report_path;
  int no = 0;
  double svc_cap = -1.0;

  auto* run = app.add_subcommand("run", "Solve every subproblem and write the reports");
  add_common(run, cfg);
  run->add_option("--no", no, "Allowed PSD adjustments N_o (0 keeps the document's value)")->capture_default_str();
  run->add_option("--svc-cap", svc_cap, "SVC capacity in kVA for both ratings (default: document)");

  auto* sno = app.add_subcommand("sweep-no", "One run per N_o value");
  add_common(sno, cfg);
  sno->add_option("--values", no_values, "N_o values")->delimiter(',')->capture_default_str();

  auto* ssvc = app.add_subcommand("sweep-svc", "One run per SVC capacity");
  add_common(ssvc, cfg);
  ssvc->add_option("--no", no, "Allowed PSD adjustments N_o (0 keeps the document's value)")->capture_default_str();
  ssvc->add_option("--capacities", capacities, "Capacities in kVA")->delimiter(',')->capture_default_str();

  auto* val = app.add_subcommand("validate", "Check a network document, and optionally a report against it");
  val->add_option("--network", cfg.network_path, "Network JSON document")->required()->check(CLI::ExistingFile);
  val->add_option("--report", report_path, "report.json from a previous run")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kInputError;
  }

  try {
    cfg.workers = opsd::workers_from_env();
    if (*run) {
      cfg.n_o = no;
      if (svc_cap >= 0.0) cfg.svc_cap_kva = svc_cap;
      const auto r = opsd::run_scenario(cfg);
      print_run(r);
      return opsd::exit_code(r);
    }
    if (*sno || *ssvc) {
      if (*ssvc) cfg.n_o = no;
      const auto rows = *sno ? opsd::sweep_no(cfg, no_values) : opsd::sweep_svc(cfg, capacities);
      int rc = 0;
      for (const auto& row : rows) {
        std::printf("%s %-8g status %-10s F %.9g  dF %.3g\n", *sno ? "n_o" : "kVA", row.key,
                    opsd::to_string(row.run.status), row.run.objective, row.delta);
        if (rc == 0) rc = opsd::exit_code(row.run);
      }
      return rc;
    }
    // validate
    opsd::Network net;
    try {
      net = opsd::parse_network(read_all(cfg.network_path));
    } catch (const opsd::NetworkError& e) {
      std::fprintf(stderr, "invalid network: %s\n", e.what());
      return kInputError;
    }
    std::printf("network ok: %zu nodes, %zu lines, %zu customers (%d adjustable), %d periods\n", net.nodes.size(),
                net.lines.size(), net.customers.size(), net.num_adjustable(), net.horizon.periods);
    if (report_path.empty()) return 0;
    const auto sol = opsd::solution_from_json(net, read_all(report_path));
    const auto m = opsd::validate_solution(net, sol);
    std::printf("objective model %.9g exact %.9g deviation %.3g\n", m.objective_model, m.objective_exact,
                m.objective_deviation);
    std::printf("max violation: voltage %.3g (lower %.3g) ampacity %.3g svc %.3g\n", m.max_vm_violation,
                m.max_lower_vm_violation, m.max_ampacity_violation, m.max_svc_violation);
    std::printf("max ratio: nsv %.4g zsv %.4g   max |V_lin - V_exact| %.3g pu\n", m.max_nsv_ratio, m.max_zsv_ratio,
                m.max_linearization_error);
    return 0;
  } catch (const opsd::NetworkError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kInputError;
  } catch (const opsd::FormulationError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kInputError;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kInputError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
