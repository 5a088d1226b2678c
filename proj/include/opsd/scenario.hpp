#pragma once

#include "opsd/bnb.hpp"
#include "opsd/formulation.hpp"
#include "opsd/netmodel.hpp"
#include "opsd/pforacle.hpp"

#include <optional>
#include <string>
#include <vector>

namespace opsd {

struct ScenarioConfig {
  std::string network_path;
  int strategy = 4;
  int n_o = 0;                        // 0 keeps the document's value
  std::optional<double> svc_cap_kva;  // sets both SVC ratings
  double delta_deg = 3.0;             // half width of the voltage-angle regions
  double gap_tol = 1e-6;
  double time_limit = 600.0;  // seconds per subproblem
  double cone_tol = 1e-8;
  int workers = 1;
  std::string out_dir;        // empty: no files
  bool dump_models = false;   // model_K.txt per subproblem
  bool node_logs = false;     // nodes_K.log per subproblem
};

/// Worker count from OPSD_WORKERS (default 1). Throws std::invalid_argument on a bad value.
[[nodiscard]] int workers_from_env();

/// Loads the network and applies the overrides of the config.
[[nodiscard]] Network prepare_network(const ScenarioConfig& cfg);

struct SubsetReport {
  int k = 0;
  std::vector<int> periods;
  MipStatus status = MipStatus::infeasible;
  double objective = kInf;
  double bound = -kInf;
  double gap = kInf;
  long nodes = 0;
  double seconds = 0.0;
  std::vector<Phase> assignment;  // per customer; empty when unsolved
};

struct PeriodReport {
  int t = 0;
  int k = 0;
  double z_neg = 0.0;
  double z_zero = 0.0;
  double z = 0.0;
  std::array<Complex, 3> dt_current{};  // model currents through the DT
  double nsv_ratio = 0.0;               // exact, max over non-root nodes
  double zsv_ratio = 0.0;
};

enum class RunStatus { ok, infeasible, limit };

struct RunReport {
  std::string network;
  int strategy = 0;
  int n_o = 1;
  double delta_deg = 3.0;
  RunStatus status = RunStatus::ok;
  std::string message;
  double objective = 0.0;  // sum of z over the periods
  std::vector<SubsetReport> subsets;
  std::vector<PeriodReport> periods;
  DispatchSolution solution;  // all periods in order; empty unless every subset is solved
  std::optional<ValidationMetrics> validation;
  std::string validation_error;
  double seconds = 0.0;
};

/// Builds and solves every subproblem (subsets in parallel over cfg.workers),
/// validates the concatenated dispatch with the exact power flow and writes
/// report.json, periods.csv, assignments.csv and timings.csv to cfg.out_dir.
/// Throws NetworkError / FormulationError on bad input.
[[nodiscard]] RunReport run_scenario(const ScenarioConfig& cfg);

/// Same on an already prepared network.
[[nodiscard]] RunReport run_network(const Network& net, const ScenarioConfig& cfg);

/// 0 solved, 2 infeasible, 3 time or node limit.
[[nodiscard]] int exit_code(const RunReport& r);

struct SweepRow {
  double key = 0.0;  // N_o or capacity (kVA)
  RunReport run;
  double delta = 0.0;  // change of F from the previous row
};

/// One run per N_o; writes sweep_no.csv when cfg.out_dir is set.
[[nodiscard]] std::vector<SweepRow> sweep_no(const ScenarioConfig& cfg, const std::vector<int>& values);

/// One run per SVC capacity (kVA); writes sweep_svc.csv when cfg.out_dir is set.
[[nodiscard]] std::vector<SweepRow> sweep_svc(const ScenarioConfig& cfg, const std::vector<double>& capacities);

/// JSON report (deterministic: no timings).
[[nodiscard]] std::string report_json(const Network& net, const RunReport& r);

/// Reads the dispatch back from a report document.
[[nodiscard]] DispatchSolution solution_from_json(const Network& net, const std::string& json_text);

[[nodiscard]] const char* to_string(RunStatus s);

}  // namespace opsd
