#pragma once

#include "opsd/conesolver.hpp"
#include "opsd/formulation.hpp"
#include "opsd/netmodel.hpp"
#include "opsd/seqcomp.hpp"

#include <array>
#include <optional>
#include <stdexcept>
#include <vector>

namespace opsd {

struct PFState {
  int t = 0;
  std::vector<std::array<Complex, 3>> node_v;  // per node
  std::vector<std::array<Complex, 3>> line_i;  // per line, from -> to
  std::vector<Complex> cust_v;                 // terminal voltage
  std::vector<Complex> cust_i;                 // demand current
  std::array<Complex, 3> svc_phase{};          // SVC load current per phase at the secondary
  SequenceTriple dt_seq;                       // DT current components
  int sweeps = 0;
  double last_change = 0.0;  // max voltage update of the final sweep
  std::vector<double> changes;  // per sweep
};

struct PFError : std::runtime_error {
  PFError(const std::string& what, std::optional<PFState> last = std::nullopt)
      : std::runtime_error(what), last_iterate(std::move(last)) {}
  std::optional<PFState> last_iterate;
};

struct PFSettings {
  double tolerance = 1e-10;  // max voltage change between sweeps, pu
  int max_sweeps = 200;
  bool screen = true;  // reject demands beyond the loadability estimate before sweeping
};

/// Constant-power three-phase sweep with every customer on assignment[j] and
/// the SVC drawing the given phase-to-phase currents (ab, bc, ca) at the secondary.
[[nodiscard]] PFState solve_power_flow(const Network& net, const std::vector<Phase>& assignment,
                                       const std::array<Complex, 3>& svc_pair, int t, const PFSettings& settings = {});

/// Throws PFError naming the first customer whose apparent power exceeds
/// 0.25 vm_min^2 / |Z_path| on its assigned phase.
void screen_demands(const Network& net, const std::vector<Phase>& assignment, int t);

/// Worst-case limit slacks of an exact state (all nonnegative, 0 when satisfied).
struct LimitViolations {
  double vm_upper = 0.0;
  double vm_lower = 0.0;
  double ampacity = 0.0;
  double nsv_ratio = 0.0;  // max |V-| / (nu- nominal) over non-root nodes
  double zsv_ratio = 0.0;
  [[nodiscard]] bool within(double tol) const {
    return vm_upper <= tol && vm_lower <= tol && ampacity <= tol && nsv_ratio <= 1.0 + tol && zsv_ratio <= 1.0 + tol;
  }
};

[[nodiscard]] LimitViolations check_limits(const Network& net, const PFState& s);

struct ValidationMetrics {
  double objective_exact = 0.0;  // sum over periods of |I-| + |I0| at the DT
  double objective_model = 0.0;
  double objective_deviation = 0.0;  // |exact - model| / max(exact, model, 1e-6)
  double max_vm_violation = 0.0;
  double max_lower_vm_violation = 0.0;
  double max_ampacity_violation = 0.0;
  double max_svc_violation = 0.0;  // capacity overrun or off-axis component of an SVC current
  double max_nsv_ratio = 0.0;
  double max_zsv_ratio = 0.0;
  double max_linearization_error = 0.0;  // max |V_model - V_exact| over nodes and terminals
  std::vector<PFState> states;
};

/// Re-solves every period exactly with the solution's assignment and SVC currents.
/// Power-flow failures are rethrown with the period named.
[[nodiscard]] ValidationMetrics validate_solution(const Network& net, const DispatchSolution& sol,
                                                  const PFSettings& settings = {});

/// Signed SVC magnitudes on a uniform grid of n points over [-I_cap, I_ind]
/// (n = 1 gives {0}); positive is inductive.
[[nodiscard]] std::vector<double> svc_grid(const Network& net, int n);

/// Phase-to-phase SVC currents for signed magnitudes (ab, bc, ca) at period t.
[[nodiscard]] std::array<Complex, 3> svc_currents(const Network& net, int t, const std::array<double, 3>& signed_mag);

struct EnumerationResult {
  bool feasible = false;
  std::vector<Phase> assignment;                    // per customer
  std::vector<std::array<Complex, 3>> svc_pair;     // per period of the subset
  double objective = kInf;
  long evaluated = 0;  // power-flow solves
};

inline constexpr int kMaxEnumerated = 6;

/// Exhaustive search over the adjustable customers' phases (lexicographic, a < b < c,
/// first customer most significant) and, with the SVC, the grid per pair and period.
/// Exact power flow; combinations that violate a limit by more than 1e-9 or fail to
/// converge are skipped. The first minimizer in enumeration order wins ties within
/// 1e-12 relative. workers > 1 evaluates assignments with OpenMP; the result is
/// identical to the serial one.
[[nodiscard]] EnumerationResult enumerate_assignments(const Network& net, int k, StrategyFlags strategy,
                                                      int grid = 5, int workers = 1);

struct FixedEnumerationResult {
  bool feasible = false;
  std::vector<int> values;  // per model binary
  double objective = kInf;
  long evaluated = 0;
};

/// Solves the continuous problem for every binary pattern consistent with the
/// model's groups and keeps the best. Throws when there are more than 3^6 patterns.
[[nodiscard]] FixedEnumerationResult enumerate_fixed(const MISOCPModel& model, int workers = 1,
                                                     const cone::SolverSettings& settings = {});

}  // namespace opsd
