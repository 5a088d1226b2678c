#pragma once

#include "opsd/conesolver.hpp"
#include "opsd/linearize.hpp"
#include "opsd/netmodel.hpp"

#include <array>
#include <iosfwd>
#include <limits>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace opsd {

struct FormulationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct LinExpr {
  std::vector<std::pair<int, double>> terms;
  double constant = 0.0;

  LinExpr() = default;
  explicit LinExpr(double c) : constant(c) {}

  LinExpr& add(int var, double coef) {
    if (coef != 0.0) terms.emplace_back(var, coef);
    return *this;
  }
  LinExpr& add(const LinExpr& e, double scale = 1.0);
  [[nodiscard]] double eval(const Eigen::VectorXd& x) const;
};

enum class Sense { eq, le, ge };

struct LinearRow {
  std::vector<std::pair<int, double>> terms;
  Sense sense = Sense::eq;
  double rhs = 0.0;
  std::string tag;
};

/// sqrt(sum members^2) <= bound
struct SocCone {
  LinExpr bound;
  std::vector<LinExpr> members;
  std::string tag;
};

enum class VarKind { continuous, binary };

struct VarInfo {
  std::string name;
  double lower = -kInf;
  double upper = kInf;
  VarKind kind = VarKind::continuous;
};

class VarSpace {
 public:
  int add(std::string name, double lower = -kInf, double upper = kInf, VarKind kind = VarKind::continuous);
  [[nodiscard]] int find(const std::string& name) const;  // -1 when absent
  [[nodiscard]] int size() const { return static_cast<int>(vars_.size()); }
  [[nodiscard]] const VarInfo& operator[](int i) const { return vars_[i]; }
  [[nodiscard]] VarInfo& at(int i) { return vars_[i]; }

 private:
  std::vector<VarInfo> vars_;
  std::unordered_map<std::string, int> index_;
};

struct CVar {
  int re = -1;
  int im = -1;
};

struct PeriodLayout {
  int t = 0;
  std::vector<std::array<CVar, 3>> node_v;     // per node and phase
  std::vector<std::array<CVar, 3>> line_i;     // per line and phase
  std::vector<CVar> cust_v;                    // terminal voltage per customer
  std::vector<CVar> cust_i;                    // demand current per customer
  std::array<CVar, 3> svc_pair;                // ab, bc, ca; -1 without SVC
  std::array<int, 3> svc_mag{-1, -1, -1};
  std::array<int, 3> kappa{-1, -1, -1};
  std::array<std::array<LinExpr, 2>, 3> svc_phase;  // SVC load current per phase (re, im)
  int z_neg = -1;
  int z_zero = -1;
};

struct ModelLayout {
  std::vector<int> periods;
  std::vector<std::array<int, 3>> alpha;  // per customer; -1 when its phase is fixed
  std::vector<PeriodLayout> per_period;
};

/// Exactly one of the three binaries is 1.
struct BinaryGroup {
  std::array<int, 3> vars{};
};

/// Heuristic rounding: the binary goes to 1 when score(x) > 0.
struct RoundingRule {
  int var = -1;
  LinExpr score;
};

struct MISOCPModel {
  VarSpace vars;
  std::vector<LinearRow> rows;
  std::vector<SocCone> cones;
  LinExpr objective;
  std::vector<int> binaries;
  std::vector<int> branch_priority;  // parallel to binaries; larger branches first
  std::vector<BinaryGroup> groups;
  std::vector<RoundingRule> rounding;
  ModelLayout layout;

  void add_row(LinearRow row) { rows.push_back(std::move(row)); }
  void add_row(const LinExpr& lhs, Sense sense, double rhs, const std::string& tag);
  [[nodiscard]] int num_binaries() const { return static_cast<int>(binaries.size()); }
  [[nodiscard]] int count_rows(const std::string& tag) const;
  /// Throws FormulationError on an out-of-range index, an empty cone or a negative objective term.
  void check() const;
};

struct StrategyFlags {
  bool use_svc = false;
  bool use_psd = false;

  /// STR-1 neither, STR-2 SVC only, STR-3 PSD only, STR-4 both.
  [[nodiscard]] static StrategyFlags from_number(int strategy);
};

using PhaseFits = std::array<InvConjFit, 3>;

/// Center angles of the linearization regions (0, -120, +120 degrees).
[[nodiscard]] double phase_center(Phase p);

/// Per-phase fits over the network's voltage range with the given half width.
[[nodiscard]] PhaseFits network_fits(const Network& net, double half_width_rad, int grid = 15);

/// One window subproblem over the periods of subset k.
[[nodiscard]] MISOCPModel build_subproblem(const Network& net, int k, StrategyFlags strategy, const PhaseFits& fits);

/// Same, over an explicit list of periods.
[[nodiscard]] MISOCPModel build_window(const Network& net, const std::vector<int>& periods, StrategyFlags strategy,
                                       const PhaseFits& fits);

/// Families added per period by build_window. add_svc must run before
/// add_feeder, which must run before add_limits and add_objective.
void declare_phase_variables(MISOCPModel& model, const Network& net, StrategyFlags strategy);
void add_svc(MISOCPModel& model, const Network& net, int t);
void add_feeder(MISOCPModel& model, const Network& net, int t, const PhaseFits& fits);
void add_limits(MISOCPModel& model, const Network& net, int t);
void add_objective(MISOCPModel& model, const Network& net, int t);

/// Phase-to-phase angles of the root voltage (ab, bc, ca) at period t.
[[nodiscard]] std::array<double, 3> root_pair_angles(const Network& net, int t);

/// Conic standard form. Variable i of the model is variable i of the result;
/// binaries take bounds [0, 1] unless their VarInfo bounds are tighter.
[[nodiscard]] cone::StandardConeProblem to_standard(const MISOCPModel& model);

struct PeriodDispatch {
  int t = 0;
  std::vector<Phase> assignment;                 // per customer
  std::vector<std::array<Complex, 3>> node_v;    // per node
  std::vector<std::array<Complex, 3>> line_i;    // per line
  std::vector<Complex> cust_v;
  std::vector<Complex> cust_i;
  std::array<Complex, 3> svc_pair{};             // ab, bc, ca
  std::array<int, 3> kappa{};
  std::array<Complex, 3> svc_phase{};            // SVC load current per phase
  double z_neg = 0.0;
  double z_zero = 0.0;
};

struct DispatchSolution {
  std::vector<PeriodDispatch> periods;
  double objective = 0.0;
};

/// Decodes a primal vector. Throws FormulationError when a binary is farther
/// than 1e-6 from {0, 1} or a customer is not on exactly one phase.
[[nodiscard]] DispatchSolution extract_solution(const MISOCPModel& model, const Network& net, const Eigen::VectorXd& x);

/// Text dump ("opsd-model 1") of variables, rows, cones and objective.
void write_model(std::ostream& out, const MISOCPModel& model);

}  // namespace opsd
