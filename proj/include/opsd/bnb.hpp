#pragma once

#include "opsd/conesolver.hpp"
#include "opsd/formulation.hpp"

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <utility>
#include <vector>

namespace opsd {

struct BnbError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Partial assignment of the model's binaries (by position in model.binaries):
/// -1 free, 0 or 1 fixed.
struct BnbNode {
  std::vector<std::int8_t> fixings;
  double bound = -kInf;
  int depth = 0;
  long id = 0;
  long parent = -1;
};

enum class MipStatus { optimal, gap_limit, infeasible, time_limit };

[[nodiscard]] const char* to_string(MipStatus s);

struct MIPSolution {
  Eigen::VectorXd x;  // incumbent; empty when none was found
  double objective = kInf;
  double bound = -kInf;
  double gap = kInf;  // (upper - lower) / max(1, |upper|)
  long nodes_explored = 0;
  MipStatus status = MipStatus::infeasible;
  double seconds = 0.0;
};

struct BnbSettings {
  double gap_tol = 1e-6;
  double time_limit = 600.0;  // seconds
  long node_limit = 1000000;
  int workers = 1;            // nodes evaluated concurrently per batch; 1 is deterministic
  cone::SolverSettings cone;
  // One line per evaluated node when set:
  // node ID parent P depth D hash H relaxation R bound B action A incumbent U
  std::ostream* node_log = nullptr;
};

/// Binaries farther than this from {0, 1} count as fractional.
inline constexpr double kIntegralityTol = 1e-6;

/// Splits a node on the binary chosen by: branch priority, then closeness to
/// 0.5, then lowest variable index. Fixing a grouped binary to 1 fixes the rest
/// of its group to 0; fixing all but one member to 0 fixes the last to 1.
/// Returns (child fixed to 0, child fixed to 1). Throws BnbError when every
/// free binary is integral in x.
[[nodiscard]] std::pair<BnbNode, BnbNode> branch(const MISOCPModel& model, const BnbNode& node,
                                                 const Eigen::VectorXd& x);

/// Best-first branch and bound over the model's binaries using the conic relaxation.
[[nodiscard]] MIPSolution solve_misocp(const MISOCPModel& model, const BnbSettings& settings = {});

/// Solves the continuous problem with every binary fixed to the given 0/1 values
/// (by position in model.binaries).
[[nodiscard]] cone::ConeSolution solve_fixed(const MISOCPModel& model, const std::vector<int>& values,
                                             const cone::SolverSettings& settings = {});

}  // namespace opsd
