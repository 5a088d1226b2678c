#pragma once

#include <Eigen/Dense>

#include <array>
#include <complex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace opsd {

using Complex = std::complex<double>;
using Matrix3c = Eigen::Matrix3cd;

/// Angle in (-pi, pi].
[[nodiscard]] double angle(Complex v);

enum class Phase { a = 0, b = 1, c = 2 };

[[nodiscard]] char phase_name(Phase p);
[[nodiscard]] Phase parse_phase(const std::string& s);

struct Node {
  std::string id;
  std::array<double, 3> vm_min{};
  std::array<double, 3> vm_max{};
  bool is_root = false;
  bool is_secondary = false;
};

struct Line {
  std::string from;
  std::string to;
  Matrix3c z = Matrix3c::Zero();
  double ampacity = 0.0;  // per-phase limit; 0 when absent
};

enum class CustomerKind { fixed, adjustable };

struct Customer {
  std::string id;
  std::string node;
  Complex service_z;
  CustomerKind kind = CustomerKind::fixed;
  Phase initial_phase = Phase::a;
  std::vector<Complex> demand;  // P + jQ per period, net of generation
  double vm_min = 0.0;
  double vm_max = 0.0;

  [[nodiscard]] bool adjustable() const { return kind == CustomerKind::adjustable; }
};

struct SvcSpec {
  std::string node;
  double s_cap = 0.0;
  double s_ind = 0.0;
  double v_rated = 0.0;  // phase-to-phase
};

struct Horizon {
  int periods = 0;
  int n_o = 1;
  std::vector<std::vector<int>> subsets;            // 0-based period indices
  std::vector<std::array<Complex, 3>> root_voltage;  // per period, per phase
};

/// Splits periods 0..T-1 into n_o contiguous subsets whose sizes differ by at
/// most one, longer subsets first (T = 24, n_o = 5 gives 5,5,5,5,4).
[[nodiscard]] std::vector<std::vector<int>> partition_periods(int periods, int n_o);

struct Base {
  double kva = 0.0;    // per-phase power base
  double volts = 0.0;  // phase-to-neutral voltage base

  [[nodiscard]] double va() const { return kva * 1000.0; }
  [[nodiscard]] double amps() const { return va() / volts; }
  [[nodiscard]] double ohms() const { return volts * volts / va(); }
};

enum class Units { si, per_unit };

struct Network {
  Units units = Units::per_unit;
  Base base;
  std::vector<Node> nodes;
  std::vector<Line> lines;
  std::vector<Customer> customers;
  std::optional<SvcSpec> svc;
  Horizon horizon;
  double nu_neg = 0.02;
  double nu_zero = 0.045;
  double nominal_vm = 1.0;

  [[nodiscard]] int node_index(const std::string& id) const;  // -1 when absent
  [[nodiscard]] int root() const;
  [[nodiscard]] int secondary() const;
  [[nodiscard]] int num_adjustable() const;
};

/// Radial structure rooted at the root node.
struct Topology {
  std::vector<int> order;                     // nodes, parents before children
  std::vector<int> parent_line;               // per node, line into it (-1 at root)
  std::vector<int> parent_node;               // per node (-1 at root)
  std::vector<std::vector<int>> child_lines;  // per node
  std::vector<std::vector<int>> customers;    // per node
  int dt_line = -1;                           // root -> secondary
  std::vector<std::vector<int>> path_lines;   // per node, lines from root to it
};

/// Throws NetworkError if the lines do not form a tree rooted at the root node.
[[nodiscard]] Topology topology(const Network& net);

struct NetworkError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Finding {
  std::string element;  // offending element, e.g. "customer 4" or "horizon partition"
  std::string message;
};

struct ValidationReport {
  std::vector<Finding> findings;
  [[nodiscard]] bool ok() const { return findings.empty(); }
  [[nodiscard]] std::string summary() const;
};

[[nodiscard]] ValidationReport validate(const Network& net);

/// Converts an SI network to per-unit on the given bases. Throws on non-positive bases.
[[nodiscard]] Network to_per_unit(const Network& si, double base_kva, double base_v);
[[nodiscard]] Network from_per_unit(const Network& pu);

/// Parses the JSON network document (SI units), converts to per-unit and
/// validates. Throws NetworkError naming the offending element.
[[nodiscard]] Network parse_network(const std::string& json_text);
[[nodiscard]] Network load_network(const std::string& path);

/// Serializes a network back to the JSON document format (SI units).
[[nodiscard]] std::string to_json(const Network& net);

}  // namespace opsd
