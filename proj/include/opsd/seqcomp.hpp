#pragma once

#include "opsd/netmodel.hpp"

#include <array>

namespace opsd {

using PhaseTriple = std::array<Complex, 3>;

struct SequenceTriple {
  Complex zero;
  Complex pos;
  Complex neg;
};

// Phase-a referenced components. neg = (2a - (1 + j sqrt3) b - (1 - j sqrt3) c) / 6,
// zero = (a + b + c) / 3.
[[nodiscard]] Complex neg_seq(const PhaseTriple& x);
[[nodiscard]] Complex zero_seq(const PhaseTriple& x);
[[nodiscard]] SequenceTriple decompose(const PhaseTriple& x);
[[nodiscard]] PhaseTriple reconstruct(const SequenceTriple& s);

/// Row coefficients (on a, b, c) of the two linear maps above.
[[nodiscard]] std::array<Complex, 3> neg_seq_coefficients();
[[nodiscard]] std::array<Complex, 3> zero_seq_coefficients();

}  // namespace opsd
