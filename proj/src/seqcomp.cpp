#include "opsd/seqcomp.hpp"

#include <cmath>

namespace opsd {

namespace {
const double kSqrt3 = std::sqrt(3.0);
// rotation operator a = 1 angle 120 deg
const Complex kA{-0.5, 0.5 * kSqrt3};
const Complex kA2{-0.5, -0.5 * kSqrt3};
}  // namespace

std::array<Complex, 3> neg_seq_coefficients() {
  return {Complex(2.0 / 6.0, 0.0), Complex(-1.0 / 6.0, -kSqrt3 / 6.0), Complex(-1.0 / 6.0, kSqrt3 / 6.0)};
}

std::array<Complex, 3> zero_seq_coefficients() {
  return {Complex(1.0 / 3.0), Complex(1.0 / 3.0), Complex(1.0 / 3.0)};
}

Complex neg_seq(const PhaseTriple& x) {
  return (2.0 * x[0] - Complex(1.0, kSqrt3) * x[1] - Complex(1.0, -kSqrt3) * x[2]) / 6.0;
}

Complex zero_seq(const PhaseTriple& x) { return (x[0] + x[1] + x[2]) / 3.0; }

SequenceTriple decompose(const PhaseTriple& x) {
  SequenceTriple s;
  s.zero = zero_seq(x);
  s.neg = neg_seq(x);
  s.pos = x[0] - s.zero - s.neg;
  return s;
}

PhaseTriple reconstruct(const SequenceTriple& s) {
  return {s.zero + s.pos + s.neg, s.zero + kA2 * s.pos + kA * s.neg, s.zero + kA * s.pos + kA2 * s.neg};
}

}  // namespace opsd
