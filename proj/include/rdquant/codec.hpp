#pragma once

// Compression of real gradient vectors: scaled sign, sparse b-bit (top-K or
// thresholded) and thresholded ternary, with empirical rate/distortion.

#include <Eigen/Core>
#include <cstdint>
#include <variant>
#include <vector>

#include "rdquant/gauss.hpp"

namespace rdq {

using GradientVector = Eigen::VectorXd;

// Longest vector the codec and wire formats accept.
inline constexpr std::uint64_t kMaxGradientLength = std::uint64_t{1} << 26;

// Throws DomainError unless u is non-empty, finite and not too long.
void validate_gradient(const GradientVector& u);

struct ScaledSignPayload {
  float scale = 0.0f;
  std::vector<std::uint8_t> positive;  // 1 where u_i >= 0, one entry per component
};

// Retained values as sign + (b - 1)-bit magnitude on a uniform grid over
// [lo, hi], the magnitude range of the retained values. With b = 32 the
// code is the raw IEEE-754 single-precision bit pattern instead.
struct SparsePayload {
  int bits = 32;
  float lo = 0.0f;
  float hi = 0.0f;
  std::vector<std::uint64_t> indices;  // strictly increasing
  std::vector<std::uint32_t> codes;    // one per index
};

struct TernaryPayload {
  float scale = 0.0f;
  std::vector<std::int8_t> symbols;  // -1, 0, +1
};

struct EncodedGradient {
  std::uint64_t length = 0;
  std::variant<ScaledSignPayload, SparsePayload, TernaryPayload> payload;
};

EncodedGradient encode_scaled_sign(const GradientVector& u);

// Keeps the k largest magnitudes (lower index first on ties).
EncodedGradient encode_topk_largest(const GradientVector& u, std::uint64_t k, int bits);

// Keeps every component with |u_i| >= tau.
EncodedGradient encode_threshold_bbit(const GradientVector& u, double tau, int bits);

enum class TernaryScale {
  Average,    // mean |u_i| over the retained components
  Threshold,  // tau itself
};

EncodedGradient encode_ternary_threshold(const GradientVector& u, double tau,
                                         TernaryScale scale = TernaryScale::Average);

// Throws FormatError (offset 0) on structurally invalid encodings.
GradientVector decode(const EncodedGradient& enc);

// Checks the structural invariants decode relies on.
void validate_encoded(const EncodedGradient& enc);

// Value a b-bit sparse code reconstructs to.
double sparse_code_value(const SparsePayload& payload, std::uint32_t code);

// Exact number of payload bits before byte padding, as laid out on the wire.
std::uint64_t payload_bits(const EncodedGradient& enc);

struct EmpiricalRd {
  RdPoint point;              // entropy-coded rate, normalized distortion
  double raw_rate = 0.0;      // payload bits per component
  double squared_error = 0.0; // ||u - decode(enc)||^2 / d
};

// Distortion is normalized by the sample variance of u. The entropy-coded
// rate charges the symbol entropy (sign, support or trit frequencies) plus the
// value bits and the per-vector side information.
EmpiricalRd measure_empirical_rd(const GradientVector& u, const EncodedGradient& enc);

}  // namespace rdq
