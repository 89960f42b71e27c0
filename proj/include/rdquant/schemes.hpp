#pragma once

// Closed-form rate-distortion points of the sign, asymmetric binary,
// sparse b-bit and sparse ternary quantizers for a N(0, sigma^2) source.

#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rdquant/gauss.hpp"

namespace rdq {

struct SchemeId {
  enum class Kind { ScaledSign, AsymmetricBinary, TopKBbit, TopKTernary };

  Kind kind = Kind::ScaledSign;
  int bits = 0;  // value precision, only meaningful for TopKBbit

  static SchemeId scaled_sign() { return {Kind::ScaledSign, 0}; }
  static SchemeId asymmetric_binary() { return {Kind::AsymmetricBinary, 0}; }
  static SchemeId topk_bbit(int b);
  static SchemeId topk_ternary() { return {Kind::TopKTernary, 0}; }

  // "scaled-sign", "asym-binary", "topk-bbit", "topk-ternary"
  std::string name() const;
};

struct SchemePoint {
  double beta = 0.0;  // boundary, in units of sigma
  RdPoint point;
};

RdPoint scaled_sign_point();

// Phi(beta) times the variance of N(0,1) truncated from above at beta.
double asym_h(double beta);

RdPoint asym_binary_point(double beta);

// Inverts the asymmetric binary distortion on beta in [0, 8]. Returns
// (beta, rate). Throws DomainError for targets outside [(pi-2)/pi, 1).
std::pair<double, double> asym_binary_rate_for_distortion(double distortion_normalized);

// Values beyond +-beta are kept with b-bit precision (assumed exact), the rest
// are zeroed.
RdPoint topk_bbit_point(double beta, int bits);

// Below 2 * 4^-b the exact-value assumption no longer holds: a b-bit code
// cannot reach such distortions, and the idealized points cross the Shannon
// bound.
double topk_bbit_model_floor(int bits);

// False for idealized top-K points under topk_bbit_model_floor.
bool within_model(const SchemeId& scheme, const RdPoint& point);

// Three cells (-inf,-beta), [-beta,beta], (beta,inf) with centroid
// reconstruction on the outer cells and zero in the middle.
RdPoint topk_ternary_point(double beta);

RdPoint scheme_point(const SchemeId& scheme, double beta);

// One point per grid value (a single point for ScaledSign).
std::vector<SchemePoint> sweep_scheme(const SchemeId& scheme, std::span<const double> beta_grid);

// count values geometrically spaced over [lo, hi].
std::vector<double> geometric_grid(double lo, double hi, int count);

// 400 geometric values in [1e-3, 6].
std::vector<double> default_beta_grid();

}  // namespace rdq
