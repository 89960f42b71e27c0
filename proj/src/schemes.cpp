#include "rdquant/schemes.hpp"

#include <cmath>

#include "rdquant/error.hpp"

namespace rdq {

SchemeId SchemeId::topk_bbit(int b) {
  if (b < 1) throw DomainError("SchemeId: TopKBbit needs b >= 1");
  return {Kind::TopKBbit, b};
}

std::string SchemeId::name() const {
  switch (kind) {
    case Kind::ScaledSign:
      return "scaled-sign";
    case Kind::AsymmetricBinary:
      return "asym-binary";
    case Kind::TopKBbit:
      return "topk-bbit";
    case Kind::TopKTernary:
      return "topk-ternary";
  }
  return "unknown";
}

RdPoint scaled_sign_point() { return {1.0, kScaledSignDistortion}; }

double asym_h(double beta) {
  const double cdf = std_cdf(beta);
  if (cdf == 0.0) return 0.0;
  const double ratio = std_pdf(beta) / cdf;
  const double h = (1.0 - beta * ratio - ratio * ratio) * cdf;
  return h > 0.0 ? h : 0.0;
}

RdPoint asym_binary_point(double beta) {
  return {binary_entropy(std_cdf(beta)), asym_h(beta) + asym_h(-beta)};
}

std::pair<double, double> asym_binary_rate_for_distortion(double distortion_normalized) {
  const double target = distortion_normalized;
  if (!(target >= kScaledSignDistortion - 1e-12 && target < 1.0)) {
    throw DomainError("asym_binary_rate_for_distortion: target outside [(pi-2)/pi, 1)");
  }
  auto distortion = [](double beta) { return asym_h(beta) + asym_h(-beta); };

  // Distortion is increasing on beta > 0, so bisect until the bracket stops
  // shrinking in double precision.
  double lo = 0.0;
  double hi = 8.0;
  if (distortion(lo) >= target) return {0.0, 1.0};
  while (true) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (distortion(mid) < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double beta = std::abs(distortion(lo) - target) <= std::abs(distortion(hi) - target) ? lo : hi;
  return {beta, binary_entropy(std_cdf(beta))};
}

RdPoint topk_bbit_point(double beta, int bits) {
  if (!(beta >= 0.0)) throw DomainError("topk_bbit_point: beta must be >= 0");
  if (bits < 1) throw DomainError("topk_bbit_point: b must be >= 1");
  if (std::isinf(beta)) return {0.0, 1.0};
  const double kept = 2.0 * std_ccdf(beta);
  // 2 Phi(beta) - 1 through erf keeps precision near beta = 0.
  const double inner = std::erf(beta / std::sqrt(2.0));
  const double distortion = inner - 2.0 * beta * std_pdf(beta);
  return {binary_entropy(kept) + kept * bits, distortion > 0.0 ? distortion : 0.0};
}

double topk_bbit_model_floor(int bits) {
  if (bits < 1) throw DomainError("topk_bbit_model_floor: b must be >= 1");
  return 2.0 * std::ldexp(1.0, -2 * bits);
}

bool within_model(const SchemeId& scheme, const RdPoint& point) {
  return scheme.kind != SchemeId::Kind::TopKBbit || point.distortion >= topk_bbit_model_floor(scheme.bits);
}

RdPoint topk_ternary_point(double beta) {
  if (!(beta >= 0.0)) throw DomainError("topk_ternary_point: beta must be >= 0");
  if (std::isinf(beta)) return {0.0, 1.0};
  const double p1 = std_ccdf(beta);
  const double p0 = std::erf(beta / std::sqrt(2.0));
  const double pdf = std_pdf(beta);

  // Outer cells: 2 (1 + beta phi/p1 - (phi/p1)^2) p1, written without the
  // division by p1 outside the squared term.
  const double outer = p1 > 0.0 ? 2.0 * (p1 + beta * pdf - pdf * pdf / p1) : 0.0;
  // Middle cell: (1 - 2 beta phi / p0) p0.
  const double middle = p0 > 0.0 ? p0 - 2.0 * beta * pdf : 0.0;

  double rate = 0.0;
  if (p1 > 0.0) rate -= 2.0 * p1 * std::log2(p1);
  if (p0 > 0.0) rate -= p0 * std::log2(p0);
  const double distortion = outer + middle;
  return {rate, distortion > 0.0 ? distortion : 0.0};
}

RdPoint scheme_point(const SchemeId& scheme, double beta) {
  switch (scheme.kind) {
    case SchemeId::Kind::ScaledSign:
      return scaled_sign_point();
    case SchemeId::Kind::AsymmetricBinary:
      return asym_binary_point(beta);
    case SchemeId::Kind::TopKBbit:
      return topk_bbit_point(beta, scheme.bits);
    case SchemeId::Kind::TopKTernary:
      return topk_ternary_point(beta);
  }
  throw DomainError("scheme_point: unknown scheme");
}

std::vector<SchemePoint> sweep_scheme(const SchemeId& scheme, std::span<const double> beta_grid) {
  if (beta_grid.empty()) throw DomainError("sweep_scheme: empty grid");
  for (std::size_t i = 0; i < beta_grid.size(); ++i) {
    if (!(beta_grid[i] >= 0.0) || (i > 0 && beta_grid[i] < beta_grid[i - 1])) {
      throw DomainError("sweep_scheme: grid must be non-negative and ascending");
    }
  }
  if (scheme.kind == SchemeId::Kind::ScaledSign) {
    return {SchemePoint{0.0, scaled_sign_point()}};
  }
  std::vector<SchemePoint> out;
  out.reserve(beta_grid.size());
  for (double beta : beta_grid) out.push_back({beta, scheme_point(scheme, beta)});
  return out;
}

std::vector<double> geometric_grid(double lo, double hi, int count) {
  if (!(lo > 0.0 && hi >= lo) || count < 1) {
    throw DomainError("geometric_grid: need 0 < lo <= hi and count >= 1");
  }
  std::vector<double> grid(static_cast<std::size_t>(count));
  if (count == 1) {
    grid[0] = lo;
    return grid;
  }
  const double ratio = std::log(hi / lo) / (count - 1);
  for (int i = 0; i < count; ++i) grid[static_cast<std::size_t>(i)] = lo * std::exp(ratio * i);
  grid.back() = hi;
  return grid;
}

std::vector<double> default_beta_grid() { return geometric_grid(1e-3, 6.0, 400); }

}  // namespace rdq
