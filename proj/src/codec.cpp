#include "rdquant/codec.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <string>

#include "rdquant/error.hpp"

namespace rdq {

namespace {

void check_bits(int bits) {
  if (bits < 2 || bits > 32) throw DomainError("b must lie in [2, 32]");
}

std::uint32_t magnitude_levels(int bits) { return std::uint32_t{1} << (bits - 1); }

double grid_step(const SparsePayload& p) {
  const std::uint32_t levels = magnitude_levels(p.bits);
  return (static_cast<double>(p.hi) - static_cast<double>(p.lo)) / static_cast<double>(levels - 1);
}

// Sparse payload for the retained (ascending) indices of u.
SparsePayload make_sparse(const GradientVector& u, std::vector<std::uint64_t> indices, int bits) {
  SparsePayload out;
  out.bits = bits;
  out.codes.reserve(indices.size());
  if (bits == 32) {
    for (std::uint64_t i : indices) {
      out.codes.push_back(std::bit_cast<std::uint32_t>(static_cast<float>(u(static_cast<Eigen::Index>(i)))));
    }
    out.indices = std::move(indices);
    return out;
  }
  if (!indices.empty()) {
    double lo = std::abs(u(static_cast<Eigen::Index>(indices.front())));
    double hi = lo;
    for (std::uint64_t i : indices) {
      const double a = std::abs(u(static_cast<Eigen::Index>(i)));
      lo = std::min(lo, a);
      hi = std::max(hi, a);
    }
    out.lo = static_cast<float>(lo);
    out.hi = static_cast<float>(hi);
    const double step = grid_step(out);
    const std::uint32_t top = magnitude_levels(bits) - 1;
    for (std::uint64_t i : indices) {
      const double v = u(static_cast<Eigen::Index>(i));
      const double a = std::abs(v);
      std::uint32_t mag = 0;
      if (step > 0.0) {
        // The extremes pin to the end codes so that lo and hi reproduce.
        if (a == hi) {
          mag = top;
        } else if (a != lo) {
          const double r = std::nearbyint((a - static_cast<double>(out.lo)) / step);
          mag = static_cast<std::uint32_t>(std::clamp(r, 0.0, static_cast<double>(top)));
        }
      }
      const std::uint32_t sign = v < 0.0 ? 1u : 0u;
      out.codes.push_back((sign << (bits - 1)) | mag);
    }
  }
  out.indices = std::move(indices);
  return out;
}

double variance_of(const GradientVector& u) {
  const double mean = u.mean();
  return (u.array() - mean).square().sum() / static_cast<double>(u.size());
}

double entropy_of_counts(std::span<const double> counts, double total) {
  double h = 0.0;
  for (double c : counts) {
    if (c > 0.0) {
      const double p = c / total;
      h -= p * std::log2(p);
    }
  }
  return h;
}

std::uint64_t varint_bytes(std::uint64_t v) {
  std::uint64_t n = 1;
  while (v >= 0x80) {
    v >>= 7;
    ++n;
  }
  return n;
}

}  // namespace

void validate_gradient(const GradientVector& u) {
  if (u.size() < 1) throw DomainError("gradient vector must have d >= 1");
  if (static_cast<std::uint64_t>(u.size()) > kMaxGradientLength) {
    throw DomainError("gradient vector longer than " + std::to_string(kMaxGradientLength));
  }
  if (!u.allFinite()) throw DomainError("gradient vector has non-finite values");
}

EncodedGradient encode_scaled_sign(const GradientVector& u) {
  validate_gradient(u);
  ScaledSignPayload p;
  p.scale = static_cast<float>(u.cwiseAbs().sum() / static_cast<double>(u.size()));
  p.positive.resize(static_cast<std::size_t>(u.size()));
  for (Eigen::Index i = 0; i < u.size(); ++i) p.positive[static_cast<std::size_t>(i)] = u(i) >= 0.0 ? 1 : 0;
  return {static_cast<std::uint64_t>(u.size()), std::move(p)};
}

EncodedGradient encode_topk_largest(const GradientVector& u, std::uint64_t k, int bits) {
  validate_gradient(u);
  check_bits(bits);
  const auto d = static_cast<std::uint64_t>(u.size());
  if (k < 1 || k > d) throw DomainError("encode_topk_largest: K must lie in [1, d]");

  std::vector<std::uint64_t> order(d);
  std::iota(order.begin(), order.end(), std::uint64_t{0});
  auto larger = [&](std::uint64_t a, std::uint64_t b) {
    const double ma = std::abs(u(static_cast<Eigen::Index>(a)));
    const double mb = std::abs(u(static_cast<Eigen::Index>(b)));
    return ma > mb || (ma == mb && a < b);
  };
  std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k - 1), order.end(), larger);
  order.resize(k);
  std::sort(order.begin(), order.end());
  return {d, make_sparse(u, std::move(order), bits)};
}

EncodedGradient encode_threshold_bbit(const GradientVector& u, double tau, int bits) {
  validate_gradient(u);
  check_bits(bits);
  if (!(tau > 0.0)) throw DomainError("encode_threshold_bbit: tau must be positive");
  std::vector<std::uint64_t> kept;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    if (std::abs(u(i)) >= tau) kept.push_back(static_cast<std::uint64_t>(i));
  }
  return {static_cast<std::uint64_t>(u.size()), make_sparse(u, std::move(kept), bits)};
}

EncodedGradient encode_ternary_threshold(const GradientVector& u, double tau, TernaryScale scale) {
  validate_gradient(u);
  if (!(tau > 0.0)) throw DomainError("encode_ternary_threshold: tau must be positive");
  TernaryPayload p;
  p.symbols.resize(static_cast<std::size_t>(u.size()));
  double sum = 0.0;
  std::uint64_t kept = 0;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const double v = u(i);
    std::int8_t s = 0;
    if (std::abs(v) >= tau) {
      s = v < 0.0 ? -1 : 1;
      sum += std::abs(v);
      ++kept;
    }
    p.symbols[static_cast<std::size_t>(i)] = s;
  }
  if (scale == TernaryScale::Threshold) {
    p.scale = static_cast<float>(tau);
  } else {
    p.scale = kept > 0 ? static_cast<float>(sum / static_cast<double>(kept)) : 0.0f;
  }
  return {static_cast<std::uint64_t>(u.size()), std::move(p)};
}

double sparse_code_value(const SparsePayload& p, std::uint32_t code) {
  if (p.bits == 32) return static_cast<double>(std::bit_cast<float>(code));
  const std::uint32_t top = magnitude_levels(p.bits) - 1;
  const std::uint32_t mag = code & top;
  const bool negative = (code >> (p.bits - 1)) & 1u;
  const double a = mag == top ? static_cast<double>(p.hi)
                              : static_cast<double>(p.lo) + static_cast<double>(mag) * grid_step(p);
  return negative ? -a : a;
}

void validate_encoded(const EncodedGradient& enc) {
  if (enc.length < 1 || enc.length > kMaxGradientLength) {
    throw FormatError("encoded length out of range", 0);
  }
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, ScaledSignPayload>) {
          if (p.positive.size() != enc.length) throw FormatError("sign bitmap length mismatch", 0);
          if (!(p.scale >= 0.0f) || !std::isfinite(p.scale)) throw FormatError("bad scale", 0);
        } else if constexpr (std::is_same_v<P, SparsePayload>) {
          if (p.bits < 2 || p.bits > 32) throw FormatError("bit width out of range", 0);
          if (p.indices.size() != p.codes.size()) throw FormatError("index/value count mismatch", 0);
          if (p.indices.size() > enc.length) throw FormatError("more values than components", 0);
          for (std::size_t i = 0; i < p.indices.size(); ++i) {
            if (p.indices[i] >= enc.length) throw FormatError("index out of bounds", 0);
            if (i > 0 && p.indices[i] <= p.indices[i - 1]) throw FormatError("indices not increasing", 0);
          }
          if (p.bits == 32) {
            for (std::uint32_t c : p.codes) {
              if (!std::isfinite(std::bit_cast<float>(c))) throw FormatError("non-finite value", 0);
            }
          } else {
            if (!std::isfinite(p.lo) || !std::isfinite(p.hi) || !(p.lo >= 0.0f) || !(p.hi >= p.lo)) {
              throw FormatError("bad value grid", 0);
            }
            for (std::uint32_t c : p.codes) {
              if (p.bits < 32 && (c >> p.bits) != 0) throw FormatError("code wider than b bits", 0);
            }
          }
        } else {
          if (p.symbols.size() != enc.length) throw FormatError("symbol count mismatch", 0);
          if (!(p.scale >= 0.0f) || !std::isfinite(p.scale)) throw FormatError("bad scale", 0);
          for (std::int8_t s : p.symbols) {
            if (s < -1 || s > 1) throw FormatError("bad ternary symbol", 0);
          }
        }
      },
      enc.payload);
}

GradientVector decode(const EncodedGradient& enc) {
  validate_encoded(enc);
  GradientVector out = GradientVector::Zero(static_cast<Eigen::Index>(enc.length));
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, ScaledSignPayload>) {
          const double s = p.scale;
          for (std::size_t i = 0; i < p.positive.size(); ++i) {
            out(static_cast<Eigen::Index>(i)) = p.positive[i] ? s : -s;
          }
        } else if constexpr (std::is_same_v<P, SparsePayload>) {
          for (std::size_t i = 0; i < p.indices.size(); ++i) {
            out(static_cast<Eigen::Index>(p.indices[i])) = sparse_code_value(p, p.codes[i]);
          }
        } else {
          const double s = p.scale;
          for (std::size_t i = 0; i < p.symbols.size(); ++i) {
            out(static_cast<Eigen::Index>(i)) = s * p.symbols[i];
          }
        }
      },
      enc.payload);
  return out;
}

std::uint64_t payload_bits(const EncodedGradient& enc) {
  const std::uint64_t d = enc.length;
  return std::visit(
      [&](const auto& p) -> std::uint64_t {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, ScaledSignPayload>) {
          return 32 + d;
        } else if constexpr (std::is_same_v<P, SparsePayload>) {
          const std::uint64_t k = p.indices.size();
          std::uint64_t index_bits = 0;
          if (k * 16 > d) {
            index_bits = d;
          } else {
            std::uint64_t prev = 0;
            for (std::size_t i = 0; i < p.indices.size(); ++i) {
              const std::uint64_t gap = i == 0 ? p.indices[i] : p.indices[i] - prev - 1;
              index_bits += 8 * varint_bytes(gap);
              prev = p.indices[i];
            }
          }
          // K, b, lo, hi, index mode, indices, values
          return 64 + 8 + 64 + 8 + index_bits + k * static_cast<std::uint64_t>(p.bits);
        } else {
          return 32 + 8 * ((d + 4) / 5);
        }
      },
      enc.payload);
}

EmpiricalRd measure_empirical_rd(const GradientVector& u, const EncodedGradient& enc) {
  validate_gradient(u);
  if (static_cast<std::uint64_t>(u.size()) != enc.length) {
    throw DomainError("measure_empirical_rd: length mismatch");
  }
  const double d = static_cast<double>(enc.length);
  EmpiricalRd out;
  out.squared_error = (u - decode(enc)).squaredNorm() / d;
  const double var = variance_of(u);
  if (var > 0.0) {
    out.point.distortion = out.squared_error / var;
  } else {
    out.point.distortion = out.squared_error == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  }
  out.raw_rate = static_cast<double>(payload_bits(enc)) / d;

  out.point.rate = std::visit(
      [&](const auto& p) -> double {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, ScaledSignPayload>) {
          const double pos = static_cast<double>(std::count(p.positive.begin(), p.positive.end(), 1));
          return binary_entropy(pos / d) + 32.0 / d;
        } else if constexpr (std::is_same_v<P, SparsePayload>) {
          const double density = static_cast<double>(p.indices.size()) / d;
          const double side = p.bits == 32 ? 0.0 : 64.0;
          return binary_entropy(density) + density * p.bits + side / d;
        } else {
          double counts[3] = {0.0, 0.0, 0.0};
          for (std::int8_t s : p.symbols) counts[s + 1] += 1.0;
          return entropy_of_counts(counts, d) + 32.0 / d;
        }
      },
      enc.payload);
  return out;
}

}  // namespace rdq
