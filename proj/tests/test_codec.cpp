#include <cmath>
#include <cstring>
#include <random>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "rdquant/codec.hpp"
#include "rdquant/error.hpp"
#include "rdquant/schemes.hpp"
#include "rdquant/wire.hpp"

using namespace rdq;
using doctest::Approx;

namespace {

GradientVector vec(std::initializer_list<double> v) {
  GradientVector u(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) u(i++) = x;
  return u;
}

GradientVector gaussian(Eigen::Index d, std::uint64_t seed) {
  const std::vector<double> xs = oracle::normal_samples(static_cast<std::size_t>(d), seed);
  return Eigen::Map<const GradientVector>(xs.data(), d);
}

// Normalized squared error with a delta-method standard error that accounts
// for the normalization by the sample variance.
struct NormalizedError {
  double value, se;
};

NormalizedError normalized_error(const GradientVector& u, const GradientVector& u_hat) {
  const double n = static_cast<double>(u.size());
  const double mean = u.mean();
  const Eigen::ArrayXd e = (u - u_hat).array().square();
  const Eigen::ArrayXd v = (u.array() - mean).square();
  const double ratio = e.mean() / v.mean();
  const Eigen::ArrayXd influence = (e - ratio * v) / v.mean();
  const double var = (influence - influence.mean()).square().mean();
  return {ratio, std::sqrt(var / n)};
}

}  // namespace

TEST_CASE("scaled sign examples") {
  EncodedGradient enc = encode_scaled_sign(vec({1.0, -1.0}));
  const auto& p = std::get<ScaledSignPayload>(enc.payload);
  CHECK(p.scale == 1.0f);
  CHECK(decode(enc) == vec({1.0, -1.0}));
  CHECK(payload_bits(enc) == 34);

  enc = encode_scaled_sign(vec({3.0, -1.0}));
  CHECK(std::get<ScaledSignPayload>(enc.payload).scale == 2.0f);
  CHECK(decode(enc) == vec({2.0, -2.0}));
  CHECK(measure_empirical_rd(vec({3.0, -1.0}), enc).squared_error * 2.0 == Approx(2.0));

  const GradientVector z = decode(encode_scaled_sign(vec({0.0, -2.0})));
  CHECK(z(0) == 1.0);
}

TEST_CASE("invalid gradients are rejected") {
  CHECK_THROWS_AS(encode_scaled_sign(GradientVector()), DomainError);
  CHECK_THROWS_AS(encode_scaled_sign(vec({1.0, std::nan("")})), DomainError);
  CHECK_THROWS_AS(encode_ternary_threshold(vec({1.0}), 0.0), DomainError);
  CHECK_THROWS_AS(encode_threshold_bbit(vec({1.0}), -1.0, 8), DomainError);
}

TEST_CASE("top-K examples") {
  const GradientVector u = vec({5.0, 0.1, -3.0});
  const auto& p = std::get<SparsePayload>(encode_topk_largest(u, 2, 8).payload);
  CHECK(p.indices == std::vector<std::uint64_t>{0, 2});

  const GradientVector w = gaussian(100, 3);
  CHECK(decode(encode_topk_largest(w, 100, 32)) == w.cast<float>().cast<double>());

  const GradientVector ties = vec({1.0, -1.0, 1.0, 0.5});
  CHECK(std::get<SparsePayload>(encode_topk_largest(ties, 2, 8).payload).indices ==
        std::vector<std::uint64_t>{0, 1});

  CHECK_THROWS_AS(encode_topk_largest(u, 0, 8), DomainError);
  CHECK_THROWS_AS(encode_topk_largest(u, 4, 8), DomainError);
  CHECK_THROWS_AS(encode_topk_largest(u, 2, 1), DomainError);
  CHECK_THROWS_AS(encode_topk_largest(u, 2, 33), DomainError);
}

TEST_CASE("b-bit value grid") {
  const GradientVector u = vec({-4.0, 1.0, 2.5, 0.0, 3.0});
  const EncodedGradient enc = encode_topk_largest(u, 4, 4);
  const auto& p = std::get<SparsePayload>(enc.payload);
  CHECK(p.lo == 1.0f);
  CHECK(p.hi == 4.0f);
  const GradientVector back = decode(enc);
  // Extremes are exact; signs survive; the rest is within half a grid step.
  CHECK(back(0) == -4.0);
  CHECK(back(1) == 1.0);
  CHECK(back(3) == 0.0);
  const double step = 3.0 / 7.0;
  CHECK(std::abs(back(2) - 2.5) <= 0.5 * step + 1e-6);
  CHECK(std::abs(back(4) - 3.0) <= 0.5 * step + 1e-6);
  for (std::uint32_t code = 0; code < (1u << 4); ++code) {
    const double v = sparse_code_value(p, code);
    CHECK(std::abs(v) >= 1.0 - 1e-6);
    CHECK(std::abs(v) <= 4.0 + 1e-6);
  }
}

TEST_CASE("threshold b-bit examples") {
  const GradientVector u = vec({0.5, -1.5, 2.0});
  const EncodedGradient none = encode_threshold_bbit(u, 3.0, 8);
  CHECK(decode(none) == GradientVector::Zero(3));
  CHECK(measure_empirical_rd(u, none).squared_error == Approx(u.squaredNorm() / 3.0));

  const GradientVector w = gaussian(1000, 4);
  CHECK(decode(encode_threshold_bbit(w, 1e-300, 32)) == w.cast<float>().cast<double>());
  const EncodedGradient exact = encode_threshold_bbit(w.cast<float>().cast<double>(), 1e-300, 32);
  CHECK(measure_empirical_rd(w.cast<float>().cast<double>(), exact).point.distortion == 0.0);
}

TEST_CASE("ternary examples") {
  const EncodedGradient none = encode_ternary_threshold(vec({0.1, -0.2}), 1.0);
  CHECK(std::get<TernaryPayload>(none.payload).scale == 0.0f);
  CHECK(decode(none) == GradientVector::Zero(2));

  const EncodedGradient enc = encode_ternary_threshold(vec({2.0, -2.0, 0.1}), 1.0);
  const auto& p = std::get<TernaryPayload>(enc.payload);
  CHECK(p.symbols == std::vector<std::int8_t>{1, -1, 0});
  CHECK(p.scale == 2.0f);
  CHECK(decode(enc) == vec({2.0, -2.0, 0.0}));
  CHECK(payload_bits(enc) == 32 + 8);

  const EncodedGradient strom = encode_ternary_threshold(vec({3.0, -2.0, 0.1}), 1.5, TernaryScale::Threshold);
  CHECK(decode(strom) == vec({1.5, -1.5, 0.0}));
}

TEST_CASE("round-trip stability") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> length(1, 300);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index d = length(rng);
    const GradientVector u = gaussian(d, 1000 + trial) * std::pow(10.0, trial % 7 - 3);
    // Thresholds representable as f32 keep the re-encode on the same side.
    const double sigma = std::sqrt(u.squaredNorm() / static_cast<double>(d));
    const double tau = static_cast<double>(static_cast<float>(0.8 * sigma));
    std::vector<EncodedGradient> encodings{encode_scaled_sign(u), encode_ternary_threshold(u, tau),
                                           encode_ternary_threshold(u, tau, TernaryScale::Threshold)};
    for (int bits : {2, 3, 8, 16, 32}) {
      encodings.push_back(encode_topk_largest(u, static_cast<std::uint64_t>(1 + trial % d), bits));
      encodings.push_back(encode_threshold_bbit(u, tau, bits));
    }
    for (const EncodedGradient& enc : encodings) {
      const GradientVector back = decode(enc);
      REQUIRE(back.size() == d);
      EncodedGradient again;
      if (std::holds_alternative<ScaledSignPayload>(enc.payload)) {
        again = encode_scaled_sign(back);
      } else if (const auto* t = std::get_if<TernaryPayload>(&enc.payload)) {
        if (t->scale == 0.0f) continue;
        const bool strom = std::abs(static_cast<double>(t->scale) - tau) == 0.0 &&
                           &enc == &encodings[2];
        again = encode_ternary_threshold(back, strom ? tau : static_cast<double>(t->scale) * 0.5,
                                         strom ? TernaryScale::Threshold : TernaryScale::Average);
      } else {
        const auto& s = std::get<SparsePayload>(enc.payload);
        if (s.indices.empty()) continue;
        again = encode_topk_largest(back, s.indices.size(), s.bits);
      }
      CHECK(write_encoded(again) == write_encoded(enc));
    }
  }
}

TEST_CASE("ternary decode is a left inverse on symbols") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const GradientVector u = gaussian(257, seed);
    const EncodedGradient enc = encode_ternary_threshold(u, 0.7);
    const auto& p = std::get<TernaryPayload>(enc.payload);
    const EncodedGradient again = encode_ternary_threshold(decode(enc), 0.5 * p.scale);
    CHECK(std::get<TernaryPayload>(again.payload).symbols == p.symbols);
  }
}

TEST_CASE("empirical rate/distortion on a million Gaussian components") {
  const Eigen::Index d = 1000000;
  const GradientVector u = gaussian(d, 20240601);

  SUBCASE("scaled sign") {
    const EncodedGradient enc = encode_scaled_sign(u);
    const EmpiricalRd rd = measure_empirical_rd(u, enc);
    CHECK(rd.squared_error == Approx(0.3634).epsilon(0.002 / 0.3634));
    CHECK(rd.point.rate == Approx(1.0).epsilon(1e-3));
    CHECK(rd.raw_rate == Approx((32.0 + d) / d));
    const NormalizedError ne = normalized_error(u, decode(enc));
    CHECK(std::abs(ne.value - scaled_sign_point().distortion) <= 3.0 * ne.se);
    CHECK(rd.point.distortion == Approx(ne.value).epsilon(1e-12));
  }

  SUBCASE("top-K 1%") {
    const EncodedGradient enc = encode_topk_largest(u, 10000, 8);
    const EmpiricalRd rd = measure_empirical_rd(u, enc);
    CHECK(std::abs(rd.squared_error - 0.9155) <= 0.003);
    const RdPoint ref = topk_bbit_point(std_cdf_inv(0.995), 8);
    const NormalizedError ne = normalized_error(u, decode(enc));
    CHECK(std::abs(ne.value - ref.distortion) <= 3.0 * ne.se);
    CHECK(std::abs(rd.point.rate - ref.rate) <= 0.002);
  }

  SUBCASE("threshold 1%") {
    const double tau = 2.5758;
    const EncodedGradient enc = encode_threshold_bbit(u, tau, 8);
    const double kept = static_cast<double>(std::get<SparsePayload>(enc.payload).indices.size()) / d;
    CHECK(std::abs(kept - 0.01) <= 0.0005);
    const EmpiricalRd rd = measure_empirical_rd(u, enc);
    CHECK(std::abs(rd.point.rate - 0.1608) <= 0.002);
    // Binomial standard error on the retained fraction.
    const double q = 2.0 * std_ccdf(tau);
    CHECK(std::abs(kept - q) <= 3.0 * std::sqrt(q * (1.0 - q) / d));
    const NormalizedError ne = normalized_error(u, decode(enc));
    CHECK(std::abs(ne.value - topk_bbit_point(tau, 8).distortion) <= 3.0 * ne.se);
  }

  SUBCASE("ternary at tau = 1") {
    const EncodedGradient enc = encode_ternary_threshold(u, 1.0);
    const EmpiricalRd rd = measure_empirical_rd(u, enc);
    const RdPoint ref = topk_ternary_point(1.0);
    const NormalizedError ne = normalized_error(u, decode(enc));
    // The mean-|x| scale differs from the exact centroid by sampling noise;
    // its extra error is mass * (scale - centroid)^2.
    const double scale = std::get<TernaryPayload>(enc.payload).scale;
    const oracle::Moments tail = oracle::truncated(1.0, 40.0);
    const double gap = 2.0 * tail.mass * (scale - tail.mean) * (scale - tail.mean);
    CHECK(rd.squared_error >= 0.2619 - 3.0 * ne.se);
    CHECK(std::abs(ne.value - (ref.distortion + gap)) <= 3.0 * ne.se);
    CHECK(std::abs(rd.point.rate - ref.rate) <= 3e-3);
  }
}

TEST_CASE("measure_empirical_rd edge cases") {
  const GradientVector u = vec({1.0, -1.0, 0.5, 2.0});
  const EncodedGradient exact = encode_topk_largest(u, 4, 32);
  CHECK(measure_empirical_rd(u, exact).point.distortion == 0.0);
  CHECK_THROWS_AS(measure_empirical_rd(vec({1.0, 2.0}), exact), DomainError);
}

TEST_CASE("decode rejects structurally invalid encodings") {
  EncodedGradient enc = encode_topk_largest(vec({1.0, 2.0, 3.0}), 2, 8);
  std::get<SparsePayload>(enc.payload).indices = {2, 1};
  CHECK_THROWS_AS(decode(enc), FormatError);
  std::get<SparsePayload>(enc.payload).indices = {1, 3};
  CHECK_THROWS_AS(decode(enc), FormatError);
  enc = encode_scaled_sign(vec({1.0, 2.0}));
  enc.length = 3;
  CHECK_THROWS_AS(decode(enc), FormatError);
}

TEST_CASE("GRDV layout is bit-exact") {
  const std::vector<std::uint8_t> bytes = write_gradient(vec({1.0, -2.0}));
  const std::vector<std::uint8_t> expected{'G', 'R', 'D', 'V', 1, 2, 0, 0, 0, 0, 0, 0, 0,
                                           0x00, 0x00, 0x80, 0x3f, 0x00, 0x00, 0x00, 0xc0};
  CHECK(bytes == expected);
  CHECK(read_gradient(bytes) == vec({1.0, -2.0}));

  std::vector<std::uint8_t> bad = expected;
  bad[4] = 2;
  try {
    read_gradient(bad);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.offset() == 4);
  }
  bad = expected;
  bad[17] = 0x00, bad[18] = 0x00, bad[19] = 0xc0, bad[20] = 0x7f;  // NaN
  CHECK_THROWS_AS(read_gradient(bad), FormatError);
}

TEST_CASE("GRDQ layouts are bit-exact") {
  // Scaled sign of [1, -1, 1]: scale 1, bitmap 0b101.
  const std::vector<std::uint8_t> sign = write_encoded(encode_scaled_sign(vec({1.0, -1.0, 1.0})));
  const std::vector<std::uint8_t> sign_expected{'G', 'R', 'D', 'Q', 1, 1, 3, 0, 0, 0, 0, 0, 0, 0,
                                                0x00, 0x00, 0x80, 0x3f, 0x05};
  CHECK(sign == sign_expected);

  // Ternary [2, -2, 0.1] -> digits 1, 2, 0 -> 1 + 2*3 = 7.
  const std::vector<std::uint8_t> tern = write_encoded(encode_ternary_threshold(vec({2.0, -2.0, 0.1}), 1.0));
  const std::vector<std::uint8_t> tern_expected{'G', 'R', 'D', 'Q', 1, 3, 3, 0, 0, 0, 0, 0, 0, 0,
                                                0x00, 0x00, 0x00, 0x40, 0x07};
  CHECK(tern == tern_expected);

  // Sparse, b = 32, K = 1 of d = 40 (gap list): index 17, raw value 1.0.
  GradientVector u = GradientVector::Zero(40);
  u(17) = 1.0;
  const std::vector<std::uint8_t> sparse = write_encoded(encode_topk_largest(u, 1, 32));
  std::vector<std::uint8_t> sparse_expected{'G', 'R', 'D', 'Q', 1, 2, 40, 0, 0, 0, 0, 0, 0, 0,
                                            1, 0, 0, 0, 0, 0, 0, 0, 32};
  for (int i = 0; i < 8; ++i) sparse_expected.push_back(0);  // lo, hi unused at b = 32
  sparse_expected.push_back(1);   // gap list
  sparse_expected.push_back(17);  // first gap
  for (std::uint8_t b : {0x00, 0x00, 0x80, 0x3f}) sparse_expected.push_back(b);
  CHECK(sparse == sparse_expected);
}

TEST_CASE("GRDQ round trips for every scheme and index mode") {
  const GradientVector u = gaussian(1000, 77);
  std::vector<EncodedGradient> encodings{encode_scaled_sign(u), encode_ternary_threshold(u, 1.0),
                                         encode_topk_largest(u, 10, 5),   // gap list
                                         encode_topk_largest(u, 500, 7),  // bitmap
                                         encode_threshold_bbit(u, 10.0, 8)};
  for (const EncodedGradient& enc : encodings) {
    const std::vector<std::uint8_t> bytes = write_encoded(enc);
    CHECK(bytes.size() == 14 + (payload_bits(enc) + 7) / 8);
    const EncodedGradient back = read_encoded(bytes);
    CHECK(write_encoded(back) == bytes);
    CHECK(decode(back) == decode(enc));
    CHECK(write_encoded(read_encoded(bytes)) == write_encoded(enc));
  }
}

TEST_CASE("GRDQ parse errors carry byte offsets") {
  const std::vector<std::uint8_t> good = write_encoded(encode_topk_largest(gaussian(300, 1), 5, 8));
  auto offset_of = [](const std::vector<std::uint8_t>& bytes) -> long {
    try {
      read_encoded(bytes);
    } catch (const FormatError& e) {
      return static_cast<long>(e.offset());
    }
    return -1;
  };
  for (std::size_t cut = 0; cut < good.size(); ++cut) {
    const std::vector<std::uint8_t> truncated(good.begin(), good.begin() + static_cast<long>(cut));
    const long at = offset_of(truncated);
    CHECK(at >= 0);
    CHECK(at <= static_cast<long>(cut));
  }
  std::vector<std::uint8_t> bad = good;
  bad[0] = 'X';
  CHECK(offset_of(bad) == 0);
  bad = good;
  bad[5] = 9;
  CHECK(offset_of(bad) == 5);
  bad = good;
  bad.push_back(0);
  CHECK(offset_of(bad) == static_cast<long>(good.size()));
  bad = good;
  bad[22] = 40;  // bit width
  CHECK(offset_of(bad) == 22);
  bad = good;
  bad[31] = 0;  // index mode must be the gap list for K = 5 of 300
  CHECK(offset_of(bad) == 31);
}

TEST_CASE("GRDQ fuzzing never yields an invalid encoding") {
  std::vector<std::vector<std::uint8_t>> seeds;
  const GradientVector u = gaussian(200, 5);
  seeds.push_back(write_encoded(encode_scaled_sign(u)));
  seeds.push_back(write_encoded(encode_ternary_threshold(u, 0.5)));
  seeds.push_back(write_encoded(encode_topk_largest(u, 3, 6)));
  seeds.push_back(write_encoded(encode_topk_largest(u, 150, 11)));
  std::mt19937_64 rng(2718);
  int rejected = 0, accepted = 0;
  for (int trial = 0; trial < 20000; ++trial) {
    std::vector<std::uint8_t> bytes = seeds[static_cast<std::size_t>(trial) % seeds.size()];
    const int edits = 1 + static_cast<int>(rng() % 4);
    for (int e = 0; e < edits; ++e) {
      const std::size_t at = rng() % bytes.size();
      switch (rng() % 4) {
        case 0: bytes[at] = static_cast<std::uint8_t>(rng()); break;
        case 1: bytes[at] ^= static_cast<std::uint8_t>(1u << (rng() % 8)); break;
        case 2: bytes.resize(at); break;
        default: bytes.insert(bytes.begin() + static_cast<long>(at), static_cast<std::uint8_t>(rng())); break;
      }
      if (bytes.empty()) bytes.push_back(0);
    }
    try {
      const EncodedGradient enc = read_encoded(bytes);
      validate_encoded(enc);
      const GradientVector back = decode(enc);
      REQUIRE(back.size() == static_cast<Eigen::Index>(enc.length));
      REQUIRE(back.allFinite());
      ++accepted;
    } catch (const FormatError& e) {
      REQUIRE(e.offset() <= bytes.size());
      ++rejected;
    }
  }
  CHECK(rejected > 0);
  CHECK(accepted > 0);
}

TEST_CASE("file helpers") {
  const auto path = std::filesystem::temp_directory_path() / "rdquant_test_file.grdv";
  const std::vector<std::uint8_t> bytes = write_gradient(vec({0.25, 4.0}));
  write_file(path, bytes);
  CHECK(read_file(path) == bytes);
  std::filesystem::remove(path);
  CHECK_THROWS(read_file(path));
}
