#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "rdquant/error.hpp"
#include "rdquant/gauss.hpp"

using namespace rdq;
using doctest::Approx;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

TEST_CASE("std_pdf") {
  CHECK(std_pdf(0.0) == Approx(0.3989423).epsilon(1e-7));
  CHECK(std_pdf(1.0) == Approx(0.241970724519143).epsilon(1e-14));
  for (double z : {0.1, 0.7, 2.5, 6.0}) CHECK(std_pdf(z) == std_pdf(-z));
}

TEST_CASE("std_cdf against quadrature") {
  CHECK(std_cdf(0.0) == 0.5);
  CHECK(std_cdf(kInf) == 1.0);
  CHECK(std_cdf(-kInf) == 0.0);
  CHECK(std_cdf(1.0) == Approx(0.841344746068543).epsilon(1e-13));
  for (double z = -8.0; z <= 8.0; z += 0.25) {
    CHECK(std::abs(std_cdf(z) - oracle::cdf(z)) < 1e-12);
    CHECK(std::abs(std_cdf(z) + std_cdf(-z) - 1.0) < 1e-12);
  }
  double prev = 0.0;
  for (double z = -10.0; z <= 10.0; z += 0.01) {
    CHECK(std_cdf(z) >= prev);
    prev = std_cdf(z);
  }
}

TEST_CASE("std_cdf_inv") {
  CHECK(std_cdf_inv(0.5) == 0.0);
  CHECK(std_cdf_inv(0.841344746068543) == Approx(1.0).epsilon(1e-6));
  // bisection oracle on the quadrature cdf
  const double two_thirds = oracle::bisect(oracle::cdf, 2.0 / 3.0, -1.0, 1.0);
  CHECK(two_thirds == Approx(0.4307272993).epsilon(1e-8));
  CHECK(std_cdf_inv(2.0 / 3.0) == Approx(two_thirds).epsilon(1e-9));
  CHECK_THROWS_AS(std_cdf_inv(0.0), DomainError);
  CHECK_THROWS_AS(std_cdf_inv(1.0), DomainError);
  CHECK_THROWS_AS(std_cdf_inv(-0.1), DomainError);
  CHECK_THROWS_AS(std_cdf_inv(std::nan("")), DomainError);
}

TEST_CASE("std_cdf_inv round trip on a grid") {
  for (double p = 0.001; p < 0.999; p += 0.0005) {
    CHECK(std::abs(std_cdf(std_cdf_inv(p)) - p) <= 1e-10);
  }
  for (double p : {1e-12, 1e-8, 1e-5, 1.0 - 1e-9}) CHECK(std::abs(std_cdf(std_cdf_inv(p)) - p) <= 1e-10);
}

TEST_CASE("truncated_moments closed forms") {
  const TruncatedMoments full = truncated_moments(-kInf, kInf);
  CHECK(full.mass == 1.0);
  CHECK(full.mean == 0.0);
  CHECK(full.variance == Approx(1.0).epsilon(1e-15));

  const TruncatedMoments half = truncated_moments(0.0, kInf);
  CHECK(half.mass == 0.5);
  CHECK(half.mean == Approx(std::sqrt(2.0 / kPi)).epsilon(1e-14));
  CHECK(half.variance == Approx((kPi - 2.0) / kPi).epsilon(1e-14));

  const TruncatedMoments mid = truncated_moments(-1.0, 1.0);
  CHECK(mid.mass == Approx(0.682689492137086).epsilon(1e-13));
  CHECK(std::abs(mid.mean) < 1e-15);
  CHECK(mid.variance == Approx(0.291125094772793).epsilon(1e-12));

  CHECK_THROWS_AS(truncated_moments(1.0, 1.0), DomainError);
  CHECK_THROWS_AS(truncated_moments(2.0, -1.0), DomainError);
}

TEST_CASE("truncated_moments against quadrature") {
  const double cuts[][2] = {{-kInf, -2.0}, {-2.0, -0.3}, {-0.3, 0.4}, {0.4, 3.0}, {3.0, kInf}, {1.5, 4.5}, {-7.0, -5.0}};
  for (const auto& c : cuts) {
    const TruncatedMoments tm = truncated_moments(c[0], c[1]);
    const oracle::Moments ref = oracle::truncated(c[0], c[1]);
    CHECK(tm.mass == Approx(ref.mass).epsilon(1e-10));
    CHECK(tm.mean == Approx(ref.mean).epsilon(1e-9));
    CHECK(tm.variance == Approx(ref.variance).epsilon(1e-8));
  }
}

TEST_CASE("truncated_moments degenerate tails") {
  const TruncatedMoments far = truncated_moments(9.0, kInf);
  CHECK(far.degenerate);
  CHECK(far.mean == 0.0);
  CHECK(far.variance == 0.0);
  const TruncatedMoments tail = truncated_moments(5.0, kInf);
  CHECK_FALSE(tail.degenerate);
  CHECK(tail.variance >= 0.0);
  CHECK(tail.mean > 5.0);
}

TEST_CASE("second moment is additive over a partition") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> unif(-4.0, 4.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> cuts(1 + trial % 7);
    for (double& c : cuts) c = unif(rng);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    cuts.insert(cuts.begin(), -kInf);
    cuts.push_back(kInf);
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      const TruncatedMoments tm = truncated_moments(cuts[i], cuts[i + 1]);
      if (!tm.degenerate) total += tm.mass * (tm.variance + tm.mean * tm.mean);
    }
    CHECK(std::abs(total - 1.0) <= 1e-9);
  }
}

TEST_CASE("binary_entropy") {
  CHECK(binary_entropy(0.5) == 1.0);
  CHECK(binary_entropy(0.0) == 0.0);
  CHECK(binary_entropy(1.0) == 0.0);
  CHECK(binary_entropy(0.8413447) == Approx(0.6311).epsilon(1e-4));
  for (double p = 0.0; p <= 1.0; p += 0.0625) CHECK(binary_entropy(p) == binary_entropy(1.0 - p));
  CHECK_THROWS_AS(binary_entropy(1.5), DomainError);
}

TEST_CASE("discrete_entropy") {
  CHECK(discrete_entropy(std::vector<double>{1.0 / 3, 1.0 / 3, 1.0 / 3}) == Approx(std::log2(3.0)).epsilon(1e-14));
  CHECK(discrete_entropy(std::vector<double>{1.0, 0.0, 0.0}) == 0.0);
  CHECK(discrete_entropy(std::vector<double>{0.5, 0.25, 0.25}) == 1.5);
  CHECK_THROWS_AS(discrete_entropy(std::vector<double>{0.5, 0.6}), DomainError);
  CHECK_THROWS_AS(discrete_entropy(std::vector<double>{1.2, -0.2}), DomainError);
}

TEST_CASE("Shannon bound") {
  CHECK(shannon_rate(0.25) == 1.0);
  CHECK(shannon_rate(1.0) == 0.0);
  CHECK(shannon_rate(3.0) == 0.0);
  CHECK(shannon_rate(0.1) == Approx(1.66096404744368).epsilon(1e-13));
  CHECK(shannon_distortion(1.0) == 0.25);
  CHECK(shannon_distortion(0.0) == 1.0);
  CHECK(shannon_distortion(2.0) == 0.0625);
  CHECK_THROWS_AS(shannon_rate(0.0), DomainError);
  CHECK_THROWS_AS(shannon_distortion(-1.0), DomainError);

  double prev = std::numeric_limits<double>::infinity();
  for (double d = 0.001; d <= 1.0; d += 0.001) {
    CHECK(shannon_rate(d) < prev);
    prev = shannon_rate(d);
  }
  for (double r = 0.0; r <= 10.0; r += 0.01) CHECK(std::abs(shannon_rate(shannon_distortion(r)) - r) <= 1e-12);
}

TEST_CASE("GaussianSource") {
  CHECK(GaussianSource(2.0).variance() == 4.0);
  CHECK_THROWS_AS(GaussianSource(0.0), DomainError);
  CHECK_THROWS_AS(GaussianSource(-1.0), DomainError);
}
