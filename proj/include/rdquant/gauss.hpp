#pragma once

// Standard-normal special functions, truncated-normal moments, entropies and
// the Gaussian rate-distortion bound. Everything here is sigma-normalized.

#include <span>

namespace rdq {

inline constexpr double kPi = 3.14159265358979323846;

// Distortion of the 1-bit sign quantizer with centroid reconstruction,
// (pi - 2) / pi.
inline constexpr double kScaledSignDistortion = (kPi - 2.0) / kPi;

struct GaussianSource {
  explicit GaussianSource(double sigma);
  double sigma() const { return sigma_; }
  double variance() const { return sigma_ * sigma_; }

 private:
  double sigma_;
};

// (rate in bits per component, distortion normalized by sigma^2)
struct RdPoint {
  double rate = 0.0;
  double distortion = 0.0;
};

// Mass, mean and variance of N(0,1) restricted to (a, b).
struct TruncatedMoments {
  double mass = 0.0;
  double mean = 0.0;
  double variance = 0.0;
  // Set when mass < kDegenerateMass; mean and variance are then zero and
  // carry no information.
  bool degenerate = false;
};

inline constexpr double kDegenerateMass = 1e-15;

double std_pdf(double z);
double std_cdf(double z);
// Upper tail 1 - Phi(z), accurate where Phi(z) rounds to 1.
double std_ccdf(double z);
double std_cdf_inv(double p);

// a may be -inf and b may be +inf. Throws DomainError unless a < b.
TruncatedMoments truncated_moments(double a, double b);

double binary_entropy(double p);
double discrete_entropy(std::span<const double> probs);

// R(D) = 1/2 log2(1/d) for d in (0, 1], zero above.
double shannon_rate(double distortion_normalized);
// D(R) = 2^(-2R).
double shannon_distortion(double rate);

}  // namespace rdq
