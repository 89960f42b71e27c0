#include "rdquant/gauss.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "rdquant/error.hpp"

namespace rdq {

namespace {

constexpr double kInvSqrt2Pi = 0.39894228040143267794;
constexpr double kInvSqrt2 = 0.70710678118654752440;

// Acklam's rational approximation; about 1e-9 relative, refined below.
double quantile_guess(double p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - p_low) {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

// z * phi(z), taken as zero at infinite z.
double z_pdf(double z) { return std::isinf(z) ? 0.0 : z * std_pdf(z); }

}  // namespace

GaussianSource::GaussianSource(double sigma) : sigma_(sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw DomainError("GaussianSource: sigma must be positive and finite");
  }
}

double std_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

double std_cdf(double z) { return 0.5 * std::erfc(-z * kInvSqrt2); }

double std_ccdf(double z) { return 0.5 * std::erfc(z * kInvSqrt2); }

double std_cdf_inv(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw DomainError("std_cdf_inv: p must lie in (0, 1), got " + std::to_string(p));
  }
  if (p == 0.5) return 0.0;

  // Safeguarded Newton: keep a bracket [lo, hi] with Phi(lo) < p < Phi(hi)
  // and fall back to bisection whenever the Newton step leaves it.
  double lo = -40.0;
  double hi = 40.0;
  double z = quantile_guess(p);
  for (int iter = 0; iter < 200; ++iter) {
    const double f = p < 0.5 ? std_cdf(z) - p : (1.0 - p) - std_ccdf(z);
    if (f == 0.0) break;
    if (f < 0.0) {
      lo = z;
    } else {
      hi = z;
    }
    const double slope = std_pdf(z);
    double next = slope > 0.0 ? z - f / slope : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - z) <= 4.0 * std::numeric_limits<double>::epsilon() * std::abs(z)) {
      z = next;
      break;
    }
    z = next;
  }
  return z;
}

TruncatedMoments truncated_moments(double a, double b) {
  if (std::isnan(a) || std::isnan(b) || !(a < b)) {
    throw DomainError("truncated_moments: need a < b");
  }
  TruncatedMoments out;
  // Subtract in whichever tail keeps the significant digits.
  out.mass = a >= 0.0 ? std_ccdf(a) - std_ccdf(b) : std_cdf(b) - std_cdf(a);
  if (out.mass < kDegenerateMass) {
    out.degenerate = true;
    return out;
  }
  const double pa = std::isinf(a) ? 0.0 : std_pdf(a);
  const double pb = std::isinf(b) ? 0.0 : std_pdf(b);
  out.mean = (pa - pb) / out.mass;
  const double var = 1.0 + (z_pdf(a) - z_pdf(b)) / out.mass - out.mean * out.mean;
  out.variance = var > 0.0 ? var : 0.0;
  return out;
}

double binary_entropy(double p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw DomainError("binary_entropy: p must lie in [0, 1]");
  }
  if (p == 0.0 || p == 1.0) return 0.0;
  const double q = 1.0 - p;
  return -p * std::log2(p) - q * std::log2(q);
}

double discrete_entropy(std::span<const double> probs) {
  double total = 0.0;
  double h = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw DomainError("discrete_entropy: probability outside [0, 1]");
    }
    total += p;
    if (p > 0.0) h -= p * std::log2(p);
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw DomainError("discrete_entropy: probabilities sum to " + std::to_string(total));
  }
  return h;
}

double shannon_rate(double distortion_normalized) {
  if (!(distortion_normalized > 0.0)) {
    throw DomainError("shannon_rate: distortion must be positive");
  }
  if (distortion_normalized >= 1.0) return 0.0;
  return -0.5 * std::log2(distortion_normalized);
}

double shannon_distortion(double rate) {
  if (!(rate >= 0.0)) {
    throw DomainError("shannon_distortion: rate must be non-negative");
  }
  return std::exp2(-2.0 * rate);
}

}  // namespace rdq
