#pragma once

// Entropy-constrained scalar quantizer design for N(0,1) by the Lagrangian
// Lloyd-Max iteration, and exact evaluation of scalar quantizers.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rdquant/gauss.hpp"

namespace rdq {

// M-level quantizer in units of sigma. Cell m is [thresholds[m-1],
// thresholds[m]) with the outer cells open to -inf and +inf.
struct ScalarQuantizerSpec {
  std::vector<double> thresholds;    // M - 1, strictly increasing
  std::vector<double> recon_points;  // M, strictly increasing
  std::vector<double> cell_probs;    // M

  int levels() const { return static_cast<int>(recon_points.size()); }
  double lower(int m) const;  // -inf for m = 0
  double upper(int m) const;  // +inf for m = M - 1

  // Throws DomainError describing the first violated invariant.
  void validate() const;
};

// Centroid reconstruction and exact masses for the given thresholds.
ScalarQuantizerSpec centroid_spec(std::vector<double> thresholds);

// thresholds [0], recon +-sqrt(2/pi)
ScalarQuantizerSpec scaled_sign_spec();

struct LloydMaxConfig {
  enum class Init { Quantile, Random, Explicit };

  int levels = 2;
  double lambda = 0.0;
  double tol = 1e-10;
  int max_iter = 10000;
  Init init = Init::Quantile;
  std::uint64_t seed = 0;  // Init::Random
  // Init::Explicit: starting recon points and (optionally) probabilities.
  std::vector<double> initial_recon;
  std::vector<double> initial_probs;

  void validate() const;
};

enum class StopReason { Converged, MaxIterations };

struct LloydMaxResult {
  ScalarQuantizerSpec spec;
  double cost = 0.0;  // J = D + lambda H at the returned spec
  int iterations = 0;
  StopReason stop = StopReason::MaxIterations;
  int merged_cells = 0;
};

// Alternates the Lagrangian threshold update and the centroid/mass update
// until the relative change in J and the largest coordinate move both fall
// to tol. Cells whose mass drops below 1e-12 are merged into a neighbour.
LloydMaxResult lloyd_max(const LloydMaxConfig& config);

// Threshold update for fixed recon points and probabilities (log base 2).
std::vector<double> lagrangian_thresholds(std::span<const double> recon,
                                          std::span<const double> probs, double lambda);

RdPoint eval_scalar(const ScalarQuantizerSpec& spec);

// D + lambda R
double lagrangian_cost(const ScalarQuantizerSpec& spec, double lambda);

struct ScalarCell {
  int index = 0;
  double recon = 0.0;
};

// Values on a threshold belong to the right-hand cell.
ScalarCell apply_scalar(const ScalarQuantizerSpec& spec, double x);

struct LambdaPoint {
  double lambda = 0.0;
  RdPoint point;
  ScalarQuantizerSpec spec;
};

// Lloyd-Max per lambda, warm-started from the previous solution.
std::vector<LambdaPoint> sweep_lambda(int levels, std::span<const double> lambda_grid,
                                      double tol = 1e-10, int max_iter = 10000);

}  // namespace rdq
