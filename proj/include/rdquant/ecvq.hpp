#pragma once

// Entropy-constrained vector quantization trained on samples with the
// Chou-Lookabaugh-Gray iteration: k-means with an assignment cost of
// ||x - s_m||^2 - lambda log2 p_m.

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "rdquant/ecsq.hpp"
#include "rdquant/error.hpp"
#include "rdquant/gauss.hpp"

namespace rdq {

// One vector per row.
template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct SampleSet {
  RowMatrix<double> data;  // count x N, i.i.d. N(0,1)
  std::uint64_t seed = 0;

  Eigen::Index dim() const { return data.cols(); }
  Eigen::Index count() const { return data.rows(); }
};

struct VectorCodebook {
  RowMatrix<double> points;  // M x N
  Eigen::VectorXd probs;     // M empirical probabilities
  double lambda = 0.0;

  Eigen::Index dim() const { return points.cols(); }
  Eigen::Index levels() const { return points.rows(); }
  int empty_cells() const { return static_cast<int>((probs.array() == 0.0).count()); }
};

// Deterministic for a given seed on any platform: Box-Muller over raw
// mt19937_64 output.
SampleSet sample_gaussian(int dim, Eigen::Index count, std::uint64_t seed);

// Per-cell additive penalty -lambda log2 p_m; +inf for empty cells when
// lambda > 0. With lambda = 0 every cell is penalty-free (plain k-means).
template <typename DerivedP>
Eigen::VectorXd clg_penalties(const Eigen::MatrixBase<DerivedP>& probs, double lambda) {
  Eigen::VectorXd pen(probs.size());
  for (Eigen::Index m = 0; m < probs.size(); ++m) {
    const double p = static_cast<double>(probs(m));
    if (lambda == 0.0) {
      pen(m) = 0.0;
    } else {
      pen(m) = p > 0.0 ? -lambda * std::log2(p) : std::numeric_limits<double>::infinity();
    }
  }
  return pen;
}

// argmin_m ||x - points.row(m)||^2 + penalties(m), lowest index on ties.
template <typename DerivedS, typename DerivedX>
Eigen::Index nearest_with_penalty(const Eigen::MatrixBase<DerivedS>& points, const Eigen::VectorXd& penalties,
                                  const Eigen::MatrixBase<DerivedX>& x, double* cost = nullptr) {
  Eigen::Index best = -1;
  double best_cost = std::numeric_limits<double>::infinity();
  for (Eigen::Index m = 0; m < points.rows(); ++m) {
    if (std::isinf(penalties(m))) continue;
    const double c = (points.row(m) - x.derived().reshaped().transpose()).squaredNorm() + penalties(m);
    if (c < best_cost || best < 0) {
      best_cost = c;
      best = m;
    }
  }
  if (cost != nullptr) *cost = best_cost;
  return best;
}

// CLG assignment of a single vector. Throws DomainError if no cell has
// positive probability.
template <typename DerivedS, typename DerivedP, typename DerivedX>
Eigen::Index clg_assign(const Eigen::MatrixBase<DerivedS>& points, const Eigen::MatrixBase<DerivedP>& probs,
                        double lambda, const Eigen::MatrixBase<DerivedX>& x) {
  if (points.rows() != probs.size() || points.rows() == 0) {
    throw DomainError("clg_assign: points and probabilities disagree in size");
  }
  if (!((probs.array() > 0).any())) throw DomainError("clg_assign: all probabilities are zero");
  if (x.size() != points.cols()) throw DomainError("clg_assign: dimension mismatch");
  return nearest_with_penalty(points, clg_penalties(probs, lambda), x);
}

struct ClgConfig {
  int levels = 2;
  double lambda = 0.0;
  double tol = 1e-9;  // relative change of the sample-average cost
  int max_iter = 500;
  std::uint64_t init_seed = 0;
  int restarts = 1;  // best of this many seeded initializations

  void validate() const;
};

struct ClgResult {
  VectorCodebook codebook;
  std::vector<int> assignment;    // per sample
  std::vector<double> cost_trace;  // D + lambda H after each iteration
  int iterations = 0;
  StopReason stop = StopReason::MaxIterations;

  double cost() const { return cost_trace.empty() ? 0.0 : cost_trace.back(); }
};

// Starting points: levels distinct samples drawn with seed.
RowMatrix<double> initial_codebook(const SampleSet& samples, int levels, std::uint64_t seed);

ClgResult clg_train(const SampleSet& samples, const ClgConfig& config);

// Same iteration from explicit starting points.
ClgResult clg_train_from(const SampleSet& samples, const ClgConfig& config, RowMatrix<double> start);

// rate = H(probs) / N, distortion = mean squared error per component.
RdPoint eval_codebook(const VectorCodebook& codebook, const SampleSet& samples);

struct AssignmentTable {
  std::vector<int> cell;               // per sample
  std::vector<Eigen::Index> counts;    // per codebook entry
};

AssignmentTable export_assignments(const VectorCodebook& codebook, const SampleSet& samples);

// Scalar quantizer applied independently to every component; rate is the
// entropy of the pooled per-component cell frequencies.
RdPoint product_quantizer_eval(const ScalarQuantizerSpec& spec, const SampleSet& samples);

struct TunedClg {
  double lambda = 0.0;
  ClgResult result;
  RdPoint point;  // per component
  bool within_tolerance = false;
};

// Bisection over lambda until the per-component distortion is within
// tolerance of target.
TunedClg tune_clg_to_distortion(const SampleSet& samples, ClgConfig base, double target,
                                double tolerance = 0.002);

struct TunedScalar {
  double lambda = 0.0;
  ScalarQuantizerSpec spec;
  RdPoint point;  // empirical, per component
  bool within_tolerance = false;
};

TunedScalar tune_lloyd_max_to_distortion(const SampleSet& samples, int levels, double target,
                                         double tolerance = 0.002);

}  // namespace rdq
