#include "rdquant/ecvq.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <random>
#include <sstream>
#include <unordered_set>

#include "rdquant/parallel.hpp"

namespace rdq {

namespace {

constexpr std::size_t kChunk = 4096;

double uniform01(std::mt19937_64& rng) {
  // 53 random bits mapped into (0, 1).
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

// Assignment step over the cells that can win (finite penalty). Coordinates
// are stored per dimension so the inner loop runs across cells; each cell's
// distance is still accumulated dimension by dimension from zero.
class Assigner {
 public:
  Assigner(const RowMatrix<double>& points, const Eigen::VectorXd& penalties) : dim_(points.cols()) {
    for (Eigen::Index m = 0; m < points.rows(); ++m) {
      if (std::isinf(penalties(m))) continue;
      cells_.push_back(static_cast<int>(m));
      pen_.push_back(penalties(m));
    }
    if (cells_.empty()) throw DomainError("assignment: every cell has zero probability");
    const std::size_t active = cells_.size();
    coords_.resize(active * static_cast<std::size_t>(dim_));
    for (Eigen::Index j = 0; j < dim_; ++j) {
      for (std::size_t a = 0; a < active; ++a) {
        coords_[static_cast<std::size_t>(j) * active + a] = points(cells_[a], j);
      }
    }
  }

  // scratch must hold at least active() values.
  int assign(const double* x, double* scratch, double* distance) const {
    const std::size_t active = cells_.size();
    std::fill(scratch, scratch + active, 0.0);
    for (Eigen::Index j = 0; j < dim_; ++j) {
      const double xj = x[j];
      const double* s = coords_.data() + static_cast<std::size_t>(j) * active;
      for (std::size_t a = 0; a < active; ++a) {
        const double diff = xj - s[a];
        scratch[a] += diff * diff;
      }
    }
    std::size_t best = 0;
    double best_cost = scratch[0] + pen_[0];
    for (std::size_t a = 1; a < active; ++a) {
      const double c = scratch[a] + pen_[a];
      if (c < best_cost) {
        best_cost = c;
        best = a;
      }
    }
    *distance = scratch[best];
    return cells_[best];
  }

  std::size_t active() const { return cells_.size(); }

 private:
  Eigen::Index dim_;
  std::vector<int> cells_;
  std::vector<double> pen_;
  std::vector<double> coords_;
};

double squared_distance(const double* x, const double* s, Eigen::Index dim) {
  double d = 0.0;
  for (Eigen::Index j = 0; j < dim; ++j) {
    const double diff = x[j] - s[j];
    d += diff * diff;
  }
  return d;
}

struct Partials {
  RowMatrix<double> sums;
  std::vector<Eigen::Index> counts;
};

// One training run from fixed starting points.
ClgResult run_clg(const SampleSet& samples, const ClgConfig& config, RowMatrix<double> points) {
  const Eigen::Index n = samples.count();
  const Eigen::Index dim = samples.dim();
  const Eigen::Index levels = points.rows();
  const auto un = static_cast<std::size_t>(n);
  const double lambda = config.lambda;
  const double* data = samples.data.data();

  ClgResult result;
  result.assignment.assign(un, -1);
  Eigen::VectorXd probs = Eigen::VectorXd::Constant(levels, 1.0 / static_cast<double>(levels));
  std::vector<int> previous;
  std::deque<std::string> trace;
  const std::size_t chunks = chunk_count(un, kChunk);

  for (int iter = 1; iter <= config.max_iter; ++iter) {
    result.iterations = iter;
    const Eigen::VectorXd penalties = clg_penalties(probs, lambda);
    if (!penalties.array().isFinite().any()) {
      throw NumericFailure("clg_train: every cell has zero probability");
    }

    // Assignment against the read-only codebook, centroid sums per chunk.
    const Assigner assigner(points, penalties);
    std::vector<Partials> partials(chunks);
    for_each_chunk(un, kChunk, [&](std::size_t c, std::size_t begin, std::size_t end) {
      Partials& part = partials[c];
      std::vector<double> scratch(assigner.active());
      part.sums = RowMatrix<double>::Zero(levels, dim);
      part.counts.assign(static_cast<std::size_t>(levels), 0);
      for (std::size_t k = begin; k < end; ++k) {
        const double* x = data + static_cast<Eigen::Index>(k) * dim;
        double dist = 0.0;
        const int m = assigner.assign(x, scratch.data(), &dist);
        result.assignment[k] = m;
        part.sums.row(m) += Eigen::Map<const Eigen::RowVectorXd>(x, dim);
        ++part.counts[static_cast<std::size_t>(m)];
      }
    });

    RowMatrix<double> sums = RowMatrix<double>::Zero(levels, dim);
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(levels), 0);
    for (const Partials& part : partials) {
      sums += part.sums;
      for (Eigen::Index m = 0; m < levels; ++m) counts[static_cast<std::size_t>(m)] += part.counts[static_cast<std::size_t>(m)];
    }

    for (Eigen::Index m = 0; m < levels; ++m) {
      const Eigen::Index count = counts[static_cast<std::size_t>(m)];
      probs(m) = static_cast<double>(count) / static_cast<double>(n);
      if (count > 0) points.row(m) = sums.row(m) / static_cast<double>(count);
    }

    // Sample-average distortion under the updated centroids.
    std::vector<double> chunk_dist(chunks, 0.0);
    for_each_chunk(un, kChunk, [&](std::size_t c, std::size_t begin, std::size_t end) {
      double acc = 0.0;
      for (std::size_t k = begin; k < end; ++k) {
        acc += squared_distance(data + static_cast<Eigen::Index>(k) * dim,
                                points.data() + result.assignment[k] * dim, dim);
      }
      chunk_dist[c] = acc;
    });
    double distortion = 0.0;
    for (double d : chunk_dist) distortion += d;
    distortion /= static_cast<double>(n);

    double entropy = 0.0;
    for (Eigen::Index m = 0; m < levels; ++m) {
      if (probs(m) > 0.0) entropy -= probs(m) * std::log2(probs(m));
    }
    const double cost = distortion + lambda * entropy;

    std::ostringstream line;
    line << "[" << iter << "] D=" << distortion << " H=" << entropy << " J=" << cost;
    trace.push_back(line.str());
    if (trace.size() > 8) trace.pop_front();
    if (!std::isfinite(cost)) {
      std::ostringstream msg;
      msg << "clg_train: non-finite cost; trace:";
      for (const auto& t : trace) msg << ' ' << t;
      throw NumericFailure(msg.str());
    }

    const double last = result.cost_trace.empty() ? std::numeric_limits<double>::infinity()
                                                  : result.cost_trace.back();
    result.cost_trace.push_back(cost);

    // k-means practice for lambda = 0: move each empty cell onto the sample
    // farthest from its current centroid.
    if (lambda == 0.0 && std::find(counts.begin(), counts.end(), 0) != counts.end()) {
      std::vector<std::pair<double, std::size_t>> far(un);
      for (std::size_t k = 0; k < un; ++k) {
        far[k] = {squared_distance(data + static_cast<Eigen::Index>(k) * dim,
                                   points.data() + result.assignment[k] * dim, dim),
                  k};
      }
      std::stable_sort(far.begin(), far.end(),
                       [](const auto& a, const auto& b) { return a.first > b.first; });
      std::size_t next = 0;
      for (Eigen::Index m = 0; m < levels; ++m) {
        if (counts[static_cast<std::size_t>(m)] != 0 || next >= un) continue;
        points.row(m) = samples.data.row(static_cast<Eigen::Index>(far[next++].second));
      }
      previous.clear();
      continue;
    }

    const bool unchanged = previous == result.assignment;
    previous = result.assignment;
    if (unchanged || std::abs(last - cost) <= config.tol * cost) {
      result.stop = StopReason::Converged;
      break;
    }
  }

  result.codebook.points = std::move(points);
  result.codebook.probs = std::move(probs);
  result.codebook.lambda = lambda;
  return result;
}

}  // namespace

SampleSet sample_gaussian(int dim, Eigen::Index count, std::uint64_t seed) {
  if (dim < 1 || count < 1) throw DomainError("sample_gaussian: need N >= 1 and count >= 1");
  SampleSet out;
  out.seed = seed;
  out.data.resize(count, dim);
  std::mt19937_64 rng(seed);
  double* dst = out.data.data();
  const Eigen::Index total = count * dim;
  for (Eigen::Index i = 0; i < total; i += 2) {
    const double radius = std::sqrt(-2.0 * std::log(uniform01(rng)));
    const double angle = 2.0 * kPi * uniform01(rng);
    dst[i] = radius * std::cos(angle);
    if (i + 1 < total) dst[i + 1] = radius * std::sin(angle);
  }
  return out;
}

void ClgConfig::validate() const {
  if (levels < 1) throw DomainError("ClgConfig: M must be >= 1");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw DomainError("ClgConfig: lambda must be finite and >= 0");
  if (!(tol >= 0.0)) throw DomainError("ClgConfig: tol must be >= 0");
  if (max_iter < 1) throw DomainError("ClgConfig: max_iter must be >= 1");
  if (restarts < 1) throw DomainError("ClgConfig: restarts must be >= 1");
}

RowMatrix<double> initial_codebook(const SampleSet& samples, int levels, std::uint64_t seed) {
  if (levels < 1 || samples.count() < levels) {
    throw DomainError("initial_codebook: need 1 <= M <= sample count");
  }
  // Floyd's sampling of distinct indices, kept in draw order.
  std::mt19937_64 rng(seed);
  const auto n = static_cast<std::uint64_t>(samples.count());
  std::vector<std::uint64_t> chosen;
  std::unordered_set<std::uint64_t> seen;
  for (std::uint64_t j = n - static_cast<std::uint64_t>(levels); j < n; ++j) {
    const std::uint64_t t = std::uniform_int_distribution<std::uint64_t>(0, j)(rng);
    const std::uint64_t pick = seen.count(t) ? j : t;
    seen.insert(pick);
    chosen.push_back(pick);
  }
  RowMatrix<double> points(levels, samples.dim());
  for (int m = 0; m < levels; ++m) {
    points.row(m) = samples.data.row(static_cast<Eigen::Index>(chosen[static_cast<std::size_t>(m)]));
  }
  return points;
}

ClgResult clg_train_from(const SampleSet& samples, const ClgConfig& config, RowMatrix<double> start) {
  config.validate();
  if (start.cols() != samples.dim() || start.rows() != config.levels) {
    throw DomainError("clg_train: starting codebook has the wrong shape");
  }
  return run_clg(samples, config, std::move(start));
}

ClgResult clg_train(const SampleSet& samples, const ClgConfig& config) {
  config.validate();
  if (samples.count() < config.levels) throw DomainError("clg_train: fewer samples than cells");
  ClgResult best;
  for (int r = 0; r < config.restarts; ++r) {
    const std::uint64_t seed = config.init_seed + static_cast<std::uint64_t>(r) * 0x9E3779B97F4A7C15ULL;
    ClgResult run = run_clg(samples, config, initial_codebook(samples, config.levels, seed));
    if (r == 0 || run.cost() < best.cost()) best = std::move(run);
  }
  return best;
}

RdPoint eval_codebook(const VectorCodebook& codebook, const SampleSet& samples) {
  if (codebook.dim() != samples.dim()) throw DomainError("eval_codebook: dimension mismatch");
  const double total = codebook.probs.sum();
  if (std::abs(total - 1.0) > 1e-9) throw DomainError("eval_codebook: probabilities do not sum to 1");
  const Eigen::VectorXd penalties = clg_penalties(codebook.probs, codebook.lambda);
  const auto un = static_cast<std::size_t>(samples.count());
  const Assigner assigner(codebook.points, penalties);
  std::vector<double> chunk_dist(chunk_count(un, kChunk), 0.0);
  for_each_chunk(un, kChunk, [&](std::size_t c, std::size_t begin, std::size_t end) {
    std::vector<double> scratch(assigner.active());
    double acc = 0.0;
    for (std::size_t k = begin; k < end; ++k) {
      double dist = 0.0;
      assigner.assign(samples.data.data() + static_cast<Eigen::Index>(k) * samples.dim(), scratch.data(), &dist);
      acc += dist;
    }
    chunk_dist[c] = acc;
  });
  double distortion = 0.0;
  for (double d : chunk_dist) distortion += d;
  const double dim = static_cast<double>(samples.dim());
  const std::vector<double> probs(codebook.probs.data(), codebook.probs.data() + codebook.probs.size());
  return {discrete_entropy(probs) / dim, distortion / (static_cast<double>(samples.count()) * dim)};
}

AssignmentTable export_assignments(const VectorCodebook& codebook, const SampleSet& samples) {
  if (codebook.dim() != samples.dim()) throw DomainError("export_assignments: dimension mismatch");
  const Eigen::VectorXd penalties = clg_penalties(codebook.probs, codebook.lambda);
  AssignmentTable table;
  const auto un = static_cast<std::size_t>(samples.count());
  table.cell.resize(un);
  table.counts.assign(static_cast<std::size_t>(codebook.levels()), 0);
  const Assigner assigner(codebook.points, penalties);
  std::vector<double> scratch(assigner.active());
  for (std::size_t k = 0; k < un; ++k) {
    double dist = 0.0;
    const int m = assigner.assign(samples.data.data() + static_cast<Eigen::Index>(k) * samples.dim(),
                                  scratch.data(), &dist);
    table.cell[k] = m;
    ++table.counts[static_cast<std::size_t>(m)];
  }
  return table;
}

RdPoint product_quantizer_eval(const ScalarQuantizerSpec& spec, const SampleSet& samples) {
  std::vector<double> counts(static_cast<std::size_t>(spec.levels()), 0.0);
  double squared_error = 0.0;
  const Eigen::Index total = samples.data.size();
  const double* x = samples.data.data();
  for (Eigen::Index i = 0; i < total; ++i) {
    const ScalarCell cell = apply_scalar(spec, x[i]);
    counts[static_cast<std::size_t>(cell.index)] += 1.0;
    const double e = x[i] - cell.recon;
    squared_error += e * e;
  }
  for (double& c : counts) c /= static_cast<double>(total);
  return {discrete_entropy(counts), squared_error / static_cast<double>(total)};
}

TunedClg tune_clg_to_distortion(const SampleSet& samples, ClgConfig base, double target, double tolerance) {
  if (!(target > 0.0 && target < 1.0)) throw DomainError("tune_clg_to_distortion: target outside (0, 1)");
  // Distortion grows with lambda; lambda = 0 gives the least.
  double lo = 0.0;
  double hi = 2.0;
  TunedClg best;
  double best_gap = std::numeric_limits<double>::infinity();
  auto attempt = [&](double lambda) {
    base.lambda = lambda;
    ClgResult run = clg_train(samples, base);
    const RdPoint point = eval_codebook(run.codebook, samples);
    const double gap = std::abs(point.distortion - target);
    if (gap < best_gap) {
      best_gap = gap;
      best = {lambda, std::move(run), point, gap <= tolerance};
    }
    return point.distortion;
  };
  if (attempt(lo) > target) return best;
  while (attempt(hi) < target && hi < 64.0) hi *= 2.0;
  for (int iter = 0; iter < 40 && best_gap > tolerance; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (attempt(mid) < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return best;
}

TunedScalar tune_lloyd_max_to_distortion(const SampleSet& samples, int levels, double target, double tolerance) {
  if (!(target > 0.0 && target < 1.0)) throw DomainError("tune_lloyd_max_to_distortion: target outside (0, 1)");
  LloydMaxConfig config;
  config.levels = levels;
  TunedScalar best;
  double best_gap = std::numeric_limits<double>::infinity();
  auto attempt = [&](double lambda) {
    config.lambda = lambda;
    LloydMaxResult solved = lloyd_max(config);
    const RdPoint point = product_quantizer_eval(solved.spec, samples);
    const double gap = std::abs(point.distortion - target);
    if (gap < best_gap) {
      best_gap = gap;
      best = {lambda, std::move(solved.spec), point, gap <= tolerance};
    }
    return point.distortion;
  };
  double lo = 0.0;
  double hi = 2.0;
  if (attempt(lo) > target) return best;
  while (attempt(hi) < target && hi < 64.0) hi *= 2.0;
  for (int iter = 0; iter < 60 && best_gap > tolerance; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (attempt(mid) < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return best;
}

}  // namespace rdq
