#include "rdquant/ecsq.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <random>
#include <sstream>

#include "rdquant/error.hpp"

namespace rdq {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kDeadCellMass = 1e-12;

bool strictly_increasing(std::span<const double> v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(v[i] > v[i - 1])) return false;
  }
  return true;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double out = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) out = std::max(out, std::abs(a[i] - b[i]));
  return out;
}

struct Cells {
  std::vector<double> probs;
  std::vector<double> means;
  double distortion = 0.0;  // with centroid reconstruction
};

Cells cell_update(std::span<const double> thresholds) {
  const std::size_t levels = thresholds.size() + 1;
  Cells cells;
  cells.probs.resize(levels);
  cells.means.resize(levels);
  for (std::size_t m = 0; m < levels; ++m) {
    const double lo = m == 0 ? -kInf : thresholds[m - 1];
    const double hi = m + 1 == levels ? kInf : thresholds[m];
    const TruncatedMoments tm = truncated_moments(lo, hi);
    cells.probs[m] = tm.mass;
    cells.means[m] = tm.degenerate ? 0.5 * (std::max(lo, -40.0) + std::min(hi, 40.0)) : tm.mean;
    if (!tm.degenerate) cells.distortion += tm.mass * tm.variance;
  }
  return cells;
}

double entropy_of(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log2(p);
  }
  return h;
}

std::vector<double> initial_recon(const LloydMaxConfig& config) {
  const int levels = config.levels;
  std::vector<double> recon(static_cast<std::size_t>(levels));
  switch (config.init) {
    case LloydMaxConfig::Init::Quantile:
      for (int m = 0; m < levels; ++m) {
        recon[static_cast<std::size_t>(m)] = std_cdf_inv((m + 0.5) / levels);
      }
      break;
    case LloydMaxConfig::Init::Random: {
      std::mt19937_64 rng(config.seed);
      std::uniform_real_distribution<double> unif(-3.0, 3.0);
      do {
        for (double& r : recon) r = unif(rng);
        std::sort(recon.begin(), recon.end());
      } while (!strictly_increasing(recon));
      break;
    }
    case LloydMaxConfig::Init::Explicit:
      recon = config.initial_recon;
      break;
  }
  return recon;
}

// Removes cells with negligible mass by deleting one of their bounding
// thresholds (merging into the left neighbour, or the right one for cell 0).
int merge_dead_cells(std::vector<double>& thresholds, Cells& cells) {
  int merged = 0;
  while (!thresholds.empty()) {
    auto dead = std::find_if(cells.probs.begin(), cells.probs.end(),
                             [](double p) { return p < kDeadCellMass; });
    if (dead == cells.probs.end()) break;
    const auto m = static_cast<std::size_t>(dead - cells.probs.begin());
    thresholds.erase(thresholds.begin() + static_cast<std::ptrdiff_t>(m == 0 ? 0 : m - 1));
    cells = cell_update(thresholds);
    ++merged;
  }
  return merged;
}

}  // namespace

double ScalarQuantizerSpec::lower(int m) const {
  return m == 0 ? -kInf : thresholds[static_cast<std::size_t>(m - 1)];
}

double ScalarQuantizerSpec::upper(int m) const {
  return m + 1 == levels() ? kInf : thresholds[static_cast<std::size_t>(m)];
}

void ScalarQuantizerSpec::validate() const {
  const std::size_t count = recon_points.size();
  if (count == 0) throw DomainError("ScalarQuantizerSpec: no levels");
  if (thresholds.size() + 1 != count || cell_probs.size() != count) {
    throw DomainError("ScalarQuantizerSpec: need M-1 thresholds and M probabilities");
  }
  if (!strictly_increasing(thresholds)) {
    throw DomainError("ScalarQuantizerSpec: thresholds not strictly increasing");
  }
  if (!strictly_increasing(recon_points)) {
    throw DomainError("ScalarQuantizerSpec: recon points not strictly increasing");
  }
  double total = 0.0;
  for (int m = 0; m < levels(); ++m) {
    const double s = recon_points[static_cast<std::size_t>(m)];
    if (!(s >= lower(m) && s <= upper(m))) {
      throw DomainError("ScalarQuantizerSpec: recon point " + std::to_string(m) + " outside its cell");
    }
    const double mass = lower(m) >= 0.0 ? std_ccdf(lower(m)) - std_ccdf(upper(m))
                                        : std_cdf(upper(m)) - std_cdf(lower(m));
    if (std::abs(mass - cell_probs[static_cast<std::size_t>(m)]) > 1e-9) {
      throw DomainError("ScalarQuantizerSpec: cell probability " + std::to_string(m) +
                        " does not match the cell mass");
    }
    total += cell_probs[static_cast<std::size_t>(m)];
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw DomainError("ScalarQuantizerSpec: cell probabilities do not sum to 1");
  }
}

ScalarQuantizerSpec centroid_spec(std::vector<double> thresholds) {
  if (!strictly_increasing(thresholds)) {
    throw DomainError("centroid_spec: thresholds not strictly increasing");
  }
  Cells cells = cell_update(thresholds);
  return {std::move(thresholds), std::move(cells.means), std::move(cells.probs)};
}

ScalarQuantizerSpec scaled_sign_spec() { return centroid_spec({0.0}); }

void LloydMaxConfig::validate() const {
  if (levels < 1) throw DomainError("LloydMaxConfig: M must be >= 1");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw DomainError("LloydMaxConfig: lambda must be finite and >= 0");
  }
  if (!(tol > 0.0)) throw DomainError("LloydMaxConfig: tol must be positive");
  if (max_iter < 1) throw DomainError("LloydMaxConfig: max_iter must be >= 1");
  if (init == Init::Explicit) {
    if (static_cast<int>(initial_recon.size()) != levels || !strictly_increasing(initial_recon)) {
      throw DomainError("LloydMaxConfig: explicit init needs M strictly increasing points");
    }
    if (!initial_probs.empty() && initial_probs.size() != initial_recon.size()) {
      throw DomainError("LloydMaxConfig: explicit probabilities must match the points");
    }
  }
}

std::vector<double> lagrangian_thresholds(std::span<const double> recon,
                                          std::span<const double> probs, double lambda) {
  if (probs.size() != recon.size()) throw DomainError("lagrangian_thresholds: size mismatch");
  std::vector<double> out(recon.size() > 0 ? recon.size() - 1 : 0);
  for (std::size_t m = 1; m < recon.size(); ++m) {
    double t = 0.5 * (recon[m - 1] + recon[m]);
    if (lambda != 0.0) {
      t -= lambda * (std::log2(probs[m - 1]) - std::log2(probs[m])) /
           (2.0 * (recon[m - 1] - recon[m]));
    }
    out[m - 1] = t;
  }
  return out;
}

namespace {

LloydMaxResult lloyd_max_fixed_point(const LloydMaxConfig& config) {
  const double lambda = config.lambda;

  std::vector<double> recon = initial_recon(config);
  std::vector<double> probs = config.init == LloydMaxConfig::Init::Explicit && !config.initial_probs.empty()
                                  ? config.initial_probs
                                  : std::vector<double>(recon.size(), 1.0 / static_cast<double>(recon.size()));
  for (double& p : probs) p = std::max(p, kDeadCellMass);
  std::vector<double> thresholds = lagrangian_thresholds(recon, probs, 0.0);

  LloydMaxResult result;
  std::deque<std::pair<int, double>> trace;
  double previous_cost = kInf;

  for (int iter = 1; iter <= config.max_iter; ++iter) {
    result.iterations = iter;

    std::vector<double> proposed = lagrangian_thresholds(recon, probs, lambda);
    bool damped = false;
    if (!strictly_increasing(proposed)) {
      // Pull the step back towards the last feasible thresholds.
      damped = true;
      double step = 0.5;
      std::vector<double> trial(proposed.size());
      for (int halvings = 0; halvings < 60; ++halvings, step *= 0.5) {
        for (std::size_t i = 0; i < trial.size(); ++i) {
          trial[i] = thresholds[i] + step * (proposed[i] - thresholds[i]);
        }
        if (strictly_increasing(trial)) break;
      }
      proposed = strictly_increasing(trial) ? trial : thresholds;
    }

    const double threshold_move = max_abs_diff(proposed, thresholds);
    thresholds = std::move(proposed);
    Cells cells = cell_update(thresholds);
    const int merged = merge_dead_cells(thresholds, cells);
    result.merged_cells += merged;

    const double cost = cells.distortion + lambda * entropy_of(cells.probs);
    trace.emplace_back(iter, cost);
    if (trace.size() > 8) trace.pop_front();
    if (!std::isfinite(cost)) {
      std::ostringstream msg;
      msg << "lloyd_max: non-finite cost; trace:";
      for (const auto& [i, j] : trace) msg << " [" << i << "] J=" << j;
      throw NumericFailure(msg.str());
    }

    const bool same_shape = merged == 0 && cells.means.size() == recon.size();
    const double recon_move = same_shape ? max_abs_diff(cells.means, recon) : kInf;
    recon = std::move(cells.means);
    probs = std::move(cells.probs);
    result.cost = cost;

    const double relative_change = std::abs(previous_cost - cost) / std::max(cost, 1e-300);
    previous_cost = cost;
    if (same_shape && !damped && relative_change <= config.tol &&
        std::max(threshold_move, recon_move) <= config.tol) {
      result.stop = StopReason::Converged;
      break;
    }
  }

  result.spec = {std::move(thresholds), std::move(recon), std::move(probs)};
  return result;
}

}  // namespace

LloydMaxResult lloyd_max(const LloydMaxConfig& config) {
  config.validate();
  LloydMaxResult best = lloyd_max_fixed_point(config);
  if (config.lambda == 0.0) return best;

  // Symmetric layouts are fixed points even when fewer cells cost less, so
  // try removing each threshold and keep any strict improvement.
  bool improved = true;
  while (improved && best.spec.levels() > 1) {
    improved = false;
    LloydMaxResult candidate_best = best;
    for (std::size_t drop = 0; drop < best.spec.thresholds.size(); ++drop) {
      std::vector<double> cut = best.spec.thresholds;
      cut.erase(cut.begin() + static_cast<std::ptrdiff_t>(drop));
      const ScalarQuantizerSpec start = centroid_spec(std::move(cut));
      LloydMaxConfig retry = config;
      retry.levels = start.levels();
      retry.init = LloydMaxConfig::Init::Explicit;
      retry.initial_recon = start.recon_points;
      retry.initial_probs = start.cell_probs;
      LloydMaxResult r = lloyd_max_fixed_point(retry);
      if (r.cost < candidate_best.cost * (1.0 - 1e-12)) candidate_best = std::move(r);
    }
    if (candidate_best.spec.levels() < best.spec.levels()) {
      candidate_best.iterations += best.iterations;
      candidate_best.merged_cells += best.merged_cells + (best.spec.levels() - candidate_best.spec.levels());
      best = std::move(candidate_best);
      improved = true;
    }
  }
  return best;
}

RdPoint eval_scalar(const ScalarQuantizerSpec& spec) {
  double distortion = 0.0;
  for (int m = 0; m < spec.levels(); ++m) {
    const TruncatedMoments tm = truncated_moments(spec.lower(m), spec.upper(m));
    if (tm.degenerate) continue;
    const double offset = tm.mean - spec.recon_points[static_cast<std::size_t>(m)];
    distortion += tm.mass * (tm.variance + offset * offset);
  }
  return {discrete_entropy(spec.cell_probs), distortion};
}

double lagrangian_cost(const ScalarQuantizerSpec& spec, double lambda) {
  const RdPoint point = eval_scalar(spec);
  return point.distortion + lambda * point.rate;
}

ScalarCell apply_scalar(const ScalarQuantizerSpec& spec, double x) {
  const auto it = std::upper_bound(spec.thresholds.begin(), spec.thresholds.end(), x);
  const auto index = static_cast<int>(it - spec.thresholds.begin());
  return {index, spec.recon_points[static_cast<std::size_t>(index)]};
}

std::vector<LambdaPoint> sweep_lambda(int levels, std::span<const double> lambda_grid, double tol,
                                      int max_iter) {
  if (lambda_grid.empty()) throw DomainError("sweep_lambda: empty grid");
  std::vector<LambdaPoint> out;
  out.reserve(lambda_grid.size());
  LloydMaxConfig config;
  config.levels = levels;
  config.tol = tol;
  config.max_iter = max_iter;
  for (double lambda : lambda_grid) {
    config.lambda = lambda;
    LloydMaxResult solved = lloyd_max(config);
    out.push_back({lambda, eval_scalar(solved.spec), solved.spec});
    config.init = LloydMaxConfig::Init::Explicit;
    config.levels = solved.spec.levels();
    config.initial_recon = solved.spec.recon_points;
    config.initial_probs = solved.spec.cell_probs;
  }
  return out;
}

}  // namespace rdq
