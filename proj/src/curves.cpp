#include "rdquant/curves.hpp"

#include <algorithm>
#include <cstdio>
#include <charconv>
#include <cmath>
#include <ostream>

#include "rdquant/ecsq.hpp"
#include "rdquant/error.hpp"

namespace rdq {

namespace {

void put_number(std::ostream& out, double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.write(buf, res.ptr - buf);
}

}  // namespace

void write_csv(std::ostream& out, std::span<const CurveRow> rows) {
  out << "scheme,param,rate,distortion\n";
  for (const CurveRow& row : rows) {
    out << row.scheme << ',';
    put_number(out, row.param);
    out << ',';
    put_number(out, row.rate);
    out << ',';
    put_number(out, row.distortion);
    out << '\n';
  }
}

std::vector<CurveRow> shannon_curve(std::span<const double> distortions) {
  std::vector<CurveRow> rows;
  rows.reserve(distortions.size());
  for (double d : distortions) rows.push_back({"shannon", d, shannon_rate(d), std::min(d, 1.0)});
  return rows;
}

std::vector<CurveRow> scheme_curve(const SchemeId& scheme, std::span<const double> beta_grid) {
  std::vector<CurveRow> rows;
  const std::string name = scheme.kind == SchemeId::Kind::TopKBbit
                               ? "topk-" + std::to_string(scheme.bits) + "bit"
                               : scheme.name();
  for (const SchemePoint& p : sweep_scheme(scheme, beta_grid)) {
    rows.push_back({name, p.beta, p.point.rate, p.point.distortion});
  }
  return rows;
}

std::vector<CurveRow> lloyd_max_curve(int levels, std::span<const double> lambda_grid) {
  std::vector<CurveRow> rows;
  const std::string name = "lloyd-max-m" + std::to_string(levels);
  for (const LambdaPoint& p : sweep_lambda(levels, lambda_grid)) {
    rows.push_back({name, p.lambda, p.point.rate, p.point.distortion});
  }
  return rows;
}

std::optional<double> distortion_at_rate(std::span<const CurveRow> rows, const std::string& scheme,
                                         double rate) {
  std::vector<const CurveRow*> curve;
  for (const CurveRow& row : rows) {
    if (row.scheme == scheme) curve.push_back(&row);
  }
  std::optional<double> best;
  auto offer = [&](double d) {
    if (!best || d < *best) best = d;
  };
  for (std::size_t i = 0; i < curve.size(); ++i) {
    if (curve[i]->rate == rate) offer(curve[i]->distortion);
    if (i == 0) continue;
    const CurveRow& a = *curve[i - 1];
    const CurveRow& b = *curve[i];
    const double lo = std::min(a.rate, b.rate);
    const double hi = std::max(a.rate, b.rate);
    if (lo < hi && rate >= lo && rate <= hi) {
      const double t = (rate - a.rate) / (b.rate - a.rate);
      offer(a.distortion + t * (b.distortion - a.distortion));
    }
  }
  return best;
}

namespace {

// "topk-<b>bit" rows below the idealized model floor are exempt.
bool below_topk_floor(const CurveRow& row) {
  int bits = 0;
  if (std::sscanf(row.scheme.c_str(), "topk-%dbit", &bits) != 1 || bits < 1) return false;
  return row.distortion < topk_bbit_model_floor(bits);
}

}  // namespace

bool dominates_shannon(std::span<const CurveRow> rows, double slack) {
  return std::all_of(rows.begin(), rows.end(), [&](const CurveRow& row) {
    return row.distortion <= 0.0 || below_topk_floor(row) || row.rate >= shannon_rate(row.distortion) - slack;
  });
}

std::vector<CurveRow> figure1() {
  std::vector<double> distortions;
  for (int i = 1; i <= 200; ++i) distortions.push_back(i / 200.0);
  const std::vector<double> betas = default_beta_grid();

  std::vector<CurveRow> rows = shannon_curve(distortions);
  auto append = [&rows](std::vector<CurveRow> more) { rows.insert(rows.end(), more.begin(), more.end()); };
  append(scheme_curve(SchemeId::scaled_sign(), betas));
  append(scheme_curve(SchemeId::asymmetric_binary(), betas));
  append(scheme_curve(SchemeId::topk_bbit(8), betas));
  append(scheme_curve(SchemeId::topk_ternary(), betas));
  append(lloyd_max_curve(3, geometric_grid(1e-3, 2.0, 120)));
  return rows;
}

std::vector<double> default_figure2_lambdas() { return geometric_grid(0.15, 1.3, 24); }

std::vector<CurveRow> figure2(const Figure2Options& options) {
  const std::vector<double> lambdas = options.lambdas.empty() ? default_figure2_lambdas() : options.lambdas;
  if (options.start_levels < 1 || options.max_levels < options.start_levels) {
    throw DomainError("figure2: need 1 <= start_levels <= max_levels");
  }
  std::vector<CurveRow> rows;
  for (int dim : options.dims) {
    const SampleSet samples = sample_gaussian(dim, options.samples, options.seed + static_cast<std::uint64_t>(dim));
    const std::string name = "clg-n" + std::to_string(dim);
    for (double lambda : lambdas) {
      ClgConfig config;
      config.lambda = lambda;
      config.init_seed = options.seed;
      config.tol = options.tol;
      config.levels = options.start_levels;
      ClgResult run;
      while (true) {
        config.levels = std::min<int>(config.levels, static_cast<int>(samples.count()));
        run = clg_train(samples, config);
        if (run.codebook.empty_cells() > 0 || config.levels >= options.max_levels) break;
        config.levels = std::min(2 * config.levels, options.max_levels);
      }
      const RdPoint point = eval_codebook(run.codebook, samples);
      rows.push_back({name, lambda, point.rate, point.distortion});
    }
  }
  return rows;
}

std::vector<ComparisonReading> compare_product_vs_clg(const ComparisonOptions& options) {
  const SampleSet samples = sample_gaussian(2, options.samples, options.seed);
  std::vector<ComparisonReading> out;
  for (const auto& [name, target] : {std::pair<const char*, double>{"total-0.6", 0.3},
                                     std::pair<const char*, double>{"per-component-0.6", 0.6}}) {
    ComparisonReading reading;
    reading.name = name;
    reading.target = target;
    reading.lloyd_max = tune_lloyd_max_to_distortion(samples, 3, target);
    ClgConfig config;
    config.levels = 9;
    config.init_seed = options.init_seed;
    config.restarts = options.restarts;
    reading.clg = tune_clg_to_distortion(samples, config, target);
    out.push_back(std::move(reading));
  }
  return out;
}

}  // namespace rdq
