#pragma once

// Curve generation and the figure reproduction workflows behind the CLI.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rdquant/ecvq.hpp"
#include "rdquant/schemes.hpp"

namespace rdq {

struct CurveRow {
  std::string scheme;
  double param = 0.0;  // beta, lambda or the Shannon distortion
  double rate = 0.0;
  double distortion = 0.0;
};

// "scheme,param,rate,distortion" followed by one line per row, numbers in
// shortest round-trip form.
void write_csv(std::ostream& out, std::span<const CurveRow> rows);

std::vector<CurveRow> shannon_curve(std::span<const double> distortions);
std::vector<CurveRow> scheme_curve(const SchemeId& scheme, std::span<const double> beta_grid);
std::vector<CurveRow> lloyd_max_curve(int levels, std::span<const double> lambda_grid);

// Smallest distortion any segment of the named curve reaches at the given
// rate, interpolating linearly between consecutive rows. Empty if the curve
// never spans that rate.
std::optional<double> distortion_at_rate(std::span<const CurveRow> rows, const std::string& scheme,
                                         double rate);

// Every row of every scheme satisfies rate >= R(distortion) - slack, except
// idealized top-K rows under topk_bbit_model_floor.
bool dominates_shannon(std::span<const CurveRow> rows, double slack = 1e-9);

// Shannon, scaled sign, asymmetric binary, top-K 8-bit, top-K ternary and
// Lloyd-Max M = 3 on shared grids.
std::vector<CurveRow> figure1();

struct Figure2Options {
  std::vector<int> dims = {2, 3, 4, 5, 6, 7, 8};
  std::vector<double> lambdas;  // empty: 24 log-spaced values
  Eigen::Index samples = 100000;
  std::uint64_t seed = 1;
  int start_levels = 4;
  int max_levels = 256;
  double tol = 1e-5;  // relative cost change that ends each training run
};

std::vector<double> default_figure2_lambdas();

// CLG curves per dimension, tagged "clg-n<N>". For every lambda the number of
// cells doubles until training leaves at least one empty (or max_levels).
std::vector<CurveRow> figure2(const Figure2Options& options);

struct ComparisonReading {
  std::string name;          // "total-0.6" or "per-component-0.6"
  double target = 0.0;       // per-component distortion
  TunedScalar lloyd_max;     // product quantizer, M = 3
  TunedClg clg;              // N = 2, M = 9
};

struct ComparisonOptions {
  Eigen::Index samples = 100000;
  std::uint64_t seed = 1;
  std::uint64_t init_seed = 0;
  int restarts = 1;
};

// Matched-distortion comparison of the M = 3 product quantizer against a
// 9-cell CLG quantizer in two dimensions, for the "0.6 in total" and
// "0.6 per component" readings of the target.
std::vector<ComparisonReading> compare_product_vs_clg(const ComparisonOptions& options);

}  // namespace rdq
