#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "rdquant/codec.hpp"
#include "rdquant/curves.hpp"
#include "rdquant/ecsq.hpp"
#include "rdquant/ecvq.hpp"
#include "rdquant/error.hpp"
#include "rdquant/wire.hpp"

namespace {

using namespace rdq;

// Usage problems detected after parsing (bad combinations, empty grids).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GridFlags {
  std::vector<double> values;
  double min = 0.0;
  double max = 0.0;
  int count = 0;

  std::vector<double> resolve(std::vector<double> fallback) const {
    if (!values.empty()) return values;
    if (count > 0) return geometric_grid(min, max, count);
    return fallback;
  }
};

void add_grid(CLI::App* cmd, GridFlags& grid, const std::string& name, const std::string& what) {
  cmd->add_option("--" + name, grid.values, "explicit " + what + " values")->delimiter(',');
  cmd->add_option("--" + name + "-min", grid.min, "geometric grid start");
  cmd->add_option("--" + name + "-max", grid.max, "geometric grid end");
  cmd->add_option("--" + name + "-count", grid.count, "geometric grid size");
}

std::string format_number(double v) {
  std::ostringstream out;
  out.precision(6);
  out << v;
  return out.str();
}

void print_rows(const std::vector<CurveRow>& rows) { write_csv(std::cout, rows); }

std::vector<double> shannon_default() {
  std::vector<double> d;
  for (int i = 1; i <= 200; ++i) d.push_back(i / 200.0);
  return d;
}

nlohmann::json codebook_json(const VectorCodebook& book, const RdPoint& point, std::uint64_t seed) {
  nlohmann::json points = nlohmann::json::array();
  for (Eigen::Index m = 0; m < book.levels(); ++m) {
    std::vector<double> row(book.points.row(m).data(), book.points.row(m).data() + book.dim());
    points.push_back(row);
  }
  return {{"n", book.dim()},
          {"lambda", book.lambda},
          {"points", points},
          {"probs", std::vector<double>(book.probs.data(), book.probs.data() + book.levels())},
          {"rate_per_component", point.rate},
          {"distortion_per_component", point.distortion},
          {"seed", seed}};
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rate-distortion tools for quantized Gaussian gradients"};
  app.require_subcommand(1);
  double sigma = 1.0;
  app.add_option("--sigma", sigma, "source standard deviation used by gen and encode")
      ->check(CLI::PositiveNumber);

  // curve
  auto* curve = app.add_subcommand("curve", "sweep one scheme and print CSV");
  std::string scheme;
  GridFlags beta, dist, lambda;
  int bits = 8;
  int levels = 3;
  curve->add_option("scheme", scheme, "shannon, scaled-sign, asym-binary, topk-bbit, topk-ternary, lloyd-max")
      ->required()
      ->check(CLI::IsMember({"shannon", "scaled-sign", "asym-binary", "topk-bbit", "topk-ternary", "lloyd-max"}));
  add_grid(curve, beta, "beta", "threshold");
  add_grid(curve, dist, "d", "distortion");
  add_grid(curve, lambda, "lambda", "Lagrange multiplier");
  curve->add_option("--b", bits, "bits per retained value (topk-bbit)")->check(CLI::Range(1, 64));
  curve->add_option("--levels", levels, "quantizer levels (lloyd-max)")->check(CLI::PositiveNumber);

  // design
  auto* design = app.add_subcommand("design", "Lloyd-Max design for N(0,1); prints JSON");
  LloydMaxConfig lm;
  std::string init = "quantile";
  design->add_option("--levels", lm.levels)->check(CLI::PositiveNumber);
  design->add_option("--lambda", lm.lambda)->check(CLI::NonNegativeNumber);
  design->add_option("--tol", lm.tol)->check(CLI::PositiveNumber);
  design->add_option("--max-iter", lm.max_iter)->check(CLI::PositiveNumber);
  design->add_option("--init", init)->check(CLI::IsMember({"quantile", "random"}));
  design->add_option("--seed", lm.seed);

  // clg
  auto* clg = app.add_subcommand("clg", "train an entropy-constrained vector quantizer");
  int n = 2;
  ClgConfig clg_config;
  clg_config.levels = 9;
  Eigen::Index samples = 100000;
  std::uint64_t seed = 1;
  std::string out_path, assignments_path;
  clg->add_option("--n", n, "vector dimension")->check(CLI::PositiveNumber);
  clg->add_option("--m", clg_config.levels, "codebook size")->check(CLI::PositiveNumber);
  clg->add_option("--lambda", clg_config.lambda)->check(CLI::NonNegativeNumber);
  clg->add_option("--samples", samples)->check(CLI::PositiveNumber);
  clg->add_option("--seed", seed, "sample seed");
  clg->add_option("--init-seed", clg_config.init_seed, "codebook initialization seed");
  clg->add_option("--restarts", clg_config.restarts)->check(CLI::PositiveNumber);
  clg->add_option("--max-iter", clg_config.max_iter)->check(CLI::PositiveNumber);
  clg->add_option("--out", out_path, "codebook JSON path");
  clg->add_option("--assignments", assignments_path, "per-sample cell CSV path");

  // gen
  auto* gen = app.add_subcommand("gen", "write a Gaussian GRDV vector");
  std::uint64_t length = 1000;
  std::string gen_out;
  gen->add_option("--d", length, "length")->check(CLI::Range(std::uint64_t{1}, kMaxGradientLength));
  gen->add_option("--seed", seed);
  gen->add_option("--out", gen_out)->required();

  // encode
  auto* encode = app.add_subcommand("encode", "compress a GRDV vector to GRDQ");
  std::string enc_scheme, in_path, enc_out, ternary_scale = "average";
  std::uint64_t k = 0;
  double tau = 0.0;
  int enc_bits = 8;
  encode->add_option("--scheme", enc_scheme)
      ->required()
      ->check(CLI::IsMember({"scaled-sign", "topk", "threshold", "ternary"}));
  encode->add_option("--k", k, "retained count (topk)");
  encode->add_option("--tau", tau, "threshold in units of sigma (threshold, ternary)");
  encode->add_option("--b", enc_bits, "bits per retained value")->check(CLI::Range(2, 32));
  encode->add_option("--ternary-scale", ternary_scale)->check(CLI::IsMember({"average", "threshold"}));
  encode->add_option("--in", in_path)->required();
  encode->add_option("--out", enc_out)->required();

  // decode
  auto* decode_cmd = app.add_subcommand("decode", "expand a GRDQ file to GRDV");
  std::string dec_in, dec_out;
  decode_cmd->add_option("--in", dec_in)->required();
  decode_cmd->add_option("--out", dec_out)->required();

  // figure
  auto* figure = app.add_subcommand("figure", "figure reproduction bundles");
  std::string which;
  Figure2Options fig2;
  ComparisonOptions cmp;
  GridFlags fig_lambda;
  figure->add_option("which", which)->required()->check(CLI::IsMember({"fig1", "fig2", "fig5-compare"}));
  figure->add_option("--dims", fig2.dims, "fig2 dimensions")->delimiter(',');
  add_grid(figure, fig_lambda, "lambda", "fig2 Lagrange multiplier");
  figure->add_option("--samples", samples, "training samples")->check(CLI::PositiveNumber);
  figure->add_option("--seed", seed, "sample seed");
  figure->add_option("--tol", fig2.tol, "fig2 training tolerance")->check(CLI::PositiveNumber);
  figure->add_option("--max-levels", fig2.max_levels, "fig2 codebook size cap")->check(CLI::PositiveNumber);
  figure->add_option("--restarts", cmp.restarts, "fig5-compare CLG restarts")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (curve->parsed()) {
      std::vector<CurveRow> rows;
      if (scheme == "shannon") {
        rows = shannon_curve(dist.resolve(shannon_default()));
      } else if (scheme == "lloyd-max") {
        rows = lloyd_max_curve(levels, lambda.resolve(geometric_grid(1e-3, 2.0, 120)));
      } else {
        const std::vector<double> grid = beta.resolve(default_beta_grid());
        SchemeId id = scheme == "scaled-sign"   ? SchemeId::scaled_sign()
                      : scheme == "asym-binary" ? SchemeId::asymmetric_binary()
                      : scheme == "topk-bbit"   ? SchemeId::topk_bbit(bits)
                                                : SchemeId::topk_ternary();
        rows = scheme_curve(id, grid);
      }
      print_rows(rows);
    } else if (design->parsed()) {
      lm.init = init == "random" ? LloydMaxConfig::Init::Random : LloydMaxConfig::Init::Quantile;
      const LloydMaxResult r = lloyd_max(lm);
      const RdPoint p = eval_scalar(r.spec);
      const nlohmann::json doc{{"levels", r.spec.levels()},
                               {"lambda", lm.lambda},
                               {"thresholds", r.spec.thresholds},
                               {"recon_points", r.spec.recon_points},
                               {"cell_probs", r.spec.cell_probs},
                               {"rate", p.rate},
                               {"distortion", p.distortion},
                               {"cost", r.cost},
                               {"iterations", r.iterations},
                               {"converged", r.stop == StopReason::Converged}};
      std::cout << doc.dump(2) << '\n';
    } else if (clg->parsed()) {
      const SampleSet set = sample_gaussian(n, samples, seed);
      const ClgResult r = clg_train(set, clg_config);
      const RdPoint p = eval_codebook(r.codebook, set);
      if (!out_path.empty()) write_text(out_path, codebook_json(r.codebook, p, seed).dump(2) + "\n");
      if (!assignments_path.empty()) {
        const AssignmentTable table = export_assignments(r.codebook, set);
        std::ostringstream csv;
        csv << "sample,cell\n";
        for (std::size_t i = 0; i < table.cell.size(); ++i) csv << i << ',' << table.cell[i] << '\n';
        write_text(assignments_path, csv.str());
      }
      std::cout << "rate=" << format_number(p.rate) << " distortion=" << format_number(p.distortion)
                << " empty_cells=" << r.codebook.empty_cells() << '\n';
    } else if (gen->parsed()) {
      const SampleSet set = sample_gaussian(1, static_cast<Eigen::Index>(length), seed);
      const GradientVector u = set.data.col(0) * sigma;
      write_file(gen_out, write_gradient(u));
    } else if (encode->parsed()) {
      const GradientVector u = read_gradient(read_file(in_path));
      EncodedGradient enc;
      if (enc_scheme == "scaled-sign") {
        enc = encode_scaled_sign(u);
      } else if (enc_scheme == "topk") {
        if (encode->count("--k") == 0) throw UsageError("topk needs --k");
        enc = encode_topk_largest(u, k, enc_bits);
      } else {
        if (encode->count("--tau") == 0) throw UsageError(enc_scheme + " needs --tau");
        if (!(tau > 0.0)) throw UsageError("--tau must be positive");
        if (enc_scheme == "threshold") {
          enc = encode_threshold_bbit(u, tau * sigma, enc_bits);
        } else {
          enc = encode_ternary_threshold(
              u, tau * sigma, ternary_scale == "threshold" ? TernaryScale::Threshold : TernaryScale::Average);
        }
      }
      write_file(enc_out, write_encoded(enc));
      const EmpiricalRd rd = measure_empirical_rd(u, enc);
      std::cerr << "raw_bits_per_component=" << format_number(rd.raw_rate)
                << " entropy_coded_rate=" << format_number(rd.point.rate)
                << " distortion=" << format_number(rd.point.distortion) << '\n';
    } else if (decode_cmd->parsed()) {
      const EncodedGradient enc = read_encoded(read_file(dec_in));
      write_file(dec_out, write_gradient(decode(enc)));
    } else if (figure->parsed()) {
      if (which == "fig1") {
        print_rows(figure1());
      } else if (which == "fig2") {
        fig2.samples = samples;
        fig2.seed = seed;
        fig2.lambdas = fig_lambda.resolve({});
        print_rows(figure2(fig2));
      } else {
        cmp.samples = samples;
        cmp.seed = seed;
        std::cout << "reading,target,method,lambda,rate,distortion\n";
        for (const ComparisonReading& r : compare_product_vs_clg(cmp)) {
          std::cout << r.name << ',' << r.target << ",lloyd-max-m3," << r.lloyd_max.lambda << ','
                    << r.lloyd_max.point.rate << ',' << r.lloyd_max.point.distortion << '\n';
          std::cout << r.name << ',' << r.target << ",clg-n2-m9," << r.clg.lambda << ',' << r.clg.point.rate
                    << ',' << r.clg.point.distortion << '\n';
        }
      }
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const DomainError& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return 2;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
