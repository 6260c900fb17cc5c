// Command-line front-end: reduce constrained systems, compute energy
// polynomial coefficients (projected or monolithic route), and run
// closed-loop verification tables and randomized sweeps.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <iostream>
#include <random>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "daekron/benchmarks.hpp"
#include "daekron/dae_reduction.hpp"
#include "daekron/energy_coeffs.hpp"
#include "daekron/feedback_sim.hpp"
#include "daekron/io.hpp"
#include "daekron/monolithic.hpp"
#include "daekron/types.hpp"

namespace {

using namespace daekron;

Vec parse_vec(const std::string& text) {
  std::vector<double> vals;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      vals.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ValidationError("cannot parse number '" + item + "'");
    }
  }
  if (vals.empty()) throw ValidationError("empty vector argument");
  Vec v(static_cast<Index>(vals.size()));
  for (Index i = 0; i < v.size(); ++i) v(i) = vals[static_cast<size_t>(i)];
  return v;
}

std::vector<int> parse_degrees(const std::string& text) {
  std::vector<int> out;
  auto push = [&out](const std::string& tok) {
    const auto colon = tok.find(':');
    try {
      if (colon == std::string::npos) {
        out.push_back(std::stoi(tok));
      } else {
        const int lo = std::stoi(tok.substr(0, colon));
        const int hi = std::stoi(tok.substr(colon + 1));
        if (hi < lo) throw ValidationError("degree range is empty: " + tok);
        for (int d = lo; d <= hi; ++d) out.push_back(d);
      }
    } catch (const ValidationError&) {
      throw;
    } catch (const std::exception&) {
      throw ValidationError("cannot parse degree token '" + tok + "'");
    }
  };
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) push(item);
  if (out.empty()) throw ValidationError("empty degree list");
  for (int d : out)
    if (d < 1) throw ValidationError("feedback degrees start at 1");
  return out;
}

void emit(const std::string& path, const std::string& content) {
  if (path.empty()) {
    std::cout << content;
    return;
  }
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open for writing: " + path);
  out << content;
  if (!out) throw ValidationError("write failed: " + path);
}

ReducedOdeSystem validated_reduction(const StokesDaeSystem& sys) {
  StokesValidationReport rep = validate_stokes_dae(sys);
  if (!rep.ok) {
    std::string msg = "system validation failed:";
    for (const auto& issue : rep.issues) msg += "\n  - " + issue;
    throw ValidationError(msg);
  }
  return reduce_system(sys);
}

int cmd_reduce(const std::string& input, const std::string& output) {
  SystemDocument doc = read_system(input);
  StokesValidationReport rep = validate_stokes_dae(doc.system);
  std::cerr << "system '" << doc.name << "': n1=" << doc.system.n1() << " n2=" << doc.system.n2()
            << " m=" << doc.system.m() << " p=" << doc.system.p() << "\n"
            << "  E11 singular-value ratio:   " << rep.e11_sv_ratio << "\n"
            << "  A12 singular-value ratio:   " << rep.a12_sv_ratio << "\n"
            << "  Schur-complement sv ratio:  " << rep.schur_sv_ratio << "\n";
  if (!rep.ok) {
    for (const auto& issue : rep.issues) std::cerr << "  issue: " << issue << "\n";
    throw ValidationError("system validation failed");
  }
  ReducedOdeSystem red = reduce_system(doc.system);
  std::cerr << "reduced state dimension: " << red.r() << "\n";
  if (!output.empty()) write_json_file(output, reduced_to_json(red));
  return 0;
}

int cmd_energy(const std::string& input, const std::string& kind_name, std::optional<double> eta_in,
               int degree, const std::string& method, const std::string& output) {
  SystemDocument doc = read_system(input);
  const double eta = eta_in.value_or(doc.eta);
  const EnergyKind kind = kind_name == "past" ? EnergyKind::past : EnergyKind::future;

  StokesValidationReport rep = validate_stokes_dae(doc.system);
  if (!rep.ok) {
    std::string msg = "system validation failed:";
    for (const auto& issue : rep.issues) msg += "\n  - " + issue;
    throw ValidationError(msg);
  }

  EnergyPolynomial poly;
  if (method == "monolithic") {
    if (doc.system.B2.size() != 0 && doc.system.B2.norm() > 0.0)
      throw ValidationError(
          "method=monolithic requires B2 = 0: the augmented formulation keeps the "
          "constraint multiplier explicit and does not support control entering the "
          "constraint equation; use method=projected instead");
    MonolithicCoefficients mono = monolithic_energy(doc.system, eta, degree, kind);
    poly.kind = kind;
    poly.eta = eta;
    poly.degree = degree;
    poly.n = mono.reduced.r();
    poly.coeffs = recover_all(mono, doc.system);
    std::cerr << "projected Riccati residual: " << mono.projected_riccati_residual << "\n";
    for (const auto& s : mono.solves)
      std::cerr << "order " << (&s - mono.solves.data()) + 3 << ": side=" << s.side
                << " nnz=" << s.operator_nonzeros << " eq1_rel=" << s.eq1_relative
                << " eq2=" << s.eq2_norm << "\n";
  } else if (method == "projected") {
    ReducedOdeSystem red = reduce_system(doc.system);
    RiccatiSolution ric;
    poly = kind == EnergyKind::future ? compute_future_energy(red, eta, degree, &ric)
                                      : compute_past_energy(red, eta, degree, &ric);
    std::cerr << "Riccati residual: " << ric.residual_norm
              << ", closed-loop spectral abscissa: " << ric.closed_loop_spectrum_abscissa << "\n";
  } else {
    throw ValidationError("unknown method '" + method + "' (expected projected or monolithic)");
  }
  write_energy(output, poly);
  return 0;
}

int cmd_simulate(const std::string& system_path, const std::string& coeffs_path,
                 const std::string& x0_text, std::optional<int> degree_in, double horizon,
                 double rtol, double atol, int digits, const std::string& output) {
  SystemDocument doc = read_system(system_path);
  EnergyPolynomial poly = read_energy(coeffs_path);
  ReducedOdeSystem red = validated_reduction(doc.system);
  if (poly.n != red.r())
    throw ValidationError("coefficient file dimension " + std::to_string(poly.n) +
                          " does not match reduced state dimension " + std::to_string(red.r()));
  if (poly.kind != EnergyKind::future)
    throw ValidationError("closed-loop simulation requires a future energy polynomial");
  const int d = degree_in.value_or(poly.degree - 1);
  if (d < 1 || d + 1 > poly.degree)
    throw ValidationError("feedback degree must lie in 1.." + std::to_string(poly.degree - 1));
  Vec x0 = parse_vec(x0_text);
  if (x0.size() != red.r())
    throw ValidationError("initial state has " + std::to_string(x0.size()) +
                          " entries, expected " + std::to_string(red.r()));

  SimOptions opts;
  opts.horizon = horizon;
  opts.rtol = rtol;
  opts.atol = atol;
  opts.store_trajectory = false;
  EnergyPolynomial trunc = poly.truncated(d + 1);
  FeedbackLaw fb = build_feedback_law(trunc, red, d);
  ClosedLoopRun run = simulate_closed_loop(red, fb, x0, opts);

  ComparisonRow row;
  row.degree = d;
  row.value = eval_energy(trunc, x0);
  row.diverged = run.diverged;
  if (!run.diverged) {
    row.integral = run.cost;
    row.abs_err = std::abs(row.value - row.integral);
    row.rel_err_pct = row.integral != 0.0 ? 100.0 * row.abs_err / std::abs(row.integral)
                                          : std::numeric_limits<double>::quiet_NaN();
  }
  std::cerr << "final time " << run.final_time << ", max constraint residual "
            << run.max_constraint_residual << ", max momentum residual "
            << run.max_momentum_residual << "\n";
  emit(output, comparison_csv({row}, digits));
  return 0;
}

int cmd_table(const std::string& system_path, std::optional<double> eta_in,
              const std::string& degrees_text, const std::string& x0_text, double horizon,
              double rtol, double atol, int digits, const std::string& output) {
  SystemDocument doc = read_system(system_path);
  const double eta = eta_in.value_or(doc.eta);
  ReducedOdeSystem red = validated_reduction(doc.system);
  std::vector<int> degrees = parse_degrees(degrees_text);
  Vec x0 = parse_vec(x0_text);
  if (x0.size() != red.r())
    throw ValidationError("initial state has " + std::to_string(x0.size()) +
                          " entries, expected " + std::to_string(red.r()));
  SimOptions opts;
  opts.horizon = horizon;
  opts.rtol = rtol;
  opts.atol = atol;
  emit(output, comparison_csv(compare_table(red, eta, degrees, x0, opts), digits));
  return 0;
}

int cmd_sweep(const std::string& system_path, std::optional<double> eta_in,
              const std::string& degrees_text, Index count, const std::string& box_text,
              std::uint64_t seed, double horizon, double rtol, double atol, int digits,
              const std::string& output) {
  SystemDocument doc = read_system(system_path);
  const double eta = eta_in.value_or(doc.eta);
  ReducedOdeSystem red = validated_reduction(doc.system);
  std::vector<int> degrees = parse_degrees(degrees_text);
  Vec box = parse_vec(box_text);
  if (box.size() != 2 || !(box(1) >= box(0)))
    throw ValidationError("--box must be 'lo,hi' with hi >= lo");
  if (count == 0) {
    emit(output, "degree,runs,unstable,stable,mean_rel_err_pct\n");
    return 0;
  }
  SimOptions opts;
  opts.horizon = horizon;
  opts.rtol = rtol;
  opts.atol = atol;
  opts.store_trajectory = false;
  SweepSummary sum = ic_sweep(red, eta, degrees, count, box(0), box(1), seed, opts);
  std::cerr << "max constraint residual " << sum.max_constraint_residual
            << ", max momentum residual " << sum.max_momentum_residual << "\n";
  emit(output, sweep_csv(sum, digits));
  return 0;
}

int cmd_selfcheck() {
  int failures = 0;
  auto check = [&failures](const std::string& label, bool ok) {
    std::cout << (ok ? "PASS  " : "FAIL  ") << label << "\n";
    if (!ok) ++failures;
  };

  // Column-count identity, exhaustively over small block layouts.
  bool counts = true;
  for (Index n1 = 1; n1 <= 6; ++n1)
    for (Index r2 = 0; r2 <= n1; ++r2)
      for (int k = 1; k <= 5; ++k) counts = counts && block_count_identity(n1, r2, k);
  check("selection-block column-count identity (n1 <= 6, k <= 5)", counts);

  // Rank formula and projector-product identity on deterministic random pads.
  std::mt19937_64 rng(7);
  auto entry = [&rng]() { return static_cast<double>(rng() >> 11) * 0x1.0p-52 - 1.0; };
  bool ranks = true;
  double worst5 = 0.0;
  for (int trial = 0; trial < 8; ++trial) {
    const Index n1 = 2 + static_cast<Index>(trial % 4);
    const Index n2 = 1 + static_cast<Index>(trial % 2);
    if (n2 >= n1) continue;
    Mat A12(n1, n2);
    for (Index i = 0; i < n1; ++i)
      for (Index j = 0; j < n2; ++j) A12(i, j) = entry();
    for (int k = 1; k <= 3; ++k) {
      RankIdentityReport rep = rank_identities_check(A12, k);
      ranks = ranks && rep.ok;
      worst5 = std::max(worst5, rep.lemma5_error);
    }
  }
  check("selection-block rank formula on random constraint blocks", ranks);
  check("projector-product identity within 1e-10 (worst " + format_double(worst5, 3) + ")",
        worst5 <= 1e-10);

  // Scalar example end-to-end: reduction anchors and the Riccati closed form.
  StokesDaeSystem scalar = build_scalar_example();
  ReducedOdeSystem red = reduce_system(scalar);
  bool anchors = std::abs(red.E_d(0, 0) - 1.0) < 1e-12 && std::abs(red.A_d(0, 0) + 0.5) < 1e-12;
  check("scalar example reduction anchors", anchors);
  RiccatiSolution ric;
  compute_future_energy(red, 10.0, 2, &ric);
  check("scalar example Riccati closed form",
        std::abs(ric.W(0, 0) - (-1.0 + std::sqrt(11.0)) / 10.0) < 1e-12);

  if (failures == 0) std::cout << "selfcheck: all checks passed\n";
  return failures == 0 ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"polynomial energy functions and feedback laws for Stokes-type DAE systems"};
  app.require_subcommand(1);

  std::string input, output, system_path, coeffs_path;
  std::string kind = "future", method = "projected";
  std::string degrees = "1:3", x0_text, box_text = "-2,2";
  std::optional<double> eta;
  int degree = 4;
  std::optional<int> sim_degree;
  double horizon = 50.0, rtol = 1e-8, atol = 1e-10;
  int digits = 6;
  Index count = 100;
  std::uint64_t seed = 0;

  CLI::App* reduce = app.add_subcommand("reduce", "validate and reduce a constrained system");
  reduce->add_option("-i,--input", input, "system JSON file")->required();
  reduce->add_option("-o,--output", output, "reduced-system JSON file");

  CLI::App* energy = app.add_subcommand("energy", "compute energy-polynomial coefficients");
  energy->add_option("-i,--input", input, "system JSON file")->required();
  energy->add_option("-k,--kind", kind, "past or future (default future)")
      ->check(CLI::IsMember({"past", "future"}));
  energy->add_option("--eta", eta, "cost weight (default: system file metadata)");
  energy->add_option("-d,--degree", degree, "value-polynomial degree (>= 2)")->required();
  energy->add_option("-m,--method", method, "projected or monolithic")
      ->check(CLI::IsMember({"projected", "monolithic"}));
  energy->add_option("-o,--output", output, "energy JSON file")->required();

  CLI::App* simulate = app.add_subcommand("simulate", "run one closed-loop comparison");
  simulate->add_option("-s,--system", system_path, "system JSON file")->required();
  simulate->add_option("-c,--coeffs", coeffs_path, "energy JSON file")->required();
  simulate->add_option("--x0", x0_text, "initial reduced state, comma separated")->required();
  simulate->add_option("-d,--degree", sim_degree, "feedback degree (default: coeffs degree - 1)");
  simulate->add_option("-T,--horizon", horizon, "integration horizon");
  simulate->add_option("--rtol", rtol, "relative tolerance");
  simulate->add_option("--atol", atol, "absolute tolerance");
  simulate->add_option("--digits", digits, "CSV significant digits");
  simulate->add_option("-o,--output", output, "CSV file (default stdout)");

  CLI::App* table = app.add_subcommand("table", "prediction-vs-cost table over degrees");
  table->add_option("-s,--system", system_path, "system JSON file")->required();
  table->add_option("--eta", eta, "cost weight (default: system file metadata)");
  table->add_option("-d,--degrees", degrees, "feedback degrees, e.g. 1:5 or 1,2,3");
  table->add_option("--x0", x0_text, "initial reduced state, comma separated")->required();
  table->add_option("-T,--horizon", horizon, "integration horizon");
  table->add_option("--rtol", rtol, "relative tolerance");
  table->add_option("--atol", atol, "absolute tolerance");
  table->add_option("--digits", digits, "CSV significant digits");
  table->add_option("-o,--output", output, "CSV file (default stdout)");

  CLI::App* sweep = app.add_subcommand("sweep", "randomized initial-condition sweep");
  sweep->add_option("-s,--system", system_path, "system JSON file")->required();
  sweep->add_option("--eta", eta, "cost weight (default: system file metadata)");
  sweep->add_option("-d,--degrees", degrees, "feedback degrees, e.g. 1:3");
  sweep->add_option("-n,--count", count, "number of initial conditions");
  sweep->add_option("--box", box_text, "sampling box 'lo,hi'");
  sweep->add_option("--seed", seed, "sampling seed");
  sweep->add_option("-T,--horizon", horizon, "integration horizon");
  sweep->add_option("--rtol", rtol, "relative tolerance");
  sweep->add_option("--atol", atol, "absolute tolerance");
  sweep->add_option("--digits", digits, "CSV significant digits");
  sweep->add_option("-o,--output", output, "CSV file (default stdout)");

  CLI::App* selfcheck =
      app.add_subcommand("selfcheck", "run the rank/identity property suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (reduce->parsed()) return cmd_reduce(input, output);
    if (energy->parsed()) return cmd_energy(input, kind, eta, degree, method, output);
    if (simulate->parsed())
      return cmd_simulate(system_path, coeffs_path, x0_text, sim_degree, horizon, rtol, atol,
                          digits, output);
    if (table->parsed())
      return cmd_table(system_path, eta, degrees, x0_text, horizon, rtol, atol, digits, output);
    if (sweep->parsed())
      return cmd_sweep(system_path, eta, degrees, count, box_text, seed, horizon, rtol, atol,
                       digits, output);
    if (selfcheck->parsed()) return cmd_selfcheck();
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "unexpected failure: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
