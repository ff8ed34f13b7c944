// Command-line entry point. Batch commands only: solve / pareto read a strict
// JSON config, flow / sample take direct flags, verify runs the oracle gate.
// Exit codes: 0 success, 1 failed verification, 2 schema violation,
// 3 infeasible constraint, 4 numeric failure. Diagnostics go to stderr;
// stdout carries nothing but data, and only when --stdout asks for it.
#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hime/common.hpp"
#include "hime/dirichlet.hpp"
#include "hime/gaussian.hpp"
#include "hime/io.hpp"
#include "hime/ising.hpp"
#include "hime/oracle.hpp"
#include "hime/rg.hpp"
#include "hime/sigma.hpp"
#include "hime/tabular.hpp"
#include "hime/transform.hpp"
#include "hime/verify.hpp"

namespace {

using namespace hime;

std::vector<double> parse_double_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const std::string token = text.substr(pos, comma - pos);
    if (token.empty()) throw schema_error(what + ": empty entry in list \"" + text + "\"");
    char* end = nullptr;
    const double v = std::strtod(token.c_str(), &end);
    if (end != token.c_str() + token.size() || !std::isfinite(v))
      throw schema_error(what + ": cannot parse \"" + token + "\" as a finite number");
    out.push_back(v);
    pos = comma + 1;
  }
  if (out.empty()) throw schema_error(what + ": empty list");
  return out;
}

Eigen::MatrixXd square_matrix(const std::vector<double>& flat, std::size_t k,
                              const std::string& what) {
  if (flat.size() != k * k)
    throw schema_error(what + " must hold k*k = " + std::to_string(k * k) +
                       " row-major entries, got " + std::to_string(flat.size()));
  Eigen::MatrixXd M(k, k);
  for (std::size_t r = 0; r < k; ++r)
    for (std::size_t c = 0; c < k; ++c) M(r, c) = flat[r * k + c];
  return M;
}

void emit(const std::string& data, const std::string& out_path, bool to_stdout,
          bool binary = false) {
  if (to_stdout) {
    if (binary) {
      std::cout.write(data.data(), static_cast<std::streamsize>(data.size()));
      std::cout.flush();
    } else {
      std::cout << data;
    }
    return;
  }
  if (out_path.empty())
    throw schema_error("no output destination: pass --out FILE or --stdout");
  std::ofstream f(out_path, binary ? std::ios::binary : std::ios::out);
  if (!f) throw schema_error("cannot open output file: " + out_path);
  f.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!f) throw schema_error("failed writing output file: " + out_path);
}

// solve and pareto operate on enumerable losses: a tabular table directly, or
// a spin chain small enough to enumerate (n <= 16) with its implied
// decimation chain.
struct TabularProblem {
  LossTable loss{std::vector<double>{0.0}};
  TransformChain chain{std::vector<TransformStep>{}};
};

TabularProblem build_problem(const io::Config& cfg, const SigmaSchedule& s) {
  TabularProblem p;
  switch (cfg.family) {
    case io::Family::tabular: {
      if (!cfg.loss_table || cfg.loss_table->size() < 2)
        throw schema_error("tabular loss needs at least two outcomes");
      p.loss = LossTable(*cfg.loss_table);
      p.chain = cfg.chain ? io::parse_chain(*cfg.chain, p.loss.size())
                          : TransformChain::trivial(p.loss.size());
      break;
    }
    case io::Family::ising: {
      const auto& is = *cfg.ising_loss;
      if (is.n > 16)
        throw schema_error(
            "enumerable solve requires n <= 16; use flow/sample for larger chains");
      if (is.n < 4 || (is.n & (is.n - 1)) != 0)
        throw schema_error("spin count must be a power of two >= 4");
      if (!(is.J > 0.0)) throw schema_error("J must be a positive real");
      const std::size_t states = std::size_t{1} << is.n;
      std::vector<double> loss(states);
      for (std::size_t x = 0; x < states; ++x)
        loss[x] = -is.J * oracle::cyclic_bond_sum(static_cast<std::uint32_t>(x), is.n);
      p.loss = LossTable(std::move(loss));
      std::vector<TransformStep> steps;
      std::size_t spins = is.n;
      for (std::size_t i = 1; i < s.depth(); ++i) {
        steps.push_back(TransformStep::even_spin_decimation(spins));
        spins /= 2;
      }
      if (spins < 4)
        throw schema_error("coarsest level would drop below 4 spins; shorten sigma");
      p.chain = TransformChain(std::move(steps));
      break;
    }
    default:
      throw schema_error(
          "solve/pareto operate on enumerable losses (tabular or ising); use "
          "flow/sample for gaussian and dirichlet");
  }
  if (p.chain.depth() != s.depth())
    throw schema_error("chain depth " + std::to_string(p.chain.depth()) +
                       " != sigma depth " + std::to_string(s.depth()));
  return p;
}

std::string pick_out(const std::string& flag_out, const io::Config& cfg) {
  if (!flag_out.empty()) return flag_out;
  if (cfg.out) return *cfg.out;
  return std::string();
}

int cmd_solve(const std::string& config_path, const std::string& flag_out,
              bool to_stdout) {
  auto cfg = io::load_config(config_path);
  SigmaSchedule s(cfg.sigma);
  auto prob = build_problem(cfg, s);

  SolveReport rep;
  if (cfg.lambda) {
    if (cfg.base) {
      auto base = TabularDistribution::from_weights(*cfg.base);
      if (base.n() != prob.loss.size())
        throw schema_error("base length != loss table length");
      rep = run_generalized_rg(prob.loss, prob.chain, s, *cfg.lambda, base);
    } else {
      rep = run_rg(prob.loss, prob.chain, s, *cfg.lambda);
    }
  } else if (cfg.mu) {
    if (cfg.base)
      throw schema_error("mu with base is unsupported; give lambda for relative solves");
    rep = solve_lambda(prob.loss, prob.chain, s, *cfg.mu, 1e-10).second;
  } else {
    throw schema_error("config needs lambda or mu");
  }

  const std::string text = io::report_to_json(rep, prob.chain, s).dump(2) + "\n";
  emit(text, pick_out(flag_out, cfg), to_stdout);
  std::cerr << "solved: lambda = " << io::fmt17(rep.lambda)
            << ", log partition = " << io::fmt17(rep.log_partition)
            << ", mean loss = " << io::fmt17(rep.expected_loss) << "\n";
  if (rep.non_monotone)
    std::cerr << "warning: constraint mean was not monotone across the bracket; "
                 "the widest sign change was used\n";
  return 0;
}

int cmd_pareto(const std::string& config_path, const std::string& flag_out,
               bool to_stdout) {
  auto cfg = io::load_config(config_path);
  if (!cfg.mu) throw schema_error("pareto needs a \"mu\" constraint in the config");
  if (!cfg.sigma_grid || cfg.sigma_grid->empty())
    throw schema_error("pareto needs a non-empty \"sigma_grid\"");
  SigmaSchedule s(cfg.sigma);
  auto prob = build_problem(cfg, s);
  std::vector<SigmaSchedule> grid;
  for (const auto& row : *cfg.sigma_grid) {
    SigmaSchedule g(row);
    if (g.depth() != s.depth())
      throw schema_error("sigma_grid rows must match the chain depth");
    grid.push_back(std::move(g));
  }
  auto points = pareto_sweep(prob.loss, prob.chain, *cfg.mu, grid, 1e-10);
  std::ostringstream os;
  io::write_pareto_csv(os, points);
  emit(os.str(), pick_out(flag_out, cfg), to_stdout);
  std::cerr << "pareto front: " << points.size() << " of " << grid.size()
            << " grid points survive domination filtering\n";
  return 0;
}

struct IsingArgs {
  double J = 1.0;
  double lambda = 1.0;
  std::string sigma;
  std::size_t levels = 0;  // 0: infer from sigma
  std::size_t n = 0;       // 0: smallest chain the level count allows
};

ising::IsingFlow make_ising_flow(const IsingArgs& a, SigmaSchedule& s_out) {
  const auto sv = parse_double_list(a.sigma, "--sigma");
  SigmaSchedule s(sv);
  const std::size_t levels = a.levels == 0 ? s.depth() : a.levels;
  if (levels != s.depth())
    throw schema_error("--levels " + std::to_string(a.levels) +
                       " != sigma depth " + std::to_string(s.depth()));
  const std::size_t n = a.n == 0 ? (std::size_t{4} << (levels - 1)) : a.n;
  s_out = s;
  return ising::ising_flow(a.J, a.lambda, s, n, levels);
}

int cmd_flow_ising(const IsingArgs& a, const std::string& out, bool to_stdout) {
  SigmaSchedule s({1.0});
  auto flow = make_ising_flow(a, s);
  if (flow.theta_capped)
    std::cerr << "warning: coupling clamped to +-700 to avoid overflow\n";
  std::ostringstream os;
  io::write_ising_flow_csv(os, flow);
  emit(os.str(), out, to_stdout);
  return 0;
}

int cmd_flow_gaussian(std::size_t k, const std::string& a_flat, const std::string& b_flat,
                      const std::string& sigma, double lambda, const std::string& out,
                      bool to_stdout) {
  if (k == 0) throw schema_error("--k must be positive");
  SigmaSchedule s(parse_double_list(sigma, "--sigma"));
  const auto A = square_matrix(parse_double_list(a_flat, "--A"), k, "--A");
  const auto B = square_matrix(parse_double_list(b_flat, "--B"), k, "--B");
  auto rep = gaussian::gaussian_flow(A, B, k, s.depth(), s, lambda);
  std::ostringstream os;
  io::write_gaussian_flow_csv(os, rep);
  emit(os.str(), out, to_stdout);
  return 0;
}

int cmd_flow_dirichlet(const std::string& alpha, double lambda, const std::string& sigma,
                       const std::string& out, bool to_stdout) {
  SigmaSchedule s(parse_double_list(sigma, "--sigma"));
  auto diag = dirichlet::dirichlet_flow_diagnostic(parse_double_list(alpha, "--alpha"),
                                                   lambda, s, s.depth());
  std::ostringstream os;
  io::write_dirichlet_flow_csv(os, diag);
  emit(os.str(), out, to_stdout);
  return 0;
}

int cmd_sample_ising(const IsingArgs& a, std::uint64_t seed, std::size_t count,
                     bool binary, const std::string& out, bool to_stdout) {
  SigmaSchedule s({1.0});
  auto flow = make_ising_flow(a, s);
  auto samples = ising::hierarchical_sample(flow, seed, count);
  const std::size_t n = flow.levels.front().n;
  std::ostringstream os(binary ? std::ios::binary : std::ios::out);
  if (binary)
    io::write_ising_binary(os, n, samples);
  else
    io::write_ising_samples_csv(os, n, samples);
  emit(os.str(), out, to_stdout, binary);
  return 0;
}

int cmd_sample_gaussian(std::size_t k, const std::string& a_flat,
                        const std::string& b_flat, const std::string& sigma,
                        double lambda, std::uint64_t seed, std::size_t count,
                        const std::string& out, bool to_stdout) {
  if (k == 0) throw schema_error("--k must be positive");
  SigmaSchedule s(parse_double_list(sigma, "--sigma"));
  const auto A = square_matrix(parse_double_list(a_flat, "--A"), k, "--A");
  const auto B = square_matrix(parse_double_list(b_flat, "--B"), k, "--B");
  auto rep = gaussian::gaussian_flow(A, B, k, s.depth(), s, lambda);
  auto draws = gaussian::gaussian_hierarchical_sample(rep, seed, count);
  std::vector<std::vector<double>> rows;
  rows.reserve(draws.size());
  for (const auto& v : draws)
    rows.emplace_back(v.data(), v.data() + v.size());
  std::ostringstream os;
  io::write_vector_samples_csv(os, k * s.depth(), rows);
  emit(os.str(), out, to_stdout);
  return 0;
}

int cmd_sample_dirichlet(const std::string& alpha, double lambda,
                         const std::string& sigma, std::size_t level,
                         std::uint64_t seed, std::size_t count, const std::string& out,
                         bool to_stdout) {
  SigmaSchedule s(parse_double_list(sigma, "--sigma"));
  auto flow = dirichlet::dirichlet_flow(parse_double_list(alpha, "--alpha"), lambda, s,
                                        s.depth());
  const std::size_t pick = level == 0 ? flow.size() : level;
  if (pick < 1 || pick > flow.size())
    throw schema_error("--level must lie in 1.." + std::to_string(flow.size()));
  const auto& fam = flow[pick - 1];
  auto samples = dirichlet::dirichlet_sample(fam, seed, count);
  std::ostringstream os;
  io::write_vector_samples_csv(os, fam.size(), samples);
  emit(os.str(), out, to_stdout);
  return 0;
}

int cmd_verify(const std::string& out, bool to_stdout) {
  auto results = verify::run_all();
  bool all_pass = true;
  for (const auto& c : results) {
    all_pass = all_pass && c.pass;
    std::cerr << "criterion " << c.id << " " << (c.pass ? "pass" : "FAIL") << " "
              << c.name << " residual=" << io::fmt17(c.residual) << " (" << c.detail
              << ")\n";
  }
  const std::string text = verify::results_to_json(results).dump(2) + "\n";
  if (to_stdout || !out.empty()) emit(text, out, to_stdout);
  std::cerr << (all_pass ? "all criteria pass" : "VERIFICATION FAILED") << "\n";
  return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hierarchical maximum-entropy cascades: solve, parameter flows, "
               "sampling, verification"};
  app.require_subcommand(1);

  auto* solve = app.add_subcommand(
      "solve", "solve one config (exact tabular cascade) and write the report JSON");
  std::string solve_config, solve_out;
  bool solve_stdout = false;
  solve->add_option("--config", solve_config, "JSON config path")->required();
  solve->add_option("--out", solve_out, "output path (overrides the config's \"out\")");
  solve->add_flag("--stdout", solve_stdout, "write the report to stdout");

  auto* pareto = app.add_subcommand(
      "pareto", "sweep a sigma grid at fixed mean constraint and write the front CSV");
  std::string pareto_config, pareto_out;
  bool pareto_stdout = false;
  pareto->add_option("--config", pareto_config, "JSON config path (needs mu and sigma_grid)")
      ->required();
  pareto->add_option("--out", pareto_out, "output path (overrides the config's \"out\")");
  pareto->add_flag("--stdout", pareto_stdout, "write the CSV to stdout");

  auto* flow = app.add_subcommand("flow", "closed-form parameter flows as CSV");
  flow->require_subcommand(1);
  IsingArgs fi;
  std::string fi_out;
  bool fi_stdout = false;
  auto* flow_ising = flow->add_subcommand("ising", "spin-chain coupling ladder");
  flow_ising->add_option("--J", fi.J, "ferromagnetic coupling (> 0)")->required();
  flow_ising->add_option("--lambda", fi.lambda, "loss exposure")->required();
  flow_ising->add_option("--sigma", fi.sigma, "comma-separated level weights")->required();
  flow_ising->add_option("--levels", fi.levels, "level count (defaults to sigma depth)");
  flow_ising->add_option("--n", fi.n, "finest spin count (defaults to 4*2^(levels-1))");
  flow_ising->add_option("--out", fi_out, "output path");
  flow_ising->add_flag("--stdout", fi_stdout, "write CSV to stdout");

  std::size_t fg_k = 1;
  std::string fg_A, fg_B, fg_sigma, fg_out;
  double fg_lambda = 1.0;
  bool fg_stdout = false;
  auto* flow_gaussian =
      flow->add_subcommand("gaussian", "block precision ladder (one level per weight)");
  flow_gaussian->add_option("--k", fg_k, "block size")->required();
  flow_gaussian->add_option("--A", fg_A, "row-major k*k diagonal block")->required();
  flow_gaussian->add_option("--B", fg_B, "row-major k*k coupling block")->required();
  flow_gaussian->add_option("--sigma", fg_sigma, "comma-separated level weights")
      ->required();
  flow_gaussian->add_option("--lambda", fg_lambda, "loss exposure (> 0)")->required();
  flow_gaussian->add_option("--out", fg_out, "output path");
  flow_gaussian->add_flag("--stdout", fg_stdout, "write CSV to stdout");

  std::string fd_alpha, fd_sigma, fd_out;
  double fd_lambda = 1.0;
  bool fd_stdout = false;
  auto* flow_dirichlet = flow->add_subcommand(
      "dirichlet", "simplex parameter ladder with the shift-free comparison column");
  flow_dirichlet->add_option("--alpha", fd_alpha, "comma-separated base parameters (>= 0)")
      ->required();
  flow_dirichlet->add_option("--lambda", fd_lambda, "loss exposure (> 0)")->required();
  flow_dirichlet->add_option("--sigma", fd_sigma, "comma-separated level weights")
      ->required();
  flow_dirichlet->add_option("--out", fd_out, "output path");
  flow_dirichlet->add_flag("--stdout", fd_stdout, "write CSV to stdout");

  auto* sample = app.add_subcommand("sample", "deterministic sampling of solved cascades");
  sample->require_subcommand(1);
  IsingArgs si;
  std::string si_out;
  bool si_stdout = false, si_binary = false;
  std::uint64_t si_seed = 0;
  std::size_t si_count = 0;
  auto* sample_ising = sample->add_subcommand("ising", "ancestral spin-chain sampler");
  sample_ising->add_option("--J", si.J, "ferromagnetic coupling (> 0)")->required();
  sample_ising->add_option("--lambda", si.lambda, "loss exposure")->required();
  sample_ising->add_option("--sigma", si.sigma, "comma-separated level weights")->required();
  sample_ising->add_option("--levels", si.levels, "level count (defaults to sigma depth)");
  sample_ising->add_option("--n", si.n, "finest spin count (defaults to 4*2^(levels-1))");
  sample_ising->add_option("--seed", si_seed, "RNG seed");
  sample_ising->add_option("--count", si_count, "sample count")->required();
  sample_ising->add_flag("--binary", si_binary, "bit-packed HIME-ISING-1 instead of CSV");
  sample_ising->add_option("--out", si_out, "output path");
  sample_ising->add_flag("--stdout", si_stdout, "write samples to stdout");

  std::size_t sg_k = 1, sg_count = 0;
  std::string sg_A, sg_B, sg_sigma, sg_out;
  double sg_lambda = 1.0;
  std::uint64_t sg_seed = 0;
  bool sg_stdout = false;
  auto* sample_gaussian =
      sample->add_subcommand("gaussian", "top-down block sampler of the full vector");
  sample_gaussian->add_option("--k", sg_k, "block size")->required();
  sample_gaussian->add_option("--A", sg_A, "row-major k*k diagonal block")->required();
  sample_gaussian->add_option("--B", sg_B, "row-major k*k coupling block")->required();
  sample_gaussian->add_option("--sigma", sg_sigma, "comma-separated level weights")
      ->required();
  sample_gaussian->add_option("--lambda", sg_lambda, "loss exposure (> 0)")->required();
  sample_gaussian->add_option("--seed", sg_seed, "RNG seed");
  sample_gaussian->add_option("--count", sg_count, "sample count")->required();
  sample_gaussian->add_option("--out", sg_out, "output path");
  sample_gaussian->add_flag("--stdout", sg_stdout, "write CSV to stdout");

  std::string sd_alpha, sd_sigma, sd_out;
  double sd_lambda = 1.0;
  std::size_t sd_level = 0, sd_count = 0;
  std::uint64_t sd_seed = 0;
  bool sd_stdout = false;
  auto* sample_dirichlet =
      sample->add_subcommand("dirichlet", "draws from one level of the simplex ladder");
  sample_dirichlet->add_option("--alpha", sd_alpha, "comma-separated base parameters (>= 0)")
      ->required();
  sample_dirichlet->add_option("--lambda", sd_lambda, "loss exposure (> 0)")->required();
  sample_dirichlet->add_option("--sigma", sd_sigma, "comma-separated level weights")
      ->required();
  sample_dirichlet->add_option("--level", sd_level,
                               "1-based level to sample (defaults to the coarsest)");
  sample_dirichlet->add_option("--seed", sd_seed, "RNG seed");
  sample_dirichlet->add_option("--count", sd_count, "sample count")->required();
  sample_dirichlet->add_option("--out", sd_out, "output path");
  sample_dirichlet->add_flag("--stdout", sd_stdout, "write CSV to stdout");

  auto* verify_cmd =
      app.add_subcommand("verify", "run the ten-oracle release gate (exit 1 on failure)");
  std::string verify_out;
  bool verify_stdout = false;
  verify_cmd->add_option("--out", verify_out, "write the JSON report to this path");
  verify_cmd->add_flag("--stdout", verify_stdout, "write the JSON report to stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (solve->parsed()) return cmd_solve(solve_config, solve_out, solve_stdout);
    if (pareto->parsed()) return cmd_pareto(pareto_config, pareto_out, pareto_stdout);
    if (flow->parsed()) {
      if (flow_ising->parsed()) return cmd_flow_ising(fi, fi_out, fi_stdout);
      if (flow_gaussian->parsed())
        return cmd_flow_gaussian(fg_k, fg_A, fg_B, fg_sigma, fg_lambda, fg_out, fg_stdout);
      if (flow_dirichlet->parsed())
        return cmd_flow_dirichlet(fd_alpha, fd_lambda, fd_sigma, fd_out, fd_stdout);
    }
    if (sample->parsed()) {
      if (sample_ising->parsed())
        return cmd_sample_ising(si, si_seed, si_count, si_binary, si_out, si_stdout);
      if (sample_gaussian->parsed())
        return cmd_sample_gaussian(sg_k, sg_A, sg_B, sg_sigma, sg_lambda, sg_seed,
                                   sg_count, sg_out, sg_stdout);
      if (sample_dirichlet->parsed())
        return cmd_sample_dirichlet(sd_alpha, sd_lambda, sd_sigma, sd_level, sd_seed,
                                    sd_count, sd_out, sd_stdout);
    }
    if (verify_cmd->parsed()) return cmd_verify(verify_out, verify_stdout);
    std::cerr << "error: no command\n";
    return 2;
  } catch (const schema_error& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return 2;
  } catch (const infeasible_error& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return 3;
  } catch (const numeric_error& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}
