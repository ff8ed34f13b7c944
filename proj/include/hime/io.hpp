// Persistence layer: strict JSON configs, solve-report round-tripping,
// CSV trajectory/sample writers, and the bit-packed spin sample format.
// All numeric text is locale-independent; doubles round-trip exactly
// (shortest-exact in JSON, 17 significant digits in CSV).
#pragma once

#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "hime/common.hpp"
#include "hime/dirichlet.hpp"
#include "hime/gaussian.hpp"
#include "hime/ising.hpp"
#include "hime/rg.hpp"
#include "hime/sigma.hpp"
#include "hime/tabular.hpp"
#include "hime/transform.hpp"

namespace hime::io {

using nlohmann::json;

inline std::string fmt17(double x) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return std::string(buf);
}

namespace detail {

// Accepts any integer-typed JSON value that is >= 0; the parser tags text
// literals as unsigned but programmatic configs may carry signed ints.
inline std::uint64_t require_index(const json& v, const std::string& what) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer()) {
    const std::int64_t s = v.get<std::int64_t>();
    if (s >= 0) return static_cast<std::uint64_t>(s);
  }
  throw schema_error(what + " must be a nonnegative integer");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Chains
// ---------------------------------------------------------------------------

// A chain serializes as an array with one entry per step: either an explicit
// map (array of codomain indices, one per fine outcome) or one of the tag
// strings "adjacent-pair-sum" / "even-spin-decimation", expanded against the
// current level size.
inline TransformChain parse_chain(const json& arr, std::size_t finest_size) {
  if (!arr.is_array()) throw schema_error("chain must be an array of steps");
  std::vector<TransformStep> steps;
  std::size_t cur = finest_size;
  for (const auto& entry : arr) {
    if (entry.is_string()) {
      const std::string tag = entry.get<std::string>();
      if (tag == "adjacent-pair-sum") {
        steps.push_back(TransformStep::adjacent_pair_sum(cur));
      } else if (tag == "even-spin-decimation") {
        std::size_t bits = 0;
        while ((std::size_t{1} << bits) < cur) ++bits;
        if ((std::size_t{1} << bits) != cur)
          throw schema_error("even-spin-decimation needs a power-of-two level size");
        steps.push_back(TransformStep::even_spin_decimation(bits));
      } else {
        throw schema_error("unknown chain step tag: " + tag);
      }
    } else if (entry.is_array()) {
      std::vector<std::size_t> map;
      map.reserve(entry.size());
      std::size_t codomain = 0;
      for (const auto& v : entry) {
        const auto y = static_cast<std::size_t>(
            detail::require_index(v, "chain map entry"));
        map.push_back(y);
        codomain = std::max(codomain, y + 1);
      }
      if (map.size() != cur)
        throw schema_error("chain map length " + std::to_string(map.size()) +
                           " != current level size " + std::to_string(cur));
      steps.emplace_back(cur, codomain, std::move(map));
    } else {
      throw schema_error("chain step must be a map array or a tag string");
    }
    cur = steps.back().codomain_size();
  }
  return TransformChain(std::move(steps));
}

inline json chain_to_json(const TransformChain& chain) {
  json arr = json::array();
  for (const auto& step : chain.steps()) {
    json m = json::array();
    for (std::size_t x = 0; x < step.domain_size(); ++x) m.push_back(step(x));
    arr.push_back(std::move(m));
  }
  return arr;
}

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

enum class Family { tabular, gaussian, dirichlet, ising };

inline std::string family_name(Family f) {
  switch (f) {
    case Family::tabular: return "tabular";
    case Family::gaussian: return "gaussian";
    case Family::dirichlet: return "dirichlet";
    case Family::ising: return "ising";
  }
  return "?";
}

struct GaussianLossSpec {
  std::vector<double> A;  // row-major k x k
  std::vector<double> B;
  std::size_t k = 0;
  std::size_t d = 0;
};

struct DirichletLossSpec {
  std::vector<double> alpha;
};

struct IsingLossSpec {
  double J = 0.0;
  std::size_t n = 0;
};

struct Config {
  Family family = Family::tabular;
  std::vector<double> sigma;
  std::optional<double> lambda;
  std::optional<double> mu;
  std::optional<std::vector<double>> loss_table;
  std::optional<GaussianLossSpec> gaussian_loss;
  std::optional<DirichletLossSpec> dirichlet_loss;
  std::optional<IsingLossSpec> ising_loss;
  std::optional<json> chain;  // raw step array; expand against the loss size
  std::optional<std::vector<double>> base;
  std::uint64_t seed = 0;
  std::optional<std::string> out;
  std::optional<std::vector<std::vector<double>>> sigma_grid;
};

namespace detail {

inline double require_finite_number(const json& v, const std::string& what) {
  if (!v.is_number()) throw schema_error(what + " must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw schema_error(what + " must be finite");
  return x;
}

inline std::vector<double> number_array(const json& v, const std::string& what) {
  if (!v.is_array()) throw schema_error(what + " must be an array of numbers");
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& e : v) out.push_back(require_finite_number(e, what + " entry"));
  return out;
}

inline void reject_unknown_keys(const json& obj, std::initializer_list<const char*> known,
                                const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : known)
      if (it.key() == k) {
        ok = true;
        break;
      }
    if (!ok) throw schema_error("unknown key \"" + it.key() + "\" in " + where);
  }
}

}  // namespace detail

// Strict single-schema parse: unknown keys anywhere are rejected so sweep
// configs fail loudly on typos.
inline Config parse_config(const json& j) {
  if (!j.is_object()) throw schema_error("config must be a JSON object");
  detail::reject_unknown_keys(j,
                              {"family", "sigma", "lambda", "mu", "loss", "chain",
                               "base", "seed", "out", "sigma_grid"},
                              "config");
  Config c;

  if (!j.contains("family") || !j.at("family").is_string())
    throw schema_error("config needs a \"family\" string");
  const std::string fam = j.at("family").get<std::string>();
  if (fam == "tabular")
    c.family = Family::tabular;
  else if (fam == "gaussian")
    c.family = Family::gaussian;
  else if (fam == "dirichlet")
    c.family = Family::dirichlet;
  else if (fam == "ising")
    c.family = Family::ising;
  else
    throw schema_error("unknown family \"" + fam +
                       "\" (expected tabular|gaussian|dirichlet|ising)");

  if (!j.contains("sigma")) throw schema_error("config needs a \"sigma\" array");
  c.sigma = detail::number_array(j.at("sigma"), "sigma");

  if (j.contains("lambda"))
    c.lambda = detail::require_finite_number(j.at("lambda"), "lambda");
  if (j.contains("mu")) c.mu = detail::require_finite_number(j.at("mu"), "mu");
  if (c.lambda && c.mu)
    throw schema_error("give either \"lambda\" or \"mu\", not both");

  if (!j.contains("loss")) throw schema_error("config needs a \"loss\" field");
  const json& loss = j.at("loss");
  switch (c.family) {
    case Family::tabular: {
      c.loss_table = detail::number_array(loss, "tabular loss");
      break;
    }
    case Family::gaussian: {
      if (!loss.is_object())
        throw schema_error("gaussian loss must be an object {A, B, k, d}");
      detail::reject_unknown_keys(loss, {"A", "B", "k", "d"}, "gaussian loss");
      GaussianLossSpec g;
      if (!loss.contains("k") || !loss.contains("d"))
        throw schema_error("gaussian loss needs \"k\" and \"d\"");
      g.k = static_cast<std::size_t>(detail::require_index(loss.at("k"), "k"));
      g.d = static_cast<std::size_t>(detail::require_index(loss.at("d"), "d"));
      if (!loss.contains("A") || !loss.contains("B"))
        throw schema_error("gaussian loss needs \"A\" and \"B\" arrays");
      g.A = detail::number_array(loss.at("A"), "A");
      g.B = detail::number_array(loss.at("B"), "B");
      if (g.A.size() != g.k * g.k || g.B.size() != g.k * g.k)
        throw schema_error("A and B must be row-major k*k arrays");
      c.gaussian_loss = std::move(g);
      break;
    }
    case Family::dirichlet: {
      if (!loss.is_object())
        throw schema_error("dirichlet loss must be an object {alpha}");
      detail::reject_unknown_keys(loss, {"alpha"}, "dirichlet loss");
      if (!loss.contains("alpha"))
        throw schema_error("dirichlet loss needs an \"alpha\" array");
      DirichletLossSpec dsp;
      dsp.alpha = detail::number_array(loss.at("alpha"), "alpha");
      c.dirichlet_loss = std::move(dsp);
      break;
    }
    case Family::ising: {
      if (!loss.is_object())
        throw schema_error("ising loss must be an object {J, n}");
      detail::reject_unknown_keys(loss, {"J", "n"}, "ising loss");
      if (!loss.contains("J") || !loss.contains("n"))
        throw schema_error("ising loss needs \"J\" and \"n\"");
      IsingLossSpec is;
      is.J = detail::require_finite_number(loss.at("J"), "J");
      is.n = static_cast<std::size_t>(detail::require_index(loss.at("n"), "n"));
      c.ising_loss = std::move(is);
      break;
    }
  }

  if (j.contains("chain")) {
    if (c.family != Family::tabular)
      throw schema_error("\"chain\" is only valid for the tabular family; " +
                         family_name(c.family) + " chains are implied");
    c.chain = j.at("chain");
  }
  if (j.contains("base")) {
    if (c.family != Family::tabular)
      throw schema_error("\"base\" is only valid for the tabular family");
    c.base = detail::number_array(j.at("base"), "base");
  }
  if (j.contains("seed")) c.seed = detail::require_index(j.at("seed"), "seed");
  if (j.contains("out")) {
    if (!j.at("out").is_string()) throw schema_error("out must be a path string");
    c.out = j.at("out").get<std::string>();
  }
  if (j.contains("sigma_grid")) {
    if (!j.at("sigma_grid").is_array())
      throw schema_error("sigma_grid must be an array of sigma arrays");
    std::vector<std::vector<double>> grid;
    for (const auto& row : j.at("sigma_grid"))
      grid.push_back(detail::number_array(row, "sigma_grid row"));
    c.sigma_grid = std::move(grid);
  }
  return c;
}

inline Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw schema_error("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw schema_error(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

// ---------------------------------------------------------------------------
// Solve reports
// ---------------------------------------------------------------------------

inline json report_to_json(const SolveReport& rep, const TransformChain& chain,
                           const SigmaSchedule& s) {
  json j;
  j["kind"] = "solve_report";
  j["lambda"] = rep.lambda;
  j["log_partition"] = rep.log_partition;
  j["expected_loss"] = rep.expected_loss;
  j["non_monotone"] = rep.non_monotone;
  j["sigma"] = s.values();
  j["chain"] = chain_to_json(chain);
  {
    json dists = json::array();
    for (const auto& d : rep.level_dists) dists.push_back(d.probs());
    j["level_dists"] = std::move(dists);
  }
  j["level_logZ"] = rep.level_logZ;
  {
    // Row y of conditional i is stored aligned with step i's preimage of y.
    json conds = json::array();
    for (std::size_t i = 0; i < rep.conditionals.size(); ++i) {
      json rows = json::array();
      for (std::size_t y = 0; y < rep.conditionals[i].coarse_size(); ++y)
        rows.push_back(rep.conditionals[i].row(y));
      conds.push_back(std::move(rows));
    }
    j["conditionals"] = std::move(conds);
  }
  j["joint"] = rep.joint ? json(rep.joint->probs()) : json(nullptr);
  j["entropy_vector"] = rep.entropy_vector;
  return j;
}

struct LoadedReport {
  SolveReport report;
  TransformChain chain{std::vector<TransformStep>{}};
  SigmaSchedule sigma{std::vector<double>{1.0}};
};

inline LoadedReport report_from_json(const json& j) {
  if (!j.is_object() || j.value("kind", "") != std::string("solve_report"))
    throw schema_error("not a solve_report document");
  detail::reject_unknown_keys(
      j,
      {"kind", "lambda", "log_partition", "expected_loss", "non_monotone", "sigma",
       "chain", "level_dists", "level_logZ", "conditionals", "joint", "entropy_vector"},
      "solve_report");
  LoadedReport out;
  out.report.lambda = detail::require_finite_number(j.at("lambda"), "lambda");
  out.report.log_partition =
      detail::require_finite_number(j.at("log_partition"), "log_partition");
  out.report.expected_loss =
      detail::require_finite_number(j.at("expected_loss"), "expected_loss");
  if (!j.at("non_monotone").is_boolean())
    throw schema_error("non_monotone must be a boolean");
  out.report.non_monotone = j.at("non_monotone").get<bool>();
  out.sigma = SigmaSchedule(detail::number_array(j.at("sigma"), "sigma"));

  if (!j.contains("level_dists") || !j.at("level_dists").is_array() ||
      j.at("level_dists").empty())
    throw schema_error("solve_report needs level_dists");
  for (const auto& d : j.at("level_dists"))
    out.report.level_dists.emplace_back(detail::number_array(d, "level_dists entry"));

  const std::size_t finest = out.report.level_dists.front().n();
  out.chain = parse_chain(j.at("chain"), finest);
  if (out.chain.depth() != out.report.level_dists.size() ||
      out.chain.depth() != out.sigma.depth())
    throw schema_error("inconsistent depth across chain, sigma, level_dists");

  out.report.level_logZ = detail::number_array(j.at("level_logZ"), "level_logZ");
  if (out.report.level_logZ.size() != out.chain.depth())
    throw schema_error("level_logZ depth mismatch");

  if (!j.at("conditionals").is_array() ||
      j.at("conditionals").size() != out.chain.depth() - 1)
    throw schema_error("conditionals must hold depth-1 tables");
  for (std::size_t i = 0; i < out.chain.depth() - 1; ++i) {
    const TransformStep& step = out.chain.step(i + 1);
    ConditionalTable table(step);
    const json& rows = j.at("conditionals").at(i);
    if (!rows.is_array() || rows.size() != step.codomain_size())
      throw schema_error("conditional " + std::to_string(i + 1) + " has wrong row count");
    for (std::size_t y = 0; y < step.codomain_size(); ++y) {
      std::vector<double> row = detail::number_array(rows.at(y), "conditional row");
      if (row.size() != step.preimage(y).size())
        throw schema_error("conditional row length != preimage size");
      table.row(y) = std::move(row);
    }
    out.report.conditionals.push_back(std::move(table));
  }

  if (!j.at("joint").is_null())
    out.report.joint = TabularDistribution(detail::number_array(j.at("joint"), "joint"));
  out.report.entropy_vector =
      detail::number_array(j.at("entropy_vector"), "entropy_vector");
  if (out.report.entropy_vector.size() != out.chain.depth())
    throw schema_error("entropy_vector depth mismatch");
  return out;
}

// ---------------------------------------------------------------------------
// CSV writers
// ---------------------------------------------------------------------------

inline void write_pareto_csv(std::ostream& os, const std::vector<ParetoPoint>& points) {
  if (points.empty()) {
    os << "lambda,logZ\n";
    return;
  }
  const std::size_t d = points.front().sigma.size();
  for (std::size_t i = 1; i <= d; ++i) os << "sigma_" << i << ",";
  for (std::size_t i = 1; i <= d; ++i) os << "H_" << i << ",";
  os << "lambda,logZ\n";
  for (const auto& p : points) {
    for (double v : p.sigma) os << fmt17(v) << ",";
    for (double v : p.entropy_vector) os << fmt17(v) << ",";
    os << fmt17(p.lambda) << "," << fmt17(p.log_partition) << "\n";
  }
}

inline void write_ising_flow_csv(std::ostream& os, const ising::IsingFlow& flow) {
  const auto logZ =
      ising::ising_level_log_normalizers(flow, flow.levels.front().n);
  os << "level,n,theta,logZ\n";
  for (std::size_t i = 0; i < flow.levels.size(); ++i)
    os << (i + 1) << "," << flow.levels[i].n << "," << fmt17(flow.levels[i].theta)
       << "," << fmt17(logZ[i]) << "\n";
}

inline void write_gaussian_flow_csv(std::ostream& os,
                                    const gaussian::GaussianFlowReport& rep) {
  const std::size_t k = rep.k;
  os << "level,m,coeff,logZ";
  for (std::size_t r = 1; r <= k; ++r)
    for (std::size_t c = 1; c <= k; ++c) os << ",A_" << r << "_" << c;
  for (std::size_t r = 1; r <= k; ++r)
    for (std::size_t c = 1; c <= k; ++c) os << ",B_" << r << "_" << c;
  os << "\n";
  for (std::size_t i = 0; i < rep.levels.size(); ++i) {
    const auto& lvl = rep.levels[i];
    os << (i + 1) << "," << lvl.m << "," << fmt17(lvl.coeff) << ","
       << fmt17(rep.level_logZ[i]);
    for (std::size_t r = 0; r < k; ++r)
      for (std::size_t c = 0; c < k; ++c) os << "," << fmt17(lvl.A(r, c));
    for (std::size_t r = 0; r < k; ++r)
      for (std::size_t c = 0; c < k; ++c) os << "," << fmt17(lvl.B(r, c));
    os << "\n";
  }
}

// Long format, one row per (level, component), carrying both the operator-
// semantics parameter and the shift-free diagnostic with their gap.
inline void write_dirichlet_flow_csv(std::ostream& os,
                                     const dirichlet::DirichletFlowDiagnostic& diag) {
  os << "level,component,beta,beta_shift_free,gap\n";
  for (std::size_t i = 0; i < diag.flow.size(); ++i)
    for (std::size_t c = 0; c < diag.flow[i].size(); ++c) {
      const double b = diag.flow[i].beta[c];
      const double p = diag.shift_free[i].beta[c];
      os << (i + 1) << "," << (c + 1) << "," << fmt17(b) << "," << fmt17(p) << ","
         << fmt17(b - p) << "\n";
    }
}

inline void write_vector_samples_csv(std::ostream& os, std::size_t dim,
                                     const std::vector<std::vector<double>>& rows) {
  for (std::size_t i = 1; i <= dim; ++i) os << "x_" << i << (i == dim ? "\n" : ",");
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i)
      os << fmt17(r[i]) << (i + 1 == r.size() ? "\n" : ",");
  }
}

inline void write_ising_samples_csv(std::ostream& os, std::size_t n,
                                    const std::vector<std::vector<int>>& rows) {
  for (std::size_t i = 1; i <= n; ++i) os << "s_" << i << (i == n ? "\n" : ",");
  for (const auto& r : rows)
    for (std::size_t i = 0; i < r.size(); ++i)
      os << r[i] << (i + 1 == r.size() ? "\n" : ",");
}

// ---------------------------------------------------------------------------
// Bit-packed spin samples: "HIME-ISING-1", u32 n (LE), u64 count (LE),
// then ceil(n/8) bytes per configuration, bit j of the stream = spin j up,
// LSB-first within each byte.
// ---------------------------------------------------------------------------

inline constexpr char kIsingMagic[12] = {'H', 'I', 'M', 'E', '-', 'I',
                                         'S', 'I', 'N', 'G', '-', '1'};

inline void write_ising_binary(std::ostream& os, std::size_t n,
                               const std::vector<std::vector<int>>& samples) {
  os.write(kIsingMagic, sizeof kIsingMagic);
  unsigned char hdr[12];
  for (int b = 0; b < 4; ++b) hdr[b] = (n >> (8 * b)) & 0xff;
  const std::uint64_t count = samples.size();
  for (int b = 0; b < 8; ++b) hdr[4 + b] = (count >> (8 * b)) & 0xff;
  os.write(reinterpret_cast<const char*>(hdr), sizeof hdr);
  const std::size_t bytes = (n + 7) / 8;
  std::vector<unsigned char> buf(bytes);
  for (const auto& spins : samples) {
    if (spins.size() != n) throw schema_error("sample length != n");
    std::fill(buf.begin(), buf.end(), 0);
    for (std::size_t j = 0; j < n; ++j)
      if (spins[j] == 1) buf[j / 8] |= static_cast<unsigned char>(1u << (j % 8));
    os.write(reinterpret_cast<const char*>(buf.data()), bytes);
  }
}

struct IsingSampleFile {
  std::size_t n = 0;
  std::vector<std::vector<int>> samples;
};

inline IsingSampleFile read_ising_binary(std::istream& is) {
  char magic[12];
  if (!is.read(magic, sizeof magic) ||
      !std::equal(magic, magic + 12, kIsingMagic))
    throw schema_error("not a HIME-ISING-1 file (bad magic)");
  unsigned char hdr[12];
  if (!is.read(reinterpret_cast<char*>(hdr), sizeof hdr))
    throw schema_error("truncated HIME-ISING-1 header");
  IsingSampleFile out;
  for (int b = 3; b >= 0; --b) out.n = (out.n << 8) | hdr[b];
  std::uint64_t count = 0;
  for (int b = 7; b >= 0; --b) count = (count << 8) | hdr[4 + b];
  if (out.n == 0) throw schema_error("HIME-ISING-1 header has n = 0");
  const std::size_t bytes = (out.n + 7) / 8;
  std::vector<unsigned char> buf(bytes);
  for (std::uint64_t i = 0; i < count; ++i) {
    if (!is.read(reinterpret_cast<char*>(buf.data()), bytes))
      throw schema_error("truncated HIME-ISING-1 payload");
    std::vector<int> spins(out.n);
    for (std::size_t j = 0; j < out.n; ++j)
      spins[j] = (buf[j / 8] >> (j % 8)) & 1u ? 1 : -1;
    out.samples.push_back(std::move(spins));
  }
  return out;
}

}  // namespace hime::io
