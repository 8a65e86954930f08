#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "riglab/adjoint.hpp"
#include "riglab/approx.hpp"
#include "riglab/basis.hpp"
#include "riglab/matfun.hpp"
#include "riglab/report.hpp"
#include "riglab/rigging.hpp"
#include "riglab/rng.hpp"

namespace riglab {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Command { Verify, Yosida, Metric, Basis, H2Bound };
enum class RiggingFamily { Identity, RandomDiagonal, WienerLike, Explicit };

inline std::string command_name(Command c) {
  switch (c) {
    case Command::Verify: return "verify";
    case Command::Yosida: return "yosida";
    case Command::Metric: return "metric";
    case Command::Basis: return "basis";
    case Command::H2Bound: return "h2bound";
  }
  return "?";
}

inline Command command_from_name(const std::string& s) {
  if (s == "verify") return Command::Verify;
  if (s == "yosida") return Command::Yosida;
  if (s == "metric") return Command::Metric;
  if (s == "basis") return Command::Basis;
  if (s == "h2bound") return Command::H2Bound;
  throw ConfigError("unknown command '" + s + "'");
}

inline std::string family_name(RiggingFamily f) {
  switch (f) {
    case RiggingFamily::Identity: return "identity";
    case RiggingFamily::RandomDiagonal: return "random-diagonal";
    case RiggingFamily::WienerLike: return "wiener-like";
    case RiggingFamily::Explicit: return "explicit";
  }
  return "?";
}

inline RiggingFamily family_from_name(const std::string& s) {
  if (s == "identity") return RiggingFamily::Identity;
  if (s == "random-diagonal") return RiggingFamily::RandomDiagonal;
  if (s == "wiener-like") return RiggingFamily::WienerLike;
  if (s == "explicit") return RiggingFamily::Explicit;
  throw ConfigError("unknown rigging family '" + s + "'");
}

struct OutputSpec {
  std::string path;            // empty = stdout
  std::string format = "json"; // "json" or "csv"
};

struct ExperimentConfig {
  Command command = Command::Verify;
  std::vector<int> dims;
  std::vector<double> p_values;
  int ensemble = 1;
  std::uint64_t seed = 0;
  RiggingFamily family = RiggingFamily::Identity;
  std::vector<double> lambdas;  // yosida
  std::vector<double> ts;      // yosida
  json explicit_rigging;       // family == Explicit
  json explicit_operator;      // optional row-major n*n array
  OutputSpec output;

  void validate() const {
    if (ensemble < 1) throw ConfigError("ensemble must be >= 1");
    if (dims.empty()) throw ConfigError("dims must be nonempty");
    for (int d : dims)
      if (d < 1) throw ConfigError("dims must be >= 1");
    if (p_values.empty()) throw ConfigError("p_values must be nonempty");
    for (double p : p_values)
      if (!(p >= 1.0)) throw ConfigError("p_values entries must satisfy p >= 1");
    if (command == Command::Yosida) {
      if (lambdas.empty()) throw ConfigError("yosida requires a nonempty lambda grid");
      if (ts.empty()) throw ConfigError("yosida requires a nonempty time grid");
      for (std::size_t i = 0; i < lambdas.size(); ++i) {
        if (!(lambdas[i] > 0.0)) throw ConfigError("lambdas must be positive");
        if (i > 0 && !(lambdas[i] > lambdas[i - 1]))
          throw ConfigError("lambdas must be strictly increasing");
      }
      for (double t : ts)
        if (!(t >= 0.0)) throw ConfigError("ts must be >= 0");
    }
    if (family == RiggingFamily::Explicit) {
      if (explicit_rigging.is_null()) throw ConfigError("explicit family requires a rigging");
      const int n = explicit_rigging.at("n").get<int>();
      for (int d : dims)
        if (d != n) throw ConfigError("dims must equal the explicit rigging dimension");
    }
    if (!explicit_operator.is_null()) {
      if (dims.size() != 1) throw ConfigError("explicit operator requires a single dim");
      const std::size_t n = static_cast<std::size_t>(dims[0]);
      if (explicit_operator.size() != n * n)
        throw ConfigError("explicit operator must be a row-major n*n array");
    }
    if (output.format != "json" && output.format != "csv")
      throw ConfigError("output format must be 'json' or 'csv'");
  }

  static ExperimentConfig from_json(const json& j) {
    ExperimentConfig c;
    if (j.contains("command")) c.command = command_from_name(j.at("command").get<std::string>());
    if (j.contains("dims")) c.dims = j.at("dims").get<std::vector<int>>();
    if (j.contains("p_values")) {
      for (const auto& jp : j.at("p_values"))
        c.p_values.push_back(BanachNorm::exponent_from_json(jp));
    }
    if (j.contains("ensemble")) c.ensemble = j.at("ensemble").get<int>();
    if (j.contains("seed")) {
      if (j.at("seed").is_string())
        c.seed = std::stoull(j.at("seed").get<std::string>());
      else
        c.seed = j.at("seed").get<std::uint64_t>();
    }
    if (j.contains("rigging_family"))
      c.family = family_from_name(j.at("rigging_family").get<std::string>());
    if (j.contains("rigging")) {
      c.explicit_rigging = j.at("rigging");
      if (!j.contains("rigging_family")) c.family = RiggingFamily::Explicit;
    }
    if (j.contains("operator")) c.explicit_operator = j.at("operator");
    if (j.contains("lambdas")) c.lambdas = j.at("lambdas").get<std::vector<double>>();
    if (j.contains("ts")) c.ts = j.at("ts").get<std::vector<double>>();
    if (j.contains("output")) {
      const auto& jo = j.at("output");
      if (jo.contains("path")) c.output.path = jo.at("path").get<std::string>();
      if (jo.contains("format")) c.output.format = jo.at("format").get<std::string>();
    }
    return c;
  }

  json to_json() const {
    json jp = json::array();
    for (double p : p_values) {
      if (std::isinf(p))
        jp.push_back("inf");
      else
        jp.push_back(p);
    }
    json j{{"command", command_name(command)},
           {"dims", dims},
           {"p_values", jp},
           {"ensemble", ensemble},
           {"rigging_family", family_name(family)},
           {"output", json{{"path", output.path}, {"format", output.format}}}};
    if (seed <= (1ULL << 53))
      j["seed"] = seed;
    else
      j["seed"] = std::to_string(seed);
    if (!lambdas.empty()) j["lambdas"] = lambdas;
    if (!ts.empty()) j["ts"] = ts;
    if (!explicit_rigging.is_null()) j["rigging"] = explicit_rigging;
    if (!explicit_operator.is_null()) j["operator"] = explicit_operator;
    return j;
  }
};

struct CaseResult {
  int dim = 0;
  double p = 2.0;
  int member = 0;
  std::uint64_t case_seed = 0;
  std::vector<PropertyReport> reports;
  std::vector<ConvergenceTable> tables;  // yosida
  json extra;                            // per-lambda approximators etc.

  bool all_passed() const {
    for (const auto& r : reports)
      if (!r.all_passed()) return false;
    for (const auto& t : tables)
      if (!t.checks.all_passed()) return false;
    return true;
  }

  json to_json() const {
    json jr = json::array();
    for (const auto& r : reports) jr.push_back(r.to_json());
    json j{{"dim", dim},
           {"member", member},
           {"case_seed", case_seed},
           {"reports", jr}};
    if (std::isinf(p))
      j["p"] = "inf";
    else
      j["p"] = p;
    if (!tables.empty()) {
      json jt = json::array();
      for (const auto& t : tables) jt.push_back(t.to_json());
      j["tables"] = jt;
    }
    if (!extra.is_null()) j["extra"] = extra;
    return j;
  }
};

struct ReportBundle {
  ExperimentConfig config;
  std::vector<CaseResult> cases;
  json aggregate;
  double wall_clock_s = 0.0;

  bool all_passed() const {
    for (const auto& c : cases)
      if (!c.all_passed()) return false;
    return true;
  }

  json to_json() const {
    json jc = json::array();
    for (const auto& c : cases) jc.push_back(c.to_json());
    return json{{"config", config.to_json()},
                {"cases", jc},
                {"aggregate", aggregate},
                {"wall_clock_s", wall_clock_s}};
  }

  std::string to_csv() const;
};

namespace detail {

inline std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline Rigging build_case_rigging(const ExperimentConfig& cfg, int n, double p,
                                  SplitMix64& rng) {
  switch (cfg.family) {
    case RiggingFamily::Identity:
      return make_rigging(n, BanachNorm::lp(p), Eigen::MatrixXd::Identity(n, n),
                          Eigen::MatrixXd::Identity(n, n));
    case RiggingFamily::RandomDiagonal: {
      const Eigen::VectorXd w2 = rng.log_uniform_diagonal(n, 0.25, 4.0);
      const Eigen::VectorXd t12 = rng.log_uniform_diagonal(n, 0.25, 4.0);
      return make_rigging(n, BanachNorm::lp(p), Eigen::MatrixXd(w2.asDiagonal()),
                          Eigen::MatrixXd(t12.asDiagonal()));
    }
    case RiggingFamily::WienerLike: return wiener_like_rigging(n);
    case RiggingFamily::Explicit: return Rigging::from_json(cfg.explicit_rigging);
  }
  throw ConfigError("unknown rigging family");
}

inline Eigen::MatrixXd build_case_operator(const ExperimentConfig& cfg, int n,
                                           SplitMix64& rng) {
  if (!cfg.explicit_operator.is_null()) return matrix_from_json(cfg.explicit_operator, n, n);
  return rng.normal_matrix(n, n);
}

/// Lemma-style orthogonality checks: symmetry of the relation on random
/// subspace pairs, plus a constructed W2-orthogonal pair as a positive case.
inline PropertyReport check_orthogonality(const Rigging& r, int pairs, std::uint64_t seed) {
  PropertyReport rep;
  rep.name = "orthogonality";
  rep.seed = seed;
  rep.trials = pairs;
  SplitMix64 rng(seed);
  const int k = std::max(1, r.n / 2);
  WorstCase symmetry, positive;
  for (int t = 0; t < pairs; ++t) {
    const Eigen::MatrixXd U = rng.normal_matrix(r.n, k);
    const Eigen::MatrixXd V = rng.normal_matrix(r.n, k);
    const bool uv = is_orthogonal(r, U, V);
    const bool vu = is_orthogonal(r, V, U);
    symmetry.update(uv == vu ? 0.0 : 1.0, json{{"U", to_json_array(U)}, {"V", to_json_array(V)}});

    // The W2-orthogonal complement of span(U) must test orthogonal to U.
    Eigen::FullPivLU<Eigen::MatrixXd> lu((r.W2 * U).transpose());
    const Eigen::MatrixXd C = lu.kernel();
    if (C.cols() > 0)
      positive.update(is_orthogonal(r, U, C) ? 0.0 : 1.0, json{{"U", to_json_array(U)}});
  }
  rep.asserted.push_back(symmetry.as_asserted("orthogonality_symmetric", 0.0));
  rep.asserted.push_back(positive.as_asserted("complement_orthogonal", 0.0));
  return rep;
}

inline void run_verify_case(const ExperimentConfig& cfg, CaseResult& cr, const Rigging& r,
                            SplitMix64& rng) {
  const std::uint64_t s_embed = rng.next_u64();
  const std::uint64_t s_vn = rng.next_u64();
  const std::uint64_t s_orth = rng.next_u64();
  const Eigen::MatrixXd Am = build_case_operator(cfg, r.n, rng);
  const Eigen::MatrixXd G = rng.normal_matrix(r.n, r.n);

  cr.reports.push_back(check_embedding(r, 64, s_embed));
  cr.reports.push_back(check_vonneumann(Operator(r, Am), 32, s_vn));
  const Eigen::MatrixXd S = 0.5 * (G + G.transpose());
  cr.reports.push_back(check_lax(Operator(r, r.W2_llt.solve(S))));
  cr.reports.push_back(check_h2_bound(Operator(r, Am)));
  cr.reports.push_back(check_orthogonality(r, 8, s_orth));
}

inline void run_yosida_case(const ExperimentConfig& cfg, CaseResult& cr, const Rigging& r,
                            SplitMix64& rng) {
  const Operator A(r, build_case_operator(cfg, r.n, rng));
  std::vector<Eigen::VectorXd> xs;
  for (int i = 0; i < 8; ++i) {
    Eigen::VectorXd x = rng.normal_vector(r.n);
    const double nb = norm(r, x, Space::B);
    if (nb > 0.0) xs.push_back(x / nb);
  }
  if (xs.empty()) xs.push_back(Eigen::VectorXd::Unit(r.n, 0));
  cr.tables.push_back(semigroup_experiment(A, cfg.lambdas, cfg.ts, xs));

  json approximators = json::array();
  for (double lambda : cfg.lambdas) {
    const Operator Al = yosida_general(A, lambda);
    approximators.push_back(json{{"lambda", lambda}, {"matrix", to_json_array(Al.M)}});
  }
  cr.extra = json{{"operator", to_json_array(A.M)}, {"approximators", approximators}};
}

inline void run_metric_case(const ExperimentConfig& cfg, CaseResult& cr, const Rigging& r,
                            SplitMix64& rng) {
  PropertyReport rep;
  rep.name = "metric";
  rep.seed = cr.case_seed;
  const int triples = 4;
  rep.trials = triples;
  WorstCase symmetry, self_zero, triangle, contraction;
  WorstCase growth;
  double sep_min = kInf;
  json sep_witness;
  for (int t = 0; t < triples; ++t) {
    const Operator A(r, build_case_operator(cfg, r.n, rng));
    const Operator B(r, rng.normal_matrix(r.n, r.n));
    const Operator C(r, rng.normal_matrix(r.n, r.n));
    const json wit{{"A", to_json_array(A.M)}, {"B", to_json_array(B.M)}};
    const double dab = operator_metric(A, B);
    const double dba = operator_metric(B, A);
    symmetry.update(std::abs(dab - dba), wit);
    self_zero.update(operator_metric(A, A), json{{"A", to_json_array(A.M)}});
    const double dac = operator_metric(A, C);
    const double dbc = operator_metric(B, C);
    triangle.update((dac - dab - dbc) / std::max(1.0, dab + dbc),
                    json{{"A", to_json_array(A.M)},
                         {"B", to_json_array(B.M)},
                         {"C", to_json_array(C.M)}});
    const double a0 = opnorm(bounded_transform(A), Space::B, Space::B, r).value;
    if (r.is_hilbert_identity())
      contraction.update(a0 - 1.0, json{{"A", to_json_array(A.M)}});
    growth.update(a0, json{{"A", to_json_array(A.M)}});
    const double sep = (A.M - B.M).norm();
    if (sep > 1e-8 && dab / sep < sep_min) {
      sep_min = dab / sep;
      sep_witness = wit;
    }
  }
  rep.asserted.push_back(symmetry.as_asserted("symmetry_exact", 0.0));
  rep.asserted.push_back(self_zero.as_asserted("self_distance_zero", 0.0));
  rep.asserted.push_back(triangle.as_asserted("triangle_inequality", 1e-12));
  if (r.is_hilbert_identity())
    rep.asserted.push_back(contraction.as_asserted("bounded_transform_contraction", 1e-10));
  rep.measured.push_back(
      MeasuredQuantity{"bounded_transform_max_b_norm", growth.defect(), growth.witness()});
  rep.measured.push_back(MeasuredQuantity{
      "separation_min_ratio", std::isfinite(sep_min) ? sep_min : 0.0, sep_witness});
  cr.reports.push_back(std::move(rep));
}

inline void run_basis_case(CaseResult& cr, const Rigging& r, SplitMix64& rng) {
  const std::uint64_t s = rng.next_u64();
  try {
    const MBasis b = markushevich(r);
    cr.reports.push_back(check_basis(b, 200, s));
  } catch (const std::invalid_argument& e) {
    PropertyReport rep;
    rep.name = "basis";
    rep.seed = s;
    rep.asserted.push_back(
        AssertedProperty{"constructible", false, 1.0, json{{"error", e.what()}}});
    cr.reports.push_back(std::move(rep));
  }
}

inline void run_h2bound_case(const ExperimentConfig& cfg, CaseResult& cr, const Rigging& r,
                             SplitMix64& rng) {
  const int ops = 8;
  for (int t = 0; t < ops; ++t)
    cr.reports.push_back(check_h2_bound(Operator(r, build_case_operator(cfg, r.n, rng))));
}

inline json aggregate_reports(const std::vector<CaseResult>& cases) {
  struct PropStat {
    long count = 0;
    long fails = 0;
    double max_defect = 0.0;
  };
  std::map<std::string, PropStat> props;
  std::map<std::string, std::vector<double>> measured;
  long total = 0, failed = 0;
  auto eat_report = [&](const PropertyReport& r) {
    for (const auto& a : r.asserted) {
      auto& st = props[r.name + "." + a.prop];
      ++st.count;
      ++total;
      if (!a.pass) {
        ++st.fails;
        ++failed;
      }
      st.max_defect = std::max(st.max_defect, a.defect);
    }
    for (const auto& m : r.measured) measured[r.name + "." + m.quantity].push_back(m.value);
  };
  for (const auto& c : cases) {
    for (const auto& r : c.reports) eat_report(r);
    for (const auto& t : c.tables) eat_report(t.checks);
  }
  json jp;
  for (const auto& [k, v] : props)
    jp[k] = json{{"count", v.count}, {"fails", v.fails}, {"max_defect", v.max_defect}};
  json jm;
  for (auto& [k, vals] : measured) {
    std::sort(vals.begin(), vals.end());
    auto q = [&](double f) { return vals[static_cast<std::size_t>(f * (vals.size() - 1))]; };
    jm[k] = json{{"min", vals.front()}, {"q25", q(0.25)},   {"median", q(0.5)},
                 {"q75", q(0.75)},      {"max", vals.back()}};
  }
  return json{{"asserted_total", total},
              {"asserted_failed", failed},
              {"pass_rate", total ? 1.0 - static_cast<double>(failed) / total : 1.0},
              {"properties", jp},
              {"measured", jm}};
}

}  // namespace detail

/// Runs the configured ensemble. Deterministic given the config: case seeds
/// are master_seed XOR case_index with cases enumerated dims-major, then
/// p_values, then ensemble member; all per-case randomness is drawn from one
/// SplitMix64 stream in a fixed order.
inline ReportBundle run(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  ReportBundle bundle;
  bundle.config = cfg;

  std::uint64_t index = 0;
  for (int dim : cfg.dims) {
    for (double p : cfg.p_values) {
      for (int m = 0; m < cfg.ensemble; ++m, ++index) {
        CaseResult cr;
        cr.dim = dim;
        cr.p = p;
        cr.member = m;
        cr.case_seed = case_seed(cfg.seed, index);
        SplitMix64 rng(cr.case_seed);
        const Rigging r = detail::build_case_rigging(cfg, dim, p, rng);
        switch (cfg.command) {
          case Command::Verify: detail::run_verify_case(cfg, cr, r, rng); break;
          case Command::Yosida: detail::run_yosida_case(cfg, cr, r, rng); break;
          case Command::Metric: detail::run_metric_case(cfg, cr, r, rng); break;
          case Command::Basis: detail::run_basis_case(cr, r, rng); break;
          case Command::H2Bound: detail::run_h2bound_case(cfg, cr, r, rng); break;
        }
        bundle.cases.push_back(std::move(cr));
      }
    }
  }
  bundle.aggregate = detail::aggregate_reports(bundle.cases);
  bundle.wall_clock_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return bundle;
}

inline std::string ReportBundle::to_csv() const {
  std::ostringstream out;
  if (config.command == Command::Yosida) {
    out << ConvergenceTable::csv_header() << "\n";
    char buf[512];
    for (const auto& c : cases)
      for (const auto& t : c.tables)
        for (const auto& row : t.rows) {
          std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g", row.lambda,
                        row.approx_err, row.t, row.semigroup_err, row.expm_norm_B);
          out << buf << "\n";
        }
    return out.str();
  }
  out << "dim,p,member,case_seed,report,kind,name,pass,value\n";
  for (const auto& c : cases) {
    const std::string prefix = std::to_string(c.dim) + "," + detail::fmt17(c.p) + "," +
                               std::to_string(c.member) + "," + std::to_string(c.case_seed);
    for (const auto& r : c.reports) {
      for (const auto& a : r.asserted)
        out << prefix << "," << r.name << ",assert," << a.prop << "," << (a.pass ? 1 : 0)
            << "," << detail::fmt17(a.defect) << "\n";
      for (const auto& m : r.measured)
        out << prefix << "," << r.name << ",measure," << m.quantity << ",,"
            << detail::fmt17(m.value) << "\n";
    }
  }
  return out.str();
}

inline std::string emit_to_string(const ReportBundle& bundle, const std::string& format) {
  if (format == "csv") return bundle.to_csv();
  if (format == "json") return bundle.to_json().dump(2) + "\n";
  throw ConfigError("output format must be 'json' or 'csv'");
}

/// Writes the bundle to its configured path (stdout when the path is empty).
inline void emit(const ReportBundle& bundle, std::ostream& out, const std::string& format) {
  out << emit_to_string(bundle, format);
  if (!out) throw std::runtime_error("emit: write failed");
}

inline void emit(const ReportBundle& bundle, const std::string& path,
                 const std::string& format) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("emit: cannot open '" + path + "'");
  emit(bundle, f, format);
}

}  // namespace riglab
