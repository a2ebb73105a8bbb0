#pragma once

// Config-driven experiment runner behind the qhspec command-line tool.
//
// A config is a flat `key = value` text file (or a JSON object with the same
// keys). Each run evaluates the requested checks at one parameter point, or
// at every point of a sweep axis, and renders one ReportRow per point as CSV
// or JSON. All numbers come from the library API; the runner only wires
// inputs to checks and classifies the results.
//
// Exit codes: 0 all asserted checks pass, 2 an asserted check fails,
// 3 nothing failed but every row is branch-invalid, 1 usage/config error.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "qhspec/composite_system.hpp"
#include "qhspec/dual_calculus.hpp"
#include "qhspec/fock_algebra.hpp"
#include "qhspec/metric_calculus.hpp"
#include "qhspec/position_rep.hpp"
#include "qhspec/sampling.hpp"
#include "qhspec/swanson_model.hpp"

namespace qhspec::cli {

enum class Model { Swanson, CustomMatrixFile };
enum class MetricSource { RhoExponential, RhoDiagonal, Oracle };
enum class Format { Csv, Json };

inline std::string to_string(MetricSource m) {
  switch (m) {
    case MetricSource::RhoExponential: return "rho_exponential";
    case MetricSource::RhoDiagonal: return "rho_diagonal";
    case MetricSource::Oracle: return "oracle";
  }
  return "?";
}

struct SweepAxis {
  std::string parameter;
  double from = 0.0;
  double to = 0.0;
  int steps = 0;
  std::vector<double> values;  ///< explicit grid; overrides from/to/steps

  std::vector<double> grid() const {
    if (!values.empty()) return values;
    std::vector<double> g;
    for (int i = 0; i < steps; ++i) {
      g.push_back(from + (to - from) * static_cast<double>(i) / static_cast<double>(steps - 1));
    }
    return g;
  }
};

struct ExperimentConfig {
  Model model = Model::Swanson;
  std::string matrix_file;
  double omega = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double z = 0.0;
  std::vector<double> masses{1.0};
  int truncation = 32;
  std::optional<int> margin;
  MetricSource metric_source = MetricSource::Oracle;
  std::vector<std::string> checks;
  std::optional<SweepAxis> sweep;
  int samples = 100;
  std::uint64_t seed = 1;
  int levels = 40;            ///< Hermite lmax for the orthonormality check
  int quadrature_nodes = 0;   ///< 0: 2·levels + 16
  int export_levels = 3;
  double grid_from = -6.0;
  double grid_to = 6.0;
  int grid_points = 121;
  std::string grid_out;
  std::string output;
  Format format = Format::Csv;
};

// ---------------------------------------------------------------------------
// Check catalogue

struct CheckSpec {
  const char* name;
  bool asserted_always;
  bool asserted_with_oracle;
  double threshold;
  bool swanson_only;
};

/// Fixed column order of the report.
inline const std::vector<CheckSpec>& check_catalogue() {
  static const std::vector<CheckSpec> specs = {
      {"real_spectrum", false, false, 1e-10, false},
      {"spectrum_law", false, false, 1e-8, true},
      {"mu_nu_discrepancy", false, false, 0.0, true},
      {"intertwining", false, true, 1e-10, false},
      {"intertwining_interior", false, false, 1e-6, false},
      {"hermiticity", false, false, 1e-6, false},
      {"metric_orthogonality", true, true, 1e-10, false},
      {"eigenfunction", false, false, 1e-7, false},
      {"orthonormality", true, true, 1e-10, false},
      {"composite_intertwining", false, true, 1e-9, false},
      {"product_metric", true, true, 1e-12, false},
      {"additivity", true, true, 1e-9, false},
      {"completeness", false, true, 1e-9, false},
      {"biorthogonality", false, true, 1e-9, false},
      {"expansion", false, true, 1e-9, false},
      {"extension_decomposition", true, true, 1e-10, false},
      {"symmetric_relation", false, true, 1e-10, false},
  };
  return specs;
}

inline const CheckSpec* find_check(const std::string& name) {
  for (const auto& c : check_catalogue())
    if (name == c.name) return &c;
  return nullptr;
}

inline std::vector<std::string> default_checks(const std::string& subcommand) {
  if (subcommand == "spectrum") return {"real_spectrum", "spectrum_law", "mu_nu_discrepancy"};
  if (subcommand == "metric-check") return {"intertwining", "intertwining_interior", "hermiticity"};
  if (subcommand == "composite-check")
    return {"composite_intertwining", "product_metric", "additivity", "completeness", "biorthogonality",
            "expansion"};
  if (subcommand == "dual-check") return {"extension_decomposition", "symmetric_relation"};
  if (subcommand == "position") return {"orthonormality", "metric_orthogonality", "eigenfunction"};
  if (subcommand == "sweep") return {"intertwining", "intertwining_interior"};
  return {};
}

inline bool known_subcommand(const std::string& s) {
  return s == "spectrum" || s == "metric-check" || s == "composite-check" || s == "dual-check" ||
         s == "position" || s == "sweep";
}

// ---------------------------------------------------------------------------
// Config parsing

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

[[noreturn]] inline void config_error(const std::string& why) {
  throw Error(ErrorCode::ConfigParseError, why);
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size() || !std::isfinite(d)) config_error("bad number for " + key + ": " + v);
    return d;
  } catch (const std::logic_error&) {
    config_error("bad number for " + key + ": " + v);
  }
}

inline long long parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long i = std::stoll(v, &pos);
    if (pos != v.size()) config_error("bad integer for " + key + ": " + v);
    return i;
  } catch (const std::logic_error&) {
    config_error("bad integer for " + key + ": " + v);
  }
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const unsigned long long i = std::stoull(v, &pos);
    if (pos != v.size() || (!v.empty() && v[0] == '-')) config_error("bad seed for " + key);
    return i;
  } catch (const std::logic_error&) {
    config_error("bad unsigned integer for " + key + ": " + v);
  }
}

inline std::map<std::string, std::string> flatten_json(const nlohmann::json& j) {
  std::map<std::string, std::string> kv;
  auto scalar = [](const nlohmann::json& v) -> std::string {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    if (v.is_number_unsigned()) return std::to_string(v.get<unsigned long long>());
    if (v.is_number()) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.17g", v.get<double>());
      return buf;
    }
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    config_error("unsupported JSON value");
  };
  auto list = [&](const nlohmann::json& v) {
    std::string s;
    for (const auto& e : v) s += (s.empty() ? "" : ",") + scalar(e);
    return s;
  };
  if (!j.is_object()) config_error("JSON config must be an object");
  for (const auto& [k, v] : j.items()) {
    if (v.is_object()) {
      for (const auto& [k2, v2] : v.items()) kv[k + "." + k2] = v2.is_array() ? list(v2) : scalar(v2);
    } else {
      kv[k] = v.is_array() ? list(v) : scalar(v);
    }
  }
  return kv;
}

}  // namespace detail

inline ExperimentConfig config_from_map(const std::map<std::string, std::string>& kv) {
  using namespace detail;
  ExperimentConfig c;
  auto get = [&](const std::string& k) -> std::optional<std::string> {
    auto it = kv.find(k);
    if (it == kv.end()) return std::nullopt;
    return it->second;
  };
  static const std::vector<std::string> known = {
      "model", "matrix_file", "omega", "alpha", "beta", "z", "masses", "truncation", "margin",
      "metric_source", "checks", "samples", "seed", "levels", "quadrature_nodes", "export_levels",
      "grid_from", "grid_to", "grid_points", "grid_out", "output", "format", "sweep.parameter",
      "sweep.from", "sweep.to", "sweep.steps", "sweep.values"};
  for (const auto& [k, v] : kv) {
    if (std::find(known.begin(), known.end(), k) == known.end()) config_error("unknown key '" + k + "'");
  }

  const std::string model = get("model").value_or("swanson");
  if (model == "swanson") {
    c.model = Model::Swanson;
  } else if (model == "custom-matrix-file") {
    c.model = Model::CustomMatrixFile;
  } else {
    config_error("model must be swanson or custom-matrix-file");
  }

  if (c.model == Model::Swanson) {
    const auto omega = get("omega");
    if (!omega) config_error("missing required key 'omega'");
    c.omega = parse_double("omega", *omega);
  } else {
    const auto f = get("matrix_file");
    if (!f) config_error("custom-matrix-file needs 'matrix_file'");
    c.matrix_file = *f;
  }
  if (auto v = get("alpha")) c.alpha = parse_double("alpha", *v);
  if (auto v = get("beta")) c.beta = parse_double("beta", *v);
  if (auto v = get("z")) c.z = parse_double("z", *v);
  if (auto v = get("masses")) {
    c.masses.clear();
    for (const auto& m : split_list(*v)) c.masses.push_back(parse_double("masses", m));
  }
  if (auto v = get("truncation")) c.truncation = static_cast<int>(parse_int("truncation", *v));
  if (auto v = get("margin")) c.margin = static_cast<int>(parse_int("margin", *v));
  if (auto v = get("metric_source")) {
    if (*v == "rho_exponential") c.metric_source = MetricSource::RhoExponential;
    else if (*v == "rho_diagonal") c.metric_source = MetricSource::RhoDiagonal;
    else if (*v == "oracle") c.metric_source = MetricSource::Oracle;
    else config_error("metric_source must be rho_exponential, rho_diagonal or oracle");
  }
  if (auto v = get("checks")) c.checks = split_list(*v);
  if (auto v = get("samples")) c.samples = static_cast<int>(parse_int("samples", *v));
  if (auto v = get("seed")) c.seed = parse_u64("seed", *v);
  if (auto v = get("levels")) c.levels = static_cast<int>(parse_int("levels", *v));
  if (auto v = get("quadrature_nodes")) c.quadrature_nodes = static_cast<int>(parse_int("quadrature_nodes", *v));
  if (auto v = get("export_levels")) c.export_levels = static_cast<int>(parse_int("export_levels", *v));
  if (auto v = get("grid_from")) c.grid_from = parse_double("grid_from", *v);
  if (auto v = get("grid_to")) c.grid_to = parse_double("grid_to", *v);
  if (auto v = get("grid_points")) c.grid_points = static_cast<int>(parse_int("grid_points", *v));
  if (auto v = get("grid_out")) c.grid_out = *v;
  if (auto v = get("output")) c.output = *v;
  if (auto v = get("format")) {
    if (*v == "csv") c.format = Format::Csv;
    else if (*v == "json") c.format = Format::Json;
    else config_error("format must be csv or json");
  }
  if (auto p = get("sweep.parameter")) {
    SweepAxis ax;
    ax.parameter = *p;
    if (auto v = get("sweep.values")) {
      for (const auto& x : split_list(*v)) ax.values.push_back(parse_double("sweep.values", x));
    } else {
      const auto f = get("sweep.from"), t = get("sweep.to"), s = get("sweep.steps");
      if (!f || !t || !s) config_error("sweep needs from, to and steps (or values)");
      ax.from = parse_double("sweep.from", *f);
      ax.to = parse_double("sweep.to", *t);
      ax.steps = static_cast<int>(parse_int("sweep.steps", *s));
    }
    c.sweep = ax;
  } else if (get("sweep.from") || get("sweep.to") || get("sweep.steps") || get("sweep.values")) {
    config_error("sweep axis given without sweep.parameter");
  }
  return c;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
  const std::string t = detail::trim(text);
  if (!t.empty() && t.front() == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(t);
    } catch (const nlohmann::json::exception& e) {
      detail::config_error(std::string("JSON: ") + e.what());
    }
    return config_from_map(detail::flatten_json(j));
  }
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      detail::config_error("line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    if (key.empty()) detail::config_error("line " + std::to_string(lineno) + ": empty key");
    if (kv.count(key)) detail::config_error("duplicate key '" + key + "'");
    kv[key] = detail::trim(line.substr(eq + 1));
  }
  return config_from_map(kv);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) detail::config_error("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

/// Whitespace-separated square matrix; entries are `re` or `(re,im)`.
inline ComplexMatrix load_matrix_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) detail::config_error("cannot open matrix file '" + path + "'");
  std::vector<std::vector<cplx>> rows;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::istringstream is(line);
    std::vector<cplx> row;
    cplx v;
    while (is >> v) row.push_back(v);
    if (!is.eof()) detail::config_error("matrix file: unparsable entry");
    if (!row.empty()) rows.push_back(std::move(row));
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  if (n == 0) detail::config_error("matrix file is empty");
  ComplexMatrix m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) != n) {
      detail::config_error("matrix file is not square");
    }
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  return m;
}

/// Fills subcommand defaults and rejects inconsistent combinations.
inline void validate_config(ExperimentConfig& c, const std::string& subcommand) {
  using detail::config_error;
  if (c.checks.empty()) c.checks = default_checks(subcommand);
  if (c.checks.empty()) config_error("no checks requested");
  for (const auto& name : c.checks) {
    const CheckSpec* spec = find_check(name);
    if (!spec) config_error("unknown check '" + name + "'");
    if (spec->swanson_only && c.model != Model::Swanson) {
      config_error("check '" + name + "' needs the swanson model");
    }
  }
  if (c.model == Model::CustomMatrixFile && c.metric_source != MetricSource::Oracle) {
    config_error("closed-form metrics need the swanson model");
  }
  if (subcommand == "sweep" && !c.sweep) config_error("sweep needs a sweep axis");
  if (c.sweep) {
    static const std::vector<std::string> axes = {"omega", "alpha", "beta", "z", "truncation"};
    if (std::find(axes.begin(), axes.end(), c.sweep->parameter) == axes.end()) {
      config_error("sweep parameter must be one of omega, alpha, beta, z, truncation");
    }
    if (c.model != Model::Swanson) config_error("sweeps need the swanson model");
    if (c.sweep->values.empty() && c.sweep->steps < 2) config_error("sweep needs steps >= 2");
  }
  if (c.samples < 1) config_error("samples must be positive");
  if (c.truncation < 2 || c.truncation > kMaxSingleDim) config_error("truncation out of range");
  if (c.levels < 0) config_error("levels must be non-negative");
  if (c.grid_points < 2 || !(c.grid_to > c.grid_from)) config_error("invalid position grid");
}

// ---------------------------------------------------------------------------
// Report rows

struct Cell {
  enum class Kind { Value, BranchInvalid, Error };
  Kind kind = Kind::Value;
  double value = 0.0;
  std::string note;
  bool asserted = false;
  bool passed = true;
};

struct ReportRow {
  std::size_t index = 0;
  std::string parameter;  ///< swept parameter, empty for a single point
  double value = 0.0;
  SwansonParams params;
  BranchValidity branch_valid;
  std::string metric_source;
  std::map<std::string, Cell> residuals;
  std::vector<double> spectrum_head;
  std::string status;  ///< ok | fail | branch-invalid
  double elapsed_ms = 0.0;
};

namespace detail {

struct PointContext {
  const ExperimentConfig& cfg;
  SwansonParams params;
  std::optional<ComplexMatrix> custom;

  PointContext(const ExperimentConfig& c, SwansonParams p, std::optional<ComplexMatrix> m)
      : cfg(c), params(std::move(p)), custom(std::move(m)) {}

  std::optional<TruncatedOperator> h;
  std::optional<GeneratorSet> gens;
  std::optional<QuasiHermitianSystem> system;
  std::string system_failure;  ///< reason the metric is unavailable
  std::optional<Error> system_error;  ///< replayed for every metric check
  std::optional<CompositeSystem> composite;
  std::optional<BiorthogonalBasis> basis;
  std::optional<EigenPair> spectrum;

  const TruncatedOperator& hamiltonian() {
    if (!h) {
      if (custom) h = TruncatedOperator(*custom, FockTruncation(custom->rows(), 0));
      else h = build_swanson_hamiltonian(params);
    }
    return *h;
  }

  const EigenPair& eigen() {
    if (!spectrum) spectrum = eig_general(hamiltonian().matrix);
    return *spectrum;
  }

  /// Builds (H, η, ρ) for the configured metric source. Returns nullptr and
  /// records the reason when the source is not available at this point.
  const QuasiHermitianSystem* quasi_system() {
    if (system) return &*system;
    if (system_error) throw *system_error;
    if (!system_failure.empty()) return nullptr;
    const TruncatedOperator& a = hamiltonian();
    try {
      if (cfg.metric_source == MetricSource::Oracle) {
        MetricOperator eta = metric_from_spectrum(a);
        std::optional<ComplexMatrix> rho;
        try {
          rho = sqrtm_positive(eta.matrix());
          system.emplace(a, eta, *rho);
        } catch (const Error&) {
          system.emplace(a, eta);
        }
      } else {
        if (!gens) gens = build_generators(params.trunc);
        const TruncatedOperator rho = cfg.metric_source == MetricSource::RhoExponential
                                          ? build_rho_exponential(params, *gens)
                                          : build_rho_diagonal(params, *gens);
        system.emplace(QuasiHermitianSystem::from_rho(a, rho.matrix));
      }
    } catch (const Error& e) {
      system_failure = e.what();
      if (e.code() != ErrorCode::BranchInvalid && e.code() != ErrorCode::ComplexSpectrum) {
        system_error = e;
        throw;
      }
      return nullptr;
    }
    return &*system;
  }

  const CompositeSystem* composite_system() {
    if (composite) return &*composite;
    const QuasiHermitianSystem* s = quasi_system();
    if (!s) return nullptr;
    composite.emplace(s->A(), s->A(), s->eta(), s->eta());
    return &*composite;
  }

  const BiorthogonalBasis& composite_basis() {
    if (!basis) basis = biorthogonal_basis(*composite_system());
    return *basis;
  }
};

inline double max_expansion_residual(const BiorthogonalBasis& b, const ComplexMatrix& a, int samples,
                                     std::uint64_t seed) {
  Rng rng(seed);
  const double an = a.norm();
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    const ComplexVector v = random_vector(a.rows(), rng);
    const double scale = an * v.norm();
    worst = std::max(worst, (apply_via_expansion(b, v, false) - a * v).norm() / scale);
    worst = std::max(worst, (apply_via_expansion(b, v, true) - a.adjoint() * v).norm() / scale);
    worst = std::max(worst, (reconstruct_ket(b, expand_ket(b, v)) - v).norm() / v.norm());
  }
  return worst;
}

/// Returns the residual for one check, or nullopt when it is branch-invalid.
inline std::optional<double> evaluate_check(const std::string& name, PointContext& ctx) {
  const ExperimentConfig& cfg = ctx.cfg;
  if (name == "real_spectrum") return ctx.eigen().max_imag();
  if (name == "spectrum_law") {
    const auto count = std::min<Eigen::Index>(10, ctx.params.trunc.dim / 4);
    const auto ladder = swanson_ladder(ctx.params, count);
    double worst = 0.0;
    for (Eigen::Index l = 0; l < count; ++l) {
      worst = std::max(worst, std::abs(ctx.eigen().values(l).real() - ladder[static_cast<std::size_t>(l)]));
    }
    return worst;
  }
  if (name == "mu_nu_discrepancy") {
    if (!derive_params(ctx.params).branch_valid.mu_nu) return std::nullopt;
    return analytic_spectrum(ctx.params, std::min<Eigen::Index>(10, ctx.params.trunc.dim / 4)).discrepancy;
  }
  if (name == "orthonormality") {
    HermiteBasisSpec spec;
    spec.quadrature_nodes = cfg.quadrature_nodes;
    return orthonormality_check(spec, cfg.levels);
  }
  if (name == "additivity") {
    const TruncatedOperator& a = ctx.hamiltonian();
    CompositeSystem cs(a, a, MetricOperator(ComplexMatrix::Identity(a.dim(), a.dim())),
                       MetricOperator(ComplexMatrix::Identity(a.dim(), a.dim())));
    return spectrum_additivity(cs).max_discrepancy;
  }
  if (name == "extension_decomposition") {
    const TruncatedOperator& a = ctx.hamiltonian();
    CompositeSystem cs(a, a, MetricOperator(ComplexMatrix::Identity(a.dim(), a.dim())),
                       MetricOperator(ComplexMatrix::Identity(a.dim(), a.dim())));
    return check_extension_decomposition(cs, cfg.samples, cfg.seed);
  }

  // Everything below needs the metric.
  const QuasiHermitianSystem* sys = ctx.quasi_system();
  if (!sys) return std::nullopt;
  if (name == "intertwining") return sys->intertwining_residual();
  if (name == "intertwining_interior") return sys->interior_residual();
  if (name == "hermiticity") {
    if (!sys->rho()) throw Error(ErrorCode::MissingRho, "no square root of the metric");
    return hermitian_counterpart(*sys).interior_hermiticity;
  }
  if (name == "metric_orthogonality") {
    if (!sys->rho()) throw Error(ErrorCode::MissingRho, "no square root of the metric");
    const auto& t = sys->A().trunc;
    return metric_orthogonality_defect(*sys, static_cast<int>(t.dim));
  }
  if (name == "eigenfunction") {
    HermiteBasisSpec spec;
    spec.length_scale = 1.0 / std::sqrt(ctx.params.masses.front() * ctx.params.omega);
    return deformed_eigenfunction(*sys, 0, spec).residual;
  }
  if (name == "product_metric") return check_product_metric_equality(sys->eta(), sys->eta(), cfg.samples, cfg.seed);

  const CompositeSystem* cs = ctx.composite_system();
  if (!cs) return std::nullopt;
  if (name == "composite_intertwining") return cs->intertwining_residual();
  if (name == "completeness") return ctx.composite_basis().completeness_residual();
  if (name == "biorthogonality") return ctx.composite_basis().biorthogonality_residual();
  if (name == "expansion") {
    return max_expansion_residual(ctx.composite_basis(), cs->A().matrix, cfg.samples, cfg.seed);
  }
  if (name == "symmetric_relation") return check_symmetric_relation(*cs, cfg.samples, cfg.seed).max();
  throw Error(ErrorCode::ConfigParseError, "unknown check " + name);
}

inline SwansonParams point_params(const ExperimentConfig& cfg, const std::string& axis, double value) {
  SwansonParams p;
  p.omega = cfg.omega;
  p.alpha = cfg.alpha;
  p.beta = cfg.beta;
  p.z = cfg.z;
  p.masses = cfg.masses;
  int n = cfg.truncation;
  if (axis == "omega") p.omega = value;
  if (axis == "alpha") p.alpha = value;
  if (axis == "beta") p.beta = value;
  if (axis == "z") p.z = value;
  if (axis == "truncation") n = static_cast<int>(std::lround(value));
  p.trunc = cfg.margin ? FockTruncation(n, *cfg.margin) : FockTruncation::with_default_margin(n);
  return p;
}

}  // namespace detail

/// Evaluates every requested check at one parameter point.
inline ReportRow evaluate_point(const ExperimentConfig& cfg, std::size_t index, const std::string& axis,
                                double value, const std::optional<ComplexMatrix>& custom) {
  const auto t0 = std::chrono::steady_clock::now();
  ReportRow row;
  row.index = index;
  row.parameter = axis;
  row.value = value;
  row.metric_source = to_string(cfg.metric_source);
  detail::PointContext ctx(cfg, SwansonParams{}, custom);
  if (!custom) {
    ctx.params = detail::point_params(cfg, axis, value);
    ctx.params.validate();
    row.params = ctx.params;
    row.branch_valid = derive_params(ctx.params).branch_valid;
  } else {
    row.params.trunc = FockTruncation(custom->rows(), 0);
  }

  bool failed = false, any_invalid = false;
  for (const auto& name : cfg.checks) {
    const CheckSpec* spec = find_check(name);
    Cell cell;
    cell.asserted = spec->asserted_always ||
                    (spec->asserted_with_oracle && cfg.metric_source == MetricSource::Oracle);
    try {
      const auto v = detail::evaluate_check(name, ctx);
      if (v) {
        cell.value = *v;
        cell.passed = std::isfinite(*v) && *v <= spec->threshold;
      } else {
        cell.kind = Cell::Kind::BranchInvalid;
        cell.note = ctx.system_failure;
        cell.passed = true;
        any_invalid = true;
      }
    } catch (const Error& e) {
      cell.kind = Cell::Kind::Error;
      cell.note = std::string(qhspec::to_string(e.code()));
      cell.passed = false;
    }
    if (cell.asserted && !cell.passed) failed = true;
    row.residuals[name] = cell;
  }

  try {
    const EigenPair& ep = ctx.eigen();
    for (Eigen::Index k = 0; k < std::min<Eigen::Index>(8, ep.size()); ++k) {
      row.spectrum_head.push_back(ep.values(k).real());
    }
  } catch (const Error&) {
  }

  row.status = failed ? "fail" : (any_invalid ? "branch-invalid" : "ok");
  row.elapsed_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return row;
}

/// Relative residuals below this are rounding noise; a rise between two
/// such values does not count against convergence.
inline constexpr double kResidualNoiseFloor = 1e-14;

/// v is non-increasing within 10% (or stays under the noise floor).
inline bool non_increasing_within(const std::vector<double>& v, double slack = 0.1) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > (1.0 + slack) * v[i - 1] && v[i] > kResidualNoiseFloor) return false;
  }
  return true;
}

struct CheckSummary {
  std::string name;
  double worst = 0.0;
  bool any_value = false;
  bool non_increasing = true;  ///< within 10% between consecutive valid points
};

struct FlagRegion {
  std::string flag;
  std::vector<std::pair<double, double>> intervals;  ///< closed ranges of grid values
};

struct SweepSummary {
  std::string parameter;
  std::vector<FlagRegion> regions;
  std::vector<CheckSummary> checks;
};

inline SweepSummary summarize(const ExperimentConfig& cfg, const std::vector<ReportRow>& rows) {
  SweepSummary s;
  s.parameter = cfg.sweep ? cfg.sweep->parameter : "";
  const std::vector<std::pair<std::string, bool BranchValidity::*>> flags = {
      {"branch_exponential", &BranchValidity::exponential},
      {"branch_diagonal", &BranchValidity::diagonal},
      {"branch_mu_nu", &BranchValidity::mu_nu},
      {"symmetrizable", &BranchValidity::symmetrizable}};
  for (const auto& [label, member] : flags) {
    FlagRegion region{label, {}};
    bool open = false;
    for (const auto& r : rows) {
      const bool on = r.branch_valid.*member;
      if (on && !open) region.intervals.push_back({r.value, r.value});
      if (on) region.intervals.back().second = r.value;
      open = on;
    }
    s.regions.push_back(region);
  }
  for (const auto& name : cfg.checks) {
    CheckSummary cs{name};
    std::vector<double> seen;
    for (const auto& r : rows) {
      auto it = r.residuals.find(name);
      if (it == r.residuals.end() || it->second.kind != Cell::Kind::Value) continue;
      const double v = it->second.value;
      cs.worst = cs.any_value ? std::max(cs.worst, v) : v;
      cs.any_value = true;
      seen.push_back(v);
    }
    cs.non_increasing = non_increasing_within(seen);
    s.checks.push_back(cs);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Rendering

namespace detail {

inline std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string cell_text(const Cell& c) {
  switch (c.kind) {
    case Cell::Kind::Value: return num(c.value);
    case Cell::Kind::BranchInvalid: return "branch-invalid";
    case Cell::Kind::Error: return "error:" + c.note;
  }
  return "";
}

inline std::string json_escape(const std::string& s) {
  return nlohmann::json(s).dump();
}

}  // namespace detail

inline std::string csv_header() {
  std::string h =
      "index,parameter,value,omega,alpha,beta,z,truncation,margin,metric_source,"
      "branch_exponential,branch_diagonal,branch_mu_nu,symmetrizable";
  for (const auto& c : check_catalogue()) h += std::string(",") + c.name;
  h += ",status";
  for (int k = 0; k < 8; ++k) h += ",spectrum_" + std::to_string(k);
  h += ",elapsed_ms";
  return h;
}

inline std::string render_csv(const std::vector<ReportRow>& rows,
                              const std::optional<SweepSummary>& summary) {
  using detail::num;
  std::ostringstream os;
  os << csv_header() << "\n";
  for (const auto& r : rows) {
    const auto& p = r.params;
    os << r.index << "," << r.parameter << "," << num(r.value) << "," << num(p.omega) << ","
       << num(p.alpha) << "," << num(p.beta) << "," << num(p.z) << "," << p.trunc.dim << ","
       << p.trunc.interior_margin << "," << r.metric_source << "," << r.branch_valid.exponential
       << "," << r.branch_valid.diagonal << "," << r.branch_valid.mu_nu << ","
       << r.branch_valid.symmetrizable;
    for (const auto& c : check_catalogue()) {
      os << ",";
      auto it = r.residuals.find(c.name);
      if (it != r.residuals.end()) os << detail::cell_text(it->second);
    }
    os << "," << r.status;
    for (std::size_t k = 0; k < 8; ++k) {
      os << ",";
      if (k < r.spectrum_head.size()) os << num(r.spectrum_head[k]);
    }
    os << "," << num(r.elapsed_ms) << "\n";
  }
  if (summary) {
    os << "# summary parameter=" << summary->parameter << "\n";
    for (const auto& reg : summary->regions) {
      os << "# region " << reg.flag << ":";
      if (reg.intervals.empty()) os << " none";
      for (const auto& [a, b] : reg.intervals) os << " [" << num(a) << "," << num(b) << "]";
      os << "\n";
    }
    for (const auto& c : summary->checks) {
      os << "# worst " << c.name << "=" << (c.any_value ? num(c.worst) : "none")
         << " non_increasing=" << (c.non_increasing ? "true" : "false") << "\n";
    }
  }
  return os.str();
}

inline std::string render_json(const std::vector<ReportRow>& rows) {
  using detail::num;
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const auto& p = r.params;
    os << (i ? ",\n " : "\n ") << "{\"index\":" << r.index
       << ",\"parameter\":" << detail::json_escape(r.parameter) << ",\"value\":" << num(r.value)
       << ",\"params\":{\"omega\":" << num(p.omega) << ",\"alpha\":" << num(p.alpha)
       << ",\"beta\":" << num(p.beta) << ",\"z\":" << num(p.z) << ",\"truncation\":" << p.trunc.dim
       << ",\"margin\":" << p.trunc.interior_margin << "}"
       << ",\"metric_source\":" << detail::json_escape(r.metric_source)
       << ",\"branch_valid\":{\"exponential\":" << (r.branch_valid.exponential ? "true" : "false")
       << ",\"diagonal\":" << (r.branch_valid.diagonal ? "true" : "false")
       << ",\"mu_nu\":" << (r.branch_valid.mu_nu ? "true" : "false")
       << ",\"symmetrizable\":" << (r.branch_valid.symmetrizable ? "true" : "false") << "}"
       << ",\"residuals\":{";
    bool first = true;
    for (const auto& c : check_catalogue()) {
      auto it = r.residuals.find(c.name);
      if (it == r.residuals.end()) continue;
      os << (first ? "" : ",") << "\"" << c.name << "\":";
      first = false;
      if (it->second.kind == Cell::Kind::Value) os << num(it->second.value);
      else os << detail::json_escape(detail::cell_text(it->second));
    }
    os << "},\"asserted\":[";
    first = true;
    for (const auto& c : check_catalogue()) {
      auto it = r.residuals.find(c.name);
      if (it == r.residuals.end() || !it->second.asserted) continue;
      os << (first ? "" : ",") << "\"" << c.name << "\"";
      first = false;
    }
    os << "],\"status\":" << detail::json_escape(r.status) << ",\"spectrum_head\":[";
    for (std::size_t k = 0; k < r.spectrum_head.size(); ++k) os << (k ? "," : "") << num(r.spectrum_head[k]);
    os << "],\"elapsed_ms\":" << num(r.elapsed_ms) << "}";
  }
  os << "\n]\n";
  return os.str();
}

inline std::string render_summary_json(const SweepSummary& s) {
  using detail::num;
  std::ostringstream os;
  os << "{\"parameter\":" << detail::json_escape(s.parameter) << ",\"regions\":{";
  for (std::size_t i = 0; i < s.regions.size(); ++i) {
    os << (i ? "," : "") << "\"" << s.regions[i].flag << "\":[";
    for (std::size_t k = 0; k < s.regions[i].intervals.size(); ++k) {
      os << (k ? "," : "") << "[" << num(s.regions[i].intervals[k].first) << ","
         << num(s.regions[i].intervals[k].second) << "]";
    }
    os << "]";
  }
  os << "},\"checks\":{";
  for (std::size_t i = 0; i < s.checks.size(); ++i) {
    const auto& c = s.checks[i];
    os << (i ? "," : "") << "\"" << c.name << "\":{\"worst\":"
       << (c.any_value ? num(c.worst) : "null")
       << ",\"non_increasing\":" << (c.non_increasing ? "true" : "false") << "}";
  }
  os << "}}\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Execution

struct RunResult {
  std::vector<ReportRow> rows;
  std::optional<SweepSummary> summary;
  int exit_code = 0;
};

inline int thread_count_from_env() {
  const char* v = std::getenv("QH_SPECTRAL_THREADS");
  if (!v) return 1;
  const int n = std::atoi(v);
  return std::max(1, n);
}

/// Runs all points (in a worker pool when QH_SPECTRAL_THREADS > 1); rows
/// come back ordered by grid index.
inline RunResult execute(const ExperimentConfig& cfg) {
  std::optional<ComplexMatrix> custom;
  if (cfg.model == Model::CustomMatrixFile) custom = load_matrix_file(cfg.matrix_file);

  std::vector<double> grid{0.0};
  std::string axis;
  if (cfg.sweep) {
    grid = cfg.sweep->grid();
    axis = cfg.sweep->parameter;
  }
  RunResult res;
  res.rows.resize(grid.size());
  std::vector<std::string> errors(grid.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < grid.size(); i = next++) {
      try {
        res.rows[i] = evaluate_point(cfg, i, axis, grid[i], custom);
      } catch (const Error& e) {
        errors[i] = e.what();
      }
    }
  };
  const int threads = std::min<int>(thread_count_from_env(), static_cast<int>(grid.size()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (!e.empty()) throw Error(ErrorCode::InvalidParams, e);
  }

  bool failed = false, all_invalid = true;
  for (const auto& r : res.rows) {
    if (r.status == "fail") failed = true;
    if (r.status != "branch-invalid") all_invalid = false;
  }
  res.exit_code = failed ? 2 : (all_invalid ? 3 : 0);
  if (cfg.sweep) res.summary = summarize(cfg, res.rows);
  return res;
}

/// Writes the deformed eigenfunctions Ψ_l = ρ⁻¹φ_l, l < export_levels, as
/// "x re im" blocks separated by blank lines.
inline void export_grid(const ExperimentConfig& cfg) {
  if (cfg.grid_out.empty() || cfg.model != Model::Swanson) return;
  SwansonParams p = detail::point_params(cfg, "", 0.0);
  detail::PointContext ctx(cfg, p, std::nullopt);
  const QuasiHermitianSystem* sys = ctx.quasi_system();
  if (!sys || !sys->rho()) return;
  HermiteBasisSpec spec;
  spec.length_scale = 1.0 / std::sqrt(p.masses.front() * p.omega);
  std::vector<double> grid;
  for (int i = 0; i < cfg.grid_points; ++i) {
    grid.push_back(cfg.grid_from + (cfg.grid_to - cfg.grid_from) * i / (cfg.grid_points - 1));
  }
  std::ofstream out(cfg.grid_out);
  if (!out) throw Error(ErrorCode::ConfigParseError, "cannot write grid file " + cfg.grid_out);
  for (int l = 0; l < cfg.export_levels; ++l) {
    const auto def = deformed_eigenfunction(*sys, l, spec);
    out << (l ? "\n" : "") << "# level " << l << " eigenvalue " << detail::num(def.eigenvalue) << "\n";
    write_grid_table(out, sample_on_grid(def.psi, grid));
  }
}

/// Full run: executes, renders, writes to cfg.output (or `out`).
inline int run(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err) {
  RunResult res;
  try {
    res = execute(cfg);
    export_grid(cfg);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  const std::string body =
      cfg.format == Format::Csv ? render_csv(res.rows, res.summary) : render_json(res.rows);
  if (cfg.output.empty()) {
    out << body;
    // stdout stays a plain JSON array; the summary goes to stderr.
    if (res.summary && cfg.format == Format::Json) err << render_summary_json(*res.summary);
  } else {
    std::ofstream f(cfg.output);
    if (!f) {
      err << "error: cannot write " << cfg.output << "\n";
      return 1;
    }
    f << body;
    if (res.summary && cfg.format == Format::Json) {
      std::ofstream s(cfg.output + ".summary.json");
      s << render_summary_json(*res.summary);
    }
  }
  for (const auto& r : res.rows) {
    for (const auto& [name, cell] : r.residuals) {
      if (cell.asserted && !cell.passed) {
        err << "row " << r.index << ": asserted check " << name << " failed ("
            << detail::cell_text(cell) << ")\n";
      }
    }
  }
  return res.exit_code;
}

}  // namespace qhspec::cli
