#pragma once

// Batch experiment driver: JSON configuration, method dispatch against the
// exact reference, report.json and orders.csv.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ncpt/algebra.hpp"
#include "ncpt/oracles.hpp"
#include "ncpt/scenario.hpp"
#include "ncpt/series.hpp"

namespace ncpt {

using json = nlohmann::json;

inline constexpr const char* kToolName = "ncpt";
inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kCsvHeader =
    "method,order,term_real,term_imag,partial_sum,residual_vs_exact,n_slices";

inline const std::vector<std::string>& known_methods() {
  static const std::vector<std::string> m{"nested", "bch", "dyson",
                                          "heisenberg_iteration", "subspace", "exact"};
  return m;
}

struct ClosureSettings {
  int depth = 4;
  int samples = 5;
  ClosureOptions options;
};

struct ExperimentConfig {
  ScenarioConfig scenario;
  std::vector<std::string> methods;
  int max_order = 4;
  double time = 0.0;  // evaluation time; defaults to the scenario horizon
  SlicePolicy slices{64, 1 << 14, 1e-10};
  SlicePolicy exact_policy{8, 1 << 14, 1e-10};
  int subspace_steps = 400;
  ClosureSettings closure;
  std::uint64_t seed = 0;
  std::string output_dir;
  json source;  // the document as read, echoed into the report
};

// ---------------------------------------------------------------------------
// Parsing.

namespace detail {

inline void allow_keys(const json& obj, const char* where, std::set<std::string> allowed) {
  if (!obj.is_object()) throw InvalidArgument(std::string(where) + " must be a JSON object");
  for (const auto& [key, _] : obj.items())
    if (!allowed.contains(key))
      throw InvalidArgument("unknown key '" + key + "' in " + where);
}

inline cplx parse_complex(const json& j, const char* where) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
    return {j[0].get<double>(), j[1].get<double>()};
  throw InvalidArgument(std::string(where) + " must be a number or [re, im]");
}

inline Envelope parse_envelope(const json& j) {
  if (j.is_number() || j.is_array()) return Envelope::constant(parse_complex(j, "envelope"));
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "constant") {
    allow_keys(j, "constant envelope", {"kind", "amplitude"});
    return Envelope::constant(parse_complex(j.at("amplitude"), "amplitude"));
  }
  if (kind == "sinusoid") {
    allow_keys(j, "sinusoid envelope", {"kind", "amplitude", "omega", "phase"});
    return Envelope::sinusoid(parse_complex(j.at("amplitude"), "amplitude"),
                              j.at("omega").get<double>(), j.value("phase", 0.0));
  }
  if (kind == "gaussian_pulse") {
    allow_keys(j, "gaussian_pulse envelope", {"kind", "amplitude", "center", "width"});
    return Envelope::gaussian_pulse(parse_complex(j.at("amplitude"), "amplitude"),
                                    j.at("center").get<double>(), j.at("width").get<double>());
  }
  if (kind == "piecewise_constant") {
    allow_keys(j, "piecewise_constant envelope", {"kind", "breakpoints", "values"});
    std::vector<cplx> values;
    for (const auto& v : j.at("values")) values.push_back(parse_complex(v, "values"));
    return Envelope::piecewise_constant(j.at("breakpoints").get<std::vector<double>>(),
                                        std::move(values));
  }
  throw InvalidArgument("unknown envelope kind '" + kind + "'");
}

inline ScenarioKind parse_kind(const std::string& s) {
  if (s == "stimulated_emission") return ScenarioKind::stimulated_emission;
  if (s == "mode_network") return ScenarioKind::mode_network;
  throw InvalidArgument("unknown scenario kind '" + s + "'");
}

inline ObservableSelector parse_observable(const json& j) {
  ObservableSelector o;
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "default") return o;
    if (s == "quadrature") return {ObservableKind::quadrature, 0};
    if (s == "identity") return {ObservableKind::identity, 0};
    throw InvalidArgument("unknown observable '" + s + "'");
  }
  allow_keys(j, "observable", {"kind", "mode"});
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "number") return {ObservableKind::number, j.at("mode").get<int>()};
  return parse_observable(json(kind));
}

inline std::vector<StateComponent> parse_initial(const json& j) {
  allow_keys(j, "initial", {"occupations", "superposition"});
  if (j.contains("occupations") == j.contains("superposition"))
    throw InvalidArgument("initial needs exactly one of 'occupations' or 'superposition'");
  if (j.contains("occupations")) return {{1.0, j.at("occupations").get<std::vector<int>>()}};
  std::vector<StateComponent> out;
  for (const auto& c : j.at("superposition")) {
    allow_keys(c, "superposition component", {"amplitude", "occupations"});
    out.push_back({parse_complex(c.at("amplitude"), "amplitude"),
                   c.at("occupations").get<std::vector<int>>()});
  }
  if (out.empty()) throw InvalidArgument("superposition needs at least one component");
  return out;
}

inline ScenarioConfig parse_scenario(const json& j) {
  allow_keys(j, "scenario", {"kind", "mode_dims", "horizon", "drives", "frequencies",
                             "couplings", "probe", "initial", "observable"});
  ScenarioConfig c;
  c.kind = parse_kind(j.at("kind").get<std::string>());
  c.mode_dims = j.at("mode_dims").get<std::vector<int>>();
  c.horizon = j.at("horizon").get<double>();
  for (const auto& d : j.value("drives", json::array())) {
    allow_keys(d, "drive", {"mode", "envelope", "group"});
    c.drives.push_back({d.at("mode").get<int>(), parse_envelope(d.at("envelope")),
                        d.value("group", 0)});
  }
  for (const auto& f : j.value("frequencies", json::array())) {
    allow_keys(f, "frequency", {"mode", "envelope"});
    c.frequencies.push_back({f.at("mode").get<int>(), parse_envelope(f.at("envelope"))});
  }
  for (const auto& k : j.value("couplings", json::array())) {
    allow_keys(k, "coupling", {"modes", "envelope"});
    const auto modes = k.at("modes").get<std::vector<int>>();
    if (modes.size() != 2) throw InvalidArgument("coupling 'modes' must list two modes");
    c.couplings.push_back({modes[0], modes[1], parse_envelope(k.at("envelope"))});
  }
  for (const auto& p : j.value("probe", json::array())) {
    allow_keys(p, "probe", {"mode", "weight"});
    c.probe.push_back({p.at("mode").get<int>(),
                       p.contains("weight") ? parse_complex(p.at("weight"), "weight") : cplx(1.0)});
  }
  if (j.contains("initial")) c.initial = parse_initial(j.at("initial"));
  if (j.contains("observable")) c.observable = parse_observable(j.at("observable"));
  return c;
}

inline SlicePolicy parse_policy(const json& j, SlicePolicy base, const char* where) {
  allow_keys(j, where, {"initial", "max", "tolerance"});
  base.initial_slices = j.value("initial", base.initial_slices);
  base.max_slices = j.value("max", base.max_slices);
  base.tolerance = j.value("tolerance", base.tolerance);
  if (base.initial_slices < 1 || base.max_slices < base.initial_slices)
    throw InvalidArgument(std::string(where) + ": need 1 <= initial <= max");
  if (!(base.tolerance > 0.0)) throw InvalidArgument(std::string(where) + ": tolerance must be > 0");
  return base;
}

}  // namespace detail

/// Builds and validates an ExperimentConfig. Any structural or semantic
/// problem is reported as InvalidArgument.
inline ExperimentConfig parse_config(const json& doc) {
  ExperimentConfig c;
  try {
    detail::allow_keys(doc, "config", {"scenario", "methods", "max_order", "time", "slices",
                                       "exact", "subspace_steps", "closure", "seed", "output"});
    c.source = doc;
    c.scenario = detail::parse_scenario(doc.at("scenario"));
    c.methods = doc.at("methods").get<std::vector<std::string>>();
    c.max_order = doc.value("max_order", c.max_order);
    c.time = doc.contains("time") ? doc.at("time").get<double>() : c.scenario.horizon;
    if (doc.contains("slices")) c.slices = detail::parse_policy(doc.at("slices"), c.slices, "slices");
    if (doc.contains("exact"))
      c.exact_policy = detail::parse_policy(doc.at("exact"), c.exact_policy, "exact");
    c.subspace_steps = doc.value("subspace_steps", c.subspace_steps);
    if (doc.contains("closure")) {
      const auto& cl = doc.at("closure");
      detail::allow_keys(cl, "closure", {"depth", "samples", "tolerance", "buffer"});
      c.closure.depth = cl.value("depth", c.closure.depth);
      c.closure.samples = cl.value("samples", c.closure.samples);
      c.closure.options.tolerance = cl.value("tolerance", c.closure.options.tolerance);
      c.closure.options.safe_buffer = cl.value("buffer", c.closure.options.safe_buffer);
    }
    c.seed = doc.value("seed", std::uint64_t{0});
    c.output_dir = doc.value("output", std::string{});
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("malformed config: ") + e.what());
  }

  if (c.methods.empty()) throw InvalidArgument("config must request at least one method");
  std::set<std::string> seen;
  for (const auto& m : c.methods) {
    if (std::find(known_methods().begin(), known_methods().end(), m) == known_methods().end())
      throw InvalidArgument("unknown method '" + m + "'");
    if (!seen.insert(m).second) throw InvalidArgument("method '" + m + "' listed twice");
  }
  if (c.max_order < 1) throw InvalidArgument("max_order must be >= 1");
  if (!(c.time >= 0.0) || c.time > c.scenario.horizon)
    throw InvalidArgument("time must lie in [0, horizon]");
  if (c.subspace_steps < 1) throw InvalidArgument("subspace_steps must be >= 1");
  if (c.closure.depth < 1 || c.closure.samples < 1)
    throw InvalidArgument("closure depth and samples must be >= 1");
  validate(c.scenario);
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open config '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw InvalidArgument("cannot parse config '" + path.string() + "': " + e.what());
  }
  return parse_config(doc);
}

/// Applies the --order / --slices overrides. A slice override pins the
/// series methods to a single grid of that size (no refinement).
inline void apply_overrides(ExperimentConfig& c, std::optional<int> order,
                            std::optional<int> slices) {
  if (order) {
    if (*order < 1) throw InvalidArgument("--order must be >= 1");
    c.max_order = *order;
    c.source["max_order"] = *order;
  }
  if (slices) {
    if (*slices < 1) throw InvalidArgument("--slices must be >= 1");
    c.slices.initial_slices = c.slices.max_slices = *slices;
    c.source["slices"] = {{"initial", *slices}, {"max", *slices}, {"tolerance", c.slices.tolerance}};
  }
}

// ---------------------------------------------------------------------------
// Running.

struct MethodOutcome {
  std::string method;
  bool ok = false;
  std::string failure;
  bool scalar = false;
  SeriesResult series;         // series methods
  double value = 0.0;          // scalar methods
  int n_slices = 0;
  std::string note;
  double seconds = 0.0;
};

struct RunReport {
  ExperimentConfig config;
  ExactValue exact;
  std::vector<MethodOutcome> methods;
  std::optional<ClosureReport> closure;
  std::string closure_failure;

  /// True when no explicitly requested method produced a result.
  bool all_requested_failed() const {
    for (const auto& r : config.methods)
      for (const auto& m : methods)
        if (m.method == r && m.ok) return false;
    return true;
  }
};

namespace detail {

template <class F>
MethodOutcome timed(const std::string& name, F&& body) {
  MethodOutcome out;
  out.method = name;
  const auto start = std::chrono::steady_clock::now();
  try {
    body(out);
    out.ok = true;
  } catch (const std::exception& e) {
    out.ok = false;
    out.failure = e.what();
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

inline std::vector<double> closure_times(double t, int samples) {
  std::vector<double> out;
  if (samples == 1) return {t};
  for (int i = 0; i < samples; ++i) out.push_back(t * i / (samples - 1));
  return out;
}

}  // namespace detail

inline RunReport run_experiment(const ExperimentConfig& cfg) {
  RunReport rep;
  rep.config = cfg;
  const Scenario sc = build_scenario(cfg.scenario);
  const double t = cfg.time;
  const int order = cfg.max_order;

  rep.methods.push_back(detail::timed("exact", [&](MethodOutcome& o) {
    o.scalar = true;
    rep.exact = exact_expectation(sc.spec, sc.observable, sc.initial, t, cfg.exact_policy);
    o.value = rep.exact.value;
    o.n_slices = rep.exact.n_slices;
    if (!rep.exact.stabilized) o.note = "not stabilized at the slice limit";
  }));

  for (const auto& name : cfg.methods) {
    if (name == "exact") continue;
    rep.methods.push_back(detail::timed(name, [&](MethodOutcome& o) {
      if (name == "nested") {
        o.series = converge_series(sc.spec, sc.observable, sc.initial, t, order, cfg.slices);
      } else if (name == "bch") {
        if (!sc.spec.is_time_independent())
          throw InvalidArgument("bch needs a time-independent Hamiltonian");
        o.series = bch_series(evaluate_hamiltonian(sc.spec, 0.0), sc.observable, sc.initial, t, order);
      } else if (name == "dyson") {
        const int capped = std::min(order, kDysonMaxOrder);
        if (capped < order) o.note = "orders above " + std::to_string(kDysonMaxOrder) + " not computed";
        o.series = converge_dyson(sc.spec, sc.observable, sc.initial, t, capped, cfg.slices);
      } else if (name == "heisenberg_iteration") {
        o.series = converge_heisenberg_iteration_expectation(sc.spec, sc.observable, sc.initial,
                                                             t, order, cfg.slices);
      } else if (name == "subspace") {
        o.scalar = true;
        o.value = subspace_expectation(sc.observable, sc.spec, sc.closure_basis, sc.initial, t,
                                       cfg.subspace_steps, cfg.closure.options);
        o.n_slices = cfg.subspace_steps;
      }
      if (!o.scalar) {
        o.n_slices = o.series.n_slices;
        if (!o.series.converged && o.series.method != "bch")
          o.note = "slice refinement did not converge";
      }
    }));
  }

  try {
    rep.closure = closure_check(sc.observable, sc.spec, sc.closure_basis,
                                detail::closure_times(t, cfg.closure.samples),
                                cfg.closure.depth, cfg.closure.options);
  } catch (const std::exception& e) {
    rep.closure_failure = e.what();
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Serialization.

inline json to_json(const RunReport& rep, bool include_timing = true) {
  json j;
  j["provenance"] = {{"tool", kToolName},
                     {"version", kToolVersion},
                     {"seed", rep.config.seed},
                     {"config", rep.config.source}};
  j["time"] = rep.config.time;
  j["max_order"] = rep.config.max_order;
  j["exact"] = {{"value", rep.exact.value},
                {"error_estimate", rep.exact.error_estimate},
                {"n_slices", rep.exact.n_slices},
                {"stabilized", rep.exact.stabilized},
                {"unitarity_defect", rep.exact.unitarity_defect}};
  json methods = json::array();
  for (const auto& m : rep.methods) {
    json e{{"method", m.method}, {"ok", m.ok}};
    if (!m.ok) {
      e["failure"] = m.failure;
    } else if (m.scalar) {
      e["value"] = m.value;
      e["residual_vs_exact"] = std::abs(m.value - rep.exact.value);
      e["n_slices"] = m.n_slices;
    } else {
      json terms = json::array(), sums = json::array(), resid = json::array();
      for (std::size_t k = 0; k < m.series.order_terms.size(); ++k) {
        terms.push_back({m.series.order_terms[k].real(), m.series.order_terms[k].imag()});
        sums.push_back(m.series.partial_sums[k].real());
        resid.push_back(std::abs(rep.exact.value - m.series.partial_sums[k].real()));
      }
      e["order_terms"] = terms;
      e["partial_sums"] = sums;
      e["residual_vs_exact"] = resid;
      e["n_slices"] = m.series.n_slices;
      e["converged"] = m.series.converged;
      e["leakage"] = m.series.leakage;
      if (!m.series.discretization_delta.empty()) {
        json d = json::array();
        for (double x : m.series.discretization_delta)
          d.push_back(std::isfinite(x) ? json(x) : json(nullptr));
        e["discretization_delta"] = d;
      }
    }
    if (!m.note.empty()) e["note"] = m.note;
    methods.push_back(std::move(e));
  }
  j["methods"] = methods;
  if (rep.closure) {
    const auto& c = *rep.closure;
    j["closure"] = {{"basis", c.basis_label},     {"closed", c.closed},
                    {"max_residual", c.max_residual}, {"depth", c.depth},
                    {"sample_times", c.sample_times}, {"residuals", c.residuals}};
  } else {
    j["closure"] = {{"failure", rep.closure_failure}};
  }
  if (include_timing) {
    json timing = json::object();
    for (const auto& m : rep.methods) timing[m.method] = m.seconds;
    j["timing"] = {{"seconds", timing}};
  }
  return j;
}

namespace detail {

inline std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x == 0.0 ? 0.0 : x);
  return buf;
}

}  // namespace detail

/// One row per order per series method; scalar methods (exact, subspace)
/// get a single row with order -1.
inline std::string orders_csv(const RunReport& rep) {
  std::ostringstream out;
  out << kCsvHeader << '\n';
  const double exact = rep.exact.value;
  for (const auto& m : rep.methods) {
    if (!m.ok) continue;
    if (m.scalar) {
      out << m.method << ",-1," << detail::fmt(m.value) << ",0," << detail::fmt(m.value) << ','
          << detail::fmt(std::abs(m.value - exact)) << ',' << m.n_slices << '\n';
      continue;
    }
    for (std::size_t k = 0; k < m.series.order_terms.size(); ++k) {
      const auto& term = m.series.order_terms[k];
      const double ps = m.series.partial_sums[k].real();
      out << m.method << ',' << k << ',' << detail::fmt(term.real()) << ','
          << detail::fmt(term.imag()) << ',' << detail::fmt(ps) << ','
          << detail::fmt(std::abs(exact - ps)) << ',' << m.series.n_slices << '\n';
    }
  }
  return out.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
}

inline void write_report(const RunReport& rep, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text(dir / "report.json", to_json(rep).dump(2) + "\n");
  write_text(dir / "orders.csv", orders_csv(rep));
}

}  // namespace ncpt
