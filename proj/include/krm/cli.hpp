#pragma once

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "krm/diagnostics.hpp"
#include "krm/error.hpp"
#include "krm/hutchinson.hpp"
#include "krm/io.hpp"
#include "krm/lipschitz.hpp"
#include "krm/transport.hpp"

namespace krm::cli {

inline const std::vector<std::string>& commands() {
  static const std::vector<std::string> c{"dist", "invariant", "scenario", "envelope", "extend", "cover", "witness"};
  return c;
}

inline const std::vector<std::string>& scenarios() {
  static const std::vector<std::string> s{"assertion-1.1", "lemma-3.7", "example-5.1", "cantor", "bernoulli"};
  return s;
}

struct RunConfig {
  std::string command;
  std::vector<std::string> inputs;
  double tol = 1e-3;
  std::size_t cap = kDefaultCap;
  std::size_t horizon = 20;
  std::uint64_t seed = 1;
  std::string format = "json";
  std::string out;
  std::string scenario;
  double n = 1.0;            // envelope slope
  double eps = 0.5;
  double delta = 0.5;
  std::optional<std::size_t> budget;
  std::size_t dim = 6;
  std::size_t trunc = 0;     // 0: same as dim
  std::size_t k = 6;         // witness stages
  std::size_t chaos = 0;     // chaos-game samples for the invariant cross-check
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitNotConverged = 2;

namespace detail {

inline void validate(const RunConfig& c) {
  auto known = [](const std::vector<std::string>& v, const std::string& s) {
    return std::find(v.begin(), v.end(), s) != v.end();
  };
  if (!known(commands(), c.command)) throw PreconditionError("unknown command '" + c.command + "'");
  if (!(c.tol > 0.0)) throw PreconditionError("--tol must be positive");
  if (c.cap < 1) throw PreconditionError("--cap must be at least 1");
  if (c.horizon < 1) throw PreconditionError("--horizon must be at least 1");
  if (c.format != "json" && c.format != "csv") throw PreconditionError("--format must be json or csv");
}

inline std::size_t step_limit() {
  const char* env = std::getenv("KR_STEP_LIMIT");
  if (env == nullptr || *env == '\0') return kDefaultStepLimit;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (*end != '\0' || v == 0 || env[0] == '-') throw PreconditionError("KR_STEP_LIMIT must be a positive integer");
  return static_cast<std::size_t>(v);
}

inline void require_inputs(const RunConfig& c, std::size_t lo, std::size_t hi) {
  if (c.inputs.size() < lo || c.inputs.size() > hi) {
    throw PreconditionError("'" + c.command + "' takes " +
                            (lo == hi ? std::to_string(lo) : std::to_string(lo) + " to " + std::to_string(hi)) +
                            " input file(s), got " + std::to_string(c.inputs.size()));
  }
}

inline std::string dump(const io::json& j) { return j.dump(2) + "\n"; }

struct Output {
  Output(std::string t = {}) : text(std::move(t)) {}

  std::string text;
  int status = kExitOk;
  std::string warning;
};

inline Output iteration_output(const RunConfig& c, const IterationReport& r, io::json extra = io::json::object()) {
  Output o;
  o.status = r.converged ? kExitOk : kExitNotConverged;
  if (r.stalled) {
    o.warning = "coarsening error stayed above --tol for " + std::to_string(kDefaultStallWindow) +
                " steps; raise --cap or --tol";
  } else if (!r.converged) {
    o.warning = "step limit reached before the bound met --tol";
  }
  if (c.format == "csv") {
    std::ostringstream os;
    os << "step,H\n";
    for (std::size_t s = 0; s < r.step_distances.size(); ++s) os << s + 1 << ',' << io::format12(r.step_distances[s]) << '\n';
    o.text = os.str();
  } else {
    io::json j = io::to_json(r);
    for (auto& [key, value] : extra.items()) j[key] = value;
    o.text = dump(j);
  }
  return o;
}

inline Output run_dist(const RunConfig& c) {
  require_inputs(c, 2, 2);
  io::Loader loader;
  const DiscreteMeasure mu = loader.measure_file(c.inputs[0]);
  const DiscreteMeasure nu = loader.measure_file(c.inputs[1]);
  const TransportCertificate cert = kr_distance(mu, nu);
  if (c.format == "csv") return {"value\n" + io::format12(cert.value) + "\n"};
  return {dump(io::to_json(cert))};
}

inline Output run_invariant(const RunConfig& c) {
  require_inputs(c, 1, 2);
  io::Loader loader;
  const ContractionSystem sys = loader.system_file(c.inputs[0]);
  const DiscreteMeasure nu0 = c.inputs.size() == 2 ? loader.measure_file(c.inputs[1]) : default_initial_measure(sys);
  const IterationReport r = iterate_invariant(sys, nu0, c.tol, c.cap, {step_limit()});
  io::json extra = io::json::object();
  if (c.chaos > 0) extra["chaos_mean"] = io::point_json(chaos_game_mean(sys, c.chaos, c.seed));
  return iteration_output(c, r, extra);
}

inline Output scenario_assertion_1_1(const RunConfig& c) {
  MeasureSequence seq = assertion_1_1_sequence(line_positions(1.0, 1.0), 1, c.horizon);
  const CauchyProfile profile = cauchy_profile(seq, c.horizon);
  if (c.format == "csv") {
    std::ostringstream os;
    os << "n,m,H\n";
    for (const auto& e : profile.entries) os << e.n << ',' << e.m << ',' << io::format12(e.value) << '\n';
    return {os.str()};
  }
  io::json entries = io::json::array();
  for (const auto& e : profile.entries) entries.push_back(io::json::array({e.n, e.m, io::number(e.value)}));
  io::json tails = io::json::array();
  for (const auto& [n, sup] : profile.sup_tail) {
    // sum_{k>n} k 2^-k = (n+2)/2^n
    const double series = static_cast<double>(n + 2) * std::ldexp(1.0, -static_cast<int>(n));
    tails.push_back({{"n", n}, {"sup", io::number(sup)}, {"series_bound", io::number(series)}});
  }
  return {dump({{"scenario", "assertion-1.1"}, {"entries", std::move(entries)}, {"sup_tail", std::move(tails)}})};
}

inline Output scenario_lemma_3_7(const RunConfig& c) {
  MeasureSequence seq = lemma_3_7_sequence(line_positions(1.0, 2.0), 1, c.horizon);
  seq.at(c.horizon);
  const SpacePtr space = seq.space();
  const DiscreteMeasure base = dirac(seq.point(0), space);
  // Bounded 1-Lipschitz test function min(dist(x_0, .), 1).
  const LipFunction dist0 = distance_function(*space, seq.point(0));
  std::map<PointIndex, double> capped;
  for (const auto& [x, v] : dist0.values()) capped[x] = std::min(v, 1.0);
  const LipFunction f(std::move(capped), 1.0);

  std::ostringstream csv;
  csv << "n,m,H\n";
  io::json rows = io::json::array();
  for (std::size_t n = 1; n <= c.horizon; ++n) {
    const DiscreteMeasure nu = seq.at(n).on(space);
    const double h = kr_distance(base, nu).value;
    const double ratio = space->dist(seq.point(0), seq.point(n)) / static_cast<double>(n);
    const double deviation = std::abs(integrate(nu, f) - integrate(base, f));
    csv << n << ",0," << io::format12(h) << '\n';
    rows.push_back({{"n", n},
                    {"H", io::number(h)},
                    {"dist_over_n", io::number(ratio)},
                    {"test_deviation", io::number(deviation)},
                    {"deviation_bound", io::number(2.0 / static_cast<double>(n))}});
  }
  if (c.format == "csv") return {csv.str()};
  return {dump({{"scenario", "lemma-3.7"}, {"rows", std::move(rows)}})};
}

inline Output scenario_example_5_1(const RunConfig& c) {
  const std::size_t trunc = c.trunc == 0 ? c.dim : c.trunc;
  if (c.dim == 0) throw PreconditionError("--dim must be at least 1");
  if (trunc > c.dim) throw PreconditionError("--trunc cannot exceed --dim (only e_1..e_d exist in R^d)");
  const Truncation t = truncate_countable(example_5_1_family(c.dim), trunc);
  const DiscreteMeasure origin = dirac(0, MetricSpace::euclidean(c.dim, {Point(c.dim, 0.0)}));
  const IterationReport r = iterate_invariant(t.system, origin, c.tol, c.cap, {step_limit()});
  io::json extra{{"scenario", "example-5.1"}, {"dim", c.dim}, {"trunc", trunc}, {"tail", io::to_json(t.tail)},
                 {"system", io::to_json(t.system)}};
  return iteration_output(c, r, extra);
}

inline Output scenario_named_system(const RunConfig& c, const std::string& name, const ContractionSystem& sys) {
  const IterationReport r = iterate_invariant(sys, default_initial_measure(sys), c.tol, c.cap, {step_limit()});
  // Both built-in systems live on [0, 1], so the mean is the first moment about 0.
  ::krm::detail::CompensatedSum mean;
  for (const Atom& a : r.iterate.atoms()) mean.add(a.weight * r.iterate.space().coords(a.point)[0]);
  io::json extra{{"scenario", name}, {"system", io::to_json(sys)}, {"mean", io::number(mean.value())}};
  if (c.chaos > 0) extra["chaos_mean"] = io::point_json(chaos_game_mean(sys, c.chaos, c.seed));
  return iteration_output(c, r, extra);
}

inline Output run_scenario(const RunConfig& c) {
  require_inputs(c, 0, 0);
  if (c.scenario == "assertion-1.1") return scenario_assertion_1_1(c);
  if (c.scenario == "lemma-3.7") return scenario_lemma_3_7(c);
  if (c.scenario == "example-5.1") return scenario_example_5_1(c);
  if (c.scenario == "cantor") return scenario_named_system(c, "cantor", cantor_system());
  if (c.scenario == "bernoulli") return scenario_named_system(c, "bernoulli", bernoulli_system());
  throw PreconditionError("unknown scenario '" + c.scenario + "'");
}

inline Output run_envelope(const RunConfig& c) {
  require_inputs(c, 1, 1);
  io::Loader loader;
  const auto [space, f] = loader.function_file(c.inputs[0]);
  if (!f.covers(*space)) throw PreconditionError("envelope needs a function defined at every point");
  return {dump(io::to_json(envelope(f, c.n, *space), *space))};
}

inline Output run_extend(const RunConfig& c) {
  require_inputs(c, 1, 1);
  io::Loader loader;
  const auto [space, f] = loader.function_file(c.inputs[0]);
  return {dump(io::to_json(mcshane_extend(f.values(), *space), *space))};
}

inline Output run_cover(const RunConfig& c) {
  if (c.inputs.empty()) throw PreconditionError("'cover' takes at least one measure file");
  io::Loader loader;
  std::vector<DiscreteMeasure> measures;
  for (const auto& file : c.inputs) measures.push_back(loader.measure_file(file));
  SpacePtr space = measures.front().space_ptr();
  for (const auto& m : measures) space = common_space(space, m.space_ptr());
  const CoverResult r = tightness_cover(measures, c.eps, c.delta, c.budget);
  return {dump(io::to_json(r, *space))};
}

inline Output run_witness(const RunConfig& c) {
  require_inputs(c, 0, 0);
  const std::string name = c.scenario.empty() ? "escaping-dirac" : c.scenario;
  std::optional<MeasureSequence> seq;
  if (name == "escaping-dirac") {
    seq.emplace(escaping_dirac_sequence(line_positions(2.0, 1.0), 1, c.horizon));
  } else if (name == "lemma-3.7") {
    seq.emplace(lemma_3_7_sequence(line_positions(1.0, 2.0), 1, c.horizon));
  } else if (name == "constant") {
    seq.emplace(constant_sequence({0.0}, c.horizon));
  } else {
    throw PreconditionError("unknown witness scenario '" + name + "' (escaping-dirac, lemma-3.7, constant)");
  }
  const WitnessArtifacts w = build_witness(*seq, c.eps, c.delta, c.k);
  const WitnessReport report = verify_witness(w);
  io::json j = io::to_json(w);
  j["scenario"] = name;
  j["lip"] = io::number(report.lip);
  io::json checks = io::json::array();
  for (const auto& ch : report.checks) checks.push_back({{"name", ch.name}, {"passed", ch.passed}});
  j["checks"] = std::move(checks);
  j["valid"] = report.valid();
  return {dump(j)};
}

}  // namespace detail

// Runs one command. Results go to `out` (or the --out file), diagnostics to
// `err`. Exit status: 0 success, 1 invalid input or failed precondition,
// 2 iteration stopped at the step limit.
inline int run(const RunConfig& config, std::ostream& out, std::ostream& err) {
  try {
    detail::validate(config);
    detail::Output o;
    if (config.command == "dist") o = detail::run_dist(config);
    else if (config.command == "invariant") o = detail::run_invariant(config);
    else if (config.command == "scenario") o = detail::run_scenario(config);
    else if (config.command == "envelope") o = detail::run_envelope(config);
    else if (config.command == "extend") o = detail::run_extend(config);
    else if (config.command == "cover") o = detail::run_cover(config);
    else o = detail::run_witness(config);

    if (config.out.empty()) {
      out << o.text;
    } else {
      std::ofstream file(config.out, std::ios::binary);
      if (!file) throw InputError(config.out + ": cannot write file");
      file << o.text;
    }
    if (o.status == kExitNotConverged) err << "warning: " << o.warning << '\n';
    return o.status;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
}

}  // namespace krm::cli
