#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "krm/diagnostics.hpp"
#include "krm/error.hpp"
#include "krm/hutchinson.hpp"
#include "krm/lipschitz.hpp"
#include "krm/measure.hpp"
#include "krm/metric_space.hpp"
#include "krm/transport.hpp"

namespace krm::io {

using json = nlohmann::json;

// Value rounded to 12 significant digits. Emitting the rounded double keeps
// parse(dump(x)) == x exact.
inline double round12(double v) {
  if (!std::isfinite(v)) return v;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return std::strtod(buf, nullptr);
}

inline std::string format12(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline json number(double v) {
  if (!std::isfinite(v)) return json(nullptr);
  return json(round12(v));
}

inline json point_json(std::span<const double> p) {
  json a = json::array();
  for (double v : p) a.push_back(number(v));
  return a;
}

// ---- reading helpers -------------------------------------------------------

inline const json& field(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) throw InputError(path + ": expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw InputError(path + "." + key + ": missing field");
  return *it;
}

inline double read_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw InputError(path + ": expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw InputError(path + ": number is not finite");
  return v;
}

inline std::size_t read_index(const json& j, const std::string& path) {
  if (!j.is_number_integer() || j.get<long long>() < 0) throw InputError(path + ": expected a nonnegative integer");
  return j.get<std::size_t>();
}

inline const json& read_array(const json& j, const std::string& path) {
  if (!j.is_array()) throw InputError(path + ": expected an array");
  return j;
}

inline std::vector<double> read_vector(const json& j, const std::string& path) {
  read_array(j, path);
  std::vector<double> v;
  for (std::size_t i = 0; i < j.size(); ++i) v.push_back(read_number(j[i], path + "[" + std::to_string(i) + "]"));
  return v;
}

inline std::vector<std::vector<double>> read_rows(const json& j, const std::string& path) {
  read_array(j, path);
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < j.size(); ++i) rows.push_back(read_vector(j[i], path + "[" + std::to_string(i) + "]"));
  return rows;
}

// ---- spaces ----------------------------------------------------------------

inline json to_json(const MetricSpace& space) {
  json j;
  if (space.is_euclidean()) {
    j["mode"] = "euclidean";
    json pts = json::array();
    for (PointIndex i = 0; i < space.size(); ++i) pts.push_back(point_json(space.coords(i)));
    j["points"] = std::move(pts);
  } else {
    j["mode"] = "matrix";
    j["n"] = space.size();
    json rows = json::array();
    for (PointIndex i = 0; i < space.size(); ++i) {
      json row = json::array();
      for (PointIndex k = 0; k < space.size(); ++k) row.push_back(number(space.dist_unchecked(i, k)));
      rows.push_back(std::move(row));
    }
    j["dist"] = std::move(rows);
  }
  return j;
}

// Matrix spaces are validated; a violated axiom is an input error.
inline SpacePtr space_from_json(const json& j, const std::string& path = "space") {
  const json& mode = field(j, "mode", path);
  if (mode == "euclidean") {
    const auto rows = read_rows(field(j, "points", path), path + ".points");
    if (rows.empty()) throw InputError(path + ".points: at least one point is required");
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (rows[i].size() != rows[0].size()) {
        throw InputError(path + ".points[" + std::to_string(i) + "]: dimension differs from points[0]");
      }
    }
    return MetricSpace::euclidean(rows[0].size(), rows);
  }
  if (mode == "matrix") {
    const std::size_t n = read_index(field(j, "n", path), path + ".n");
    const auto rows = read_rows(field(j, "dist", path), path + ".dist");
    if (rows.size() != n) throw InputError(path + ".dist: expected " + std::to_string(n) + " rows");
    for (std::size_t i = 0; i < n; ++i) {
      if (rows[i].size() != n) throw InputError(path + ".dist[" + std::to_string(i) + "]: expected " + std::to_string(n) + " entries");
    }
    SpacePtr space = MetricSpace::from_matrix(rows);
    const SpaceReport report = validate_space(*space);
    if (!report.valid()) throw InputError(path + ": " + report.violations.front());
    return space;
  }
  throw InputError(path + ".mode: expected \"euclidean\" or \"matrix\"");
}

// ---- measures and functions ------------------------------------------------

inline json atoms_json(const DiscreteMeasure& mu) {
  json a = json::array();
  for (const Atom& atom : mu.atoms()) a.push_back(json::array({atom.point, number(atom.weight)}));
  return a;
}

inline json to_json(const DiscreteMeasure& mu) {
  return json{{"space", to_json(mu.space())}, {"atoms", atoms_json(mu)}};
}

inline std::vector<Atom> read_atoms(const json& j, const MetricSpace& space, const std::string& path) {
  read_array(j, path);
  std::vector<Atom> atoms;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string p = path + "[" + std::to_string(i) + "]";
    if (!j[i].is_array() || j[i].size() != 2) throw InputError(p + ": expected [index, weight]");
    const std::size_t idx = read_index(j[i][0], p + "[0]");
    if (idx >= space.size()) throw InputError(p + "[0]: point " + std::to_string(idx) + " is not in the space");
    const double w = read_number(j[i][1], p + "[1]");
    if (w < 0.0) throw InputError(p + "[1]: weight is negative");
    atoms.push_back({idx, w});
  }
  return atoms;
}

inline json to_json(const LipFunction& f, const MetricSpace& space) {
  json values = json::array();
  for (const auto& [x, v] : f.values()) values.push_back(json::array({x, number(v)}));
  return json{{"space", to_json(space)}, {"lip", number(f.lip_bound())}, {"values", std::move(values)}};
}

inline std::map<PointIndex, double> read_values(const json& j, const MetricSpace& space, const std::string& path) {
  read_array(j, path);
  std::map<PointIndex, double> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string p = path + "[" + std::to_string(i) + "]";
    if (!j[i].is_array() || j[i].size() != 2) throw InputError(p + ": expected [index, value]");
    const std::size_t idx = read_index(j[i][0], p + "[0]");
    if (idx >= space.size()) throw InputError(p + "[0]: point " + std::to_string(idx) + " is not in the space");
    if (!out.emplace(idx, read_number(j[i][1], p + "[1]")).second) throw InputError(p + "[0]: duplicate point");
  }
  return out;
}

// ---- transport -------------------------------------------------------------

inline json to_json(const TransportCertificate& cert) {
  json plan = json::array();
  for (const PlanEntry& e : cert.plan) plan.push_back(json::array({e.source, e.target, number(e.flow)}));
  json potential = json::array();
  for (const auto& [x, v] : cert.potential.values()) potential.push_back(json::array({x, number(v)}));
  return json{{"value", number(cert.value)}, {"plan", std::move(plan)}, {"potential", std::move(potential)}};
}

// ---- contraction systems ---------------------------------------------------

inline json to_json(const ContractionMap& map) {
  json j;
  if (map.kind() == ContractionMap::Kind::similarity) {
    j["ratio"] = number(map.ratio());
    j["fix"] = point_json(map.fixed_point());
    if (map.rotation().data != Matrix::identity(map.dim()).data) {
      json rows = json::array();
      for (const auto& r : map.rotation().rows()) rows.push_back(point_json(r));
      j["rotation"] = std::move(rows);
    }
  } else if (map.kind() == ContractionMap::Kind::affine) {
    json rows = json::array();
    for (const auto& r : map.linear().rows()) rows.push_back(point_json(r));
    j["A"] = std::move(rows);
    j["b"] = point_json(map.offset());
    j["lip"] = number(map.lip());
  } else {
    throw DomainError("pointwise maps have no JSON form");
  }
  return j;
}

inline json to_json(const ContractionSystem& sys) {
  json maps = json::array();
  for (const auto& m : sys.maps()) maps.push_back(to_json(m));
  json p = json::array();
  for (double v : sys.probs()) p.push_back(number(v));
  return json{{"maps", std::move(maps)}, {"p", std::move(p)}};
}

inline ContractionMap map_from_json(const json& j, const std::string& path) {
  if (!j.is_object()) throw InputError(path + ": expected an object");
  if (j.contains("ratio")) {
    const double r = read_number(j["ratio"], path + ".ratio");
    Point fix = read_vector(field(j, "fix", path), path + ".fix");
    std::optional<Matrix> rot;
    if (j.contains("rotation")) rot = Matrix::from_rows(read_rows(j["rotation"], path + ".rotation"));
    return ContractionMap::similarity(r, std::move(fix), std::move(rot));
  }
  const auto rows = read_rows(field(j, "A", path), path + ".A");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.size()) throw InputError(path + ".A[" + std::to_string(i) + "]: matrix must be square");
  }
  Point b = read_vector(field(j, "b", path), path + ".b");
  if (b.size() != rows.size()) throw InputError(path + ".b: length differs from A");
  const double lip = read_number(field(j, "lip", path), path + ".lip");
  return ContractionMap::affine(Matrix::from_rows(rows), std::move(b), lip);
}

inline ContractionSystem system_from_json(const json& j, const std::string& path = "system") {
  const json& maps = read_array(field(j, "maps", path), path + ".maps");
  std::vector<ContractionMap> out;
  for (std::size_t i = 0; i < maps.size(); ++i) out.push_back(map_from_json(maps[i], path + ".maps[" + std::to_string(i) + "]"));
  std::vector<double> p = read_vector(field(j, "p", path), path + ".p");
  return ContractionSystem(std::move(out), std::move(p));
}

// ---- reports ---------------------------------------------------------------

inline json to_json(const IterationReport& r) {
  json steps = json::array();
  for (double h : r.step_distances) steps.push_back(number(h));
  return json{{"converged", r.converged},
              {"stalled", r.stalled},
              {"steps", r.steps},
              {"last_step_distance", number(r.last_step_distance)},
              {"a_posteriori_bound", number(r.a_posteriori_bound)},
              {"coarsening_bound", number(r.coarsening_bound)},
              {"total_coarsening", number(r.total_coarsening)},
              {"contraction_factor", number(r.contraction_factor)},
              {"step_distances", std::move(steps)},
              {"iterate", to_json(r.iterate)}};
}

inline json to_json(const TailReport& t) {
  return json{{"head_mass", number(t.head_mass)},
              {"head_moment", number(t.head_moment)},
              {"tail_mass", number(t.tail_mass)},
              {"tail_moment", number(t.tail_moment)},
              {"exact", t.exact}};
}

inline json to_json(const CoverResult& c, const MetricSpace& space) {
  json centers = json::array();
  for (PointIndex p : c.centers) {
    json e{{"index", p}};
    if (space.is_euclidean()) e["point"] = point_json(space.coords(p));
    centers.push_back(std::move(e));
  }
  json j{{"covered", c.covered}, {"exact", c.exact}, {"centers", std::move(centers)}};
  if (c.failure) j["failure"] = {{"measure", c.failure->measure_index}, {"uncovered_mass", number(c.failure->uncovered_mass)}};
  return j;
}

inline json index_list(const std::vector<PointIndex>& v) {
  json a = json::array();
  for (PointIndex p : v) a.push_back(p);
  return a;
}

inline json values_array(const LipFunction& f) {
  json a = json::array();
  for (const auto& [x, v] : f.values()) a.push_back(number(v));
  return a;
}

inline json to_json(const WitnessArtifacts& w) {
  json stages = json::array();
  for (std::size_t k = 0; k < w.indices.size(); ++k) {
    stages.push_back({{"n", w.indices[k]},
                      {"A", index_list(w.a_sets[k])},
                      {"D", index_list(w.d_sets[k])},
                      {"added", static_cast<bool>(w.added[k])},
                      {"atoms", atoms_json(w.measures[k])},
                      {"bump", values_array(w.bumps[k])}});
  }
  json osc = json::array();
  for (double v : w.oscillations) osc.push_back(number(v));
  return json{{"epsilon", number(w.epsilon)},
              {"delta", number(w.delta)},
              {"space", to_json(*w.space)},
              {"stages", std::move(stages)},
              {"f", values_array(w.f)},
              {"oscillations", std::move(osc)}};
}

// ---- files -----------------------------------------------------------------

inline json parse_text(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(source + ": " + e.what());
  }
}

// Loads documents from files. Inline spaces with identical content resolve to
// one shared space, so measures read from separate files can be compared.
class Loader {
 public:
  json read(const std::string& path) const {
    std::ifstream in(path);
    if (!in) throw InputError(path + ": cannot open file");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_text(ss.str(), path);
  }

  // `j` is an inline space or the path of a space file, relative to the
  // document it appears in (`path`).
  SpacePtr space(const json& j, const std::string& path) {
    if (j.is_string()) {
      std::filesystem::path file = j.get<std::string>();
      if (file.is_relative()) file = std::filesystem::path(path).parent_path() / file;
      const std::string name = file.lexically_normal().string();
      return space(read(name), name);
    }
    const std::string key = j.dump();
    if (auto it = spaces_.find(key); it != spaces_.end()) return it->second;
    SpacePtr s = space_from_json(j, path);
    spaces_.emplace(key, s);
    return s;
  }

  DiscreteMeasure measure(const json& j, const std::string& path) {
    const SpacePtr s = space(field(j, "space", path), path);
    return DiscreteMeasure(s, read_atoms(field(j, "atoms", path), *s, path + ".atoms"));
  }

  DiscreteMeasure measure_file(const std::string& file) { return measure(read(file), file); }

  // Function document: {"space": ..., "values": [[i, v], ...], "lip": a}.
  std::pair<SpacePtr, LipFunction> function_file(const std::string& file) {
    const json j = read(file);
    const SpacePtr s = space(field(j, "space", file), file);
    auto values = read_values(field(j, "values", file), *s, file + ".values");
    const double lip = j.contains("lip") ? read_number(j["lip"], file + ".lip") : 1.0;
    return {s, LipFunction(std::move(values), lip)};
  }

  ContractionSystem system_file(const std::string& file) { return system_from_json(read(file), file); }

 private:
  std::map<std::string, SpacePtr> spaces_;
};

}  // namespace krm::io
