#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "krm/detail/numeric.hpp"
#include "krm/error.hpp"
#include "krm/lipschitz.hpp"
#include "krm/measure.hpp"
#include "krm/metric_space.hpp"
#include "krm/transport.hpp"

namespace krm {

// Indexed family n -> nu_n of measures over points x_0, x_1, ... in R^dim.
// Points are added to a shared space on demand; measures are cached, so the
// same n always yields the same measure. Not thread-safe.
class MeasureSequence {
 public:
  using Positions = std::function<Point(std::size_t)>;
  // n -> (position index k, weight) pairs.
  using Weights = std::function<std::vector<std::pair<std::size_t, double>>(std::size_t)>;

  MeasureSequence(std::string name, std::size_t dim, Positions positions, Weights weights, std::size_t horizon,
                  std::size_t first_index = 1)
      : name_(std::move(name)),
        dim_(dim),
        positions_(std::move(positions)),
        weights_(std::move(weights)),
        horizon_(horizon),
        first_(first_index) {
    if (horizon_ < first_) throw PreconditionError("sequence horizon must be at least its first index");
    space_ = MetricSpace::euclidean(dim_, {positions_(0)});
  }

  const std::string& name() const { return name_; }
  std::size_t horizon() const { return horizon_; }
  std::size_t first_index() const { return first_; }
  std::size_t dim() const { return dim_; }
  // Space holding every point materialized so far.
  const SpacePtr& space() const { return space_; }

  // Point index of x_k, materializing x_0..x_k if needed.
  PointIndex point(std::size_t k) {
    ensure(k);
    return k;
  }

  const DiscreteMeasure& at(std::size_t n) {
    if (n < first_ || n > horizon_) {
      throw DomainError("sequence '" + name_ + "' has no term " + std::to_string(n) + " (range " +
                        std::to_string(first_) + ".." + std::to_string(horizon_) + ")");
    }
    if (auto it = cache_.find(n); it != cache_.end()) return it->second;
    const auto terms = weights_(n);
    std::size_t top = 0;
    for (const auto& t : terms) top = std::max(top, t.first);
    ensure(top);
    std::vector<Atom> atoms;
    atoms.reserve(terms.size());
    for (const auto& [k, w] : terms) atoms.push_back({k, w});
    DiscreteMeasure mu(space_, std::move(atoms));
    if (!mu.is_probability()) {
      throw PreconditionError("term " + std::to_string(n) + " of '" + name_ + "' has mass " + std::to_string(mu.mass()));
    }
    return cache_.emplace(n, std::move(mu)).first->second;
  }

 private:
  void ensure(std::size_t k) {
    if (k < space_->size()) return;
    std::vector<Point> pts;
    for (std::size_t i = space_->size(); i <= k; ++i) {
      Point p = positions_(i);
      if (p.size() != dim_) throw DomainError("position " + std::to_string(i) + " has the wrong dimension");
      pts.push_back(std::move(p));
    }
    space_ = space_->extend(pts);
  }

  std::string name_;
  std::size_t dim_;
  Positions positions_;
  Weights weights_;
  std::size_t horizon_;
  std::size_t first_;
  SpacePtr space_;
  std::map<std::size_t, DiscreteMeasure> cache_;
};

inline constexpr double kGrowthTolerance = 1e-9;

// nu_n = 2^-n delta_{x_0} + sum_{k=1..n} 2^-k delta_{x_k}, with dist(x_0, x_k) <= k
// checked up to the horizon.
inline MeasureSequence assertion_1_1_sequence(MeasureSequence::Positions positions, std::size_t dim,
                                              std::size_t horizon) {
  const Point x0 = positions(0);
  for (std::size_t k = 1; k <= horizon; ++k) {
    const double d = std::sqrt(detail::squared_distance(x0, positions(k)));
    if (d > static_cast<double>(k) * (1.0 + kGrowthTolerance)) {
      throw PreconditionError("dist(x_0, x_" + std::to_string(k) + ") = " + std::to_string(d) + " exceeds " +
                              std::to_string(k));
    }
  }
  auto weights = [](std::size_t n) {
    std::vector<std::pair<std::size_t, double>> w;
    w.emplace_back(0, std::ldexp(1.0, -static_cast<int>(n)));
    for (std::size_t k = 1; k <= n; ++k) w.emplace_back(k, std::ldexp(1.0, -static_cast<int>(k)));
    return w;
  };
  return MeasureSequence("assertion-1.1", dim, std::move(positions), weights, horizon, 1);
}

// nu_n = (1/n) delta_{x_n} + (1 - 1/n) delta_{x_0}, with dist(x_0, x_n) >= n^2.
inline MeasureSequence lemma_3_7_sequence(MeasureSequence::Positions positions, std::size_t dim,
                                          std::size_t horizon) {
  const Point x0 = positions(0);
  for (std::size_t n = 1; n <= horizon; ++n) {
    const double d = std::sqrt(detail::squared_distance(x0, positions(n)));
    const double need = static_cast<double>(n) * static_cast<double>(n);
    if (d < need * (1.0 - kGrowthTolerance)) {
      throw PreconditionError("dist(x_0, x_" + std::to_string(n) + ") = " + std::to_string(d) + " is below " +
                              std::to_string(need));
    }
  }
  auto weights = [](std::size_t n) {
    const double inv = 1.0 / static_cast<double>(n);
    return std::vector<std::pair<std::size_t, double>>{{0, 1.0 - inv}, {n, inv}};
  };
  return MeasureSequence("lemma-3.7", dim, std::move(positions), weights, horizon, 1);
}

// nu_n = delta_{x_n}.
inline MeasureSequence escaping_dirac_sequence(MeasureSequence::Positions positions, std::size_t dim,
                                               std::size_t horizon) {
  auto weights = [](std::size_t n) { return std::vector<std::pair<std::size_t, double>>{{n, 1.0}}; };
  return MeasureSequence("escaping-dirac", dim, std::move(positions), weights, horizon, 1);
}

// nu_n = delta_x for every n.
inline MeasureSequence constant_sequence(Point x, std::size_t horizon) {
  const std::size_t dim = x.size();
  auto positions = [x = std::move(x)](std::size_t) { return x; };
  auto weights = [](std::size_t) { return std::vector<std::pair<std::size_t, double>>{{0, 1.0}}; };
  return MeasureSequence("constant", dim, std::move(positions), weights, horizon, 1);
}

// Positions k -> scale * k^power on the real line.
inline MeasureSequence::Positions line_positions(double scale, double power) {
  return [scale, power](std::size_t k) { return Point{scale * std::pow(static_cast<double>(k), power)}; };
}

struct CauchyEntry {
  std::size_t n;
  std::size_t m;
  double value;
};

struct CauchyProfile {
  std::vector<CauchyEntry> entries;                     // n < m, row-major
  std::vector<std::pair<std::size_t, double>> sup_tail;  // n -> max_{n<m<=n_max} H(nu_n, nu_m)
};

// Exact H(nu_n, nu_m) for first <= n < m <= n_max, computed in parallel.
inline CauchyProfile cauchy_profile(MeasureSequence& seq, std::size_t n_max, unsigned threads = 0) {
  if (n_max > seq.horizon()) {
    throw PreconditionError("n_max " + std::to_string(n_max) + " exceeds the horizon " + std::to_string(seq.horizon()));
  }
  CauchyProfile profile;
  std::vector<const DiscreteMeasure*> terms;
  for (std::size_t n = seq.first_index(); n <= n_max; ++n) terms.push_back(&seq.at(n));
  for (std::size_t a = 0; a < terms.size(); ++a) {
    for (std::size_t b = a + 1; b < terms.size(); ++b) {
      profile.entries.push_back({seq.first_index() + a, seq.first_index() + b, 0.0});
    }
  }

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(profile.entries.size(), 1)));
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(threads);
  auto work = [&](unsigned slot) {
    try {
      for (std::size_t e = next++; e < profile.entries.size(); e = next++) {
        CauchyEntry& entry = profile.entries[e];
        entry.value = kr_distance(*terms[entry.n - seq.first_index()], *terms[entry.m - seq.first_index()]).value;
      }
    } catch (...) {
      errors[slot] = std::current_exception();
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(work, t);
  work(0);
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::map<std::size_t, double> sup;
  for (const CauchyEntry& e : profile.entries) {
    auto [it, fresh] = sup.emplace(e.n, e.value);
    if (!fresh) it->second = std::max(it->second, e.value);
  }
  profile.sup_tail.assign(sup.begin(), sup.end());
  return profile;
}

// Largest |H(delta_x, delta_y) - dist(x, y)| over all pairs of points.
inline double dirac_identity_sweep(const SpacePtr& space) {
  double worst = 0.0;
  for (PointIndex x = 0; x < space->size(); ++x) {
    for (PointIndex y = x + 1; y < space->size(); ++y) {
      const double h = kr_distance(dirac(x, space), dirac(y, space)).value;
      worst = std::max(worst, std::abs(h - space->dist(x, y)));
    }
  }
  return worst;
}

namespace detail {

inline double dist_to_set(const MetricSpace& space, PointIndex x, std::span<const PointIndex> set) {
  double best = std::numeric_limits<double>::infinity();
  for (PointIndex a : set) best = std::min(best, space.dist_unchecked(x, a));
  return best;
}

// nu(set^r) for the closed r-neighbourhood.
inline double mass_within(const DiscreteMeasure& nu, const MetricSpace& space, std::span<const PointIndex> set,
                          double r) {
  CompensatedSum s;
  for (const Atom& a : nu.atoms()) {
    if (dist_to_set(space, a.point, set) <= r) s.add(a.weight);
  }
  return s.value();
}

// nu(X \ set^r).
inline double mass_outside(const DiscreteMeasure& nu, const MetricSpace& space, std::span<const PointIndex> set,
                           double r) {
  CompensatedSum s;
  for (const Atom& a : nu.atoms()) {
    if (dist_to_set(space, a.point, set) > r) s.add(a.weight);
  }
  return s.value();
}

}  // namespace detail

struct CoverFailure {
  std::size_t measure_index;
  double uncovered_mass;
};

struct CoverResult {
  bool covered = false;
  std::vector<PointIndex> centers;
  std::optional<CoverFailure> failure;
  // True when the answer is definitive: a cover was found, or exhaustive
  // search showed none exists within the budget.
  bool exact = false;
};

// Exhaustive search runs when greedy overshoots the budget and at most this
// many candidate centers exist.
inline constexpr std::size_t kExhaustiveCoverCandidates = 20;

// Finite set of closed eps-balls centred at atoms leaving every measure with
// uncovered mass < delta, within an optional budget on the number of balls.
inline CoverResult tightness_cover(std::span<const DiscreteMeasure> measures, double eps, double delta,
                                   std::optional<std::size_t> budget = std::nullopt) {
  if (!(eps > 0.0) || !(delta > 0.0)) throw PreconditionError("eps and delta must be positive");
  CoverResult result;
  if (measures.empty()) {
    result.covered = result.exact = true;
    return result;
  }
  SpacePtr space_ptr = measures.front().space_ptr();
  for (const auto& m : measures) space_ptr = common_space(space_ptr, m.space_ptr());
  const MetricSpace& space = *space_ptr;

  std::vector<PointIndex> candidates;
  for (const auto& m : measures) {
    for (const Atom& a : m.atoms()) candidates.push_back(a.point);
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  auto uncovered = [&](std::span<const PointIndex> centers) {
    std::vector<double> out;
    out.reserve(measures.size());
    for (const auto& m : measures) {
      out.push_back(centers.empty() ? m.mass() : detail::mass_outside(m, space, centers, eps));
    }
    return out;
  };
  auto worst_of = [](const std::vector<double>& u) {
    return static_cast<std::size_t>(std::max_element(u.begin(), u.end()) - u.begin());
  };

  // Greedy: serve the worst measure with the center covering most of its
  // remaining mass (ties: most remaining mass over failing measures, then
  // lowest index).
  std::vector<PointIndex> greedy;
  std::vector<double> left = uncovered(greedy);
  while (left[worst_of(left)] >= delta) {
    const std::size_t worst = worst_of(left);
    PointIndex best = candidates.front();
    double best_own = -1.0, best_all = -1.0;
    for (PointIndex c : candidates) {
      if (std::find(greedy.begin(), greedy.end(), c) != greedy.end()) continue;
      double own = 0.0, all = 0.0;
      for (std::size_t i = 0; i < measures.size(); ++i) {
        if (left[i] < delta) continue;
        for (const Atom& a : measures[i].atoms()) {
          if (space.dist_unchecked(a.point, c) > eps) continue;
          if (!greedy.empty() && detail::dist_to_set(space, a.point, greedy) <= eps) continue;
          all += a.weight;
          if (i == worst) own += a.weight;
        }
      }
      if (own > best_own || (own == best_own && all > best_all)) {
        best = c;
        best_own = own;
        best_all = all;
      }
    }
    greedy.push_back(best);
    left = uncovered(greedy);
  }

  if (!budget || greedy.size() <= *budget) {
    result.covered = result.exact = true;
    result.centers = std::move(greedy);
    return result;
  }

  if (candidates.size() <= kExhaustiveCoverCandidates) {
    // Subsets of size <= budget in order of size, then lexicographically.
    std::vector<PointIndex> best_set;
    double best_worst = std::numeric_limits<double>::infinity();
    std::size_t best_index = 0;
    const std::size_t limit = std::min(*budget, candidates.size());
    for (std::size_t size = 0; size <= limit; ++size) {
      std::vector<std::size_t> pick(size);
      for (std::size_t i = 0; i < size; ++i) pick[i] = i;
      for (;;) {
        std::vector<PointIndex> centers;
        for (std::size_t i : pick) centers.push_back(candidates[i]);
        const auto u = uncovered(centers);
        const std::size_t w = worst_of(u);
        if (u[w] < delta) {
          result.covered = result.exact = true;
          result.centers = std::move(centers);
          return result;
        }
        if (u[w] < best_worst) {
          best_worst = u[w];
          best_index = w;
          best_set = centers;
        }
        std::size_t i = size;
        while (i > 0 && pick[i - 1] == candidates.size() - size + i - 1) --i;
        if (i == 0) break;
        ++pick[i - 1];
        for (std::size_t j = i; j < size; ++j) pick[j] = pick[j - 1] + 1;
      }
    }
    result.exact = true;
    result.centers = std::move(best_set);
    result.failure = CoverFailure{best_index, best_worst};
    return result;
  }

  greedy.resize(*budget);
  const auto u = uncovered(greedy);
  const std::size_t w = worst_of(u);
  result.centers = std::move(greedy);
  result.failure = CoverFailure{w, u[w]};
  return result;
}

// Oscillating test function built from a non-tight sequence.
struct WitnessArtifacts {
  SpacePtr space;
  double epsilon = 0.0;
  double delta = 0.0;
  std::vector<std::size_t> indices;              // n_1 < n_2 < ...
  std::vector<DiscreteMeasure> measures;         // nu_{n_k}
  std::vector<std::vector<PointIndex>> a_sets;   // A_k
  std::vector<std::vector<PointIndex>> d_sets;   // D_k
  std::vector<LipFunction> bumps;                // phi_k
  std::vector<bool> added;                       // phi_k is a summand of f (added[0] is false: f_1 = 0)
  LipFunction f;                                 // f_K
  std::vector<double> oscillations;              // |nu_{n_k}(f) - nu_{n_{k+1}}(f)|, k < K
};

namespace detail {

inline std::string describe_points(const MetricSpace& space, std::span<const PointIndex> set) {
  std::ostringstream os;
  os << '{';
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (i) os << ", ";
    if (space.is_euclidean()) {
      const auto c = space.coords(set[i]);
      os << '(';
      for (std::size_t k = 0; k < c.size(); ++k) os << (k ? "," : "") << c[k];
      os << ')';
    } else {
      os << '#' << set[i];
    }
  }
  os << '}';
  return os.str();
}

inline LipFunction bump(const MetricSpace& space, std::span<const PointIndex> d_set, double eps) {
  std::vector<double> v(space.size());
  for (PointIndex x = 0; x < space.size(); ++x) {
    v[x] = std::max(1.0 - dist_to_set(space, x, d_set) * 2.0 / eps, 0.0);
  }
  return LipFunction::total(v, 2.0 / eps);
}

}  // namespace detail

// Runs the construction for K stages, probing the sequence up to its horizon.
//
// Every separability step takes all atoms of the measure at hand: A_1 = D_1 =
// atoms of nu_{n_1}; D_k = atoms of nu_{n_k} outside A_{k-1}^eps; A_k = A_{k-1}
// together with all atoms of nu_{n_k}.
inline WitnessArtifacts build_witness(MeasureSequence& seq, double eps, double delta, std::size_t stages) {
  if (!(eps > 0.0) || !(delta > 0.0)) throw PreconditionError("eps and delta must be positive");
  if (stages == 0) throw PreconditionError("witness needs at least one stage");
  WitnessArtifacts w;
  w.epsilon = eps;
  w.delta = delta;

  std::size_t n = seq.first_index();
  for (; n <= seq.horizon(); ++n) {
    if (seq.at(n).mass() >= delta) break;
  }
  if (n > seq.horizon()) {
    throw PremiseError("no term up to the horizon has mass >= delta = " + std::to_string(delta));
  }
  w.indices.push_back(n);
  w.a_sets.push_back(seq.at(n).support());
  w.d_sets.push_back(w.a_sets.back());

  for (std::size_t k = 2; k <= stages; ++k) {
    const std::vector<PointIndex>& prev = w.a_sets.back();
    std::size_t m = w.indices.back() + 1;
    for (; m <= seq.horizon(); ++m) {
      const DiscreteMeasure& nu = seq.at(m);
      if (detail::mass_outside(nu, *seq.space(), prev, eps) >= delta) break;
    }
    if (m > seq.horizon()) {
      throw PremiseError("sequence '" + seq.name() + "' looks tight: no n in (" + std::to_string(w.indices.back()) +
                         ", " + std::to_string(seq.horizon()) + "] has nu_n(X \\ A^eps) >= delta for A = " +
                         detail::describe_points(*seq.space(), prev));
    }
    const DiscreteMeasure& nu = seq.at(m);
    std::vector<PointIndex> d_set;
    for (const Atom& a : nu.atoms()) {
      if (detail::dist_to_set(*seq.space(), a.point, prev) > eps) d_set.push_back(a.point);
    }
    std::vector<PointIndex> a_set = prev;
    const auto support = nu.support();
    a_set.insert(a_set.end(), support.begin(), support.end());
    std::sort(a_set.begin(), a_set.end());
    a_set.erase(std::unique(a_set.begin(), a_set.end()), a_set.end());
    w.indices.push_back(m);
    w.d_sets.push_back(std::move(d_set));
    w.a_sets.push_back(std::move(a_set));
  }

  w.space = seq.space();
  const MetricSpace& space = *w.space;
  for (std::size_t n_k : w.indices) w.measures.push_back(seq.at(n_k).on(w.space));
  for (const auto& d : w.d_sets) w.bumps.push_back(detail::bump(space, d, eps));

  // f_1 = 0; f_{k+1} = f_k if |nu_{n_k}(f_k) - nu_{n_{k+1}}(f_k)| > delta/8, else f_k + phi_{k+1}.
  std::vector<double> f(space.size(), 0.0);
  w.added.assign(stages, false);
  for (std::size_t k = 0; k + 1 < stages; ++k) {
    const LipFunction fk = LipFunction::total(f, 2.0 / eps);
    const double gap = std::abs(integrate(w.measures[k], fk) - integrate(w.measures[k + 1], fk));
    if (gap > delta / 8.0) continue;
    w.added[k + 1] = true;
    for (PointIndex x = 0; x < space.size(); ++x) f[x] += w.bumps[k + 1](x);
  }
  w.f = LipFunction::total(f, 2.0 / eps);
  for (std::size_t k = 0; k + 1 < stages; ++k) {
    w.oscillations.push_back(std::abs(integrate(w.measures[k], w.f) - integrate(w.measures[k + 1], w.f)));
  }
  return w;
}

struct WitnessCheck {
  std::string name;
  bool passed;
  std::string detail;
};

struct WitnessReport {
  std::vector<WitnessCheck> checks;
  double lip = 0.0;
  double min_oscillation = std::numeric_limits<double>::infinity();
  bool valid() const {
    return std::all_of(checks.begin(), checks.end(), [](const WitnessCheck& c) { return c.passed; });
  }
};

// Re-checks the artifacts from their stored data: properties (i)-(v), the
// bump formula, the recursion, range and Lipschitz bound of f, disjoint bump
// supports, and the delta/16 oscillation for every consecutive pair.
inline WitnessReport verify_witness(const WitnessArtifacts& w) {
  WitnessReport r;
  const MetricSpace& space = *w.space;
  const double eps = w.epsilon;
  const double delta = w.delta;
  const std::size_t stages = w.indices.size();
  auto check = [&](std::string name, bool ok, std::string detail = {}) {
    r.checks.push_back({std::move(name), ok, std::move(detail)});
  };
  auto subset = [](const std::vector<PointIndex>& a, const std::vector<PointIndex>& b) {
    return std::all_of(a.begin(), a.end(), [&](PointIndex p) { return std::find(b.begin(), b.end(), p) != b.end(); });
  };
  auto where = [](std::size_t i, std::size_t j) { return " at (" + std::to_string(i) + "," + std::to_string(j) + ")"; };

  bool ok = w.a_sets.size() == stages && w.d_sets.size() == stages && w.measures.size() == stages &&
            w.bumps.size() == stages && w.added.size() == stages;
  check("shape", ok);
  if (!ok) return r;

  ok = true;
  for (std::size_t k = 1; k < stages; ++k) ok = ok && w.indices[k - 1] < w.indices[k];
  check("increasing indices", ok);

  std::string fail;
  for (std::size_t i = 1; i < stages && fail.empty(); ++i) {
    if (!subset(w.a_sets[i - 1], w.a_sets[i])) fail = "A_" + std::to_string(i) + " not in A_" + std::to_string(i + 1);
  }
  check("(i) A_{i-1} in A_i", fail.empty(), fail);

  fail.clear();
  for (std::size_t i = 0; i < stages && fail.empty(); ++i) {
    for (std::size_t j = i; j < stages && fail.empty(); ++j) {
      if (!subset(w.d_sets[i], w.a_sets[j])) fail = "D not in A" + where(i + 1, j + 1);
    }
  }
  check("(ii) D_i in A_j for i <= j", fail.empty(), fail);

  // Closed eps/2-neighbourhoods are disjoint when the sets are more than eps
  // apart; the materialized points are checked directly as well.
  fail.clear();
  for (std::size_t i = 0; i < stages && fail.empty(); ++i) {
    for (std::size_t j = 0; j < i && fail.empty(); ++j) {
      for (PointIndex d : w.d_sets[i]) {
        if (detail::dist_to_set(space, d, w.a_sets[j]) <= eps) fail = "sets within eps" + where(i + 1, j + 1);
      }
      for (PointIndex x = 0; x < space.size() && fail.empty(); ++x) {
        if (detail::dist_to_set(space, x, w.d_sets[i]) <= eps / 2 &&
            detail::dist_to_set(space, x, w.a_sets[j]) <= eps / 2) {
          fail = "shared point" + where(i + 1, j + 1);
        }
      }
    }
  }
  check("(iii) D_i^{eps/2} and A_j^{eps/2} disjoint for i > j", fail.empty(), fail);

  fail.clear();
  for (std::size_t k = 0; k < stages && fail.empty(); ++k) {
    const double m = detail::mass_within(w.measures[k], space, w.d_sets[k], eps / 4);
    if (!(m > delta / 2)) fail = "k=" + std::to_string(k + 1) + " mass " + std::to_string(m);
  }
  check("(iv) nu_{n_k}(D_k^{eps/4}) > delta/2", fail.empty(), fail);

  fail.clear();
  for (std::size_t k = 0; k < stages && fail.empty(); ++k) {
    const double m = detail::mass_outside(w.measures[k], space, w.a_sets[k], eps / 2);
    if (!(m < delta / 32)) fail = "k=" + std::to_string(k + 1) + " mass " + std::to_string(m);
  }
  check("(v) nu_{n_k}(X \\ A_k^{eps/2}) < delta/32", fail.empty(), fail);

  ok = true;
  for (std::size_t k = 0; k < stages; ++k) ok = ok && w.bumps[k] == detail::bump(space, w.d_sets[k], eps);
  check("bump formula", ok);

  fail.clear();
  for (PointIndex x = 0; x < space.size() && fail.empty(); ++x) {
    int active = 0;
    for (const auto& b : w.bumps) active += b(x) > 0.0 ? 1 : 0;
    if (active > 1) fail = "point " + std::to_string(x) + " lies in " + std::to_string(active) + " supports";
  }
  check("bump supports disjoint", fail.empty(), fail);

  std::vector<double> f(space.size(), 0.0);
  ok = !w.added.front();
  for (std::size_t k = 0; k + 1 < stages; ++k) {
    const LipFunction fk = LipFunction::total(f, 2.0 / eps);
    const double gap = std::abs(integrate(w.measures[k], fk) - integrate(w.measures[k + 1], fk));
    const bool add = !(gap > delta / 8.0);
    ok = ok && add == w.added[k + 1];
    if (add) {
      for (PointIndex x = 0; x < space.size(); ++x) f[x] += w.bumps[k + 1](x);
    }
  }
  ok = ok && LipFunction::total(f, 2.0 / eps).values() == w.f.values();
  check("recursion", ok);

  ok = w.f.covers(space);
  for (const auto& [x, v] : w.f.values()) ok = ok && v >= 0.0 && v <= 1.0;
  check("0 <= f <= 1", ok);

  r.lip = w.f.covers(space) ? lip_constant(w.f, space) : std::numeric_limits<double>::infinity();
  check("Lip f <= 2/eps", r.lip <= 2.0 / eps + 1e-9, "Lip f = " + std::to_string(r.lip));

  // Each tail |nu_{n_k}(f - f_k)| is below delta/32 by (v), so a recursion gap
  // above delta/8 leaves delta/8 - 2 delta/32 = delta/16. The tail term is
  // delta/32 here, not eps/32; the two only agree when eps = delta.
  fail.clear();
  for (std::size_t k = 0; k + 1 < stages; ++k) {
    const double osc = std::abs(integrate(w.measures[k], w.f) - integrate(w.measures[k + 1], w.f));
    r.min_oscillation = std::min(r.min_oscillation, osc);
    if (!(osc > delta / 16) && fail.empty()) fail = "k=" + std::to_string(k + 1) + " oscillation " + std::to_string(osc);
  }
  check("oscillation > delta/16", fail.empty(), fail);
  return r;
}

}  // namespace krm
