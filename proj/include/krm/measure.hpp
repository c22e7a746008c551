#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "krm/detail/numeric.hpp"
#include "krm/error.hpp"
#include "krm/lipschitz.hpp"
#include "krm/metric_space.hpp"

namespace krm {

inline constexpr double kMassTolerance = 1e-12;
// Images closer than this (euclidean) are identified with an existing point.
inline constexpr double kMergeTolerance = 1e-12;

struct Atom {
  PointIndex point;
  double weight;
  friend bool operator==(const Atom&, const Atom&) = default;
};

// Finitely supported nonnegative measure. Atoms are kept sorted by point,
// without duplicates and without zero weights.
class DiscreteMeasure {
 public:
  DiscreteMeasure(SpacePtr space, std::vector<Atom> atoms) : space_(std::move(space)) {
    if (!space_) throw DomainError("measure needs a metric space");
    std::sort(atoms.begin(), atoms.end(),
              [](const Atom& a, const Atom& b) { return a.point < b.point; });
    for (const Atom& a : atoms) {
      space_->check_index(a.point);
      if (!std::isfinite(a.weight) || a.weight < 0.0) {
        throw DomainError("atom at point " + std::to_string(a.point) + " has invalid weight");
      }
      if (a.weight == 0.0) continue;
      if (!atoms_.empty() && atoms_.back().point == a.point) {
        atoms_.back().weight += a.weight;
      } else {
        atoms_.push_back(a);
      }
    }
    detail::CompensatedSum s;
    for (const Atom& a : atoms_) s.add(a.weight);
    mass_ = s.value();
  }

  const SpacePtr& space_ptr() const { return space_; }
  const MetricSpace& space() const { return *space_; }
  std::span<const Atom> atoms() const { return atoms_; }
  std::size_t size() const { return atoms_.size(); }
  bool empty() const { return atoms_.empty(); }
  double mass() const { return mass_; }

  bool is_probability() const { return std::abs(mass_ - 1.0) <= kMassTolerance; }

  double weight_at(PointIndex p) const {
    auto it = std::lower_bound(atoms_.begin(), atoms_.end(), p,
                               [](const Atom& a, PointIndex q) { return a.point < q; });
    return (it != atoms_.end() && it->point == p) ? it->weight : 0.0;
  }

  std::vector<PointIndex> support() const {
    std::vector<PointIndex> s;
    s.reserve(atoms_.size());
    for (const Atom& a : atoms_) s.push_back(a.point);
    return s;
  }

  // Same atoms viewed on an extension of the current space.
  DiscreteMeasure on(SpacePtr extension) const {
    if (!extension->extends(*space_)) throw DomainError("target space does not extend the measure's space");
    return DiscreteMeasure(std::move(extension), atoms_);
  }

  // Same point indices and weights (spaces compared by lineage, not identity).
  bool same_atoms(const DiscreteMeasure& other) const { return atoms_ == other.atoms_; }

 private:
  SpacePtr space_;
  std::vector<Atom> atoms_;
  double mass_ = 0.0;
};

inline DiscreteMeasure dirac(PointIndex x, SpacePtr space) {
  space->check_index(x);
  return DiscreteMeasure(std::move(space), {{x, 1.0}});
}

inline double integrate(const DiscreteMeasure& mu, const LipFunction& f) {
  detail::CompensatedSum s;
  for (const Atom& a : mu.atoms()) s.add(a.weight * f(a.point));
  return s.value();
}

// mu(phi_a), the first moment about base point a.
inline double first_moment(const DiscreteMeasure& mu, PointIndex a) {
  mu.space().check_index(a);
  detail::CompensatedSum s;
  for (const Atom& atom : mu.atoms()) s.add(atom.weight * mu.space().dist_unchecked(a, atom.point));
  return s.value();
}

// Explicit renormalisation to unit mass.
inline DiscreteMeasure normalized(const DiscreteMeasure& mu) {
  if (!(mu.mass() > 0.0)) throw PreconditionError("cannot normalise a zero measure");
  std::vector<Atom> atoms(mu.atoms().begin(), mu.atoms().end());
  for (Atom& a : atoms) a.weight /= mu.mass();
  return DiscreteMeasure(mu.space_ptr(), std::move(atoms));
}

namespace detail {

// Registers image points on top of a euclidean base space, identifying an
// image with the lowest-index existing point within kMergeTolerance.
//
// Candidates are found through a scalar projection key: |key(a)-key(b)| is
// at most |w|*|a-b|, so only points with nearby keys need a full check.
class PointRegistry {
 public:
  explicit PointRegistry(SpacePtr base, double tolerance = kMergeTolerance)
      : base_(std::move(base)), tol_(tolerance) {
    if (!base_->is_euclidean()) throw DomainError("new points can only be added to euclidean spaces");
    dim_ = base_->dim();
    weights_.resize(dim_);
    double norm2 = 0.0;
    for (std::size_t k = 0; k < dim_; ++k) {
      weights_[k] = 1.0 / (1.0 + 0.6180339887498949 * static_cast<double>(k));
      norm2 += weights_[k] * weights_[k];
    }
    radius_ = std::sqrt(norm2) * tol_ * (1.0 + 1e-6);
    for (PointIndex i = 0; i < base_->size(); ++i) index_.emplace(key(base_->coords(i)), i);
  }

  PointIndex insert(std::span<const double> p) {
    if (p.size() != dim_) {
      throw DomainError("image has dimension " + std::to_string(p.size()) + ", space has " +
                        std::to_string(dim_));
    }
    for (double v : p) {
      if (!std::isfinite(v)) throw DomainError("image has a non-finite coordinate");
    }
    const double k = key(p);
    const double slack = radius_ + 16.0 * std::numeric_limits<double>::epsilon() * magnitude(p);
    PointIndex found = std::numeric_limits<PointIndex>::max();
    for (auto it = index_.lower_bound(k - slack); it != index_.end() && it->first <= k + slack; ++it) {
      if (it->second < found && squared_distance(coords(it->second), p) < tol_ * tol_) found = it->second;
    }
    if (found != std::numeric_limits<PointIndex>::max()) return found;
    const PointIndex idx = base_->size() + added_.size();
    added_.emplace_back(p.begin(), p.end());
    index_.emplace(k, idx);
    return idx;
  }

  SpacePtr finish() const { return added_.empty() ? base_ : base_->extend(added_); }

 private:
  double key(std::span<const double> p) const {
    double s = 0.0;
    for (std::size_t k = 0; k < dim_; ++k) s += weights_[k] * p[k];
    return s;
  }

  // Bounds the rounding error of key() for points of this size.
  double magnitude(std::span<const double> p) const {
    double s = 0.0;
    for (std::size_t k = 0; k < dim_; ++k) s += weights_[k] * std::abs(p[k]);
    return s;
  }

  std::span<const double> coords(PointIndex i) const {
    if (i < base_->size()) return base_->coords(i);
    return added_[i - base_->size()];
  }

  SpacePtr base_;
  double tol_;
  std::size_t dim_ = 0;
  std::vector<double> weights_;
  double radius_ = 0.0;
  std::multimap<double, PointIndex> index_;
  std::vector<Point> added_;
};

}  // namespace detail

using IndexMap = std::function<PointIndex(PointIndex)>;
using PointMap = std::function<Point(std::span<const double>)>;

// Image measure under a map between existing points; colliding images merge.
inline DiscreteMeasure pushforward(const DiscreteMeasure& mu, const IndexMap& map) {
  std::vector<Atom> atoms;
  atoms.reserve(mu.size());
  for (const Atom& a : mu.atoms()) {
    const PointIndex img = map(a.point);
    mu.space().check_index(img);
    atoms.push_back({img, a.weight});
  }
  return DiscreteMeasure(mu.space_ptr(), std::move(atoms));
}

// Image measure under a coordinate map. New images are appended to an
// extension of `base` (which must extend mu's space); images within
// kMergeTolerance of an existing point are identified with it.
inline DiscreteMeasure pushforward(const DiscreteMeasure& mu, const PointMap& map, const SpacePtr& base) {
  if (!base->extends(mu.space())) throw DomainError("pushforward base must extend the measure's space");
  detail::PointRegistry registry(base);
  std::vector<Atom> atoms;
  atoms.reserve(mu.size());
  for (const Atom& a : mu.atoms()) {
    const Point img = map(mu.space().coords(a.point));
    atoms.push_back({registry.insert(img), a.weight});
  }
  return DiscreteMeasure(registry.finish(), std::move(atoms));
}

inline DiscreteMeasure pushforward(const DiscreteMeasure& mu, const PointMap& map) {
  return pushforward(mu, map, mu.space_ptr());
}

struct MixtureTerm {
  double weight;
  DiscreteMeasure measure;
};

// sum_i p_i mu_i over the deepest of the components' (nested) spaces.
inline DiscreteMeasure mixture(std::span<const MixtureTerm> terms) {
  if (terms.empty()) throw DomainError("mixture of no components");
  SpacePtr space = terms.front().measure.space_ptr();
  for (const auto& t : terms) {
    if (!std::isfinite(t.weight) || t.weight < 0.0) throw PreconditionError("mixture weights must be nonnegative");
    space = common_space(space, t.measure.space_ptr());
  }
  std::map<PointIndex, detail::CompensatedSum> acc;
  for (const auto& t : terms) {
    for (const Atom& a : t.measure.atoms()) acc[a.point].add(t.weight * a.weight);
  }
  std::vector<Atom> atoms;
  atoms.reserve(acc.size());
  for (const auto& [p, s] : acc) atoms.push_back({p, s.value()});
  return DiscreteMeasure(std::move(space), std::move(atoms));
}

inline DiscreteMeasure mixture(std::initializer_list<MixtureTerm> terms) {
  return mixture(std::span<const MixtureTerm>(terms.begin(), terms.size()));
}

struct Coarsening {
  DiscreteMeasure measure;
  // Cost of the merge coupling; an upper bound on H(input, measure).
  double error_bound;
};

// Reduce to at most `cap` atoms: greedy farthest-point representatives
// (starting from the heaviest atom), then nearest-representative assignment.
inline Coarsening coarsen(const DiscreteMeasure& mu, std::size_t cap) {
  if (cap == 0) throw PreconditionError("coarsening cap must be at least 1");
  if (mu.size() <= cap) return {mu, 0.0};
  const auto atoms = mu.atoms();
  const MetricSpace& space = mu.space();
  const std::size_t k = atoms.size();

  std::size_t first = 0;
  for (std::size_t a = 1; a < k; ++a) {
    if (atoms[a].weight > atoms[first].weight) first = a;
  }
  std::vector<std::size_t> reps{first};
  std::vector<double> nearest(k);
  std::vector<std::size_t> owner(k, 0);
  for (std::size_t a = 0; a < k; ++a) nearest[a] = space.dist_unchecked(atoms[a].point, atoms[first].point);

  while (reps.size() < cap) {
    std::size_t far = 0;
    for (std::size_t a = 1; a < k; ++a) {
      if (nearest[a] > nearest[far]) far = a;
    }
    if (nearest[far] == 0.0) break;
    const std::size_t r = reps.size();
    reps.push_back(far);
    for (std::size_t a = 0; a < k; ++a) {
      const double d = space.dist_unchecked(atoms[a].point, atoms[far].point);
      if (d < nearest[a]) {
        nearest[a] = d;
        owner[a] = r;
      }
    }
  }

  std::vector<detail::CompensatedSum> mass(reps.size());
  detail::CompensatedSum bound;
  for (std::size_t a = 0; a < k; ++a) {
    mass[owner[a]].add(atoms[a].weight);
    bound.add(atoms[a].weight * nearest[a]);
  }
  std::vector<Atom> out;
  out.reserve(reps.size());
  for (std::size_t r = 0; r < reps.size(); ++r) out.push_back({atoms[reps[r]].point, mass[r].value()});
  return {DiscreteMeasure(mu.space_ptr(), std::move(out)), bound.value()};
}

// Same measure on a fresh space holding only its support (in index order).
// The result no longer shares a lineage with the input.
inline DiscreteMeasure compact(const DiscreteMeasure& mu) {
  const MetricSpace& space = mu.space();
  const auto support = mu.support();
  if (support.empty()) throw DomainError("cannot compact an empty measure");
  SpacePtr fresh;
  if (space.is_euclidean()) {
    std::vector<Point> pts;
    pts.reserve(support.size());
    for (PointIndex p : support) pts.push_back(space.point(p));
    fresh = MetricSpace::euclidean(space.dim(), pts);
  } else {
    std::vector<std::vector<double>> table(support.size(), std::vector<double>(support.size()));
    for (std::size_t i = 0; i < support.size(); ++i) {
      for (std::size_t j = 0; j < support.size(); ++j) table[i][j] = space.dist_unchecked(support[i], support[j]);
    }
    fresh = MetricSpace::from_matrix(table);
  }
  std::vector<Atom> atoms;
  atoms.reserve(support.size());
  for (std::size_t i = 0; i < support.size(); ++i) atoms.push_back({i, mu.atoms()[i].weight});
  return DiscreteMeasure(std::move(fresh), std::move(atoms));
}

}  // namespace krm
