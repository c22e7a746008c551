#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "krm/error.hpp"
#include "krm/metric_space.hpp"

namespace krm {

// Real function on (a subset of) the points of a finite metric space, with a
// declared Lipschitz bound. The bound is a claim; lip_constant() measures.
class LipFunction {
 public:
  LipFunction() = default;
  LipFunction(std::map<PointIndex, double> values, double lip_bound)
      : values_(std::move(values)), lip_bound_(lip_bound) {
    for (const auto& [i, v] : values_) {
      if (!std::isfinite(v)) throw DomainError("function value at point " + std::to_string(i) + " is not finite");
    }
    if (!(lip_bound_ >= 0.0)) throw DomainError("declared Lipschitz bound must be nonnegative");
  }

  // Values for points 0..values.size()-1.
  static LipFunction total(std::span<const double> values, double lip_bound) {
    std::map<PointIndex, double> m;
    for (std::size_t i = 0; i < values.size(); ++i) m.emplace_hint(m.end(), i, values[i]);
    return LipFunction(std::move(m), lip_bound);
  }

  static LipFunction constant(const MetricSpace& space, double c) {
    std::vector<double> v(space.size(), c);
    return total(v, 0.0);
  }

  double operator()(PointIndex i) const {
    auto it = values_.find(i);
    if (it == values_.end()) throw DomainError("function undefined at point " + std::to_string(i));
    return it->second;
  }

  bool defined_at(PointIndex i) const { return values_.contains(i); }
  const std::map<PointIndex, double>& values() const { return values_; }
  double lip_bound() const { return lip_bound_; }
  std::size_t size() const { return values_.size(); }

  std::vector<PointIndex> domain() const {
    std::vector<PointIndex> d;
    d.reserve(values_.size());
    for (const auto& kv : values_) d.push_back(kv.first);
    return d;
  }

  bool covers(const MetricSpace& space) const {
    if (values_.size() != space.size()) return false;
    return values_.empty() || values_.rbegin()->first + 1 == space.size();
  }

  friend bool operator==(const LipFunction&, const LipFunction&) = default;

 private:
  std::map<PointIndex, double> values_;
  double lip_bound_ = 0.0;
};

// Largest difference quotient |f(i)-f(j)|/dist(i,j) over a point set and the
// pair attaining it.
struct LipQuotient {
  double value = 0.0;
  PointIndex first = 0;
  PointIndex second = 0;
  bool has_pair = false;
};

inline LipQuotient max_lip_quotient(const LipFunction& f, const MetricSpace& space,
                                    std::span<const PointIndex> points) {
  std::vector<double> v;
  v.reserve(points.size());
  for (PointIndex p : points) {
    space.check_index(p);
    v.push_back(f(p));
  }
  LipQuotient best;
  for (std::size_t a = 0; a < points.size(); ++a) {
    for (std::size_t b = a + 1; b < points.size(); ++b) {
      if (points[a] == points[b]) continue;
      const double diff = std::abs(v[a] - v[b]);
      const double d = space.dist_unchecked(points[a], points[b]);
      double q;
      if (d > 0.0) {
        q = diff / d;
      } else {
        q = diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
      }
      if (q > best.value || !best.has_pair) {
        best = {q, points[a], points[b], true};
      }
    }
  }
  return best;
}

inline std::vector<PointIndex> all_points(const MetricSpace& space) {
  std::vector<PointIndex> pts(space.size());
  std::iota(pts.begin(), pts.end(), PointIndex{0});
  return pts;
}

// Exact Lipschitz constant of f over every point of the space; 0 for one point.
inline double lip_constant(const LipFunction& f, const MetricSpace& space) {
  const auto pts = all_points(space);
  return max_lip_quotient(f, space, pts).value;
}

inline double lip_constant_on(const LipFunction& f, const MetricSpace& space,
                              std::span<const PointIndex> points) {
  return max_lip_quotient(f, space, points).value;
}

// Distance-to-a function phi_a(x) = dist(a, x) on the whole space.
inline LipFunction distance_function(const MetricSpace& space, PointIndex a) {
  space.check_index(a);
  std::vector<double> v(space.size());
  for (PointIndex x = 0; x < space.size(); ++x) v[x] = space.dist_unchecked(a, x);
  return LipFunction::total(v, 1.0);
}

// Pasch-Hausdorff envelope phi_n(x) = max_t f(t) - n dist(x,t).
//
// A competitor t only replaces f(x) when its difference quotient, computed the
// same way lip_constant() computes it, exceeds n. Hence phi_n == f bit for bit
// whenever n >= lip_constant(f).
inline LipFunction envelope(const LipFunction& f, double n, const MetricSpace& space) {
  if (!(n > 0.0) || !std::isfinite(n)) throw PreconditionError("envelope slope must be a positive real");
  const std::size_t size = space.size();
  std::vector<double> v(size);
  for (PointIndex x = 0; x < size; ++x) v[x] = f(x);
  std::vector<double> out(v);
  for (PointIndex x = 0; x < size; ++x) {
    double best = v[x];
    for (PointIndex t = 0; t < size; ++t) {
      if (t == x || !(v[t] > v[x])) continue;
      const double d = space.dist_unchecked(x, t);
      if (d > 0.0 && (v[t] - v[x]) / d <= n) continue;
      best = std::max(best, v[t] - n * d);
    }
    out[x] = best;
  }
  return LipFunction::total(out, n);
}

// Largest 1-Lipschitz extension psi(x) = min_{a in A} partial(a) + dist(x,a),
// evaluated on `targets`.
inline constexpr double kLipschitzTolerance = 1e-9;

inline LipFunction mcshane_extend(const std::map<PointIndex, double>& partial,
                                  const MetricSpace& space, std::span<const PointIndex> targets) {
  if (partial.empty()) throw PreconditionError("McShane extension needs a nonempty anchor set");
  std::vector<PointIndex> anchors;
  std::vector<double> values;
  for (const auto& [a, v] : partial) {
    space.check_index(a);
    anchors.push_back(a);
    values.push_back(v);
  }
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    for (std::size_t j = i + 1; j < anchors.size(); ++j) {
      const double d = space.dist_unchecked(anchors[i], anchors[j]);
      if (std::abs(values[i] - values[j]) > d + kLipschitzTolerance) {
        throw PreconditionError("partial function is not 1-Lipschitz on points " +
                                std::to_string(anchors[i]) + " and " + std::to_string(anchors[j]));
      }
    }
  }
  std::map<PointIndex, double> out;
  for (PointIndex x : targets) {
    space.check_index(x);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < anchors.size(); ++i) {
      best = std::min(best, values[i] + space.dist_unchecked(x, anchors[i]));
    }
    out[x] = best;
  }
  return LipFunction(std::move(out), 1.0);
}

inline LipFunction mcshane_extend(const std::map<PointIndex, double>& partial,
                                  const MetricSpace& space) {
  const auto pts = all_points(space);
  return mcshane_extend(partial, space, pts);
}

}  // namespace krm
