#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "krm/detail/numeric.hpp"
#include "krm/error.hpp"

namespace krm {

using PointIndex = std::size_t;
using Point = std::vector<double>;

class MetricSpace;
using SpacePtr = std::shared_ptr<const MetricSpace>;

enum class SpaceMode { euclidean, matrix };

// Finite point registry with an exact pairwise distance.
//
// Spaces are immutable. Euclidean spaces can be extended with new points;
// extension yields a new space whose first size() indices coincide with the
// original ("copy-on-extend"). Measures living on a space remain valid on
// every extension of it, which is what `extends()` decides.
class MetricSpace {
  struct Token {};

 public:
  MetricSpace(Token, SpaceMode mode, std::size_t dim, std::size_t n, std::vector<double> data,
              std::vector<std::uint64_t> lineage)
      : mode_(mode), dim_(dim), size_(n), data_(std::move(data)), lineage_(std::move(lineage)) {}

  static SpacePtr euclidean(std::size_t dim, const std::vector<Point>& points) {
    if (dim == 0) throw DomainError("euclidean space needs dimension >= 1");
    if (points.empty()) throw DomainError("metric space needs at least one point");
    std::vector<double> coords;
    coords.reserve(points.size() * dim);
    for (std::size_t i = 0; i < points.size(); ++i) {
      append_point(coords, points[i], dim, i);
    }
    return std::make_shared<const MetricSpace>(Token{}, SpaceMode::euclidean, dim, points.size(),
                                               std::move(coords),
                                               std::vector<std::uint64_t>{next_id()});
  }

  static SpacePtr euclidean(const std::vector<Point>& points) {
    if (points.empty()) throw DomainError("metric space needs at least one point");
    return euclidean(points.front().size(), points);
  }

  // Points on the real line.
  static SpacePtr line(std::span<const double> xs) {
    std::vector<Point> pts;
    pts.reserve(xs.size());
    for (double x : xs) pts.push_back({x});
    return euclidean(1, pts);
  }

  static SpacePtr line(std::initializer_list<double> xs) {
    return line(std::span<const double>(xs.begin(), xs.size()));
  }

  // Explicit distance table. Only the shape and finiteness are enforced here;
  // the metric axioms are checked by validate_space().
  static SpacePtr from_matrix(const std::vector<std::vector<double>>& dist) {
    const std::size_t n = dist.size();
    if (n == 0) throw DomainError("metric space needs at least one point");
    std::vector<double> table;
    table.reserve(n * n);
    for (std::size_t i = 0; i < n; ++i) {
      if (dist[i].size() != n) {
        throw DomainError("distance matrix row " + std::to_string(i) + " has " +
                          std::to_string(dist[i].size()) + " entries, expected " +
                          std::to_string(n));
      }
      for (std::size_t j = 0; j < n; ++j) {
        if (!std::isfinite(dist[i][j])) {
          throw DomainError("distance matrix entry (" + std::to_string(i) + "," +
                            std::to_string(j) + ") is not finite");
        }
        table.push_back(dist[i][j]);
      }
    }
    return std::make_shared<const MetricSpace>(Token{}, SpaceMode::matrix, 0, n, std::move(table),
                                               std::vector<std::uint64_t>{next_id()});
  }

  SpaceMode mode() const { return mode_; }
  bool is_euclidean() const { return mode_ == SpaceMode::euclidean; }
  std::size_t size() const { return size_; }
  // Coordinate dimension; 0 for matrix spaces.
  std::size_t dim() const { return dim_; }
  std::uint64_t id() const { return lineage_.back(); }

  void check_index(PointIndex i) const {
    if (i >= size_) {
      throw DomainError("point index " + std::to_string(i) + " out of range for space of " +
                        std::to_string(size_) + " points");
    }
  }

  double dist(PointIndex i, PointIndex j) const {
    check_index(i);
    check_index(j);
    return dist_unchecked(i, j);
  }

  double dist_unchecked(PointIndex i, PointIndex j) const {
    if (mode_ == SpaceMode::matrix) return data_[i * size_ + j];
    if (i == j) return 0.0;
    return std::sqrt(detail::squared_distance(coords_unchecked(i), coords_unchecked(j)));
  }

  std::span<const double> coords(PointIndex i) const {
    require_euclidean("coords");
    check_index(i);
    return coords_unchecked(i);
  }

  Point point(PointIndex i) const {
    auto c = coords(i);
    return Point(c.begin(), c.end());
  }

  // Raw distance table of a matrix space (row-major).
  std::span<const double> matrix_data() const {
    if (mode_ != SpaceMode::matrix) throw DomainError("matrix_data on a euclidean space");
    return data_;
  }

  // New space = this space followed by `points`. Existing indices are kept.
  SpacePtr extend(const std::vector<Point>& points) const {
    require_euclidean("extend");
    std::vector<double> coords = data_;
    coords.reserve(data_.size() + points.size() * dim_);
    for (std::size_t k = 0; k < points.size(); ++k) append_point(coords, points[k], dim_, size_ + k);
    std::vector<std::uint64_t> lineage = lineage_;
    lineage.push_back(next_id());
    return std::make_shared<const MetricSpace>(Token{}, mode_, dim_, size_ + points.size(),
                                               std::move(coords), std::move(lineage));
  }

  // True if this space is `other` or was obtained from it by extension.
  bool extends(const MetricSpace& other) const {
    return std::find(lineage_.begin(), lineage_.end(), other.id()) != lineage_.end();
  }

  double diameter(std::span<const PointIndex> points) const {
    double d = 0.0;
    for (std::size_t a = 0; a < points.size(); ++a) {
      for (std::size_t b = a + 1; b < points.size(); ++b) d = std::max(d, dist(points[a], points[b]));
    }
    return d;
  }

 private:
  static std::uint64_t next_id() {
    static std::atomic<std::uint64_t> counter{1};
    return counter.fetch_add(1, std::memory_order_relaxed);
  }

  static void append_point(std::vector<double>& coords, const Point& p, std::size_t dim,
                           std::size_t index) {
    if (p.size() != dim) {
      throw DomainError("point " + std::to_string(index) + " has dimension " +
                        std::to_string(p.size()) + ", expected " + std::to_string(dim));
    }
    for (double v : p) {
      if (!std::isfinite(v)) throw DomainError("point " + std::to_string(index) + " has a non-finite coordinate");
    }
    coords.insert(coords.end(), p.begin(), p.end());
  }

  std::span<const double> coords_unchecked(PointIndex i) const {
    return std::span<const double>(data_).subspan(i * dim_, dim_);
  }

  void require_euclidean(const char* what) const {
    if (mode_ != SpaceMode::euclidean) {
      throw DomainError(std::string(what) + " requires a euclidean space");
    }
  }

  SpaceMode mode_;
  std::size_t dim_;
  std::size_t size_;
  std::vector<double> data_;  // coordinates (euclidean) or n*n table (matrix)
  std::vector<std::uint64_t> lineage_;
};

// Of two spaces where one extends the other, the larger one.
inline SpacePtr common_space(const SpacePtr& a, const SpacePtr& b) {
  if (a->extends(*b)) return a;
  if (b->extends(*a)) return b;
  throw DomainError("measures live on unrelated metric spaces");
}

struct SpaceReport {
  std::vector<std::string> violations;
  bool valid() const { return violations.empty(); }
};

// Relative slack allowed on the triangle inequality for explicit tables.
inline constexpr double kTriangleTolerance = 1e-9;

inline SpaceReport validate_space(const MetricSpace& space) {
  SpaceReport report;
  if (space.is_euclidean()) return report;
  const std::size_t n = space.size();
  auto d = [&](std::size_t i, std::size_t j) { return space.dist_unchecked(i, j); };
  auto note = [&](const std::string& s) { report.violations.push_back(s); };
  for (std::size_t i = 0; i < n; ++i) {
    if (d(i, i) != 0.0) note("dist(" + std::to_string(i) + "," + std::to_string(i) + ") != 0");
    for (std::size_t j = i + 1; j < n; ++j) {
      if (d(i, j) != d(j, i)) {
        note("asymmetric: dist(" + std::to_string(i) + "," + std::to_string(j) + ") != dist(" +
             std::to_string(j) + "," + std::to_string(i) + ")");
      }
      if (!(d(i, j) > 0.0) || !(d(j, i) > 0.0)) {
        note("non-positive distance between distinct points " + std::to_string(i) + " and " +
             std::to_string(j));
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < n; ++k) {
        if (i == k || j == i || j == k) continue;
        const double detour = d(i, j) + d(j, k);
        if (d(i, k) > detour * (1.0 + kTriangleTolerance)) {
          std::ostringstream os;
          os << "triangle violated: dist(" << i << "," << k << ")=" << d(i, k) << " > dist(" << i
             << "," << j << ")+dist(" << j << "," << k << ")=" << detour;
          note(os.str());
        }
      }
    }
  }
  return report;
}

}  // namespace krm
