#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "krm/detail/numeric.hpp"
#include "krm/error.hpp"
#include "krm/measure.hpp"
#include "krm/metric_space.hpp"
#include "krm/transport.hpp"

namespace krm {

// Dense row-major square matrix.
struct Matrix {
  std::size_t dim = 0;
  std::vector<double> data;

  static Matrix identity(std::size_t d) {
    Matrix m{d, std::vector<double>(d * d, 0.0)};
    for (std::size_t i = 0; i < d; ++i) m.data[i * d + i] = 1.0;
    return m;
  }
  static Matrix from_rows(const std::vector<std::vector<double>>& rows) {
    Matrix m{rows.size(), {}};
    for (const auto& r : rows) {
      if (r.size() != rows.size()) throw DomainError("matrix must be square");
      m.data.insert(m.data.end(), r.begin(), r.end());
    }
    return m;
  }
  double operator()(std::size_t i, std::size_t j) const { return data[i * dim + j]; }
  double& operator()(std::size_t i, std::size_t j) { return data[i * dim + j]; }

  Point apply(std::span<const double> x) const {
    Point y(dim, 0.0);
    for (std::size_t i = 0; i < dim; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < dim; ++j) s += data[i * dim + j] * x[j];
      y[i] = s;
    }
    return y;
  }
  std::vector<std::vector<double>> rows() const {
    std::vector<std::vector<double>> r(dim);
    for (std::size_t i = 0; i < dim; ++i) r[i].assign(data.begin() + i * dim, data.begin() + (i + 1) * dim);
    return r;
  }
};

namespace detail {

// Solves a x = b by Gaussian elimination with partial pivoting.
inline Point solve_linear(Matrix a, Point b) {
  const std::size_t n = a.dim;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
    }
    if (a(piv, col) == 0.0) throw DomainError("singular linear system");
    if (piv != col) {
      for (std::size_t c = 0; c < n; ++c) std::swap(a(col, c), a(piv, c));
      std::swap(b[col], b[piv]);
    }
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a(r, col) / a(col, col);
      if (f == 0.0) continue;
      for (std::size_t c = col; c < n; ++c) a(r, c) -= f * a(col, c);
      b[r] -= f * b[col];
    }
  }
  Point x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t c = i + 1; c < n; ++c) s -= a(i, c) * x[c];
    x[i] = s / a(i, i);
  }
  return x;
}

// Largest singular value by power iteration on A^T A.
inline double spectral_norm(const Matrix& a) {
  const std::size_t n = a.dim;
  Point v(n, 1.0 / std::sqrt(static_cast<double>(n)));
  for (std::size_t k = 0; k < n; ++k) v[k] += 1e-3 * static_cast<double>(k);
  double sigma = 0.0;
  for (int it = 0; it < 500; ++it) {
    const Point av = a.apply(v);
    Point atav(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < n; ++i) atav[j] += a(i, j) * av[i];
    }
    const double norm = euclidean_norm(atav);
    if (norm == 0.0) return euclidean_norm(av);
    for (std::size_t j = 0; j < n; ++j) v[j] = atav[j] / norm;
    const double next = std::sqrt(norm);
    if (std::abs(next - sigma) <= 1e-15 * next) return next;
    sigma = next;
  }
  return sigma;
}

}  // namespace detail

// A contraction S of R^d with declared Lipschitz constant and fixed point.
class ContractionMap {
 public:
  enum class Kind { affine, similarity, pointwise };

  // S(x) = A x + b.
  static ContractionMap affine(Matrix a, Point b, double lip) {
    if (a.dim == 0 || b.size() != a.dim) throw DomainError("affine map: A and b dimensions differ");
    check_lip(lip);
    const double norm = detail::spectral_norm(a);
    if (norm > lip + 1e-9) {
      throw PreconditionError("affine map: operator norm " + std::to_string(norm) +
                              " exceeds declared Lipschitz constant " + std::to_string(lip));
    }
    ContractionMap m;
    m.kind_ = Kind::affine;
    m.dim_ = a.dim;
    m.linear_ = std::move(a);
    m.offset_ = std::move(b);
    m.lip_ = lip;
    Matrix i_minus_a = Matrix::identity(m.dim_);
    for (std::size_t k = 0; k < i_minus_a.data.size(); ++k) i_minus_a.data[k] -= m.linear_.data[k];
    m.fixed_ = detail::solve_linear(std::move(i_minus_a), m.offset_);
    m.check_fixed_point();
    return m;
  }

  // S(x) = ratio * Q (x - fix) + fix, with Q orthogonal (identity by default).
  static ContractionMap similarity(double ratio, Point fix, std::optional<Matrix> rotation = std::nullopt) {
    if (fix.empty()) throw DomainError("similarity needs a fixed point");
    check_lip(std::abs(ratio));
    const std::size_t d = fix.size();
    Matrix q = rotation ? *rotation : Matrix::identity(d);
    if (q.dim != d) throw DomainError("similarity: rotation dimension differs from the fixed point");
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < d; ++k) s += q(k, i) * q(k, j);
        if (std::abs(s - (i == j ? 1.0 : 0.0)) > 1e-9) throw PreconditionError("similarity: isometry part is not orthogonal");
      }
    }
    ContractionMap m;
    m.kind_ = Kind::similarity;
    m.dim_ = d;
    m.ratio_ = ratio;
    m.rotation_ = q;
    m.linear_ = q;
    for (double& v : m.linear_.data) v *= ratio;
    const Point lf = m.linear_.apply(fix);
    m.offset_.resize(d);
    for (std::size_t i = 0; i < d; ++i) m.offset_[i] = fix[i] - lf[i];
    m.lip_ = std::abs(ratio);
    m.fixed_ = std::move(fix);
    m.check_fixed_point();
    return m;
  }

  // User-supplied map with a declared Lipschitz constant. The fixed point is
  // found by Banach iteration unless supplied.
  static ContractionMap pointwise(std::size_t dim, PointMap f, double lip,
                                  std::optional<Point> fixed_point = std::nullopt) {
    check_lip(lip);
    if (lip >= 1.0) throw PreconditionError("pointwise map must be a strict contraction");
    ContractionMap m;
    m.kind_ = Kind::pointwise;
    m.dim_ = dim;
    m.function_ = std::move(f);
    m.lip_ = lip;
    if (fixed_point) {
      m.fixed_ = std::move(*fixed_point);
    } else {
      Point x(dim, 0.0);
      for (int it = 0; it < 1000000; ++it) {
        Point y = m(x);
        const double step = std::sqrt(detail::squared_distance(x, y));
        x = std::move(y);
        if (step <= 1e-15 * (1.0 + detail::euclidean_norm(x))) break;
      }
      m.fixed_ = std::move(x);
    }
    m.check_fixed_point();
    return m;
  }

  Point operator()(std::span<const double> x) const {
    if (x.size() != dim_) throw DomainError("map applied to a point of the wrong dimension");
    if (kind_ == Kind::pointwise) {
      Point y = function_(x);
      if (y.size() != dim_) throw DomainError("pointwise map returned a point of the wrong dimension");
      return y;
    }
    Point y = linear_.apply(x);
    for (std::size_t i = 0; i < dim_; ++i) y[i] += offset_[i];
    return y;
  }

  Kind kind() const { return kind_; }
  std::size_t dim() const { return dim_; }
  double lip() const { return lip_; }
  const Point& fixed_point() const { return fixed_; }
  // Affine data (A, b); meaningful for affine and similarity maps.
  const Matrix& linear() const { return linear_; }
  const Point& offset() const { return offset_; }
  double ratio() const { return ratio_; }
  const Matrix& rotation() const { return rotation_; }

 private:
  static void check_lip(double lip) {
    if (!std::isfinite(lip) || lip < 0.0) throw PreconditionError("Lipschitz constant must be finite and nonnegative");
  }

  void check_fixed_point() const {
    const Point img = (*this)(fixed_);
    if (std::sqrt(detail::squared_distance(img, fixed_)) > 1e-9) {
      throw PreconditionError("map does not fix its declared fixed point");
    }
  }

  Kind kind_ = Kind::affine;
  std::size_t dim_ = 0;
  Matrix linear_;
  Point offset_;
  double ratio_ = 0.0;
  Matrix rotation_;
  PointMap function_;
  double lip_ = 0.0;
  Point fixed_;
};

// Largest |S(x)-S(y)|/|x-y| over `samples` random pairs in the cube
// [-radius, radius]^d; a sampled check of a declared constant.
inline double sampled_lip_quotient(const ContractionMap& map, std::size_t samples, std::uint64_t seed,
                                   double radius = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-radius, radius);
  double worst = 0.0;
  Point x(map.dim()), y(map.dim());
  for (std::size_t s = 0; s < samples; ++s) {
    for (auto& v : x) v = u(rng);
    for (auto& v : y) v = u(rng);
    const double d = std::sqrt(detail::squared_distance(x, y));
    if (d == 0.0) continue;
    worst = std::max(worst, std::sqrt(detail::squared_distance(map(x), map(y))) / d);
  }
  return worst;
}

inline constexpr double kProbabilityTolerance = 1e-12;
inline constexpr double kContractionMargin = 1e-12;

// Ordered contraction maps with a probability vector.
class ContractionSystem {
 public:
  ContractionSystem(std::vector<ContractionMap> maps, std::vector<double> probs)
      : maps_(std::move(maps)), probs_(std::move(probs)) {
    if (maps_.empty()) throw PreconditionError("contraction system needs at least one map");
    if (maps_.size() != probs_.size()) throw PreconditionError("one probability per map is required");
    dim_ = maps_.front().dim();
    detail::CompensatedSum total;
    for (std::size_t i = 0; i < maps_.size(); ++i) {
      if (maps_[i].dim() != dim_) throw PreconditionError("maps act on different dimensions");
      if (!std::isfinite(probs_[i]) || probs_[i] < 0.0) throw PreconditionError("probabilities must be nonnegative");
      total.add(probs_[i]);
      max_lip_ = std::max(max_lip_, maps_[i].lip());
    }
    if (std::abs(total.value() - 1.0) > kProbabilityTolerance) {
      throw PreconditionError("probabilities sum to " + std::to_string(total.value()) + ", not 1");
    }
    if (!(max_lip_ < 1.0 - kContractionMargin)) {
      throw PreconditionError("largest Lipschitz constant " + std::to_string(max_lip_) + " is not below 1");
    }
    detail::CompensatedSum moment, factor;
    for (std::size_t i = 0; i < maps_.size(); ++i) {
      moment.add(probs_[i] * std::sqrt(detail::squared_distance(maps_[0].fixed_point(), maps_[i].fixed_point())));
      factor.add(probs_[i] * maps_[i].lip());
    }
    moment_sum_ = moment.value();
    contraction_factor_ = factor.value();
  }

  const std::vector<ContractionMap>& maps() const { return maps_; }
  const std::vector<double>& probs() const { return probs_; }
  std::size_t size() const { return maps_.size(); }
  std::size_t dim() const { return dim_; }
  double max_lip() const { return max_lip_; }
  // sum_i p_i dist(x_1, x_i) over the fixed points.
  double moment_sum() const { return moment_sum_; }
  // c = sum_i p_i s_i, the contraction modulus of the Markov operator.
  double contraction_factor() const { return contraction_factor_; }

 private:
  std::vector<ContractionMap> maps_;
  std::vector<double> probs_;
  std::size_t dim_ = 0;
  double max_lip_ = 0.0;
  double moment_sum_ = 0.0;
  double contraction_factor_ = 0.0;
};

// T(nu) = sum_i p_i nu S_i^{-1}. Images are registered on an extension of
// `base`, which must extend nu's space.
inline DiscreteMeasure markov_step(const DiscreteMeasure& nu, const ContractionSystem& sys, const SpacePtr& base) {
  if (!nu.space().is_euclidean() || nu.space().dim() != sys.dim()) {
    throw DomainError("Markov step needs a euclidean space of the system's dimension");
  }
  if (!base->extends(nu.space())) throw DomainError("Markov step base must extend the measure's space");
  detail::PointRegistry registry(base);
  std::vector<Atom> atoms;
  atoms.reserve(nu.size() * sys.size());
  for (std::size_t i = 0; i < sys.size(); ++i) {
    const double p = sys.probs()[i];
    if (p == 0.0) continue;
    for (const Atom& a : nu.atoms()) {
      atoms.push_back({registry.insert(sys.maps()[i](nu.space().coords(a.point))), p * a.weight});
    }
  }
  return DiscreteMeasure(registry.finish(), std::move(atoms));
}

inline DiscreteMeasure markov_step(const DiscreteMeasure& nu, const ContractionSystem& sys) {
  return markov_step(nu, sys, nu.space_ptr());
}

inline constexpr std::size_t kDefaultStepLimit = 10000;
inline constexpr std::size_t kDefaultCap = 2048;

inline constexpr std::size_t kDefaultStallWindow = 25;

struct IterationOptions {
  std::size_t step_limit = kDefaultStepLimit;
  // Give up after this many consecutive steps whose coarsening term alone
  // exceeds tol; only a larger cap can help then. 0 disables the check.
  std::size_t stall_window = kDefaultStallWindow;
};

struct IterationReport {
  DiscreteMeasure iterate;
  std::size_t steps = 0;
  double last_step_distance = 0.0;
  // Certified bound on H(iterate, invariant measure).
  double a_posteriori_bound = 0.0;
  // Coarsening error of the final step (the inexact-iteration term).
  double coarsening_bound = 0.0;
  // Sum of all coarsening errors along the run.
  double total_coarsening = 0.0;
  double contraction_factor = 0.0;
  bool converged = false;
  bool stalled = false;  // stopped early: the cap cannot reach tol
  std::vector<double> step_distances;  // H(nu_{k-1}, nu_k), k = 1..steps
};

// Delta at the fixed point of the first map.
inline DiscreteMeasure default_initial_measure(const ContractionSystem& sys) {
  return dirac(0, MetricSpace::euclidean(sys.dim(), {sys.maps().front().fixed_point()}));
}

// Banach iteration nu <- coarsen(T nu, cap) until the a posteriori bound
//
//   H(nu_n, nu*) <= c/(1-c) H(nu_{n-1}, nu_n) + eta_n/(1-c)
//
// drops below tol (eta_n = coarsening error of step n). Each iterate is
// renormalised explicitly and moved onto a compact space of its support.
inline IterationReport iterate_invariant(const ContractionSystem& sys, const DiscreteMeasure& nu0, double tol,
                                         std::size_t cap, IterationOptions options = {}) {
  if (!(tol > 0.0)) throw PreconditionError("tolerance must be positive");
  if (cap == 0) throw PreconditionError("cap must be at least 1");
  if (!nu0.is_probability()) throw PreconditionError("initial measure must be a probability measure");
  const double c = sys.contraction_factor();
  if (!(c < 1.0)) throw PreconditionError("contraction factor must be below 1");

  IterationReport report{compact(nu0), 0, 0.0, 0.0, 0.0, 0.0, c, false, false, {}};
  DiscreteMeasure nu = report.iterate;
  std::size_t floor_steps = 0;
  for (std::size_t step = 1; step <= options.step_limit; ++step) {
    const DiscreteMeasure raw = markov_step(nu, sys);
    auto [next, eta] = coarsen(raw, cap);
    next = normalized(next);
    const double h = kr_distance(nu, next).value;
    report.steps = step;
    report.step_distances.push_back(h);
    report.last_step_distance = h;
    report.coarsening_bound = eta;
    report.total_coarsening += eta;
    report.a_posteriori_bound = c / (1.0 - c) * h + eta / (1.0 - c);
    nu = compact(next);
    if (report.a_posteriori_bound <= tol) {
      report.converged = true;
      break;
    }
    floor_steps = eta / (1.0 - c) > tol ? floor_steps + 1 : 0;
    if (options.stall_window > 0 && floor_steps >= options.stall_window) {
      report.stalled = true;
      break;
    }
  }
  report.iterate = nu;
  return report;
}

struct FamilyEntry {
  ContractionMap map;
  double prob;
};

struct TailBound {
  double mass;    // sum_{i>N} p_i
  double moment;  // sum_{i>N} p_i dist(x_1, x_i)
};

// A (possibly infinite) indexed family of maps, entries numbered from 1.
// Infinite families must declare their tails in closed form or as bounds.
struct CountableFamily {
  std::function<FamilyEntry(std::size_t)> entry;
  std::optional<std::size_t> size;
  std::function<TailBound(std::size_t)> tail;
};

struct TailReport {
  double head_mass = 0.0;
  double head_moment = 0.0;  // sum_{i<=N} p_i dist(x_1, x_i), unnormalised
  double tail_mass = 0.0;
  double tail_moment = 0.0;
  bool exact = true;  // false when the tail is caller-declared
};

struct Truncation {
  ContractionSystem system;
  TailReport tail;
};

// First N maps with renormalised probabilities plus tail accounting.
inline Truncation truncate_countable(const CountableFamily& family, std::size_t n) {
  if (n == 0) throw PreconditionError("truncation needs at least one map");
  if (family.size && n > *family.size) n = *family.size;
  std::vector<ContractionMap> maps;
  std::vector<double> probs;
  TailReport tail;
  detail::CompensatedSum head_mass, head_moment;
  Point x1;
  for (std::size_t i = 1; i <= n; ++i) {
    FamilyEntry e = family.entry(i);
    if (i == 1) x1 = e.map.fixed_point();
    head_mass.add(e.prob);
    head_moment.add(e.prob * std::sqrt(detail::squared_distance(x1, e.map.fixed_point())));
    maps.push_back(std::move(e.map));
    probs.push_back(e.prob);
  }
  tail.head_mass = head_mass.value();
  tail.head_moment = head_moment.value();
  if (family.size && n == *family.size) {
    tail.tail_mass = 0.0;
    tail.tail_moment = 0.0;
  } else if (family.size) {
    detail::CompensatedSum m, mo;
    for (std::size_t i = n + 1; i <= *family.size; ++i) {
      const FamilyEntry e = family.entry(i);
      m.add(e.prob);
      mo.add(e.prob * std::sqrt(detail::squared_distance(x1, e.map.fixed_point())));
    }
    tail.tail_mass = m.value();
    tail.tail_moment = mo.value();
  } else {
    if (!family.tail) throw PreconditionError("infinite family must declare its tail");
    const TailBound b = family.tail(n);
    if (!(b.mass > 0.0) || !std::isfinite(b.mass)) throw PreconditionError("declared tail mass must be positive");
    if (!(b.moment >= 0.0) || !std::isfinite(b.moment)) throw PreconditionError("declared tail moment must be finite");
    tail.tail_mass = b.mass;
    tail.tail_moment = b.moment;
    tail.exact = false;
  }
  if (!(tail.head_mass > 0.0)) throw PreconditionError("truncated probabilities sum to zero");
  for (double& p : probs) p /= tail.head_mass;
  return {ContractionSystem(std::move(maps), std::move(probs)), tail};
}

// S_i(x) = (x - e_i)/2 + e_i with p_i = 2^-i on R^dim. The family itself is
// infinite; only indices up to dim can be realised in R^dim.
inline CountableFamily example_5_1_family(std::size_t dim) {
  CountableFamily f;
  f.entry = [dim](std::size_t i) {
    if (i == 0 || i > dim) {
      throw DomainError("basis vector e_" + std::to_string(i) + " does not exist in R^" + std::to_string(dim));
    }
    Point e(dim, 0.0);
    e[i - 1] = 1.0;
    return FamilyEntry{ContractionMap::similarity(0.5, e), std::ldexp(1.0, -static_cast<int>(i))};
  };
  f.tail = [](std::size_t n) {
    const double mass = std::ldexp(1.0, -static_cast<int>(n));
    // |e_1 - e_i| = sqrt(2) for every i > n >= 1.
    return TailBound{mass, std::sqrt(2.0) * mass};
  };
  return f;
}

inline ContractionSystem bernoulli_system() {
  return ContractionSystem({ContractionMap::similarity(0.5, {0.0}), ContractionMap::similarity(0.5, {1.0})},
                           {0.5, 0.5});
}

inline ContractionSystem cantor_system() {
  return ContractionSystem({ContractionMap::similarity(1.0 / 3.0, {0.0}), ContractionMap::similarity(1.0 / 3.0, {1.0})},
                           {0.5, 0.5});
}

// H(T_A nu, T_B nu) by the exact solver.
inline double operator_gap(const ContractionSystem& a, const ContractionSystem& b, const DiscreteMeasure& nu) {
  const DiscreteMeasure ta = markov_step(nu, a);
  const DiscreteMeasure tb = markov_step(nu, b, ta.space_ptr());
  return kr_distance(ta, tb).value;
}

// Empirical mean of a chaos-game orbit; a sampling cross-check only.
inline Point chaos_game_mean(const ContractionSystem& sys, std::size_t samples, std::uint64_t seed,
                             std::size_t burn_in = 100) {
  std::mt19937_64 rng(seed);
  std::discrete_distribution<std::size_t> pick(sys.probs().begin(), sys.probs().end());
  Point x = sys.maps().front().fixed_point();
  Point sum(sys.dim(), 0.0);
  for (std::size_t k = 0; k < burn_in + samples; ++k) {
    x = sys.maps()[pick(rng)](x);
    if (k >= burn_in) {
      for (std::size_t d = 0; d < x.size(); ++d) sum[d] += x[d];
    }
  }
  for (double& v : sum) v /= static_cast<double>(std::max<std::size_t>(samples, 1));
  return sum;
}

}  // namespace krm
