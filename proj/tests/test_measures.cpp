#include <gtest/gtest.h>

#include <random>

#include "krm/measure.hpp"
#include "krm/transport.hpp"
#include "oracles.hpp"

using namespace krm;

namespace {

LipFunction coordinate(const MetricSpace& s) {
  std::vector<double> v(s.size());
  for (PointIndex i = 0; i < s.size(); ++i) v[i] = s.coords(i)[0];
  return LipFunction::total(v, 1);
}

DiscreteMeasure random_measure(std::mt19937_64& rng, const SpacePtr& space, std::size_t atoms) {
  std::vector<PointIndex> pts(space->size());
  for (PointIndex i = 0; i < pts.size(); ++i) pts[i] = i;
  std::shuffle(pts.begin(), pts.end(), rng);
  const auto w = oracle::random_weights(rng, atoms);
  std::vector<Atom> a;
  for (std::size_t k = 0; k < atoms; ++k) a.push_back({pts[k], w[k]});
  return DiscreteMeasure(space, a);
}

}  // namespace

TEST(DiscreteMeasure, NormalisesRepresentation) {
  auto s = MetricSpace::line({0.0, 1.0, 2.0});
  DiscreteMeasure mu(s, {{2, 0.25}, {0, 0.5}, {2, 0.25}, {1, 0.0}});
  ASSERT_EQ(mu.size(), 2u);
  EXPECT_EQ(mu.atoms()[0].point, 0u);
  EXPECT_EQ(mu.atoms()[1].point, 2u);
  EXPECT_DOUBLE_EQ(mu.weight_at(2), 0.5);
  EXPECT_DOUBLE_EQ(mu.weight_at(1), 0.0);
  EXPECT_TRUE(mu.is_probability());
  EXPECT_THROW(DiscreteMeasure(s, {{0, -0.1}}), DomainError);
  EXPECT_THROW(DiscreteMeasure(s, {{3, 1.0}}), DomainError);
}

TEST(Dirac, Basics) {
  auto s = MetricSpace::line({4.0});
  const auto d = dirac(0, s);
  EXPECT_EQ(d.size(), 1u);
  EXPECT_DOUBLE_EQ(d.mass(), 1.0);
  EXPECT_THROW(dirac(1, s), DomainError);
  auto t = MetricSpace::line({0.0, 3.0, -2.0});
  const auto f = LipFunction::total(std::vector<double>{1.5, -4.0, 7.0}, 10);
  for (PointIndex x = 0; x < 3; ++x) EXPECT_DOUBLE_EQ(integrate(dirac(x, t), f), f(x));
}

TEST(Integrate, Examples) {
  auto s = MetricSpace::line({0.0, 1.0, 2.0, 3.0});
  DiscreteMeasure mu(s, {{0, 0.5}, {1, 0.5}});
  EXPECT_DOUBLE_EQ(integrate(mu, coordinate(*s)), 0.5);
  EXPECT_DOUBLE_EQ(integrate(mu, LipFunction::constant(*s, 3.0)), 3.0);
  // nu_3 = 2^-3 d_0 + 2^-1 d_1 + 2^-2 d_2 + 2^-3 d_3 against dist(0, .).
  DiscreteMeasure nu3(s, {{0, 0.125}, {1, 0.5}, {2, 0.25}, {3, 0.125}});
  EXPECT_DOUBLE_EQ(integrate(nu3, distance_function(*s, 0)), 1.375);
  LipFunction partial({{0, 1.0}}, 0);
  EXPECT_THROW(integrate(mu, partial), DomainError);
}

TEST(Integrate, IsLinear) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-3, 3);
  std::vector<double> xs(15);
  for (auto& x : xs) x = u(rng);
  auto s = MetricSpace::line(xs);
  for (int trial = 0; trial < 20; ++trial) {
    const auto mu = random_measure(rng, s, 6);
    std::vector<double> f(15), g(15), h(15);
    const double alpha = u(rng), beta = u(rng);
    for (std::size_t i = 0; i < 15; ++i) {
      f[i] = u(rng);
      g[i] = u(rng);
      h[i] = alpha * f[i] + beta * g[i];
    }
    const double lhs = integrate(mu, LipFunction::total(h, 1e6));
    const double rhs = alpha * integrate(mu, LipFunction::total(f, 1e6)) + beta * integrate(mu, LipFunction::total(g, 1e6));
    EXPECT_NEAR(lhs, rhs, 1e-12);
  }
}

TEST(FirstMoment, Examples) {
  auto s = MetricSpace::line({0.0, 10.0});
  EXPECT_DOUBLE_EQ(first_moment(dirac(1, s), 1), 0.0);
  EXPECT_DOUBLE_EQ(first_moment(DiscreteMeasure(s, {{0, 0.5}, {1, 0.5}}), 0), 5.0);
}

TEST(FirstMoment, DyadicPartialSumsIncreaseTowardTwo) {
  std::vector<double> xs(31);
  for (std::size_t k = 0; k < xs.size(); ++k) xs[k] = static_cast<double>(k);
  auto s = MetricSpace::line(xs);
  double previous = -1.0;
  for (std::size_t n = 1; n <= 30; ++n) {
    std::vector<Atom> atoms{{0, std::ldexp(1.0, -static_cast<int>(n))}};
    for (std::size_t k = 1; k <= n; ++k) atoms.push_back({k, std::ldexp(1.0, -static_cast<int>(k))});
    const double m = first_moment(DiscreteMeasure(s, atoms), 0);
    EXPECT_NEAR(m, oracle::weighted_dyadic_sum(1, n), 1e-12);
    EXPECT_GT(m, previous);
    EXPECT_LT(m, 2.0);
    previous = m;
  }
  EXPECT_NEAR(previous, 2.0, 1e-6);
}

TEST(FirstMoment, OneLipschitzInTheBasePoint) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-5, 5);
  std::vector<Point> pts(12, Point(2));
  for (auto& p : pts) p = {u(rng), u(rng)};
  auto s = MetricSpace::euclidean(2, pts);
  for (int trial = 0; trial < 20; ++trial) {
    const auto mu = random_measure(rng, s, 5);
    for (PointIndex a = 0; a < 12; ++a) {
      for (PointIndex b = 0; b < 12; ++b) {
        EXPECT_LE(std::abs(first_moment(mu, a) - first_moment(mu, b)), s->dist(a, b) + 1e-12);
      }
    }
  }
}

TEST(Pushforward, ImageOfADirac) {
  auto s = MetricSpace::line({0.0});
  const auto img = pushforward(dirac(0, s), [](std::span<const double> x) { return Point{x[0] / 2 + 0.5}; });
  ASSERT_EQ(img.size(), 1u);
  EXPECT_DOUBLE_EQ(img.space().coords(img.atoms()[0].point)[0], 0.5);
  EXPECT_TRUE(img.space().extends(*s));
}

TEST(Pushforward, CollisionsMerge) {
  auto s = MetricSpace::line({0.0, 1.0});
  DiscreteMeasure mu(s, {{0, 0.5}, {1, 0.5}});
  const auto by_index = pushforward(mu, [](PointIndex) { return PointIndex{0}; });
  EXPECT_TRUE(by_index.same_atoms(dirac(0, s)));
  const auto by_point = pushforward(mu, [](std::span<const double>) { return Point{0.0}; });
  ASSERT_EQ(by_point.size(), 1u);
  EXPECT_EQ(by_point.space_ptr(), s);  // the image is an existing point
  const auto nearly = pushforward(mu, [](std::span<const double> x) { return Point{x[0] * 1e-13}; });
  EXPECT_EQ(nearly.size(), 1u);
}

TEST(Pushforward, WrongDimensionIsDomainError) {
  auto s = MetricSpace::line({0.0});
  EXPECT_THROW(pushforward(dirac(0, s), [](std::span<const double>) { return Point{0.0, 1.0}; }), DomainError);
}

TEST(Pushforward, PreservesMass) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<Point> pts(30, Point(3));
  for (auto& p : pts) p = {u(rng), u(rng), u(rng)};
  auto s = MetricSpace::euclidean(3, pts);
  for (int trial = 0; trial < 30; ++trial) {
    const auto mu = random_measure(rng, s, 10);
    const auto img = pushforward(mu, [](std::span<const double> x) { return Point{std::round(x[0] * 2), x[1] / 3, 0.0}; });
    double direct = 0.0;
    for (const auto& a : mu.atoms()) direct += a.weight;
    EXPECT_NEAR(img.mass(), direct, 1e-12);
  }
}

TEST(Mixture, Examples) {
  auto s = MetricSpace::line({0.0, 1.0, 2.0});
  const auto mu = DiscreteMeasure(s, {{0, 0.3}, {2, 0.7}});
  EXPECT_TRUE(mixture({{1.0, mu}}).same_atoms(mu));
  const auto nu2 = mixture({{0.25, dirac(0, s)}, {0.5, dirac(1, s)}, {0.25, dirac(2, s)}});
  EXPECT_TRUE(nu2.same_atoms(DiscreteMeasure(s, {{0, 0.25}, {1, 0.5}, {2, 0.25}})));
  const auto half = mixture({{0.5, dirac(0, s)}, {0.5, dirac(2, s)}});
  EXPECT_DOUBLE_EQ(half.mass(), 1.0);
}

TEST(Mixture, MismatchedSpacesAreDomainErrors) {
  auto a = MetricSpace::line({0.0});
  auto b = MetricSpace::line({0.0});
  EXPECT_THROW(mixture({{0.5, dirac(0, a)}, {0.5, dirac(0, b)}}), DomainError);
  // A measure on an ancestor space mixes with one on the extension.
  auto c = a->extend({{1.0}});
  EXPECT_EQ(mixture({{0.5, dirac(0, a)}, {0.5, dirac(1, c)}}).space_ptr(), c);
}

TEST(Coarsen, CapAboveSizeIsIdentity) {
  auto s = MetricSpace::line({0.0, 1.0});
  const DiscreteMeasure mu(s, {{0, 0.5}, {1, 0.5}});
  const auto c = coarsen(mu, 2);
  EXPECT_TRUE(c.measure.same_atoms(mu));
  EXPECT_EQ(c.error_bound, 0.0);
  EXPECT_THROW(coarsen(mu, 0), PreconditionError);
}

TEST(Coarsen, SingleMerge) {
  const double eps = 0.01;
  auto s = MetricSpace::line({0.0, eps});
  const auto c = coarsen(DiscreteMeasure(s, {{0, 0.5}, {1, 0.5}}), 1);
  EXPECT_EQ(c.measure.size(), 1u);
  EXPECT_LE(c.error_bound, 0.5 * eps + 1e-15);
  EXPECT_DOUBLE_EQ(c.measure.mass(), 1.0);
}

TEST(Coarsen, BoundIsSound) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<Point> pts(40, Point(2));
  for (auto& p : pts) p = {u(rng), u(rng)};
  auto s = MetricSpace::euclidean(2, pts);
  for (int trial = 0; trial < 30; ++trial) {
    const auto mu = random_measure(rng, s, 25);
    for (std::size_t cap : {1u, 3u, 10u, 24u}) {
      const auto c = coarsen(mu, cap);
      EXPECT_LE(c.measure.size(), cap);
      EXPECT_LE(kr_distance(mu, c.measure).value, c.error_bound + 1e-12);
    }
  }
}

TEST(Compact, KeepsOnlyTheSupport) {
  auto s = MetricSpace::line({0.0, 5.0, 7.0, 9.0});
  const DiscreteMeasure mu(s, {{1, 0.25}, {3, 0.75}});
  const auto c = compact(mu);
  EXPECT_EQ(c.space().size(), 2u);
  EXPECT_DOUBLE_EQ(c.space().dist(0, 1), 4.0);
  EXPECT_DOUBLE_EQ(c.weight_at(1), 0.75);
}

TEST(Normalized, IsExplicit) {
  auto s = MetricSpace::line({0.0, 1.0});
  const DiscreteMeasure mu(s, {{0, 1.0}, {1, 1.0}});
  EXPECT_DOUBLE_EQ(mu.mass(), 2.0);
  EXPECT_DOUBLE_EQ(normalized(mu).weight_at(0), 0.5);
}
