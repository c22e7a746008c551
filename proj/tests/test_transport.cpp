#include <gtest/gtest.h>

#include <random>

#include "krm/detail/network_simplex.hpp"
#include "krm/transport.hpp"
#include "oracles.hpp"

using namespace krm;

namespace {

DiscreteMeasure random_measure(std::mt19937_64& rng, const SpacePtr& space, std::size_t atoms) {
  std::vector<PointIndex> pts(space->size());
  for (PointIndex i = 0; i < pts.size(); ++i) pts[i] = i;
  std::shuffle(pts.begin(), pts.end(), rng);
  const auto w = oracle::random_weights(rng, atoms);
  std::vector<Atom> a;
  for (std::size_t k = 0; k < atoms; ++k) a.push_back({pts[k], w[k]});
  return DiscreteMeasure(space, a);
}

SpacePtr random_plane(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(-10, 10);
  std::vector<Point> pts(n, Point(2));
  for (auto& p : pts) p = {u(rng), u(rng)};
  return MetricSpace::euclidean(2, pts);
}

std::vector<std::pair<double, double>> on_line(const DiscreteMeasure& mu) {
  std::vector<std::pair<double, double>> out;
  for (const auto& a : mu.atoms()) out.emplace_back(mu.space().coords(a.point)[0], a.weight);
  return out;
}

}  // namespace

TEST(KrDistance, DiracPair) {
  auto s = MetricSpace::line({0.0, 3.0});
  const auto cert = kr_distance(dirac(0, s), dirac(1, s));
  EXPECT_DOUBLE_EQ(cert.value, 3.0);
  EXPECT_TRUE(verify_certificate(cert, dirac(0, s), dirac(1, s)).valid());
}

TEST(KrDistance, SelfDistanceIsZeroWithIdentityPlan) {
  auto s = MetricSpace::line({0.0, 1.0, 5.0});
  const DiscreteMeasure mu(s, {{0, 0.2}, {2, 0.8}});
  const auto cert = kr_distance(mu, mu);
  EXPECT_EQ(cert.value, 0.0);
  for (const auto& e : cert.plan) EXPECT_EQ(e.source, e.target);
}

TEST(KrDistance, TwoToOne) {
  auto s = MetricSpace::line({0.0, 1.0});
  const DiscreteMeasure mu(s, {{0, 0.5}, {1, 0.5}});
  EXPECT_DOUBLE_EQ(kr_distance(mu, dirac(0, s)).value, 0.5);
  EXPECT_DOUBLE_EQ(oracle::transport_by_vertices({0.5, 0.5}, {1.0}, [&](std::size_t i, std::size_t) {
                     return s->dist(i, 0);
                   }),
                   0.5);
}

TEST(KrDistance, TwoAtomCounterexamplePair) {
  for (int n = 1; n <= 12; ++n) {
    const double nn = static_cast<double>(n);
    auto s = MetricSpace::line({0.0, nn * nn});
    const DiscreteMeasure nu(s, {{0, 1.0 - 1.0 / nn}, {1, 1.0 / nn}});
    EXPECT_NEAR(kr_distance(dirac(0, s), nu).value, nn, 1e-9);
  }
}

TEST(KrDistance, RejectsNonProbabilityAndForeignSpaces) {
  auto s = MetricSpace::line({0.0, 1.0});
  EXPECT_THROW(kr_distance(DiscreteMeasure(s, {{0, 0.5}}), dirac(1, s)), PreconditionError);
  auto t = MetricSpace::line({0.0, 1.0});
  EXPECT_THROW(kr_distance(dirac(0, s), dirac(0, t)), DomainError);
}

TEST(KrDistance, MatchesLineCdfOracle) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-5, 5);
  std::vector<double> xs(60);
  for (auto& x : xs) x = u(rng);
  auto s = MetricSpace::line(xs);
  for (int trial = 0; trial < 50; ++trial) {
    const auto mu = random_measure(rng, s, 1 + rng() % 30);
    const auto nu = random_measure(rng, s, 1 + rng() % 30);
    EXPECT_NEAR(kr_distance(mu, nu).value, oracle::w1_line(on_line(mu), on_line(nu)), 1e-10);
  }
}

TEST(KrDistance, MatchesVertexEnumeration) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 60; ++trial) {
    auto s = random_plane(rng, 8);
    const auto mu = random_measure(rng, s, 1 + rng() % 4);
    const auto nu = random_measure(rng, s, 1 + rng() % 4);
    std::vector<double> a, b;
    for (const auto& x : mu.atoms()) a.push_back(x.weight);
    for (const auto& y : nu.atoms()) b.push_back(y.weight);
    const double brute = oracle::transport_by_vertices(a, b, [&](std::size_t i, std::size_t j) {
      return s->dist(mu.atoms()[i].point, nu.atoms()[j].point);
    });
    EXPECT_NEAR(kr_distance(mu, nu).value, brute, 1e-10);
  }
}

TEST(KrDistance, CertificatesAreValidOnLargerInstances) {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 10; ++trial) {
    auto s = random_plane(rng, 400);
    const auto mu = random_measure(rng, s, 200);
    const auto nu = random_measure(rng, s, 200);
    const auto cert = kr_distance(mu, nu);
    const auto report = verify_certificate(cert, mu, nu);
    EXPECT_TRUE(report.valid()) << "gap " << report.duality_gap << " residual " << report.max_marginal_residual;
  }
}

TEST(KrDistance, MatrixSpaces) {
  // Shortest-path metric of a weighted 4-cycle.
  auto s = MetricSpace::from_matrix({{0, 1, 3, 2}, {1, 0, 2, 3}, {3, 2, 0, 1}, {2, 3, 1, 0}});
  ASSERT_TRUE(validate_space(*s).valid());
  const DiscreteMeasure mu(s, {{0, 0.5}, {1, 0.5}});
  const DiscreteMeasure nu(s, {{2, 0.5}, {3, 0.5}});
  const auto cert = kr_distance(mu, nu);
  EXPECT_NEAR(cert.value, 2.0, 1e-12);
  EXPECT_TRUE(verify_certificate(cert, mu, nu).valid());
}

TEST(KrDistance, TranslationInvariant) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Point> pts(20, Point(2)), moved(20, Point(2));
    const Point shift{u(rng) * 100, u(rng) * 100};
    for (std::size_t i = 0; i < 20; ++i) {
      pts[i] = {u(rng), u(rng)};
      moved[i] = {pts[i][0] + shift[0], pts[i][1] + shift[1]};
    }
    auto s = MetricSpace::euclidean(2, pts);
    auto t = MetricSpace::euclidean(2, moved);
    const auto mu = random_measure(rng, s, 8);
    const auto nu = random_measure(rng, s, 8);
    const double h = kr_distance(mu, nu).value;
    const double h2 = kr_distance(DiscreteMeasure(t, {mu.atoms().begin(), mu.atoms().end()}),
                                  DiscreteMeasure(t, {nu.atoms().begin(), nu.atoms().end()}))
                          .value;
    EXPECT_NEAR(h, h2, 1e-9);
  }
}

TEST(KrDistance, Deterministic) {
  std::mt19937_64 rng(37);
  auto s = random_plane(rng, 80);
  const auto mu = random_measure(rng, s, 40);
  const auto nu = random_measure(rng, s, 40);
  const auto a = kr_distance(mu, nu);
  const auto b = kr_distance(mu, nu);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.plan, b.plan);
  EXPECT_EQ(a.potential, b.potential);
}

TEST(KrDistance, SolverAtomLimit) {
  std::vector<double> xs(kMaxTransportAtoms + 1);
  for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = static_cast<double>(i);
  auto s = MetricSpace::line(xs);
  std::vector<Atom> a, b;
  for (PointIndex i = 0; i < xs.size(); ++i) (i % 2 ? a : b).push_back({i, 1.0});
  EXPECT_THROW(kr_distance(normalized(DiscreteMeasure(s, a)), normalized(DiscreteMeasure(s, b))), PreconditionError);
}

TEST(VerifyCertificate, FlagsWrongMarginals) {
  auto s = MetricSpace::line({0.0, 1.0});
  const DiscreteMeasure mu(s, {{0, 0.5}, {1, 0.5}});
  auto cert = kr_distance(mu, dirac(0, s));
  cert.plan.front().flow += 0.1;
  EXPECT_FALSE(verify_certificate(cert, mu, dirac(0, s)).valid());
  EXPECT_GT(verify_certificate(cert, mu, dirac(0, s)).max_marginal_residual, 0.05);
}

TEST(VerifyCertificate, FlagsSteepPotential) {
  auto s = MetricSpace::line({0.0, 1.0});
  auto cert = kr_distance(dirac(0, s), dirac(1, s));
  cert.potential = LipFunction({{0, 0.0}, {1, 1.5}}, 1.0);
  const auto report = verify_certificate(cert, dirac(0, s), dirac(1, s));
  EXPECT_FALSE(report.valid());
  EXPECT_NEAR(report.max_lipschitz_violation, 0.5, 1e-12);
}

TEST(VerifyCertificate, FlagsMissingPotential) {
  auto s = MetricSpace::line({0.0, 1.0});
  auto cert = kr_distance(dirac(0, s), dirac(1, s));
  cert.potential = LipFunction({{0, 0.0}}, 1.0);
  EXPECT_FALSE(verify_certificate(cert, dirac(0, s), dirac(1, s)).valid());
}

TEST(DualEvaluate, Examples) {
  auto s = MetricSpace::line({2.0, -1.0, 4.0});
  EXPECT_DOUBLE_EQ(dual_evaluate(distance_function(*s, 1), dirac(0, s), dirac(1, s)), 3.0);
  EXPECT_DOUBLE_EQ(dual_evaluate(LipFunction::constant(*s, 7), dirac(0, s), dirac(2, s)), 0.0);
  EXPECT_THROW(dual_evaluate(LipFunction::total(std::vector<double>{0, 6, 0}, 2), dirac(0, s), dirac(1, s)),
               PreconditionError);
}

TEST(DualEvaluate, WeakDuality) {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 30; ++trial) {
    auto s = random_plane(rng, 15);
    const auto mu = random_measure(rng, s, 5);
    const auto nu = random_measure(rng, s, 5);
    std::map<PointIndex, double> partial{{0, 0.0}};
    for (PointIndex a = 1; a < 4; ++a) partial[a] = s->dist(0, a) * u(rng);
    // Keep only anchors consistent with 1-Lipschitz on the set.
    bool ok = true;
    for (const auto& [a, va] : partial)
      for (const auto& [b, vb] : partial) ok = ok && std::abs(va - vb) <= s->dist(a, b);
    if (!ok) continue;
    const auto f = mcshane_extend(partial, *s);
    EXPECT_LE(dual_evaluate(f, mu, nu), kr_distance(mu, nu).value + 1e-9);
  }
}

TEST(NetworkSimplex, DegenerateInstances) {
  // All costs equal and many ties in the supplies.
  detail::TransportSimplex a({0.25, 0.25, 0.25, 0.25}, {0.5, 0.5}, std::vector<double>(8, 1.0));
  a.solve();
  EXPECT_EQ(a.artificial_flow(), 0.0);
  // Zero-cost diagonal.
  detail::TransportSimplex b({0.5, 0.5}, {0.5, 0.5}, {0.0, 1.0, 1.0, 0.0});
  b.solve();
  EXPECT_DOUBLE_EQ(b.flow(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(b.flow(1, 1), 0.5);
}
