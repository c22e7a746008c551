#include <gtest/gtest.h>

#include "krm/diagnostics.hpp"
#include "oracles.hpp"

using namespace krm;

TEST(MeasureSequence, AssertionSequenceTerms) {
  auto seq = assertion_1_1_sequence(line_positions(1.0, 1.0), 1, 30);
  const auto& nu2 = seq.at(2);
  EXPECT_DOUBLE_EQ(nu2.weight_at(seq.point(0)), 0.25);
  EXPECT_DOUBLE_EQ(nu2.weight_at(seq.point(1)), 0.5);
  EXPECT_DOUBLE_EQ(nu2.weight_at(seq.point(2)), 0.25);
  for (std::size_t n = 1; n <= 30; ++n) EXPECT_EQ(seq.at(n).mass(), 1.0);
  EXPECT_THROW(seq.at(0), DomainError);
  EXPECT_THROW(seq.at(31), DomainError);
}

TEST(MeasureSequence, DeterministicAndGrowing) {
  auto seq = escaping_dirac_sequence(line_positions(2.0, 1.0), 1, 10);
  const auto& a = seq.at(3);
  const auto before = seq.space()->size();
  seq.at(9);
  EXPECT_GT(seq.space()->size(), before);
  EXPECT_TRUE(seq.space()->extends(a.space()));
  EXPECT_TRUE(seq.at(3).same_atoms(a));
}

TEST(MeasureSequence, GrowthConditionsAreValidated) {
  EXPECT_THROW(assertion_1_1_sequence(line_positions(2.0, 1.0), 1, 5), PreconditionError);
  EXPECT_THROW(lemma_3_7_sequence(line_positions(1.0, 1.5), 1, 5), PreconditionError);
  EXPECT_NO_THROW(lemma_3_7_sequence(line_positions(1.0, 2.0), 1, 5));
}

TEST(EscapingPairSequence, DistanceAndBoundedTestFunctions) {
  auto seq = lemma_3_7_sequence(line_positions(1.0, 2.0), 1, 20);
  const auto& nu1 = seq.at(1);
  EXPECT_EQ(nu1.size(), 1u);
  EXPECT_EQ(nu1.atoms()[0].point, seq.point(1));
  seq.at(20);
  const SpacePtr space = seq.space();
  const auto base = dirac(seq.point(0), space);
  std::vector<double> f(space->size());
  for (PointIndex x = 0; x < space->size(); ++x) f[x] = std::min(space->dist(x, seq.point(0)), 1.0);
  const auto test_fn = LipFunction::total(f, 1.0);
  for (std::size_t n = 1; n <= 20; ++n) {
    const auto nu = seq.at(n).on(space);
    const double h = kr_distance(base, nu).value;
    EXPECT_NEAR(h, space->dist(seq.point(0), seq.point(n)) / static_cast<double>(n), 1e-9);
    EXPECT_GE(h, static_cast<double>(n) - 1e-9);
    EXPECT_LE(std::abs(integrate(nu, test_fn) - integrate(base, test_fn)), 2.0 / static_cast<double>(n) + 1e-15);
  }
}

TEST(CauchyProfile, ConstantSequenceIsFlat) {
  auto seq = constant_sequence({1.0, 2.0}, 8);
  const auto p = cauchy_profile(seq, 8);
  EXPECT_EQ(p.entries.size(), 28u);
  for (const auto& e : p.entries) EXPECT_EQ(e.value, 0.0);
}

TEST(CauchyProfile, AssertionSequenceMatchesSeries) {
  auto seq = assertion_1_1_sequence(line_positions(1.0, 1.0), 1, 25);
  const auto p = cauchy_profile(seq, 25);
  for (const auto& e : p.entries) EXPECT_NEAR(e.value, oracle::weighted_dyadic_sum(e.n + 1, e.m), 1e-12);
  double previous = std::numeric_limits<double>::infinity();
  for (const auto& [n, sup] : p.sup_tail) {
    EXPECT_LE(sup, oracle::weighted_dyadic_sum(n + 1, 200) + 1e-9);
    EXPECT_LT(sup, previous);
    previous = sup;
  }
}

TEST(CauchyProfile, EscapingPairSequenceIsNotCauchy) {
  auto seq = lemma_3_7_sequence(line_positions(1.0, 2.0), 1, 24);
  const auto p = cauchy_profile(seq, 24);
  for (const auto& e : p.entries) {
    if (e.m == 2 * e.n) {
      EXPECT_GE(e.value, static_cast<double>(e.n) / 2.0);
    }
  }
}

TEST(CauchyProfile, ThreadCountDoesNotChangeResults) {
  auto a = assertion_1_1_sequence(line_positions(1.0, 1.0), 1, 12);
  auto b = assertion_1_1_sequence(line_positions(1.0, 1.0), 1, 12);
  const auto p1 = cauchy_profile(a, 12, 1);
  const auto p4 = cauchy_profile(b, 12, 4);
  ASSERT_EQ(p1.entries.size(), p4.entries.size());
  for (std::size_t i = 0; i < p1.entries.size(); ++i) EXPECT_EQ(p1.entries[i].value, p4.entries[i].value);
}

TEST(DiracSweep, IdentityOnScenarioSpaces) {
  auto seq = assertion_1_1_sequence(line_positions(1.0, 1.0), 1, 12);
  seq.at(12);
  EXPECT_LE(dirac_identity_sweep(seq.space()), 1e-12);
  EXPECT_LE(dirac_identity_sweep(MetricSpace::euclidean(2, {{0, 0}, {1, 1}, {3, -2}})), 1e-12);
}

TEST(TightnessCover, TwoClusters) {
  auto s = MetricSpace::line({0.0, 5.0});
  std::vector<DiscreteMeasure> ms{DiscreteMeasure(s, {{0, 0.5}, {1, 0.5}})};
  const auto r = tightness_cover(ms, 1.0, 0.1);
  EXPECT_TRUE(r.covered);
  EXPECT_EQ(r.centers, (std::vector<PointIndex>{0, 1}));
}

TEST(TightnessCover, LargeDeltaNeedsNoBalls) {
  auto s = MetricSpace::line({0.0, 5.0});
  std::vector<DiscreteMeasure> ms{dirac(0, s), dirac(1, s)};
  const auto r = tightness_cover(ms, 1.0, 1.5);
  EXPECT_TRUE(r.covered);
  EXPECT_TRUE(r.centers.empty());
}

TEST(TightnessCover, BudgetFailureIsConfirmedByEnumeration) {
  // Diracs at 0..9 with closed radius-1 balls: each ball holds 3 atoms, so 4 are needed.
  std::vector<double> xs(10);
  for (std::size_t i = 0; i < 10; ++i) xs[i] = static_cast<double>(i);
  auto s = MetricSpace::line(xs);
  std::vector<DiscreteMeasure> ms;
  for (PointIndex k = 0; k < 10; ++k) ms.push_back(dirac(k, s));
  const auto ok = tightness_cover(ms, 1.0, 0.5, 4);
  EXPECT_TRUE(ok.covered);
  EXPECT_LE(ok.centers.size(), 4u);
  const auto fail = tightness_cover(ms, 1.0, 0.5, 3);
  EXPECT_FALSE(fail.covered);
  EXPECT_TRUE(fail.exact);
  ASSERT_TRUE(fail.failure.has_value());
  EXPECT_DOUBLE_EQ(fail.failure->uncovered_mass, 1.0);
  // Brute force over all 3-subsets of centers, independently.
  bool any = false;
  for (int a = 0; a < 10; ++a)
    for (int b = a + 1; b < 10; ++b)
      for (int c = b + 1; c < 10; ++c) {
        bool all = true;
        for (int k = 0; k < 10; ++k) all = all && (std::abs(k - a) <= 1 || std::abs(k - b) <= 1 || std::abs(k - c) <= 1);
        any = any || all;
      }
  EXPECT_FALSE(any);
}

TEST(TightnessCover, GreedyCoversMixedFamilies) {
  auto s = MetricSpace::line({0.0, 0.5, 3.0, 3.2, 10.0});
  std::vector<DiscreteMeasure> ms{DiscreteMeasure(s, {{0, 0.6}, {2, 0.4}}), DiscreteMeasure(s, {{1, 0.3}, {3, 0.3}, {4, 0.4}})};
  const auto r = tightness_cover(ms, 0.5, 0.35);
  ASSERT_TRUE(r.covered);
  for (const auto& m : ms) EXPECT_LT(detail::mass_outside(m, *s, r.centers, 0.5), 0.35);
}

TEST(Witness, EscapingDiracs) {
  auto seq = escaping_dirac_sequence(line_positions(2.0, 1.0), 1, 20);
  const auto w = build_witness(seq, 0.5, 0.5, 4);
  EXPECT_EQ(w.indices, (std::vector<std::size_t>{1, 2, 3, 4}));
  for (std::size_t k = 0; k < 4; ++k) {
    ASSERT_EQ(w.d_sets[k].size(), 1u);
    EXPECT_DOUBLE_EQ(w.space->coords(w.d_sets[k][0])[0], 2.0 * static_cast<double>(k + 1));
  }
  // f = phi_2 + phi_4: integrate against the Diracs directly.
  for (std::size_t k = 1; k <= 4; ++k) {
    const double at = w.f(seq.point(k));
    EXPECT_EQ(at, k % 2 == 0 ? 1.0 : 0.0);
  }
  for (double osc : w.oscillations) EXPECT_EQ(osc, 1.0);
  const auto report = verify_witness(w);
  for (const auto& c : report.checks) EXPECT_TRUE(c.passed) << c.name << ": " << c.detail;
  EXPECT_LE(report.lip, 2.0 / 0.5 + 1e-9);
}

TEST(Witness, TightSequenceFailsThePremise) {
  auto seq = constant_sequence({0.0}, 20);
  try {
    build_witness(seq, 0.5, 0.5, 3);
    FAIL() << "expected a premise error";
  } catch (const PremiseError& e) {
    EXPECT_NE(std::string(e.what()).find("A = {(0)}"), std::string::npos) << e.what();
  }
}

TEST(Witness, EscapingPairSequenceWithSmallDelta) {
  // Mass 1/n escapes, so delta must be small and the horizon long enough.
  auto seq = lemma_3_7_sequence(line_positions(1.0, 2.0), 1, 40);
  const auto w = build_witness(seq, 0.5, 0.05, 3);
  const auto report = verify_witness(w);
  for (const auto& c : report.checks) EXPECT_TRUE(c.passed) << c.name << ": " << c.detail;
}

TEST(Witness, VerifierCatchesTampering) {
  auto seq = escaping_dirac_sequence(line_positions(2.0, 1.0), 1, 20);
  auto w = build_witness(seq, 0.5, 0.5, 4);
  auto broken = w;
  broken.a_sets[2].clear();
  EXPECT_FALSE(verify_witness(broken).valid());
  broken = w;
  std::map<PointIndex, double> v = w.f.values();
  v[seq.point(2)] = 3.0;
  broken.f = LipFunction(v, 4.0);
  EXPECT_FALSE(verify_witness(broken).valid());
}
