#include <gtest/gtest.h>

#include <cmath>

#include "tubewalk/env.hpp"

using namespace tubewalk;

namespace tubewalk {
// Short parameter names in test listings.
void PrintTo(const EnvironmentSpec& spec, std::ostream* os) { *os << to_string(spec.family); }
}  // namespace tubewalk

TEST(Moments, Rademacher) {
  const auto m = moments(EnvironmentSpec::rademacher());
  EXPECT_DOUBLE_EQ(m.sigma_a_sq, 0.0);
  EXPECT_DOUBLE_EQ(m.sigma_q_sq, 1.0);
}

TEST(Moments, RandomShiftBernoulli) {
  const auto m = moments(EnvironmentSpec::random_shift_bernoulli(0.5, 2));
  EXPECT_DOUBLE_EQ(m.sigma_a_sq, 0.25);
  EXPECT_DOUBLE_EQ(m.sigma_q_sq, 1.0);
}

TEST(Moments, RandomMeanGaussian) {
  const auto m = moments(EnvironmentSpec::random_mean_gaussian(1.0, 2.0));
  EXPECT_DOUBLE_EQ(m.sigma_a_sq, 1.0);
  EXPECT_DOUBLE_EQ(m.sigma_q_sq, 4.0);
}

TEST(Moments, RejectsInvalidSpecs) {
  EXPECT_THROW(moments(EnvironmentSpec::random_mean_gaussian(1.0, 0.0)), InvalidSpec);
  EXPECT_THROW(moments(EnvironmentSpec::degenerate({})), InvalidSpec);
  EXPECT_THROW(moments(EnvironmentSpec::degenerate({{0.0, 1.0}})), InvalidSpec);           // zero variance
  EXPECT_THROW(moments(EnvironmentSpec::degenerate({{1.0, 0.5}, {2.0, 0.5}})), InvalidSpec);  // E M_1 != 0
  EXPECT_THROW(moments(EnvironmentSpec::random_shift_bernoulli(0.3, 2)), InvalidSpec);     // off lattice
  EXPECT_THROW(moments(EnvironmentSpec::random_shift_bernoulli(-0.5, 2)), InvalidSpec);
}

TEST(StepLaw, MomentsMatchKind) {
  const auto a = StepLaw::from_atoms({{-1.5, 0.25}, {0.5, 0.75}});
  EXPECT_NEAR(a.quenched_mean, 0.0, 1e-12);
  EXPECT_NEAR(a.quenched_var, 0.25 * 2.25 + 0.75 * 0.25, 1e-12);
  const auto g = StepLaw::gaussian(0.3, 2.0);
  EXPECT_DOUBLE_EQ(g.quenched_mean, 0.3);
  EXPECT_DOUBLE_EQ(g.quenched_var, 4.0);
  EXPECT_THROW(StepLaw::from_atoms({{0.0, 0.5}, {1.0, 0.4}}), InvalidSpec);
  EXPECT_THROW(StepLaw::gaussian(0.0, 0.0), InvalidSpec);
}

TEST(SampleEnvironment, DegenerateStepsIdentical) {
  const auto env = sample_environment(EnvironmentSpec::rademacher(), 50, 123);
  for (const auto& s : env.steps) {
    ASSERT_EQ(s.atoms.size(), 2u);
    EXPECT_EQ(s.atoms[0].position, -1.0);
    EXPECT_EQ(s.atoms[1].position, 1.0);
  }
}

TEST(SampleEnvironment, ShiftBernoulliMeanWithinClt) {
  const auto env = sample_environment(EnvironmentSpec::random_shift_bernoulli(0.5, 2), 1000, 7);
  double s = 0;
  for (const auto& st : env.steps) {
    EXPECT_TRUE(std::abs(std::abs(st.quenched_mean) - 0.5) < 1e-15);
    s += st.quenched_mean;
  }
  EXPECT_LE(std::abs(s / 1000), 4 * 0.5 / std::sqrt(1000.0));
}

TEST(SampleEnvironment, DeterministicAndPrefixStable) {
  const auto spec = EnvironmentSpec::random_mean_gaussian(1.0, 2.0);
  const auto a = sample_environment(spec, 300, 99);
  const auto b = sample_environment(spec, 300, 99);
  const auto c = sample_environment(spec, 500, 99);
  for (std::size_t i = 0; i < 300; ++i) {
    EXPECT_EQ(a[i].gaussian_mean, b[i].gaussian_mean);
    EXPECT_EQ(a[i].gaussian_mean, c[i].gaussian_mean);
  }
  const auto d = sample_environment(spec, 300, 100);
  EXPECT_NE(a[0].gaussian_mean, d[0].gaussian_mean);
  EXPECT_THROW(sample_environment(spec, 0, 1), InvalidSpec);
}

TEST(SampleEnvironment, LatticeAtoms) {
  const auto env = sample_environment(EnvironmentSpec::random_shift_bernoulli(0.5, 2), 200, 3);
  EXPECT_EQ(lattice_denominator(env.steps), 2);
  EXPECT_EQ(lattice_denominator(sample_environment(EnvironmentSpec::rademacher(), 5, 1).steps), 1);
  EXPECT_FALSE(lattice_denominator(sample_environment(EnvironmentSpec::random_mean_gaussian(1, 1), 5, 1).steps));
}

class SpecMomentsProperty : public ::testing::TestWithParam<EnvironmentSpec> {};

// 1e5 steps: mean of m_i within 5 SE of 0, mean of v_i within 5 SE of sigma_Q^2.
TEST_P(SpecMomentsProperty, QuenchedMeansAndVariances) {
  const auto spec = GetParam();
  const auto env = sample_environment(spec, 100000, 2024);
  double sm = 0, sm2 = 0, sv = 0, sv2 = 0;
  for (const auto& s : env.steps) {
    sm += s.quenched_mean;
    sm2 += s.quenched_mean * s.quenched_mean;
    sv += s.quenched_var;
    sv2 += s.quenched_var * s.quenched_var;
  }
  const double n = 1e5;
  const double mm = sm / n, vm = sv / n;
  const double se_m = std::sqrt(std::max(sm2 / n - mm * mm, 0.0) / n);
  const double se_v = std::sqrt(std::max(sv2 / n - vm * vm, 0.0) / n);
  const auto mom = moments(spec);
  EXPECT_LE(std::abs(mm), 5 * se_m + 1e-15);
  EXPECT_LE(std::abs(vm - mom.sigma_q_sq), 5 * se_v + 1e-12);
}

// 1e6 environment draws: sample E M_1^2 within 5 SE of sigma_A^2.
TEST_P(SpecMomentsProperty, ClosedFormMatchesMonteCarlo) {
  const auto spec = GetParam();
  const std::size_t n = 1000000;
  double s = 0, s2 = 0, q = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const auto law = sample_step_law(spec, 77, k);
    const double m2 = law.quenched_mean * law.quenched_mean;
    s += m2;
    s2 += m2 * m2;
    q += law.quenched_var;
  }
  const double mean = s / static_cast<double>(n);
  const double se = std::sqrt(std::max(s2 / n - mean * mean, 0.0) / n);
  const auto mom = moments(spec);
  EXPECT_LE(std::abs(mean - mom.sigma_a_sq), 5 * se + 1e-15);
  EXPECT_NEAR(q / n, mom.sigma_q_sq, 1e-12);
}

INSTANTIATE_TEST_SUITE_P(Families, SpecMomentsProperty,
                         ::testing::Values(EnvironmentSpec::rademacher(),
                                           EnvironmentSpec::random_shift_bernoulli(0.5, 2),
                                           EnvironmentSpec::random_mean_gaussian(1.0, 2.0)),
                         [](const ::testing::TestParamInfo<EnvironmentSpec>& info) { return to_string(info.param.family); });

TEST(VerifyAssumptions, AllFamiliesPass) {
  for (const auto& spec : {EnvironmentSpec::rademacher(), EnvironmentSpec::random_shift_bernoulli(0.5, 2),
                           EnvironmentSpec::random_mean_gaussian(1.0, 2.0)}) {
    const auto r = verify_assumptions(spec);
    EXPECT_TRUE(r.h1) << spec.id();
    EXPECT_TRUE(r.h2) << spec.id();
    EXPECT_TRUE(r.h3) << spec.id();
    EXPECT_GT(r.lambda3, 1.0);
  }
  const auto g = verify_assumptions(EnvironmentSpec::random_mean_gaussian(1.0, 2.0));
  // E exp(|U|) for U ~ N(0, 4): 2 e^2 Phi(2)
  EXPECT_NEAR(g.lambda3, 2 * std::exp(2.0) * 0.5 * std::erfc(-2.0 / std::sqrt(2.0)), 1e-12);
  const auto rsb = verify_assumptions(EnvironmentSpec::random_shift_bernoulli(0.5, 2));
  EXPECT_NEAR(rsb.lambda3, std::exp(1.0), 1e-15);
}

TEST(VerifyAssumptions, FailuresAreFlagsNotExceptions) {
  const auto r = verify_assumptions(EnvironmentSpec::random_mean_gaussian(1.0, 0.0));
  EXPECT_FALSE(r.h1);
  EXPECT_FALSE(r.all_pass());
  EXPECT_FALSE(r.notes.empty());
}
