#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "tubewalk/walk.hpp"

using namespace tubewalk;

TEST(SamplePath, ZeroLength) {
  const auto env = sample_environment(EnvironmentSpec::rademacher(), 5, 1);
  const auto p = sample_path(env, 2, 0, 0.7, 9);
  EXPECT_EQ(p.s, std::vector<double>{0.7});
  EXPECT_EQ(p.m, std::vector<double>{0.0});
  EXPECT_EQ(p.u, std::vector<double>{0.0});
  EXPECT_EQ(p.gamma, std::vector<double>{0.0});
}

TEST(SamplePath, RademacherDecomposition) {
  const auto env = sample_environment(EnvironmentSpec::rademacher(), 100, 1);
  const auto p = sample_path(env, 10, 90, 3.0, 5);
  for (std::size_t i = 0; i < p.s.size(); ++i) {
    EXPECT_EQ(p.m[i], 0.0);
    EXPECT_EQ(p.u[i], p.s[i] - 3.0);
    EXPECT_EQ(p.gamma[i], static_cast<double>(i));
  }
}

TEST(SamplePath, ShiftBernoulliIncrementsOnEnumeratedSupport) {
  const auto env = sample_environment(EnvironmentSpec::random_shift_bernoulli(0.5, 2), 400, 11);
  const auto p = sample_path(env, 0, 400, 0.0, 12);
  for (std::size_t i = 1; i < p.s.size(); ++i) {
    const double x = p.s[i] - p.s[i - 1];
    // Support of step i, enumerated from its law.
    std::set<double> support;
    for (const auto& a : env[i - 1].atoms) support.insert(a.position);
    EXPECT_TRUE(support.count(x)) << x;
    EXPECT_TRUE(x == -1.5 || x == -0.5 || x == 0.5 || x == 1.5);
    EXPECT_EQ(p.m[i] - p.m[i - 1], env[i - 1].quenched_mean);
  }
}

TEST(SamplePath, InvariantsAndErrors) {
  const auto env = sample_environment(EnvironmentSpec::random_mean_gaussian(1.0, 2.0), 200, 4);
  const auto p = sample_path(env, 50, 150, -1.0, 8);
  EXPECT_EQ(p.length(), 150u);
  for (std::size_t i = 0; i < p.s.size(); ++i) {
    EXPECT_NEAR(p.s[i], p.s[0] + p.m[i] + p.u[i], 1e-9);
    if (i) EXPECT_GE(p.gamma[i], p.gamma[i - 1]);
  }
  EXPECT_THROW(sample_path(env, 100, 101, 0.0, 1), InvalidSpec);
  const auto q = sample_path(env, 50, 150, -1.0, 8);
  EXPECT_EQ(p.s, q.s);
}

// 1e5 paths in a fixed environment of length 100: E(S_100 - x0) ~ M_100 and
// Var(U_100) ~ Gamma_100.
TEST(SamplePath, QuenchedMomentsOverManyPaths) {
  const auto env = sample_environment(EnvironmentSpec::random_mean_gaussian(1.0, 2.0), 100, 21);
  const int reps = 100000;
  double s = 0, u2 = 0, u1 = 0;
  double m100 = 0, g100 = 0;
  for (int r = 0; r < reps; ++r) {
    const auto p = sample_path(env, 0, 100, 0.0, derive_seed(3, Stream::Walk, r));
    s += p.s.back();
    u1 += p.u.back();
    u2 += p.u.back() * p.u.back();
    m100 = p.m.back();
    g100 = p.gamma.back();
  }
  const double mean = s / reps;
  EXPECT_LE(std::abs(mean - m100), 5 * std::sqrt(g100 / reps));
  const double var = u2 / reps - (u1 / reps) * (u1 / reps);
  EXPECT_LE(std::abs(var / g100 - 1.0), 0.05);
}

TEST(SamplePath, CsvDump) {
  const auto env = sample_environment(EnvironmentSpec::rademacher(), 2, 1);
  const auto p = sample_path(env, 0, 2, 0.0, 1);
  std::ostringstream os;
  write_path_csv(p, os);
  const auto text = os.str();
  EXPECT_EQ(text.substr(0, 15), "i,s,m,u,gamma\n0");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 4);
}
