#include <gtest/gtest.h>

#include <set>

#include "tubewalk/parallel.hpp"
#include "tubewalk/rng.hpp"

using namespace tubewalk;

TEST(Rng, StreamIsPureFunctionOfKey) {
  CounterRng a(derive_seed(42, Stream::Walk, 3, 7));
  CounterRng b(derive_seed(42, Stream::Walk, 3, 7));
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a(), b());
}

TEST(Rng, DerivedKeysAreDistinct) {
  std::set<std::uint64_t> keys;
  for (std::uint64_t a = 0; a < 50; ++a)
    for (std::uint64_t b = 0; b < 50; ++b) {
      keys.insert(derive_seed(1, Stream::Walk, a, b));
      keys.insert(derive_seed(1, Stream::Xi, a, b));
    }
  EXPECT_EQ(keys.size(), 5000u);
}

TEST(Rng, UniformMoments) {
  CounterRng r(9);
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    s += u;
    s2 += u * u;
  }
  EXPECT_NEAR(s / n, 0.5, 5 * std::sqrt(1.0 / 12 / n));
  EXPECT_NEAR(s2 / n - (s / n) * (s / n), 1.0 / 12, 2e-3);
}

TEST(Parallel, ResultsIndependentOfWorkerCount) {
  auto run = [](const char* threads) {
    setenv("TUBEWALK_THREADS", threads, 1);
    std::vector<std::uint64_t> out(1000);
    parallel_for(out.size(), [&](std::size_t i) { out[i] = CounterRng(derive_seed(5, Stream::Walk, i))(); });
    return out;
  };
  const auto one = run("1");
  const auto four = run("4");
  unsetenv("TUBEWALK_THREADS");
  EXPECT_EQ(one, four);
}

TEST(Parallel, PropagatesExceptions) {
  setenv("TUBEWALK_THREADS", "3", 1);
  EXPECT_THROW(parallel_for(100, [](std::size_t i) {
                 if (i == 57) throw std::runtime_error("boom");
               }),
               std::runtime_error);
  unsetenv("TUBEWALK_THREADS");
}
