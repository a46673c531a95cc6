#include <cmath>
#include <vector>

#include "doctest.h"
#include "hedgebench/rng.hpp"

using namespace hedgebench;

TEST_CASE("same seed, same stream") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("uniform moments") {
  Rng rng(7);
  const int n = 200000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    double u = rng.next_double();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    sum += u;
    sumsq += u * u;
  }
  double m = sum / n;
  double var = sumsq / n - m * m;
  CHECK(m == doctest::Approx(0.5).epsilon(0.01));
  CHECK(var == doctest::Approx(1.0 / 12.0).epsilon(0.02));
}

TEST_CASE("normal moments and symmetry") {
  Rng rng(11);
  const int n = 200000;
  double sum = 0.0, sumsq = 0.0, sumcube = 0.0;
  for (int i = 0; i < n; ++i) {
    double z = rng.next_normal();
    sum += z;
    sumsq += z * z;
    sumcube += z * z * z;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(sumsq / n == doctest::Approx(1.0).epsilon(0.02));
  CHECK(std::abs(sumcube / n) < 0.05);
}

TEST_CASE("normal quantile round trips known points") {
  CHECK(normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959963985).epsilon(1e-7));
  CHECK(normal_quantile(0.025) == doctest::Approx(-1.959963985).epsilon(1e-7));
  CHECK(normal_quantile(0.8413447460685429) == doctest::Approx(1.0).epsilon(1e-7));
  CHECK_THROWS(normal_quantile(0.0));
  CHECK_THROWS(normal_quantile(1.0));
}

TEST_CASE("categorical frequencies follow weights") {
  Rng rng(3);
  double w[3] = {0.2, 0.3, 0.5};
  int counts[3] = {0, 0, 0};
  const int n = 100000;
  for (int i = 0; i < n; ++i) ++counts[rng.next_categorical(w, 3)];
  for (int i = 0; i < 3; ++i)
    CHECK(static_cast<double>(counts[i]) / n == doctest::Approx(w[i]).epsilon(0.03));
}

TEST_CASE("split streams differ from parent and each other") {
  Rng root(99);
  Rng a = root.split(0);
  Rng b = root.split(1);
  CHECK(a.next_u64() != b.next_u64());
  // splitting is a pure function of (state, tag)
  Rng a2 = root.split(0);
  CHECK(a2.next_u64() == Rng(99).split(0).next_u64());
}

TEST_CASE("next_index stays in range and covers it") {
  Rng rng(5);
  std::vector<int> seen(7, 0);
  for (int i = 0; i < 2000; ++i) ++seen[rng.next_index(7)];
  for (int c : seen) CHECK(c > 0);
  CHECK_THROWS(rng.next_index(0));
}
