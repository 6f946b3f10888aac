#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "snipe/moments.hpp"
#include "snipe/rng.hpp"

using namespace snipe;

namespace {

// E[w^a Z^b] by direct two-point evaluation, the independent check for
// bernoulli_moment.
double naive_moment(int a, int b, double p) {
  const double w1 = (1.0 - p) / (p * (1.0 - p));   // w at Z = 1
  const double w0 = (0.0 - p) / (p * (1.0 - p));   // w at Z = 0
  double total = p * std::pow(w1, a);              // Z = 1 contributes Z^b = 1
  if (b == 0) total += (1.0 - p) * std::pow(w0, a);
  return total;
}

// E[prod w^a Z^b] by enumerating all assignments of the touched units.
double naive_expect_product(const MomentSpec& spec, const Design& design) {
  std::vector<int> units;
  for (int j : spec.units) units.push_back(j);
  for (int j : spec.indicators) units.push_back(j);
  std::sort(units.begin(), units.end());
  units.erase(std::unique(units.begin(), units.end()), units.end());
  const int m = static_cast<int>(units.size());
  double total = 0.0;
  for (int mask = 0; mask < (1 << m); ++mask) {
    double prob = 1.0, value = 1.0;
    for (int k = 0; k < m; ++k) {
      const int j = units[k];
      const int z = (mask >> k) & 1;
      prob *= z ? design.p[j] : 1.0 - design.p[j];
      const double w = (z - design.p[j]) / (design.p[j] * (1.0 - design.p[j]));
      for (std::size_t e = 0; e < spec.units.size(); ++e)
        if (spec.units[e] == j)
          for (int rep = 0; rep < spec.wexp[e]; ++rep) value *= w;
      for (int ind : spec.indicators)
        if (ind == j) value *= z;
    }
    total += prob * value;
  }
  return total;
}

}  // namespace

TEST_SUITE("moments") {

TEST_CASE("design floor and validation") {
  Design d;
  d.p = {0.3, 0.6, 0.5};
  CHECK_NOTHROW(d.validate());
  CHECK(d.floor() == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(d.q(2) == doctest::Approx(4.0).epsilon(1e-15));

  Design bad;
  bad.p = {0.3, 1.0};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad.p = {0.0};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("subset coefficient g") {
  const Design d = Design::constant(4, 0.5);
  CHECK(g_coeff({}, d) == 0.0);
  CHECK(g_coeff({2}, d) == doctest::Approx(1.0).epsilon(1e-15));
  // both products coincide at p = 1/2, so pairs vanish
  CHECK(g_coeff({0, 1}, d) == doctest::Approx(0.0).epsilon(1e-15));

  Design mixed;
  mixed.p = {0.2, 0.7, 0.4};
  CHECK(g_coeff({1}, mixed) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(g_coeff({0, 1}, mixed) ==
        doctest::Approx(0.8 * 0.3 - 0.2 * 0.7).epsilon(1e-15));
  CHECK(g_coeff({0, 1, 2}, mixed) ==
        doctest::Approx(0.8 * 0.3 * 0.6 + 0.2 * 0.7 * 0.4).epsilon(1e-15));
}

TEST_CASE("g stays within unit magnitude") {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    Design d;
    const int m = 1 + static_cast<int>(rng.uniform() * 5);
    for (int k = 0; k < m; ++k) d.p.push_back(0.05 + 0.9 * rng.uniform());
    std::vector<int> s(m);
    for (int k = 0; k < m; ++k) s[k] = k;
    CHECK(std::abs(g_coeff(s, d)) <= 1.0 + 1e-12);
  }
}

TEST_CASE("single-unit moments against two-point enumeration") {
  for (double p : {0.2, 0.5, 0.77}) {
    for (int a = 0; a <= 4; ++a)
      for (int b = 0; b <= 1; ++b)
        CHECK(bernoulli_moment(a, b, p) ==
              doctest::Approx(naive_moment(a, b, p)).epsilon(1e-12));
    // the identities everything downstream relies on
    CHECK(bernoulli_moment(1, 0, p) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(bernoulli_moment(1, 1, p) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(bernoulli_moment(2, 0, p) ==
          doctest::Approx(1.0 / (p * (1 - p))).epsilon(1e-12));
    CHECK(bernoulli_moment(2, 1, p) ==
          doctest::Approx(1.0 / p).epsilon(1e-12));
  }
}

TEST_CASE("factorized product expectation against enumeration") {
  Rng rng(23);
  Design d;
  d.p = {0.2, 0.35, 0.5, 0.65, 0.8};
  for (int trial = 0; trial < 100; ++trial) {
    MomentSpec spec;
    for (int j = 0; j < 5; ++j) {
      const int e = static_cast<int>(rng.uniform() * 3);  // exponent 0..2
      if (e > 0) {
        spec.units.push_back(j);
        spec.wexp.push_back(e);
      }
      if (rng.uniform() < 0.4) spec.indicators.push_back(j);
    }
    CHECK(expect_product(spec, d) ==
          doctest::Approx(naive_expect_product(spec, d)).epsilon(1e-11));
  }
}

TEST_CASE("pair expectation helper composes exponents") {
  Design d;
  d.p = {0.3, 0.4, 0.5, 0.6};
  const std::vector<int> s1 = {1, 2};
  const std::vector<int> s2 = {2, 3};
  const std::vector<int> ind = {0};
  MomentSpec spec;
  spec.units = {1, 2, 3};
  spec.wexp = {1, 2, 1};
  spec.indicators = {0};
  CHECK(weight_product_expectation(s1, s2, ind, d) ==
        doctest::Approx(expect_product(spec, d)).epsilon(1e-13));
}

TEST_CASE("weight covariances are nonnegative and bounded") {
  // Cov[w_S Z_S', w_T Z_T'] lies in [0, 1(S xor T inside S' u T') * q^|S&T|]
  // with q evaluated at the design floor.
  Rng rng(29);
  const int n = 5;
  for (int trial = 0; trial < 400; ++trial) {
    Design d;
    for (int k = 0; k < n; ++k) d.p.push_back(0.2 + 0.6 * rng.uniform());
    const double q_floor = 1.0 / (d.floor() * (1.0 - d.floor()));
    std::vector<int> s, sp, t, tp;
    for (int j = 0; j < n; ++j) {
      if (rng.uniform() < 0.4) s.push_back(j);
      if (rng.uniform() < 0.4) sp.push_back(j);
      if (rng.uniform() < 0.4) t.push_back(j);
      if (rng.uniform() < 0.4) tp.push_back(j);
    }
    MomentSpec joint;
    std::vector<int> inter, sym_diff, prime_union;
    for (int j = 0; j < n; ++j) {
      int e = 0;
      const bool in_s = std::find(s.begin(), s.end(), j) != s.end();
      const bool in_t = std::find(t.begin(), t.end(), j) != t.end();
      if (in_s) ++e;
      if (in_t) ++e;
      if (e > 0) {
        joint.units.push_back(j);
        joint.wexp.push_back(e);
      }
      if (in_s && in_t) inter.push_back(j);
      if (in_s != in_t) sym_diff.push_back(j);
      const bool in_sp = std::find(sp.begin(), sp.end(), j) != sp.end();
      const bool in_tp = std::find(tp.begin(), tp.end(), j) != tp.end();
      if (in_sp || in_tp) prime_union.push_back(j);
    }
    joint.indicators = prime_union;
    MomentSpec left, right;
    for (int j : s) {
      left.units.push_back(j);
      left.wexp.push_back(1);
    }
    left.indicators = sp;
    for (int j : t) {
      right.units.push_back(j);
      right.wexp.push_back(1);
    }
    right.indicators = tp;
    const double cov = expect_product(joint, d) -
                       expect_product(left, d) * expect_product(right, d);
    CHECK(cov >= -1e-10);
    const bool diff_covered =
        std::includes(prime_union.begin(), prime_union.end(),
                      sym_diff.begin(), sym_diff.end());
    const double bound =
        diff_covered ? std::pow(q_floor, static_cast<double>(inter.size()))
                     : 0.0;
    CHECK(cov <= bound + 1e-10);
  }
}

TEST_CASE("pair gram values of the three-unit fixture") {
  const Graph g = testutil::toy_graph();
  const Design d = testutil::toy_design();
  CHECK(pair_gram(g, d, 1, 0, 0) == doctest::Approx(8.0).epsilon(1e-14));
  CHECK(pair_gram(g, d, 1, 1, 1) == doctest::Approx(8.0).epsilon(1e-14));
  CHECK(pair_gram(g, d, 1, 2, 2) == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(pair_gram(g, d, 1, 0, 1) == doctest::Approx(8.0).epsilon(1e-14));
  CHECK(pair_gram(g, d, 1, 0, 2) == 0.0);
  CHECK(pair_gram(g, d, 1, 1, 2) == 0.0);
}

TEST_CASE("pair kernel with an empty indicator set reduces to the gram") {
  Rng rng(37);
  Graph g;
  g.n = 5;
  g.in_neighbors = {{0, 1, 2}, {0, 1, 3}, {1, 2, 4}, {3}, {2, 4}};
  Design d;
  for (int k = 0; k < 5; ++k) d.p.push_back(0.25 + 0.5 * rng.uniform());
  for (int beta = 1; beta <= 2; ++beta)
    for (int i = 0; i < 5; ++i)
      for (int i2 = 0; i2 < 5; ++i2)
        CHECK(vim_kernel(g, d, beta, i, i2, {}) ==
              doctest::Approx(pair_gram(g, d, beta, i, i2)).epsilon(1e-12));
}

TEST_CASE("own-weight second moment never drops below four") {
  Rng rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    Graph g;
    g.n = 4;
    g.in_neighbors = {{0}, {0, 1}, {1, 2, 3}, {0, 3}};
    Design d;
    for (int k = 0; k < 4; ++k) d.p.push_back(0.1 + 0.8 * rng.uniform());
    for (int beta = 1; beta <= 2; ++beta)
      for (int i = 0; i < 4; ++i)
        CHECK(pair_gram(g, d, beta, i, i) >= 4.0 - 1e-12);
  }
}

}  // TEST_SUITE
