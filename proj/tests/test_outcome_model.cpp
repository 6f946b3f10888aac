#include <cmath>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "snipe/outcome_model.hpp"
#include "snipe/rng.hpp"

using namespace snipe;

namespace {

// Shared inputs of the generator golden traces: the three-unit graph with
// pinned v/u draws and covariates chosen so the covariate quadratic form is
// nonzero on the off-diagonal support.
struct GeneratorFixture {
  Graph g = testutil::toy_graph();
  std::vector<double> v = {0.2, 0.4, 0.6};
  std::vector<double> u = {0.1, 0.3, 0.5};
  Eigen::MatrixXd x;
  GeneratorFixture() {
    x.resize(3, 2);
    x << 1, 1, 0, 1, 1, 0;
  }
};

}  // namespace

TEST_SUITE("outcome") {

TEST_CASE("coefficient access, overwrite, and validation") {
  InteractionModel m = testutil::toy_model();
  CHECK_NOTHROW(m.validate());
  CHECK(m.alpha(1, {}) == -2.0);
  CHECK(m.alpha(1, {0}) == 1.0);
  CHECK(m.alpha(1, {0, 1}) == 0.0);  // never set
  m.set_alpha(1, {0}, 3.5);
  CHECK(m.alpha(1, {0}) == 3.5);

  InteractionModel outside = testutil::toy_model();
  outside.set_alpha(2, {0}, 1.0);  // 0 is not in N_2
  CHECK_THROWS_AS(outside.validate(), std::invalid_argument);

  InteractionModel too_big = testutil::toy_model();
  too_big.set_alpha(0, {0, 1}, 1.0);  // order-2 subset in a beta=1 model
  CHECK_THROWS_AS(too_big.validate(), std::invalid_argument);
}

TEST_CASE("potential outcomes of the three-unit fixture") {
  const InteractionModel m = testutil::toy_model();
  const Eigen::VectorXd y_partial = evaluate_potential(m, {1, 1, 0});
  CHECK(y_partial(0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(y_partial(1) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(y_partial(2) == doctest::Approx(-0.5).epsilon(1e-15));
  const Eigen::VectorXd y_full = evaluate_potential(m, {1, 1, 1});
  CHECK(y_full(0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(y_full(1) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(y_full(2) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(true_tte(m) == doctest::Approx(5.0 / 3.0).epsilon(1e-15));
  CHECK(m.y_max() == doctest::Approx(4.0).epsilon(1e-15));
}

TEST_CASE("coefficient matrix row sums and densification") {
  AlphaMatrix a;
  a.diag = {1.0, 2.0};
  a.off = {{{1, 0.5}}, {}};
  CHECK(a.n() == 2);
  CHECK(a.row_sum(0) == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(a.row_sum(1) == doctest::Approx(2.0).epsilon(1e-15));
  const Eigen::MatrixXd dense = a.to_dense();
  CHECK(dense(0, 0) == 1.0);
  CHECK(dense(0, 1) == 0.5);
  CHECK(dense(1, 0) == 0.0);
  CHECK(dense(1, 1) == 2.0);
}

TEST_CASE("absolute sum of the covariate quadratic form") {
  Rng rng(51);
  Eigen::MatrixXd x(7, 3), psi(3, 3);
  for (int i = 0; i < 7; ++i)
    for (int j = 0; j < 3; ++j) x(i, j) = rng.normal();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) psi(i, j) = rng.normal();
  const double direct = (x * psi * x.transpose()).cwiseAbs().sum();
  CHECK(abs_sum_quadratic_form(x, psi) ==
        doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("quadratic-form sum is exact across the block boundary") {
  Rng rng(52);
  Eigen::MatrixXd x(300, 2);  // spans two 256-row blocks
  for (int i = 0; i < 300; ++i)
    for (int j = 0; j < 2; ++j) x(i, j) = rng.normal();
  const Eigen::MatrixXd psi = Eigen::MatrixXd::Identity(2, 2);
  const double direct = (x * x.transpose()).cwiseAbs().sum();
  CHECK(abs_sum_quadratic_form(x, psi) ==
        doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("linear coefficient generator golden trace") {
  // Hand-computed: degrees (2,2,1); column sums of the degree-weighted
  // adjacency (2,2,0 -> 1); col_scale = 2 v_j / s_j = (0.2, 0.4, 1.2);
  // quadratic-form abs sum = 8, so the rescale factor is 9/40.
  const GeneratorFixture fx;
  Rng rng(0);  // unused: v and u are supplied
  const Eigen::MatrixXd psi = Eigen::MatrixXd::Identity(2, 2);
  const AlphaMatrix a =
      gen_alpha_linear(fx.g, fx.x, psi, 1.0, 2.0, &fx.v, &fx.u, rng);
  CHECK(a.diag[0] == doctest::Approx(0.1 + 2.0 * 0.225).epsilon(1e-14));
  CHECK(a.diag[1] == doctest::Approx(0.3 + 1.0 * 0.225).epsilon(1e-14));
  CHECK(a.diag[2] == doctest::Approx(0.5 + 1.0 * 0.225).epsilon(1e-14));
  REQUIRE(a.off[0].size() == 1);
  CHECK(a.off[0][0].first == 1);
  CHECK(a.off[0][0].second ==
        doctest::Approx(0.8 + 2.0 * 1.0 * 0.225).epsilon(1e-14));
  REQUIRE(a.off[1].size() == 1);
  CHECK(a.off[1][0].first == 0);
  CHECK(a.off[1][0].second ==
        doctest::Approx(0.4 + 2.0 * 1.0 * 0.225).epsilon(1e-14));
  CHECK(a.off[2].empty());
}

TEST_CASE("quadratic coefficient generator golden trace") {
  const GeneratorFixture fx;
  Rng rng(0);
  const AlphaMatrix a =
      gen_alpha_quad(fx.g, fx.x, 1.0, 2.0, &fx.v, &fx.u, rng);
  CHECK(a.diag[0] == doctest::Approx(3.0 * 0.1).epsilon(1e-14));
  CHECK(a.diag[1] == doctest::Approx(2.0 * 0.3).epsilon(1e-14));
  CHECK(a.diag[2] == doctest::Approx(2.0 * 0.5).epsilon(1e-14));
  REQUIRE(a.off[0].size() == 1);
  CHECK(a.off[0][0].second == doctest::Approx(0.8).epsilon(1e-14));
  REQUIRE(a.off[1].size() == 1);
  CHECK(a.off[1][0].second == doctest::Approx(0.4).epsilon(1e-14));
}

TEST_CASE("generator draws v before u when not supplied") {
  // With the same rng state, supplying v but not u must consume exactly the
  // u draws after the point where v would have been drawn.
  const GeneratorFixture fx;
  const Eigen::MatrixXd psi = Eigen::MatrixXd::Identity(2, 2);
  Rng r1(9);
  std::vector<double> v_drawn(3), u_drawn(3);
  for (double& t : v_drawn) t = r1.uniform();
  for (double& t : u_drawn) t = r1.uniform();
  Rng r2(9);
  const AlphaMatrix from_stream =
      gen_alpha_linear(fx.g, fx.x, psi, 1.0, 2.0, nullptr, nullptr, r2);
  Rng r3(0);
  const AlphaMatrix from_vectors = gen_alpha_linear(
      fx.g, fx.x, psi, 1.0, 2.0, &v_drawn, &u_drawn, r3);
  CHECK(from_stream.to_dense().isApprox(from_vectors.to_dense(), 1e-14));
}

TEST_CASE("synthetic outcome expansion at first order") {
  const GeneratorFixture fx;
  SimOutcomeSpec spec;
  spec.alpha0 = {0.25, 0.5, 0.75};
  spec.alpha_linear.diag = {1.0, 2.0, 3.0};
  spec.alpha_linear.off = {{{1, 0.5}}, {{0, -0.5}}, {}};
  spec.theta_true = Eigen::Vector2d(1.0, -1.0);
  spec.x_true = fx.x;
  int degenerate = -1;
  const InteractionModel m = build_sim_outcome(spec, 1, fx.g, &degenerate);
  CHECK(degenerate == 0);
  CHECK_NOTHROW(m.validate());
  // intercept = alpha0 + theta . x_true
  CHECK(m.alpha(0, {}) == doctest::Approx(0.25 + 0.0).epsilon(1e-14));
  CHECK(m.alpha(1, {}) == doctest::Approx(0.5 - 1.0).epsilon(1e-14));
  CHECK(m.alpha(2, {}) == doctest::Approx(0.75 + 1.0).epsilon(1e-14));
  CHECK(m.alpha(0, {0}) == 1.0);
  CHECK(m.alpha(0, {1}) == 0.5);
  CHECK(m.alpha(1, {0}) == -0.5);
  CHECK(m.alpha(1, {1}) == 2.0);
  CHECK(m.alpha(2, {2}) == 3.0);
}

TEST_CASE("synthetic outcome expansion at second order") {
  const GeneratorFixture fx;
  SimOutcomeSpec spec;
  spec.alpha0 = {0.0, 0.0, 0.0};
  spec.alpha_linear.diag = {1.0, 1.0, 1.0};
  spec.alpha_linear.off = {{{1, 0.0}}, {{0, 0.0}}, {}};
  spec.alpha_quad.diag = {0.3, 0.6, 1.0};
  spec.alpha_quad.off = {{{1, 0.8}}, {{0, 0.4}}, {}};
  spec.theta_true = Eigen::Vector2d::Zero();
  spec.x_true = fx.x;
  int degenerate = -1;
  const InteractionModel m = build_sim_outcome(spec, 2, fx.g, &degenerate);
  CHECK(degenerate == 0);
  CHECK_NOTHROW(m.validate());
  // pair weight 2 a_j a_k / (row sum)^2
  CHECK(m.alpha(0, {0, 1}) ==
        doctest::Approx(2.0 * 0.3 * 0.8 / (1.1 * 1.1)).epsilon(1e-14));
  CHECK(m.alpha(1, {0, 1}) ==
        doctest::Approx(2.0 * 0.4 * 0.6 / (1.0 * 1.0)).epsilon(1e-14));
  CHECK(m.alpha(2, {2}) == 1.0);  // single neighbor: no pair term

  // zero quadratic row: unit is counted and its pair terms vanish
  spec.alpha_quad.diag[0] = 0.0;
  spec.alpha_quad.off[0][0].second = 0.0;
  const InteractionModel m2 = build_sim_outcome(spec, 2, fx.g, &degenerate);
  CHECK(degenerate == 1);
  CHECK(m2.alpha(0, {0, 1}) == 0.0);
}

TEST_CASE("model file round trip") {
  const InteractionModel m = testutil::toy_model();
  testutil::TempFile f("model_roundtrip.txt");
  save_model(m, f.path);
  const InteractionModel back = load_model(f.path, testutil::toy_graph(), 1);
  REQUIRE(back.coef.size() == m.coef.size());
  for (int i = 0; i < 3; ++i) {
    REQUIRE(back.coef[i].size() == m.coef[i].size());
    for (std::size_t k = 0; k < m.coef[i].size(); ++k) {
      CHECK(back.coef[i][k].first == m.coef[i][k].first);
      CHECK(back.coef[i][k].second ==
            doctest::Approx(m.coef[i][k].second).epsilon(1e-12));
    }
  }
}

}  // TEST_SUITE
