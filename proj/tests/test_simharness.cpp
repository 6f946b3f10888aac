#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "snipe/simharness.hpp"

using namespace snipe;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

ExperimentSpec tiny_spec() {
  ExperimentSpec spec;
  spec.setting = Setting::kErB1;
  spec.n = 30;
  spec.reps = 6;
  spec.d_x = 2;
  spec.seed = 5;
  return spec;
}

}  // namespace

TEST_SUITE("simharness") {

TEST_CASE("setting names round trip") {
  for (const char* name : {"ER-b1", "ER-b2", "SRGG-b1", "SRGG-b2"}) {
    const Setting s = parse_setting(name);
    CHECK(setting_name(s) == name);
  }
  CHECK(setting_beta(Setting::kErB1) == 1);
  CHECK(setting_beta(Setting::kSrggB2) == 2);
  CHECK(setting_is_er(Setting::kErB2));
  CHECK_FALSE(setting_is_er(Setting::kSrggB1));
  CHECK_THROWS_AS(parse_setting("ER"), std::invalid_argument);
}

TEST_CASE("spec validation rejects inconsistent fields") {
  ExperimentSpec spec = tiny_spec();
  CHECK_NOTHROW(spec.validate());

  ExperimentSpec bad = spec;
  bad.p = 1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = spec;
  bad.rho = 1.5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = spec;
  bad.sweep_param = "beta";
  bad.sweep_values = {1.0};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = spec;
  bad.sweep_param = "r";
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);  // no values
  bad = spec;
  bad.sweep_values = {1.0};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);  // no param
  bad = spec;
  bad.sweep_param = "n";
  bad.sweep_values = {10.0, 10.5};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = spec;
  bad.sweep_param = "n";
  bad.sweep_values = {10.0, 20.0};
  bad.sigma_schedule = {0.02};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = spec;
  bad.theta_true = Eigen::VectorXd::Ones(3);  // d_x is 2
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("defaults resolve as documented") {
  ExperimentSpec spec = tiny_spec();
  CHECK(spec.resolved_p_edge() == doctest::Approx(10.0 / 30.0));
  spec.n = 4;
  CHECK(spec.resolved_p_edge() == 1.0);  // capped
  spec.p_edge = 0.25;
  CHECK(spec.resolved_p_edge() == 0.25);
  CHECK(spec.resolved_psi().isIdentity(0.0));
  CHECK(spec.resolved_theta_true().isOnes(0.0));
  CHECK(spec.resolved_theta_true().size() == 2);
}

TEST_CASE("covariate generator centers and blends") {
  Rng rng(7);
  auto [x_obs, x_true] = gen_covariates(50, 3, 1.0, rng);
  CHECK(x_obs.rows() == 50);
  CHECK(x_obs.cols() == 3);
  for (int c = 0; c < 3; ++c) {
    CHECK(std::abs(x_obs.col(c).mean()) < 1e-12);
    CHECK(std::abs(x_true.col(c).mean()) < 1e-12);
  }
  CHECK((x_true - x_obs).norm() < 1e-12);  // rho = 1: fully observed

  Rng rng2(7);
  auto [o2, t2] = gen_covariates(50, 3, 0.0, rng2);
  CHECK((t2 - o2).norm() > 1.0);  // rho = 0: unrelated block

  Rng rng3(7);
  auto [o3, t3] = gen_covariates(50, 3, 0.6, rng3);
  CHECK((o3 - o2).norm() < 1e-12);  // observed block unaffected by rho
  // at rho = 0 the true covariate IS the unobserved block, so the blend can
  // be reconstructed from the two edge cases
  CHECK((t3 - (0.6 * o2 + std::sqrt(1.0 - 0.36) * t2)).norm() < 1e-12);
}

TEST_CASE("population generation is reproducible") {
  const ExperimentSpec spec = tiny_spec();
  const Population a = make_population(spec, 0, 3);
  const Population b = make_population(spec, 0, 3);
  CHECK(a.graph.in_neighbors == b.graph.in_neighbors);
  CHECK((a.x_obs - b.x_obs).norm() == 0.0);
  CHECK(a.tte == b.tte);
  CHECK_NOTHROW(a.graph.validate());
  CHECK_NOTHROW(a.model.validate());

  const Population c = make_population(spec, 0, 4);
  CHECK(c.tte != a.tte);  // another replicate, another population
}

TEST_CASE("second-order settings carry pair coefficients") {
  ExperimentSpec spec = tiny_spec();
  spec.setting = Setting::kErB2;
  const Population pop = make_population(spec, 0, 0);
  CHECK(pop.model.beta == 2);
  bool has_pair = false;
  for (const auto& row : pop.model.coef)
    for (const auto& [s, a] : row)
      if (s.size() == 2 && a != 0.0) has_pair = true;
  CHECK(has_pair);
}

TEST_CASE("replicates are deterministic and fully estimated") {
  const ExperimentSpec spec = tiny_spec();
  const ReplicateResult r1 = run_replicate(spec, 0, 2);
  const ReplicateResult r2 = run_replicate(spec, 0, 2);
  for (int k = 0; k < kNumEstimators; ++k) {
    CHECK(r1.ok[k]);
    CHECK(r1.estimate[k] == r2.estimate[k]);
    CHECK(std::isfinite(r1.estimate[k]));
  }
  CHECK(r1.true_tte == r2.true_tte);
}

TEST_CASE("fixed-population mode shares one population") {
  ExperimentSpec spec = tiny_spec();
  spec.fix_population = true;
  const ExperimentResult res = run_experiment(spec);
  REQUIRE(res.points.size() == 1);
  const auto& reps = res.points[0].replicates;
  REQUIRE(static_cast<int>(reps.size()) == spec.reps);
  for (const auto& r : reps) CHECK(r.true_tte == reps[0].true_tte);
}

TEST_CASE("metric aggregation over successes and failures") {
  ReplicateResult a;
  a.rep = 0;
  a.true_tte = 2.0;
  a.estimate.fill(3.0);
  a.ok.fill(true);
  ReplicateResult b;
  b.rep = 1;
  b.true_tte = 4.0;
  b.estimate.fill(5.0);
  b.ok.fill(true);

  const auto metrics = compute_metrics({a, b}, MseNormalization::kAbs);
  REQUIRE(metrics.size() == kNumEstimators);
  CHECK(metrics[0].estimator == "DM");
  CHECK(metrics[2].estimator == "SNIPE");
  for (const auto& m : metrics) {
    CHECK(m.n_fail == 0);
    CHECK(m.rel_bias == doctest::Approx((4.0 - 3.0) / 3.0).epsilon(1e-14));
    CHECK(m.rel_mse ==
          doctest::Approx((1.0 / 2.0 + 1.0 / 4.0) / 2.0).epsilon(1e-14));
  }
  const auto squared = compute_metrics({a, b}, MseNormalization::kSquared);
  CHECK(squared[0].rel_mse ==
        doctest::Approx((1.0 / 4.0 + 1.0 / 16.0) / 2.0).epsilon(1e-14));

  ReplicateResult failed = b;
  failed.ok.fill(false);
  const auto partial = compute_metrics({a, failed}, MseNormalization::kAbs);
  CHECK(partial[0].n_fail == 1);
  CHECK(partial[0].rel_bias == doctest::Approx(0.5).epsilon(1e-14));

  ReplicateResult zero = a;
  zero.true_tte = 0.0;
  CHECK_THROWS_AS(compute_metrics({zero}, MseNormalization::kAbs),
                  std::runtime_error);

  ReplicateResult dead = a;
  dead.ok.fill(false);
  const auto none = compute_metrics({dead}, MseNormalization::kAbs);
  CHECK(none[0].n_fail == 1);
  CHECK(std::isnan(none[0].rel_bias));
  CHECK(std::isnan(none[0].rel_mse));
}

TEST_CASE("experiment sweeps resolve one spec per value") {
  ExperimentSpec spec = tiny_spec();
  spec.sweep_param = "r";
  spec.sweep_values = {0.1, 2.0};
  const ExperimentResult res = run_experiment(spec);
  REQUIRE(res.points.size() == 2);
  CHECK(res.points[0].sweep_value == 0.1);
  CHECK(res.points[1].sweep_value == 2.0);
  CHECK(res.points[0].resolved.r == 0.1);
  CHECK(res.points[1].resolved.r == 2.0);
  CHECK(res.points[0].resolved.sweep_param.empty());
  for (const auto& point : res.points) {
    REQUIRE(static_cast<int>(point.replicates.size()) == spec.reps);
    REQUIRE(point.metrics.size() == kNumEstimators);
  }
}

TEST_CASE("csv outputs are byte-stable across runs") {
  ExperimentSpec spec = tiny_spec();
  spec.sweep_param = "r";
  spec.sweep_values = {0.5, 1.5};

  testutil::TempFile raw1("raw_a.csv"), sum1("sum_a.csv");
  testutil::TempFile raw2("raw_b.csv"), sum2("sum_b.csv");
  const ExperimentResult res1 = run_experiment(spec);
  write_raw_csv(res1, raw1.path);
  write_summary_csv(res1, sum1.path);
  const ExperimentResult res2 = run_experiment(spec);
  write_raw_csv(res2, raw2.path);
  write_summary_csv(res2, sum2.path);

  const std::string raw = slurp(raw1.path);
  CHECK(raw == slurp(raw2.path));
  CHECK(slurp(sum1.path) == slurp(sum2.path));

  // shape: header plus one row per (point, replicate, estimator)
  const long long rows = std::count(raw.begin(), raw.end(), '\n');
  CHECK(rows == 1 + 2 * spec.reps * kNumEstimators);
  CHECK(raw.rfind("setting,sweep_param,sweep_value,rep,estimator,estimate,"
                  "true_tte\n",
                  0) == 0);
}

TEST_CASE("config files parse into specs") {
  testutil::TempFile f("harness_config.cfg");
  {
    std::ofstream out(f.path);
    out << "# comment line\n"
        << "setting = SRGG-b2\n"
        << "n = 120\n"
        << "p = 0.4   # trailing comment\n"
        << "r = 1.5\n"
        << "rho = 0.75\n"
        << "reps = 9\n"
        << "seed = 77\n"
        << "sigma = 0.05\n"
        << "d_x = 2\n"
        << "psi = 1,0.5,0.5,2\n"
        << "diag_c = 0.8\n"
        << "theta_true = 0.5,-0.5\n"
        << "mse_normalization = squared\n"
        << "fix_population = true\n"
        << "sweep_param = n\n"
        << "sweep_values = 100,200\n"
        << "sigma_schedule = 0.05,0.04\n";
  }
  const ExperimentSpec spec = parse_config(f.path);
  CHECK_NOTHROW(spec.validate());
  CHECK(spec.setting == Setting::kSrggB2);
  CHECK(spec.n == 120);
  CHECK(spec.p == 0.4);
  CHECK(spec.r == 1.5);
  CHECK(spec.rho == 0.75);
  CHECK(spec.reps == 9);
  CHECK(spec.seed == 77);
  CHECK(spec.sigma == 0.05);
  CHECK(spec.d_x == 2);
  CHECK(spec.psi(0, 1) == 0.5);
  CHECK(spec.psi(1, 1) == 2.0);
  CHECK(spec.diag_c == 0.8);
  CHECK(spec.theta_true(1) == -0.5);
  CHECK(spec.mse_normalization == MseNormalization::kSquared);
  CHECK(spec.fix_population);
  CHECK(spec.sweep_param == "n");
  CHECK(spec.sweep_values == std::vector<double>{100.0, 200.0});
  CHECK(spec.sigma_schedule == std::vector<double>{0.05, 0.04});
}

TEST_CASE("config parsing rejects malformed input") {
  ExperimentSpec spec;
  CHECK_THROWS_AS(apply_override(spec, "banana", "1"), std::invalid_argument);
  CHECK_THROWS_AS(apply_override(spec, "n", "ten"), std::invalid_argument);
  CHECK_THROWS_AS(apply_override(spec, "n", "0"), std::invalid_argument);
  CHECK_THROWS_AS(apply_override(spec, "psi", "1,2,3"),
                  std::invalid_argument);  // not square
  CHECK_THROWS_AS(apply_override(spec, "fix_population", "maybe"),
                  std::invalid_argument);
  CHECK_THROWS_AS(apply_override(spec, "mse_normalization", "rms"),
                  std::invalid_argument);

  testutil::TempFile f("harness_bad.cfg");
  {
    std::ofstream out(f.path);
    out << "n 40\n";  // no equals sign
  }
  CHECK_THROWS_AS(parse_config(f.path), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("no_such_file.cfg"), std::invalid_argument);

  // "none" clears the sweep, "auto" restores the degree-targeting default
  apply_override(spec, "sweep_param", "none");
  CHECK(spec.sweep_param.empty());
  apply_override(spec, "p_edge", "0.1");
  CHECK(spec.p_edge == 0.1);
  apply_override(spec, "p_edge", "auto");
  CHECK(spec.p_edge < 0.0);
}

TEST_CASE("provenance text resolves every default") {
  const ExperimentSpec spec = tiny_spec();
  const std::string text = provenance_text(spec);
  CHECK(text.find("setting = ER-b1") != std::string::npos);
  CHECK(text.find("n = 30") != std::string::npos);
  CHECK(text.find("p_edge = auto (10/n)") != std::string::npos);
  CHECK(text.find("psi = identity") != std::string::npos);
  CHECK(text.find("theta_true = 1,1") != std::string::npos);
  CHECK(text.find("estimators = DM,Lin,SNIPE,Reg-SNIPE,VIM-SNIPE") !=
        std::string::npos);
  CHECK(text == provenance_text(spec));
}

TEST_CASE("compact float formatting round trips") {
  for (double v : {0.0, 1.0, -2.5, 1.0 / 3.0, 1e-17, 123456.789}) {
    const std::string s = format_double(v);
    CHECK(std::stod(s) == v);
  }
}

}  // TEST_SUITE
