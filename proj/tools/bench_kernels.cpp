// Timing harness for the hot kernels: the aggregated VIM gram/kernel path
// against the literal reference sums, and the OpenMP loops (assignment
// enumeration, replicate sweep) on one thread versus all available.
#include <omp.h>

#include <chrono>
#include <cmath>
#include <cstring>
#include <iomanip>
#include <iostream>
#include <string>

#include "snipe/estimators.hpp"
#include "snipe/graph.hpp"
#include "snipe/oracle.hpp"
#include "snipe/rng.hpp"
#include "snipe/simharness.hpp"

using namespace snipe;
using Clock = std::chrono::steady_clock;

namespace {

double seconds(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double>(b - a).count();
}

void print_row(const std::string& name, double base, double other,
               const std::string& base_label, const std::string& other_label,
               double max_diff) {
  std::cout << std::left << std::setw(34) << name << std::right
            << std::setw(10) << std::fixed << std::setprecision(4) << base
            << "s " << base_label << "  " << std::setw(10) << other << "s "
            << other_label << "  x" << std::setprecision(2) << (base / other);
  if (max_diff >= 0.0)
    std::cout << "  max|diff| = " << std::scientific << std::setprecision(2)
              << max_diff;
  std::cout << std::defaultfloat << "\n";
}

Dataset make_bench_dataset(int n, int beta, double edge_prob, Rng& rng) {
  Graph g = gen_erdos_renyi(n, edge_prob, rng);
  const int d_x = 3;
  Eigen::MatrixXd x(n, d_x);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < d_x; ++c) x(i, c) = rng.normal();
  x.rowwise() -= x.colwise().mean();
  Design design = Design::constant(n, 0.4);
  std::vector<int> z(n);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    z[i] = rng.bernoulli(0.4) ? 1 : 0;
    y(i) = rng.normal();
  }
  return Dataset(std::move(z), std::move(y), std::move(x), std::move(g),
                 std::move(design), beta);
}

void bench_theta_vim(bool quick) {
  Rng rng(11);
  // the reference route is quartic in neighborhood size per unit pair, so
  // the instance has to stay small for it to finish at all
  const int n = quick ? 20 : 36;
  const Dataset ds = make_bench_dataset(n, 2, quick ? 0.2 : 0.15, rng);

  const auto t0 = Clock::now();
  const Eigen::VectorXd fast = theta_vim(ds);
  const auto t1 = Clock::now();
  const Eigen::VectorXd slow = ref::theta_vim(ds);
  const auto t2 = Clock::now();
  print_row("theta_vim (n=" + std::to_string(n) + ", beta=2)",
            seconds(t1, t2), seconds(t0, t1), "reference", "aggregated",
            (fast - slow).cwiseAbs().maxCoeff());
}

void bench_enumeration(bool quick) {
  Rng rng(12);
  RandomInstanceOptions opt;
  opt.n = quick ? 12 : 18;
  opt.beta = 2;
  const RandomInstance inst = make_random_instance(opt, rng);
  const auto stat = [](const Dataset& ds) {
    return estimate_snipe(ds).estimate;
  };

  const int max_threads = omp_get_max_threads();
  omp_set_num_threads(1);
  const auto t0 = Clock::now();
  const ExactMoments serial = exact_moments(inst.model, inst.x, inst.design, stat);
  const auto t1 = Clock::now();
  omp_set_num_threads(max_threads);
  const auto t2 = Clock::now();
  const ExactMoments parallel =
      exact_moments(inst.model, inst.x, inst.design, stat);
  const auto t3 = Clock::now();
  const double diff = std::max(std::abs(serial.mean - parallel.mean),
                               std::abs(serial.variance - parallel.variance));
  print_row("enumeration (n=" + std::to_string(opt.n) + ", 2^n laws)",
            seconds(t0, t1), seconds(t2, t3), "1 thread ",
            std::to_string(max_threads) + " threads", diff);
}

void bench_replicates(bool quick) {
  ExperimentSpec spec;
  spec.setting = Setting::kErB1;
  spec.n = quick ? 300 : 1000;
  spec.reps = quick ? 12 : 60;
  spec.seed = 5;

  const int max_threads = omp_get_max_threads();
  omp_set_num_threads(1);
  const auto t0 = Clock::now();
  const ExperimentResult serial = run_experiment(spec);
  const auto t1 = Clock::now();
  omp_set_num_threads(max_threads);
  const auto t2 = Clock::now();
  const ExperimentResult parallel = run_experiment(spec);
  const auto t3 = Clock::now();
  double diff = 0.0;
  for (std::size_t r = 0; r < serial.points[0].replicates.size(); ++r)
    for (int e = 0; e < kNumEstimators; ++e) {
      const double a = serial.points[0].replicates[r].estimate[e];
      const double b = parallel.points[0].replicates[r].estimate[e];
      if (std::isfinite(a) || std::isfinite(b))
        diff = std::max(diff, std::abs(a - b));
    }
  print_row("replicate sweep (n=" + std::to_string(spec.n) + ", " +
                std::to_string(spec.reps) + " reps)",
            seconds(t0, t1), seconds(t2, t3), "1 thread ",
            std::to_string(max_threads) + " threads", diff);
}

}  // namespace

int main(int argc, char** argv) {
  bool quick = false;
  for (int i = 1; i < argc; ++i)
    if (std::strcmp(argv[i], "--quick") == 0) quick = true;

  std::cout << "hardware threads available: " << omp_get_max_threads()
            << (quick ? "  (quick mode)" : "") << "\n\n";
  bench_theta_vim(quick);
  bench_enumeration(quick);
  bench_replicates(quick);
  std::cout << "\nall kernel pairs agree when max|diff| ~ 1e-12 or below\n";
  return 0;
}
