// Command-line front end: reproducible simulation runs, analytic-vs-exact
// validation sweeps, the worked three-unit example, and point estimation on
// user-supplied files.
#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "snipe/estimators.hpp"
#include "snipe/graph.hpp"
#include "snipe/moments.hpp"
#include "snipe/oracle.hpp"
#include "snipe/outcome_model.hpp"
#include "snipe/rng.hpp"
#include "snipe/simharness.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace snipe;

namespace {

constexpr double kTol = 1e-10;

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot open '" + path.string() +
                             "' for writing");
  out << content;
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

fs::path prepare_out_dir(const std::string& dir) {
  fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec)
    throw std::invalid_argument("cannot create output directory '" + dir +
                                "': " + ec.message());
  return p;
}

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(15) << v;
  return s.str();
}

// ---------------------------------------------------------------------------
// simulate

int cmd_simulate(const std::string& config_path, const std::string& out_dir,
                 const std::vector<std::string>& overrides) {
  ExperimentSpec spec = parse_config(config_path);
  for (const std::string& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0)
      throw std::invalid_argument("--set expects key=value, got '" + item +
                                  "'");
    apply_override(spec, item.substr(0, eq), item.substr(eq + 1));
  }
  spec.validate();
  const fs::path out = prepare_out_dir(out_dir);

  const ExperimentResult result = run_experiment(spec);
  write_raw_csv(result, (out / "raw.csv").string());
  write_summary_csv(result, (out / "summary.csv").string());
  std::string prov = "command = simulate\nconfig = " + config_path + "\n";
  for (const std::string& item : overrides) prov += "override = " + item + "\n";
  prov += provenance_text(spec);
  write_file(out / "provenance.txt", prov);

  std::cout << "wrote " << (out / "raw.csv").string() << "\n"
            << "wrote " << (out / "summary.csv").string() << "\n"
            << "wrote " << (out / "provenance.txt").string() << "\n\n";
  std::cout << std::left << std::setw(12) << "sweep" << std::setw(12)
            << "estimator" << std::setw(24) << "rel_bias" << std::setw(24)
            << "rel_mse" << "fails\n";
  for (const auto& point : result.points) {
    for (const auto& m : point.metrics) {
      std::cout << std::left << std::setw(12) << format_double(point.sweep_value)
                << std::setw(12) << m.estimator << std::setw(24)
                << format_double(m.rel_bias) << std::setw(24)
                << format_double(m.rel_mse) << m.n_fail << "\n";
    }
  }
  return 0;
}

// ---------------------------------------------------------------------------
// validate

struct CheckResult {
  std::string name;
  double max_error = 0.0;
  bool pass() const { return max_error <= kTol; }
};

// E[omega_i omega_i2 prod Z_s] for every unit, partner, and subset of one
// instance, via a single enumeration pass.
void check_pair_kernels(const RandomInstance& inst, CheckResult& gram_check) {
  const int n = inst.graph.n;
  const int beta = inst.model.beta;
  std::vector<std::vector<std::vector<int>>> subsets(n);
  std::vector<int> offset(n + 1, 0);
  for (int i = 0; i < n; ++i) {
    subsets[i] = neighbor_subsets(inst.graph, i, beta);
    offset[i + 1] = offset[i] + static_cast<int>(subsets[i].size()) * n;
  }
  const int dim = offset[n];
  const Eigen::VectorXd moments = exact_mean_vec(
      inst.model, inst.x, inst.design, dim,
      [&](const Dataset& ds) -> Eigen::VectorXd {
        const Eigen::VectorXd w = snipe_weights(ds);
        Eigen::VectorXd out(dim);
        for (int i = 0; i < n; ++i) {
          int at = offset[i];
          for (const auto& s : subsets[i]) {
            double ind = 1.0;
            for (int j : s) ind *= ds.z[j];
            for (int i2 = 0; i2 < n; ++i2) out(at++) = w(i) * w(i2) * ind;
          }
        }
        return out;
      });
  for (int i = 0; i < n; ++i) {
    int at = offset[i];
    for (const auto& s : subsets[i]) {
      for (int i2 = 0; i2 < n; ++i2) {
        const double analytic =
            vim_kernel(inst.graph, inst.design, beta, i, i2, s);
        gram_check.max_error =
            std::max(gram_check.max_error, std::abs(analytic - moments(at)));
        if (s.empty()) {
          const double gram = pair_gram(inst.graph, inst.design, beta, i, i2);
          gram_check.max_error =
              std::max(gram_check.max_error, std::abs(gram - moments(at)));
        }
        ++at;
      }
    }
  }
}

void check_weight_covariance_bounds(const Design& d, Rng& rng,
                                    CheckResult& check) {
  const int n = d.n();
  const double q_floor = 1.0 / (d.floor() * (1.0 - d.floor()));
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> s, sp, t, tp;
    for (int j = 0; j < n; ++j) {
      if (rng.uniform() < 0.4) s.push_back(j);
      if (rng.uniform() < 0.4) sp.push_back(j);
      if (rng.uniform() < 0.4) t.push_back(j);
      if (rng.uniform() < 0.4) tp.push_back(j);
    }
    MomentSpec joint, left, right;
    std::vector<int> inter, sym_diff, prime_union;
    for (int j = 0; j < n; ++j) {
      const bool in_s = std::binary_search(s.begin(), s.end(), j);
      const bool in_t = std::binary_search(t.begin(), t.end(), j);
      const int e = (in_s ? 1 : 0) + (in_t ? 1 : 0);
      if (e > 0) {
        joint.units.push_back(j);
        joint.wexp.push_back(e);
      }
      if (in_s && in_t) inter.push_back(j);
      if (in_s != in_t) sym_diff.push_back(j);
      if (std::binary_search(sp.begin(), sp.end(), j) ||
          std::binary_search(tp.begin(), tp.end(), j))
        prime_union.push_back(j);
    }
    joint.indicators = prime_union;
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
    const bool covered = std::includes(prime_union.begin(), prime_union.end(),
                                       sym_diff.begin(), sym_diff.end());
    const double upper =
        covered ? std::pow(q_floor, static_cast<double>(inter.size())) : 0.0;
    check.max_error = std::max(check.max_error, -cov);        // below zero
    check.max_error = std::max(check.max_error, cov - upper); // above bound
  }
}

int cmd_validate(int budget_n, int instances, std::uint64_t seed,
                 const std::string& out_dir, const std::string& json_path) {
  if (budget_n < 3 || budget_n > kEnumerationBudget)
    throw std::invalid_argument(
        "--budget-n must lie in [3, " +
        std::to_string(kEnumerationBudget) + "]");
  if (instances < 1)
    throw std::invalid_argument("--instances must be at least 1");
  const fs::path out = prepare_out_dir(out_dir);

  CheckResult unbiased{"unbiasedness"};
  CheckResult coef_unbiased{"coefficient-unbiasedness"};
  CheckResult decomposition{"variance-decomposition"};
  CheckResult gap{"closed-form-variance-gap"};
  CheckResult bound{"variance-upper-bound"};
  CheckResult cov_bounds{"weight-covariance-bounds"};
  CheckResult kernels{"pair-moment-kernels"};

  Rng rng(seed);
  const int cap = std::min(budget_n, 8);  // enumeration sweeps stay small
  for (int t = 0; t < instances; ++t) {
    RandomInstanceOptions opt;
    opt.n = 4 + static_cast<int>(rng.uniform() * (cap - 3));
    opt.beta = 1 + t % 2;
    opt.d_x = 2;
    const RandomInstance inst = make_random_instance(opt, rng);
    const double tte = true_tte(inst.model);

    // exact mean of the unadjusted and a fixed-theta adjusted estimator
    const ExactMoments plain =
        exact_moments(inst.model, inst.x, inst.design, [](const Dataset& ds) {
          return estimate_snipe(ds).estimate;
        });
    unbiased.max_error =
        std::max(unbiased.max_error, std::abs(plain.mean - tte));
    Eigen::VectorXd theta(2);
    theta << 2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0;
    const auto adjusted = [&theta](const Dataset& ds) {
      return estimate_tte_theta(ds, theta).estimate;
    };
    const ExactMoments adj =
        exact_moments(inst.model, inst.x, inst.design, adjusted);
    unbiased.max_error = std::max(unbiased.max_error, std::abs(adj.mean - tte));

    // exact mean of every per-coefficient estimate
    for (int i = 0; i < inst.graph.n; ++i) {
      const auto subsets = neighbor_subsets(inst.graph, i, inst.model.beta);
      const int dim = static_cast<int>(subsets.size());
      const Eigen::VectorXd means = exact_mean_vec(
          inst.model, inst.x, inst.design, dim,
          [i, dim](const Dataset& ds) -> Eigen::VectorXd {
            const std::vector<double> a = alpha_hat_unit(ds, i);
            return Eigen::Map<const Eigen::VectorXd>(a.data(), dim);
          });
      for (int k = 0; k < dim; ++k)
        coef_unbiased.max_error =
            std::max(coef_unbiased.max_error,
                     std::abs(means(k) - inst.model.alpha(i, subsets[k])));
    }

    // both analytic variance splits against the enumerated variance
    const double enumerated =
        exact_moments(inst.model, inst.x, inst.design, adjusted).variance;
    const auto [second_order, theta_terms] =
        variance_decomposition(inst.model, inst.x, inst.design, theta);
    decomposition.max_error =
        std::max(decomposition.max_error,
                 std::abs(second_order + theta_terms - enumerated));
    const auto [v_var, v_cov] =
        v_var_v_cov(inst.model, inst.x, inst.design, theta);
    decomposition.max_error = std::max(
        decomposition.max_error, std::abs(v_var + v_cov - enumerated));

    // upper bound must dominate, and every own-weight second moment must sit
    // inside its bracket
    const double exact_var =
        analytic_variance(inst.model, inst.x, inst.design, theta);
    bound.max_error = std::max(
        bound.max_error,
        exact_var - variance_upper_bound(inst.model, inst.x, inst.design, theta));
    const auto [d_in, d_out] = max_degrees(inst.graph);
    (void)d_out;
    const double floor_p = inst.design.floor();
    const double level = std::exp(1.0) * d_in /
                         (inst.model.beta * floor_p * (1.0 - floor_p));
    const double m_upper =
        std::pow(level, static_cast<double>(inst.model.beta));
    for (int i = 0; i < inst.graph.n; ++i) {
      const double m_ii =
          pair_gram(inst.graph, inst.design, inst.model.beta, i, i);
      bound.max_error = std::max(bound.max_error, 4.0 - m_ii);
      bound.max_error = std::max(bound.max_error, m_ii - m_upper);
    }

    check_weight_covariance_bounds(inst.design, rng, cov_bounds);
    check_pair_kernels(inst, kernels);
  }

  // the closed-form gap needs first-order models under one shared p
  for (int t = 0; t < instances; ++t) {
    RandomInstanceOptions opt;
    opt.n = 4 + static_cast<int>(rng.uniform() * (cap - 3));
    opt.beta = 1;
    opt.d_x = 2;
    opt.equal_p = true;
    const RandomInstance inst = make_random_instance(opt, rng);
    const Eigen::VectorXd theta =
        theta_reg_population(inst.model, inst.x, inst.design);
    const double var0 =
        exact_moments(inst.model, inst.x, inst.design, [](const Dataset& ds) {
          return estimate_snipe(ds).estimate;
        }).variance;
    const double var_theta =
        exact_moments(inst.model, inst.x, inst.design,
                      [&theta](const Dataset& ds) {
                        return estimate_tte_theta(ds, theta).estimate;
                      })
            .variance;
    gap.max_error = std::max(
        gap.max_error,
        std::abs(closed_form_variance_gap(inst.model, inst.x, inst.design,
                                          theta) -
                 (var0 - var_theta)));
  }

  const std::vector<CheckResult> checks = {
      unbiased, coef_unbiased, decomposition, gap, bound, cov_bounds, kernels};
  bool all_pass = true;
  std::ostringstream report;
  report << "analytic moment engine vs exhaustive enumeration\n"
         << "instances = " << instances << ", budget_n = " << budget_n
         << ", seed = " << seed << ", tolerance = " << kTol << "\n\n"
         << std::left << std::setw(30) << "check" << std::setw(26)
         << "max_error" << "status\n";
  json jchecks = json::array();
  for (const CheckResult& c : checks) {
    all_pass = all_pass && c.pass();
    report << std::left << std::setw(30) << c.name << std::setw(26)
           << fmt(c.max_error) << (c.pass() ? "PASS" : "FAIL") << "\n";
    jchecks.push_back(
        {{"name", c.name}, {"max_error", c.max_error}, {"pass", c.pass()}});
  }
  report << "\noverall: " << (all_pass ? "PASS" : "FAIL") << "\n";
  std::cout << report.str();

  write_file(out / "validate_report.txt", report.str());
  const json summary = {{"instances", instances}, {"budget_n", budget_n},
                        {"seed", seed},           {"tolerance", kTol},
                        {"checks", jchecks},      {"all_pass", all_pass}};
  const std::string jp =
      json_path.empty() ? (out / "validate_report.json").string() : json_path;
  write_file(jp, summary.dump(2) + "\n");
  write_file(out / "validate_provenance.txt",
             "command = validate\nbudget_n = " + std::to_string(budget_n) +
                 "\ninstances = " + std::to_string(instances) +
                 "\nseed = " + std::to_string(seed) +
                 "\ntolerance = " + fmt(kTol) + "\n");
  return all_pass ? 0 : 1;
}

// ---------------------------------------------------------------------------
// toy

struct ToyRow {
  std::string name;
  double expected;
  double computed;
};

// The worked three-unit instance, optionally tiled into m independent
// identical blocks (units 3b, 3b+1 share a neighborhood, 3b+2 is isolated).
void build_toy(int m, Graph& g, InteractionModel& model, Eigen::MatrixXd& x,
               Design& d) {
  const int n = 3 * m;
  g.n = n;
  g.in_neighbors.assign(n, {});
  x.resize(n, 1);
  model.beta = 1;
  model.coef.assign(n, {});
  for (int b = 0; b < m; ++b) {
    const int o = 3 * b;
    g.in_neighbors[o] = {o, o + 1};
    g.in_neighbors[o + 1] = {o, o + 1};
    g.in_neighbors[o + 2] = {o + 2};
    x(o, 0) = 0.5;
    x(o + 1, 0) = 0.0;
    x(o + 2, 0) = -0.5;
  }
  model.graph = g;
  for (int b = 0; b < m; ++b) {
    const int o = 3 * b;
    model.set_alpha(o, {}, 0.0);
    model.set_alpha(o, {o}, 1.0);
    model.set_alpha(o, {o + 1}, 1.0);
    model.set_alpha(o + 1, {}, -2.0);
    model.set_alpha(o + 1, {o}, 1.0);
    model.set_alpha(o + 1, {o + 1}, 1.0);
    model.set_alpha(o + 2, {}, -0.5);
    model.set_alpha(o + 2, {o + 2}, 1.0);
  }
  d = Design::constant(n, 0.5);
}

int cmd_toy(const std::vector<double>& extra_thetas, int groups,
            std::uint64_t seed, const std::string& out_dir) {
  const fs::path out = prepare_out_dir(out_dir);
  std::ostringstream prov;
  prov << "command = toy\nseed = " << seed << "\ngroups = " << groups << "\n";
  for (double t : extra_thetas) prov << "theta = " << fmt(t) << "\n";
  write_file(out / "toy_provenance.txt", prov.str());

  Graph g;
  InteractionModel model;
  Eigen::MatrixXd x;
  Design d;

  if (groups > 0) {
    // tiled mode: blocks are independent, so the analytic engine gives the
    // exact law at any m
    build_toy(groups, g, model, x, d);
    const Eigen::VectorXd theta_r = theta_reg_population(model, x, d);
    const Eigen::VectorXd theta_v = theta_vim_population(model, x, d);
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(1);
    const double var_snipe = analytic_variance(model, x, d, zero);
    const double var_reg = analytic_variance(model, x, d, theta_r);
    const double var_vim = analytic_variance(model, x, d, theta_v);
    Rng rng(seed);
    int dominated = 0;
    const int trials = 20;
    for (int k = 0; k < trials; ++k) {
      Eigen::VectorXd theta(1);
      theta << 6.0 * rng.uniform() - 3.0;
      if (var_vim <= analytic_variance(model, x, d, theta) + 1e-12)
        ++dominated;
    }
    const bool vim_ok = var_vim <= var_snipe + 1e-12;
    const bool reg_ok = var_reg > var_snipe;
    const bool dom_ok = dominated == trials;
    std::cout << "replicated blocks m = " << groups << "\n"
              << "  Var(SNIPE)     = " << fmt(var_snipe) << "\n"
              << "  Var(Reg-SNIPE) = " << fmt(var_reg) << "  (must exceed SNIPE: "
              << (reg_ok ? "PASS" : "FAIL") << ")\n"
              << "  Var(VIM-SNIPE) = " << fmt(var_vim)
              << "  (must not exceed SNIPE: " << (vim_ok ? "PASS" : "FAIL")
              << ")\n"
              << "  fixed-theta alternatives dominated: " << dominated << "/"
              << trials << " (" << (dom_ok ? "PASS" : "FAIL") << ")\n";
    return (vim_ok && reg_ok && dom_ok) ? 0 : 1;
  }

  build_toy(1, g, model, x, d);
  const auto snipe_stat = [](const Dataset& ds) {
    return estimate_snipe(ds).estimate;
  };
  const ExactMoments base = exact_moments(model, x, d, snipe_stat);
  std::vector<ToyRow> rows;
  rows.push_back({"TTE", 5.0 / 3.0, base.mean});
  rows.push_back({"Var(SNIPE)", 16.0 / 9.0, base.variance});
  std::vector<std::pair<std::string, double>> thetas = {
      {"1", 1.0}, {"4/3", 4.0 / 3.0}, {"2", 2.0}};
  for (double t : extra_thetas) thetas.emplace_back(fmt(t), t);
  for (const auto& [label, t] : thetas) {
    Eigen::VectorXd theta(1);
    theta << t;
    const ExactMoments m = exact_moments(
        model, x, d, [&theta](const Dataset& ds) {
          return estimate_tte_theta(ds, theta).estimate;
        });
    rows.push_back({"Var(TTE(" + label + "))", 16.0 / 9.0 + t * t / 3.0,
                    m.variance});
  }
  rows.push_back(
      {"theta_Reg", 4.0 / 3.0, theta_reg_population(model, x, d)(0)});
  rows.push_back({"theta_VIM", 0.0, theta_vim_population(model, x, d)(0)});
  Eigen::VectorXd zero(1), treg(1);
  zero << 0.0;
  treg << 4.0 / 3.0;
  const auto [vv0, vc0] = v_var_v_cov(model, x, d, zero);
  const auto [vvr, vcr] = v_var_v_cov(model, x, d, treg);
  rows.push_back({"V_Var(0)", 8.0 / 3.0, vv0});
  rows.push_back({"V_Cov(0)", -8.0 / 9.0, vc0});
  rows.push_back({"V_Var(theta_Reg)", 56.0 / 27.0, vvr});
  rows.push_back({"V_Cov(theta_Reg)", 8.0 / 27.0, vcr});

  bool all_pass = true;
  std::cout << std::left << std::setw(26) << "quantity" << std::setw(22)
            << "expected" << std::setw(22) << "computed" << "status\n";
  for (const ToyRow& row : rows) {
    const bool ok = std::abs(row.computed - row.expected) <= kTol;
    all_pass = all_pass && ok;
    std::cout << std::left << std::setw(26) << row.name << std::setw(22)
              << fmt(row.expected) << std::setw(22) << fmt(row.computed)
              << (ok ? "PASS" : "FAIL") << "\n";
  }
  std::cout << "\noverall: " << (all_pass ? "PASS" : "FAIL") << "\n";
  if (!all_pass) {
    for (const ToyRow& row : rows)
      if (std::abs(row.computed - row.expected) > kTol)
        std::cerr << "mismatch: " << row.name << " expected "
                  << fmt(row.expected) << " got " << fmt(row.computed) << "\n";
  }
  return all_pass ? 0 : 1;
}

// ---------------------------------------------------------------------------
// estimate

struct LoadedData {
  std::vector<int> z;
  Eigen::VectorXd y;
  Eigen::MatrixXd x;
  std::vector<double> p;  // empty when the file has no p column
};

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) {
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    fields.push_back(b == std::string::npos
                         ? std::string()
                         : field.substr(b, e - b + 1));
  }
  return fields;
}

LoadedData load_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read dataset '" + path + "'");
  std::string line;
  if (!std::getline(in, line))
    throw std::invalid_argument("dataset '" + path + "' is empty");
  const std::vector<std::string> header = split_csv_line(line);
  if (header.size() < 3 || header[0] != "unit" || header[1] != "z" ||
      header[2] != "y")
    throw std::invalid_argument(
        "dataset header must start with unit,z,y (then x1..xd and optionally "
        "p)");
  int d_x = 0;
  bool has_p = false;
  for (std::size_t c = 3; c < header.size(); ++c) {
    if (header[c] == "p") {
      if (c + 1 != header.size())
        throw std::invalid_argument("dataset column p must come last");
      has_p = true;
    } else if (header[c] == "x" + std::to_string(d_x + 1)) {
      ++d_x;
    } else {
      throw std::invalid_argument("unexpected dataset column '" + header[c] +
                                  "'");
    }
  }

  struct Row {
    int unit;
    int z;
    double y;
    std::vector<double> x;
    double p;
  };
  std::vector<Row> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> f = split_csv_line(line);
    if (f.size() != header.size())
      throw std::invalid_argument("dataset line " + std::to_string(line_no) +
                                  " has " + std::to_string(f.size()) +
                                  " fields, expected " +
                                  std::to_string(header.size()));
    try {
      Row row;
      row.unit = std::stoi(f[0]);
      row.z = std::stoi(f[1]);
      row.y = std::stod(f[2]);
      for (int c = 0; c < d_x; ++c) row.x.push_back(std::stod(f[3 + c]));
      row.p = has_p ? std::stod(f[3 + d_x]) : -1.0;
      rows.push_back(std::move(row));
    } catch (const std::exception&) {
      throw std::invalid_argument("dataset line " + std::to_string(line_no) +
                                  " does not parse");
    }
  }
  const int n = static_cast<int>(rows.size());
  if (n == 0) throw std::invalid_argument("dataset has no rows");
  std::sort(rows.begin(), rows.end(),
            [](const Row& a, const Row& b) { return a.unit < b.unit; });
  for (int i = 0; i < n; ++i)
    if (rows[i].unit != i)
      throw std::invalid_argument(
          "dataset units must be exactly 0.." + std::to_string(n - 1));

  LoadedData data;
  data.z.resize(n);
  data.y.resize(n);
  data.x.resize(n, d_x);
  if (has_p) data.p.resize(n);
  for (int i = 0; i < n; ++i) {
    data.z[i] = rows[i].z;
    data.y(i) = rows[i].y;
    for (int c = 0; c < d_x; ++c) data.x(i, c) = rows[i].x[c];
    if (has_p) data.p[i] = rows[i].p;
  }
  return data;
}

int cmd_estimate(const std::string& graph_path, const std::string& data_path,
                 double p_flag, int beta, std::string which,
                 const std::string& out_dir) {
  const fs::path out = prepare_out_dir(out_dir);
  const Graph graph = load_graph(graph_path);
  LoadedData data = load_dataset_csv(data_path);
  if (static_cast<int>(data.z.size()) != graph.n)
    throw std::invalid_argument("dataset has " +
                                std::to_string(data.z.size()) +
                                " units but the graph has " +
                                std::to_string(graph.n));
  Design design;
  if (!data.p.empty()) {
    design.p = data.p;
  } else if (p_flag > 0.0) {
    design = Design::constant(graph.n, p_flag);
  } else {
    throw std::invalid_argument(
        "treatment probabilities missing: add a p column or pass --p");
  }

  std::transform(which.begin(), which.end(), which.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  const bool all = which == "all";
  const auto needs_x = [](const std::string& name) {
    return name == "lin" || name == "reg-snipe" || name == "vim-snipe";
  };
  if (!all && needs_x(which) && data.x.cols() == 0)
    throw std::invalid_argument("estimator '" + which +
                                "' needs covariate columns x1..xd");

  const Dataset ds(std::move(data.z), std::move(data.y), std::move(data.x),
                   graph, design, beta);
  std::vector<EstimateReport> reports;
  const auto run = [&](const std::string& name, auto&& fn) {
    if (!all && which != name) return;
    if (ds.d_x() == 0 && needs_x(name)) return;  // skipped under --estimator all
    reports.push_back(fn());
  };
  run("dm", [&] { return dm_estimate(ds); });
  run("lin", [&] { return lin_estimate(ds); });
  run("snipe", [&] { return estimate_snipe(ds); });
  run("reg-snipe", [&] { return estimate_reg(ds); });
  run("vim-snipe", [&] { return estimate_vim(ds); });
  if (reports.empty())
    throw std::invalid_argument(
        "unknown estimator '" + which +
        "' (expected dm, lin, snipe, reg-snipe, vim-snipe, or all)");

  std::ostringstream prov;
  prov << "command = estimate\ngraph = " << graph_path
       << "\ndata = " << data_path << "\nbeta = " << beta << "\np = "
       << (data.p.empty() ? fmt(p_flag) : std::string("per-unit column"))
       << "\nestimator = " << which << "\n";
  write_file(out / "estimate_provenance.txt", prov.str());

  std::cout << std::left << std::setw(12) << "estimator" << std::setw(22)
            << "estimate" << "theta\n";
  for (const EstimateReport& rep : reports) {
    std::cout << std::left << std::setw(12) << rep.estimator << std::setw(22)
              << fmt(rep.estimate);
    if (rep.theta) {
      for (int k = 0; k < rep.theta->size(); ++k)
        std::cout << (k ? "," : "") << fmt((*rep.theta)(k));
    } else {
      std::cout << "-";
    }
    std::cout << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Design-based total treatment effect estimation under neighborhood "
      "interference"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads,
                 "worker thread count (default: SNIPE_THREADS or the OpenMP "
                 "runtime's choice)")
      ->envname("SNIPE_THREADS");

  auto* sim = app.add_subcommand(
      "simulate", "run a Monte Carlo experiment from a config file");
  std::string config_path, sim_out = ".";
  std::vector<std::string> overrides;
  sim->add_option("--config", config_path, "experiment config file")
      ->required()
      ->check(CLI::ExistingFile);
  sim->add_option("--out", sim_out, "output directory (default: .)");
  sim->add_option("--set", overrides, "key=value override (repeatable)");

  auto* val = app.add_subcommand(
      "validate",
      "check the analytic moment engine against exhaustive enumeration");
  int budget_n = 8, instances = 20;
  std::uint64_t val_seed = 2024;
  std::string val_out = ".", json_path;
  val->add_option("--budget-n", budget_n,
                  "largest instance size (enumeration over 2^n assignments)");
  val->add_option("--instances", instances, "random instances per sweep");
  val->add_option("--seed", val_seed, "sweep seed");
  val->add_option("--out", val_out, "output directory (default: .)");
  val->add_option("--json", json_path, "write the JSON summary here");

  auto* toy = app.add_subcommand(
      "toy", "verify the worked three-unit example against its exact values");
  std::vector<double> extra_thetas;
  int groups = 0;
  std::uint64_t toy_seed = 7;
  std::string toy_out = ".";
  toy->add_option("--theta", extra_thetas,
                  "extra adjustment coefficients to check (repeatable)");
  toy->add_option("--toy-groups", groups,
                  "tile the example into this many independent blocks and "
                  "compare estimator variances");
  toy->add_option("--seed", toy_seed, "seed for the fixed-theta alternatives");
  toy->add_option("--out", toy_out, "output directory (default: .)");

  auto* est = app.add_subcommand(
      "estimate", "point estimation on a user-supplied graph and dataset");
  std::string graph_path, data_path, which = "all", est_out = ".";
  double p_flag = -1.0;
  int beta = 1;
  est->add_option("--graph", graph_path, "graph file (header 'n N', lines 'j i')")
      ->required()
      ->check(CLI::ExistingFile);
  est->add_option("--data", data_path,
                  "dataset CSV with columns unit,z,y,x1..xd[,p]")
      ->required()
      ->check(CLI::ExistingFile);
  est->add_option("--p", p_flag,
                  "shared treatment probability (when the CSV has no p column)");
  est->add_option("--beta", beta, "interaction order (default 1)");
  est->add_option("--estimator", which,
                  "dm, lin, snipe, reg-snipe, vim-snipe, or all");
  est->add_option("--out", est_out, "output directory (default: .)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (threads > 0) omp_set_num_threads(threads);

  try {
    if (*sim) return cmd_simulate(config_path, sim_out, overrides);
    if (*val)
      return cmd_validate(budget_n, instances, val_seed, val_out, json_path);
    if (*toy) return cmd_toy(extra_thetas, groups, toy_seed, toy_out);
    if (*est)
      return cmd_estimate(graph_path, data_path, p_flag, beta, which, est_out);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
