#include "snipe/simharness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "snipe/graph.hpp"
#include "snipe/moments.hpp"

namespace snipe {
namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

double parse_real(const std::string& key, const std::string& value) {
  double out = 0.0;
  const char* end = value.data() + value.size();
  const auto res = std::from_chars(value.data(), end, out);
  if (res.ec != std::errc{} || res.ptr != end)
    throw std::invalid_argument("config: field '" + key +
                                "' expects a number, got '" + value + "'");
  return out;
}

long long parse_int(const std::string& key, const std::string& value) {
  long long out = 0;
  const char* end = value.data() + value.size();
  const auto res = std::from_chars(value.data(), end, out);
  if (res.ec != std::errc{} || res.ptr != end)
    throw std::invalid_argument("config: field '" + key +
                                "' expects an integer, got '" + value + "'");
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  const char* end = value.data() + value.size();
  const auto res = std::from_chars(value.data(), end, out);
  if (res.ec != std::errc{} || res.ptr != end)
    throw std::invalid_argument("config: field '" + key +
                                "' expects an unsigned integer, got '" +
                                value + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw std::invalid_argument("config: field '" + key +
                              "' expects true/false, got '" + value + "'");
}

std::vector<double> parse_list(const std::string& key,
                               const std::string& value) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= value.size()) {
    std::size_t comma = value.find(',', start);
    if (comma == std::string::npos) comma = value.size();
    const std::string item = trim(value.substr(start, comma - start));
    if (item.empty())
      throw std::invalid_argument("config: field '" + key +
                                  "' has an empty list entry");
    out.push_back(parse_real(key, item));
    start = comma + 1;
    if (comma == value.size()) break;
  }
  if (out.empty())
    throw std::invalid_argument("config: field '" + key + "' is empty");
  return out;
}

std::string format_list(const std::vector<double>& values) {
  std::string out;
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (k) out += ',';
    out += format_double(values[k]);
  }
  return out;
}

ExperimentSpec resolve_point(const ExperimentSpec& spec, std::size_t idx) {
  ExperimentSpec r = spec;
  r.sweep_param.clear();
  r.sweep_values.clear();
  r.sigma_schedule.clear();
  if (spec.sweep_param.empty()) return r;
  const double v = spec.sweep_values.at(idx);
  if (spec.sweep_param == "n")
    r.n = static_cast<int>(std::llround(v));
  else if (spec.sweep_param == "r")
    r.r = v;
  else if (spec.sweep_param == "p")
    r.p = v;
  else if (spec.sweep_param == "rho")
    r.rho = v;
  else if (spec.sweep_param == "sigma")
    r.sigma = v;
  else if (spec.sweep_param == "p_edge")
    r.p_edge = v;
  if (!spec.sigma_schedule.empty()) r.sigma = spec.sigma_schedule.at(idx);
  return r;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

}  // namespace

Setting parse_setting(const std::string& name) {
  if (name == "ER-b1") return Setting::kErB1;
  if (name == "ER-b2") return Setting::kErB2;
  if (name == "SRGG-b1") return Setting::kSrggB1;
  if (name == "SRGG-b2") return Setting::kSrggB2;
  throw std::invalid_argument(
      "unknown setting '" + name +
      "' (expected ER-b1, ER-b2, SRGG-b1, or SRGG-b2)");
}

std::string setting_name(Setting s) {
  switch (s) {
    case Setting::kErB1: return "ER-b1";
    case Setting::kErB2: return "ER-b2";
    case Setting::kSrggB1: return "SRGG-b1";
    case Setting::kSrggB2: return "SRGG-b2";
  }
  throw std::invalid_argument("setting_name: invalid setting");
}

int setting_beta(Setting s) {
  return (s == Setting::kErB2 || s == Setting::kSrggB2) ? 2 : 1;
}

bool setting_is_er(Setting s) {
  return s == Setting::kErB1 || s == Setting::kErB2;
}

void ExperimentSpec::validate() const {
  if (n < 1) throw std::invalid_argument("config: n must be at least 1");
  if (reps < 1) throw std::invalid_argument("config: reps must be at least 1");
  if (!(p > 0.0 && p < 1.0))
    throw std::invalid_argument("config: p must lie strictly inside (0, 1)");
  if (!(rho >= 0.0 && rho <= 1.0))
    throw std::invalid_argument("config: rho must lie in [0, 1]");
  if (!(r >= 0.0)) throw std::invalid_argument("config: r must be nonnegative");
  if (!(sigma > 0.0)) throw std::invalid_argument("config: sigma must be positive");
  if (p_edge >= 0.0 && p_edge > 1.0)
    throw std::invalid_argument("config: p_edge must lie in [0, 1]");
  if (d_x < 1) throw std::invalid_argument("config: d_x must be at least 1");
  if (psi.size() > 0 && (psi.rows() != d_x || psi.cols() != d_x))
    throw std::invalid_argument("config: psi must be a d_x x d_x matrix");
  if (theta_true.size() > 0 && theta_true.size() != d_x)
    throw std::invalid_argument("config: theta_true must have d_x entries");
  static const char* allowed[] = {"n", "r", "p", "rho", "sigma", "p_edge"};
  if (!sweep_param.empty()) {
    if (std::find_if(std::begin(allowed), std::end(allowed),
                     [&](const char* a) { return sweep_param == a; }) ==
        std::end(allowed))
      throw std::invalid_argument("config: sweep_param '" + sweep_param +
                                  "' is not sweepable");
    if (sweep_values.empty())
      throw std::invalid_argument("config: sweep_values must be nonempty");
    for (double v : sweep_values) {
      if (sweep_param == "n" &&
          (v < 1.0 || std::abs(v - std::llround(v)) > 1e-9))
        throw std::invalid_argument("config: sweep over n needs positive integers");
      if (sweep_param == "p" && !(v > 0.0 && v < 1.0))
        throw std::invalid_argument("config: sweep over p needs values in (0, 1)");
      if (sweep_param == "rho" && !(v >= 0.0 && v <= 1.0))
        throw std::invalid_argument("config: sweep over rho needs values in [0, 1]");
      if (sweep_param == "sigma" && !(v > 0.0))
        throw std::invalid_argument("config: sweep over sigma needs positive values");
      if (sweep_param == "p_edge" && !(v >= 0.0 && v <= 1.0))
        throw std::invalid_argument("config: sweep over p_edge needs values in [0, 1]");
      if (sweep_param == "r" && !(v >= 0.0))
        throw std::invalid_argument("config: sweep over r needs nonnegative values");
    }
  } else if (!sweep_values.empty()) {
    throw std::invalid_argument("config: sweep_values given without sweep_param");
  }
  if (!sigma_schedule.empty()) {
    if (sweep_param.empty())
      throw std::invalid_argument("config: sigma_schedule requires a sweep");
    if (sigma_schedule.size() != sweep_values.size())
      throw std::invalid_argument(
          "config: sigma_schedule must match sweep_values in length");
    for (double v : sigma_schedule)
      if (!(v > 0.0))
        throw std::invalid_argument("config: sigma_schedule needs positive values");
  }
}

Eigen::MatrixXd ExperimentSpec::resolved_psi() const {
  return psi.size() > 0 ? psi : Eigen::MatrixXd::Identity(d_x, d_x);
}

Eigen::VectorXd ExperimentSpec::resolved_theta_true() const {
  return theta_true.size() > 0 ? theta_true : Eigen::VectorXd::Ones(d_x);
}

double ExperimentSpec::resolved_p_edge() const {
  if (p_edge >= 0.0) return p_edge;
  return std::min(1.0, 10.0 / static_cast<double>(n));
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> gen_covariates(int n, int d_x,
                                                           double rho,
                                                           Rng& rng) {
  if (!(rho >= 0.0 && rho <= 1.0))
    throw std::invalid_argument("gen_covariates: rho must lie in [0, 1]");
  Eigen::MatrixXd x_obs(n, d_x), x_unobs(n, d_x);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < d_x; ++c) x_obs(i, c) = rng.normal();
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < d_x; ++c) x_unobs(i, c) = rng.normal();
  x_obs.rowwise() -= x_obs.colwise().mean();
  x_unobs.rowwise() -= x_unobs.colwise().mean();
  Eigen::MatrixXd x_true =
      rho * x_obs + std::sqrt(1.0 - rho * rho) * x_unobs;
  return {std::move(x_obs), std::move(x_true)};
}

Population make_population(const ExperimentSpec& spec,
                           std::uint64_t sweep_index, int rep) {
  Population pop;
  const int beta = setting_beta(spec.setting);
  Rng cov_rng = make_stream(spec.seed, sweep_index, rep,
                            StreamPurpose::kCovariates);
  auto [x_obs, x_true] = gen_covariates(spec.n, spec.d_x, spec.rho, cov_rng);
  pop.x_obs = std::move(x_obs);
  pop.x_true = std::move(x_true);
  Rng graph_rng =
      make_stream(spec.seed, sweep_index, rep, StreamPurpose::kGraph);
  pop.graph = setting_is_er(spec.setting)
                  ? gen_erdos_renyi(spec.n, spec.resolved_p_edge(), graph_rng)
                  : gen_soft_rgg(pop.x_true, spec.sigma, graph_rng);
  Rng coef_rng =
      make_stream(spec.seed, sweep_index, rep, StreamPurpose::kCoefficients);
  SimOutcomeSpec os;
  os.alpha0.resize(spec.n);
  for (double& a : os.alpha0) a = coef_rng.uniform();
  const Eigen::MatrixXd psi = spec.resolved_psi();
  os.alpha_linear = gen_alpha_linear(pop.graph, pop.x_true, psi, spec.diag_c,
                                     spec.r, nullptr, nullptr, coef_rng);
  if (beta == 2)
    os.alpha_quad = gen_alpha_quad(pop.graph, pop.x_true, spec.diag_c, spec.r,
                                   nullptr, nullptr, coef_rng);
  os.theta_true = spec.resolved_theta_true();
  os.x_true = pop.x_true;
  pop.model = build_sim_outcome(os, beta, pop.graph, &pop.degenerate_units);
  pop.design = Design::constant(spec.n, spec.p);
  pop.tte = true_tte(pop.model);
  return pop;
}

ReplicateResult run_replicate(const ExperimentSpec& spec,
                              std::uint64_t sweep_index, int rep,
                              const Population* fixed, const VimPlan* plan) {
  ReplicateResult res;
  res.rep = rep;
  res.estimate.fill(kNan);
  res.ok.fill(false);
  res.true_tte = kNan;
  try {
    const Population* pop = fixed;
    Population own;
    if (!pop) {
      own = make_population(spec, sweep_index, rep);
      pop = &own;
    }
    res.true_tte = pop->tte;
    res.degenerate_units = pop->degenerate_units;
    Rng z_rng =
        make_stream(spec.seed, sweep_index, rep, StreamPurpose::kTreatment);
    std::vector<int> z(spec.n);
    for (int i = 0; i < spec.n; ++i) z[i] = z_rng.bernoulli(spec.p) ? 1 : 0;
    Eigen::VectorXd y = evaluate_potential(pop->model, z);
    const Dataset ds(std::move(z), std::move(y), pop->x_obs, pop->graph,
                     pop->design, setting_beta(spec.setting));
    const auto guard = [&](int k, auto&& fn) {
      try {
        res.estimate[k] = fn();
        res.ok[k] = true;
      } catch (const std::exception&) {
        res.estimate[k] = kNan;
        res.ok[k] = false;
      }
    };
    guard(0, [&] { return dm_estimate(ds).estimate; });
    guard(1, [&] { return lin_estimate(ds).estimate; });
    guard(2, [&] { return estimate_snipe(ds).estimate; });
    guard(3, [&] { return estimate_reg(ds).estimate; });
    guard(4, [&] {
      return (plan ? estimate_vim(ds, *plan) : estimate_vim(ds)).estimate;
    });
  } catch (const std::exception&) {
    // population-level failure: every cell stays marked failed
  }
  return res;
}

std::vector<EstimatorMetrics> compute_metrics(
    const std::vector<ReplicateResult>& results, MseNormalization norm) {
  if (results.empty())
    throw std::invalid_argument("compute_metrics: no replicates");
  std::vector<EstimatorMetrics> out(kNumEstimators);
  for (int k = 0; k < kNumEstimators; ++k) {
    EstimatorMetrics& m = out[k];
    m.estimator = kEstimatorNames[k];
    double sum_est = 0.0, sum_tte = 0.0, sum_sq = 0.0;
    int n_ok = 0;
    for (const auto& r : results) {
      if (!r.ok[k]) {
        ++m.n_fail;
        continue;
      }
      if (r.true_tte == 0.0)
        throw std::runtime_error(
            "compute_metrics: true TTE is zero; relative metrics undefined");
      ++n_ok;
      sum_est += r.estimate[k];
      sum_tte += r.true_tte;
      const double err = r.estimate[k] - r.true_tte;
      sum_sq += norm == MseNormalization::kAbs
                    ? err * err / std::abs(r.true_tte)
                    : err * err / (r.true_tte * r.true_tte);
    }
    if (n_ok == 0) {
      m.rel_bias = kNan;
      m.rel_mse = kNan;
      continue;
    }
    const double mean_tte = sum_tte / n_ok;
    m.rel_bias = (sum_est / n_ok - mean_tte) / mean_tte;
    m.rel_mse = sum_sq / n_ok;
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  ExperimentResult out;
  out.base = spec;
  const std::size_t npoints =
      spec.sweep_param.empty() ? 1 : spec.sweep_values.size();
  for (std::size_t sp = 0; sp < npoints; ++sp) {
    SweepPointResult point;
    point.resolved = resolve_point(spec, sp);
    point.sweep_value = spec.sweep_param.empty() ? 0.0 : spec.sweep_values[sp];
    point.replicates.assign(spec.reps, ReplicateResult{});
    Population fixed;
    std::unique_ptr<VimPlan> plan;
    const Population* fixed_ptr = nullptr;
    const VimPlan* plan_ptr = nullptr;
    if (spec.fix_population) {
      fixed = make_population(point.resolved, sp, 0);
      plan = std::make_unique<VimPlan>(fixed.graph, fixed.design,
                                       setting_beta(spec.setting), fixed.x_obs);
      fixed_ptr = &fixed;
      plan_ptr = plan.get();
    }
#pragma omp parallel for schedule(dynamic)
    for (int rep = 0; rep < spec.reps; ++rep)
      point.replicates[rep] =
          run_replicate(point.resolved, sp, rep, fixed_ptr, plan_ptr);
    point.metrics = compute_metrics(point.replicates, spec.mse_normalization);
    if (spec.fix_population) {
      point.degenerate_total = fixed.degenerate_units;
    } else {
      for (const auto& r : point.replicates)
        point.degenerate_total += r.degenerate_units;
    }
    out.points.push_back(std::move(point));
  }
  return out;
}

std::string format_double(double v) {
  std::array<char, 64> buf;
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

void write_raw_csv(const ExperimentResult& result, const std::string& path) {
  std::string out = "setting,sweep_param,sweep_value,rep,estimator,estimate,true_tte\n";
  const std::string setting = setting_name(result.base.setting);
  const std::string sweep =
      result.base.sweep_param.empty() ? "none" : result.base.sweep_param;
  out.reserve(out.size() +
              64 * kNumEstimators * result.base.reps * result.points.size());
  for (const auto& point : result.points) {
    const std::string sv = format_double(point.sweep_value);
    for (const auto& rep : point.replicates) {
      const std::string tte =
          std::isnan(rep.true_tte) ? std::string() : format_double(rep.true_tte);
      for (int k = 0; k < kNumEstimators; ++k) {
        out += setting;
        out += ',';
        out += sweep;
        out += ',';
        out += sv;
        out += ',';
        out += std::to_string(rep.rep);
        out += ',';
        out += kEstimatorNames[k];
        out += ',';
        if (rep.ok[k]) out += format_double(rep.estimate[k]);
        out += ',';
        out += tte;
        out += '\n';
      }
    }
  }
  write_text_file(path, out);
}

void write_summary_csv(const ExperimentResult& result,
                       const std::string& path) {
  std::string out =
      "setting,sweep_param,sweep_value,estimator,rel_bias,rel_mse,n_fail\n";
  const std::string setting = setting_name(result.base.setting);
  const std::string sweep =
      result.base.sweep_param.empty() ? "none" : result.base.sweep_param;
  for (const auto& point : result.points) {
    const std::string sv = format_double(point.sweep_value);
    for (const auto& m : point.metrics) {
      out += setting;
      out += ',';
      out += sweep;
      out += ',';
      out += sv;
      out += ',';
      out += m.estimator;
      out += ',';
      out += format_double(m.rel_bias);
      out += ',';
      out += format_double(m.rel_mse);
      out += ',';
      out += std::to_string(m.n_fail);
      out += '\n';
    }
  }
  write_text_file(path, out);
}

ExperimentSpec parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot read '" + path + "'");
  ExperimentSpec spec;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                  " is not 'key = value'");
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty() || value.empty())
      throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                  " is missing a key or value");
    apply_override(spec, key, value);
  }
  return spec;
}

void apply_override(ExperimentSpec& spec, const std::string& key,
                    const std::string& value) {
  if (key == "setting") {
    spec.setting = parse_setting(value);
  } else if (key == "n") {
    const long long v = parse_int(key, value);
    if (v < 1) throw std::invalid_argument("config: n must be at least 1");
    spec.n = static_cast<int>(v);
  } else if (key == "p") {
    spec.p = parse_real(key, value);
  } else if (key == "r") {
    spec.r = parse_real(key, value);
  } else if (key == "rho") {
    spec.rho = parse_real(key, value);
  } else if (key == "reps") {
    const long long v = parse_int(key, value);
    if (v < 1) throw std::invalid_argument("config: reps must be at least 1");
    spec.reps = static_cast<int>(v);
  } else if (key == "seed") {
    spec.seed = parse_u64(key, value);
  } else if (key == "sigma") {
    spec.sigma = parse_real(key, value);
  } else if (key == "p_edge") {
    spec.p_edge = value == "auto" ? -1.0 : parse_real(key, value);
  } else if (key == "d_x") {
    const long long v = parse_int(key, value);
    if (v < 1) throw std::invalid_argument("config: d_x must be at least 1");
    spec.d_x = static_cast<int>(v);
  } else if (key == "psi") {
    if (value == "identity") {
      spec.psi = Eigen::MatrixXd();
    } else {
      const std::vector<double> vals = parse_list(key, value);
      const int dim = static_cast<int>(std::llround(std::sqrt(
          static_cast<double>(vals.size()))));
      if (static_cast<std::size_t>(dim) * dim != vals.size())
        throw std::invalid_argument(
            "config: psi needs a square count of entries (row-major)");
      spec.psi = Eigen::MatrixXd(dim, dim);
      for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) spec.psi(i, j) = vals[i * dim + j];
    }
  } else if (key == "diag_c") {
    spec.diag_c = parse_real(key, value);
  } else if (key == "theta_true") {
    const std::vector<double> vals = parse_list(key, value);
    spec.theta_true = Eigen::Map<const Eigen::VectorXd>(
        vals.data(), static_cast<int>(vals.size()));
  } else if (key == "mse_normalization") {
    if (value == "abs")
      spec.mse_normalization = MseNormalization::kAbs;
    else if (value == "squared")
      spec.mse_normalization = MseNormalization::kSquared;
    else
      throw std::invalid_argument(
          "config: mse_normalization must be abs or squared");
  } else if (key == "fix_population") {
    spec.fix_population = parse_bool(key, value);
  } else if (key == "sweep_param") {
    spec.sweep_param = value == "none" ? std::string() : value;
  } else if (key == "sweep_values") {
    spec.sweep_values = parse_list(key, value);
  } else if (key == "sigma_schedule") {
    spec.sigma_schedule = parse_list(key, value);
  } else {
    throw std::invalid_argument("config: unknown key '" + key + "'");
  }
}

std::string provenance_text(const ExperimentSpec& spec) {
  std::string out;
  out += "setting = " + setting_name(spec.setting) + "\n";
  out += "n = " + std::to_string(spec.n) + "\n";
  out += "p = " + format_double(spec.p) + "\n";
  out += "r = " + format_double(spec.r) + "\n";
  out += "rho = " + format_double(spec.rho) + "\n";
  out += "reps = " + std::to_string(spec.reps) + "\n";
  out += "seed = " + std::to_string(spec.seed) + "\n";
  out += "sigma = " + format_double(spec.sigma) + "\n";
  out += "p_edge = " + (spec.p_edge < 0.0 ? std::string("auto (10/n)")
                                          : format_double(spec.p_edge)) + "\n";
  out += "d_x = " + std::to_string(spec.d_x) + "\n";
  if (spec.psi.size() == 0) {
    out += "psi = identity\n";
  } else {
    std::vector<double> vals;
    for (int i = 0; i < spec.psi.rows(); ++i)
      for (int j = 0; j < spec.psi.cols(); ++j)
        vals.push_back(spec.psi(i, j));
    out += "psi = " + format_list(vals) + "\n";
  }
  out += "diag_c = " + format_double(spec.diag_c) + "\n";
  {
    const Eigen::VectorXd th = spec.resolved_theta_true();
    std::vector<double> vals(th.data(), th.data() + th.size());
    out += "theta_true = " + format_list(vals) + "\n";
  }
  out += std::string("mse_normalization = ") +
         (spec.mse_normalization == MseNormalization::kAbs ? "abs"
                                                           : "squared") +
         "\n";
  out += std::string("fix_population = ") +
         (spec.fix_population ? "true" : "false") + "\n";
  out += "sweep_param = " +
         (spec.sweep_param.empty() ? std::string("none") : spec.sweep_param) +
         "\n";
  if (!spec.sweep_values.empty())
    out += "sweep_values = " + format_list(spec.sweep_values) + "\n";
  if (!spec.sigma_schedule.empty())
    out += "sigma_schedule = " + format_list(spec.sigma_schedule) + "\n";
  out += "estimators = DM,Lin,SNIPE,Reg-SNIPE,VIM-SNIPE\n";
  return out;
}

}  // namespace snipe
