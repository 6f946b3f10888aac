#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "snipe/estimators.hpp"
#include "snipe/outcome_model.hpp"
#include "snipe/rng.hpp"

namespace snipe {

/// The four simulation settings: graph family x interaction order.
enum class Setting { kErB1, kErB2, kSrggB1, kSrggB2 };

Setting parse_setting(const std::string& name);  // "ER-b1" ... "SRGG-b2"
std::string setting_name(Setting s);
int setting_beta(Setting s);
bool setting_is_er(Setting s);

enum class MseNormalization { kAbs, kSquared };

/// Estimators evaluated per replicate, in output order.
inline constexpr int kNumEstimators = 5;
inline constexpr std::array<const char*, kNumEstimators> kEstimatorNames = {
    "DM", "Lin", "SNIPE", "Reg-SNIPE", "VIM-SNIPE"};

/// Full description of one experiment: generator constants, design, sweep.
/// Defaults mirror the shipped configs; `validate` rejects inconsistent
/// combinations with a field-level message.
struct ExperimentSpec {
  Setting setting = Setting::kErB1;
  int n = 5000;
  double p = 0.5;     // treatment probability
  double r = 1.0;     // indirect-to-direct effect ratio
  double rho = 1.0;   // observed fraction of the true covariate
  int reps = 500;
  std::uint64_t seed = 1;
  double sigma = 0.02;    // geometric graph kernel width
  double p_edge = -1.0;   // edge probability; negative selects 10/n
  int d_x = 3;
  Eigen::MatrixXd psi;         // empty selects the identity
  double diag_c = 1.0;
  Eigen::VectorXd theta_true;  // empty selects all-ones
  MseNormalization mse_normalization = MseNormalization::kAbs;
  bool fix_population = false;  // one population, randomize treatment only

  std::string sweep_param;           // empty: single point
  std::vector<double> sweep_values;  // one resolved spec per value
  std::vector<double> sigma_schedule;  // per-sweep-point sigma (optional)

  void validate() const;
  Eigen::MatrixXd resolved_psi() const;
  Eigen::VectorXd resolved_theta_true() const;
  double resolved_p_edge() const;
};

/// One generated finite population: graph, covariates, outcome model.
struct Population {
  Graph graph;
  Eigen::MatrixXd x_obs;
  Eigen::MatrixXd x_true;
  InteractionModel model;
  Design design;
  double tte = 0.0;
  int degenerate_units = 0;
};

/// Draw 2n standard-normal covariate rows (observed block first), center
/// each block, and blend: x_true = rho x_obs + sqrt(1 - rho^2) x_unobs.
/// Returns (x_obs, x_true).
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> gen_covariates(int n, int d_x,
                                                           double rho,
                                                           Rng& rng);

/// Generate the population for one replicate from its derived streams:
/// covariates, then the graph (edge probability 10/n or the soft geometric
/// kernel on x_true), then intercepts alpha0 ~ U[0,1] and the interaction
/// coefficient matrices.
Population make_population(const ExperimentSpec& spec,
                           std::uint64_t sweep_index, int rep);

struct ReplicateResult {
  int rep = 0;
  double true_tte = 0.0;
  int degenerate_units = 0;
  std::array<double, kNumEstimators> estimate{};
  std::array<bool, kNumEstimators> ok{};
};

/// Run one replicate: build (or reuse) the population, draw Bernoulli(p)
/// treatment from the replicate's own stream, evaluate outcomes, and apply
/// all five estimators. A failing estimator marks its cell and the
/// replicate continues. `fixed`/`plan` reuse a shared population.
ReplicateResult run_replicate(const ExperimentSpec& spec,
                              std::uint64_t sweep_index, int rep,
                              const Population* fixed = nullptr,
                              const VimPlan* plan = nullptr);

struct EstimatorMetrics {
  std::string estimator;
  double rel_bias = 0.0;
  double rel_mse = 0.0;
  int n_fail = 0;
};

/// Per-estimator relative bias (mean estimate vs mean true TTE) and
/// relative MSE, failures excluded and counted. `abs` divides each squared
/// error by |TTE| of its replicate, `squared` by TTE^2. A replicate with
/// zero true TTE cannot be normalized and raises an error.
std::vector<EstimatorMetrics> compute_metrics(
    const std::vector<ReplicateResult>& results, MseNormalization norm);

struct SweepPointResult {
  double sweep_value = 0.0;
  ExperimentSpec resolved;
  std::vector<ReplicateResult> replicates;
  std::vector<EstimatorMetrics> metrics;
  long long degenerate_total = 0;
};

struct ExperimentResult {
  ExperimentSpec base;
  std::vector<SweepPointResult> points;
};

/// Run every sweep point (replicates in parallel, results ordered by
/// replicate index). Never aborts on estimator failures.
ExperimentResult run_experiment(const ExperimentSpec& spec);

/// CSV emission. Doubles are written in shortest round-trip form, so a
/// rerun with the same seed and spec is byte-identical.
/// Raw header:     setting,sweep_param,sweep_value,rep,estimator,estimate,true_tte
/// Summary header: setting,sweep_param,sweep_value,estimator,rel_bias,rel_mse,n_fail
void write_raw_csv(const ExperimentResult& result, const std::string& path);
void write_summary_csv(const ExperimentResult& result,
                       const std::string& path);

/// Shortest round-trip decimal form of v (std::to_chars).
std::string format_double(double v);

/// Plain-text `key = value` config file mirroring ExperimentSpec; '#'
/// starts a comment. Unknown keys are rejected by name.
ExperimentSpec parse_config(const std::string& path);

/// Apply one `key=value` override on top of a parsed spec.
void apply_override(ExperimentSpec& spec, const std::string& key,
                    const std::string& value);

/// Resolved configuration dump written next to the CSVs; contains every
/// field so the run can be reproduced from the provenance file alone.
std::string provenance_text(const ExperimentSpec& spec);

}  // namespace snipe
