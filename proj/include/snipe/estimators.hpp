#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "snipe/moments.hpp"
#include "snipe/outcome_model.hpp"

namespace snipe {

/// One realized experiment. Covariate columns are re-centered defensively
/// on construction; everything else is stored as given after validation.
struct Dataset {
  std::vector<int> z;
  Eigen::VectorXd y;
  Eigen::MatrixXd x;
  Graph graph;
  Design design;
  int beta = 1;

  Dataset() = default;
  Dataset(std::vector<int> z_in, Eigen::VectorXd y_in, Eigen::MatrixXd x_in,
          Graph graph_in, Design design_in, int beta_in);

  int n() const { return graph.n; }
  int d_x() const { return static_cast<int>(x.cols()); }
};

/// Numerical footnotes of an estimate: condition number of the solved Gram
/// system (0 when no system was solved), whether the pseudo-inverse
/// fallback fired, and how many units were degenerate in generator terms.
struct Diagnostics {
  double gram_condition = 0.0;
  bool pseudo_inverse = false;
  int degenerate_units = 0;
};

struct EstimateReport {
  std::string estimator;
  double estimate = 0.0;
  std::optional<Eigen::VectorXd> theta;
  Diagnostics diagnostics;
};

/// Solve the symmetric system A t = b. When cond(A) exceeds 1e12 the
/// solution falls back to the Moore-Penrose pseudo-inverse and the
/// diagnostics flag it instead of failing (in-sample Gram matrices are not
/// guaranteed invertible).
Eigen::VectorXd solve_sym(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                          Diagnostics* diag = nullptr);

/// omega_i = sum over nonempty S in S_i^beta of g(S) prod_{j in S}
/// (Z_j - p_j) / (p_j (1 - p_j)). Every weight has expectation zero.
Eigen::VectorXd snipe_weights(const Dataset& ds);

/// (1/n) sum_i omega_i (Y_i - theta^T X_i); theta = 0 is the unadjusted
/// SNIPE estimator.
EstimateReport estimate_tte_theta(const Dataset& ds,
                                  const Eigen::VectorXd& theta);

/// Per-coefficient estimator
/// alpha_hat_{i,S} = Y_i prod_{j in S}(-1/p_j)
///                   sum_{U in S_i^beta, U contains S} prod_{l in U} t_l,
/// t_l = (p_l - Z_l) / (1 - p_l). Unbiased for alpha_{i,S}.
double alpha_hat(const Dataset& ds, int i, const std::vector<int>& s);

/// All alpha_hat_{i,S} for unit i, aligned with neighbor_subsets(graph, i,
/// beta). Shares the U-products across subsets, so it costs
/// O(|S_i^beta| 2^beta) instead of one full sum per subset.
std::vector<double> alpha_hat_unit(const Dataset& ds, int i);

/// Regression adjustment: the omega^2-weighted least-squares slope of Y on
/// X. Throws std::runtime_error when every weight vanishes.
Eigen::VectorXd theta_reg(const Dataset& ds, Diagnostics* diag = nullptr);

/// Precomputed geometry of the VIM adjustment for a fixed (graph, design,
/// beta, covariates): the aggregated neighborhood sums
/// T_S = sum_{i : S subset of N_i} X_i and the expected Gram matrix
/// G = (1/n^2) sum_{i,i'} M_{ii'} X_i X_{i'}^T. Reusable across treatment
/// draws of the same population.
class VimPlan {
 public:
  VimPlan(const Graph& g, const Design& design, int beta,
          const Eigen::MatrixXd& x);

  const Eigen::MatrixXd& gram() const { return gram_; }

  /// Aggregated sum over partners: sum_{i'} vim_kernel(i, i', S) X_{i'},
  /// assembled from the subset sums without touching any pair (i, i').
  /// `nb` must be N_i and `s` a member of S_i^beta.
  Eigen::VectorXd kernel_row(const std::vector<int>& nb,
                             const std::vector<int>& s) const;

  /// Subset sum T_S (zero vector when no neighborhood contains S).
  Eigen::VectorXd subset_sum(const std::vector<int>& s) const;

  /// Singleton subset sum T_{j} as a row of the dense table (no copy).
  Eigen::MatrixXd::ConstRowXpr subset_sum_row1(int j) const {
    return t1_.row(j);
  }

  int beta() const { return beta_; }

 private:
  const Design* design_;
  int beta_;
  int d_x_;
  int n_;
  // |T| = 1 sums live in a dense matrix; larger T in keyed maps.
  Eigen::MatrixXd t1_;                                   // n x d_x
  std::unordered_map<std::uint64_t, Eigen::VectorXd> t2_;  // key a*n+b, a<b
  std::map<std::vector<int>, Eigen::VectorXd> thigh_;
  Eigen::MatrixXd gram_;
};

/// Variance-improvement-maximizing adjustment: solves
/// G theta = (1/n^2) sum_i sum_S alpha_hat_{i,S} sum_{i'} vim_kernel X_{i'}
/// with the analytic (expected) Gram G. The plan overload reuses a
/// precomputed VimPlan built from the same population.
Eigen::VectorXd theta_vim(const Dataset& ds, Diagnostics* diag = nullptr);
Eigen::VectorXd theta_vim(const Dataset& ds, const VimPlan& plan,
                          Diagnostics* diag = nullptr);

/// Population counterparts (expectations under the design): the same
/// systems with alpha_hat replaced by the true coefficients and sample
/// weight squares replaced by their expectations.
Eigen::VectorXd theta_reg_population(const InteractionModel& model,
                                     const Eigen::MatrixXd& x,
                                     const Design& design,
                                     Diagnostics* diag = nullptr);
Eigen::VectorXd theta_vim_population(const InteractionModel& model,
                                     const Eigen::MatrixXd& x,
                                     const Design& design,
                                     Diagnostics* diag = nullptr);

/// mean(Y | Z = 1) - mean(Y | Z = 0); throws when either group is empty.
EstimateReport dm_estimate(const Dataset& ds);

/// Group-wise OLS adjustment: slopes theta_1 (treated) and theta_0
/// (control) of Y on group-centered X; the estimate is
/// (Ybar_1 - theta_1^T Xbar_1) - (Ybar_0 - theta_0^T Xbar_0). The combined
/// coefficient theta_Lin = (n_0/n) theta_1 + (n_1/n) theta_0 is written to
/// *theta_lin when requested.
EstimateReport lin_estimate(const Dataset& ds,
                            Eigen::VectorXd* theta_lin = nullptr);

/// Named full estimators used by the simulation harness.
EstimateReport estimate_snipe(const Dataset& ds);
EstimateReport estimate_reg(const Dataset& ds);
EstimateReport estimate_vim(const Dataset& ds);
EstimateReport estimate_vim(const Dataset& ds, const VimPlan& plan);

namespace ref {

/// Literal VIM adjustment: iterates units, subsets, then overlapping
/// partners, evaluating vim_kernel per triple with a per-pair cache.
/// Kept as the serial reference the production path is tested against.
Eigen::VectorXd theta_vim(const Dataset& ds, Diagnostics* diag = nullptr);

}  // namespace ref

}  // namespace snipe
