#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "snipe/estimators.hpp"
#include "snipe/moments.hpp"
#include "snipe/outcome_model.hpp"
#include "snipe/rng.hpp"

namespace snipe {

/// Exact law of a scalar statistic under the independent Bernoulli design,
/// computed by enumerating all 2^n assignments.
struct ExactMoments {
  double mean = 0.0;
  double variance = 0.0;
  std::uint64_t support_size = 0;
};

inline constexpr int kEnumerationBudget = 22;

/// Condition the enumeration on assignments the predicate accepts
/// (probabilities renormalized); an empty function keeps everything.
using AssignmentFilter = std::function<bool(const std::vector<int>&)>;

/// Enumerate every assignment z in {0,1}^n, evaluate `statistic` on the
/// realized dataset, and return its exact mean and variance. Assignments
/// are walked in Gray-code order (one bit flip per step, touched outcomes
/// re-evaluated incrementally); blocks of the assignment space are
/// processed concurrently and combined in fixed order, so the result does
/// not depend on the thread count.
ExactMoments exact_moments(
    const InteractionModel& model, const Eigen::MatrixXd& x,
    const Design& design,
    const std::function<double(const Dataset&)>& statistic,
    const AssignmentFilter& filter = nullptr);

/// Exact mean of a vector statistic (same enumeration scheme, single pass).
Eigen::VectorXd exact_mean_vec(
    const InteractionModel& model, const Eigen::MatrixXd& x,
    const Design& design, int dim,
    const std::function<Eigen::VectorXd(const Dataset&)>& statistic,
    const AssignmentFilter& filter = nullptr);

/// Exact Var of the theta-adjusted estimator split into the two analytic
/// components: a theta-free part driven entirely by the outcome
/// coefficients (second order in alpha), and the remainder collecting the
/// covariate terms (zero at theta = 0). Computed from the closed-form
/// moments of the weights, not by enumeration; first + second equals the
/// enumerated variance exactly.
std::pair<double, double> variance_decomposition(const InteractionModel& model,
                                                 const Eigen::MatrixXd& x,
                                                 const Design& design,
                                                 const Eigen::VectorXd& theta);

/// Sum of both components: exact Var of estimate_tte_theta at fixed theta,
/// via the analytic moment engine (no enumeration, any n).
double analytic_variance(const InteractionModel& model,
                         const Eigen::MatrixXd& x, const Design& design,
                         const Eigen::VectorXd& theta);

/// The same variance split instead by pair type: the diagonal sum of
/// per-unit variances and the off-diagonal sum of cross-unit covariances
/// of omega_i (Y_i - theta^T X_i).
std::pair<double, double> v_var_v_cov(const InteractionModel& model,
                                      const Eigen::MatrixXd& x,
                                      const Design& design,
                                      const Eigen::VectorXd& theta);

/// Closed-form Var(TTE(0)) - Var(TTE(theta)) for first-order models under
/// a common treatment probability, evaluated at the population regression
/// coefficient (the display is derived from its normal equations and is
/// exact only there). Throws std::invalid_argument when beta != 1 or the
/// p_i differ.
double closed_form_variance_gap(const InteractionModel& model,
                                const Eigen::MatrixXd& x, const Design& design,
                                const Eigen::VectorXd& theta);

/// Finite-sample variance upper bound for the adjusted estimator:
///   4 d_in d_out (Y_max + |theta| X_max)^2 / n
///     * (e d_in / beta * max{4 beta^2, 1/(p(1-p))})^beta
/// with Y_max the largest per-unit coefficient 1-norm, X_max the largest
/// covariate-row 1-norm, |theta| Euclidean, and p the design floor.
double variance_upper_bound(const InteractionModel& model,
                            const Eigen::MatrixXd& x, const Design& design,
                            const Eigen::VectorXd& theta);

/// A small random test instance: graph with self-loops, treatment
/// probabilities, sparse coefficients alpha ~ U[-scale, scale] on the
/// neighborhood subsets, centered covariates.
struct RandomInstance {
  Graph graph;
  Design design;
  InteractionModel model;
  Eigen::MatrixXd x;
};

struct RandomInstanceOptions {
  int n = 6;
  int beta = 1;
  int d_x = 2;
  double edge_prob = 0.35;
  bool equal_p = false;        // one shared probability instead of per-unit
  double p_low = 0.2;
  double p_high = 0.8;
  double coef_scale = 1.0;
  double keep_prob = 0.9;      // chance a subset receives a coefficient
};

RandomInstance make_random_instance(const RandomInstanceOptions& opt, Rng& rng);

}  // namespace snipe
