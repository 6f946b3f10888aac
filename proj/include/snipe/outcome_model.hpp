#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "snipe/graph.hpp"
#include "snipe/rng.hpp"

namespace snipe {

/// Ground-truth potential outcomes: a polynomial of order at most beta in
/// the treatment indicators, with one coefficient alpha_{i,S} per unit and
/// neighbor subset. Coefficients are stored sparsely per unit; subsets use
/// the canonical size-then-lex order and the empty subset means the
/// intercept.
struct InteractionModel {
  int beta = 1;
  Graph graph;
  // per unit: (sorted subset of N_i, coefficient), in canonical subset order
  std::vector<std::vector<std::pair<std::vector<int>, double>>> coef;

  /// alpha_{i,S}; zero for subsets that were never set.
  double alpha(int i, const std::vector<int>& s) const;

  /// Insert or overwrite alpha_{i,S}. The subset must be sorted.
  void set_alpha(int i, std::vector<int> s, double value);

  /// max_i sum_S |alpha_{i,S}|, the outcome-scale constant of the variance
  /// bound.
  double y_max() const;

  /// Throws std::invalid_argument if a keyed subset is not a valid member
  /// of S_i^beta (subset of N_i with |S| <= beta).
  void validate() const;
};

/// Y_i(z) for every unit: sum over stored subsets of alpha_{i,S} prod z_S.
Eigen::VectorXd evaluate_potential(const InteractionModel& model,
                                   const std::vector<int>& z);

/// (1/n) sum_i sum_{S nonempty} alpha_{i,S}; equals the mean of
/// Y(all-ones) - Y(all-zeros).
double true_tte(const InteractionModel& model);

/// n x n coefficient matrix stored on its support: the diagonal plus one
/// entry per graph edge. Rows follow the in-neighbor convention of Graph.
struct AlphaMatrix {
  std::vector<double> diag;
  // per row i: (j, value) for j in N_i, j != i, ascending j
  std::vector<std::vector<std::pair<int, double>>> off;

  int n() const { return static_cast<int>(diag.size()); }
  double row_sum(int i) const;
  Eigen::MatrixXd to_dense() const;
};

/// Sum of |entry| over the full n x n matrix x psi x^T, evaluated in row
/// blocks so nothing of size n^2 is ever materialized.
double abs_sum_quadratic_form(const Eigen::MatrixXd& x,
                              const Eigen::MatrixXd& psi);

/// Weighted network matrix for the linear interaction coefficients.
/// Off-diagonal entries combine a degree-weighted, column-normalized
/// adjacency part with a covariate quadratic form; the diagonal is
/// diag_c * u_i plus the covariate part's diagonal. v and u may be supplied
/// for golden-trace tests; absent vectors are drawn U[0,1]^n from rng
/// (v first, then u).
AlphaMatrix gen_alpha_linear(const Graph& a, const Eigen::MatrixXd& x_true,
                             const Eigen::MatrixXd& psi, double diag_c,
                             double r, const std::vector<double>* v,
                             const std::vector<double>* u, Rng& rng);

/// Degree-dependent weighted network matrix for the quadratic interaction
/// term: same off-diagonal construction as gen_alpha_linear, diagonal
/// (sum_k x_true_{ik} + diag_c) * u_i.
AlphaMatrix gen_alpha_quad(const Graph& a, const Eigen::MatrixXd& x_true,
                           double diag_c, double r,
                           const std::vector<double>* v,
                           const std::vector<double>* u, Rng& rng);

/// Inputs of the synthetic outcome family: intercepts, linear and quadratic
/// coefficient matrices, covariate effect, true covariates.
struct SimOutcomeSpec {
  std::vector<double> alpha0;
  AlphaMatrix alpha_linear;
  AlphaMatrix alpha_quad;  // used only when beta = 2
  Eigen::VectorXd theta_true;
  Eigen::MatrixXd x_true;
};

/// Expand the synthetic outcome into an exact beta-order model:
///   alpha_{i,empty} = alpha0_i + theta^T x_true_i
///   alpha_{i,{j}}   = alpha_linear_{ij}
///   alpha_{i,{j,k}} = 2 a_ij a_ik / (sum_j a_ij)^2   (beta = 2 only)
/// where a is alpha_quad. A unit whose quadratic row sums to zero gets a
/// vanishing quadratic term; such units are counted in *degenerate_units
/// when the pointer is non-null.
InteractionModel build_sim_outcome(const SimOutcomeSpec& spec, int beta,
                                   const Graph& graph,
                                   int* degenerate_units = nullptr);

/// Text serialization: one line "i | j1,j2,... | alpha" per coefficient,
/// with "-" for the empty subset. Loading requires the graph and beta the
/// model refers to.
void save_model(const InteractionModel& model, const std::string& path);
InteractionModel load_model(const std::string& path, const Graph& graph,
                            int beta);

}  // namespace snipe
