#pragma once

#include <vector>

#include "snipe/graph.hpp"

namespace snipe {

/// Bernoulli design: independent Z_i ~ Bernoulli(p_i). The probability
/// floor is the largest p with p <= p_i <= 1-p for all i; designs with a
/// floor in (0, 0.5] are the only valid ones.
struct Design {
  std::vector<double> p;

  int n() const { return static_cast<int>(p.size()); }

  static Design constant(int n, double prob) {
    Design d;
    d.p.assign(n, prob);
    return d;
  }

  /// min_i min(p_i, 1 - p_i); throws if some p_i lies outside (0, 1).
  double floor() const;

  void validate() const;

  /// 1 / (p_i (1 - p_i)), the variance of the centered weight factor.
  double q(int i) const { return 1.0 / (p[i] * (1.0 - p[i])); }
};

/// g(S) = prod_{j in S}(1 - p_j) - prod_{j in S}(-p_j).
/// g(empty) = 0 and |g(S)| <= 1 for every design respecting the floor.
double g_coeff(const std::vector<int>& s, const Design& design);

/// E[w^a Z^b] for Z ~ Bernoulli(p) and w = (Z - p) / (p (1 - p)), computed
/// by exact two-point enumeration. b is 0 or 1 (Z is idempotent).
double bernoulli_moment(int a, int b, double p);

/// Integrand of a factorized product expectation: per-unit weight exponents
/// and a set of raw-indicator units. Units may repeat across the two lists;
/// exponents accumulate.
struct MomentSpec {
  std::vector<int> units;       // units carrying weight factors
  std::vector<int> wexp;        // exponent of w_j per entry of `units`
  std::vector<int> indicators;  // units carrying a raw Z_j factor
};

/// E[ prod_j w_j^{a_j} Z_j^{b_j} ], exact via independence across units.
double expect_product(const MomentSpec& spec, const Design& design);

/// Convenience form of expect_product for the pair kernels: exponents are
/// +1 for each membership of j in s1 and s2, indicators come from ind.
/// Returns E[ w_{s1} w_{s2} prod_{k in ind} Z_k ].
double weight_product_expectation(const std::vector<int>& s1,
                                  const std::vector<int>& s2,
                                  const std::vector<int>& ind,
                                  const Design& design);

/// M_{i,i2} = sum over shared subsets S (|S| <= beta, S nonempty) of
/// g(S)^2 prod_{j in S} 1/(p_j (1-p_j)); equals E[omega_i omega_{i2}]
/// exactly. Zero when the neighborhoods are disjoint.
double pair_gram(const Graph& g, const Design& design, int beta, int i,
                 int i2);

/// E[ omega_i omega_{i2} prod_{k in s} Z_k ] for s in S_i^beta; the scalar
/// kernel of the VIM numerator. s = empty reduces to pair_gram.
double vim_kernel(const Graph& g, const Design& design, int beta, int i,
                  int i2, const std::vector<int>& s);

}  // namespace snipe
