#include "snipe/moments.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace snipe {

double Design::floor() const {
  validate();
  double f = 0.5;
  for (double pi : p) f = std::min(f, std::min(pi, 1.0 - pi));
  return f;
}

void Design::validate() const {
  if (p.empty()) throw std::invalid_argument("Design: empty probability list");
  for (double pi : p)
    if (!(pi > 0.0 && pi < 1.0))
      throw std::invalid_argument("Design: p_i outside (0, 1)");
}

double g_coeff(const std::vector<int>& s, const Design& design) {
  double prod_pos = 1.0, prod_neg = 1.0;
  for (int j : s) {
    prod_pos *= 1.0 - design.p[j];
    prod_neg *= -design.p[j];
  }
  return prod_pos - prod_neg;  // 0 for the empty set
}

double bernoulli_moment(int a, int b, double p) {
  if (!(p > 0.0 && p < 1.0))
    throw std::invalid_argument("bernoulli_moment: p outside (0, 1)");
  if (a < 0 || b < 0)
    throw std::invalid_argument("bernoulli_moment: negative exponent");
  // Two-point enumeration over Z in {0, 1}; w = (Z - p)/(p(1-p)).
  const double w1 = 1.0 / p;
  const double w0 = -1.0 / (1.0 - p);
  const double at_one = p * std::pow(w1, a);
  if (b > 0) return at_one;  // Z^b kills the Z = 0 branch
  return at_one + (1.0 - p) * std::pow(w0, a);
}

double expect_product(const MomentSpec& spec, const Design& design) {
  if (spec.units.size() != spec.wexp.size())
    throw std::invalid_argument("expect_product: units/wexp length mismatch");
  // Merge exponents per unit; the factorization needs each unit once.
  std::unordered_map<int, std::pair<int, int>> factors;  // unit -> (a, b)
  factors.reserve(spec.units.size() + spec.indicators.size());
  for (std::size_t k = 0; k < spec.units.size(); ++k) {
    if (spec.wexp[k] <= 0)
      throw std::invalid_argument("expect_product: non-positive exponent");
    factors[spec.units[k]].first += spec.wexp[k];
  }
  for (int j : spec.indicators) factors[j].second = 1;

  double result = 1.0;
  for (const auto& [unit, ab] : factors) {
    if (unit < 0 || unit >= design.n())
      throw std::out_of_range("expect_product: unit index out of range");
    result *= bernoulli_moment(ab.first, ab.second, design.p[unit]);
    if (result == 0.0) return 0.0;
  }
  return result;
}

double weight_product_expectation(const std::vector<int>& s1,
                                  const std::vector<int>& s2,
                                  const std::vector<int>& ind,
                                  const Design& design) {
  MomentSpec spec;
  spec.units.reserve(s1.size() + s2.size());
  spec.wexp.reserve(s1.size() + s2.size());
  for (int j : s1) {
    spec.units.push_back(j);
    spec.wexp.push_back(1);
  }
  for (int j : s2) {
    spec.units.push_back(j);
    spec.wexp.push_back(1);
  }
  spec.indicators = ind;
  return expect_product(spec, design);
}

namespace {

std::vector<int> intersect_sorted(const std::vector<int>& a,
                                  const std::vector<int>& b) {
  std::vector<int> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                        std::back_inserter(out));
  return out;
}

}  // namespace

double pair_gram(const Graph& g, const Design& design, int beta, int i,
                 int i2) {
  if (i < 0 || i >= g.n || i2 < 0 || i2 >= g.n)
    throw std::out_of_range("pair_gram: unit index out of range");
  const std::vector<int> shared =
      intersect_sorted(g.in_neighbors[i], g.in_neighbors[i2]);
  double m = 0.0;
  for_each_nonempty_subset(shared, beta, [&](const std::vector<int>& s) {
    const double gs = g_coeff(s, design);
    double term = gs * gs;
    for (int j : s) term *= design.q(j);
    m += term;
  });
  return m;
}

double vim_kernel(const Graph& g, const Design& design, int beta, int i,
                  int i2, const std::vector<int>& s) {
  if (i < 0 || i >= g.n || i2 < 0 || i2 >= g.n)
    throw std::out_of_range("vim_kernel: unit index out of range");
  // Literal double sum over S' in S_i^beta, T in S_{i2}^beta. The empty
  // sets drop out through g() = 0.
  double total = 0.0;
  for_each_nonempty_subset(
      g.in_neighbors[i], beta, [&](const std::vector<int>& sp) {
        const double gsp = g_coeff(sp, design);
        for_each_nonempty_subset(
            g.in_neighbors[i2], beta, [&](const std::vector<int>& t) {
              const double e = weight_product_expectation(sp, t, s, design);
              if (e != 0.0) total += gsp * g_coeff(t, design) * e;
            });
      });
  return total;
}

}  // namespace snipe
