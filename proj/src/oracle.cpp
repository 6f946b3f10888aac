#include "snipe/oracle.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <iterator>
#include <numbers>
#include <stdexcept>

namespace snipe {
namespace {

// Neumaier compensated accumulator: block sums stay exact enough that the
// combined result is independent of how blocks were scheduled.
struct Kahan {
  double sum = 0.0;
  double comp = 0.0;
  void add(double v) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v))
      comp += (sum - t) + v;
    else
      comp += (v - t) + sum;
    sum = t;
  }
  double value() const { return sum + comp; }
};

struct KahanVec {
  Eigen::VectorXd sum, comp;
  explicit KahanVec(int d)
      : sum(Eigen::VectorXd::Zero(d)), comp(Eigen::VectorXd::Zero(d)) {}
  void add(const Eigen::VectorXd& v) {
    for (int k = 0; k < sum.size(); ++k) {
      const double t = sum[k] + v[k];
      if (std::abs(sum[k]) >= std::abs(v[k]))
        comp[k] += (sum[k] - t) + v[k];
      else
        comp[k] += (v[k] - t) + sum[k];
      sum[k] = t;
    }
  }
  Eigen::VectorXd value() const { return sum + comp; }
};

// Replays assignments in Gray-code order on a mutable workspace dataset:
// one treatment bit flips per step and only the outcomes whose
// neighborhood contains that unit are re-evaluated.
class Walker {
 public:
  Walker(const InteractionModel& model, const Eigen::MatrixXd& x,
         const Design& design)
      : model_(&model),
        out_(out_index(model.graph)),
        ws_(std::vector<int>(model.graph.n, 0),
            evaluate_potential(model, std::vector<int>(model.graph.n, 0)), x,
            model.graph, design, model.beta) {}

  const Dataset& data() const { return ws_; }

  void seek(std::uint64_t m) {
    const std::uint64_t gm = m ^ (m >> 1);
    for (int i = 0; i < ws_.graph.n; ++i)
      ws_.z[i] = static_cast<int>((gm >> i) & 1u);
    ws_.y = evaluate_potential(*model_, ws_.z);
  }

  void flip(int j) {
    ws_.z[j] ^= 1;
    for (int i : out_[j]) refresh(i);
  }

  double prob() const {
    double p = 1.0;
    for (int i = 0; i < ws_.graph.n; ++i)
      p *= ws_.z[i] ? ws_.design.p[i] : 1.0 - ws_.design.p[i];
    return p;
  }

 private:
  void refresh(int i) {
    double v = 0.0;
    for (const auto& [s, a] : model_->coef[i]) {
      bool on = true;
      for (int j : s)
        if (!ws_.z[j]) {
          on = false;
          break;
        }
      if (on) v += a;
    }
    ws_.y[i] = v;
  }

  const InteractionModel* model_;
  std::vector<std::vector<int>> out_;
  Dataset ws_;
};

void check_budget(const InteractionModel& model) {
  if (model.graph.n > kEnumerationBudget)
    throw std::invalid_argument(
        "exact enumeration supports at most 22 units");
}

double assignment_prob(std::uint64_t gm, const Design& design) {
  double p = 1.0;
  for (std::size_t i = 0; i < design.p.size(); ++i)
    p *= (gm >> i) & 1u ? design.p[i] : 1.0 - design.p[i];
  return p;
}

// All units whose in-neighborhood intersects N_i, in increasing order
// (always contains i itself via the self-loop).
std::vector<int> overlap_partners(const Graph& g,
                                  const std::vector<std::vector<int>>& out,
                                  int i) {
  std::vector<int> partners;
  for (int j : g.in_neighbors[i])
    partners.insert(partners.end(), out[j].begin(), out[j].end());
  std::sort(partners.begin(), partners.end());
  partners.erase(std::unique(partners.begin(), partners.end()),
                 partners.end());
  return partners;
}

using CoefList = std::vector<std::pair<std::vector<int>, double>>;

// Coefficients of b_i = Y_i - theta^T X_i on the subset basis: the empty
// subset absorbs the covariate shift.
CoefList residual_coefs(const InteractionModel& model,
                        const Eigen::MatrixXd& x, const Eigen::VectorXd& theta,
                        int i) {
  CoefList coefs = model.coef[i];
  const double shift = theta.size() > 0 ? theta.dot(x.row(i)) : 0.0;
  if (shift != 0.0) {
    if (!coefs.empty() && coefs.front().first.empty())
      coefs.front().second -= shift;
    else
      coefs.insert(coefs.begin(), {std::vector<int>{}, -shift});
  }
  return coefs;
}

double nonempty_sum(const CoefList& coefs) {
  double s = 0.0;
  for (const auto& [sub, c] : coefs)
    if (!sub.empty()) s += c;
  return s;
}

// E[omega_i b_i omega_i2 b_i2] through the factorized moment engine:
// expand both residuals on the subset basis and price each cross term.
double pair_second_moment(const Graph& g, const Design& design, int beta,
                          int i, int i2, const CoefList& bi,
                          const CoefList& bi2) {
  double total = 0.0;
  std::vector<int> un;
  for (const auto& [a, ca] : bi) {
    if (ca == 0.0) continue;
    for (const auto& [b, cb] : bi2) {
      if (cb == 0.0) continue;
      un.clear();
      std::set_union(a.begin(), a.end(), b.begin(), b.end(),
                     std::back_inserter(un));
      total += ca * cb * vim_kernel(g, design, beta, i, i2, un);
    }
  }
  return total;
}

}  // namespace

ExactMoments exact_moments(
    const InteractionModel& model, const Eigen::MatrixXd& x,
    const Design& design,
    const std::function<double(const Dataset&)>& statistic,
    const AssignmentFilter& filter) {
  check_budget(model);
  if (!statistic)
    throw std::invalid_argument("exact_moments: statistic is empty");
  const int n = model.graph.n;
  const std::uint64_t total = 1ull << n;
  const int nblocks = static_cast<int>(std::min<std::uint64_t>(total, 512));
  const std::uint64_t bsize = total / nblocks;
  std::vector<double> vals(total, 0.0);
  std::vector<double> bmean(nblocks, 0.0), bprob(nblocks, 0.0);
  std::vector<std::uint64_t> bkept(nblocks, 0);
#pragma omp parallel for schedule(dynamic)
  for (int b = 0; b < nblocks; ++b) {
    Walker w(model, x, design);
    const std::uint64_t begin = b * bsize;
    const std::uint64_t end = begin + bsize;
    w.seek(begin);
    Kahan km, kp;
    std::uint64_t kept = 0;
    for (std::uint64_t m = begin; m < end; ++m) {
      if (m != begin) w.flip(std::countr_zero(m));
      if (filter && !filter(w.data().z)) continue;
      const double prob = w.prob();
      vals[m] = statistic(w.data());
      km.add(prob * vals[m]);
      kp.add(prob);
      ++kept;
    }
    bmean[b] = km.value();
    bprob[b] = kp.value();
    bkept[b] = kept;
  }
  Kahan mean_k, prob_k;
  std::uint64_t kept_total = 0;
  for (int b = 0; b < nblocks; ++b) {
    mean_k.add(bmean[b]);
    prob_k.add(bprob[b]);
    kept_total += bkept[b];
  }
  if (kept_total == 0)
    throw std::runtime_error("exact_moments: the filter rejected every assignment");
  const double total_prob = prob_k.value();
  const double mean = mean_k.value() / total_prob;
  std::vector<double> bvar(nblocks, 0.0);
#pragma omp parallel for schedule(dynamic)
  for (int b = 0; b < nblocks; ++b) {
    Kahan kv;
    std::vector<int> z(n);
    const std::uint64_t begin = b * bsize;
    const std::uint64_t end = begin + bsize;
    for (std::uint64_t m = begin; m < end; ++m) {
      const std::uint64_t gm = m ^ (m >> 1);
      if (filter) {
        for (int i = 0; i < n; ++i) z[i] = static_cast<int>((gm >> i) & 1u);
        if (!filter(z)) continue;
      }
      const double diff = vals[m] - mean;
      kv.add(assignment_prob(gm, design) * diff * diff);
    }
    bvar[b] = kv.value();
  }
  Kahan var_k;
  for (int b = 0; b < nblocks; ++b) var_k.add(bvar[b]);
  ExactMoments out;
  out.mean = mean;
  out.variance = std::max(0.0, var_k.value() / total_prob);
  out.support_size = filter ? kept_total : total;
  return out;
}

Eigen::VectorXd exact_mean_vec(
    const InteractionModel& model, const Eigen::MatrixXd& x,
    const Design& design, int dim,
    const std::function<Eigen::VectorXd(const Dataset&)>& statistic,
    const AssignmentFilter& filter) {
  check_budget(model);
  if (!statistic)
    throw std::invalid_argument("exact_mean_vec: statistic is empty");
  const int n = model.graph.n;
  const std::uint64_t total = 1ull << n;
  const int nblocks = static_cast<int>(std::min<std::uint64_t>(total, 512));
  const std::uint64_t bsize = total / nblocks;
  std::vector<Eigen::VectorXd> bsum(nblocks);
  std::vector<double> bprob(nblocks, 0.0);
  std::vector<std::uint64_t> bkept(nblocks, 0);
#pragma omp parallel for schedule(dynamic)
  for (int b = 0; b < nblocks; ++b) {
    Walker w(model, x, design);
    const std::uint64_t begin = b * bsize;
    const std::uint64_t end = begin + bsize;
    w.seek(begin);
    KahanVec ks(dim);
    Kahan kp;
    std::uint64_t kept = 0;
    for (std::uint64_t m = begin; m < end; ++m) {
      if (m != begin) w.flip(std::countr_zero(m));
      if (filter && !filter(w.data().z)) continue;
      const double prob = w.prob();
      ks.add(prob * statistic(w.data()));
      kp.add(prob);
      ++kept;
    }
    bsum[b] = ks.value();
    bprob[b] = kp.value();
    bkept[b] = kept;
  }
  KahanVec sum_k(dim);
  Kahan prob_k;
  std::uint64_t kept_total = 0;
  for (int b = 0; b < nblocks; ++b) {
    sum_k.add(bsum[b]);
    prob_k.add(bprob[b]);
    kept_total += bkept[b];
  }
  if (kept_total == 0)
    throw std::runtime_error("exact_mean_vec: the filter rejected every assignment");
  return sum_k.value() / prob_k.value();
}

std::pair<double, double> v_var_v_cov(const InteractionModel& model,
                                      const Eigen::MatrixXd& x,
                                      const Design& design,
                                      const Eigen::VectorXd& theta) {
  const Graph& g = model.graph;
  const int n = g.n;
  const auto out = out_index(g);
  std::vector<CoefList> resid(n);
  std::vector<double> mean(n);
  for (int i = 0; i < n; ++i) {
    resid[i] = residual_coefs(model, x, theta, i);
    mean[i] = nonempty_sum(resid[i]);
  }
  Kahan diag, offdiag;
  for (int i = 0; i < n; ++i) {
    for (int i2 : overlap_partners(g, out, i)) {
      const double cov =
          pair_second_moment(g, design, model.beta, i, i2, resid[i],
                             resid[i2]) -
          mean[i] * mean[i2];
      (i2 == i ? diag : offdiag).add(cov);
    }
  }
  const double n2 = static_cast<double>(n) * static_cast<double>(n);
  return {diag.value() / n2, offdiag.value() / n2};
}

std::pair<double, double> variance_decomposition(const InteractionModel& model,
                                                 const Eigen::MatrixXd& x,
                                                 const Design& design,
                                                 const Eigen::VectorXd& theta) {
  const Graph& g = model.graph;
  const int n = g.n;
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(x.cols());
  const auto [d0, o0] = v_var_v_cov(model, x, design, zero);
  const double alpha_second_order = d0 + o0;
  const Eigen::VectorXd tx =
      theta.size() > 0 ? (x * theta).eval() : Eigen::VectorXd::Zero(n);
  const auto out = out_index(g);
  Kahan gram_part, cross_part;
  for (int i = 0; i < n; ++i) {
    for (int i2 : overlap_partners(g, out, i)) {
      gram_part.add(tx[i] * tx[i2] *
                    pair_gram(g, design, model.beta, i, i2));
      double ey = 0.0;  // E[omega_i Y_i omega_i2]
      for (const auto& [s, a] : model.coef[i])
        ey += a * vim_kernel(g, design, model.beta, i, i2, s);
      cross_part.add(tx[i2] * ey);
    }
  }
  const double n2 = static_cast<double>(n) * static_cast<double>(n);
  const double theta_terms =
      (gram_part.value() - 2.0 * cross_part.value()) / n2;
  return {alpha_second_order, theta_terms};
}

double analytic_variance(const InteractionModel& model,
                         const Eigen::MatrixXd& x, const Design& design,
                         const Eigen::VectorXd& theta) {
  const auto [diag, offdiag] = v_var_v_cov(model, x, design, theta);
  return diag + offdiag;
}

double closed_form_variance_gap(const InteractionModel& model,
                                const Eigen::MatrixXd& x, const Design& design,
                                const Eigen::VectorXd& theta) {
  if (model.beta != 1)
    throw std::invalid_argument(
        "closed_form_variance_gap: requires a first-order model");
  const double p = design.p.at(0);
  for (double pi : design.p)
    if (std::abs(pi - p) > 1e-12)
      throw std::invalid_argument(
          "closed_form_variance_gap: requires a common treatment probability");
  const Graph& g = model.graph;
  const int n = g.n;
  const Eigen::VectorXd tx =
      theta.size() > 0 ? (x * theta).eval() : Eigen::VectorXd::Zero(n);
  const auto out = out_index(g);
  Kahan total;
  std::vector<double> asing;
  for (int i = 0; i < n; ++i) {
    const auto& nb = g.in_neighbors[i];
    const double a0 = model.alpha(i, {});
    asing.resize(nb.size());
    double asum = 0.0;
    for (std::size_t k = 0; k < nb.size(); ++k) {
      asing[k] = model.alpha(i, {nb[k]});
      asum += asing[k];
    }
    double inner = static_cast<double>(nb.size()) * tx[i] * tx[i];
    const double base = 2.0 * (a0 + p * asum) - tx[i];
    for (int i2 : overlap_partners(g, out, i)) {
      if (i2 == i) continue;
      const auto& nb2 = g.in_neighbors[i2];
      double sj = 0.0;
      std::size_t k = 0, k2 = 0;
      while (k < nb.size() && k2 < nb2.size()) {
        if (nb[k] < nb2[k2]) {
          ++k;
        } else if (nb[k] > nb2[k2]) {
          ++k2;
        } else {
          sj += 2.0 * (1.0 - 2.0 * p) * asing[k] + base;
          ++k;
          ++k2;
        }
      }
      inner += tx[i2] * sj;
    }
    total.add(inner);
  }
  const double n2 = static_cast<double>(n) * static_cast<double>(n);
  return total.value() / (p * (1.0 - p) * n2);
}

double variance_upper_bound(const InteractionModel& model,
                            const Eigen::MatrixXd& x, const Design& design,
                            const Eigen::VectorXd& theta) {
  const auto [din, dout] = max_degrees(model.graph);
  const double ymax = model.y_max();
  const double xmax =
      x.cols() > 0 ? x.cwiseAbs().rowwise().sum().maxCoeff() : 0.0;
  const double tnorm = theta.size() > 0 ? theta.norm() : 0.0;
  const double p = design.floor();
  const double q = 1.0 / (p * (1.0 - p));
  const double beta = static_cast<double>(model.beta);
  const double level = std::numbers::e * din / beta *
                       std::max(4.0 * beta * beta, q);
  const double amp = ymax + tnorm * xmax;
  return 4.0 * din * dout * amp * amp / model.graph.n *
         std::pow(level, beta);
}

RandomInstance make_random_instance(const RandomInstanceOptions& opt,
                                    Rng& rng) {
  if (opt.n < 1 || opt.n > kEnumerationBudget)
    throw std::invalid_argument(
        "make_random_instance: n must be between 1 and the enumeration budget");
  if (opt.beta < 1) throw std::invalid_argument("make_random_instance: beta must be at least 1");
  RandomInstance inst;
  inst.graph = gen_erdos_renyi(opt.n, opt.edge_prob, rng);
  std::vector<double> p(opt.n);
  if (opt.equal_p) {
    const double v = opt.p_low + (opt.p_high - opt.p_low) * rng.uniform();
    std::fill(p.begin(), p.end(), v);
  } else {
    for (double& pi : p) pi = opt.p_low + (opt.p_high - opt.p_low) * rng.uniform();
  }
  inst.design = Design{std::move(p)};
  inst.x = Eigen::MatrixXd(opt.n, opt.d_x);
  for (int i = 0; i < opt.n; ++i)
    for (int c = 0; c < opt.d_x; ++c) inst.x(i, c) = rng.normal();
  if (opt.d_x > 0) inst.x.rowwise() -= inst.x.colwise().mean();
  inst.model.beta = opt.beta;
  inst.model.graph = inst.graph;
  inst.model.coef.assign(opt.n, {});
  for (int i = 0; i < opt.n; ++i) {
    for (const auto& s : neighbor_subsets(inst.graph, i, opt.beta)) {
      if (rng.uniform() >= opt.keep_prob) continue;
      inst.model.coef[i].emplace_back(
          s, opt.coef_scale * (2.0 * rng.uniform() - 1.0));
    }
  }
  return inst;
}

}  // namespace snipe
