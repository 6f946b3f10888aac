#include "snipe/estimators.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace snipe {
namespace {

long long comb_count(int n, int k) {
  if (k < 0 || k > n) return 0;
  long long r = 1;
  for (int t = 0; t < k; ++t) r = r * (n - t) / (t + 1);
  return r;
}

// Rank of the sorted position tuple `pos` (drawn from {0..d-1}) among all
// k-combinations in lexicographic order (combinatorial number system).
long long lex_rank(const std::vector<int>& pos, int d) {
  const int k = static_cast<int>(pos.size());
  long long r = 0;
  int prev = -1;
  for (int t = 0; t < k; ++t) {
    for (int v = prev + 1; v < pos[t]; ++v) r += comb_count(d - 1 - v, k - 1 - t);
    prev = pos[t];
  }
  return r;
}

// Advance `pick` to the next k-combination of {0..d-1}; false when done.
bool next_combination(std::vector<int>& pick, int d) {
  const int k = static_cast<int>(pick.size());
  int pos = k - 1;
  while (pos >= 0 && pick[pos] == d - k + pos) --pos;
  if (pos < 0) return false;
  ++pick[pos];
  for (int q = pos + 1; q < k; ++q) pick[q] = pick[q - 1] + 1;
  return true;
}

void check_finite(const EstimateReport& rep) {
  if (!std::isfinite(rep.estimate))
    throw std::runtime_error(rep.estimator + ": estimate is not finite");
}

}  // namespace

Dataset::Dataset(std::vector<int> z_in, Eigen::VectorXd y_in,
                 Eigen::MatrixXd x_in, Graph graph_in, Design design_in,
                 int beta_in)
    : z(std::move(z_in)),
      y(std::move(y_in)),
      x(std::move(x_in)),
      graph(std::move(graph_in)),
      design(std::move(design_in)),
      beta(beta_in) {
  graph.validate();
  design.validate();
  const int n_units = graph.n;
  if (static_cast<int>(design.p.size()) != n_units)
    throw std::invalid_argument("dataset: design length differs from graph size");
  if (static_cast<int>(z.size()) != n_units || y.size() != n_units ||
      x.rows() != n_units)
    throw std::invalid_argument("dataset: vector lengths differ from graph size");
  if (beta < 1) throw std::invalid_argument("dataset: beta must be at least 1");
  for (int v : z)
    if (v != 0 && v != 1)
      throw std::invalid_argument("dataset: treatment entries must be 0 or 1");
  if (x.cols() > 0) x.rowwise() -= x.colwise().mean();
}

Eigen::VectorXd solve_sym(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                          Diagnostics* diag) {
  const int d = static_cast<int>(a.rows());
  if (d == 0) return Eigen::VectorXd(0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  const Eigen::VectorXd ev = es.eigenvalues();
  const double emax = ev.cwiseAbs().maxCoeff();
  const double emin = ev.cwiseAbs().minCoeff();
  const double cond = emin > 0.0 ? emax / emin
                                 : std::numeric_limits<double>::infinity();
  if (diag) diag->gram_condition = cond;
  if (emax > 0.0 && cond <= 1e12) return a.ldlt().solve(b);
  // Essentially singular: truncated eigen-inverse (Moore-Penrose on the
  // well-determined subspace) and a diagnostic flag instead of failure.
  if (diag) diag->pseudo_inverse = true;
  const double tol = emax * 1e-12;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(d);
  for (int k = 0; k < d; ++k)
    if (std::abs(ev[k]) > tol) inv[k] = 1.0 / ev[k];
  return es.eigenvectors() *
         (inv.asDiagonal() * (es.eigenvectors().transpose() * b));
}

Eigen::VectorXd snipe_weights(const Dataset& ds) {
  const int n = ds.n();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    double total = 0.0;
    for_each_nonempty_subset(
        ds.graph.in_neighbors[i], ds.beta, [&](const std::vector<int>& s) {
          double term = g_coeff(s, ds.design);
          for (int j : s) {
            const double p = ds.design.p[j];
            term *= (ds.z[j] - p) / (p * (1.0 - p));
          }
          total += term;
        });
    w[i] = total;
  }
  return w;
}

EstimateReport estimate_tte_theta(const Dataset& ds,
                                  const Eigen::VectorXd& theta) {
  if (theta.size() != ds.d_x())
    throw std::invalid_argument("estimate_tte_theta: theta length differs from covariate width");
  const Eigen::VectorXd w = snipe_weights(ds);
  Eigen::VectorXd resid = ds.y;
  if (theta.size() > 0) resid -= ds.x * theta;
  EstimateReport rep;
  rep.estimator = (theta.size() == 0 || theta.isZero(0.0)) ? "SNIPE" : "Adjusted-SNIPE";
  rep.estimate = w.dot(resid) / static_cast<double>(ds.n());
  if (theta.size() > 0) rep.theta = theta;
  check_finite(rep);
  return rep;
}

double alpha_hat(const Dataset& ds, int i, const std::vector<int>& s) {
  const auto& nb = ds.graph.in_neighbors[i];
  if (static_cast<int>(s.size()) > ds.beta)
    throw std::invalid_argument("alpha_hat: subset larger than beta");
  std::vector<int> sorted = s;
  std::sort(sorted.begin(), sorted.end());
  for (int j : sorted)
    if (!std::binary_search(nb.begin(), nb.end(), j))
      throw std::invalid_argument("alpha_hat: subset is not contained in the in-neighborhood");
  double coef = ds.y[i];
  for (int j : sorted) coef *= -1.0 / ds.design.p[j];
  // Sum of prod_{l in U} t_l over U in S_i^beta containing S, with
  // t_l = (p_l - Z_l) / (1 - p_l); the empty U contributes 1 when S = {}.
  double sum = sorted.empty() ? 1.0 : 0.0;
  for_each_nonempty_subset(nb, ds.beta, [&](const std::vector<int>& u) {
    if (!std::includes(u.begin(), u.end(), sorted.begin(), sorted.end())) return;
    double prod = 1.0;
    for (int l : u) {
      const double p = ds.design.p[l];
      prod *= (p - ds.z[l]) / (1.0 - p);
    }
    sum += prod;
  });
  return coef * sum;
}

std::vector<double> alpha_hat_unit(const Dataset& ds, int i) {
  const auto& nb = ds.graph.in_neighbors[i];
  const int d = static_cast<int>(nb.size());
  const int kmax = std::min(ds.beta, d);
  std::vector<double> t(d);
  for (int k = 0; k < d; ++k) {
    const double p = ds.design.p[nb[k]];
    t[k] = (p - ds.z[nb[k]]) / (1.0 - p);
  }
  std::vector<long long> off(kmax + 1, 0);
  long long total = 0;
  for (int k = 0; k <= kmax; ++k) {
    off[k] = total;
    total += comb_count(d, k);
  }
  // acc[rank(S)] collects sum over U containing S of prod t; each U is
  // visited once and credited to all of its subsets.
  std::vector<double> acc(total, 0.0);
  acc[0] += 1.0;  // U = {} counts toward S = {}
  std::vector<int> pick, sub;
  for (int k = 1; k <= kmax; ++k) {
    pick.resize(k);
    std::iota(pick.begin(), pick.end(), 0);
    do {
      double tu = 1.0;
      for (int pos : pick) tu *= t[pos];
      for (unsigned mask = 0; mask < (1u << k); ++mask) {
        sub.clear();
        for (int b = 0; b < k; ++b)
          if (mask & (1u << b)) sub.push_back(pick[b]);
        acc[off[sub.size()] + lex_rank(sub, d)] += tu;
      }
    } while (next_combination(pick, d));
  }
  std::vector<double> out(total);
  long long idx = 0;
  out[idx++] = ds.y[i] * acc[0];
  for (int k = 1; k <= kmax; ++k) {
    pick.resize(k);
    std::iota(pick.begin(), pick.end(), 0);
    do {
      double coef = ds.y[i];
      for (int pos : pick) coef *= -1.0 / ds.design.p[nb[pos]];
      out[idx] = coef * acc[idx];
      ++idx;
    } while (next_combination(pick, d));
  }
  return out;
}

Eigen::VectorXd theta_reg(const Dataset& ds, Diagnostics* diag) {
  const Eigen::VectorXd w = snipe_weights(ds);
  if ((w.array() == 0.0).all())
    throw std::runtime_error("theta_reg: every SNIPE weight is zero");
  const double n = static_cast<double>(ds.n());
  const Eigen::VectorXd w2 = w.array().square();
  const Eigen::MatrixXd a = ds.x.transpose() * w2.asDiagonal() * ds.x / n;
  const Eigen::VectorXd b =
      ds.x.transpose() * (w2.array() * ds.y.array()).matrix() / n;
  return solve_sym(a, b, diag);
}

VimPlan::VimPlan(const Graph& g, const Design& design, int beta,
                 const Eigen::MatrixXd& x)
    : design_(&design),
      beta_(beta),
      d_x_(static_cast<int>(x.cols())),
      n_(g.n) {
  if (beta_ < 1) throw std::invalid_argument("vim plan: beta must be at least 1");
  t1_ = Eigen::MatrixXd::Zero(n_, d_x_);
  for (int i = 0; i < n_; ++i) {
    const auto& nb = g.in_neighbors[i];
    for (int j : nb) t1_.row(j) += x.row(i);
    if (beta_ < 2) continue;
    for (std::size_t a = 0; a < nb.size(); ++a)
      for (std::size_t b = a + 1; b < nb.size(); ++b) {
        const std::uint64_t key =
            static_cast<std::uint64_t>(nb[a]) * n_ + nb[b];
        auto [it, fresh] = t2_.try_emplace(key, Eigen::VectorXd::Zero(d_x_));
        it->second += x.row(i).transpose();
        (void)fresh;
      }
    if (beta_ < 3) continue;
    for_each_nonempty_subset(nb, beta_, [&](const std::vector<int>& s) {
      if (s.size() < 3) return;
      auto [it, fresh] = thigh_.try_emplace(s, Eigen::VectorXd::Zero(d_x_));
      it->second += x.row(i).transpose();
      (void)fresh;
    });
  }
  gram_ = Eigen::MatrixXd::Zero(d_x_, d_x_);
  for (int j = 0; j < n_; ++j)
    gram_ += design.q(j) * (t1_.row(j).transpose() * t1_.row(j));
  std::vector<int> key_set(2);
  for (const auto& [key, v] : t2_) {
    key_set[0] = static_cast<int>(key / n_);
    key_set[1] = static_cast<int>(key % n_);
    const double gg = g_coeff(key_set, design);
    gram_ += gg * gg * design.q(key_set[0]) * design.q(key_set[1]) *
             (v * v.transpose());
  }
  for (const auto& [s, v] : thigh_) {
    double coef = g_coeff(s, design);
    coef *= coef;
    for (int j : s) coef *= design.q(j);
    gram_ += coef * (v * v.transpose());
  }
  gram_ /= static_cast<double>(n_) * static_cast<double>(n_);
}

Eigen::VectorXd VimPlan::subset_sum(const std::vector<int>& s) const {
  if (s.size() == 1) return t1_.row(s[0]).transpose();
  if (s.size() == 2) {
    const auto it = t2_.find(static_cast<std::uint64_t>(s[0]) * n_ + s[1]);
    return it == t2_.end() ? Eigen::VectorXd::Zero(d_x_) : it->second;
  }
  const auto it = thigh_.find(s);
  return it == thigh_.end() ? Eigen::VectorXd::Zero(d_x_) : it->second;
}

Eigen::VectorXd VimPlan::kernel_row(const std::vector<int>& nb,
                                    const std::vector<int>& s) const {
  const Design& dz = *design_;
  const int m = static_cast<int>(s.size());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(d_x_);
  std::vector<int> tset, dvals;
  // For each S' in S_i^beta the partner subsets T with a nonzero joint
  // moment are exactly T = S' xor D over D subset of S: units hit by one
  // weight factor must carry a Z indicator. Factors per unit: in both S'
  // and T it is 1/p (with Z) or 1/(p(1-p)) (without); in exactly one, 1;
  // in S but untouched, p.
  for_each_nonempty_subset(nb, beta_, [&](const std::vector<int>& sp) {
    const double gsp = g_coeff(sp, dz);
    for (unsigned mask = 0; mask < (1u << m); ++mask) {
      dvals.clear();
      for (int b = 0; b < m; ++b)
        if (mask & (1u << b)) dvals.push_back(s[b]);
      tset.clear();
      double val = 1.0;
      std::size_t ja = 0, jb = 0;
      while (ja < sp.size() && jb < dvals.size()) {
        if (sp[ja] < dvals[jb]) {
          const int j = sp[ja++];
          tset.push_back(j);
          val *= std::binary_search(s.begin(), s.end(), j) ? 1.0 / dz.p[j]
                                                           : dz.q(j);
        } else if (sp[ja] > dvals[jb]) {
          tset.push_back(dvals[jb++]);
        } else {
          ++ja;
          ++jb;
        }
      }
      while (ja < sp.size()) {
        const int j = sp[ja++];
        tset.push_back(j);
        val *= std::binary_search(s.begin(), s.end(), j) ? 1.0 / dz.p[j]
                                                         : dz.q(j);
      }
      while (jb < dvals.size()) tset.push_back(dvals[jb++]);
      if (tset.empty() || static_cast<int>(tset.size()) > beta_) continue;
      for (int b = 0; b < m; ++b) {
        if (mask & (1u << b)) continue;
        const int j = s[b];
        if (!std::binary_search(sp.begin(), sp.end(), j)) val *= dz.p[j];
      }
      const double coef = gsp * g_coeff(tset, dz) * val;
      if (tset.size() == 1) {
        out += coef * t1_.row(tset[0]).transpose();
      } else if (tset.size() == 2) {
        const auto it =
            t2_.find(static_cast<std::uint64_t>(tset[0]) * n_ + tset[1]);
        if (it != t2_.end()) out += coef * it->second;
      } else {
        const auto it = thigh_.find(tset);
        if (it != thigh_.end()) out += coef * it->second;
      }
    }
  });
  return out;
}

Eigen::VectorXd theta_vim(const Dataset& ds, const VimPlan& plan,
                          Diagnostics* diag) {
  if (plan.beta() != ds.beta)
    throw std::invalid_argument("theta_vim: plan was built for a different beta");
  const int n = ds.n();
  const int d = ds.d_x();
  Eigen::VectorXd num = Eigen::VectorXd::Zero(d);
  if (ds.beta == 1) {
    // Closed-form aggregation: with singleton subsets only,
    //   sum_{i'} kernel(i,i',{})  X_{i'} = R_i = sum_{j in N_i} q_j T_j and
    //   sum_{i'} kernel(i,i',{k}) X_{i'} = p_k R_i + (1-2p_k) q_k T_k,
    // so each unit contributes in O(|N_i| d_X) without touching pairs.
    for (int i = 0; i < n; ++i) {
      const auto& nb = ds.graph.in_neighbors[i];
      Eigen::VectorXd r = Eigen::VectorXd::Zero(d);
      double tsum = 0.0;
      for (int j : nb) {
        r += ds.design.q(j) * plan.subset_sum_row1(j).transpose();
        const double p = ds.design.p[j];
        tsum += (p - ds.z[j]) / (1.0 - p);
      }
      const double a0 = ds.y[i] * (1.0 + tsum);
      double c0 = a0;
      for (int j : nb) {
        const double p = ds.design.p[j];
        const double ak = -ds.y[i] * (p - ds.z[j]) / ((1.0 - p) * p);
        c0 += ak * p;
        num += ak * (1.0 - 2.0 * p) * ds.design.q(j) *
               plan.subset_sum_row1(j).transpose();
      }
      num += c0 * r;
    }
  } else {
    for (int i = 0; i < n; ++i) {
      const auto subsets = neighbor_subsets(ds.graph, i, ds.beta);
      const auto ah = alpha_hat_unit(ds, i);
      for (std::size_t k = 0; k < subsets.size(); ++k) {
        if (ah[k] == 0.0) continue;
        num += ah[k] * plan.kernel_row(ds.graph.in_neighbors[i], subsets[k]);
      }
    }
  }
  num /= static_cast<double>(n) * static_cast<double>(n);
  return solve_sym(plan.gram(), num, diag);
}

Eigen::VectorXd theta_vim(const Dataset& ds, Diagnostics* diag) {
  const VimPlan plan(ds.graph, ds.design, ds.beta, ds.x);
  return theta_vim(ds, plan, diag);
}

Eigen::VectorXd theta_reg_population(const InteractionModel& model,
                                     const Eigen::MatrixXd& x,
                                     const Design& design,
                                     Diagnostics* diag) {
  const int n = model.graph.n;
  const int d = static_cast<int>(x.cols());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(d);
  for (int i = 0; i < n; ++i) {
    const double mii = pair_gram(model.graph, design, model.beta, i, i);
    a += mii * (x.row(i).transpose() * x.row(i));
    double ey = 0.0;  // E[omega_i^2 Y_i]
    for (const auto& [s, alpha] : model.coef[i])
      ey += alpha * vim_kernel(model.graph, design, model.beta, i, i, s);
    b += ey * x.row(i).transpose();
  }
  a /= n;
  b /= n;
  return solve_sym(a, b, diag);
}

Eigen::VectorXd theta_vim_population(const InteractionModel& model,
                                     const Eigen::MatrixXd& x,
                                     const Design& design,
                                     Diagnostics* diag) {
  const int n = model.graph.n;
  const VimPlan plan(model.graph, design, model.beta, x);
  Eigen::VectorXd num = Eigen::VectorXd::Zero(static_cast<int>(x.cols()));
  for (int i = 0; i < n; ++i)
    for (const auto& [s, alpha] : model.coef[i]) {
      if (alpha == 0.0) continue;
      num += alpha * plan.kernel_row(model.graph.in_neighbors[i], s);
    }
  num /= static_cast<double>(n) * static_cast<double>(n);
  return solve_sym(plan.gram(), num, diag);
}

EstimateReport dm_estimate(const Dataset& ds) {
  double s1 = 0.0, s0 = 0.0;
  int n1 = 0, n0 = 0;
  for (int i = 0; i < ds.n(); ++i) {
    if (ds.z[i]) {
      s1 += ds.y[i];
      ++n1;
    } else {
      s0 += ds.y[i];
      ++n0;
    }
  }
  if (n1 == 0 || n0 == 0)
    throw std::runtime_error("dm_estimate: a treatment group is empty");
  EstimateReport rep;
  rep.estimator = "DM";
  rep.estimate = s1 / n1 - s0 / n0;
  check_finite(rep);
  return rep;
}

EstimateReport lin_estimate(const Dataset& ds, Eigen::VectorXd* theta_lin) {
  const int n = ds.n();
  const int d = ds.d_x();
  std::array<std::vector<int>, 2> groups;
  for (int i = 0; i < n; ++i) groups[ds.z[i]].push_back(i);
  if (groups[0].empty() || groups[1].empty())
    throw std::runtime_error("lin_estimate: a treatment group is empty");
  Diagnostics diag;
  std::array<Eigen::VectorXd, 2> theta;
  std::array<double, 2> adjusted_mean{};
  for (int g = 0; g < 2; ++g) {
    const auto& idx = groups[g];
    const double m = static_cast<double>(idx.size());
    Eigen::RowVectorXd xbar = Eigen::RowVectorXd::Zero(d);
    double ybar = 0.0;
    for (int i : idx) {
      xbar += ds.x.row(i);
      ybar += ds.y[i];
    }
    xbar /= m;
    ybar /= m;
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d, d);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(d);
    for (int i : idx) {
      const Eigen::RowVectorXd xc = ds.x.row(i) - xbar;
      a += xc.transpose() * xc;
      b += (ds.y[i] - ybar) * xc.transpose();
    }
    Diagnostics local;
    theta[g] = solve_sym(a, b, &local);
    diag.gram_condition = std::max(diag.gram_condition, local.gram_condition);
    diag.pseudo_inverse = diag.pseudo_inverse || local.pseudo_inverse;
    adjusted_mean[g] = ybar - theta[g].dot(xbar);
  }
  if (theta_lin) {
    const double n0 = static_cast<double>(groups[0].size());
    const double n1 = static_cast<double>(groups[1].size());
    *theta_lin = (n0 / n) * theta[1] + (n1 / n) * theta[0];
  }
  EstimateReport rep;
  rep.estimator = "Lin";
  rep.estimate = adjusted_mean[1] - adjusted_mean[0];
  rep.diagnostics = diag;
  check_finite(rep);
  return rep;
}

EstimateReport estimate_snipe(const Dataset& ds) {
  EstimateReport rep = estimate_tte_theta(ds, Eigen::VectorXd::Zero(ds.d_x()));
  rep.estimator = "SNIPE";
  rep.theta.reset();
  return rep;
}

EstimateReport estimate_reg(const Dataset& ds) {
  Diagnostics diag;
  const Eigen::VectorXd th = theta_reg(ds, &diag);
  EstimateReport rep = estimate_tte_theta(ds, th);
  rep.estimator = "Reg-SNIPE";
  rep.theta = th;
  rep.diagnostics = diag;
  return rep;
}

EstimateReport estimate_vim(const Dataset& ds, const VimPlan& plan) {
  Diagnostics diag;
  const Eigen::VectorXd th = theta_vim(ds, plan, &diag);
  EstimateReport rep = estimate_tte_theta(ds, th);
  rep.estimator = "VIM-SNIPE";
  rep.theta = th;
  rep.diagnostics = diag;
  return rep;
}

EstimateReport estimate_vim(const Dataset& ds) {
  const VimPlan plan(ds.graph, ds.design, ds.beta, ds.x);
  return estimate_vim(ds, plan);
}

namespace ref {

Eigen::VectorXd theta_vim(const Dataset& ds, Diagnostics* diag) {
  const Graph& g = ds.graph;
  const int n = ds.n();
  const int d = ds.d_x();
  const auto out = out_index(g);
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd num = Eigen::VectorXd::Zero(d);
  bool any_pair = false;
  for (int i = 0; i < n; ++i) {
    const auto subsets = neighbor_subsets(g, i, ds.beta);
    std::vector<double> ah(subsets.size());
    for (std::size_t k = 0; k < subsets.size(); ++k)
      ah[k] = alpha_hat(ds, i, subsets[k]);
    std::vector<int> partners;
    for (int j : g.in_neighbors[i])
      partners.insert(partners.end(), out[j].begin(), out[j].end());
    std::sort(partners.begin(), partners.end());
    partners.erase(std::unique(partners.begin(), partners.end()),
                   partners.end());
    for (int i2 : partners) {
      const double m = pair_gram(g, ds.design, ds.beta, i, i2);
      if (m != 0.0) any_pair = true;
      gram += m * (ds.x.row(i).transpose() * ds.x.row(i2));
      // kernel values cached per (i, i2) across all subsets S
      std::vector<double> kern(subsets.size());
      for (std::size_t k = 0; k < subsets.size(); ++k)
        kern[k] = vim_kernel(g, ds.design, ds.beta, i, i2, subsets[k]);
      double w = 0.0;
      for (std::size_t k = 0; k < subsets.size(); ++k) w += ah[k] * kern[k];
      num += w * ds.x.row(i2).transpose();
    }
  }
  if (!any_pair)
    throw std::runtime_error(
        "theta_vim: no overlapping unit pairs with nonzero weight covariance");
  const double n2 = static_cast<double>(n) * static_cast<double>(n);
  gram /= n2;
  num /= n2;
  return solve_sym(gram, num, diag);
}

}  // namespace ref

}  // namespace snipe
