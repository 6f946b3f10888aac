#include "snipe/outcome_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace snipe {

namespace {

// canonical subset order: by size, then lexicographic
bool subset_less(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) return a.size() < b.size();
  return a < b;
}

}  // namespace

double InteractionModel::alpha(int i, const std::vector<int>& s) const {
  const auto& row = coef[i];
  auto it = std::lower_bound(
      row.begin(), row.end(), s,
      [](const auto& entry, const std::vector<int>& key) {
        return subset_less(entry.first, key);
      });
  if (it != row.end() && it->first == s) return it->second;
  return 0.0;
}

void InteractionModel::set_alpha(int i, std::vector<int> s, double value) {
  auto& row = coef[i];
  auto it = std::lower_bound(
      row.begin(), row.end(), s,
      [](const auto& entry, const std::vector<int>& key) {
        return subset_less(entry.first, key);
      });
  if (it != row.end() && it->first == s) {
    it->second = value;
  } else {
    row.insert(it, {std::move(s), value});
  }
}

double InteractionModel::y_max() const {
  double worst = 0.0;
  for (const auto& row : coef) {
    double total = 0.0;
    for (const auto& [s, a] : row) total += std::abs(a);
    worst = std::max(worst, total);
  }
  return worst;
}

void InteractionModel::validate() const {
  graph.validate();
  if (beta < 1) throw std::invalid_argument("InteractionModel: beta < 1");
  if (static_cast<int>(coef.size()) != graph.n)
    throw std::invalid_argument("InteractionModel: coef size differs from n");
  for (int i = 0; i < graph.n; ++i) {
    const auto& nb = graph.in_neighbors[i];
    for (const auto& [s, a] : coef[i]) {
      if (static_cast<int>(s.size()) > beta)
        throw std::invalid_argument(
            "InteractionModel: subset larger than beta at unit " +
            std::to_string(i));
      for (std::size_t k = 0; k < s.size(); ++k) {
        if (k > 0 && s[k] <= s[k - 1])
          throw std::invalid_argument(
              "InteractionModel: subset not sorted/unique");
        if (!std::binary_search(nb.begin(), nb.end(), s[k]))
          throw std::invalid_argument(
              "InteractionModel: subset member outside N_i at unit " +
              std::to_string(i));
      }
    }
  }
}

Eigen::VectorXd evaluate_potential(const InteractionModel& model,
                                   const std::vector<int>& z) {
  const int n = model.graph.n;
  if (static_cast<int>(z.size()) != n)
    throw std::invalid_argument("evaluate_potential: z length differs from n");
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    double yi = 0.0;
    for (const auto& [s, a] : model.coef[i]) {
      bool all_on = true;
      for (int j : s) {
        if (z[j] == 0) {
          all_on = false;
          break;
        }
      }
      if (all_on) yi += a;
    }
    y[i] = yi;
  }
  return y;
}

double true_tte(const InteractionModel& model) {
  double total = 0.0;
  for (const auto& row : model.coef)
    for (const auto& [s, a] : row)
      if (!s.empty()) total += a;
  return total / model.graph.n;
}

double AlphaMatrix::row_sum(int i) const {
  double s = diag[i];
  for (const auto& [j, v] : off[i]) s += v;
  return s;
}

Eigen::MatrixXd AlphaMatrix::to_dense() const {
  const int size = n();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(size, size);
  for (int i = 0; i < size; ++i) {
    m(i, i) = diag[i];
    for (const auto& [j, v] : off[i]) m(i, j) = v;
  }
  return m;
}

double abs_sum_quadratic_form(const Eigen::MatrixXd& x,
                              const Eigen::MatrixXd& psi) {
  const int n = static_cast<int>(x.rows());
  const Eigen::MatrixXd xpsi = x * psi;  // n x d
  constexpr int kBlock = 256;
  const int nblocks = (n + kBlock - 1) / kBlock;
  // Per-block partials combined in index order so the result does not depend
  // on how blocks were distributed across threads.
  std::vector<double> partial(nblocks, 0.0);
#pragma omp parallel for schedule(static)
  for (int b = 0; b < nblocks; ++b) {
    const int start = b * kBlock;
    const int rows = std::min(kBlock, n - start);
    const Eigen::MatrixXd block =
        xpsi.middleRows(start, rows) * x.transpose();  // rows x n
    partial[b] = block.cwiseAbs().sum();
  }
  double total = 0.0;
  for (double v : partial) total += v;
  return total;
}

namespace {

struct NetworkParts {
  std::vector<double> v, u;
  std::vector<double> col_scale;  // c_offdiag_j / s_j
  std::vector<int> degree;        // in-degree d_i
};

// Shared preamble of both generator algorithms: draw v and u when absent,
// form the degree-weighted adjacency's column normalizer, and return the
// per-column scale of the off-diagonal part.
NetworkParts network_parts(const Graph& a, double diag_c, double r,
                           const std::vector<double>* v_in,
                           const std::vector<double>* u_in, Rng& rng) {
  const int n = a.n;
  const double offdiag = r * diag_c;
  NetworkParts parts;
  if (v_in) {
    if (static_cast<int>(v_in->size()) != n)
      throw std::invalid_argument("network generator: v has wrong length");
    parts.v = *v_in;
  } else {
    parts.v.resize(n);
    for (double& x : parts.v) x = rng.uniform();
  }
  if (u_in) {
    if (static_cast<int>(u_in->size()) != n)
      throw std::invalid_argument("network generator: u has wrong length");
    parts.u = *u_in;
  } else {
    parts.u.resize(n);
    for (double& x : parts.u) x = rng.uniform();
  }

  parts.degree.resize(n);
  for (int i = 0; i < n; ++i) parts.degree[i] = a.degree(i);

  // column sums of A~ = D_in (A - I); zero columns are mapped to 1
  std::vector<double> col_sum(n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j : a.in_neighbors[i])
      if (j != i) col_sum[j] += parts.degree[i];
  parts.col_scale.resize(n);
  for (int j = 0; j < n; ++j) {
    const double s = col_sum[j] == 0.0 ? 1.0 : col_sum[j];
    parts.col_scale[j] = offdiag * parts.v[j] / s;
  }
  return parts;
}

}  // namespace

AlphaMatrix gen_alpha_linear(const Graph& a, const Eigen::MatrixXd& x_true,
                             const Eigen::MatrixXd& psi, double diag_c,
                             double r, const std::vector<double>* v,
                             const std::vector<double>* u, Rng& rng) {
  const int n = a.n;
  if (static_cast<int>(x_true.rows()) != n)
    throw std::invalid_argument("gen_alpha_linear: x_true rows differ from n");
  if (psi.rows() != x_true.cols() || psi.cols() != x_true.cols())
    throw std::invalid_argument("gen_alpha_linear: psi shape mismatch");
  const double offdiag = r * diag_c;
  const NetworkParts parts = network_parts(a, diag_c, r, v, u, rng);

  // X_psi = x psi x^T, rescaled so its absolute entries sum to n^2 / 5.
  // Only the entries on the adjacency support are ever needed, so the
  // quadratic form is evaluated per edge instead of as a dense matrix.
  const double denom = abs_sum_quadratic_form(x_true, psi);
  const double scale =
      denom > 0.0 ? static_cast<double>(n) * static_cast<double>(n) /
                        (5.0 * denom)
                  : 0.0;
  const Eigen::MatrixXd xpsi = x_true * psi;

  AlphaMatrix out;
  out.diag.resize(n);
  out.off.resize(n);
  for (int i = 0; i < n; ++i) {
    const double xpsi_ii = xpsi.row(i).dot(x_true.row(i)) * scale;
    out.diag[i] = diag_c * parts.u[i] + xpsi_ii * diag_c;
    auto& row = out.off[i];
    for (int j : a.in_neighbors[i]) {
      if (j == i) continue;
      const double structural = parts.degree[i] * parts.col_scale[j];
      const double covariate =
          offdiag * (xpsi.row(i).dot(x_true.row(j)) * scale);
      row.emplace_back(j, structural + covariate);
    }
  }
  return out;
}

AlphaMatrix gen_alpha_quad(const Graph& a, const Eigen::MatrixXd& x_true,
                           double diag_c, double r,
                           const std::vector<double>* v,
                           const std::vector<double>* u, Rng& rng) {
  const int n = a.n;
  if (static_cast<int>(x_true.rows()) != n)
    throw std::invalid_argument("gen_alpha_quad: x_true rows differ from n");
  const NetworkParts parts = network_parts(a, diag_c, r, v, u, rng);

  AlphaMatrix out;
  out.diag.resize(n);
  out.off.resize(n);
  for (int i = 0; i < n; ++i) {
    out.diag[i] = (x_true.row(i).sum() + diag_c) * parts.u[i];
    auto& row = out.off[i];
    for (int j : a.in_neighbors[i]) {
      if (j == i) continue;
      row.emplace_back(j, parts.degree[i] * parts.col_scale[j]);
    }
  }
  return out;
}

InteractionModel build_sim_outcome(const SimOutcomeSpec& spec, int beta,
                                   const Graph& graph, int* degenerate_units) {
  const int n = graph.n;
  if (beta != 1 && beta != 2)
    throw std::invalid_argument("build_sim_outcome: beta must be 1 or 2");
  if (static_cast<int>(spec.alpha0.size()) != n ||
      spec.alpha_linear.n() != n ||
      static_cast<int>(spec.x_true.rows()) != n)
    throw std::invalid_argument("build_sim_outcome: size mismatch");
  if (beta == 2 && spec.alpha_quad.n() != n)
    throw std::invalid_argument("build_sim_outcome: alpha_quad required");

  InteractionModel model;
  model.beta = beta;
  model.graph = graph;
  model.coef.resize(n);
  int degenerate = 0;

  for (int i = 0; i < n; ++i) {
    auto& row = model.coef[i];
    const double intercept =
        spec.alpha0[i] + spec.theta_true.dot(spec.x_true.row(i));
    row.push_back({{}, intercept});

    // singletons: the linear matrix over N_i (diagonal = own effect);
    // both the neighbor list and the off row are ascending in j
    {
      const auto& lin_off = spec.alpha_linear.off[i];
      std::size_t cursor = 0;
      for (int j : graph.in_neighbors[i]) {
        double a = 0.0;
        if (j == i) {
          a = spec.alpha_linear.diag[i];
        } else {
          while (cursor < lin_off.size() && lin_off[cursor].first < j)
            ++cursor;
          if (cursor < lin_off.size() && lin_off[cursor].first == j)
            a = lin_off[cursor].second;
        }
        if (a != 0.0) row.push_back({{j}, a});
      }
    }

    if (beta == 2) {
      // Q_i expands into pair terms 2 a_j a_k / (sum_j a_j)^2; z_j^2 = z_j
      // makes the diagonal of the square cancel exactly.
      const double denom = spec.alpha_quad.row_sum(i);
      if (denom == 0.0) {
        ++degenerate;  // Q_i defined as zero for this unit
      } else {
        const double inv_sq = 1.0 / (denom * denom);
        // gather the quadratic row over N_i in ascending-neighbor order
        std::vector<std::pair<int, double>> qrow;
        const auto& quad_off = spec.alpha_quad.off[i];
        std::size_t cursor = 0;
        for (int j : graph.in_neighbors[i]) {
          double a = 0.0;
          if (j == i) {
            a = spec.alpha_quad.diag[i];
          } else {
            while (cursor < quad_off.size() && quad_off[cursor].first < j)
              ++cursor;
            if (cursor < quad_off.size() && quad_off[cursor].first == j)
              a = quad_off[cursor].second;
          }
          qrow.emplace_back(j, a);
        }
        for (std::size_t aIdx = 0; aIdx < qrow.size(); ++aIdx) {
          for (std::size_t bIdx = aIdx + 1; bIdx < qrow.size(); ++bIdx) {
            const double coeff =
                2.0 * qrow[aIdx].second * qrow[bIdx].second * inv_sq;
            if (coeff != 0.0)
              row.push_back({{qrow[aIdx].first, qrow[bIdx].first}, coeff});
          }
        }
      }
    }

    std::sort(row.begin(), row.end(), [](const auto& lhs, const auto& rhs) {
      return subset_less(lhs.first, rhs.first);
    });
  }

  if (degenerate_units) *degenerate_units = degenerate;
  return model;
}

void save_model(const InteractionModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_model: cannot open " + path);
  for (int i = 0; i < model.graph.n; ++i) {
    for (const auto& [s, a] : model.coef[i]) {
      out << i << " | ";
      if (s.empty()) {
        out << "-";
      } else {
        for (std::size_t k = 0; k < s.size(); ++k) {
          if (k) out << ",";
          out << s[k];
        }
      }
      out << " | " << a << "\n";
    }
  }
  if (!out) throw std::runtime_error("save_model: write failed for " + path);
}

InteractionModel load_model(const std::string& path, const Graph& graph,
                            int beta) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_model: cannot open " + path);
  InteractionModel model;
  model.beta = beta;
  model.graph = graph;
  model.coef.resize(graph.n);

  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string unit_part, subset_part, alpha_part;
    if (!std::getline(fields, unit_part, '|') ||
        !std::getline(fields, subset_part, '|') ||
        !std::getline(fields, alpha_part))
      throw std::runtime_error("load_model: malformed line " +
                               std::to_string(line_no));
    const int i = std::stoi(unit_part);
    if (i < 0 || i >= graph.n)
      throw std::runtime_error("load_model: unit out of range on line " +
                               std::to_string(line_no));
    // strip whitespace around the subset field
    std::string subset_text;
    for (char c : subset_part)
      if (!std::isspace(static_cast<unsigned char>(c))) subset_text += c;
    std::vector<int> s;
    if (subset_text != "-") {
      std::istringstream items(subset_text);
      std::string item;
      while (std::getline(items, item, ','))
        if (!item.empty()) s.push_back(std::stoi(item));
      std::sort(s.begin(), s.end());
    }
    model.set_alpha(i, std::move(s), std::stod(alpha_part));
  }
  model.validate();
  return model;
}

}  // namespace snipe
