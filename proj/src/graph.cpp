#include "snipe/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace snipe {

void Graph::validate() const {
  if (n <= 0) throw std::invalid_argument("Graph: n must be positive");
  if (static_cast<int>(in_neighbors.size()) != n)
    throw std::invalid_argument("Graph: in_neighbors size differs from n");
  for (int i = 0; i < n; ++i) {
    const auto& nb = in_neighbors[i];
    bool has_self = false;
    for (std::size_t k = 0; k < nb.size(); ++k) {
      if (nb[k] < 0 || nb[k] >= n)
        throw std::invalid_argument("Graph: neighbor index out of range");
      if (k > 0 && nb[k] <= nb[k - 1])
        throw std::invalid_argument("Graph: neighbor list not sorted/unique");
      if (nb[k] == i) has_self = true;
    }
    if (!has_self)
      throw std::invalid_argument("Graph: missing self-loop at unit " +
                                  std::to_string(i));
  }
}

Graph make_self_loops(int n) {
  Graph g;
  g.n = n;
  g.in_neighbors.resize(n);
  for (int i = 0; i < n; ++i) g.in_neighbors[i] = {i};
  return g;
}

std::pair<int, int> max_degrees(const Graph& g) {
  int d_in = 0;
  std::vector<int> out_deg(g.n, 0);
  for (int i = 0; i < g.n; ++i) {
    d_in = std::max(d_in, g.degree(i));
    for (int j : g.in_neighbors[i]) ++out_deg[j];
  }
  int d_out = 0;
  for (int c : out_deg) d_out = std::max(d_out, c);
  return {d_in, d_out};
}

std::vector<std::vector<int>> out_index(const Graph& g) {
  std::vector<std::vector<int>> idx(g.n);
  for (int i = 0; i < g.n; ++i)
    for (int j : g.in_neighbors[i]) idx[j].push_back(i);
  return idx;
}

std::vector<std::vector<int>> neighbor_subsets(const Graph& g, int i,
                                               int beta) {
  if (i < 0 || i >= g.n)
    throw std::out_of_range("neighbor_subsets: unit index out of range");
  if (beta < 1) throw std::invalid_argument("neighbor_subsets: beta < 1");
  const auto& nb = g.in_neighbors[i];
  const int d = static_cast<int>(nb.size());

  std::vector<std::vector<int>> subsets;
  subsets.reserve(neighbor_subset_count(g, i, beta));
  subsets.push_back({});  // the empty set always comes first
  std::vector<int> pick;
  for (int size = 1; size <= std::min(beta, d); ++size) {
    // combinations of `size` positions in lexicographic order
    pick.assign(size, 0);
    for (int k = 0; k < size; ++k) pick[k] = k;
    while (true) {
      std::vector<int> s(size);
      for (int k = 0; k < size; ++k) s[k] = nb[pick[k]];
      subsets.push_back(std::move(s));
      int k = size - 1;
      while (k >= 0 && pick[k] == d - size + k) --k;
      if (k < 0) break;
      ++pick[k];
      for (int m = k + 1; m < size; ++m) pick[m] = pick[m - 1] + 1;
    }
  }
  return subsets;
}

std::uint64_t neighbor_subset_count(const Graph& g, int i, int beta) {
  if (i < 0 || i >= g.n)
    throw std::out_of_range("neighbor_subset_count: unit index out of range");
  const auto d = static_cast<std::uint64_t>(g.degree(i));
  std::uint64_t total = 0;
  std::uint64_t binom = 1;  // C(d, 0)
  for (std::uint64_t k = 0; k <= std::min<std::uint64_t>(beta, d); ++k) {
    total += binom;
    binom = binom * (d - k) / (k + 1);
  }
  return total;
}

Graph gen_erdos_renyi(int n, double p_edge, Rng& rng) {
  if (n < 1) throw std::invalid_argument("gen_erdos_renyi: n < 1");
  if (!(p_edge >= 0.0 && p_edge <= 1.0))
    throw std::invalid_argument("gen_erdos_renyi: p_edge outside [0, 1]");

  Graph g;
  g.n = n;
  g.in_neighbors.resize(n);

  // Ordered non-self pairs are laid out i-major; slot s covers the pair
  // (j, i) with i = s / (n-1). Geometric skipping visits only the realized
  // edges, so the cost is proportional to the edge count.
  const std::uint64_t total =
      static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(n - 1);
  if (p_edge >= 1.0) {
    for (int i = 0; i < n; ++i) {
      g.in_neighbors[i].resize(n);
      for (int j = 0; j < n; ++j) g.in_neighbors[i][j] = j;
    }
    return g;
  }
  if (p_edge > 0.0 && total > 0) {
    const double log_q = std::log1p(-p_edge);
    std::uint64_t pos = 0;
    double first = std::log(rng.uniform_pos()) / log_q;
    pos = first >= static_cast<double>(total)
              ? total
              : static_cast<std::uint64_t>(first);
    while (pos < total) {
      const int i = static_cast<int>(pos / (n - 1));
      const int jj = static_cast<int>(pos % (n - 1));
      const int j = jj >= i ? jj + 1 : jj;
      g.in_neighbors[i].push_back(j);
      const double skip = std::log(rng.uniform_pos()) / log_q;
      if (skip >= static_cast<double>(total - pos)) break;
      pos += 1 + static_cast<std::uint64_t>(skip);
    }
  }
  for (int i = 0; i < n; ++i) {
    g.in_neighbors[i].push_back(i);
    std::sort(g.in_neighbors[i].begin(), g.in_neighbors[i].end());
  }
  return g;
}

Graph gen_soft_rgg(const Eigen::MatrixXd& x_true, double sigma, Rng& rng) {
  const int n = static_cast<int>(x_true.rows());
  if (n < 2) throw std::invalid_argument("gen_soft_rgg: need n >= 2");
  if (!(sigma > 0.0)) throw std::invalid_argument("gen_soft_rgg: sigma <= 0");

  // Pass 1: maximum pairwise squared distance (for normalization).
  double max_sq = 0.0;
#pragma omp parallel for schedule(static) reduction(max : max_sq)
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double sq = (x_true.row(i) - x_true.row(j)).squaredNorm();
      if (sq > max_sq) max_sq = sq;
    }
  }
  if (max_sq <= 0.0)
    throw std::invalid_argument(
        "gen_soft_rgg: all covariate rows coincide; distances degenerate");
  const double max_dist = std::sqrt(max_sq);

  // Pass 2: sample each ordered pair independently. Randomness is
  // counter-based on the pair index, so rows can be built in parallel while
  // staying deterministic for a given rng state.
  const std::uint64_t base = rng.next_u64();
  Graph g;
  g.n = n;
  g.in_neighbors.resize(n);
  // u is a multiple of 2^-53, so u < exp(-dist/sigma) is decidable without
  // the exp whenever dist/sigma > 53 ln 2 (then prob < 2^-53 <= any u > 0);
  // only u == 0 still connects. Skipping the far pairs changes nothing.
  const double cut = 53.0 * std::log(2.0) * sigma * max_dist;
  const double cut_sq = cut * cut;
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    auto& row = g.in_neighbors[i];
    for (int j = 0; j < n; ++j) {
      if (j == i) {
        row.push_back(i);
        continue;
      }
      const double sq = (x_true.row(i) - x_true.row(j)).squaredNorm();
      const std::uint64_t bits =
          mix64(base, static_cast<std::uint64_t>(i) * n + j);
      if (sq > cut_sq && (bits >> 11) != 0) continue;
      const double dist = std::sqrt(sq) / max_dist;
      const double prob = std::exp(-dist / sigma);
      const double u = static_cast<double>(bits >> 11) * 0x1.0p-53;
      if (u < prob) row.push_back(j);
    }
  }
  return g;
}

Graph load_graph(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_graph: cannot open " + path);
  std::string tag;
  int n = 0;
  if (!(in >> tag >> n) || tag != "n")
    throw std::runtime_error("load_graph: expected header line 'n <N>'");
  if (n <= 0) throw std::runtime_error("load_graph: non-positive n");
  Graph g;
  g.n = n;
  g.in_neighbors.resize(n);
  int j = 0, i = 0;
  while (in >> j >> i) {
    if (j < 0 || j >= n || i < 0 || i >= n)
      throw std::runtime_error("load_graph: edge index out of range");
    g.in_neighbors[i].push_back(j);
  }
  if (!in.eof() && in.fail()) {
    // trailing garbage that is not a pair of integers
    in.clear();
    std::string rest;
    if (in >> rest && !rest.empty())
      throw std::runtime_error("load_graph: malformed edge line near '" +
                               rest + "'");
  }
  for (int u = 0; u < n; ++u) {
    auto& row = g.in_neighbors[u];
    row.push_back(u);  // self-loops may be omitted in files
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
  }
  return g;
}

void save_graph(const Graph& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_graph: cannot open " + path);
  out << "n " << g.n << "\n";
  for (int i = 0; i < g.n; ++i)
    for (int j : g.in_neighbors[i])
      if (j != i) out << j << " " << i << "\n";
  if (!out) throw std::runtime_error("save_graph: write failed for " + path);
}

}  // namespace snipe
