#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "snipe/rng.hpp"

namespace snipe {

/// Directed interference graph. Row i holds the in-neighborhood N_i: the
/// units whose treatment can affect unit i's outcome (A_ij = 1 iff j is in
/// N_i, so row sums are in-degrees). Self-loops are mandatory; neighbor
/// lists are sorted and duplicate-free.
struct Graph {
  int n = 0;
  std::vector<std::vector<int>> in_neighbors;

  int degree(int i) const { return static_cast<int>(in_neighbors[i].size()); }

  /// Throws std::invalid_argument if any structural invariant is violated.
  void validate() const;
};

/// Graph with N_i = {i} for every unit (the SUTVA/no-interference design).
Graph make_self_loops(int n);

/// (d_in, d_out): maximum in-degree and maximum out-degree.
std::pair<int, int> max_degrees(const Graph& g);

/// Inverted adjacency index: entry j lists every unit i with j in N_i.
/// Used to discover overlapping-neighborhood pairs without O(n^2) scans.
std::vector<std::vector<int>> out_index(const Graph& g);

/// All subsets S of N_i with |S| <= beta, including the empty set, ordered
/// by size and then lexicographically. The order is the canonical
/// coefficient indexing used throughout the library.
std::vector<std::vector<int>> neighbor_subsets(const Graph& g, int i,
                                               int beta);

/// Visit every nonempty subset of `pool` with size <= beta in the canonical
/// size-then-lex order, without materializing the collection. `pool` must be
/// sorted. The callback receives a scratch vector valid only for the call.
template <typename Fn>
void for_each_nonempty_subset(const std::vector<int>& pool, int beta, Fn fn) {
  const int d = static_cast<int>(pool.size());
  std::vector<int> pick;
  std::vector<int> subset;
  for (int size = 1; size <= (beta < d ? beta : d); ++size) {
    pick.assign(size, 0);
    for (int k = 0; k < size; ++k) pick[k] = k;
    while (true) {
      subset.resize(size);
      for (int k = 0; k < size; ++k) subset[k] = pool[pick[k]];
      fn(static_cast<const std::vector<int>&>(subset));
      int k = size - 1;
      while (k >= 0 && pick[k] == d - size + k) --k;
      if (k < 0) break;
      ++pick[k];
      for (int m = k + 1; m < size; ++m) pick[m] = pick[m - 1] + 1;
    }
  }
}

/// Number of subsets neighbor_subsets(g, i, beta) returns, without
/// materializing them.
std::uint64_t neighbor_subset_count(const Graph& g, int i, int beta);

/// Directed Erdos-Renyi graph: each ordered pair (j, i), j != i, has j in
/// N_i independently with probability p_edge. Self-loops are deterministic.
Graph gen_erdos_renyi(int n, double p_edge, Rng& rng);

/// Directed soft random geometric graph. Pairwise Euclidean distances of
/// x_true rows are normalized by their maximum; the ordered pair (j, i)
/// becomes an edge independently with probability exp(-d_ij / sigma).
/// Throws std::invalid_argument when all points coincide (the maximum
/// distance is zero and normalization degenerates).
Graph gen_soft_rgg(const Eigen::MatrixXd& x_true, double sigma, Rng& rng);

/// Plain-text graph file: first line "n <N>", then one "j i" line per edge
/// meaning j in N_i (0-based). Self-loops may be omitted in files; they are
/// re-added on load.
Graph load_graph(const std::string& path);
void save_graph(const Graph& g, const std::string& path);

}  // namespace snipe
