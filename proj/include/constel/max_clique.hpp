#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace constel {

/// Undirected graph on vertices 0..n-1 with bitset adjacency rows and an
/// optional symmetric weight per edge.
class CliqueGraph {
 public:
  explicit CliqueGraph(std::size_t n);

  std::size_t size() const { return n_; }
  void add_edge(std::size_t a, std::size_t b, double weight = 0.0);
  bool adjacent(std::size_t a, std::size_t b) const;
  double weight(std::size_t a, std::size_t b) const { return weights_[a * n_ + b]; }
  std::size_t degree(std::size_t v) const;
  const std::uint64_t* row(std::size_t v) const { return adj_.data() + v * words_; }
  std::size_t words() const { return words_; }

 private:
  std::size_t n_;
  std::size_t words_;
  std::vector<std::uint64_t> adj_;
  std::vector<double> weights_;
};

struct CliqueSearchStats {
  std::size_t nodes = 0;
  bool tie_search_exhausted = false;  // true when the node budget cut tie exploration
};

/// Exact maximum clique by branch and bound with bitset greedy-colouring
/// bounds over a degeneracy ordering.
///
/// Among maximum cliques the one with the smallest total edge weight wins,
/// then the lexicographically smallest sorted vertex set. Equal-size cliques
/// are explored for that tie-break until `tie_budget` search nodes have been
/// expanded; after that the bound becomes strict and only larger cliques are
/// sought, so the size stays exact while the tie-break covers the cliques
/// visited so far. Returns ascending vertex indices.
std::vector<std::size_t> max_clique(const CliqueGraph& graph, std::size_t tie_budget = 20000,
                                    CliqueSearchStats* stats = nullptr);

}  // namespace constel
