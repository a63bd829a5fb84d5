#include "constel/max_clique.hpp"

#include <algorithm>
#include <bit>

#include "constel/errors.hpp"

namespace constel {

CliqueGraph::CliqueGraph(std::size_t n)
    : n_(n), words_((n + 63) / 64), adj_(n * ((n + 63) / 64), 0), weights_(n * n, 0.0) {}

void CliqueGraph::add_edge(std::size_t a, std::size_t b, double weight) {
  if (a >= n_ || b >= n_) throw DimensionMismatchError("CliqueGraph: vertex out of range");
  if (a == b) return;
  adj_[a * words_ + b / 64] |= std::uint64_t{1} << (b % 64);
  adj_[b * words_ + a / 64] |= std::uint64_t{1} << (a % 64);
  weights_[a * n_ + b] = weight;
  weights_[b * n_ + a] = weight;
}

bool CliqueGraph::adjacent(std::size_t a, std::size_t b) const {
  return (adj_[a * words_ + b / 64] >> (b % 64)) & 1U;
}

std::size_t CliqueGraph::degree(std::size_t v) const {
  std::size_t d = 0;
  for (std::size_t w = 0; w < words_; ++w) d += static_cast<std::size_t>(std::popcount(row(v)[w]));
  return d;
}

namespace {

using Bits = std::vector<std::uint64_t>;

bool none(const Bits& b) {
  for (auto w : b) {
    if (w) return false;
  }
  return true;
}

class Search {
 public:
  Search(const CliqueGraph& g, std::size_t budget) : g_(g), budget_(budget) {
    const std::size_t n = g_.size();
    words_ = (n + 63) / 64;
    perm_ = degeneracy_order();
    std::vector<std::size_t> pos(n);
    for (std::size_t i = 0; i < n; ++i) pos[perm_[i]] = i;
    adj_.assign(n, Bits(words_, 0));
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = 0; b < n; ++b) {
        if (a != b && g_.adjacent(a, b)) set(adj_[pos[a]], pos[b]);
      }
    }
  }

  std::vector<std::size_t> run(CliqueSearchStats* stats) {
    if (g_.size() == 0) return {};
    Bits all(words_, 0);
    for (std::size_t i = 0; i < g_.size(); ++i) set(all, i);
    expand(all);
    if (stats) {
      stats->nodes = nodes_;
      stats->tie_search_exhausted = strict_;
    }
    std::vector<std::size_t> out;
    out.reserve(best_.size());
    for (auto p : best_) out.push_back(perm_[p]);
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  static void set(Bits& b, std::size_t i) { b[i / 64] |= std::uint64_t{1} << (i % 64); }
  static void reset(Bits& b, std::size_t i) { b[i / 64] &= ~(std::uint64_t{1} << (i % 64)); }

  // Highest-core vertices first, so they receive the low colours.
  std::vector<std::size_t> degeneracy_order() const {
    const std::size_t n = g_.size();
    std::vector<std::size_t> deg(n);
    for (std::size_t v = 0; v < n; ++v) deg[v] = g_.degree(v);
    std::vector<char> removed(n, 0);
    std::vector<std::size_t> order;
    order.reserve(n);
    for (std::size_t step = 0; step < n; ++step) {
      std::size_t pick = n;
      for (std::size_t v = 0; v < n; ++v) {
        if (!removed[v] && (pick == n || deg[v] < deg[pick])) pick = v;
      }
      removed[pick] = 1;
      order.push_back(pick);
      for (std::size_t v = 0; v < n; ++v) {
        if (!removed[v] && g_.adjacent(pick, v)) --deg[v];
      }
    }
    std::reverse(order.begin(), order.end());
    return order;
  }

  // Greedy sequential colouring of `cand`; vertices come out grouped by
  // colour with bound[i] = colour of vertices[i] (1-based).
  void colour(const Bits& cand, std::vector<std::size_t>& vertices,
              std::vector<std::size_t>& bound) const {
    vertices.clear();
    bound.clear();
    Bits uncoloured = cand;
    std::size_t c = 0;
    while (!none(uncoloured)) {
      ++c;
      Bits q = uncoloured;
      for (std::size_t w = 0; w < words_; ++w) {
        while (q[w]) {
          const std::size_t v = w * 64 + static_cast<std::size_t>(std::countr_zero(q[w]));
          reset(q, v);
          reset(uncoloured, v);
          for (std::size_t x = 0; x < words_; ++x) q[x] &= ~adj_[v][x];
          vertices.push_back(v);
          bound.push_back(c);
        }
      }
    }
  }

  void consider() {
    if (current_.size() < best_.size()) return;
    if (current_.size() == best_.size()) {
      if (weight_ > best_weight_) return;
      if (weight_ == best_weight_) {
        std::vector<std::size_t> a;
        std::vector<std::size_t> b;
        for (auto p : current_) a.push_back(perm_[p]);
        for (auto p : best_) b.push_back(perm_[p]);
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        if (!(a < b)) return;
      }
    }
    best_ = current_;
    best_weight_ = weight_;
  }

  void expand(Bits cand) {
    ++nodes_;
    if (!strict_ && nodes_ > budget_) strict_ = true;
    std::vector<std::size_t> vertices;
    std::vector<std::size_t> bound;
    colour(cand, vertices, bound);
    for (std::size_t i = vertices.size(); i-- > 0;) {
      const std::size_t reachable = current_.size() + bound[i];
      if (reachable < best_.size() || (strict_ && reachable == best_.size())) return;
      const std::size_t v = vertices[i];
      double added = 0.0;
      for (auto u : current_) added += g_.weight(perm_[u], perm_[v]);
      current_.push_back(v);
      weight_ += added;
      Bits next(words_);
      for (std::size_t w = 0; w < words_; ++w) next[w] = cand[w] & adj_[v][w];
      if (none(next)) {
        consider();
      } else {
        expand(std::move(next));
      }
      weight_ -= added;
      current_.pop_back();
      reset(cand, v);
    }
  }

  const CliqueGraph& g_;
  std::size_t budget_;
  std::size_t words_ = 0;
  std::vector<std::size_t> perm_;  // bit position -> vertex
  std::vector<Bits> adj_;          // in bit positions
  std::size_t nodes_ = 0;
  bool strict_ = false;
  std::vector<std::size_t> current_;
  double weight_ = 0.0;
  std::vector<std::size_t> best_;
  double best_weight_ = 0.0;
};

}  // namespace

std::vector<std::size_t> max_clique(const CliqueGraph& graph, std::size_t tie_budget,
                                    CliqueSearchStats* stats) {
  return Search(graph, tie_budget).run(stats);
}

}  // namespace constel
