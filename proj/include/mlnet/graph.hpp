#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mlnet/error.hpp"

namespace mlnet {

using Vertex = std::size_t;
using Edge = std::pair<Vertex, Vertex>;
/// A vertex permutation: perm[v] is the image of v.
using Permutation = std::vector<Vertex>;

enum class GraphFamily { path, star, cycle, complete, random, edge_list };

inline const char* to_string(GraphFamily family) {
  switch (family) {
    case GraphFamily::path: return "path";
    case GraphFamily::star: return "star";
    case GraphFamily::cycle: return "cycle";
    case GraphFamily::complete: return "complete";
    case GraphFamily::random: return "random";
    case GraphFamily::edge_list: return "edges";
  }
  return "unknown";
}

/// Connected undirected graph in which every vertex carries a self-loop.
///
/// Neighbor sets N(v) always contain v, and the degree is d_v = |N(v)|, so a
/// path endpoint has degree 2 and an interior path vertex degree 3. Values
/// are immutable after construction.
class Graph {
 public:
  /// Builds a graph from neighbor lists that may omit v itself. Symmetry,
  /// reflexivity and connectivity are enforced here.
  static Graph from_adjacency(std::vector<std::vector<Vertex>> adjacency,
                              GraphFamily family = GraphFamily::edge_list,
                              std::vector<Permutation> automorphisms = {}) {
    const std::size_t n = adjacency.size();
    if (n == 0) throw std::invalid_argument("graph needs at least one vertex");
    std::vector<std::vector<Vertex>> sets(n);
    for (Vertex v = 0; v < n; ++v) {
      sets[v].push_back(v);
      for (Vertex w : adjacency[v]) {
        if (w >= n) throw VertexOutOfRange(w, n);
        sets[v].push_back(w);
        sets[w].push_back(v);
      }
    }
    for (auto& s : sets) {
      std::sort(s.begin(), s.end());
      s.erase(std::unique(s.begin(), s.end()), s.end());
    }
    Graph g(std::move(sets), family, std::move(automorphisms));
    if (!g.is_connected()) throw DisconnectedGraph();
    return g;
  }

  std::size_t size() const noexcept { return sets_.size(); }

  /// N(v), sorted ascending, including v.
  const std::vector<Vertex>& neighbors(Vertex v) const { return sets_.at(v); }

  std::size_t degree(Vertex v) const { return sets_.at(v).size(); }

  std::vector<std::size_t> degrees() const {
    std::vector<std::size_t> d(size());
    for (Vertex v = 0; v < size(); ++v) d[v] = sets_[v].size();
    return d;
  }

  bool adjacent(Vertex u, Vertex v) const {
    const auto& s = sets_.at(u);
    return std::binary_search(s.begin(), s.end(), v);
  }

  /// Non-self-loop edges with u < v, in lexicographic order.
  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    for (Vertex u = 0; u < size(); ++u)
      for (Vertex v : sets_[u])
        if (u < v) out.emplace_back(u, v);
    return out;
  }

  GraphFamily family() const noexcept { return family_; }

  /// Known automorphism generators for the labeled families; empty otherwise.
  const std::vector<Permutation>& automorphisms() const noexcept { return automorphisms_; }

  bool is_automorphism(const Permutation& f) const {
    if (f.size() != size()) return false;
    for (Vertex u = 0; u < size(); ++u)
      for (Vertex v : sets_[u])
        if (!adjacent(f[u], f[v])) return false;
    return true;
  }

  bool operator==(const Graph& other) const { return sets_ == other.sets_; }

 private:
  Graph(std::vector<std::vector<Vertex>> sets, GraphFamily family,
        std::vector<Permutation> automorphisms)
      : sets_(std::move(sets)), family_(family), automorphisms_(std::move(automorphisms)) {}

  bool is_connected() const {
    std::vector<char> seen(size(), 0);
    std::vector<Vertex> stack{0};
    seen[0] = 1;
    std::size_t count = 1;
    while (!stack.empty()) {
      Vertex v = stack.back();
      stack.pop_back();
      for (Vertex w : sets_[v]) {
        if (!seen[w]) {
          seen[w] = 1;
          ++count;
          stack.push_back(w);
        }
      }
    }
    return count == size();
  }

  std::vector<std::vector<Vertex>> sets_;
  GraphFamily family_;
  std::vector<Permutation> automorphisms_;
};

namespace detail {

inline Permutation transposition(std::size_t n, Vertex a, Vertex b) {
  Permutation p(n);
  std::iota(p.begin(), p.end(), Vertex{0});
  std::swap(p[a], p[b]);
  return p;
}

inline Permutation reflection(std::size_t n) {
  Permutation p(n);
  for (Vertex v = 0; v < n; ++v) p[v] = n - 1 - v;
  return p;
}

}  // namespace detail

inline Graph path_graph(std::size_t n) {
  if (n < 1) throw std::invalid_argument("path_graph requires n >= 1");
  std::vector<std::vector<Vertex>> adj(n);
  for (Vertex v = 0; v + 1 < n; ++v) adj[v].push_back(v + 1);
  return Graph::from_adjacency(std::move(adj), GraphFamily::path, {detail::reflection(n)});
}

/// Vertex 0 is the center.
inline Graph star_graph(std::size_t n) {
  if (n < 2) throw std::invalid_argument("star_graph requires n >= 2");
  std::vector<std::vector<Vertex>> adj(n);
  for (Vertex v = 1; v < n; ++v) adj[0].push_back(v);
  std::vector<Permutation> autos;
  for (Vertex v = 1; v + 1 < n; ++v) autos.push_back(detail::transposition(n, v, v + 1));
  return Graph::from_adjacency(std::move(adj), GraphFamily::star, std::move(autos));
}

inline Graph cycle_graph(std::size_t n) {
  if (n < 3) throw std::invalid_argument("cycle_graph requires n >= 3");
  std::vector<std::vector<Vertex>> adj(n);
  for (Vertex v = 0; v < n; ++v) adj[v].push_back((v + 1) % n);
  Permutation rotation(n);
  for (Vertex v = 0; v < n; ++v) rotation[v] = (v + 1) % n;
  return Graph::from_adjacency(std::move(adj), GraphFamily::cycle,
                               {std::move(rotation), detail::reflection(n)});
}

inline Graph complete_graph(std::size_t n) {
  if (n < 1) throw std::invalid_argument("complete_graph requires n >= 1");
  std::vector<std::vector<Vertex>> adj(n);
  for (Vertex u = 0; u < n; ++u)
    for (Vertex v = u + 1; v < n; ++v) adj[u].push_back(v);
  std::vector<Permutation> autos;
  for (Vertex v = 0; v + 1 < n; ++v) autos.push_back(detail::transposition(n, v, v + 1));
  return Graph::from_adjacency(std::move(adj), GraphFamily::complete, std::move(autos));
}

/// Duplicate edges and explicit self-loops are accepted and deduplicated.
inline Graph from_edge_list(std::size_t n, const std::vector<Edge>& edges) {
  if (n < 1) throw std::invalid_argument("from_edge_list requires n >= 1");
  std::vector<std::vector<Vertex>> adj(n);
  for (const auto& [u, v] : edges) {
    if (u >= n) throw VertexOutOfRange(u, n);
    if (v >= n) throw VertexOutOfRange(v, n);
    adj[u].push_back(v);
  }
  return Graph::from_adjacency(std::move(adj), GraphFamily::edge_list);
}

/// Erdos-Renyi draw G(n, p), redrawn until connected. The sequence of draws
/// depends only on the seed.
inline Graph random_connected_graph(std::size_t n, double edge_probability, std::uint64_t seed,
                                    std::size_t max_attempts = 1000) {
  if (n < 1) throw std::invalid_argument("random_connected_graph requires n >= 1");
  if (!(edge_probability > 0.0 && edge_probability <= 1.0))
    throw std::invalid_argument("edge probability must lie in (0, 1]");
  std::mt19937_64 rng(seed);
  // 53 random mantissa bits; avoids implementation-defined distributions.
  auto uniform = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
    std::vector<std::vector<Vertex>> adj(n);
    for (Vertex u = 0; u < n; ++u)
      for (Vertex v = u + 1; v < n; ++v)
        if (uniform() < edge_probability) adj[u].push_back(v);
    try {
      return Graph::from_adjacency(std::move(adj), GraphFamily::random);
    } catch (const DisconnectedGraph&) {
    }
  }
  throw GenerationFailed("no connected draw after " + std::to_string(max_attempts) + " attempts");
}

/// Parses "u v" lines (0-indexed, '#' starts a comment). The vertex count is
/// one more than the largest endpoint seen.
inline std::vector<Edge> parse_edge_list(std::istream& in, std::size_t* vertex_count = nullptr) {
  std::vector<Edge> edges;
  std::size_t n = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    long long u = 0;
    long long v = 0;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::string extra;
    if (!(ls >> u) || !(ls >> v) || (ls >> extra) || u < 0 || v < 0)
      throw ConfigError("edge list line " + std::to_string(line_no) + ": expected \"u v\"");
    edges.emplace_back(static_cast<Vertex>(u), static_cast<Vertex>(v));
    n = std::max<std::size_t>(n, static_cast<std::size_t>(std::max(u, v)) + 1);
  }
  if (vertex_count) *vertex_count = n;
  return edges;
}

inline Graph read_edge_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open edge list: " + path);
  std::size_t n = 0;
  auto edges = parse_edge_list(in, &n);
  if (n == 0) throw ConfigError("edge list is empty: " + path);
  return from_edge_list(n, edges);
}

inline void write_edge_list(std::ostream& out, const Graph& g) {
  out << "# " << g.size() << " vertices\n";
  // A lone vertex has no edges; its self-loop keeps the count recoverable.
  if (g.size() == 1) out << "0 0\n";
  for (const auto& [u, v] : g.edges()) out << u << ' ' << v << '\n';
}

}  // namespace mlnet
