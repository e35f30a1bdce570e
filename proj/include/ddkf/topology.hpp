#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ddkf/numerics.hpp"
#include "ddkf/random.hpp"

namespace ddkf {

class TopologyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Point {
  double x = 0.0;
  double y = 0.0;
};

[[nodiscard]] inline double distance(const Point& a, const Point& b) noexcept {
  return std::hypot(a.x - b.x, a.y - b.y);
}

/// Undirected sensor network. Neighborhoods are self-inclusive and sorted
/// ascending, so iteration over a neighborhood is deterministic.
class Network {
 public:
  Network() = default;

  Network(std::vector<Point> positions, std::vector<std::vector<bool>> adjacency)
      : positions_(std::move(positions)), adjacency_(std::move(adjacency)) {
    const std::size_t n = positions_.size();
    if (adjacency_.size() != n) throw TopologyError("adjacency size does not match node count");
    for (std::size_t i = 0; i < n; ++i) {
      if (adjacency_[i].size() != n) throw TopologyError("adjacency is not square");
      if (adjacency_[i][i]) throw TopologyError("adjacency has a self-loop at node " + std::to_string(i));
      for (std::size_t j = 0; j < n; ++j)
        if (adjacency_[i][j] != adjacency_[j][i]) throw TopologyError("adjacency is not symmetric");
    }
    rebuild_neighborhoods();
  }

  /// Network from an explicit edge list (used by tests and small examples).
  static Network from_edges(std::size_t n,
                            const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                            std::vector<Point> positions = {}) {
    if (positions.empty()) positions.resize(n);
    std::vector<std::vector<bool>> adj(n, std::vector<bool>(n, false));
    for (auto [a, b] : edges) {
      if (a >= n || b >= n || a == b) throw TopologyError("invalid edge");
      adj[a][b] = adj[b][a] = true;
    }
    return Network(std::move(positions), std::move(adj));
  }

  [[nodiscard]] std::size_t size() const noexcept { return positions_.size(); }
  [[nodiscard]] const std::vector<Point>& positions() const noexcept { return positions_; }
  [[nodiscard]] bool adjacent(std::size_t a, std::size_t b) const { return adjacency_[a][b]; }

  /// N_m, including m itself.
  [[nodiscard]] const std::vector<std::size_t>& neighborhood(std::size_t m) const {
    return neighborhoods_[m];
  }
  /// |N_m| - 1.
  [[nodiscard]] std::size_t degree(std::size_t m) const { return neighborhoods_[m].size() - 1; }

  [[nodiscard]] std::size_t edge_count() const {
    std::size_t e = 0;
    for (std::size_t m = 0; m < size(); ++m) e += degree(m);
    return e / 2;
  }

  [[nodiscard]] std::size_t min_degree() const {
    std::size_t d = size() == 0 ? 0 : degree(0);
    for (std::size_t m = 1; m < size(); ++m) d = std::min(d, degree(m));
    return d;
  }

  /// Connected component label per node, labels 0.. in order of first node.
  [[nodiscard]] std::vector<std::size_t> components() const {
    const std::size_t n = size();
    std::vector<std::size_t> label(n, n);
    std::size_t next = 0;
    for (std::size_t s = 0; s < n; ++s) {
      if (label[s] != n) continue;
      std::vector<std::size_t> stack{s};
      label[s] = next;
      while (!stack.empty()) {
        const std::size_t u = stack.back();
        stack.pop_back();
        for (std::size_t v : neighborhoods_[u])
          if (label[v] == n) {
            label[v] = next;
            stack.push_back(v);
          }
      }
      ++next;
    }
    return label;
  }

  [[nodiscard]] bool connected() const {
    const auto c = components();
    return std::all_of(c.begin(), c.end(), [](std::size_t l) { return l == 0; });
  }

  void remove_edge(std::size_t a, std::size_t b) {
    if (!adjacency_[a][b]) return;
    adjacency_[a][b] = adjacency_[b][a] = false;
    rebuild_neighborhoods();
  }

 private:
  void rebuild_neighborhoods() {
    const std::size_t n = size();
    neighborhoods_.assign(n, {});
    for (std::size_t m = 0; m < n; ++m)
      for (std::size_t k = 0; k < n; ++k)
        if (k == m || adjacency_[m][k]) neighborhoods_[m].push_back(k);
  }

  std::vector<Point> positions_;
  std::vector<std::vector<bool>> adjacency_;
  std::vector<std::vector<std::size_t>> neighborhoods_;
};

/// Node-to-cluster map. Labels are 1-based (cluster 1..s).
struct ClusterAssignment {
  std::vector<std::size_t> cluster_of;
  std::size_t s = 0;

  [[nodiscard]] std::vector<std::size_t> members(std::size_t cluster) const {
    std::vector<std::size_t> out;
    for (std::size_t m = 0; m < cluster_of.size(); ++m)
      if (cluster_of[m] == cluster) out.push_back(m);
    return out;
  }
  [[nodiscard]] std::size_t cluster_size(std::size_t cluster) const {
    return static_cast<std::size_t>(std::count(cluster_of.begin(), cluster_of.end(), cluster));
  }

  /// Assignment from arbitrary component labels, renumbered 1.. in order of
  /// first appearance.
  static ClusterAssignment from_labels(const std::vector<std::size_t>& labels) {
    ClusterAssignment out;
    out.cluster_of.resize(labels.size());
    std::vector<std::pair<std::size_t, std::size_t>> seen;
    for (std::size_t m = 0; m < labels.size(); ++m) {
      auto it = std::find_if(seen.begin(), seen.end(),
                             [&](const auto& p) { return p.first == labels[m]; });
      if (it == seen.end()) {
        seen.emplace_back(labels[m], seen.size() + 1);
        out.cluster_of[m] = seen.size();
      } else {
        out.cluster_of[m] = it->second;
      }
    }
    out.s = seen.size();
    return out;
  }
};

struct GeometricOptions {
  std::size_t n = 30;
  double comm_radius = 0.35;
  std::size_t min_degree = 4;
  std::size_t max_attempts = 10'000;
};

/// Random geometric graph on the unit square, rejection-sampled until it is
/// connected and every node has at least `min_degree` neighbors.
[[nodiscard]] inline Network generate_geometric(const GeometricOptions& opt, Rng& rng) {
  if (opt.n < 1) throw TopologyError("generate_geometric: need at least one node");
  if (!(opt.comm_radius > 0.0) || opt.comm_radius > std::sqrt(2.0)) {
    throw TopologyError("generate_geometric: communication radius must lie in (0, sqrt(2)]");
  }
  for (std::size_t attempt = 0; attempt < opt.max_attempts; ++attempt) {
    std::vector<Point> pos(opt.n);
    for (auto& p : pos) {
      p.x = rng.uniform();
      p.y = rng.uniform();
    }
    std::vector<std::vector<bool>> adj(opt.n, std::vector<bool>(opt.n, false));
    for (std::size_t a = 0; a < opt.n; ++a)
      for (std::size_t b = a + 1; b < opt.n; ++b)
        if (distance(pos[a], pos[b]) <= opt.comm_radius) adj[a][b] = adj[b][a] = true;
    Network net(std::move(pos), std::move(adj));
    if (net.connected() && net.min_degree() >= opt.min_degree) return net;
  }
  throw TopologyError("generate_geometric: no connected network with minimum degree " +
                      std::to_string(opt.min_degree) + " after " +
                      std::to_string(opt.max_attempts) +
                      " attempts; increase the communication radius");
}

/// Whether every cluster induces a connected subgraph of `net`.
[[nodiscard]] inline bool clusters_connected(const Network& net, const ClusterAssignment& ca) {
  for (std::size_t c = 1; c <= ca.s; ++c) {
    const auto members = ca.members(c);
    if (members.empty()) return false;
    std::vector<bool> seen(net.size(), false);
    std::vector<std::size_t> stack{members.front()};
    seen[members.front()] = true;
    std::size_t reached = 1;
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      for (std::size_t v : net.neighborhood(u))
        if (!seen[v] && ca.cluster_of[v] == c) {
          seen[v] = true;
          ++reached;
          stack.push_back(v);
        }
    }
    if (reached != members.size()) return false;
  }
  return true;
}

struct PartitionOptions {
  double head_radius = 0.35;
  std::size_t max_attempts = 10'000;
  /// Additionally require each cluster to induce a connected subgraph.
  bool require_connected_clusters = false;
};

/// Two-cluster head-based partition: a uniformly drawn head and every node
/// within `head_radius` of it form cluster 1, the rest form cluster 2.
[[nodiscard]] inline ClusterAssignment initial_partition(const Network& net,
                                                         const PartitionOptions& opt, Rng& rng) {
  const std::size_t n = net.size();
  if (n < 2) throw TopologyError("initial_partition: need at least two nodes for two clusters");
  for (std::size_t attempt = 0; attempt < opt.max_attempts; ++attempt) {
    const std::size_t head = rng.index(n);
    ClusterAssignment ca;
    ca.s = 2;
    ca.cluster_of.assign(n, 2);
    for (std::size_t m = 0; m < n; ++m)
      if (distance(net.positions()[m], net.positions()[head]) <= opt.head_radius)
        ca.cluster_of[m] = 1;
    if (ca.cluster_size(1) == 0 || ca.cluster_size(2) == 0) continue;
    if (opt.require_connected_clusters && !clusters_connected(net, ca)) continue;
    return ca;
  }
  throw TopologyError("initial_partition: could not produce two non-empty clusters after " +
                      std::to_string(opt.max_attempts) + " attempts");
}

/// Clusters as connected components of the graph with an edge (n, m),
/// n != m, whenever max(c_nm, c_mn) >= threshold.
[[nodiscard]] inline ClusterAssignment infer_clusters(const Matrix& C, double threshold) {
  const std::size_t n = C.rows();
  std::vector<std::vector<bool>> adj(n, std::vector<bool>(n, false));
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b)
      if (std::max(C(a, b), C(b, a)) >= threshold) adj[a][b] = adj[b][a] = true;
  const Network g(std::vector<Point>(n), std::move(adj));
  return ClusterAssignment::from_labels(g.components());
}

/// Removes edge (n, m) when both c_nm and c_mn stayed below `tau` in each of
/// the last `window` weight matrices of `history` (oldest first). Needs at
/// least `window` matrices; fewer leaves the network unchanged. Connectivity
/// is not restored afterwards.
[[nodiscard]] inline Network prune_cross_links(const Network& net, std::span<const Matrix> history,
                                               double tau, std::size_t window) {
  if (window < 1) throw TopologyError("prune_cross_links: window must be at least 1");
  Network out = net;
  if (history.size() < window) return out;
  const auto recent = history.subspan(history.size() - window);
  for (std::size_t a = 0; a < net.size(); ++a) {
    for (std::size_t b = a + 1; b < net.size(); ++b) {
      if (!net.adjacent(a, b)) continue;
      const bool weak = std::all_of(recent.begin(), recent.end(), [&](const Matrix& C) {
        return C(a, b) < tau && C(b, a) < tau;
      });
      if (weak) out.remove_edge(a, b);
    }
  }
  return out;
}

}  // namespace ddkf
