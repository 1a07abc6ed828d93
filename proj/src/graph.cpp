#include "graphtomo/graph.hpp"

#include <algorithm>

#include "graphtomo/errors.hpp"

namespace graphtomo {

int LatticeGraph::degree_bound() const {
  size_t d = 0;
  for (const auto& a : adj) d = std::max(d, a.size());
  return static_cast<int>(d);
}

bool LatticeGraph::has_edge(int i, int j) const {
  if (i < 0 || j < 0 || i >= n || j >= n) return false;
  const auto& a = adj[i];
  return std::binary_search(a.begin(), a.end(), j);
}

bool LatticeGraph::is_boundary(int v) const { return boundary_index(v) >= 0; }

int LatticeGraph::boundary_index(int v) const {
  auto it = std::lower_bound(boundary.begin(), boundary.end(), v);
  if (it == boundary.end() || *it != v) return -1;
  return static_cast<int>(it - boundary.begin());
}

LatticeGraph make_graph(int n, std::vector<Edge> edges, std::vector<int> boundary) {
  if (n <= 0) throw ValidationError("graph: n must be positive");
  for (auto& e : edges) {
    if (e.first == e.second) throw ValidationError("graph: self-loop on vertex " + std::to_string(e.first));
    if (e.first < 0 || e.second < 0 || e.first >= n || e.second >= n)
      throw ValidationError("graph: edge endpoint out of range");
    if (e.first > e.second) std::swap(e.first, e.second);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  if (boundary.empty()) throw ValidationError("graph: boundary is empty");
  for (int b : boundary)
    if (b < 0 || b >= n) throw ValidationError("graph: boundary vertex out of range");
  std::sort(boundary.begin(), boundary.end());
  boundary.erase(std::unique(boundary.begin(), boundary.end()), boundary.end());

  LatticeGraph g;
  g.n = n;
  g.edges = std::move(edges);
  g.boundary = std::move(boundary);
  g.adj.assign(n, {});
  for (const auto& [i, j] : g.edges) {
    g.adj[i].push_back(j);
    g.adj[j].push_back(i);
  }
  for (auto& a : g.adj) std::sort(a.begin(), a.end());
  return g;
}

LatticeKind parse_lattice_kind(const std::string& s) {
  if (s == "chain") return LatticeKind::chain;
  if (s == "ssh_chain" || s == "ssh") return LatticeKind::ssh_chain;
  if (s == "ssh_2d") return LatticeKind::ssh_2d;
  if (s == "square") return LatticeKind::square;
  if (s == "honeycomb_patch" || s == "honeycomb") return LatticeKind::honeycomb_patch;
  throw ValidationError("unknown lattice kind '" + s + "'");
}

BoundarySpec parse_boundary_spec(const std::string& s) {
  if (s == "endpoints") return BoundarySpec::endpoints;
  if (s == "one_side" || s == "left") return BoundarySpec::one_side;
  if (s == "perimeter") return BoundarySpec::perimeter;
  throw ValidationError("unknown boundary spec '" + s + "'");
}

namespace {

LatticeGraph chain_graph(int n, BoundarySpec spec) {
  std::vector<Edge> edges;
  for (int i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
  std::vector<int> b{0};
  if (spec != BoundarySpec::one_side && n > 1) b.push_back(n - 1);
  return make_graph(n, edges, b);
}

std::vector<int> grid_boundary(int lx, int ly, BoundarySpec spec) {
  std::vector<int> b;
  switch (spec) {
    case BoundarySpec::one_side:
      for (int y = 0; y < ly; ++y) b.push_back(y * lx);
      break;
    case BoundarySpec::perimeter:
      for (int y = 0; y < ly; ++y)
        for (int x = 0; x < lx; ++x)
          if (x == 0 || y == 0 || x == lx - 1 || y == ly - 1) b.push_back(y * lx + x);
      break;
    case BoundarySpec::endpoints:
      b = {0, lx * ly - 1};
      break;
  }
  return b;
}

}  // namespace

LatticeGraph make_lattice(LatticeKind kind, const std::vector<int>& dims, BoundarySpec spec) {
  for (int d : dims)
    if (d <= 0) throw ValidationError("make_lattice: dims must be positive");
  if (kind == LatticeKind::chain || kind == LatticeKind::ssh_chain) {
    if (dims.size() != 1) throw ValidationError("make_lattice: chains take one dimension");
    return chain_graph(dims[0], spec);
  }
  if (dims.size() != 2) throw ValidationError("make_lattice: 2D lattices take {Lx, Ly}");
  const int lx = dims[0], ly = dims[1];
  std::vector<Edge> edges;
  auto id = [lx](int x, int y) { return y * lx + x; };
  for (int y = 0; y < ly; ++y)
    for (int x = 0; x < lx; ++x) {
      if (x + 1 < lx) edges.emplace_back(id(x, y), id(x + 1, y));
      // brick-wall honeycomb: vertical bonds on alternating sites only
      bool vertical = kind != LatticeKind::honeycomb_patch || (x + y) % 2 == 0;
      if (y + 1 < ly && vertical) edges.emplace_back(id(x, y), id(x, y + 1));
    }
  return make_graph(lx * ly, edges, grid_boundary(lx, ly, spec));
}

InfectionOrder infection_order(const LatticeGraph& g) {
  InfectionOrder out;
  std::vector<char> infected(g.n, 0);
  int count = 0;
  for (int b : g.boundary) {
    infected[b] = 1;
    ++count;
  }
  bool progress = true;
  while (progress) {
    progress = false;
    for (int v = 0; v < g.n && !progress; ++v) {
      if (!infected[v]) continue;
      int candidate = -1, uninfected = 0;
      for (int u : g.adj[v])
        if (!infected[u]) {
          ++uninfected;
          if (candidate < 0) candidate = u;
        }
      if (uninfected == 1) {
        infected[candidate] = 1;
        ++count;
        out.steps.emplace_back(v, candidate);
        progress = true;  // rescan from the smallest index
      }
    }
  }
  out.complete = count == g.n;
  return out;
}

bool replay_is_valid(const LatticeGraph& g, const InfectionOrder& order) {
  std::vector<char> infected(g.n, 0);
  for (int b : g.boundary) infected[b] = 1;
  for (const auto& [v, u] : order.steps) {
    if (v < 0 || u < 0 || v >= g.n || u >= g.n || !infected[v] || infected[u]) return false;
    int uninfected = 0;
    for (int w : g.adj[v]) uninfected += !infected[w];
    if (uninfected != 1 || !g.has_edge(v, u)) return false;
    infected[u] = 1;
  }
  bool all = std::all_of(infected.begin(), infected.end(), [](char c) { return c != 0; });
  return all == order.complete;
}

}  // namespace graphtomo
