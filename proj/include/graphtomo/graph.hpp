#pragma once

#include <string>
#include <utility>
#include <vector>

namespace graphtomo {

using Edge = std::pair<int, int>;

struct LatticeGraph {
  int n = 0;
  std::vector<Edge> edges;     // (i, j) with i < j, sorted
  std::vector<int> boundary;   // sorted
  std::vector<std::vector<int>> adj;

  int size() const { return n; }
  int degree_bound() const;
  bool has_edge(int i, int j) const;
  bool is_boundary(int v) const;
  int boundary_index(int v) const;  // position in `boundary`, or -1
};

// Validates and normalises (sorts, dedups, builds adjacency).
LatticeGraph make_graph(int n, std::vector<Edge> edges, std::vector<int> boundary);

enum class LatticeKind { chain, ssh_chain, ssh_2d, square, honeycomb_patch };
enum class BoundarySpec { endpoints, one_side, perimeter };

LatticeKind parse_lattice_kind(const std::string& s);
BoundarySpec parse_boundary_spec(const std::string& s);

// dims = {N} for chains, {Lx, Ly} otherwise; vertex (x, y) -> y * Lx + x.
LatticeGraph make_lattice(LatticeKind kind, const std::vector<int>& dims, BoundarySpec boundary);

struct InfectionOrder {
  std::vector<Edge> steps;  // (infecting v, infected u)
  bool complete = false;
};

InfectionOrder infection_order(const LatticeGraph& g);

// Replays the steps and checks the unique-neighbour rule at each one.
bool replay_is_valid(const LatticeGraph& g, const InfectionOrder& order);

}  // namespace graphtomo
