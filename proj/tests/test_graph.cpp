#include <doctest.h>

#include <random>
#include <set>

#include "graphtomo/errors.hpp"
#include "graphtomo/graph.hpp"

using namespace graphtomo;

namespace {

// Synchronous zero-forcing closure: every currently forceable vertex at once.
std::set<int> closure_oracle(const LatticeGraph& g) {
  std::set<int> inf(g.boundary.begin(), g.boundary.end());
  for (;;) {
    std::set<int> add;
    for (int v : inf) {
      std::vector<int> un;
      for (int u : g.adj[v])
        if (!inf.count(u)) un.push_back(u);
      if (un.size() == 1) add.insert(un[0]);
    }
    if (add.empty()) return inf;
    inf.insert(add.begin(), add.end());
  }
}

LatticeGraph random_graph(std::mt19937_64& rng, int n, double p, int nb) {
  std::uniform_real_distribution<double> uni(0, 1);
  std::vector<Edge> e;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (uni(rng) < p) e.emplace_back(i, j);
  std::vector<int> b;
  for (int k = 0; k < nb; ++k) b.push_back(static_cast<int>(rng() % n));
  return make_graph(n, e, b);
}

}  // namespace

TEST_SUITE("graph") {
  TEST_CASE("chain with one boundary end") {
    auto g = make_lattice(LatticeKind::chain, {3}, BoundarySpec::one_side);
    CHECK(g.n == 3);
    CHECK(g.edges == std::vector<Edge>{{0, 1}, {1, 2}});
    CHECK(g.boundary == std::vector<int>{0});
    auto o = infection_order(g);
    CHECK(o.complete);
    CHECK(o.steps == std::vector<Edge>{{0, 1}, {1, 2}});
  }

  TEST_CASE("square 3x3 edge count and one-side completeness") {
    auto g = make_lattice(LatticeKind::square, {3, 3}, BoundarySpec::one_side);
    CHECK(g.n == 9);
    CHECK(g.edges.size() == static_cast<size_t>(2 * 3 + 3 * 2));
    CHECK(g.degree_bound() == 4);
    auto o = infection_order(g);
    CHECK(o.complete);
    CHECK(closure_oracle(g).size() == 9);
    CHECK(replay_is_valid(g, o));
  }

  TEST_CASE("ssh chain endpoints") {
    auto g = make_lattice(LatticeKind::ssh_chain, {4}, BoundarySpec::endpoints);
    CHECK(g.edges == std::vector<Edge>{{0, 1}, {1, 2}, {2, 3}});
    CHECK(g.boundary == std::vector<int>{0, 3});
  }

  TEST_CASE("triangle with a single boundary vertex is not infectable") {
    auto g = make_graph(3, {{0, 1}, {1, 2}, {0, 2}}, {0});
    auto o = infection_order(g);
    CHECK(o.steps.empty());
    CHECK_FALSE(o.complete);
  }

  TEST_CASE("honeycomb patch and perimeter boundaries infect fully") {
    for (auto spec : {BoundarySpec::one_side, BoundarySpec::perimeter}) {
      auto g = make_lattice(LatticeKind::honeycomb_patch, {4, 3}, spec);
      CHECK(g.degree_bound() <= 3);
      CHECK(infection_order(g).complete);
    }
    CHECK(infection_order(make_lattice(LatticeKind::square, {4, 4}, BoundarySpec::perimeter)).complete);
  }

  TEST_CASE("validation errors") {
    CHECK_THROWS_AS(make_graph(3, {{0, 0}}, {0}), ValidationError);
    CHECK_THROWS_AS(make_graph(3, {{0, 3}}, {0}), ValidationError);
    CHECK_THROWS_AS(make_graph(3, {{0, 1}}, {}), ValidationError);
    CHECK_THROWS_AS(parse_lattice_kind("kagome"), ValidationError);
    CHECK_THROWS_AS(make_lattice(LatticeKind::square, {0, 3}, BoundarySpec::one_side), ValidationError);
  }

  TEST_CASE("random graphs: determinism, replay, closure, monotonicity") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 300; ++trial) {
      const int n = 2 + static_cast<int>(rng() % 9);
      auto g = random_graph(rng, n, 0.35, 1 + static_cast<int>(rng() % 3));
      auto a = infection_order(g);
      auto b = infection_order(g);
      CHECK(a.steps == b.steps);
      CHECK(replay_is_valid(g, a));
      CHECK(a.complete == (closure_oracle(g).size() == static_cast<size_t>(n)));
      if (a.complete) {
        auto bnd = g.boundary;
        bnd.push_back(static_cast<int>(rng() % n));
        auto g2 = make_graph(n, g.edges, bnd);
        CHECK(infection_order(g2).complete);
      }
    }
  }
}
