#include "graphtomo/recon_single.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "graphtomo/errors.hpp"

namespace graphtomo {

namespace {

double energy_scale(const Eigen::VectorXcd& e1) { return std::max(e1.cwiseAbs().maxCoeff(), 1e-300); }

std::string vtx(int v) { return std::to_string(v); }

}  // namespace

Complex Frontier1::coupling(int v, int u) const {
  auto it = j.find({std::min(v, u), std::max(v, u)});
  if (it == j.end()) throw ReconstructionError("coupling " + vtx(v) + "-" + vtx(u) + " not yet known");
  return v < u ? it->second : std::conj(it->second);
}

Frontier1 init_frontier(const Eigen::VectorXcd& e1, const M1Tensor& m1, const LatticeGraph& g) {
  if (e1.size() != g.n) throw ValidationError("E1 has " + std::to_string(e1.size()) + " entries, graph has " +
                                              std::to_string(g.n) + " vertices");
  Frontier1 f;
  f.n = g.n;
  f.infected.assign(g.n, 0);
  f.m.assign(static_cast<size_t>(g.n) * g.n, Eigen::VectorXcd());
  f.mu.assign(g.n, 0.0);
  f.mu_known.assign(g.n, 0);
  for (int b : g.boundary) {
    f.infected[b] = 1;
    f.members.push_back(b);
  }
  for (int v : g.boundary)
    for (int u : g.boundary) {
      const auto& block = m1.at(v, u);
      if (block.size() != g.n) throw ValidationError("M1 block has wrong length");
      f.at(v, u) = block;
    }
  return f;
}

void infected_params(Frontier1& f, const Eigen::VectorXcd& e1, const LatticeGraph& g) {
  for (int v : f.members) {
    if (!f.mu_known[v]) {
      f.mu[v] = (e1.array() * f.at(v, v).array()).sum();
      f.mu_known[v] = 1;
    }
    for (int u : g.adj[v]) {
      if (!f.infected[u] || v > u || f.j.count({v, u})) continue;
      f.j[{v, u}] = (e1.array() * f.at(v, u).array()).sum();
    }
  }
}

double infect_edge(const Frontier1& f, const Eigen::VectorXcd& e1, const LatticeGraph& g, int v, int u,
                   const ReconOptions& opt) {
  const double scale = energy_scale(e1);
  const Eigen::ArrayXcd shifted = e1.array() - f.mu[v];
  Complex j2 = (shifted.square() * f.at(v, v).array()).sum();
  for (int w : g.adj[v])
    if (w != u) j2 -= std::norm(f.coupling(v, w));
  if (opt.strict && std::abs(j2.imag()) > opt.imag_tol * scale * scale)
    throw ComplexResidue("J^2 on edge " + vtx(v) + "-" + vtx(u) + " has imaginary part " +
                         std::to_string(j2.imag()));
  if (j2.real() <= opt.div_tol * scale * scale)
    throw NegativeSquare("J^2 on edge " + vtx(v) + "-" + vtx(u) + " is " + std::to_string(j2.real()) +
                         (j2.real() < 0 ? " (inconsistent data)" : " (vanishing coupling)"));
  return std::sqrt(j2.real());
}

EdgeExtension extend_m(const Frontier1& f, const Eigen::VectorXcd& e1, const LatticeGraph& g, int v, int u,
                       double j_vu, const ReconOptions& opt) {
  if (std::abs(j_vu) <= opt.div_tol * energy_scale(e1))
    throw VanishingCoupling("J on edge " + vtx(v) + "-" + vtx(u) + " is below tolerance");
  const Eigen::ArrayXcd shifted = e1.array() - f.mu[v];
  const Eigen::ArrayXcd mvv = f.at(v, v).array();
  std::vector<int> others;
  for (int w : g.adj[v])
    if (w != u) others.push_back(w);

  // sum_{v'} J_{v,v'} M(v',v) and sum_{v'} J*_{v,v'} M(v,v')
  Eigen::ArrayXcd in = Eigen::ArrayXcd::Zero(e1.size()), out = Eigen::ArrayXcd::Zero(e1.size());
  for (int w : others) {
    const Complex jvw = f.coupling(v, w);
    in += jvw * f.at(w, v).array();
    out += std::conj(jvw) * f.at(v, w).array();
  }
  Eigen::ArrayXcd cross = Eigen::ArrayXcd::Zero(e1.size());
  for (int a : others)
    for (int b : others) cross += f.coupling(v, a) * std::conj(f.coupling(v, b)) * f.at(a, b).array();

  EdgeExtension x;
  x.uv = (shifted * mvv - in) / j_vu;
  x.vu = (shifted * mvv - out) / j_vu;
  x.uu = (shifted.square() * mvv - shifted * (out + in) + cross) / (j_vu * j_vu);
  return x;
}

void cyclic_fill(Frontier1& f, int u, int v, const ReconOptions& opt) {
  const Eigen::ArrayXcd mvv = f.at(v, v).array();
  const double ref = std::max(mvv.abs().maxCoeff(), 1e-300);
  Eigen::Index worst = 0;
  const double smallest = mvv.abs().minCoeff(&worst);
  if (opt.strict && smallest < opt.div_tol * ref)
    throw VanishingDiagonal("M(" + std::to_string(worst) + ", " + vtx(v) + ", " + vtx(v) + ") vanishes (|M| = " +
                            std::to_string(smallest) + ")");
  const Eigen::ArrayXcd uv = f.at(u, v).array(), vu = f.at(v, u).array();
  for (int w : f.members) {
    if (w == v) continue;
    f.at(u, w) = (uv * f.at(v, w).array() / mvv).matrix();
    f.at(w, u) = (f.at(w, v).array() * vu / mvv).matrix();
  }
  f.infected[u] = 1;
  f.members.push_back(u);
}

SingleRecon reconstruct_single(const Eigen::VectorXcd& e1, const M1Tensor& m1, const LatticeGraph& g,
                               const ReconOptions& opt) {
  SingleRecon out;
  out.order = infection_order(g);
  if (!out.order.complete)
    throw NotTomographable("graph is not tomographable: boundary does not infect every vertex");
  Frontier1 f = init_frontier(e1, m1, g);
  infected_params(f, e1, g);
  for (size_t k = 0; k < out.order.steps.size(); ++k) {
    const auto [v, u] = out.order.steps[k];
    try {
      const double j = infect_edge(f, e1, g, v, u, opt);
      EdgeExtension x = extend_m(f, e1, g, v, u, j, opt);
      f.at(u, u) = std::move(x.uu);
      f.at(u, v) = std::move(x.uv);
      f.at(v, u) = std::move(x.vu);
      f.j[{std::min(v, u), std::max(v, u)}] = j;
      cyclic_fill(f, u, v, opt);
      infected_params(f, e1, g);
    } catch (ReconstructionError& e) {
      e.set_step(static_cast<int>(k));
      throw;
    }
  }
  out.params = blank_params(g);
  out.params.mu = f.mu;
  for (auto& [e, val] : out.params.j) val = f.coupling(e.first, e.second);
  out.frontier = std::move(f);
  return out;
}

double GaugeReport::max_residual() const { return std::max({max_mu, max_abs_j, max_flux, max_chi}); }

GaugeReport gauge_compare(const HubbardParams& truth, const HubbardParams& recon) {
  const LatticeGraph& g = truth.graph;
  if (recon.graph.n != g.n || recon.graph.edges != g.edges)
    throw ValidationError("gauge_compare: parameter sets live on different graphs");
  GaugeReport r;
  const int n = g.n;
  r.mu_residual.resize(n);
  for (int v = 0; v < n; ++v) {
    r.mu_residual[v] = std::abs(truth.mu[v] - recon.mu[v]);
    r.max_mu = std::max(r.max_mu, r.mu_residual[v]);
  }
  if (truth.chi.size() == recon.chi.size()) {
    r.chi_residual.resize(n);
    for (int v = 0; v < n; ++v) {
      r.chi_residual[v] = std::abs(truth.chi[v] - recon.chi[v]);
      r.max_chi = std::max(r.max_chi, r.chi_residual[v]);
    }
  }
  for (const auto& e : g.edges) {
    const double d = std::abs(std::abs(truth.coupling(e.first, e.second)) - std::abs(recon.coupling(e.first, e.second)));
    r.abs_j_residual[e] = d;
    r.max_abs_j = std::max(r.max_abs_j, d);
  }

  // Spanning forest hanging off a virtual root joined to every boundary
  // vertex (boundary phases are fixed by the data). Each non-tree edge closes
  // one fundamental cycle, possibly through the root.
  r.phases.assign(n, Complex(1.0));
  std::vector<char> seen(n, 0);
  std::map<Edge, char> tree;
  std::queue<int> q;
  for (int b : g.boundary) {
    seen[b] = 1;
    q.push(b);
  }
  auto unit = [](Complex z) { return std::abs(z) > 0 ? z / std::abs(z) : Complex(1.0); };
  auto visit = [&]() {
    while (!q.empty()) {
      int a = q.front();
      q.pop();
      for (int b : g.adj[a]) {
        if (seen[b]) continue;
        seen[b] = 1;
        tree[{std::min(a, b), std::max(a, b)}] = 1;
        const Complex jt = truth.coupling(a, b), jr = recon.coupling(a, b);
        r.phases[b] = r.phases[a] * unit(jr * std::conj(jt));
        if (std::abs(jt) == 0.0 || std::abs(jr) == 0.0) r.phases[b] = r.phases[a];
        q.push(b);
      }
    }
  };
  visit();
  for (int v = 0; v < n; ++v)
    if (!seen[v]) {  // component without boundary: pick its own root
      seen[v] = 1;
      q.push(v);
      visit();
    }
  for (const auto& e : g.edges) {
    if (tree.count(e)) continue;
    const auto [a, b] = e;
    const Complex jt = truth.coupling(a, b), jr = recon.coupling(a, b);
    double flux = 0;
    if (std::abs(jt) > 1e-12 && std::abs(jr) > 1e-12)
      flux = std::abs(std::arg(jr * std::conj(std::conj(r.phases[a]) * jt * r.phases[b])));
    r.flux_residual.push_back(flux);
    r.max_flux = std::max(r.max_flux, flux);
  }
  r.cycles = static_cast<int>(r.flux_residual.size());
  return r;
}

}  // namespace graphtomo
