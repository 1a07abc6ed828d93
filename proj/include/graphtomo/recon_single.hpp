#pragma once

#include <Eigen/Dense>
#include <map>
#include <vector>

#include "graphtomo/graph.hpp"
#include "graphtomo/model.hpp"

namespace graphtomo {

struct ReconOptions {
  bool strict = true;       // false: keep going through noisy data (stability studies)
  double imag_tol = 1e-8;   // |Im J^2| allowed, relative to max|E|^2
  double div_tol = 1e-12;   // relative guard on every division
};

// Working state of the single-particle recursion.
struct Frontier1 {
  int n = 0;
  std::vector<char> infected;
  std::vector<int> members;            // infected vertices, in infection order
  std::vector<Eigen::VectorXcd> m;     // n*v + u -> M(., v, u); empty when unknown
  std::vector<Complex> mu;
  std::vector<char> mu_known;
  std::map<Edge, Complex> j;           // (v < u) -> J_{v,u}

  bool known(int v, int u) const { return m[n * v + u].size() > 0; }
  const Eigen::VectorXcd& at(int v, int u) const { return m[n * v + u]; }
  Eigen::VectorXcd& at(int v, int u) { return m[n * v + u]; }
  Complex coupling(int v, int u) const;
};

Frontier1 init_frontier(const Eigen::VectorXcd& e1, const M1Tensor& m1, const LatticeGraph& g);

// mu_v = sum E M(v,v), J_{v,u} = sum E M(v,u) for everything inside the frontier not yet set.
void infected_params(Frontier1& f, const Eigen::VectorXcd& e1, const LatticeGraph& g);

// |J_{v,u}| from the second moment at v; taken real and positive.
double infect_edge(const Frontier1& f, const Eigen::VectorXcd& e1, const LatticeGraph& g, int v, int u,
                   const ReconOptions& opt = {});

struct EdgeExtension {
  Eigen::VectorXcd uu, uv, vu;
};

EdgeExtension extend_m(const Frontier1& f, const Eigen::VectorXcd& e1, const LatticeGraph& g, int v, int u,
                       double j_vu, const ReconOptions& opt = {});

// Fills M(u, w) and M(w, u) for every w in the frontier through the pivot v,
// then adds u to the frontier. Expects M(u,u), M(u,v), M(v,u) already stored.
void cyclic_fill(Frontier1& f, int u, int v, const ReconOptions& opt = {});

struct SingleRecon {
  HubbardParams params;  // chi left at zero, no ports
  InfectionOrder order;
  Frontier1 frontier;
};

SingleRecon reconstruct_single(const Eigen::VectorXcd& e1, const M1Tensor& m1, const LatticeGraph& g,
                               const ReconOptions& opt = {});

struct GaugeReport {
  std::vector<Complex> phases;     // per vertex, recon = conj(phase_v) * true * phase_u on J_{v,u}
  std::vector<double> mu_residual;
  std::map<Edge, double> abs_j_residual;
  std::vector<double> flux_residual;  // one per non-tree edge (fundamental cycle)
  std::vector<double> chi_residual;
  double max_mu = 0, max_abs_j = 0, max_flux = 0, max_chi = 0;
  int cycles = 0;

  double max_residual() const;
};

GaugeReport gauge_compare(const HubbardParams& truth, const HubbardParams& recon);

}  // namespace graphtomo
