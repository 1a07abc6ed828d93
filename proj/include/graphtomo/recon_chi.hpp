#pragma once

#include <Eigen/Dense>
#include <vector>

#include "graphtomo/model.hpp"
#include "graphtomo/recon_single.hpp"

namespace graphtomo {

// C(a1, a2, a3; v, u) stored per two-excitation index a2 as an (a1 x a3)
// matrix. `slice_ids` names the a2 values present (all of them normally, a
// subset when probing a single slice).
struct CTensors {
  int n = 0, n1 = 0;
  std::vector<int> slice_ids;
  std::vector<std::vector<Eigen::MatrixXcd>> blocks;  // n*v + u

  bool known(int v, int u) const { return !blocks[n * v + u].empty(); }
  std::vector<Eigen::MatrixXcd>& at(int v, int u) { return blocks[n * v + u]; }
  const std::vector<Eigen::MatrixXcd>& at(int v, int u) const { return blocks[n * v + u]; }
};

CTensors empty_c(int n, int n1, std::vector<int> slice_ids);

// <l_a|n_v|r_b> in the single-excitation eigenbasis.
Eigen::MatrixXcd number_matrix(const BiorthogonalEig& eig1, int v);

CTensors c_from_m2(const M2Tensor& m2, const BiorthogonalEig& eig1, int n_vertices, const ReconOptions& opt = {});

struct QR {
  CTensors q, r;
};
// Q(v,u) = N_v C(v,u) over a1; R(v,u) = C(v,u) N_u over a3; every known block.
QR qr_from_c(const CTensors& c, const BiorthogonalEig& eig1);

struct ChiValue {
  double value = 0;
  double imag = 0;   // residue dropped by the real projection
  Complex raw = 0;
};

ChiValue chi_at(int v, const CTensors& c, const Eigen::VectorXcd& e1, const Eigen::VectorXcd& e2, Complex mu_v);

// Everything the two-excitation step needs besides the C block itself.
struct ChiContext {
  LatticeGraph graph;
  Eigen::VectorXcd e1, e2;
  std::vector<Complex> mu;
  std::map<Edge, Complex> j;            // (v < u) -> J_{v,u}
  BiorthogonalEig eig1;                 // aligned with e1
  std::vector<Eigen::MatrixXcd> nmat;   // number_matrix per vertex
  ReconOptions opt;

  Complex coupling(int v, int u) const;
};

ChiContext make_chi_context(const Eigen::VectorXcd& e1, const Eigen::VectorXcd& e2, const HubbardParams& single,
                            const ReconOptions& opt = {});

// Adds C(u, w) and C(w, u) for every infected w (and C(u, u)); marks u infected.
void infect_step_two(CTensors& c, std::vector<char>& infected, std::vector<int>& members, const ChiContext& ctx,
                     int v, int u, double chi_v);

struct ChiRun {
  std::vector<double> chi;
  std::vector<double> imag;
  std::vector<Complex> raw;   // unprojected estimate per vertex (sum over the slices present)
  std::vector<int> order;     // vertices in the order chi was evaluated
  CTensors c;                 // every block after the last step
};

// Runs the recursion from a boundary C block. With `frozen`, the pivot
// values come from it instead of the running estimates.
ChiRun run_chi_recursion(const ChiContext& ctx, CTensors c, const InfectionOrder& order,
                         const std::vector<double>* frozen = nullptr);

struct ChiRecon {
  std::vector<double> chi;
  std::vector<double> imag;
  InfectionOrder order;
};

ChiRecon reconstruct_chi(const Eigen::VectorXcd& e1, const Eigen::VectorXcd& e2, const M2Tensor& m2,
                         const HubbardParams& single, const ReconOptions& opt = {});

double chi_by_toggle(const Eigen::VectorXcd& e2_on, const Eigen::VectorXcd& e2_off);

// Two-excitation spectrum with the nonlinearity at v switched off.
Eigen::VectorXcd e2_with_site_off(const HubbardParams& p, int v, bool include_ports = false);

}  // namespace graphtomo
