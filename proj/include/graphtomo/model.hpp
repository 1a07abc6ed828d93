#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <vector>

#include "graphtomo/graph.hpp"
#include "graphtomo/tensor.hpp"

namespace graphtomo {

struct HubbardParams {
  LatticeGraph graph;
  std::vector<Complex> mu;           // omega_v - i kappa_v / 2
  std::map<Edge, Complex> j;         // key (i < k) holds J_{i,k}; J_{k,i} is its conjugate
  std::vector<double> chi;
  std::map<int, double> port_gamma;  // extraction rate per boundary vertex

  int size() const { return graph.n; }
  Complex coupling(int v, int u) const;
  void set_coupling(int v, int u, Complex value);
  double max_coupling() const;
};

// Zero-initialised parameters on g (all edges present with J = 0).
HubbardParams blank_params(const LatticeGraph& g);
void validate(const HubbardParams& p);

Eigen::MatrixXcd build_h1(const HubbardParams& p, bool include_ports);

struct PairBasis {
  int n = 0;
  std::vector<Edge> pairs;  // (v, u), v <= u, lexicographic
  std::vector<int> lookup;  // n * v + u -> index

  int size() const { return static_cast<int>(pairs.size()); }
  int index(int v, int u) const { return v <= u ? lookup[n * v + u] : lookup[n * u + v]; }
};

PairBasis make_pair_basis(int n);

// Matrix of a_v from the two-excitation sector to the one-excitation sector (n x D).
Eigen::MatrixXd lowering_matrix(const PairBasis& basis, int v);

Eigen::MatrixXcd build_h2(const HubbardParams& p, const PairBasis& basis, bool include_ports = false);

struct BiorthogonalEig {
  Eigen::VectorXcd energies;
  Eigen::MatrixXcd right;  // columns |r_a>
  Eigen::MatrixXcd left;   // rows <l_a|, left * right = I
};

inline constexpr double kDegeneracyTol = 1e-9;

BiorthogonalEig eig_biorthogonal(const Eigen::MatrixXcd& m, double rel_tol = kDegeneracyTol);
// Sorted eigenvalues only, no degeneracy check.
Eigen::VectorXcd sorted_eigenvalues(const Eigen::MatrixXcd& m);
double min_gap(const Eigen::VectorXcd& e);

// M1(a, v, u) for every ordered pair of `sites`; blocks[i * S + k] holds the
// vector over a for (sites[i], sites[k]).
struct M1Tensor {
  std::vector<int> sites;
  std::vector<Eigen::VectorXcd> blocks;

  int index(int v) const;
  const Eigen::VectorXcd& at(int v, int u) const;
  Eigen::VectorXcd& at(int v, int u);
};

// M2((a1, a2, a3), v, u), each block an (n1, d, n1) tensor.
struct M2Tensor {
  std::vector<int> sites;
  int n1 = 0, d = 0;
  std::vector<Tensor3> blocks;

  int index(int v) const;
  const Tensor3& at(int v, int u) const;
  Tensor3& at(int v, int u);
};

struct SpectralData {
  Eigen::VectorXcd e1, e2;
  M1Tensor m1;
  M2Tensor m2;
  bool has_m2 = false;
};

M1Tensor m1_from_eig(const BiorthogonalEig& eig1, const std::vector<int>& sites);
M1Tensor m1_oracle(const HubbardParams& p, bool include_ports);  // boundary sites
M1Tensor m1_full(const HubbardParams& p, bool include_ports);     // every vertex

M2Tensor m2_from_eig(const BiorthogonalEig& eig1, const BiorthogonalEig& eig2, const PairBasis& basis,
                     const std::vector<int>& sites);
M2Tensor m2_oracle(const HubbardParams& p, bool include_ports = false);

SpectralData synthesize(const HubbardParams& p, bool include_ports, bool with_m2);

// Gaussian diagonal disorder on Re(mu), used to lift accidental degeneracies.
HubbardParams with_disorder(const HubbardParams& p, double sigma, std::uint64_t seed);

struct RandomModelOptions {
  double j_scale = 1.0;         // |J| uniform in [0.5, 1.5] * j_scale
  bool complex_phases = false;
  double mu_spread = 0.5;       // Re(mu) uniform in [-spread, spread] * j_scale
  double kappa_min = 0.0;       // kappa uniform in [kappa_min, kappa_max] * j_scale
  double kappa_max = 0.0;
  double chi_max = 0.0;         // chi uniform in [0, chi_max] * j_scale
  double port_gamma = 0.0;      // attached to every boundary vertex when > 0
};

HubbardParams random_params(const LatticeGraph& g, const RandomModelOptions& opt, std::uint64_t seed);

}  // namespace graphtomo
