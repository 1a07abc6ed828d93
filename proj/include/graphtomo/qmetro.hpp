#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <set>
#include <vector>

#include "graphtomo/model.hpp"
#include "graphtomo/stability.hpp"

namespace graphtomo {

// ---- wave packets

struct TimeGrid {
  double start = 0, step = 0.01;
  int count = 0;

  double at(int i) const { return start + step * i; }
  double end() const { return at(count - 1); }
};

enum class PacketDirection { in, out };

struct WavePacket {
  TimeGrid grid;
  Eigen::VectorXcd amplitude;
  PacketDirection direction = PacketDirection::out;

  double norm() const;  // trapezoid integral of |F|^2
};

// Effective matrix with the port attached: H1 - i g* g^T / 2.
Eigen::MatrixXcd port_hamiltonian(const HubbardParams& p, const Eigen::VectorXcd& g);

// Emitted (out, tau >= 0) or time-reversed (in, tau <= 0) packet of a single
// excitation started at v. `grid` gives step and count; its start is overwritten.
WavePacket wavepacket(const HubbardParams& p, const Eigen::VectorXcd& g, int v, PacketDirection dir, TimeGrid grid,
                      double bound_tol = 1e-9);

// Port coupling of a single cavity that emits `f`.
Eigen::VectorXcd coupling_from_wavepacket(const WavePacket& f, double underflow = 1e-12);
// Packet emitted by a cavity with time-dependent coupling g sampled on `grid`.
WavePacket emit_from_coupling(const TimeGrid& grid, const Eigen::VectorXcd& g);

struct PropagatorBound {
  double c0 = 0, lambda0 = 0;  // ||exp(-i H s)|| <= c0 lambda0 exp(-lambda0 s)
  double t_prop() const { return c0 / lambda0; }
};
PropagatorBound propagator_bound(const Eigen::MatrixXcd& h_eff, int samples = 400);

// ---- many-body evolution

inline constexpr int kFockDimensionCap = 20000;

struct FockBasis {
  int n = 0, max_total = 0;
  std::vector<std::vector<int>> states;  // sorted by total, then lexicographic
  std::map<std::vector<int>, int> index;

  int dim() const { return static_cast<int>(states.size()); }
  int find(const std::vector<int>& occ) const;
};

FockBasis make_fock_basis(int n, int max_total);

struct ManyBodyState {
  FockBasis basis;
  Eigen::VectorXcd amplitude;

  double norm() const { return amplitude.norm(); }
};

// (a_v^dag)^P / sqrt(P!) |0> in a basis holding up to P excitations.
ManyBodyState fock_state(int n, int v, int photons);

Eigen::MatrixXcd fock_hamiltonian(const HubbardParams& p, const FockBasis& basis, bool couplings_on,
                                  const std::set<int>& chi_on);

ManyBodyState evolve_manybody(const HubbardParams& p, const ManyBodyState& initial, double t, bool couplings_on,
                              const std::set<int>& chi_on);

// ---- NOON phase and error budget

struct NoonPhase {
  double phase = 0;    // (Re mu P + chi P (P - 1) / 2) T
  double damping = 1;  // exp(Im mu P T)
};
NoonPhase noon_phase(Complex mu, double chi, int photons, double t_on);

struct DiffusionDeviation {
  double exact = 0, bound = 0;
  bool within_bound() const { return exact <= bound * (1 + 1e-12) + 1e-14; }
};
// Deviation of the coupled evolution of P photons at v from the decoupled phase.
DiffusionDeviation diffusion_deviation(const HubbardParams& p, int v, int photons, double t_on);

struct ChiEstimate {
  double chi = 0;
  double theta = 0;   // phase in (-pi, pi]
  double period = 0;  // chi is known modulo this
  bool used_cosine = true;
};
// Inverts measured quadratures; `margin` is the saturation margin, `prior`
// picks the representative nearest to it.
ChiEstimate chi_estimator(double cos_meas, double sin_meas, int photons, double t_on, Complex mu, double margin = 0.25,
                          double prior = 0.0);

struct NoonBudget {
  int photons = 0;
  double t_on = 0, t_prop = 0;
  double eps0 = 0, eps1 = 0, eps2 = 0, eps3 = 0, eps4 = 0;
  double k = 0, delta = 0;
  double precision = 0;  // final chi precision
  double c0 = 0, lambda0 = 0, j = 0;
  int d = 0, n = 0;

  bool consistent(double tol = 1e-12) const;
};

NoonBudget precision_budget(int photons, double t_on, double eps0, double k, double delta, double c0, double lambda0,
                            double j, int d, int n);

struct NoonSchedule {
  double t_scale = 1.0;    // T_on = t_scale / sqrt(P)
  double eps_scale = 1.0;  // eps0 = eps_scale / P
};
NoonBudget scheduled_budget(int photons, const NoonSchedule& s, double k, double delta, double c0, double lambda0,
                            double j, int d, int n);

struct ScalingFit {
  std::vector<double> x, y;
  LinearFit fit;  // log y against log x
};
ScalingFit budget_sweep(const std::vector<int>& photons, const NoonSchedule& s, double k, double delta, double c0,
                        double lambda0, double j, int d, int n);

// Twin-Fock phase precision, constant set to one.
double fock_phase_precision(int photons);

// Single-particle stage with boundary noise sigma = fock_phase_precision(P):
// RMS of the worst |J| error against P.
ScalingFit fock_precision_sweep(const HubbardParams& p, const std::vector<int>& photons, int trials,
                                std::uint64_t seed, int jobs = 1);

}  // namespace graphtomo
