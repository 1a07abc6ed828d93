#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "graphtomo/model.hpp"

namespace graphtomo {

// Drive enters at `in`, detection at `out`; both boundary vertices.
struct PortPair {
  int in = 0, out = 0;
  double gamma_in = 1.0, gamma_out = 1.0;
  double phase = 0.0;  // homodyne local-oscillator phase
};

void validate_ports(const LatticeGraph& g, const PortPair& ports);

// H1 with every attached port loss; the pair's rates are added where the
// model has no port of its own.
Eigen::MatrixXcd ported_h1(const HubbardParams& p, const PortPair& ports);
Eigen::MatrixXcd ported_h2(const HubbardParams& p, const PortPair& ports);

// Eigen-expansion data seen through one port pair.
struct PortSpectrum {
  Eigen::VectorXcd e1, e2;
  Eigen::VectorXcd m1;   // M1(., out, in)
  Tensor3 m2;            // M2(., out, in) when has_m2
  bool has_m2 = false;
  double rate = 1.0;     // sqrt(gamma_in gamma_out)
  double phase = 0.0;
};

PortSpectrum port_spectrum(const HubbardParams& p, const PortPair& ports, bool with_m2 = true);
// From boundary data that already contains the port losses.
PortSpectrum port_spectrum(const SpectralData& data, const PortPair& ports);

Complex tau_omega(const PortSpectrum& s, double w);
Complex tau_omega(const HubbardParams& p, const PortPair& ports, double w);
Complex tau_resolvent(const HubbardParams& p, const PortPair& ports, double w);

double transmission(Complex tau, double phase);
double transmission(const PortSpectrum& s, double w);

// tau from transmissions at LO phases 0, pi/2, pi, 3pi/2.
Complex tau_from_quadratures(double t0, double t_half_pi, double t_pi, double t_three_half_pi);

double photon_noise_sigma(double n_photons);
// Additive Gaussian noise of width sigma on real samples.
std::vector<double> add_noise(const std::vector<double>& values, double sigma, std::uint64_t seed);

// Connected two-photon kernel (includes the gamma_in gamma_out prefactor),
// symmetrised over which tone is absorbed first. tau >= 0.
Complex t2_kernel(const PortSpectrum& s, double tau, double w1, double w2);

// Connected correlator sum over both tones.
Complex connected_correlator(const PortSpectrum& s, double t1, double t2, double w1, double w2);

double g2(const PortSpectrum& s, double t1, double t2, double w1, double w2);
double g2(const HubbardParams& p, const PortPair& ports, double t1, double t2, double w1, double w2);

struct ConstantTerm {
  double value = 0;                 // |C0|
  std::vector<double> candidates;   // every admissible |C0|
  Complex a0 = 0, a1 = 0, a2 = 0;   // harmonic coefficients at 0, delta, 2 delta
  double residual = 0;              // rms of the harmonic fit
};

// f(t) = |C0 + C1 e^{-i delta t} + C-1 e^{i delta t}|^2 sampled at `times`.
ConstantTerm isolate_constant_term(const std::vector<double>& times, const std::vector<double>& values, double delta,
                                   double root_tol = 1e-9);

struct Pole {
  double energy = 0, width = 0;  // resonance at energy - i width / 2
  Complex residue = 0;
};

struct PoleFit {
  std::vector<Pole> poles;                      // sorted by energy
  std::vector<Eigen::VectorXcd> residues;       // per channel, aligned with poles
  double residual = 0;                          // relative rms misfit
  std::vector<double> singular_values;          // pencil spectrum, normalised
};

struct PoleOptions {
  double rank_tol = 1e-11;
  double max_residual = 1e-4;
  int pencil_points = 240;
  int refine_iterations = 30;
};

// Samples of sum_j F_j / (i (E_j - w) + Gamma_j / 2) on a real grid.
PoleFit extract_poles(const std::vector<double>& grid, const Eigen::VectorXcd& samples, int n_poles,
                      const PoleOptions& opt = {});
// Several channels sharing the same poles.
PoleFit extract_poles_multi(const std::vector<double>& grid, const std::vector<Eigen::VectorXcd>& channels,
                            int n_poles, const PoleOptions& opt = {});

// Window padded by five linewidths around the spectrum, `per_width` points per narrowest width.
std::vector<double> frequency_grid(const Eigen::VectorXcd& energies, int per_width = 40, int max_points = 200000);

// arg(1 + i g^T (H - i g* g^T / 2 - w)^{-1} g*) with the nonlinearity off.
double mzi_phase(const HubbardParams& p, const Eigen::VectorXcd& g, double w);
Complex mzi_response(const HubbardParams& p, const Eigen::VectorXcd& g, double w);
Eigen::VectorXcd port_vector(const HubbardParams& p, const PortPair& ports);

}  // namespace graphtomo
