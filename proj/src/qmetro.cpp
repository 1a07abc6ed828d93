#include "graphtomo/qmetro.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <functional>
#include <cmath>
#include <numbers>

#include "graphtomo/errors.hpp"
#include "graphtomo/random.hpp"

namespace graphtomo {

namespace {

constexpr Complex kI(0.0, 1.0);

// Cumulative trapezoid with the end correction -h^2/12 (f'(t) - f'(t0)),
// derivatives by finite differences; fourth order for smooth f.
Eigen::VectorXd cumulative_integral(const Eigen::VectorXd& f, double h) {
  const int n = static_cast<int>(f.size());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  if (n < 2) return out;
  auto deriv = [&](int i) {
    if (n < 3) return (f[1] - f[0]) / h;
    if (i == 0) return (-3 * f[0] + 4 * f[1] - f[2]) / (2 * h);
    if (i == n - 1) return (3 * f[n - 1] - 4 * f[n - 2] + f[n - 3]) / (2 * h);
    return (f[i + 1] - f[i - 1]) / (2 * h);
  };
  double run = 0;
  const double d0 = deriv(0);
  for (int i = 1; i < n; ++i) {
    run += 0.5 * h * (f[i - 1] + f[i]);
    out[i] = run - h * h / 12 * (deriv(i) - d0);
  }
  return out;
}

void check_grid(const TimeGrid& g) {
  if (g.count < 2 || !(g.step > 0)) throw ValidationError("time grid needs a positive step and two or more points");
}

}  // namespace

double WavePacket::norm() const {
  return cumulative_integral(amplitude.cwiseAbs2(), grid.step)[amplitude.size() - 1];
}

Eigen::MatrixXcd port_hamiltonian(const HubbardParams& p, const Eigen::VectorXcd& g) {
  if (g.size() != p.graph.n) throw ValidationError("port coupling vector has the wrong length");
  return build_h1(p, false) - 0.5 * kI * g.conjugate() * g.transpose();
}

WavePacket wavepacket(const HubbardParams& p, const Eigen::VectorXcd& g, int v, PacketDirection dir, TimeGrid grid,
                      double bound_tol) {
  validate(p);
  check_grid(grid);
  if (v < 0 || v >= p.graph.n) throw ValidationError("vertex out of range");
  const Eigen::MatrixXcd h = port_hamiltonian(p, g);
  const Eigen::VectorXcd e = sorted_eigenvalues(h);
  const double scale = std::max(1.0, h.norm());
  for (int a = 0; a < e.size(); ++a)
    if (std::abs(e[a].imag()) <= bound_tol * scale)
      throw BoundStateDetected("mode at " + std::to_string(e[a].real()) + " does not decay into the port");

  WavePacket out;
  out.direction = dir;
  out.amplitude.resize(grid.count);
  Eigen::VectorXcd x = Eigen::VectorXcd::Zero(p.graph.n);
  x[v] = 1.0;
  if (dir == PacketDirection::out) {
    grid.start = 0;
    const Eigen::MatrixXcd step = (-kI * grid.step * h).exp();
    for (int i = 0; i < grid.count; ++i) {
      out.amplitude[i] = -kI * g.cwiseProduct(x).sum();
      x = step * x;
    }
  } else {
    grid.start = -grid.step * (grid.count - 1);
    const Eigen::MatrixXcd step = (kI * grid.step * h.adjoint()).exp();
    for (int i = grid.count - 1; i >= 0; --i) {
      out.amplitude[i] = kI * g.cwiseProduct(x).sum();
      x = step * x;
    }
  }
  out.grid = grid;
  return out;
}

Eigen::VectorXcd coupling_from_wavepacket(const WavePacket& f, double underflow) {
  check_grid(f.grid);
  const Eigen::VectorXd emitted = cumulative_integral(f.amplitude.cwiseAbs2(), f.grid.step);
  if (emitted[emitted.size() - 1] > 1 + 1e-9) throw ValidationError("packet norm exceeds one");
  Eigen::VectorXcd g(f.amplitude.size());
  for (int i = 0; i < g.size(); ++i) {
    const double left = 1.0 - emitted[i];
    if (left < underflow) {
      if (std::abs(f.amplitude[i]) == 0.0) {
        g[i] = 0.0;
        continue;
      }
      throw DenominatorUnderflow("cavity is empty at t = " + std::to_string(f.grid.at(i)));
    }
    g[i] = kI * f.amplitude[i] / std::sqrt(left);
  }
  return g;
}

WavePacket emit_from_coupling(const TimeGrid& grid, const Eigen::VectorXcd& g) {
  check_grid(grid);
  if (g.size() != grid.count) throw ValidationError("coupling samples do not match the grid");
  const Eigen::VectorXd lost = cumulative_integral(g.cwiseAbs2(), grid.step);
  WavePacket out;
  out.grid = grid;
  out.amplitude.resize(grid.count);
  for (int i = 0; i < grid.count; ++i) out.amplitude[i] = -kI * g[i] * std::exp(-0.5 * lost[i]);
  return out;
}

PropagatorBound propagator_bound(const Eigen::MatrixXcd& h_eff, int samples) {
  const Eigen::VectorXcd e = sorted_eigenvalues(h_eff);
  double rate = INFINITY;
  for (int a = 0; a < e.size(); ++a) rate = std::min(rate, -e[a].imag());
  if (!(rate > 0)) throw BoundStateDetected("propagator does not decay");
  PropagatorBound b;
  b.lambda0 = rate;
  const double ds = 20.0 / rate / samples;
  const Eigen::MatrixXcd step = (-kI * ds * h_eff).exp();
  Eigen::MatrixXcd u = Eigen::MatrixXcd::Identity(h_eff.rows(), h_eff.cols());
  for (int k = 0; k <= samples; ++k) {
    const double norm = Eigen::JacobiSVD<Eigen::MatrixXcd>(u).singularValues()[0];
    b.c0 = std::max(b.c0, norm * std::exp(rate * k * ds) / rate);
    u = step * u;
  }
  return b;
}

// ---- Fock space

int FockBasis::find(const std::vector<int>& occ) const {
  auto it = index.find(occ);
  return it == index.end() ? -1 : it->second;
}

FockBasis make_fock_basis(int n, int max_total) {
  if (n <= 0 || max_total < 0) throw ValidationError("Fock basis needs sites and a non-negative photon count");
  // C(n + P, P) without overflow
  double dim = 1;
  for (int k = 1; k <= max_total; ++k) dim = dim * (n + k) / k;
  if (dim > kFockDimensionCap)
    throw DimensionCapExceeded("Fock dimension " + std::to_string(static_cast<long long>(dim)) + " exceeds " +
                               std::to_string(kFockDimensionCap));
  FockBasis b;
  b.n = n;
  b.max_total = max_total;
  for (int total = 0; total <= max_total; ++total) {
    std::vector<int> occ(n, 0);
    // compositions of `total` into n parts, lexicographically descending in the first site
    std::function<void(int, int)> rec = [&](int site, int left) {
      if (site == n - 1) {
        occ[site] = left;
        b.states.push_back(occ);
        return;
      }
      for (int k = left; k >= 0; --k) {
        occ[site] = k;
        rec(site + 1, left - k);
      }
    };
    rec(0, total);
  }
  for (int i = 0; i < b.dim(); ++i) b.index[b.states[i]] = i;
  return b;
}

ManyBodyState fock_state(int n, int v, int photons) {
  if (v < 0 || v >= n) throw ValidationError("vertex out of range");
  ManyBodyState s;
  s.basis = make_fock_basis(n, photons);
  s.amplitude = Eigen::VectorXcd::Zero(s.basis.dim());
  std::vector<int> occ(n, 0);
  occ[v] = photons;
  s.amplitude[s.basis.find(occ)] = 1.0;
  return s;
}

Eigen::MatrixXcd fock_hamiltonian(const HubbardParams& p, const FockBasis& basis, bool couplings_on,
                                  const std::set<int>& chi_on) {
  if (basis.n != p.graph.n) throw ValidationError("Fock basis does not match the model size");
  const int dim = basis.dim();
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(dim, dim);
  for (int s = 0; s < dim; ++s) {
    const auto& occ = basis.states[s];
    for (int v = 0; v < basis.n; ++v) {
      h(s, s) += p.mu[v] * double(occ[v]);
      if (chi_on.count(v)) h(s, s) += 0.5 * p.chi[v] * occ[v] * (occ[v] - 1);
    }
    if (!couplings_on) continue;
    for (const auto& [e, val] : p.j) {
      for (auto [to, from] : {e, Edge{e.second, e.first}}) {
        if (occ[from] == 0) continue;
        std::vector<int> next = occ;
        next[from] -= 1;
        next[to] += 1;
        h(basis.find(next), s) += p.coupling(to, from) * std::sqrt(double(occ[from]) * (occ[to] + 1));
      }
    }
  }
  return h;
}

ManyBodyState evolve_manybody(const HubbardParams& p, const ManyBodyState& initial, double t, bool couplings_on,
                              const std::set<int>& chi_on) {
  validate(p);
  for (int v : chi_on)
    if (v < 0 || v >= p.graph.n) throw ValidationError("nonlinear site out of range");
  if (initial.amplitude.size() != initial.basis.dim()) throw ValidationError("state does not match its basis");
  const Eigen::MatrixXcd h = fock_hamiltonian(p, initial.basis, couplings_on, chi_on);
  ManyBodyState out = initial;
  // the number of excitations is conserved: exponentiate each sector on its own
  int begin = 0;
  while (begin < initial.basis.dim()) {
    auto total = [&](int i) {
      int s = 0;
      for (int k : initial.basis.states[i]) s += k;
      return s;
    };
    const int sector = total(begin);
    int end = begin;
    while (end < initial.basis.dim() && total(end) == sector) ++end;
    const int m = end - begin;
    const Eigen::MatrixXcd u = (-kI * t * h.block(begin, begin, m, m)).exp();
    out.amplitude.segment(begin, m) = u * initial.amplitude.segment(begin, m);
    begin = end;
  }
  return out;
}

// ---- NOON protocol

NoonPhase noon_phase(Complex mu, double chi, int photons, double t_on) {
  NoonPhase r;
  r.phase = (mu.real() * photons + 0.5 * chi * photons * (photons - 1)) * t_on;
  r.damping = std::exp(mu.imag() * photons * t_on);
  return r;
}

DiffusionDeviation diffusion_deviation(const HubbardParams& p, int v, int photons, double t_on) {
  validate(p);
  if (photons < 1) throw ValidationError("need at least one photon");
  const ManyBodyState start = fock_state(p.graph.n, v, photons);
  const std::set<int> on{v};
  const ManyBodyState coupled = evolve_manybody(p, start, t_on, true, on);
  const ManyBodyState local = evolve_manybody(p, start, t_on, false, on);
  DiffusionDeviation d;
  d.exact = (coupled.amplitude - local.amplitude).norm();
  d.bound = std::sqrt(2.0 * photons) * p.max_coupling() * p.graph.degree_bound() * t_on;
  return d;
}

ChiEstimate chi_estimator(double cos_meas, double sin_meas, int photons, double t_on, Complex mu, double margin,
                          double prior) {
  constexpr double slack = 1e-12;
  if (std::abs(cos_meas) > 1 + slack || std::abs(sin_meas) > 1 + slack)
    throw ValidationError("quadratures must lie in [-1, 1]");
  if (photons < 2) throw ValidationError("the nonlinear phase needs two or more photons");
  if (!(t_on > 0)) throw ValidationError("interaction time must be positive");
  if (!(margin >= 0 && margin < 1)) throw ValidationError("saturation margin must be in [0, 1)");
  const double c = std::clamp(cos_meas, -1.0, 1.0), s = std::clamp(sin_meas, -1.0, 1.0);
  ChiEstimate r;
  // invert the quadrature that is away from +-1, where its inverse has a bounded slope
  const bool cos_ok = std::abs(c) <= 1 - margin, sin_ok = std::abs(s) <= 1 - margin;
  if (!cos_ok && !sin_ok) throw BothBranchesSaturated("both quadratures are within the margin of +-1");
  r.used_cosine = cos_ok && (!sin_ok || std::abs(c) <= std::abs(s));
  if (r.used_cosine)
    r.theta = std::acos(c) * (s < 0 ? -1 : 1);
  else
    r.theta = c >= 0 ? std::asin(s) : std::numbers::pi - std::asin(s);
  if (r.theta > std::numbers::pi) r.theta -= 2 * std::numbers::pi;
  const double pairs = 0.5 * photons * (photons - 1);
  r.chi = (r.theta / t_on - mu.real() * photons) / pairs;
  r.period = 2 * std::numbers::pi / (t_on * pairs);
  r.chi += r.period * std::round((prior - r.chi) / r.period);
  return r;
}

bool NoonBudget::consistent(double tol) const {
  auto close = [&](double a, double b) { return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)}); };
  const double e1 = std::sqrt(2 * t_prop * eps0 * (d + 1) * photons * n);
  const double e2 = std::sqrt(2.0 * photons) * j * d * t_on;
  const double e3 = 2 * eps1 + eps2;
  const double e4 = 2 * eps3 + 1 / std::sqrt(k * delta);
  const double pr = 8 * eps4 / (photons * (photons - 1.0) * t_on);
  return close(e1, eps1) && close(e2, eps2) && close(e3, eps3) && close(e4, eps4) && close(pr, precision) &&
         close(t_prop, c0 / lambda0) && eps0 >= 0 && eps1 >= 0 && eps2 >= 0;
}

NoonBudget precision_budget(int photons, double t_on, double eps0, double k, double delta, double c0, double lambda0,
                            double j, int d, int n) {
  if (photons < 2) throw ValidationError("budget needs two or more photons");
  if (!(t_on > 0) || !(k > 0) || !(c0 > 0) || !(lambda0 > 0)) throw ValidationError("budget inputs must be positive");
  if (!(eps0 >= 0) || !(j >= 0) || d < 0 || n < 1) throw ValidationError("budget inputs must be non-negative");
  if (!(delta > 0 && delta < 1)) throw ValidationError("confidence parameter must lie in (0, 1)");
  NoonBudget b;
  b.photons = photons;
  b.t_on = t_on;
  b.eps0 = eps0;
  b.k = k;
  b.delta = delta;
  b.c0 = c0;
  b.lambda0 = lambda0;
  b.t_prop = c0 / lambda0;
  b.j = j;
  b.d = d;
  b.n = n;
  b.eps1 = std::sqrt(2 * b.t_prop * eps0 * (d + 1) * photons * n);
  b.eps2 = std::sqrt(2.0 * photons) * j * d * t_on;
  b.eps3 = 2 * b.eps1 + b.eps2;
  b.eps4 = 2 * b.eps3 + 1 / std::sqrt(k * delta);
  b.precision = 8 * b.eps4 / (photons * (photons - 1.0) * t_on);
  return b;
}

NoonBudget scheduled_budget(int photons, const NoonSchedule& s, double k, double delta, double c0, double lambda0,
                            double j, int d, int n) {
  if (photons < 1) throw ValidationError("need at least one photon");
  return precision_budget(photons, s.t_scale / std::sqrt(double(photons)), s.eps_scale / photons, k, delta, c0,
                          lambda0, j, d, n);
}

ScalingFit budget_sweep(const std::vector<int>& photons, const NoonSchedule& s, double k, double delta, double c0,
                        double lambda0, double j, int d, int n) {
  ScalingFit out;
  std::vector<double> lx, ly;
  for (int p : photons) {
    const NoonBudget b = scheduled_budget(p, s, k, delta, c0, lambda0, j, d, n);
    out.x.push_back(p);
    out.y.push_back(b.precision);
    lx.push_back(std::log(double(p)));
    ly.push_back(std::log(b.precision));
  }
  out.fit = fit_line(lx, ly);
  return out;
}

double fock_phase_precision(int photons) {
  if (photons < 1) throw ValidationError("need at least one photon");
  return 1.0 / photons;
}

ScalingFit fock_precision_sweep(const HubbardParams& p, const std::vector<int>& photons, int trials,
                                std::uint64_t seed, int jobs) {
  ScalingFit out;
  std::vector<double> lx, ly;
  for (size_t i = 0; i < photons.size(); ++i) {
    const double sigma = fock_phase_precision(photons[i]);
    const MonteCarloResult r = monte_carlo_noise(p, sigma, trials, derive_seed(seed, i), NoiseStage::single, false, jobs);
    double worst = 0;
    for (const auto& [e, v] : r.rms_j) worst = std::max(worst, v);
    out.x.push_back(photons[i]);
    out.y.push_back(worst);
    lx.push_back(std::log(double(photons[i])));
    ly.push_back(std::log(worst));
  }
  out.fit = fit_line(lx, ly);
  return out;
}

}  // namespace graphtomo
