#include "graphtomo/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <string>

#include "graphtomo/errors.hpp"
#include "graphtomo/random.hpp"

namespace graphtomo {

namespace {

constexpr Complex kI(0.0, 1.0);

double spectrum_scale(const Eigen::VectorXcd& e) { return std::max(1.0, e.size() ? e.cwiseAbs().maxCoeff() : 0.0); }

void check_off_spectrum(const Eigen::VectorXcd& e, double w) {
  const double tol = 1e-13 * spectrum_scale(e);
  for (int a = 0; a < e.size(); ++a)
    if (std::abs(e[a] - w) <= tol)
      throw SingularResolvent("frequency " + std::to_string(w) + " sits on eigenvalue " + std::to_string(a));
}

HubbardParams with_pair_ports(const HubbardParams& p, const PortPair& ports) {
  validate_ports(p.graph, ports);
  HubbardParams q = p;
  if (!q.port_gamma.count(ports.in)) q.port_gamma[ports.in] = ports.gamma_in;
  if (!q.port_gamma.count(ports.out)) q.port_gamma[ports.out] = ports.gamma_out;
  return q;
}

// sum_a m[a] x[a] / (e[a] - w)
Complex pole_sum(const Eigen::VectorXcd& m, const Eigen::VectorXcd& e, double w, const Eigen::VectorXcd* x = nullptr) {
  Complex acc = 0;
  for (int a = 0; a < e.size(); ++a) acc += m[a] * (x ? (*x)[a] : Complex(1.0)) / (e[a] - w);
  return acc;
}

// S1 - S2 for tone a absorbed first, tone b second (no rate prefactor).
Complex ordered_kernel(const PortSpectrum& s, double tau, double wa, double wb) {
  const int n1 = static_cast<int>(s.e1.size()), d = static_cast<int>(s.e2.size());
  Eigen::VectorXcd decay(n1);
  for (int a = 0; a < n1; ++a) decay[a] = std::exp(-kI * s.e1[a] * tau);
  const Complex s1 = pole_sum(s.m1, s.e1, wa, &decay) * pole_sum(s.m1, s.e1, wb);
  Eigen::VectorXcd z(n1), y(d);
  for (int a = 0; a < n1; ++a) z[a] = 1.0 / (s.e1[a] - wb);
  for (int k = 0; k < d; ++k) y[k] = 1.0 / (s.e2[k] - wa - wb);
  Complex s2 = 0;
  for (int a1 = 0; a1 < n1; ++a1) {
    Complex inner = 0;
    for (int k = 0; k < d; ++k) {
      Complex row = 0;
      for (int a3 = 0; a3 < n1; ++a3) row += s.m2(a1, k, a3) * z[a3];
      inner += row * y[k];
    }
    s2 += decay[a1] * inner;
  }
  return s1 - s2;
}

}  // namespace

void validate_ports(const LatticeGraph& g, const PortPair& ports) {
  for (int v : {ports.in, ports.out})
    if (v < 0 || v >= g.n || !g.is_boundary(v))
      throw ValidationError("port vertex " + std::to_string(v) + " is not a boundary vertex");
  if (!(ports.gamma_in > 0) || !(ports.gamma_out > 0)) throw ValidationError("port rates must be positive");
  if (ports.in == ports.out && ports.gamma_in != ports.gamma_out)
    throw ValidationError("a single port cannot have two different rates");
}

Eigen::MatrixXcd ported_h1(const HubbardParams& p, const PortPair& ports) {
  return build_h1(with_pair_ports(p, ports), true);
}

Eigen::MatrixXcd ported_h2(const HubbardParams& p, const PortPair& ports) {
  const HubbardParams q = with_pair_ports(p, ports);
  return build_h2(q, make_pair_basis(q.graph.n), true);
}

PortSpectrum port_spectrum(const HubbardParams& p, const PortPair& ports, bool with_m2) {
  const HubbardParams q = with_pair_ports(p, ports);
  const BiorthogonalEig eig1 = eig_biorthogonal(build_h1(q, true));
  PortSpectrum s;
  s.e1 = eig1.energies;
  s.m1.resize(s.e1.size());
  for (int a = 0; a < s.e1.size(); ++a) s.m1[a] = eig1.right(ports.out, a) * eig1.left(a, ports.in);
  s.rate = std::sqrt(ports.gamma_in * ports.gamma_out);
  s.phase = ports.phase;
  if (with_m2) {
    const PairBasis basis = make_pair_basis(q.graph.n);
    const BiorthogonalEig eig2 = eig_biorthogonal(build_h2(q, basis, true));
    s.e2 = eig2.energies;
    std::vector<int> sites = {ports.out};
    if (ports.in != ports.out) sites.push_back(ports.in);
    s.m2 = m2_from_eig(eig1, eig2, basis, sites).at(ports.out, ports.in);
    s.has_m2 = true;
  }
  return s;
}

PortSpectrum port_spectrum(const SpectralData& data, const PortPair& ports) {
  if (!(ports.gamma_in > 0) || !(ports.gamma_out > 0)) throw ValidationError("port rates must be positive");
  PortSpectrum s;
  s.e1 = data.e1;
  s.e2 = data.e2;
  s.m1 = data.m1.at(ports.out, ports.in);
  if (data.has_m2) {
    s.m2 = data.m2.at(ports.out, ports.in);
    s.has_m2 = true;
  }
  s.rate = std::sqrt(ports.gamma_in * ports.gamma_out);
  s.phase = ports.phase;
  return s;
}

Complex tau_omega(const PortSpectrum& s, double w) {
  check_off_spectrum(s.e1, w);
  return kI * s.rate * pole_sum(s.m1, s.e1, w);
}

Complex tau_omega(const HubbardParams& p, const PortPair& ports, double w) {
  return tau_omega(port_spectrum(p, ports, false), w);
}

Complex tau_resolvent(const HubbardParams& p, const PortPair& ports, double w) {
  Eigen::MatrixXcd h = ported_h1(p, ports);
  h.diagonal().array() -= w;
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(h);
  if (!(lu.rcond() > 1e-14)) throw SingularResolvent("resolvent is singular at " + std::to_string(w));
  Eigen::VectorXcd e = Eigen::VectorXcd::Zero(h.rows());
  e[ports.in] = 1.0;
  const Eigen::VectorXcd x = lu.solve(e);
  return kI * std::sqrt(ports.gamma_in * ports.gamma_out) * x[ports.out];
}

double transmission(Complex tau, double phase) { return 0.5 * std::norm(std::polar(1.0, phase) + tau); }

double transmission(const PortSpectrum& s, double w) { return transmission(tau_omega(s, w), s.phase); }

Complex tau_from_quadratures(double t0, double t_half_pi, double t_pi, double t_three_half_pi) {
  return {(t0 - t_pi) / 2.0, (t_half_pi - t_three_half_pi) / 2.0};
}

double photon_noise_sigma(double n_photons) {
  if (!(n_photons > 0)) throw ValidationError("photon budget must be positive");
  return 1.0 / std::sqrt(n_photons);
}

std::vector<double> add_noise(const std::vector<double>& values, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0)) throw ValidationError("noise width must be non-negative");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, sigma > 0 ? sigma : 1.0);
  std::vector<double> out = values;
  if (sigma > 0)
    for (double& x : out) x += normal(rng);
  return out;
}

Complex t2_kernel(const PortSpectrum& s, double tau, double w1, double w2) {
  if (!s.has_m2) throw ValidationError("two-photon kernel needs the M2 tensor");
  if (tau < 0) throw ValidationError("two-photon kernel needs tau >= 0");
  check_off_spectrum(s.e1, w1);
  check_off_spectrum(s.e1, w2);
  check_off_spectrum(s.e2, w1 + w2);
  return s.rate * s.rate * (ordered_kernel(s, tau, w1, w2) + ordered_kernel(s, tau, w2, w1));
}

Complex connected_correlator(const PortSpectrum& s, double t1, double t2, double w1, double w2) {
  if (t1 < t2) std::swap(t1, t2);
  const double tau = t1 - t2;
  return std::exp(-2.0 * kI * w1 * t2) * 0.5 * t2_kernel(s, tau, w1, w1) +
         std::exp(-2.0 * kI * w2 * t2) * 0.5 * t2_kernel(s, tau, w2, w2) +
         std::exp(-kI * (w1 + w2) * t2) * t2_kernel(s, tau, w1, w2);
}

double g2(const PortSpectrum& s, double t1, double t2, double w1, double w2) {
  if (t1 < t2) std::swap(t1, t2);
  const double tau = t1 - t2, delta = w1 - w2;
  const Complex lo = std::polar(1.0, s.phase);
  const Complex h1 = tau_omega(s, w1) + lo, h2 = tau_omega(s, w2) + lo;
  const Complex d1 = std::exp(-kI * w1 * tau), d2 = std::exp(-kI * w2 * tau);
  const Complex total = std::exp(-kI * delta * t2) * (0.5 * t2_kernel(s, tau, w1, w1) + d1 * h1 * h1) +
                        std::exp(kI * delta * t2) * (0.5 * t2_kernel(s, tau, w2, w2) + d2 * h2 * h2) +
                        (t2_kernel(s, tau, w1, w2) + (d1 + d2) * h1 * h2);
  return 0.25 * std::norm(total);
}

double g2(const HubbardParams& p, const PortPair& ports, double t1, double t2, double w1, double w2) {
  return g2(port_spectrum(p, ports, true), t1, t2, w1, w2);
}

// ---- constant-term isolation

ConstantTerm isolate_constant_term(const std::vector<double>& times, const std::vector<double>& values, double delta,
                                   double root_tol) {
  if (times.size() != values.size()) throw ValidationError("times and values differ in length");
  if (!(std::abs(delta) > 0)) throw ValidationError("tone separation must be non-zero");
  const std::set<double> distinct(times.begin(), times.end());
  if (distinct.size() < 5) throw ValidationError("need at least five distinct sample times");
  const int k = static_cast<int>(times.size());
  Eigen::MatrixXd a(k, 5);
  Eigen::VectorXd f(k);
  for (int i = 0; i < k; ++i) {
    const double t = times[i];
    a.row(i) << 1.0, std::cos(delta * t), std::sin(delta * t), std::cos(2 * delta * t), std::sin(2 * delta * t);
    f[i] = values[i];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  if (qr.rank() < 5) throw ValidationError("sample times do not resolve the three harmonics");
  const Eigen::VectorXd c = qr.solve(f);
  ConstantTerm out;
  out.a0 = c[0];
  out.a1 = Complex(c[1] / 2, -c[2] / 2);
  out.a2 = Complex(c[3] / 2, -c[4] / 2);
  out.residual = std::sqrt((a * c - f).squaredNorm() / k);

  const double a0 = c[0];
  const Complex a1 = out.a1, a2 = out.a2;
  const double top = std::max(a0, 0.0);
  const double scale = std::max({a0 * a0, std::norm(a1), std::abs(a2) * top, 1e-300});
  const double tol = root_tol * scale;
  auto fn = [&](double x) { return std::norm(a1) + std::abs(a1 * a1 - 4.0 * x * a2) - 2.0 * x * (a0 - x); };

  std::vector<double> roots;
  if (top <= 0) {
    if (std::abs(fn(0.0)) <= tol) roots.push_back(0.0);
  } else {
    const int grid = 4000;
    std::vector<double> xs(grid + 1), fs(grid + 1);
    for (int i = 0; i <= grid; ++i) {
      xs[i] = top * i / grid;
      fs[i] = fn(xs[i]);
    }
    for (int i = 0; i < grid; ++i) {
      if (fs[i] == 0.0) roots.push_back(xs[i]);
      else if (fs[i] * fs[i + 1] < 0) {
        double lo = xs[i], hi = xs[i + 1], flo = fs[i];
        for (int it = 0; it < 200 && hi - lo > 1e-17 * top; ++it) {
          const double mid = 0.5 * (lo + hi), fm = fn(mid);
          if ((fm < 0) == (flo < 0)) {
            lo = mid;
            flo = fm;
          } else {
            hi = mid;
          }
        }
        roots.push_back(0.5 * (lo + hi));
      }
    }
    if (fs[grid] == 0.0) roots.push_back(top);
    // touching roots: local minima of |f| that reach zero
    for (int i = 0; i <= grid; ++i) {
      const double here = std::abs(fs[i]);
      const bool left = i == 0 || here <= std::abs(fs[i - 1]);
      const bool right = i == grid || here <= std::abs(fs[i + 1]);
      if (!(left && right)) continue;
      double lo = xs[std::max(i - 1, 0)], hi = xs[std::min(i + 1, grid)];
      const double g = 0.5 * (std::sqrt(5.0) - 1.0);
      for (int it = 0; it < 200 && hi - lo > 1e-17 * top; ++it) {
        const double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
        if (std::abs(fn(x1)) < std::abs(fn(x2))) hi = x2;
        else lo = x1;
      }
      const double x = 0.5 * (lo + hi);
      if (std::abs(fn(x)) <= tol) roots.push_back(x);
      else if (here <= tol) roots.push_back(xs[i]);
    }
  }
  std::sort(roots.begin(), roots.end());
  std::vector<double> merged;
  for (double r : roots)
    if (merged.empty() || r - merged.back() > 1e-6 * std::max(top, 1e-300)) merged.push_back(r);
  if (merged.empty()) throw NoRealRoot("no admissible |C0|^2 in [0, " + std::to_string(top) + "]");
  for (double r : merged) out.candidates.push_back(std::sqrt(std::max(r, 0.0)));
  if (merged.size() > 1) {
    std::string list;
    for (double r : out.candidates) list += " " + std::to_string(r);
    throw AmbiguousRoot("several admissible |C0|:" + list, out.candidates);
  }
  out.value = out.candidates.front();
  return out;
}

// ---- pole extraction

std::vector<double> frequency_grid(const Eigen::VectorXcd& energies, int per_width, int max_points) {
  if (energies.size() == 0) throw ValidationError("no resonances to bracket");
  double lo = energies.real().minCoeff(), hi = energies.real().maxCoeff();
  double wmax = 0, wmin = INFINITY;
  for (int a = 0; a < energies.size(); ++a) {
    const double g = -2.0 * energies[a].imag();
    wmax = std::max(wmax, g);
    if (g > 0) wmin = std::min(wmin, g);
  }
  if (!(wmax > 0)) throw ValidationError("frequency grid needs lossy resonances");
  lo -= 5 * wmax;
  hi += 5 * wmax;
  int count = static_cast<int>(std::ceil((hi - lo) / wmin * per_width)) + 1;
  count = std::clamp(count, 16, max_points);
  std::vector<double> grid(count);
  for (int i = 0; i < count; ++i) grid[i] = lo + (hi - lo) * i / (count - 1);
  return grid;
}

PoleFit extract_poles(const std::vector<double>& grid, const Eigen::VectorXcd& samples, int n_poles,
                      const PoleOptions& opt) {
  return extract_poles_multi(grid, {samples}, n_poles, opt);
}

PoleFit extract_poles_multi(const std::vector<double>& grid, const std::vector<Eigen::VectorXcd>& channels,
                            int n_poles, const PoleOptions& opt) {
  const int k = static_cast<int>(grid.size()), nc = static_cast<int>(channels.size()), n = n_poles;
  if (nc == 0 || n <= 0) throw ValidationError("pole extraction needs channels and a positive pole count");
  for (const auto& ch : channels)
    if (ch.size() != k) throw ValidationError("channel length does not match the grid");
  for (int i = 1; i < k; ++i)
    if (!(grid[i] > grid[i - 1])) throw ValidationError("frequency grid must be strictly increasing");
  if (k < 4 * n) throw RankDeficient("too few samples for " + std::to_string(n) + " poles");

  const double centre = 0.5 * (grid.front() + grid.back());
  const double half = std::max(0.5 * (grid.back() - grid.front()), 1e-300);

  // generic combination carries every pole
  Eigen::VectorXcd mix = Eigen::VectorXcd::Zero(k);
  for (int c = 0; c < nc; ++c) mix += std::polar(1.0 + 0.37 * c, 0.9 + 1.7 * c) * channels[c];

  const int m = std::min(k, std::max(opt.pencil_points, 4 * n + 4));
  std::vector<int> pick(m);
  for (int i = 0; i < m; ++i) pick[i] = static_cast<int>(std::llround(double(i) * (k - 1) / (m - 1)));
  std::vector<double> mu, la;
  std::vector<Complex> fv, fw;
  for (int i = 0; i < m; ++i) {
    const double x = (grid[pick[i]] - centre) / half;
    if (i % 2 == 0) {
      mu.push_back(x);
      fv.push_back(mix[pick[i]]);
    } else {
      la.push_back(x);
      fw.push_back(mix[pick[i]]);
    }
  }
  const int ml = static_cast<int>(mu.size()), mr = static_cast<int>(la.size());
  Eigen::MatrixXcd lw(ml, mr), ls(ml, mr);
  for (int i = 0; i < ml; ++i)
    for (int j = 0; j < mr; ++j) {
      lw(i, j) = (fv[i] - fw[j]) / (mu[i] - la[j]);
      ls(i, j) = (mu[i] * fv[i] - la[j] * fw[j]) / (mu[i] - la[j]);
    }
  Eigen::MatrixXcd wide(ml, 2 * mr), tall(2 * ml, mr);
  wide << lw, ls;
  tall << lw, ls;
  Eigen::BDCSVD<Eigen::MatrixXcd> sw(wide, Eigen::ComputeThinU), st(tall, Eigen::ComputeThinV);
  PoleFit fit;
  const Eigen::VectorXd sv = sw.singularValues();
  for (int i = 0; i < sv.size(); ++i) fit.singular_values.push_back(sv[i] / sv[0]);
  if (sv.size() < n || !(sv[n - 1] > opt.rank_tol * sv[0]))
    throw RankDeficient("pencil has numerical rank below " + std::to_string(n));
  const Eigen::MatrixXcd y = sw.matrixU().leftCols(n), x = st.matrixV().leftCols(n);
  const Eigen::MatrixXcd lr = y.adjoint() * lw * x, lsr = y.adjoint() * ls * x;
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(lr.partialPivLu().solve(lsr), false);
  Eigen::VectorXcd z(n);
  for (int j = 0; j < n; ++j) z[j] = centre + half * es.eigenvalues()[j];

  // residues by linear least squares, then joint Gauss-Newton on poles and residues
  auto basis = [&](const Eigen::VectorXcd& zz) {
    Eigen::MatrixXcd phi(k, n);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < n; ++j) phi(i, j) = 1.0 / (kI * (zz[j] - grid[i]));
    return phi;
  };
  auto solve_residues = [&](const Eigen::VectorXcd& zz, std::vector<Eigen::VectorXcd>& res) {
    const Eigen::MatrixXcd phi = basis(zz);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXcd> qr(phi);
    double misfit = 0;
    res.resize(nc);
    for (int c = 0; c < nc; ++c) {
      res[c] = qr.solve(channels[c]);
      misfit += (phi * res[c] - channels[c]).squaredNorm();
    }
    return misfit;
  };
  double norm2 = 0;
  for (const auto& ch : channels) norm2 += ch.squaredNorm();
  norm2 = std::max(norm2, 1e-300);

  std::vector<Eigen::VectorXcd> res;
  double misfit = solve_residues(z, res);
  double damping = 1e-6;
  for (int it = 0; it < opt.refine_iterations && misfit > 1e-30 * norm2; ++it) {
    const Eigen::MatrixXcd phi = basis(z);
    const int np = n + n * nc;
    Eigen::MatrixXcd jac = Eigen::MatrixXcd::Zero(k * nc, np);
    Eigen::VectorXcd r(k * nc);
    for (int c = 0; c < nc; ++c) {
      r.segment(c * k, k) = phi * res[c] - channels[c];
      for (int i = 0; i < k; ++i)
        for (int j = 0; j < n; ++j) {
          jac(c * k + i, j) = -res[c][j] * phi(i, j) * phi(i, j) * kI;
          jac(c * k + i, n + c * n + j) = phi(i, j);
        }
    }
    const Eigen::MatrixXcd jh = jac.adjoint();
    const Eigen::MatrixXcd normal = jh * jac;
    const Eigen::VectorXcd rhs = -(jh * r);
    bool improved = false;
    for (int tries = 0; tries < 12; ++tries) {
      Eigen::MatrixXcd damped = normal;
      damped.diagonal() += damping * normal.diagonal().cwiseAbs().cwiseMax(1e-300);
      const Eigen::VectorXcd step = damped.ldlt().solve(rhs);
      Eigen::VectorXcd z2 = z + step.head(n);
      std::vector<Eigen::VectorXcd> res2;
      const double m2 = solve_residues(z2, res2);
      if (std::isfinite(m2) && m2 < misfit) {
        const double gain = (misfit - m2) / misfit;
        z = z2;
        res = std::move(res2);
        misfit = m2;
        damping = std::max(damping / 10, 1e-12);
        improved = gain > 1e-12;
        break;
      }
      damping *= 10;
    }
    if (!improved) break;
  }

  fit.residual = std::sqrt(misfit / norm2);
  std::vector<int> order(n);
  for (int j = 0; j < n; ++j) order[j] = j;
  std::sort(order.begin(), order.end(), [&](int a, int b) { return z[a].real() < z[b].real(); });
  fit.residues.assign(nc, Eigen::VectorXcd(n));
  for (int jj = 0; jj < n; ++jj) {
    const int j = order[jj];
    fit.poles.push_back({z[j].real(), -2.0 * z[j].imag(), res[0][j]});
    for (int c = 0; c < nc; ++c) fit.residues[c][jj] = res[c][j];
  }
  if (!(fit.residual <= opt.max_residual))
    throw PoorFit("relative misfit " + std::to_string(fit.residual) + " above " + std::to_string(opt.max_residual));
  return fit;
}

// ---- interferometer phase

Eigen::VectorXcd port_vector(const HubbardParams& p, const PortPair& ports) {
  validate_ports(p.graph, ports);
  Eigen::VectorXcd g = Eigen::VectorXcd::Zero(p.graph.n);
  g[ports.in] += std::sqrt(ports.gamma_in);
  if (ports.out != ports.in) g[ports.out] += std::sqrt(ports.gamma_out);
  return g;
}

Complex mzi_response(const HubbardParams& p, const Eigen::VectorXcd& g, double w) {
  if (g.size() != p.graph.n) throw ValidationError("port vector length does not match the lattice");
  Eigen::MatrixXcd h = build_h1(p, false) - 0.5 * kI * (g.conjugate() * g.transpose());
  h.diagonal().array() -= w;
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(h);
  if (!(lu.rcond() > 1e-14)) throw SingularResolvent("interferometer resolvent is singular at " + std::to_string(w));
  const Eigen::VectorXcd x = lu.solve(g.conjugate());
  return 1.0 + kI * (g.transpose() * x)(0, 0);
}

double mzi_phase(const HubbardParams& p, const Eigen::VectorXcd& g, double w) { return std::arg(mzi_response(p, g, w)); }

}  // namespace graphtomo
