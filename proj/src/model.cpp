#include "graphtomo/model.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "graphtomo/errors.hpp"
#include "graphtomo/random.hpp"

namespace graphtomo {

Complex HubbardParams::coupling(int v, int u) const {
  if (v == u) return 0.0;
  auto it = j.find({std::min(v, u), std::max(v, u)});
  if (it == j.end()) return 0.0;
  return v < u ? it->second : std::conj(it->second);
}

void HubbardParams::set_coupling(int v, int u, Complex value) {
  if (v == u) throw ValidationError("coupling on a self-loop");
  if (v < u)
    j[{v, u}] = value;
  else
    j[{u, v}] = std::conj(value);
}

double HubbardParams::max_coupling() const {
  double m = 0;
  for (const auto& [e, val] : j) m = std::max(m, std::abs(val));
  return m;
}

HubbardParams blank_params(const LatticeGraph& g) {
  HubbardParams p;
  p.graph = g;
  p.mu.assign(g.n, 0.0);
  p.chi.assign(g.n, 0.0);
  for (const auto& e : g.edges) p.j[e] = 0.0;
  return p;
}

void validate(const HubbardParams& p) {
  const int n = p.graph.n;
  if (static_cast<int>(p.mu.size()) != n) throw ValidationError("model: mu has wrong length");
  if (static_cast<int>(p.chi.size()) != n) throw ValidationError("model: chi has wrong length");
  for (int v = 0; v < n; ++v)
    if (p.mu[v].imag() > 1e-12 * (1.0 + std::abs(p.mu[v])))
      throw ValidationError("model: mu[" + std::to_string(v) + "] has positive imaginary part (gain)");
  for (const auto& [e, val] : p.j)
    if (e.first >= e.second || !p.graph.has_edge(e.first, e.second))
      throw ValidationError("model: coupling on (" + std::to_string(e.first) + "," + std::to_string(e.second) +
                            ") which is not an edge");
  for (const auto& [v, g] : p.port_gamma) {
    if (!p.graph.is_boundary(v)) throw ValidationError("model: port on non-boundary vertex " + std::to_string(v));
    if (!(g >= 0)) throw ValidationError("model: negative port rate");
  }
}

Eigen::MatrixXcd build_h1(const HubbardParams& p, bool include_ports) {
  const int n = p.graph.n;
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(n, n);
  for (int v = 0; v < n; ++v) h(v, v) = p.mu[v];
  if (include_ports)
    for (const auto& [v, g] : p.port_gamma) h(v, v) -= Complex(0, 0.5 * g);
  for (const auto& [e, val] : p.j) {
    h(e.first, e.second) = val;
    h(e.second, e.first) = std::conj(val);
  }
  return h;
}

PairBasis make_pair_basis(int n) {
  PairBasis b;
  b.n = n;
  b.lookup.assign(static_cast<size_t>(n) * n, -1);
  for (int v = 0; v < n; ++v)
    for (int u = v; u < n; ++u) {
      b.lookup[n * v + u] = static_cast<int>(b.pairs.size());
      b.pairs.emplace_back(v, u);
    }
  return b;
}

Eigen::MatrixXd lowering_matrix(const PairBasis& basis, int v) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(basis.n, basis.size());
  for (int k = 0; k < basis.size(); ++k) {
    auto [x, y] = basis.pairs[k];
    if (x == v && y == v)
      a(v, k) = std::sqrt(2.0);
    else if (x == v)
      a(y, k) = 1.0;
    else if (y == v)
      a(x, k) = 1.0;
  }
  return a;
}

Eigen::MatrixXcd build_h2(const HubbardParams& p, const PairBasis& basis, bool include_ports) {
  // sum_{x,y} h_{xy} a_x^+ a_y restricted to two excitations, plus the Kerr term
  const Eigen::MatrixXcd h1 = build_h1(p, include_ports);
  const int n = basis.n, d = basis.size();
  std::vector<Eigen::MatrixXd> low(n);
  for (int v = 0; v < n; ++v) low[v] = lowering_matrix(basis, v);
  Eigen::MatrixXcd h2 = Eigen::MatrixXcd::Zero(d, d);
  for (int x = 0; x < n; ++x) {
    Eigen::MatrixXcd row = Eigen::MatrixXcd::Zero(n, d);
    bool any = false;
    for (int y = 0; y < n; ++y)
      if (h1(x, y) != 0.0) {
        row += h1(x, y) * low[y].cast<Complex>();
        any = true;
      }
    if (any) h2.noalias() += low[x].transpose().cast<Complex>() * row;
  }
  for (int v = 0; v < n; ++v) h2(basis.index(v, v), basis.index(v, v)) += p.chi[v];
  return h2;
}

namespace {

std::vector<int> sorted_order(const Eigen::VectorXcd& e) {
  std::vector<int> idx(e.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    if (e[a].real() != e[b].real()) return e[a].real() < e[b].real();
    return e[a].imag() < e[b].imag();
  });
  return idx;
}

}  // namespace

double min_gap(const Eigen::VectorXcd& e) {
  double g = std::numeric_limits<double>::infinity();
  for (int a = 0; a < e.size(); ++a)
    for (int b = a + 1; b < e.size(); ++b) g = std::min(g, std::abs(e[a] - e[b]));
  return g;
}

Eigen::VectorXcd sorted_eigenvalues(const Eigen::MatrixXcd& m) {
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(m, false);
  const Eigen::VectorXcd raw = es.eigenvalues();
  auto idx = sorted_order(raw);
  Eigen::VectorXcd out(raw.size());
  for (int k = 0; k < raw.size(); ++k) out[k] = raw[idx[k]];
  return out;
}

BiorthogonalEig eig_biorthogonal(const Eigen::MatrixXcd& m, double rel_tol) {
  if (m.rows() != m.cols()) throw ValidationError("eig_biorthogonal: matrix is not square");
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(m, true);
  if (es.info() != Eigen::Success) throw Error("eig_biorthogonal: eigensolver did not converge");
  const Eigen::VectorXcd raw = es.eigenvalues();
  const double gap = min_gap(raw);
  const double scale = m.norm();
  if (m.rows() > 1 && gap < rel_tol * scale)
    throw DegenerateSpectrum("eigenvalue gap " + std::to_string(gap) + " below " + std::to_string(rel_tol) +
                             " * |H| = " + std::to_string(rel_tol * scale));
  auto idx = sorted_order(raw);
  BiorthogonalEig out;
  const int n = static_cast<int>(raw.size());
  out.energies.resize(n);
  out.right.resize(n, n);
  for (int k = 0; k < n; ++k) {
    out.energies[k] = raw[idx[k]];
    out.right.col(k) = es.eigenvectors().col(idx[k]).normalized();
  }
  out.left = out.right.partialPivLu().inverse();
  return out;
}

int M1Tensor::index(int v) const {
  auto it = std::find(sites.begin(), sites.end(), v);
  if (it == sites.end()) throw ValidationError("M1: vertex " + std::to_string(v) + " not in tensor");
  return static_cast<int>(it - sites.begin());
}
const Eigen::VectorXcd& M1Tensor::at(int v, int u) const { return blocks[index(v) * sites.size() + index(u)]; }
Eigen::VectorXcd& M1Tensor::at(int v, int u) { return blocks[index(v) * sites.size() + index(u)]; }

int M2Tensor::index(int v) const {
  auto it = std::find(sites.begin(), sites.end(), v);
  if (it == sites.end()) throw ValidationError("M2: vertex " + std::to_string(v) + " not in tensor");
  return static_cast<int>(it - sites.begin());
}
const Tensor3& M2Tensor::at(int v, int u) const { return blocks[index(v) * sites.size() + index(u)]; }
Tensor3& M2Tensor::at(int v, int u) { return blocks[index(v) * sites.size() + index(u)]; }

M1Tensor m1_from_eig(const BiorthogonalEig& eig1, const std::vector<int>& sites) {
  M1Tensor t;
  t.sites = sites;
  const int n = static_cast<int>(eig1.energies.size());
  for (int v : sites)
    for (int u : sites) {
      Eigen::VectorXcd m(n);
      for (int a = 0; a < n; ++a) m[a] = eig1.right(v, a) * eig1.left(a, u);
      t.blocks.push_back(std::move(m));
    }
  return t;
}

M1Tensor m1_oracle(const HubbardParams& p, bool include_ports) {
  return m1_from_eig(eig_biorthogonal(build_h1(p, include_ports)), p.graph.boundary);
}

M1Tensor m1_full(const HubbardParams& p, bool include_ports) {
  std::vector<int> all(p.graph.n);
  std::iota(all.begin(), all.end(), 0);
  return m1_from_eig(eig_biorthogonal(build_h1(p, include_ports)), all);
}

M2Tensor m2_from_eig(const BiorthogonalEig& eig1, const BiorthogonalEig& eig2, const PairBasis& basis,
                     const std::vector<int>& sites) {
  const int n = basis.n, d = basis.size();
  M2Tensor t;
  t.sites = sites;
  t.n1 = n;
  t.d = d;
  std::vector<Eigen::MatrixXcd> lower(sites.size()), raise(sites.size());
  for (size_t i = 0; i < sites.size(); ++i) {
    Eigen::MatrixXcd a = lowering_matrix(basis, sites[i]).cast<Complex>();
    lower[i] = eig1.left * a * eig2.right;               // <l1_a1| a_v |r2_a2>
    raise[i] = eig2.left * a.transpose() * eig1.right;   // <l2_a2| a_u^+ |r1_a3>
  }
  for (size_t i = 0; i < sites.size(); ++i)
    for (size_t k = 0; k < sites.size(); ++k) {
      const int v = sites[i], u = sites[k];
      Tensor3 m(n, d, n);
      for (int a1 = 0; a1 < n; ++a1) {
        const Complex rv = eig1.right(v, a1);
        for (int a2 = 0; a2 < d; ++a2) {
          const Complex x = rv * lower[i](a1, a2);
          for (int a3 = 0; a3 < n; ++a3) m(a1, a2, a3) = x * raise[k](a2, a3) * eig1.left(a3, u);
        }
      }
      t.blocks.push_back(std::move(m));
    }
  return t;
}

M2Tensor m2_oracle(const HubbardParams& p, bool include_ports) {
  const PairBasis basis = make_pair_basis(p.graph.n);
  return m2_from_eig(eig_biorthogonal(build_h1(p, include_ports)), eig_biorthogonal(build_h2(p, basis, include_ports)),
                     basis, p.graph.boundary);
}

SpectralData synthesize(const HubbardParams& p, bool include_ports, bool with_m2) {
  SpectralData s;
  const BiorthogonalEig e1 = eig_biorthogonal(build_h1(p, include_ports));
  s.e1 = e1.energies;
  s.m1 = m1_from_eig(e1, p.graph.boundary);
  const PairBasis basis = make_pair_basis(p.graph.n);
  if (with_m2) {
    const BiorthogonalEig e2 = eig_biorthogonal(build_h2(p, basis, include_ports));
    s.e2 = e2.energies;
    s.m2 = m2_from_eig(e1, e2, basis, p.graph.boundary);
    s.has_m2 = true;
  } else {
    s.e2 = sorted_eigenvalues(build_h2(p, basis, include_ports));
  }
  return s;
}

HubbardParams with_disorder(const HubbardParams& p, double sigma, std::uint64_t seed) {
  HubbardParams q = p;
  Rng rng(seed);
  std::normal_distribution<double> nd(0.0, sigma);
  for (auto& m : q.mu) m += nd(rng);
  return q;
}

HubbardParams random_params(const LatticeGraph& g, const RandomModelOptions& opt, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  HubbardParams p = blank_params(g);
  const double s = opt.j_scale;
  for (int v = 0; v < g.n; ++v) {
    const double omega = opt.mu_spread * s * (2 * uni(rng) - 1);
    const double kappa = s * (opt.kappa_min + (opt.kappa_max - opt.kappa_min) * uni(rng));
    p.mu[v] = Complex(omega, -0.5 * kappa);
    p.chi[v] = opt.chi_max * s * uni(rng);
  }
  for (auto& [e, val] : p.j) {
    const double mag = s * (0.5 + uni(rng));
    const double phase = opt.complex_phases ? 2 * M_PI * uni(rng) : 0.0;
    val = std::polar(mag, phase);
  }
  if (opt.port_gamma > 0)
    for (int b : g.boundary) p.port_gamma[b] = opt.port_gamma * s;
  return p;
}

}  // namespace graphtomo
