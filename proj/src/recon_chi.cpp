#include "graphtomo/recon_chi.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "graphtomo/errors.hpp"

namespace graphtomo {

namespace {

double energy_scale(const Eigen::VectorXcd& e) { return std::max(e.cwiseAbs().maxCoeff(), 1e-300); }

std::string vtx(int v) { return "vertex " + std::to_string(v); }

// Reorders eig so that energies line up with `target` (nearest pairs first).
BiorthogonalEig align_to(const BiorthogonalEig& eig, const Eigen::VectorXcd& target) {
  const int n = static_cast<int>(target.size());
  if (eig.energies.size() != n) throw ValidationError("single-excitation spectrum size does not match the model");
  std::vector<std::tuple<double, int, int>> pairs;
  pairs.reserve(n * n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) pairs.emplace_back(std::abs(target[a] - eig.energies[b]), a, b);
  std::sort(pairs.begin(), pairs.end());
  std::vector<int> pick(n, -1);
  std::vector<char> used(n, 0);
  for (auto& [d, a, b] : pairs)
    if (pick[a] < 0 && !used[b]) {
      pick[a] = b;
      used[b] = 1;
    }
  BiorthogonalEig out;
  out.energies.resize(n);
  out.right.resize(n, n);
  out.left.resize(n, n);
  for (int a = 0; a < n; ++a) {
    out.energies[a] = eig.energies[pick[a]];
    out.right.col(a) = eig.right.col(pick[a]);
    out.left.row(a) = eig.left.row(pick[a]);
  }
  return out;
}

// (E2_s - mu_v) I - diag(E1) - chi_v N_v
Eigen::MatrixXcd pivot_operator(const ChiContext& ctx, int v, int slice, double chi_v) {
  const int n1 = static_cast<int>(ctx.e1.size());
  Eigen::MatrixXcd b = -chi_v * ctx.nmat[v];
  for (int a = 0; a < n1; ++a) b(a, a) += ctx.e2[slice] - ctx.mu[v] - ctx.e1[a];
  return b;
}

}  // namespace

CTensors empty_c(int n, int n1, std::vector<int> slice_ids) {
  CTensors c;
  c.n = n;
  c.n1 = n1;
  c.slice_ids = std::move(slice_ids);
  c.blocks.assign(n * n, {});
  return c;
}

Eigen::MatrixXcd number_matrix(const BiorthogonalEig& eig1, int v) {
  return eig1.left.col(v) * eig1.right.row(v);
}

CTensors c_from_m2(const M2Tensor& m2, const BiorthogonalEig& eig1, int n_vertices, const ReconOptions& opt) {
  const int n1 = m2.n1, d = m2.d;
  if (eig1.energies.size() != n1) throw ValidationError("M2 tensor and single-excitation basis differ in size");
  std::vector<int> ids(d);
  std::iota(ids.begin(), ids.end(), 0);
  CTensors c = empty_c(n_vertices, n1, ids);
  double bscale = 0;
  for (int v : m2.sites)
    for (int a = 0; a < n1; ++a)
      bscale = std::max({bscale, std::abs(eig1.right(v, a)), std::abs(eig1.left(a, v))});
  const double guard = opt.div_tol * bscale * bscale;
  for (int v : m2.sites)
    for (int u : m2.sites) {
      const Tensor3& m = m2.at(v, u);
      auto& blk = c.at(v, u);
      blk.assign(d, Eigen::MatrixXcd(n1, n1));
      for (int a1 = 0; a1 < n1; ++a1)
        for (int a3 = 0; a3 < n1; ++a3) {
          const Complex br = eig1.right(v, a1) * eig1.left(a3, u);
          if (std::abs(br) <= guard)
            throw VanishingBracket("eigenvector bracket vanishes at " + vtx(v) + "/" + vtx(u) + ", modes " +
                                   std::to_string(a1) + "," + std::to_string(a3));
          for (int s = 0; s < d; ++s) blk[s](a1, a3) = m(a1, s, a3) / br;
        }
    }
  return c;
}

QR qr_from_c(const CTensors& c, const BiorthogonalEig& eig1) {
  QR out{empty_c(c.n, c.n1, c.slice_ids), empty_c(c.n, c.n1, c.slice_ids)};
  for (int v = 0; v < c.n; ++v)
    for (int u = 0; u < c.n; ++u) {
      if (!c.known(v, u)) continue;
      const Eigen::MatrixXcd nv = number_matrix(eig1, v), nu = number_matrix(eig1, u);
      for (const auto& blk : c.at(v, u)) {
        out.q.at(v, u).push_back(nv * blk);
        out.r.at(v, u).push_back(blk * nu);
      }
    }
  return out;
}

ChiValue chi_at(int v, const CTensors& c, const Eigen::VectorXcd& e1, const Eigen::VectorXcd& e2, Complex mu_v) {
  if (!c.known(v, v)) throw ReconstructionError("C block at " + vtx(v) + " not known");
  Complex acc = 0;
  const auto& blk = c.at(v, v);
  for (size_t k = 0; k < c.slice_ids.size(); ++k) {
    const Complex e = e2[c.slice_ids[k]] - mu_v;
    for (int a = 0; a < c.n1; ++a) acc += (e - e1[a]) * blk[k](a, a);
  }
  acc *= 0.5;
  return {acc.real(), acc.imag(), acc};
}

Complex ChiContext::coupling(int v, int u) const {
  auto it = j.find({std::min(v, u), std::max(v, u)});
  if (it == j.end()) throw ValidationError("no coupling between " + vtx(v) + " and " + vtx(u));
  return v < u ? it->second : std::conj(it->second);
}

ChiContext make_chi_context(const Eigen::VectorXcd& e1, const Eigen::VectorXcd& e2, const HubbardParams& single,
                            const ReconOptions& opt) {
  ChiContext ctx;
  ctx.graph = single.graph;
  ctx.e1 = e1;
  ctx.e2 = e2;
  ctx.mu = single.mu;
  ctx.j = single.j;
  ctx.opt = opt;
  HubbardParams bare = single;
  bare.port_gamma.clear();
  ctx.eig1 = align_to(eig_biorthogonal(build_h1(bare, false), 0.0), e1);
  for (int v = 0; v < single.graph.n; ++v) ctx.nmat.push_back(number_matrix(ctx.eig1, v));
  return ctx;
}

void infect_step_two(CTensors& c, std::vector<char>& infected, std::vector<int>& members, const ChiContext& ctx,
                     int v, int u, double chi_v) {
  const LatticeGraph& g = ctx.graph;
  const int ns = static_cast<int>(c.slice_ids.size());
  const Complex j_vu = ctx.coupling(v, u), j_uv = std::conj(j_vu);
  if (std::abs(j_vu) <= ctx.opt.div_tol * energy_scale(ctx.e1))
    throw VanishingCoupling("coupling " + vtx(v) + "-" + vtx(u) + " vanishes");
  std::vector<int> others;
  for (int w : g.adj[v])
    if (w != u) {
      if (!infected[w]) throw ReconstructionError(vtx(v) + " has a second uninfected neighbour " + vtx(w));
      others.push_back(w);
    }
  std::vector<Eigen::MatrixXcd> piv(ns);
  for (int k = 0; k < ns; ++k) piv[k] = pivot_operator(ctx, v, c.slice_ids[k], chi_v);

  // column blocks C(w, u), acting on the right
  for (int w : members) {
    std::vector<Eigen::MatrixXcd> out(ns);
    const auto& cwv = c.at(w, v);
    for (int k = 0; k < ns; ++k) {
      Eigen::MatrixXcd acc = cwv[k] * piv[k];
      for (int x : others) acc -= ctx.coupling(x, v) * c.at(w, x)[k];
      out[k] = acc / j_uv;
    }
    c.at(w, u) = std::move(out);
  }
  // row blocks C(u, w) including w = u
  std::vector<int> targets = members;
  targets.push_back(u);
  for (int w : targets) {
    std::vector<Eigen::MatrixXcd> out(ns);
    const auto& cvw = c.at(v, w);
    for (int k = 0; k < ns; ++k) {
      Eigen::MatrixXcd acc = piv[k] * cvw[k];
      for (int x : others) acc -= ctx.coupling(v, x) * c.at(x, w)[k];
      out[k] = acc / j_vu;
    }
    c.at(u, w) = std::move(out);
  }
  infected[u] = 1;
  members.push_back(u);
}

ChiRun run_chi_recursion(const ChiContext& ctx, CTensors c, const InfectionOrder& order,
                         const std::vector<double>* frozen) {
  const LatticeGraph& g = ctx.graph;
  ChiRun run;
  run.chi.assign(g.n, 0.0);
  run.imag.assign(g.n, 0.0);
  run.raw.assign(g.n, 0.0);
  std::vector<char> infected(g.n, 0);
  std::vector<int> members;
  const double scale = energy_scale(ctx.e1);
  auto evaluate = [&](int w, int step) {
    const ChiValue cv = chi_at(w, c, ctx.e1, ctx.e2, ctx.mu[w]);
    run.raw[w] = cv.raw;
    run.imag[w] = cv.imag;
    run.chi[w] = frozen ? (*frozen)[w] : cv.value;
    run.order.push_back(w);
    if (!frozen && ctx.opt.strict && std::abs(cv.imag) > 1e-6 * std::max(scale, std::abs(cv.value))) {
      ImaginaryResidue err("nonlinearity at " + vtx(w) + " has imaginary part " + std::to_string(cv.imag));
      err.set_step(step);
      throw err;
    }
  };
  for (int b : g.boundary) {
    infected[b] = 1;
    members.push_back(b);
  }
  for (int b : g.boundary) evaluate(b, -1);
  for (size_t k = 0; k < order.steps.size(); ++k) {
    const auto [v, u] = order.steps[k];
    try {
      infect_step_two(c, infected, members, ctx, v, u, run.chi[v]);
    } catch (ReconstructionError& e) {
      e.set_step(static_cast<int>(k));
      throw;
    }
    evaluate(u, static_cast<int>(k));
  }
  run.c = std::move(c);
  return run;
}

ChiRecon reconstruct_chi(const Eigen::VectorXcd& e1, const Eigen::VectorXcd& e2, const M2Tensor& m2,
                         const HubbardParams& single, const ReconOptions& opt) {
  ChiRecon out;
  out.order = infection_order(single.graph);
  if (!out.order.complete) throw NotTomographable("graph is not infectable from its boundary");
  if (m2.d != e2.size() || m2.n1 != e1.size()) throw ValidationError("M2 tensor shape does not match the spectra");
  const ChiContext ctx = make_chi_context(e1, e2, single, opt);
  ChiRun run = run_chi_recursion(ctx, c_from_m2(m2, ctx.eig1, single.graph.n, opt), out.order);
  out.chi = std::move(run.chi);
  out.imag = std::move(run.imag);
  return out;
}

double chi_by_toggle(const Eigen::VectorXcd& e2_on, const Eigen::VectorXcd& e2_off) {
  if (e2_on.size() != e2_off.size()) throw ValidationError("toggle spectra differ in length");
  return (e2_on.sum() - e2_off.sum()).real();
}

Eigen::VectorXcd e2_with_site_off(const HubbardParams& p, int v, bool include_ports) {
  HubbardParams q = p;
  q.chi.at(v) = 0.0;
  return sorted_eigenvalues(build_h2(q, make_pair_basis(q.graph.n), include_ports));
}

}  // namespace graphtomo
