#include "graphtomo/stability.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <random>
#include <thread>

#include "graphtomo/errors.hpp"
#include "graphtomo/random.hpp"

namespace graphtomo {

namespace {

std::string edge_name(Edge e) { return "J(" + std::to_string(e.first) + "," + std::to_string(e.second) + ")"; }

double max_entry(const M1Tensor& m) {
  double s = 0;
  for (const auto& b : m.blocks) s = std::max(s, b.cwiseAbs().maxCoeff());
  return s;
}

std::vector<double> abs_couplings(const HubbardParams& p) {
  std::vector<double> out;
  for (const auto& [e, val] : p.j) out.push_back(std::abs(val));
  return out;
}

// Visits every real coordinate of an M1 tensor: (block, mode, imaginary?).
template <class F>
void for_each_coordinate(const M1Tensor& m, F&& f) {
  for (size_t b = 0; b < m.blocks.size(); ++b)
    for (int a = 0; a < m.blocks[b].size(); ++a)
      for (int part = 0; part < 2; ++part) f(static_cast<int>(b), a, part);
}

// Central difference of `eval` along one M1 coordinate. A failed evaluation
// shrinks the step by ten; after a failure the value is only accepted once two
// consecutive steps agree.
template <class Eval>
std::vector<double> m1_derivative(const M1Tensor& base, int block, int mode, int part, double h, const Eval& eval) {
  constexpr int kMaxShrinks = 6;
  bool failed = false;
  std::vector<double> prev;
  for (int attempt = 0; attempt <= kMaxShrinks; ++attempt, h /= 10) {
    std::vector<double> out;
    try {
      const Complex d = part == 0 ? Complex(h, 0) : Complex(0, h);
      M1Tensor plus = base, minus = base;
      plus.blocks[block][mode] += d;
      minus.blocks[block][mode] -= d;
      const std::vector<double> fp = eval(plus), fm = eval(minus);
      out.resize(fp.size());
      for (size_t i = 0; i < fp.size(); ++i) out[i] = (fp[i] - fm[i]) / (2 * h);
    } catch (const ReconstructionError&) {
      failed = true;
      prev.clear();
      continue;
    }
    if (!failed) return out;
    if (!prev.empty()) {
      double diff = 0, size = 0;
      for (size_t i = 0; i < out.size(); ++i) {
        diff = std::max(diff, std::abs(out[i] - prev[i]));
        size = std::max(size, std::abs(out[i]));
      }
      if (diff <= 2e-3 * size) return out;
    }
    prev = std::move(out);
  }
  throw ReconstructionError("finite-difference step could not be made small enough");
}

Eigen::MatrixXcd pivot(const ChiContext& ctx, int v, int slice, double chi_v) {
  const int n1 = static_cast<int>(ctx.e1.size());
  Eigen::MatrixXcd b = -chi_v * ctx.nmat[v];
  for (int a = 0; a < n1; ++a) b(a, a) += ctx.e2[slice] - ctx.mu[v] - ctx.e1[a];
  return b;
}

struct ChiSetup {
  SpectralData data;
  SingleRecon single;
  ChiContext ctx;
  CTensors boundary_c;
  InfectionOrder order;
  ChiRun base;
};

ChiSetup chi_setup(const HubbardParams& p, const ReconOptions& opt) {
  ChiSetup s;
  s.data = synthesize(p, false, true);
  s.single = reconstruct_single(s.data.e1, s.data.m1, p.graph, opt);
  s.ctx = make_chi_context(s.data.e1, s.data.e2, s.single.params, opt);
  s.boundary_c = c_from_m2(s.data.m2, s.ctx.eig1, p.graph.n, opt);
  s.order = s.single.order;
  s.base = run_chi_recursion(s.ctx, s.boundary_c, s.order);
  return s;
}

}  // namespace

// ---- coupling metric

std::map<Edge, double> jacobian_metrics_J(const HubbardParams& p, const JacobianOptions& opt) {
  validate(p);
  const BiorthogonalEig eig = eig_biorthogonal(build_h1(p, false));
  const M1Tensor m1 = m1_from_eig(eig, p.graph.boundary);
  auto eval = [&](const M1Tensor& m) {
    return abs_couplings(reconstruct_single(eig.energies, m, p.graph, opt.recon).params);
  };
  eval(m1);  // exact data must reconstruct
  const double h = opt.rel_step * max_entry(m1);
  std::vector<double> acc(p.j.size(), 0.0);
  for_each_coordinate(m1, [&](int b, int a, int part) {
    const auto d = m1_derivative(m1, b, a, part, h, eval);
    for (size_t i = 0; i < acc.size(); ++i) acc[i] += d[i] * d[i];
  });
  std::map<Edge, double> out;
  size_t i = 0;
  for (const auto& [e, val] : p.j) out[e] = std::sqrt(acc[i++]);
  return out;
}

ErrorMetricReport jacobian_metric_J(const HubbardParams& p, Edge target, const JacobianOptions& opt) {
  if (target.first > target.second) std::swap(target.first, target.second);
  if (!p.j.count(target)) throw ValidationError("no edge " + edge_name(target));
  ErrorMetricReport r;
  r.target = edge_name(target);
  r.value = jacobian_metrics_J(p, opt).at(target);
  r.n = p.graph.n;
  r.method = "jacobian";
  return r;
}

// ---- nonlinearity metric

std::vector<double> jacobian_metrics_chi(const HubbardParams& p, const JacobianOptions& opt) {
  validate(p);
  const ChiSetup s = chi_setup(p, opt.recon);
  const ChiContext& ctx = s.ctx;
  const LatticeGraph& g = p.graph;
  const int n = g.n, n1 = n, d = static_cast<int>(ctx.e2.size());
  const std::vector<int>& bnd = g.boundary;
  const int nb = static_cast<int>(bnd.size());

  // feedback of each pivot value on later estimates (the recursion is affine in each chi)
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n, n);
  double chi_scale = 1e-3 * std::max(1.0, ctx.e1.cwiseAbs().maxCoeff());
  for (int v = 0; v < n; ++v) {
    std::vector<double> up = s.base.chi, dn = s.base.chi;
    up[v] += chi_scale;
    dn[v] -= chi_scale;
    const ChiRun rp = run_chi_recursion(ctx, s.boundary_c, s.order, &up);
    const ChiRun rm = run_chi_recursion(ctx, s.boundary_c, s.order, &dn);
    for (int w = 0; w < n; ++w) k(w, v) = (rp.raw[w].real() - rm.raw[w].real()) / (2 * chi_scale);
  }
  const Eigen::MatrixXd total = (Eigen::MatrixXd::Identity(n, n) - k).inverse();

  std::vector<double> acc(n, 0.0);
  const auto& steps = s.order.steps;
  for (int sl = 0; sl < d; ++sl) {
    // row and column propagators from each boundary vertex, C(x,y) = sum P(x<-b) C(b,b') Q(b'->y)
    std::vector<std::vector<Eigen::MatrixXcd>> prow(n, std::vector<Eigen::MatrixXcd>(nb)), qcol = prow;
    for (int x = 0; x < n; ++x)
      for (int i = 0; i < nb; ++i) {
        const bool same = x == bnd[i];
        prow[x][i] = Eigen::MatrixXcd::Zero(n1, n1);
        if (same) prow[x][i].setIdentity();
        qcol[x][i] = prow[x][i];
      }
    for (const auto& [v, u] : steps) {
      const Eigen::MatrixXcd bv = pivot(ctx, v, sl, s.base.chi[v]);
      const Complex j_vu = ctx.coupling(v, u), j_uv = std::conj(j_vu);
      for (int i = 0; i < nb; ++i) {
        Eigen::MatrixXcd pr = bv * prow[v][i], qc = qcol[v][i] * bv;
        for (int x : g.adj[v]) {
          if (x == u) continue;
          pr -= ctx.coupling(v, x) * prow[x][i];
          qc -= ctx.coupling(x, v) * qcol[x][i];
        }
        prow[u][i] = pr / j_vu;
        qcol[u][i] = qc / j_uv;
      }
    }
    std::vector<Eigen::MatrixXcd> dw(n);
    for (int w = 0; w < n; ++w) {
      dw[w] = Eigen::MatrixXcd::Zero(n1, n1);
      for (int a = 0; a < n1; ++a) dw[w](a, a) = ctx.e2[sl] - ctx.mu[w] - ctx.e1[a];
    }
    for (int i = 0; i < nb; ++i)
      for (int j = 0; j < nb; ++j) {
        std::vector<Eigen::MatrixXcd> grad(n);
        for (int w = 0; w < n; ++w) grad[w] = 0.5 * qcol[w][j] * dw[w] * prow[w][i];
        for (int t = 0; t < n; ++t) {
          Eigen::MatrixXcd gt = Eigen::MatrixXcd::Zero(n1, n1);
          for (int w = 0; w < n; ++w)
            if (total(t, w) != 0.0) gt += total(t, w) * grad[w];
          acc[t] += gt.squaredNorm();
        }
      }
  }

  if (opt.include_coupling_errors) {
    const M1Tensor& m1 = s.data.m1;
    auto eval = [&](const M1Tensor& m) {
      const SingleRecon single = reconstruct_single(s.data.e1, m, g, opt.recon);
      const ChiContext c2 = make_chi_context(s.data.e1, s.data.e2, single.params, opt.recon);
      return run_chi_recursion(c2, s.boundary_c, s.order).chi;
    };
    const double h = opt.rel_step * max_entry(m1);
    for_each_coordinate(m1, [&](int b, int a, int part) {
      const auto dv = m1_derivative(m1, b, a, part, h, eval);
      for (int t = 0; t < n; ++t) acc[t] += dv[t] * dv[t];
    });
  }
  for (double& x : acc) x = std::sqrt(x);
  return acc;
}

ErrorMetricReport jacobian_metric_chi(const HubbardParams& p, int vertex, const JacobianOptions& opt) {
  if (vertex < 0 || vertex >= p.graph.n) throw ValidationError("vertex out of range");
  ErrorMetricReport r;
  r.target = "chi(" + std::to_string(vertex) + ")";
  r.value = jacobian_metrics_chi(p, opt)[vertex];
  r.n = p.graph.n;
  r.method = "jacobian";
  return r;
}

// ---- Monte Carlo

double MonteCarloResult::half_width(double rms) const {
  const int ok = trials - failures;
  return ok > 0 ? 1.96 * rms / std::sqrt(2.0 * ok) : INFINITY;
}

void parallel_for(int count, int jobs, const std::function<void(int)>& f) {
  jobs = std::max(1, std::min(jobs, count));
  if (jobs == 1) {
    for (int i = 0; i < count; ++i) f(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex lock;
  std::vector<std::thread> pool;
  for (int t = 0; t < jobs; ++t)
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard<std::mutex> g(lock);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

MonteCarloResult monte_carlo_noise(const HubbardParams& p, double sigma, int trials, std::uint64_t seed,
                                   NoiseStage stage, bool include_coupling_errors, int jobs) {
  validate(p);
  if (!(sigma >= 0)) throw ValidationError("noise width must be non-negative");
  if (trials <= 0) throw ValidationError("trial count must be positive");
  const ReconOptions opt{false, 1e-8, 1e-14};
  const LatticeGraph& g = p.graph;
  MonteCarloResult out;
  out.trials = trials;
  out.sigma = sigma;
  out.seed = seed;

  struct Trial {
    bool ok = false;
    std::vector<double> a, b;
  };
  std::vector<Trial> results(trials);

  auto noisy_m1 = [&](M1Tensor m, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto& blk : m.blocks)
      for (int a = 0; a < blk.size(); ++a) blk[a] += sigma * Complex(normal(rng), normal(rng));
    return m;
  };

  if (stage == NoiseStage::single) {
    const BiorthogonalEig eig = eig_biorthogonal(build_h1(p, false));
    const M1Tensor m1 = m1_from_eig(eig, g.boundary);
    const std::vector<double> truth_j = abs_couplings(p);
    parallel_for(trials, jobs, [&](int t) {
      Rng rng(derive_seed(seed, t));
      try {
        const SingleRecon r = reconstruct_single(eig.energies, noisy_m1(m1, rng), g, opt);
        const std::vector<double> j = abs_couplings(r.params);
        Trial tr;
        for (size_t i = 0; i < j.size(); ++i) tr.a.push_back(j[i] - truth_j[i]);
        for (int v = 0; v < g.n; ++v) tr.b.push_back(std::abs(r.params.mu[v] - p.mu[v]));
        tr.ok = std::all_of(tr.a.begin(), tr.a.end(), [](double x) { return std::isfinite(x); });
        results[t] = std::move(tr);
      } catch (const Error&) {
      }
    });
  } else {
    const ChiSetup s = chi_setup(p, opt);
    parallel_for(trials, jobs, [&](int t) {
      Rng rng(derive_seed(seed, t));
      std::normal_distribution<double> normal(0.0, 1.0);
      try {
        CTensors c = s.boundary_c;
        for (auto& blocks : c.blocks)
          for (auto& m : blocks)
            for (int i = 0; i < m.rows(); ++i)
              for (int k = 0; k < m.cols(); ++k) m(i, k) += sigma * Complex(normal(rng), normal(rng));
        ChiContext ctx = s.ctx;
        if (include_coupling_errors) {
          const SingleRecon r = reconstruct_single(s.data.e1, noisy_m1(s.data.m1, rng), g, opt);
          ctx = make_chi_context(s.data.e1, s.data.e2, r.params, opt);
        }
        const ChiRun run = run_chi_recursion(ctx, c, s.order);
        Trial tr;
        for (int v = 0; v < g.n; ++v) tr.a.push_back(run.chi[v] - p.chi[v]);
        tr.ok = std::all_of(tr.a.begin(), tr.a.end(), [](double x) { return std::isfinite(x); });
        results[t] = std::move(tr);
      } catch (const Error&) {
      }
    });
  }

  std::vector<double> sa, sb;
  for (const auto& tr : results) {
    if (!tr.ok) {
      ++out.failures;
      continue;
    }
    if (sa.empty()) {
      sa.assign(tr.a.size(), 0.0);
      sb.assign(tr.b.size(), 0.0);
    }
    for (size_t i = 0; i < tr.a.size(); ++i) sa[i] += tr.a[i] * tr.a[i];
    for (size_t i = 0; i < tr.b.size(); ++i) sb[i] += tr.b[i] * tr.b[i];
  }
  if (out.failures > trials / 10)
    throw ExcessiveFailures(std::to_string(out.failures) + " of " + std::to_string(trials) + " trials failed");
  const double ok = trials - out.failures;
  for (double& x : sa) x = std::sqrt(x / ok);
  for (double& x : sb) x = std::sqrt(x / ok);
  if (stage == NoiseStage::single) {
    size_t i = 0;
    for (const auto& [e, val] : p.j) out.rms_j[e] = sa[i++];
    out.rms_mu = sb;
  } else {
    out.rms_chi = sa;
  }
  return out;
}

// ---- SSH families and sweeps

SshFamily parse_ssh_family(const std::string& s) {
  if (s == "ssh") return SshFamily::ssh;
  if (s == "ssh_2d") return SshFamily::ssh_2d;
  if (s == "ssh_defect") return SshFamily::ssh_defect;
  throw ValidationError("unknown SSH family '" + s + "'");
}

std::string to_string(SshFamily f) {
  switch (f) {
    case SshFamily::ssh: return "ssh";
    case SshFamily::ssh_2d: return "ssh_2d";
    case SshFamily::ssh_defect: return "ssh_defect";
  }
  return "?";
}

HubbardParams ssh_families(SshFamily family, int size, const SshOptions& opt, std::uint64_t seed) {
  const double j1 = opt.ratio * opt.j2, j2 = opt.j2;
  HubbardParams p;
  if (family == SshFamily::ssh_2d) {
    if (size < 2) throw ValidationError("2D SSH needs a side of at least 2");
    p = blank_params(make_lattice(LatticeKind::ssh_2d, {size, size}, opt.boundary));
    for (auto& [e, val] : p.j) {
      const bool horizontal = e.second - e.first == 1;
      const int coord = horizontal ? e.first % size : e.first / size;
      val = coord % 2 == 0 ? j1 : j2;
    }
  } else {
    if (size < 2 || size % 2 != 0) throw ValidationError("SSH chains need an even number of sites");
    p = blank_params(make_lattice(LatticeKind::ssh_chain, {size}, opt.boundary));
    for (auto& [e, val] : p.j) val = e.first % 2 == 0 ? j1 : j2;
  }
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int v = 0; v < p.graph.n; ++v) {
    const double shift = opt.disorder > 0 ? opt.disorder * normal(rng) : 0.0;
    p.mu[v] = Complex(opt.mu0 + shift, -0.5 * opt.kappa);
    p.chi[v] = opt.chi;
  }
  if (family == SshFamily::ssh_defect) p.mu[size / 2] += 2 * j1;
  return p;
}

LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ValidationError("line fit needs two or more points");
  const int n = static_cast<int>(x.size());
  double mx = 0, my = 0;
  for (int i = 0; i < n; ++i) {
    mx += x[i] / n;
    my += y[i] / n;
  }
  double sxx = 0, sxy = 0, syy = 0;
  for (int i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LinearFit f;
  f.slope = sxx > 0 ? sxy / sxx : 0.0;
  f.intercept = my - f.slope * mx;
  double ssr = 0;
  for (int i = 0; i < n; ++i) {
    const double r = y[i] - f.intercept - f.slope * x[i];
    ssr += r * r;
  }
  f.r2 = syy > 0 ? 1.0 - ssr / syy : 1.0;
  return f;
}

TargetSelector parse_target(const std::string& s) {
  if (s == "first_edge" || s == "first") return TargetSelector::first_edge;
  if (s == "last_edge" || s == "last") return TargetSelector::last_edge;
  if (s == "last_vertex") return TargetSelector::last_vertex;
  throw ValidationError("unknown target '" + s + "'");
}

namespace {

double sweep_point(const HubbardParams& p, const SweepOptions& opt) {
  const InfectionOrder order = infection_order(p.graph);
  if (!order.complete || order.steps.empty()) throw NotTomographable("sweep model is not infectable");
  if (opt.metric == MetricKind::coupling) {
    const auto m = jacobian_metrics_J(p, opt.jacobian);
    Edge e = opt.target == TargetSelector::first_edge ? order.steps.front() : order.steps.back();
    if (e.first > e.second) std::swap(e.first, e.second);
    return m.at(e);
  }
  const auto m = jacobian_metrics_chi(p, opt.jacobian);
  const int v = opt.target == TargetSelector::first_edge ? order.steps.front().second : order.steps.back().second;
  return m[v];
}

void fit_rows(SweepResult& r) {
  std::vector<double> ln, n, lm;
  for (const auto& row : r.rows) {
    if (!std::isfinite(row.metric)) continue;
    ln.push_back(std::log(double(row.n)));
    n.push_back(row.n);
    lm.push_back(std::log(row.metric));
  }
  if (n.size() >= 2) {
    r.loglog = fit_line(ln, lm);
    r.linlog = fit_line(n, lm);
  }
}

}  // namespace

SweepResult scaling_sweep(SshFamily family, const std::vector<int>& sizes, const SweepOptions& opt) {
  if (opt.draws <= 0) throw ValidationError("need at least one disorder draw");
  SweepResult out;
  const int count = static_cast<int>(sizes.size()) * opt.draws;
  std::vector<double> values(count, NAN);
  parallel_for(count, opt.jobs, [&](int i) {
    const HubbardParams p = ssh_families(family, sizes[i / opt.draws], opt.model, derive_seed(opt.seed, i));
    try {
      values[i] = sweep_point(p, opt);
    } catch (const ReconstructionError&) {
    }
  });
  for (size_t si = 0; si < sizes.size(); ++si) {
    SweepRow row;
    row.size = sizes[si];
    row.n = family == SshFamily::ssh_2d ? sizes[si] * sizes[si] : sizes[si];
    std::vector<double> ok;
    for (int k = 0; k < opt.draws; ++k) {
      const double v = values[si * opt.draws + k];
      if (std::isfinite(v)) ok.push_back(v);
    }
    row.failures = opt.draws - static_cast<int>(ok.size());
    double mean = 0, sq = 0;
    for (double v : ok) mean += v / ok.size();
    for (double v : ok) sq += (v - mean) * (v - mean);
    row.metric = ok.empty() ? NAN : mean;
    row.spread = ok.size() > 1 ? std::sqrt(sq / (ok.size() - 1)) : 0.0;
    out.rows.push_back(row);
  }
  fit_rows(out);
  return out;
}

SweepResult refit(const SweepResult& r, int n_min) {
  SweepResult out;
  for (const auto& row : r.rows)
    if (row.n >= n_min) out.rows.push_back(row);
  fit_rows(out);
  return out;
}

}  // namespace graphtomo
