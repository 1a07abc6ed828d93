#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <sstream>

#include "graphtomo/errors.hpp"
#include "graphtomo/qmetro.hpp"
#include "graphtomo/random.hpp"
#include "graphtomo/recon_chi.hpp"
#include "graphtomo/recon_single.hpp"
#include "graphtomo/spectra.hpp"
#include "graphtomo/stability.hpp"

namespace graphtomo::cli {

namespace fs = std::filesystem;

std::uint64_t Common::resolved_seed() const {
  if (seed) return *seed;
  if (const char* env = std::getenv("GRAPHTOMO_SEED"); env && *env) {
    try {
      size_t used = 0;
      const unsigned long long v = std::stoull(env, &used);
      if (used == std::string(env).size()) return v;
    } catch (const std::exception&) {
    }
    throw ValidationError(std::string("GRAPHTOMO_SEED is not an unsigned integer: '") + env + "'");
  }
  return 1;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ValidationError*>(&e)) return 2;
  if (dynamic_cast<const DimensionCapExceeded*>(&e)) return 4;
  if (dynamic_cast<const Error*>(&e)) return 3;
  if (dynamic_cast<const nlohmann::json::exception*>(&e)) return 2;
  if (dynamic_cast<const fs::filesystem_error*>(&e)) return 2;
  return 1;
}

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string file_hash(const std::string& path) { return hex64(fnv1a(slurp(path))); }

Json load(const std::string& path) {
  try {
    return read_json(path);
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

HubbardParams load_model(const std::string& path) {
  const Json j = load(path);
  try {
    return model_from_json(j);
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

// Collects artifacts and refuses to touch any existing file without --force.
class Output {
 public:
  Output(const Common& c, std::string command, Json config)
      : dir_(c.out_dir), force_(c.force), command_(std::move(command)), config_(std::move(config)),
        seed_(c.resolved_seed()), hash_(config_hash(config_)) {}

  const std::string& hash() const { return hash_; }
  std::uint64_t seed() const { return seed_; }

  void add(const std::string& name, std::string text) { files_.emplace_back(name, std::move(text)); }
  void add(const std::string& name, Json j) {
    j["config_hash"] = hash_;
    j["seed"] = seed_;
    add(name, j.dump(2) + "\n");
  }

  void commit() {
    std::vector<std::string> names;
    for (const auto& f : files_) names.push_back(f.first);
    files_.emplace_back("manifest.json", manifest(command_, config_, seed_, names).dump(2) + "\n");
    fs::create_directories(dir_);
    if (!force_)
      for (const auto& f : files_)
        if (fs::exists(dir_ / f.first))
          throw ValidationError("refusing to overwrite '" + (dir_ / f.first).string() + "' (use --force)");
    for (const auto& f : files_) write_text(dir_ / f.first, f.second, true);
  }

 private:
  fs::path dir_;
  bool force_;
  std::string command_;
  Json config_;
  std::uint64_t seed_;
  std::string hash_;
  std::vector<std::pair<std::string, std::string>> files_;
};

PortPair default_ports(const HubbardParams& p, int in, int out, double gamma) {
  const auto& b = p.graph.boundary;
  if (b.empty()) throw ValidationError("model has no boundary vertices");
  PortPair pp;
  pp.in = in < 0 ? b.front() : in;
  pp.out = out < 0 ? b.back() : out;
  auto rate = [&](int v) {
    const auto it = p.port_gamma.find(v);
    return it != p.port_gamma.end() ? it->second : gamma;
  };
  pp.gamma_in = rate(pp.in);
  pp.gamma_out = rate(pp.out);
  validate_ports(p.graph, pp);
  return pp;
}

std::pair<double, double> default_window(const Eigen::VectorXcd& e) {
  double lo = e.real().minCoeff(), hi = e.real().maxCoeff(), width = 0;
  for (Eigen::Index a = 0; a < e.size(); ++a) width = std::max(width, -2 * e[a].imag());
  const double pad = 0.1 * (hi - lo) + 5 * width + 1e-3 * std::max(1.0, std::abs(hi));
  return {lo - pad, hi + pad};
}

std::string transmission_csv(const HubbardParams& p, const PortPair& ports, double wmin, double wmax, int points,
                             const Output& out) {
  const PortSpectrum s = port_spectrum(p, ports, false);
  if (wmin == wmax) std::tie(wmin, wmax) = default_window(s.e1);
  if (!(wmax > wmin)) throw ValidationError("frequency window is empty (wmax <= wmin)");
  CsvTable t;
  t.header = {"omega", "tau_re", "tau_im", "transmission"};
  for (int k = 0; k < points; ++k) {
    const double w = points == 1 ? wmin : wmin + (wmax - wmin) * k / (points - 1);
    const Complex tau = tau_omega(s, w);
    t.add({fmt(w), fmt(tau.real()), fmt(tau.imag()), fmt(transmission(tau, ports.phase))});
  }
  return t.render(out.hash(), out.seed());
}

// Port losses become part of mu, as seen by data synthesized with --ports.
HubbardParams fold_ports(HubbardParams p) {
  for (const auto& [v, g] : p.port_gamma) p.mu[v] -= Complex(0, 0.5 * g);
  p.port_gamma.clear();
  return p;
}

double max_abs_diff(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b) {
  if (a.size() != b.size()) return INFINITY;
  return a.size() ? (a - b).cwiseAbs().maxCoeff() : 0.0;
}

std::vector<int> photon_range(const std::string& s) {
  const auto colon = s.find(':');
  int a = 0, b = 0;
  try {
    if (colon == std::string::npos) throw std::invalid_argument(s);
    a = std::stoi(s.substr(0, colon));
    b = std::stoi(s.substr(colon + 1));
  } catch (const std::exception&) {
    throw ValidationError("--sweep-p expects a:b, got '" + s + "'");
  }
  if (a < 1 || b < a) throw ValidationError("--sweep-p needs 1 <= a <= b");
  std::vector<int> ps;
  for (long long p = a; p <= b; p *= 2) ps.push_back(static_cast<int>(p));
  if (ps.size() < 2) throw ValidationError("--sweep-p range holds fewer than two powers of two");
  return ps;
}

double auto_or(const std::string& s, double fallback, const std::string& what) {
  if (s == "auto") return fallback;
  try {
    size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ValidationError(what + " expects a number or auto, got '" + s + "'");
}

}  // namespace

std::string cmd_synthesize(const SynthesizeArgs& a, const Common& c) {
  const HubbardParams p = load_model(a.model);
  Json cfg;
  cfg["subcommand"] = "synthesize";
  cfg["model"] = file_hash(a.model);
  cfg["ports"] = a.ports;
  cfg["m2"] = !a.no_m2;
  cfg["spectra"] = a.spectra;
  if (a.spectra) cfg["in_site"] = a.in_site, cfg["out_site"] = a.out_site, cfg["points"] = a.points;
  Output out(c, "synthesize", cfg);

  const SpectralData d = synthesize(p, a.ports, !a.no_m2);
  Json j = spectral_to_json(d, p.graph);
  j["ports"] = a.ports;
  out.add("spectral.json", j);
  if (a.spectra)
    out.add("transmission.csv", transmission_csv(p, default_ports(p, a.in_site, a.out_site, 1.0), 0, 0, a.points, out));
  out.commit();

  std::ostringstream s;
  s << "e1: " << d.e1.size() << " eigenvalues, e2: " << d.e2.size() << " eigenvalues, boundary "
    << d.m1.sites.size() << " sites -> " << c.out_dir;
  return s.str();
}

std::string cmd_reconstruct(const ReconstructArgs& a, const Common& c) {
  const Json data = load(a.data);
  SpectralData d;
  try {
    d = spectral_from_json(data);
  } catch (const ValidationError& e) {
    throw ValidationError(a.data + ": " + e.what());
  }
  LatticeGraph g;
  if (!a.graph.empty()) {
    const Json gj = load(a.graph);
    g = gj.contains("graph") ? graph_from_json(gj.at("graph")) : graph_from_json(gj);
  } else {
    if (!data.contains("graph")) throw ValidationError(a.data + ": missing field 'graph' (or pass --graph)");
    g = graph_from_json(data.at("graph"));
  }
  const bool ported = data.value("ports", false);

  Json cfg;
  cfg["subcommand"] = "reconstruct";
  cfg["data"] = file_hash(a.data);
  if (!a.graph.empty()) cfg["graph"] = file_hash(a.graph);
  if (!a.truth.empty()) cfg["truth"] = file_hash(a.truth);
  cfg["noise"] = a.noise;
  cfg["chi"] = !a.no_chi;
  cfg["loose"] = a.loose;
  Output out(c, "reconstruct", cfg);

  const SpectralData exact = d;
  if (a.noise > 0) {
    Rng rng(derive_seed(out.seed(), 0));
    std::normal_distribution<double> n(0.0, a.noise);
    for (auto& b : d.m1.blocks)
      for (Eigen::Index i = 0; i < b.size(); ++i) b[i] += Complex(n(rng), n(rng));
    for (auto& b : d.m2.blocks)
      for (auto& z : b.data) z += Complex(n(rng), n(rng));
  }

  ReconOptions opt;
  opt.strict = !(a.loose || a.noise > 0);
  const SingleRecon single = reconstruct_single(d.e1, d.m1, g, opt);
  HubbardParams rec = single.params;

  Json report;
  Json trace = Json::array();
  for (const auto& [v, u] : single.order.steps) trace.push_back({v, u});
  report["infection"] = trace;

  Json stage1;
  {
    const SpectralData back = synthesize(rec, false, false);
    double r = 0;
    for (int v : d.m1.sites)
      for (int u : d.m1.sites) r = std::max(r, max_abs_diff(back.m1.at(v, u), exact.m1.at(v, u)));
    stage1["e1_residual"] = max_abs_diff(back.e1, exact.e1);
    stage1["m1_residual"] = r;
  }
  report["single"] = stage1;

  const bool run_chi = !a.no_chi && d.has_m2;
  if (run_chi) {
    const ChiRecon chi = reconstruct_chi(d.e1, d.e2, d.m2, rec, opt);
    rec.chi = chi.chi;
    Json stage2;
    stage2["e2_residual"] = max_abs_diff(synthesize(rec, false, false).e2, exact.e2);
    stage2["imag"] = chi.imag;
    report["chi"] = stage2;
  }

  double truth_residual = -1;
  if (!a.truth.empty()) {
    HubbardParams truth = load_model(a.truth);
    if (ported) truth = fold_ports(truth);
    if (!run_chi) std::fill(truth.chi.begin(), truth.chi.end(), 0.0);
    const GaugeReport gr = gauge_compare(truth, rec);
    report["gauge"] = gauge_report_to_json(gr);
    truth_residual = gr.max_residual();
  }

  Json model = model_to_json(rec);
  out.add("recovered.json", model);
  out.add("report.json", report);
  out.commit();

  std::ostringstream s;
  s << "recovered " << g.n << " sites, " << single.order.steps.size() << " infection steps";
  s << ", m1 residual " << stage1["m1_residual"].get<double>();
  if (run_chi) s << ", e2 residual " << report["chi"]["e2_residual"].get<double>();
  if (truth_residual >= 0) s << ", max residual vs truth " << truth_residual;
  return s.str();
}

std::string cmd_stability(const StabilityArgs& a, const Common& c) {
  if (a.nmin < 1 || a.nmax < a.nmin) throw ValidationError("need 1 <= --nmin <= --nmax");
  SweepOptions o;
  const SshFamily fam = parse_ssh_family(a.family);
  o.model.ratio = a.ratio;
  o.model.disorder = a.disorder;
  if (a.metric == "coupling")
    o.metric = MetricKind::coupling;
  else if (a.metric == "nonlinearity")
    o.metric = MetricKind::nonlinearity;
  else
    throw ValidationError("--metric must be coupling or nonlinearity, got '" + a.metric + "'");
  o.target = parse_target(a.target);
  o.draws = a.draws;
  o.jobs = c.jobs;

  Json cfg;
  cfg["subcommand"] = "stability";
  cfg["family"] = to_string(fam);
  cfg["ratio"] = a.ratio;
  cfg["disorder"] = a.disorder;
  cfg["nmin"] = a.nmin;
  cfg["nmax"] = a.nmax;
  cfg["step"] = a.step;
  cfg["metric"] = a.metric;
  cfg["target"] = a.target;
  cfg["draws"] = a.draws;
  Output out(c, "stability", cfg);
  o.seed = out.seed();

  std::vector<int> sizes;
  for (int s = a.nmin; s <= a.nmax; s += a.step) sizes.push_back(s);
  const SweepResult r = scaling_sweep(fam, sizes, o);

  CsvTable t;
  t.header = {"size", "n", "metric", "spread", "failures"};
  for (const auto& row : r.rows)
    t.add({std::to_string(row.size), std::to_string(row.n), fmt(row.metric), fmt(row.spread),
           std::to_string(row.failures)});
  Json fits;
  fits["loglog"] = fit_to_json(r.loglog);
  fits["linlog"] = fit_to_json(r.linlog);
  fits["better"] = r.loglog.r2 >= r.linlog.r2 ? "loglog" : "linlog";
  out.add("sweep.csv", t.render(out.hash(), out.seed()));
  out.add("fits.json", fits);
  out.commit();

  std::ostringstream s;
  s << to_string(fam) << " " << a.metric << " " << a.target << ": loglog slope " << r.loglog.slope << " r2 "
    << r.loglog.r2 << ", linlog slope " << r.linlog.slope << " r2 " << r.linlog.r2;
  return s.str();
}

std::string cmd_noon(const NoonArgs& a, const Common& c) {
  double c0 = a.c0, lambda0 = a.lambda0, j = a.j;
  int d = a.d, n = a.n;
  std::optional<HubbardParams> p;
  Json cfg;
  cfg["subcommand"] = "noon";
  if (!a.model.empty()) {
    p = load_model(a.model);
    if (a.site < 0 || a.site >= p->graph.n) throw ValidationError("--site is not a vertex of the model");
    if (p->graph.boundary.empty()) throw ValidationError("model has no boundary vertices");
    Eigen::VectorXcd g = Eigen::VectorXcd::Zero(p->graph.n);
    g[p->graph.boundary.front()] = std::sqrt(a.port_rate);
    const PropagatorBound b = propagator_bound(port_hamiltonian(*p, g));
    c0 = b.c0;
    lambda0 = b.lambda0;
    j = p->max_coupling();
    d = p->graph.degree_bound();
    n = p->graph.n;
    cfg["model"] = file_hash(a.model);
    cfg["port_rate"] = a.port_rate;
    cfg["site"] = a.site;
  }
  cfg["c0"] = c0;
  cfg["lambda0"] = lambda0;
  cfg["J"] = j;
  cfg["d"] = d;
  cfg["N"] = n;
  cfg["k"] = a.k;
  cfg["delta"] = a.delta;
  cfg["photons"] = a.photons;
  cfg["ton"] = a.ton;
  cfg["eps0"] = a.eps0;
  cfg["t_scale"] = a.t_scale;
  cfg["eps_scale"] = a.eps_scale;
  if (!a.sweep_p.empty()) cfg["sweep_p"] = a.sweep_p;
  Output out(c, "noon", cfg);

  if (a.photons < 1) throw ValidationError("--photons must be positive");
  const NoonSchedule sched{a.t_scale, a.eps_scale};
  const double t_on = auto_or(a.ton, a.t_scale / std::sqrt(static_cast<double>(a.photons)), "--ton");
  const double eps0 = auto_or(a.eps0, a.eps_scale / a.photons, "--eps0");
  const NoonBudget b = precision_budget(a.photons, t_on, eps0, a.k, a.delta, c0, lambda0, j, d, n);
  Json bj = budget_to_json(b);
  if (p) {
    const NoonPhase ph = noon_phase(p->mu[a.site], p->chi[a.site], a.photons, t_on);
    bj["theta"] = ph.phase;
    bj["damping"] = ph.damping;
    const DiffusionDeviation dev = diffusion_deviation(*p, a.site, a.photons, t_on);
    bj["diffusion_exact"] = dev.exact;
    bj["diffusion_bound"] = dev.bound;
  }

  std::ostringstream s;
  s << "P=" << a.photons << " T_on=" << t_on << " precision " << b.precision;
  if (!a.sweep_p.empty()) {
    const std::vector<int> ps = photon_range(a.sweep_p);
    const ScalingFit f = budget_sweep(ps, sched, a.k, a.delta, c0, lambda0, j, d, n);
    CsvTable t;
    t.header = {"photons", "t_on", "eps0", "precision"};
    for (int P : ps) {
      const NoonBudget r = scheduled_budget(P, sched, a.k, a.delta, c0, lambda0, j, d, n);
      t.add({std::to_string(P), fmt(r.t_on), fmt(r.eps0), fmt(r.precision)});
    }
    out.add("noon_sweep.csv", t.render(out.hash(), out.seed()));
    bj["sweep_fit"] = fit_to_json(f.fit);
    s << ", sweep exponent " << f.fit.slope << " (r2 " << f.fit.r2 << ")";
  }
  if (a.budget.empty() || fs::path(a.budget).has_parent_path())
    throw ValidationError("--budget must be a plain file name");
  out.add(a.budget, bj);
  out.commit();
  return s.str();
}

std::string cmd_spectra(const SpectraArgs& a, const Common& c) {
  const HubbardParams p = load_model(a.model);
  PortPair ports = default_ports(p, a.in_site, a.out_site, a.gamma);
  ports.phase = a.phase;
  Json cfg;
  cfg["subcommand"] = "spectra";
  cfg["model"] = file_hash(a.model);
  cfg["in_site"] = ports.in;
  cfg["out_site"] = ports.out;
  cfg["gamma"] = a.gamma;
  cfg["phase"] = a.phase;
  cfg["wmin"] = a.wmin;
  cfg["wmax"] = a.wmax;
  cfg["points"] = a.points;
  Output out(c, "spectra", cfg);
  out.add("transmission.csv", transmission_csv(p, ports, a.wmin, a.wmax, a.points, out));
  out.commit();
  return "transmission " + std::to_string(ports.in) + " -> " + std::to_string(ports.out) + ", " +
         std::to_string(a.points) + " points -> " + c.out_dir;
}

bool cmd_verify(const Common& c, std::string& report) {
  std::ostringstream s;
  bool all = true;
  auto check = [&](const std::string& name, const std::function<double()>& f, double tol) {
    double v = INFINITY;
    std::string note;
    try {
      v = f();
    } catch (const std::exception& e) {
      note = std::string(" (") + e.what() + ")";
    }
    const bool ok = v < tol;
    all = all && ok;
    s << (ok ? "PASS " : "FAIL ") << name << " value=" << v << " tol=" << tol << note << "\n";
  };
  const std::uint64_t seed = c.resolved_seed();

  check("single round trip, SSH chain N=8", [&] {
    SshOptions o;
    o.kappa = 0.05 * o.j2;
    const HubbardParams p = ssh_families(SshFamily::ssh, 8, o, seed);
    const SpectralData d = synthesize(p, false, false);
    return gauge_compare(p, reconstruct_single(d.e1, d.m1, p.graph).params).max_residual() / o.j2;
  }, 1e-8);
  check("single round trip, 3x3 square with complex couplings", [&] {
    RandomModelOptions o;
    o.complex_phases = true;
    o.kappa_min = 0.01;
    o.kappa_max = 0.1;
    const HubbardParams p = random_params(make_lattice(LatticeKind::square, {3, 3}, BoundarySpec::one_side), o, seed);
    const SpectralData d = synthesize(p, false, false);
    return gauge_compare(p, reconstruct_single(d.e1, d.m1, p.graph).params).max_residual();
  }, 1e-8);
  check("chi round trip, chain N=5", [&] {
    RandomModelOptions o;
    o.kappa_min = 0.01;
    o.kappa_max = 0.1;
    o.chi_max = 0.5;
    const HubbardParams p = random_params(make_lattice(LatticeKind::chain, {5}, BoundarySpec::one_side), o, seed);
    const SpectralData d = synthesize(p, false, true);
    HubbardParams r = reconstruct_single(d.e1, d.m1, p.graph).params;
    r.chi = reconstruct_chi(d.e1, d.e2, d.m2, r).chi;
    return gauge_compare(p, r).max_residual();
  }, 1e-6);
  check("chi by toggle, chain N=6", [&] {
    RandomModelOptions o;
    o.kappa_min = 0.01;
    o.kappa_max = 0.1;
    o.chi_max = 0.5;
    const HubbardParams p = random_params(make_lattice(LatticeKind::chain, {6}, BoundarySpec::endpoints), o, seed);
    const Eigen::VectorXcd on = sorted_eigenvalues(build_h2(p, make_pair_basis(p.graph.n)));
    double err = 0;
    for (int v = 0; v < p.graph.n; ++v)
      err = std::max(err, std::abs(chi_by_toggle(on, e2_with_site_off(p, v)) - p.chi[v]));
    return err;
  }, 1e-10);
  check("transmission eigen expansion vs resolvent", [&] {
    RandomModelOptions o;
    o.complex_phases = true;
    o.kappa_min = 0.01;
    o.kappa_max = 0.1;
    const HubbardParams p = random_params(make_lattice(LatticeKind::chain, {6}, BoundarySpec::endpoints), o, seed);
    const PortPair pp = default_ports(p, -1, -1, 0.2);
    double err = 0;
    for (int k = 0; k <= 40; ++k) {
      const double w = -3 + 0.15 * k;
      const Complex r = tau_resolvent(p, pp, w);
      err = std::max(err, std::abs(tau_omega(p, pp, w) - r) / std::max(1.0, std::abs(r)));
    }
    return err;
  }, 1e-12);
  check("wave-packet round trip", [&] {
    HubbardParams p = blank_params(make_lattice(LatticeKind::chain, {3}, BoundarySpec::endpoints));
    p.mu = {Complex(0.2, -0.01), Complex(-0.1, -0.02), Complex(0.05, -0.01)};
    p.set_coupling(0, 1, 0.7);
    p.set_coupling(1, 2, 0.5);
    Eigen::VectorXcd g = Eigen::VectorXcd::Zero(3);
    g[0] = 1.0;
    const TimeGrid grid{0, 0.002, 30001};
    const WavePacket f = wavepacket(p, g, 2, PacketDirection::out, grid);
    const WavePacket back = emit_from_coupling(grid, coupling_from_wavepacket(f));
    return (back.amplitude - f.amplitude).cwiseAbs().maxCoeff();
  }, 1e-6);
  check("NOON budget exponent offset from -1.5", [&] {
    std::vector<int> ps;
    for (int P = 8; P <= 256; P *= 2) ps.push_back(P);
    return std::abs(budget_sweep(ps, NoonSchedule{1.0, 1e-3}, 4, 0.1, 1, 1, 1, 2, 4).fit.slope + 1.5);
  }, 0.1);
  check("triangle with one boundary vertex is rejected", [&] {
    const LatticeGraph g = make_graph(3, {{0, 1}, {1, 2}, {0, 2}}, {0});
    RandomModelOptions o;
    o.kappa_max = 0.1;
    const HubbardParams p = random_params(g, o, seed);
    const SpectralData d = synthesize(p, false, false);
    try {
      reconstruct_single(d.e1, d.m1, g);
    } catch (const NotTomographable&) {
      return 0.0;
    }
    return 1.0;
  }, 0.5);

  report = s.str();
  if (!c.out_dir.empty()) {
    Json cfg;
    cfg["subcommand"] = "verify";
    Output out(c, "verify", cfg);
    out.add("verify.txt", report);
    out.commit();
  }
  return all;
}

}  // namespace graphtomo::cli
