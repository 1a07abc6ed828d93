#include <CLI11.hpp>

#include <iostream>

#include "commands.hpp"
#include "graphtomo/errors.hpp"

using namespace graphtomo::cli;

namespace {

void add_common(CLI::App* app, Common& c, bool needs_out = true) {
  auto* o = app->add_option("--out", c.out_dir, "output directory");
  if (needs_out) o->required();
  app->add_flag("--force", c.force, "overwrite existing outputs");
  app->add_option("--seed", c.seed, "master seed (falls back to GRAPHTOMO_SEED)");
  app->add_option("--jobs", c.jobs, "worker threads")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"graphtomo: boundary tomography of driven-dissipative Bose-Hubbard lattices"};
  app.require_subcommand(1);

  Common common;
  SynthesizeArgs syn;
  auto* s = app.add_subcommand("synthesize", "exact eigenvalues and boundary tensors of a model");
  s->add_option("--model", syn.model, "model JSON")->required();
  s->add_flag("--ports", syn.ports, "keep the port losses in the effective Hamiltonian");
  s->add_flag("--no-m2", syn.no_m2, "skip the two-excitation tensors");
  s->add_flag("--spectra", syn.spectra, "also write transmission.csv");
  s->add_option("--in-site", syn.in_site, "input port vertex (default first boundary vertex)");
  s->add_option("--out-site", syn.out_site, "output port vertex (default last boundary vertex)");
  s->add_option("--points", syn.points, "frequency points for --spectra")->check(CLI::PositiveNumber);
  add_common(s, common);

  ReconstructArgs rec;
  auto* r = app.add_subcommand("reconstruct", "recover mu, J and chi from boundary data");
  r->add_option("--data", rec.data, "spectral JSON from synthesize")->required();
  r->add_option("--graph", rec.graph, "graph or model JSON overriding the graph stored with the data");
  r->add_option("--truth", rec.truth, "true model JSON for residuals");
  r->add_option("--noise", rec.noise, "iid noise on every real and imaginary boundary entry")->check(CLI::NonNegativeNumber);
  r->add_flag("--no-chi", rec.no_chi, "stop after the single-particle stage");
  r->add_flag("--loose", rec.loose, "tolerate imaginary residues (noisy data)");
  add_common(r, common);

  StabilityArgs st;
  auto* t = app.add_subcommand("stability", "error-metric scaling sweep over SSH families");
  t->add_option("--family", st.family, "ssh | ssh_2d | ssh_defect");
  t->add_option("--ratio", st.ratio, "J1 / J2");
  t->add_option("--disorder", st.disorder, "onsite disorder width");
  t->add_option("--nmin", st.nmin, "smallest size");
  t->add_option("--nmax", st.nmax, "largest size");
  t->add_option("--step", st.step, "size step")->check(CLI::PositiveNumber);
  t->add_option("--metric", st.metric, "coupling | nonlinearity");
  t->add_option("--target", st.target, "first_edge | last_edge");
  t->add_option("--draws", st.draws, "disorder draws per size")->check(CLI::PositiveNumber);
  add_common(t, common);

  NoonArgs nn;
  auto* q = app.add_subcommand("noon", "NOON-protocol precision budget");
  q->add_option("--site", nn.site, "target vertex");
  q->add_option("--photons", nn.photons, "photon number P");
  q->add_option("--ton", nn.ton, "interaction time, or auto for t_scale / sqrt(P)");
  q->add_option("--budget", nn.budget, "budget file name inside --out");
  q->add_option("--sweep-p", nn.sweep_p, "photon sweep a:b over powers of two");
  q->add_option("--model", nn.model, "model JSON; supplies C0, lambda0, J, d and N");
  q->add_option("--port-rate", nn.port_rate, "port rate at the first boundary vertex when --model is given");
  q->add_option("--c0", nn.c0, "propagator constant C0");
  q->add_option("--lambda0", nn.lambda0, "propagator decay rate");
  q->add_option("--J", nn.j, "largest coupling");
  q->add_option("--d", nn.d, "graph degree");
  q->add_option("--N", nn.n, "number of sites");
  q->add_option("--eps0", nn.eps0, "single-particle precision, or auto for eps_scale / P");
  q->add_option("--k", nn.k, "parity measurements per quadrature");
  q->add_option("--delta", nn.delta, "failure probability");
  q->add_option("--t-scale", nn.t_scale, "T_on = t_scale / sqrt(P)");
  q->add_option("--eps-scale", nn.eps_scale, "eps0 = eps_scale / P");
  add_common(q, common);

  SpectraArgs sp;
  auto* w = app.add_subcommand("spectra", "homodyne transmission of a model");
  w->add_option("--model", sp.model, "model JSON")->required();
  w->add_option("--in-site", sp.in_site, "input port vertex");
  w->add_option("--out-site", sp.out_site, "output port vertex");
  w->add_option("--gamma", sp.gamma, "port rate at both vertices");
  w->add_option("--phase", sp.phase, "local-oscillator phase");
  w->add_option("--wmin", sp.wmin, "lowest frequency");
  w->add_option("--wmax", sp.wmax, "highest frequency");
  w->add_option("--points", sp.points, "frequency points")->check(CLI::PositiveNumber);
  add_common(w, common);

  auto* v = app.add_subcommand("verify", "built-in round-trip checks");
  add_common(v, common, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    std::string line;
    if (s->parsed()) line = cmd_synthesize(syn, common);
    if (r->parsed()) line = cmd_reconstruct(rec, common);
    if (t->parsed()) line = cmd_stability(st, common);
    if (q->parsed()) line = cmd_noon(nn, common);
    if (w->parsed()) line = cmd_spectra(sp, common);
    if (v->parsed()) {
      const bool ok = cmd_verify(common, line);
      std::cout << line;
      return ok ? 0 : 3;
    }
    std::cout << line << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
}
