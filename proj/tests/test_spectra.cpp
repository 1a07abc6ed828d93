#include <doctest.h>

#include <unsupported/Eigen/MatrixFunctions>
#include <cmath>
#include <random>

#include "graphtomo/errors.hpp"
#include "graphtomo/spectra.hpp"
#include "oracles.hpp"

using namespace graphtomo;

namespace {

constexpr Complex kI(0.0, 1.0);

HubbardParams lossy(const LatticeGraph& g, std::uint64_t seed, double chi_max = 0.0) {
  RandomModelOptions o;
  o.complex_phases = true;
  o.kappa_min = 0.2;
  o.kappa_max = 0.5;
  o.chi_max = chi_max;
  return random_params(g, o, seed);
}

// Weak-drive wavefunction integration of the two-tone scattering problem.
struct DriveOracle {
  Eigen::MatrixXcd h1, h2, lower_out, raise_in;
  int in, out;
  double gin, gout, w1, w2;

  Complex beta(double t) const { return std::exp(-kI * w1 * t) + std::exp(-kI * w2 * t); }

  template <class F>
  static void rk4(Eigen::VectorXcd& y, double t, double h, const F& f) {
    const Eigen::VectorXcd k1 = f(t, y), k2 = f(t + h / 2, y + h / 2 * k1), k3 = f(t + h / 2, y + h / 2 * k2),
                           k4 = f(t + h, y + h * k3);
    y += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
  }

  // returns ( <c c>, <c>(t1), <c>(t2) ) for t1 >= t2
  std::array<Complex, 3> run(double t1, double t2, double start, double h) const {
    const int n = static_cast<int>(h1.rows()), d = static_cast<int>(h2.rows());
    Eigen::VectorXcd ein = Eigen::VectorXcd::Zero(n);
    ein[in] = 1.0;
    // joint state: one-excitation (n) then two-excitation (d)
    Eigen::VectorXcd y = Eigen::VectorXcd::Zero(n + d);
    auto full = [&](double t, const Eigen::VectorXcd& s) {
      Eigen::VectorXcd ds(n + d);
      const Complex b = std::sqrt(gin) * beta(t);
      ds.head(n) = -kI * (h1 * s.head(n) + b * ein);
      ds.tail(d) = -kI * (h2 * s.tail(d) + b * (raise_in * s.head(n)));
      return ds;
    };
    double t = start;
    const int steps_a = static_cast<int>(std::llround((t2 - start) / h));
    const double ha = (t2 - start) / steps_a;
    for (int k = 0; k < steps_a; ++k, t += ha) rk4(y, t, ha, full);
    const Complex a1_t2 = -kI * std::sqrt(gout) * y[out];
    const Complex c0 = y[out];
    Eigen::VectorXcd z(2 * n);
    z.head(n) = lower_out * y.tail(d);  // after the first detection
    z.tail(n) = y.head(n);              // undisturbed one-excitation amplitude
    auto after = [&](double tt, const Eigen::VectorXcd& s) {
      Eigen::VectorXcd ds(2 * n);
      const Complex b = std::sqrt(gin) * beta(tt);
      ds.head(n) = -kI * (h1 * s.head(n) + b * c0 * ein);
      ds.tail(n) = -kI * (h1 * s.tail(n) + b * ein);
      return ds;
    };
    if (t1 > t2) {
      const int steps_b = std::max(1, static_cast<int>(std::llround((t1 - t2) / h)));
      const double hb = (t1 - t2) / steps_b;
      t = t2;
      for (int k = 0; k < steps_b; ++k, t += hb) rk4(z, t, hb, after);
    }
    return {-gout * z[out], -kI * std::sqrt(gout) * z[n + out], a1_t2};
  }
};

Complex resolvent_entry(const Eigen::MatrixXcd& h, int out, int in, double w) {
  Eigen::MatrixXcd m = h;
  m.diagonal().array() -= w;
  Eigen::VectorXcd e = Eigen::VectorXcd::Zero(h.rows());
  e[in] = 1.0;
  return m.partialPivLu().solve(e)[out];
}

}  // namespace

TEST_SUITE("spectra") {
  TEST_CASE("eigen expansion of tau equals the resolvent") {
    auto p = lossy(make_lattice(LatticeKind::chain, {6}, BoundarySpec::endpoints), 41);
    PortPair ports{0, 5, 0.3, 0.7, 0.0};
    const auto s = port_spectrum(p, ports, false);
    for (double w : {-3.0, -1.1, -0.2, 0.0, 0.37, 1.4, 2.9}) {
      const Complex a = tau_omega(s, w), b = tau_resolvent(p, ports, w);
      CHECK(std::abs(a - b) < 1e-12 * std::max(1.0, std::abs(b)));
    }
    CHECK(std::abs(tau_omega(s, 1e9)) < 1e-8);
  }

  TEST_CASE("single lossy site is a Lorentzian") {
    auto p = blank_params(make_graph(1, {}, {0}));
    p.mu[0] = Complex(0.4, -0.05);  // kappa = 0.1
    PortPair ports{0, 0, 0.3, 0.3, 0.0};
    for (double w : {-1.0, 0.2, 0.4, 0.9}) {
      const Complex expect = kI * 0.3 / (Complex(0.4, -0.05 - 0.15) - w);
      CHECK(std::abs(tau_omega(p, ports, w) - expect) < 1e-14);
    }
    CHECK(std::abs(std::abs(tau_omega(p, ports, 0.4)) - 0.3 / (0.05 + 0.15)) < 1e-14);
  }

  TEST_CASE("homodyne transmission and quadrature inversion") {
    CHECK(transmission(Complex(0.0), 1.3) == doctest::Approx(0.5));
    auto p = lossy(make_lattice(LatticeKind::chain, {4}, BoundarySpec::endpoints), 42);
    PortPair ports{0, 3, 0.5, 0.5, 0.0};
    auto s = port_spectrum(p, ports, false);
    for (double w : {-1.0, 0.1, 0.8}) {
      const Complex tau = tau_omega(s, w);
      double t[4];
      for (int k = 0; k < 4; ++k) t[k] = transmission(tau, k * M_PI / 2);
      CHECK(std::abs(tau_from_quadratures(t[0], t[1], t[2], t[3]) - tau) < 1e-14);
    }
  }

  TEST_CASE("measurement noise is unbiased and reproducible") {
    std::vector<double> v(20000, 0.25);
    const double sigma = photon_noise_sigma(1e4);
    CHECK(sigma == doctest::Approx(0.01));
    auto a = add_noise(v, sigma, 7), b = add_noise(v, sigma, 7);
    CHECK(a == b);
    double mean = 0;
    for (double x : a) mean += x / a.size();
    CHECK(std::abs(mean - 0.25) < 5 * sigma / std::sqrt(double(a.size())));
    CHECK_THROWS_AS(photon_noise_sigma(0.0), ValidationError);
  }

  TEST_CASE("frequency on a real eigenvalue is singular") {
    PortSpectrum s;
    s.e1 = Eigen::VectorXcd::Constant(1, Complex(0.5, 0.0));
    s.m1 = Eigen::VectorXcd::Constant(1, Complex(1.0, 0.0));
    CHECK_THROWS_AS(tau_omega(s, 0.5), SingularResolvent);
    auto p = blank_params(make_graph(1, {}, {0}));
    p.mu[0] = 0.5;
    CHECK_THROWS_AS(mzi_response(p, Eigen::VectorXcd::Zero(1), 0.5), SingularResolvent);
  }

  TEST_CASE("ports must sit on the boundary") {
    auto p = lossy(make_lattice(LatticeKind::chain, {4}, BoundarySpec::one_side), 43);
    CHECK_THROWS_AS(port_spectrum(p, PortPair{0, 2, 1.0, 1.0, 0.0}, false), ValidationError);
    CHECK_THROWS_AS(port_spectrum(p, PortPair{0, 0, -1.0, 1.0, 0.0}, false), ValidationError);
  }

  TEST_CASE("two-photon kernel equals the propagator form") {
    auto p = lossy(make_lattice(LatticeKind::chain, {3}, BoundarySpec::endpoints), 44, 1.0);
    PortPair ports{0, 2, 0.4, 0.6, 0.0};
    const auto s = port_spectrum(p, ports, true);
    auto q = p;
    q.port_gamma[0] = 0.4;
    q.port_gamma[2] = 0.6;
    const Eigen::MatrixXcd h1 = build_h1(q, true), h2 = oracle::fock_h2(q, true);
    const Eigen::MatrixXcd a_out = oracle::fock_lowering(3, 2), a_in = oracle::fock_lowering(3, 0);
    auto ordered = [&](double tau, double wa, double wb) {
      const Eigen::MatrixXcd prop = (-kI * tau * h1).exp();
      Eigen::MatrixXcd ra = h1, rb = h1, r2 = h2;
      ra.diagonal().array() -= wa;
      rb.diagonal().array() -= wb;
      r2.diagonal().array() -= wa + wb;
      Eigen::VectorXcd e_in = Eigen::VectorXcd::Zero(3);
      e_in[0] = 1.0;
      const Eigen::VectorXcd xb = rb.partialPivLu().solve(e_in);
      const Complex s1 = (prop * ra.partialPivLu().solve(e_in))[2] * xb[2];
      const Eigen::VectorXcd two = r2.partialPivLu().solve(a_in.transpose() * xb);
      const Complex s2 = (prop * (a_out * two))[2];
      return s1 - s2;
    };
    for (double tau : {0.0, 0.3, 1.7})
      for (auto [w1, w2] : std::vector<std::pair<double, double>>{{0.2, -0.4}, {0.5, 0.5}, {-1.2, 0.9}}) {
        const Complex ref = 0.24 * (ordered(tau, w1, w2) + ordered(tau, w2, w1));
        CHECK(std::abs(t2_kernel(s, tau, w1, w2) - ref) < 1e-10 * std::max(1.0, std::abs(ref)));
      }
    CHECK(std::abs(t2_kernel(s, 1e-12, 0.2, -0.4) - t2_kernel(s, 0.0, 0.2, -0.4)) < 1e-10);
  }

  TEST_CASE("connected correlator vanishes for a linear lattice") {
    for (int n : {1, 3}) {
      auto p = lossy(make_lattice(LatticeKind::chain, {n}, BoundarySpec::endpoints), 45 + n, 0.0);
      PortPair ports{0, n - 1, 0.5, 0.5, 0.3};
      const auto s = port_spectrum(p, ports, true);
      for (double t1 : {0.0, 0.8, 2.5})
        CHECK(std::abs(connected_correlator(s, t1, 0.3, 0.4, -0.7)) < 1e-10);
    }
  }

  TEST_CASE("G2 reduces to a product without interaction") {
    auto p = lossy(make_lattice(LatticeKind::chain, {3}, BoundarySpec::endpoints), 48, 0.0);
    PortPair ports{0, 2, 0.5, 0.5, 0.9};
    const auto s = port_spectrum(p, ports, true);
    const double w1 = 0.3, w2 = -0.5, t1 = 1.1, t2 = 0.4;
    const Complex lo = std::polar(1.0, 0.9);
    const Complex h1 = tau_omega(s, w1) + lo, h2 = tau_omega(s, w2) + lo;
    auto field = [&](double t) { return h1 * std::exp(-kI * w1 * t) + h2 * std::exp(-kI * w2 * t); };
    CHECK(g2(s, t1, t2, w1, w2) == doctest::Approx(0.25 * std::norm(field(t1) * field(t2))).epsilon(1e-12));
  }

  TEST_CASE("G2 is symmetric in the detection times and consistent with the connected form") {
    auto p = lossy(make_lattice(LatticeKind::chain, {3}, BoundarySpec::endpoints), 49, 1.2);
    PortPair ports{0, 2, 0.5, 0.8, 0.4};
    const auto s = port_spectrum(p, ports, true);
    const double w1 = 0.2, w2 = -0.6;
    const Complex lo = std::polar(1.0, 0.4);
    const Complex h1 = tau_omega(s, w1) + lo, h2 = tau_omega(s, w2) + lo;
    for (auto [t1, t2] : std::vector<std::pair<double, double>>{{1.0, 0.2}, {0.5, 0.5}, {3.0, -1.0}}) {
      CHECK(g2(s, t1, t2, w1, w2) == doctest::Approx(g2(s, t2, t1, w1, w2)).epsilon(1e-13));
      auto field = [&](double t) { return h1 * std::exp(-kI * w1 * t) + h2 * std::exp(-kI * w2 * t); };
      const double ref = 0.25 * std::norm(connected_correlator(s, t1, t2, w1, w2) + field(t1) * field(t2));
      CHECK(g2(s, t1, t2, w1, w2) == doctest::Approx(ref).epsilon(1e-12));
    }
  }

  TEST_CASE("G2 of an interacting dimer matches direct weak-drive integration") {
    auto p = lossy(make_graph(2, {{0, 1}}, {0, 1}), 50, 0.0);
    p.chi = {1.3, 0.6};
    PortPair ports{0, 1, 0.8, 0.6, 0.7};
    const auto s = port_spectrum(p, ports, true);
    auto q = p;
    q.port_gamma = {{0, 0.8}, {1, 0.6}};
    DriveOracle o;
    o.h1 = build_h1(q, true);
    o.h2 = oracle::fock_h2(q, true);
    o.lower_out = oracle::fock_lowering(2, 1);
    o.raise_in = oracle::fock_lowering(2, 0).transpose();
    o.in = 0;
    o.out = 1;
    o.gin = 0.8;
    o.gout = 0.6;
    o.w1 = 0.35;
    o.w2 = -0.45;
    const Complex lo = std::polar(1.0, 0.7);
    for (auto [t1, t2] : std::vector<std::pair<double, double>>{{0.9, 0.3}, {0.3, 0.3}, {2.4, 0.1}}) {
      const auto [amp2, a1_t1, a1_t2] = o.run(t1, t2, -120.0, 0.004);
      CHECK(std::abs(a1_t1 - (tau_omega(s, o.w1) * std::exp(-kI * o.w1 * t1) +
                              tau_omega(s, o.w2) * std::exp(-kI * o.w2 * t1))) < 1e-7);
      const Complex conn = amp2 - a1_t1 * a1_t2;
      CHECK(std::abs(conn - connected_correlator(s, t1, t2, o.w1, o.w2)) < 1e-7);
      const Complex total = amp2 + lo * (o.beta(t1) * a1_t2 + o.beta(t2) * a1_t1) + lo * lo * o.beta(t1) * o.beta(t2);
      CHECK(g2(s, t1, t2, o.w1, o.w2) == doctest::Approx(0.25 * std::norm(total)).epsilon(1e-7));
    }
  }

  TEST_CASE("constant term of a three-harmonic signal") {
    auto sample = [](Complex c0, Complex c1, Complex cm1, double delta, int count) {
      std::vector<double> t, f;
      const double period = 2 * M_PI / delta;
      for (int k = 0; k < count; ++k) {
        const double x = 0.13 + period * k / count * 1.7;
        t.push_back(x);
        f.push_back(std::norm(c0 + c1 * std::exp(-kI * delta * x) + cm1 * std::exp(kI * delta * x)));
      }
      return std::make_pair(t, f);
    };
    {
      // a constant signal cannot tell C0 from a lone C1
      auto [t, f] = sample(Complex(0.8, -0.3), 0.0, 0.0, 0.7, 12);
      try {
        isolate_constant_term(t, f, 0.7);
        FAIL("expected two candidates");
      } catch (const AmbiguousRoot& e) {
        REQUIRE(e.candidates().size() == 2);
        CHECK(e.candidates()[0] < 1e-6);
        CHECK(e.candidates()[1] == doctest::Approx(std::abs(Complex(0.8, -0.3))).epsilon(1e-12));
      }
    }
    {
      // roots of C-1 + C0 z + C1 z^2 on the unit circle: no mirror partner
      auto [t, f] = sample(Complex(0.5, 0.0), Complex(1.0, 0.0), Complex(1.0, 0.0), 0.7, 12);
      CHECK(isolate_constant_term(t, f, 0.7).value == doctest::Approx(0.5).epsilon(1e-9));
    }
    {
      auto [t, f] = sample(0.0, Complex(0.4, 0.2), Complex(-0.2, 0.4), 1.3, 16);
      CHECK(isolate_constant_term(t, f, 1.3).value < 1e-6);
    }
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n01;
    for (int trial = 0; trial < 40; ++trial) {
      const Complex c0(n01(rng), n01(rng)), c1(0.5 * n01(rng), 0.5 * n01(rng)), cm1(0.5 * n01(rng), 0.5 * n01(rng));
      auto [t, f] = sample(c0, c1, cm1, 0.9, 24);
      std::vector<double> cands;
      try {
        cands = {isolate_constant_term(t, f, 0.9).value};
      } catch (const AmbiguousRoot& e) {
        cands = e.candidates();
      }
      CHECK(cands.size() <= 2);
      bool found = false;
      for (double x : cands) found = found || std::abs(x - std::abs(c0)) < 1e-8;
      CHECK(found);
      // the other candidate comes from mirroring one root of the quadratic
      if (cands.size() == 2) {
        const Complex disc = std::sqrt(c0 * c0 - 4.0 * c1 * cm1);
        const Complex r1 = (-c0 + disc) / (2.0 * c1), r2 = (-c0 - disc) / (2.0 * c1);
        const Complex mirrored = -c1 * std::abs(r1) * std::abs(r1) * (1.0 / std::conj(r1) + r2) / std::abs(r1);
        const double other = std::abs(std::abs(c0) - cands[0]) < 1e-8 ? cands[1] : cands[0];
        CHECK(other == doctest::Approx(std::abs(mirrored)).epsilon(1e-7));
      }
    }
  }

  TEST_CASE("constant term errors") {
    std::vector<double> t, f;
    for (int k = 0; k < 20; ++k) {
      t.push_back(0.3 * k);
      f.push_back(1.0 + 10.0 * std::cos(0.9 * t.back()));
    }
    CHECK_THROWS_AS(isolate_constant_term(t, f, 0.9), NoRealRoot);
    CHECK_THROWS_AS(isolate_constant_term({0.0, 0.1, 0.2}, {1.0, 1.0, 1.0}, 0.9), ValidationError);
    CHECK_THROWS_AS(isolate_constant_term(t, f, 0.0), ValidationError);
  }

  TEST_CASE("pole extraction of synthetic rational responses") {
    auto synth = [](const std::vector<Pole>& poles, const std::vector<double>& grid) {
      Eigen::VectorXcd f = Eigen::VectorXcd::Zero(grid.size());
      for (size_t i = 0; i < grid.size(); ++i)
        for (const auto& pl : poles) f[i] += pl.residue / (kI * (pl.energy - grid[i]) + pl.width / 2);
      return f;
    };
    std::vector<double> grid;
    for (int i = 0; i < 4001; ++i) grid.push_back(-2.0 + 4.0 * i / 4000);
    {
      std::vector<Pole> truth = {{0.3, 0.05, Complex(0.7, -0.2)}};
      auto fit = extract_poles(grid, synth(truth, grid), 1);
      CHECK(std::abs(fit.poles[0].energy - 0.3) < 1e-8);
      CHECK(std::abs(fit.poles[0].width - 0.05) < 1e-8);
      CHECK(std::abs(fit.poles[0].residue - truth[0].residue) < 1e-8);
      CHECK_THROWS_AS(extract_poles(grid, synth(truth, grid), 3), RankDeficient);
    }
    {
      std::vector<Pole> truth = {{0.9, 0.1, Complex(-0.4, 0.1)}, {-0.8, 0.03, Complex(0.2, 0.3)}};
      auto fit = extract_poles(grid, synth(truth, grid), 2);
      CHECK(std::abs(fit.poles[0].energy + 0.8) < 1e-8);
      CHECK(std::abs(fit.poles[1].energy - 0.9) < 1e-8);
      CHECK(std::abs(fit.poles[0].residue - truth[1].residue) < 1e-8);
      CHECK(std::abs(fit.poles[1].width - 0.1) < 1e-8);
      auto noisy = synth(truth, grid);
      std::mt19937_64 rng(3);
      std::normal_distribution<double> n01;
      for (auto& x : noisy) x += 1e-2 * Complex(n01(rng), n01(rng));
      PoleOptions strict;
      strict.max_residual = 1e-6;
      strict.rank_tol = 0;
      CHECK_THROWS_AS(extract_poles(grid, noisy, 2, strict), PoorFit);
    }
  }

  TEST_CASE("round trip from transmission samples to boundary M1") {
    auto g = make_lattice(LatticeKind::chain, {5}, BoundarySpec::endpoints);
    RandomModelOptions o;
    o.complex_phases = true;
    o.kappa_min = 0.01;
    o.kappa_max = 0.1;
    o.port_gamma = 0.05;
    auto p = random_params(g, o, 51);
    const auto data = synthesize(p, true, false);
    const auto grid = frequency_grid(data.e1, 40);
    std::vector<Eigen::VectorXcd> channels;
    std::vector<std::pair<int, int>> pairs;
    for (int v : g.boundary)
      for (int u : g.boundary) {
        PortPair ports{u, v, 0.05, 0.05, 0.0};
        const auto s = port_spectrum(data, ports);
        Eigen::VectorXcd f(grid.size());
        for (size_t i = 0; i < grid.size(); ++i) f[i] = tau_omega(s, grid[i]);
        channels.push_back(f);
        pairs.push_back({v, u});
      }
    auto fit = extract_poles_multi(grid, channels, 5);
    for (int a = 0; a < 5; ++a) {
      CHECK(std::abs(fit.poles[a].energy - data.e1[a].real()) < 1e-6);
      CHECK(std::abs(-0.5 * fit.poles[a].width - data.e1[a].imag()) < 1e-6);
      for (size_t c = 0; c < pairs.size(); ++c) {
        const Complex m = -fit.residues[c][a] / 0.05;
        CHECK(std::abs(m - data.m1.at(pairs[c].first, pairs[c].second)[a]) < 1e-6);
      }
    }
  }

  TEST_CASE("interferometer phase") {
    auto p = blank_params(make_graph(1, {}, {0}));
    p.mu[0] = 0.2;
    Eigen::VectorXcd g = Eigen::VectorXcd::Constant(1, std::sqrt(0.1));
    for (double w : {-1.0, 0.15, 0.2, 0.3}) {
      const Complex s = (Complex(0.2 - w, 0.05)) / Complex(0.2 - w, -0.05);
      CHECK(std::abs(mzi_response(p, g, w) - s) < 1e-13);
    }
    CHECK(std::abs(mzi_phase(p, g, 1e5)) < 1e-5);
    double total = 0, prev = mzi_phase(p, g, 0.2 - 100 * 0.1);
    for (int i = 1; i <= 20000; ++i) {
      const double cur = mzi_phase(p, g, 0.2 - 10.0 + 20.0 * i / 20000);
      total += std::remainder(cur - prev, 2 * M_PI);
      prev = cur;
    }
    CHECK(std::abs(std::abs(total) - 2 * M_PI) < 0.05);

    // lossless lattice: unit modulus, and the eigen-expansion form
    RandomModelOptions o;
    o.complex_phases = true;
    auto q = random_params(make_lattice(LatticeKind::square, {3, 2}, BoundarySpec::one_side), o, 52);
    Eigen::VectorXcd gv = Eigen::VectorXcd::Zero(6);
    gv[0] = Complex(0.3, 0.1);
    gv[3] = Complex(-0.2, 0.25);
    Eigen::MatrixXcd heff = build_h1(q, false) - 0.5 * kI * (gv.conjugate() * gv.transpose());
    const auto eig = eig_biorthogonal(heff);
    for (double w : {-2.0, -0.3, 0.1, 0.7, 1.9}) {
      CHECK(std::abs(std::abs(mzi_response(q, gv, w)) - 1.0) < 1e-12);
      Complex expansion = 1.0;
      for (int a = 0; a < 6; ++a)
        for (int i : {0, 3})
          for (int j : {0, 3})
            expansion -= kI * gv[i] * std::conj(gv[j]) * eig.right(i, a) * eig.left(a, j) / (w - eig.energies[a]);
      CHECK(std::abs(expansion - mzi_response(q, gv, w)) < 1e-12);
      (void)resolvent_entry;
    }
  }
}
