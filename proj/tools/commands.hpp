#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "graphtomo/io.hpp"

namespace graphtomo::cli {

struct Common {
  std::string out_dir;
  bool force = false;
  std::optional<std::uint64_t> seed;
  int jobs = 1;

  std::uint64_t resolved_seed() const;
};

struct SynthesizeArgs {
  std::string model;
  bool ports = false;
  bool no_m2 = false;
  bool spectra = false;
  int in_site = -1, out_site = -1;
  int points = 2000;
};

struct ReconstructArgs {
  std::string data;
  std::string graph;
  std::string truth;
  double noise = 0.0;
  bool no_chi = false;
  bool loose = false;
};

struct StabilityArgs {
  std::string family = "ssh";
  double ratio = 1.2;
  double disorder = 2 * 3.14159265358979323846 * 10;
  int nmin = 4, nmax = 24, step = 2;
  std::string metric = "coupling";
  std::string target = "last_edge";
  int draws = 8;
};

struct NoonArgs {
  int site = 0;
  int photons = 8;
  std::string ton = "auto";
  std::string budget = "budget.json";
  std::string sweep_p;
  std::string model;
  double port_rate = 1.0;
  double c0 = 1.0, lambda0 = 1.0, j = 1.0;
  int d = 2, n = 4;
  std::string eps0 = "auto";
  double k = 4.0, delta = 0.1;
  double t_scale = 1.0, eps_scale = 1e-3;
};

struct SpectraArgs {
  std::string model;
  int in_site = -1, out_site = -1;
  double gamma = 1.0;
  double phase = 0.0;
  double wmin = 0, wmax = 0;
  int points = 2000;
};

// Each writes its artifacts plus manifest.json into common.out_dir and
// returns a one-line summary for stdout.
std::string cmd_synthesize(const SynthesizeArgs& a, const Common& c);
std::string cmd_reconstruct(const ReconstructArgs& a, const Common& c);
std::string cmd_stability(const StabilityArgs& a, const Common& c);
std::string cmd_noon(const NoonArgs& a, const Common& c);
std::string cmd_spectra(const SpectraArgs& a, const Common& c);
// Built-in self checks; true when all pass.
bool cmd_verify(const Common& c, std::string& report);

// 0 ok, 2 validation, 3 reconstruction, 4 cap.
int exit_code_for(const std::exception& e);

}  // namespace graphtomo::cli
