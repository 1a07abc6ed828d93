#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "graphtomo/model.hpp"
#include "graphtomo/recon_chi.hpp"
#include "graphtomo/recon_single.hpp"

namespace graphtomo {

// Noise convention: every real and imaginary part of a boundary coefficient
// carries an independent unit-variance error, so a metric is the root of the
// summed squared partial derivatives.
struct ErrorMetricReport {
  std::string target;
  double value = 0;
  int n = 0;
  std::string model_tag;
  std::string method;  // "jacobian" or "monte_carlo"
  int trials = 0;
  int failures = 0;
  std::uint64_t seed = 0;
  double half_width = 0;  // 95% half-width of a Monte-Carlo estimate
};

struct JacobianOptions {
  double rel_step = 1e-6;              // finite-difference step relative to max |M1|
  bool include_coupling_errors = false;  // chi metric: add the M1 -> (mu, J) -> chi chain
  ReconOptions recon{false, 1e-8, 1e-14};
};

// sqrt(<(d|J_e|)^2>) for every edge.
std::map<Edge, double> jacobian_metrics_J(const HubbardParams& p, const JacobianOptions& opt = {});
ErrorMetricReport jacobian_metric_J(const HubbardParams& p, Edge target, const JacobianOptions& opt = {});

// sqrt(<(d chi_v)^2>) for every vertex, from C and optionally M1 errors.
std::vector<double> jacobian_metrics_chi(const HubbardParams& p, const JacobianOptions& opt = {});
ErrorMetricReport jacobian_metric_chi(const HubbardParams& p, int vertex, const JacobianOptions& opt = {});

enum class NoiseStage { single, chi };

struct MonteCarloResult {
  std::map<Edge, double> rms_j;   // per edge, single stage
  std::vector<double> rms_mu;     // per vertex, single stage (|d mu|)
  std::vector<double> rms_chi;    // per vertex, chi stage
  int trials = 0, failures = 0;
  double sigma = 0;
  std::uint64_t seed = 0;

  // 95% half-width of an RMS estimate from `trials - failures` samples
  double half_width(double rms) const;
};

// The chi stage perturbs the boundary C block and keeps the exact (mu, J)
// unless include_coupling_errors, in which case M1 is perturbed too.
MonteCarloResult monte_carlo_noise(const HubbardParams& p, double sigma, int trials, std::uint64_t seed,
                                   NoiseStage stage, bool include_coupling_errors = false, int jobs = 1);

enum class SshFamily { ssh, ssh_2d, ssh_defect };
SshFamily parse_ssh_family(const std::string& s);
std::string to_string(SshFamily f);

struct SshOptions {
  double j2 = 2 * 3.14159265358979323846 * 100;  // weak bond
  double ratio = 1.2;                             // J1 / J2
  double mu0 = 0.0;
  double disorder = 2 * 3.14159265358979323846 * 10;
  double chi = 0.0;          // uniform nonlinearity
  double kappa = 0.0;        // uniform intrinsic loss
  BoundarySpec boundary = BoundarySpec::one_side;
};

// `size` is N for chains and the side L (N = L^2) for the 2D family.
HubbardParams ssh_families(SshFamily family, int size, const SshOptions& opt, std::uint64_t seed);

struct LinearFit {
  double slope = 0, intercept = 0, r2 = 0;
};
LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

enum class TargetSelector { first_edge, last_edge, last_vertex };
TargetSelector parse_target(const std::string& s);

struct SweepRow {
  int size = 0, n = 0;
  double metric = 0, spread = 0;  // mean and standard deviation over disorder draws
  int failures = 0;               // draws whose exact data could not be reconstructed
};

struct SweepResult {
  std::vector<SweepRow> rows;
  LinearFit loglog, linlog;  // log metric against log N and against N; rows with no success are skipped
};

enum class MetricKind { coupling, nonlinearity };

struct SweepOptions {
  SshOptions model;
  MetricKind metric = MetricKind::coupling;
  TargetSelector target = TargetSelector::last_edge;
  int draws = 1;
  std::uint64_t seed = 1;
  JacobianOptions jacobian;
  int jobs = 1;
};

SweepResult scaling_sweep(SshFamily family, const std::vector<int>& sizes, const SweepOptions& opt);
// Fits restricted to rows with n >= n_min.
SweepResult refit(const SweepResult& r, int n_min);

// Runs f(i) for i in [0, count) on `jobs` threads; results must not depend on scheduling.
void parallel_for(int count, int jobs, const std::function<void(int)>& f);

}  // namespace graphtomo
