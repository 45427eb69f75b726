#pragma once

// Quantum-jump unraveling, heterodyne record synthesis and telegraph traces.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "catq/analysis.hpp"
#include "catq/hilbert.hpp"
#include "catq/pulse.hpp"

namespace catq {

/// splitmix64 finaliser of seed + (index + 1) * golden ratio. Trajectory k of a
/// run uses derive_seed(seed, k), so records do not depend on scheduling.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

struct JumpEvent {
  double time;
  int channel;  // index into problem.collapses
};

struct HeterodyneSample {
  double t_start;
  double T_int;
  cplx value;
};

struct TrajectoryRecord {
  std::uint64_t seed = 0;  // derived per-trajectory seed
  std::size_t index = 0;
  std::vector<JumpEvent> jumps;
  std::vector<double> times;
  std::vector<std::string> names;
  std::vector<std::vector<double>> values;  // values[k][i]: observable k at times[i]
  std::vector<HeterodyneSample> heterodyne;

  const std::vector<double>& series(const std::string& name) const;
};

struct TrajectoryOptions {
  std::vector<std::pair<std::string, QOperator>> observables;  // Hermitian
  double rtol = 1e-8;
  double atol = 1e-10;
  double max_jump_probability = 0.1;  // per accepted substep
  int threads = 1;
};

/// Waiting-time unraveling: the unnormalised no-jump state is integrated with
/// adaptive Dormand-Prince substeps until its squared norm falls to a uniform
/// draw, the jump time is located by bisection and the channel drawn from
/// ||L_k psi||^2. A substep losing more than max_jump_probability of norm is
/// halved. Density-matrix initial states are purified per trajectory by
/// sampling an eigenvector with its eigenvalue as probability.
std::vector<TrajectoryRecord> jump_unravel(const TimeDependentProblem& problem, const std::vector<double>& times,
                                           std::uint64_t seed, int n_traj, const TrajectoryOptions& options = {});

struct EnsembleSeries {
  std::vector<double> times;
  std::vector<double> mean;
  std::vector<double> sem;  // standard error of the mean
};

/// Ensemble mean of a recorded observable. Values at each time are sorted
/// before summation, so the result does not depend on the record order.
EnsembleSeries ensemble_mean(const std::vector<TrajectoryRecord>& records, const std::string& name);

// ---- heterodyne readout -----------------------------------------------------------------

/// Per-quadrature standard deviation sqrt(1 / (2 eta kappa_b T_int)).
double heterodyne_sigma(double T_int, double kappa_b, double eta);

/// samples[p][s]: shot s of pointer amplitude p, the amplitude plus complex
/// Gaussian noise of heterodyne_sigma per quadrature.
std::vector<std::vector<cplx>> heterodyne_readout(const std::vector<cplx>& pointer_amps, double T_int, double kappa_b,
                                                  double eta, std::uint64_t seed, int n_shots);

/// Q(|beta_1 - beta_0| / (2 sigma)): error of the midpoint threshold between two pointers.
double heterodyne_discrimination_error(cplx beta_0, cplx beta_1, double T_int, double kappa_b, double eta);

/// Efficiency at which two pointers reach a target fidelity (1 - error).
/// Throws if it would need eta > 1.
double fit_heterodyne_efficiency(cplx beta_0, cplx beta_1, double T_int, double kappa_b, double target_fidelity);

// ---- telegraph traces ---------------------------------------------------------------------

/// Symmetric two-state Markov chain with switching rate 1 / (2 T_X) per
/// direction, sampled every T_int (<Z(0) Z(t)> = exp(-t / T_X)). The initial
/// sign is drawn from the stationary distribution. T_X = inf gives a constant
/// trace. Warns unless T_int < T_X / 10.
TelegraphTrace telegraph_synthesize(double T_X, double T_int, double total, std::uint64_t seed);

struct RealTimeTrace {
  TelegraphTrace truth;
  std::vector<HeterodyneSample> samples;
  TelegraphTrace inferred;  // samples thresholded at the midpoint of the pointers
};

/// Real-time bit-flip record: the branch follows telegraph_synthesize, each
/// window of length T_int returns the branch's buffer pointer (b_plus for +1)
/// with heterodyne noise. With duty < 1 the windows start every T_int / duty.
RealTimeTrace simulate_realtime_trace(double T_X, double T_int, double total, cplx b_plus, cplx b_minus,
                                      double kappa_b, double eta, std::uint64_t seed, double duty = 1.0);

// ---- bit-flip time ----------------------------------------------------------------------------

struct BitflipEstimate {
  std::optional<FitResult> ensemble_fit;  // exponential fit of the ensemble mean of Z
  double T_X_ensemble;                    // NaN without a usable fit
  DwellEstimate dwell;                    // pooled sign-change estimator
  int flips;
  bool lower_bound_only;
};

/// Both estimates from jump trajectories recording a Z observable on a
/// uniform time grid. Fewer than 100 flips in total gives a warning; fewer
/// than 20 a flagged lower bound.
BitflipEstimate bitflip_time_from_trajectories(const std::vector<TrajectoryRecord>& records,
                                               const std::string& z_name = "Z");
/// Dwell estimate from telegraph traces.
BitflipEstimate bitflip_time_from_traces(const std::vector<TelegraphTrace>& traces);

}  // namespace catq
