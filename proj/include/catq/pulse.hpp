#pragma once

// Square-pulse sequences on the control channels and their compilation into
// piecewise-constant Lindblad problems.
//
// Envelope units per channel:
//   two_photon_pump      dimensionless scale of the nominal g2
//   buffer_drive         eps_d, rad/s
//   memory_drive         eps_Z, rad/s
//   longitudinal_pump    dimensionless scale of the nominal g_l, g_sp (and g_lin)
//   reset_pump           dimensionless scale of the nominal g_reset
//   memory_displacement  lambda of an instantaneous displacement D(lambda)

#include <optional>
#include <string>
#include <vector>

#include "catq/hilbert.hpp"
#include "catq/model.hpp"

namespace catq {

enum class Channel {
  two_photon_pump,
  buffer_drive,
  memory_drive,
  longitudinal_pump,
  reset_pump,
  memory_displacement,
};

inline constexpr int kChannelCount = 6;

std::string channel_name(Channel channel);
Channel channel_from_name(const std::string& name);

struct Segment {
  Channel channel;
  double t_start;
  double duration;
  cplx envelope;

  double t_end() const { return t_start + duration; }
  friend bool operator==(const Segment&, const Segment&) = default;
};

class PulseSequence {
 public:
  PulseSequence() = default;

  /// Keeps segments ordered by start time (stable for equal starts).
  void add(const Segment& segment);
  void add(Channel channel, double t_start, double duration, cplx envelope);
  void displace(double t, cplx lambda) { add(Channel::memory_displacement, t, 0.0, lambda); }

  const std::vector<Segment>& segments() const { return segments_; }
  double total_time() const { return total_time_; }
  /// Extends (never shortens below the last segment end).
  void set_total_time(double t);

  /// Summed envelope of a channel at time t, using half-open [start, end).
  cplx envelope_at(Channel channel, double t) const;

  friend bool operator==(const PulseSequence&, const PulseSequence&) = default;

 private:
  std::vector<Segment> segments_;
  double total_time_ = 0.0;
};

struct Interval {
  double t0;
  double t1;
  QOperator hamiltonian;
  std::vector<cplx> envelopes;  // per channel, indexed by Channel
};

struct Kick {
  double time;
  cplx lambda;
  MatrixXc unitary;  // on the full two-mode space
};

struct TimeDependentProblem {
  SpaceDims dims;
  std::vector<double> breakpoints;
  std::vector<Interval> intervals;
  std::vector<Kick> kicks;
  std::vector<CollapseOperator> collapses;
  std::optional<QState> initial;
  double rate_scale = 0.0;

  double total_time() const { return breakpoints.back(); }
};

struct CompileOptions {
  Cancellation cancellation = Cancellation::exact;
  bool allow_pump_overlap = false;
  CollapseFlags collapse_flags{};
};

TimeDependentProblem compile(const PulseSequence& seq, const PhysicalParams& params, const SpaceDims& dims,
                             std::optional<QState> initial = std::nullopt, const CompileOptions& options = {});

/// Time-independent problem: one interval of length `duration`.
TimeDependentProblem constant_problem(const QOperator& hamiltonian, std::vector<CollapseOperator> collapses,
                                      QState initial, double duration);

// ---- protocol builders ----------------------------------------------------------

PulseSequence build_cat_prep(cplx alpha, double dT, const PhysicalParams& params);

/// Memory-drive rotation of the cat qubit about its Z axis on top of a
/// stabilising background. The drive amplitude is |eps_Z| with its phase
/// locked to alpha; the sign of `angle` selects the rotation sense.
PulseSequence build_zeno_gate(cplx alpha, cplx eps_Z, double angle, const PhysicalParams& params);
double zeno_gate_duration(cplx alpha, cplx eps_Z, double angle);

struct HolonomicTimings {
  double stabilize = 367e-9;
  double zeno = 200e-9;
  double deflate = 367e-9;
  double inflate = 367e-9;
  double ringdown = 100e-9;
  double readout = 10e-6;
};

/// Readout photon number tracks W(lambda) of the memory state at t = 0.
/// Time of the final displacement is returned by holonomic_readout_time().
PulseSequence build_holonomic_tomography(cplx lambda, double alpha1, double alpha2, const HolonomicTimings& timings,
                                         const PhysicalParams& params);
double holonomic_readout_time(const HolonomicTimings& timings);
/// Zeno drive amplitude used by the tomography sequence (negative quarter turn).
double holonomic_zeno_drive(double alpha1, const HolonomicTimings& timings);

struct BitflipTimings {
  double ramp = 400e-9;
  double ringdown = 100e-9;
  double readout = 10e-6;
};

PulseSequence build_bitflip_probe(double alpha, double alpha_prime, double stabilize_time,
                                  const PhysicalParams& params, const BitflipTimings& timings = {});
double bitflip_readout_time(double stabilize_time, const BitflipTimings& timings);

PulseSequence build_deflation_probe(cplx alpha, double dT, double readout = 10e-6);

PulseSequence build_reset(double duration, double scale = 1.0);

}  // namespace catq
