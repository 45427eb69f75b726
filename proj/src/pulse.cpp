#include "catq/pulse.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <sstream>

#include "catq/errors.hpp"
#include "catq/warnings.hpp"

namespace catq {
namespace {

constexpr std::array<const char*, kChannelCount> kChannelNames = {
    "two_photon_pump", "buffer_drive", "memory_drive", "longitudinal_pump", "reset_pump", "memory_displacement",
};

// Nominal g2 corresponds to a pump amplitude of about 0.12; the model's
// warning amplitude 0.3 maps onto this scale factor.
constexpr double kPumpScaleWarn = 0.3 / 0.1215;

// Breakpoints closer than this are merged.
constexpr double kTimeEps = 1e-15;

int idx(Channel c) { return static_cast<int>(c); }

void check_segment(const Segment& s) {
  if (!std::isfinite(s.t_start) || !std::isfinite(s.duration) || s.t_start < 0.0 || s.duration < 0.0) {
    throw InvalidArgument("segment on " + channel_name(s.channel) + " has negative or non-finite timing");
  }
  if (s.channel == Channel::memory_displacement && s.duration != 0.0) {
    throw InvalidArgument("memory_displacement segments must have zero duration");
  }
  if (!std::isfinite(s.envelope.real()) || !std::isfinite(s.envelope.imag())) {
    throw InvalidArgument("segment on " + channel_name(s.channel) + " has a non-finite envelope");
  }
}

// Dense building blocks shared by all intervals of one compile call.
struct Pieces {
  QOperator pump;        // g2* a^2 b^dag + h.c.
  QOperator b;           // buffer annihilation
  QOperator a;           // memory annihilation
  QOperator static_part; // detunings, Kerr
  QOperator longitudinal;
  QOperator reset;
};

Pieces make_pieces(const PhysicalParams& params, const SpaceDims& dims, Cancellation cancellation) {
  auto [a, b] = mode_operators(dims);
  const QOperator ad = a.adjoint();
  const QOperator bd = b.adjoint();
  QOperator pump = std::conj(params.g2) * (a * a * bd) + params.g2 * (ad * ad * b);
  QOperator stat(dims);
  if (params.delta_mem != 0.0) stat += params.delta_mem * (ad * a);
  if (params.delta_buf != 0.0) stat += params.delta_buf * (bd * b);
  if (params.buffer_kerr != 0.0) stat += 0.5 * params.buffer_kerr * (bd * bd * b * b);
  return {std::move(pump), b, a, std::move(stat), hamiltonian_longitudinal(params, dims, cancellation),
          hamiltonian_reset(params, dims)};
}

}  // namespace

std::string channel_name(Channel channel) { return kChannelNames[idx(channel)]; }

Channel channel_from_name(const std::string& name) {
  for (int i = 0; i < kChannelCount; ++i) {
    if (name == kChannelNames[i]) return static_cast<Channel>(i);
  }
  throw InvalidArgument("unknown channel '" + name + "'");
}

void PulseSequence::add(const Segment& segment) {
  check_segment(segment);
  auto pos = std::upper_bound(segments_.begin(), segments_.end(), segment.t_start,
                              [](double t, const Segment& s) { return t < s.t_start; });
  segments_.insert(pos, segment);
  total_time_ = std::max(total_time_, segment.t_end());
}

void PulseSequence::add(Channel channel, double t_start, double duration, cplx envelope) {
  add(Segment{channel, t_start, duration, envelope});
}

void PulseSequence::set_total_time(double t) {
  if (!std::isfinite(t) || t < 0.0) throw InvalidArgument("total_time must be finite and non-negative");
  double last = 0.0;
  for (const auto& s : segments_) last = std::max(last, s.t_end());
  total_time_ = std::max(t, last);
}

cplx PulseSequence::envelope_at(Channel channel, double t) const {
  cplx v = 0.0;
  for (const auto& s : segments_) {
    if (s.channel == channel && s.duration > 0.0 && t >= s.t_start && t < s.t_end()) v += s.envelope;
  }
  return v;
}

TimeDependentProblem compile(const PulseSequence& seq, const PhysicalParams& params, const SpaceDims& dims,
                             std::optional<QState> initial, const CompileOptions& options) {
  params.validate();
  if (initial && !(initial->dims() == dims)) throw DimensionError("compile: initial state dims mismatch");

  std::vector<double> times{0.0, seq.total_time()};
  for (const auto& s : seq.segments()) {
    times.push_back(s.t_start);
    times.push_back(s.t_end());
  }
  std::sort(times.begin(), times.end());
  std::vector<double> bp;
  for (double t : times) {
    if (bp.empty() || t - bp.back() > kTimeEps) bp.push_back(t);
  }

  const Pieces pieces = make_pieces(params, dims, options.cancellation);
  TimeDependentProblem prob{dims, {}, {}, {}, collapse_operators(params, dims, options.collapse_flags),
                            std::move(initial), 0.0};
  prob.rate_scale = rate_scale(prob.collapses, params.kappa_b);
  prob.breakpoints = bp;
  if (prob.breakpoints.size() == 1) prob.breakpoints.push_back(0.0);

  for (std::size_t k = 0; k + 1 < bp.size(); ++k) {
    const double mid = 0.5 * (bp[k] + bp[k + 1]);
    std::vector<cplx> env(kChannelCount, 0.0);
    for (int c = 0; c < kChannelCount; ++c) {
      if (c == idx(Channel::memory_displacement)) continue;
      env[c] = seq.envelope_at(static_cast<Channel>(c), mid);
    }
    const cplx s2 = env[idx(Channel::two_photon_pump)];
    const cplx sl = env[idx(Channel::longitudinal_pump)];
    if (s2 != cplx(0.0) && sl != cplx(0.0) && !options.allow_pump_overlap) {
      std::ostringstream os;
      os << "two-photon and longitudinal pumps overlap in [" << bp[k] << ", " << bp[k + 1] << "] s";
      throw InvalidArgument(os.str());
    }
    for (Channel c : {Channel::two_photon_pump, Channel::longitudinal_pump, Channel::reset_pump}) {
      if (std::abs(env[idx(c)]) > kPumpScaleWarn) {
        warn(channel_name(c) + " scale beyond the small-amplitude expansion range");
      }
    }
    const cplx eps_d = env[idx(Channel::buffer_drive)];
    const cplx eps_z = env[idx(Channel::memory_drive)];
    if (s2 != cplx(0.0) && eps_d != cplx(0.0)) {
      const double amp = std::sqrt(std::abs(eps_d / (std::abs(s2) * std::abs(params.g2))));
      if (min_levels_for(amp) > dims.n_mem()) {
        std::ostringstream os;
        os << "memory truncation " << dims.n_mem() << " below the comfort rule for |alpha| = " << amp;
        warn(os.str());
      }
    }

    QOperator h = pieces.static_part;
    if (s2 != cplx(0.0)) {
      // A complex pump scale rotates g2; keep the Hamiltonian Hermitian.
      const QOperator& p = pieces.pump;
      if (s2.imag() == 0.0) {
        h += s2.real() * p;
      } else {
        auto [a, b] = mode_operators(dims);
        const QOperator x = a * a * b.adjoint();
        h += std::conj(s2 * params.g2) * x + (s2 * params.g2) * x.adjoint();
      }
    }
    if (eps_d != cplx(0.0)) h -= std::conj(eps_d) * pieces.b + eps_d * pieces.b.adjoint();
    if (eps_z != cplx(0.0)) h += eps_z * pieces.a.adjoint() + std::conj(eps_z) * pieces.a;
    if (sl != cplx(0.0)) h += sl.real() * pieces.longitudinal;
    const cplx sr = env[idx(Channel::reset_pump)];
    if (sr != cplx(0.0)) h += sr.real() * pieces.reset;
    prob.intervals.push_back({bp[k], bp[k + 1], std::move(h), std::move(env)});
  }

  for (const auto& s : seq.segments()) {
    if (s.channel != Channel::memory_displacement) continue;
    prob.kicks.push_back({s.t_start, s.envelope,
                          embed(displacement_matrix(s.envelope, dims.n_mem()), Mode::memory, dims).matrix()});
  }
  return prob;
}

TimeDependentProblem constant_problem(const QOperator& hamiltonian, std::vector<CollapseOperator> collapses,
                                      QState initial, double duration) {
  if (!(duration >= 0.0)) throw InvalidArgument("constant_problem: negative duration");
  const SpaceDims dims = hamiltonian.dims();
  TimeDependentProblem prob{dims, {0.0, duration}, {}, {}, std::move(collapses), std::move(initial), 0.0};
  prob.rate_scale = rate_scale(prob.collapses, 1.0);
  if (duration > 0.0) prob.intervals.push_back({0.0, duration, hamiltonian, std::vector<cplx>(kChannelCount, 0.0)});
  return prob;
}

// ---- builders ----------------------------------------------------------------------

PulseSequence build_cat_prep(cplx alpha, double dT, const PhysicalParams& params) {
  if (!(dT > 0.0)) throw InvalidArgument("build_cat_prep: dT must be positive");
  PulseSequence seq;
  seq.add(Channel::two_photon_pump, 0.0, dT, 1.0);
  seq.add(Channel::buffer_drive, 0.0, dT, buffer_drive_for(alpha, params.g2));
  return seq;
}

double zeno_gate_duration(cplx alpha, cplx eps_Z, double angle) {
  if (std::abs(alpha) == 0.0) throw InvalidArgument("build_zeno_gate: alpha must be nonzero");
  if (std::abs(eps_Z) == 0.0) throw InvalidArgument("build_zeno_gate: eps_Z must be nonzero");
  return std::abs(angle) / (4.0 * std::abs(alpha) * std::abs(eps_Z));
}

PulseSequence build_zeno_gate(cplx alpha, cplx eps_Z, double angle, const PhysicalParams& params) {
  const double T = zeno_gate_duration(alpha, eps_Z, angle);
  // H_Z = eps_Z a^dag + h.c. with eps_Z parallel to alpha displaces the field
  // at right angles to alpha, which is the direction that rotates the qubit.
  const double sign = angle < 0.0 ? -1.0 : 1.0;
  const cplx drive = sign * std::abs(eps_Z) * std::polar(1.0, std::arg(alpha));
  PulseSequence seq;
  seq.add(Channel::two_photon_pump, 0.0, T, 1.0);
  seq.add(Channel::buffer_drive, 0.0, T, buffer_drive_for(alpha, params.g2));
  seq.add(Channel::memory_drive, 0.0, T, drive);
  return seq;
}

double holonomic_readout_time(const HolonomicTimings& t) {
  return t.stabilize + t.zeno + t.deflate + t.inflate + t.ringdown;
}

double holonomic_zeno_drive(double alpha1, const HolonomicTimings& timings) {
  return -(std::numbers::pi / 2.0) / (4.0 * alpha1 * timings.zeno);
}

PulseSequence build_holonomic_tomography(cplx lambda, double alpha1, double alpha2, const HolonomicTimings& t,
                                         const PhysicalParams& params) {
  if (!(alpha1 > 0.0) || !(alpha2 > 0.0)) throw InvalidArgument("holonomic tomography: alpha1, alpha2 must be positive");
  for (double d : {t.stabilize, t.zeno, t.deflate, t.inflate, t.ringdown, t.readout}) {
    if (!(d > 0.0)) throw InvalidArgument("holonomic tomography: all timings must be positive");
  }
  const double conf_time = 2.0 / params.kappa_b;  // 1/kappa_conf in the underdamped regime
  if (t.stabilize < conf_time || t.deflate < conf_time || t.inflate < conf_time) {
    warn("holonomic tomography: mapping steps shorter than 1/kappa_conf are not adiabatic");
  }
  const cplx g2c = std::conj(params.g2);
  PulseSequence seq;
  double now = 0.0;
  seq.displace(now, -lambda);
  seq.add(Channel::two_photon_pump, now, t.stabilize + t.zeno + t.deflate + t.inflate, 1.0);
  seq.add(Channel::buffer_drive, now, t.stabilize + t.zeno, g2c * alpha1 * alpha1);
  now += t.stabilize;
  seq.add(Channel::memory_drive, now, t.zeno, holonomic_zeno_drive(alpha1, t));
  now += t.zeno + t.deflate;
  seq.add(Channel::buffer_drive, now, t.inflate, -g2c * alpha2 * alpha2);
  now += t.inflate + t.ringdown;
  seq.displace(now, kI * alpha2);
  seq.add(Channel::longitudinal_pump, now, t.readout, 1.0);
  return seq;
}

double bitflip_readout_time(double stabilize_time, const BitflipTimings& timings) {
  return stabilize_time + timings.ramp + timings.ringdown;
}

PulseSequence build_bitflip_probe(double alpha, double alpha_prime, double stabilize_time,
                                  const PhysicalParams& params, const BitflipTimings& timings) {
  if (!(alpha > 0.0) || !(alpha_prime > 0.0)) throw InvalidArgument("bit-flip probe: amplitudes must be positive");
  if (!(stabilize_time >= 0.0) || !(timings.ramp > 0.0) || !(timings.ringdown >= 0.0) || !(timings.readout > 0.0)) {
    throw InvalidArgument("bit-flip probe: invalid timing");
  }
  PulseSequence seq;
  seq.displace(0.0, alpha);
  seq.add(Channel::two_photon_pump, 0.0, stabilize_time + timings.ramp, 1.0);
  seq.add(Channel::buffer_drive, 0.0, stabilize_time, buffer_drive_for(alpha, params.g2));
  constexpr int kRampSteps = 8;
  const double dt = timings.ramp / kRampSteps;
  for (int k = 1; k <= kRampSteps; ++k) {
    const double amp = alpha + (alpha_prime - alpha) * k / kRampSteps;
    seq.add(Channel::buffer_drive, stabilize_time + (k - 1) * dt, dt, buffer_drive_for(amp, params.g2));
  }
  const double t_read = bitflip_readout_time(stabilize_time, timings);
  seq.displace(t_read, alpha_prime);
  seq.add(Channel::longitudinal_pump, t_read, timings.readout, 1.0);
  return seq;
}

PulseSequence build_deflation_probe(cplx alpha, double dT, double readout) {
  if (!(dT >= 0.0) || !(readout >= 0.0)) throw InvalidArgument("deflation probe: invalid timing");
  PulseSequence seq;
  seq.displace(0.0, alpha);
  seq.add(Channel::two_photon_pump, 0.0, dT, 1.0);
  if (readout > 0.0) seq.add(Channel::longitudinal_pump, dT, readout, 1.0);
  return seq;
}

PulseSequence build_reset(double duration, double scale) {
  if (!(duration > 0.0)) throw InvalidArgument("build_reset: duration must be positive");
  PulseSequence seq;
  seq.add(Channel::reset_pump, 0.0, duration, scale);
  return seq;
}

}  // namespace catq
