#pragma once

// Mean-field model of the memory-buffer pair: a = <a>, b = <b>.
//   da/dt = -2i g2 conj(a) b - i eps_Z
//   db/dt = -i conj(g2) (a^2 - alpha^2) - (kappa_b / 2) b
// Rates in rad/s, amplitudes dimensionless.

#include <Eigen/Dense>

#include <vector>

#include "catq/units.hpp"

namespace catq {

struct SemiclassicalState {
  cplx a{0.0, 0.0};
  cplx b{0.0, 0.0};
};

struct FlowParams {
  cplx g2;
  double kappa_b;
  cplx alpha;
  cplx eps_Z{0.0, 0.0};
};

SemiclassicalState flow_rhs(const SemiclassicalState& s, const FlowParams& p);

/// Real Jacobian of flow_rhs in the coordinates (Re a, Im a, Re b, Im b).
Eigen::Matrix4d flow_jacobian(const SemiclassicalState& s, const FlowParams& p);

struct FlowSample {
  double t;
  SemiclassicalState state;
};

/// Adaptive integration over [t0, t1], sampled at `samples` equally spaced
/// times (both ends included). |a| or |b| above 1e3 is a NumericalError.
std::vector<FlowSample> integrate_flow(const SemiclassicalState& initial, const FlowParams& p, double t0, double t1,
                                       int samples = 201);

/// (0, 2i conj(g2) alpha^2 / kappa_b), (alpha, 0), (-alpha, 0), for eps_Z = 0.
std::vector<SemiclassicalState> fixed_points(cplx g2, double kappa_b, cplx alpha);

enum class Stability { stable, unstable, critical };

struct StabilityReport {
  SemiclassicalState point;
  std::vector<cplx> eigenvalues;  // of the 4x4 real linearisation, descending real part
  Stability classification;
  double kappa_conf;  // -2 max Re(eigenvalue) for stable points, 0 otherwise
};

/// `point` must be one of fixed_points(g2, kappa_b, alpha). The spectrum is
/// invariant under the phase rotations that make g2 and alpha real, so no
/// gauge change is needed.
StabilityReport stability_at(const SemiclassicalState& point, cplx g2, double kappa_b, cplx alpha);

/// Overdamped (8|g2 alpha| < kappa_b): (kappa_b/2)(1 - sqrt(1 - (8 g2 alpha / kappa_b)^2));
/// underdamped: kappa_b / 2. alpha = 0 uses the Liouvillian closed form.
double kappa_conf_closed_form(double g2, double kappa_b, double alpha);

struct BufferPointer {
  cplx b_plus;
  cplx b_minus;
};

/// Steady buffer amplitude on the two branches: -/+ eps_Z / (2 conj(alpha) g2).
BufferPointer buffer_pointer(cplx eps_Z, cplx alpha, cplx g2);

/// (kappa_b / 2) |b_+ - b_-|^2.
double drive_dephasing_rate(cplx eps_Z, cplx alpha, cplx g2, double kappa_b);

struct RatePredictors {
  double gamma_z_kappa_a;      // 2 kappa_a |alpha|^2
  double gamma_z_drive;        // drive-induced dephasing at eps_Z
  double omega_z;              // 4 |alpha| |eps_Z|
  double oscillation_quality;  // omega_z / (gamma_z_kappa_a + gamma_z_drive)
  double eps_z_optimal;        // drive amplitude maximising the quality
  double quality_optimal;
};

RatePredictors rate_predictors(cplx alpha, double kappa_a, cplx eps_Z, cplx g2, double kappa_b);

/// Mean-field steady buffer amplitude for n_a memory photons under the
/// longitudinal interaction with buffer loss:
///   0 = -i g_l n_a - i g_sp (2|b|^2 + b^2) - (kappa_b / 2) b.
/// Damped Newton from the linear response -2i g_l n_a / kappa_b.
cplx longitudinal_response(int n_a, double g_l, double g_sp, double kappa_b);

}  // namespace catq
