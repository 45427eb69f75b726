#include "catq/semiclassical.hpp"

#include <Eigen/Eigenvalues>
#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

#include "catq/errors.hpp"
#include "catq/lindblad.hpp"

namespace catq {
namespace odeint = boost::numeric::odeint;

namespace {

constexpr double kBlowUp = 1e3;

// Real 2x2 block of z -> A z + B conj(z) in (Re z, Im z) coordinates.
Eigen::Matrix2d real_block(cplx A, cplx B) {
  const cplx s = A + B;
  const cplx t = A - B;
  Eigen::Matrix2d m;
  m << s.real(), -t.imag(), s.imag(), t.real();
  return m;
}

void check_finite(const SemiclassicalState& s, const char* where) {
  for (cplx z : {s.a, s.b}) {
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) {
      throw InvalidArgument(std::string(where) + ": non-finite amplitude");
    }
  }
}

}  // namespace

SemiclassicalState flow_rhs(const SemiclassicalState& s, const FlowParams& p) {
  const cplx da = -2.0 * kI * p.g2 * std::conj(s.a) * s.b - kI * p.eps_Z;
  const cplx db = -kI * std::conj(p.g2) * (s.a * s.a - p.alpha * p.alpha) - 0.5 * p.kappa_b * s.b;
  return {da, db};
}

Eigen::Matrix4d flow_jacobian(const SemiclassicalState& s, const FlowParams& p) {
  // Wirtinger derivatives: d(da)/d(a*) = -2i g2 b, d(da)/db = -2i g2 a*,
  // d(db)/da = -2i g2* a, d(db)/db = -kappa_b/2; the others vanish.
  Eigen::Matrix4d j = Eigen::Matrix4d::Zero();
  j.block<2, 2>(0, 0) = real_block(0.0, -2.0 * kI * p.g2 * s.b);
  j.block<2, 2>(0, 2) = real_block(-2.0 * kI * p.g2 * std::conj(s.a), 0.0);
  j.block<2, 2>(2, 0) = real_block(-2.0 * kI * std::conj(p.g2) * s.a, 0.0);
  j.block<2, 2>(2, 2) = real_block(-0.5 * p.kappa_b, 0.0);
  return j;
}

std::vector<FlowSample> integrate_flow(const SemiclassicalState& initial, const FlowParams& p, double t0, double t1,
                                       int samples) {
  check_finite(initial, "integrate_flow");
  if (!(t1 >= t0) || samples < 2) throw InvalidArgument("integrate_flow: need t1 >= t0 and at least two samples");
  using State = std::array<double, 4>;
  auto rhs = [&](const State& x, State& dx, double) {
    const SemiclassicalState s{{x[0], x[1]}, {x[2], x[3]}};
    if (std::abs(s.a) > kBlowUp || std::abs(s.b) > kBlowUp) {
      throw NumericalError("integrate_flow: amplitude above 1e3, the flow diverges");
    }
    const SemiclassicalState d = flow_rhs(s, p);
    dx = {d.a.real(), d.a.imag(), d.b.real(), d.b.imag()};
  };
  std::vector<double> grid(samples);
  for (int k = 0; k < samples; ++k) grid[k] = t0 + (t1 - t0) * k / (samples - 1);
  std::vector<FlowSample> out;
  out.reserve(samples);
  State x{initial.a.real(), initial.a.imag(), initial.b.real(), initial.b.imag()};
  if (t1 == t0) {
    for (double t : grid) out.push_back({t, initial});
    return out;
  }
  auto stepper = odeint::make_dense_output(1e-12, 1e-10, odeint::runge_kutta_dopri5<State>());
  const double dt0 = std::min((t1 - t0) / 100.0, 0.01 / std::max(p.kappa_b, 1.0));
  odeint::integrate_times(stepper, rhs, x, grid.begin(), grid.end(), dt0, [&](const State& s, double t) {
    out.push_back({t, {{s[0], s[1]}, {s[2], s[3]}}});
  });
  return out;
}

std::vector<SemiclassicalState> fixed_points(cplx g2, double kappa_b, cplx alpha) {
  if (!(kappa_b > 0.0)) throw InvalidArgument("fixed_points: kappa_b must be positive");
  return {{0.0, 2.0 * kI * std::conj(g2) * alpha * alpha / kappa_b}, {alpha, 0.0}, {-alpha, 0.0}};
}

StabilityReport stability_at(const SemiclassicalState& point, cplx g2, double kappa_b, cplx alpha) {
  const auto fps = fixed_points(g2, kappa_b, alpha);
  const double scale = 1.0 + std::norm(alpha);
  const bool known = std::any_of(fps.begin(), fps.end(), [&](const SemiclassicalState& f) {
    return std::abs(f.a - point.a) + std::abs(f.b - point.b) < 1e-9 * scale;
  });
  if (!known) throw InvalidArgument("stability_at: point is not a fixed point of the undriven flow");

  const FlowParams p{g2, kappa_b, alpha, 0.0};
  Eigen::EigenSolver<Eigen::Matrix4d> es(flow_jacobian(point, p), false);
  StabilityReport rep{point, {}, Stability::critical, 0.0};
  for (int k = 0; k < 4; ++k) rep.eigenvalues.push_back(es.eigenvalues()(k));
  std::sort(rep.eigenvalues.begin(), rep.eigenvalues.end(), [](cplx x, cplx y) {
    if (x.real() != y.real()) return x.real() > y.real();
    return x.imag() > y.imag();
  });
  const double max_re = rep.eigenvalues.front().real();
  // alpha = 0 leaves the memory block exactly zero: critical
  const double tol = 1e-12 * kappa_b;
  if (max_re > tol) {
    rep.classification = Stability::unstable;
  } else if (max_re < -tol) {
    rep.classification = Stability::stable;
    rep.kappa_conf = -2.0 * max_re;
  }
  return rep;
}

double kappa_conf_closed_form(double g2, double kappa_b, double alpha) {
  if (!(kappa_b > 0.0) || g2 < 0.0 || alpha < 0.0) {
    throw InvalidArgument("kappa_conf_closed_form: need kappa_b > 0 and g2, alpha >= 0");
  }
  if (alpha == 0.0) return alpha0_confinement_closed_form(g2, kappa_b);
  const double x = 8.0 * g2 * alpha / kappa_b;
  if (x >= 1.0) return 0.5 * kappa_b;
  return 0.5 * kappa_b * (1.0 - std::sqrt(1.0 - x * x));
}

BufferPointer buffer_pointer(cplx eps_Z, cplx alpha, cplx g2) {
  if (std::abs(alpha) == 0.0) throw InvalidArgument("buffer_pointer: alpha must be nonzero");
  if (std::abs(g2) == 0.0) throw InvalidArgument("buffer_pointer: g2 must be nonzero");
  const cplx b = eps_Z / (2.0 * std::conj(alpha) * g2);
  return {-b, b};
}

double drive_dephasing_rate(cplx eps_Z, cplx alpha, cplx g2, double kappa_b) {
  const auto bp = buffer_pointer(eps_Z, alpha, g2);
  return 0.5 * kappa_b * std::norm(bp.b_plus - bp.b_minus);
}

RatePredictors rate_predictors(cplx alpha, double kappa_a, cplx eps_Z, cplx g2, double kappa_b) {
  if (kappa_a < 0.0 || kappa_b < 0.0) throw InvalidArgument("rate_predictors: rates must be non-negative");
  RatePredictors r{};
  const double n = std::norm(alpha);
  r.gamma_z_kappa_a = 2.0 * kappa_a * n;
  r.omega_z = 4.0 * std::abs(alpha) * std::abs(eps_Z);
  r.gamma_z_drive = (n > 0.0 && std::abs(g2) > 0.0) ? drive_dephasing_rate(eps_Z, alpha, g2, kappa_b) : 0.0;
  const double total = r.gamma_z_kappa_a + r.gamma_z_drive;
  r.oscillation_quality = r.omega_z == 0.0 ? 0.0 : r.omega_z / total;
  // quality(e) = 4|alpha| e / (c + k e^2) peaks at e = sqrt(c / k)
  const double c = r.gamma_z_kappa_a;
  const double k = (n > 0.0 && std::abs(g2) > 0.0) ? kappa_b / (2.0 * n * std::norm(g2)) : 0.0;
  if (c > 0.0 && k > 0.0) {
    r.eps_z_optimal = std::sqrt(c / k);
    r.quality_optimal = 2.0 * std::abs(alpha) * r.eps_z_optimal / c;
  } else {
    r.eps_z_optimal = c > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    r.quality_optimal = std::numeric_limits<double>::infinity();
  }
  return r;
}

cplx longitudinal_response(int n_a, double g_l, double g_sp, double kappa_b) {
  if (n_a < 0) throw InvalidArgument("longitudinal_response: n_a must be non-negative");
  if (!(kappa_b > 0.0)) throw InvalidArgument("longitudinal_response: kappa_b must be positive");
  const double n = n_a;
  auto f = [&](cplx b) { return -kI * g_l * n - kI * g_sp * (2.0 * std::norm(b) + b * b) - 0.5 * kappa_b * b; };
  cplx b = -2.0 * kI * g_l * n / kappa_b;
  if (g_sp == 0.0 || n_a == 0) return b;

  auto scale = [&](cplx z) { return std::abs(g_l) * n + 0.5 * kappa_b * std::abs(z) + 3.0 * std::abs(g_sp) * std::norm(z); };
  double res = std::abs(f(b));
  for (int it = 0; it < 100; ++it) {
    if (res < 1e-12 * scale(b)) return b;
    const Eigen::Matrix2d j = real_block(-2.0 * kI * g_sp * (b + std::conj(b)) - 0.5 * kappa_b, -2.0 * kI * g_sp * b);
    const cplx fb = f(b);
    const Eigen::Vector2d step = j.fullPivLu().solve(Eigen::Vector2d(-fb.real(), -fb.imag()));
    double t = 1.0;
    cplx trial = b + t * cplx(step(0), step(1));
    double trial_res = std::abs(f(trial));
    for (int h = 0; h < 40 && !(trial_res < res); ++h) {
      t *= 0.5;
      trial = b + t * cplx(step(0), step(1));
      trial_res = std::abs(f(trial));
    }
    if (!(trial_res < res)) break;
    b = trial;
    res = trial_res;
  }
  if (res < 1e-12 * scale(b)) return b;
  std::ostringstream os;
  os << "longitudinal_response: Newton did not converge for n_a = " << n_a << " (residual " << res << ")";
  if (g_sp * g_l > 0.0) {
    os << "; with g_sp and g_l of equal sign no steady state exists beyond n_a = "
       << kappa_b * kappa_b / (16.0 * g_sp * g_l);
  }
  throw NumericalError(os.str());
}

}  // namespace catq
