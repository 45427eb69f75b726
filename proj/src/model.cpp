#include "catq/model.hpp"

#include <cmath>
#include <sstream>

#include "catq/errors.hpp"
#include "catq/warnings.hpp"

namespace catq {
namespace {

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw InvalidArgument(field + ": " + what);
}

bool finite(cplx z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

}  // namespace

void PhysicalParams::validate() const {
  require(finite(g2), "g2", "must be finite");
  require(std::isfinite(kappa_b) && kappa_b > 0.0, "kappa_b", "must be positive");
  require(std::isfinite(kappa_a) && kappa_a >= 0.0, "kappa_a", "must be non-negative");
  require(n_th_mem >= 0.0 && n_th_mem < 1.0, "n_th_mem", "must lie in [0, 1)");
  require(n_th_buf >= 0.0 && n_th_buf < 1.0, "n_th_buf", "must lie in [0, 1)");
  require(std::isfinite(delta_mem), "delta_mem", "must be finite");
  require(std::isfinite(delta_buf), "delta_buf", "must be finite");
  require(std::isfinite(g_l), "g_l", "must be finite");
  require(std::isfinite(g_sp), "g_sp", "must be finite");
  require(std::isfinite(g_lin), "g_lin", "must be finite");
  require(std::isfinite(g_reset), "g_reset", "must be finite");
  require(std::isfinite(buffer_kerr), "buffer_kerr", "must be finite");
  require(eta_het > 0.0 && eta_het <= 1.0, "eta_het", "must lie in (0, 1]");
}

void CircuitParams::validate() const {
  require(E_J > 0.0, "E_J", "must be positive");
  require(dE_J > 0.0, "dE_J", "must be positive");
  require(phi_a > 0.0 && phi_a < 1.0, "phi_a", "must lie in (0, 1)");
  require(phi_b > 0.0 && phi_b < 1.0, "phi_b", "must lie in (0, 1)");
  require(omega_a0 > 0.0, "omega_a0", "must be positive");
  require(omega_b0 > 0.0, "omega_b0", "must be positive");
  require(E_L > 0.0, "E_L", "must be positive");
}

CouplingRates coupling_rates(const CircuitParams& circuit, PumpKind kind, double eps_p, double kappa_b) {
  circuit.validate();
  if (!(eps_p >= 0.0 && eps_p <= 0.5)) {
    std::ostringstream os;
    os << "pump amplitude " << eps_p << " outside the expansion range [0, 0.5]";
    throw InvalidArgument(os.str());
  }
  if (eps_p > 0.3) {
    std::ostringstream os;
    os << "pump amplitude " << eps_p << " above 0.3; higher-order pump terms are not modelled";
    warn(os.str());
  }
  const double pa2 = circuit.phi_a * circuit.phi_a;
  const double pb = circuit.phi_b;
  CouplingRates r;
  switch (kind) {
    case PumpKind::two_photon:
      r.g2 = hz_to_rad(0.5 * circuit.E_J * eps_p * pa2 * pb);
      break;
    case PumpKind::longitudinal:
      r.g_lin = hz_to_rad(-circuit.E_J * eps_p * pb);
      r.g_l = hz_to_rad(circuit.E_J * eps_p * pa2 * pb);
      r.g_sp = 0.5 * (pb * pb / pa2) * r.g_l;
      break;
    case PumpKind::reset:
      if (!(kappa_b > 0.0)) throw InvalidArgument("coupling_rates: reset rate needs kappa_b > 0");
      r.g_reset = hz_to_rad(circuit.dE_J * eps_p * eps_p * circuit.phi_a * pb / 8.0);
      r.kappa_a_reset = 4.0 * r.g_reset * r.g_reset / kappa_b;
      break;
  }
  return r;
}

SaddleFrequencies saddle_frequencies(const CircuitParams& circuit) {
  circuit.validate();
  const double sa = 2.0 * circuit.dE_J * circuit.phi_a * circuit.phi_a;
  const double sb = 2.0 * circuit.dE_J * circuit.phi_b * circuit.phi_b;
  return {circuit.omega_a0 - sa, circuit.omega_a0 + sa, circuit.omega_b0 - sb, circuit.omega_b0 + sb};
}

double flux_shift(const CircuitParams& circuit, double phi_sigma, double phi_delta) {
  circuit.validate();
  const double pb2 = circuit.phi_b * circuit.phi_b;
  return 2.0 * pb2 *
         (circuit.E_J * std::cos(phi_sigma) * std::cos(phi_delta) -
          circuit.dE_J * std::sin(phi_sigma) * std::sin(phi_delta));
}

cplx alpha_squared(cplx eps_d, cplx g2) {
  if (g2 == cplx(0.0)) throw InvalidArgument("alpha_squared: g2 is zero");
  return eps_d / std::conj(g2);
}

cplx buffer_drive_for(cplx alpha, cplx g2) { return std::conj(g2) * alpha * alpha; }

QOperator hamiltonian_two_photon(const PhysicalParams& params, const DriveSpec& drive, const SpaceDims& dims) {
  if (params.g2 != cplx(0.0) && drive.eps_d != cplx(0.0)) {
    const double amp = std::sqrt(std::abs(alpha_squared(drive.eps_d, params.g2)));
    if (min_levels_for(amp) > dims.n_mem()) {
      std::ostringstream os;
      os << "memory truncation " << dims.n_mem() << " too small for |alpha| = " << amp << " (needs "
         << min_levels_for(amp) << ")";
      throw TruncationError(os.str());
    }
  }
  auto [a, b] = mode_operators(dims);
  const QOperator ad = a.adjoint();
  const QOperator bd = b.adjoint();
  QOperator h(dims);
  h += std::conj(params.g2) * (a * a * bd);
  h += params.g2 * (ad * ad * b);
  h -= std::conj(drive.eps_d) * b;
  h -= drive.eps_d * bd;
  h += drive.eps_Z * ad;
  h += std::conj(drive.eps_Z) * a;
  if (params.delta_mem != 0.0) h += params.delta_mem * (ad * a);
  if (params.delta_buf != 0.0) h += params.delta_buf * (bd * b);
  if (params.buffer_kerr != 0.0) h += 0.5 * params.buffer_kerr * (bd * bd * b * b);
  return h;
}

QOperator hamiltonian_longitudinal(const PhysicalParams& params, const SpaceDims& dims, Cancellation cancellation) {
  auto [a, b] = mode_operators(dims);
  const QOperator ad = a.adjoint();
  const QOperator bd = b.adjoint();
  const QOperator x = b + bd;
  QOperator h(dims);
  if (cancellation == Cancellation::residual) h += params.g_lin * x;
  h += params.g_l * (ad * a * x);
  h += params.g_sp * (bd * bd * b + bd * b * b);
  return h;
}

QOperator hamiltonian_reset(const PhysicalParams& params, const SpaceDims& dims) {
  auto [a, b] = mode_operators(dims);
  return params.g_reset * (a * b.adjoint() + a.adjoint() * b);
}

std::vector<CollapseOperator> collapse_operators(const PhysicalParams& params, const SpaceDims& dims,
                                                 const CollapseFlags& flags) {
  if (params.kappa_a < 0.0 || params.kappa_b < 0.0 || params.n_th_mem < 0.0 || params.n_th_buf < 0.0) {
    throw InvalidArgument("collapse_operators: negative rate or occupation");
  }
  auto [a, b] = mode_operators(dims);
  std::vector<CollapseOperator> out;
  auto add = [&](const char* name, double rate, const QOperator& op) {
    if (rate > 0.0) out.push_back({name, rate, op});
  };
  if (flags.memory_loss) add("memory_loss", params.kappa_a * (1.0 + params.n_th_mem), a);
  if (flags.memory_thermal) add("memory_thermal", params.kappa_a * params.n_th_mem, a.adjoint());
  if (flags.buffer_loss) add("buffer_loss", params.kappa_b * (1.0 + params.n_th_buf), b);
  if (flags.buffer_thermal) add("buffer_thermal", params.kappa_b * params.n_th_buf, b.adjoint());
  if (flags.reset) add("memory_reset", 4.0 * params.g_reset * params.g_reset / params.kappa_b, a);
  return out;
}

double rate_scale(const std::vector<CollapseOperator>& collapses, double fallback) {
  double s = 0.0;
  for (const auto& c : collapses) s = std::max(s, c.rate);
  return s > 0.0 ? s : fallback;
}

}  // namespace catq
