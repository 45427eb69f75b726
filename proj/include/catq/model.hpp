#pragma once

// Parameter sets, pump-amplitude to coupling-rate formulas and the
// Hamiltonian / dissipator builders of the memory-buffer model.
// Internal rates are angular (rad/s); circuit energies are in Hz.

#include <string>
#include <vector>

#include "catq/hilbert.hpp"
#include "catq/units.hpp"

namespace catq {

struct PhysicalParams {
  cplx g2{hz_to_rad(0.763e6), 0.0};
  double kappa_b = hz_to_rad(2.6e6);
  double kappa_a = hz_to_rad(9.3e3);
  double n_th_mem = 0.10;
  double n_th_buf = 0.011;
  double delta_mem = 0.0;
  double delta_buf = 0.0;
  double g_l = hz_to_rad(100e3);
  double g_sp = hz_to_rad(100e3) * 0.5 * (0.29 / 0.06) * (0.29 / 0.06);
  double g_lin = 0.0;        // residual linear buffer drive when cancellation is not exact
  double g_reset = 0.0;      // memory-buffer beam-splitter rate of the reset pump
  double buffer_kerr = 0.0;  // optional self-Kerr K of the buffer, H += (K/2) b^dag^2 b^2
  double eta_het = 1.0;

  /// Throws InvalidArgument naming the offending field.
  void validate() const;
};

struct CircuitParams {
  double E_J = 12.03e9;
  double dE_J = 0.47e9;
  double phi_a = 0.06;
  double phi_b = 0.29;
  double omega_a0 = 5.26e9;
  double omega_b0 = 7.70e9;
  double E_L = 42.76e9;  // stored, not used by any formula

  void validate() const;
};

struct DriveSpec {
  cplx eps_d{0.0, 0.0};
  cplx eps_Z{0.0, 0.0};
};

enum class PumpKind { two_photon, longitudinal, reset };

/// Rates produced by one pump; fields not touched by the pump kind stay 0.
struct CouplingRates {
  double g2 = 0.0;
  double g_lin = 0.0;
  double g_l = 0.0;
  double g_sp = 0.0;
  double g_reset = 0.0;
  double kappa_a_reset = 0.0;
};

/// kappa_b (rad/s) is only needed for the reset pump.
CouplingRates coupling_rates(const CircuitParams& circuit, PumpKind kind, double eps_p, double kappa_b = 0.0);

struct SaddleFrequencies {
  double omega_a_plus;
  double omega_a_minus;
  double omega_b_plus;
  double omega_b_minus;
};

SaddleFrequencies saddle_frequencies(const CircuitParams& circuit);

/// Second-order buffer frequency shift (Hz) at flux bias (phi_sigma, phi_delta).
double flux_shift(const CircuitParams& circuit, double phi_sigma, double phi_delta);

/// alpha^2 = eps_d / conj(g2).
cplx alpha_squared(cplx eps_d, cplx g2);
/// Buffer drive that stabilises the given alpha.
cplx buffer_drive_for(cplx alpha, cplx g2);

QOperator hamiltonian_two_photon(const PhysicalParams& params, const DriveSpec& drive, const SpaceDims& dims);

enum class Cancellation { exact, residual };

QOperator hamiltonian_longitudinal(const PhysicalParams& params, const SpaceDims& dims,
                                   Cancellation cancellation = Cancellation::exact);

/// Beam-splitter interaction g_reset (a b^dag + a^dag b).
QOperator hamiltonian_reset(const PhysicalParams& params, const SpaceDims& dims);

struct CollapseFlags {
  bool memory_loss = true;
  bool memory_thermal = true;
  bool buffer_loss = true;
  bool buffer_thermal = true;
  bool reset = false;  // effective memory loss at 4 g_reset^2 / kappa_b
};

struct CollapseOperator {
  std::string name;
  double rate;   // rad/s
  QOperator op;  // bare operator; the dissipator uses sqrt(rate) * op

  QOperator scaled() const { return std::sqrt(rate) * op; }
};

/// Zero-rate channels are omitted.
std::vector<CollapseOperator> collapse_operators(const PhysicalParams& params, const SpaceDims& dims,
                                                 const CollapseFlags& flags = {});

/// Largest collapse rate, or kappa_b when none; sets the scale of "zero" in spectra.
double rate_scale(const std::vector<CollapseOperator>& collapses, double fallback);

}  // namespace catq
