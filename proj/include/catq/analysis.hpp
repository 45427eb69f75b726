#pragma once

// Phase-space maps, cat-qubit observables and curve fitting.

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "catq/hilbert.hpp"

namespace catq {

// ---- Wigner function --------------------------------------------------------------

struct GridSpec {
  double re_min = -3.0;
  double re_max = 3.0;
  int n_re = 61;
  double im_min = -3.0;
  double im_max = 3.0;
  int n_im = 61;

  double re_at(int i) const { return n_re == 1 ? re_min : re_min + (re_max - re_min) * i / (n_re - 1); }
  double im_at(int j) const { return n_im == 1 ? im_min : im_min + (im_max - im_min) * j / (n_im - 1); }
  double cell_area() const;
};

struct WignerGrid {
  GridSpec spec;
  Eigen::MatrixXd values;  // values(i, j) at re_at(i) + i im_at(j)

  /// Riemann sum of W over the grid, ~Tr(rho) for grids covering the state.
  double integral() const;
};

/// W(lambda) = (2/pi) Tr(D_lambda P D_-lambda rho) for a single-mode
/// (memory-reduced) density matrix.
double wigner_at(const MatrixXc& rho_mem, cplx lambda);
WignerGrid wigner(const MatrixXc& rho_mem, const GridSpec& spec);

// ---- cat-qubit observables ----------------------------------------------------------

struct CatObservables {
  double X;
  double Z;
  double parity;
};

/// sign of the quadrature along alpha, (a e^{-i arg alpha} + h.c.)/sqrt(2),
/// on `levels` Fock levels. Exactly the difference of the two half-space projectors.
MatrixXc half_space_sign(cplx alpha, int levels);

CatObservables cat_observables(const MatrixXc& rho_mem, cplx alpha);

// ---- fit results ------------------------------------------------------------------------

struct FitResult {
  std::string model;
  std::vector<std::string> names;
  Eigen::VectorXd values;
  Eigen::VectorXd sigmas;
  double residual_norm = 0.0;
  bool converged = false;
  bool at_bound = false;
  std::string message;

  double value(const std::string& name) const;
  double sigma(const std::string& name) const;
};

struct Series {
  std::vector<double> x;
  std::vector<double> y;
};

// ---- Wigner cut models ---------------------------------------------------------------------

enum class CutKind { mixture, cat, thermal };

/// Parameters of the analytic Wigner cuts:
///   mixture (real axis)      A (exp(-2 (B x - alpha)^2) + exp(-2 (B x + alpha)^2)) + offset
///   cat (imaginary axis)     C exp(-2 (B x)^2) (exp(-2 alpha^2) + cos(4 alpha B x)) + offset
///   thermal (real axis)      D exp(-2 (B x)^2 / (2 n_th + 1)) + offset
struct CutParams {
  double amplitude = 1.0;  // A, C or D
  double B = 1.0;
  double alpha = 0.0;
  double n_th = 0.0;
  double offset = 0.0;
};

std::function<double(double)> wigner_cut_model(CutKind kind, const CutParams& params);

/// Theoretical cut parameters of the ideal states (B = 1, no offset).
CutParams ideal_cut_params(CutKind kind, double alpha, double n_th = 0.0);

struct CutGuess {
  double A = 0.3;
  double C = 0.6;
  double D = 0.6;
  double B = 1.0;
  double alpha = 2.0;
  double n_th = 0.05;
};

/// Joint fit of the three cuts with shared B and alpha. Parameters
/// A, C, D, B, alpha, n_th, offset_mixture, offset_cat, offset_thermal.
FitResult fit_wigner_cuts(const Series& mixture, const Series& cat, const Series& thermal, const CutGuess& guess = {});

// ---- decays and oscillations -----------------------------------------------------------------

/// y = y0 + A exp(-t / T); parameters y0, A, T. A fixed offset keeps y0 at
/// the given value (sigma 0), e.g. 0 for decays to a symmetric steady state.
FitResult fit_exponential(const Series& data, std::optional<double> fixed_offset = std::nullopt);
/// y = y0 + A exp(-t / T) cos(omega t + phi); parameters y0, A, T, omega, phi.
FitResult fit_damped_cosine(const Series& data);

// ---- telegraph statistics ------------------------------------------------------------------

struct TelegraphTrace {
  std::vector<double> times;  // uniformly spaced
  std::vector<int> values;    // +1 / -1
  double threshold = 0.0;
};

struct DwellEstimate {
  double T_X;
  double ci_low;
  double ci_high;
  int switches;
  bool lower_bound_only;  // fewer than 20 switches: T_X is a 95% lower bound
};

/// Maximum-likelihood switching time of a symmetric telegraph trace, with the
/// convention <Z(0) Z(t)> = exp(-t / T_X) (mean dwell 2 T_X). Censored first
/// and last dwells contribute exposure but no event. 95% CI from the Fisher
/// information on the log scale.
DwellEstimate dwell_estimator(const TelegraphTrace& trace, double confidence = 0.95);
/// Pooled estimate over independent traces sharing one sampling interval.
DwellEstimate dwell_estimator(const std::vector<TelegraphTrace>& traces, double confidence = 0.95);

/// Sample autocorrelation <Z(t) Z(t + k dt)> for lags k = 0 .. max_lag.
Series autocorrelation(const TelegraphTrace& trace, int max_lag);

/// Trace length needed to estimate T_X, `factor` switching times.
double required_trace_duration(double T_X, double factor = 100.0);

// ---- readout ----------------------------------------------------------------------------------

/// (P(A | A) + P(B | B)) / 2 with the best threshold along the axis joining
/// the two sample means.
double readout_fidelity(const std::vector<cplx>& samples_a, const std::vector<cplx>& samples_b);

}  // namespace catq
