#pragma once

// Master-equation integration, Heisenberg-picture propagation, Liouvillian
// construction, spectra and steady states.

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "catq/hilbert.hpp"
#include "catq/model.hpp"
#include "catq/pulse.hpp"

namespace catq {

/// Sparse pieces of one constant-generator interval:
///   d rho/dt = G rho + rho G^dag + sum_k L_k rho L_k^dag,
///   G = -i H - 1/2 sum_k L_k^dag L_k.
struct LindbladGenerator {
  SparseXc G;
  std::vector<SparseXc> L;

  LindbladGenerator(const QOperator& hamiltonian, const std::vector<CollapseOperator>& collapses);

  /// Assumes rho Hermitian (exact for physical states).
  MatrixXc apply(const MatrixXc& rho) const;
  /// Heisenberg-picture generator for Hermitian observables.
  MatrixXc apply_adjoint(const MatrixXc& op) const;
  /// General form, valid for any square matrix.
  MatrixXc apply_general(const MatrixXc& rho) const;
};

struct EvolveOptions {
  double rtol = 1e-8;
  double atol = 1e-10;
  bool store_states = false;
  std::vector<std::pair<std::string, QOperator>> observables;
  double trace_tolerance = 1e-6;
  double leakage_error = 1e-4;
  double leakage_warn = 1e-6;
  bool check_leakage = true;
  /// Called at every output time with the (post-kick) density matrix.
  std::function<void(double, const MatrixXc&)> observer;
};

struct EvolutionResult {
  std::vector<double> times;
  std::vector<QState> states;
  std::vector<std::string> names;
  std::vector<std::vector<cplx>> values;  // values[k][i]: observable k at times[i]
  MatrixXc final_density;  // state at the last requested output time

  const std::vector<cplx>& series(const std::string& name) const;
};

/// Output times must be non-decreasing and lie in [0, total_time]. Kicks at a
/// time t are applied before the output at t.
EvolutionResult evolve(const TimeDependentProblem& problem, const std::vector<double>& times,
                       const EvolveOptions& options = {});

/// Heisenberg-picture image O_0 with Tr(O rho(t_final)) = Tr(O_0 rho(0)) for
/// every initial rho; kicks at times <= t_final are included.
MatrixXc evolve_adjoint(const TimeDependentProblem& problem, const MatrixXc& observable, double t_final,
                        const EvolveOptions& options = {});

/// Tr(O rho).
cplx trace_product(const MatrixXc& op, const MatrixXc& rho);

// ---- Liouvillian -----------------------------------------------------------------

struct LiouvillianOptions {
  int max_dim = 60;  // cap on the Hilbert-space dimension d (matrix is d^2 x d^2)
};

/// Row-major vectorisation: vec(rho)[i * d + j] = rho(i, j), so
///   L = G (x) 1 + 1 (x) conj(G) + sum_k L_k (x) conj(L_k).
struct Liouvillian {
  SpaceDims dims;
  SparseXc matrix;
  double rate_scale;
};

Liouvillian build_liouvillian(const QOperator& hamiltonian, const std::vector<CollapseOperator>& collapses,
                              const LiouvillianOptions& options = {});

VectorXc vectorize(const MatrixXc& rho);
MatrixXc unvectorize(const VectorXc& v, int d);

struct SpectralReport {
  cplx lambda_min;                 // nonzero eigenvalue of smallest |Re|
  int steady_dimension;            // number of eigenvalues classified as zero
  std::vector<cplx> eigenvalues;   // full spectrum, sorted by descending real part
  std::size_t largest_block;       // biggest diagonal block diagonalised
};

/// Eigenvalues with |lambda| < zero_tol * rate_scale count as steady.
SpectralReport spectral_gap(const Liouvillian& L, double zero_tol = 1e-9);

/// (kappa_b / 2) Re(1 - sqrt(1 - 32 g2^2 / kappa_b^2)), i.e. -2 Re(lambda_min).
double alpha0_confinement_closed_form(double g2, double kappa_b);

/// lambda_min of the alpha = 0 two-photon model from the two-level reduced
/// blocks {|0,0>,|1,0>} and {|2,0>,|0,1>}.
cplx alpha0_reduced_gap(double g2, double kappa_b);

struct SteadyStateResult {
  int dimension = 0;
  std::optional<QState> state;  // set when the kernel is one-dimensional
  std::vector<MatrixXc> basis;  // Hilbert-Schmidt orthonormal kernel basis
};

SteadyStateResult steady_state(const Liouvillian& L, double zero_tol = 1e-9);

}  // namespace catq
