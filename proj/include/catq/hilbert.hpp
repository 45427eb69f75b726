#pragma once

// Truncated two-mode Fock space: memory (a) tensor buffer (b).
// Basis index of |m, n> is m * n_buf + n.

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <cstddef>
#include <utility>

#include "catq/units.hpp"

namespace catq {

using MatrixXc = Eigen::MatrixXcd;
using VectorXc = Eigen::VectorXcd;
using SparseXc = Eigen::SparseMatrix<cplx>;

enum class Mode { memory, buffer };
enum class Parity { even, odd };

inline constexpr std::size_t kDefaultDimensionCap = 512;

class SpaceDims {
 public:
  SpaceDims(int n_mem, int n_buf, std::size_t cap = kDefaultDimensionCap);

  int n_mem() const { return n_mem_; }
  int n_buf() const { return n_buf_; }
  int levels(Mode mode) const { return mode == Mode::memory ? n_mem_ : n_buf_; }
  int total() const { return n_mem_ * n_buf_; }
  int index(int m, int n) const { return m * n_buf_ + n; }

  friend bool operator==(const SpaceDims&, const SpaceDims&) = default;

 private:
  int n_mem_;
  int n_buf_;
};

/// Dense operator on the truncated two-mode space.
class QOperator {
 public:
  explicit QOperator(const SpaceDims& dims);  // zero operator
  QOperator(const SpaceDims& dims, MatrixXc matrix);

  static QOperator identity(const SpaceDims& dims);

  const SpaceDims& dims() const { return dims_; }
  const MatrixXc& matrix() const { return matrix_; }

  QOperator adjoint() const;
  bool is_hermitian(double tol) const;
  SparseXc sparse(double drop_below = 0.0) const;

  QOperator& operator+=(const QOperator& rhs);
  QOperator& operator-=(const QOperator& rhs);
  QOperator& operator*=(cplx s);

  friend QOperator operator+(QOperator lhs, const QOperator& rhs) { return lhs += rhs; }
  friend QOperator operator-(QOperator lhs, const QOperator& rhs) { return lhs -= rhs; }
  friend QOperator operator*(QOperator lhs, cplx s) { return lhs *= s; }
  friend QOperator operator*(cplx s, QOperator rhs) { return rhs *= s; }
  friend QOperator operator*(double s, QOperator rhs) { return rhs *= cplx(s); }
  friend QOperator operator*(const QOperator& lhs, const QOperator& rhs);

 private:
  SpaceDims dims_;
  MatrixXc matrix_;
};

QOperator commutator(const QOperator& x, const QOperator& y);

/// Ket or density matrix on the two-mode space. Construction validates the
/// normalisation, hermiticity and positivity invariants.
class QState {
 public:
  enum class Kind { ket, density };

  static QState from_ket(const SpaceDims& dims, VectorXc ket);
  static QState from_density(const SpaceDims& dims, MatrixXc rho);
  /// Skips validation; used by integrators for intermediate states.
  static QState density_unchecked(const SpaceDims& dims, MatrixXc rho);

  const SpaceDims& dims() const { return dims_; }
  Kind kind() const { return kind_; }
  bool is_ket() const { return kind_ == Kind::ket; }
  const VectorXc& ket() const;
  const MatrixXc& density() const;

  MatrixXc to_density_matrix() const;
  QState to_density() const;
  void validate() const;

 private:
  QState(const SpaceDims& dims, Kind kind) : dims_(dims), kind_(kind) {}

  SpaceDims dims_;
  Kind kind_;
  VectorXc ket_;
  MatrixXc rho_;
};

// ---- single-mode building blocks -------------------------------------------

MatrixXc destroy_matrix(int levels);
/// e^{-|alpha|^2/2} alpha^n / sqrt(n!) for n < levels (not renormalised).
VectorXc coherent_amplitudes(cplx alpha, int levels);
/// Displacement exp(lambda a^dag - conj(lambda) a) computed in a padded
/// space and cropped to `levels`.
MatrixXc displacement_matrix(cplx lambda, int levels);
/// First `cols` columns of the `rows`-level displacement matrix.
MatrixXc displacement_block(cplx lambda, int rows, int cols);
/// Smallest Fock cutoff satisfying |alpha|^2 + 6|alpha| + 5 <= n.
int min_levels_for(double amplitude);
/// Number of low Fock levels n whose displacement by `amplitude` still meets
/// the truncation rule, treating |n> as having amplitude sqrt(n). At least 1.
int comfortable_block(int levels, double amplitude);

/// Lift a single-mode matrix onto the two-mode space.
QOperator embed(const MatrixXc& single_mode, Mode mode, const SpaceDims& dims);

// ---- operations ----------------------------------------------------------------

struct ModeOperators {
  QOperator a;
  QOperator b;
};

ModeOperators mode_operators(const SpaceDims& dims);
QOperator number_operator(const SpaceDims& dims, Mode mode);
QOperator parity_operator(const SpaceDims& dims, Mode mode);
QOperator displacement_operator(cplx lambda, const SpaceDims& dims, Mode mode);

QState fock_state(int n_mem, int n_buf, const SpaceDims& dims);
QState coherent_state(cplx alpha, const SpaceDims& dims, Mode mode);
QState cat_state(cplx alpha, Parity parity, const SpaceDims& dims);
/// Memory ket times buffer ket.
QState product_state(const VectorXc& mem, const VectorXc& buf, const SpaceDims& dims);
/// Memory density matrix times buffer vacuum.
QState with_buffer_vacuum(const MatrixXc& rho_mem, const SpaceDims& dims);

cplx expectation(const QOperator& op, const QState& state);
/// <psi|rho|psi> for a reference ket.
double fidelity(const QState& reference_ket, const QState& state);

MatrixXc reduce_to_memory(const QState& state);
MatrixXc reduce_to_buffer(const QState& state);
MatrixXc reduce_to_memory(const MatrixXc& rho, const SpaceDims& dims);
MatrixXc reduce_to_buffer(const MatrixXc& rho, const SpaceDims& dims);

/// Population in the highest `count` Fock levels of one mode.
double top_population(const MatrixXc& rho, const SpaceDims& dims, Mode mode, int count = 2);

}  // namespace catq
