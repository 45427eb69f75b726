#include "catq/hilbert.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <map>
#include <mutex>
#include <sstream>

#include "catq/errors.hpp"
#include "catq/warnings.hpp"

namespace catq {
namespace {

void require_same_dims(const SpaceDims& x, const SpaceDims& y, const char* what) {
  if (!(x == y)) {
    std::ostringstream os;
    os << what << ": dimension mismatch (" << x.n_mem() << "x" << x.n_buf() << " vs "
       << y.n_mem() << "x" << y.n_buf() << ")";
    throw DimensionError(os.str());
  }
}

// Eigen-decomposition of the truncated p quadrature, i(a^dag - a)/sqrt(2),
// shared between all displacements computed at the same padded size.
struct QuadratureBasis {
  Eigen::MatrixXcd vectors;
  Eigen::VectorXd values;
};

const QuadratureBasis& quadrature_basis(int size) {
  static std::mutex mutex;
  static std::map<int, QuadratureBasis> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(size);
  if (it != cache.end()) return it->second;
  MatrixXc a = destroy_matrix(size);
  MatrixXc p = kI * (a.adjoint() - a) / std::sqrt(2.0);
  Eigen::SelfAdjointEigenSolver<MatrixXc> es(p);
  QuadratureBasis basis{es.eigenvectors(), es.eigenvalues()};
  return cache.emplace(size, std::move(basis)).first->second;
}

int padded_size(int levels, double amplitude) {
  int extra = static_cast<int>(std::ceil(amplitude * amplitude + 6.0 * amplitude)) + 30;
  int n = levels + extra;
  return (n + 15) / 16 * 16;
}

}  // namespace

SpaceDims::SpaceDims(int n_mem, int n_buf, std::size_t cap) : n_mem_(n_mem), n_buf_(n_buf) {
  if (n_mem < 2 || n_buf < 2) {
    throw DimensionError("SpaceDims: each mode needs at least 2 levels");
  }
  auto total = static_cast<std::size_t>(n_mem) * static_cast<std::size_t>(n_buf);
  if (total > cap) {
    std::ostringstream os;
    os << "SpaceDims: total dimension " << total << " exceeds cap " << cap;
    throw DimensionError(os.str());
  }
}

// ---- QOperator ----------------------------------------------------------------

QOperator::QOperator(const SpaceDims& dims)
    : dims_(dims), matrix_(MatrixXc::Zero(dims.total(), dims.total())) {}

QOperator::QOperator(const SpaceDims& dims, MatrixXc matrix) : dims_(dims), matrix_(std::move(matrix)) {
  if (matrix_.rows() != dims.total() || matrix_.cols() != dims.total()) {
    throw DimensionError("QOperator: matrix size does not match dims");
  }
}

QOperator QOperator::identity(const SpaceDims& dims) {
  return QOperator(dims, MatrixXc::Identity(dims.total(), dims.total()));
}

QOperator QOperator::adjoint() const { return QOperator(dims_, matrix_.adjoint()); }

bool QOperator::is_hermitian(double tol) const {
  return (matrix_ - matrix_.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

SparseXc QOperator::sparse(double drop_below) const {
  std::vector<Eigen::Triplet<cplx>> trips;
  for (Eigen::Index j = 0; j < matrix_.cols(); ++j) {
    for (Eigen::Index i = 0; i < matrix_.rows(); ++i) {
      const cplx v = matrix_(i, j);
      if (std::abs(v) > drop_below) trips.emplace_back(i, j, v);
    }
  }
  SparseXc s(matrix_.rows(), matrix_.cols());
  s.setFromTriplets(trips.begin(), trips.end());
  return s;
}

QOperator& QOperator::operator+=(const QOperator& rhs) {
  require_same_dims(dims_, rhs.dims_, "operator+");
  matrix_ += rhs.matrix_;
  return *this;
}

QOperator& QOperator::operator-=(const QOperator& rhs) {
  require_same_dims(dims_, rhs.dims_, "operator-");
  matrix_ -= rhs.matrix_;
  return *this;
}

QOperator& QOperator::operator*=(cplx s) {
  matrix_ *= s;
  return *this;
}

QOperator operator*(const QOperator& lhs, const QOperator& rhs) {
  require_same_dims(lhs.dims(), rhs.dims(), "operator*");
  return QOperator(lhs.dims(), lhs.matrix() * rhs.matrix());
}

QOperator commutator(const QOperator& x, const QOperator& y) { return x * y - y * x; }

// ---- QState -------------------------------------------------------------------

QState QState::from_ket(const SpaceDims& dims, VectorXc ket) {
  if (ket.size() != dims.total()) throw DimensionError("QState: ket length does not match dims");
  QState s(dims, Kind::ket);
  s.ket_ = std::move(ket);
  s.validate();
  return s;
}

QState QState::from_density(const SpaceDims& dims, MatrixXc rho) {
  QState s = density_unchecked(dims, std::move(rho));
  s.validate();
  return s;
}

QState QState::density_unchecked(const SpaceDims& dims, MatrixXc rho) {
  if (rho.rows() != dims.total() || rho.cols() != dims.total()) {
    throw DimensionError("QState: density size does not match dims");
  }
  QState s(dims, Kind::density);
  s.rho_ = std::move(rho);
  return s;
}

const VectorXc& QState::ket() const {
  if (kind_ != Kind::ket) throw InvalidArgument("QState: not a ket");
  return ket_;
}

const MatrixXc& QState::density() const {
  if (kind_ != Kind::density) throw InvalidArgument("QState: not a density matrix");
  return rho_;
}

MatrixXc QState::to_density_matrix() const {
  if (kind_ == Kind::density) return rho_;
  return ket_ * ket_.adjoint();
}

QState QState::to_density() const { return density_unchecked(dims_, to_density_matrix()); }

void QState::validate() const {
  if (kind_ == Kind::ket) {
    const double norm = ket_.norm();
    if (std::abs(norm - 1.0) > 1e-9) {
      std::ostringstream os;
      os << "QState: ket norm " << norm << " differs from 1";
      throw InvalidArgument(os.str());
    }
    return;
  }
  const cplx tr = rho_.trace();
  if (std::abs(tr - 1.0) > 1e-9) {
    std::ostringstream os;
    os << "QState: density trace " << tr << " differs from 1";
    throw InvalidArgument(os.str());
  }
  const double herm = (rho_ - rho_.adjoint()).cwiseAbs().maxCoeff();
  if (herm > 1e-10) {
    std::ostringstream os;
    os << "QState: density not Hermitian (deviation " << herm << ")";
    throw InvalidArgument(os.str());
  }
  MatrixXc sym = 0.5 * (rho_ + rho_.adjoint());
  Eigen::SelfAdjointEigenSolver<MatrixXc> es(sym, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-8) {
    std::ostringstream os;
    os << "QState: density has negative eigenvalue " << es.eigenvalues().minCoeff();
    throw InvalidArgument(os.str());
  }
}

// ---- single-mode building blocks -------------------------------------------

MatrixXc destroy_matrix(int levels) {
  MatrixXc a = MatrixXc::Zero(levels, levels);
  for (int n = 1; n < levels; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return a;
}

VectorXc coherent_amplitudes(cplx alpha, int levels) {
  VectorXc c(levels);
  c(0) = std::exp(-0.5 * std::norm(alpha));
  for (int n = 1; n < levels; ++n) c(n) = c(n - 1) * alpha / std::sqrt(static_cast<double>(n));
  return c;
}

int min_levels_for(double amplitude) {
  const double r = std::abs(amplitude);
  return static_cast<int>(std::ceil(r * r + 6.0 * r + 5.0 - 1e-12));
}

int comfortable_block(int levels, double amplitude) {
  int n = 0;
  while (n < levels && min_levels_for(std::sqrt(static_cast<double>(n)) + std::abs(amplitude)) <= levels) ++n;
  return std::max(n, 1);
}

MatrixXc displacement_block(cplx lambda, int rows, int cols) {
  if (cols < 1 || cols > rows) throw DimensionError("displacement_block: need 1 <= cols <= rows");
  if (lambda == cplx(0.0)) return MatrixXc::Identity(rows, cols);
  const double r = std::abs(lambda);
  const double theta = std::arg(lambda);
  const int big = padded_size(rows, r);
  const auto& qb = quadrature_basis(big);

  // lambda a^dag - conj(lambda) a = R (r (a^dag - a)) R^dag with R = exp(i theta n),
  // and a^dag - a = -i sqrt(2) p.
  VectorXc phases(big);
  for (int k = 0; k < big; ++k) phases(k) = std::exp(-kI * std::sqrt(2.0) * r * qb.values(k));
  MatrixXc d = qb.vectors.topRows(rows) * phases.asDiagonal() * qb.vectors.topRows(cols).adjoint();
  for (int m = 0; m < rows; ++m) {
    for (int n = 0; n < cols; ++n) d(m, n) *= std::exp(kI * theta * double(m - n));
  }

  // Columns whose displaced support stays inside the space must keep unit norm.
  const int low = std::min(cols, comfortable_block(rows, r));
  double worst = 0.0;
  for (int n = 0; n < low; ++n) {
    worst = std::max(worst, std::abs(1.0 - d.col(n).squaredNorm()));
  }
  if (worst > 1e-4) {
    std::ostringstream os;
    os << "displacement by |lambda| = " << r << " is not unitary on the low-Fock block at " << rows
       << " levels (deficit " << worst << ")";
    throw TruncationError(os.str());
  }
  if (worst > 1e-8) {
    std::ostringstream os;
    os << "displacement by |lambda| = " << r << " loses norm " << worst << " at " << rows << " levels";
    warn(os.str());
  }
  return d;
}

MatrixXc displacement_matrix(cplx lambda, int levels) { return displacement_block(lambda, levels, levels); }

QOperator embed(const MatrixXc& single_mode, Mode mode, const SpaceDims& dims) {
  const int nm = dims.n_mem();
  const int nb = dims.n_buf();
  MatrixXc out = MatrixXc::Zero(dims.total(), dims.total());
  if (mode == Mode::memory) {
    if (single_mode.rows() != nm || single_mode.cols() != nm) throw DimensionError("embed: memory size mismatch");
    for (int i = 0; i < nm; ++i) {
      for (int j = 0; j < nm; ++j) {
        const cplx v = single_mode(i, j);
        if (v == cplx(0.0)) continue;
        for (int k = 0; k < nb; ++k) out(i * nb + k, j * nb + k) = v;
      }
    }
  } else {
    if (single_mode.rows() != nb || single_mode.cols() != nb) throw DimensionError("embed: buffer size mismatch");
    for (int m = 0; m < nm; ++m) out.block(m * nb, m * nb, nb, nb) = single_mode;
  }
  return QOperator(dims, std::move(out));
}

// ---- operations ----------------------------------------------------------------

ModeOperators mode_operators(const SpaceDims& dims) {
  return {embed(destroy_matrix(dims.n_mem()), Mode::memory, dims),
          embed(destroy_matrix(dims.n_buf()), Mode::buffer, dims)};
}

QOperator number_operator(const SpaceDims& dims, Mode mode) {
  const int n = dims.levels(mode);
  MatrixXc num = MatrixXc::Zero(n, n);
  for (int k = 0; k < n; ++k) num(k, k) = k;
  return embed(num, mode, dims);
}

QOperator parity_operator(const SpaceDims& dims, Mode mode) {
  const int n = dims.levels(mode);
  MatrixXc p = MatrixXc::Zero(n, n);
  for (int k = 0; k < n; ++k) p(k, k) = (k % 2 == 0) ? 1.0 : -1.0;
  return embed(p, mode, dims);
}

QOperator displacement_operator(cplx lambda, const SpaceDims& dims, Mode mode) {
  const int n = dims.levels(mode);
  if (min_levels_for(std::abs(lambda)) > n) {
    std::ostringstream os;
    os << "displacement |lambda| = " << std::abs(lambda) << " outside truncation comfort of " << n << " levels";
    warn(os.str());
  }
  return embed(displacement_matrix(lambda, n), mode, dims);
}

QState fock_state(int n_mem, int n_buf, const SpaceDims& dims) {
  if (n_mem < 0 || n_mem >= dims.n_mem() || n_buf < 0 || n_buf >= dims.n_buf()) {
    throw DimensionError("fock_state: level outside truncation");
  }
  VectorXc v = VectorXc::Zero(dims.total());
  v(dims.index(n_mem, n_buf)) = 1.0;
  return QState::from_ket(dims, std::move(v));
}

namespace {

VectorXc checked_coherent(cplx alpha, int levels) {
  VectorXc c = coherent_amplitudes(alpha, levels);
  const double deficit = 1.0 - c.squaredNorm();
  std::ostringstream os;
  if (deficit > 1e-4) {
    os << "coherent state |alpha| = " << std::abs(alpha) << " loses " << deficit << " of its norm at " << levels
       << " levels";
    throw TruncationError(os.str());
  }
  if (min_levels_for(std::abs(alpha)) > levels || deficit > 1e-8) {
    os << "coherent state |alpha| = " << std::abs(alpha) << " outside truncation comfort of " << levels
       << " levels (norm deficit " << deficit << ")";
    warn(os.str());
  }
  return c / c.norm();
}

VectorXc vacuum(int levels) {
  VectorXc v = VectorXc::Zero(levels);
  v(0) = 1.0;
  return v;
}

}  // namespace

QState product_state(const VectorXc& mem, const VectorXc& buf, const SpaceDims& dims) {
  if (mem.size() != dims.n_mem() || buf.size() != dims.n_buf()) {
    throw DimensionError("product_state: factor size mismatch");
  }
  VectorXc v(dims.total());
  for (int m = 0; m < dims.n_mem(); ++m) v.segment(m * dims.n_buf(), dims.n_buf()) = mem(m) * buf;
  return QState::from_ket(dims, std::move(v));
}

QState coherent_state(cplx alpha, const SpaceDims& dims, Mode mode) {
  if (mode == Mode::memory) {
    return product_state(checked_coherent(alpha, dims.n_mem()), vacuum(dims.n_buf()), dims);
  }
  return product_state(vacuum(dims.n_mem()), checked_coherent(alpha, dims.n_buf()), dims);
}

QState cat_state(cplx alpha, Parity parity, const SpaceDims& dims) {
  const int n = dims.n_mem();
  if (parity == Parity::odd && std::abs(alpha) < 1e-6) {
    throw DegenerateInput("cat_state: odd cat does not exist at alpha = 0");
  }
  VectorXc c = checked_coherent(alpha, n);
  // |alpha> + s|-alpha> keeps only the Fock components of matching parity.
  const int keep = parity == Parity::even ? 0 : 1;
  for (int k = 0; k < n; ++k) {
    if (k % 2 != keep) c(k) = 0.0;
  }
  return product_state(c / c.norm(), vacuum(dims.n_buf()), dims);
}

QState with_buffer_vacuum(const MatrixXc& rho_mem, const SpaceDims& dims) {
  const int nm = dims.n_mem();
  const int nb = dims.n_buf();
  if (rho_mem.rows() != nm || rho_mem.cols() != nm) throw DimensionError("with_buffer_vacuum: size mismatch");
  MatrixXc rho = MatrixXc::Zero(dims.total(), dims.total());
  for (int i = 0; i < nm; ++i) {
    for (int j = 0; j < nm; ++j) rho(i * nb, j * nb) = rho_mem(i, j);
  }
  return QState::from_density(dims, std::move(rho));
}

cplx expectation(const QOperator& op, const QState& state) {
  require_same_dims(op.dims(), state.dims(), "expectation");
  if (state.is_ket()) return state.ket().dot(op.matrix() * state.ket());
  return (op.matrix().cwiseProduct(state.density().transpose())).sum();
}

double fidelity(const QState& reference_ket, const QState& state) {
  require_same_dims(reference_ket.dims(), state.dims(), "fidelity");
  const VectorXc& psi = reference_ket.ket();
  if (state.is_ket()) return std::norm(psi.dot(state.ket()));
  return std::real(psi.dot(state.density() * psi));
}

MatrixXc reduce_to_memory(const MatrixXc& rho, const SpaceDims& dims) {
  const int nm = dims.n_mem();
  const int nb = dims.n_buf();
  MatrixXc out = MatrixXc::Zero(nm, nm);
  for (int i = 0; i < nm; ++i) {
    for (int j = 0; j < nm; ++j) {
      cplx s = 0.0;
      for (int k = 0; k < nb; ++k) s += rho(i * nb + k, j * nb + k);
      out(i, j) = s;
    }
  }
  return out;
}

MatrixXc reduce_to_buffer(const MatrixXc& rho, const SpaceDims& dims) {
  const int nm = dims.n_mem();
  const int nb = dims.n_buf();
  MatrixXc out = MatrixXc::Zero(nb, nb);
  for (int m = 0; m < nm; ++m) out += rho.block(m * nb, m * nb, nb, nb);
  return out;
}

MatrixXc reduce_to_memory(const QState& state) {
  if (!state.is_ket()) return reduce_to_memory(state.density(), state.dims());
  const int nm = state.dims().n_mem();
  const int nb = state.dims().n_buf();
  // reshape psi into an nm x nb matrix and contract the buffer index
  Eigen::Map<const Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> psi(
      state.ket().data(), nm, nb);
  return psi * psi.adjoint();
}

MatrixXc reduce_to_buffer(const QState& state) {
  if (!state.is_ket()) return reduce_to_buffer(state.density(), state.dims());
  const int nm = state.dims().n_mem();
  const int nb = state.dims().n_buf();
  Eigen::Map<const Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> psi(
      state.ket().data(), nm, nb);
  return (psi.adjoint() * psi).transpose();
}

double top_population(const MatrixXc& rho, const SpaceDims& dims, Mode mode, int count) {
  const int nm = dims.n_mem();
  const int nb = dims.n_buf();
  double p = 0.0;
  for (int m = 0; m < nm; ++m) {
    for (int k = 0; k < nb; ++k) {
      const int level = mode == Mode::memory ? m : k;
      if (level >= dims.levels(mode) - count) p += std::real(rho(m * nb + k, m * nb + k));
    }
  }
  return p;
}

}  // namespace catq
