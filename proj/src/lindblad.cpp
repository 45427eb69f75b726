#include "catq/lindblad.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "catq/errors.hpp"
#include "catq/warnings.hpp"

namespace catq {
namespace odeint = boost::numeric::odeint;

namespace {

using OdeState = std::vector<cplx>;
constexpr double kTimeEps = 1e-15;

Eigen::Map<MatrixXc> as_matrix(OdeState& x, int d) { return Eigen::Map<MatrixXc>(x.data(), d, d); }
Eigen::Map<const MatrixXc> as_matrix(const OdeState& x, int d) { return Eigen::Map<const MatrixXc>(x.data(), d, d); }

OdeState to_state(const MatrixXc& m) { return OdeState(m.data(), m.data() + m.size()); }

struct Monitor {
  const TimeDependentProblem& problem;
  const EvolveOptions& options;

  void check(double t, const MatrixXc& rho) const {
    const cplx tr = rho.trace();
    if (!std::isfinite(tr.real()) || std::abs(tr - 1.0) > options.trace_tolerance) {
      std::ostringstream os;
      os << "trace drift " << std::abs(tr - 1.0) << " at t = " << t << " s exceeds " << options.trace_tolerance;
      throw NumericalError(os.str());
    }
    if (!options.check_leakage) return;
    const SpaceDims& dims = problem.dims;
    for (Mode mode : {Mode::memory, Mode::buffer}) {
      const int count = std::min(2, dims.levels(mode) - 1);
      const double p = top_population(rho, dims, mode, count);
      const char* name = mode == Mode::memory ? "memory" : "buffer";
      if (p > options.leakage_error) {
        std::ostringstream os;
        os << name << " top-level population " << p << " at t = " << t << " s exceeds " << options.leakage_error
           << "; increase the truncation";
        throw TruncationError(os.str());
      }
      if (p > options.leakage_warn) {
        std::ostringstream os;
        os << name << " top-level population above " << options.leakage_warn << " (truncation "
           << dims.levels(mode) << ")";
        warn(os.str());
      }
    }
  }
};

// Integrates the Hermitian matrix x from t0 to t1 under f, calling `on_time`
// at each interior output time in `outputs` (strictly between t0 and t1).
template <class Rhs, class OnTime>
void integrate_interval(Rhs&& f, OdeState& x, double t0, double t1, const std::vector<double>& outputs,
                        const EvolveOptions& options, OnTime&& on_time) {
  if (t1 - t0 <= kTimeEps) return;
  std::vector<double> grid;
  grid.reserve(outputs.size() + 2);
  grid.push_back(t0);
  for (double t : outputs) grid.push_back(t);
  grid.push_back(t1);
  auto stepper = odeint::make_dense_output(options.atol, options.rtol, odeint::runge_kutta_dopri5<OdeState>());
  const double dt0 = std::min((t1 - t0) / 10.0, 1e-9);
  std::size_t k = 0;
  auto observer = [&](const OdeState& s, double t) {
    if (k > 0 && k + 1 < grid.size()) on_time(t, s);
    ++k;
  };
  try {
    odeint::integrate_times(stepper, f, x, grid.begin(), grid.end(), dt0, observer,
                            odeint::max_step_checker(50'000'000));
  } catch (const std::exception& e) {
    const double norm = std::sqrt(std::accumulate(x.begin(), x.end(), 0.0,
                                                  [](double acc, cplx z) { return acc + std::norm(z); }));
    std::ostringstream os;
    os << "integrator failed in [" << t0 << ", " << t1 << "] s (state norm " << norm << "): " << e.what();
    throw NumericalError(os.str());
  }
}

}  // namespace

// ---- generator -----------------------------------------------------------------------

LindbladGenerator::LindbladGenerator(const QOperator& hamiltonian, const std::vector<CollapseOperator>& collapses) {
  MatrixXc g = -kI * hamiltonian.matrix();
  for (const auto& c : collapses) {
    if (!(c.op.dims() == hamiltonian.dims())) throw DimensionError("collapse operator dims mismatch");
    const MatrixXc l = std::sqrt(c.rate) * c.op.matrix();
    g -= 0.5 * (l.adjoint() * l);
    L.push_back(QOperator(hamiltonian.dims(), l).sparse());
  }
  G = QOperator(hamiltonian.dims(), g).sparse();
}

MatrixXc LindbladGenerator::apply(const MatrixXc& rho) const {
  MatrixXc gr = G * rho;
  MatrixXc out = gr + gr.adjoint();
  for (const auto& l : L) {
    MatrixXc lr = l * rho;
    out.noalias() += l * lr.adjoint();
  }
  return out;
}

MatrixXc LindbladGenerator::apply_adjoint(const MatrixXc& op) const {
  MatrixXc go = G.adjoint() * op;
  MatrixXc out = go + go.adjoint();
  for (const auto& l : L) {
    MatrixXc lo = l.adjoint() * op;
    out.noalias() += l.adjoint() * lo.adjoint();
  }
  return out;
}

MatrixXc LindbladGenerator::apply_general(const MatrixXc& rho) const {
  MatrixXc out = G * rho + (G * rho.adjoint()).adjoint();
  for (const auto& l : L) out += l * (l * rho.adjoint()).adjoint();
  return out;
}

// ---- evolve -----------------------------------------------------------------------------

const std::vector<cplx>& EvolutionResult::series(const std::string& name) const {
  for (std::size_t k = 0; k < names.size(); ++k) {
    if (names[k] == name) return values[k];
  }
  throw InvalidArgument("no observable named '" + name + "'");
}

cplx trace_product(const MatrixXc& op, const MatrixXc& rho) { return op.cwiseProduct(rho.transpose()).sum(); }

EvolutionResult evolve(const TimeDependentProblem& problem, const std::vector<double>& times,
                       const EvolveOptions& options) {
  if (!problem.initial) throw InvalidArgument("evolve: problem has no initial state");
  const SpaceDims& dims = problem.dims;
  const int d = dims.total();
  const double T = problem.total_time();
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] < -kTimeEps || times[i] > T + kTimeEps) throw InvalidArgument("evolve: output time outside [0, total_time]");
    if (i > 0 && times[i] < times[i - 1]) throw InvalidArgument("evolve: output times must be non-decreasing");
  }

  EvolutionResult res;
  std::vector<MatrixXc> obs;
  for (const auto& [name, op] : options.observables) {
    if (!(op.dims() == dims)) throw DimensionError("evolve: observable dims mismatch");
    res.names.push_back(name);
    obs.push_back(op.matrix());
  }
  res.values.assign(obs.size(), {});
  const Monitor monitor{problem, options};

  auto record = [&](double t, const MatrixXc& rho) {
    monitor.check(t, rho);
    res.times.push_back(t);
    for (std::size_t k = 0; k < obs.size(); ++k) res.values[k].push_back(trace_product(obs[k], rho));
    if (options.store_states) res.states.push_back(QState::density_unchecked(dims, rho));
    if (options.observer) options.observer(t, rho);
  };

  MatrixXc rho0 = problem.initial->to_density_matrix();
  std::size_t next_kick = 0;
  auto apply_kicks_until = [&](double t, MatrixXc& rho) {
    while (next_kick < problem.kicks.size() && problem.kicks[next_kick].time <= t + kTimeEps) {
      const MatrixXc& u = problem.kicks[next_kick].unitary;
      rho = u * rho * u.adjoint();
      ++next_kick;
    }
  };
  apply_kicks_until(0.0, rho0);

  std::size_t next_out = 0;
  while (next_out < times.size() && times[next_out] <= kTimeEps) record(times[next_out++], rho0);

  OdeState x = to_state(rho0);
  for (const auto& iv : problem.intervals) {
    if (next_out >= times.size() && next_kick >= problem.kicks.size()) break;
    std::vector<double> inner;
    while (next_out < times.size() && times[next_out] < iv.t1 - kTimeEps) {
      if (times[next_out] > iv.t0 + kTimeEps) inner.push_back(times[next_out]);
      ++next_out;
    }
    const LindbladGenerator gen(iv.hamiltonian, problem.collapses);
    auto rhs = [&](const OdeState& s, OdeState& ds, double) {
      auto r = as_matrix(s, d);
      ds.resize(s.size());
      as_matrix(ds, d) = gen.apply(r);
    };
    integrate_interval(rhs, x, iv.t0, iv.t1, inner, options,
                       [&](double t, const OdeState& s) { record(t, MatrixXc(as_matrix(s, d))); });
    MatrixXc rho = as_matrix(x, d);
    apply_kicks_until(iv.t1, rho);
    monitor.check(iv.t1, rho);
    while (next_out < times.size() && times[next_out] <= iv.t1 + kTimeEps) record(times[next_out++], rho);
    x = to_state(rho);
  }
  // Zero-length problems or outputs at total_time without intervals.
  MatrixXc rho = as_matrix(x, d);
  apply_kicks_until(T, rho);
  while (next_out < times.size()) record(times[next_out++], rho);
  res.final_density = rho;
  return res;
}

MatrixXc evolve_adjoint(const TimeDependentProblem& problem, const MatrixXc& observable, double t_final,
                        const EvolveOptions& options) {
  const int d = problem.dims.total();
  if (observable.rows() != d || observable.cols() != d) throw DimensionError("evolve_adjoint: observable size mismatch");
  if (t_final < -kTimeEps || t_final > problem.total_time() + kTimeEps) {
    throw InvalidArgument("evolve_adjoint: t_final outside [0, total_time]");
  }
  MatrixXc op = observable;
  // kicks are unitary conjugations; walk them and the intervals backwards
  int kick = static_cast<int>(problem.kicks.size()) - 1;
  auto unkick_from = [&](double t) {
    while (kick >= 0 && problem.kicks[kick].time >= t - kTimeEps) {
      if (problem.kicks[kick].time <= t_final + kTimeEps) {
        const MatrixXc& u = problem.kicks[kick].unitary;
        op = u.adjoint() * op * u;
      }
      --kick;
    }
  };
  for (auto it = problem.intervals.rbegin(); it != problem.intervals.rend(); ++it) {
    if (it->t0 >= t_final - kTimeEps) {
      unkick_from(it->t0);
      continue;
    }
    const double t1 = std::min(it->t1, t_final);
    unkick_from(t1);
    const LindbladGenerator gen(it->hamiltonian, problem.collapses);
    auto rhs = [&](const OdeState& s, OdeState& ds, double) {
      auto o = as_matrix(s, d);
      ds.resize(s.size());
      as_matrix(ds, d) = gen.apply_adjoint(o);
    };
    OdeState x = to_state(op);
    integrate_interval(rhs, x, 0.0, t1 - it->t0, {}, options, [](double, const OdeState&) {});
    op = as_matrix(x, d);
  }
  unkick_from(0.0);
  return op;
}

// ---- Liouvillian --------------------------------------------------------------------------

VectorXc vectorize(const MatrixXc& rho) {
  const int d = static_cast<int>(rho.rows());
  VectorXc v(d * d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) v(i * d + j) = rho(i, j);
  }
  return v;
}

MatrixXc unvectorize(const VectorXc& v, int d) {
  if (v.size() != static_cast<Eigen::Index>(d) * d) throw DimensionError("unvectorize: size mismatch");
  MatrixXc m(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) m(i, j) = v(i * d + j);
  }
  return m;
}

Liouvillian build_liouvillian(const QOperator& hamiltonian, const std::vector<CollapseOperator>& collapses,
                              const LiouvillianOptions& options) {
  const SpaceDims dims = hamiltonian.dims();
  const int d = dims.total();
  if (d > options.max_dim) {
    std::ostringstream os;
    os << "Liouvillian: Hilbert dimension " << d << " exceeds the cap " << options.max_dim;
    throw DimensionError(os.str());
  }
  const LindbladGenerator gen(hamiltonian, collapses);
  const SparseXc id = [&] {
    SparseXc s(d, d);
    s.setIdentity();
    return s;
  }();
  // kron(A, B)(i*d + k, j*d + l) = A(i, j) B(k, l)
  std::vector<Eigen::Triplet<cplx>> trips;
  auto kron_add = [&](const SparseXc& A, const SparseXc& B) {
    for (int ja = 0; ja < A.outerSize(); ++ja) {
      for (SparseXc::InnerIterator ia(A, ja); ia; ++ia) {
        for (int jb = 0; jb < B.outerSize(); ++jb) {
          for (SparseXc::InnerIterator ib(B, jb); ib; ++ib) {
            trips.emplace_back(ia.row() * d + ib.row(), ia.col() * d + ib.col(), ia.value() * ib.value());
          }
        }
      }
    }
  };
  const SparseXc gc = gen.G.conjugate();
  kron_add(gen.G, id);
  kron_add(id, gc);
  for (const auto& l : gen.L) kron_add(l, SparseXc(l.conjugate()));
  SparseXc m(static_cast<Eigen::Index>(d) * d, static_cast<Eigen::Index>(d) * d);
  m.setFromTriplets(trips.begin(), trips.end());
  m.prune(cplx(0.0), 0.0);
  return {dims, std::move(m), rate_scale(collapses, 1.0)};
}

namespace {

// Adjacency list of the sparsity graph: edge j -> i when M(i, j) != 0.
std::vector<std::vector<int>> adjacency(const SparseXc& m, bool symmetric) {
  const int n = static_cast<int>(m.rows());
  std::vector<std::vector<int>> adj(n);
  for (int j = 0; j < m.outerSize(); ++j) {
    for (SparseXc::InnerIterator it(m, j); it; ++it) {
      const int i = static_cast<int>(it.row());
      if (i == j || it.value() == cplx(0.0)) continue;
      adj[j].push_back(i);
      if (symmetric) adj[i].push_back(j);
    }
  }
  return adj;
}

// Iterative Tarjan; returns a component label per vertex.
std::vector<int> strongly_connected(const std::vector<std::vector<int>>& adj, int& count) {
  const int n = static_cast<int>(adj.size());
  std::vector<int> index(n, -1), low(n, 0), comp(n, -1), stack;
  std::vector<char> on_stack(n, 0);
  std::vector<std::pair<int, std::size_t>> call;
  int next = 0;
  count = 0;
  for (int root = 0; root < n; ++root) {
    if (index[root] >= 0) continue;
    call.push_back({root, 0});
    index[root] = low[root] = next++;
    stack.push_back(root);
    on_stack[root] = 1;
    while (!call.empty()) {
      auto& [v, pos] = call.back();
      if (pos < adj[v].size()) {
        const int w = adj[v][pos++];
        if (index[w] < 0) {
          index[w] = low[w] = next++;
          stack.push_back(w);
          on_stack[w] = 1;
          call.push_back({w, 0});
        } else if (on_stack[w]) {
          low[v] = std::min(low[v], index[w]);
        }
        continue;
      }
      const int vv = v;
      if (low[vv] == index[vv]) {
        int w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = 0;
          comp[w] = count;
        } while (w != vv);
        ++count;
      }
      call.pop_back();
      if (!call.empty()) {
        const int parent = call.back().first;
        low[parent] = std::min(low[parent], low[vv]);
      }
    }
  }
  return comp;
}

std::vector<std::vector<int>> group(const std::vector<int>& label, int count) {
  std::vector<std::vector<int>> groups(count);
  for (int v = 0; v < static_cast<int>(label.size()); ++v) groups[label[v]].push_back(v);
  return groups;
}

MatrixXc dense_block(const SparseXc& m, const std::vector<int>& idx) {
  const int k = static_cast<int>(idx.size());
  std::vector<int> pos(m.rows(), -1);
  for (int a = 0; a < k; ++a) pos[idx[a]] = a;
  MatrixXc b = MatrixXc::Zero(k, k);
  for (int a = 0; a < k; ++a) {
    for (SparseXc::InnerIterator it(m, idx[a]); it; ++it) {
      const int r = pos[it.row()];
      if (r >= 0) b(r, a) = it.value();
    }
  }
  return b;
}

}  // namespace

SpectralReport spectral_gap(const Liouvillian& L, double zero_tol) {
  // The spectrum of a block-triangular matrix is the union of the spectra of
  // its strongly connected diagonal blocks.
  int count = 0;
  const auto comp = strongly_connected(adjacency(L.matrix, false), count);
  const auto blocks = group(comp, count);
  SpectralReport rep{cplx(0.0), 0, {}, 0};
  for (const auto& idx : blocks) {
    rep.largest_block = std::max(rep.largest_block, idx.size());
    if (idx.size() == 1) {
      rep.eigenvalues.push_back(L.matrix.coeff(idx[0], idx[0]));
      continue;
    }
    Eigen::ComplexEigenSolver<MatrixXc> es(dense_block(L.matrix, idx), false);
    if (es.info() != Eigen::Success) throw NumericalError("spectral_gap: eigensolver did not converge");
    for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) rep.eigenvalues.push_back(es.eigenvalues()(k));
  }
  std::sort(rep.eigenvalues.begin(), rep.eigenvalues.end(), [](cplx x, cplx y) {
    if (x.real() != y.real()) return x.real() > y.real();
    return x.imag() > y.imag();
  });
  const double tol = zero_tol * L.rate_scale;
  std::optional<cplx> best;
  for (cplx z : rep.eigenvalues) {
    if (std::abs(z) < tol) {
      ++rep.steady_dimension;
      continue;
    }
    // smallest |Re|; ties go to non-negative then smaller imaginary part
    if (!best || std::abs(z.real()) < std::abs(best->real()) - tol ||
        (std::abs(std::abs(z.real()) - std::abs(best->real())) <= tol &&
         (std::abs(z.imag()) < std::abs(best->imag()) - tol ||
          (std::abs(std::abs(z.imag()) - std::abs(best->imag())) <= tol && z.imag() > best->imag())))) {
      best = z;
    }
  }
  if (!best) throw NumericalError("spectral_gap: no nonzero eigenvalue");
  if (std::abs(best->real()) < tol) {
    std::ostringstream os;
    os << "spectral_gap: eigenvalue " << *best << " is not separated from the steady space (tolerance " << tol
       << ")";
    throw NumericalError(os.str());
  }
  rep.lambda_min = *best;
  return rep;
}

double alpha0_confinement_closed_form(double g2, double kappa_b) {
  if (!(kappa_b > 0.0)) throw InvalidArgument("alpha0_confinement_closed_form: kappa_b must be positive");
  const double x = 1.0 - 32.0 * g2 * g2 / (kappa_b * kappa_b);
  const cplx root = std::sqrt(cplx(x, 0.0));
  return 0.5 * kappa_b * std::real(1.0 - root);
}

cplx alpha0_reduced_gap(double g2, double kappa_b) {
  if (!(kappa_b > 0.0)) throw InvalidArgument("alpha0_reduced_gap: kappa_b must be positive");
  // G on {|2,0>, |0,1>}; G vanishes on {|0,0>, |1,0>}.
  Eigen::Matrix2cd g1;
  g1 << 0.0, -kI * std::sqrt(2.0) * g2, -kI * std::sqrt(2.0) * g2, -0.5 * kappa_b;
  Eigen::ComplexEigenSolver<Eigen::Matrix2cd> es(g1, false);
  // coherences |H1><H0| evolve with lambda_1 + conj(0); populations of H1 with lambda_1 + conj(lambda_2)
  std::vector<cplx> cand;
  for (int i = 0; i < 2; ++i) {
    cand.push_back(es.eigenvalues()(i));
    for (int j = 0; j < 2; ++j) cand.push_back(es.eigenvalues()(i) + std::conj(es.eigenvalues()(j)));
  }
  cplx best = cand.front();
  for (cplx z : cand) {
    if (std::abs(z.real()) < std::abs(best.real()) ||
        (std::abs(z.real()) == std::abs(best.real()) && z.imag() > best.imag())) {
      best = z;
    }
  }
  return best;
}

SteadyStateResult steady_state(const Liouvillian& L, double zero_tol) {
  // Weakly connected components are invariant subspaces, so the kernel is the
  // direct sum of the component kernels.
  const auto adj = adjacency(L.matrix, true);
  const int n = static_cast<int>(adj.size());
  std::vector<int> label(n, -1);
  int count = 0;
  for (int s = 0; s < n; ++s) {
    if (label[s] >= 0) continue;
    std::vector<int> todo{s};
    label[s] = count;
    while (!todo.empty()) {
      const int v = todo.back();
      todo.pop_back();
      for (int w : adj[v]) {
        if (label[w] < 0) {
          label[w] = count;
          todo.push_back(w);
        }
      }
    }
    ++count;
  }
  const double tol = zero_tol * L.rate_scale;
  std::vector<VectorXc> kernel;
  for (const auto& idx : group(label, count)) {
    // null(B) is the orthogonal complement of range(B^dag); a pivoted QR of
    // B^dag reveals it at a fraction of the cost of a full eigensolve.
    const MatrixXc bh = dense_block(L.matrix, idx).adjoint();
    Eigen::ColPivHouseholderQR<MatrixXc> qr(bh);
    const double max_pivot = qr.maxPivot();
    if (max_pivot < tol) {
      for (int a : idx) {
        VectorXc v = VectorXc::Zero(n);
        v(a) = 1.0;
        kernel.push_back(std::move(v));
      }
      continue;
    }
    qr.setThreshold(tol / max_pivot);
    const Eigen::Index k = static_cast<Eigen::Index>(idx.size());
    const Eigen::Index rank = qr.rank();
    if (rank == k) continue;
    const MatrixXc q = qr.householderQ() * MatrixXc::Identity(k, k);
    for (Eigen::Index c = rank; c < k; ++c) {
      VectorXc v = VectorXc::Zero(n);
      for (Eigen::Index a = 0; a < k; ++a) v(idx[a]) = q(a, c);
      kernel.push_back(std::move(v));
    }
  }

  const int d = L.dims.total();
  SteadyStateResult res;
  res.dimension = static_cast<int>(kernel.size());
  if (kernel.empty()) throw NumericalError("steady_state: no zero eigenvalue found");

  MatrixXc K(n, kernel.size());
  for (std::size_t k = 0; k < kernel.size(); ++k) K.col(k) = kernel[k];
  Eigen::HouseholderQR<MatrixXc> qr(K);
  const MatrixXc Q = qr.householderQ() * MatrixXc::Identity(n, K.cols());
  for (Eigen::Index k = 0; k < Q.cols(); ++k) res.basis.push_back(unvectorize(Q.col(k), d));

  if (res.dimension == 1) {
    MatrixXc rho = res.basis.front();
    const cplx tr = rho.trace();
    if (std::abs(tr) < 1e-12) throw NumericalError("steady_state: kernel vector is traceless");
    rho /= tr;
    rho = 0.5 * (rho + rho.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<MatrixXc> es(rho, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-6) {
      std::ostringstream os;
      os << "steady_state: indefinite steady state (eigenvalue " << es.eigenvalues().minCoeff() << ")";
      throw NumericalError(os.str());
    }
    res.state = QState::density_unchecked(L.dims, rho);
  }
  return res;
}

}  // namespace catq
