#include "catq/trajectories.hpp"

#include <Eigen/Eigenvalues>
#include <boost/math/distributions/normal.hpp>
#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

#include "catq/errors.hpp"
#include "catq/lindblad.hpp"
#include "catq/warnings.hpp"

namespace catq {
namespace odeint = boost::numeric::odeint;

namespace {

using OdeState = std::vector<cplx>;
constexpr double kTimeEps = 1e-15;

// Bit-exact uniform and normal draws; the standard distributions are
// implementation-defined and would break cross-platform reproducibility.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // (0, 1]
  double uniform() { return (double((engine_() >> 11)) + 1.0) * 0x1.0p-53; }

  // Box-Muller pair as one complex number of unit variance per quadrature.
  cplx normal_pair() {
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double phi = 2.0 * std::numbers::pi * uniform();
    return {r * std::cos(phi), r * std::sin(phi)};
  }

 private:
  std::mt19937_64 engine_;
};

double norm2(const OdeState& x) {
  double s = 0.0;
  for (const cplx& z : x) s += std::norm(z);
  return s;
}

Eigen::Map<const VectorXc> as_vector(const OdeState& x) { return {x.data(), Eigen::Index(x.size())}; }
Eigen::Map<VectorXc> as_vector(OdeState& x) { return {x.data(), Eigen::Index(x.size())}; }

struct Unraveler {
  const TimeDependentProblem& problem;
  const std::vector<double>& times;
  const TrajectoryOptions& options;
  std::vector<LindbladGenerator> generators;  // one per interval
  std::vector<MatrixXc> observables;
  // purification of a density-matrix initial state
  std::vector<double> weights;
  std::vector<VectorXc> kets;

  TrajectoryRecord run(std::uint64_t seed, std::size_t index) const;
};

TrajectoryRecord Unraveler::run(std::uint64_t base_seed, std::size_t index) const {
  TrajectoryRecord rec;
  rec.seed = derive_seed(base_seed, index);
  rec.index = index;
  for (const auto& [name, op] : options.observables) rec.names.push_back(name);
  rec.values.assign(observables.size(), {});
  Rng rng(rec.seed);

  // initial ket
  OdeState psi;
  {
    std::size_t pick = 0;
    if (kets.size() > 1) {
      const double u = rng.uniform();
      double acc = 0.0;
      for (pick = 0; pick + 1 < kets.size(); ++pick) {
        acc += weights[pick];
        if (u <= acc) break;
      }
    }
    psi.assign(kets[pick].data(), kets[pick].data() + kets[pick].size());
  }

  auto record = [&](double t) {
    const double n = norm2(psi);
    rec.times.push_back(t);
    for (std::size_t k = 0; k < observables.size(); ++k) {
      const auto v = as_vector(psi);
      rec.values[k].push_back((v.dot(observables[k] * v)).real() / n);
    }
  };
  std::size_t next_kick = 0;
  auto apply_kicks_until = [&](double t) {
    while (next_kick < problem.kicks.size() && problem.kicks[next_kick].time <= t + kTimeEps) {
      as_vector(psi) = problem.kicks[next_kick].unitary * as_vector(psi);
      ++next_kick;
    }
  };

  apply_kicks_until(0.0);
  std::size_t next_out = 0;
  while (next_out < times.size() && times[next_out] <= kTimeEps) record(times[next_out++]);

  double threshold = rng.uniform();
  const auto& L = generators.empty() ? std::vector<SparseXc>{} : generators.front().L;

  auto jump = [&](double t) {
    std::vector<double> w(L.size());
    std::vector<VectorXc> images(L.size());
    double total = 0.0;
    for (std::size_t k = 0; k < L.size(); ++k) {
      images[k] = L[k] * as_vector(psi);
      w[k] = images[k].squaredNorm();
      total += w[k];
    }
    if (!(total > 0.0)) throw NumericalError("jump_unravel: norm decayed with no jump channel active");
    const double u = rng.uniform() * total;
    double acc = 0.0;
    std::size_t k = 0;
    for (; k + 1 < L.size(); ++k) {
      acc += w[k];
      if (u <= acc) break;
    }
    as_vector(psi) = images[k] / std::sqrt(w[k]);
    rec.jumps.push_back({t, int(k)});
    threshold = rng.uniform();
  };

  for (std::size_t i = 0; i < problem.intervals.size(); ++i) {
    const auto& iv = problem.intervals[i];
    if (next_out >= times.size()) break;
    const SparseXc& G = generators[i].G;
    auto rhs = [&G](const OdeState& x, OdeState& dx, double) {
      dx.resize(x.size());
      as_vector(dx) = G * as_vector(x);
    };
    auto controlled = odeint::make_controlled(options.atol, options.rtol, odeint::runge_kutta_dopri5<OdeState>());
    odeint::runge_kutta_dopri5<OdeState> plain;
    const double span = iv.t1 - iv.t0;
    const double min_step = 1e-12 * span;
    double dt = span / 100.0;
    double t = iv.t0;

    auto advance_to = [&](double t_stop) {
      while (t < t_stop - kTimeEps * std::max(1.0, std::abs(t_stop))) {
        const double h = std::min(dt, t_stop - t);
        OdeState trial = psi;
        double tt = t;
        double hh = h;
        if (controlled.try_step(rhs, trial, tt, hh) == odeint::fail) {
          dt = hh;
          if (dt < min_step) throw NumericalError("jump_unravel: step size underflow");
          continue;
        }
        const double n0 = norm2(psi);
        const double n1 = norm2(trial);
        if (1.0 - n1 / n0 > options.max_jump_probability) {
          dt = 0.5 * h;
          if (dt < min_step) throw NumericalError("jump_unravel: substep refinement failed to bound the jump probability");
          continue;
        }
        if (n1 <= threshold) {
          // locate the crossing inside (t, t + h]
          double lo = 0.0, hi = h;
          OdeState at = trial;
          for (int it = 0; it < 200 && hi - lo > 1e-12 * h; ++it) {
            const double mid = 0.5 * (lo + hi);
            OdeState probe(psi.size());
            plain.do_step(rhs, psi, t, probe, mid);
            if (norm2(probe) <= threshold) {
              hi = mid;
              at = std::move(probe);
            } else {
              lo = mid;
            }
          }
          psi = std::move(at);
          t += hi;
          jump(t);
          continue;
        }
        psi = std::move(trial);
        t = tt;
        // a step shortened to hit t_stop says nothing about the natural step size
        if (!(h < dt)) dt = hh;
      }
      t = t_stop;
    };

    while (next_out < times.size() && times[next_out] < iv.t1 - kTimeEps) {
      if (times[next_out] > iv.t0 + kTimeEps) advance_to(times[next_out]);
      record(times[next_out++]);
    }
    advance_to(iv.t1);
    apply_kicks_until(iv.t1);
    while (next_out < times.size() && times[next_out] <= iv.t1 + kTimeEps) record(times[next_out++]);
  }
  apply_kicks_until(problem.total_time());
  while (next_out < times.size()) record(times[next_out++]);
  return rec;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + (index + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

const std::vector<double>& TrajectoryRecord::series(const std::string& name) const {
  for (std::size_t k = 0; k < names.size(); ++k) {
    if (names[k] == name) return values[k];
  }
  throw InvalidArgument("TrajectoryRecord: no observable " + name);
}

std::vector<TrajectoryRecord> jump_unravel(const TimeDependentProblem& problem, const std::vector<double>& times,
                                           std::uint64_t seed, int n_traj, const TrajectoryOptions& options) {
  if (!problem.initial) throw InvalidArgument("jump_unravel: problem has no initial state");
  if (n_traj < 1) throw InvalidArgument("jump_unravel: need at least one trajectory");
  if (!(options.max_jump_probability > 0.0 && options.max_jump_probability < 1.0)) {
    throw InvalidArgument("jump_unravel: max_jump_probability outside (0, 1)");
  }
  const double T = problem.total_time();
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] < -kTimeEps || times[i] > T + kTimeEps) {
      throw InvalidArgument("jump_unravel: output time outside [0, total_time]");
    }
    if (i > 0 && times[i] < times[i - 1]) throw InvalidArgument("jump_unravel: output times must be non-decreasing");
  }

  Unraveler u{problem, times, options, {}, {}, {}, {}};
  for (const auto& iv : problem.intervals) u.generators.emplace_back(iv.hamiltonian, problem.collapses);
  for (const auto& [name, op] : options.observables) {
    if (!(op.dims() == problem.dims)) throw DimensionError("jump_unravel: observable dims mismatch");
    u.observables.push_back(op.matrix());
  }
  if (problem.initial->is_ket()) {
    u.kets.push_back(problem.initial->ket());
    u.weights.push_back(1.0);
  } else {
    Eigen::SelfAdjointEigenSolver<MatrixXc> es(problem.initial->density());
    double total = 0.0;
    for (int k = 0; k < es.eigenvalues().size(); ++k) total += std::max(es.eigenvalues()(k), 0.0);
    // descending weight, so that low-probability components sit at the end
    for (int k = int(es.eigenvalues().size()) - 1; k >= 0; --k) {
      const double w = std::max(es.eigenvalues()(k), 0.0) / total;
      if (w <= 0.0) continue;
      u.weights.push_back(w);
      u.kets.push_back(es.eigenvectors().col(k));
    }
  }

  std::vector<TrajectoryRecord> records(n_traj);
  const int threads = std::max(1, std::min(options.threads, n_traj));
  if (threads == 1) {
    for (int k = 0; k < n_traj; ++k) records[k] = u.run(seed, k);
    return records;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&, w]() {
      try {
        for (int k = w; k < n_traj; k += threads) records[k] = u.run(seed, k);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return records;
}

EnsembleSeries ensemble_mean(const std::vector<TrajectoryRecord>& records, const std::string& name) {
  if (records.empty()) throw InvalidArgument("ensemble_mean: no records");
  EnsembleSeries out;
  out.times = records.front().times;
  const std::size_t n_t = out.times.size();
  std::vector<const std::vector<double>*> series;
  for (const auto& r : records) {
    if (r.times != out.times) throw InvalidArgument("ensemble_mean: records use different time grids");
    series.push_back(&r.series(name));
  }
  const double n = double(records.size());
  std::vector<double> col(records.size());
  for (std::size_t i = 0; i < n_t; ++i) {
    for (std::size_t k = 0; k < series.size(); ++k) col[k] = (*series[k])[i];
    std::sort(col.begin(), col.end());
    double sum = 0.0;
    for (double v : col) sum += v;
    const double mean = sum / n;
    double ss = 0.0;
    for (double v : col) ss += (v - mean) * (v - mean);
    out.mean.push_back(mean);
    out.sem.push_back(records.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0);
  }
  return out;
}

// ---- heterodyne readout -----------------------------------------------------------------

double heterodyne_sigma(double T_int, double kappa_b, double eta) {
  if (!(T_int > 0.0)) throw InvalidArgument("heterodyne: T_int must be positive");
  if (!(kappa_b > 0.0)) throw InvalidArgument("heterodyne: kappa_b must be positive");
  if (!(eta > 0.0 && eta <= 1.0)) throw InvalidArgument("heterodyne: eta must lie in (0, 1]");
  return std::sqrt(1.0 / (2.0 * eta * kappa_b * T_int));
}

std::vector<std::vector<cplx>> heterodyne_readout(const std::vector<cplx>& pointer_amps, double T_int, double kappa_b,
                                                  double eta, std::uint64_t seed, int n_shots) {
  const double sigma = heterodyne_sigma(T_int, kappa_b, eta);
  if (n_shots < 1) throw InvalidArgument("heterodyne_readout: need at least one shot");
  std::vector<std::vector<cplx>> out;
  for (std::size_t p = 0; p < pointer_amps.size(); ++p) {
    Rng rng(derive_seed(seed, p));
    std::vector<cplx> shots(n_shots);
    for (auto& s : shots) s = pointer_amps[p] + sigma * rng.normal_pair();
    out.push_back(std::move(shots));
  }
  return out;
}

double heterodyne_discrimination_error(cplx beta_0, cplx beta_1, double T_int, double kappa_b, double eta) {
  const double sigma = heterodyne_sigma(T_int, kappa_b, eta);
  return 0.5 * std::erfc(std::abs(beta_1 - beta_0) / (2.0 * sigma) / std::sqrt(2.0));
}

double fit_heterodyne_efficiency(cplx beta_0, cplx beta_1, double T_int, double kappa_b, double target_fidelity) {
  if (!(target_fidelity > 0.5 && target_fidelity < 1.0)) {
    throw InvalidArgument("fit_heterodyne_efficiency: target fidelity outside (0.5, 1)");
  }
  const double d = std::abs(beta_1 - beta_0);
  if (d == 0.0) throw DegenerateInput("fit_heterodyne_efficiency: identical pointers");
  // fidelity = Phi(d / (2 sigma)), sigma^2 = 1 / (2 eta kappa_b T_int)
  const double z = boost::math::quantile(boost::math::normal(), target_fidelity);
  const double eta = 2.0 * z * z / (kappa_b * T_int * d * d);
  if (eta > 1.0) {
    std::ostringstream os;
    os << "fit_heterodyne_efficiency: fidelity " << target_fidelity << " needs eta = " << eta << " > 1";
    throw NumericalError(os.str());
  }
  return eta;
}

// ---- telegraph traces ---------------------------------------------------------------------

TelegraphTrace telegraph_synthesize(double T_X, double T_int, double total, std::uint64_t seed) {
  if (!(T_X > 0.0)) throw InvalidArgument("telegraph_synthesize: T_X must be positive");
  if (!(T_int > 0.0) || !std::isfinite(T_int)) throw InvalidArgument("telegraph_synthesize: T_int must be positive");
  if (!(total >= 0.0) || !std::isfinite(total)) throw InvalidArgument("telegraph_synthesize: bad total duration");
  if (!(T_int < T_X / 10.0)) warn("telegraph_synthesize: T_int is not below T_X / 10");
  const long n = static_cast<long>(std::floor(total / T_int + 1e-9)) + 1;
  const double p = std::isinf(T_X) ? 0.0 : -0.5 * std::expm1(-T_int / T_X);
  Rng rng(derive_seed(seed, 0));
  TelegraphTrace tr;
  tr.times.reserve(n);
  tr.values.reserve(n);
  int sign = rng.uniform() <= 0.5 ? 1 : -1;
  for (long k = 0; k < n; ++k) {
    if (k > 0 && rng.uniform() <= p) sign = -sign;
    tr.times.push_back(k * T_int);
    tr.values.push_back(sign);
  }
  return tr;
}

RealTimeTrace simulate_realtime_trace(double T_X, double T_int, double total, cplx b_plus, cplx b_minus,
                                      double kappa_b, double eta, std::uint64_t seed, double duty) {
  if (!(duty > 0.0 && duty <= 1.0)) throw InvalidArgument("simulate_realtime_trace: duty must lie in (0, 1]");
  if (b_plus == b_minus) throw DegenerateInput("simulate_realtime_trace: identical pointers");
  const double sigma = heterodyne_sigma(T_int, kappa_b, eta);
  RealTimeTrace out;
  out.truth = telegraph_synthesize(T_X, T_int / duty, total, seed);
  Rng rng(derive_seed(seed, 1));
  const cplx axis = (b_plus - b_minus) / std::abs(b_plus - b_minus);
  const cplx mid = 0.5 * (b_plus + b_minus);
  out.inferred.times = out.truth.times;
  out.inferred.threshold = 0.0;
  for (std::size_t k = 0; k < out.truth.times.size(); ++k) {
    const cplx v = (out.truth.values[k] > 0 ? b_plus : b_minus) + sigma * rng.normal_pair();
    out.samples.push_back({out.truth.times[k], T_int, v});
    out.inferred.values.push_back((std::conj(axis) * (v - mid)).real() >= 0.0 ? 1 : -1);
  }
  return out;
}

// ---- bit-flip time ----------------------------------------------------------------------------

namespace {

BitflipEstimate from_dwell(const std::vector<TelegraphTrace>& traces) {
  BitflipEstimate est{std::nullopt, std::numeric_limits<double>::quiet_NaN(), dwell_estimator(traces), 0, false};
  est.flips = est.dwell.switches;
  est.lower_bound_only = est.dwell.lower_bound_only;
  if (est.flips < 100) warn("bit-flip estimate rests on fewer than 100 flips");
  return est;
}

}  // namespace

BitflipEstimate bitflip_time_from_trajectories(const std::vector<TrajectoryRecord>& records, const std::string& z_name) {
  if (records.empty()) throw InvalidArgument("bitflip_time_from_trajectories: no records");
  std::vector<TelegraphTrace> traces;
  for (const auto& r : records) {
    TelegraphTrace tr;
    tr.times = r.times;
    for (double z : r.series(z_name)) tr.values.push_back(z >= 0.0 ? 1 : -1);
    traces.push_back(std::move(tr));
  }
  BitflipEstimate est = from_dwell(traces);
  const EnsembleSeries mean = ensemble_mean(records, z_name);
  if (mean.times.size() >= 8) {
    // Z relaxes to 0 by the symmetry of the two branches
    const FitResult fit = fit_exponential({mean.times, mean.mean}, 0.0);
    if (fit.converged) est.T_X_ensemble = fit.value("T");
    est.ensemble_fit = fit;
  }
  return est;
}

BitflipEstimate bitflip_time_from_traces(const std::vector<TelegraphTrace>& traces) { return from_dwell(traces); }

}  // namespace catq
