#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "catq/errors.hpp"
#include "catq/lindblad.hpp"
#include "catq/model.hpp"
#include "catq/trajectories.hpp"
#include "catq/warnings.hpp"

using namespace catq;

namespace {

std::vector<double> grid(double t1, int n) {
  std::vector<double> t(n);
  for (int k = 0; k < n; ++k) t[k] = t1 * k / (n - 1);
  return t;
}

// Asymptotic Kolmogorov-Smirnov p-value for statistic D on n samples.
double ks_pvalue(double D, double n) {
  const double lam = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * D;
  double p = 0.0;
  for (int k = 1; k < 100; ++k) p += 2.0 * (k % 2 ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lam * lam);
  return std::clamp(p, 0.0, 1.0);
}

struct CatProblem {
  SpaceDims dims;
  TimeDependentProblem problem;
  QOperator Z;
  QOperator P;
};

// Stabilised alpha^2 = 2 with enhanced single-photon loss, starting from
// cos(pi/8)|C+> + sin(pi/8)|C->, so that <Z> and <P> both start near 0.71.
CatProblem cat_problem(double kappa_scale, double duration) {
  const SpaceDims dims(16, 4);
  PhysicalParams p;
  p.kappa_a *= kappa_scale;
  const double alpha = std::sqrt(2.0);
  const QOperator H = hamiltonian_two_photon(p, {buffer_drive_for(alpha, p.g2), 0.0}, dims);
  const VectorXc plus = cat_state(alpha, Parity::even, dims).ket();
  const VectorXc minus = cat_state(alpha, Parity::odd, dims).ket();
  const double th = std::acos(-1.0) / 8.0;
  QState init = QState::from_ket(dims, std::cos(th) * plus + std::sin(th) * minus);
  return {dims, constant_problem(H, collapse_operators(p, dims), init, duration),
          embed(half_space_sign(alpha, dims.n_mem()), Mode::memory, dims), parity_operator(dims, Mode::memory)};
}

}  // namespace

TEST_CASE("seed derivation") {
  CHECK(derive_seed(1, 0) == derive_seed(1, 0));
  CHECK(derive_seed(1, 0) != derive_seed(1, 1));
  CHECK(derive_seed(1, 0) != derive_seed(2, 0));
}

TEST_CASE("jump unraveling") {
  SUBCASE("no collapse operators reproduce unitary evolution") {
    const SpaceDims dims(14, 3);
    PhysicalParams p;
    const QOperator H = hamiltonian_two_photon(p, {buffer_drive_for(1.2, p.g2), 0.0}, dims);
    const auto prob = constant_problem(H, {}, coherent_state(0.5, dims, Mode::memory), 1e-6);
    const auto times = grid(1e-6, 11);
    TrajectoryOptions opt;
    opt.observables = {{"n_a", number_operator(dims, Mode::memory)}};
    const auto recs = jump_unravel(prob, times, 3, 2, opt);
    EvolveOptions eo;
    eo.observables = opt.observables;
    eo.check_leakage = false;
    const auto ev = evolve(prob, times, eo);
    for (std::size_t i = 0; i < times.size(); ++i) {
      CHECK(recs[0].series("n_a")[i] == doctest::Approx(ev.series("n_a")[i].real()).epsilon(1e-6));
      CHECK(recs[1].series("n_a")[i] == recs[0].series("n_a")[i]);
    }
    CHECK(recs[0].jumps.empty());
  }

  SUBCASE("single-photon decay has exponential jump times") {
    const SpaceDims dims(3, 2);
    const double kappa = 1e6;
    std::vector<CollapseOperator> c{{"loss", kappa, mode_operators(dims).a}};
    const double T = 8.0 / kappa;
    const auto prob = constant_problem(QOperator(dims), c, fock_state(1, 0, dims), T);
    const auto recs = jump_unravel(prob, {T}, 11, 10000);
    std::vector<double> jt;
    for (const auto& r : recs) {
      CHECK(r.jumps.size() <= 1);
      if (!r.jumps.empty()) jt.push_back(r.jumps[0].time);
    }
    std::sort(jt.begin(), jt.end());
    // exponential conditioned on a jump before T
    const double norm = 1.0 - std::exp(-kappa * T);
    double D = 0.0;
    const double n = double(jt.size());
    for (std::size_t k = 0; k < jt.size(); ++k) {
      const double F = (1.0 - std::exp(-kappa * jt[k])) / norm;
      D = std::max({D, std::abs(F - k / n), std::abs(F - (k + 1) / n)});
    }
    CHECK(ks_pvalue(D, n) > 0.01);
    const double expected_no_jump = 10000 * std::exp(-kappa * T);
    CHECK(std::abs((10000 - n) - expected_no_jump) < 5.0 * std::sqrt(expected_no_jump) + 1.0);
  }

  SUBCASE("ensemble matches the master equation") {
    const CatProblem cp = cat_problem(10.0, 2e-6);
    const auto times = grid(2e-6, 20);
    TrajectoryOptions opt;
    opt.observables = {{"Z", cp.Z}, {"P", cp.P}};
    const auto recs = jump_unravel(cp.problem, times, 2024, 300, opt);
    EvolveOptions eo;
    eo.observables = opt.observables;
    eo.check_leakage = false;
    const auto ev = evolve(cp.problem, times, eo);
    for (const char* name : {"Z", "P"}) {
      const auto m = ensemble_mean(recs, name);
      for (std::size_t i = 0; i < times.size(); ++i) {
        CHECK(std::abs(m.mean[i] - ev.series(name)[i].real()) <= 4.0 * m.sem[i] + 1e-6);
      }
    }
    std::size_t jumps = 0;
    for (const auto& r : recs) jumps += r.jumps.size();
    CHECK(jumps > 0);
  }

  SUBCASE("bit-exact reproducibility and order independence") {
    const CatProblem cp = cat_problem(10.0, 5e-7);
    TrajectoryOptions opt;
    opt.observables = {{"P", cp.P}};
    const auto times = grid(5e-7, 6);
    const auto a = jump_unravel(cp.problem, times, 99, 12, opt);
    opt.threads = 3;
    const auto b = jump_unravel(cp.problem, times, 99, 12, opt);
    for (std::size_t k = 0; k < a.size(); ++k) {
      CHECK(a[k].seed == b[k].seed);
      CHECK(a[k].values == b[k].values);
      CHECK(a[k].jumps.size() == b[k].jumps.size());
    }
    auto reversed = a;
    std::reverse(reversed.begin(), reversed.end());
    CHECK(ensemble_mean(a, "P").mean == ensemble_mean(reversed, "P").mean);
  }

  SUBCASE("density-matrix initial states are purified") {
    const SpaceDims dims(8, 2);
    const double kappa = 1e6;
    MatrixXc rho_mem = MatrixXc::Zero(8, 8);
    rho_mem(0, 0) = 0.5;
    rho_mem(2, 2) = 0.3;
    rho_mem(3, 3) = 0.2;
    std::vector<CollapseOperator> c{{"loss", kappa, mode_operators(dims).a}};
    const auto prob = constant_problem(QOperator(dims), c, with_buffer_vacuum(rho_mem, dims), 2e-6);
    TrajectoryOptions opt;
    opt.observables = {{"n", number_operator(dims, Mode::memory)}};
    const auto times = grid(2e-6, 5);
    const auto recs = jump_unravel(prob, times, 5, 4000, opt);
    const auto m = ensemble_mean(recs, "n");
    for (std::size_t i = 0; i < times.size(); ++i) {
      const double exact = 1.2 * std::exp(-kappa * times[i]);
      CHECK(std::abs(m.mean[i] - exact) <= 4.0 * m.sem[i] + 1e-9);
    }
  }

  CHECK_THROWS_AS(jump_unravel(cat_problem(1.0, 1e-7).problem, {2e-7}, 1, 1), InvalidArgument);
}

TEST_CASE("heterodyne readout") {
  const double kb = PhysicalParams{}.kappa_b;
  SUBCASE("infinite integration returns the pointers") {
    const auto s = heterodyne_readout({cplx(0.3, -0.1), cplx(0.0, 1.0)}, 1e300, kb, 1.0, 4, 5);
    CHECK(std::abs(s[0][3] - cplx(0.3, -0.1)) < 1e-100);
    CHECK(std::abs(s[1][0] - cplx(0.0, 1.0)) < 1e-100);
  }

  SUBCASE("discrimination error against the Gaussian oracle") {
    const cplx beta(0.02, 0.01);
    const double T = 20e-6, eta = 0.5;
    const auto s = heterodyne_readout({beta, -beta}, T, kb, eta, 8, 100000);
    const double q = heterodyne_discrimination_error(-beta, beta, T, kb, eta);
    CHECK(q == doctest::Approx(0.5 * std::erfc(std::sqrt(2.0 * eta * kb * T) * std::abs(beta) / std::sqrt(2.0))));
    CHECK(1.0 - readout_fidelity(s[0], s[1]) == doctest::Approx(q).epsilon(0.05));
    CHECK(heterodyne_sigma(T, kb, eta) == doctest::Approx(std::sqrt(1.0 / (2.0 * eta * kb * T))));
  }

  SUBCASE("efficiency for a target fidelity") {
    // pointers of 0 and 10 memory photons in the linear longitudinal response
    const PhysicalParams p;
    const cplx b0 = 0.0, b10 = -2.0 * kI * p.g_l * 10.0 / kb;
    const double T = 10e-6;
    const double eta = fit_heterodyne_efficiency(b0, b10, T, kb, 0.89);
    CHECK(eta > 0.0);
    CHECK(eta <= 1.0);
    const auto s = heterodyne_readout({b0, b10}, T, kb, eta, 21, 50000);
    CHECK(readout_fidelity(s[0], s[1]) == doctest::Approx(0.89).epsilon(0.01));
    CHECK_THROWS_AS(fit_heterodyne_efficiency(0.0, 1e-4, T, kb, 0.99), NumericalError);
  }

  SUBCASE("deterministic per seed") {
    CHECK(heterodyne_readout({0.1}, 1e-6, kb, 1.0, 3, 10) == heterodyne_readout({0.1}, 1e-6, kb, 1.0, 3, 10));
    CHECK(heterodyne_readout({0.1}, 1e-6, kb, 1.0, 3, 10) != heterodyne_readout({0.1}, 1e-6, kb, 1.0, 4, 10));
  }
}

TEST_CASE("telegraph traces") {
  SUBCASE("infinite switching time gives a constant trace") {
    const auto tr = telegraph_synthesize(INFINITY, 1e-3, 1.0, 2);
    CHECK(std::all_of(tr.values.begin(), tr.values.end(), [&](int v) { return v == tr.values[0]; }));
    CHECK(tr.times.size() == 1001);
  }

  SUBCASE("autocorrelation decays with T_X") {
    double sum = 0.0;
    for (int seed = 0; seed < 50; ++seed) {
      const auto tr = telegraph_synthesize(1.0, 0.01, 100.0, 300 + seed);
      const FitResult f = fit_exponential(autocorrelation(tr, 300));
      sum += f.value("T");
    }
    CHECK(sum / 50.0 == doctest::Approx(1.0).epsilon(0.2));
  }

  SUBCASE("mean dwell is 2 T_X for exp(-t / T_X) correlations") {
    const auto tr = telegraph_synthesize(1.0, 0.002, 4000.0, 7);
    std::vector<double> dwell;
    double start = -1.0;
    for (std::size_t k = 1; k < tr.values.size(); ++k) {
      if (tr.values[k] == tr.values[k - 1]) continue;
      if (start >= 0.0) dwell.push_back(tr.times[k] - start);
      start = tr.times[k];
    }
    const double mean = std::accumulate(dwell.begin(), dwell.end(), 0.0) / dwell.size();
    CHECK(mean == doctest::Approx(2.0).epsilon(0.05));
  }

  SUBCASE("regime warning") {
    clear_warnings();
    telegraph_synthesize(1.0, 0.2, 10.0, 1);
    CHECK(!warnings().empty());
  }

  SUBCASE("real-time trace through the heterodyne model") {
    const double kb = PhysicalParams{}.kappa_b;
    const auto rt = simulate_realtime_trace(1.0, 250e-6, 50.0, 0.01, -0.01, kb, 1.0, 5);
    int agree = 0;
    for (std::size_t k = 0; k < rt.truth.values.size(); ++k) agree += rt.truth.values[k] == rt.inferred.values[k];
    const double expected = 1.0 - heterodyne_discrimination_error(0.01, -0.01, 250e-6, kb, 1.0);
    CHECK(double(agree) / rt.truth.values.size() == doctest::Approx(expected).epsilon(0.01));
    const auto duty = simulate_realtime_trace(1.0, 250e-6, 1.0, 0.01, -0.01, kb, 1.0, 5, 0.25);
    CHECK(duty.truth.times[1] == doctest::Approx(1e-3));
  }
}

TEST_CASE("bit-flip time estimates") {
  SUBCASE("coverage on synthetic telegraph traces") {
    int covered = 0;
    for (int seed = 0; seed < 100; ++seed) {
      const auto est = bitflip_time_from_traces({telegraph_synthesize(1e-3, 1e-5, 0.2, 900 + seed)});
      CHECK(!est.lower_bound_only);
      covered += est.dwell.ci_low <= 1e-3 && 1e-3 <= est.dwell.ci_high;
    }
    CHECK(covered >= 90);
  }

  SUBCASE("no flips give a flagged lower bound") {
    const auto est = bitflip_time_from_traces({telegraph_synthesize(INFINITY, 1e-3, 2.0, 1)});
    CHECK(est.lower_bound_only);
    CHECK(est.flips == 0);
    CHECK(est.dwell.T_X == doctest::Approx(2.0 / (2.0 * 2.99573)).epsilon(1e-4));
  }

  SUBCASE("ensemble fit and dwell estimate from records") {
    std::vector<TrajectoryRecord> recs;
    const auto times = grid(3.0, 31);
    for (int k = 0; k < 1000; ++k) {
      const auto tr = telegraph_synthesize(1.0, 0.1, 3.0, 50 + k);
      TrajectoryRecord r;
      r.times = times;
      r.names = {"Z"};
      r.values.assign(1, {});
      for (int v : tr.values) r.values[0].push_back(double(v * tr.values[0]));
      recs.push_back(std::move(r));
    }
    const auto est = bitflip_time_from_trajectories(recs);
    REQUIRE(est.ensemble_fit.has_value());
    CHECK(est.T_X_ensemble == doctest::Approx(1.0).epsilon(0.1));
    CHECK(est.ensemble_fit->value("y0") == 0.0);
    CHECK(est.dwell.ci_low <= 1.0);
    CHECK(est.dwell.ci_high >= 1.0);
    CHECK(est.flips > 100);
  }
}
