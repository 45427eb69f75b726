// Acceptance run: one PASS/FAIL line per criterion. Parameters, grids and
// seeds below are fixed in advance; tolerances are the contract values.

#include <chrono>
#include <cstdlib>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "catq/analysis.hpp"
#include "catq/cli.hpp"
#include "catq/errors.hpp"
#include "catq/lindblad.hpp"
#include "catq/model.hpp"
#include "catq/semiclassical.hpp"
#include "catq/trajectories.hpp"
#include "catq/warnings.hpp"

using namespace catq;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<double> grid(double t1, int n) {
  std::vector<double> t(n);
  for (int k = 0; k < n; ++k) t[k] = t1 * k / (n - 1);
  return t;
}

int levels_for(double alpha) { return min_levels_for(alpha) + 1; }

PhysicalParams cold(PhysicalParams p = {}) {
  p.n_th_mem = 0.0;
  p.n_th_buf = 0.0;
  return p;
}

// Stabilised even cat with a memory drive in phase with alpha; returns <P_a>(t).
Series zeno_parity(double alpha2, double eps_hz, const PhysicalParams& p) {
  const double alpha = std::sqrt(alpha2);
  const SpaceDims dims(22, 6);
  const double eps = hz_to_rad(eps_hz);
  const double period = kTwoPi / (4.0 * alpha * eps);
  const double T = 2.0 * period;
  const auto H = hamiltonian_two_photon(p, {buffer_drive_for(alpha, p.g2), eps}, dims);
  const auto prob = constant_problem(H, collapse_operators(p, dims), cat_state(alpha, Parity::even, dims), T);
  EvolveOptions o;
  o.observables = {{"P", parity_operator(dims, Mode::memory)}};
  const auto times = grid(T, 121);
  const auto res = evolve(prob, times, o);
  Series s;
  for (std::size_t i = 0; i < times.size(); ++i) {
    s.x.push_back(times[i]);
    s.y.push_back(res.series("P")[i].real());
  }
  return s;
}

std::pair<double, double> linear_fit(const std::vector<double>& x, const std::vector<double>& y, double* r2 = nullptr) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i] / n;
    my += y[i] / n;
  }
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (r2 != nullptr) *r2 = sxy * sxy / (sxx * syy);
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

// ---- 1 ------------------------------------------------------------------------------------

Outcome alpha0_gap() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto cfg = parse_config(R"({"job": "gap", "hilbert": {"n_mem": 20, "n_buf": 6},
    "params": {"kappa_a_hz": 0, "n_th_mem": 0, "n_th_buf": 0},
    "gap": {"alpha": 0, "g2_over_kappa_b": [0.05, 0.1, 0.19, 0.3, 0.5], "max_dim": 120}})");
  const auto res = execute(cfg);
  double worst = 0.0;
  for (const auto& row : res.tables.at(0).rows) worst = std::max(worst, std::abs(row.back()));
  const double elapsed = seconds_since(t0);
  return {worst < 0.01 && elapsed < 300.0,
          fmt("max relative deviation %.2e over 5 ratios (limit 1e-2), %.1f s (limit 300 s)", worst, elapsed)};
}

// ---- 2 ------------------------------------------------------------------------------------

Outcome confinement() {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> g2_hz(0.1e6, 2.0e6), kb_hz(0.5e6, 10e6), amp(0.2, 3.0);
  double worst = 0.0;
  int over = 0, under = 0;
  for (int k = 0; k < 50; ++k) {
    const double g2 = hz_to_rad(g2_hz(rng));
    const double kb = hz_to_rad(kb_hz(rng));
    const double a = amp(rng);
    (8.0 * g2 * a < kb ? over : under)++;
    const double closed = kappa_conf_closed_form(g2, kb, a);
    const double lin = stability_at({a, 0.0}, g2, kb, a).kappa_conf;
    worst = std::max(worst, std::abs(closed - lin) / lin);
  }
  const PhysicalParams p;
  const double nominal = rad_to_hz(kappa_conf_closed_form(p.g2.real(), p.kappa_b, std::sqrt(11.3))) / 1e6;
  const bool pass = worst < 1e-10 && over >= 5 && under >= 5 && std::abs(nominal / 1.3 - 1.0) < 0.01;
  return {pass, fmt("max relative deviation %.2e (limit 1e-10), %d overdamped / %d underdamped draws; "
                    "nominal %.4f MHz (1.3 +- 1%%)",
                    worst, over, under, nominal)};
}

// ---- 3 and 4 share the Zeno runs ------------------------------------------------------------

struct ZenoData {
  std::vector<double> alpha2{2.5, 4.0};
  std::vector<double> eps_hz{0.025e6, 0.05e6, 0.1e6};
  std::vector<std::vector<FitResult>> lossy;     // Table values of kappa_a
  std::vector<std::vector<FitResult>> lossless;  // kappa_a = 0
  double lossy_seconds = 0.0;
  double lossless_seconds = 0.0;
};

const ZenoData& zeno_data() {
  static const ZenoData data = [] {
    ZenoData d;
    const PhysicalParams lossy = cold();
    PhysicalParams lossless = cold();
    lossless.kappa_a = 0.0;
    for (double a2 : d.alpha2) {
      d.lossy.emplace_back();
      d.lossless.emplace_back();
      for (double e : d.eps_hz) {
        auto t0 = std::chrono::steady_clock::now();
        d.lossy.back().push_back(fit_damped_cosine(zeno_parity(a2, e, lossy)));
        d.lossy_seconds += seconds_since(t0);
        t0 = std::chrono::steady_clock::now();
        d.lossless.back().push_back(fit_damped_cosine(zeno_parity(a2, e, lossless)));
        d.lossless_seconds += seconds_since(t0);
      }
    }
    return d;
  }();
  return data;
}

Outcome zeno_frequency() {
  const auto& d = zeno_data();
  bool pass = d.lossy_seconds < 600.0;
  std::string ratios;
  for (std::size_t i = 0; i < d.alpha2.size(); ++i) {
    for (std::size_t k = 0; k < d.eps_hz.size(); ++k) {
      const double predicted = 4.0 * std::sqrt(d.alpha2[i]) * hz_to_rad(d.eps_hz[k]);
      const double r = d.lossy[i][k].value("omega") / predicted;
      pass = pass && d.lossy[i][k].converged && std::abs(r - 1.0) < 0.05;
      ratios += fmt(" %.4f", r);
    }
  }
  return {pass, fmt("Omega_fit / 4|alpha|eps_Z at alpha^2 {2.5, 4} x eps_Z/2pi {25, 50, 100} kHz:%s (limit 5%%), "
                    "%.0f s (limit 600 s)",
                    ratios.c_str(), d.lossy_seconds)};
}

Outcome drive_dephasing() {
  const auto& d = zeno_data();
  const PhysicalParams p = cold();
  bool pass = true;
  std::string ratios, slopes;
  for (std::size_t i = 0; i < d.alpha2.size(); ++i) {
    const double alpha = std::sqrt(d.alpha2[i]);
    std::vector<double> lx, ly;
    for (std::size_t k = 0; k < d.eps_hz.size(); ++k) {
      const double eps = hz_to_rad(d.eps_hz[k]);
      const double predicted = drive_dephasing_rate(eps, alpha, p.g2, p.kappa_b) + 2.0 * p.kappa_a * d.alpha2[i];
      const double r = (1.0 / d.lossy[i][k].value("T")) / predicted;
      pass = pass && std::abs(r - 1.0) < 0.15;
      ratios += fmt(" %.3f", r);
      lx.push_back(std::log(eps));
      ly.push_back(std::log(1.0 / d.lossless[i][k].value("T")));
    }
    const double slope = linear_fit(lx, ly).first;
    pass = pass && std::abs(slope - 2.0) < 0.1;
    slopes += fmt(" %.3f", slope);
  }
  return {pass, fmt("Gamma_fit / (drive + 2 kappa_a |alpha|^2):%s (limit 15%%); log-log exponent without memory "
                    "loss:%s (2.0 +- 0.1)",
                    ratios.c_str(), slopes.c_str())};
}

// ---- 5 ------------------------------------------------------------------------------------

Outcome phase_flip() {
  const PhysicalParams p = cold();
  std::vector<double> xs, rates;
  std::string detail;
  bool converged = true;
  for (double a2 : {2.0, 4.0, 6.0}) {
    const double alpha = std::sqrt(a2);
    const SpaceDims dims(levels_for(alpha) + 1, 5);
    const double T = 1.5 / (2.0 * p.kappa_a * a2);
    const auto H = hamiltonian_two_photon(p, {buffer_drive_for(alpha, p.g2), 0.0}, dims);
    const auto prob = constant_problem(H, collapse_operators(p, dims), cat_state(alpha, Parity::even, dims), T);
    EvolveOptions o;
    o.observables = {{"P", parity_operator(dims, Mode::memory)}};
    const auto times = grid(T, 41);
    const auto res = evolve(prob, times, o);
    Series s;
    for (std::size_t i = 0; i < times.size(); ++i) {
      s.x.push_back(times[i]);
      s.y.push_back(res.series("P")[i].real());
    }
    const auto f = fit_exponential(s, 0.0);
    converged = converged && f.converged;
    xs.push_back(a2);
    rates.push_back(1.0 / f.value("T"));
    detail += fmt(" %.4g", rad_to_hz(rates.back()));
  }
  const double slope = linear_fit(xs, rates).first;
  const double r = slope / (2.0 * p.kappa_a);
  return {converged && std::abs(r - 1.0) < 0.1,
          fmt("parity decay rates/2pi at alpha^2 {2, 4, 6}:%s Hz; slope / 2 kappa_a = %.4f (limit 10%%)",
              detail.c_str(), r)};
}

// ---- 6 ------------------------------------------------------------------------------------

Outcome deflation() {
  PhysicalParams p = cold();
  p.kappa_a = 0.0;
  const SpaceDims dims(levels_for(2.0), 4);
  bool pass = true;
  std::string detail;
  for (double a : {0.5, 1.0, 1.5, 2.0}) {
    const double dT = 4e-6;
    const auto prob = compile(build_deflation_probe(a, dT, 0.0), p, dims, fock_state(0, 0, dims));
    EvolveOptions o;
    o.observables = {{"n", number_operator(dims, Mode::memory)}};
    const auto res = evolve(prob, {dT}, o);
    const double n = res.series("n")[0].real();
    const double expected = 0.5 * (1.0 - std::exp(-2.0 * a * a));
    const double r = n / expected;
    pass = pass && std::abs(r - 1.0) < 0.02;
    detail += fmt(" %.5f", r);
  }
  return {pass, fmt("n_final / (1 - exp(-2|alpha|^2))/2 at alpha {0.5, 1, 1.5, 2}:%s (limit 2%%)", detail.c_str())};
}

// ---- 7 ------------------------------------------------------------------------------------

Outcome buffer_pointer_response() {
  PhysicalParams p = cold();
  p.kappa_a = 0.0;
  const double alpha = 2.0;
  const cplx eps = hz_to_rad(0.1e6);
  const SpaceDims dims(levels_for(alpha), 5);
  const auto H = hamiltonian_two_photon(p, {buffer_drive_for(alpha, p.g2), eps}, dims);
  const auto expected = buffer_pointer(eps, alpha, p.g2);
  const auto b = mode_operators(dims).b;
  bool pass = true;
  std::string detail;
  for (double sign : {1.0, -1.0}) {
    const auto prob = constant_problem(H, collapse_operators(p, dims), coherent_state(sign * alpha, dims, Mode::memory),
                                       2e-6);
    EvolveOptions o;
    o.observables = {{"b", b}};
    const cplx got = evolve(prob, {2e-6}, o).series("b")[0];
    const cplx want = sign > 0 ? expected.b_plus : expected.b_minus;
    const double rel = std::abs(got - want) / std::abs(want);
    pass = pass && rel < 0.05;
    detail += fmt(" branch %+.0f: <b> = %.5f%+.5fi, predicted %.5f%+.5fi (%.2f%%);", sign, got.real(), got.imag(),
                  want.real(), want.imag(), 100.0 * rel);
  }
  return {pass, "alpha^2 = 4, eps_Z/2pi = 100 kHz," + detail + " limit 5%"};
}

// ---- 8 ------------------------------------------------------------------------------------

Outcome bitflip_scaling() {
  const auto cfg = parse_config(R"({"job": "bitflip", "seed": 8, "hilbert": {"n_mem": 22, "n_buf": 4},
    "bitflip": {"alpha_squared": [1, 2, 3, 4], "kappa_a_scale": 100, "n_th_mem_scale": 1,
                "durations": [2e-6, 5e-6, 12e-6, 30e-6], "n_times": 101, "n_traj": 100}})");
  const auto res = execute(cfg);
  std::string tx;
  for (const auto& row : res.tables.at(0).rows) tx += fmt(" %.3g", row[1] * 1e6);
  const auto& fit = res.documents.at(0).second;
  if (!fit.contains("r_squared")) return {false, "no log-linear fit: T_X (us)" + tx};
  const double r2 = fit["r_squared"].get<double>();
  return {r2 > 0.95, fmt("T_X (us) at alpha^2 {1, 2, 3, 4}:%s; factor per photon %.3f; R^2 = %.4f (limit > 0.95)",
                         tx.c_str(), fit["factor_per_photon"].get<double>(), r2)};
}

// ---- 9 ------------------------------------------------------------------------------------

Outcome holonomic() {
  const auto cfg = parse_config(R"({"job": "protocol/holonomic", "hilbert": {"n_mem": 24, "n_buf": 6},
    "protocol": {"alpha1": 1.6, "alpha2": 1.6,
                 "states": [{"label": "vacuum", "type": "vacuum"}, {"label": "fock1", "type": "fock", "n": 1},
                            {"label": "cat", "type": "cat_even", "alpha": 1.61245154965971}],
                 "grid": {"n_re": 1, "re_min": 0, "re_max": 0, "n_im": 31, "im_min": -1.5, "im_max": 1.5}}})");
  const auto res = execute(cfg);
  const int center = 15;
  // Linear map, so the readout of the zero-parity mixture (|0><0| + |1><1|)/2 at
  // the origin is the midpoint of the two reference readouts.
  const double threshold = 0.5 * (res.tables[0].rows[center][2] + res.tables[1].rows[center][2]);
  bool pass = true;
  std::string detail = fmt("threshold %.3f;", threshold);
  for (const auto& t : res.tables) {
    const int n = static_cast<int>(t.rows.size());
    std::vector<int> direct(n), measured(n);
    for (int i = 0; i < n; ++i) {
      direct[i] = t.rows[i][3] > 0 ? 1 : -1;
      measured[i] = t.rows[i][2] > threshold ? 1 : -1;
    }
    // A pixel may disagree only next to a sign change of the direct Wigner or
    // where |W| is below 5% of its largest possible value 2/pi.
    int bad = 0;
    for (int i = 0; i < n; ++i) {
      if (direct[i] == measured[i]) continue;
      const bool edge = (i > 0 && direct[i - 1] != direct[i]) || (i + 1 < n && direct[i + 1] != direct[i]);
      const bool faint = std::abs(t.rows[i][3]) < 0.05 * 2.0 / M_PI;
      if (!edge && !faint) ++bad;
    }
    // Sign changes are counted over resolved pixels only; a faint pixel has no
    // reliable sign under the same 5% band.
    int changes_direct = 0, changes_measured = 0, last = -1;
    for (int i = 0; i < n; ++i) {
      if (std::abs(t.rows[i][3]) < 0.05 * 2.0 / M_PI) continue;
      if (last >= 0) {
        changes_direct += direct[i] != direct[last];
        changes_measured += measured[i] != measured[last];
      }
      last = i;
    }
    const bool origin = measured[center] == direct[center];
    const double contrast = (t.rows[center][2] - threshold);
    pass = pass && bad == 0 && origin && changes_direct == changes_measured;
    detail += fmt(" %s: W(0) sign %s, readout-threshold at 0 = %+.3f, sign changes %d/%d, off-pixels %d;",
                  t.file.c_str(), origin ? "ok" : "wrong", contrast, changes_measured, changes_direct, bad);
  }
  return {pass, detail};
}

// ---- 10 -----------------------------------------------------------------------------------

Outcome telegraph() {
  set_warning_echo(false);
  int covered = 0;
  for (int k = 0; k < 100; ++k) {
    const auto trace = telegraph_synthesize(1.0, 0.02, 100.0, derive_seed(10, k));
    const auto est = dwell_estimator(trace);
    covered += est.ci_low <= 1.0 && 1.0 <= est.ci_high;
  }
  set_warning_echo(true);
  return {covered >= 90, fmt("95%% interval covers T_X in %d / 100 traces of 100 T_X (limit 90)", covered)};
}

// ---- 11 -----------------------------------------------------------------------------------

Outcome fit_round_trips() {
  double worst = 0.0;
  auto rel = [&](double got, double want) {
    const double e = want == 0.0 ? std::abs(got) : std::abs(got / want - 1.0);
    worst = std::max(worst, e);
  };
  bool converged = true;
  {
    Series s;
    for (int i = 0; i < 40; ++i) {
      s.x.push_back(3.0 * i / 39);
      s.y.push_back(0.2 + 1.5 * std::exp(-s.x.back() / 0.7));
    }
    const auto f = fit_exponential(s);
    converged = converged && f.converged;
    rel(f.value("y0"), 0.2);
    rel(f.value("A"), 1.5);
    rel(f.value("T"), 0.7);
  }
  {
    Series s;
    for (int i = 0; i < 200; ++i) {
      s.x.push_back(6.0 * i / 199);
      s.y.push_back(0.1 + 0.8 * std::exp(-s.x.back() / 2.0) * std::cos(3.0 * s.x.back() + 0.4));
    }
    const auto f = fit_damped_cosine(s);
    converged = converged && f.converged;
    rel(f.value("y0"), 0.1);
    rel(f.value("A"), 0.8);
    rel(f.value("T"), 2.0);
    rel(f.value("omega"), 3.0);
    rel(f.value("phi"), 0.4);
  }
  const double alpha = 2.1, n_th = 0.10;
  Series cut[3];
  const CutKind kinds[3] = {CutKind::mixture, CutKind::cat, CutKind::thermal};
  for (int k = 0; k < 3; ++k) {
    const auto model = wigner_cut_model(kinds[k], ideal_cut_params(kinds[k], alpha, n_th));
    for (int i = 0; i < 161; ++i) {
      cut[k].x.push_back(-4.0 + 8.0 * i / 160);
      cut[k].y.push_back(model(cut[k].x.back()));
    }
  }
  const auto f = fit_wigner_cuts(cut[0], cut[1], cut[2]);
  converged = converged && f.converged;
  rel(f.value("alpha"), alpha);
  rel(f.value("n_th"), n_th);
  rel(f.value("B"), 1.0);
  rel(f.value("A"), ideal_cut_params(CutKind::mixture, alpha, n_th).amplitude);
  rel(f.value("C"), ideal_cut_params(CutKind::cat, alpha, n_th).amplitude);
  rel(f.value("D"), ideal_cut_params(CutKind::thermal, alpha, n_th).amplitude);
  for (const char* o : {"offset_mixture", "offset_cat", "offset_thermal"}) rel(f.value(o), 0.0);
  return {converged && worst < 1e-6,
          fmt("exponential, damped cosine and joint cut fit (alpha = %.4f, n_th = %.4f recovered); worst relative "
              "error %.2e (limit 1e-6)",
              f.value("alpha"), f.value("n_th"), worst)};
}

// ---- 12 -----------------------------------------------------------------------------------

Outcome trajectories_vs_master() {
  const SpaceDims dims(16, 6);
  PhysicalParams p;
  p.kappa_a *= 10.0;
  const double alpha = std::sqrt(2.0);
  const auto H = hamiltonian_two_photon(p, {buffer_drive_for(alpha, p.g2), 0.0}, dims);
  const VectorXc plus = cat_state(alpha, Parity::even, dims).ket();
  const VectorXc minus = cat_state(alpha, Parity::odd, dims).ket();
  const double th = M_PI / 8.0;
  const auto init = QState::from_ket(dims, std::cos(th) * plus + std::sin(th) * minus);
  const double T = 2e-6;
  const auto prob = constant_problem(H, collapse_operators(p, dims), init, T);
  const auto times = grid(T, 20);
  TrajectoryOptions opt;
  opt.observables = {{"Z", embed(half_space_sign(alpha, dims.n_mem()), Mode::memory, dims)},
                     {"P", parity_operator(dims, Mode::memory)}};
  const auto recs = jump_unravel(prob, times, 12, 2000, opt);
  EvolveOptions eo;
  eo.observables = opt.observables;
  const auto ev = evolve(prob, times, eo);
  int outside = 0;
  double worst = 0.0;
  for (const char* name : {"Z", "P"}) {
    const auto m = ensemble_mean(recs, name);
    for (std::size_t i = 0; i < times.size(); ++i) {
      const double diff = std::abs(m.mean[i] - ev.series(name)[i].real());
      // the floor only matters at t = 0, where every trajectory is identical
      if (diff > 3.0 * m.sem[i] + 1e-6) ++outside;
      if (m.sem[i] > 1e-9) worst = std::max(worst, diff / m.sem[i]);
    }
  }
  return {outside == 0, fmt("alpha^2 = 2, 2000 trajectories, 20 times x {Z, P}: %d points outside 3 sigma, "
                            "largest deviation %.2f sigma",
                            outside, worst)};
}

// ---- 13 -----------------------------------------------------------------------------------

Outcome coupling_arithmetic() {
  const CircuitParams c;
  const auto r = coupling_rates(c, PumpKind::longitudinal, 0.1);
  const double ratio = r.g_sp / r.g_l;
  const double exact = 0.5 * (0.29 / 0.06) * (0.29 / 0.06);
  const auto s = saddle_frequencies(c);
  const double split = s.omega_b_minus - s.omega_b_plus;
  const double split_exact = 4.0 * 0.47e9 * 0.29 * 0.29;
  const bool pass = std::abs(ratio - exact) < 1e-12 && std::round(ratio * 100.0) / 100.0 == 11.68 &&
                    std::abs(split / split_exact - 1.0) < 1e-6 && std::round(split / 1e6) == 158.0;
  return {pass, fmt("g_sp/g_l = %.15f (formula %.15f, rounds to 11.68); buffer saddle splitting %.6f MHz "
                    "(formula %.6f MHz, rounds to 158 MHz)",
                    ratio, exact, split / 1e6, split_exact / 1e6)};
}

// ---- 14 -----------------------------------------------------------------------------------

int run_cli_args(std::vector<std::string> args) {
  args.insert(args.begin(), "catq");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

Outcome reproducibility() {
  const fs::path root = fs::temp_directory_path() / "catq_acceptance_rerun";
  fs::remove_all(root);
  fs::create_directories(root);
  const std::vector<std::pair<std::string, std::string>> jobs{
      {"evolve", R"({"job": "evolve", "seed": 14, "hilbert": {"n_mem": 12, "n_buf": 3},
        "evolve": {"initial": {"type": "cat_even", "alpha": 1.2}, "stabilize_alpha": 1.2, "duration": 1e-6,
                   "n_times": 11, "observables": ["Z", "parity_mem", "n_buf"], "method": "jumps", "n_traj": 20}})"},
      {"readout", R"({"job": "readout", "seed": 14, "readout": {"pointers": [0, {"re": 0, "im": 0.1}],
        "n_shots": 500, "T_int": 2e-6}})"},
      {"bitflip", R"({"job": "bitflip", "seed": 14, "hilbert": {"n_mem": 16, "n_buf": 3},
        "bitflip": {"alpha_squared": [1, 1.5], "durations": [1e-6], "n_traj": 10, "n_times": 21}})"},
      {"wigner", R"({"job": "wigner", "hilbert": {"n_mem": 12, "n_buf": 3},
        "wigner": {"initial": {"type": "cat_odd", "alpha": 1.0}, "grid": {"n_re": 7, "n_im": 7}}})"}};
  int identical = 0, files = 0;
  bool ok = true;
  for (const auto& [name, text] : jobs) {
    const fs::path cfg = root / (name + ".json");
    std::ofstream(cfg) << text;
    for (const char* run : {"a", "b"}) {
      ok = ok && run_cli_args({"--config", cfg.string(), "--output-dir", (root / name / run).string(), "--quiet"}) ==
                     kExitOk;
    }
    if (!fs::exists(root / name / "a")) continue;
    for (const auto& e : fs::directory_iterator(root / name / "a")) {
      if (e.path().filename() == "manifest.json") continue;
      ++files;
      identical += slurp(e.path()) == slurp(root / name / "b" / e.path().filename());
    }
  }
  return {ok && files > 0 && identical == files,
          fmt("%d / %d output files byte-identical across reruns of 4 seeded jobs", identical, files)};
}

}  // namespace

// Optional arguments select criteria by number; no arguments runs all of them.
int main(int argc, char** argv) {
  set_warning_echo(false);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"alpha = 0 Liouvillian gap vs closed form", alpha0_gap},
      {"mean-field confinement rate", confinement},
      {"Zeno oscillation frequency", zeno_frequency},
      {"drive-induced dephasing", drive_dephasing},
      {"phase-flip rate slope", phase_flip},
      {"deflation photon number", deflation},
      {"buffer pointer response", buffer_pointer_response},
      {"bit-flip time scaling (scaled noise)", bitflip_scaling},
      {"holonomic tomography sign pattern", holonomic},
      {"telegraph dwell-time coverage", telegraph},
      {"fit round-trips", fit_round_trips},
      {"trajectories vs master equation", trajectories_vs_master},
      {"coupling-rate arithmetic", coupling_arithmetic},
      {"CLI rerun reproducibility", reproducibility},
  };
  std::vector<bool> selected(criteria.size(), argc <= 1);
  for (int a = 1; a < argc; ++a) {
    const int k = std::atoi(argv[a]);
    if (k >= 1 && k <= static_cast<int>(criteria.size())) selected[k - 1] = true;
  }
  int failures = 0, run = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!selected[i]) continue;
    ++run;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s %2zu %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%d / %d criteria passed\n", run - failures, run);
  return failures == 0 ? 0 : 1;
}
