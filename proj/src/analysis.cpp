#include "catq/analysis.hpp"

#include <Eigen/Eigenvalues>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <unsupported/Eigen/LevenbergMarquardt>

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>
#include <sstream>

#include "catq/errors.hpp"
#include "catq/warnings.hpp"

namespace catq {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kMaxWignerLevels = 512;

void check_density(const MatrixXc& rho, const char* where) {
  if (rho.rows() != rho.cols() || rho.rows() < 1) throw DimensionError(std::string(where) + ": rho must be square");
  if (!rho.allFinite()) throw InvalidArgument(std::string(where) + ": rho has non-finite entries");
  if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > 1e-10) {
    throw InvalidArgument(std::string(where) + ": rho is not Hermitian");
  }
}

// Number of leading Fock levels carrying the state (entries below 1e-15 of the
// largest are dropped).
int support_levels(const MatrixXc& rho) {
  const double cut = 1e-15 * rho.cwiseAbs().maxCoeff();
  int n = static_cast<int>(rho.rows());
  while (n > 1 && rho.row(n - 1).cwiseAbs().maxCoeff() <= cut && rho.col(n - 1).cwiseAbs().maxCoeff() <= cut) --n;
  return n;
}

double wigner_trimmed(const MatrixXc& rho, int n, cplx lambda) {
  const int m = std::max(n, min_levels_for(std::sqrt(double(n - 1)) + std::abs(lambda)));
  if (m > kMaxWignerLevels) {
    std::ostringstream os;
    os << "wigner: point |lambda| = " << std::abs(lambda) << " needs " << m << " levels, beyond the "
       << kMaxWignerLevels << "-level limit";
    throw TruncationError(os.str());
  }
  // Only the first n columns of D_{-lambda} touch rho.
  const MatrixXc d = displacement_block(-lambda, m, n);
  const MatrixXc x = d * rho.topLeftCorner(n, n);
  double w = 0.0;
  for (int k = 0; k < m; ++k) {
    const double diag = (x.row(k).array() * d.row(k).array().conjugate()).sum().real();
    w += (k % 2 == 0) ? diag : -diag;
  }
  return 2.0 / kPi * w;
}

// I(m, n) = int_0^inf psi_m psi_n dx for the harmonic-oscillator eigenfunctions.
// Entries do not depend on the number of levels, so the largest table is kept.
const Eigen::MatrixXd& half_line_overlaps(int levels) {
  static std::mutex mutex;
  static Eigen::MatrixXd table;
  std::lock_guard lock(mutex);
  if (table.rows() >= levels) return table;

  using rule = boost::math::quadrature::gauss<double, 20>;
  const auto& abscissa = rule::abscissa();
  const auto& weights = rule::weights();
  const double width = 0.25;
  const double reach = std::sqrt(2.0 * levels + 1.0) + 8.0;
  const int panels = static_cast<int>(std::ceil(reach / width));

  std::vector<double> nodes;
  std::vector<double> node_weights;
  for (int p = 0; p < panels; ++p) {
    const double mid = (p + 0.5) * width;
    for (std::size_t k = 0; k < abscissa.size(); ++k) {
      for (double sign : {-1.0, 1.0}) {
        nodes.push_back(mid + sign * 0.5 * width * abscissa[k]);
        node_weights.push_back(0.5 * width * weights[k]);
      }
    }
  }
  const int q = static_cast<int>(nodes.size());
  Eigen::MatrixXd psi(levels, q);
  for (int j = 0; j < q; ++j) {
    const double x = nodes[j];
    psi(0, j) = std::pow(kPi, -0.25) * std::exp(-0.5 * x * x);
    if (levels > 1) psi(1, j) = std::sqrt(2.0) * x * psi(0, j);
    for (int n = 1; n + 1 < levels; ++n) {
      psi(n + 1, j) = std::sqrt(2.0 / (n + 1)) * x * psi(n, j) - std::sqrt(double(n) / (n + 1)) * psi(n - 1, j);
    }
  }
  const Eigen::Map<const Eigen::VectorXd> w(node_weights.data(), q);
  table = psi * w.asDiagonal() * psi.transpose();
  return table;
}

// ---- least squares ---------------------------------------------------------------------

using Residuals = std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>;
using Jacobian = std::function<void(const Eigen::VectorXd&, Eigen::MatrixXd&)>;

struct LsqFunctor : Eigen::DenseFunctor<double> {
  LsqFunctor(int n, int m, Residuals f, Jacobian j) : DenseFunctor(n, m), f(std::move(f)), j(std::move(j)) {}

  int operator()(const Eigen::VectorXd& x, Eigen::VectorXd& r) const {
    f(x, r);
    return r.allFinite() ? 0 : -1;
  }

  int df(const Eigen::VectorXd& x, Eigen::MatrixXd& jac) const {
    if (j) {
      j(x, jac);
      return 0;
    }
    Eigen::VectorXd lo(values()), hi(values());
    for (int k = 0; k < inputs(); ++k) {
      const double h = 1e-6 * std::max(std::abs(x(k)), 1e-3);
      Eigen::VectorXd xp = x, xm = x;
      xp(k) += h;
      xm(k) -= h;
      f(xp, hi);
      f(xm, lo);
      jac.col(k) = (hi - lo) / (2.0 * h);
    }
    return 0;
  }

  Residuals f;
  Jacobian j;
};

struct LsqOutcome {
  Eigen::VectorXd x;
  Eigen::MatrixXd cov;
  double rnorm = 0.0;
  bool converged = false;
  std::string message;
};

LsqOutcome least_squares(int m, Eigen::VectorXd x0, const Residuals& f, const Jacobian& j = nullptr) {
  const int n = static_cast<int>(x0.size());
  LsqFunctor functor(n, m, f, j);
  Eigen::LevenbergMarquardt<LsqFunctor> lm(functor);
  lm.setXtol(1e-10);
  lm.setFtol(1e-15);
  lm.setGtol(0.0);
  lm.setMaxfev(200);
  const auto status = lm.minimize(x0);

  LsqOutcome out;
  out.x = x0;
  Eigen::VectorXd r(m);
  f(out.x, r);
  out.rnorm = r.norm();
  using namespace Eigen::LevenbergMarquardtSpace;
  switch (status) {
    case RelativeReductionTooSmall:
    case RelativeErrorTooSmall:
    case RelativeErrorAndReductionTooSmall:
    case CosinusTooSmall:
    case FtolTooSmall:
    case XtolTooSmall:
    case GtolTooSmall:
      out.converged = r.allFinite();
      break;
    case TooManyFunctionEvaluation:
      out.message = "iteration limit reached";
      break;
    default:
      out.message = "least squares failed (status " + std::to_string(int(status)) + ")";
  }

  // Covariance s^2 (J^T J)^+; parameters touching the null space get infinite variance.
  Eigen::MatrixXd jac(m, n);
  functor.df(out.x, jac);
  const double s2 = m > n ? r.squaredNorm() / (m - n) : 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac.transpose() * jac);
  const Eigen::VectorXd ev = es.eigenvalues();
  const Eigen::MatrixXd& v = es.eigenvectors();
  const double tol = 1e-14 * std::max(ev.maxCoeff(), 1e-300);
  out.cov = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd null_weight = Eigen::VectorXd::Zero(n);
  for (int k = 0; k < n; ++k) {
    if (ev(k) > tol) {
      out.cov += (s2 / ev(k)) * v.col(k) * v.col(k).transpose();
    } else {
      null_weight += v.col(k).cwiseAbs2();
    }
  }
  for (int k = 0; k < n; ++k) {
    if (null_weight(k) > 1e-6) out.cov(k, k) = kInf;
  }
  return out;
}

void check_series(const Series& s, std::size_t min_points, const char* where) {
  if (s.x.size() != s.y.size()) throw InvalidArgument(std::string(where) + ": x and y differ in length");
  if (s.x.size() < min_points) {
    throw InvalidArgument(std::string(where) + ": need at least " + std::to_string(min_points) + " points");
  }
  for (std::size_t k = 0; k < s.x.size(); ++k) {
    if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k])) {
      throw InvalidArgument(std::string(where) + ": non-finite data");
    }
  }
}

// Affine rescaling of a decay record onto O(1) numbers.
struct Scaled {
  Eigen::VectorXd t;
  Eigen::VectorXd y;
  double t_scale;
  double y_mean;
  double y_scale;
};

Scaled rescale(const Series& s) {
  const int m = static_cast<int>(s.x.size());
  Scaled out{Eigen::VectorXd(m), Eigen::VectorXd(m), 0.0, 0.0, 0.0};
  for (int k = 0; k < m; ++k) out.t_scale = std::max(out.t_scale, std::abs(s.x[k]));
  if (out.t_scale == 0.0) out.t_scale = 1.0;
  for (int k = 0; k < m; ++k) out.y_mean += s.y[k] / m;
  for (int k = 0; k < m; ++k) out.y_scale = std::max(out.y_scale, std::abs(s.y[k] - out.y_mean));
  for (int k = 0; k < m; ++k) {
    out.t(k) = s.x[k] / out.t_scale;
    out.y(k) = out.y_scale > 0.0 ? (s.y[k] - out.y_mean) / out.y_scale : 0.0;
  }
  return out;
}

bool is_constant(const Scaled& s) { return !(s.y_scale > 1e-14 * std::max(std::abs(s.y_mean), 1e-300)); }

double sigma_of(const Eigen::MatrixXd& cov, int k) { return std::sqrt(std::max(cov(k, k), 0.0)); }

// Linear least squares for y ~ columns, returns the residual sum of squares.
double linear_fit(const Eigen::MatrixXd& basis, const Eigen::VectorXd& y, Eigen::VectorXd& coef) {
  coef = basis.colPivHouseholderQr().solve(y);
  return (basis * coef - y).squaredNorm();
}

double spacing_min(const Eigen::VectorXd& t) {
  std::vector<double> v(t.data(), t.data() + t.size());
  std::sort(v.begin(), v.end());
  double dt = kInf;
  for (std::size_t k = 1; k < v.size(); ++k) {
    if (v[k] > v[k - 1]) dt = std::min(dt, v[k] - v[k - 1]);
  }
  return dt;
}

}  // namespace

// ---- Wigner function ----------------------------------------------------------------

double GridSpec::cell_area() const {
  const double dx = n_re > 1 ? (re_max - re_min) / (n_re - 1) : 1.0;
  const double dy = n_im > 1 ? (im_max - im_min) / (n_im - 1) : 1.0;
  return dx * dy;
}

double WignerGrid::integral() const { return values.sum() * spec.cell_area(); }

double wigner_at(const MatrixXc& rho_mem, cplx lambda) {
  check_density(rho_mem, "wigner");
  return wigner_trimmed(rho_mem, support_levels(rho_mem), lambda);
}

WignerGrid wigner(const MatrixXc& rho_mem, const GridSpec& spec) {
  check_density(rho_mem, "wigner");
  if (spec.n_re < 1 || spec.n_im < 1 || !(spec.re_max >= spec.re_min) || !(spec.im_max >= spec.im_min)) {
    throw InvalidArgument("wigner: malformed grid");
  }
  const int n = support_levels(rho_mem);
  WignerGrid g{spec, Eigen::MatrixXd(spec.n_re, spec.n_im)};
  for (int i = 0; i < spec.n_re; ++i) {
    for (int j = 0; j < spec.n_im; ++j) g.values(i, j) = wigner_trimmed(rho_mem, n, {spec.re_at(i), spec.im_at(j)});
  }
  return g;
}

// ---- cat-qubit observables ----------------------------------------------------------

MatrixXc half_space_sign(cplx alpha, int levels) {
  if (std::abs(alpha) == 0.0) throw DegenerateInput("half_space_sign: alpha = 0 defines no direction");
  if (levels < 1 || levels > kMaxWignerLevels) throw DimensionError("half_space_sign: levels outside [1, 512]");
  const Eigen::MatrixXd& overlaps = half_line_overlaps(levels);
  const double theta = std::arg(alpha);
  MatrixXc s = MatrixXc::Zero(levels, levels);
  // Pi_+ - Pi_- = 2 Pi_+ - 1; the even-sum entries of Pi_+ are delta_mn / 2.
  for (int m = 0; m < levels; ++m) {
    for (int n = 0; n < levels; ++n) {
      if ((m + n) % 2 == 1) s(m, n) = 2.0 * overlaps(m, n) * std::exp(kI * theta * double(m - n));
    }
  }
  return s;
}

CatObservables cat_observables(const MatrixXc& rho_mem, cplx alpha) {
  check_density(rho_mem, "cat_observables");
  if (std::abs(alpha) == 0.0) throw DegenerateInput("cat_observables: alpha = 0");
  const int n = static_cast<int>(rho_mem.rows());
  CatObservables obs{};
  for (int k = 0; k < n; ++k) obs.parity += (k % 2 == 0 ? 1.0 : -1.0) * rho_mem(k, k).real();
  obs.X = obs.parity;
  obs.Z = (half_space_sign(alpha, n) * rho_mem).trace().real();
  return obs;
}

// ---- fit results ----------------------------------------------------------------------

double FitResult::value(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw InvalidArgument("FitResult: no parameter " + name);
  return values(it - names.begin());
}

double FitResult::sigma(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw InvalidArgument("FitResult: no parameter " + name);
  return sigmas(it - names.begin());
}

// ---- Wigner cut models ------------------------------------------------------------------

std::function<double(double)> wigner_cut_model(CutKind kind, const CutParams& p) {
  if (p.B == 0.0) throw InvalidArgument("wigner_cut_model: B must be nonzero");
  switch (kind) {
    case CutKind::mixture:
      return [p](double x) {
        const double u = p.B * x;
        return p.amplitude * (std::exp(-2.0 * (u - p.alpha) * (u - p.alpha)) +
                              std::exp(-2.0 * (u + p.alpha) * (u + p.alpha))) +
               p.offset;
      };
    case CutKind::cat:
      return [p](double x) {
        const double u = p.B * x;
        return p.amplitude * std::exp(-2.0 * u * u) * (std::exp(-2.0 * p.alpha * p.alpha) + std::cos(4.0 * p.alpha * u)) +
               p.offset;
      };
    case CutKind::thermal:
      return [p](double x) {
        const double u = p.B * x;
        return p.amplitude * std::exp(-2.0 * u * u / (2.0 * p.n_th + 1.0)) + p.offset;
      };
  }
  throw InvalidArgument("wigner_cut_model: unknown kind");
}

CutParams ideal_cut_params(CutKind kind, double alpha, double n_th) {
  CutParams p;
  p.alpha = alpha;
  p.n_th = n_th;
  switch (kind) {
    case CutKind::mixture:
      p.amplitude = 1.0 / kPi;
      break;
    case CutKind::cat:
      p.amplitude = 2.0 / kPi / (1.0 + std::exp(-2.0 * alpha * alpha));
      break;
    case CutKind::thermal:
      p.amplitude = 2.0 / (kPi * (2.0 * n_th + 1.0));
      break;
  }
  return p;
}

FitResult fit_wigner_cuts(const Series& mixture, const Series& cat, const Series& thermal, const CutGuess& guess) {
  check_series(mixture, 20, "fit_wigner_cuts (mixture)");
  check_series(cat, 20, "fit_wigner_cuts (cat)");
  check_series(thermal, 20, "fit_wigner_cuts (thermal)");
  if (guess.n_th < 0.0) throw InvalidArgument("fit_wigner_cuts: n_th guess must be non-negative");
  const int m1 = static_cast<int>(mixture.x.size());
  const int m2 = static_cast<int>(cat.x.size());
  const int m3 = static_cast<int>(thermal.x.size());
  const int m = m1 + m2 + m3;

  // internal parameters: A, C, D, B, alpha, s (n_th = s^2), offsets
  enum { pA, pC, pD, pB, pAlpha, pS, pOm, pOc, pOt, nP };
  auto f = [&](const Eigen::VectorXd& q, Eigen::VectorXd& r) {
    const double B = q(pB), a = q(pAlpha), w = 2.0 * q(pS) * q(pS) + 1.0;
    for (int k = 0; k < m1; ++k) {
      const double u = B * mixture.x[k];
      r(k) = q(pA) * (std::exp(-2.0 * (u - a) * (u - a)) + std::exp(-2.0 * (u + a) * (u + a))) + q(pOm) - mixture.y[k];
    }
    for (int k = 0; k < m2; ++k) {
      const double u = B * cat.x[k];
      r(m1 + k) = q(pC) * std::exp(-2.0 * u * u) * (std::exp(-2.0 * a * a) + std::cos(4.0 * a * u)) + q(pOc) - cat.y[k];
    }
    for (int k = 0; k < m3; ++k) {
      const double u = B * thermal.x[k];
      r(m1 + m2 + k) = q(pD) * std::exp(-2.0 * u * u / w) + q(pOt) - thermal.y[k];
    }
  };
  auto jac = [&](const Eigen::VectorXd& q, Eigen::MatrixXd& J) {
    J.setZero();
    const double B = q(pB), a = q(pAlpha), s = q(pS), w = 2.0 * s * s + 1.0;
    for (int k = 0; k < m1; ++k) {
      const double x = mixture.x[k], u = B * x;
      const double gp = std::exp(-2.0 * (u - a) * (u - a)), gm = std::exp(-2.0 * (u + a) * (u + a));
      J(k, pA) = gp + gm;
      J(k, pB) = q(pA) * (-4.0 * x) * (gp * (u - a) + gm * (u + a));
      J(k, pAlpha) = q(pA) * 4.0 * (gp * (u - a) - gm * (u + a));
      J(k, pOm) = 1.0;
    }
    for (int k = 0; k < m2; ++k) {
      const double x = cat.x[k], u = B * x;
      const double g = std::exp(-2.0 * u * u), e = std::exp(-2.0 * a * a);
      const double c = std::cos(4.0 * a * u), sn = std::sin(4.0 * a * u);
      const int row = m1 + k;
      J(row, pC) = g * (e + c);
      J(row, pB) = q(pC) * g * (-4.0 * u * x * (e + c) - 4.0 * a * x * sn);
      J(row, pAlpha) = q(pC) * g * (-4.0 * a * e - 4.0 * u * sn);
      J(row, pOc) = 1.0;
    }
    for (int k = 0; k < m3; ++k) {
      const double x = thermal.x[k], u = B * x;
      const double e = std::exp(-2.0 * u * u / w);
      const int row = m1 + m2 + k;
      J(row, pD) = e;
      J(row, pB) = q(pD) * e * (-4.0 * u * x / w);
      J(row, pS) = q(pD) * e * (2.0 * u * u / (w * w)) * 4.0 * s;
      J(row, pOt) = 1.0;
    }
  };

  Eigen::VectorXd q0(static_cast<Eigen::Index>(nP));
  q0 << guess.A, guess.C, guess.D, guess.B, guess.alpha, std::sqrt(guess.n_th), 0.0, 0.0, 0.0;
  // s = 0 is a stationary point of the thermal width; start slightly inside.
  if (q0(pS) == 0.0) q0(pS) = 1e-2;
  const LsqOutcome o = least_squares(m, q0, f, jac);

  FitResult res;
  res.model = "wigner_cuts";
  res.names = {"A", "C", "D", "B", "alpha", "n_th", "offset_mixture", "offset_cat", "offset_thermal"};
  res.values = o.x;
  res.sigmas = Eigen::VectorXd(static_cast<Eigen::Index>(nP));
  for (int k = 0; k < nP; ++k) res.sigmas(k) = sigma_of(o.cov, k);
  // The models are even in B and alpha separately; report the positive branch.
  res.values(pB) = std::abs(o.x(pB));
  res.values(pAlpha) = std::abs(o.x(pAlpha));
  res.values(pS) = o.x(pS) * o.x(pS);
  res.sigmas(pS) = 2.0 * std::abs(o.x(pS)) * res.sigmas(pS);
  res.residual_norm = o.rnorm;
  res.converged = o.converged;
  res.message = o.message;
  if (res.values(pS) < 1e-10) {
    res.at_bound = true;
    res.values(pS) = 0.0;
    res.message += res.message.empty() ? "n_th at its lower bound 0" : "; n_th at its lower bound 0";
  }
  return res;
}

// ---- decays and oscillations ------------------------------------------------------------

FitResult fit_exponential(const Series& data, std::optional<double> fixed_offset) {
  check_series(data, 8, "fit_exponential");
  FitResult res;
  res.model = "exponential";
  res.names = {"y0", "A", "T"};
  const Scaled s = rescale(data);
  const int m = static_cast<int>(s.t.size());
  if (is_constant(s) && !(fixed_offset && *fixed_offset != s.y_mean)) {
    res.values = Eigen::Vector3d(s.y_mean, 0.0, std::numeric_limits<double>::quiet_NaN());
    res.sigmas = Eigen::Vector3d(0.0, 0.0, kInf);
    res.message = "constant data: amplitude vanishes and T is unidentifiable";
    return res;
  }
  const double y_scale = s.y_scale > 0.0 ? s.y_scale : std::abs(*fixed_offset - s.y_mean);
  const Eigen::VectorXd y = (Eigen::Map<const Eigen::VectorXd>(data.y.data(), m).array() - s.y_mean) / y_scale;
  const bool fixed = fixed_offset.has_value();
  const double y0_fixed = fixed ? (*fixed_offset - s.y_mean) / y_scale : 0.0;

  // Variable projection scan over T for the starting point; q = (A, log T[, y0]).
  const double tmin = s.t.minCoeff(), span = std::max(s.t.maxCoeff() - tmin, 1e-300);
  Eigen::MatrixXd basis(m, fixed ? 1 : 2);
  double best = kInf;
  Eigen::VectorXd q0(fixed ? 2 : 3);
  for (int k = 0; k <= 80; ++k) {
    const double T = span * std::pow(10.0, -2.0 + 4.0 * k / 80.0);
    basis.col(0) = (-s.t.array() / T).exp();
    if (!fixed) basis.col(1).setOnes();
    Eigen::VectorXd c;
    const double rss = linear_fit(basis, fixed ? Eigen::VectorXd(y.array() - y0_fixed) : y, c);
    if (rss < best) {
      best = rss;
      q0(0) = c(0);
      q0(1) = std::log(T);
      if (!fixed) q0(2) = c(1);
    }
  }
  auto f = [&](const Eigen::VectorXd& q, Eigen::VectorXd& r) {
    const double y0 = fixed ? y0_fixed : q(2);
    r = (y0 + q(0) * (-s.t.array() * std::exp(-q(1))).exp()).matrix() - y;
  };
  const LsqOutcome o = least_squares(m, q0, f);
  const double T = s.t_scale * std::exp(o.x(1));
  const double y0 = s.y_mean + y_scale * (fixed ? y0_fixed : o.x(2));
  res.values = Eigen::Vector3d(fixed ? *fixed_offset : y0, y_scale * o.x(0), T);
  res.sigmas = Eigen::Vector3d(fixed ? 0.0 : y_scale * sigma_of(o.cov, 2), y_scale * sigma_of(o.cov, 0),
                               T * sigma_of(o.cov, 1));
  res.residual_norm = y_scale * o.rnorm;
  res.converged = o.converged;
  res.message = o.message;
  if (std::exp(o.x(1)) > 1e3 * span || std::exp(o.x(1)) < 1e-3 * spacing_min(s.t)) {
    res.converged = false;
    res.message = "T outside the range resolvable by the data";
  }
  return res;
}

FitResult fit_damped_cosine(const Series& data) {
  check_series(data, 8, "fit_damped_cosine");
  FitResult res;
  res.model = "damped_cosine";
  res.names = {"y0", "A", "T", "omega", "phi"};
  const Scaled s = rescale(data);
  const int m = static_cast<int>(s.t.size());
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (is_constant(s)) {
    res.values = Eigen::VectorXd(5);
    res.values << s.y_mean, 0.0, nan, nan, nan;
    res.sigmas = Eigen::VectorXd(5);
    res.sigmas << 0.0, 0.0, kInf, kInf, kInf;
    res.message = "constant data: amplitude vanishes and T, omega are unidentifiable";
    return res;
  }

  // Grid scan over (omega, T) with the linear parameters projected out.
  const double span = std::max(s.t.maxCoeff() - s.t.minCoeff(), 1e-300);
  const double nyquist = kPi / spacing_min(s.t);
  const double step = 0.05 * 2.0 * kPi / span;
  const int n_omega = std::min(4000, static_cast<int>(std::ceil(nyquist / step)));
  Eigen::MatrixXd basis(m, 3);
  basis.col(0).setOnes();
  double best = kInf;
  Eigen::VectorXd q0(5);
  for (double tf : {0.1, 0.3, 1.0, 3.0, 10.0, 100.0}) {
    const Eigen::ArrayXd env = (-s.t.array() / (tf * span)).exp();
    for (int k = 1; k <= n_omega; ++k) {
      const double w = k * step;
      basis.col(1) = (env * (w * s.t.array()).cos()).matrix();
      basis.col(2) = (env * (w * s.t.array()).sin()).matrix();
      Eigen::VectorXd c;
      const double rss = linear_fit(basis, s.y, c);
      if (rss < best) {
        best = rss;
        // c1 cos + c2 sin = A cos(w t + phi) with A cos(phi) = c1, A sin(phi) = -c2
        q0 << c(0), std::hypot(c(1), c(2)), std::log(tf * span), w, std::atan2(-c(2), c(1));
      }
    }
  }
  auto f = [&](const Eigen::VectorXd& q, Eigen::VectorXd& r) {
    r = (q(0) + q(1) * (-s.t.array() * std::exp(-q(2))).exp() * (q(3) * s.t.array() + q(4)).cos()).matrix() - s.y;
  };
  LsqOutcome o = least_squares(m, q0, f);
  Eigen::VectorXd q = o.x;
  if (q(3) < 0.0) {
    q(3) = -q(3);
    q(4) = -q(4);
  }
  if (q(1) < 0.0) {
    q(1) = -q(1);
    q(4) += kPi;
  }
  q(4) = std::remainder(q(4), 2.0 * kPi);
  const double T = s.t_scale * std::exp(q(2));
  res.values = Eigen::VectorXd(5);
  res.values << s.y_mean + s.y_scale * q(0), s.y_scale * q(1), T, q(3) / s.t_scale, q(4);
  res.sigmas = Eigen::VectorXd(5);
  res.sigmas << s.y_scale * sigma_of(o.cov, 0), s.y_scale * sigma_of(o.cov, 1), T * sigma_of(o.cov, 2),
      sigma_of(o.cov, 3) / s.t_scale, sigma_of(o.cov, 4);
  res.residual_norm = s.y_scale * o.rnorm;
  res.converged = o.converged;
  res.message = o.message;
  return res;
}

// ---- telegraph statistics ------------------------------------------------------------------

DwellEstimate dwell_estimator(const TelegraphTrace& trace, double confidence) {
  return dwell_estimator(std::vector<TelegraphTrace>{trace}, confidence);
}

DwellEstimate dwell_estimator(const std::vector<TelegraphTrace>& traces, double confidence) {
  if (traces.empty()) throw InvalidArgument("dwell_estimator: no traces");
  if (!(confidence > 0.0 && confidence < 1.0)) throw InvalidArgument("dwell_estimator: confidence outside (0, 1)");
  double dt = 0.0;
  double steps = 0.0;
  int switches = 0;
  for (const auto& trace : traces) {
    const std::size_t n = trace.times.size();
    if (n < 2 || trace.values.size() != n) throw InvalidArgument("dwell_estimator: need matching times/values, >= 2");
    const double step = (trace.times.back() - trace.times.front()) / double(n - 1);
    if (!(step > 0.0)) throw InvalidArgument("dwell_estimator: times must increase");
    if (dt == 0.0) dt = step;
    if (std::abs(step - dt) > 1e-6 * dt) throw InvalidArgument("dwell_estimator: traces differ in sampling interval");
    for (std::size_t k = 0; k < n; ++k) {
      if (trace.values[k] != 1 && trace.values[k] != -1) throw InvalidArgument("dwell_estimator: values must be +-1");
      if (k > 0) {
        if (std::abs(trace.times[k] - trace.times[k - 1] - dt) > 1e-6 * dt) {
          throw InvalidArgument("dwell_estimator: times must be uniformly spaced");
        }
        if (trace.values[k] != trace.values[k - 1]) ++switches;
      }
    }
    steps += double(n - 1);
  }

  // Sampled symmetric telegraph: each step flips the sign with probability
  // p = (1 - exp(-dt / T_X)) / 2. The Markov-chain likelihood of the sampled
  // trace treats the partial first and last dwells as exposure without an event.
  const double exposure = steps * dt;
  DwellEstimate est{};
  est.switches = switches;
  if (switches < 20) {
    // Poisson upper bound on the per-direction switching rate k = 1 / (2 T_X).
    boost::math::chi_squared chi2(2.0 * (switches + 1));
    const double mu_up = 0.5 * boost::math::quantile(chi2, confidence);
    est.T_X = exposure / (2.0 * mu_up);
    est.ci_low = est.T_X;
    est.ci_high = kInf;
    est.lower_bound_only = true;
    return est;
  }
  const double p = switches / steps;
  if (!(p < 0.5)) throw NumericalError("dwell_estimator: sign flips on half the samples or more; sampling too coarse");
  const double u = -std::log1p(-2.0 * p);
  est.T_X = dt / u;
  // Fisher information of the binomial flip count, propagated to log T_X.
  const double sigma_log = 2.0 / ((1.0 - 2.0 * p) * u) * std::sqrt(p * (1.0 - p) / steps);
  const double z = boost::math::quantile(boost::math::normal(), 0.5 + 0.5 * confidence);
  est.ci_low = est.T_X * std::exp(-z * sigma_log);
  est.ci_high = est.T_X * std::exp(z * sigma_log);
  est.lower_bound_only = false;
  return est;
}

Series autocorrelation(const TelegraphTrace& trace, int max_lag) {
  const int n = static_cast<int>(trace.values.size());
  if (n < 2 || static_cast<int>(trace.times.size()) != n) throw InvalidArgument("autocorrelation: need >= 2 samples");
  if (max_lag < 0 || max_lag >= n) throw InvalidArgument("autocorrelation: max_lag outside [0, samples)");
  const double dt = (trace.times.back() - trace.times.front()) / (n - 1);
  Series out;
  for (int k = 0; k <= max_lag; ++k) {
    long long sum = 0;
    for (int i = 0; i + k < n; ++i) sum += trace.values[i] * trace.values[i + k];
    out.x.push_back(k * dt);
    out.y.push_back(double(sum) / (n - k));
  }
  return out;
}

double required_trace_duration(double T_X, double factor) {
  if (!(T_X > 0.0) || !(factor > 0.0)) throw InvalidArgument("required_trace_duration: arguments must be positive");
  return factor * T_X;
}

// ---- readout ----------------------------------------------------------------------------------

double readout_fidelity(const std::vector<cplx>& samples_a, const std::vector<cplx>& samples_b) {
  if (samples_a.empty() || samples_b.empty()) throw InvalidArgument("readout_fidelity: empty sample set");
  if (samples_a.size() < 100 || samples_b.size() < 100) warn("readout_fidelity: fewer than 100 samples per outcome");
  cplx mean_a = 0.0, mean_b = 0.0;
  for (cplx z : samples_a) mean_a += z;
  for (cplx z : samples_b) mean_b += z;
  mean_a /= double(samples_a.size());
  mean_b /= double(samples_b.size());
  const cplx axis = mean_b - mean_a;
  if (std::abs(axis) == 0.0) return 0.5;
  const cplx u = axis / std::abs(axis);

  // Project on the axis; outcome A is declared for projections <= threshold.
  std::vector<std::pair<double, int>> pts;
  pts.reserve(samples_a.size() + samples_b.size());
  for (cplx z : samples_a) pts.emplace_back((std::conj(u) * (z - mean_a)).real(), 0);
  for (cplx z : samples_b) pts.emplace_back((std::conj(u) * (z - mean_a)).real(), 1);
  std::sort(pts.begin(), pts.end());
  const double na = double(samples_a.size()), nb = double(samples_b.size());
  double below_a = 0.0, below_b = 0.0;
  double best = 0.5;  // threshold below every sample
  for (std::size_t k = 0; k < pts.size(); ++k) {
    (pts[k].second == 0 ? below_a : below_b) += 1.0;
    if (k + 1 < pts.size() && pts[k + 1].first == pts[k].first) continue;
    best = std::max(best, 0.5 * (below_a / na + (nb - below_b) / nb));
  }
  return best;
}

}  // namespace catq
