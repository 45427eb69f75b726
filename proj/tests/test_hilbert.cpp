#include <doctest.h>

#include <cmath>
#include <numbers>

#include "catq/errors.hpp"
#include "catq/hilbert.hpp"

using namespace catq;

namespace {

double max_abs(const MatrixXc& m) { return m.cwiseAbs().maxCoeff(); }

// Fock-basis amplitudes of |alpha> computed with long double, no truncation
// shortcuts; used as an independent reference for overlaps.
cplx coherent_overlap_series(cplx x, cplx y, int terms) {
  // <x|y> = exp(-|x|^2/2 - |y|^2/2) sum_n (x* y)^n / n!
  long double re = 0, im = 0;
  std::complex<long double> term = 1.0L;
  const std::complex<long double> z(std::conj(x) * y);
  for (int n = 0; n < terms; ++n) {
    re += term.real();
    im += term.imag();
    term *= z / static_cast<long double>(n + 1);
  }
  const double pref = std::exp(-0.5 * std::norm(x) - 0.5 * std::norm(y));
  return pref * cplx(static_cast<double>(re), static_cast<double>(im));
}

}  // namespace

TEST_CASE("space dims enforce limits") {
  CHECK_THROWS_AS(SpaceDims(1, 4), DimensionError);
  CHECK_THROWS_AS(SpaceDims(100, 6), DimensionError);
  CHECK_NOTHROW(SpaceDims(100, 6, 1000));
  SpaceDims d(4, 3);
  CHECK(d.total() == 12);
  CHECK(d.index(2, 1) == 7);
}

TEST_CASE("mode operators act as ladder operators") {
  SpaceDims d22(2, 2);
  auto [a, b] = mode_operators(d22);
  VectorXc v = a.matrix() * fock_state(1, 0, d22).ket();
  CHECK(std::abs(v(d22.index(0, 0)) - 1.0) < 1e-15);
  CHECK(v.norm() == doctest::Approx(1.0));

  SpaceDims d42(4, 2);
  QOperator n = number_operator(d42, Mode::memory);
  auto ops = mode_operators(d42);
  CHECK(max_abs((ops.a.adjoint() * ops.a).matrix() - n.matrix()) < 1e-14);
  for (int k = 0; k < 4; ++k) {
    CHECK(std::real(expectation(n, fock_state(k, 0, d42))) == doctest::Approx(k));
  }

  // truncation edge of [a, a^dag] on a single mode
  MatrixXc a10 = destroy_matrix(10);
  MatrixXc c = a10 * a10.adjoint() - a10.adjoint() * a10;
  for (int k = 0; k < 9; ++k) CHECK(std::abs(c(k, k) - 1.0) < 1e-14);
  CHECK(std::abs(c(9, 9) + 9.0) < 1e-14);
}

TEST_CASE("coherent states") {
  SpaceDims d(20, 2);
  QState vac = coherent_state(0.0, d, Mode::memory);
  CHECK(std::abs(vac.ket()(0) - 1.0) < 1e-15);

  QState one = coherent_state(1.0, d, Mode::memory);
  CHECK(std::real(expectation(number_operator(d, Mode::memory), one)) == doctest::Approx(1.0).epsilon(1e-8));
  auto [a, b] = mode_operators(d);
  CHECK(std::abs(expectation(a, one) - 1.0) < 1e-8);

  SpaceDims d30(30, 2);
  QState p = coherent_state(2.0, d30, Mode::memory);
  QState m = coherent_state(-2.0, d30, Mode::memory);
  const double overlap = std::norm(p.ket().dot(m.ket()));
  CHECK(overlap == doctest::Approx(std::norm(coherent_overlap_series(2.0, -2.0, 200))).epsilon(1e-6));
  CHECK(overlap == doctest::Approx(std::exp(-16.0)).epsilon(1e-6));

  // buffer-mode coherent state leaves the memory in vacuum
  QState buf = coherent_state(cplx(0.3, 0.4), SpaceDims(3, 12), Mode::buffer);
  MatrixXc rm = reduce_to_memory(buf);
  CHECK(std::abs(rm(0, 0) - 1.0) < 1e-12);

  // far outside the truncation: error
  CHECK_THROWS_AS(coherent_state(4.0, SpaceDims(8, 2), Mode::memory), TruncationError);
}

TEST_CASE("cat states") {
  SpaceDims d(30, 2);
  QState even0 = cat_state(0.0, Parity::even, d);
  CHECK(std::abs(even0.ket()(0) - 1.0) < 1e-15);
  CHECK_THROWS_AS(cat_state(0.0, Parity::odd, d), DegenerateInput);

  for (double al : {0.5, 1.0, 1.6, 2.0}) {
    QState e = cat_state(al, Parity::even, d);
    QState o = cat_state(al, Parity::odd, d);
    CHECK(std::abs(e.ket().dot(o.ket())) < 1e-14);
    for (int m = 0; m < d.n_mem(); ++m) {
      if (m % 2 == 1) CHECK(std::abs(e.ket()(d.index(m, 0))) < 1e-10);
      if (m % 2 == 0) CHECK(std::abs(o.ket()(d.index(m, 0))) < 1e-10);
    }
    // a flips cat parity: a|+> has no overlap with |+>
    auto [a, b] = mode_operators(d);
    VectorXc ae = a.matrix() * e.ket();
    CHECK(std::abs(e.ket().dot(ae)) < 1e-8);
    CHECK(std::abs(std::abs(o.ket().dot(ae / ae.norm())) - 1.0) < 1e-8);
  }

  // even cat |alpha|^2 tanh|alpha|^2, here from an explicit Fock sum
  const double al = std::sqrt(2.0);
  QState e = cat_state(al, Parity::even, d);
  double num = 0, den = 0;
  double w = 1.0;  // alpha^{2n} / n!
  for (int n = 0; n < 60; ++n) {
    if (n > 0) w *= 2.0 / n;
    if (n % 2 == 0) {
      num += n * w;
      den += w;
    }
  }
  const double nbar = std::real(expectation(number_operator(d, Mode::memory), e));
  CHECK(nbar == doctest::Approx(num / den).epsilon(1e-9));
  CHECK(nbar == doctest::Approx(2.0 * std::tanh(2.0)).epsilon(1e-9));

  // <a^2> of an even cat is alpha^2
  auto [a, b] = mode_operators(d);
  QState e15 = cat_state(1.5, Parity::even, d);
  CHECK(std::abs(expectation(a * a, e15) - 2.25) < 1e-6);

  QState e16 = cat_state(1.6, Parity::even, d);
  CHECK(std::abs(expectation(parity_operator(d, Mode::memory), e16) - 1.0) < 1e-9);
}

TEST_CASE("parity operator") {
  SpaceDims d(6, 3);
  QOperator p = parity_operator(d, Mode::memory);
  CHECK(max_abs((p * p).matrix() - MatrixXc::Identity(18, 18)) == 0.0);
  CHECK(std::real(expectation(p, fock_state(0, 0, d))) == 1.0);
  CHECK(std::real(expectation(p, fock_state(1, 0, d))) == -1.0);
  CHECK(std::real(expectation(p, fock_state(1, 2, d))) == -1.0);
}

TEST_CASE("displacement operator") {
  SpaceDims d(20, 2);
  CHECK(max_abs(displacement_operator(0.0, d, Mode::memory).matrix() - MatrixXc::Identity(40, 40)) == 0.0);

  for (int levels : {20, 40}) {
    const cplx lam(0.7, -0.4);
    MatrixXc dp = displacement_matrix(lam, levels);
    MatrixXc dm = displacement_matrix(-lam, levels);
    const int k = comfortable_block(levels, std::abs(lam));
    CHECK(k >= (levels == 20 ? 2 : 8));
    CHECK(max_abs((dp * dm).topLeftCorner(k, k) - MatrixXc::Identity(k, k)) < 1e-8);
    CHECK(max_abs((dp.adjoint() * dp).topLeftCorner(k, k) - MatrixXc::Identity(k, k)) < 1e-8);
  }

  QState vac = fock_state(0, 0, d);
  QOperator d1 = displacement_operator(1.0, d, Mode::memory);
  QState moved = QState::from_ket(d, (d1.matrix() * vac.ket()).normalized());
  CHECK(fidelity(coherent_state(1.0, d, Mode::memory), moved) > 1.0 - 1e-8);

  // complex argument: D(lambda)|0> against the analytic amplitudes
  const cplx lam(0.3, 1.1);
  VectorXc col = displacement_matrix(lam, 20).col(0);
  VectorXc ref = coherent_amplitudes(lam, 20);
  CHECK((col - ref).norm() < 1e-9);

  // matrix elements <m|D|n> against the Laguerre formula
  const MatrixXc dl = displacement_matrix(lam, 20);
  for (int m = 0; m < 6; ++m) {
    for (int n = 0; n <= m; ++n) {
      const double x = std::norm(lam);
      const double lag = std::assoc_laguerre(n, m - n, x);
      const double fact = std::sqrt(std::tgamma(n + 1.0) / std::tgamma(m + 1.0));
      const cplx ref_mn = fact * std::pow(lam, m - n) * std::exp(-x / 2) * lag;
      CHECK(std::abs(dl(m, n) - ref_mn) < 1e-9);
    }
  }

  CHECK_THROWS_AS(displacement_matrix(5.0, 10), TruncationError);
}

TEST_CASE("expectation, fidelity and reductions") {
  SpaceDims d(8, 4);
  QState s = product_state(coherent_amplitudes(0.5, 8).normalized(), coherent_amplitudes(0.2, 4).normalized(), d);
  CHECK(std::abs(expectation(QOperator::identity(d), s) - 1.0) < 1e-12);
  QOperator na = number_operator(d, Mode::memory);
  const MatrixXc rm = reduce_to_memory(s);
  MatrixXc n8 = MatrixXc::Zero(8, 8);
  for (int k = 0; k < 8; ++k) n8(k, k) = k;
  CHECK(std::abs(expectation(na, s) - (n8 * rm).trace()) < 1e-12);
  CHECK(std::abs(expectation(na, s) - expectation(na, s.to_density())) < 1e-12);
  CHECK(std::abs(std::imag(expectation(na, s))) < 1e-12);

  const MatrixXc rb = reduce_to_buffer(s);
  CHECK(std::abs(rb.trace() - 1.0) < 1e-12);
  CHECK((rb - reduce_to_buffer(s.to_density())).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(fidelity(s, s.to_density()) == doctest::Approx(1.0));

  QState packed = with_buffer_vacuum(rm, d);
  CHECK((reduce_to_memory(packed) - rm).cwiseAbs().maxCoeff() < 1e-14);

  CHECK_THROWS_AS(expectation(na, fock_state(0, 0, SpaceDims(4, 4))), DimensionError);
}

TEST_CASE("state invariants are enforced") {
  SpaceDims d(3, 2);
  CHECK_THROWS_AS(QState::from_ket(d, VectorXc::Ones(6)), InvalidArgument);
  MatrixXc r = MatrixXc::Zero(6, 6);
  r(0, 0) = 1.2;
  r(1, 1) = -0.2;
  CHECK_THROWS_AS(QState::from_density(d, r), InvalidArgument);
  r(0, 0) = 1.0;
  r(1, 1) = 0.0;
  r(0, 1) = 0.1;
  CHECK_THROWS_AS(QState::from_density(d, r), InvalidArgument);
}

TEST_CASE("truncation rule") {
  CHECK(min_levels_for(0.0) == 5);
  CHECK(min_levels_for(1.0) == 12);
  CHECK(min_levels_for(1.5) == 17);
  CHECK(min_levels_for(2.0) == 21);
}
