#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "epdiff/diffeo.hpp"
#include "epdiff/errors.hpp"
#include "epdiff/field.hpp"
#include "epdiff/field_io.hpp"
#include "epdiff/random.hpp"

using namespace epdiff;

namespace {

constexpr double pi = std::numbers::pi;

SpectralField sampled(const TorusGrid& g, auto&& fn) {
  std::vector<double> s(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) s[i] = fn(g.point(i));
  return SpectralField::from_samples(g, 1, s);
}

double max_coeff_diff(const SpectralField& a, const SpectralField& b) {
  return (a - b).max_abs_coefficient();
}

// Band-limited product by direct convolution of coefficient sequences.
SpectralField convolve(const SpectralField& f, const SpectralField& g) {
  const TorusGrid& grid = f.grid();
  SpectralField out(grid, 1);
  for (std::size_t i : grid.band_indices()) {
    for (std::size_t j : grid.band_indices()) {
      const Frequency a = grid.frequency(i), b = grid.frequency(j);
      const Frequency s{a[0] + b[0], a[1] + b[1]};
      if (!grid.in_band(s)) continue;
      out.at(0, grid.index_of(s)) += f.at(0, i) * g.at(0, j);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("grid validates its parameters") {
  CHECK_THROWS_AS(TorusGrid(3, 16), InvalidParameter);
  CHECK_THROWS_AS(TorusGrid(1, 6), InvalidParameter);
  CHECK_THROWS_AS(TorusGrid(1, 17), InvalidParameter);
  const TorusGrid g(2, 8);
  CHECK(g.band_size() == 49);
  CHECK(g.frequency(g.index_of({-3, 2})) == Frequency{-3, 2});
}

TEST_CASE("sobolev_norm of single modes") {
  const TorusGrid g(1, 32);
  CHECK(sobolev_norm(SpectralField(g, 1), 3.0) == 0.0);
  const auto s = sampled(g, [](Point x) { return std::sin(2 * pi * x[0]); });
  CHECK(sobolev_norm(s, 0.0) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-14));
  CHECK(sobolev_norm(s, 1.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(sobolev_norm(s, -0.5), InvalidParameter);
}

TEST_CASE("Parseval and monotonicity on random fields") {
  for (int dim : {1, 2}) {
    const TorusGrid g(dim, dim == 1 ? 64 : 16);
    for (std::uint64_t trial = 0; trial < 10; ++trial) {
      const auto f = random_field(g, 2, 7, trial, {.decay = 1.0});
      const auto s = f.samples();
      double quad = 0.0;
      for (double v : s) quad += v * v;
      quad /= static_cast<double>(g.size());
      CHECK(std::abs(std::pow(sobolev_norm(f, 0.0), 2) - quad) <= 1e-10 * quad);
      double prev = 0.0;
      for (double q : {0.0, 0.5, 1.0, 2.5, 4.0}) {
        const double v = sobolev_norm(f, q);
        CHECK(v >= prev);
        prev = v;
      }
    }
  }
}

TEST_CASE("pointwise_multiply is exact dealiased convolution") {
  const TorusGrid g(1, 32);
  const auto one = SpectralField::scalar_constant(g, 1.0);
  const auto f = random_field(g, 1, 3, 0, {.decay = 0.5});
  CHECK(max_coeff_diff(pointwise_multiply(one, f), f) <= 1e-14);

  const auto s = sampled(g, [](Point x) { return std::sin(2 * pi * x[0]); });
  const auto expect = sampled(g, [](Point x) { return 0.5 * (1.0 - std::cos(4 * pi * x[0])); });
  CHECK(max_coeff_diff(pointwise_multiply(s, s), expect) <= 1e-15);

  // cos(2πx)·cos(2π(N/2-1)x): the k = N/2 component must be dropped, not folded.
  const int top = g.max_frequency();
  const auto c1 = sampled(g, [](Point x) { return std::cos(2 * pi * x[0]); });
  SpectralField ctop(g, 1);
  ctop.set_mode(0, {top, 0}, 0.5);
  const auto prod = pointwise_multiply(c1, ctop);
  CHECK(max_coeff_diff(prod, convolve(c1, ctop)) <= 1e-15);
  CHECK(std::abs(prod.coefficient(0, {top - 1, 0}) - Complex(0.25)) <= 1e-15);
  CHECK(std::abs(prod.coefficient(0, {-(top - 1), 0}) - Complex(0.25)) <= 1e-15);
  CHECK(std::abs(prod.at(0, 1)) <= 1e-15);

  for (std::uint64_t t = 0; t < 5; ++t) {
    const auto a = random_field(g, 1, 11, 2 * t, {.decay = 0.0});
    const auto b = random_field(g, 1, 11, 2 * t + 1, {.decay = 0.0});
    CHECK(max_coeff_diff(pointwise_multiply(a, b), convolve(a, b)) <= 1e-13);
  }
  CHECK_THROWS_AS(pointwise_multiply(f, SpectralField(TorusGrid(1, 16), 1)), GridMismatch);
}

TEST_CASE("multiplication bound does not grow with N") {
  // ‖fg‖_{H^p} <= C ‖f‖_{H^q} ‖g‖_{H^p} with q = 2 > d/2.
  const double q = 2.0;
  for (double p : {0.0, 1.0, 2.0}) {
    std::vector<double> maxima;
    for (int n : {32, 64, 128}) {
      const TorusGrid g(1, n);
      double worst = 0.0;
      for (std::uint64_t t = 0; t < 100; ++t) {
        const auto f = random_field(g, 1, 99, 2 * t, {.decay = q + 0.5 + 0.51});
        const auto h = random_field(g, 1, 99, 2 * t + 1, {.decay = p + 0.5 + 0.51});
        const double r = sobolev_norm(pointwise_multiply(f, h), p) /
                         (sobolev_norm(f, q) * sobolev_norm(h, p));
        worst = std::max(worst, r);
      }
      maxima.push_back(worst);
    }
    CAPTURE(p);
    CHECK(maxima[2] <= 1.1 * maxima[0]);
    CHECK(maxima[1] <= 1.1 * maxima[0]);
  }
}

TEST_CASE("partial derivatives") {
  const TorusGrid g(1, 16);
  CHECK(partial_derivative(SpectralField::scalar_constant(g, 3.0), 0).max_abs_coefficient() == 0.0);
  const auto s = sampled(g, [](Point x) { return std::sin(2 * pi * x[0]); });
  const auto c = sampled(g, [](Point x) { return 2 * pi * std::cos(2 * pi * x[0]); });
  CHECK(max_coeff_diff(partial_derivative(s, 0), c) <= 1e-14);
  CHECK_THROWS_AS(partial_derivative(s, 1), InvalidParameter);

  const TorusGrid g2(2, 16);
  const auto f = random_field(g2, 1, 5, 0);
  const auto a = partial_derivative(partial_derivative(f, 0), 1);
  const auto b = partial_derivative(partial_derivative(f, 1), 0);
  CHECK(max_coeff_diff(a, b) <= 1e-13 * a.max_abs_coefficient());
}

TEST_CASE("evaluate reproduces samples and matches an oversampled oracle") {
  const TorusGrid g(1, 32);
  const auto f = random_field(g, 1, 21, 0, {.decay = 1.0});
  const auto pts = g.points();
  const auto vals = evaluate(f, pts);
  const auto samp = f.samples();
  double scale = 0.0;
  for (double v : samp) scale = std::max(scale, std::abs(v));
  for (std::size_t i = 0; i < pts.size(); ++i) CHECK(std::abs(vals[i] - samp[i]) <= 1e-12 * scale);

  const auto s = sampled(g, [](Point x) { return std::sin(2 * pi * x[0]); });
  const Point quarter{0.25, 0.0};
  CHECK(evaluate(s, std::span(&quarter, 1))[0] == doctest::Approx(1.0).epsilon(1e-14));

  // Oracle: samples on a 4N grid, then a Taylor expansion from the nearest
  // fine sample using derivative fields sampled on the same grid.
  const TorusGrid fine(1, 4 * g.n());
  SpectralField lifted(fine, 1);
  for (std::size_t i : g.band_indices()) lifted.at(0, fine.index_of(g.frequency(i))) = f.at(0, i);
  std::vector<std::vector<double>> derivs;
  SpectralField d = lifted;
  for (int m = 0; m <= 30; ++m) {
    derivs.push_back(d.samples());
    d = partial_derivative(d, 0);
  }
  const CounterRng rng(4, 4);
  for (int t = 0; t < 50; ++t) {
    const double x = rng.uniform(static_cast<std::uint64_t>(t));
    const auto j = static_cast<std::size_t>(std::lround(x * fine.n())) % fine.n();
    double h = x - static_cast<double>(j) / fine.n();
    h -= std::round(h);
    double oracle = 0.0, term = 1.0;
    for (int m = 0; m <= 30; ++m) {
      oracle += derivs[m][j] * term;
      term *= h / (m + 1);
    }
    const Point p{x, 0.0};
    CHECK(std::abs(evaluate(f, std::span(&p, 1))[0] - oracle) <= 1e-10 * scale);
  }
}

TEST_CASE("compose with identity, translations and round trips") {
  const TorusGrid g(1, 128);
  const auto v = random_field(g, 1, 8, 0, {.decay = 2.0, .max_mode = 8});
  CHECK(max_coeff_diff(compose(v, Diffeo::identity(g)), v) <= 1e-12);

  const double c = 0.137;
  const auto s = sampled(g, [](Point x) { return std::sin(2 * pi * x[0]); });
  const auto shifted = sampled(g, [c](Point x) { return std::sin(2 * pi * (x[0] + c)); });
  const Diffeo tau = Diffeo::translation(g, {c, 0.0});
  CHECK(max_coeff_diff(compose(s, tau), shifted) <= 1e-13);
  for (double q : {0.0, 1.0, 3.0}) {
    CHECK(sobolev_norm(compose(v, tau), q) == doctest::Approx(sobolev_norm(v, q)).epsilon(1e-12));
  }

  auto disp = random_field(g, 1, 8, 1, {.decay = 3.0, .max_mode = 4, .include_mean = false});
  disp *= 0.02 / sobolev_norm(disp, 3.0);
  const Diffeo phi(disp);
  const Diffeo inv = invert_diffeo(phi, 1e-13);
  CHECK(inversion_residual(phi, inv) <= 1e-10);
  const auto back = compose(compose(v, phi), inv);
  CHECK(sobolev_norm(back - v, 0.0) <= 1e-6 * sobolev_norm(v, 0.0));

  const auto w = random_field(g, 1, 8, 2);
  const auto lhs = compose(2.0 * v - w, phi);
  const auto rhs = 2.0 * compose(v, phi) - compose(w, phi);
  CHECK(max_coeff_diff(lhs, rhs) <= 1e-13);
}

TEST_CASE("invert_diffeo") {
  const TorusGrid g(1, 128);
  const Diffeo id = Diffeo::identity(g);
  CHECK(invert_diffeo(id, 1e-12).displacement().max_abs_coefficient() == 0.0);

  const Diffeo tau = Diffeo::translation(g, {0.3, 0.0});
  const Diffeo tinv = invert_diffeo(tau, 1e-13);
  CHECK(std::abs(tinv.displacement().at(0, 0) - Complex(-0.3)) <= 1e-13);

  const auto f = sampled(g, [](Point x) { return 0.1 * std::sin(2 * pi * x[0]); });
  const Diffeo phi(f);
  const Diffeo psi = invert_diffeo(phi, 1e-13);
  CHECK(inversion_residual(phi, psi) <= 1e-10);

  const TorusGrid g2(2, 32);
  auto f2 = random_field(g2, 2, 12, 0, {.decay = 3.0, .max_mode = 3});
  f2 *= 0.02 / sobolev_norm(f2, 1.0);
  const Diffeo phi2(f2);
  CHECK(inversion_residual(phi2, invert_diffeo(phi2, 1e-13)) <= 1e-9);
}

TEST_CASE("jacobian_det") {
  const TorusGrid g(1, 64);
  const auto one = SpectralField::scalar_constant(g, 1.0);
  CHECK(max_coeff_diff(jacobian_det(Diffeo::identity(g)), one) == 0.0);

  const Diffeo phi(sampled(g, [](Point x) { return 0.1 * std::sin(2 * pi * x[0]); }));
  const auto expect = sampled(g, [](Point x) { return 1.0 + 0.2 * pi * std::cos(2 * pi * x[0]); });
  CHECK(max_coeff_diff(jacobian_det(phi), expect) <= 1e-13);

  // ∫ J dx is the zero mode; the torus map has degree one.
  const TorusGrid g2(2, 32);
  auto f2 = random_field(g2, 2, 13, 0, {.decay = 3.0});
  f2 *= 0.05 / sobolev_norm(f2, 1.0);
  CHECK(std::abs(jacobian_det(Diffeo(f2)).at(0, 0) - 1.0) <= 1e-10);
  CHECK(std::abs(jacobian_det(phi).at(0, 0) - 1.0) <= 1e-10);

  const auto fold = sampled(g, [](Point x) { return 0.3 * std::sin(2 * pi * x[0]); });
  CHECK_THROWS_AS(Diffeo{fold}, JacobianViolation);
}

TEST_CASE("composition tail vanishes for translations") {
  const TorusGrid g(1, 32);
  const auto v = random_field(g, 1, 2, 0, {.decay = 2.0, .max_mode = 5});
  CHECK(composition_tail(v, Diffeo::translation(g, {0.2, 0.0})) <= 1e-28);
  const Diffeo phi(sampled(g, [](Point x) { return 0.05 * std::sin(2 * pi * x[0]); }));
  const double tail = composition_tail(v, phi);
  CHECK(tail > 0.0);
  CHECK(tail < 1e-3);
}

TEST_CASE("field snapshot files") {
  const TorusGrid g(2, 8);
  const auto f = random_field(g, 2, 1, 0);
  std::stringstream buf;
  write_field(buf, f);
  const auto back = read_field(buf);
  CHECK(max_coeff_diff(back, f) == 0.0);

  std::stringstream bad("EPDIFF-FIELD v1 d=1 N=8 c=1\n0 1 0.5 0\n");
  CHECK_THROWS_AS(read_field(bad), RealityViolation);
  std::stringstream header("EPDIFF-FIELD v2 d=1 N=8 c=1\n");
  CHECK_THROWS_AS(read_field(header), ParseError);
}
