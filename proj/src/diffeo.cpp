#include "epdiff/diffeo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "epdiff/errors.hpp"

namespace epdiff {

namespace {

double min_det_from_samples(const SpectralField& f) {
  const TorusGrid& g = f.grid();
  const std::size_t n = g.size();
  double m = std::numeric_limits<double>::infinity();
  if (g.dim() == 1) {
    const auto d = partial_derivative(f, 0).samples();
    for (std::size_t i = 0; i < n; ++i) m = std::min(m, 1.0 + d[i]);
    return m;
  }
  const auto d0 = partial_derivative(f, 0).samples();
  const auto d1 = partial_derivative(f, 1).samples();
  // d0 holds ∂_0 f^0 then ∂_0 f^1; d1 likewise for ∂_1.
  for (std::size_t i = 0; i < n; ++i) {
    const double a = 1.0 + d0[i], b = d1[i];
    const double c = d0[n + i], e = 1.0 + d1[n + i];
    m = std::min(m, a * e - b * c);
  }
  return m;
}

}  // namespace

Diffeo::Diffeo(SpectralField displacement) : f_(std::move(displacement)) {
  if (f_.components() != f_.grid().dim()) {
    throw ShapeMismatch("diffeomorphism displacement must have d components");
  }
  const double defect = f_.reality_defect();
  if (defect > 1e-12 * (1.0 + f_.max_abs_coefficient())) {
    throw RealityViolation("displacement is not a real field");
  }
  min_det_ = min_det_from_samples(f_);
  if (!(min_det_ > 0.0)) {
    throw JacobianViolation("det(I + df) is not positive at every collocation point", min_det_);
  }
}

Diffeo Diffeo::identity(const TorusGrid& grid) { return Diffeo(SpectralField(grid, grid.dim())); }

Diffeo Diffeo::translation(const TorusGrid& grid, const Point& c) {
  return Diffeo(SpectralField::constant(grid, std::span<const double>(c.data(), grid.dim())));
}

std::vector<Point> Diffeo::warped_points() const {
  const TorusGrid& g = grid();
  const auto s = f_.samples();
  std::vector<Point> out = g.points();
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (int a = 0; a < g.dim(); ++a) out[i][a] += s[a * g.size() + i];
  }
  return out;
}

SpectralField compose(const SpectralField& v, const Diffeo& phi) {
  if (v.grid() != phi.grid()) throw GridMismatch();
  const TorusGrid& g = v.grid();
  const auto pts = phi.warped_points();
  const int c = v.components();
  std::vector<double> samples(static_cast<std::size_t>(c) * g.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    PointEvaluator ev(g, pts[i]);
    for (int k = 0; k < c; ++k) samples[k * g.size() + i] = ev.value(v, k);
  }
  return SpectralField::from_samples(g, c, samples);
}

double composition_tail(const SpectralField& v, const Diffeo& phi) {
  if (v.grid() != phi.grid()) throw GridMismatch();
  const TorusGrid& g = v.grid();
  const TorusGrid fine(g.dim(), 2 * g.n());
  // Lift v and the displacement to the fine grid, then compose there.
  SpectralField vf(fine, v.components()), ff(fine, g.dim());
  for (std::size_t i : g.band_indices()) {
    const std::size_t j = fine.index_of(g.frequency(i));
    for (int c = 0; c < v.components(); ++c) vf.at(c, j) = v.at(c, i);
    for (int c = 0; c < g.dim(); ++c) ff.at(c, j) = phi.displacement().at(c, i);
  }
  const SpectralField w = compose(vf, Diffeo(ff));
  double outside = 0.0, total = 0.0;
  for (std::size_t j : fine.band_indices()) {
    double e = 0.0;
    for (int c = 0; c < w.components(); ++c) e += std::norm(w.at(c, j));
    total += e;
    if (!g.in_band(fine.frequency(j))) outside += e;
  }
  return total > 0.0 ? outside / total : 0.0;
}

Diffeo invert_diffeo(const Diffeo& phi, const InversionOptions& options) {
  if (!(options.tol > 0.0)) throw InvalidParameter("inversion tolerance must be positive");
  const TorusGrid& grid = phi.grid();
  const int d = grid.dim();
  const SpectralField& f = phi.displacement();
  std::vector<SpectralField> grad;
  for (int a = 0; a < d; ++a) grad.push_back(partial_derivative(f, a));

  std::vector<double> g(static_cast<std::size_t>(d) * grid.size(), 0.0);
  if (options.initial_guess != nullptr) {
    if (options.initial_guess->grid() != grid) throw GridMismatch();
    g = options.initial_guess->displacement().samples();
  }

  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Point x = grid.point(i);
    Point gi{};
    for (int a = 0; a < d; ++a) gi[a] = g[a * grid.size() + i];

    // Residual r = g + f(x + g): φ(x + g) − x measured as a displacement.
    const auto residual = [&](const PointEvaluator& ev, const Point& disp) {
      Point r{};
      for (int a = 0; a < d; ++a) r[a] = disp[a] + ev.value(f, a);
      return r;
    };
    const auto norm = [d](const Point& r) {
      double m = 0.0;
      for (int a = 0; a < d; ++a) m = std::max(m, std::abs(r[a]));
      return m;
    };

    double res = 0.0;
    bool converged = false;
    for (int it = 0; it < options.max_iterations; ++it) {
      const Point y{x[0] + gi[0], x[1] + gi[1]};
      PointEvaluator ev(grid, y);
      const Point r = residual(ev, gi);
      res = norm(r);
      if (res <= options.tol) {
        converged = true;
        break;
      }
      if (it < 2 && options.initial_guess == nullptr) {
        for (int a = 0; a < d; ++a) gi[a] -= r[a];
        continue;
      }
      // Newton step with J = I + ∂f(y).
      if (d == 1) {
        const double j = 1.0 + ev.value(grad[0], 0);
        gi[0] -= r[0] / j;
      } else {
        const double a = 1.0 + ev.value(grad[0], 0), b = ev.value(grad[1], 0);
        const double c = ev.value(grad[0], 1), e = 1.0 + ev.value(grad[1], 1);
        const double det = a * e - b * c;
        gi[0] -= (e * r[0] - b * r[1]) / det;
        gi[1] -= (a * r[1] - c * r[0]) / det;
      }
    }
    if (!converged) {
      throw InversionFailure("diffeomorphism inversion did not converge at point " +
                                 std::to_string(i),
                             res);
    }
    for (int a = 0; a < d; ++a) g[a * grid.size() + i] = gi[a];
  }
  return Diffeo(SpectralField::from_samples(grid, d, g));
}

Diffeo invert_diffeo(const Diffeo& phi, double tol) {
  InversionOptions options;
  options.tol = tol;
  return invert_diffeo(phi, options);
}

double inversion_residual(const Diffeo& phi, const Diffeo& psi) {
  if (phi.grid() != psi.grid()) throw GridMismatch();
  const TorusGrid& grid = phi.grid();
  const int d = grid.dim();
  const auto y = psi.warped_points();
  double worst = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    PointEvaluator ev(grid, y[i]);
    const Point x = grid.point(i);
    for (int a = 0; a < d; ++a) {
      const double r = y[i][a] + ev.value(phi.displacement(), a) - x[a];
      worst = std::max(worst, std::abs(wrap_signed(r)));
    }
  }
  return worst;
}

SpectralField jacobian_det(const Diffeo& phi) {
  const TorusGrid& g = phi.grid();
  const SpectralField& f = phi.displacement();
  SpectralField one = SpectralField::scalar_constant(g, 1.0);
  if (g.dim() == 1) return one + partial_derivative(f, 0);
  const SpectralField a = one + partial_derivative(f.component(0), 0);
  const SpectralField b = partial_derivative(f.component(0), 1);
  const SpectralField c = partial_derivative(f.component(1), 0);
  const SpectralField e = one + partial_derivative(f.component(1), 1);
  return pointwise_multiply(a, e) - pointwise_multiply(b, c);
}

}  // namespace epdiff
