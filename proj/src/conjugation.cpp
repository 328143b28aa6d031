#include "epdiff/conjugation.hpp"

#include <cmath>
#include <sstream>

#include "epdiff/commutator_lab.hpp"
#include "epdiff/errors.hpp"
#include "epdiff/field_io.hpp"
#include "epdiff/random.hpp"

namespace epdiff {

namespace {

void check_direction(const SpectralField& h, const TorusGrid& g) {
  if (h.grid() != g) throw GridMismatch();
  if (h.components() != g.dim()) throw ShapeMismatch("a diffeomorphism direction needs d components");
}

SpectralField twisted_apply(const SpectralOperator& a, const SpectralField& displacement, const SpectralField& v) {
  return TwistedOperator(a, Diffeo(displacement)).apply(v);
}

std::string json_array(const std::vector<double>& xs) {
  std::string out = "[";
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ", ";
    out += format_double(xs[i]);
  }
  return out + "]";
}

}  // namespace

TwistedOperator::TwistedOperator(SpectralOperator base, Diffeo phi, double inversion_tol)
    : base_(std::move(base)), phi_(std::move(phi)), phi_inv_(invert_diffeo(phi_, inversion_tol)) {
  if (base_.grid() != phi_.grid()) throw GridMismatch();
}

SpectralField TwistedOperator::apply(const SpectralField& v) const {
  return compose(base_.apply(compose(v, phi_inv_)), phi_);
}

SpectralOperator TwistedOperator::assemble() const {
  const TorusGrid& g = base_.grid();
  if (g.dim() != 1 || g.n() > 64) throw InvalidParameter("assembly is limited to d = 1, N <= 64");
  const int c = base_.components();
  const std::size_t nb = g.band_size();
  Matrix m = Matrix::Zero(c * nb, c * nb);
  // Real probes cos and sin per mode; complex columns follow by linearity.
  for (int ci = 0; ci < c; ++ci) {
    for (std::size_t p = 0; p < nb; ++p) {
      const Frequency k = g.frequency(g.band_indices()[p]);
      if (k[0] < 0) continue;
      if (k[0] == 0) {
        SpectralField e(g, c);
        e.set_mode(ci, k, 1.0);
        m.col(ci * nb + p) = to_vector(apply(e));
        continue;
      }
      SpectralField cs(g, c), sn(g, c);
      cs.set_mode(ci, k, 1.0);
      sn.set_mode(ci, k, Complex(0.0, 1.0));
      const Vector ac = to_vector(apply(cs)), as = to_vector(apply(sn));
      const auto pm = static_cast<std::size_t>(g.band_position(g.index_of({-k[0], 0})));
      const Complex i(0.0, 1.0);
      m.col(ci * nb + p) = 0.5 * (ac - i * as);
      m.col(ci * nb + pm) = 0.5 * (ac + i * as);
    }
  }
  return SpectralOperator::dense(g, c, std::move(m), base_.order());
}

TwistedOperator twist(const SpectralOperator& a, const Diffeo& phi) { return TwistedOperator(a, phi); }

Diffeo compose_diffeo(const Diffeo& phi, const Diffeo& psi) {
  if (phi.grid() != psi.grid()) throw GridMismatch();
  return Diffeo(psi.displacement() + compose(phi.displacement(), psi));
}

SpectralField gateaux_fd(const SpectralOperator& a, const SpectralField& dphi, const SpectralField& v, double eps) {
  check_direction(dphi, a.grid());
  if (!(eps > 0.0)) throw InvalidParameter("eps must be positive");
  const SpectralField plus = twisted_apply(a, eps * dphi, v);
  const SpectralField minus = twisted_apply(a, -eps * dphi, v);
  return (plus - minus) * (0.5 / eps);
}

SpectralField second_gateaux_fd(const SpectralOperator& a, const SpectralField& h1, const SpectralField& h2,
                                const SpectralField& v, double eps) {
  check_direction(h1, a.grid());
  check_direction(h2, a.grid());
  if (!(eps > 0.0)) throw InvalidParameter("eps must be positive");
  const auto at = [&](double s1, double s2) { return twisted_apply(a, (s1 * eps) * h1 + (s2 * eps) * h2, v); };
  return (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) * (0.25 / (eps * eps));
}

SpectralField derivative_formula(const SpectralOperator& a, const SpectralField& dphi, const SpectralField& v) {
  check_direction(dphi, a.grid());
  const SpectralOperator nab = nabla(dphi, a.components());
  return nab.apply(a.apply(v)) - a.apply(nab.apply(v));
}

SpectralField second_derivative_formula(const SpectralOperator& a, const SpectralField& h1,
                                        const SpectralField& h2, const SpectralField& v) {
  check_direction(h1, a.grid());
  check_direction(h2, a.grid());
  const std::vector<SpectralField> hs{h1, h2};
  return a_n(hs, a).apply(v);
}

std::string ConvergenceReport::to_json() const {
  std::ostringstream os;
  os << "{\"eps\": " << json_array(eps) << ", \"errors\": " << json_array(errors)
     << ", \"slope\": " << format_double(slope) << "}";
  return os.str();
}

ConvergenceReport first_derivative_study(const SpectralOperator& a, const SpectralField& dphi,
                                         const SpectralField& v, std::span<const double> eps_ladder) {
  const SpectralField exact = derivative_formula(a, dphi, v);
  ConvergenceReport rep;
  for (double e : eps_ladder) {
    rep.eps.push_back(e);
    rep.errors.push_back(sobolev_norm(gateaux_fd(a, dphi, v, e) - exact, 0.0));
  }
  rep.slope = loglog_slope(rep.eps, rep.errors);
  return rep;
}

ConvergenceReport second_derivative_study(const SpectralOperator& a, const SpectralField& h1,
                                          const SpectralField& h2, const SpectralField& v,
                                          std::span<const double> eps_ladder) {
  const SpectralField exact = second_derivative_formula(a, h1, h2, v);
  ConvergenceReport rep;
  for (double e : eps_ladder) {
    rep.eps.push_back(e);
    rep.errors.push_back(sobolev_norm(second_gateaux_fd(a, h1, h2, v, e) - exact, 0.0));
  }
  rep.slope = loglog_slope(rep.eps, rep.errors);
  return rep;
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidParameter("slope fit needs at least two points");
  double mx = 0.0, my = 0.0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw InvalidParameter("slope fit needs positive values");
    mx += std::log(x[i]) / n;
    my += std::log(y[i]) / n;
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0.0) throw InvalidParameter("slope fit needs distinct abscissae");
  return sxy / sxx;
}

double weighted_operator_norm(const SpectralOperator& m, double q, double r, int max_iterations, double tol) {
  const TorusGrid& g = m.grid();
  const std::size_t nb = g.band_size();
  const std::size_t dim = m.dimension();
  Matrix b = m.to_dense();
  for (std::size_t i = 0; i < dim; ++i) {
    const double w = TorusGrid::japanese(g.frequency(g.band_indices()[i % nb]));
    b.row(i) *= std::pow(w, q - r);
    b.col(i) *= std::pow(w, -q);
  }
  const CounterRng rng(0x9a9a, 1);
  Vector x(dim);
  for (std::size_t i = 0; i < dim; ++i) x(i) = Complex(rng.normal(i, 0), rng.normal(i, 1));
  x.normalize();
  double sigma = 0.0;
  for (int it = 0; it < max_iterations; ++it) {
    const Vector bx = b * x;
    const double next = bx.norm();
    Vector y = b.adjoint() * bx;
    const double ny = y.norm();
    if (ny == 0.0) return 0.0;
    x = y / ny;
    if (std::abs(next - sigma) <= tol * next) {
      sigma = next;
      break;
    }
    sigma = next;
  }
  return sigma;
}

}  // namespace epdiff
