#include "epdiff/operator.hpp"

#include <cmath>
#include <mutex>
#include <numbers>
#include <optional>
#include <string>

#include "epdiff/errors.hpp"
#include "fft.hpp"

namespace epdiff {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::vector<std::size_t> mirror_positions(const TorusGrid& g) {
  const auto& band = g.band_indices();
  std::vector<std::size_t> out(band.size());
  for (std::size_t p = 0; p < band.size(); ++p) {
    out[p] = static_cast<std::size_t>(g.band_position(g.mirror(band[p])));
  }
  return out;
}

void check_dense_size(std::size_t n) {
  if (n > kDenseCap) {
    throw BoundExceeded("dense operator dimension " + std::to_string(n) + " exceeds the cap of " +
                        std::to_string(kDenseCap));
  }
}

}  // namespace

struct SpectralOperator::SolveCache {
  std::once_flag once;
  std::optional<Eigen::PartialPivLU<Matrix>> lu;
  double rcond = 0.0;
};

Vector to_vector(const SpectralField& f) {
  const TorusGrid& g = f.grid();
  const std::size_t b = g.band_size();
  Vector v(f.components() * b);
  for (int c = 0; c < f.components(); ++c) {
    for (std::size_t p = 0; p < b; ++p) v(c * b + p) = f.at(c, g.band_indices()[p]);
  }
  return v;
}

SpectralField from_vector(const TorusGrid& grid, int components, const Vector& v) {
  const std::size_t b = grid.band_size();
  if (static_cast<std::size_t>(v.size()) != components * b) {
    throw ShapeMismatch("vector length does not match grid and components");
  }
  SpectralField f(grid, components);
  for (int c = 0; c < components; ++c) {
    for (std::size_t p = 0; p < b; ++p) f.at(c, grid.band_indices()[p]) = v(c * b + p);
  }
  return f;
}

SpectralOperator::SpectralOperator(TorusGrid grid, int components, double order)
    : grid_(std::move(grid)), components_(components), order_(order),
      cache_(std::make_shared<SolveCache>()) {
  if (components < 1) throw InvalidParameter("operator needs at least one component");
}

SpectralOperator SpectralOperator::multiplier(const TorusGrid& grid, int components,
                                              std::vector<Matrix> blocks, double order) {
  if (blocks.size() != grid.band_size()) throw ShapeMismatch("one block per band frequency expected");
  for (const auto& b : blocks) {
    if (b.rows() != components || b.cols() != components) throw ShapeMismatch("block size mismatch");
  }
  SpectralOperator op(grid, components, order);
  op.kind_ = Kind::multiplier;
  op.blocks_ = std::make_shared<const std::vector<Matrix>>(std::move(blocks));
  return op;
}

SpectralOperator SpectralOperator::dense(const TorusGrid& grid, int components, Matrix m, double order) {
  const std::size_t n = components * grid.band_size();
  check_dense_size(n);
  if (static_cast<std::size_t>(m.rows()) != n || static_cast<std::size_t>(m.cols()) != n) {
    throw ShapeMismatch("dense matrix size does not match c·|band|");
  }
  SpectralOperator op(grid, components, order);
  op.kind_ = Kind::dense;
  op.dense_ = std::make_shared<const Matrix>(std::move(m));
  return op;
}

SpectralOperator SpectralOperator::identity(const TorusGrid& grid, int components) {
  return multiplier(grid, components,
                    std::vector<Matrix>(grid.band_size(), Matrix::Identity(components, components)), 0.0);
}

SpectralOperator SpectralOperator::zero(const TorusGrid& grid, int components) {
  return multiplier(grid, components,
                    std::vector<Matrix>(grid.band_size(), Matrix::Zero(components, components)), 0.0);
}

SpectralOperator SpectralOperator::derivative(const TorusGrid& grid, int axis, int components) {
  if (axis < 0 || axis >= grid.dim()) throw InvalidParameter("derivative axis out of range");
  std::vector<Matrix> blocks;
  blocks.reserve(grid.band_size());
  for (std::size_t i : grid.band_indices()) {
    const Complex d(0.0, kTwoPi * grid.frequency(i)[axis]);
    blocks.push_back(d * Matrix::Identity(components, components));
  }
  return multiplier(grid, components, std::move(blocks), 1.0);
}

SpectralOperator SpectralOperator::multiplication(const SpectralField& f, int components) {
  if (f.components() != 1) throw ShapeMismatch("multiplication operator needs a scalar field");
  const TorusGrid& g = f.grid();
  const std::size_t b = g.band_size();
  check_dense_size(components * b);
  Matrix m = Matrix::Zero(components * b, components * b);
  const auto& band = g.band_indices();
  for (std::size_t r = 0; r < b; ++r) {
    const Frequency xi = g.frequency(band[r]);
    for (std::size_t c = 0; c < b; ++c) {
      const Frequency k = g.frequency(band[c]);
      const Complex v = f.coefficient(0, {xi[0] - k[0], xi[1] - k[1]});
      if (v == Complex{}) continue;
      for (int comp = 0; comp < components; ++comp) m(comp * b + r, comp * b + c) = v;
    }
  }
  return dense(g, components, std::move(m), 0.0);
}

SpectralOperator SpectralOperator::with_order(double r) const {
  SpectralOperator out = *this;
  out.order_ = r;
  return out;
}

Matrix SpectralOperator::to_dense() const {
  if (kind_ == Kind::dense) return *dense_;
  const std::size_t b = grid_.band_size();
  Matrix m = Matrix::Zero(dimension(), dimension());
  for (std::size_t p = 0; p < b; ++p) {
    for (int i = 0; i < components_; ++i) {
      for (int j = 0; j < components_; ++j) m(i * b + p, j * b + p) = (*blocks_)[p](i, j);
    }
  }
  return m;
}

Vector SpectralOperator::apply(const Vector& v) const {
  if (static_cast<std::size_t>(v.size()) != dimension()) throw ShapeMismatch("vector size mismatch");
  if (kind_ == Kind::dense) return *dense_ * v;
  const std::size_t b = grid_.band_size();
  Vector out = Vector::Zero(v.size());
  for (std::size_t p = 0; p < b; ++p) {
    const Matrix& blk = (*blocks_)[p];
    for (int i = 0; i < components_; ++i) {
      Complex s{};
      for (int j = 0; j < components_; ++j) s += blk(i, j) * v(j * b + p);
      out(i * b + p) = s;
    }
  }
  return out;
}

SpectralField SpectralOperator::apply(const SpectralField& f) const {
  if (f.grid() != grid_) throw GridMismatch();
  if (f.components() != components_) throw ShapeMismatch("operator and field component counts differ");
  return from_vector(grid_, components_, apply(to_vector(f)));
}

SpectralField SpectralOperator::solve(const SpectralField& g) const {
  if (g.grid() != grid_) throw GridMismatch();
  if (g.components() != components_) throw ShapeMismatch("operator and field component counts differ");
  const Vector rhs = to_vector(g);
  if (kind_ == Kind::multiplier) {
    const std::size_t b = grid_.band_size();
    Vector out(rhs.size());
    for (std::size_t p = 0; p < b; ++p) {
      const Matrix& blk = (*blocks_)[p];
      if (components_ == 1) {
        const Complex a = blk(0, 0);
        if (std::abs(a) == 0.0) throw SingularOperator("multiplier vanishes at a band frequency", 0.0);
        out(p) = rhs(p) / a;
        continue;
      }
      Eigen::JacobiSVD<Matrix> svd(blk, Eigen::ComputeFullU | Eigen::ComputeFullV);
      const auto& sv = svd.singularValues();
      if (sv(sv.size() - 1) <= 1e-14 * sv(0)) {
        throw SingularOperator("multiplier block is singular", sv(sv.size() - 1));
      }
      Vector local(components_);
      for (int i = 0; i < components_; ++i) local(i) = rhs(i * b + p);
      const Vector x = svd.solve(local);
      for (int i = 0; i < components_; ++i) out(i * b + p) = x(i);
    }
    return from_vector(grid_, components_, out);
  }
  std::call_once(cache_->once, [this] {
    cache_->lu.emplace(*dense_);
    cache_->rcond = cache_->lu->rcond();
  });
  if (!(cache_->rcond > 1e-14)) {
    const double norm1 = dense_->cwiseAbs().colwise().sum().maxCoeff();
    throw SingularOperator("dense operator is numerically singular", cache_->rcond * norm1);
  }
  Vector x = cache_->lu->solve(rhs);
  // One step of iterative refinement.
  x += cache_->lu->solve(rhs - *dense_ * x);
  return from_vector(grid_, components_, x);
}

double SpectralOperator::reality_defect() const {
  const auto mirror = mirror_positions(grid_);
  const std::size_t b = grid_.band_size();
  double worst = 0.0;
  if (kind_ == Kind::multiplier) {
    for (std::size_t p = 0; p < b; ++p) {
      worst = std::max(worst, ((*blocks_)[mirror[p]] - (*blocks_)[p].conjugate()).cwiseAbs().maxCoeff());
    }
    return worst;
  }
  const Matrix& m = *dense_;
  const int c = components_;
  for (int ci = 0; ci < c; ++ci) {
    for (int cj = 0; cj < c; ++cj) {
      for (std::size_t r = 0; r < b; ++r) {
        for (std::size_t s = 0; s < b; ++s) {
          const Complex a = m(ci * b + r, cj * b + s);
          const Complex am = m(ci * b + mirror[r], cj * b + mirror[s]);
          worst = std::max(worst, std::abs(am - std::conj(a)));
        }
      }
    }
  }
  return worst;
}

double SpectralOperator::frobenius_norm() const {
  if (kind_ == Kind::dense) return dense_->norm();
  double s = 0.0;
  for (const auto& blk : *blocks_) s += blk.squaredNorm();
  return std::sqrt(s);
}

void SpectralOperator::check_compatible(const SpectralOperator& b) const {
  if (grid_ != b.grid_) throw GridMismatch();
  if (components_ != b.components_) throw ShapeMismatch("operator component counts differ");
}

SpectralOperator SpectralOperator::operator+(const SpectralOperator& b) const {
  check_compatible(b);
  const double r = std::max(order_, b.order_);
  if (is_multiplier() && b.is_multiplier()) {
    std::vector<Matrix> blocks(*blocks_);
    for (std::size_t p = 0; p < blocks.size(); ++p) blocks[p] += (*b.blocks_)[p];
    return multiplier(grid_, components_, std::move(blocks), r);
  }
  return dense(grid_, components_, to_dense() + b.to_dense(), r);
}

SpectralOperator SpectralOperator::operator-(const SpectralOperator& b) const {
  return *this + b.scaled(-1.0);
}

SpectralOperator SpectralOperator::scaled(Complex s) const {
  if (is_multiplier()) {
    std::vector<Matrix> blocks(*blocks_);
    for (auto& blk : blocks) blk *= s;
    return multiplier(grid_, components_, std::move(blocks), order_);
  }
  return dense(grid_, components_, s * *dense_, order_);
}

SpectralOperator SpectralOperator::operator*(const SpectralOperator& b) const {
  check_compatible(b);
  const double r = order_ + b.order_;
  const std::size_t nb = grid_.band_size();
  const int c = components_;
  if (is_multiplier() && b.is_multiplier()) {
    std::vector<Matrix> blocks(nb);
    for (std::size_t p = 0; p < nb; ++p) blocks[p] = (*blocks_)[p] * (*b.blocks_)[p];
    return multiplier(grid_, c, std::move(blocks), r);
  }
  if (!is_multiplier() && !b.is_multiplier()) return dense(grid_, c, *dense_ * *b.dense_, r);
  if (is_multiplier()) {
    // Block-diagonal times dense: mix rows sharing a band position.
    const Matrix& m = *b.dense_;
    Matrix out = Matrix::Zero(m.rows(), m.cols());
    for (std::size_t p = 0; p < nb; ++p) {
      const Matrix& blk = (*blocks_)[p];
      for (int i = 0; i < c; ++i) {
        for (int j = 0; j < c; ++j) {
          if (blk(i, j) != Complex{}) out.row(i * nb + p) += blk(i, j) * m.row(j * nb + p);
        }
      }
    }
    return dense(grid_, c, std::move(out), r);
  }
  const Matrix& m = *dense_;
  Matrix out = Matrix::Zero(m.rows(), m.cols());
  for (std::size_t p = 0; p < nb; ++p) {
    const Matrix& blk = (*b.blocks_)[p];
    for (int i = 0; i < c; ++i) {
      for (int j = 0; j < c; ++j) {
        if (blk(i, j) != Complex{}) out.col(j * nb + p) += blk(i, j) * m.col(i * nb + p);
      }
    }
  }
  return dense(grid_, c, std::move(out), r);
}

SpectralOperator realize(const SymbolSpec& spec, const TorusGrid& grid) {
  if (spec.dim != grid.dim()) throw GridMismatch("symbol dimension does not match grid");
  const int c = spec.components;
  const auto& band = grid.band_indices();
  const std::size_t nb = band.size();

  if (spec.kind == SymbolKind::multiplier) {
    std::vector<Matrix> blocks(nb, Matrix::Zero(c, c));
    for (const auto& t : spec.terms) {
      if (t.x_factor) throw InvalidParameter("multiplier symbol term has an x-factor");
      for (std::size_t p = 0; p < nb; ++p) blocks[p] += t.profile(grid.frequency(band[p])) * t.coupling;
    }
    auto op = SpectralOperator::multiplier(grid, c, std::move(blocks), spec.order);
    const double defect = op.reality_defect();
    if (defect > 1e-12 * std::max(1.0, op.frobenius_norm() / std::sqrt(static_cast<double>(nb)))) {
      throw RealityViolation("symbol violates a(x,-k) = conj a(x,k)");
    }
    return op;
  }

  check_dense_size(c * nb);
  Matrix m = Matrix::Zero(c * nb, c * nb);
  const auto put = [&](std::size_t r, std::size_t s, const Matrix& blk) {
    for (int i = 0; i < c; ++i) {
      for (int j = 0; j < c; ++j) m(i * nb + r, j * nb + s) += blk(i, j);
    }
  };

  if (spec.kind == SymbolKind::separable) {
    for (const auto& t : spec.terms) {
      if (t.x_factor && t.x_factor->grid() != grid) throw GridMismatch("symbol x-factor grid differs");
      for (std::size_t s = 0; s < nb; ++s) {
        const Frequency k = grid.frequency(band[s]);
        const Matrix ak = t.profile(k) * t.coupling;
        if (!t.x_factor) {
          put(s, s, ak);
          continue;
        }
        for (std::size_t r = 0; r < nb; ++r) {
          const Frequency xi = grid.frequency(band[r]);
          const Complex g = t.x_factor->coefficient(0, {xi[0] - k[0], xi[1] - k[1]});
          if (g != Complex{}) put(r, s, g * ak);
        }
      }
    }
  } else {
    if (!spec.table_grid || *spec.table_grid != grid) {
      throw GridMismatch("gridded symbol is tabulated on a different grid");
    }
    const std::size_t n = grid.size();
    const double scale = 1.0 / static_cast<double>(n);
    std::vector<Complex> column(n), hat;
    for (std::size_t s = 0; s < nb; ++s) {
      for (int i = 0; i < c; ++i) {
        for (int j = 0; j < c; ++j) {
          for (std::size_t x = 0; x < n; ++x) column[x] = spec.table[x * n + band[s]](i, j);
          detail::fft(column, hat, grid.dim(), grid.n(), detail::Direction::forward);
          const Frequency k = grid.frequency(band[s]);
          for (std::size_t r = 0; r < nb; ++r) {
            const Frequency xi = grid.frequency(band[r]);
            const Frequency lambda{xi[0] - k[0], xi[1] - k[1]};
            if (!grid.in_band(lambda)) continue;
            m(i * nb + r, j * nb + s) += hat[grid.index_of(lambda)] * scale;
          }
        }
      }
    }
  }
  auto op = SpectralOperator::dense(grid, c, std::move(m), spec.order);
  const double defect = op.reality_defect();
  if (defect > 1e-12 * std::max(1.0, op.to_dense().cwiseAbs().maxCoeff())) {
    throw RealityViolation("symbol violates a(x,-k) = conj a(x,k)");
  }
  return op;
}

SpectralField apply(const SpectralOperator& a, const SpectralField& f) { return a.apply(f); }

SpectralField solve(const SpectralOperator& a, const SpectralField& g) { return a.solve(g); }

SpectralOperator commutator(const SpectralOperator& a, const SpectralOperator& b) {
  return (a * b - b * a).with_order(a.order() + b.order() - 1.0);
}

SpectralOperator ad_D_alpha(const SpectralOperator& a, const Frequency& alpha, int bound) {
  const int d = a.grid().dim();
  int total = 0;
  for (int j = 0; j < 2; ++j) {
    if (alpha[j] < 0 || (j >= d && alpha[j] != 0)) throw InvalidParameter("invalid multi-index");
    total += alpha[j];
  }
  if (total > bound) {
    throw BoundExceeded("|alpha| = " + std::to_string(total) + " exceeds the bound " + std::to_string(bound));
  }
  SpectralOperator out = a;
  for (int j = d - 1; j >= 0; --j) {
    const auto dj = SpectralOperator::derivative(a.grid(), j, a.components());
    for (int m = 0; m < alpha[j]; ++m) out = commutator(dj, out);
  }
  return out;
}

SpectralOperator nabla(const SpectralField& u, int components) {
  const TorusGrid& g = u.grid();
  if (u.components() != g.dim()) throw ShapeMismatch("nabla needs a vector field with d components");
  SpectralOperator out = SpectralOperator::zero(g, components);
  for (int j = 0; j < g.dim(); ++j) {
    out = out + SpectralOperator::multiplication(u.component(j), components) *
                    SpectralOperator::derivative(g, j, components);
  }
  return out.with_order(1.0);
}

}  // namespace epdiff
