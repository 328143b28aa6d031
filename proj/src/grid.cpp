#include "epdiff/grid.hpp"

#include <cmath>
#include <cstdlib>
#include <string>

#include "epdiff/errors.hpp"

namespace epdiff {

namespace {

int axis_frequency(int i, int n) { return i < n / 2 ? i : i - n; }

int axis_index(int k, int n) { return k >= 0 ? k : k + n; }

}  // namespace

TorusGrid::TorusGrid(int dim, int n) : dim_(dim), n_(n) {
  if (dim != 1 && dim != 2) {
    throw InvalidParameter("grid dimension must be 1 or 2, got " + std::to_string(dim));
  }
  if (n < 8 || n % 2 != 0) {
    throw InvalidParameter("points per axis must be even and >= 8, got " + std::to_string(n));
  }
  size_ = dim == 1 ? static_cast<std::size_t>(n) : static_cast<std::size_t>(n) * n;

  auto band = std::make_shared<Band>();
  band->position.assign(size_, -1);
  band->mirror.resize(size_);
  for (std::size_t i = 0; i < size_; ++i) {
    const Frequency k = frequency(i);
    if (!is_nyquist(i)) {
      band->position[i] = static_cast<std::ptrdiff_t>(band->indices.size());
      band->indices.push_back(i);
      band->mirror[i] = index_of({-k[0], -k[1]});
    } else {
      band->mirror[i] = i;
    }
  }
  band_ = std::move(band);
}

Frequency TorusGrid::frequency(std::size_t index) const {
  if (dim_ == 1) return {axis_frequency(static_cast<int>(index), n_), 0};
  const int i0 = static_cast<int>(index / n_);
  const int i1 = static_cast<int>(index % n_);
  return {axis_frequency(i0, n_), axis_frequency(i1, n_)};
}

bool TorusGrid::is_nyquist(std::size_t index) const {
  const int h = n_ / 2;
  if (dim_ == 1) return static_cast<int>(index) == h;
  return static_cast<int>(index / n_) == h || static_cast<int>(index % n_) == h;
}

bool TorusGrid::in_band(const Frequency& k) const {
  const int kmax = max_frequency();
  for (int a = 0; a < dim_; ++a) {
    if (std::abs(k[a]) > kmax) return false;
  }
  for (int a = dim_; a < 2; ++a) {
    if (k[a] != 0) return false;
  }
  return true;
}

std::size_t TorusGrid::index_of(const Frequency& k) const {
  if (dim_ == 1) return static_cast<std::size_t>(axis_index(k[0], n_));
  return static_cast<std::size_t>(axis_index(k[0], n_)) * n_ + axis_index(k[1], n_);
}

Point TorusGrid::point(std::size_t index) const {
  if (dim_ == 1) return {static_cast<double>(index) / n_, 0.0};
  return {static_cast<double>(index / n_) / n_, static_cast<double>(index % n_) / n_};
}

std::vector<Point> TorusGrid::points() const {
  std::vector<Point> out(size_);
  for (std::size_t i = 0; i < size_; ++i) out[i] = point(i);
  return out;
}

double TorusGrid::japanese(const Frequency& k) {
  return std::sqrt(1.0 + static_cast<double>(k[0]) * k[0] + static_cast<double>(k[1]) * k[1]);
}

int max_norm(const Frequency& k, int dim) {
  int m = 0;
  for (int a = 0; a < dim; ++a) m = std::max(m, std::abs(k[a]));
  return m;
}

double wrap_unit(double x) {
  double y = x - std::floor(x);
  if (y >= 1.0) y -= 1.0;
  return y;
}

double wrap_signed(double x) { return x - std::floor(x + 0.5); }

}  // namespace epdiff
