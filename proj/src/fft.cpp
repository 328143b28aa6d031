#include "fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>

namespace epdiff::detail {

namespace {

// FFTW planning is not thread-safe; execution with the new-array interface is.
class PlanCache {
 public:
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  fftw_plan get(int dim, int m, Direction dir) {
    std::lock_guard lock(mutex_);
    const auto key = std::make_tuple(dim, m, dir);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    const int total = dim == 1 ? m : m * m;
    std::vector<std::complex<double>> a(total), b(total);
    auto* in = reinterpret_cast<fftw_complex*>(a.data());
    auto* out = reinterpret_cast<fftw_complex*>(b.data());
    const int sign = dir == Direction::forward ? FFTW_FORWARD : FFTW_BACKWARD;
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    fftw_plan plan = dim == 1 ? fftw_plan_dft_1d(m, in, out, sign, flags)
                              : fftw_plan_dft_2d(m, m, in, out, sign, flags);
    plans_.emplace(key, plan);
    return plan;
  }

 private:
  std::mutex mutex_;
  std::map<std::tuple<int, int, Direction>, fftw_plan> plans_;
};

PlanCache& cache() {
  static PlanCache instance;
  return instance;
}

}  // namespace

void fft(const std::vector<std::complex<double>>& in, std::vector<std::complex<double>>& out,
         int dim, int m, Direction dir) {
  const std::size_t total = dim == 1 ? m : static_cast<std::size_t>(m) * m;
  out.resize(total);
  fftw_plan plan = cache().get(dim, m, dir);
  // fftw_execute_dft never writes to its input for out-of-place c2c transforms.
  fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(const_cast<std::complex<double>*>(in.data())),
                   reinterpret_cast<fftw_complex*>(out.data()));
}

}  // namespace epdiff::detail
