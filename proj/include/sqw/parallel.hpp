#pragma once

#include <cstddef>
#include <exception>
#include <span>
#include <vector>

#include <omp.h>

namespace sqw {

/// Serial reference for Executor::map; results[i] = fn(i) in index order.
template <class T, class Fn>
std::vector<T> serial_map(std::size_t n, Fn&& fn) {
  std::vector<T> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(fn(i));
  return out;
}

/// OpenMP work-item executor. Each item writes its own slot, so results do not
/// depend on the schedule or the thread count.
class Executor {
 public:
  // threads <= 0 selects the hardware parallelism.
  explicit Executor(int threads = 0)
      : threads_(threads > 0 ? threads : omp_get_max_threads()) {}

  int threads() const { return threads_; }

  template <class T, class Fn>
  std::vector<T> map(std::size_t n, Fn&& fn) const {
    if (threads_ == 1 || n < 2) return serial_map<T>(n, fn);
    std::vector<T> out(n);
    std::vector<std::exception_ptr> errors(n);
    const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic) num_threads(threads_)
    for (long long i = 0; i < count; ++i) {
      const auto k = static_cast<std::size_t>(i);
      try {
        out[k] = fn(k);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
    for (auto& err : errors)
      if (err) std::rethrow_exception(err);
    return out;
  }

 private:
  int threads_;
};

/// Fixed-order pairwise summation.
double pairwise_sum(std::span<const double> values);

}  // namespace sqw
